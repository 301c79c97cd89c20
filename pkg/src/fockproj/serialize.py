"""Versioned JSON envelope for states and operators (the CLI caching format)."""
from __future__ import annotations

import functools
import importlib.resources
import json

import jsonschema
import numpy as np

from .errors import ConfigurationError, DimensionMismatchError
from .fock import DenseOperator, DensityOperator, FockVector

ENVELOPE_VERSION = 1

_KINDS = {
    FockVector: "vector",
    DensityOperator: "density",
    DenseOperator: "operator",
}


@functools.lru_cache(maxsize=None)
def load_schema(name):
    path = importlib.resources.files("fockproj").joinpath("schemas", name)
    return json.loads(path.read_text())


def to_envelope(obj):
    """JSON document {version, cutoff, modes, kind, data:[[re,im],...]}.

    data is the row-major flattening; the shape is implied by kind and
    cutoff**modes.
    """
    kind = _KINDS.get(type(obj))
    if kind is None:
        raise ConfigurationError(
            f"cannot serialize {type(obj).__name__}; expected FockVector, "
            "DensityOperator or DenseOperator")
    flat = np.asarray(obj.data).ravel()
    return {
        "version": ENVELOPE_VERSION,
        "cutoff": int(obj.cutoff),
        "modes": int(obj.modes),
        "kind": kind,
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def validate_envelope(doc):
    try:
        jsonschema.validate(doc, load_schema("state.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(
            f"invalid state envelope at {exc.json_path}: {exc.message}") from exc


def from_envelope(doc):
    validate_envelope(doc)
    cutoff = doc["cutoff"]
    modes = doc["modes"]
    dim = cutoff ** modes
    pairs = np.asarray(doc["data"], dtype=float)
    flat = pairs[:, 0] + 1j * pairs[:, 1]
    kind = doc["kind"]
    if kind == "vector":
        if flat.size != dim:
            raise DimensionMismatchError(
                f"vector envelope has {flat.size} entries, expected {dim}")
        return FockVector(flat, cutoff, modes)
    if flat.size != dim * dim:
        raise DimensionMismatchError(
            f"{kind} envelope has {flat.size} entries, expected {dim * dim}")
    mat = flat.reshape(dim, dim)
    if kind == "density":
        return DensityOperator(mat, cutoff, modes)
    return DenseOperator(mat, cutoff, modes)


def save(obj, path):
    with open(path, "w") as fh:
        json.dump(to_envelope(obj), fh)


def load(path):
    with open(path) as fh:
        return from_envelope(json.load(fh))
