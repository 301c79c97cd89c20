"""Config-driven experiment runner: figure sweeps, seeded estimators, CSV output.

Every run writes a results CSV (one row per sweep point, with the analytic
reference column where one exists) and a manifest JSON.  The manifest hash
covers config + library version only, so CSV output is bit-identical across
reruns of the same config and seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import jsonschema
import numpy as np

from . import __version__, analytics, channels, fock, gates, knitting, lcu, projectors, vqed
from .errors import ConfigurationError, FockProjError, UnstableDenominatorError
from .serialize import load_schema

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

OUTPUT_DIR_ENV = "FOCKPROJ_OUTPUT_DIR"

SINGLE_MODE_CUTOFF = 60
TWO_MODE_CUTOFF = 30
FOUR_MODE_CUTOFF = knitting.DEFAULT_TELEPORT_CUTOFF


# ---------------------------------------------------------------------------
# Config loading and validation


def validate_config(doc):
    schema = load_schema("config.schema.json")
    validator = jsonschema.Draft202012Validator(schema)
    errors = list(validator.iter_errors(doc))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise ConfigurationError(f"config invalid at {best.json_path}: {best.message}")


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path!r} is not valid JSON: {exc}") from exc
    validate_config(doc)
    return doc


def manifest_hash_for(doc):
    payload = json.dumps({"config": doc, "version": __version__},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Shared helpers


def _coherent(alpha, cutoff):
    return gates.displacement(alpha, cutoff) @ fock.vacuum(cutoff)


def _grid_kwargs(params):
    kwargs = {}
    if "grid_points" in params:
        kwargs["point_count"] = params["grid_points"]
    if "grid_policy" in params:
        kwargs["policy"] = projectors.SpanPolicy(params["grid_policy"])
    if "sigma_span" in params:
        kwargs["sigma_span"] = params["sigma_span"]
    return kwargs


def _point_seed(seed, index):
    return int(np.random.default_rng([seed, index]).integers(2 ** 31 - 1))


def _map_points(fn, points, workers):
    if workers <= 1:
        return [fn(pt) for pt in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


# ---------------------------------------------------------------------------
# Experiment runners (each returns a list of row dicts)


def _project_rows(kind, params, workers):
    """Shared sweep body for the three single-projector experiments."""
    grid_kwargs = _grid_kwargs(params)
    if kind is projectors.ProjectorKind.SQ:
        cutoff = params.get("cutoff", SINGLE_MODE_CUTOFF)
        resource_kind = gates.ResourceStateKind.SQUEEZED_VACUUM
        nul = analytics.NullifierSpec(analytics.NullifierKind.SQ_X)
        proj_kwargs = {}
        var_curve, prob_curve = None, None  # closed forms inline below
    elif kind is projectors.ProjectorKind.CPS:
        cutoff = params.get("cutoff", SINGLE_MODE_CUTOFF)
        resource_kind = gates.ResourceStateKind.CPS
        eta = params.get("eta", 0.1)
        nul = analytics.NullifierSpec(analytics.NullifierKind.CPS_PARABOLA, eta=eta)
        proj_kwargs = {"eta": eta}
        var_curve, prob_curve = analytics.Curve.CPS_NULLIFIER, analytics.Curve.CPS_PROB
    else:
        cutoff = params.get("cutoff", TWO_MODE_CUTOFF)
        resource_kind = gates.ResourceStateKind.CLUSTER
        g = params.get("g", 1.0)
        nul = analytics.NullifierSpec(analytics.NullifierKind.CLUSTER_PAIR, g=g)
        proj_kwargs = {"g": g}
        var_curve, prob_curve = analytics.Curve.CLUSTER_NULLIFIER, analytics.Curve.CLUSTER_PROB

    def one(point):
        r_db, dr_db = point
        r = analytics.db_to_r(r_db)
        dr = analytics.db_to_r(dr_db)
        spec = gates.ResourceStateSpec(resource_kind, r=r, eta=proj_kwargs.get("eta", 0.0),
                                       g=proj_kwargs.get("g", 1.0))
        state, _ = gates.build_resource_state(spec, cutoff)
        if dr > 0:
            proj = projectors.build_smeared_projector(
                kind, projectors.gamma_from_delta_r(dr, r), **proj_kwargs, **grid_kwargs)
            state, q = projectors.apply_projector(proj, state)
            state = state.normalized()
        else:
            q = 1.0
        row = {"r_db": float(r_db), "delta_r_db": float(dr_db)}
        if kind is projectors.ProjectorKind.SQ:
            target, _ = gates.build_resource_state(
                gates.ResourceStateSpec(resource_kind, r=r + dr), cutoff)
            row["fidelity"] = float(fock.fidelity(state, target))
            row["variance"] = float(
                fock.variance(fock.quadrature_x(cutoff), state))
            row["variance_analytic"] = math.exp(-2.0 * (r + dr)) / 2.0
            row["probability"] = float(q)
            row["probability_analytic"] = math.exp(-dr)
        else:
            row["variance"] = float(analytics.nullifier_variance(nul, state))
            row["variance_analytic"] = analytics.analytic_reference(
                var_curve, r=r, delta_r=dr)
            row["probability"] = float(q)
            row["probability_analytic"] = analytics.analytic_reference(
                prob_curve, r=r, delta_r=dr)
        return row

    points = [(r_db, dr_db) for r_db in params["r_db"]
              for dr_db in params["delta_r_db"]]
    return _map_points(one, points, workers)


def _run_project_sq(params, seed, workers):
    return _project_rows(projectors.ProjectorKind.SQ, params, workers)


def _run_project_cps(params, seed, workers):
    return _project_rows(projectors.ProjectorKind.CPS, params, workers)


def _run_project_cluster(params, seed, workers):
    return _project_rows(projectors.ProjectorKind.CLUSTER, params, workers)


def _run_fig5(params, seed, workers):
    r_db = params.get("r_db", [0.0, 3.0, 5.0])
    dr_db = params.get("delta_r_db", [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    shared = {k: params[k] for k in ("grid_points", "grid_policy") if k in params}
    cps_rows = _project_rows(
        projectors.ProjectorKind.CPS,
        {"r_db": r_db, "delta_r_db": dr_db, "eta": params.get("eta", 0.1),
         "cutoff": params.get("cps_cutoff", SINGLE_MODE_CUTOFF), **shared},
        workers)
    cluster_rows = _project_rows(
        projectors.ProjectorKind.CLUSTER,
        {"r_db": r_db, "delta_r_db": dr_db, "g": params.get("g", 1.0),
         "cutoff": params.get("cluster_cutoff", TWO_MODE_CUTOFF), **shared},
        workers)
    rows = []
    for kind, batch in (("CPS", cps_rows), ("Cluster", cluster_rows)):
        for row in batch:
            rows.append({"kind": kind, **row})
    return rows


def _run_fig6(params, seed, workers):
    r = analytics.db_to_r(params.get("state_db", 3.0))
    dr = analytics.db_to_r(params.get("project_db", 3.0))
    eta = params.get("eta", 0.1)
    g = params.get("g", 1.0)
    losses = params.get("losses", [0.05, 0.1, 0.2])
    grid_kwargs = {}
    if "grid_points" in params:
        grid_kwargs["point_count"] = params["grid_points"]
    gamma = projectors.gamma_from_delta_r(dr, r)

    setups = (
        ("CPS", params.get("cps_cutoff", SINGLE_MODE_CUTOFF),
         gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r, eta=eta),
         analytics.NullifierSpec(analytics.NullifierKind.CPS_PARABOLA, eta=eta),
         projectors.build_smeared_projector(
             projectors.ProjectorKind.CPS, gamma, eta=eta, **grid_kwargs)),
        ("Cluster", params.get("cluster_cutoff", 24),
         gates.ResourceStateSpec(gates.ResourceStateKind.CLUSTER, r=r, g=g),
         analytics.NullifierSpec(analytics.NullifierKind.CLUSTER_PAIR, g=g),
         projectors.build_smeared_projector(
             projectors.ProjectorKind.CLUSTER, gamma, g=g, **grid_kwargs)),
    )
    rows = []
    for kind, cutoff, spec, nul, proj in setups:
        state, _ = gates.build_resource_state(spec, cutoff)
        for loss in losses:
            lossy = channels.apply_loss(state.density(), channels.LossSpec(loss))
            noisy = analytics.nullifier_variance(nul, lossy.normalized())
            suppressed_state, q = projectors.apply_projector(proj, lossy)
            suppressed = analytics.nullifier_variance(
                nul, suppressed_state.normalized())
            rows.append({
                "kind": kind,
                "loss": float(loss),
                "variance_noisy": float(noisy),
                "variance_suppressed": float(suppressed),
                "probability": float(q),
            })
    return rows


def _run_lcu(params, seed, workers):
    r = params.get("r", 0.0)
    dr = params.get("delta_r", 0.5 * math.log(2.0))
    dx0 = params.get("delta_x0", 0.05)
    p0 = params.get("p0", 0.5)
    cutoff = params.get("cutoff", SINGLE_MODE_CUTOFF)
    rows = []
    for eta in params["eta"]:
        outcome = lcu.lcu_project_cps(r, dr, eta, dx0, cutoff, p0)
        target, _ = gates.build_resource_state(
            gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r + dr, eta=eta),
            cutoff)
        rows.append({
            "r": float(r),
            "delta_r": float(dr),
            "eta": float(eta),
            "delta_x0": float(dx0),
            "N": outcome.N,
            "fidelity": float(fock.fidelity(outcome.state, target)),
            "probability": float(outcome.probability),
            "probability_analytic": math.exp(-dr),
        })
    return rows


def _run_vqed(params, seed, workers):
    r = params.get("r", 0.0)
    eta = params.get("eta", 0.1)
    cutoff = params.get("cutoff", 40)
    trajectories = params.get("trajectories", 4000)
    mode = vqed.SamplingMode(params.get("mode", "ExactExpectation"))
    shots = params.get("shots")
    include_oracle = params.get("include_oracle", True)
    rows = []
    for index, dr in enumerate(params["delta_r"]):
        plan = vqed.cps_plan(r, dr, eta, cutoff=cutoff, trajectories=trajectories,
                             seed=_point_seed(seed, index), mode=mode, shots=shots)
        try:
            rep = vqed.vqed_estimate(plan)
        except UnstableDenominatorError as exc:
            raise UnstableDenominatorError(
                f"sweep point delta_r={dr}: {exc}") from exc
        row = {
            "r": float(r),
            "delta_r": float(dr),
            "eta": float(eta),
            "observable": "cps_nullifier_sq",
            "estimate": float(rep.ratio),
            "stderr": float(rep.ratio_se),
            "probability": float(rep.probability),
            "analytic": math.exp(-2.0 * (r + dr)) / 2.0,
        }
        if include_oracle:
            proj = projectors.build_smeared_projector(
                projectors.ProjectorKind.CPS,
                projectors.gamma_from_delta_r(dr, r), eta=eta)
            state, _ = gates.build_resource_state(
                gates.ResourceStateSpec(gates.ResourceStateKind.CPS, r=r, eta=eta),
                cutoff)
            projected, _ = projectors.apply_projector(proj, state)
            nul = analytics.nullifier_matrices(
                analytics.NullifierSpec(analytics.NullifierKind.CPS_PARABOLA,
                                        eta=eta), cutoff)[0]
            row["oracle"] = float(np.real(
                fock.expectation(nul @ nul, projected.normalized())))
        else:
            row["oracle"] = ""
        rows.append(row)
    return rows


def _run_knit(params, seed, workers):
    cutoff = params.get("cutoff", TWO_MODE_CUTOFF)
    g = params.get("g", 1.0)
    if "gamma" in params:
        gamma = params["gamma"]
    else:
        gamma = projectors.gamma_from_delta_r(
            analytics.db_to_r(params.get("delta_r_db", 3.0)))
    trajectories = params.get("trajectories", 2000)
    model = knitting.HomodyneModel(span=params.get("grid_span", knitting.DEFAULT_GRID_SPAN),
                                   points=params.get("grid_points", knitting.DEFAULT_GRID_POINTS))
    observables = params.get("observables", ["X1", "P1", "X2", "P2", "X1X2"])
    psi1 = _coherent(params.get("alpha1", 0.3), cutoff)
    psi2 = _coherent(params.get("alpha2", 0.3), cutoff)

    oracle_density = None
    if params.get("include_oracle", False):
        r_implied = projectors.delta_r_from_gamma(gamma)
        oracle_density = knitting.teleport_czp(
            psi1, psi2, r_implied, model=model).density
    x = fock.quadrature_x(cutoff)
    p = fock.quadrature_p(cutoff)
    oracle_ops = {
        "X1": fock.embed_single_mode(x, 0, 2), "P1": fock.embed_single_mode(p, 0, 2),
        "X2": fock.embed_single_mode(x, 1, 2), "P2": fock.embed_single_mode(p, 1, 2),
        "X1X2": np.kron(x, x), "P1P2": np.kron(p, p),
    }
    rows = []
    for index, name in enumerate(observables):
        try:
            rep = knitting.knit_czp_expectation(
                psi1, psi2, name, gamma, g, trajectories=trajectories,
                seed=_point_seed(seed, index), model=model)
        except UnstableDenominatorError as exc:
            raise UnstableDenominatorError(
                f"sweep point observable={name}: {exc}") from exc
        row = {
            "observable": name,
            "gamma": float(gamma),
            "g": float(g),
            "estimate": float(rep.ratio),
            "stderr": float(rep.ratio_se),
            "probability": float(rep.probability),
        }
        if oracle_density is not None:
            row["oracle"] = float(np.real(
                fock.expectation(oracle_ops[name], oracle_density)))
        else:
            row["oracle"] = ""
        rows.append(row)
    return rows


def _run_wigner(params, seed, workers):
    cutoff = params.get("cutoff", SINGLE_MODE_CUTOFF)
    spec = gates.ResourceStateSpec.from_json(params["resource"])
    state, _ = gates.build_resource_state(spec, cutoff)
    proj_doc = params.get("projector")
    if proj_doc is not None:
        kind = projectors.ProjectorKind(proj_doc["kind"])
        if "gamma" in proj_doc:
            gamma = proj_doc["gamma"]
        elif "delta_r_db" in proj_doc:
            gamma = projectors.gamma_from_delta_r(
                analytics.db_to_r(proj_doc["delta_r_db"]), spec.r)
        else:
            raise ConfigurationError(
                "projector needs either 'gamma' or 'delta_r_db'")
        grid_kwargs = {}
        if "grid_points" in proj_doc:
            grid_kwargs["point_count"] = proj_doc["grid_points"]
        if "grid_policy" in proj_doc:
            grid_kwargs["policy"] = projectors.SpanPolicy(proj_doc["grid_policy"])
        proj = projectors.build_smeared_projector(
            kind, gamma, eta=proj_doc.get("eta"), **grid_kwargs)
        state, _ = projectors.apply_projector(proj, state)
        state = state.normalized()
    loss = params.get("loss")
    if loss:
        state = channels.apply_loss(state.density(), channels.LossSpec(loss))
    span = params.get("span", 5.0)
    resolution = params.get("resolution", 81)
    axis = np.linspace(-span, span, resolution)
    grid = fock.wigner(state, axis, axis)
    return [{"x": float(grid.xs[i]), "p": float(grid.ps[j]),
             "w": float(grid.values[i, j])}
            for i in range(resolution) for j in range(resolution)]


_RUNNERS = {
    "ProjectSq": _run_project_sq,
    "ProjectCps": _run_project_cps,
    "ProjectCluster": _run_project_cluster,
    "Fig5Sweep": _run_fig5,
    "Fig6LossSweep": _run_fig6,
    "LcuCps": _run_lcu,
    "VqedCps": _run_vqed,
    "KnitCzp": _run_knit,
    "WignerDump": _run_wigner,
}


# ---------------------------------------------------------------------------
# Output plumbing


def _snake(name):
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _output_paths(doc, output_dir):
    base = output_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    out = doc.get("output", {})
    stem = _snake(doc["experiment"])
    csv_path = out.get("results_csv", f"{stem}_results.csv")
    manifest_path = out.get("manifest_json", f"{stem}_manifest.json")
    csv_path = csv_path if os.path.isabs(csv_path) else os.path.join(base, csv_path)
    manifest_path = (manifest_path if os.path.isabs(manifest_path)
                     else os.path.join(base, manifest_path))
    return csv_path, manifest_path


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def write_csv(path, rows, manifest_hash):
    fieldnames = list(rows[0]) + ["manifest_hash"]
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            out = {key: _format_cell(val) for key, val in row.items()}
            out["manifest_hash"] = manifest_hash
            writer.writerow(out)


def write_manifest(path, doc, manifest_hash, wall_time):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    manifest = {
        "experiment": doc["experiment"],
        "config": doc,
        "seed": doc.get("seed"),
        "version": __version__,
        "manifest_hash": manifest_hash,
        "wall_time_s": wall_time,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def run_config(doc, output_dir=None, workers=1):
    """Execute a validated config; returns (csv_path, manifest_path, rows)."""
    runner = _RUNNERS[doc["experiment"]]
    started = time.monotonic()
    rows = runner(doc.get("parameters", {}), doc.get("seed"), workers)
    wall_time = time.monotonic() - started
    if not rows:
        raise ConfigurationError("experiment produced no sweep points")
    manifest_hash = manifest_hash_for(doc)
    csv_path, manifest_path = _output_paths(doc, output_dir)
    write_csv(csv_path, rows, manifest_hash)
    write_manifest(manifest_path, doc, manifest_hash, wall_time)
    return csv_path, manifest_path, rows


# ---------------------------------------------------------------------------
# Entry point


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fockproj",
        description="Batch experiment runner for the truncated-Fock simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run an experiment config"),
                            ("validate", "schema-check a config and exit"),
                            ("wigner", "run a WignerDump config")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to the experiment config JSON")
        if name != "validate":
            cmd.add_argument("--output-dir", default=None,
                             help=f"output directory (default: ${OUTPUT_DIR_ENV} or cwd)")
            cmd.add_argument("--workers", type=int, default=1,
                             help="worker threads for independent sweep points")
            cmd.add_argument("--single-thread", action="store_true",
                             help="force sequential execution (bit-exact reproduction)")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {doc['experiment']} config is valid")
            return EXIT_OK
        if args.command == "wigner" and doc["experiment"] != "WignerDump":
            raise ConfigurationError(
                f"wigner subcommand needs a WignerDump config, got {doc['experiment']}")
        workers = 1 if args.single_thread else max(1, args.workers)
        csv_path, manifest_path, rows = run_config(
            doc, output_dir=args.output_dir, workers=workers)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FockProjError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {csv_path} ({len(rows)} rows) and {manifest_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
