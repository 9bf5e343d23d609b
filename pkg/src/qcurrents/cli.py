"""Command-line front end: ``qcurrents simulate | currents | pathways | check``.

Exit codes: 0 success, 1 failed check, 2 invalid input, 3 numerical abort.
The output directory is ``--out-dir``, else ``$QCURRENTS_OUT_DIR``, else ``.``.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .currents import (
    continuity_residual,
    dephasing_population_rate,
    fd_error_bound,
    resolve_aux,
    total_currents,
    unitary_bound_matrix,
)
from .fileio import (
    FileFormatError,
    read_currents,
    read_trajectory,
    run_id,
    write_currents,
    write_manifest,
    write_trajectory,
)
from .model import ConfigError, Model, RunParameters, build_generators, load_model
from .pathways import (
    build_pathway_graph,
    export_graph,
    gross_flow,
    integrate_currents,
    integrate_subcomplex,
)
from .propagator import AuxiliaryOperatorSet, PropagationError, Trajectory, propagate

OUT_DIR_ENV = "QCURRENTS_OUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_ABORT = 0, 1, 2, 3
SUFFIX = {"text": ".txt", "binary": ".npz"}

log = logging.getLogger("qcurrents")


class UsageError(Exception):
    """Bad input detected by a command; maps to exit code 2."""


def out_dir(flag: str | None) -> Path:
    path = Path(flag or os.environ.get(OUT_DIR_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(command: str, params: dict, model_hash: str | None, started: float,
              warnings: list[str], outputs: list[str]) -> dict:
    return {
        "run_id": run_id(command, params, model_hash or ""),
        "command": command,
        "parameters": params,
        "model_hash": model_hash,
        "tool_version": __version__,
        "backend": kernels.BACKEND,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "wall_time_s": round(time.perf_counter() - started, 6),
        "warnings": warnings,
        "outputs": outputs,
    }


def _run_parameters(model: Model, args) -> RunParameters:
    base = model.run
    t_final = args.t_final if args.t_final is not None else getattr(base, "t_final", None)
    dt_output = args.dt_output if args.dt_output is not None else getattr(base, "dt_output",
                                                                          None)
    if t_final is None or dt_output is None:
        raise UsageError("t_final and dt_output must come from the config or flags")
    if args.dt is not None:
        return RunParameters(t_final, dt_output, dt=args.dt)
    if base is not None:
        return RunParameters(t_final, dt_output, dt=base.dt, rtol=base.rtol, atol=base.atol)
    return RunParameters(t_final, dt_output)


def _load(path) -> Model:
    try:
        return load_model(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def simulate_one(config: str, dest: Path, args) -> list[str]:
    """Propagate one config into ``dest``; returns the warnings raised."""
    started = time.perf_counter()
    model = _load(config)
    try:
        run = _run_parameters(model, args)
        rho0 = model.initial_density_matrix()
    except (ConfigError, ValueError) as exc:
        raise UsageError(f"{config}: {exc}") from None
    gen = build_generators(model.network, model.environment)
    traj = propagate(rho0, gen, run, store_aux=False)
    params = {"config": Path(config).name, "t_final": run.t_final,
              "dt_output": run.dt_output, "dt": traj.dt, "format": args.format}
    mhash = model.model_hash()
    manifest_name = "manifest-simulate.json"
    data_name = "trajectory" + SUFFIX[args.format]
    rid = run_id("simulate", params, mhash)
    write_trajectory(dest / data_name, traj,
                     {"run_id": rid, "manifest": manifest_name, "model_hash": mhash,
                      "labels": list(model.labels)}, args.format)
    write_manifest(dest / manifest_name,
                   _manifest("simulate", params, mhash, started, traj.warnings, [data_name]))
    return traj.warnings


def _simulate_job(config, dest, args):
    # runs in a worker process; errors are returned, not raised
    try:
        return config, simulate_one(config, dest, args), None
    except UsageError as exc:
        return config, [], (EXIT_INVALID, str(exc))
    except PropagationError as exc:
        return config, [], (EXIT_ABORT, f"{config}: numerical abort: {exc}")


def cmd_simulate(args) -> int:
    base = out_dir(args.out_dir)
    configs = args.config
    if len(configs) == 1:
        dests = [base]
    else:
        stems = [Path(c).stem for c in configs]
        if len(set(stems)) != len(stems):
            raise UsageError("several configs share a file name; run them separately")
        dests = [base / s for s in stems]
        for d in dests:
            d.mkdir(parents=True, exist_ok=True)
    jobs = max(1, args.jobs or 1)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
            results = list(pool.map(_simulate_job, configs, dests, [args] * len(configs)))
    else:
        results = [_simulate_job(c, d, args) for c, d in zip(configs, dests)]
    code = EXIT_OK
    for config, warnings, err in results:
        for w in warnings:
            print(f"warning: {config}: {w}", file=sys.stderr)
        if err is not None:
            print(f"error: {err[1]}", file=sys.stderr)
            code = max(code, err[0])
        else:
            print(f"{config}: ok")
    return code


# ---------------------------------------------------------------------------
# currents
# ---------------------------------------------------------------------------


def _read_traj(path) -> tuple[Trajectory, dict]:
    try:
        return read_trajectory(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    except (FileFormatError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None


def _matched(traj: Trajectory, meta: dict, model: Model, path) -> list[str]:
    if traj.n_sites != model.n_sites:
        raise UsageError(f"{path}: trajectory has {traj.n_sites} sites, "
                         f"model has {model.n_sites}")
    warnings = []
    if meta.get("model_hash") not in (None, model.model_hash()):
        warnings.append("trajectory was produced by a different model (hash mismatch)")
    return warnings


def cmd_currents(args) -> int:
    started = time.perf_counter()
    model = _load(args.config)
    traj, meta = _read_traj(args.trajectory)
    warnings = _matched(traj, meta, model, args.trajectory)
    gen = build_generators(model.network, model.environment)
    aux = resolve_aux(traj, gen)
    cur = total_currents(traj, gen, aux, labels=model.labels)
    mhash = model.model_hash()
    params = {"trajectory": Path(args.trajectory).name, "config": Path(args.config).name,
              "format": args.format, "source_run_id": meta.get("run_id")}
    dest = out_dir(args.out_dir)
    manifest_name = "manifest-currents.json"
    data_name = "currents" + SUFFIX[args.format]
    write_currents(dest / data_name, cur,
                   {"run_id": run_id("currents", params, mhash), "manifest": manifest_name,
                    "model_hash": mhash}, args.format)
    if len(traj) >= 3:
        print(continuity_residual(traj, cur, gen, aux).summary())
    else:
        warnings.append("fewer than 3 output times; continuity not evaluated")
    print(f"max|j_dephas|: {np.max(np.abs(cur.j_dephas_check), initial=0.0):.3e}")
    print(f"max|j_relax|: {np.max(np.abs(cur.j_relax), initial=0.0):.3e}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    write_manifest(dest / manifest_name,
                   _manifest("currents", params, mhash, started, warnings, [data_name]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# pathways
# ---------------------------------------------------------------------------


def _groups(path, labels) -> dict[str, list[int]]:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: expected a mapping of group name to site list")
    out = {}
    for name, sites in doc.items():
        idx = []
        for s in sites:
            if isinstance(s, str):
                if s not in labels:
                    raise UsageError(f"{path}: group {name}: unknown site {s!r}")
                idx.append(labels.index(s))
            elif isinstance(s, int) and 0 <= s < len(labels):
                idx.append(s)
            else:
                raise UsageError(f"{path}: group {name}: bad site {s!r}")
        out[name] = idx
    return out


def cmd_pathways(args) -> int:
    started = time.perf_counter()
    try:
        cur, meta = read_currents(args.currents)
    except OSError as exc:
        raise UsageError(f"{args.currents}: {exc.strerror or exc}") from None
    except (FileFormatError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    if len(cur) < 2:
        raise UsageError(f"{args.currents}: need at least two time samples")
    labels = list(cur.labels) if cur.labels else [str(i) for i in range(cur.n_sites)]
    t0 = float(cur.times[0]) if args.t0 is None else args.t0
    window = float(cur.times[-1]) - t0 if args.window is None else args.window
    try:
        dP = integrate_currents(cur, t0, window)
        gross = gross_flow(cur, t0, window)
        graph = build_pathway_graph(dP, labels, args.threshold, (t0, window))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    graph = dataclasses.replace(graph, gross={
        f"{labels[l]}-{labels[m]}": float(gross[l, m])
        for l in range(len(labels)) for m in range(l + 1, len(labels)) if gross[l, m] > 0
    })
    warnings = []
    if not graph.edges:
        warnings.append(f"no pair exceeds threshold {args.threshold:g}; graph has no edges")
    params = {"currents": Path(args.currents).name, "t0": t0, "window": window,
              "threshold": args.threshold, "source_run_id": meta.get("run_id")}
    rid = run_id("pathways", params, meta.get("model_hash") or "")
    manifest_name = "manifest-pathways.json"
    dest = out_dir(args.out_dir)
    dot = export_graph(graph, "dot").replace(
        "digraph pathways {\n", f"digraph pathways {{\n  // run_id={rid} manifest={manifest_name}\n", 1)
    (dest / "pathways.dot").write_text(dot)
    doc = json.loads(export_graph(graph, "json"))
    doc["run_id"], doc["manifest"] = rid, manifest_name
    (dest / "pathways.json").write_text(json.dumps(doc, indent=2) + "\n")
    outputs = ["pathways.dot", "pathways.json"]
    for e in graph.edges:
        print(f"{e.source} -> {e.target}: {e.weight:.6g}")
    if args.groups:
        groups = _groups(args.groups, labels)
        rows = []
        names = list(groups)
        for a in names:
            for b in names:
                if a == b or set(groups[a]) & set(groups[b]):
                    continue
                val = integrate_subcomplex(cur, groups[a], groups[b], t0, window)
                rows.append({"from": a, "to": b, "integral": val})
                print(f"J[{a}->{b}] integral: {val:.6g}")
        (dest / "subcomplex.json").write_text(json.dumps(
            {"run_id": rid, "manifest": manifest_name, "window": [t0, window],
             "groups": groups, "flows": rows}, indent=2) + "\n")
        outputs.append("subcomplex.json")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    write_manifest(dest / manifest_name,
                   _manifest("pathways", params, meta.get("model_hash"), started, warnings,
                             outputs))
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

CHECK_STEPS = 200
PSD_TOL = 1e-9


def run_checks(traj: Trajectory, gen, aux) -> tuple[list[tuple[str, bool, str]], list[str]]:
    """Invariant suite on one trajectory; returns table rows and warnings."""
    rho = traj.states
    cur = total_currents(traj, gen, aux)
    rows = []

    drift = float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1.0)))
    rows.append(("trace", drift <= 1e-8, f"max|tr rho - 1| = {drift:.2e}"))

    herm = float(np.max(np.abs(rho - rho.conj().transpose(0, 2, 1))))
    rows.append(("hermiticity", herm <= 1e-10, f"max|rho - rho^+| = {herm:.2e}"))

    if len(traj) >= 3:
        rep = continuity_residual(traj, cur, gen, aux)
        allowed = 10.0 * fd_error_bound(gen, traj.times, aux) + 1e-9
        ok = rep.fd_residual <= allowed and rep.analytic_residual <= 1e-10
        rows.append(("continuity", ok, f"fd {rep.fd_residual:.2e} (allowed {allowed:.2e}), "
                                       f"generator {rep.analytic_residual:.2e}"))
    else:
        rows.append(("continuity", False, "fewer than 3 output times"))

    deph = float(np.max(np.abs(cur.j_dephas_check), initial=0.0))
    for k in range(len(traj)):
        dmap = AuxiliaryOperatorSet(gen, aux[k]).dephasing_map()
        if dmap:
            deph = max(deph, float(np.max(np.abs(dephasing_population_rate(rho[k], dmap)))))
    rows.append(("zero-dephasing-current", deph <= 1e-12, f"max = {deph:.2e}"))

    psd = traj.min_eigenvalues
    if psd is None:
        psd = np.linalg.eigvalsh(rho)[:, 0]
    mask = psd >= -PSD_TOL
    bound, _ = unitary_bound_matrix(rho[mask], gen.H)
    excess = float(np.max(np.abs(cur.j_unitary[mask]) - bound, initial=-np.inf))
    skipped = int(np.sum(~mask))
    rows.append(("bound", excess <= 1e-10,
                 f"max(|j_U| - bound) = {excess:.2e}" + (f", {skipped} non-PSD steps skipped"
                                                          if skipped else "")))

    scale = max(1.0, float(np.max(np.abs(cur.j_total), initial=0.0)))
    c1 = float(np.max(np.abs(cur.j_total - cur.j_unitary - cur.j_dephas_check - cur.j_relax)))
    c2 = float(np.max(np.abs(cur.j_total - cur.j_pop - cur.j_coher)))
    ok = c1 <= 1e-12 * scale and c2 <= 1e-10 * scale
    rows.append(("decomposition closure", ok, f"mechanism {c1:.2e}, origin {c2:.2e}"))

    anti = max(float(np.max(np.abs(m + m.transpose(0, 2, 1))))
               for m in (cur.j_total, cur.j_unitary, cur.j_relax, cur.j_pop, cur.j_coher))
    rows.append(("antisymmetry", anti <= 1e-12 * scale, f"max|j + j^T| = {anti:.2e}"))

    warnings = []
    worst = float(np.min(psd))
    if worst < -1e-6:
        warnings.append(f"positivity: smallest eigenvalue {worst:.3e} "
                        f"(monitored, not an error)")
    return rows, warnings


def cmd_check(args) -> int:
    model = _load(args.config)
    gen = build_generators(model.network, model.environment)
    if args.trajectory:
        traj, meta = _read_traj(args.trajectory)
        warnings = _matched(traj, meta, model, args.trajectory)
    else:
        base = model.run
        dt_output = args.dt_output or getattr(base, "dt_output", None)
        if dt_output is None:
            raise UsageError("dt_output must come from the config or --dt-output")
        t_final = args.t_final
        if t_final is None:
            t_final = min(getattr(base, "t_final", np.inf), CHECK_STEPS * dt_output)
        args = argparse.Namespace(**{**vars(args), "t_final": t_final,
                                     "dt_output": dt_output})
        try:
            run = _run_parameters(model, args)
            rho0 = model.initial_density_matrix()
        except (ConfigError, ValueError) as exc:
            raise UsageError(f"{args.config}: {exc}") from None
        traj = propagate(rho0, gen, run, store_aux=True)
        warnings = list(traj.warnings)
    aux = resolve_aux(traj, gen)
    rows, extra = run_checks(traj, gen, aux)
    if not any(w.startswith("positivity") for w in warnings):
        warnings += extra
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    for w in warnings:
        print(f"{'positivity' if w.startswith('positivity') else 'note':<{width}}  WARN  {w}")
    return EXIT_OK if all(r[1] for r in rows) else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return x


def _nonneg(text: str) -> float:
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcurrents",
                                description="Excitation-transfer dynamics and currents.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--dt", type=_positive, help="fixed RK4 step")
        sp.add_argument("--t-final", type=_nonneg)
        sp.add_argument("--dt-output", type=_positive)

    s = sub.add_parser("simulate", help="propagate a model and write its trajectory")
    s.add_argument("--config", action="append", required=True,
                   help="model file; repeat for a parameter sweep")
    s.add_argument("--out-dir")
    s.add_argument("--format", choices=("text", "binary"), default="text")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    run_flags(s)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("currents", help="decompose the currents of a trajectory")
    c.add_argument("trajectory")
    c.add_argument("--config", required=True)
    c.add_argument("--out-dir")
    c.add_argument("--format", choices=("text", "binary"), default="text")
    c.set_defaults(func=cmd_currents)

    w = sub.add_parser("pathways", help="integrate currents into a pathway graph")
    w.add_argument("currents")
    w.add_argument("--threshold", type=_nonneg, required=True)
    w.add_argument("--t0", type=float, help="window start (default: first sample)")
    w.add_argument("--window", type=_nonneg, help="window length (default: to last sample)")
    w.add_argument("--groups", help="JSON mapping of group name to site list")
    w.add_argument("--out-dir")
    w.set_defaults(func=cmd_pathways)

    k = sub.add_parser("check", help="run the invariant suite on a short simulation")
    k.add_argument("--config", required=True)
    k.add_argument("--trajectory", help="check this trajectory instead of simulating")
    run_flags(k)
    k.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INVALID
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PropagationError as exc:
        print(f"error: numerical abort: {exc.reason}; last good time {exc.last_good_time:.6g}",
              file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
