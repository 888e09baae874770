"""``extpos`` command line.

Exit codes: 0 success, 1 domain failure (infeasible, violated assumption,
unstable gain), 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import drone as drone_mod
from .behavioral import lift
from .errors import (
    AssumptionViolation,
    DimensionError,
    ExtPosError,
    RankConditionError,
    SpecError,
    SynthesisInfeasible,
)
from .lmi import SolverOptions
from .lti import LtiSystem, check_assumptions, load_system, read_trajectory_csv, write_trajectory_csv
from .simkit import closed_loop_run
from .synth_data import (
    build_data_matrices,
    generate_pe_data,
    identify_lift,
    rank_condition,
    synthesize_data,
)
from .synth_model import SynthesisSpec, _jsonable, synthesize_model, verify_gain

log = logging.getLogger("extpos")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj, out=None):
    text = json.dumps(_jsonable(obj), indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _load_system(path) -> LtiSystem:
    try:
        return load_system(path)
    except (OSError, ValueError, DimensionError) as exc:
        raise UsageError(f"cannot read system file {path}: {exc}") from None


def _load_trajectory(path):
    try:
        return read_trajectory_csv(path)
    except (OSError, DimensionError) as exc:
        raise UsageError(f"cannot read trajectory {path}: {exc}") from None


def _options(args) -> SolverOptions:
    try:
        return SolverOptions(psd_margin=args.psd_margin, eq_tol=args.eq_tol,
                             conditioning_reg=args.conditioning_reg, seed=args.seed)
    except ExtPosError as exc:
        raise UsageError(str(exc)) from None


def _seed_policy(text, n, m):
    if text in ("feasible", "zero"):
        return text
    if text.startswith("user:"):
        path = text[5:]
        try:
            if path.endswith(".json"):
                u = np.array(json.loads(Path(path).read_text()), dtype=float)
            else:
                u = read_trajectory_csv(path).inputs
        except (OSError, ValueError, DimensionError) as exc:
            raise UsageError(f"cannot read seed inputs {path}: {exc}") from None
        if u.size < n * m:
            raise UsageError(f"seed input file needs {n} samples of {m} inputs")
        return u.reshape(-1, m)[:n]
    raise UsageError(f"--seed-policy must be feasible, zero or user:<file>, got {text!r}")


def _infer_order(traj, max_n=20) -> int:
    """Largest n whose stacked data matrix [u; z_now] still has rank 2n+1."""
    best = None
    for n in range(1, max_n + 1):
        if traj.T < 2 * n or traj.T - n + 1 < 2 * n + 1:
            break
        if rank_condition(build_data_matrices(traj, n))["rank"] == 2 * n + 1:
            best = n
        else:
            break
    if best is None:
        raise UsageError("cannot infer the system order from the data; pass --n")
    return best


# -- commands ------------------------------------------------------------------

def cmd_check(args) -> int:
    sys_ = _load_system(args.system)
    rep = check_assumptions(sys_)
    _emit({"system": str(args.system), **rep.to_dict(), "failed": rep.failed()}, args.out)
    return EXIT_OK if rep.ok else EXIT_DOMAIN


def cmd_lift(args) -> int:
    beh = lift(_load_system(args.system))
    _emit(beh.to_dict(), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    opts = _options(args)
    relaxed = args.no_monotonicity
    if args.model:
        plant = _load_system(args.model)
        beh = lift(plant)
        lambdas = _floats(args.lambda_, "--lambda")
        if len(lambdas) == 1:
            lambdas = lambdas * plant.p
        yss = None if args.yss is None else _floats(args.yss, "--yss")
        try:
            spec = SynthesisSpec(tuple(lambdas), yss, opts)
        except SpecError as exc:
            raise UsageError(str(exc)) from None
        result = synthesize_model(beh, spec, relaxed=relaxed)
        verify_beh = beh
    else:
        traj = _load_trajectory(args.data)
        if traj.m != 1 or traj.p != 1:
            raise RankConditionError(
                f"data-driven synthesis is SISO only; {args.data} has m = {traj.m}, p = {traj.p} "
                "and the stacked data matrix loses rank for MIMO data"
            )
        n = args.n or _meta_order(args.data) or _infer_order(traj)
        dm = build_data_matrices(traj, n)
        lambdas = _floats(args.lambda_, "--lambda")
        if len(lambdas) != 1:
            raise UsageError("data-driven synthesis takes a single --lambda")
        try:
            spec = SynthesisSpec(tuple(lambdas), None, opts)
        except SpecError as exc:
            raise UsageError(str(exc)) from None
        result = synthesize_data(dm, lambdas[0], options=opts, relaxed=relaxed)
        verify_beh = identify_lift(dm)
    report = verify_gain(verify_beh, result.K, spec, horizon=args.horizon)
    out = result.to_dict()
    out["verification"] = report
    _emit(out, args.out)
    return EXIT_OK if report["stable"] else EXIT_DOMAIN


def _meta_order(csv_path):
    meta = Path(str(csv_path) + ".meta.json")
    if meta.exists():
        try:
            return int(json.loads(meta.read_text())["n"])
        except (ValueError, KeyError):
            log.warning("ignoring malformed %s", meta)
    return None


def cmd_gen_data(args) -> int:
    plant = _load_system(args.system)
    T = 4 * plant.n if args.T is None else args.T
    if T < 4 * plant.n:
        raise UsageError(f"T = {T} is below 4n = {4 * plant.n}")
    x0 = None if args.x0 is None else _floats(args.x0, "--x0")
    traj, used = generate_pe_data(plant, T, args.seed, x0)
    if args.out is None:
        raise UsageError("gen-data needs --out <file.csv>")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(args.out, traj)
    meta = {"n": plant.n, "T": T, "seed": args.seed, "seed_used": used,
            "x0": [0.0] * plant.n if x0 is None else x0, "persistently_exciting_order": 2 * plant.n + 1}
    Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    plant = _load_system(args.system)
    try:
        gain = json.loads(Path(args.gain).read_text())
        K = np.array(gain["K"] if isinstance(gain, dict) else gain, dtype=float)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read gain file {args.gain}: {exc}") from None
    x0 = np.zeros(plant.n) if args.x0 is None else np.array(_floats(args.x0, "--x0"))
    yss = None if args.yss is None else _floats(args.yss, "--yss")
    policy = _seed_policy(args.seed_policy, plant.n, plant.m)
    try:
        run = closed_loop_run(plant, K, yss, x0, policy, args.horizon)
    except DimensionError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        run.write(args.out, "closed_loop")
    _emit(run.to_dict()["verdicts"])
    return EXIT_OK if run.verdicts["stable"] else EXIT_DOMAIN


def cmd_demo_drone(args) -> int:
    out = Path(args.out or "demo_out")
    stage = "setup"
    try:
        plant = drone_mod.drone(0.1)
        beh = lift(plant)
        opts = _options(args)
        lam = args.lambda_value if args.lambda_value is not None else drone_mod.LAMBDA
        spec = SynthesisSpec((lam,), None, opts)
        stage = "gen-data"
        traj, used = generate_pe_data(plant, 4 * plant.n, args.seed)
        dm = build_data_matrices(traj, plant.n)
        gains = {}
        for relaxed in (False, True):
            mode = "unconstrained" if relaxed else "monotone"
            stage = f"synth-model-{mode}"
            gains[("model", mode)] = synthesize_model(beh, spec, relaxed=relaxed)
            stage = f"synth-data-{mode}"
            gains[("data", mode)] = synthesize_data(dm, lam, options=opts, relaxed=relaxed)
        stage = "simulate"
        out.mkdir(parents=True, exist_ok=True)
        panels = []
        for (path, mode), res in gains.items():
            for x0 in drone_mod.INITIAL_STATES:
                run = closed_loop_run(plant, res.K, 0.0, x0, args.seed_policy_value, args.horizon, lambdas=[lam])
                stem = f"{path}_{mode}_x0_{x0[0]:g}_{x0[1]:g}"
                _write_panel(out / f"{stem}.csv", run)
                panels.append({"path": path, "mode": mode, "x0": list(x0), "file": f"{stem}.csv", **run.verdicts})
        reference = []
        for name, K in drone_mod.REFERENCE_GAINS.items():
            for x0 in drone_mod.INITIAL_STATES:
                run = closed_loop_run(plant, K, 0.0, x0, args.seed_policy_value, args.horizon, lambdas=[lam])
                reference.append({"gain": name, "x0": list(x0), **run.verdicts})
        summary = {
            "lambda": lam, "horizon": args.horizon, "ts": 0.1, "data_seed": used, "data_T": traj.T,
            "seed_policy": "feasible" if isinstance(args.seed_policy_value, str) else "user",
            "gains": {f"{p}_{m}": {"K": r.K.tolist(), "diagnostics": r.diagnostics} for (p, m), r in gains.items()},
            "panels": panels,
            "reference_gains": reference,
            "monotone_constrained": all(p["monotone"] for p in panels if p["mode"] == "monotone"),
        }
        _emit(summary, out / "summary.json")
    except ExtPosError as exc:
        log.error("demo failed at stage %s: %s", stage, exc)
        return EXIT_DOMAIN
    sys.stdout.write(f"wrote {len(panels)} trajectories and summary.json to {out}\n")
    return EXIT_OK if summary["monotone_constrained"] else EXIT_DOMAIN


def _write_panel(path, run):
    tr = run.trajectory
    write_trajectory_csv(path, tr, extra={f"x_{i}": tr.states[:, i] for i in range(tr.states.shape[1])})


# -- parser --------------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--psd-margin", type=float, default=SolverOptions.psd_margin)
    p.add_argument("--eq-tol", type=float, default=SolverOptions.eq_tol)
    p.add_argument("--conditioning-reg", type=float, default=SolverOptions.conditioning_reg)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extpos", description="Monotone-tracking behavioral controller synthesis.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check the standing assumptions on a plant")
    p.add_argument("system")
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lift", help="print the behavioral lift of a plant")
    p.add_argument("system")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("synth", help="synthesize a gain from a model or from data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", metavar="SYSTEM.json")
    src.add_argument("--data", metavar="TRAJ.csv")
    p.add_argument("--lambda", dest="lambda_", default="0.4", help="decay rate(s); comma-separated per output")
    p.add_argument("--yss")
    p.add_argument("--n", type=int, help="system order for --data (default: sidecar metadata, else inferred)")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--no-monotonicity", action="store_true", help="drop the monotonicity equalities")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-data", help="record one persistently exciting trajectory")
    p.add_argument("system")
    p.add_argument("--T", type=int)
    p.add_argument("--x0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("simulate", help="run a gain in closed loop on a plant")
    p.add_argument("system")
    p.add_argument("--gain", required=True, help="JSON with a K field (synth output) or a bare matrix")
    p.add_argument("--x0")
    p.add_argument("--yss")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--seed-policy", default="feasible")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demo-drone", help="reproduce the drone landing comparison")
    p.add_argument("--out", default="demo_out")
    p.add_argument("--lambda", dest="lambda_value", type=float)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--seed-policy", default="feasible")
    _solver_flags(p)
    p.set_defaults(func=cmd_demo_drone)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "demo-drone":
            args.seed_policy_value = _seed_policy(args.seed_policy, 2, 1)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (SynthesisInfeasible, AssumptionViolation) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except SpecError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ExtPosError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
