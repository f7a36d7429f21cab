"""Command line: ``run <config>``, ``verify <suite>``, ``export <dir> <format>``.

Environment overrides: ``ACCRETION_OUTPUT_DIR`` (default output root) and
``ACCRETION_THREADS`` (BLAS/OpenMP thread count; ``--single-thread`` forces 1).
Exit codes: 0 success, 2 config error, 3 nonconvergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 2, 3, 4
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

log = logging.getLogger("accretion")


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    for v in _THREAD_VARS:
        os.environ[v] = str(n)
    try:  # takes effect even after numpy is loaded, when threadpoolctl is around
        from threadpoolctl import threadpool_limits

        threadpool_limits(n)
    except ImportError:
        pass


def _output_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("ACCRETION_OUTPUT_DIR", "runs"))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def write_run(run_dir: Path, cfg, state, report, seconds: float) -> list[str]:
    import numpy as np

    from . import export as ex
    from .config import dumps_config
    from .constitutive import det2

    run_dir.mkdir(parents=True, exist_ok=True)
    grid = state.grid
    traj = state.trajectory
    written = []

    def out(name):
        written.append(name)
        return run_dir / name

    out("config.ini").write_text(dumps_config(cfg))
    n = traj.n_steps
    snap = sorted({0, n, *range(0, n + 1, max(cfg.output.snapshot_every, 1))})
    np.savez_compressed(
        out(ex.FIELDS_FILE),
        theta=state.theta.values,
        theta0=state.theta0.values,
        theta_used=state.theta_used.values,
        speed=state.speed,
        coords=grid.coords,
        snapshot_steps=np.array(snap),
        y=np.stack([traj.states[i].y for i in snap]),
        A=state.backstrain.A,
        slab=state.backstrain.slab,
        thetas=np.stack(state.thetas),
        h=grid.h,
        T=cfg.T,
    )
    ex.grid_csv(grid, out("grid.csv"))
    if "theta" in cfg.output.fields:
        ex.theta_csv(grid, state.theta.values, out("theta.csv"))
        ex.write_vtk(out("theta.vtk"), grid, {"theta": state.theta.values, "speed": state.speed})
    if "y" in cfg.output.fields:
        for i in snap:
            st = traj.states[i]
            Fe = state.backstrain.elastic_strain(st.F) if i == n else None
            ex.deformation_csv(grid, st.y, st.F, out(f"y_step{i:03d}.csv"), Fe=Fe)
        last = traj.states[n]
        ex.write_vtk(out("y_final.vtk"), grid, {"displacement": last.u, "det_grad_y": det2(last.F)})
    if "backstrain" in cfg.output.fields:
        ex.backstrain_csv(grid, state.backstrain.A, state.backstrain.slab, out("backstrain.csv"))
    if cfg.output.step_dumps:
        for i in range(1, n + 1):
            st = traj.states[i]
            ex.write_vtk(out(f"step{i:03d}.vtk"), grid, {"displacement": st.u, "det_grad_y": det2(st.F)})
    state.ledger.to_csv(out("ledger.csv"))
    ex.write_json(out("convergence.json"), report.as_dict())
    with open(out("iterates.csv"), "w") as fh:
        cols = list(report.history[0].as_dict()) if report.history else []
        fh.write(",".join(cols) + "\n")
        for r in report.history:
            fh.write(",".join(repr(v) for v in r.as_dict().values()) + "\n")
    summary = {
        "parameters": cfg.resolved(),
        "seed": cfg.seed,
        "grid": {"nx": grid.nx, "ny": grid.ny, "h": grid.h},
        "converged": report.converged,
        "iterations": report.iterations,
        "theta_metrics": report.theta_metrics,
        "ledger": state.ledger.summary(),
        "max_attachment_W": max((r.max_attachment_W for r in report.history), default=0.0),
        "theta_max": state.theta.max,
        "front_clearance_T": report.history[-1].front_clearance if report.history else None,
        "seconds": seconds,
        "threads": os.environ.get("OMP_NUM_THREADS", "default"),
        "versions": _versions(),
    }
    written.append("summary.json")
    summary["files"] = sorted(written)
    ex.write_json(run_dir / "summary.json", summary)
    return written


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"accretion": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "python": sys.version.split()[0]}


def cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .coupling import run_coupled
    from .equilibrium import NonconvergedStep

    try:
        cfg = load_config(args.config).validate()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    run_dir = _output_root(args.output) / (args.name or Path(args.config).stem)
    t0 = time.perf_counter()
    try:
        state, report = run_coupled(cfg)
    except NonconvergedStep as e:
        print(f"nonconverged: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    write_run(run_dir, cfg, state, report, time.perf_counter() - t0)
    status = "converged" if report.converged else "coupling nonconverged"
    print(f"{status} after {report.iterations} iterate(s); theta metrics "
          + " ".join(f"{m:.3e}" for m in report.theta_metrics) + f"; artifacts in {run_dir}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _load_params(path):
    import configparser
    from dataclasses import replace

    from .config import ConfigError, _coerce
    from .constitutive import MaterialParams

    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    if not cp.read(path):
        raise ConfigError(f"cannot read params file {path}")
    if "material" not in cp:
        raise ConfigError(f"{path}: missing [material] section")
    return replace(MaterialParams(), **_coerce(MaterialParams, cp["material"], "material"))


def cmd_verify(args) -> int:
    from . import harness
    from .config import ConfigError, load_config

    try:
        params = _load_params(args.params) if args.params else None
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and params is not None:
            from dataclasses import replace

            cfg = replace(cfg, material=params)
    except (ConfigError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    sizes = args.sizes or [33, 65, 129]
    rep = harness.VerificationReport(args.suite, args.seed)
    try:
        if args.suite in ("hypotheses", "all"):
            rep.merge(harness.verify_hypotheses(params, args.seed))
        if args.suite in ("eikonal", "all"):
            rep.merge(harness.verify_eikonal(sizes, n_random=args.n_random, seed=args.seed))
        if args.suite in ("equilibrium", "all"):
            rep.merge(harness.verify_equilibrium(cfg, args.seed))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_root(args.output) / "verify"
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.suite}.json").write_text(rep.to_json() + "\n")
    (out / f"{args.suite}.txt").write_text(rep.to_text() + "\n")
    print(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def cmd_export(args) -> int:
    import numpy as np

    from . import export as ex
    from .config import load_config
    from .constitutive import det2
    from .equilibrium import DeformationState
    from .geometry import build_grid

    try:
        run_dir = ex.check_run_dir(args.run_dir)
    except ex.ExportError as e:
        print(f"export error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = load_config(run_dir / "config.ini")
    grid = build_grid(cfg.domain, cfg.nx)
    data = np.load(run_dir / ex.FIELDS_FILE)
    out = Path(args.dest) if args.dest else run_dir / "export"
    out.mkdir(parents=True, exist_ok=True)
    theta = data["theta"]
    steps = data["snapshot_steps"]
    if args.format == "vtk":
        ex.write_vtk(out / "theta.vtk", grid, {"theta": theta, "speed": data["speed"]})
        for k, i in enumerate(steps):
            st = DeformationState.from_y(grid, data["y"][k])
            ex.write_vtk(out / f"y_step{i:03d}.vtk", grid, {"displacement": st.u, "det_grad_y": det2(st.F)})
    elif args.format == "csv":
        ex.theta_csv(grid, theta, out / "theta.csv")
        ex.backstrain_csv(grid, data["A"], data["slab"], out / "backstrain.csv")
        for k, i in enumerate(steps):
            st = DeformationState.from_y(grid, data["y"][k])
            ex.deformation_csv(grid, st.y, st.F, out / f"y_step{i:03d}.csv")
    else:
        T = float(data["T"])
        times = args.times or [0.25 * T, 0.5 * T, T]
        ex.fronts_csv(grid, theta, times, out / "fronts.csv")
    print(f"wrote {args.format} export to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="accretion", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--single-thread", action="store_true", help="force one BLAS/OpenMP thread")
    p.add_argument("-o", "--output", help="output root (env ACCRETION_OUTPUT_DIR, default ./runs)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve the coupled problem for a config file")
    r.add_argument("config")
    r.add_argument("--name", help="run directory name (default: config stem)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("suite", choices=["hypotheses", "eikonal", "equilibrium", "all"])
    v.add_argument("--params", help="INI file with a [material] section")
    v.add_argument("--config", help="run config for the equilibrium suite")
    v.add_argument("--sizes", type=int, nargs="+", help="grid sizes for the eikonal suite")
    v.add_argument("--n-random", type=int, default=20, help="random speed fields per size")
    v.add_argument("--seed", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("export", help="convert stored fields of a run directory")
    e.add_argument("run_dir")
    e.add_argument("format", choices=["vtk", "csv", "fronts"])
    e.add_argument("--times", type=float, nargs="+", help="front times (default T/4, T/2, T)")
    e.add_argument("--dest", help="destination directory (default <run_dir>/export)")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    env_threads = os.environ.get("ACCRETION_THREADS")
    _set_threads(1 if args.single_thread else (int(env_threads) if env_threads else None))
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", 0) is None:
        from .harness import DEFAULT_SEED

        args.seed = DEFAULT_SEED
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
