"""Regenerate the golden (theta, y) baseline for the bundled reference config.

Runs single-threaded so that reductions happen in a fixed order.

    python scripts/make_baseline.py [--out tests/data/reference_baseline.npz]
"""

import os

for _v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
    os.environ[_v] = "1"

import argparse  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from accretion.config import load_config  # noqa: E402
from accretion.coupling import run_coupled  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=ROOT / "configs" / "reference.ini")
    ap.add_argument("--out", default=ROOT / "tests" / "data" / "reference_baseline.npz")
    a = ap.parse_args()
    state, rep = run_coupled(load_config(a.config), raise_on_nonconvergence=True)
    np.savez(
        a.out,
        theta=state.theta.values,
        y_final=state.trajectory.states[-1].y,
        iterations=rep.iterations,
        theta_metrics=np.array(rep.theta_metrics),
    )
    print(f"k={rep.iterations} metrics={rep.theta_metrics} -> {a.out}")


if __name__ == "__main__":
    main()
