#!/usr/bin/env python3
"""Smoke test for the dropoly Python bindings.

Builds the extension module with cargo if needed, loads it, and checks a
handful of exactly-known values end to end. Run from anywhere:

    python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_module() -> Path:
    """Build the cdylib and stage it under an importable name."""
    lib = ROOT / "target" / "release" / "libdropoly_py.so"
    if not lib.exists():
        print("building dropoly-py (release)...")
        subprocess.run(
            ["cargo", "build", "--release", "-p", "dropoly-py"],
            cwd=ROOT,
            check=True,
        )
    stage = Path(tempfile.mkdtemp(prefix="dropoly-py-"))
    target = stage / "dropoly_py.so"
    shutil.copy2(lib, target)
    return stage


def approx(a: float, b: float, tol: float = 1e-12) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    stage = build_module()
    sys.path.insert(0, str(stage))
    import dropoly_py as dp

    print(f"loaded dropoly_py {dp.__version__}")

    # walk kernel: exact small values and the escape probability
    k3 = dp.Kernel(3, 2000)
    assert approx(k3.p(1), 0.125)
    assert abs(k3.alpha - 0.7178) < 3e-4, k3.alpha
    k1 = dp.Kernel(1, 64)
    assert approx(k1.b(1), 0.5)
    assert approx(k1.b(2), 0.125)
    assert approx(k1.b(3), 0.0625)
    assert approx(k1.a(4), 0.375)
    assert k1.renewal_error(64) < 1e-13
    print("kernel tables: ok")

    # two-step worked example with a hand-built disorder
    params = dp.Params(lam=1.0, h=0.0, p=1.0, d=1, n=2)
    disorder = dp.Disorder.from_json(
        '{"seed": 0, "n": 2, "p": 1.0, "omega": [1, 1], "eta": [1, 1]}'
    )
    assert disorder.delta(1, True) == -1
    assert disorder.delta(1, False) == 1
    tables = dp.Tables(disorder, params, k1)
    assert approx(tables.log_zhat_at(2), -math.log(2.0), 1e-13)
    e2 = math.e**2
    assert approx(tables.log_z()[2], math.log((e2 + 1.0) / 2.0), 1e-13)
    assert approx(tables.log_psi()[2], math.log((e2 + 1.0) / (2.0 * e2)), 1e-13)
    print("partition worked example: ok")

    # analytic phase bounds
    assert abs(dp.bound_delocalized(1.0)[0] - 0.5 * math.log(math.cosh(2.0))) < 1e-14
    assert abs(dp.bound_localized(1.0, 0.5, 1) - (1.0 - 3.0 * math.log(2.0))) < 1e-14
    assert abs(dp.diffusive_threshold(1.0, 3, k3) - 0.6625) < 1e-3
    print("phase bounds: ok")

    # free energy closed form at p = 0
    p0 = dp.Params(lam=1.5, h=0.4, p=0.0, d=1, n=600)
    k_fe = dp.Kernel(1, 300)
    est = dp.free_energy(p0, k_fe, replicas=16, base_seed=7)
    assert abs(est["psi_p_hat"]) <= 4.0 * est["stderr"] + 1e-12, est
    print("free energy (p = 0): ok")

    # exact sampling: step constraint and skeleton consistency
    pp = dp.Params(lam=1.0, h=0.0, p=1.0, d=1, n=64)
    dd = dp.Disorder.sample(pp, seed=5)
    path = dp.draw_path(dd, pp, k1, seed=9)
    coords = path["path"]
    assert coords[0] == 0
    for t in range(1, 65):
        assert abs(coords[t] - coords[t - 1]) == 1
    zeros = [t for t in range(1, 65) if coords[t] == 0]
    assert zeros == path["returns"], (zeros, path["returns"])
    assert path["n_returns"] == len(zeros)
    print("path sampling: ok")

    # exact endpoint law normalizes and matches the sampler's support
    law = dp.endpoint_law_1d(dd, pp)
    assert abs(sum(law) - 1.0) < 1e-10
    assert law[64 + path["endpoint"][0]] > 0.0
    print("endpoint law: ok")

    # quick classification at a deeply pinned point
    loc = dp.Params(lam=1.0, h=-1.5, p=1.0, d=1, n=300)
    verdict = dp.classify(loc, dp.Kernel(1, 300), replicas=24, base_seed=3)
    assert verdict["verdict"] == "Localized", verdict
    print("classification: ok")

    print("smoke test passed")


if __name__ == "__main__":
    main()
