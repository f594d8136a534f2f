"""Builds the extension module and exercises it on the baseline config.

Usage: python3 python/smoke.py [--no-build]
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module(build: bool):
    if build:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "phasefield-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    lib = ROOT / "target" / "release" / "libphasefield.so"
    dest = Path(tempfile.mkdtemp()) / "phasefield.so"
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))
    import phasefield

    return phasefield


def main() -> int:
    pf = load_module("--no-build" not in sys.argv)
    cfg = pf.Config.load(str(ROOT / "configs" / "baseline.cfg"), ["model.steps=20"])
    state = pf.simulate(cfg)
    assert len(state.rho) == cfg.steps + 1 and len(state.rho[0]) == cfg.node_count
    assert all(0.0 < r < 1.0 for frame in state.rho for r in frame)
    print(f"simulate: {state.steps} steps, final rho range "
          f"[{min(state.rho[-1]):.4f}, {max(state.rho[-1]):.4f}]")

    h = [[0.0] * cfg.boundary_count] + [
        [math.sin(0.3 * n), 0.5] for n in range(1, cfg.steps + 1)
    ]
    lhs, rhs, residual = pf.duality(cfg, state, h)
    assert residual <= 1e-10, residual
    print(f"duality: lhs {lhs:.6e} rhs {rhs:.6e} residual {residual:.2e}")

    grad = pf.adjoint(cfg, state)["gradient"]
    eps = 1e-5
    plus = [[a + eps * b for a, b in zip(fu, fh)] for fu, fh in zip(state.control, h)]
    minus = [[a - eps * b for a, b in zip(fu, fh)] for fu, fh in zip(state.control, h)]
    fd = (pf.cost(cfg, pf.simulate(cfg, plus))["total"]
          - pf.cost(cfg, pf.simulate(cfg, minus))["total"]) / (2 * eps)
    weights = [1.0] * cfg.boundary_count
    exact = sum(
        cfg.dt * sum(w * g * d for w, g, d in zip(weights, fg, fh))
        for fg, fh in zip(grad[1:], h[1:])
    )
    assert abs(fd - exact) <= 1e-6 * abs(exact), (fd, exact)
    print(f"gradient: fd {fd:.10e} adjoint {exact:.10e}")

    rows = pf.taylor_test(cfg, state.control, h, [1e-2, 5e-3, 2.5e-3])
    orders = [r[2] for r in rows[1:]]
    assert all(1.7 <= o <= 2.3 for o in orders), orders
    print("taylor orders:", ", ".join(f"{o:.3f}" for o in orders))

    u, trace, converged = pf.optimize(cfg)
    costs = [row["cost"] for row in trace]
    assert all(b < a for a, b in zip(costs, costs[1:]))
    print(f"optimize: {len(trace) - 1} iterations, J {costs[0]:.6e} -> {costs[-1]:.6e}, converged {converged}")

    names = [name for name, _ in pf.norm_table(state)]
    assert "mu_L2_H1" in names

    try:
        pf.Config.parse("model.epsilon = -1\n")
    except ValueError as err:
        print(f"config error surfaced: {err}")
    else:
        raise AssertionError("negative epsilon accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
