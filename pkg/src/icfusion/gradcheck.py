"""Finite-difference verification of every block's analytic backward pass.

Each block is checked on (1, 8, 6, 6) float64 inputs against the scalar loss
``sum(r * block(x))`` with a fixed random ``r``. Coordinates are sampled
without replacement. Two errors are reported per block: the max relative error
|a - n| / max(|a|, |n|, 1e-8), which is the pass criterion, and the max error
scaled by the largest gradient magnitude, which stays meaningful when a
sampled coordinate has a near-zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from icfusion import blocks
from icfusion.config import LevelConfig
from icfusion.nn import finite_diff_grad, max_relative_error
from icfusion.tensor import derive_seed, seeded_uniform

SHAPE = (1, 8, 6, 6)
STEP = 1e-3
TOLERANCE = 1e-5
FLOOR = 1e-8


@dataclass(frozen=True)
class GradcheckResult:
    block: str
    coords: int
    max_rel_error: float
    max_scaled_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _sample(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    return np.sort(rng.choice(size, size=min(count, size), replace=False))


def check_block(name: str, inputs: list[np.ndarray], forward: Callable,
                backward: Callable, seed: int, n_coords: int = 64,
                step: float = STEP) -> GradcheckResult:
    """Compare ``backward`` against central differences of ``forward``.

    ``forward(*inputs)`` returns a tensor; ``backward(*inputs, grad_out)``
    returns one gradient per input. Coordinates are split evenly over inputs.
    """
    out = forward(*inputs)
    weights = seeded_uniform(out.shape, -1.0, 1.0, derive_seed(seed, 1), np.float64)
    grads = backward(*inputs, weights)
    rng = np.random.default_rng(derive_seed(seed, 2))
    per_input = -(-n_coords // len(inputs))
    analytic, numeric, scale = [], [], 0.0
    for i, (x, g) in enumerate(zip(inputs, grads)):
        def loss(t, i=i):
            args = list(inputs)
            args[i] = t
            return float(np.sum(weights * forward(*args)))

        coords = _sample(rng, x.size, per_input)
        analytic.append(g.reshape(-1)[coords])
        numeric.append(finite_diff_grad(loss, x, coords, step))
        scale = max(scale, float(np.max(np.abs(g))))
    analytic = np.concatenate(analytic)
    numeric = np.concatenate(numeric)
    rel = max_relative_error(analytic, numeric, FLOOR)
    scaled = float(np.max(np.abs(analytic - numeric))) / max(scale, FLOOR)
    return GradcheckResult(name, analytic.size, rel, scaled)


def run_gradcheck(seed: int = 7, n_coords: int = 64, step: float = STEP) -> list[GradcheckResult]:
    c = SHAPE[1]
    dt = np.float64
    x = seeded_uniform(SHAPE, -1.0, 1.0, derive_seed(seed, 10), dt)
    x_ir = seeded_uniform(SHAPE, -1.0, 1.0, derive_seed(seed, 11), dt)
    level = blocks.init_level_params(LevelConfig(3, c_rgb=c, c_ir=c), derive_seed(seed, 20), dt)
    csp = blocks.init_csp(c, c, c, 2, 2, 2, derive_seed(seed, 21), dt)
    ccsg = blocks.init_ccsg(c, 2, 2, derive_seed(seed, 22), dt)
    clkg = blocks.init_clkg(c, derive_seed(seed, 23), dt)

    cases = [
        ("msfd", [x], lambda t: blocks.msfd_forward(t, level.msfd),
         lambda t, g: [blocks.msfd_backward(t, level.msfd, g)[0]]),
        ("csp", [x], lambda t: blocks.csp_forward(t, csp),
         lambda t, g: [blocks.csp_backward(t, csp, g)[0]]),
        ("ccsg", [x], lambda t: blocks.ccsg_forward(t, ccsg),
         lambda t, g: [blocks.ccsg_backward(t, ccsg, g)[0]]),
        ("clkg", [x], lambda t: blocks.clkg_forward(t, clkg),
         lambda t, g: [blocks.clkg_backward(t, clkg, g)[0]]),
        ("fusion_block", [x, x_ir], lambda a, b: blocks.fusion_block_forward(a, b, level),
         lambda a, b, g: blocks.fusion_block_backward(a, b, level, g)[:2]),
    ]
    return [check_block(name, inputs, fwd, bwd, derive_seed(seed, 30 + i), n_coords, step)
            for i, (name, inputs, fwd, bwd) in enumerate(cases)]


def format_results(results: list[GradcheckResult]) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status} {r.block:<13} coords={r.coords:<3d} "
                     f"max_rel={r.max_rel_error:.3e} max_scaled={r.max_scaled_error:.3e} "
                     f"tol={r.tolerance:.0e}")
    return "\n".join(lines)
