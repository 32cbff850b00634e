"""Conceptual and extragradient RM+ on the chopped joint space.

The joint lifted dynamics of all players are driven by the operator

    F(z) = ( f(x_1, l_1), ..., f(x_n, l_n) ),   x_i = g(z_i),
    (l_1, ..., l_n) = G(x),

evaluated on X> = prod_i D>_i (each block nonnegative with mass >= 1),
where F is Lipschitz.  The conceptual update solves the fixed-point
equation

    z_t = P_{z_{t-1}}( eta * F(z_t) ),

by iterating the contraction w <- P_{z_{t-1}}(eta * F(w)) from w = z_{t-1}
(a contraction whenever eta * L_F < 1); the extragradient update is the
same scheme truncated to a single inner iteration.  P_z(v) denotes the
Euclidean proximal step, i.e. the blockwise chopped projection of z - v.

Step-size prescriptions used by the harness: eta = 1/(2 L_F) for the
conceptual solver and eta = 1/(sqrt(2) L_F) for the extragradient one,
with L_F from ``lipschitz_bound``:

 * matrix games:       sqrt(6) * ||A||_op * max(d1, d2),
 * normal-form games:  (max_i d_i) * sqrt(2 B_u^2 + 4 L_u^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import _normalize_nonneg, regret_loss
from .games import MatrixGame, spectral_norm
from .stabilized import project_chopped

__all__ = [
    "GameOperator",
    "FixedPointReport",
    "operator_F",
    "operator_for",
    "lipschitz_bound",
    "initial_lifted_point",
    "solve_fixed_point",
    "conceptual_round",
    "exrm_round",
]


@dataclass(frozen=True)
class GameOperator:
    """The joint operator F with its Lipschitz bound over X>."""

    evaluate: Callable[[list[np.ndarray]], list[np.ndarray]]
    lipschitz_bound: float
    dims: tuple[int, ...]


@dataclass(frozen=True)
class FixedPointReport:
    """Outcome of one inner fixed-point solve.

    ``iterations`` counts the proximal applications performed;
    ``residual`` is ||w - P_{z_prev}(eta F(w))||_2 for the returned point;
    ``history`` holds the residual measured at every inner iteration.
    """

    iterations: int
    residual: float
    converged: bool
    history: tuple[float, ...] = field(default=(), repr=False)


def _check_in_chopped(z_blocks, dims) -> list[np.ndarray]:
    blocks = [np.asarray(b, dtype=float) for b in z_blocks]
    if len(blocks) != len(dims):
        raise ValueError("one block per player required")
    for block, d in zip(blocks, dims):
        if block.shape != (d,):
            raise ValueError("block dimension mismatch")
        if np.any(block < 0.0) or block.sum() < 1.0 - 1e-9:
            raise ValueError("point outside the chopped joint space")
    return blocks


def operator_F(z_blocks, game) -> list[np.ndarray]:
    """Evaluate F at a feasible joint lifted point (one block per player)."""
    blocks = _check_in_chopped(z_blocks, game.dims)
    strategies = [_normalize_nonneg(b) for b in blocks]
    losses = game.gradients(strategies)
    return [regret_loss(x, l) for x, l in zip(strategies, losses)]


def lipschitz_bound(game) -> float:
    """Upper bound L_F on the Lipschitz constant of F over X>."""
    if isinstance(game, MatrixGame):
        d1, d2 = game.dims
        return 6.0**0.5 * spectral_norm(game.payoff) * max(d1, d2)
    b_u, l_u = game.constants
    return max(game.dims) * (2.0 * b_u**2 + 4.0 * l_u**2) ** 0.5


def operator_for(game) -> GameOperator:
    return GameOperator(
        evaluate=lambda blocks: operator_F(blocks, game),
        lipschitz_bound=lipschitz_bound(game),
        dims=tuple(game.dims),
    )


def initial_lifted_point(dims) -> list[np.ndarray]:
    """Per-player uniform blocks (1/d_i) * 1: unit mass, feasible in X>."""
    return [np.full(d, 1.0 / d) for d in dims]


def _prox(z_prev, step_blocks) -> list[np.ndarray]:
    return [project_chopped(z - s) for z, s in zip(z_prev, step_blocks)]


def _joint_distance(a, b) -> float:
    return sum(float(np.sum((u - v) ** 2)) for u, v in zip(a, b)) ** 0.5


def _solve(z_prev, game, eta, eps_target, k_max):
    """Shared inner loop.

    Returns (w, z_next, report): w is the first iterate whose measured
    residual reached ``eps_target`` (or the last iterate if the budget ran
    out), z_next = P_{z_prev}(eta F(w)) is the corresponding state advance,
    computed as a by-product of the residual measurement.
    """
    if eta <= 0.0:
        raise ValueError("step size eta must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    z_prev = _check_in_chopped(z_prev, game.dims)
    w = z_prev
    history: list[float] = []
    for k in range(1, k_max + 1):
        advanced = _prox(z_prev, [eta * f for f in operator_F(w, game)])
        residual = _joint_distance(w, advanced)
        history.append(residual)
        if residual <= eps_target:
            return w, advanced, FixedPointReport(k, residual, True, tuple(history))
        w = advanced
    # budget exhausted: accept the last iterate; measuring its residual
    # doubles as the state advance
    advanced = _prox(z_prev, [eta * f for f in operator_F(w, game)])
    residual = _joint_distance(w, advanced)
    history.append(residual)
    return w, advanced, FixedPointReport(
        k_max, residual, residual <= eps_target, tuple(history)
    )


def solve_fixed_point(z_prev, game, eta: float, eps_target: float,
                      k_max: int) -> tuple[list[np.ndarray], FixedPointReport]:
    """Approximately solve z = P_{z_prev}(eta F(z)) from w^0 = z_prev.

    Geometric convergence at rate eta * L_F when that product is below 1;
    with eta * L_F >= 1 the loop still runs but typically reports
    ``converged=False`` after ``k_max`` iterations.
    """
    w, _, report = _solve(z_prev, game, eta, eps_target, k_max)
    return w, report


def conceptual_round(z_prev, game, eta: float, eps_target: float,
                     k_max: int) -> tuple[list[np.ndarray], list[np.ndarray], FixedPointReport]:
    """One conceptual round: play g at the approximate fixed point w, then
    advance the state through one more proximal step at F(w)."""
    w, z_next, report = _solve(z_prev, game, eta, eps_target, k_max)
    strategies = [_normalize_nonneg(b) for b in w]
    return z_next, strategies, report


def exrm_round(z_prev, game, eta: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """One extragradient round: exactly the conceptual round truncated to a
    single inner iteration (bit-for-bit)."""
    z_next, strategies, _ = conceptual_round(z_prev, game, eta,
                                             eps_target=-1.0, k_max=1)
    return z_next, strategies
