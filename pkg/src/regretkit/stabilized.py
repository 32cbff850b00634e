"""Stabilized predictive RM+.

Unstabilized (P)RM+ can oscillate when the aggregate payoff vector comes
close to the origin, where the normalization map loses its Lipschitz
property.  Two fixes, both operating on the lifted joint state:

 * restarting: run the two-step predictive update on the nonnegative
   orthant and reset any player whose aggregate payoffs fall to or below
   the floor R0 back to R0 * 1 (``stable_prmp_round``);
 * chopping: project every step onto the chopped orthant
   D> = { r >= 0 : ||r||_1 >= 1 }, so iterates can never approach the
   origin at all (``smooth_prmp_round``).

One round of either algorithm, for each player i with prediction m_i:

    z_i = P(w_i - eta * m_i)          # play x_i = g(z_i)
    w_i = P(w_i - eta * f_i)          # f_i = f(x_i, l_i), l = G(x)

where P is the orthant projection (stable) or the chopped projection
(smooth); the next round's prediction is f_i, reset to zero for a player
that restarted.  The chopped projection follows the two-case rule: the
positive part if it already has mass >= 1, otherwise the ordinary simplex
projection (both cases solve the constrained least-squares exactly).

Rounds are synchronous across players and pure: (state, game) -> (state,
strategies).  The ``*_alternating`` variants update players sequentially
within a round, each against the freshest opponent strategies, matching
the alternation convention used by the experiment harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NonFiniteError, _normalize_nonneg, regret_loss, uniform_strategy

__all__ = [
    "ChoppedOrthant",
    "JointLiftedState",
    "project_orthant",
    "project_simplex",
    "project_chopped",
    "stable_initial_state",
    "smooth_initial_state",
    "stable_prmp_round",
    "smooth_prmp_round",
    "stable_prmp_round_alternating",
    "smooth_prmp_round_alternating",
]


def _check_finite(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("non-finite input to projection")
    return y


def project_orthant(y) -> np.ndarray:
    """Componentwise positive part: the Euclidean projection onto R+^d."""
    return np.maximum(_check_finite(y), 0.0)


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold in O(d log d): with u the entries sorted in
    descending order, find the largest k with u_k + (1 - sum_{i<=k} u_i)/k
    > 0 and shift-clip by that amount.  Ties in the sort are harmless (the
    projection is unique).
    """
    y = _check_finite(y)
    u = np.sort(y)[::-1]
    cumulative = np.cumsum(u)
    ks = np.arange(1, y.size + 1)
    candidates = u + (1.0 - cumulative) / ks
    k = int(np.nonzero(candidates > 0.0)[0][-1]) + 1
    tau = (1.0 - cumulative[k - 1]) / k
    return np.maximum(y + tau, 0.0)


def project_chopped(y) -> np.ndarray:
    """Euclidean projection onto D> = { r >= 0 : ||r||_1 >= 1 }.

    KKT case split: if the positive part already has mass >= 1 the mass
    constraint is slack and [y]+ is the answer; otherwise the constraint
    is tight and the answer is the simplex projection.
    """
    y = _check_finite(y)
    positive = np.maximum(y, 0.0)
    if positive.sum() >= 1.0:
        return positive
    return project_simplex(y)


@dataclass(frozen=True)
class ChoppedOrthant:
    """The set D> = { r in R+^dim : ||r||_1 >= floor } (floor fixed at 1)."""

    dim: int
    floor: float = 1.0

    def contains(self, r, tol: float = 1e-9) -> bool:
        r = np.asarray(r, dtype=float)
        return bool(r.shape == (self.dim,)
                    and np.all(r >= -tol)
                    and r.sum() >= self.floor - tol)


@dataclass(frozen=True)
class JointLiftedState:
    """Joint lifted state of the two-step predictive update.

    ``w`` are the per-player aggregate vectors, ``z`` the latest proximal
    midpoints (the played strategies are g(z_i)), ``prediction`` the next
    round's per-player predictions, ``last_strategies`` the strategies
    played in the latest round (consumed by the alternating drivers).
    ``restart_events`` collects (round, player) pairs.
    """

    w: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...]
    prediction: tuple[np.ndarray, ...]
    last_strategies: tuple[np.ndarray, ...]
    restart_events: tuple[tuple[int, int], ...]
    t: int

    @property
    def num_players(self) -> int:
        return len(self.w)


def _floors(r0, num_players: int) -> list[float]:
    """R0 may be one scalar or one positive value per player."""
    values = ([float(r0)] * num_players if np.isscalar(r0)
              else [float(v) for v in r0])
    if len(values) != num_players or any(v <= 0.0 for v in values):
        raise ValueError("R0 must be positive (one value, or one per player)")
    return values


def stable_initial_state(dims, r0=1.0) -> JointLiftedState:
    """w^0 = R0 * 1 per player, zero predictions."""
    floors = _floors(r0, len(tuple(dims)))
    w = tuple(np.full(d, floor) for d, floor in zip(dims, floors))
    return JointLiftedState(
        w=w,
        z=tuple(v.copy() for v in w),
        prediction=tuple(np.zeros(d) for d in dims),
        last_strategies=tuple(uniform_strategy(d) for d in dims),
        restart_events=(),
        t=0,
    )


def smooth_initial_state(dims) -> JointLiftedState:
    """w^0 = (1/d_i) * 1 per player (unit mass, inside the chopped set)."""
    w = tuple(np.full(d, 1.0 / d) for d in dims)
    return JointLiftedState(
        w=w,
        z=tuple(v.copy() for v in w),
        prediction=tuple(np.zeros(d) for d in dims),
        last_strategies=tuple(uniform_strategy(d) for d in dims),
        restart_events=(),
        t=0,
    )


def _check_round_args(state: JointLiftedState, game, eta: float) -> None:
    if eta <= 0.0:
        raise ValueError("step size eta must be positive")
    dims = game.dims
    if len(dims) != state.num_players or any(
        w.shape != (d,) for w, d in zip(state.w, dims)
    ):
        raise ValueError("state dimensions do not match the game")


def _should_restart(w_next: np.ndarray, f: np.ndarray, floor: float) -> bool:
    # componentwise <= triggers, ties included; sitting exactly at the
    # floor with nothing to reset is a no-op and is not logged
    if not np.all(w_next <= floor):
        return False
    return bool(np.any(w_next != floor) or np.any(f != 0.0))


def stable_prmp_round(state: JointLiftedState, game, eta: float,
                      r0=1.0) -> tuple[JointLiftedState, list[np.ndarray]]:
    """One synchronous round of the restarting algorithm.

    Two orthant-projected proximal steps, then the per-player restart
    check: a player whose aggregate vector is componentwise <= R0
    (ties included) is reset to R0 * 1 and its prediction cleared.
    ``r0`` is one scalar, or one value per player for the scale-invariant
    form the experiment protocol uses (floor R0/d_i with unit-mass
    initialization).
    """
    _check_round_args(state, game, eta)
    floors = _floors(r0, state.num_players)
    t = state.t + 1
    z = tuple(np.maximum(w - eta * m, 0.0)
              for w, m in zip(state.w, state.prediction))
    strategies = [_normalize_nonneg(zi) for zi in z]
    losses = game.gradients(strategies)
    fs = [regret_loss(x, l) for x, l in zip(strategies, losses)]
    new_w = []
    new_pred = []
    events = list(state.restart_events)
    for i, (w, f) in enumerate(zip(state.w, fs)):
        wi = np.maximum(w - eta * f, 0.0)
        if _should_restart(wi, f, floors[i]):
            wi = np.full(wi.shape, floors[i])
            new_pred.append(np.zeros(wi.shape))
            events.append((t, i))
        else:
            new_pred.append(f)
        new_w.append(wi)
    next_state = JointLiftedState(
        w=tuple(new_w),
        z=z,
        prediction=tuple(new_pred),
        last_strategies=tuple(strategies),
        restart_events=tuple(events),
        t=t,
    )
    return next_state, strategies


def smooth_prmp_round(state: JointLiftedState, game,
                      eta: float) -> tuple[JointLiftedState, list[np.ndarray]]:
    """One synchronous round of the chopped-orthant algorithm.

    Identical structure to the stable round, but both proximal steps
    project onto the chopped set and there is no restart branch, so every
    iterate keeps ||.||_1 >= 1 per player.
    """
    _check_round_args(state, game, eta)
    for w in state.w:
        if np.any(w < 0.0) or w.sum() < 1.0 - 1e-9:
            raise ValueError("state outside the chopped orthant")
    t = state.t + 1
    z = tuple(project_chopped(w - eta * m)
              for w, m in zip(state.w, state.prediction))
    strategies = [_normalize_nonneg(zi) for zi in z]
    losses = game.gradients(strategies)
    fs = [regret_loss(x, l) for x, l in zip(strategies, losses)]
    new_w = tuple(project_chopped(w - eta * f) for w, f in zip(state.w, fs))
    next_state = JointLiftedState(
        w=new_w,
        z=z,
        prediction=tuple(fs),
        last_strategies=tuple(strategies),
        restart_events=state.restart_events,
        t=t,
    )
    return next_state, strategies


def _alternating_round(state: JointLiftedState, game, eta: float, r0,
                       chopped: bool) -> tuple[JointLiftedState, list[np.ndarray]]:
    # every player's round-t play comes from the pre-round state; players
    # then update in index order, each seeing the loss induced by the
    # not-yet-updated players' round-t plays and by the already-updated
    # players' *next-round* plays (their freshly updated strategies)
    _check_round_args(state, game, eta)
    project = project_chopped if chopped else project_orthant
    floors = None if chopped else _floors(r0, state.num_players)
    t = state.t + 1
    z = tuple(project(w - eta * m) for w, m in zip(state.w, state.prediction))
    strategies = [_normalize_nonneg(zi) for zi in z]
    profile = list(strategies)
    new_w = list(state.w)
    new_pred = list(state.prediction)
    events = list(state.restart_events)
    for i in range(state.num_players):
        loss_i = game.gradient_for(i, profile)
        fi = regret_loss(strategies[i], loss_i)
        wi = project(state.w[i] - eta * fi)
        if not chopped and _should_restart(wi, fi, floors[i]):
            wi = np.full(wi.shape, floors[i])
            new_pred[i] = np.zeros(wi.shape)
            events.append((t, i))
        else:
            new_pred[i] = fi
        new_w[i] = wi
        profile[i] = _normalize_nonneg(project(wi - eta * new_pred[i]))
    next_state = JointLiftedState(
        w=tuple(new_w),
        z=z,
        prediction=tuple(new_pred),
        last_strategies=tuple(strategies),
        restart_events=tuple(events),
        t=t,
    )
    return next_state, strategies


def stable_prmp_round_alternating(state, game, eta: float, r0=1.0):
    return _alternating_round(state, game, eta, r0, chopped=False)


def smooth_prmp_round_alternating(state, game, eta: float):
    for w in state.w:
        if np.any(w < 0.0) or w.sum() < 1.0 - 1e-9:
            raise ValueError("state outside the chopped orthant")
    return _alternating_round(state, game, eta, None, chopped=True)
