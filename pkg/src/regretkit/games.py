"""Game specifications and oracles.

Matrix games, multiplayer normal-form tensors, their gradient operators and
smoothness constants, the 3x3 hard instance, the adversarial loss
generators, seeded random-game generation, and equilibrium-gap metrics.

Sign convention (fixed once, used everywhere): solvers consume *losses*.
For a matrix game the row player maximizes <x, A y>, so their loss is
-A y; the column player minimizes, so their loss is A^T x.  Equivalently,
``gradients`` returns G(x) = (-grad u_1, ..., -grad u_n) for the players'
utility functions.

Game file grammar (``save_game`` / ``load_game``)
-------------------------------------------------
Plain text; blank lines and ``#`` comment lines are ignored; tokens are
whitespace-separated and may wrap lines freely.

Matrix game (two-line header, then the d1 x d2 payoff grid in row-major
order; entries are the row player's payoffs)::

    matrix
    <d1> <d2>
    <d1 * d2 floats>

Normal-form game (header with player count, then the action counts, then
one payoff block per player; each block lists the player's payoff for
every pure profile in row-major order, last player's action fastest)::

    nfg <n>
    <d1> <d2> ... <dn>
    <prod(d) floats>     # player 1
    ...
    <prod(d) floats>     # player n
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._rng import PortableRandom
from .core import RegretLedger

__all__ = [
    "MatrixGame",
    "NormalFormGame",
    "LossSequence",
    "matrix_gradients",
    "nfg_gradients",
    "hard_instance",
    "instability_losses",
    "random_matrix_game",
    "random_nfg",
    "duality_gap",
    "cce_gap",
    "save_game",
    "load_game",
]


@dataclass(frozen=True)
class MatrixGame:
    """Two-player zero-sum game: row player maximizes <x, A y>."""

    payoff: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.payoff, dtype=float)
        if a.ndim != 2:
            raise ValueError("payoff matrix must be 2-D")
        if not np.all(np.isfinite(a)):
            raise ValueError("payoff matrix has non-finite entries")
        object.__setattr__(self, "payoff", a)

    @property
    def num_players(self) -> int:
        return 2

    @property
    def dims(self) -> tuple[int, int]:
        return self.payoff.shape

    def gradients(self, strategies) -> list[np.ndarray]:
        x, y = strategies
        return [-self.payoff @ y, self.payoff.T @ x]

    def gradient_for(self, player: int, strategies) -> np.ndarray:
        if player == 0:
            return -self.payoff @ strategies[1]
        return self.payoff.T @ strategies[0]

    def value(self, x, y) -> float:
        return float(x @ self.payoff @ y)

    @functools.cached_property
    def constants(self) -> tuple[float, float]:
        """(B_u, L_u): gradient bound and smoothness constant.

        ||A y||_2 is convex in y, hence maximized at a vertex, so
        B_u = max over columns/rows of the column/row 2-norms; the gradient
        is linear in the opponent, so L_u is the spectral norm of A.
        """
        a = self.payoff
        b_u = max(
            float(np.linalg.norm(a, axis=0).max()),  # ||A e_j||
            float(np.linalg.norm(a, axis=1).max()),  # ||A^T e_i||
        )
        return b_u, spectral_norm(a)


@dataclass(frozen=True)
class NormalFormGame:
    """n-player normal-form game stored as full payoff tensors.

    ``payoffs[i]`` has shape ``dims`` and holds player i's payoff at every
    pure profile.  Utilities are the multilinear extensions.
    """

    payoffs: tuple[np.ndarray, ...]

    def __post_init__(self):
        tensors = tuple(np.asarray(u, dtype=float) for u in self.payoffs)
        if not tensors:
            raise ValueError("need at least one player")
        shape = tensors[0].shape
        if len(shape) != len(tensors):
            raise ValueError("need one tensor axis per player")
        for u in tensors:
            if u.shape != shape:
                raise ValueError("payoff tensors must share one shape")
            if not np.all(np.isfinite(u)):
                raise ValueError("payoff tensor has non-finite entries")
        object.__setattr__(self, "payoffs", tensors)

    @property
    def num_players(self) -> int:
        return len(self.payoffs)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.payoffs[0].shape

    def utility(self, player: int, strategies) -> float:
        value = self.payoffs[player]
        for x in strategies:
            value = np.tensordot(value, np.asarray(x, dtype=float), axes=([0], [0]))
        return float(value)

    def gradients(self, strategies) -> list[np.ndarray]:
        """Per-player losses -grad_{x_i} u_i(x).

        Entry a of player i's payoff gradient is the expected payoff of
        pure action a against the opponents' mixed profile.
        """
        xs = [np.asarray(x, dtype=float) for x in strategies]
        if len(xs) != self.num_players:
            raise ValueError("one strategy per player required")
        for i, x in enumerate(xs):
            if x.shape != (self.dims[i],):
                raise ValueError(f"dimension mismatch for player {i}")
        return [self._loss_gradient(i, xs) for i in range(self.num_players)]

    def gradient_for(self, player: int, strategies) -> np.ndarray:
        xs = [np.asarray(x, dtype=float) for x in strategies]
        return self._loss_gradient(player, xs)

    def _loss_gradient(self, i: int, xs) -> np.ndarray:
        grad = self.payoffs[i]
        # contract every axis except player i's own
        for j in range(self.num_players - 1, -1, -1):
            if j == i:
                continue
            grad = np.tensordot(grad, xs[j], axes=([j], [0]))
        return -grad

    @functools.cached_property
    def constants(self) -> tuple[float, float]:
        """(B_u, L_u) upper bounds from pure-profile enumeration.

        B_u: the gradient's norm is convex in the opponents' profile, so
        its maximum is attained at a pure profile.  L_u: changing one
        opponent k at a time, the gradient moves by at most
        L_ik ||x_k - x_k'|| where L_ik is the largest operator norm of the
        (i, k) matrix unfolding over pure choices of the remaining
        players; Cauchy-Schwarz over k gives max_i sqrt(sum_k L_ik^2).
        """
        dims = self.dims
        n = self.num_players
        b_u = 0.0
        l_u = 0.0
        for i in range(n):
            others = [j for j in range(n) if j != i]
            for profile in itertools.product(*(range(dims[j]) for j in others)):
                index = [slice(None)] * n
                for j, a in zip(others, profile):
                    index[j] = a
                b_u = max(b_u, float(np.linalg.norm(self.payoffs[i][tuple(index)])))
            lik_sq = 0.0
            for k in others:
                rest = [j for j in range(n) if j not in (i, k)]
                lik = 0.0
                for profile in itertools.product(*(range(dims[j]) for j in rest)):
                    index = [slice(None)] * n
                    for j, a in zip(rest, profile):
                        index[j] = a
                    slab = self.payoffs[i][tuple(index)]  # axes (i, k) in order
                    if k < i:
                        slab = slab.T
                    lik = max(lik, spectral_norm(slab))
                lik_sq += lik * lik
            l_u = max(l_u, lik_sq**0.5)
        return b_u, l_u


def spectral_norm(a: np.ndarray, max_iters: int = 200, rel_tol: float = 1e-10) -> float:
    """||A||_op by power iteration on A^T A, deterministic start 1/sqrt(d)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0 or not a.any():
        return 0.0
    v = np.full(a.shape[1], 1.0 / a.shape[1] ** 0.5)
    sigma = 0.0
    for _ in range(max_iters):
        w = a.T @ (a @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # start vector in the kernel: fall back to the largest column
            j = int(np.argmax(np.linalg.norm(a, axis=0)))
            v = np.zeros(a.shape[1])
            v[j] = 1.0
            continue
        v = w / norm
        new_sigma = norm**0.5
        if sigma > 0.0 and abs(new_sigma - sigma) <= rel_tol * sigma:
            return new_sigma
        sigma = new_sigma
    return sigma


def matrix_gradients(game: MatrixGame, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Loss pair (-A y, A^T x) for the maximizing row player and the
    minimizing column player."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d1, d2 = game.dims
    if x.shape != (d1,) or y.shape != (d2,):
        raise ValueError("dimension mismatch")
    lx, ly = game.gradients([x, y])
    return lx, ly


def nfg_gradients(game: NormalFormGame, strategies) -> list[np.ndarray]:
    return game.gradients(strategies)


def hard_instance() -> MatrixGame:
    """The 3x3 game on which unstabilized (P)RM+ slows to ~T^-0.5."""
    return MatrixGame(np.array([
        [3.0, 0.0, -3.0],
        [0.0, 3.0, -4.0],
        [0.0, 0.0, 1.0],
    ]))


@dataclass(frozen=True)
class LossSequence:
    """Adversarial two-action loss sequence; ``losses`` has shape (T, 2)."""

    losses: np.ndarray
    variant: str
    scaled: bool

    def __len__(self) -> int:
        return self.losses.shape[0]

    def fractions(self) -> list[tuple[Fraction, Fraction]]:
        """Exact dyadic values for the rational replay."""
        return [(Fraction(float(a)), Fraction(float(b))) for a, b in self.losses]


def _instability_scalar(t: int, variant: str) -> float:
    # first component of the round-t loss; the second component is 0
    if variant == "rm+":
        if t == 1:
            return 2.0
        if t % 2 == 0:
            return -(2.0 ** ((t - 2) // 2))
        return 2.0 ** ((t - 1) // 2)
    if variant == "prm+":
        if t == 1:
            return 4.0
        if t == 2:
            return -1.0
        if t % 2 == 1:
            return 2.0 ** ((t + 1) // 2)
        return -(2.0 ** ((t - 2) // 2))
    raise ValueError(f"unknown variant: {variant!r}")


def instability_losses(T: int, variant: str, scaled: bool = False) -> LossSequence:
    """The loss sequences driving (P)RM+ into perpetual oscillation.

    Replayed from R = 0, the strategy alternates between (1/2, 1/2) at odd
    rounds and (0, 1) at even rounds.  With ``scaled`` the sequence is
    divided by L_T = max_t |l^t| so all entries lie in [-1, 1]; both
    algorithms are scale-invariant, so the iterates are unchanged (and all
    values stay dyadic, hence exact in binary floating point for moderate
    T).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    first = np.array([_instability_scalar(t, variant) for t in range(1, T + 1)])
    if scaled:
        first = first / np.abs(first).max()
    out = np.zeros((T, 2))
    out[:, 0] = first
    return LossSequence(out, variant, scaled)


def random_matrix_game(d1: int, d2: int, seed: int) -> MatrixGame:
    """Seeded i.i.d. standard-normal payoff matrix (PortableRandom stream)."""
    if d1 < 1 or d2 < 1:
        raise ValueError("dimensions must be positive")
    rng = PortableRandom(seed)
    entries = np.array(rng.normals(d1 * d2)).reshape(d1, d2)
    return MatrixGame(entries)


def random_nfg(dims, seed: int) -> NormalFormGame:
    """Seeded random normal-form game with payoffs uniform in [-1, 1]."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError("need >= 2 players with positive action counts")
    rng = PortableRandom(seed)
    size = int(np.prod(dims))
    tensors = tuple(
        (2.0 * np.array(rng.uniforms(size)) - 1.0).reshape(dims)
        for _ in range(len(dims))
    )
    return NormalFormGame(tensors)


def duality_gap(game: MatrixGame, x, y) -> float:
    """max_i (A y)_i - min_j (x^T A)_j; zero exactly at a Nash equilibrium."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float((game.payoff @ y).max() - (x @ game.payoff).min())


def cce_gap(ledgers, T: int) -> float:
    """max over players of [max-action regret]+ / T for the empirical play
    distribution."""
    if T < 1:
        raise ValueError("T must be >= 1")
    worst = 0.0
    for ledger in ledgers:
        cum = ledger.cum if isinstance(ledger, RegretLedger) else np.asarray(ledger, dtype=float)
        worst = max(worst, float(cum.max()))
    return max(worst, 0.0) / T


# --- plain-text game files ---------------------------------------------------


def save_game(game, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(game, MatrixGame):
            d1, d2 = game.dims
            fh.write("matrix\n")
            fh.write(f"{d1} {d2}\n")
            for row in game.payoff:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        elif isinstance(game, NormalFormGame):
            fh.write(f"nfg {game.num_players}\n")
            fh.write(" ".join(str(d) for d in game.dims) + "\n")
            for u in game.payoffs:
                fh.write(" ".join(f"{v:.17g}" for v in u.ravel()) + "\n")
        else:
            raise ValueError(f"cannot serialize {type(game).__name__}")


def _tokens(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            yield from line.split()


def load_game(path):
    """Parse a game file (see the module docstring for the grammar)."""
    tokens = _tokens(path)
    try:
        kind = next(tokens)
    except StopIteration:
        raise ValueError(f"{path}: empty game file") from None
    try:
        if kind == "matrix":
            d1, d2 = int(next(tokens)), int(next(tokens))
            entries = [float(next(tokens)) for _ in range(d1 * d2)]
            leftovers = list(tokens)
            if leftovers:
                raise ValueError(f"{path}: trailing tokens {leftovers[:3]}")
            return MatrixGame(np.array(entries).reshape(d1, d2))
        if kind == "nfg":
            n = int(next(tokens))
            dims = tuple(int(next(tokens)) for _ in range(n))
            size = int(np.prod(dims))
            tensors = tuple(
                np.array([float(next(tokens)) for _ in range(size)]).reshape(dims)
                for _ in range(n)
            )
            leftovers = list(tokens)
            if leftovers:
                raise ValueError(f"{path}: trailing tokens {leftovers[:3]}")
            return NormalFormGame(tensors)
    except StopIteration:
        raise ValueError(f"{path}: truncated game file") from None
    raise ValueError(f"{path}: unknown game kind {kind!r}")
