"""Experiment orchestration: solver drivers, traces, CSV, rate regression.

``run(config, game)`` executes one solver on one game and returns a
``RunTrace``.  Traces are deterministic functions of (config, game, seed);
the CSV rendering is byte-exact (17 significant digits).

CSV schema: ``#``-prefixed ``key=value`` header lines, then the row header

    t,player,regret_max,gap,iter_var,restart,fp_k,fp_residual

with one row per (stored round, player).  ``regret_max`` is the player's
max-action regret (for tree games: the per-infoset positive
counterfactual-regret bound on sequence-form regret); ``gap`` is the
duality gap of the running averaged profile for matrix games, and the
coarse-correlated-equilibrium gap max_i regret_i / t otherwise (repeated
on every player row); ``iter_var`` is the squared step ||x^t - x^{t-1}||^2;
``fp_k``/``fp_residual`` are filled by the conceptual solver and empty
elsewhere.

Round storage: every round is stored for T <= 1e6 (minus ``report_skip``);
longer runs keep every round up to 1000 and then rounds divisible by
ceil(t/1000), preserving roughly a thousand rows per decade for the
log-log regressions.

Alternation (two or more players): within one round the players update in
index order; each player's update sees the loss induced by the newest
available opponent strategies, and later players see earlier players'
freshly updated strategies.  The recorded play of round t is what each
player put forward before updating; regret ledgers and gap metrics are
accounted against the losses of that recorded joint profile.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import efg
from .core import (
    AggregateState,
    NonFiniteError,
    RegretLedger,
    _normalize_nonneg,
    prm_plus_step,
    rm_plus_step,
)
from .fixedpoint import _solve as fixedpoint_solve
from .fixedpoint import initial_lifted_point, lipschitz_bound
from .games import MatrixGame, NormalFormGame, cce_gap, duality_gap
from .stabilized import (
    smooth_initial_state,
    smooth_prmp_round,
    smooth_prmp_round_alternating,
    stable_initial_state,
    stable_prmp_round,
    stable_prmp_round_alternating,
)

__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "RunTrace",
    "NumericalDivergence",
    "run",
    "linear_average",
    "rate_estimate",
    "slope_loglog",
    "stored_rounds",
    "read_trace_csv",
]

ALGORITHMS = (
    "rm+",
    "prm+",
    "stable-prm+",
    "smooth-prm+",
    "conceptual-rm+",
    "exrm+",
    "predictive-cfr",
    "clairvoyant-cfr",
)

_SIMPLEX_ALGOS = {"rm+", "prm+"}
_LIFTED_ALGOS = {"stable-prm+", "smooth-prm+"}
_FIXEDPOINT_ALGOS = {"conceptual-rm+", "exrm+"}
_TREE_ALGOS = {"predictive-cfr", "clairvoyant-cfr"}
# the fixed-point family has no defined alternating variant
_ALTERNATING_OK = _SIMPLEX_ALGOS | _LIFTED_ALGOS | _TREE_ALGOS


class NumericalDivergence(RuntimeError):
    """An iterate went non-finite; ``iteration`` is the offending round."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite iterate at round {iteration}")
        self.iteration = iteration


@dataclass
class SolverConfig:
    algorithm: str
    eta: float | str = "auto"
    r0: float = 1.0
    averaging: str = "linear"
    alternation: bool = False
    iters: int = 1000
    eps_schedule: str | None = None  # conceptual-rm+ only; "1/t^2" or a float
    k_max: int = 100
    seed: int = 0
    report_skip: int = 0
    store_full: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.averaging not in ("uniform", "linear"):
            raise ValueError(f"unknown averaging scheme {self.averaging!r}")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if not (0 <= self.report_skip < self.iters):
            raise ValueError("report_skip must lie in [0, iters)")
        if self.alternation and self.algorithm not in _ALTERNATING_OK:
            raise ValueError(f"{self.algorithm} has no alternating variant")
        if self.eta != "auto":
            if not (isinstance(self.eta, (int, float)) and self.eta > 0
                    and math.isfinite(self.eta)):
                raise ValueError("eta must be 'auto' or a positive real")
        if self.r0 <= 0:
            raise ValueError("R0 must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.eps_schedule is not None:
            if self.eps_schedule != "1/t^2":
                try:
                    value = float(self.eps_schedule)
                except ValueError:
                    raise ValueError(
                        f"unknown eps schedule {self.eps_schedule!r}") from None
                if value < 0:
                    raise ValueError("eps schedule must be nonnegative")


@dataclass
class RunTrace:
    """Per-run record: header metadata plus per-stored-round columns."""

    header: dict
    t: np.ndarray
    regret_max: np.ndarray  # (rows, players)
    gap: np.ndarray  # (rows,)
    iter_var: np.ndarray  # (rows, players)
    restart: np.ndarray  # (rows, players), 0/1
    fp_k: np.ndarray  # (rows,), NaN where not applicable
    fp_residual: np.ndarray
    ledgers: list[np.ndarray]  # final cumulative per-action regret, per player
    averages: list[np.ndarray] | None = None  # matrix / normal-form games
    behavioral_average: list[np.ndarray] | None = None  # tree games
    strategies: list[np.ndarray] | None = None  # (T, d_i) per player, store_full
    losses: list[np.ndarray] | None = None
    lifted: list[np.ndarray] | None = None  # lifted points with x^t = g(R^t)
    restart_events: tuple = ()

    @property
    def num_players(self) -> int:
        return self.regret_max.shape[1]

    def write_csv(self, stream) -> None:
        for key, value in self.header.items():
            stream.write(f"# {key}={value}\n")
        stream.write("t,player,regret_max,gap,iter_var,restart,fp_k,fp_residual\n")
        for row in range(self.t.size):
            t = int(self.t[row])
            gap = _fmt(self.gap[row])
            fpk = "" if math.isnan(self.fp_k[row]) else str(int(self.fp_k[row]))
            fpr = ("" if math.isnan(self.fp_residual[row])
                   else _fmt(self.fp_residual[row]))
            for player in range(self.num_players):
                stream.write(
                    f"{t},{player},{_fmt(self.regret_max[row, player])},{gap},"
                    f"{_fmt(self.iter_var[row, player])},"
                    f"{int(self.restart[row, player])},{fpk},{fpr}\n"
                )


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def stored_rounds(iters: int, report_skip: int = 0) -> np.ndarray:
    """Rounds whose rows a trace keeps (see the module docstring)."""
    if iters <= 1_000_000:
        return np.arange(report_skip + 1, iters + 1, dtype=np.int64)
    kept = [t for t in range(report_skip + 1, iters + 1)
            if t <= 1000 or t % -(-t // 1000) == 0]
    return np.asarray(kept, dtype=np.int64)


def linear_average(iterates, T: int) -> np.ndarray:
    """Weighted average 2/(T(T+1)) * sum_t t * x^t of the first T iterates."""
    if T < 1:
        raise ValueError("T must be >= 1")
    iterates = list(iterates)[:T]
    if len(iterates) < T:
        raise ValueError("fewer iterates than T")
    total = np.zeros_like(np.asarray(iterates[0], dtype=float))
    for t, x in enumerate(iterates, start=1):
        total += t * np.asarray(x, dtype=float)
    return total * (2.0 / (T * (T + 1)))


def slope_loglog(ts, values, t_lo, t_hi, max_points: int = 500) -> float:
    """OLS slope of log10(value) against log10(t) over [t_lo, t_hi], on a
    geometrically subsampled grid of at most ``max_points`` rows."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (ts >= t_lo) & (ts <= t_hi)
    ts, values = ts[mask], values[mask]
    if ts.size < 2:
        raise ValueError("regression window contains fewer than 2 rows")
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("regression window contains nonpositive values")
    if ts.size > max_points:
        picks = np.unique(np.rint(
            np.geomspace(1, ts.size, max_points)).astype(int) - 1)
        ts, values = ts[picks], values[picks]
    x = np.log10(ts)
    y = np.log10(values)
    x_centered = x - x.mean()
    return float(np.dot(x_centered, y) / np.dot(x_centered, x_centered))


def rate_estimate(trace: RunTrace, window, column: str = "gap") -> float:
    """Power-law exponent of a trace column over an iteration window."""
    if column != "gap":
        raise ValueError("rate_estimate currently regresses the gap column")
    t_lo, t_hi = window
    return slope_loglog(trace.t, trace.gap, t_lo, t_hi)


def read_trace_csv(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Read back a trace CSV: (header dict, rounds, gap column)."""
    header: dict[str, str] = {}
    ts: list[int] = []
    gaps: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
                continue
            if line.startswith("t,player"):
                continue
            parts = line.split(",")
            if parts[1] != "0":
                continue
            ts.append(int(parts[0]))
            gaps.append(float(parts[3]))
    return header, np.asarray(ts, dtype=np.int64), np.asarray(gaps)


# --- eta resolution and headers ----------------------------------------------


def resolve_eta(config: SolverConfig, game) -> tuple[float, dict]:
    """Resolve 'auto' to the prescribed step size; returns (eta, constants).

    Prescriptions: (d^2 T)^{-1/4} for stable-prm+ (d the total dimension),
    (2 sqrt(2) (n-1) max_i d_i^{3/2})^{-1} for smooth-prm+,
    (sqrt(2) L_F)^{-1} for exrm+, (2 L_F)^{-1} for conceptual-rm+, and 0.1
    for everything else.
    """
    constants: dict[str, float] = {}
    is_tree = isinstance(game, efg.GameTree)
    if is_tree:
        constants["P"] = float(game.behavioral_dim)
        constants["L_F"] = efg.lifted_lipschitz(game)
        constants["eta_contraction"] = efg.contraction_step_size(game)
    else:
        b_u, l_u = game.constants
        constants["B_u"] = b_u
        constants["L_u"] = l_u
        constants["L_F"] = lipschitz_bound(game)
    if config.eta != "auto":
        return float(config.eta), constants
    algo = config.algorithm
    if algo == "stable-prm+":
        d_total = sum(game.dims)
        return (d_total**2 * config.iters) ** -0.25, constants
    if algo == "smooth-prm+":
        n = game.num_players
        d_max = max(game.dims)
        return 1.0 / (2.0 * 2.0**0.5 * (n - 1) * d_max**1.5), constants
    if algo == "exrm+":
        return 1.0 / (2.0**0.5 * constants["L_F"]), constants
    if algo == "conceptual-rm+":
        return 1.0 / (2.0 * constants["L_F"]), constants
    return 0.1, constants


def _fingerprint(game) -> str:
    digest = hashlib.sha256()
    if isinstance(game, MatrixGame):
        digest.update(b"matrix")
        digest.update(np.ascontiguousarray(game.payoff).tobytes())
        label = "matrix" + "x".join(str(d) for d in game.dims)
    elif isinstance(game, NormalFormGame):
        digest.update(b"nfg")
        for u in game.payoffs:
            digest.update(np.ascontiguousarray(u).tobytes())
        label = "nfg" + "x".join(str(d) for d in game.dims)
    else:
        digest.update(b"efg")
        for node in game.nodes:
            if isinstance(node, efg.ChanceNode):
                digest.update(b"c" + np.ascontiguousarray(node.probs).tobytes())
                digest.update(np.asarray(node.children).tobytes())
            elif isinstance(node, efg.DecisionNode):
                digest.update(f"d{node.player},{node.infoset}".encode())
                digest.update(np.asarray(node.children).tobytes())
            else:
                digest.update(b"l" + np.ascontiguousarray(node.payoffs).tobytes())
        label = f"efg{game.num_players}p{len(game.infosets)}i"
    return f"{label}:{digest.hexdigest()[:12]}"


def _header(config: SolverConfig, game, eta: float, constants: dict) -> dict:
    header = {
        "algorithm": config.algorithm,
        "eta": _fmt(eta),
        "eta_mode": "auto" if config.eta == "auto" else "explicit",
        "r0": _fmt(config.r0),
        "averaging": config.averaging,
        "alternation": int(config.alternation),
        "iters": config.iters,
        "seed": config.seed,
        "report_skip": config.report_skip,
        "game": _fingerprint(game),
    }
    if config.algorithm == "conceptual-rm+":
        header["eps_schedule"] = config.eps_schedule or "tight"
        header["k_max"] = config.k_max
    for key, value in constants.items():
        header[key] = _fmt(value)
    return header


# --- shared per-round bookkeeping ---------------------------------------------


class _Recorder:
    def __init__(self, config: SolverConfig, dims, gap_fn):
        self.config = config
        self.dims = tuple(dims)
        n = len(self.dims)
        self.gap_fn = gap_fn
        self.ledgers = [RegretLedger.empty(d) for d in self.dims]
        self.stored = stored_rounds(config.iters, config.report_skip)
        rows = self.stored.size
        self.t = self.stored
        self.regret_max = np.zeros((rows, n))
        self.gap = np.zeros(rows)
        self.iter_var = np.zeros((rows, n))
        self.restart = np.zeros((rows, n), dtype=np.int8)
        self.fp_k = np.full(rows, np.nan)
        self.fp_residual = np.full(rows, np.nan)
        self._cursor = 0
        self._prev: list[np.ndarray] | None = None
        self._avg_weight = 0.0
        self._avg = [np.zeros(d) for d in self.dims]
        if config.store_full:
            self.full_x = [np.zeros((config.iters, d)) for d in self.dims]
            self.full_loss = [np.zeros((config.iters, d)) for d in self.dims]
            self.full_lifted = [np.zeros((config.iters, d)) for d in self.dims]
        else:
            self.full_x = self.full_loss = self.full_lifted = None

    def observe(self, t, strategies, losses, lifted=None, restarts=None,
                fp=(math.nan, math.nan)) -> None:
        for x in strategies:
            if not np.all(np.isfinite(x)):
                raise NumericalDivergence(t)
        for ledger, x, loss in zip(self.ledgers, strategies, losses):
            ledger.observe(x, loss)
        weight = float(t) if self.config.averaging == "linear" else 1.0
        self._avg_weight += weight
        for acc, x in zip(self._avg, strategies):
            acc += weight * x
        if self.full_x is not None:
            for i, (x, loss) in enumerate(zip(strategies, losses)):
                self.full_x[i][t - 1] = x
                self.full_loss[i][t - 1] = loss
                if lifted is not None:
                    self.full_lifted[i][t - 1] = lifted[i]
        if self._cursor < self.stored.size and self.stored[self._cursor] == t:
            row = self._cursor
            for i, ledger in enumerate(self.ledgers):
                self.regret_max[row, i] = ledger.max_action_regret()
            self.gap[row] = self.gap_fn(t, self.averages())
            if self._prev is not None:
                for i, (x, prev) in enumerate(zip(strategies, self._prev)):
                    self.iter_var[row, i] = float(np.sum((x - prev) ** 2))
            if restarts is not None:
                self.restart[row] = restarts
            self.fp_k[row], self.fp_residual[row] = fp
            self._cursor += 1
        # step functions hand back fresh arrays, so references suffice
        self._prev = list(strategies)

    def averages(self) -> list[np.ndarray]:
        if self._avg_weight == 0.0:
            return [np.full(d, 1.0 / d) for d in self.dims]
        return [acc / self._avg_weight for acc in self._avg]

    def build_trace(self, header, restart_events=()) -> RunTrace:
        return RunTrace(
            header=header,
            t=self.t,
            regret_max=self.regret_max,
            gap=self.gap,
            iter_var=self.iter_var,
            restart=self.restart,
            fp_k=self.fp_k,
            fp_residual=self.fp_residual,
            ledgers=[ledger.cum for ledger in self.ledgers],
            averages=self.averages(),
            strategies=self.full_x,
            losses=self.full_loss,
            lifted=self.full_lifted,
            restart_events=tuple(restart_events),
        )


# --- drivers -------------------------------------------------------------------


def _drive_simplex(config: SolverConfig, game, eta, recorder: _Recorder) -> None:
    step = rm_plus_step if config.algorithm == "rm+" else prm_plus_step
    states = [AggregateState.initial(d, 0.0) for d in game.dims]

    def play(state: AggregateState) -> np.ndarray:
        if config.algorithm == "rm+":
            return _normalize_nonneg(state.r)
        return _normalize_nonneg(np.maximum(state.r + state.prediction, 0.0))

    for t in range(1, config.iters + 1):
        try:
            lifted = None
            if config.store_full:
                lifted = ([np.maximum(s.r + s.prediction, 0.0) for s in states]
                          if config.algorithm == "prm+" else [s.r for s in states])
            plays = [play(s) for s in states]
            losses = game.gradients(plays)
            if not config.alternation:
                for i in range(len(states)):
                    states[i], _ = step(states[i], losses[i])
            else:
                profile = list(plays)
                for i in range(len(states)):
                    loss_i = game.gradient_for(i, profile)
                    states[i], _ = step(states[i], loss_i)
                    profile[i] = play(states[i])
        except NonFiniteError:
            raise NumericalDivergence(t) from None
        recorder.observe(t, plays, losses, lifted=lifted)


def _drive_lifted(config: SolverConfig, game, eta, recorder: _Recorder) -> tuple:
    stable = config.algorithm == "stable-prm+"
    if stable:
        # scale-invariant form of the restarting algorithm: unit-mass
        # initialization (R0/d_i) * 1 per player with matching restart
        # floors, which is how the reproduced experiments initialize
        floors = [config.r0 / d for d in game.dims]
        state = stable_initial_state(game.dims, floors)
    else:
        state = smooth_initial_state(game.dims)
    seen_events = 0
    n = len(game.dims)
    for t in range(1, config.iters + 1):
        try:
            if stable:
                round_fn = (stable_prmp_round_alternating if config.alternation
                            else stable_prmp_round)
                state, plays = round_fn(state, game, eta, floors)
            else:
                round_fn = (smooth_prmp_round_alternating if config.alternation
                            else smooth_prmp_round)
                state, plays = round_fn(state, game, eta)
            losses = game.gradients(plays)
        except NonFiniteError:
            raise NumericalDivergence(t) from None
        flags = np.zeros(n, dtype=np.int8)
        for _, player in state.restart_events[seen_events:]:
            flags[player] = 1
        seen_events = len(state.restart_events)
        recorder.observe(t, plays, losses, lifted=list(state.z), restarts=flags)
    return state.restart_events


def _drive_fixedpoint(config: SolverConfig, game, eta, recorder: _Recorder) -> None:
    z = initial_lifted_point(game.dims)
    for t in range(1, config.iters + 1):
        if config.algorithm == "exrm+":
            eps, k_max = -1.0, 1  # exactly one inner iteration
        else:
            eps, k_max = _eps_at(config, t), config.k_max
        try:
            w, z, report = fixedpoint_solve(z, game, eta, eps, k_max)
            plays = [_normalize_nonneg(block) for block in w]
            losses = game.gradients(plays)
        except NonFiniteError:
            raise NumericalDivergence(t) from None
        fp = ((math.nan, math.nan) if config.algorithm == "exrm+"
              else (float(report.iterations), report.residual))
        recorder.observe(t, plays, losses, lifted=w, fp=fp)


def _eps_at(config: SolverConfig, t: int) -> float:
    if config.eps_schedule is None:
        return 1e-14
    if config.eps_schedule == "1/t^2":
        return 1.0 / (t * t)
    return float(config.eps_schedule)


def _drive_tree(config: SolverConfig, tree, eta, recorder_args):
    header, stored = recorder_args
    players = tree.num_players
    own_sets = [tree.infosets_of(i) for i in range(players)]
    cum_h = [np.zeros(j.num_actions) for j in tree.infosets]
    averager = efg.BehavioralAverager(tree, config.averaging)
    rows = stored.size
    regret_max = np.zeros((rows, players))
    gap = np.zeros(rows)
    iter_var = np.zeros((rows, players))
    cursor = 0
    prev = None
    if config.algorithm == "predictive-cfr":
        state = efg.predictive_cfr_state(tree)
    else:
        state = efg.clairvoyant_cfr_state(tree)
    for t in range(1, config.iters + 1):
        try:
            if config.algorithm == "predictive-cfr":
                state, played = efg.predictive_cfr_round(
                    state, tree, alternate=config.alternation)
            else:
                state, played = efg.clairvoyant_cfr_round(
                    state, tree, eta, alternate=config.alternation)
        except NonFiniteError:
            raise NumericalDivergence(t) from None
        for block in played:
            if not np.all(np.isfinite(block)):
                raise NumericalDivergence(t)
        averager.observe(played)
        h = efg.counterfactual_regret_operator(tree, played, validate=False)
        for j, hj in enumerate(h):
            cum_h[j] += hj
        if cursor < rows and stored[cursor] == t:
            bounds = [
                sum(max(float(cum_h[j].max()), 0.0) for j in own_sets[i])
                for i in range(players)
            ]
            regret_max[cursor] = bounds
            gap[cursor] = max(bounds) / t
            if prev is not None:
                for i in range(players):
                    iter_var[cursor, i] = sum(
                        float(np.sum((played[j] - prev[j]) ** 2))
                        for j in own_sets[i])
            cursor += 1
        prev = [np.array(b) for b in played]
    ledgers = [np.concatenate([cum_h[j] for j in own_sets[i]])
               if own_sets[i] else np.zeros(0) for i in range(players)]
    return RunTrace(
        header=header,
        t=stored,
        regret_max=regret_max,
        gap=gap,
        iter_var=iter_var,
        restart=np.zeros((rows, players), dtype=np.int8),
        fp_k=np.full(rows, np.nan),
        fp_residual=np.full(rows, np.nan),
        ledgers=ledgers,
        behavioral_average=averager.average(),
    )


def run(config: SolverConfig, game) -> RunTrace:
    """Execute one solver configuration on one game."""
    config.validate()
    is_tree = isinstance(game, efg.GameTree)
    if (config.algorithm in _TREE_ALGOS) != is_tree:
        raise ValueError(
            f"{config.algorithm} is incompatible with {type(game).__name__}")
    eta, constants = resolve_eta(config, game)
    header = _header(config, game, eta, constants)
    if is_tree:
        stored = stored_rounds(config.iters, config.report_skip)
        return _drive_tree(config, game, eta, (header, stored))

    if isinstance(game, MatrixGame):
        def gap_fn(t, averages):
            return duality_gap(game, averages[0], averages[1])
    else:
        recorder_box: list[_Recorder] = []

        def gap_fn(t, averages):
            return cce_gap(recorder_box[0].ledgers, t)

    recorder = _Recorder(config, game.dims, gap_fn)
    if not isinstance(game, MatrixGame):
        recorder_box.append(recorder)
    events: tuple = ()
    if config.algorithm in _SIMPLEX_ALGOS:
        _drive_simplex(config, game, eta, recorder)
    elif config.algorithm in _LIFTED_ALGOS:
        events = _drive_lifted(config, game, eta, recorder)
    else:
        assert config.algorithm in _FIXEDPOINT_ALGOS
        _drive_fixedpoint(config, game, eta, recorder)
    return recorder.build_trace(header, events)
