"""Finite-state optimal stopping with discounting and monitoring fees.

The value of the stopping problem is the smallest excessive majorant of the
stop reward.  It is computed by iterating

    V <- max(f, alpha * P V - c)

from ``V = f``.  With ``alpha < 1`` the fee can instead be moved into the
reward through the discounted fee potential ``f_alpha = c + alpha * P f_alpha``;
both routes are available and must agree.

State 0 plays the role of the terminal "break" state in the record chains
built elsewhere in the package.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import NotStochasticError, ParameterError, UnsupportedParameterError

ROW_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-12
STOP_TIE_TOL = 1e-9
MAX_ITER_CAP = 1_000_000

BREAK_ABSORBING = "absorbing"
BREAK_LITERAL = "literal"
BREAK_CUSTOM = "custom"
BREAK_CONVENTIONS = (BREAK_ABSORBING, BREAK_LITERAL, BREAK_CUSTOM)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix over states ``0..N``.

    ``break_row`` records how row 0 was filled: ``"absorbing"`` (p00 = 1),
    ``"literal"`` (p01 = 1, as the record-chain formula prints it) or
    ``"custom"`` for arbitrary user matrices.  With ``stochastic=False`` the
    row-sum check is skipped; this is a diagnostic mode for printed formulas
    that do not conserve probability.
    """

    probs: np.ndarray
    stochastic: bool = True
    break_row: str = BREAK_CUSTOM

    def __post_init__(self):
        p = _frozen(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ParameterError(f"transition matrix must be square, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ParameterError("transition matrix has non-finite entries")
        if np.any(p < 0):
            raise ParameterError("transition probabilities must be non-negative")
        if self.break_row not in BREAK_CONVENTIONS:
            raise ParameterError(f"unknown break-row convention {self.break_row!r}")
        if self.stochastic:
            err = np.abs(p.sum(axis=1) - 1.0)
            bad = np.flatnonzero(err > ROW_SUM_TOL)
            if bad.size:
                raise NotStochasticError(
                    f"rows {bad.tolist()} do not sum to 1 (max error {err.max():.3e})"
                )

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def apply(self, v) -> np.ndarray:
        """Return ``P v`` (expected next-step value)."""
        return self.probs @ np.asarray(v, dtype=float)


def break_row(n_states: int, convention: str = BREAK_ABSORBING) -> np.ndarray:
    """Row 0 of a record chain under the given convention."""
    row = np.zeros(n_states)
    if convention == BREAK_ABSORBING:
        row[0] = 1.0
    elif convention == BREAK_LITERAL:
        if n_states < 2:
            raise ParameterError("literal break row needs at least two states")
        row[1] = 1.0
    else:
        raise ParameterError(f"break-row convention must be 'absorbing' or 'literal', got {convention!r}")
    return row


@dataclass(frozen=True)
class PayoffSpec:
    """Stop reward ``f``, per-step fee ``c`` and discount ``alpha`` in (0, 1]."""

    f: np.ndarray
    c: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        f = _frozen(self.f)
        c = _frozen(self.c) if np.ndim(self.c) else _frozen(np.full(f.shape, float(self.c)))
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "c", c)
        if f.ndim != 1 or c.shape != f.shape:
            raise ParameterError("f and c must be vectors of equal length")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
            raise ParameterError("f and c must be finite")
        if np.any(f < 0):
            raise ParameterError("stop reward f must be non-negative")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")

    @classmethod
    def no_fee(cls, f, alpha=1.0):
        f = np.asarray(f, dtype=float)
        return cls(f, np.zeros_like(f), alpha)


@dataclass(frozen=True)
class ValueSolution:
    values: np.ndarray
    stop_set: frozenset
    iterations: int
    residual: float
    converged: bool
    route: str = "bellman"

    @property
    def status(self) -> str:
        return "converged" if self.converged else "not converged"


@dataclass(frozen=True)
class ClassDecomposition:
    """Communicating classes of a chain with stationary laws and fee drifts.

    ``stationary[k]`` is a full-length vector supported on class ``k``;
    ``drift[k]`` is its inner product with the fee vector.  ``flags[k]`` is
    ``"first-hit optimal"`` for essential classes with non-negative drift and
    ``"price unbounded by delaying"`` otherwise.  ``outside_stop_set`` lists
    the nonessential states that can reach a negative-drift class.
    """

    class_of: np.ndarray
    classes: tuple
    essential: dict
    stationary: dict
    drift: dict
    flags: dict
    outside_stop_set: frozenset = field(default_factory=frozenset)


def _check_pair(chain: TransitionMatrix, payoff: PayoffSpec):
    if payoff.f.shape[0] != chain.n_states:
        raise ParameterError(
            f"payoff has {payoff.f.shape[0]} states but chain has {chain.n_states}"
        )


def default_max_iter(n_states: int, alpha: float) -> int:
    if alpha >= 1.0:
        return MAX_ITER_CAP
    return int(min(MAX_ITER_CAP, np.ceil(10 * n_states / (1.0 - alpha) - 1e-9)))


def _require_alpha1_absorbing(chain: TransitionMatrix, payoff: PayoffSpec):
    dec = drift_classification(chain, payoff)
    for k, cls in enumerate(dec.classes):
        if not dec.essential[k]:
            continue
        s = cls[0]
        ok = len(cls) == 1 and chain.probs[s, s] == 1.0 and payoff.c[s] == 0.0
        if not ok:
            raise UnsupportedParameterError(
                f"alpha = 1 needs every recurrent class to be an absorbing state with zero fee; "
                f"class {list(cls)} is not. Use drift_classification for this chain."
            )


def _iterate(P, reward, fee, alpha, tol, max_iter):
    v = reward.copy()
    change = np.inf
    for it in range(1, max_iter + 1):
        nxt = np.maximum(reward, alpha * (P @ v) - fee)
        change = float(np.max(np.abs(nxt - v))) if v.size else 0.0
        v = nxt
        if change < tol:
            return v, it, change, True
    return v, max_iter, change, False


def value_iterate(
    chain: TransitionMatrix,
    payoff: PayoffSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    route: str = "bellman",
    stop_tol: float = STOP_TIE_TOL,
) -> ValueSolution:
    """Smallest excessive majorant of ``f`` by monotone iteration from ``V = f``.

    ``route="bellman"`` folds the fee into each update; ``route="fee_transform"``
    solves the fee-free problem with reward ``f + f_alpha`` and subtracts
    ``f_alpha`` afterwards (only for ``alpha < 1``).

    At ``alpha = 1`` the solver only accepts chains whose recurrent classes are
    zero-fee absorbing states; other chains raise
    :class:`UnsupportedParameterError`.  Hitting ``max_iter`` is reported through
    ``converged=False`` rather than raised.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if not chain.stochastic:
        raise NotStochasticError("value iteration needs a stochastic chain")
    _check_pair(chain, payoff)
    alpha = payoff.alpha
    if max_iter is None:
        max_iter = default_max_iter(chain.n_states, alpha)
    if alpha >= 1.0:
        _require_alpha1_absorbing(chain, payoff)

    P = chain.probs
    if route == "bellman":
        v, it, change, ok = _iterate(P, payoff.f.copy(), payoff.c, alpha, tol, max_iter)
    elif route == "fee_transform":
        fa = fee_transform(chain, payoff)
        vbar, it, change, ok = _iterate(P, payoff.f + fa, np.zeros_like(fa), alpha, tol, max_iter)
        v = vbar - fa
    else:
        raise ParameterError(f"unknown route {route!r}")

    gamma = frozenset(int(i) for i in np.flatnonzero(v <= payoff.f + stop_tol))
    v.setflags(write=False)
    return ValueSolution(v, gamma, it, change, ok, route)


def fee_transform(chain: TransitionMatrix, payoff: PayoffSpec) -> np.ndarray:
    """Discounted expected fee total ``f_alpha = E_x sum_i alpha^i c(x_i)``.

    Solved directly from ``(I - alpha P) f_alpha = c``.  Undefined at
    ``alpha = 1``.
    """
    _check_pair(chain, payoff)
    if not 0.0 < payoff.alpha < 1.0:
        raise UnsupportedParameterError(
            "fee_transform needs alpha strictly inside (0, 1); "
            "for alpha = 1 use drift_classification"
        )
    n = chain.n_states
    return np.linalg.solve(np.eye(n) - payoff.alpha * chain.probs, payoff.c)


def stop_set(solution: ValueSolution, payoff: PayoffSpec, tol: float = STOP_TIE_TOL) -> frozenset:
    """States where the value equals the stop reward (up to ``tol``)."""
    if not solution.converged:
        raise UnsupportedParameterError("stop set of a non-converged solution is undefined")
    gap = np.abs(np.asarray(solution.values) - payoff.f)
    return frozenset(int(i) for i in np.flatnonzero(gap <= tol))


def stationary_vector(chain: TransitionMatrix, states) -> np.ndarray:
    """Stationary law of the closed class ``states`` as a full-length vector."""
    idx = np.asarray(sorted(states), dtype=int)
    sub = chain.probs[np.ix_(idx, idx)]
    m = idx.size
    a = np.vstack([sub.T - np.eye(m), np.ones((1, m))])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    q_sub, *_ = np.linalg.lstsq(a, b, rcond=None)
    q_sub = np.clip(q_sub, 0.0, None)
    q_sub /= q_sub.sum()
    q = np.zeros(chain.n_states)
    q[idx] = q_sub
    return q


def drift_classification(chain: TransitionMatrix, payoff: PayoffSpec) -> ClassDecomposition:
    """Split the state space into communicating classes and sign their drift.

    A nonessential state is placed outside the stop set when it can reach an
    essential class of negative drift (the reachability reading of the
    criterion; the opposite direction is meaningless for transient states).
    """
    _check_pair(chain, payoff)
    adj = chain.probs > 0
    n_cls, labels = connected_components(adj, directed=True, connection="strong")
    classes = tuple(tuple(int(s) for s in np.flatnonzero(labels == k)) for k in range(n_cls))

    essential, stationary, drift, flags = {}, {}, {}, {}
    for k, cls in enumerate(classes):
        members = np.asarray(cls)
        leaves = adj[members][:, labels != k].any()
        essential[k] = not leaves
        if essential[k]:
            q = stationary_vector(chain, cls)
            stationary[k] = q
            drift[k] = float(q @ payoff.c)
            flags[k] = "first-hit optimal" if drift[k] >= 0 else "price unbounded by delaying"

    negative = [k for k in drift if drift[k] < 0]
    outside = set()
    if negative:
        # reach[i, j]: j reachable from i (transitive closure on a small graph)
        reach = adj | np.eye(chain.n_states, dtype=bool)
        for _ in range(int(np.ceil(np.log2(max(chain.n_states, 2)))) + 1):
            reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        targets = np.isin(labels, negative)
        for s in range(chain.n_states):
            if not essential[labels[s]] and reach[s, targets].any():
                outside.add(s)

    return ClassDecomposition(
        class_of=labels,
        classes=classes,
        essential=essential,
        stationary=stationary,
        drift=drift,
        flags=flags,
        outside_stop_set=frozenset(outside),
    )


def finite_horizon_payoff(chain: TransitionMatrix, payoff: PayoffSpec, start: int, horizon: int) -> float:
    """Undiscounted ``E[f(x_n) - sum_{j<n} c(x_j)]`` for a fixed stop time ``n``."""
    dist = np.zeros(chain.n_states)
    dist[start] = 1.0
    fees = 0.0
    for _ in range(horizon):
        fees += dist @ payoff.c
        dist = dist @ chain.probs
    return float(dist @ payoff.f - fees)


# --- independent check: exhaustive policy evaluation ----------------------------


def policy_value(chain: TransitionMatrix, payoff: PayoffSpec, stop_states) -> np.ndarray:
    """Exact value of "stop on first entry into ``stop_states``" (``alpha < 1``).

    Solves ``V = f`` on the stop set and ``V = alpha P V - c`` elsewhere.
    """
    if payoff.alpha >= 1.0:
        raise UnsupportedParameterError("policy evaluation by linear solve needs alpha < 1")
    n = chain.n_states
    stop = np.zeros(n, dtype=bool)
    stop[list(stop_states)] = True
    go = ~stop
    v = np.where(stop, payoff.f, 0.0)
    if go.any():
        P = chain.probs
        a = np.eye(go.sum()) - payoff.alpha * P[np.ix_(go, go)]
        b = -payoff.c[go] + payoff.alpha * P[np.ix_(go, stop)] @ payoff.f[stop]
        v[go] = np.linalg.solve(a, b)
    return v


def best_policy_value(chain: TransitionMatrix, payoff: PayoffSpec) -> np.ndarray:
    """Pointwise maximum of :func:`policy_value` over every subset of states."""
    n = chain.n_states
    best = np.full(n, -np.inf)
    for r in range(n + 1):
        for subset in itertools.combinations(range(n), r):
            best = np.maximum(best, policy_value(chain, payoff, subset))
    return best
