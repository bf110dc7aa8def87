"""Two buyers, one quality ranking: record chain, price sequence, cutoff.

Items arrive in uniformly random order and only relative ranks are visible.
The record chain jumps from the position ``i`` of the current best-so-far to
the position ``j`` of the next record with probability ``i / (j (j-1))`` and
to the break state 0 (no further record) with probability ``i / N``.

The price of stopping on a record at position ``n``, against a rival that
uses cutoff ``l``, is

    V_n = (c n / N)(1 - W_n) - (a (N-1) / N) sum_{k<n} (k / N^2)(1 - W_k)

where ``W_k`` is the probability that the rival has already secured the best
item by time ``k``.  ``formula_mode="as_printed"`` evaluates the expanded
closed form as published instead (reward not divided by ``N``, fee split in
two sums), kept for auditing the difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import threshold
from .errors import DomainError, ParameterError
from .records import RecordFlow, StopMomentDistribution
from .rootfind import AsymptoticSolution, find_roots, interpretation
from .stopping_core import BREAK_ABSORBING, TransitionMatrix, break_row

REDERIVED = "rederived"
AS_PRINTED = "as_printed"
FORMULA_MODES = (REDERIVED, AS_PRINTED)

#: published asymptotic cutoff fraction at c = a/2
PUBLISHED_ROOT = 0.21


@dataclass(frozen=True)
class MonoModelParams:
    N: int
    alpha: float
    c_alpha: float
    formula_mode: str = REDERIVED

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.c_alpha > 0.0:
            raise ParameterError(f"c_alpha must be positive, got {self.c_alpha}")
        if self.formula_mode not in FORMULA_MODES:
            raise ParameterError(f"formula_mode must be one of {FORMULA_MODES}")

    @property
    def in_regime(self) -> bool:
        """Reward at least half the fee rate (where the partition is claimed)."""
        return self.c_alpha >= self.alpha / 2


@dataclass(frozen=True)
class PriceSequence:
    """Stop prices over states ``0..N``; ``values[0]`` is the break state (0).

    ``values = reward - fee`` elementwise.
    """

    values: np.ndarray
    reward: np.ndarray
    fee: np.ndarray
    opponent_cutoff: int
    mode: str
    params: object

    @property
    def sequence(self) -> np.ndarray:
        """``V_1..V_N``."""
        return self.values[1:]


def _check_N(N):
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N}")


def mono_transition_exact(i: int, j: int, N: int) -> Fraction:
    """Exact transition probability of the record chain for ``i >= 1``."""
    if j == 0:
        return Fraction(i, N)
    if i < j:
        return Fraction(i, j * (j - 1))
    return Fraction(0)


def mono_chain(N: int, break_convention: str = BREAK_ABSORBING) -> TransitionMatrix:
    """Record chain on ``{0..N}``: ``p_ij = i/(j(j-1))`` for ``i < j``, ``p_i0 = i/N``."""
    _check_N(N)
    i = np.arange(N + 1, dtype=float)[:, None]
    j = np.arange(N + 1, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where((i >= 1) & (j > i), i / (j * (j - 1)), 0.0)
    p[1:, 0] = np.arange(1, N + 1) / N
    p[0] = break_row(N + 1, break_convention)
    return TransitionMatrix(p, stochastic=True, break_row=break_convention)


@lru_cache(maxsize=16)
def _flow(N: int) -> RecordFlow:
    return RecordFlow(mono_chain(N).probs)


def mono_stop_closed_form(l: int, N: int) -> np.ndarray:
    """``(l-1)/(j(j-1))`` for ``j >= l``, zero below."""
    h = np.zeros(N + 1)
    j = np.arange(l, N + 1, dtype=float)
    h[l:] = (l - 1) / (j * (j - 1))
    return h


def mono_stop_distribution(l: int, N: int) -> StopMomentDistribution:
    """Stop-time law of the cutoff-``l`` rule via the forward recursion.

    The closed form is attached as a cross-check.
    """
    _check_N(N)
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    return _flow(N).distribution(l, closed_form=mono_stop_closed_form(l, N))


def rival_win_cdf(weights: np.ndarray, N: int) -> np.ndarray:
    """``W_k = sum_{j<=k} (j/N) h_j``: rival has secured the best item by ``k``."""
    j = np.arange(N + 1)
    return np.cumsum(j / N * weights)


def _fee_prefix(terms):
    """``out[n] = sum_{k=1}^{n-1} terms[k]`` with ``out[0] = 0``."""
    out = np.zeros_like(terms)
    out[2:] = np.cumsum(terms[1:-1])
    return out


def mono_price_sequence(params: MonoModelParams, l: int, mode: str | None = None) -> PriceSequence:
    mode = mode or params.formula_mode
    if mode not in FORMULA_MODES:
        raise ParameterError(f"formula mode must be one of {FORMULA_MODES}")
    N, a, c = params.N, params.alpha, params.c_alpha
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    n = np.arange(N + 1, dtype=float)

    if mode == REDERIVED:
        w = rival_win_cdf(mono_stop_distribution(l, N).weights, N)
        reward = c * n / N * (1.0 - w)
        fee = a * (N - 1) / N * _fee_prefix(n / N**2 * (1.0 - w))
    else:
        inv = np.zeros(N + 1)
        inv[l:] = 1.0 / (n[l:] - 1.0)
        w = (l - 1) / N * np.cumsum(inv)
        reward = c * n * (1.0 - w)
        plain = _fee_prefix(n / N**2)
        tail = np.zeros(N + 1)
        tail[l:] = n[l:] / N**2 * (1.0 - w[l:])
        # sum_{k=l}^{n}, upper limit inclusive as printed
        fee = a * (N - 1) / N * (plain + np.cumsum(tail))

    reward[0] = fee[0] = 0.0
    values = reward - fee
    for arr in (values, reward, fee):
        arr.setflags(write=False)
    return PriceSequence(values, reward, fee, l, mode, params)


def mono_optimal_threshold(params: MonoModelParams) -> threshold.ThresholdReport:
    """Smallest cutoff satisfying both continuation inequalities.

    Raises :class:`~zeitnot.errors.NoCrossingError` (with the full gap profile)
    when no cutoff in ``2..N`` qualifies.
    """
    probs = mono_chain(params.N).probs
    return threshold.build_report(
        "mono",
        params.formula_mode,
        params.N,
        probs,
        lambda l: mono_price_sequence(params, l).values,
        params.in_regime,
    )


def mono_threshold_scan(params: MonoModelParams) -> threshold.ThresholdScan:
    probs = mono_chain(params.N).probs
    return threshold.scan(probs, lambda l: mono_price_sequence(params, l).values, params.N)


def mono_threshold_census(alpha: float, c_alpha: float, Ns, mode: str = REDERIVED) -> dict:
    """Cutoff (or flip point) for every ``N``, plus monotonicity violations.

    A violation is recorded whenever a crossing cutoff is smaller than the
    last crossing cutoff seen at a smaller ``N``.
    """
    rows, violations = [], []
    last = None
    for N in Ns:
        p = MonoModelParams(N, alpha, c_alpha, mode)
        s = mono_threshold_scan(p)
        row = {"N": N, "l_star": s.l_star, "flip": s.flip}
        if s.l_star is not None:
            rep = mono_optimal_threshold(p)
            row["partition_ok"] = rep.partition_ok
            if last is not None and s.l_star < last[1]:
                violations.append({"N": N, "l_star": s.l_star, "previous_N": last[0], "previous_l_star": last[1]})
            last = (N, s.l_star)
        rows.append(row)
    return {"alpha": alpha, "c_alpha": c_alpha, "mode": mode, "rows": rows, "monotonicity_violations": violations}


# --- large-N limit ---------------------------------------------------------------


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any((z <= 0) | (z >= 1)):
        raise DomainError("z must lie strictly inside (0, 1)")
    return z


def _bracket(z, lz, interp):
    if interp == "A":
        return lz + 0.5 * (1 - z) * (3 - z)
    if interp == "B":
        return lz * 0.5 * (1 - z) * (3 - z)
    raise ParameterError(f"unknown interpretation {interp!r}")


def mono_asymptotic_residual(z, c_alpha: float, alpha: float, interp: str = "A"):
    """Limit equation for the cutoff fraction, as ``(LHS - RHS) / c_alpha``.

    Dividing by the reward coefficient leaves the roots unchanged and makes the
    ``c_alpha = alpha/2`` case coincide with :func:`mono_invariant_residual`.
    ``interp`` selects how the bracket ``[ln z (1/2)(1-z)(3-z)]`` is read:
    ``"A"`` additive, ``"B"`` multiplicative.
    """
    z = _check_z(z)
    lz = np.log(z)
    lhs = c_alpha * (1 + lz + z / 2 * lz**2) + alpha / 2 * z * (1 - z)
    rhs = alpha / 2 * z**2 * _bracket(z, lz, interp)
    out = (lhs - rhs) / c_alpha
    return float(out) if out.ndim == 0 else out


def mono_invariant_residual(z, interp: str = "A"):
    """Fee-free form obtained at ``c_alpha = alpha/2``."""
    z = _check_z(z)
    lz = np.log(z)
    out = 1 + lz + z / 2 * lz**2 + z * (1 - z) - z**2 * _bracket(z, lz, interp)
    return float(out) if out.ndim == 0 else out


def mono_solve_asymptotic(
    c_alpha: float, alpha: float, interp: str = "A", grid_step: float = 1e-4
) -> AsymptoticSolution:
    """All roots in (0, 1) of the limit equation under one interpretation."""
    if not c_alpha > 0:
        raise ParameterError("c_alpha must be positive")
    return find_roots(
        lambda z: mono_asymptotic_residual(z, c_alpha, alpha, interp),
        grid_step=grid_step,
        interp=interpretation("mono-asymptotic", interp),
    )


def mono_solve_invariant(interp: str = "A", grid_step: float = 1e-4) -> AsymptoticSolution:
    return find_roots(
        lambda z: mono_invariant_residual(z, interp),
        grid_step=grid_step,
        interp=interpretation("mono-invariant", interp),
    )
