"""Two buyers, two independent quality rankings.

A record is an item that beats everything seen so far in either coordinate.
The record chain uses

    p_ij = [2j(j-1) - i] i^2 / (j^2 (j-1)^2 (2i-1)),   1 <= i < j,

with the remaining mass sent to the break state.  These rows can carry more
than unit mass (row 1 already does at N = 3), so two chain modes exist:

* ``as_printed``: negative break probabilities are clamped to 0 and the row
  sums are reported as they come out;
* ``row_normalized``: each row is divided by its (clamped) total.

Every result built on the chain carries the mode it used.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import threshold
from .errors import DomainError, ParameterError
from .monovariant import PriceSequence, _fee_prefix, rival_win_cdf
from .records import RecordFlow, StopMomentDistribution
from .rootfind import AsymptoticSolution, find_roots, interpretation
from .stopping_core import BREAK_ABSORBING, TransitionMatrix, break_row

AS_PRINTED = "as_printed"
ROW_NORMALIZED = "row_normalized"
CHAIN_MODES = (AS_PRINTED, ROW_NORMALIZED)

TABLE1_BETAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
#: published limit cutoff fractions for the betas above
PUBLISHED_TABLE1 = dict(
    zip(TABLE1_BETAS, (0.155, 0.171, 0.186, 0.199, 0.210, 0.220, 0.228, 0.236, 0.243, 0.249, 0.254))
)
#: published skim fraction at beta = 1/2, in percent
PUBLISHED_SKIM_PERCENT = 15.54


@dataclass(frozen=True)
class BiModelParams:
    N: int
    alpha: float
    c_alpha: float
    chain_mode: str = ROW_NORMALIZED

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.c_alpha > 0.0:
            raise ParameterError(f"c_alpha must be positive, got {self.c_alpha}")
        if self.chain_mode not in CHAIN_MODES:
            raise ParameterError(f"chain_mode must be one of {CHAIN_MODES}")

    @property
    def beta(self) -> float:
        return 4.0 * self.c_alpha / self.alpha

    @property
    def in_regime(self) -> bool:
        return self.c_alpha >= self.alpha / 8


@dataclass(frozen=True)
class BiChainDiagnostics:
    """Row sums of the chain as built, the largest excess over 1, clamped rows.

    ``excess`` maps each clamped state to the (exact) amount by which its
    off-break mass exceeded 1.
    """

    mode: str
    row_sums: np.ndarray
    max_excess: float
    clamped_states: tuple
    excess: dict

    def to_dict(self):
        return {
            "mode": self.mode,
            "row_sums": [float(x) for x in self.row_sums],
            "max_excess": self.max_excess,
            "clamped_states": list(self.clamped_states),
            "excess": {str(k): {"fraction": str(v), "value": float(v)} for k, v in self.excess.items()},
        }


def bi_transition_exact(i: int, j: int) -> Fraction:
    """Off-break transition probability for ``1 <= i < j`` as an exact fraction."""
    if not 1 <= i < j:
        return Fraction(0)
    return Fraction((2 * j * (j - 1) - i) * i * i, j * j * (j - 1) ** 2 * (2 * i - 1))


def bi_chain(N: int, mode: str = ROW_NORMALIZED, break_convention: str = BREAK_ABSORBING):
    """Record chain and its row-sum diagnostics."""
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N}")
    if mode not in CHAIN_MODES:
        raise ParameterError(f"chain mode must be one of {CHAIN_MODES}")
    i = np.arange(N + 1, dtype=float)[:, None]
    j = np.arange(N + 1, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (2 * j * (j - 1) - i) * i**2 / (j**2 * (j - 1) ** 2 * (2 * i - 1))
    p = np.where((i >= 1) & (j > i), raw, 0.0)

    clamped, excess = [], {}
    off_float = p[1:].sum(axis=1)
    p[1:, 0] = np.clip(1.0 - off_float, 0.0, None)
    # exact arithmetic only where the sign of the break mass is in doubt
    for s in np.flatnonzero(off_float > 1.0 - 1e-9) + 1:
        off = sum((bi_transition_exact(int(s), k) for k in range(int(s) + 1, N + 1)), Fraction(0))
        if off > 1:
            clamped.append(int(s))
            excess[int(s)] = off - 1
            p[s, 0] = 0.0
        else:
            p[s, 0] = float(1 - off)
    if mode == ROW_NORMALIZED:
        p[1:] /= p[1:].sum(axis=1, keepdims=True)
    p[0] = break_row(N + 1, break_convention)

    sums = p.sum(axis=1)
    chain = TransitionMatrix(p, stochastic=(mode == ROW_NORMALIZED), break_row=break_convention)
    diag = BiChainDiagnostics(
        mode=mode,
        row_sums=sums,
        max_excess=float(max(0.0, np.max(sums - 1.0))),
        clamped_states=tuple(clamped),
        excess=excess,
    )
    return chain, diag


@lru_cache(maxsize=16)
def _chain_probs(N: int, mode: str) -> np.ndarray:
    return bi_chain(N, mode)[0].probs


@lru_cache(maxsize=16)
def _flow(N: int, mode: str) -> RecordFlow:
    return RecordFlow(_chain_probs(N, mode))


def bi_stop_closed_form(N: int, mode: str = ROW_NORMALIZED) -> np.ndarray:
    """``(j-1) p_1j`` for every ``j``; carries no cutoff dependence."""
    p1 = _chain_probs(N, mode)[1]
    h = np.zeros(N + 1)
    j = np.arange(2, N + 1)
    h[2:] = (j - 1) * p1[2:]
    return h


def bi_stop_distribution(l: int, N: int, mode: str = ROW_NORMALIZED) -> StopMomentDistribution:
    """Stop-time law by forward recursion; closed form attached with its gap."""
    if mode not in CHAIN_MODES:
        raise ParameterError(f"chain mode must be one of {CHAIN_MODES}")
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N}")
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    return _flow(N, mode).distribution(l, closed_form=bi_stop_closed_form(N, mode))


def bi_price_sequence(params: BiModelParams, l: int) -> PriceSequence:
    """``V_n = c[(4n/N)(1-S_n) - (n/N)^2 (1-S_n)^2] - a((N-1)/N)^2 sum_{k<n} (k/N^2)(1-S_k)^2``."""
    N, a, c = params.N, params.alpha, params.c_alpha
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    s = rival_win_cdf(bi_stop_distribution(l, N, params.chain_mode).weights, N)
    n = np.arange(N + 1, dtype=float)
    keep = 1.0 - s
    reward = c * (4 * n / N * keep - (n / N) ** 2 * keep**2)
    fee = a * (N - 1) ** 2 / N**2 * _fee_prefix(n / N**2 * keep**2)
    reward[0] = fee[0] = 0.0
    values = reward - fee
    for arr in (values, reward, fee):
        arr.setflags(write=False)
    return PriceSequence(values, reward, fee, l, params.chain_mode, params)


def bi_optimal_threshold(params: BiModelParams) -> threshold.ThresholdReport:
    probs = _chain_probs(params.N, params.chain_mode)
    return threshold.build_report(
        "bi",
        params.chain_mode,
        params.N,
        probs,
        lambda l: bi_price_sequence(params, l).values,
        params.in_regime,
    )


def bi_threshold_scan(params: BiModelParams) -> threshold.ThresholdScan:
    probs = _chain_probs(params.N, params.chain_mode)
    return threshold.scan(probs, lambda l: bi_price_sequence(params, l).values, params.N)


def bi_printed_inequalities(params: BiModelParams, l: int, prefactor: str = "printed") -> dict:
    """Both sides of the two closed-form cutoff inequalities.

    ``prefactor="printed"`` uses the published weights
    ``(l-1)^2 [2k(k-1)-1] / ((2l-3) k^2 (k-1)^2)`` and
    ``l^2 [2k(k-1)-1] / ((2l-1) k^2 (k-1)^2)``, summed over ``k = l..N``;
    ``prefactor="chain"`` uses the chain rows ``p_{l-1,k}`` and ``p_{l,k}``
    instead.  Returns ``before_lhs > before_rhs`` and ``at_lhs <= at_rhs`` sides.
    """
    N, a, c = params.N, params.alpha, params.c_alpha
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    v = bi_price_sequence(params, l)
    s = rival_win_cdf(bi_stop_distribution(l, N, params.chain_mode).weights, N)
    k = np.arange(N + 1, dtype=float)
    if prefactor == "printed":
        w_before = np.zeros(N + 1)
        w_at = np.zeros(N + 1)
        kk = k[l:]
        core = (2 * kk * (kk - 1) - 1) / (kk**2 * (kk - 1) ** 2)
        w_before[l:] = (l - 1) ** 2 * core / (2 * l - 3) if l > 1 else 0.0
        w_at[l:] = l**2 * core / (2 * l - 1)
    elif prefactor == "chain":
        probs = _chain_probs(N, params.chain_mode)
        w_before = np.where(k >= l, probs[l - 1], 0.0)
        w_at = np.where(k > l, probs[l], 0.0)
    else:
        raise ParameterError("prefactor must be 'printed' or 'chain'")
    lead_fee = a * (N - 1) ** 2 / N**2 * float(np.sum(k[1:l] / N**2 * (1 - s[1:l]) ** 2))
    return {
        "l": l,
        "prefactor": prefactor,
        "before_lhs": float(w_before @ v.values),
        "before_rhs": c * (4 * (l - 1) / N - (l - 1) ** 2 / N**2) - lead_fee,
        "at_lhs": float(w_at @ v.values),
        "at_rhs": c * (4 * l / N - l**2 / N**2) - lead_fee,
    }


def bi_finite_equation_residual(l: int, params: BiModelParams) -> float:
    """``LHS - RHS`` of the collapsed finite-``N`` cutoff equation, as published."""
    N, a, c = params.N, params.alpha, params.c_alpha
    if not 2 <= l <= N:
        raise ParameterError(f"cutoff l must lie in 2..{N}, got {l}")
    r = N / l
    lg = np.log(r)
    q = l / N
    reward = (2 * c * l / (2 * l - 1)) * (
        4 * q * lg
        - 2 * q**2 * lg**2
        - (N - l) * l / N**2
        + 2 * q**3 * (r * lg - r + 1)
        - q**4 * (r * lg**2 - 2 * r * lg + r - 1)
    )
    fee = a * (
        l**2 * (N - l) / (2 * N**3)
        + l * (N - l) ** 2 / (2 * N**3)
        - q**2 * lg
        + l**2 * (N - l) / N**3
        + l**2 * (N - l) ** 2 / (2 * N**4)
        + q**4 / 2 * (r * lg**2 - 3 * r * lg + 7 * r / 2 - 4 + l / (2 * N))
    )
    rhs = c * (4 * q - q**2) - a * (N - 1) ** 2 * (l - 1) * l / (2 * N**4)
    return float(reward - fee - rhs)


def bi_finite_equation_brackets(params: BiModelParams) -> list:
    """Consecutive cutoffs ``(l, l+1)`` between which the residual changes sign."""
    vals = [bi_finite_equation_residual(l, params) for l in range(2, params.N + 1)]
    out = []
    for idx in range(len(vals) - 1):
        if vals[idx] == 0.0:
            out.append((idx + 2, idx + 2))
        elif vals[idx] * vals[idx + 1] < 0:
            out.append((idx + 2, idx + 3))
    if vals and vals[-1] == 0.0:
        out.append((params.N, params.N))
    return out


# --- large-N limit ---------------------------------------------------------------


def bi_asymptotic_parts(z):
    """``(A(z), B(z))`` with residual ``beta * A + B``."""
    z = np.asarray(z, dtype=float)
    if np.any((z <= 0) | (z >= 1)):
        raise DomainError("z must lie strictly inside (0, 1)")
    lz = np.log(z)
    A = 4 * z * lz + 2 * z**2 * lz**2 + 2 * z**2 * lz + z**3 * lz**2 + 2 * z**3 * lz + 5 * z - z**3 - z**4
    B = 2 * z + 2 * z**2 * lz + 2 * z**2 * (1 - z) ** 2 + 2 * z**3 * lz**2 + 3 * z**3 * lz + 10 * z**3 - z**4 + z**5
    return A, B


def bi_asymptotic_residual(z, beta: float):
    A, B = bi_asymptotic_parts(z)
    out = beta * A + B
    return float(out) if np.ndim(out) == 0 else out


def bi_solve_asymptotic(beta: float, grid_step: float = 1e-4) -> AsymptoticSolution:
    return find_roots(
        lambda z: bi_asymptotic_residual(z, beta),
        grid_step=grid_step,
        interp=interpretation("bi-asymptotic", "A"),
    )


@dataclass(frozen=True)
class Table1Row:
    beta: float
    z_paper: float | None
    z_computed: float | None
    deviation: float | None
    root_count: int

    def to_dict(self):
        return {
            "beta": self.beta,
            "z_paper": self.z_paper,
            "z_computed": self.z_computed,
            "deviation": self.deviation,
            "root_count": self.root_count,
        }


def table1(betas=None) -> list:
    """Smallest computed root per beta next to the published value (if any).

    ``deviation = z_computed - z_paper``.
    """
    betas = TABLE1_BETAS if betas is None else betas
    rows = []
    for b in betas:
        b = float(b)
        sol = bi_solve_asymptotic(b)
        z = sol.roots[0] if sol.roots else None
        ref = PUBLISHED_TABLE1.get(round(b, 10))
        dev = z - ref if (z is not None and ref is not None) else None
        rows.append(Table1Row(b, ref, z, dev, sol.count))
    return rows


def _fmt(x):
    return "" if x is None else f"{x:.12g}"


def table1_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "z_paper", "z_computed", "deviation"])
    for r in rows:
        w.writerow([_fmt(r.beta), _fmt(r.z_paper), _fmt(r.z_computed), _fmt(r.deviation)])
    return buf.getvalue()


def table1_json(rows) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=True)
