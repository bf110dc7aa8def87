"""Two buyers playing cutoff rules against each other: exact and sampled payoffs.

Each buyer inspects the portfolio in its own uniformly random order, skips the
first ``l - 1`` items and stops at the first record after that (``N + 1``
means it never stops).  In the two-quality model each buyer also sees an
independent second ranking, and a record in either coordinate counts.

Buyer ``p`` earns ``c_alpha`` for stopping on the best item unless the rival
stopped on it no later (equal stop times on the best item reward nobody).  Each
inspected item ``k < tau_p`` that is not the best costs ``alpha k / N^2`` as
long as the rival has not already secured the best item.

A buyer's whole game is summarised by ``(tau, x, y)``: its stop time and the
positions at which the best item in each coordinate appeared (``x == y`` in
the single-quality model).  The exact engine enumerates orders once per buyer,
groups them into these classes and combines class pairs with integer weights.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ParameterError, SizeCapError

MONO = "mono"
BI = "bi"
EXACT = "exact"
MONTE_CARLO = "monte_carlo"
READ_OR = "or"
READ_AND = "and"

#: largest portfolio the exact engine enumerates, per model
EXACT_CAP = {MONO: 7, BI: 6}
#: trials per random block; the block is the unit of seeding and of work
BLOCK = 65536

CATEGORIES = ("win1", "win2", "both_rewarded", "both_found_tie", "neither")


@dataclass(frozen=True)
class DuelConfig:
    N: int
    model: str = MONO
    l1: int = 2
    l2: int = 2
    alpha: float = 0.5
    c_alpha: float = 0.25
    trials: int = 100_000
    seed: int = 0
    engine: str = EXACT
    reading: str = READ_OR

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if self.model not in (MONO, BI):
            raise ParameterError(f"model must be 'mono' or 'bi', got {self.model!r}")
        for name in ("l1", "l2"):
            l = getattr(self, name)
            if int(l) != l or not 1 <= l <= self.N + 1:
                raise ParameterError(f"{name} must lie in 1..{self.N + 1}, got {l}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.c_alpha < 0:
            raise ParameterError(f"c_alpha must be non-negative, got {self.c_alpha}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be a positive integer, got {self.trials}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.engine not in (EXACT, MONTE_CARLO):
            raise ParameterError(f"engine must be 'exact' or 'monte_carlo', got {self.engine!r}")
        if self.reading not in (READ_OR, READ_AND):
            raise ParameterError(f"reading must be 'or' or 'and', got {self.reading!r}")

    def to_dict(self):
        return {
            "N": self.N,
            "model": self.model,
            "l1": self.l1,
            "l2": self.l2,
            "alpha": self.alpha,
            "c_alpha": self.c_alpha,
            "trials": self.trials,
            "seed": self.seed,
            "engine": self.engine,
            "reading": self.reading,
        }


@dataclass(frozen=True)
class PortfolioDraw:
    """Quality ranks in inspection order (``N`` is best) for each buyer.

    ``second1``/``second2`` hold the second-coordinate ranks (bi model only).
    """

    order1: tuple
    order2: tuple
    second1: tuple | None = None
    second2: tuple | None = None

    def __post_init__(self):
        ref = sorted(self.order1)
        for seq in (self.order1, self.order2, self.second1, self.second2):
            if seq is not None and sorted(seq) != list(range(1, len(ref) + 1)):
                raise ParameterError(f"not a permutation of 1..{len(ref)}: {seq}")
        if len(self.order2) != len(self.order1):
            raise ParameterError("both orders must have the same length")
        if (self.second1 is None) != (self.second2 is None):
            raise ParameterError("give second-coordinate ranks for both buyers or neither")


@dataclass(frozen=True)
class DuelReport:
    """Expected payoffs and outcome probabilities of one duel configuration.

    ``exact`` holds the rational values as strings (exact engine only);
    ``std_error_*`` are filled by the Monte Carlo engine only.
    """

    config: DuelConfig
    expected_payoff_1: float
    expected_payoff_2: float
    win1: float
    win2: float
    both_rewarded: float
    both_found_tie: float
    neither: float
    mean_fee_1: float
    mean_fee_2: float
    stop_time_histograms: dict
    std_error_1: float | None = None
    std_error_2: float | None = None
    category_std_errors: dict | None = None
    fee_std_errors: tuple | None = None
    exact: dict | None = None

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "expected_payoff_1": self.expected_payoff_1,
            "expected_payoff_2": self.expected_payoff_2,
            "std_error_1": self.std_error_1,
            "std_error_2": self.std_error_2,
            "win1": self.win1,
            "win2": self.win2,
            "both_rewarded": self.both_rewarded,
            "both_found_tie": self.both_found_tie,
            "neither": self.neither,
            "mean_fee_1": self.mean_fee_1,
            "mean_fee_2": self.mean_fee_2,
            "category_std_errors": self.category_std_errors,
            "fee_std_errors": list(self.fee_std_errors) if self.fee_std_errors else None,
            "stop_time_histograms": {
                k: {str(t): int(n) for t, n in v.items()} for k, v in self.stop_time_histograms.items()
            },
            "exact": self.exact,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --- per-buyer summaries -----------------------------------------------------------


def summarize(first: np.ndarray, second: np.ndarray | None, l: int):
    """``(tau, x, y)`` for each row of rank arrays (shape ``(M, N)``), 1-based positions."""
    first = np.asarray(first)
    M, N = first.shape
    rec = first == np.maximum.accumulate(first, axis=1)
    x = np.argmax(first == N, axis=1) + 1
    if second is None:
        y = x
    else:
        second = np.asarray(second)
        rec |= second == np.maximum.accumulate(second, axis=1)
        y = np.argmax(second == N, axis=1) + 1
    rec[:, : l - 1] = False
    hit = rec.any(axis=1)
    tau = np.where(hit, np.argmax(rec, axis=1) + 1, N + 1)
    return tau.astype(np.int64), x.astype(np.int64), y.astype(np.int64)


def settle(t1, x1, y1, t2, x2, y2, reading: str = READ_OR):
    """Vectorised outcome of a duel from both buyers' summaries.

    Returns ``(r1, r2, u1, u2, best1, best2)``: reward indicators, fee units
    (``sum k`` over charged steps, to be scaled by ``alpha / N^2``) and
    whether each buyer stopped on a best item.
    """
    t1, x1, y1, t2, x2, y2 = (np.asarray(a, dtype=np.int64) for a in (t1, x1, y1, t2, x2, y2))

    def side(ta, xa, ya, tb, xb, yb):
        if reading == READ_OR:
            best_a = (ta == xa) | (ta == ya)
            best_b = (tb == xb) | (tb == yb)
            # each coordinate's best item is contested separately
            rx = (ta == xa) & ~((tb == xb) & (tb <= ta))
            ry = (ta == ya) & ~((tb == yb) & (tb <= ta))
            r = rx | ry
        else:
            best_a = (ta == xa) & (ta == ya)
            best_b = (tb == xb) & (tb == yb)
            r = best_a & ~(best_b & (tb <= ta))
        # steps 1..K are charged unless the item there is a best item
        K = np.where(best_b, np.minimum(ta, tb) - 1, ta - 1)
        u = K * (K + 1) // 2
        if reading == READ_OR:
            u = u - np.where(xa <= K, xa, 0) - np.where((ya <= K) & (ya != xa), ya, 0)
        else:
            u = u - np.where((xa <= K) & (xa == ya), xa, 0)
        return r, u, best_a

    r1, u1, b1 = side(t1, x1, y1, t2, x2, y2)
    r2, u2, b2 = side(t2, x2, y2, t1, x1, y1)
    return r1, r2, u1, u2, b1, b2


def categorize(r1, r2, b1, b2, t1, t2) -> np.ndarray:
    """Index into :data:`CATEGORIES` for each outcome."""
    r1, r2, b1, b2 = (np.asarray(a, dtype=bool) for a in (r1, r2, b1, b2))
    tie = ~r1 & ~r2 & b1 & b2 & (np.asarray(t1) == np.asarray(t2))
    out = np.full(r1.shape, 4, dtype=np.int64)
    out[tie] = 3
    out[r1 & r2] = 2
    out[r2 & ~r1] = 1
    out[r1 & ~r2] = 0
    return out


def _draw_summary(draw: PortfolioDraw, config: DuelConfig):
    def one(order, second, l):
        a = np.asarray(order)[None, :]
        b = None if second is None else np.asarray(second)[None, :]
        return summarize(a, b, l)

    if config.model == BI and draw.second1 is None:
        raise ParameterError("bi model needs second-coordinate ranks")
    s1 = one(draw.order1, draw.second1 if config.model == BI else None, config.l1)
    s2 = one(draw.order2, draw.second2 if config.model == BI else None, config.l2)
    return s1, s2


def play_duel(draw: PortfolioDraw, config: DuelConfig) -> dict:
    """Payoffs, stop times and fees of a single game."""
    if len(draw.order1) != config.N:
        raise ParameterError(f"draw has {len(draw.order1)} items, config says N={config.N}")
    (t1, x1, y1), (t2, x2, y2) = _draw_summary(draw, config)
    r1, r2, u1, u2, b1, b2 = settle(t1, x1, y1, t2, x2, y2, config.reading)
    N2 = config.N**2
    fee1 = config.alpha * int(u1[0]) / N2
    fee2 = config.alpha * int(u2[0]) / N2
    cat = CATEGORIES[int(categorize(r1, r2, b1, b2, t1, t2)[0])]
    return {
        "payoff_1": config.c_alpha * bool(r1[0]) - fee1,
        "payoff_2": config.c_alpha * bool(r2[0]) - fee2,
        "stop_time_1": int(t1[0]),
        "stop_time_2": int(t2[0]),
        "rewarded_1": bool(r1[0]),
        "rewarded_2": bool(r2[0]),
        "fee_1": fee1,
        "fee_2": fee2,
        "fee_units_1": int(u1[0]),
        "fee_units_2": int(u2[0]),
        "category": cat,
    }


# --- exact engine ------------------------------------------------------------------


@lru_cache(maxsize=8)
def _all_orders(N: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, N + 1))), dtype=np.int64)


@lru_cache(maxsize=64)
def _classes(N: int, model: str, l: int):
    """Distinct ``(tau, x, y)`` summaries with their multiplicities."""
    perms = _all_orders(N)
    if model == MONO:
        tau, x, y = summarize(perms, None, l)
    else:
        P = perms.shape[0]
        first = np.repeat(perms, P, axis=0)
        second = np.tile(perms, (P, 1))
        tau, x, y = summarize(first, second, l)
    keys, counts = np.unique(np.stack([tau, x, y], axis=1), axis=0, return_counts=True)
    return keys, counts.astype(np.int64)


def _rational(v: float) -> Fraction:
    return Fraction(repr(float(v)))


def _histograms(N, classes1, classes2, scale1=1, scale2=1):
    h = {"buyer1": {t: 0 for t in range(1, N + 2)}, "buyer2": {t: 0 for t in range(1, N + 2)}}
    for name, (keys, counts), s in (("buyer1", classes1, scale1), ("buyer2", classes2, scale2)):
        for t, n in zip(keys[:, 0], counts):
            h[name][int(t)] += int(n) * s
    return h


def exact_expected_payoff(config: DuelConfig) -> DuelReport:
    """Expected payoffs over every pair of inspection orders, in exact arithmetic.

    Stop-time histograms count orders per buyer (``N!`` or ``(N!)^2`` each).
    """
    cap = EXACT_CAP[config.model]
    if config.N > cap:
        raise SizeCapError(f"exact engine enumerates at most N={cap} for the {config.model} model, got N={config.N}")
    N = config.N
    k1, n1 = _classes(N, config.model, config.l1)
    k2, n2 = _classes(N, config.model, config.l2)
    A = np.repeat(np.arange(len(n1)), len(n2))
    B = np.tile(np.arange(len(n2)), len(n1))
    w = n1[A] * n2[B]
    r1, r2, u1, u2, b1, b2 = settle(k1[A, 0], k1[A, 1], k1[A, 2], k2[B, 0], k2[B, 1], k2[B, 2], config.reading)
    cat = categorize(r1, r2, b1, b2, k1[A, 0], k2[B, 0])

    total = int(n1.sum()) * int(n2.sum())
    c, a = _rational(config.c_alpha), _rational(config.alpha)
    N2 = N * N

    def frac(x):
        return Fraction(int(x), total)

    win = [frac(w[cat == i].sum()) for i in range(len(CATEGORIES))]
    rew1, rew2 = frac((w * r1).sum()), frac((w * r2).sum())
    fee1 = a * frac((w * u1).sum()) / N2
    fee2 = a * frac((w * u2).sum()) / N2
    pay1, pay2 = c * rew1 - fee1, c * rew2 - fee2
    exact = {
        "expected_payoff_1": str(pay1),
        "expected_payoff_2": str(pay2),
        "mean_fee_1": str(fee1),
        "mean_fee_2": str(fee2),
        **{name: str(v) for name, v in zip(CATEGORIES, win)},
    }
    return DuelReport(
        config=replace(config, engine=EXACT),
        expected_payoff_1=float(pay1),
        expected_payoff_2=float(pay2),
        win1=float(win[0]),
        win2=float(win[1]),
        both_rewarded=float(win[2]),
        both_found_tie=float(win[3]),
        neither=float(win[4]),
        mean_fee_1=float(fee1),
        mean_fee_2=float(fee2),
        stop_time_histograms=_histograms(N, (k1, n1), (k2, n2)),
        exact=exact,
    )


def exact_payoff_fractions(config: DuelConfig) -> tuple:
    """``(payoff_1, payoff_2)`` as exact fractions."""
    rep = exact_expected_payoff(config)
    return Fraction(rep.exact["expected_payoff_1"]), Fraction(rep.exact["expected_payoff_2"])


# --- Monte Carlo engine --------------------------------------------------------------


def _block_ranks(seed: int, block: int, N: int, model: str):
    """Rank arrays for one full block; a pure function of ``(seed, block)``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))
    n_perms = 4 if model == BI else 2
    u = rng.random((n_perms, BLOCK, N))
    return np.argsort(u, axis=2) + 1


def draw_for_trial(config: DuelConfig, trial: int) -> PortfolioDraw:
    """The draw the Monte Carlo engine uses for trial number ``trial``."""
    if not 0 <= trial:
        raise ParameterError("trial index must be non-negative")
    ranks = _block_ranks(config.seed, trial // BLOCK, config.N, config.model)
    row = trial % BLOCK
    seqs = [tuple(int(v) for v in ranks[i, row]) for i in range(ranks.shape[0])]
    if config.model == BI:
        return PortfolioDraw(seqs[0], seqs[2], seqs[1], seqs[3])
    return PortfolioDraw(seqs[0], seqs[1])


def _block_sums(config: DuelConfig, block: int, size: int) -> np.ndarray:
    ranks = _block_ranks(config.seed, block, config.N, config.model)[:, :size]
    if config.model == BI:
        s1 = summarize(ranks[0], ranks[1], config.l1)
        s2 = summarize(ranks[2], ranks[3], config.l2)
    else:
        s1 = summarize(ranks[0], None, config.l1)
        s2 = summarize(ranks[1], None, config.l2)
    r1, r2, u1, u2, b1, b2 = settle(*s1, *s2, config.reading)
    cat = categorize(r1, r2, b1, b2, s1[0], s2[0])
    r1, r2 = r1.astype(np.int64), r2.astype(np.int64)
    N = config.N
    out = [
        r1.sum(), r2.sum(), u1.sum(), u2.sum(),
        (u1 * u1).sum(), (u2 * u2).sum(), (r1 * u1).sum(), (r2 * u2).sum(),
    ]
    out += list(np.bincount(cat, minlength=len(CATEGORIES)))
    out += list(np.bincount(s1[0], minlength=N + 2)[1:])
    out += list(np.bincount(s2[0], minlength=N + 2)[1:])
    return np.array(out, dtype=object)


def monte_carlo(config: DuelConfig, workers: int = 1) -> DuelReport:
    """Sample means over ``config.trials`` draws.

    Trial ``t`` lives in block ``t // 65536``, seeded from ``(seed, block)``;
    blocks are always generated in full and summed as integers in block order,
    so the report does not depend on ``workers``.
    """
    if workers < 1:
        raise ParameterError("workers must be at least 1")
    n, N = config.trials, config.N
    sizes = [min(BLOCK, n - b * BLOCK) for b in range(math.ceil(n / BLOCK))]
    if workers == 1:
        parts = [_block_sums(config, b, s) for b, s in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda bs: _block_sums(config, *bs), enumerate(sizes)))
    tot = parts[0].copy()
    for p in parts[1:]:
        tot = tot + p
    tot = [int(v) for v in tot]
    R1, R2, U1, U2, UU1, UU2, RU1, RU2 = tot[:8]
    cats = tot[8 : 8 + len(CATEGORIES)]
    h1 = tot[8 + len(CATEGORIES) : 8 + len(CATEGORIES) + N + 1]
    h2 = tot[8 + len(CATEGORIES) + N + 1 :]

    c, a, N2 = config.c_alpha, config.alpha, N * N

    def mean_se(first, second, cross, ca, cb):
        # payoff = ca * r - cb * u with r in {0, 1}
        m = (ca * first[0] - cb * first[1]) / n
        m2 = (ca * ca * first[0] - 2 * ca * cb * cross + cb * cb * second) / n
        var = max(m2 - m * m, 0.0) * n / max(n - 1, 1)
        return m, math.sqrt(var / n)

    p1, se1 = mean_se((R1, U1), UU1, RU1, c, a / N2)
    p2, se2 = mean_se((R2, U2), UU2, RU2, c, a / N2)
    fee_se = tuple(
        math.sqrt(max(uu / n - (u / n) ** 2, 0.0) * n / max(n - 1, 1) / n) * a / N2
        for u, uu in ((U1, UU1), (U2, UU2))
    )
    probs = [k / n for k in cats]
    cat_se = {
        name: math.sqrt(max(p * (1 - p), 0.0) / max(n - 1, 1)) for name, p in zip(CATEGORIES, probs)
    }
    return DuelReport(
        config=replace(config, engine=MONTE_CARLO),
        expected_payoff_1=p1,
        expected_payoff_2=p2,
        win1=probs[0],
        win2=probs[1],
        both_rewarded=probs[2],
        both_found_tie=probs[3],
        neither=probs[4],
        mean_fee_1=a * U1 / N2 / n,
        mean_fee_2=a * U2 / N2 / n,
        stop_time_histograms={
            "buyer1": {t + 1: h1[t] for t in range(N + 1)},
            "buyer2": {t + 1: h2[t] for t in range(N + 1)},
        },
        std_error_1=se1,
        std_error_2=se2,
        category_std_errors=cat_se,
        fee_std_errors=fee_se,
    )


def run(config: DuelConfig, workers: int = 1) -> DuelReport:
    if config.engine == EXACT:
        return exact_expected_payoff(config)
    return monte_carlo(config, workers=workers)


def histogram_csv(report: DuelReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stop_time", "count_buyer1", "count_buyer2"])
    h1, h2 = report.stop_time_histograms["buyer1"], report.stop_time_histograms["buyer2"]
    for t in sorted(h1):
        w.writerow([t, h1[t], h2[t]])
    return buf.getvalue()


# --- best response -----------------------------------------------------------------


@dataclass(frozen=True)
class BestResponse:
    """Buyer 1's payoff for every cutoff ``l1 = 1..N+1`` against a fixed ``l2``.

    ``tied`` lists every cutoff attaining the maximum; ``best_l1`` is the
    smallest of them.
    """

    N: int
    model: str
    l2: int
    engine: str
    best_l1: int
    best_payoff: float
    profile: tuple
    tied: tuple
    exact_profile: tuple | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "N": self.N,
            "model": self.model,
            "l2": self.l2,
            "engine": self.engine,
            "best_l1": self.best_l1,
            "best_payoff": self.best_payoff,
            "profile": [{"l1": l, "payoff": p} for l, p in self.profile],
            "tied": list(self.tied),
            "exact_profile": [{"l1": l, "payoff": str(p)} for l, p in self.exact_profile]
            if self.exact_profile
            else None,
        }


def best_response(
    N: int,
    model: str,
    l2: int,
    alpha: float,
    c_alpha: float,
    engine: str = EXACT,
    trials: int = 100_000,
    seed: int = 0,
    reading: str = READ_OR,
    workers: int = 1,
) -> BestResponse:
    """Buyer 1's best cutoff against a rival using ``l2``.

    The exact engine compares rational payoffs, so ties are genuine ties.
    """
    if engine == EXACT and N > EXACT_CAP.get(model, 0):
        raise SizeCapError(f"exact engine enumerates at most N={EXACT_CAP.get(model)} for the {model} model")
    values, exact_vals = [], []
    for l1 in range(1, N + 2):
        cfg = DuelConfig(N, model, l1, l2, alpha, c_alpha, trials, seed, engine, reading)
        if engine == EXACT:
            p1, _ = exact_payoff_fractions(cfg)
            exact_vals.append((l1, p1))
            values.append((l1, float(p1)))
        else:
            values.append((l1, monte_carlo(cfg, workers).expected_payoff_1))
    keyed = exact_vals if engine == EXACT else values
    top = max(v for _, v in keyed)
    tied = tuple(l for l, v in keyed if v == top)
    return BestResponse(
        N=N,
        model=model,
        l2=l2,
        engine=engine,
        best_l1=tied[0],
        best_payoff=float(top),
        profile=tuple(values),
        tied=tied,
        exact_profile=tuple(exact_vals) if exact_vals else None,
    )


def symmetric_equilibria(N: int, model: str, alpha: float, c_alpha: float, reading: str = READ_OR) -> list:
    """Cutoffs ``l`` that are a best response to themselves (exact engine)."""
    out = []
    for l in range(1, N + 2):
        br = best_response(N, model, l, alpha, c_alpha, reading=reading)
        if l in br.tied:
            out.append(l)
    return out


def classical_success(l: int, N: int) -> Fraction:
    """Probability that the cutoff-``l`` rule picks the best of ``N`` items alone."""
    if l == 1:
        return Fraction(1, N)
    if l > N:
        return Fraction(0)
    return Fraction(l - 1, N) * sum((Fraction(1, j - 1) for j in range(l, N + 1)), Fraction(0))
