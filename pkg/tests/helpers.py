"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from zeitnot.stopping_core import TransitionMatrix


def random_chain(rng, n, absorbing_zero=False, density=0.6):
    """Random row-stochastic matrix with a guaranteed positive diagonal or edge per row."""
    p = rng.random((n, n)) * (rng.random((n, n)) < density)
    p[np.arange(n), rng.integers(0, n, n)] += 0.1
    if absorbing_zero:
        p[0] = 0.0
        p[0, 0] = 1.0
    p /= p.sum(axis=1, keepdims=True)
    return TransitionMatrix(p)


def best_choice_success(N, l):
    """Win probability of the cutoff-``l`` rule by walking all ``N!`` orders."""
    wins = 0
    for perm in itertools.permutations(range(1, N + 1)):
        best = 0
        for k, v in enumerate(perm, 1):
            rec = v > best
            best = max(best, v)
            if rec and k >= l:
                wins += v == N
                break
    return Fraction(wins, math.factorial(N))


def _records(first, second):
    out, bx, by = [], 0, 0
    for k in range(len(first)):
        rx = first[k] > bx
        ry = second is not None and second[k] > by
        bx = max(bx, first[k])
        if second is not None:
            by = max(by, second[k])
        out.append(rx or ry)
    return out


def _walk(first, second, l):
    N = len(first)
    rec = _records(first, second)
    for k in range(l, N + 1):
        if rec[k - 1]:
            return k
    return N + 1


def reference_duel(first1, first2, l1, l2, second1=None, second2=None, reading="or"):
    """Literal step-by-step duel; returns ``(r1, r2, units1, units2)``.

    Written independently of the vectorised engine: every indicator is
    evaluated by looping over positions.
    """
    N = len(first1)
    t = (_walk(first1, second1, l1), _walk(first2, second2, l2))
    firsts, seconds = (first1, first2), (second1, second2)

    def is_top(p, k, coord):
        seq = firsts[p] if coord == 0 or seconds[p] is None else seconds[p]
        return 1 <= k <= N and seq[k - 1] == N

    def on_best(p, k):
        if reading == "or":
            return is_top(p, k, 0) or is_top(p, k, 1)
        return is_top(p, k, 0) and is_top(p, k, 1)

    rewards, units = [], []
    for p in (0, 1):
        q = 1 - p
        tp, tq = t[p], t[q]
        if reading == "or":
            got = False
            for coord in (0, 1):
                mine = is_top(p, tp, coord)
                theirs_first = is_top(q, tq, coord) and tq <= tp
                got = got or (mine and not theirs_first)
        else:
            got = on_best(p, tp) and not (on_best(q, tq) and tq <= tp)
        rewards.append(bool(got))
        u = 0
        for k in range(1, min(tp - 1, N) + 1):
            if on_best(p, k):
                continue
            if on_best(q, tq) and not k < tq:
                continue
            u += k
        units.append(u)
    return rewards[0], rewards[1], units[0], units[1]
