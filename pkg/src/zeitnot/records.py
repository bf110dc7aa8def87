"""Forward (Kolmogorov) recursion for the stop time of a cutoff rule.

A buyer with cutoff ``l`` follows the record chain from state 1 without
stopping while the current record sits before ``l``; the first record at a
position ``j >= l`` is where it stops.  Starting from unit mass on state 1,

    m_j = sum_{i<j} m_i p_ij          (2 <= j < l, pre-cutoff record masses)
    h_j = sum_{i<l} m_i p_ij          (j >= l, stop-time law)

The pre-cutoff masses do not depend on ``l``, so one pass over the chain
serves every cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class StopMomentDistribution:
    """Law of the stop time of the cutoff-``l`` rule.

    ``weights[j]`` is ``P{tau(l) = j}`` for ``j = l..N`` (zero below ``l``);
    ``deficit = 1 - sum(weights)`` is the mass that never stops.  ``absorbed``
    is the same mass computed as flow into the break state, and
    ``record_mass[j]`` is the probability that position ``j < l`` holds a record.
    ``closed_form`` carries the model's closed-form weights and
    ``closed_form_gap`` their largest deviation from the recursion.
    """

    l: int
    N: int
    weights: np.ndarray
    deficit: float
    absorbed: float
    record_mass: np.ndarray
    closed_form: np.ndarray | None = None
    closed_form_gap: float | None = None

    @property
    def total(self) -> float:
        return float(self.weights.sum())


class RecordFlow:
    """Record masses and cumulative stop flows of one chain."""

    def __init__(self, probs: np.ndarray):
        p = np.asarray(probs, dtype=float)
        n = p.shape[0] - 1
        m = np.zeros(n + 1)
        m[1] = 1.0
        for j in range(2, n + 1):
            m[j] = m[1:j] @ p[1:j, j]
        flow = m[:, None] * p
        flow[0] = 0.0
        self.N = n
        self.probs = p
        self.masses = m
        # cum_flow[l-1] = sum over i < l of m_i p_i. ; row l-1 serves cutoff l
        self.cum_flow = np.cumsum(flow, axis=0)

    def distribution(self, l: int, closed_form=None) -> StopMomentDistribution:
        n = self.N
        if not 2 <= l <= n:
            raise ParameterError(f"cutoff l must lie in 2..{n}, got {l}")
        row = self.cum_flow[l - 1]
        h = np.zeros(n + 1)
        h[l:] = row[l:]
        rec = np.zeros(n + 1)
        rec[1:l] = self.masses[1:l]
        gap = None
        if closed_form is not None:
            closed_form = np.asarray(closed_form, dtype=float)
            gap = float(np.max(np.abs(closed_form[l:] - h[l:])))
        for a in (h, rec):
            a.setflags(write=False)
        return StopMomentDistribution(
            l=l,
            N=n,
            weights=h,
            deficit=float(1.0 - h.sum()),
            absorbed=float(row[0]),
            record_mass=rec,
            closed_form=closed_form,
            closed_form_gap=gap,
        )
