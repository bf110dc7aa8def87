"""Cutoff search shared by the single- and two-quality models.

Given the record chain ``P`` and, for every candidate cutoff ``l``, the price
sequence ``V(l)`` of a buyer whose rival uses cutoff ``l``, the optimal cutoff
is the smallest ``l`` with

    (P V)_{l-1} > V_{l-1}   and   (P V)_l <= V_l,

i.e. continuing is still strictly better one record before ``l`` and stopping
is at least as good at ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoCrossingError


@dataclass(frozen=True)
class ThresholdProbe:
    """Continuation gaps ``(P V)_i - V_i`` at ``i = l-1`` and ``i = l``."""

    l: int
    gap_before: float
    gap_at: float

    @property
    def satisfied(self) -> bool:
        return self.gap_before > 0 and self.gap_at <= 0

    def to_dict(self):
        return {"l": self.l, "gap_before": self.gap_before, "gap_at": self.gap_at}


@dataclass(frozen=True)
class ThresholdReport:
    """Optimal cutoff ``l_star`` with both sides of both inequalities.

    ``continue_*`` is ``(P V)_i`` and ``stop_*`` is ``V_i``; ``*_before`` refers
    to ``i = l_star - 1`` and ``*_at`` to ``i = l_star``.  ``partition_ok`` says
    whether the continuation set ``{i : (P V)_i > V_i}`` is exactly
    ``{1, ..., l_star - 1}``.  ``status`` is ``"crossing"``, or ``"degenerate"``
    when the scan range holds a single cutoff that is returned by construction.
    """

    model: str
    mode: str
    N: int
    l_star: int
    z: float
    continue_before: float
    stop_before: float
    continue_at: float
    stop_at: float
    partition_ok: bool
    continuation_set: tuple
    in_regime: bool
    status: str = "crossing"

    def to_dict(self):
        return {
            "model": self.model,
            "mode": self.mode,
            "N": self.N,
            "l_star": self.l_star,
            "z": self.z,
            "continue_before": self.continue_before,
            "stop_before": self.stop_before,
            "continue_at": self.continue_at,
            "stop_at": self.stop_at,
            "partition_ok": self.partition_ok,
            "continuation_set": list(self.continuation_set),
            "in_regime": self.in_regime,
            "status": self.status,
        }


@dataclass(frozen=True)
class ThresholdScan:
    """Full scan result; ``l_star`` is ``None`` when no cutoff crosses."""

    probes: tuple
    l_star: int | None
    flip: int | None


def continuation_gaps(probs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``(P V)_i - V_i`` for every state ``i``."""
    return probs @ values - values


def scan(probs: np.ndarray, price_for, N: int) -> ThresholdScan:
    """Evaluate the two inequalities for ``l = 2..N``.

    ``price_for(l)`` returns the value vector over states ``0..N``.  ``flip`` is
    the first cutoff whose own gap ``(P V)_l - V_l`` is non-positive.
    """
    probes, l_star, flip = [], None, None
    for l in range(2, N + 1):
        v = price_for(l)
        d = probs[l - 1 : l + 1] @ v - v[l - 1 : l + 1]
        probe = ThresholdProbe(l, float(d[0]), float(d[1]))
        probes.append(probe)
        if l_star is None and probe.satisfied:
            l_star = l
        if flip is None and probe.gap_at <= 0:
            flip = l
    return ThresholdScan(tuple(probes), l_star, flip)


def build_report(model, mode, N, probs, price_for, in_regime) -> ThresholdReport:
    """Run :func:`scan` and package the result, raising when nothing crosses."""
    result = scan(probs, price_for, N)
    status = "crossing"
    l_star = result.l_star
    if l_star is None:
        if N == 2:
            l_star, status = 2, "degenerate"
        else:
            raise NoCrossingError(
                f"no cutoff in 2..{N} satisfies both inequalities ({model}, {mode})",
                result.probes,
                result.flip,
            )
    v = price_for(l_star)
    pv = probs @ v
    d = pv - v
    cont = tuple(int(i) for i in range(1, N + 1) if d[i] > 0)
    return ThresholdReport(
        model=model,
        mode=mode,
        N=N,
        l_star=l_star,
        z=l_star / N,
        continue_before=float(pv[l_star - 1]),
        stop_before=float(v[l_star - 1]),
        continue_at=float(pv[l_star]),
        stop_at=float(v[l_star]),
        partition_ok=cont == tuple(range(1, l_star)),
        continuation_set=cont,
        in_regime=in_regime,
        status=status,
    )
