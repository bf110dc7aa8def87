"""Grid-bracketed bisection for scalar residuals on an interval.

The residuals of interest contain ``ln z`` and ``ln^2 z`` terms, so derivative
methods are avoided: every sign change on a uniform grid is refined by plain
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

EDGE = 1e-9
GRID_STEP = 1e-4
BISECT_TOL = 1e-14
RESIDUAL_TOL = 1e-12
_MAX_BISECT = 400


@dataclass(frozen=True)
class InterpretationId:
    """One registered reading of an equation whose printed form is ambiguous."""

    equation: str
    variant: str
    formula: str

    def to_dict(self):
        return {"equation": self.equation, "variant": self.variant, "formula": self.formula}


INTERPRETATIONS = {
    ("mono-asymptotic", "A"): InterpretationId(
        "mono-asymptotic",
        "A",
        "c(1 + ln z + (z/2) ln^2 z) + (a/2) z(1-z) = (a/2) z^2 [ln z + (1/2)(1-z)(3-z)]",
    ),
    ("mono-asymptotic", "B"): InterpretationId(
        "mono-asymptotic",
        "B",
        "c(1 + ln z + (z/2) ln^2 z) + (a/2) z(1-z) = (a/2) z^2 [ln z * (1/2)(1-z)(3-z)]",
    ),
    ("mono-invariant", "A"): InterpretationId(
        "mono-invariant",
        "A",
        "1 + ln z + (z/2) ln^2 z + z(1-z) = z^2 [ln z + (1/2)(1-z)(3-z)]",
    ),
    ("mono-invariant", "B"): InterpretationId(
        "mono-invariant",
        "B",
        "1 + ln z + (z/2) ln^2 z + z(1-z) = z^2 [ln z * (1/2)(1-z)(3-z)]",
    ),
    ("bi-asymptotic", "A"): InterpretationId(
        "bi-asymptotic",
        "A",
        "b(4z ln z + 2z^2 ln^2 z + 2z^2 ln z + z^3 ln^2 z + 2z^3 ln z + 5z - z^3 - z^4)"
        " + (2z + 2z^2 ln z + 2z^2 (1-z)^2 + 2z^3 ln^2 z + 3z^3 ln z + 10z^3 - z^4 + z^5) = 0",
    ),
}


def interpretation(equation: str, variant: str = "A") -> InterpretationId:
    try:
        return INTERPRETATIONS[(equation, variant)]
    except KeyError:
        known = sorted(v for e, v in INTERPRETATIONS if e == equation)
        raise ParameterError(
            f"no interpretation {variant!r} registered for {equation!r} (known: {known})"
        ) from None


@dataclass(frozen=True)
class AsymptoticSolution:
    """Roots of a residual found by grid scan plus bisection.

    ``status`` is ``"ok"``, ``"no_root"`` or ``"degenerate"`` (residual is
    zero on the whole grid, so no root is claimed).
    """

    roots: tuple
    residuals: tuple
    bracket_grid_step: float
    interpretation: InterpretationId | None = None
    status: str = "ok"
    brackets: tuple = ()
    excluded: tuple = ()
    rejected: tuple = ()
    profile: tuple = ()

    @property
    def count(self) -> int:
        return len(self.roots)

    def to_dict(self):
        return {
            "roots": list(self.roots),
            "residuals": list(self.residuals),
            "count": self.count,
            "status": self.status,
            "bracket_grid_step": self.bracket_grid_step,
            "brackets": [list(b) for b in self.brackets],
            "excluded_points": list(self.excluded),
            "rejected_brackets": [list(b) for b in self.rejected],
            "interpretation": self.interpretation.to_dict() if self.interpretation else None,
        }


def _evaluate(residual, grid):
    try:
        vals = np.asarray(residual(grid), dtype=float)
        if vals.shape == grid.shape:
            return vals
    except Exception:
        pass
    return np.array([float(residual(float(x))) for x in grid])


def _bisect(residual, a, fa, b, tol):
    for _ in range(_MAX_BISECT):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = float(residual(m))
        if fm == 0.0:
            return m, 0.0
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
        if b - a < tol and abs(fm) < RESIDUAL_TOL:
            break
    fa_, fb_ = float(residual(a)), float(residual(b))
    return (a, fa_) if abs(fa_) <= abs(fb_) else (b, fb_)


def _profile(grid, vals, points=41):
    pick = np.unique(np.linspace(0, grid.size - 1, points).astype(int))
    return tuple((float(grid[i]), float(vals[i])) for i in pick)


def find_roots(
    residual,
    lo: float = EDGE,
    hi: float = 1.0 - EDGE,
    grid_step: float = GRID_STEP,
    tol: float = BISECT_TOL,
    interp: InterpretationId | None = None,
) -> AsymptoticSolution:
    """Every sign-change root of ``residual`` on ``[lo, hi]``.

    The residual may be vectorised over numpy arrays; scalar-only callables
    are evaluated point by point.  Non-finite grid values are dropped and
    listed in ``excluded``.  A bracket whose bisection limit does not bring the
    residual below 1e-12 (a jump rather than a root) is listed in ``rejected``.
    """
    if not lo < hi:
        raise ParameterError("need lo < hi")
    if grid_step <= 0 or tol <= 0:
        raise ParameterError("grid_step and tol must be positive")

    n = int(math.floor((hi - lo) / grid_step + 1e-9))
    grid = lo + grid_step * np.arange(n + 1)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    vals = _evaluate(residual, grid)
    finite = np.isfinite(vals)
    excluded = tuple(float(x) for x in grid[~finite])
    grid, vals = grid[finite], vals[finite]

    if vals.size and np.all(vals == 0.0):
        return AsymptoticSolution((), (), grid_step, interp, "degenerate", excluded=excluded)

    roots, res, brackets, rejected = [], [], [], []
    for i, v in enumerate(vals):
        if v == 0.0:
            roots.append(float(grid[i]))
            res.append(0.0)
            brackets.append((float(grid[i]), float(grid[i])))
    s = np.sign(vals)
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        a, b = float(grid[i]), float(grid[i + 1])
        r, fr = _bisect(residual, a, float(vals[i]), b, tol)
        if abs(fr) < RESIDUAL_TOL:
            roots.append(r)
            res.append(fr)
            brackets.append((a, b))
        else:
            rejected.append((a, b))

    order = np.argsort(roots)
    roots = tuple(roots[i] for i in order)
    res = tuple(res[i] for i in order)
    brackets = tuple(brackets[i] for i in order)
    status = "ok" if roots else "no_root"
    return AsymptoticSolution(
        roots,
        res,
        grid_step,
        interp,
        status,
        brackets=brackets,
        excluded=excluded,
        rejected=tuple(rejected),
        profile=_profile(grid, vals) if not roots else (),
    )
