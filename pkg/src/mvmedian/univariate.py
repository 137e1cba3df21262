"""Univariate medians of weighted multisets and of densities.

Five equivalent characterizations are implemented independently (rank
statistics, weighted half-mass quantiles, extrema stripping, half-line
depth maximization, cost minimization); their agreement is a test target,
not an implementation shortcut.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .core import Interval
from .errors import (
    DensityVanishesInside,
    DimensionMismatch,
    EmptyInput,
    IndexOutOfRange,
    InputError,
    InvalidDensity,
)

_REL_EPS = 1e-12


def _prep(values, weights=None):
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("no values")
    if not np.all(np.isfinite(v)):
        raise DimensionMismatch("values must be finite")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != v.shape:
            raise DimensionMismatch("weights must match values")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise DimensionMismatch("weights must be positive and finite")
    return v, w


def _collapse_sorted(values, weights):
    """Sort and merge duplicates; returns unique values, their weights,
    prefix mass including the value, and suffix mass including the value."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    uniq, start = np.unique(v, return_index=True)
    wu = np.add.reduceat(w, start)
    cum = np.cumsum(wu)
    tail = np.cumsum(wu[::-1])[::-1]
    return uniq, wu, cum, tail


def median_rank(values) -> Interval:
    """Rank-order median of an unweighted multiset.

    Odd count: the middle order statistic. Even count: the interval between
    the two central order statistics.
    """
    v, _ = _prep(values)
    n = v.size
    if n % 2 == 1:
        m = float(np.partition(v, n // 2)[n // 2])
        return Interval(m, m)
    a = float(np.partition(v, n // 2 - 1)[n // 2 - 1])
    b = float(np.partition(v, n // 2)[n // 2])
    return Interval(a, b)


def _mom_pivot(arr: np.ndarray) -> float:
    full = (arr.size // 5) * 5
    groups = arr[:full].reshape(-1, 5)
    meds = np.median(groups, axis=1)
    if full < arr.size:
        meds = np.append(meds, np.median(arr[full:]))
    if meds.size == 1:
        return float(meds[0])
    return select_kth(meds, (meds.size + 1) // 2, method="median-of-medians")


def select_kth(values, k: int, method: str = "quickselect") -> float:
    """k-th smallest (1-based) of a multiset.

    method 'quickselect' uses seeded random pivots, 'median-of-medians'
    the deterministic linear-time pivot rule.
    """
    v, _ = _prep(values)
    if not isinstance(k, (int, np.integer)) or k < 1 or k > v.size:
        raise IndexOutOfRange(f"k={k} outside 1..{v.size}")
    if method not in ("quickselect", "median-of-medians"):
        raise InputError(f"unknown selection method {method!r}")
    rng = np.random.default_rng(0x5EED) if method == "quickselect" else None
    arr = v.copy()
    kk = int(k)
    while True:
        if arr.size <= 8:
            return float(np.sort(arr)[kk - 1])
        if rng is not None:
            p = float(arr[rng.integers(arr.size)])
        else:
            p = _mom_pivot(arr)
        less = arr[arr < p]
        neq = int(np.count_nonzero(arr == p))
        if kk <= less.size:
            arr = less
        elif kk <= less.size + neq:
            return p
        else:
            kk -= less.size + neq
            arr = arr[arr > p]


def median_weighted(values, weights=None, symmetric: bool = False) -> Interval:
    """Weighted half-mass quantile.

    The plain variant returns the smallest value whose cumulative weight
    reaches half the total; the symmetric variant also takes the largest
    value whose tail weight reaches half, yielding an interval.
    """
    v, w = _prep(values, weights)
    uniq, _, cum, tail = _collapse_sorted(v, w)
    tot = cum[-1]
    eps = _REL_EPS * tot
    lo = float(uniq[np.argmax(cum >= 0.5 * tot - eps)])
    if not symmetric:
        return Interval(lo, lo)
    hi_idx = uniq.size - 1 - int(np.argmax((tail >= 0.5 * tot - eps)[::-1]))
    hi = float(uniq[hi_idx])
    return Interval(lo, hi)


def halfline_depth(mu: float, values, weights=None) -> float:
    """min(weight of {x <= mu}, weight of {x >= mu})."""
    v, w = _prep(values, weights)
    order = np.argsort(v, kind="stable")
    v = v[order]
    w = w[order]
    cw = np.concatenate(([0.0], np.cumsum(w)))
    tot = cw[-1]
    le = cw[np.searchsorted(v, mu, side="right")]
    ge = tot - cw[np.searchsorted(v, mu, side="left")]
    return float(min(le, ge))


def median_depth(values, weights=None) -> Interval:
    """Maximizers of the half-line depth, as an interval.

    The maximum over the real line is attained on data values; the returned
    interval spans the attaining values.
    """
    v, w = _prep(values, weights)
    uniq, _, cum, tail = _collapse_sorted(v, w)
    depth = np.minimum(cum, tail)
    eps = _REL_EPS * cum[-1]
    attain = depth >= depth.max() - eps
    vals = uniq[attain]
    return Interval(float(vals[0]), float(vals[-1]))


def median_minimizer(values, weights=None) -> Interval:
    """Minimizers of E(mu) = sum w |mu - x|, as an interval.

    E is piecewise linear and convex, so the minimizing set is the hull of
    the attaining data values.
    """
    v, w = _prep(values, weights)
    order = np.argsort(v, kind="stable")
    vs = v[order]
    ws = w[order]
    uniq, start = np.unique(vs, return_index=True)
    cnt = np.diff(np.append(start, vs.size))
    ends = start + cnt - 1
    cw = np.cumsum(ws)
    cs = np.cumsum(ws * vs)
    totw = cw[-1]
    tots = cs[-1]
    cum_w = cw[ends]
    cum_s = cs[ends]
    e = uniq * cum_w - cum_s + (tots - cum_s) - uniq * (totw - cum_w)
    scale = max(abs(float(uniq[0])), abs(float(uniq[-1])), 1.0)
    eps = _REL_EPS * totw * scale
    attain = e <= e.min() + eps
    vals = uniq[attain]
    return Interval(float(vals[0]), float(vals[-1]))


def median_stripping(values, weights=None) -> Interval:
    """Extrema stripping: repeatedly delete the extreme value of lesser
    half-line depth (both on ties); the median is the hull of the last
    deleted batch. Matches the rank median on unweighted input.
    """
    v, w = _prep(values, weights)
    uniq, _, cum, tail = _collapse_sorted(v, w)
    depth = np.minimum(cum, tail)
    lo, hi = 0, uniq.size - 1
    last = (0, 0)
    while lo <= hi:
        if lo == hi:
            last = (lo, lo)
            break
        dl = depth[lo]
        dr = depth[hi]
        if dl < dr:
            last = (lo, lo)
            lo += 1
        elif dr < dl:
            last = (hi, hi)
            hi -= 1
        else:
            last = (lo, hi)
            lo += 1
            hi -= 1
    return Interval(float(uniq[last[0]]), float(uniq[last[1]]))


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class PiecewiseDensity1D:
    """Probability density: piecewise polynomial (degree <= 3) plus atoms.

    breakpoints (B+1,) strictly increasing; coefficients[k] holds the
    ascending-power coefficients of the density on
    [breakpoints[k], breakpoints[k+1]], in the global variable x.
    atoms is a sequence of (location, weight) point masses.
    Total mass must be 1 within 1e-10.
    """

    breakpoints: np.ndarray
    coefficients: Tuple[np.ndarray, ...]
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64).ravel()
        coeffs = tuple(np.asarray(c, dtype=np.float64).ravel() for c in self.coefficients)
        atoms = tuple((float(a), float(wt)) for a, wt in self.atoms)
        if coeffs:
            if bp.size != len(coeffs) + 1:
                raise InvalidDensity("need one coefficient row per piece")
        elif bp.size != 0:
            raise InvalidDensity("breakpoints without pieces")
        if bp.size >= 2 and not np.all(np.diff(bp) > 0):
            raise InvalidDensity("breakpoints must increase strictly")
        if bp.size == 0 and not atoms:
            raise InvalidDensity("empty density")
        for c in coeffs:
            if c.size > 4:
                raise InvalidDensity("pieces must have degree <= 3")
        for loc, wt in atoms:
            if not np.isfinite(loc) or wt <= 0:
                raise InvalidDensity("atoms need finite location and positive weight")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "atoms", tuple(sorted(atoms)))
        self._validate()

    def _validate(self):
        neg_tol = -1e-12 * max(1.0, self._peak_guess())
        for k, c in enumerate(self.coefficients):
            a, b = self.breakpoints[k], self.breakpoints[k + 1]
            xs = np.linspace(a, b, 33)
            vals = npoly.polyval(xs, c)
            crit = self._piece_critical(c, a, b)
            if crit.size:
                vals = np.concatenate((vals, npoly.polyval(crit, c)))
            if vals.min() < neg_tol:
                raise InvalidDensity("density is negative on a piece")
        mass = self.total_mass()
        if abs(mass - 1.0) > 1e-10:
            raise InvalidDensity(f"total mass is {mass!r}, must be 1")

    @staticmethod
    def _piece_critical(c, a, b):
        d = npoly.polyder(c)
        if d.size == 0 or np.all(d == 0):
            return np.empty(0)
        r = npoly.polyroots(d)
        r = r[np.isreal(r)].real
        return r[(r > a) & (r < b)]

    def _peak_guess(self) -> float:
        peak = 0.0
        for k, c in enumerate(self.coefficients):
            xs = np.linspace(self.breakpoints[k], self.breakpoints[k + 1], 9)
            peak = max(peak, float(np.abs(npoly.polyval(xs, c)).max()))
        return peak

    @property
    def support(self) -> Tuple[float, float]:
        los = []
        his = []
        if self.breakpoints.size:
            los.append(float(self.breakpoints[0]))
            his.append(float(self.breakpoints[-1]))
        if self.atoms:
            los.append(self.atoms[0][0])
            his.append(self.atoms[-1][0])
        return min(los), max(his)

    def density(self, x: float) -> float:
        bp = self.breakpoints
        if bp.size == 0 or x < bp[0] or x > bp[-1]:
            return 0.0
        k = min(int(np.searchsorted(bp, x, side="right")) - 1, len(self.coefficients) - 1)
        k = max(k, 0)
        return float(npoly.polyval(x, self.coefficients[k]))

    def piece_mass(self, k: int, a: float, b: float) -> float:
        anti = npoly.polyint(self.coefficients[k])
        return float(npoly.polyval(b, anti) - npoly.polyval(a, anti))

    def total_mass(self) -> float:
        m = sum(
            self.piece_mass(k, self.breakpoints[k], self.breakpoints[k + 1])
            for k in range(len(self.coefficients))
        )
        return float(m + sum(wt for _, wt in self.atoms))

    def mass_left(self, x: float) -> float:
        """F(x): mass of (-inf, x], atoms at x included."""
        total = 0.0
        bp = self.breakpoints
        for k in range(len(self.coefficients)):
            if x <= bp[k]:
                break
            total += self.piece_mass(k, bp[k], min(x, bp[k + 1]))
        total += sum(wt for loc, wt in self.atoms if loc <= x)
        return total

    def mass_right(self, x: float) -> float:
        """Mass of [x, inf), atoms at x included."""
        total = 0.0
        bp = self.breakpoints
        for k in range(len(self.coefficients)):
            if x >= bp[k + 1]:
                continue
            total += self.piece_mass(k, max(x, bp[k]), bp[k + 1])
        total += sum(wt for loc, wt in self.atoms if loc >= x)
        return total


def uniform_density(a: float = 0.0, b: float = 1.0) -> PiecewiseDensity1D:
    return PiecewiseDensity1D(np.array([a, b]), (np.array([1.0 / (b - a)]),))


def median_density(gamma: PiecewiseDensity1D, symmetric: bool = False) -> Interval:
    """Half-mass point(s) of a density.

    lo is the smallest mu with mass(-inf, mu] >= 1/2; the symmetric variant
    adds the largest mu with mass[mu, inf) >= 1/2.
    """
    lo = _invert_mass(gamma, from_left=True)
    if not symmetric:
        return Interval(lo, lo)
    hi = _invert_mass(gamma, from_left=False)
    return Interval(lo, hi)


def _invert_mass(gamma: PiecewiseDensity1D, from_left: bool) -> float:
    # event points: breakpoints and atom locations, in scan order
    events = set(float(b) for b in gamma.breakpoints)
    events.update(loc for loc, _ in gamma.atoms)
    events = sorted(events)
    if not from_left:
        events = events[::-1]

    def reached(x: float) -> float:
        return gamma.mass_left(x) if from_left else gamma.mass_right(x)

    target = 0.5
    tol = 1e-13
    prev = None
    for x in events:
        fx = reached(x) - target
        if fx >= -tol:
            if prev is None:
                return x
            atom_w = sum(wt for loc, wt in gamma.atoms if loc == x)
            if reached(x) - atom_w >= target - tol:
                # crossing inside the smooth segment ending at this event
                if fx <= 0.0:
                    return x
                lo, hi = (prev, x) if from_left else (x, prev)
                return float(
                    brentq(lambda t: reached(t) - target, lo, hi, xtol=1e-14)
                )
            # the atom at x pushes the mass over the target
            return x
        prev = x
    # numerically the tail may just miss the target
    return events[-1]


def median_density_ode(gamma: PiecewiseDensity1D, step: float = 1e-4) -> float:
    """Median via symmetric mass stripping, integrated as an ODE.

    Both support ends travel inward at one mass quantum per step
    (dx/dm = +-1/gamma(x), classical RK4 with fixed step on the mass
    coordinate). Ends where the density vanishes are bootstrapped by one
    exact mass inversion so 1/gamma is never evaluated at the singularity.
    Stops when the remaining mass drops under two quanta and returns the
    midpoint of the two fronts.
    """
    if gamma.atoms:
        raise InvalidDensity("ODE stripping requires an atom-free density")
    if not (0.0 < step < 0.25):
        raise InvalidDensity("step must lie in (0, 0.25)")
    a, b = float(gamma.breakpoints[0]), float(gamma.breakpoints[-1])
    _check_interior_positive(gamma)

    def f(x: float) -> float:
        x = min(max(x, a), b)
        g = gamma.density(x)
        return 1.0 / max(g, 1e-300)

    h = float(step)
    x_lo, m_lo = a, 0.0
    x_hi, m_hi = b, 0.0
    if gamma.density(a) < 1e-12:
        x_lo = float(brentq(lambda t: gamma.mass_left(t) - h, a, b, xtol=1e-15))
        m_lo = h
    if gamma.density(b) < 1e-12:
        x_hi = float(brentq(lambda t: gamma.mass_right(t) - h, a, b, xtol=1e-15))
        m_hi = h

    def rk4(x: float, sgn: float) -> float:
        k1 = sgn * f(x)
        k2 = sgn * f(x + 0.5 * h * k1)
        k3 = sgn * f(x + 0.5 * h * k2)
        k4 = sgn * f(x + h * k3)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    while m_lo + m_hi < 1.0 - 2.0 * h:
        x_lo = rk4(x_lo, +1.0)
        m_lo += h
        x_hi = rk4(x_hi, -1.0)
        m_hi += h
    return 0.5 * (x_lo + x_hi)


def _check_interior_positive(gamma: PiecewiseDensity1D):
    a, b = float(gamma.breakpoints[0]), float(gamma.breakpoints[-1])
    for k, c in enumerate(gamma.coefficients):
        pa, pb = gamma.breakpoints[k], gamma.breakpoints[k + 1]
        xs = np.linspace(pa, pb, 65)
        crit = PiecewiseDensity1D._piece_critical(c, pa, pb)
        if crit.size:
            xs = np.concatenate((xs, crit))
        vals = npoly.polyval(xs, c)
        inside = (xs > a + 1e-14) & (xs < b - 1e-14)
        if np.any(vals[inside] <= 0.0):
            raise DensityVanishesInside(
                "density vanishes strictly inside the support"
            )
