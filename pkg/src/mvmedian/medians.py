"""Multivariate medians: componentwise, medoid, L1, transformation-
retransformation L1, Oja (planar exact and subgradient, spatial, and the
planar-objective-in-space variant), half-space, and hull stripping.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import defaults as dflt
from ._kernels import chs_peel_2d, oja_eval_2d, tukey_depth_2d
from .core import ConvexPolytope, MedianResult, WeightedPointSet
from .errors import (
    DegenerateData,
    DimUnsupported,
    InputError,
    SingularCovariance,
)
from .univariate import halfline_depth, median_depth, median_weighted


@dataclass(frozen=True)
class L1Config:
    """Iteration control for the L1 / subgradient solvers.

    tol is relative to the bounding-box diameter of the data.
    """

    tol: float = dflt.WEISZFELD_TOL
    max_iter: int = dflt.WEISZFELD_MAX_ITER


def _as_set(points, weights=None) -> WeightedPointSet:
    if isinstance(points, WeightedPointSet):
        if weights is not None:
            raise InputError("weights passed both inside and alongside the point set")
        return points
    return WeightedPointSet.from_points(points, weights)


def _rank_frame(X: np.ndarray):
    """Geometric rank of the point cloud with the principal frame.

    Returns (rank, mean, Vt, singular_values); rows of Vt span the cloud in
    decreasing variance order.
    """
    mean = X.mean(axis=0)
    cen = X - mean
    _, s, Vt = np.linalg.svd(cen, full_matrices=True)
    if s.size == 0 or s[0] <= 0.0:
        return 0, mean, Vt, s
    rank = int(np.sum(s > dflt.RANK_EPS_REL * s[0]))
    return rank, mean, Vt, s


def _merge_close(pts: np.ndarray, tol: float) -> np.ndarray:
    """Drop points that duplicate an earlier one up to tol (grid rounding);
    survivors keep their exact coordinates."""
    if pts.shape[0] <= 1:
        return pts
    q = np.round(pts / max(tol, 1e-300))
    _, first = np.unique(q, axis=0, return_index=True)
    return pts[np.sort(first)]


def _point_result(x, objective=0.0) -> MedianResult:
    x = np.asarray(x, dtype=np.float64)
    return MedianResult(
        representative=x,
        objective_value=float(objective),
        median_set=ConvexPolytope.single(x),
        iterations=0,
        status="exact",
    )


# --------------------------------------------------------------------------
# componentwise and medoid


def median_componentwise(points, weights=None) -> MedianResult:
    """Coordinatewise weighted median; the median set is a box."""
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    los = []
    his = []
    for k in range(S.dim):
        iv = median_weighted(X[:, k], w, symmetric=True)
        los.append(iv.lo)
        his.append(iv.hi)
    los = np.array(los)
    his = np.array(his)
    rep = 0.5 * (los + his)
    corners = np.array(list(product(*zip(los, his))))
    mset = ConvexPolytope.from_points(corners)
    obj = float(np.sum(w[:, None] * np.abs(X - rep)))
    return MedianResult(rep, obj, mset, 0, "exact")


def medoid(points, weights=None) -> MedianResult:
    """Data point minimizing the weighted sum of distances to the others.

    Ties resolve to the lowest index.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    cost = np.sqrt(d2) @ w
    j = int(np.argmin(cost))
    return MedianResult(X[j].copy(), float(cost[j]), None, 0, "exact")


# --------------------------------------------------------------------------
# L1 (geometric) median


def _l1_objective(X, w, y) -> float:
    return float(np.sum(w * np.sqrt(np.sum((X - y) ** 2, axis=1))))


def _newton_polish_l1(X, w, y, diam):
    """A few Newton steps on the smooth part of the L1 cost. Only safe when
    the optimum is away from the data points; bails out near anchors."""
    d = X.shape[1]
    guard = 10.0 * dflt.COLLISION_REL * diam
    for _ in range(40):
        dvec = X - y
        dist = np.sqrt(np.sum(dvec * dvec, axis=1))
        if dist.min() <= guard:
            break
        inv = w / dist
        g = -(dvec * inv[:, None]).sum(axis=0)
        rhat = dvec / dist[:, None]
        H = np.eye(d) * inv.sum() - (rhat * inv[:, None]).T @ rhat
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 0.5 * diam:
            break
        y = y - step
        if np.linalg.norm(step) <= 1e-16 * max(diam, 1.0):
            break
    return y


def _weiszfeld(X, w, diam, config: L1Config):
    """Vardi-Zhang iteration; handles iterates landing on data points."""
    y = (w[:, None] * X).sum(axis=0) / w.sum()
    eps_c = dflt.COLLISION_REL * diam
    it = 0
    status = "max-iter"
    for it in range(1, config.max_iter + 1):
        dvec = X - y
        dist = np.sqrt(np.sum(dvec * dvec, axis=1))
        far = dist > eps_c
        eta = float(w[~far].sum())
        inv = w[far] / dist[far]
        R = (dvec[far] * inv[:, None]).sum(axis=0)
        rnorm = float(np.linalg.norm(R))
        if eta > 0.0 and rnorm <= eta:
            # optimal at a data point
            y = X[int(np.argmin(dist))].copy()
            return y, it, "exact"
        T = (X[far] * inv[:, None]).sum(axis=0) / inv.sum()
        if eta == 0.0:
            ynew = T
        else:
            ynew = (1.0 - eta / rnorm) * T + (eta / rnorm) * y
        step = float(np.linalg.norm(ynew - y))
        y = ynew
        if step <= config.tol * diam:
            status = "converged"
            break
    # the iterate may be creeping toward an optimal anchor without ever
    # landing on it; test the nearest data point for anchor optimality
    dist = np.sqrt(np.sum((X - y) ** 2, axis=1))
    anchor = X[int(np.argmin(dist))]
    adv = X - anchor
    adist = np.sqrt(np.sum(adv * adv, axis=1))
    far = adist > eps_c
    eta = float(w[~far].sum())
    if eta > 0.0:
        R = (adv[far] * (w[far] / adist[far])[:, None]).sum(axis=0)
        if float(np.linalg.norm(R)) <= eta:
            return anchor.copy(), it, "exact"
    if status == "converged":
        cand = _newton_polish_l1(X, w, y, diam)
        if _l1_objective(X, w, cand) <= _l1_objective(X, w, y):
            y = cand
    return y, it, status


def _line_l1_result(X, w, mean, u) -> MedianResult:
    """Weighted median along the line mean + t*u (u a unit vector)."""
    t = (X - mean) @ u
    iv = median_weighted(t, w, symmetric=True)
    rep = mean + iv.representative() * u
    obj = float(np.sum(w * np.abs(t - iv.representative())))
    if iv.width == 0.0:
        mset = ConvexPolytope.single(rep)
    else:
        mset = ConvexPolytope.segment(mean + iv.lo * u, mean + iv.hi * u)
    return MedianResult(rep, obj, mset, 0, "exact")


def median_l1(points, weights=None, config: Optional[L1Config] = None) -> MedianResult:
    """Geometric (L1) median: minimizer of the weighted sum of Euclidean
    distances. Unique for non-collinear data; collinear data reduce to the
    weighted univariate median and may return a segment.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    config = config or L1Config()
    diam = S.bbox_diameter()
    if diam == 0.0:
        return _point_result(X[0])
    rank, mean, Vt, _ = _rank_frame(X)
    if rank <= 1:
        return _line_l1_result(X, w, mean, Vt[0])
    if S.dim == 3 and rank == 2:
        B = Vt[:2]  # (2, 3), rows orthonormal
        inner = median_l1((X - mean) @ B.T, w, config)
        rep = mean + inner.representative @ B
        return MedianResult(rep, inner.objective_value, None,
                            inner.iterations, inner.status)
    y, it, status = _weiszfeld(X, w, diam, config)
    return MedianResult(y, _l1_objective(X, w, y), None, it, status)


# --------------------------------------------------------------------------
# covariance and TR-L1


def covariance(points, weights=None) -> np.ndarray:
    """Weighted covariance about the weighted mean; transforms as
    C(A X + b) = A C Aᵀ under affine maps."""
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    W = w.sum()
    mean = (w[:, None] * X).sum(axis=0) / W
    cen = X - mean
    return (cen * w[:, None]).T @ cen / W


def median_trl1(points, weights=None, config: Optional[L1Config] = None) -> MedianResult:
    """Transformation-retransformation L1 median: whiten by the inverse
    covariance square root, take the L1 median, map back. Affine
    equivariant. Planar data of rank 2 in space are handled in their plane.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    config = config or L1Config()
    if S.bbox_diameter() == 0.0:
        return _point_result(X[0])
    C = covariance(S)
    vals, vecs = np.linalg.eigh(C)
    rank = int(np.sum(vals > dflt.COV_MIN_EIG_REL * vals[-1]))
    if S.dim == 3 and rank == 2:
        mean = (w[:, None] * X).sum(axis=0) / w.sum()
        B = vecs[:, 1:].T  # (2, 3) plane frame of the two live directions
        inner = median_trl1((X - mean) @ B.T, w, config)
        rep = mean + inner.representative @ B
        return MedianResult(rep, inner.objective_value, None,
                            inner.iterations, inner.status)
    if rank < S.dim:
        raise SingularCovariance(
            "covariance is rank deficient; the whitening transform does not exist"
        )
    T = vecs @ np.diag(vals ** -0.5) @ vecs.T
    Tinv = vecs @ np.diag(vals ** 0.5) @ vecs.T
    Z = X @ T.T
    inner = median_l1(Z, w, config)
    rep = inner.representative @ Tinv.T
    return MedianResult(rep, inner.objective_value, None,
                        inner.iterations, inner.status)


# --------------------------------------------------------------------------
# Oja median


def oja_objective(mu, points, weights=None) -> float:
    """Weighted sum of simplex volumes spanned by mu and data tuples:
    triangle areas over pairs in the plane, tetrahedron volumes over
    triples in space."""
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (S.dim,):
        raise InputError("evaluation point dimension mismatch")
    if S.dim == 2:
        px = np.ascontiguousarray(X[:, 0])
        py = np.ascontiguousarray(X[:, 1])
        e, _, _ = oja_eval_2d(px, py, np.ascontiguousarray(w), mu[0], mu[1])
        return float(e)
    if S.dim == 3:
        e, _ = _oja3_eval(X, w, mu, _triple_index(S.n))
        return float(e)
    raise DimUnsupported("Oja objective requires dimension 2 or 3")


def _triple_index(n: int) -> np.ndarray:
    if n < 3:
        return np.empty((0, 3), dtype=np.int64)
    return np.array(list(combinations(range(n), 3)), dtype=np.int64)


def _oja3_eval(X, w, mu, idx):
    A = X[idx[:, 0]] - mu
    B = X[idx[:, 1]] - mu
    C = X[idx[:, 2]] - mu
    bxc = np.cross(B, C)
    det = np.einsum("ij,ij->i", A, bxc)
    wt = w[idx[:, 0]] * w[idx[:, 1]] * w[idx[:, 2]]
    e = float(np.sum(wt * np.abs(det)) / 6.0)
    sgn = np.sign(det)
    grad = -(wt * sgn)[:, None] * (bxc + np.cross(C, A) + np.cross(A, B))
    return e, grad.sum(axis=0) / 6.0


def _oja_exact_2d(X, w, diam):
    """Evaluate the (convex, piecewise linear) objective on every vertex of
    the data-line arrangement; the attaining vertices span the median set."""
    n = X.shape[0]
    ii, jj = np.triu_indices(n, 1)
    dif = X[jj] - X[ii]
    live = np.sum(dif * dif, axis=1) > (1e-14 * diam) ** 2
    a = -dif[live, 1]
    b = dif[live, 0]
    base = X[ii][live]
    c = a * base[:, 0] + b * base[:, 1]
    nrm = np.sqrt(a * a + b * b)
    a, b, c = a / nrm, b / nrm, c / nrm
    m = a.size
    li, lj = np.triu_indices(m, 1)
    det = a[li] * b[lj] - a[lj] * b[li]
    cross = np.abs(det) > 1e-14
    li, lj, det = li[cross], lj[cross], det[cross]
    xs = (c[li] * b[lj] - c[lj] * b[li]) / det
    ys = (a[li] * c[lj] - a[lj] * c[li]) / det
    lo = X.min(axis=0) - dflt.CLIP_SLACK_REL * diam
    hi = X.max(axis=0) + dflt.CLIP_SLACK_REL * diam
    inside = (xs >= lo[0]) & (xs <= hi[0]) & (ys >= lo[1]) & (ys <= hi[1])
    cands = np.vstack([X, np.stack([xs[inside], ys[inside]], axis=1)])
    cands = np.unique(cands, axis=0)

    # affine form of each pair term: cross(x_i - mu, x_j - mu) = A + U mux + V muy
    A = X[ii, 0] * X[jj, 1] - X[ii, 1] * X[jj, 0]
    U = X[ii, 1] - X[jj, 1]
    V = X[jj, 0] - X[ii, 0]
    wp = 0.5 * w[ii] * w[jj]
    E = np.empty(cands.shape[0])
    chunk = 2048
    for s in range(0, cands.shape[0], chunk):
        blk = cands[s:s + chunk]
        vals = A[None, :] + blk[:, :1] * U[None, :] + blk[:, 1:2] * V[None, :]
        E[s:s + chunk] = np.abs(vals) @ wp
    emin = float(E.min())
    attain = E <= emin * (1.0 + dflt.OJA_SET_REL)
    att = _merge_close(cands[attain], dflt.VERTEX_MERGE_REL * diam)
    mset = ConvexPolytope.from_points(att)
    rep = mset.centroid()
    return MedianResult(rep, emin, mset, 0, "exact")


def _polyak_subgradient(x0, eval_fn, lo, hi, diam, tol, max_iter, grad_scale):
    """Projected subgradient descent with step halving on stalls."""
    y = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
    best_y = y.copy()
    best_e = np.inf
    alpha = 0.25 * diam
    stall = 0
    status = "max-iter"
    it = 0
    for it in range(1, max_iter + 1):
        e, g = eval_fn(y)
        if e < best_e * (1.0 - 1e-15) or best_e == np.inf:
            best_e = e
            best_y = y.copy()
            stall = 0
        else:
            stall += 1
        gn = float(np.linalg.norm(g))
        if gn <= dflt.GRAD_EPS * grad_scale:
            status = "converged"
            break
        if stall >= 25:
            alpha *= 0.5
            stall = 0
        if alpha <= tol * diam:
            status = "converged"
            break
        y = np.clip(y - (alpha / gn) * g, lo, hi)
    return best_y, best_e, it, status


def median_oja(points, weights=None, method: str = "auto",
               config: Optional[L1Config] = None) -> MedianResult:
    """Oja median: minimizer of the weighted simplex-volume objective.

    In the plane, 'exact' enumerates the data-line arrangement (small N)
    and returns the full median polytope; 'subgradient' iterates from the
    componentwise median. In space only the subgradient mode exists.
    Degenerate data (all collinear, or all coplanar in space) have an
    unbounded median set and raise DegenerateData; see oja_lift.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    if S.dim not in (2, 3):
        raise DimUnsupported("Oja median requires dimension 2 or 3")
    if method not in ("auto", "exact", "subgradient"):
        raise InputError(f"unknown Oja method {method!r}")
    if config is None:
        config = L1Config(tol=dflt.SUBGRAD_TOL, max_iter=dflt.SUBGRAD_MAX_ITER)
    rank, _, _, _ = _rank_frame(X)
    if rank == 0:
        return _point_result(X[0], objective=0.0)
    if rank < S.dim:
        raise DegenerateData(
            "the simplex-volume objective vanishes on a whole flat; "
            "lift the data (oja_lift) or use a lower-dimensional median"
        )
    diam = S.bbox_diameter()
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    start = median_componentwise(S).representative

    if S.dim == 2:
        if method == "exact" and S.n > dflt.OJA_EXACT_MAX_N:
            raise InputError(
                f"exact Oja enumeration is limited to {dflt.OJA_EXACT_MAX_N} points"
            )
        if method == "auto":
            method = "exact" if S.n <= dflt.OJA_EXACT_MAX_N else "subgradient"
        if method == "exact":
            return _oja_exact_2d(X, w, diam)
        px = np.ascontiguousarray(X[:, 0])
        py = np.ascontiguousarray(X[:, 1])
        wc = np.ascontiguousarray(w)

        def eval2(y):
            e, gx, gy = oja_eval_2d(px, py, wc, y[0], y[1])
            return e, np.array([gx, gy])

        gscale = float(w.sum()) ** 2 * diam
        y, e, it, status = _polyak_subgradient(
            start, eval2, lo, hi, diam, config.tol, config.max_iter, gscale)
        return MedianResult(y, e, None, it, status)

    # spatial case
    if method == "exact":
        raise DimUnsupported("exact Oja enumeration is planar only")
    if S.n > 60:
        raise InputError("spatial Oja is limited to 60 points (cubic cost)")
    idx = _triple_index(S.n)

    def eval3(y):
        return _oja3_eval(X, w, y, idx)

    gscale = float(w.sum()) ** 3 * diam ** 2
    y, e, it, status = _polyak_subgradient(
        start, eval3, lo, hi, diam, config.tol, config.max_iter, gscale)
    return MedianResult(y, e, None, it, status)


def oja_lift(points, weights=None, eps: Optional[float] = None):
    """Duplicate degenerate data across its flat so the Oja median is
    defined: each point splits into two half-weight copies displaced by
    +-eps along the least-variance direction. Full-rank input is returned
    unchanged.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    rank, _, Vt, _ = _rank_frame(X)
    if rank == S.dim:
        return X.copy(), w.copy()
    normal = Vt[-1]
    if eps is None:
        eps = 1e-6 * max(S.bbox_diameter(), 1.0)
    X2 = np.vstack([X + eps * normal, X - eps * normal])
    w2 = np.concatenate([0.5 * w, 0.5 * w])
    return X2, w2


def median_oja_2in3(points, weights=None,
                    config: Optional[L1Config] = None) -> MedianResult:
    """Minimizes the weighted sum of triangle areas spanned with point
    pairs in space (the planar Oja objective carried to R^3). For coplanar
    data this matches the planar Oja median inside the plane.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    if S.dim != 3:
        raise DimUnsupported("this variant lives in dimension 3")
    rank, _, _, _ = _rank_frame(X)
    if rank == 0:
        return _point_result(X[0], objective=0.0)
    if rank < 2:
        raise DegenerateData("collinear data: the area objective vanishes on the line")
    if config is None:
        config = L1Config(tol=dflt.SUBGRAD_TOL, max_iter=dflt.SUBGRAD_MAX_ITER)
    diam = S.bbox_diameter()
    ii, jj = np.triu_indices(S.n, 1)
    Across = np.cross(X[ii], X[jj])          # c(mu) = Across + V x mu
    V = X[jj] - X[ii]
    wp = 0.5 * w[ii] * w[jj]

    def eval23(y):
        c = Across + np.cross(V, y[None, :])
        nrm = np.sqrt(np.sum(c * c, axis=1))
        e = float(np.sum(wp * nrm))
        safe = nrm > 1e-300
        chat = np.zeros_like(c)
        chat[safe] = c[safe] / nrm[safe, None]
        g = (wp[:, None] * np.cross(chat, V)).sum(axis=0)
        return e, g

    lo = X.min(axis=0)
    hi = X.max(axis=0)
    start = median_componentwise(S).representative
    gscale = float(w.sum()) ** 2 * diam
    y, e, it, status = _polyak_subgradient(
        start, eval23, lo, hi, diam, config.tol, config.max_iter, gscale)
    res = minimize(lambda z: eval23(z)[0], y, method="Nelder-Mead",
                   options={"xatol": 1e-12 * max(diam, 1.0),
                            "fatol": 1e-14 * max(e, 1.0), "maxiter": 2000})
    if res.fun <= e:
        y, e = res.x, float(res.fun)
    return MedianResult(y, e, None, it + int(res.nit), status)


# --------------------------------------------------------------------------
# half-space depth and median


@dataclass(frozen=True)
class DepthValue:
    """Half-space depth with a witnessing inward normal."""

    value: float
    direction: np.ndarray
    exact: bool


def _fibonacci_sphere(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / k)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack([np.sin(phi) * np.cos(theta),
                     np.sin(phi) * np.sin(theta),
                     np.cos(phi)], axis=1)


def halfspace_depth(point, points, weights=None,
                    exact: Optional[bool] = None) -> DepthValue:
    """Weighted half-space (location) depth of an arbitrary point.

    Planar and univariate input is computed exactly; in space a direction
    sweep with local refinement gives an upper estimate (exact=True raises
    since no exact spatial rule is implemented).
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    y = np.asarray(point, dtype=np.float64).ravel()
    if y.shape != (S.dim,):
        raise InputError("query point dimension mismatch")
    if S.dim == 1:
        val = halfline_depth(float(y[0]), X[:, 0], w)
        below = float(w[X[:, 0] <= y[0]].sum())
        d = np.array([1.0]) if below <= S.total_weight - below else np.array([-1.0])
        return DepthValue(val, d, True)
    if S.dim == 2:
        val, cx, cy = tukey_depth_2d(
            np.ascontiguousarray(X[:, 0]), np.ascontiguousarray(X[:, 1]),
            np.ascontiguousarray(w), float(y[0]), float(y[1]))
        return DepthValue(float(val), np.array([cx, cy]), True)
    if S.dim != 3:
        raise DimUnsupported("depth needs dimension 1, 2, or 3")
    if exact:
        raise DimUnsupported("exact spatial depth is not implemented")
    scale = max(S.bbox_diameter(), 1.0)
    eps = 1e-12 * scale
    cen = X - y

    def mass(dirs):
        pr = cen @ dirs.T
        return ((pr >= -eps) * w[:, None]).sum(axis=0)

    dirs = _fibonacci_sphere(512)
    m = mass(dirs)
    best = int(np.argmin(m))
    best_val, best_dir = float(m[best]), dirs[best]
    rng = np.random.default_rng(0xD1CE)
    for sigma in (0.3, 0.1, 0.03, 0.01, 0.003):
        local = best_dir[None, :] + sigma * rng.standard_normal((64, 3))
        local /= np.linalg.norm(local, axis=1, keepdims=True)
        mm = mass(local)
        j = int(np.argmin(mm))
        if mm[j] < best_val:
            best_val, best_dir = float(mm[j]), local[j]
    return DepthValue(best_val, best_dir, False)


def _clip_polygon(poly, dvec, t):
    """Sutherland-Hodgman clip of a convex polygon with d . x <= t."""
    out = []
    k = len(poly)
    for i in range(k):
        a = poly[i]
        b = poly[(i + 1) % k]
        fa = float(dvec @ a) - t
        fb = float(dvec @ b) - t
        if fa <= 0.0:
            out.append(a)
        if (fa < 0.0 < fb) or (fb < 0.0 < fa):
            s = fa / (fa - fb)
            out.append(a + s * (b - a))
    return out


def _line_depth_result(X, w, mean, u) -> MedianResult:
    """Half-space median of collinear planar data via the line depth."""
    t = (X - mean) @ u
    iv = median_depth(t, w)
    kstar = halfline_depth(iv.lo, t, w)
    rep = mean + iv.representative() * u
    if iv.width == 0.0:
        mset = ConvexPolytope.single(rep)
    else:
        mset = ConvexPolytope.segment(mean + iv.lo * u, mean + iv.hi * u)
    return MedianResult(rep, float(kstar), mset, 0, "exact")


def median_halfspace(points, weights=None) -> MedianResult:
    """Half-space (Tukey) median: the deepest region, returned exactly as a
    polytope, with the maximal depth as the objective value.

    The exact search enumerates critical directions (normals of point
    differences), locates the deepest feasible level by bisection over
    half-plane intersections, then recovers the region vertices from the
    active constraint lines with a full-system membership check.
    """
    S = _as_set(points, weights)
    X, w = S.points, S.weights
    n = S.n
    if n > dflt.HALFSPACE_EXACT_MAX_N:
        raise InputError(
            f"half-space median is limited to {dflt.HALFSPACE_EXACT_MAX_N} points"
        )
    if S.dim == 1:
        return _line_depth_result(X, w, np.zeros(1), np.ones(1))
    if S.dim != 2:
        raise DimUnsupported("half-space median is planar (or univariate) only")
    diam = S.bbox_diameter()
    if diam == 0.0:
        return _point_result(X[0], objective=S.total_weight)
    rank, mean, Vt, _ = _rank_frame(X)
    if rank <= 1:
        return _line_depth_result(X, w, mean, Vt[0])

    ii, jj = np.triu_indices(n, 1)
    dif = X[jj] - X[ii]
    live = np.sum(dif * dif, axis=1) > (1e-14 * diam) ** 2
    dif = dif[live]
    nrm = np.linalg.norm(dif, axis=1, keepdims=True)
    perp = np.stack([-dif[:, 1], dif[:, 0]], axis=1) / nrm
    dirs = np.unique(np.round(np.vstack([perp, -perp]), 12), axis=0)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    M = dirs.shape[0]

    proj = dirs @ X.T
    order = np.argsort(-proj, axis=1, kind="stable")
    psd = np.take_along_axis(proj, order, axis=1)
    cw = np.cumsum(w[order], axis=1)
    W = float(w.sum())
    eps_k = 1e-12 * W

    def level_ts(K):
        idx = np.argmax(cw >= K - eps_k, axis=1)
        return psd[np.arange(M), idx]

    slack = dflt.CLIP_SLACK_REL * diam
    lo = X.min(axis=0) - diam
    hi = X.max(axis=0) + diam
    box = [np.array([lo[0], lo[1]]), np.array([hi[0], lo[1]]),
           np.array([hi[0], hi[1]]), np.array([lo[0], hi[1]])]

    def region(K):
        t = level_ts(K)
        poly = box
        for mrow in range(M):
            poly = _clip_polygon(poly, dirs[mrow], t[mrow] + slack)
            if not poly:
                return None
        return np.array(poly)

    uniform = bool(np.all(w == w[0]))
    if uniform:
        w0 = float(w[0])
        feas = max(1, -(-n // 3))          # ceil(n/3): a centerpoint exists
        infeas = n + 1
        while infeas - feas > 1:
            mid = (feas + infeas) // 2
            if region(mid * w0) is not None:
                feas = mid
            else:
                infeas = mid
        k_level = feas * w0
    else:
        k_lo, k_hi = W / 3.0, W + float(w.min())
        for _ in range(60):
            mid = 0.5 * (k_lo + k_hi)
            if region(mid) is not None:
                k_lo = mid
            else:
                k_hi = mid
        k_level = k_lo

    # snap the level onto the grid of achievable half-plane masses
    vals = np.unique(cw)
    pos = int(np.searchsorted(vals, k_level - eps_k))
    k_star = float(vals[min(pos, vals.size - 1)])

    # the depth region is exactly the intersection of the critical-direction
    # half-planes, so membership is a linear test; point evaluations of the
    # depth at region vertices are one ulp from a mass jump and unusable.
    poly = region(k_star)
    if poly is None:
        k_star = k_level
        poly = region(k_star)
    t = level_ts(k_star)
    resid = np.abs(dirs @ poly.T - t[:, None]).min(axis=1)
    active = np.flatnonzero(resid <= dflt.ACTIVE_CONSTRAINT_REL * diam)
    if active.size > 200:
        active = active[np.argsort(resid[active])[:200]]
    cands = [X]
    if active.size >= 2:
        ai, aj = np.triu_indices(active.size, 1)
        a1, a2 = active[ai], active[aj]
        det = dirs[a1, 0] * dirs[a2, 1] - dirs[a2, 0] * dirs[a1, 1]
        ok = np.abs(det) > 1e-12
        xs = (t[a1][ok] * dirs[a2, 1][ok] - t[a2][ok] * dirs[a1, 1][ok]) / det[ok]
        ys = (dirs[a1, 0][ok] * t[a2][ok] - dirs[a2, 0][ok] * t[a1][ok]) / det[ok]
        cands.append(np.stack([xs, ys], axis=1))
    cands = np.unique(np.vstack(cands), axis=0)
    inside = (dirs @ cands.T - t[:, None]).max(axis=0) <= slack
    attainers = _merge_close(cands[inside], dflt.VERTEX_MERGE_REL * diam)
    mset = ConvexPolytope.from_points(attainers)
    rep = mset.centroid()
    return MedianResult(rep, k_star, mset, 0, "exact")


# --------------------------------------------------------------------------
# convex-hull stripping


def median_chs(points, weights=None) -> MedianResult:
    """Convex-hull stripping median: peel hull layers until nothing is
    left; the median set is the hull of the last surviving layer.

    Multiset semantics: coincident copies sit on the same hull vertex and
    are removed together, so weights cannot influence the outcome and are
    ignored.
    """
    S = _as_set(points, weights)
    X = S.points
    if S.dim != 2:
        raise DimUnsupported("hull stripping is planar only")
    death = chs_peel_2d(np.ascontiguousarray(X[:, 0]),
                        np.ascontiguousarray(X[:, 1]))
    layers = int(death.max())
    last = X[death == layers]
    mset = ConvexPolytope.from_points(last)
    rep = mset.centroid()
    return MedianResult(rep, float(layers), mset, layers, "exact")


def chs_death_layers(points) -> np.ndarray:
    """Per-point 1-based peeling layer at which each point is removed."""
    S = _as_set(points)
    if S.dim != 2:
        raise DimUnsupported("hull stripping is planar only")
    X = S.points
    return chs_peel_2d(np.ascontiguousarray(X[:, 0]),
                       np.ascontiguousarray(X[:, 1]))
