"""Pure-numpy implementations of the hot kernels.

Same signatures as numba_impl; selected when numba is unavailable or when
MVMEDIAN_BACKEND=numpy. Scalar-heavy loops here are written with vectorized
numpy where possible, plain python otherwise.
"""
import numpy as np


def oja_eval_2d(px, py, w, mux, muy):
    """Objective and a subgradient of the weighted pairwise-triangle-area sum.

    E(mu) = 0.5 * sum_{i<j} w_i w_j |cross(x_i - mu, x_j - mu)|
    Returns (E, gx, gy). O(N log N) via an angular sweep: for each point the
    positive-cross partners occupy one contiguous angular arc.
    """
    vx = px - mux
    vy = py - muy
    r2 = vx * vx + vy * vy
    keep = r2 > 0.0
    if not np.any(keep):
        return 0.0, 0.0, 0.0
    vx = vx[keep]
    vy = vy[keep]
    ww = w[keep]
    k = vx.shape[0]
    if k < 2:
        return 0.0, 0.0, 0.0

    ang = np.arctan2(vy, vx)
    order = np.argsort(ang, kind="stable")
    a = ang[order]
    sx = ww[order] * vx[order]
    sy = ww[order] * vy[order]
    ws = ww[order]

    # doubled prefix sums so arcs that wrap are one subtraction
    cx = np.concatenate(([0.0], np.cumsum(np.concatenate((sx, sx)))))
    cy = np.concatenate(([0.0], np.cumsum(np.concatenate((sy, sy)))))
    cw = np.concatenate(([0.0], np.cumsum(np.concatenate((ws, ws)))))
    a2 = np.concatenate((a, a + 2.0 * np.pi))

    totx = cx[k]
    toty = cy[k]
    totw = cw[k]

    # arc (a_j - pi, a_j), open at both ends, taken in the doubled array
    target_lo = a + np.pi  # == (a_j - pi) + 2*pi
    lo = np.searchsorted(a2, target_lo, side="right")
    hi = np.searchsorted(a2, a + 2.0 * np.pi, side="left")
    spx = cx[hi] - cx[lo]
    spy = cy[hi] - cy[lo]
    spw = cw[hi] - cw[lo]

    dx = 2.0 * spx - totx
    dy = 2.0 * spy - toty
    vxs = vx[order]
    vys = vy[order]
    e = 0.25 * float(np.sum(ws * (dx * vys - dy * vxs)))

    bj = 2.0 * spw - totw + ws
    innx = bj * vxs - (dx + ws * vxs)
    inny = bj * vys - (dy + ws * vys)
    # perp((x, y)) = (-y, x)
    gx = 0.25 * float(np.sum(ws * (-inny)))
    gy = 0.25 * float(np.sum(ws * innx))
    return e, gx, gy


def tukey_depth_2d(px, py, w, yx, yy):
    """Exact weighted half-space depth of (yx, yy), O(N log N).

    Returns (depth, dirx, diry): the minimizing closed half-plane is
    {x: dir . (x - y) >= 0}.
    """
    vx = px - yx
    vy = py - yy
    r2 = vx * vx + vy * vy
    at_y = r2 == 0.0
    w0 = float(np.sum(w[at_y]))
    vx = vx[~at_y]
    vy = vy[~at_y]
    ww = w[~at_y]
    k = vx.shape[0]
    if k == 0:
        return w0, 1.0, 0.0

    phi = np.arctan2(vy, vx)
    order = np.argsort(phi, kind="stable")
    phi = phi[order]
    ws = ww[order]
    cw = np.concatenate(([0.0], np.cumsum(np.concatenate((ws, ws)))))
    phi2 = np.concatenate((phi, phi + 2.0 * np.pi))
    totw = cw[k]

    half = 0.5 * np.pi
    crit = np.concatenate((phi + half, phi - half))
    crit = np.mod(crit + np.pi, 2.0 * np.pi) - np.pi
    crit = np.sort(crit)
    nxt = np.concatenate((crit[1:], (crit[0] + 2.0 * np.pi,)))
    mids = 0.5 * (crit + nxt)

    # closed half-plane about direction alpha holds points with
    # phi in [alpha - pi/2, alpha + pi/2]; at gap midpoints no boundary cases.
    # wrap the window start into [phi[0], phi[0] + 2*pi) so the doubled array
    # always covers it
    lo_t = mids - half
    lo_w = np.mod(lo_t - phi[0], 2.0 * np.pi) + phi[0]
    hi_w = lo_w + np.pi
    lo = np.searchsorted(phi2, lo_w, side="left")
    hi = np.searchsorted(phi2, hi_w, side="right")
    weight = cw[hi] - cw[lo]
    j = int(np.argmin(weight))
    depth = w0 + float(weight[j])
    alpha = float(mids[j])
    return depth, float(np.cos(alpha)), float(np.sin(alpha))


def _reflect_index(i, n):
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    j = np.mod(i, period)
    j = np.where(j < 0, j + period, j)
    return np.where(j >= n, period - j, j)


def _map_index(i, n, mode):
    if mode == 0:
        return _reflect_index(i, n)
    return np.clip(i, 0, n - 1)


def rank_filter_2d(img, offs, mode):
    """Scalar median filter with an arbitrary offset set.

    img (H, W) float64, offs (K, 2) int64, mode 0=mirror 1=clamp 2=skip.
    Median of an even count is the midpoint of the two central order stats.
    """
    h, wdt = img.shape
    kk = offs.shape[0]
    ii = np.arange(h)[:, None]
    jj = np.arange(wdt)[None, :]
    stack = np.empty((kk, h, wdt), dtype=np.float64)
    if mode == 2:
        valid = np.empty((kk, h, wdt), dtype=bool)
    for t in range(kk):
        di, dj = int(offs[t, 0]), int(offs[t, 1])
        ri = ii + di
        rj = jj + dj
        if mode == 2:
            ok = (ri >= 0) & (ri < h) & (rj >= 0) & (rj < wdt)
            valid[t] = np.broadcast_to(ok, (h, wdt))
            ri = np.clip(ri, 0, h - 1)
            rj = np.clip(rj, 0, wdt - 1)
        else:
            ri = _map_index(ri, h, mode)
            rj = _map_index(rj, wdt, mode)
        stack[t] = img[ri, rj]
    if mode == 2:
        stack = np.where(valid, stack, np.nan)
        return np.nanmedian(stack, axis=0)
    return np.median(stack, axis=0)


_NEIGH4 = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)], dtype=np.int64)
_NEIGH8 = np.array(
    [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)],
    dtype=np.int64,
)


def amoeba_distances(win, valid, ci, cj, beta, metric, neigh):
    """Shortest amoeba-metric distances from the window center.

    win (h, w, c) float64 values, valid (h, w) uint8, metric 0=L1 1=L2,
    neigh 4 or 8. Unreachable or invalid cells get +inf. The numpy path is
    a Bellman-Ford style relaxation; windows are small so this is fine.
    """
    h, wdt, _ = win.shape
    dist = np.full((h, wdt), np.inf)
    if not valid[ci, cj]:
        return dist
    dist[ci, cj] = 0.0
    offsets = _NEIGH4 if neigh == 4 else _NEIGH8

    # precompute edge costs per offset: cost[i,j] = cost of stepping from
    # (i,j)-(di,dj) into (i,j)
    costs = []
    slices = []
    for di, dj in offsets:
        src_i = slice(max(0, -di), h - max(0, di))
        src_j = slice(max(0, -dj), wdt - max(0, dj))
        dst_i = slice(max(0, di), h - max(0, -di))
        dst_j = slice(max(0, dj), wdt - max(0, -dj))
        dv = win[dst_i, dst_j, :] - win[src_i, src_j, :]
        contrast = np.sqrt(np.sum(dv * dv, axis=-1))
        if metric == 0:
            c = 1.0 + beta * contrast
        else:
            slen2 = float(di * di + dj * dj)
            c = np.sqrt(slen2 + beta * beta * contrast * contrast)
        bad = ~(valid[src_i, src_j].astype(bool) & valid[dst_i, dst_j].astype(bool))
        c = np.where(bad, np.inf, c)
        costs.append(c)
        slices.append((src_i, src_j, dst_i, dst_j))

    changed = True
    it = 0
    cap = h * wdt + 1
    while changed and it < cap:
        changed = False
        it += 1
        for (src_i, src_j, dst_i, dst_j), c in zip(slices, costs):
            cand = dist[src_i, src_j] + c
            cur = dist[dst_i, dst_j]
            better = cand < cur
            if np.any(better):
                cur[better] = cand[better]
                dist[dst_i, dst_j] = cur
                changed = True
    return dist


def _hull_indices_lex(xs, ys, idx):
    """Monotone chain over lex-sorted points; returns positions (into idx)
    of strict hull vertices, counterclockwise from the lexicographic min."""
    n = idx.shape[0]
    if n == 1:
        return np.array([0], dtype=np.int64)
    if n == 2:
        if xs[idx[0]] == xs[idx[1]] and ys[idx[0]] == ys[idx[1]]:
            return np.array([0], dtype=np.int64)
        return np.array([0, 1], dtype=np.int64)

    def build(rng):
        out = []
        for p in rng:
            while len(out) >= 2:
                o, a_ = out[-2], out[-1]
                cr = (xs[idx[a_]] - xs[idx[o]]) * (ys[idx[p]] - ys[idx[o]]) - (
                    ys[idx[a_]] - ys[idx[o]]
                ) * (xs[idx[p]] - xs[idx[o]])
                if cr <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(range(n))
    upper = build(range(n - 1, -1, -1))
    verts = lower[:-1] + upper[:-1]
    # all coincident points collapse to a single vertex
    if not verts:
        return np.array([0], dtype=np.int64)
    return np.array(verts, dtype=np.int64)


def chs_peel_2d(px, py):
    """Convex-hull-stripping death layers.

    Layer k removes every point whose coordinates equal a strict hull vertex
    of the still-alive set (all coincident copies die together; points
    interior to hull edges survive the round). Returns death_layer (N,), 1-based.
    """
    n = px.shape[0]
    death = np.zeros(n, dtype=np.int64)
    order = np.lexsort((py, px))
    alive = order.copy()
    layer = 0
    while alive.shape[0] > 0:
        layer += 1
        vpos = _hull_indices_lex(px, py, alive)
        vx = px[alive[vpos]]
        vy = py[alive[vpos]]
        dead = np.zeros(alive.shape[0], dtype=bool)
        ax = px[alive]
        ay = py[alive]
        for t in range(vx.shape[0]):
            dead |= (ax == vx[t]) & (ay == vy[t])
        death[alive[dead]] = layer
        alive = alive[~dead]
    return death
