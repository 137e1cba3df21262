"""numba-jitted kernels. Import fails cleanly when numba is missing.

Kept serial on purpose: results must be bit-reproducible regardless of
thread count, and compilation is cached to disk (cache=True) so repeat
runs skip the JIT cost.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def oja_eval_2d(px, py, w, mux, muy):
    n = px.shape[0]
    vx = np.empty(n)
    vy = np.empty(n)
    ww = np.empty(n)
    k = 0
    for i in range(n):
        ax = px[i] - mux
        ay = py[i] - muy
        if ax * ax + ay * ay > 0.0:
            vx[k] = ax
            vy[k] = ay
            ww[k] = w[i]
            k += 1
    if k < 2:
        return 0.0, 0.0, 0.0
    vx = vx[:k]
    vy = vy[:k]
    ww = ww[:k]

    ang = np.arctan2(vy, vx)
    order = np.argsort(ang, kind="mergesort")
    a = ang[order]

    cx = np.zeros(2 * k + 1)
    cy = np.zeros(2 * k + 1)
    cw = np.zeros(2 * k + 1)
    a2 = np.empty(2 * k)
    for t in range(2 * k):
        j = order[t % k]
        cx[t + 1] = cx[t] + ww[j] * vx[j]
        cy[t + 1] = cy[t] + ww[j] * vy[j]
        cw[t + 1] = cw[t] + ww[j]
        a2[t] = a[t] if t < k else a[t - k] + 2.0 * np.pi

    totx = cx[k]
    toty = cy[k]
    totw = cw[k]

    e = 0.0
    gx = 0.0
    gy = 0.0
    for t in range(k):
        j = order[t]
        lo = np.searchsorted(a2, a[t] + np.pi, side="right")
        hi = np.searchsorted(a2, a[t] + 2.0 * np.pi, side="left")
        spx = cx[hi] - cx[lo]
        spy = cy[hi] - cy[lo]
        spw = cw[hi] - cw[lo]
        dx = 2.0 * spx - totx
        dy = 2.0 * spy - toty
        e += ww[j] * (dx * vy[j] - dy * vx[j])
        bj = 2.0 * spw - totw + ww[j]
        innx = bj * vx[j] - (dx + ww[j] * vx[j])
        inny = bj * vy[j] - (dy + ww[j] * vy[j])
        gx += ww[j] * (-inny)
        gy += ww[j] * innx
    return 0.25 * e, 0.25 * gx, 0.25 * gy


@njit(cache=True)
def tukey_depth_2d(px, py, w, yx, yy):
    n = px.shape[0]
    vx = np.empty(n)
    vy = np.empty(n)
    ww = np.empty(n)
    w0 = 0.0
    k = 0
    for i in range(n):
        ax = px[i] - yx
        ay = py[i] - yy
        if ax * ax + ay * ay == 0.0:
            w0 += w[i]
        else:
            vx[k] = ax
            vy[k] = ay
            ww[k] = w[i]
            k += 1
    if k == 0:
        return w0, 1.0, 0.0

    phi = np.arctan2(vy[:k], vx[:k])
    order = np.argsort(phi, kind="mergesort")
    sphi = phi[order]
    cw = np.zeros(2 * k + 1)
    phi2 = np.empty(2 * k)
    for t in range(2 * k):
        cw[t + 1] = cw[t] + ww[order[t % k]]
        phi2[t] = sphi[t] if t < k else sphi[t - k] + 2.0 * np.pi

    half = 0.5 * np.pi
    crit = np.empty(2 * k)
    for t in range(k):
        c1 = sphi[t] + half
        c2 = sphi[t] - half
        c1 = ((c1 + np.pi) % (2.0 * np.pi)) - np.pi
        c2 = ((c2 + np.pi) % (2.0 * np.pi)) - np.pi
        crit[2 * t] = c1
        crit[2 * t + 1] = c2
    crit = np.sort(crit)

    best = np.inf
    balpha = 0.0
    phi0 = sphi[0]
    for t in range(2 * k):
        hi_c = crit[t + 1] if t + 1 < 2 * k else crit[0] + 2.0 * np.pi
        mid = 0.5 * (crit[t] + hi_c)
        lo_t = mid - half
        lo_w = ((lo_t - phi0) % (2.0 * np.pi)) + phi0
        hi_w = lo_w + np.pi
        lo = np.searchsorted(phi2, lo_w, side="left")
        hi = np.searchsorted(phi2, hi_w, side="right")
        weight = cw[hi] - cw[lo]
        if weight < best:
            best = weight
            balpha = mid
    return w0 + best, np.cos(balpha), np.sin(balpha)


@njit(cache=True)
def _map_idx(i, n, mode):
    if n == 1:
        return 0
    if mode == 1:
        if i < 0:
            return 0
        if i >= n:
            return n - 1
        return i
    period = 2 * (n - 1)
    j = i % period
    if j < 0:
        j += period
    if j >= n:
        j = period - j
    return j


@njit(cache=True)
def rank_filter_2d(img, offs, mode):
    h, wdt = img.shape
    kk = offs.shape[0]
    out = np.empty((h, wdt))
    buf = np.empty(kk)
    for i in range(h):
        for j in range(wdt):
            c = 0
            for t in range(kk):
                ri = i + offs[t, 0]
                rj = j + offs[t, 1]
                if mode == 2:
                    if ri < 0 or ri >= h or rj < 0 or rj >= wdt:
                        continue
                else:
                    ri = _map_idx(ri, h, mode)
                    rj = _map_idx(rj, wdt, mode)
                buf[c] = img[ri, rj]
                c += 1
            s = np.sort(buf[:c].copy())
            if c % 2 == 1:
                out[i, j] = s[(c - 1) // 2]
            else:
                out[i, j] = 0.5 * (s[c // 2 - 1] + s[c // 2])
    return out


@njit(cache=True)
def amoeba_distances(win, valid, ci, cj, beta, metric, neigh):
    h, wdt, nch = win.shape
    dist = np.full((h, wdt), np.inf)
    if valid[ci, cj] == 0:
        return dist
    dist[ci, cj] = 0.0
    done = np.zeros((h, wdt), dtype=np.uint8)
    noff = 4 if neigh == 4 else 8
    di = np.array([-1, 1, 0, 0, -1, -1, 1, 1], dtype=np.int64)
    dj = np.array([0, 0, -1, 1, -1, 1, -1, 1], dtype=np.int64)
    for _ in range(h * wdt):
        # pick the unfinished cell with the smallest distance
        bi = -1
        bj = -1
        bd = np.inf
        for i in range(h):
            for j in range(wdt):
                if done[i, j] == 0 and dist[i, j] < bd:
                    bd = dist[i, j]
                    bi = i
                    bj = j
        if bi < 0:
            break
        done[bi, bj] = 1
        for t in range(noff):
            ni = bi + di[t]
            nj = bj + dj[t]
            if ni < 0 or ni >= h or nj < 0 or nj >= wdt:
                continue
            if valid[ni, nj] == 0 or done[ni, nj] == 1:
                continue
            c2 = 0.0
            for ch in range(nch):
                dv = win[ni, nj, ch] - win[bi, bj, ch]
                c2 += dv * dv
            if metric == 0:
                cost = 1.0 + beta * np.sqrt(c2)
            else:
                slen2 = float(di[t] * di[t] + dj[t] * dj[t])
                cost = np.sqrt(slen2 + beta * beta * c2)
            nd = bd + cost
            if nd < dist[ni, nj]:
                dist[ni, nj] = nd
    return dist


@njit(cache=True)
def _chain_hull(xs, ys, alive, vout):
    """Monotone chain over the lex-sorted alive index array.

    Writes positions (indices into alive) of strict hull vertices to vout,
    returns their count."""
    n = alive.shape[0]
    if n == 1:
        vout[0] = 0
        return 1
    if n == 2:
        if xs[alive[0]] == xs[alive[1]] and ys[alive[0]] == ys[alive[1]]:
            vout[0] = 0
            return 1
        vout[0] = 0
        vout[1] = 1
        return 2
    stack = np.empty(n + 1, dtype=np.int64)
    m = 0
    for p in range(n):
        while m >= 2:
            ox = xs[alive[stack[m - 2]]]
            oy = ys[alive[stack[m - 2]]]
            cr = (xs[alive[stack[m - 1]]] - ox) * (ys[alive[p]] - oy) - (
                ys[alive[stack[m - 1]]] - oy
            ) * (xs[alive[p]] - ox)
            if cr <= 0.0:
                m -= 1
            else:
                break
        stack[m] = p
        m += 1
    nl = m
    for t in range(nl - 1):
        vout[t] = stack[t]
    cnt = nl - 1
    m = 0
    for p in range(n - 1, -1, -1):
        while m >= 2:
            ox = xs[alive[stack[m - 2]]]
            oy = ys[alive[stack[m - 2]]]
            cr = (xs[alive[stack[m - 1]]] - ox) * (ys[alive[p]] - oy) - (
                ys[alive[stack[m - 1]]] - oy
            ) * (xs[alive[p]] - ox)
            if cr <= 0.0:
                m -= 1
            else:
                break
        stack[m] = p
        m += 1
    for t in range(m - 1):
        vout[cnt + t] = stack[t]
    cnt += m - 1
    if cnt == 0:
        vout[0] = 0
        cnt = 1
    return cnt


@njit(cache=True)
def chs_peel_2d(px, py):
    n = px.shape[0]
    death = np.zeros(n, dtype=np.int64)
    key = np.argsort(py, kind="mergesort")
    tmp = np.empty(n, dtype=np.int64)
    for t in range(n):
        tmp[t] = key[t]
    xs_of = px[tmp]
    key2 = np.argsort(xs_of, kind="mergesort")
    alive = np.empty(n, dtype=np.int64)
    for t in range(n):
        alive[t] = tmp[key2[t]]

    vout = np.empty(n + 2, dtype=np.int64)
    dead = np.zeros(n, dtype=np.uint8)
    layer = 0
    na = n
    while na > 0:
        layer += 1
        cnt = _chain_hull(px, py, alive[:na], vout)
        # coincident copies sit next to each other in lex order, so each
        # vertex position expands to its full duplicate run
        for v in range(cnt):
            p = vout[v]
            ax = px[alive[p]]
            ay = py[alive[p]]
            q = p
            while q >= 0 and px[alive[q]] == ax and py[alive[q]] == ay:
                dead[q] = 1
                q -= 1
            q = p + 1
            while q < na and px[alive[q]] == ax and py[alive[q]] == ay:
                dead[q] = 1
                q += 1
        nk = 0
        for t in range(na):
            if dead[t] == 1:
                death[alive[t]] = layer
                dead[t] = 0
            else:
                alive[nk] = alive[t]
                nk += 1
        na = nk
    return death
