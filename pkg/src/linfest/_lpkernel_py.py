"""NumPy fallback for the compiled ``_lpkernel`` extension.

Same contract and the same safeguarded Newton/bisection iteration, run
simultaneously on all rows with per-row masks.
"""

import numpy as np

MAX_ITER = 300


def _derivatives(u, x, w, p):
    d = u[:, None] - x
    a = np.abs(d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a2 = a ** (p - 2.0)
        h = np.sum(w * np.copysign(np.where(a > 0.0, a2 * a, 0.0), d), axis=1)
        dh = (p - 1.0) * np.sum(np.where(w > 0.0, w * a2, 0.0), axis=1)
    return h, dh


def lp_minimize(pts, wts, p, tol=1e-12):
    """Minimize each row's objective; see the compiled kernel for the contract."""
    if p <= 1.0:
        raise ValueError("kernel requires p > 1")
    x = np.ascontiguousarray(pts, dtype=np.float64)
    w = np.ascontiguousarray(wts, dtype=np.float64)
    rows = x.shape[0]
    out = np.empty(rows)
    bad = -1
    if rows == 0:
        return out, bad
    live = w > 0.0
    lo = np.where(live, x, np.inf).min(axis=1)
    hi = np.where(live, x, -np.inf).max(axis=1)
    wsum = w.sum(axis=1)
    empty = ~(wsum > 0.0)
    point = ~empty & (hi - lo <= 0.0)
    out[empty] = 0.0
    out[point] = lo[point]
    todo = np.flatnonzero(~empty & ~point)
    if empty.any():
        bad = int(np.flatnonzero(empty)[0])
    if todo.size == 0:
        return out, bad

    x, w = x[todo], w[todo]
    center = 0.5 * (lo[todo] + hi[todo])
    half = 0.5 * (hi[todo] - lo[todo])
    ux = (x - center[:, None]) / half[:, None]
    utol = np.maximum(tol / half, 1e-15)
    a = np.full(todo.size, -1.0)
    b = np.full(todo.size, 1.0)
    u = (np.sum(w * x, axis=1) / wsum[todo] - center) / half
    u = np.where((u <= a) | (u >= b), 0.0, u)
    active = np.ones(todo.size, dtype=bool)
    failed = np.zeros(todo.size, dtype=bool)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        h, dh = _derivatives(u[idx], ux[idx], w[idx], p)
        nonfinite = ~np.isfinite(h)
        failed[idx[nonfinite]] = True
        done = nonfinite | (h == 0.0)
        neg = h < 0.0
        ai = np.where(neg, u[idx], a[idx])
        bi = np.where(neg, b[idx], u[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            unew = u[idx] - h / dh
        newton_ok = np.isfinite(dh) & (dh > 0.0) & (unew > ai) & (unew < bi)
        unew = np.where(newton_ok, unew, 0.5 * (ai + bi))
        step = np.abs(unew - u[idx])
        keep = ~done
        u[idx[keep]] = unew[keep]
        a[idx], b[idx] = ai, bi
        done |= (step <= utol[idx]) | (bi - ai <= utol[idx])
        active[idx[done]] = False
    out[todo] = center + half * u
    if failed.any():
        first = int(todo[np.flatnonzero(failed)[0]])
        bad = first if bad < 0 else min(bad, first)
    return out, bad
