"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Set METASEG_DISABLE_NUMBA=1 to force the numpy path (e.g. for debugging or
on platforms without a working numba). Both paths implement the same
algorithms; `benchmarks/bench_kernels.py` compares their speed and output.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

_TINY = 1e-12

NUMBA_DISABLED = os.environ.get("METASEG_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled via METASEG_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# dispersion


@njit(cache=True)
def _dispersion_loop(probs, inv_log_q):
    h, w, q = probs.shape
    ent = np.empty((h, w), dtype=np.float64)
    diff = np.empty((h, w), dtype=np.float64)
    cls = np.empty((h, w), dtype=np.int32)
    for i in range(h):
        for j in range(w):
            s = 0.0
            top = -1.0
            second = -1.0
            arg = 0
            for c in range(q):
                f = float(probs[i, j, c])
                fc = f if f > _TINY else _TINY
                s -= f * np.log(fc)
                if f > top:
                    second = top
                    top = f
                    arg = c
                elif f > second:
                    second = f
            ent[i, j] = s * inv_log_q
            diff[i, j] = 1.0 - top + second
            cls[i, j] = arg
    return ent, diff, cls


def _dispersion_numpy(probs, inv_log_q):
    p = probs.astype(np.float64)
    ent = -(p * np.log(np.maximum(p, _TINY))).sum(axis=2) * inv_log_q
    part = np.sort(p, axis=2)
    diff = 1.0 - part[:, :, -1] + part[:, :, -2]
    cls = np.argmax(p, axis=2).astype(np.int32)
    return ent, diff, cls


def dispersion_maps(probs):
    """Return (entropy, diff, argmax) maps for an (H, W, q) probability array.

    Entropy is normalized by log(q); argmax ties resolve to the lowest
    class index.
    """
    inv_log_q = 1.0 / np.log(probs.shape[2])
    if NUMBA_ENABLED:
        return _dispersion_loop(np.ascontiguousarray(probs, dtype=np.float64), inv_log_q)
    return _dispersion_numpy(probs, inv_log_q)


# ---------------------------------------------------------------------------
# connected components (8-connectivity, per-class)


def _renumber_first_encounter(raw):
    """Map raw nonnegative labels to 0..n-1 in row-major first-encounter order;
    negative entries pass through as -1."""
    flat = raw.ravel()
    valid = flat >= 0
    if not valid.any():
        return np.full(raw.shape, -1, dtype=np.int32), 0
    vals, first = np.unique(flat[valid], return_index=True)
    order = np.argsort(first, kind="stable")
    mapping = np.full(int(vals.max()) + 1, -1, dtype=np.int32)
    mapping[vals[order]] = np.arange(len(vals), dtype=np.int32)
    out = np.full(flat.shape, -1, dtype=np.int32)
    out[valid] = mapping[flat[valid]]
    return out.reshape(raw.shape), len(vals)


@njit(cache=True)
def _label_loop(classes, ignore_mask):
    h, w = classes.shape
    raw = np.full((h, w), -1, dtype=np.int64)
    parent = np.empty(h * w, dtype=np.int64)
    n_raw = 0
    for i in range(h):
        for j in range(w):
            if ignore_mask[i, j]:
                continue
            c = classes[i, j]
            best = -1
            # previously visited 8-neighbors: W, NW, N, NE
            for t in range(4):
                if t == 0:
                    ni, nj = i, j - 1
                elif t == 1:
                    ni, nj = i - 1, j - 1
                elif t == 2:
                    ni, nj = i - 1, j
                else:
                    ni, nj = i - 1, j + 1
                if ni < 0 or nj < 0 or nj >= w:
                    continue
                if ignore_mask[ni, nj] or classes[ni, nj] != c:
                    continue
                r = raw[ni, nj]
                while parent[r] != r:
                    r = parent[r]
                if best == -1:
                    best = r
                elif r != best:
                    if r < best:
                        parent[best] = r
                        best = r
                    else:
                        parent[r] = best
            if best == -1:
                best = n_raw
                parent[best] = best
                n_raw += 1
            raw[i, j] = best
    for i in range(h):
        for j in range(w):
            r = raw[i, j]
            if r < 0:
                continue
            while parent[r] != r:
                r = parent[r]
            raw[i, j] = r
    return raw


_STRUCT8 = np.ones((3, 3), dtype=bool)


def _label_numpy(classes, ignore_mask):
    raw = np.full(classes.shape, -1, dtype=np.int64)
    offset = 0
    for c in np.unique(classes[~ignore_mask]):
        mask = (classes == c) & ~ignore_mask
        lab, n = ndimage.label(mask, structure=_STRUCT8)
        raw[mask] = lab[mask] + offset - 1
        offset += n
    return raw


def label_components(classes, ignore_mask=None):
    """8-connected same-class components. Returns (segment_map, n_segments);
    segment ids are 0..n-1 in row-major first-encounter order, ignore pixels -1.
    """
    classes = np.ascontiguousarray(classes, dtype=np.int32)
    if ignore_mask is None:
        ignore_mask = np.zeros(classes.shape, dtype=bool)
    ignore_mask = np.ascontiguousarray(ignore_mask)
    if NUMBA_ENABLED:
        raw = _label_loop(classes, ignore_mask)
    else:
        raw = _label_numpy(classes, ignore_mask)
    return _renumber_first_encounter(raw)


# ---------------------------------------------------------------------------
# interior mask


@njit(cache=True)
def _interior_loop(seg):
    h, w = seg.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            s = seg[i, j]
            if s < 0:
                continue
            ok = True
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    if seg[i + di, j + dj] != s:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out[i, j] = True
    return out


def _interior_numpy(seg):
    padded = np.full((seg.shape[0] + 2, seg.shape[1] + 2), -2, dtype=seg.dtype)
    padded[1:-1, 1:-1] = seg
    out = seg >= 0
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            out &= shifted == seg
    return out


def interior_mask(segment_map):
    """Boolean mask of pixels whose eight neighbors all exist in-image and
    belong to the same segment. Image-border pixels are never interior."""
    seg = np.ascontiguousarray(segment_map, dtype=np.int32)
    if NUMBA_ENABLED:
        return _interior_loop(seg)
    return _interior_numpy(seg)


# ---------------------------------------------------------------------------
# l1-penalized logistic coordinate descent


@njit(cache=True)
def _penalized_objective(X, y, w, b, lam):
    n = X.shape[0]
    z = b + X @ w
    obj = 0.0
    for i in range(n):
        zi = z[i]
        obj += max(zi, 0.0) - y[i] * zi + np.log1p(np.exp(-abs(zi)))
    obj /= n
    for j in range(w.shape[0]):
        obj += lam * abs(w[j])
    return obj


@njit(cache=True)
def _logistic_cd_loop(X, y, w, b, lam, max_outer, tol_w, tol_obj):
    n, p = X.shape
    obj = _penalized_objective(X, y, w, b, lam)
    outers = 0
    converged = False
    s = np.empty(n, dtype=np.float64)
    r = np.empty(n, dtype=np.float64)
    for outer in range(max_outer):
        outers = outer + 1
        # quadratic (IRLS) approximation at the current point
        z = b + X @ w
        s_sum = 0.0
        for i in range(n):
            tau = 1.0 / (1.0 + np.exp(-z[i]))
            si = tau * (1.0 - tau)
            if si < 1e-6:
                si = 1e-6
            s[i] = si
            s_sum += si
            r[i] = (y[i] - tau) / si  # working residual of the working response
        a = np.empty(p, dtype=np.float64)
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += s[i] * X[i, j] * X[i, j]
            a[j] = acc / n
        w_new = w.copy()
        b_new = b
        # inner CD on the penalized weighted least squares subproblem
        for _inner in range(200):
            inner_delta = 0.0
            num = 0.0
            for i in range(n):
                num += s[i] * r[i]
            db = num / s_sum
            if db != 0.0:
                b_new += db
                for i in range(n):
                    r[i] -= db
            if abs(db) > inner_delta:
                inner_delta = abs(db)
            for j in range(p):
                if a[j] <= 0.0:
                    continue
                rho = 0.0
                for i in range(n):
                    rho += s[i] * X[i, j] * r[i]
                rho = rho / n + a[j] * w_new[j]
                if rho > lam:
                    wj = (rho - lam) / a[j]
                elif rho < -lam:
                    wj = (rho + lam) / a[j]
                else:
                    wj = 0.0
                d = wj - w_new[j]
                if d != 0.0:
                    w_new[j] = wj
                    for i in range(n):
                        r[i] -= d * X[i, j]
                if abs(d) > inner_delta:
                    inner_delta = abs(d)
            if inner_delta < 1e-10:
                break
        # halving line search keeps the true objective non-increasing
        step = 1.0
        obj_new = _penalized_objective(X, y, w_new, b_new, lam)
        for _half in range(30):
            if obj_new <= obj + 1e-15:
                break
            step *= 0.5
            w_new = w + step * (w_new - w)
            b_new = b + step * (b_new - b)
            obj_new = _penalized_objective(X, y, w_new, b_new, lam)
        max_delta = abs(b_new - b)
        for j in range(p):
            if abs(w_new[j] - w[j]) > max_delta:
                max_delta = abs(w_new[j] - w[j])
        dobj = obj - obj_new
        if obj_new <= obj:
            w = w_new
            b = b_new
            obj = obj_new
        if max_delta < tol_w or abs(dobj) < tol_obj:
            converged = True
            break
    return w, b, outers, converged


def _logistic_cd_numpy(X, y, w, b, lam, max_outer, tol_w, tol_obj):
    n, p = X.shape

    def objective(w_, b_):
        z = b_ + X @ w_
        return float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z))))) + lam * float(
            np.abs(w_).sum()
        )

    obj = objective(w, b)
    outers = 0
    converged = False
    for outer in range(max_outer):
        outers = outer + 1
        z = b + X @ w
        tau = 1.0 / (1.0 + np.exp(-z))
        s = np.maximum(tau * (1.0 - tau), 1e-6)
        r = (y - tau) / s
        a = (s[:, None] * X * X).sum(axis=0) / n
        s_sum = float(s.sum())
        w_new = w.copy()
        b_new = b
        for _inner in range(200):
            inner_delta = 0.0
            db = float(np.dot(s, r)) / s_sum
            if db != 0.0:
                b_new += db
                r -= db
            inner_delta = max(inner_delta, abs(db))
            for j in range(p):
                if a[j] <= 0.0:
                    continue
                rho = float(np.dot(s * X[:, j], r)) / n + a[j] * w_new[j]
                wj = np.sign(rho) * max(abs(rho) - lam, 0.0) / a[j]
                d = wj - w_new[j]
                if d != 0.0:
                    w_new[j] = wj
                    r -= d * X[:, j]
                inner_delta = max(inner_delta, abs(d))
            if inner_delta < 1e-10:
                break
        obj_new = objective(w_new, b_new)
        step = 1.0
        for _half in range(30):
            if obj_new <= obj + 1e-15:
                break
            step *= 0.5
            w_new = w + step * (w_new - w)
            b_new = b + step * (b_new - b)
            obj_new = objective(w_new, b_new)
        max_delta = max(abs(b_new - b), float(np.abs(w_new - w).max(initial=0.0)))
        dobj = obj - obj_new
        if obj_new <= obj:
            w, b, obj = w_new, b_new, obj_new
        if max_delta < tol_w or abs(dobj) < tol_obj:
            converged = True
            break
    return w, b, outers, converged


@njit(cache=True)
def _logistic_newton_loop(X, y, w, b, max_iter, tol_w, tol_obj):
    n, p = X.shape
    obj = _penalized_objective(X, y, w, b, 0.0)
    iters = 0
    converged = False
    for it in range(max_iter):
        iters = it + 1
        z = b + X @ w
        tau = 1.0 / (1.0 + np.exp(-z))
        grad = np.empty(p + 1, dtype=np.float64)
        grad[0] = np.sum(tau - y) / n
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += X[i, j] * (tau[i] - y[i])
            grad[j + 1] = acc / n
        gmax = np.max(np.abs(grad))
        if gmax < 1e-10:
            converged = True
            break
        s = tau * (1.0 - tau)
        hess = np.empty((p + 1, p + 1), dtype=np.float64)
        hess[0, 0] = np.sum(s) / n + 1e-10
        for j in range(p):
            acc = 0.0
            for i in range(n):
                acc += s[i] * X[i, j]
            hess[0, j + 1] = acc / n
            hess[j + 1, 0] = hess[0, j + 1]
        for j in range(p):
            for k in range(j, p):
                acc = 0.0
                for i in range(n):
                    acc += s[i] * X[i, j] * X[i, k]
                hess[j + 1, k + 1] = acc / n
                hess[k + 1, j + 1] = hess[j + 1, k + 1]
            hess[j + 1, j + 1] += 1e-10
        delta = np.linalg.solve(hess, grad)
        step = 1.0
        for _half in range(30):
            b_new = b - step * delta[0]
            w_new = w - step * delta[1:]
            obj_new = _penalized_objective(X, y, w_new, b_new, 0.0)
            if obj_new <= obj + 1e-15:
                break
            step *= 0.5
        max_delta = step * np.max(np.abs(delta))
        dobj = obj - obj_new
        if obj_new <= obj:
            w = w_new
            b = b_new
            obj = obj_new
        if max_delta < tol_w or abs(dobj) < tol_obj:
            converged = True
            break
    return w, b, iters, converged


def _logistic_newton_numpy(X, y, w, b, max_iter, tol_w, tol_obj):
    n, p = X.shape

    def objective(w_, b_):
        z = b_ + X @ w_
        return float(np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))))

    A = np.hstack((np.ones((n, 1)), X))
    obj = objective(w, b)
    iters = 0
    converged = False
    for it in range(max_iter):
        iters = it + 1
        z = b + X @ w
        tau = 1.0 / (1.0 + np.exp(-z))
        grad = A.T @ (tau - y) / n
        if float(np.abs(grad).max()) < 1e-10:
            converged = True
            break
        s = tau * (1.0 - tau)
        hess = (A * s[:, None]).T @ A / n + 1e-10 * np.eye(p + 1)
        delta = np.linalg.solve(hess, grad)
        step = 1.0
        for _half in range(30):
            b_new = b - step * delta[0]
            w_new = w - step * delta[1:]
            obj_new = objective(w_new, b_new)
            if obj_new <= obj + 1e-15:
                break
            step *= 0.5
        max_delta = step * float(np.abs(delta).max())
        dobj = obj - obj_new
        if obj_new <= obj:
            w, b, obj = w_new, float(b_new), obj_new
        if max_delta < tol_w or abs(dobj) < tol_obj:
            converged = True
            break
    return w, b, iters, converged


def logistic_cd(X, y, w0, b0, lam, max_sweeps=10_000, tol_w=1e-8, tol_obj=1e-10):
    """l1-penalized mean logistic loss solver: outer proximal-Newton (IRLS)
    steps, each solved by cyclic coordinate descent with soft-thresholding on
    the weighted least squares subproblem. A halving line search keeps the
    penalized objective non-increasing across outer iterations. With lam == 0
    the problem is smooth and ill-conditioned designs make coordinate descent
    crawl, so that case routes to a damped Newton iteration instead.

    Returns (weights, intercept, outer_iterations, converged); convergence is
    max parameter update < tol_w or objective change < tol_obj.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.array(w0, dtype=np.float64).copy()
    if lam == 0.0:
        fn = _logistic_newton_loop if NUMBA_ENABLED else _logistic_newton_numpy
        w, b, outers, converged = fn(X, y, w, float(b0), max_sweeps, tol_w, tol_obj)
    else:
        fn = _logistic_cd_loop if NUMBA_ENABLED else _logistic_cd_numpy
        w, b, outers, converged = fn(X, y, w, float(b0), float(lam), max_sweeps, tol_w, tol_obj)
    return w, float(b), int(outers), bool(converged)
