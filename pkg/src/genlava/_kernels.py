"""Compiled inner loops for the monotone accelerated proximal gradient solver.

The smooth part is accessed through a linear "image" of the iterate:

* ``MODE_IDENTITY`` / ``MODE_LOGISTIC``: image is ``eta = X @ theta`` (n-vector);
* ``MODE_GRAM``: identity link with ``G = X'X/n`` and ``c = X'y/n``; image is
  ``G @ theta`` (p-vector) and ``L(theta) = theta'G theta/2 - c'theta``.

Because the image is linear, the extrapolated point's image is a linear
combination of images already computed, so each iteration costs one forward
product per backtracking trial plus one transposed product.
"""

import math

import numpy as np
from numba import njit

MODE_IDENTITY = 0
MODE_LOGISTIC = 1
MODE_GRAM = 2


@njit(cache=True, nogil=True)
def _softplus(e):
    if e > 0:
        return e + math.log1p(math.exp(-e))
    return math.log1p(math.exp(e))


@njit(cache=True, nogil=True)
def _sigmoid(e):
    if e >= 0:
        return 1.0 / (1.0 + math.exp(-e))
    z = math.exp(e)
    return z / (1.0 + z)


@njit(cache=True, nogil=True)
def _image(mode, X, G, v):
    if mode == MODE_GRAM:
        return G @ v
    return X @ v


@njit(cache=True, nogil=True)
def _smooth_value(mode, y, c, theta, img):
    if mode == MODE_GRAM:
        return 0.5 * (theta @ img) - c @ theta
    n = img.shape[0]
    s = 0.0
    if mode == MODE_LOGISTIC:
        for i in range(n):
            s += _softplus(img[i]) - y[i] * img[i]
    else:
        for i in range(n):
            s += 0.5 * img[i] * img[i] - y[i] * img[i]
    return s / n


@njit(cache=True, nogil=True)
def _smooth_grad(mode, XT, y, c, img):
    if mode == MODE_GRAM:
        return img - c
    n = img.shape[0]
    r = np.empty(n)
    if mode == MODE_LOGISTIC:
        for i in range(n):
            r[i] = _sigmoid(img[i]) - y[i]
    else:
        for i in range(n):
            r[i] = img[i] - y[i]
    g = XT @ r
    return g / n


@njit(cache=True, nogil=True)
def _penalty(theta, lam1, lam2, lasso):
    s = 0.0
    if lasso:
        for v in theta:
            s += abs(v)
        return lam1 * s
    knot = lam1 / (2.0 * lam2)
    off = lam1 * lam1 / (4.0 * lam2)
    for v in theta:
        a = abs(v)
        if a <= knot:
            s += lam2 * v * v
        else:
            s += lam1 * a - off
    return s


@njit(cache=True, nogil=True)
def _prox(v, step, lam1, lam2, lasso):
    out = np.empty_like(v)
    shift = step * lam1
    if lasso:
        for j in range(v.shape[0]):
            a = abs(v[j])
            out[j] = 0.0 if a <= shift else v[j] - math.copysign(shift, v[j])
        return out
    bound = lam1 / (2.0 * lam2) + shift
    scale = 1.0 / (1.0 + 2.0 * step * lam2)
    for j in range(v.shape[0]):
        if abs(v[j]) <= bound:
            out[j] = v[j] * scale
        else:
            out[j] = v[j] - math.copysign(shift, v[j])
    return out


@njit(cache=True, nogil=True)
def kkt_theta(g, theta, lam1, lam2, lasso):
    """Stationarity residual of ``L(theta) + sum rho(theta_j)`` given ``g = grad L``."""
    worst = 0.0
    if lasso:
        for j in range(theta.shape[0]):
            if theta[j] != 0.0:
                r = abs(g[j] + math.copysign(lam1, theta[j]))
            else:
                r = max(0.0, abs(g[j]) - lam1)
            worst = max(worst, r)
        return worst
    knot = lam1 / (2.0 * lam2)
    for j in range(theta.shape[0]):
        b = min(max(theta[j], -knot), knot)
        worst = max(worst, abs(g[j] + 2.0 * lam2 * b))
    return worst


@njit(cache=True, nogil=True)
def apg_fit(mode, X, XT, y, G, c, lam1, lam2, lasso, theta0, step0,
            max_iter, tol, backtrack, restart, kkt_tol, trace):
    """Monotone FISTA with backtracking and function-value restart.

    Returns ``(theta, objective, iterations, converged, kkt, step, n_trace)``;
    ``trace[:n_trace]`` holds the objective at every accepted iterate.
    """
    x = theta0.copy()
    img_x = _image(mode, X, G, x)
    Fx = _smooth_value(mode, y, c, x, img_x) + _penalty(x, lam1, lam2, lasso)
    trace[0] = Fx
    n_trace = 1
    yk = x.copy()
    img_y = img_x.copy()
    t = 1.0
    step = step0
    flat = 0
    converged = False
    kkt = math.inf
    it = 0
    while it < max_iter:
        it += 1
        g = _smooth_grad(mode, XT, y, c, img_y)
        fy = _smooth_value(mode, y, c, yk, img_y)
        while True:
            z = _prox(yk - step * g, step, lam1, lam2, lasso)
            img_z = _image(mode, X, G, z)
            fz = _smooth_value(mode, y, c, z, img_z)
            d = z - yk
            bound = fy + g @ d + (d @ d) / (2.0 * step)
            if fz <= bound + 1e-13 * max(1.0, abs(fy)) or step < 1e-30:
                break
            step *= backtrack
        Fz = fz + _penalty(z, lam1, lam2, lasso)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if Fz <= Fx:
            # accepted: x_new = z, so y = z + (t-1)/t_new * (z - x)
            bcoef = (t - 1.0) / t_new
            yk = z + bcoef * (z - x)
            img_y = img_z + bcoef * (img_z - img_x)
            change = Fx - Fz
            x = z
            img_x = img_z
            Fx = Fz
            t = t_new
        else:
            change = 0.0
            if restart:
                yk = x.copy()
                img_y = img_x.copy()
                t = 1.0
            else:
                a = t / t_new
                yk = x + a * (z - x)
                img_y = img_x + a * (img_z - img_x)
                t = t_new
        trace[n_trace] = Fx
        n_trace += 1
        if change <= tol * max(1.0, abs(Fx)):
            flat += 1
        else:
            flat = 0
        if flat >= 3:
            gx = _smooth_grad(mode, XT, y, c, img_x)
            kkt = kkt_theta(gx, x, lam1, lam2, lasso)
            if kkt <= kkt_tol:
                converged = True
                break
        if step < 1e-30:
            break
    if not converged:
        gx = _smooth_grad(mode, XT, y, c, img_x)
        kkt = kkt_theta(gx, x, lam1, lam2, lasso)
    return x, Fx, it, converged, kkt, step, n_trace


@njit(cache=True, nogil=True)
def apg_path(mode, X, XT, y, G, c, lam1s, lam2s, lasso, theta0, step0,
             max_iter, tol, backtrack, restart, kkt_rel):
    """Warm-started fits along a sequence of ``(lambda1, lambda2)`` pairs."""
    L = lam1s.shape[0]
    p = theta0.shape[0]
    thetas = np.empty((L, p))
    objs = np.empty(L)
    iters = np.empty(L, dtype=np.int64)
    conv = np.empty(L, dtype=np.bool_)
    kkts = np.empty(L)
    trace = np.empty(max_iter + 1)
    theta = theta0.copy()
    step = step0
    for k in range(L):
        kkt_tol = kkt_rel * max(1.0, lam1s[k])
        if k > 0:
            # let the step grow back between warm starts; backtracking re-shrinks it
            step = step / backtrack
        theta, obj, it, ok, kkt, step, _ = apg_fit(
            mode, X, XT, y, G, c, lam1s[k], lam2s[k], lasso, theta, step,
            max_iter, tol, backtrack, restart, kkt_tol, trace)
        thetas[k] = theta
        objs[k] = obj
        iters[k] = it
        conv[k] = ok
        kkts[k] = kkt
    return thetas, objs, iters, conv, kkts, step
