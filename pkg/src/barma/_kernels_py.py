"""Pure-Python reference kernels for the conditional-mean recursion.

Semantics here are the contract; the Cython backend must match bitwise up to
floating-point associativity. Link codes: 0 = logit, 1 = probit, 2 = cloglog.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

_SQRT2 = math.sqrt(2.0)
MA_BOUND = 0.9999


def _linkinv(eta: float, link: int) -> float:
    if link == 0:
        if eta >= 0.0:
            return 1.0 / (1.0 + math.exp(-eta))
        e = math.exp(eta)
        return e / (1.0 + e)
    if link == 1:
        return 0.5 * math.erfc(-eta / _SQRT2)
    return -math.expm1(-math.exp(eta))


def filter_series(
    x: np.ndarray,
    beta: float,
    phi: np.ndarray,
    ar_lags: np.ndarray,
    theta: np.ndarray,
    ma_lags: np.ndarray,
    m: int,
    link: int,
    eta_lo: float,
    eta_hi: float,
):
    """Run the conditional-mean recursion over the predictor-scale series x.

    Returns (eta, mu, r, n_clamped). eta and mu are NaN for the presample
    t < m; r is zero there. The linear predictor is clamped to [eta_lo,
    eta_hi] so mu never degenerates to a boundary.
    """
    n = x.shape[0]
    eta = np.full(n, np.nan)
    mu = np.full(n, np.nan)
    r = np.zeros(n)
    n_clamped = 0
    for t in range(m, n):
        e = beta
        for k in range(ar_lags.shape[0]):
            e += phi[k] * x[t - ar_lags[k]]
        for k in range(ma_lags.shape[0]):
            e += theta[k] * r[t - ma_lags[k]]
        if e < eta_lo:
            e = eta_lo
            n_clamped += 1
        elif e > eta_hi:
            e = eta_hi
            n_clamped += 1
        eta[t] = e
        mu[t] = _linkinv(e, link)
        r[t] = x[t] - e
    return eta, mu, r, n_clamped


def loglik(
    x: np.ndarray,
    ly: np.ndarray,
    l1y: np.ndarray,
    beta: float,
    phi: np.ndarray,
    ar_lags: np.ndarray,
    theta: np.ndarray,
    ma_lags: np.ndarray,
    prec: float,
    m: int,
    link: int,
    eta_lo: float,
    eta_hi: float,
    penalize: bool = False,
) -> float:
    """Conditional log-likelihood given the first m observations.

    ly and l1y are log(y) and log(1-y) precomputed once per series. With
    penalize=True a smooth quadratic wall on predictor-clamp excess is
    subtracted; only optimizer objectives use it.
    """
    n = x.shape[0]
    r = np.zeros(n)
    lg_prec = math.lgamma(prec)
    ll = 0.0
    pen = 0.0
    for t in range(m, n):
        e = beta
        for k in range(ar_lags.shape[0]):
            e += phi[k] * x[t - ar_lags[k]]
        for k in range(ma_lags.shape[0]):
            e += theta[k] * r[t - ma_lags[k]]
        raw = e
        if e < eta_lo:
            e = eta_lo
            pen += (eta_lo - raw) ** 2
        elif e > eta_hi:
            e = eta_hi
            pen += (raw - eta_hi) ** 2
        mu = _linkinv(e, link)
        if mu < 1e-12:
            mu = 1e-12
        elif mu > 1.0 - 1e-12:
            mu = 1.0 - 1e-12
        r[t] = x[t] - e
        a = mu * prec
        b = (1.0 - mu) * prec
        ll += (
            lg_prec
            - math.lgamma(a)
            - math.lgamma(b)
            + (a - 1.0) * ly[t]
            + (b - 1.0) * l1y[t]
        )
    if penalize:
        ll -= 1e3 * pen
    return ll


def _nll_vec(
    vec, x, ly, l1y, ar_lags, ma_lags, m, link, eta_lo, eta_hi, intercept
) -> float:
    p = ar_lags.shape[0]
    q = ma_lags.shape[0]
    off = 1 if intercept else 0
    beta = vec[0] if intercept else 0.0
    phi = vec[off : off + p]
    theta = vec[off + p : off + p + q]
    lp = vec[off + p + q]
    if lp > 25.0:
        lp = 25.0
    prec = math.exp(lp)
    return -loglik(
        x, ly, l1y, beta, phi, ar_lags, theta, ma_lags, prec, m, link, eta_lo,
        eta_hi, True,
    )


def bfgs_fit(
    vec0: np.ndarray,
    x: np.ndarray,
    ly: np.ndarray,
    l1y: np.ndarray,
    ar_lags: np.ndarray,
    ma_lags: np.ndarray,
    m: int,
    link: int,
    eta_lo: float,
    eta_hi: float,
    intercept: bool,
    gtol: float,
    maxiter: int,
    lp_lo: float,
    lp_hi: float,
):
    """BFGS with backtracking line search; mirror of the compiled version.

    MA coefficients are optimized through theta = MA_BOUND * tanh(u) so the
    error filter stays invertible. Returns
    (vec_natural, nll, n_iter, n_fev, grad_inf, converged).
    """
    args = (x, ly, l1y, ar_lags, ma_lags, m, link, eta_lo, eta_hi, intercept)
    k = vec0.shape[0]
    ma_lo = (1 if intercept else 0) + ar_lags.shape[0]
    ma_hi = ma_lo + ma_lags.shape[0]
    nfev = 0

    def to_natural(u):
        v = u.copy()
        v[ma_lo:ma_hi] = MA_BOUND * np.tanh(u[ma_lo:ma_hi])
        return v

    def fval(u):
        nonlocal nfev
        nfev += 1
        return _nll_vec(to_natural(u), *args)

    def grad_at(u):
        nonlocal nfev
        g = np.empty(k)
        work = u.copy()
        for i in range(k):
            h = 1e-6 * max(1.0, abs(u[i]))
            work[i] = u[i] + h
            fp = _nll_vec(to_natural(work), *args)
            work[i] = u[i] - h
            fm = _nll_vec(to_natural(work), *args)
            work[i] = u[i]
            g[i] = (fp - fm) / (2.0 * h)
        nfev += 2 * k
        return g

    def proj_grad_inf(u, g):
        gp = g.copy()
        if (u[-1] >= lp_hi and gp[-1] < 0.0) or (u[-1] <= lp_lo and gp[-1] > 0.0):
            gp[-1] = 0.0
        return float(np.max(np.abs(gp)))

    xcur = vec0.copy()
    xcur[ma_lo:ma_hi] = np.arctanh(
        np.clip(xcur[ma_lo:ma_hi] / MA_BOUND, -0.99999, 0.99999)
    )
    xcur[-1] = min(max(xcur[-1], lp_lo), lp_hi)

    f = fval(xcur)
    g = grad_at(xcur)
    H = np.eye(k)
    it = 0
    converged = False
    while it < maxiter:
        ginf = proj_grad_inf(xcur, g)
        if ginf <= gtol * max(1.0, abs(f)):
            converged = True
            break
        d = -H @ g
        dg = float(d @ g)
        if not math.isfinite(dg) or dg >= 0.0:
            H = np.eye(k)
            d = -g
            dg = -float(g @ g)
        t = 1.0
        ls_ok = False
        while t >= 1e-13:
            xnew = xcur + t * d
            xnew[-1] = min(max(xnew[-1], lp_lo), lp_hi)
            fnew = fval(xnew)
            if math.isfinite(fnew) and fnew <= f + 1e-4 * t * dg:
                ls_ok = True
                break
            t *= 0.5
        if not ls_ok:
            # retry along steepest descent with a fresh Hessian
            H = np.eye(k)
            d = -g
            dg = -float(g @ g)
            t = 1.0
            while t >= 1e-13:
                xnew = xcur + t * d
                xnew[-1] = min(max(xnew[-1], lp_lo), lp_hi)
                fnew = fval(xnew)
                if math.isfinite(fnew) and fnew <= f + 1e-4 * t * dg:
                    ls_ok = True
                    break
                t *= 0.5
        if not ls_ok:
            break
        gnew = grad_at(xnew)
        s = xnew - xcur
        yv = gnew - g
        sy = float(s @ yv)
        if it == 0 and sy > 0.0:
            yy = float(yv @ yv)
            if yy > 0.0:
                H = np.eye(k) * (sy / yy)
        if sy > 1e-12:
            hy = H @ yv
            yhy = float(yv @ hy)
            rho = 1.0 / sy
            H += (1.0 + rho * yhy) * rho * np.outer(s, s) - rho * (
                np.outer(s, hy) + np.outer(hy, s)
            )
        xcur, f, g = xnew, fnew, gnew
        it += 1
    ginf = proj_grad_inf(xcur, g)
    if ginf <= gtol * max(1.0, abs(f)):
        converged = True
    return to_natural(xcur), f, it, nfev, ginf, bool(converged)


def nll_grad(
    vec: np.ndarray,
    x: np.ndarray,
    ly: np.ndarray,
    l1y: np.ndarray,
    ar_lags: np.ndarray,
    ma_lags: np.ndarray,
    m: int,
    link: int,
    eta_lo: float,
    eta_hi: float,
    intercept: bool,
):
    """Negative log-likelihood and its central-difference gradient.

    vec holds (intercept?, AR coefficients, MA coefficients, log precision);
    difference step is 1e-6 * max(1, |v_i|) per coordinate.
    """
    k = vec.shape[0]
    f0 = _nll_vec(vec, x, ly, l1y, ar_lags, ma_lags, m, link, eta_lo, eta_hi, intercept)
    grad = np.empty(k)
    work = vec.copy()
    for i in range(k):
        h = 1e-6 * max(1.0, abs(vec[i]))
        work[i] = vec[i] + h
        fp = _nll_vec(
            work, x, ly, l1y, ar_lags, ma_lags, m, link, eta_lo, eta_hi, intercept
        )
        work[i] = vec[i] - h
        fm = _nll_vec(
            work, x, ly, l1y, ar_lags, ma_lags, m, link, eta_lo, eta_hi, intercept
        )
        work[i] = vec[i]
        grad[i] = (fp - fm) / (2.0 * h)
    return f0, grad
