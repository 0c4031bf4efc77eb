# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the conditional-mean recursion.

Mirrors barma._kernels_py; that module is the semantic reference. The hot
path is the likelihood evaluated thousands of times per bootstrap refit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atanh, erfc, exp, expm1, fabs, lgamma, log, sqrt, tanh

cnp.import_array()

BACKEND_NAME = "cython"

cdef double SQRT2 = sqrt(2.0)
cdef double MA_BOUND = 0.9999


cdef inline double _linkinv(double eta, int link) noexcept nogil:
    cdef double e
    if link == 0:
        if eta >= 0.0:
            return 1.0 / (1.0 + exp(-eta))
        e = exp(eta)
        return e / (1.0 + e)
    if link == 1:
        return 0.5 * erfc(-eta / SQRT2)
    return -expm1(-exp(eta))


cdef double _loglik_c(
    const double* x,
    const double* ly,
    const double* l1y,
    double beta,
    const double* phi,
    const long* ar_lags,
    int p,
    const double* theta,
    const long* ma_lags,
    int q,
    double prec,
    int m,
    int n,
    int link,
    double eta_lo,
    double eta_hi,
    double* rbuf,
    bint penalize,
) noexcept nogil:
    # penalize=1 subtracts a smooth quadratic wall on predictor-clamp excess,
    # steering the optimizer away from divergent MA filter regions; the
    # reported likelihood always uses penalize=0.
    cdef int t, k
    cdef double e, mu, a, b, raw
    cdef double lg_prec = lgamma(prec)
    cdef double ll = 0.0
    cdef double pen = 0.0
    for t in range(n):
        rbuf[t] = 0.0
    for t in range(m, n):
        e = beta
        for k in range(p):
            e += phi[k] * x[t - ar_lags[k]]
        for k in range(q):
            e += theta[k] * rbuf[t - ma_lags[k]]
        raw = e
        if e < eta_lo:
            e = eta_lo
            pen += (eta_lo - raw) * (eta_lo - raw)
        elif e > eta_hi:
            e = eta_hi
            pen += (raw - eta_hi) * (raw - eta_hi)
        mu = _linkinv(e, link)
        if mu < 1e-12:
            mu = 1e-12
        elif mu > 1.0 - 1e-12:
            mu = 1.0 - 1e-12
        rbuf[t] = x[t] - e
        a = mu * prec
        b = (1.0 - mu) * prec
        ll += lg_prec - lgamma(a) - lgamma(b) + (a - 1.0) * ly[t] + (b - 1.0) * l1y[t]
    if penalize:
        ll -= 1e3 * pen
    return ll


def filter_series(
    double[::1] x,
    double beta,
    double[::1] phi,
    long[::1] ar_lags,
    double[::1] theta,
    long[::1] ma_lags,
    int m,
    int link,
    double eta_lo,
    double eta_hi,
):
    """Recursion returning (eta, mu, r, n_clamped); NaN presample for eta/mu."""
    cdef int n = x.shape[0]
    cdef int p = ar_lags.shape[0]
    cdef int q = ma_lags.shape[0]
    eta_arr = np.full(n, np.nan)
    mu_arr = np.full(n, np.nan)
    r_arr = np.zeros(n)
    cdef double[::1] eta = eta_arr
    cdef double[::1] mu = mu_arr
    cdef double[::1] r = r_arr
    cdef int t, k, n_clamped = 0
    cdef double e
    for t in range(m, n):
        e = beta
        for k in range(p):
            e += phi[k] * x[t - ar_lags[k]]
        for k in range(q):
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
    return eta_arr, mu_arr, r_arr, n_clamped


def loglik(
    double[::1] x,
    double[::1] ly,
    double[::1] l1y,
    double beta,
    double[::1] phi,
    long[::1] ar_lags,
    double[::1] theta,
    long[::1] ma_lags,
    double prec,
    int m,
    int link,
    double eta_lo,
    double eta_hi,
):
    cdef int n = x.shape[0]
    cdef int p = ar_lags.shape[0]
    cdef int q = ma_lags.shape[0]
    rbuf_arr = np.empty(n)
    cdef double[::1] rbuf = rbuf_arr
    cdef double ll
    cdef const double* phi_p = NULL
    cdef const double* theta_p = NULL
    cdef const long* arl_p = NULL
    cdef const long* mal_p = NULL
    if p > 0:
        phi_p = &phi[0]
        arl_p = &ar_lags[0]
    if q > 0:
        theta_p = &theta[0]
        mal_p = &ma_lags[0]
    with nogil:
        ll = _loglik_c(
            &x[0], &ly[0], &l1y[0], beta, phi_p, arl_p, p, theta_p, mal_p, q,
            prec, m, n, link, eta_lo, eta_hi, &rbuf[0], 0,
        )
    return ll


cdef double _nll_vec_c(
    const double* vec,
    const double* x,
    const double* ly,
    const double* l1y,
    const long* ar_lags,
    int p,
    const long* ma_lags,
    int q,
    int m,
    int n,
    int link,
    double eta_lo,
    double eta_hi,
    int intercept,
    double* rbuf,
) noexcept nogil:
    cdef double beta = vec[0] if intercept else 0.0
    cdef int off = 1 if intercept else 0
    cdef double lp = vec[off + p + q]
    if lp > 25.0:
        lp = 25.0
    cdef double prec = exp(lp)
    return -_loglik_c(
        x, ly, l1y, beta, vec + off, ar_lags, p, vec + off + p, ma_lags, q,
        prec, m, n, link, eta_lo, eta_hi, rbuf, 1,
    )


def bfgs_fit(
    double[::1] vec0,
    double[::1] x,
    double[::1] ly,
    double[::1] l1y,
    long[::1] ar_lags,
    long[::1] ma_lags,
    int m,
    int link,
    double eta_lo,
    double eta_hi,
    bint intercept,
    double gtol,
    int maxiter,
    double lp_lo,
    double lp_hi,
):
    """BFGS with backtracking line search on the transformed parameters.

    MA coefficients are optimized through theta = MA_BOUND * tanh(u) so the
    error filter stays invertible; precision through log(phi) clamped to
    [lp_lo, lp_hi]. Line-search trials evaluate the objective only; central
    difference gradients (step 1e-6 scaled) are taken at accepted points.
    Returns (vec_natural, nll, n_iter, n_fev, grad_inf, converged).
    """
    cdef int n = x.shape[0]
    cdef int p = ar_lags.shape[0]
    cdef int q = ma_lags.shape[0]
    cdef int k = vec0.shape[0]
    rbuf_arr = np.empty(n)
    scratch_arr = np.empty(k)
    xcur_arr = np.asarray(vec0).copy()
    xnew_arr = np.empty(k)
    g_arr = np.empty(k)
    gnew_arr = np.empty(k)
    d_arr = np.empty(k)
    s_arr = np.empty(k)
    yv_arr = np.empty(k)
    hy_arr = np.empty(k)
    H_arr = np.eye(k)
    cdef double[::1] rbuf = rbuf_arr
    cdef double[::1] scratch = scratch_arr
    cdef double[::1] xcur = xcur_arr
    cdef double[::1] xnew = xnew_arr
    cdef double[::1] g = g_arr
    cdef double[::1] gnew = gnew_arr
    cdef double[::1] d = d_arr
    cdef double[::1] s = s_arr
    cdef double[::1] yv = yv_arr
    cdef double[::1] hy = hy_arr
    cdef double[:, ::1] H = H_arr
    cdef const long* arl_p = &ar_lags[0] if p > 0 else NULL
    cdef const long* mal_p = &ma_lags[0] if q > 0 else NULL
    cdef int ma_lo = (1 if intercept else 0) + p
    cdef int ma_hi = ma_lo + q
    cdef double f, fnew, dg, t, tmp, sy, yHy, rho, ginf, h, fp, fm
    cdef int it = 0, nfev = 0, i, j
    cdef bint converged = False, ls_ok

    # to u-space
    for i in range(ma_lo, ma_hi):
        tmp = xcur[i] / MA_BOUND
        if tmp > 0.99999:
            tmp = 0.99999
        elif tmp < -0.99999:
            tmp = -0.99999
        xcur[i] = atanh(tmp)
    if xcur[k - 1] < lp_lo:
        xcur[k - 1] = lp_lo
    elif xcur[k - 1] > lp_hi:
        xcur[k - 1] = lp_hi

    with nogil:
        f = _nll_u_c(&xcur[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                     m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                     &rbuf[0], &scratch[0])
        nfev += 1
        for i in range(k):
            h = 1e-6
            if fabs(xcur[i]) > 1.0:
                h = 1e-6 * fabs(xcur[i])
            tmp = xcur[i]
            xcur[i] = tmp + h
            fp = _nll_u_c(&xcur[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                          m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                          &rbuf[0], &scratch[0])
            xcur[i] = tmp - h
            fm = _nll_u_c(&xcur[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                          m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                          &rbuf[0], &scratch[0])
            xcur[i] = tmp
            g[i] = (fp - fm) / (2.0 * h)
            nfev += 2

        while it < maxiter:
            ginf = 0.0
            for i in range(k):
                h = g[i]
                if i == k - 1:
                    if (xcur[i] >= lp_hi and h < 0.0) or (xcur[i] <= lp_lo and h > 0.0):
                        h = 0.0
                if fabs(h) > ginf:
                    ginf = fabs(h)
            if ginf <= gtol * (1.0 if fabs(f) < 1.0 else fabs(f)):
                converged = True
                break

            dg = 0.0
            for i in range(k):
                d[i] = 0.0
                for j in range(k):
                    d[i] -= H[i, j] * g[j]
                dg += d[i] * g[i]
            if not (dg == dg) or dg >= 0.0:
                dg = 0.0
                for i in range(k):
                    for j in range(k):
                        H[i, j] = 1.0 if i == j else 0.0
                    d[i] = -g[i]
                    dg -= g[i] * g[i]

            t = 1.0
            ls_ok = False
            while t >= 1e-13:
                for i in range(k):
                    xnew[i] = xcur[i] + t * d[i]
                if xnew[k - 1] < lp_lo:
                    xnew[k - 1] = lp_lo
                elif xnew[k - 1] > lp_hi:
                    xnew[k - 1] = lp_hi
                fnew = _nll_u_c(&xnew[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                                m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                                &rbuf[0], &scratch[0])
                nfev += 1
                if fnew == fnew and fnew <= f + 1e-4 * t * dg:
                    ls_ok = True
                    break
                t *= 0.5
            if not ls_ok:
                # retry along steepest descent with a fresh Hessian
                dg = 0.0
                for i in range(k):
                    for j in range(k):
                        H[i, j] = 1.0 if i == j else 0.0
                    d[i] = -g[i]
                    dg -= g[i] * g[i]
                t = 1.0
                while t >= 1e-13:
                    for i in range(k):
                        xnew[i] = xcur[i] + t * d[i]
                    if xnew[k - 1] < lp_lo:
                        xnew[k - 1] = lp_lo
                    elif xnew[k - 1] > lp_hi:
                        xnew[k - 1] = lp_hi
                    fnew = _nll_u_c(&xnew[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                                    m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                                    &rbuf[0], &scratch[0])
                    nfev += 1
                    if fnew == fnew and fnew <= f + 1e-4 * t * dg:
                        ls_ok = True
                        break
                    t *= 0.5
            if not ls_ok:
                break

            for i in range(k):
                h = 1e-6
                if fabs(xnew[i]) > 1.0:
                    h = 1e-6 * fabs(xnew[i])
                tmp = xnew[i]
                xnew[i] = tmp + h
                fp = _nll_u_c(&xnew[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                              m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                              &rbuf[0], &scratch[0])
                xnew[i] = tmp - h
                fm = _nll_u_c(&xnew[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q,
                              m, n, link, eta_lo, eta_hi, intercept, ma_lo, ma_hi,
                              &rbuf[0], &scratch[0])
                xnew[i] = tmp
                gnew[i] = (fp - fm) / (2.0 * h)
                nfev += 2

            sy = 0.0
            for i in range(k):
                s[i] = xnew[i] - xcur[i]
                yv[i] = gnew[i] - g[i]
                sy += s[i] * yv[i]
            if it == 0 and sy > 0.0:
                yHy = 0.0
                for i in range(k):
                    yHy += yv[i] * yv[i]
                if yHy > 0.0:
                    for i in range(k):
                        H[i, i] = sy / yHy
            if sy > 1e-12:
                for i in range(k):
                    hy[i] = 0.0
                    for j in range(k):
                        hy[i] += H[i, j] * yv[j]
                yHy = 0.0
                for i in range(k):
                    yHy += yv[i] * hy[i]
                rho = 1.0 / sy
                for i in range(k):
                    for j in range(k):
                        H[i, j] += (
                            (1.0 + rho * yHy) * rho * s[i] * s[j]
                            - rho * (s[i] * hy[j] + hy[i] * s[j])
                        )
            for i in range(k):
                xcur[i] = xnew[i]
                g[i] = gnew[i]
            f = fnew
            it += 1

        ginf = 0.0
        for i in range(k):
            h = g[i]
            if i == k - 1:
                if (xcur[i] >= lp_hi and h < 0.0) or (xcur[i] <= lp_lo and h > 0.0):
                    h = 0.0
            if fabs(h) > ginf:
                ginf = fabs(h)
        if ginf <= gtol * (1.0 if fabs(f) < 1.0 else fabs(f)):
            converged = True

    # back to natural space
    for i in range(ma_lo, ma_hi):
        xcur[i] = MA_BOUND * tanh(xcur[i])
    return xcur_arr, f, it, nfev, ginf, bool(converged)


cdef double _nll_u_c(
    const double* vec_u,
    const double* x,
    const double* ly,
    const double* l1y,
    const long* ar_lags,
    int p,
    const long* ma_lags,
    int q,
    int m,
    int n,
    int link,
    double eta_lo,
    double eta_hi,
    int intercept,
    int ma_lo,
    int ma_hi,
    double* rbuf,
    double* scratch,
) noexcept nogil:
    # u-space objective: MA coordinates enter as MA_BOUND * tanh(u);
    # layout is [intercept?, phi.., u.., logprec] so logprec sits at ma_hi
    cdef int i
    for i in range(ma_lo):
        scratch[i] = vec_u[i]
    for i in range(ma_lo, ma_hi):
        scratch[i] = MA_BOUND * tanh(vec_u[i])
    scratch[ma_hi] = vec_u[ma_hi]
    return _nll_vec_c(
        scratch, x, ly, l1y, ar_lags, p, ma_lags, q, m, n, link,
        eta_lo, eta_hi, intercept, rbuf,
    )


def nll_grad(
    double[::1] vec,
    double[::1] x,
    double[::1] ly,
    double[::1] l1y,
    long[::1] ar_lags,
    long[::1] ma_lags,
    int m,
    int link,
    double eta_lo,
    double eta_hi,
    bint intercept,
):
    """Negative log-likelihood and central-difference gradient (step 1e-6 scaled)."""
    cdef int n = x.shape[0]
    cdef int p = ar_lags.shape[0]
    cdef int q = ma_lags.shape[0]
    cdef int k = vec.shape[0]
    rbuf_arr = np.empty(n)
    work_arr = np.asarray(vec).copy()
    grad_arr = np.empty(k)
    cdef double[::1] rbuf = rbuf_arr
    cdef double[::1] work = work_arr
    cdef double[::1] grad = grad_arr
    cdef const long* arl_p = &ar_lags[0] if p > 0 else NULL
    cdef const long* mal_p = &ma_lags[0] if q > 0 else NULL
    cdef double f0, fp, fm, h
    cdef int i
    with nogil:
        f0 = _nll_vec_c(
            &work[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q, m, n, link,
            eta_lo, eta_hi, intercept, &rbuf[0],
        )
        for i in range(k):
            h = 1e-6
            if fabs(vec[i]) > 1.0:
                h = 1e-6 * fabs(vec[i])
            work[i] = vec[i] + h
            fp = _nll_vec_c(
                &work[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q, m, n,
                link, eta_lo, eta_hi, intercept, &rbuf[0],
            )
            work[i] = vec[i] - h
            fm = _nll_vec_c(
                &work[0], &x[0], &ly[0], &l1y[0], arl_p, p, mal_p, q, m, n,
                link, eta_lo, eta_hi, intercept, &rbuf[0],
            )
            work[i] = vec[i]
            grad[i] = (fp - fm) / (2.0 * h)
    return f0, grad_arr
