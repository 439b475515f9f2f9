"""Compiled numeric kernels for the single-shooting cost and its adjoint
gradient.

Everything here works on flat float64 arrays prepared by :mod:`mavmpc.ocp`;
the public API lives there.  Layouts:

    prm      (8,)  drag x/y/z, tau_r, tau_p, k_r, k_p, g
    ctypes   (m,)  constraint codes (0 halfspace, 1 ellipsoid, 2 cylinder)
    cpar     (n_t, m, 10)  constraint parameters, n_t = 1 or horizon+1
    obs_ptr  (n_obs+1,)    CSR-style slices of the constraint rows
    x_ref    (a, 8), u_ref (b, 3)  with a, b = 1 (constant) or horizon+1

A gradient call costs one forward sweep (states, stage gradients, step
Jacobians) plus one backward sweep of 8x8 transpose products, i.e. about two
trajectory integrations.
"""

import math

import numpy as np
from numba import njit

EULER = 0
RK4 = 1


@njit(cache=True, inline="always")
def _deriv(x, u, prm, out):
    cr = math.cos(x[6])
    sr = math.sin(x[6])
    cp = math.cos(x[7])
    sp = math.sin(x[7])
    t = u[0]
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = t * sp * cr - prm[0] * x[3]
    out[4] = -t * sr - prm[1] * x[4]
    out[5] = t * cp * cr - prm[7] - prm[2] * x[5]
    out[6] = (prm[5] * u[1] - x[6]) / prm[3]
    out[7] = (prm[6] * u[2] - x[7]) / prm[4]


@njit(cache=True)
def _step(x, u, prm, dt, method, out):
    k1 = np.empty(8)
    _deriv(x, u, prm, k1)
    if method == EULER:
        for i in range(8):
            out[i] = x[i] + dt * k1[i]
        return
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    _deriv(tmp, u, prm, k2)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    _deriv(tmp, u, prm, k3)
    for i in range(8):
        tmp[i] = x[i] + dt * k3[i]
    _deriv(tmp, u, prm, k4)
    for i in range(8):
        out[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, inline="always")
def _cont_jac(x, u, prm, a, b):
    cr = math.cos(x[6])
    sr = math.sin(x[6])
    cp = math.cos(x[7])
    sp = math.sin(x[7])
    t = u[0]
    a[:, :] = 0.0
    b[:, :] = 0.0
    a[0, 3] = 1.0
    a[1, 4] = 1.0
    a[2, 5] = 1.0
    a[3, 3] = -prm[0]
    a[4, 4] = -prm[1]
    a[5, 5] = -prm[2]
    a[3, 6] = -t * sp * sr
    a[4, 6] = -t * cr
    a[5, 6] = -t * cp * sr
    a[3, 7] = t * cp * cr
    a[5, 7] = -t * sp * cr
    a[6, 6] = -1.0 / prm[3]
    a[7, 7] = -1.0 / prm[4]
    b[3, 0] = sp * cr
    b[4, 0] = -sr
    b[5, 0] = cp * cr
    b[6, 1] = prm[5] / prm[3]
    b[7, 2] = prm[6] / prm[4]


@njit(cache=True)
def _step_jac(x, u, prm, dt, method, a_out, b_out):
    if method == EULER:
        _cont_jac(x, u, prm, a_out, b_out)
        for i in range(8):
            for j in range(8):
                a_out[i, j] *= dt
            a_out[i, i] += 1.0
            for j in range(3):
                b_out[i, j] *= dt
        return
    eye = np.eye(8)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    tmp = np.empty(8)
    _deriv(x, u, prm, k1)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    x2 = tmp.copy()
    _deriv(x2, u, prm, k2)
    for i in range(8):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    x3 = tmp.copy()
    _deriv(x3, u, prm, k3)
    for i in range(8):
        tmp[i] = x[i] + dt * k3[i]
    x4 = tmp.copy()
    j1a = np.empty((8, 8))
    j1b = np.empty((8, 3))
    j2a = np.empty((8, 8))
    j2b = np.empty((8, 3))
    j3a = np.empty((8, 8))
    j3b = np.empty((8, 3))
    j4a = np.empty((8, 8))
    j4b = np.empty((8, 3))
    _cont_jac(x, u, prm, j1a, j1b)
    _cont_jac(x2, u, prm, j2a, j2b)
    _cont_jac(x3, u, prm, j3a, j3b)
    _cont_jac(x4, u, prm, j4a, j4b)
    dk1 = j1a
    dk2 = j2a @ (eye + 0.5 * dt * dk1)
    dk3 = j3a @ (eye + 0.5 * dt * dk2)
    dk4 = j4a @ (eye + dt * dk3)
    dk1u = j1b
    dk2u = j2a @ (0.5 * dt * dk1u) + j2b
    dk3u = j3a @ (0.5 * dt * dk2u) + j3b
    dk4u = j4a @ (dt * dk3u) + j4b
    for i in range(8):
        for j in range(8):
            a_out[i, j] = eye[i, j] + (dt / 6.0) * (
                dk1[i, j] + 2.0 * dk2[i, j] + 2.0 * dk3[i, j] + dk4[i, j])
        for j in range(3):
            b_out[i, j] = (dt / 6.0) * (
                dk1u[i, j] + 2.0 * dk2u[i, j] + 2.0 * dk3u[i, j] + dk4u[i, j])


@njit(cache=True)
def shoot_kernel(uflat, x0, prm, dt, n, method, xs):
    """Forward trajectory; returns False if any state goes non-finite."""
    for i in range(8):
        xs[0, i] = x0[i]
    for k in range(n):
        _step(xs[k], uflat[3 * k:3 * k + 3], prm, dt, method, xs[k + 1])
        for i in range(8):
            if not math.isfinite(xs[k + 1, i]):
                return False
    return True


@njit(cache=True, inline="always")
def _con_value(tc, par, p):
    if tc == 0:
        return par[3] - (par[0] * p[0] + par[1] * p[1] + par[2] * p[2])
    elif tc == 1:
        d0 = p[0] - par[0]
        d1 = p[1] - par[1]
        d2 = p[2] - par[2]
        q = (par[3] * d0 * d0 + par[6] * d1 * d1 + par[8] * d2 * d2
             + 2.0 * (par[4] * d0 * d1 + par[5] * d0 * d2 + par[7] * d1 * d2))
        return 1.0 - q
    else:
        ax = int(par[0])
        if ax == 0:
            du = p[1] - par[1]
            dw = p[2] - par[2]
        elif ax == 1:
            du = p[0] - par[1]
            dw = p[2] - par[2]
        else:
            du = p[0] - par[1]
            dw = p[1] - par[2]
        return par[3] * par[3] - du * du - dw * dw


@njit(cache=True, inline="always")
def _con_grad_scaled(tc, par, p, s, g):
    if tc == 0:
        g[0] -= s * par[0]
        g[1] -= s * par[1]
        g[2] -= s * par[2]
    elif tc == 1:
        d0 = p[0] - par[0]
        d1 = p[1] - par[1]
        d2 = p[2] - par[2]
        g[0] -= 2.0 * s * (par[3] * d0 + par[4] * d1 + par[5] * d2)
        g[1] -= 2.0 * s * (par[4] * d0 + par[6] * d1 + par[7] * d2)
        g[2] -= 2.0 * s * (par[5] * d0 + par[7] * d1 + par[8] * d2)
    else:
        ax = int(par[0])
        if ax == 0:
            g[1] -= 2.0 * s * (p[1] - par[1])
            g[2] -= 2.0 * s * (p[2] - par[2])
        elif ax == 1:
            g[0] -= 2.0 * s * (p[0] - par[1])
            g[2] -= 2.0 * s * (p[2] - par[2])
        else:
            g[0] -= 2.0 * s * (p[0] - par[1])
            g[1] -= 2.0 * s * (p[1] - par[2])


@njit(cache=True)
def _penalty_value(p, ctypes, cpar_t, obs_ptr, lam_vec):
    total = 0.0
    for j in range(obs_ptr.shape[0] - 1):
        prod = 1.0
        inside = True
        for i in range(obs_ptr[j], obs_ptr[j + 1]):
            h = _con_value(ctypes[i], cpar_t[i], p)
            if h <= 0.0:
                inside = False
                break
            prod *= h
        if inside:
            total += lam_vec[j] * 0.5 * prod * prod
    return total


@njit(cache=True)
def _penalty_accum(p, ctypes, cpar_t, obs_ptr, lam_vec, hbuf, g):
    """Penalty value summed over obstacles; gradient added into g (3,)."""
    total = 0.0
    for j in range(obs_ptr.shape[0] - 1):
        a = obs_ptr[j]
        b = obs_ptr[j + 1]
        prod = 1.0
        inside = True
        for i in range(a, b):
            h = _con_value(ctypes[i], cpar_t[i], p)
            if h <= 0.0:
                inside = False
                break
            hbuf[i] = h
            prod *= h
        if not inside:
            continue
        val = 0.5 * prod * prod
        w = lam_vec[j]
        total += w * val
        for i in range(a, b):
            _con_grad_scaled(ctypes[i], cpar_t[i], p, w * 2.0 * val / hbuf[i], g)
    return total


@njit(cache=True)
def total_cost_kernel(uflat, x0, prm, dt, n, method,
                      qd, rdiag, qfd, rdelta, has_uprev, u_prev,
                      x_ref, u_ref, ctypes, cpar, obs_ptr, lam, lamf,
                      corners):
    """Cost of one control sequence; NaN signals a diverged trajectory."""
    xs = np.empty((n + 1, 8))
    if not shoot_kernel(uflat, x0, prm, dt, n, method, xs):
        return np.nan
    many_t = cpar.shape[0] > 1
    many_xr = x_ref.shape[0] > 1
    many_ur = u_ref.shape[0] > 1
    p3 = np.empty(3)
    val = 0.0
    for k in range(n):
        xr = x_ref[k] if many_xr else x_ref[0]
        ur = u_ref[k] if many_ur else u_ref[0]
        cp_t = cpar[k] if many_t else cpar[0]
        x = xs[k]
        u = uflat[3 * k:3 * k + 3]
        for i in range(8):
            dx = x[i] - xr[i]
            val += qd[i] * dx * dx
        for i in range(3):
            du = u[i] - ur[i]
            val += rdiag[i] * du * du
        for c in range(corners.shape[0]):
            for i in range(3):
                p3[i] = x[i] + corners[c, i]
            val += _penalty_value(p3, ctypes, cp_t, obs_ptr, lam)
    # input-rate penalty
    for k in range(n):
        if k == 0:
            if not has_uprev:
                continue
            prev = u_prev
        else:
            prev = uflat[3 * (k - 1):3 * k]
        cur = uflat[3 * k:3 * k + 3]
        for i in range(3):
            d = cur[i] - prev[i]
            val += rdelta[i] * d * d
    # terminal
    xr = x_ref[n] if many_xr else x_ref[0]
    cp_t = cpar[n] if many_t else cpar[0]
    x = xs[n]
    for i in range(8):
        dx = x[i] - xr[i]
        val += qfd[i] * dx * dx
    for c in range(corners.shape[0]):
        for i in range(3):
            p3[i] = x[i] + corners[c, i]
        val += _penalty_value(p3, ctypes, cp_t, obs_ptr, lamf)
    return val


@njit(cache=True)
def cost_grad_kernel(uflat, x0, prm, dt, n, method,
                     qd, rdiag, qfd, rdelta, has_uprev, u_prev,
                     x_ref, u_ref, ctypes, cpar, obs_ptr, lam, lamf,
                     corners, grad_out):
    """Cost and exact gradient via one forward and one adjoint sweep."""
    n_con = ctypes.shape[0]
    xs = np.empty((n + 1, 8))
    if not shoot_kernel(uflat, x0, prm, dt, n, method, xs):
        grad_out[:] = np.nan
        return np.nan
    many_t = cpar.shape[0] > 1
    many_xr = x_ref.shape[0] > 1
    many_ur = u_ref.shape[0] > 1
    hbuf = np.empty(max(n_con, 1))
    p3 = np.empty(3)
    a_s = np.empty((n, 8, 8))
    b_s = np.empty((n, 8, 3))
    gxs = np.zeros((n, 8))
    gus = np.zeros((n, 3))
    val = 0.0
    for k in range(n):
        xr = x_ref[k] if many_xr else x_ref[0]
        ur = u_ref[k] if many_ur else u_ref[0]
        cp_t = cpar[k] if many_t else cpar[0]
        x = xs[k]
        u = uflat[3 * k:3 * k + 3]
        gx = gxs[k]
        gu = gus[k]
        for i in range(8):
            dx = x[i] - xr[i]
            val += qd[i] * dx * dx
            gx[i] += 2.0 * qd[i] * dx
        for i in range(3):
            du = u[i] - ur[i]
            val += rdiag[i] * du * du
            gu[i] += 2.0 * rdiag[i] * du
        for c in range(corners.shape[0]):
            for i in range(3):
                p3[i] = x[i] + corners[c, i]
            val += _penalty_accum(p3, ctypes, cp_t, obs_ptr, lam, hbuf, gx[0:3])
        _step_jac(x, u, prm, dt, method, a_s[k], b_s[k])
    for k in range(n):
        if k == 0:
            if not has_uprev:
                continue
            prev = u_prev
        else:
            prev = uflat[3 * (k - 1):3 * k]
        cur = uflat[3 * k:3 * k + 3]
        for i in range(3):
            d = cur[i] - prev[i]
            val += rdelta[i] * d * d
            gus[k, i] += 2.0 * rdelta[i] * d
            if k > 0:
                gus[k - 1, i] -= 2.0 * rdelta[i] * d
    # terminal cost and adjoint seed
    lam_vec = np.zeros(8)
    xr = x_ref[n] if many_xr else x_ref[0]
    cp_t = cpar[n] if many_t else cpar[0]
    x = xs[n]
    for i in range(8):
        dx = x[i] - xr[i]
        val += qfd[i] * dx * dx
        lam_vec[i] += 2.0 * qfd[i] * dx
    for c in range(corners.shape[0]):
        for i in range(3):
            p3[i] = x[i] + corners[c, i]
        val += _penalty_accum(p3, ctypes, cp_t, obs_ptr, lamf, hbuf, lam_vec[0:3])
    # backward sweep: grad_k = gu_k + B_k^T lam_{k+1}; lam_k = gx_k + A_k^T lam_{k+1}
    nxt = np.empty(8)
    for k in range(n - 1, -1, -1):
        for j in range(3):
            s = gus[k, j]
            for i in range(8):
                s += b_s[k, i, j] * lam_vec[i]
            grad_out[3 * k + j] = s
        for j in range(8):
            s = gxs[k, j]
            for i in range(8):
                s += a_s[k, i, j] * lam_vec[i]
            nxt[j] = s
        for j in range(8):
            lam_vec[j] = nxt[j]
    return val
