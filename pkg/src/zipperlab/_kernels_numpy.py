"""Pure-numpy fallback kernels, vectorized over paths/points.

Same contracts and step conventions as ``_kernels_numba``; per-path arithmetic
order is preserved (sequential over time steps, vectorized across paths), so
the two backends agree to floating-point tolerance.
"""

import numpy as np

TIE_TOL = 1e-12


def _sqrt_H_vec(wr, wi, hint):
    m = np.hypot(wr, wi)
    rr = np.sqrt(np.maximum(0.5 * (m + wr), 0.0))
    ri = np.sqrt(np.maximum(0.5 * (m - wr), 0.0))
    neg = (wi < 0.0) | ((wi == 0.0) & (wr >= 0.0) & (hint < 0.0))
    return np.where(neg, -rr, rr), ri


def _reverse_step_vec(fr, fi, dw, four_delta):
    ur = fr - dw
    wr = ur * ur - fi * fi - four_delta
    wi = 2.0 * ur * fi
    gr, gi = _sqrt_H_vec(wr, wi, ur)
    return gr, gi, ur


def _forward_step_vec(fr, fi, dw, four_delta):
    """Vectorized forward step.

    Returns (nfr, nfi, gr, gi, absorbed) where g is the pre-shift slit value;
    absorbed entries keep their inputs unchanged.
    """
    isreal = fi == 0.0
    tip = isreal & (np.abs(fr) <= TIE_TOL)
    wr = fr * fr - fi * fi + four_delta
    wi = 2.0 * fr * fi
    on_slit = (
        (~isreal)
        & (np.abs(wi) <= TIE_TOL)
        & (wr >= -TIE_TOL)
        & (wr <= four_delta + TIE_TOL)
    )
    absorbed = tip | on_slit
    gr, gi = _sqrt_H_vec(wr, wi, fr)
    nfr = gr - dw
    nfi = gi
    nfr = np.where(absorbed, fr, nfr)
    nfi = np.where(absorbed, fi, nfi)
    gr = np.where(absorbed, fr, gr)
    gi = np.where(absorbed, fi, gi)
    return nfr, nfi, gr, gi, absorbed


def _log_ratio_vec(ar, ai, br, bi):
    lr = 0.5 * (np.log(ar * ar + ai * ai) - np.log(br * br + bi * bi))
    li = np.arctan2(ai, ar) - np.arctan2(bi, br)
    return lr, li


def flow_ensemble(z, dW, delta, reverse):
    N, m = dW.shape
    n = z.shape[0]
    fr = np.broadcast_to(z.real, (N, n)).copy()
    fi = np.broadcast_to(z.imag, (N, n)).copy()
    lr = np.zeros((N, n))
    li = np.zeros((N, n))
    tau = np.full((N, n), np.inf)
    alive = np.ones((N, n), dtype=bool)
    four_delta = 4.0 * delta
    for k in range(m):
        dw = dW[:, k][:, None]
        if reverse:
            gr, gi, ur = _reverse_step_vec(fr, fi, dw, four_delta)
            dlr, dli = _log_ratio_vec(ur, fi, gr, gi)
            lr += dlr
            li += dli
            fr, fi = gr, gi
        else:
            nfr, nfi, gr, gi, absorbed = _forward_step_vec(fr, fi, dw, four_delta)
            newly = alive & absorbed
            if newly.any():
                frac = np.where(fi == 0.0, 0.0, 0.25 * fi * fi)
                tau[newly] = k * delta + frac[newly]
                alive &= ~absorbed
            upd = alive & ~absorbed
            with np.errstate(divide="ignore", invalid="ignore"):
                dlr, dli = _log_ratio_vec(fr, fi, gr, gi)
            lr = np.where(upd, lr + dlr, lr)
            li = np.where(upd, li + dli, li)
            fr = np.where(upd, nfr, fr)
            fi = np.where(upd, nfi, fi)
    return fr + 1j * fi, lr + 1j * li, tau


def coupling_qv_ensemble(z, w, dW, delta, reverse, sqrt_kappa, coef2):
    N, m = dW.shape
    n = z.shape[0]
    fr = np.broadcast_to(z.real, (N, n)).copy()
    fi = np.broadcast_to(z.imag, (N, n)).copy()
    lr = np.zeros((N, n))
    li = np.zeros((N, n))
    alive = np.ones((N, n), dtype=bool)
    four_delta = 4.0 * delta
    a = 2.0 / sqrt_kappa

    def s_of():
        if reverse:
            vals = a * 0.5 * np.log(fr * fr + fi * fi) + coef2 * lr
        else:
            vals = -a * np.arctan2(fi, fr) - coef2 * li
        return vals @ w

    s_prev = s_of()
    qv = np.zeros(N)
    for k in range(m):
        dw = dW[:, k][:, None]
        if reverse:
            gr, gi, ur = _reverse_step_vec(fr, fi, dw, four_delta)
            dlr, dli = _log_ratio_vec(ur, fi, gr, gi)
            lr += dlr
            li += dli
            fr, fi = gr, gi
        else:
            nfr, nfi, gr, gi, absorbed = _forward_step_vec(fr, fi, dw, four_delta)
            upd = alive & ~absorbed
            alive &= ~absorbed
            with np.errstate(divide="ignore", invalid="ignore"):
                dlr, dli = _log_ratio_vec(fr, fi, gr, gi)
            lr = np.where(upd, lr + dlr, lr)
            li = np.where(upd, li + dli, li)
            fr = np.where(upd, nfr, fr)
            fi = np.where(upd, nfi, fi)
        s_now = s_of()
        qv += (s_now - s_prev) ** 2
        s_prev = s_now
    return s_prev, qv, fr + 1j * fi, lr + 1j * li


def reverse_sle_driving(y, rho, dB, sqrt_kappa, delta):
    N, m = dB.shape
    nf = y.shape[0]
    fr = np.broadcast_to(y.real, (N, nf)).copy()
    fi = np.broadcast_to(y.imag, (N, nf)).copy()
    W = np.zeros((N, m + 1))
    nsteps = np.full(N, m, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    four_delta = 4.0 * delta
    two_sq = 2.0 * np.sqrt(delta)
    isreal = fi[0] == 0.0
    for k in range(m):
        r2 = fr * fr + fi * fi
        drift = (-rho * fr / r2).sum(axis=1)
        dw = drift * delta + sqrt_kappa * dB[:, k]
        hit = active & (np.abs(fr[:, isreal] - dw[:, None]) <= two_sq).any(axis=1)
        if hit.any():
            nsteps[hit] = k
            active &= ~hit
        gr, gi, _ = _reverse_step_vec(fr, fi, dw[:, None], four_delta)
        fr = np.where(active[:, None], gr, fr)
        fi = np.where(active[:, None], gi, fi)
        W[:, k + 1] = np.where(active, W[:, k] + dw, W[:, k])
    return W, nsteps


def bessel_logdrift(x0, rho1, dB, sqrt_kappa, delta, stop_factor):
    N, m = dB.shape
    f = np.full(N, float(x0))
    logf = np.log(f)
    D = np.zeros(N)
    V = np.zeros(N)
    nsteps = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    four_delta = 4.0 * delta
    stop_level = stop_factor * np.sqrt(delta)
    for k in range(m):
        if not active.any():
            break
        dw = (-rho1 / f) * delta + sqrt_kappa * dB[:, k]
        u = f - dw
        w2 = u * u - four_delta
        ok = active & (u > stop_level) & (w2 > 0.0)
        active = ok
        with np.errstate(invalid="ignore"):
            fnew = np.sqrt(np.where(ok, w2, 1.0))
            lnew = np.log(fnew)
        inc = lnew - logf
        D = np.where(ok, D + inc, D)
        V = np.where(ok, V + inc * inc, V)
        f = np.where(ok, fnew, f)
        logf = np.where(ok, lnew, logf)
        nsteps = np.where(ok, k + 1, nsteps)
    return D, V, nsteps


def forward_flow_points(z, dW, delta):
    f, logfp, tau = flow_ensemble(z, dW[None, :], delta, False)
    return f[0], logfp[0], tau[0]


def reverse_flow_points(z, dW, delta):
    f, logfp, _ = flow_ensemble(z, dW[None, :], delta, True)
    return f[0], logfp[0]


def extract_curve_points(dW, delta, ks):
    n = ks.shape[0]
    fr = np.zeros(n)
    fi = np.zeros(n)
    four_delta = 4.0 * delta
    kmax = int(ks.max()) if n else 0
    for j in range(kmax - 1, -1, -1):
        act = ks > j
        ur = fr[act] + dW[j]
        wr = ur * ur - fi[act] * fi[act] - four_delta
        wi = 2.0 * ur * fi[act]
        gr, gi = _sqrt_H_vec(wr, wi, ur)
        fr[act] = gr
        fi[act] = gi
    return fr + 1j * fi


def _tau_vec(x, dW, delta):
    """Vectorized time-to-zero for real points under a reverse flow."""
    m = dW.shape[0]
    f = np.asarray(x, dtype=float).copy()
    tau = np.full(f.shape, np.inf)
    tau[f == 0.0] = 0.0
    alive = f != 0.0
    four_delta = 4.0 * delta
    two_sq = 2.0 * np.sqrt(delta)
    for k in range(m):
        if not alive.any():
            break
        u = f - dW[k]
        hit = alive & (np.abs(u) <= two_sq)
        tau[hit] = k * delta + 0.25 * u[hit] * u[hit]
        alive &= ~hit
        w2 = np.where(alive, u * u - four_delta, 1.0)
        f = np.where(alive, np.sign(u) * np.sqrt(w2), f)
    return tau


def time_to_zero(x, dW, delta):
    return float(_tau_vec(np.array([x]), dW, delta)[0])


def welding_pairs(dW, delta, times, x_probe, n_iter):
    k = times.shape[0]
    out = []
    for sgn in (1.0, -1.0):
        lo = np.zeros(k)
        hi = np.full(k, sgn * x_probe)
        opens = _tau_vec(hi, dW, delta) <= times
        for _ in range(n_iter):
            mid = 0.5 * (lo + hi)
            welded = _tau_vec(mid, dW, delta) <= times
            lo = np.where(welded, mid, lo)
            hi = np.where(welded, hi, mid)
        res = 0.5 * (lo + hi)
        res[opens] = np.nan
        out.append(res)
    ys, xs = out
    return xs, ys


def _tilted_real(zr, p, q, alpha):
    """Tilted-slit map on the real axis outside [-q, p]."""
    out = np.empty_like(zr)
    right = zr > p
    left = zr < -q
    out[right] = np.exp(
        (1.0 - alpha) * np.log(zr[right] - p) + alpha * np.log(zr[right] + q)
    )
    out[left] = -np.exp(
        (1.0 - alpha) * np.log(p - zr[left]) + alpha * np.log(-zr[left] - q)
    )
    out[~(right | left)] = 0.0
    return out


def _tilted_complex(zr, zi, p, q, alpha):
    ar = zr - p
    br = zr + q
    la = 0.5 * np.log(ar * ar + zi * zi)
    ta = np.arctan2(zi, ar)
    lb = 0.5 * np.log(br * br + zi * zi)
    tb = np.arctan2(zi, br)
    lr = (1.0 - alpha) * la + alpha * lb
    li = (1.0 - alpha) * ta + alpha * tb
    r = np.exp(lr)
    return r * np.cos(li), r * np.sin(li)


def weld_trace(xs, ys):
    k = xs.shape[0]
    pr = np.empty(k + 1)
    pi = np.empty(k + 1)
    a_cur = xs.copy()
    b_cur = ys.copy()
    caps = np.empty(k)
    used = 0
    for step in range(k):
        q = -a_cur[step]
        p = b_cur[step]
        alpha = q / (p + q)
        caps[step] = 0.25 * p * q
        if used:
            pr[:used], pi[:used] = _tilted_complex(pr[:used], pi[:used], p, q, alpha)
        if step + 1 < k:
            a_cur[step + 1 :] = _tilted_real(a_cur[step + 1 :], p, q, alpha)
            b_cur[step + 1 :] = _tilted_real(b_cur[step + 1 :], p, q, alpha)
        tr, ti = _tilted_complex(np.array([0.0]), np.array([0.0]), p, q, alpha)
        pr[used] = tr[0]
        pi[used] = ti[0]
        used += 1
    pr[used] = 0.0
    pi[used] = 0.0
    return pr + 1j * pi, caps


def bilinear_gather(values, x0, y0, dx, px, py):
    ny, nx = values.shape
    u = (px - x0) / dx
    v = (py - y0) / dx
    inside = (u >= 0.0) & (v >= 0.0) & (u <= nx - 1.0) & (v <= ny - 1.0)
    i0 = np.clip(u.astype(np.int64), 0, nx - 2)
    j0 = np.clip(v.astype(np.int64), 0, ny - 2)
    fu = np.clip(u - i0, 0.0, None)
    fv = np.clip(v - j0, 0.0, None)
    val = (
        values[j0, i0] * (1 - fu) * (1 - fv)
        + values[j0, i0 + 1] * fu * (1 - fv)
        + values[j0 + 1, i0] * (1 - fu) * fv
        + values[j0 + 1, i0 + 1] * fu * fv
    )
    return np.where(inside, val, np.nan)


def circle_averages(values, x0, y0, dx, cx, cy, radii, n_ang, half_plane):
    n = cx.shape[0]
    out = np.empty(n)
    # group circles sharing (n_ang, arc shape) so the gather vectorizes
    full = np.ones(n, dtype=bool)
    if half_plane:
        full = cy >= radii
    for na in np.unique(n_ang):
        for is_full in (True, False):
            sel = (n_ang == na) & (full == is_full)
            if not sel.any():
                continue
            idx = np.nonzero(sel)[0]
            r = radii[idx][:, None]
            ccx = cx[idx][:, None]
            ccy = cy[idx][:, None]
            if is_full:
                th = (2.0 * np.pi) * (np.arange(na) / na)[None, :]
                wgt = np.ones(na)
            else:
                s = np.clip(cy[idx] / radii[idx], 0.0, 1.0)
                a = np.arcsin(s)[:, None]
                frac = (np.arange(na) / (na - 1))[None, :]
                th = -a + (np.pi + 2 * a) * frac
                wgt = np.ones(na)
                wgt[0] = wgt[-1] = 0.5
            px = ccx + r * np.cos(th)
            py = np.maximum(ccy + r * np.sin(th), 0.0)
            vals = bilinear_gather(values, x0, y0, dx, px.ravel(), py.ravel())
            vals = vals.reshape(px.shape)
            out[idx] = (vals * wgt).sum(axis=1) / wgt.sum()
    return out
