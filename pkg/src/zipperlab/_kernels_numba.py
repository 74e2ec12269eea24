"""Scalar-loop hot kernels, compiled with numba.

Conventions shared with the numpy twin module:

* Time step ``delta``; driving increments ``dW[k] = W[k+1] - W[k]``.
* Forward elementary step (slit then shift): f <- sqrt_H(f^2 + 4 delta) - dW.
* Reverse elementary step (shift then slit): f <- sqrt_H((f - dW)^2 - 4 delta).
  With these two conventions the reverse map of W is the exact inverse of the
  forward map of t -> W[T-t] - W[T], so time-reversal duality is exact per
  discrete path.
* sqrt_H is the square root in the closed upper half plane; on the positive
  real axis the side is disambiguated by the sign of the pre-step point.
* The log-derivative accumulates per-step principal increments; numerator and
  denominator lie in the closed upper half plane so each increment is in
  (-pi, pi] and branch tracking is continuity itself.
"""

import math

import numpy as np
from numba import njit, prange

TIE_TOL = 1e-12


@njit(cache=True)
def _sqrt_H(wr, wi, hint):
    """Square root of wr+1j*wi in the closed upper half plane.

    hint: sign of the pre-image's real part, used only when w is on the
    positive real axis, where both roots are real.
    """
    if wi == 0.0:
        if wr >= 0.0:
            r = math.sqrt(wr)
            if hint < 0.0:
                return -r, 0.0
            return r, 0.0
        return 0.0, math.sqrt(-wr)
    m = math.hypot(wr, wi)
    rr = math.sqrt(0.5 * (m + wr))
    ri = math.sqrt(0.5 * (m - wr))
    if wi < 0.0:
        # principal root lies in the lower half plane; take the other one
        return -rr, ri
    return rr, ri


@njit(cache=True)
def _forward_step(fr, fi, dw, four_delta):
    """One forward slit step; returns (fr, fi, gr, gi, absorbed, tau_frac).

    (gr, gi) is the slit-map value before the shift (needed for the
    derivative update).  absorbed=1 when the point lies on the elementary
    map's branch cut (the growing slit); tau_frac is the within-step
    absorption time.
    """
    if fi == 0.0:
        if abs(fr) <= TIE_TOL:
            return fr, fi, fr, fi, 1, 0.0
        g = math.sqrt(fr * fr + four_delta)
        if fr < 0.0:
            g = -g
        return g - dw, 0.0, g, 0.0, 0, 0.0
    wr = fr * fr - fi * fi + four_delta
    wi = 2.0 * fr * fi
    if abs(wi) <= TIE_TOL and -TIE_TOL <= wr <= four_delta + TIE_TOL:
        # on the slit: swallowed where f^2 + 4s = 0, i.e. s = fi^2/4
        return fr, fi, fr, fi, 1, 0.25 * fi * fi
    gr, gi = _sqrt_H(wr, wi, fr)
    return gr - dw, gi, gr, gi, 0, 0.0


@njit(cache=True)
def _reverse_step(fr, fi, dw, four_delta):
    """One reverse step; returns (fr, fi, ur) with ur the shifted pre-image."""
    ur = fr - dw
    wr = ur * ur - fi * fi - four_delta
    wi = 2.0 * ur * fi
    gr, gi = _sqrt_H(wr, wi, ur)
    return gr, gi, ur


@njit(cache=True)
def _log_ratio(ar, ai, br, bi):
    """Principal log(a) - log(b) for a, b in the closed upper half plane."""
    lr = 0.5 * (math.log(ar * ar + ai * ai) - math.log(br * br + bi * bi))
    li = math.atan2(ai, ar) - math.atan2(bi, br)
    return lr, li


@njit(cache=True, parallel=True)
def flow_ensemble(z, dW, delta, reverse):
    """Flow points z (shape n) along each driving path in dW (shape N, m).

    Returns terminal positions f (N, n), accumulated log f' (N, n) and, for
    forward flows, absorption times (N, n) with +inf meaning never absorbed.
    Absorbed points freeze at their last pre-absorption position.
    """
    N, m = dW.shape
    n = z.shape[0]
    f = np.empty((N, n), dtype=np.complex128)
    logfp = np.zeros((N, n), dtype=np.complex128)
    tau = np.full((N, n), np.inf)
    four_delta = 4.0 * delta
    for p in prange(N):
        for i in range(n):
            fr = z[i].real
            fi = z[i].imag
            lr = 0.0
            li = 0.0
            for k in range(m):
                dw = dW[p, k]
                if reverse:
                    nfr, nfi, ur = _reverse_step(fr, fi, dw, four_delta)
                    dlr, dli = _log_ratio(ur, fi, nfr, nfi)
                    lr += dlr
                    li += dli
                    fr = nfr
                    fi = nfi
                else:
                    nfr, nfi, gr, gi, absorbed, frac = _forward_step(fr, fi, dw, four_delta)
                    if absorbed == 1:
                        tau[p, i] = k * delta + frac
                        break
                    dlr, dli = _log_ratio(fr, fi, gr, gi)
                    lr += dlr
                    li += dli
                    fr = nfr
                    fi = nfi
            f[p, i] = complex(fr, fi)
            logfp[p, i] = complex(lr, li)
    return f, logfp, tau


@njit(cache=True, parallel=True)
def coupling_qv_ensemble(z, w, dW, delta, reverse, sqrt_kappa, coef2):
    """(h_t, rho) functional along each path: terminal value and realized QV.

    Forward: h_t = (-2/sqrt(kappa)) arg f_t - coef2 * arg f_t'  (coef2 = chi)
    Reverse: h_t = (2/sqrt(kappa)) log|f_t| + coef2 * log|f_t'| (coef2 = Q)
    Returns (S_T, QV, f_T, logfp_T).
    """
    N, m = dW.shape
    n = z.shape[0]
    ST = np.empty(N)
    QV = np.zeros(N)
    fT = np.empty((N, n), dtype=np.complex128)
    lpT = np.empty((N, n), dtype=np.complex128)
    four_delta = 4.0 * delta
    a = 2.0 / sqrt_kappa
    for p in prange(N):
        fr_ = np.empty(n)
        fi_ = np.empty(n)
        lr_ = np.zeros(n)
        li_ = np.zeros(n)
        for i in range(n):
            fr_[i] = z[i].real
            fi_[i] = z[i].imag
        s_prev = 0.0
        for i in range(n):
            if reverse:
                s_prev += w[i] * (a * 0.5 * math.log(fr_[i] * fr_[i] + fi_[i] * fi_[i]))
            else:
                s_prev += w[i] * (-a * math.atan2(fi_[i], fr_[i]))
        qv = 0.0
        for k in range(m):
            dw = dW[p, k]
            s_now = 0.0
            for i in range(n):
                fr = fr_[i]
                fi = fi_[i]
                if reverse:
                    nfr, nfi, ur = _reverse_step(fr, fi, dw, four_delta)
                    dlr, dli = _log_ratio(ur, fi, nfr, nfi)
                    lr_[i] += dlr
                    li_[i] += dli
                    fr_[i] = nfr
                    fi_[i] = nfi
                    s_now += w[i] * (
                        a * 0.5 * math.log(nfr * nfr + nfi * nfi) + coef2 * lr_[i]
                    )
                else:
                    nfr, nfi, gr, gi, absorbed, frac = _forward_step(fr, fi, dw, four_delta)
                    # support must stay clear of the trace; freeze on absorb
                    if absorbed == 0:
                        dlr, dli = _log_ratio(fr, fi, gr, gi)
                        lr_[i] += dlr
                        li_[i] += dli
                        fr_[i] = nfr
                        fi_[i] = nfi
                    s_now += w[i] * (
                        -a * math.atan2(fi_[i], fr_[i]) - coef2 * li_[i]
                    )
            qv += (s_now - s_prev) * (s_now - s_prev)
            s_prev = s_now
        ST[p] = s_prev
        QV[p] = qv
        for i in range(n):
            fT[p, i] = complex(fr_[i], fi_[i])
            lpT[p, i] = complex(lr_[i], li_[i])
    return ST, QV, fT, lpT


@njit(cache=True, parallel=True)
def reverse_sle_driving(y, rho, dB, sqrt_kappa, delta):
    """Euler-Maruyama for the reverse kappa-rho driving.

    dW = sum_i Re(-rho_i / f_t(y_i)) dt + sqrt(kappa) dB; force points evolve
    by the exact reverse slit step under the running W.  A path stops when a
    real force point would lift off the axis (reaches the origin); W is
    frozen from there on.  Returns (W paths (N, m+1), step counts (N,)).
    """
    N, m = dB.shape
    nf = y.shape[0]
    W = np.zeros((N, m + 1))
    nsteps = np.full(N, m, dtype=np.int64)
    four_delta = 4.0 * delta
    two_sq = 2.0 * math.sqrt(delta)
    for p in prange(N):
        fr_ = np.empty(nf)
        fi_ = np.empty(nf)
        for i in range(nf):
            fr_[i] = y[i].real
            fi_[i] = y[i].imag
        stopped = False
        for k in range(m):
            if stopped:
                W[p, k + 1] = W[p, k]
                continue
            drift = 0.0
            for i in range(nf):
                r2 = fr_[i] * fr_[i] + fi_[i] * fi_[i]
                drift += -rho[i] * fr_[i] / r2
            dw = drift * delta + sqrt_kappa * dB[p, k]
            for i in range(nf):
                if fi_[i] == 0.0 and abs(fr_[i] - dw) <= two_sq:
                    stopped = True
            if stopped:
                nsteps[p] = k
                W[p, k + 1] = W[p, k]
                continue
            for i in range(nf):
                gr, gi, _ = _reverse_step(fr_[i], fi_[i], dw, four_delta)
                fr_[i] = gr
                fi_[i] = gi
            W[p, k + 1] = W[p, k] + dw
    return W, nsteps


@njit(cache=True, parallel=True)
def bessel_logdrift(x0, rho1, dB, sqrt_kappa, delta, stop_factor):
    """Reverse single-force-point flow, tracking log f_t(x0).

    Returns per path: D = sum of log increments of f, V = realized quadratic
    variation of log f, and executed step counts.  Paths stop once f would
    drop below stop_factor*sqrt(delta), before the lift-off regime where the
    discrete chain no longer resolves the continuum drift.
    """
    N, m = dB.shape
    D = np.zeros(N)
    V = np.zeros(N)
    nsteps = np.zeros(N, dtype=np.int64)
    four_delta = 4.0 * delta
    stop_level = stop_factor * math.sqrt(delta)
    for p in prange(N):
        f = x0
        logf = math.log(f)
        d = 0.0
        v = 0.0
        k_done = 0
        for k in range(m):
            dw = (-rho1 / f) * delta + sqrt_kappa * dB[p, k]
            u = f - dw
            if u <= stop_level:
                break
            w2 = u * u - four_delta
            if w2 <= 0.0:
                break
            fnew = math.sqrt(w2)
            lnew = math.log(fnew)
            d += lnew - logf
            v += (lnew - logf) * (lnew - logf)
            logf = lnew
            f = fnew
            k_done = k + 1
        D[p] = d
        V[p] = v
        nsteps[p] = k_done
    return D, V, nsteps


@njit(cache=True)
def forward_flow_points(z, dW, delta):
    """Single-path forward flow of many points; returns (f, logfp, tau)."""
    n = z.shape[0]
    m = dW.shape[0]
    f = np.empty(n, dtype=np.complex128)
    logfp = np.zeros(n, dtype=np.complex128)
    tau = np.full(n, np.inf)
    four_delta = 4.0 * delta
    for i in range(n):
        fr = z[i].real
        fi = z[i].imag
        lr = 0.0
        li = 0.0
        for k in range(m):
            nfr, nfi, gr, gi, absorbed, frac = _forward_step(fr, fi, dW[k], four_delta)
            if absorbed == 1:
                tau[i] = k * delta + frac
                break
            dlr, dli = _log_ratio(fr, fi, gr, gi)
            lr += dlr
            li += dli
            fr = nfr
            fi = nfi
        f[i] = complex(fr, fi)
        logfp[i] = complex(lr, li)
    return f, logfp, tau


@njit(cache=True)
def reverse_flow_points(z, dW, delta):
    """Single-path reverse flow of many points; returns (f, logfp)."""
    n = z.shape[0]
    m = dW.shape[0]
    f = np.empty(n, dtype=np.complex128)
    logfp = np.zeros(n, dtype=np.complex128)
    four_delta = 4.0 * delta
    for i in range(n):
        fr = z[i].real
        fi = z[i].imag
        lr = 0.0
        li = 0.0
        for k in range(m):
            nfr, nfi, ur = _reverse_step(fr, fi, dW[k], four_delta)
            dlr, dli = _log_ratio(ur, fi, nfr, nfi)
            lr += dlr
            li += dli
            fr = nfr
            fi = nfi
        f[i] = complex(fr, fi)
        logfp[i] = complex(lr, li)
    return f, logfp


@njit(cache=True)
def extract_curve_points(dW, delta, ks):
    """Trace points: for each step index k, the preimage of 0 under the
    composed forward map up to k (composition of inverse slit steps)."""
    n = ks.shape[0]
    out = np.empty(n, dtype=np.complex128)
    four_delta = 4.0 * delta
    for q in range(n):
        k = ks[q]
        fr = 0.0
        fi = 0.0
        for j in range(k - 1, -1, -1):
            ur = fr + dW[j]
            wr = ur * ur - fi * fi - four_delta
            wi = 2.0 * ur * fi
            fr, fi = _sqrt_H(wr, wi, ur)
        out[q] = complex(fr, fi)
    return out


@njit(cache=True)
def time_to_zero(x, dW, delta):
    """Time for the real point x to reach 0 under the reverse flow of dW.

    Returns +inf when the point is not welded within the path horizon.
    """
    m = dW.shape[0]
    f = x
    four_delta = 4.0 * delta
    two_sq = 2.0 * math.sqrt(delta)
    if x == 0.0:
        return 0.0
    for k in range(m):
        u = f - dW[k]
        if abs(u) <= two_sq:
            return k * delta + 0.25 * u * u
        s = 1.0 if u > 0.0 else -1.0
        f = s * math.sqrt(u * u - four_delta)
    return np.inf


@njit(cache=True)
def welding_pairs(dW, delta, times, x_probe, n_iter):
    """Welding pairs (x_k < 0 < y_k) reaching 0 at the given times.

    Bisection on each axis using the monotone time-to-zero functional.
    x_probe bounds the search (positive; both sides probed to it).  Entries
    that cannot be bracketed come back as NaN.
    """
    k = times.shape[0]
    xs = np.empty(k)
    ys = np.empty(k)
    for q in range(k):
        t = times[q]
        lo = 0.0
        hi = x_probe
        if time_to_zero(hi, dW, delta) <= t:
            ys[q] = np.nan
        else:
            for _ in range(n_iter):
                mid = 0.5 * (lo + hi)
                if time_to_zero(mid, dW, delta) <= t:
                    lo = mid
                else:
                    hi = mid
            ys[q] = 0.5 * (lo + hi)
        lo = 0.0
        hi = -x_probe
        if time_to_zero(hi, dW, delta) <= t:
            xs[q] = np.nan
        else:
            for _ in range(n_iter):
                mid = 0.5 * (lo + hi)
                if time_to_zero(mid, dW, delta) <= t:
                    lo = mid
                else:
                    hi = mid
            xs[q] = 0.5 * (lo + hi)
    return xs, ys


@njit(cache=True)
def _tilted_slit(zr, zi, p, q, alpha):
    """w(z) = (z-p)^(1-alpha) (z+q)^alpha with principal powers; maps the
    closed upper half plane into itself."""
    if zi == 0.0:
        if zr > p:
            return math.exp((1.0 - alpha) * math.log(zr - p) + alpha * math.log(zr + q)), 0.0
        if zr < -q:
            return -math.exp((1.0 - alpha) * math.log(p - zr) + alpha * math.log(-zr - q)), 0.0
        if zr == p or zr == -q:
            return 0.0, 0.0
    ar = zr - p
    br = zr + q
    la = 0.5 * math.log(ar * ar + zi * zi)
    ta = math.atan2(zi, ar)
    lb = 0.5 * math.log(br * br + zi * zi)
    tb = math.atan2(zi, br)
    lr = (1.0 - alpha) * la + alpha * lb
    li = (1.0 - alpha) * ta + alpha * tb
    r = math.exp(lr)
    return r * math.cos(li), r * math.sin(li)


@njit(cache=True)
def weld_trace(xs, ys):
    """Discrete zipper: weld pairs (xs[k], ys[k]) innermost first.

    Each step applies the tilted-slit map fitted to the current pair, which
    sends the pair to 0 and lifts the previously welded material to the new
    slit's tip.  Returns trace points ordered tip first (length k+1, last
    entry 0 = base) and per-step half-plane capacity increments.
    """
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
        for i in range(used):
            pr[i], pi[i] = _tilted_slit(pr[i], pi[i], p, q, alpha)
        for j in range(step + 1, k):
            a_cur[j], _ = _tilted_slit(a_cur[j], 0.0, p, q, alpha)
            b_cur[j], _ = _tilted_slit(b_cur[j], 0.0, p, q, alpha)
        tr, ti = _tilted_slit(0.0, 0.0, p, q, alpha)
        pr[used] = tr
        pi[used] = ti
        used += 1
    pr[used] = 0.0
    pi[used] = 0.0
    out = np.empty(k + 1, dtype=np.complex128)
    for i in range(k + 1):
        out[i] = complex(pr[i], pi[i])
    return out, caps


@njit(cache=True)
def bilinear_gather(values, x0, y0, dx, px, py):
    """Bilinear interpolation on the vertex mesh; NaN outside the window."""
    ny, nx = values.shape
    n = px.shape[0]
    out = np.empty(n)
    for i in range(n):
        u = (px[i] - x0) / dx
        v = (py[i] - y0) / dx
        if not (0.0 <= u <= nx - 1.0) or not (0.0 <= v <= ny - 1.0):
            out[i] = np.nan
            continue
        i0 = int(u)
        j0 = int(v)
        if i0 >= nx - 1:
            i0 = nx - 2
        if j0 >= ny - 1:
            j0 = ny - 2
        fu = u - i0
        fv = v - j0
        out[i] = (
            values[j0, i0] * (1 - fu) * (1 - fv)
            + values[j0, i0 + 1] * fu * (1 - fv)
            + values[j0 + 1, i0] * (1 - fu) * fv
            + values[j0 + 1, i0 + 1] * fu * fv
        )
    return out


@njit(cache=True, parallel=True)
def circle_averages(values, x0, y0, dx, cx, cy, radii, n_ang, half_plane):
    """Mean of the bilinearly interpolated field over circle/arc boundaries.

    For half-plane windows the circle is intersected with {Im z >= 0}; a
    boundary center gives the upper semicircle.  Trapezoid weights on open
    arcs, uniform weights on full circles.  NaN when the arc exits the grid.
    """
    ny, nx = values.shape
    n = cx.shape[0]
    out = np.empty(n)
    for c in prange(n):
        r = radii[c]
        na = n_ang[c]
        ccx = cx[c]
        ccy = cy[c]
        full = True
        th0 = 0.0
        th1 = 2.0 * math.pi
        if half_plane and ccy < r:
            full = False
            s = ccy / r
            if s > 1.0:
                s = 1.0
            a = math.asin(s)
            th0 = -a
            th1 = math.pi + a
        tot = 0.0
        wsum = 0.0
        bad = False
        for j in range(na):
            if full:
                th = th0 + (th1 - th0) * j / na
                wgt = 1.0
            else:
                th = th0 + (th1 - th0) * j / (na - 1)
                wgt = 1.0 if 0 < j < na - 1 else 0.5
            px = ccx + r * math.cos(th)
            py = ccy + r * math.sin(th)
            if py < 0.0:
                py = 0.0
            u = (px - x0) / dx
            v = (py - y0) / dx
            if not (0.0 <= u <= nx - 1.0) or not (0.0 <= v <= ny - 1.0):
                bad = True
                break
            i0 = int(u)
            j0 = int(v)
            if i0 >= nx - 1:
                i0 = nx - 2
            if j0 >= ny - 1:
                j0 = ny - 2
            fu = u - i0
            fv = v - j0
            val = (
                values[j0, i0] * (1 - fu) * (1 - fv)
                + values[j0, i0 + 1] * fu * (1 - fv)
                + values[j0 + 1, i0] * (1 - fu) * fv
                + values[j0 + 1, i0 + 1] * fu * fv
            )
            tot += wgt * val
            wsum += wgt
        if bad:
            out[c] = np.nan
        else:
            out[c] = tot / wsum
    return out
