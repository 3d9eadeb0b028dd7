"""Compiled inner loops for the hyperbolic walk.

Matrices are passed as four parallel arrays ``a, b, c, d`` (ball elements
sorted by displacement). Accumulated products are carried as a unit-scale
matrix plus a power-of-two exponent.
"""

import math

import numpy as np
from numba import njit

TIE = 1e-12
LN2 = math.log(2.0)
DET_FIX_MAX_EXPONENT = 4

MEMBER = 1
OUTSIDE = 0
UNCERTIFIED = -1


@njit(cache=True)
def hdist(p, q):
    dx = p.real - q.real
    dy = p.imag - q.imag
    return 2.0 * math.asinh(math.sqrt(dx * dx + dy * dy) / (2.0 * math.sqrt(p.imag * q.imag)))


@njit(cache=True)
def moeb(a, b, c, d, z):
    return (a * z + b) / (c * z + d)


@njit(cache=True)
def in_domain_status(z, center, center_abs, a, b, c, d, disp, radius):
    """Strict Dirichlet membership of ``z`` in D_center.

    ``center`` must lie in D(o) with ``center_abs = d(o, center)``; only
    elements with displacement <= 2 d(z, center) + 2 center_abs can matter.
    """
    r0 = hdist(z, center)
    bound = 2.0 * r0 + 2.0 * center_abs + 1e-9
    if bound > radius:
        return UNCERTIFIED
    for k in range(1, disp.shape[0]):
        if disp[k] > bound:
            break
        gc = moeb(a[k], b[k], c[k], d[k], center)
        if hdist(z, gc) <= r0 + TIE:
            return OUTSIDE
    return MEMBER


@njit(cache=True)
def in_domain_batch(z, center, center_abs, a, b, c, d, disp, radius):
    out = np.empty(z.shape[0], dtype=np.int8)
    for i in range(z.shape[0]):
        out[i] = in_domain_status(z[i], center[i], center_abs[i], a, b, c, d, disp, radius)
    return out


@njit(cache=True)
def lift_index(w, x, w_abs, x_abs, a, b, c, d, disp):
    """Index k minimising d(g_k x, w) over the ball.

    Returns (k, status) with status 0 = ok, 1 = tie, 2 = ball too small.
    """
    yy = 4.0 * w.imag * x.imag
    best = np.inf
    second = np.inf
    kbest = -1
    n = disp.shape[0]
    k = 0
    while k < n:
        if disp[k] > w_abs + x_abs + best + 1e-9:
            break
        al = c[k] * w - a[k]
        be = d[k] * w - b[k]
        v = al * x + be
        q = v.real * v.real + v.imag * v.imag
        dk = 2.0 * math.asinh(math.sqrt(q / yy))
        if dk < best:
            second = best
            best = dk
            kbest = k
        elif dk < second:
            second = dk
        k += 1
    if k == n and disp[n - 1] <= w_abs + x_abs + best + 1e-9:
        return kbest, 2
    if second - best <= TIE:
        return kbest, 1
    return kbest, 0


@njit(cache=True)
def lift_index_batch(w, x, w_abs, x_abs, a, b, c, d, disp):
    k = np.empty(w.shape[0], dtype=np.int64)
    st = np.empty(w.shape[0], dtype=np.int8)
    for i in range(w.shape[0]):
        k[i], st[i] = lift_index(w[i], x[i], w_abs[i], x_abs[i], a, b, c, d, disp)
    return k, st


@njit(cache=True)
def renorm(m00, m01, m10, m11, s):
    nrm = math.sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11)
    f, e = math.frexp(nrm)
    e -= 1
    m00 = math.ldexp(m00, -e)
    m01 = math.ldexp(m01, -e)
    m10 = math.ldexp(m10, -e)
    m11 = math.ldexp(m11, -e)
    s += e
    if -DET_FIX_MAX_EXPONENT <= s <= DET_FIX_MAX_EXPONENT:
        det = math.ldexp(m00 * m11 - m01 * m10, 2 * s)
        if det > 0.0:
            r = 1.0 / math.sqrt(det)
            m00 *= r
            m01 *= r
            m10 *= r
            m11 *= r
            nrm = math.sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11)
            f, e = math.frexp(nrm)
            e -= 1
            m00 = math.ldexp(m00, -e)
            m01 = math.ldexp(m01, -e)
            m10 = math.ldexp(m10, -e)
            m11 = math.ldexp(m11, -e)
            s += e
    return m00, m01, m10, m11, s


@njit(cache=True)
def dist_to_base_scaled(m00, m01, m10, m11, s):
    q = math.hypot(m00 - m11, m01 + m10)
    if s < 480:
        return 2.0 * math.asinh(math.ldexp(0.5 * q, s))
    return 2.0 * (math.log(0.5 * q) + s * LN2 + LN2)


@njit(cache=True)
def angle_scaled(m00, m01, m10, m11):
    ar = 0.5 * (m00 + m11)
    ai = 0.5 * (m01 - m10)
    br = 0.5 * (m00 - m11)
    bi = -0.5 * (m01 + m10)
    # beta / conj(alpha) = beta * alpha / |alpha|^2
    re = br * ar - bi * ai
    im = br * ai + bi * ar
    return math.atan2(im, re)


@njit(cache=True)
def with_translator(m00, m01, m10, m11, w):
    """(g) @ [[sqrt y, x / sqrt y], [0, 1 / sqrt y]] for the point w."""
    r = math.sqrt(w.imag)
    t01 = w.real / r
    t11 = 1.0 / r
    return m00 * r, m00 * t01 + m01 * t11, m10 * r, m10 * t01 + m11 * t11


@njit(cache=True, nogil=True)
def run_walk(X, g0, s0, w0, a, b, c, d, disp, dists, steps, angles):
    """Advance every trajectory through its increments ``X[t, :]``.

    Fills ``dists[t, j]`` = d(o, Z_j), ``steps[t, j-1]`` = ball index of the
    step element and ``angles[t, j]``. Returns a status per trajectory
    (0 ok, 1 tie, 2 ball too small); failed rows are left partially filled.
    """
    T, n = X.shape
    status = np.zeros(T, dtype=np.int8)
    for t in range(T):
        m00, m01, m10, m11 = g0[t, 0, 0], g0[t, 0, 1], g0[t, 1, 0], g0[t, 1, 1]
        s = s0[t]
        m00, m01, m10, m11, s = renorm(m00, m01, m10, m11, s)
        w = w0[t]
        w_abs = hdist(w, 1j)
        h00, h01, h10, h11 = with_translator(m00, m01, m10, m11, w)
        dists[t, 0] = dist_to_base_scaled(h00, h01, h10, h11, s)
        angles[t, 0] = angle_scaled(h00, h01, h10, h11)
        for j in range(n):
            x = X[t, j]
            x_abs = hdist(x, 1j)
            k, st = lift_index(w, x, w_abs, x_abs, a, b, c, d, disp)
            if st != 0:
                status[t] = st
                break
            steps[t, j] = k
            n00 = m00 * a[k] + m01 * c[k]
            n01 = m00 * b[k] + m01 * d[k]
            n10 = m10 * a[k] + m11 * c[k]
            n11 = m10 * b[k] + m11 * d[k]
            m00, m01, m10, m11, s = renorm(n00, n01, n10, n11, s)
            w = x
            w_abs = x_abs
            h00, h01, h10, h11 = with_translator(m00, m01, m10, m11, w)
            dists[t, j + 1] = dist_to_base_scaled(h00, h01, h10, h11, s)
            angles[t, j + 1] = angle_scaled(h00, h01, h10, h11)
    return status


@njit(cache=True)
def distances_from(steps, w, start, a, b, c, d, out):
    """out[t, j] = d(Z_start, Z_{start + j}) from the factored path."""
    T = steps.shape[0]
    span = out.shape[1]
    for t in range(T):
        wa = w[t, start]
        ra = math.sqrt(wa.imag)
        # inverse translator of w_start
        m00, m01, m10, m11 = 1.0 / ra, -wa.real / ra, 0.0, ra
        s = 0
        m00, m01, m10, m11, s = renorm(m00, m01, m10, m11, s)
        for j in range(span):
            if j > 0:
                k = steps[t, start + j - 1]
                n00 = m00 * a[k] + m01 * c[k]
                n01 = m00 * b[k] + m01 * d[k]
                n10 = m10 * a[k] + m11 * c[k]
                n11 = m10 * b[k] + m11 * d[k]
                m00, m01, m10, m11, s = renorm(n00, n01, n10, n11, s)
            h00, h01, h10, h11 = with_translator(m00, m01, m10, m11, w[t, start + j])
            out[t, j] = dist_to_base_scaled(h00, h01, h10, h11, s)


@njit(cache=True)
def tail_gromov_min(steps_row, w_row, dists_row, starts, a, b, c, d):
    """min over n, m >= N of <Z_n, Z_m>_o for each N in ``starts``."""
    L = w_row.shape[0]
    lo = starts.min()
    # row_min[n] = min over m >= n of <Z_n, Z_m>_o
    row_min = np.full(L, np.inf)
    for n in range(lo, L):
        wa = w_row[n]
        ra = math.sqrt(wa.imag)
        m00, m01, m10, m11, s = renorm(1.0 / ra, -wa.real / ra, 0.0, ra, 0)
        best = dists_row[n]
        for m in range(n + 1, L):
            k = steps_row[m - 1]
            n00 = m00 * a[k] + m01 * c[k]
            n01 = m00 * b[k] + m01 * d[k]
            n10 = m10 * a[k] + m11 * c[k]
            n11 = m10 * b[k] + m11 * d[k]
            m00, m01, m10, m11, s = renorm(n00, n01, n10, n11, s)
            h00, h01, h10, h11 = with_translator(m00, m01, m10, m11, w_row[m])
            dnm = dist_to_base_scaled(h00, h01, h10, h11, s)
            gp = 0.5 * (dists_row[n] + dists_row[m] - dnm)
            if gp < best:
                best = gp
        row_min[n] = best
    out = np.empty(starts.shape[0])
    for i in range(starts.shape[0]):
        v = np.inf
        for n in range(starts[i], L):
            if row_min[n] < v:
                v = row_min[n]
        out[i] = max(v, 0.0)
    return out


@njit(cache=True)
def lift_multiplicity(z, a, b, c, d, disp, radius, r_dom):
    """For each z, the number of ball elements g with g.z strictly inside D(o).

    Only elements with displacement <= d(o, z) + r_dom can qualify. Returns -1
    where membership of some candidate cannot be certified.
    """
    out = np.zeros(z.shape[0], dtype=np.int32)
    for i in range(z.shape[0]):
        zi = z[i]
        lim = hdist(zi, 1j) + r_dom
        cnt = 0
        for k in range(disp.shape[0]):
            if disp[k] > lim:
                break
            gz = moeb(a[k], b[k], c[k], d[k], zi)
            if hdist(gz, 1j) > r_dom:
                continue
            st = in_domain_status(gz, 1j, 0.0, a, b, c, d, disp, radius)
            if st == UNCERTIFIED:
                cnt = -1
                break
            cnt += st
        out[i] = cnt
    return out


@njit(cache=True)
def log_sinh(x):
    if x <= 0.0:
        return -np.inf
    return x + math.log1p(-math.exp(-2.0 * x)) - LN2


@njit(cache=True)
def visual_angle(a, b, c):
    """Angle at o between points at distances a, b from o and c apart.

    sin^2(t/2) = sinh((c+a-b)/2) sinh((c-a+b)/2) / (sinh a sinh b), evaluated
    in log form so angles far below machine epsilon keep relative accuracy.
    """
    if a <= 0.0 or b <= 0.0:
        return 0.0
    ls = 0.5 * (log_sinh(0.5 * (c + a - b)) + log_sinh(0.5 * (c - a + b)) - log_sinh(a) - log_sinh(b))
    if ls == -np.inf:
        return 0.0
    return 2.0 * math.asin(min(1.0, math.exp(ls)))


@njit(cache=True)
def window_angle_spread(steps_row, w_row, dists_row, N, a, b, c, d):
    """max over N <= n < m <= 2N of the visual angle at o between Z_n and Z_m."""
    best = 0.0
    for n in range(N, 2 * N):
        wa = w_row[n]
        ra = math.sqrt(wa.imag)
        m00, m01, m10, m11, s = renorm(1.0 / ra, -wa.real / ra, 0.0, ra, 0)
        for m in range(n + 1, 2 * N + 1):
            k = steps_row[m - 1]
            n00 = m00 * a[k] + m01 * c[k]
            n01 = m00 * b[k] + m01 * d[k]
            n10 = m10 * a[k] + m11 * c[k]
            n11 = m10 * b[k] + m11 * d[k]
            m00, m01, m10, m11, s = renorm(n00, n01, n10, n11, s)
            h00, h01, h10, h11 = with_translator(m00, m01, m10, m11, w_row[m])
            dnm = dist_to_base_scaled(h00, h01, h10, h11, s)
            th = visual_angle(dists_row[n], dists_row[m], dnm)
            if th > best:
                best = th
    return best
