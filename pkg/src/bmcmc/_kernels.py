"""Jitted response-probability kernels for the rating models.

The full model's cell probability is a double integral: outer over the
response criterion's drawn value c, inner over the signal strength s up
to c, with every other criterion contributing the probability that it
avoids the interval [s, c]. The fixed-signal model replaces the inner
integral with a point evaluation, leaving a single integral over c. The
overflow cell (every criterion below the signal) is a single integral of
the signal density times all criterion cdfs, or a plain cdf product when
the signal is fixed.

Discretisation choices, each forced by a measured failure mode:

* The inner integral uses composite Gauss-Legendre panels of order 8 laid
  out once per cell (width at most 3 local feature scales, edges clamped
  at the envelope boundaries of criteria much sharper than the signal).
  A fixed panel layout makes the inner result smooth in c; any adaptive
  inner rule injects level-switching noise that stalls the outer
  integrator. Panels fully below the moving limit are evaluated from
  cached node tables; only the limit panel is computed live.
* The outer integral is adaptive Romberg with a bisection backstop.
  Convergence is accepted when EITHER successive trapezoid estimates or
  successive Richardson-diagonal entries agree within tolerance: for
  integrands vanishing at both window ends the raw trapezoid column
  converges spectrally while the diagonal drags coarse-level aliasing
  along for several extra levels.

Failure (panel overflow, segment budget exhausted) returns NaN; callers
treat NaN as an uncomputable point.
"""

import math

import numpy as np
from numba import njit

INV_SQRT2 = 1.0 / math.sqrt(2.0)
INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Envelope half-width in standard deviations; beyond it a Gaussian factor
# is below 1e-15 of its peak.
WIN = 8.0

# Gauss-Legendre panel rule: order 8 is exact to ~1e-9 of the panel mass
# for Gaussian-type factors once panels are at most 3 scales wide.
GLN = 8
_nodes, _weights = np.polynomial.legendre.leggauss(GLN)
GL_X = 0.5 * (_nodes + 1.0)
GL_W = 0.5 * _weights

# Panel table capacity per cell; overflow yields NaN (uncomputable).
MAX_PANELS = 80

# Default outer tolerances. Cell values feed likelihoods compared at
# tolerances of 5e-3 and binomial-noise scales of ~1e-3, so 1e-5 relative
# with a 1e-9 absolute floor leaves two orders of headroom.
REL_TOL = 1e-5
ABS_TOL = 1e-9

# Adaptive-outer budgets: segment count, recursion stack, Romberg levels.
MAX_SEGMENTS = 256
STACK_SIZE = 64
MAX_LEVELS = 10


@njit(cache=True, inline="always")
def _ncdf(z):
    return 0.5 * math.erfc(-z * INV_SQRT2)


@njit(cache=True, inline="always")
def _start_level(width, scale):
    # First Romberg level whose node spacing resolves the finest feature
    # scale present in the segment.
    lev = 2
    span = 4.0 * scale
    while span < width and lev < 7:
        span *= 2.0
        lev += 1
    return lev


@njit(cache=True)
def _build_panels(mu_s, sg_s, mu_c, sg_c, i, glx, glw, edges, phis_w, phi_tab):
    """Lay fixed signal-axis panels for cell i and fill the node caches.

    Walks left to right over the signal envelope; the local panel width
    is 3 times the smallest scale active at the position (the signal
    itself, or any other criterion whose envelope covers the position),
    and a panel may not run past the start of an upcoming envelope of a
    criterion much sharper than the signal. Caches the weighted signal
    density and every criterion's cdf at all panel nodes. Returns the
    panel count, or -1 on overflow.
    """
    s_lo = mu_s - WIN * sg_s
    s_hi = mu_s + WIN * sg_s
    m = mu_c.shape[0]
    pos = s_lo
    ne = 0
    edges[0] = pos
    while pos < s_hi:
        sc = sg_s
        for j in range(m):
            if j != i and sg_c[j] < sc:
                if mu_c[j] - WIN * sg_c[j] <= pos < mu_c[j] + WIN * sg_c[j]:
                    sc = sg_c[j]
        nxt = pos + 3.0 * sc
        for j in range(m):
            if j != i and sg_c[j] < 0.5 * sg_s:
                zone_lo = mu_c[j] - WIN * sg_c[j]
                if pos < zone_lo < nxt:
                    nxt = zone_lo
        if nxt > s_hi:
            nxt = s_hi
        if ne + 1 >= MAX_PANELS:
            return -1
        ne += 1
        edges[ne] = nxt
        base = (ne - 1) * GLN
        w = nxt - pos
        for q in range(GLN):
            s = pos + w * glx[q]
            z = (s - mu_s) / sg_s
            phis_w[base + q] = glw[q] * w * math.exp(-0.5 * z * z) * INV_SQRT2PI / sg_s
            for j in range(m):
                phi_tab[j, base + q] = _ncdf((s - mu_c[j]) / sg_c[j])
        pos = nxt
    return ne


@njit(cache=True)
def _inner_live_f(s, mu_s, sg_s, a_resid, mu_c, sg_c, i):
    z = (s - mu_s) / sg_s
    v = math.exp(-0.5 * z * z) * INV_SQRT2PI / sg_s
    if v == 0.0:
        return 0.0
    for j in range(mu_c.shape[0]):
        if j != i:
            v *= a_resid[j] + _ncdf((s - mu_c[j]) / sg_c[j])
            if v == 0.0:
                return 0.0
    return v


@njit(cache=True)
def _inner_integral(c, mu_s, sg_s, a_resid, mu_c, sg_c, i, glx, glw,
                    edges, ne, phis_w, phi_tab):
    """Signal integral up to min(c, envelope top) over the fixed panels."""
    u = mu_s + WIN * sg_s
    if c < u:
        u = c
    if u <= edges[0]:
        return 0.0
    m = mu_c.shape[0]
    total = 0.0
    for k in range(ne):
        b = edges[k + 1]
        if b <= u:
            base = k * GLN
            acc = 0.0
            for q in range(GLN):
                v = phis_w[base + q]
                if v != 0.0:
                    for j in range(m):
                        if j != i:
                            v *= a_resid[j] + phi_tab[j, base + q]
                    acc += v
            total += acc
        else:
            a = edges[k]
            w = u - a
            if w > 0.0:
                acc = 0.0
                for q in range(GLN):
                    acc += glw[q] * _inner_live_f(
                        a + w * glx[q], mu_s, sg_s, a_resid, mu_c, sg_c, i
                    )
                total += w * acc
            break
    return total


@njit(cache=True)
def _full_outer_f(c, mu_s, sg_s, a_resid, mu_c, sg_c, i, glx, glw,
                  edges, ne, phis_w, phi_tab):
    z = (c - mu_c[i]) / sg_c[i]
    w = math.exp(-0.5 * z * z) * INV_SQRT2PI / sg_c[i]
    if w == 0.0:
        return 0.0
    # a_resid[j] = P(criterion j >= c); the inner integrand adds the
    # cdf at s, giving P(criterion j outside [s, c]).
    for j in range(mu_c.shape[0]):
        a_resid[j] = _ncdf((mu_c[j] - c) / sg_c[j])
    return w * _inner_integral(
        c, mu_s, sg_s, a_resid, mu_c, sg_c, i, glx, glw, edges, ne, phis_w, phi_tab
    )


@njit(cache=True)
def _fixed_signal_outer_f(c, s, cdf_at_s, mu_c, sg_c, i):
    z = (c - mu_c[i]) / sg_c[i]
    w = math.exp(-0.5 * z * z) * INV_SQRT2PI / sg_c[i]
    if w == 0.0:
        return 0.0
    for j in range(mu_c.shape[0]):
        if j != i:
            w *= _ncdf((mu_c[j] - c) / sg_c[j]) + cdf_at_s[j]
            if w == 0.0:
                return 0.0
    return w


@njit(cache=True)
def _full_cell(mu_s, sg_s, mu_c, sg_c, i, rel, ab, glx, glw, edges, ne, phis_w, phi_tab):
    """Outer integral over c for one cell of the full model."""
    lo = mu_c[i] - WIN * sg_c[i]
    hi = mu_c[i] + WIN * sg_c[i]
    s_lo = mu_s - WIN * sg_s
    if hi <= s_lo:
        return 0.0
    if lo < s_lo:
        lo = s_lo
    m = mu_c.shape[0]
    a_resid = np.empty(m)
    stack_a = np.empty(STACK_SIZE)
    stack_b = np.empty(STACK_SIZE)
    ra = np.empty(MAX_LEVELS + 2)
    rb = np.empty(MAX_LEVELS + 2)
    stack_a[0] = lo
    stack_b[0] = hi
    top = 1
    total = 0.0
    nseg = 0
    width = hi - lo
    while top > 0:
        top -= 1
        a = stack_a[top]
        b = stack_b[top]
        nseg += 1
        if nseg > MAX_SEGMENTS:
            return np.nan
        sc = sg_c[i]
        if sg_s < sc:
            sc = sg_s
        mid = 0.5 * (a + b)
        for j in range(m):
            if j != i and sg_c[j] < sc:
                if mu_c[j] - WIN * sg_c[j] <= mid <= mu_c[j] + WIN * sg_c[j]:
                    sc = sg_c[j]
        lev0 = _start_level(b - a, sc)
        seg_ab = ab * (b - a) / width
        h = b - a
        va = _full_outer_f(a, mu_s, sg_s, a_resid, mu_c, sg_c, i, glx, glw,
                           edges, ne, phis_w, phi_tab)
        vb = _full_outer_f(b, mu_s, sg_s, a_resid, mu_c, sg_c, i, glx, glw,
                           edges, ne, phis_w, phi_tab)
        ra[0] = 0.5 * h * (va + vb)
        tr_prev = ra[0]
        ok = False
        val = ra[0]
        for lv in range(1, MAX_LEVELS + 1):
            h *= 0.5
            tot = 0.0
            for k in range(1 << (lv - 1)):
                tot += _full_outer_f(a + (2 * k + 1) * h, mu_s, sg_s, a_resid,
                                     mu_c, sg_c, i, glx, glw, edges, ne, phis_w, phi_tab)
            tr = 0.5 * tr_prev + h * tot
            rb[0] = tr
            p4 = 1.0
            for q in range(1, lv + 1):
                p4 *= 4.0
                rb[q] = rb[q - 1] + (rb[q - 1] - ra[q - 1]) / (p4 - 1.0)
            if lv >= lev0:
                if abs(tr - tr_prev) <= rel * abs(tr) + seg_ab:
                    ok = True
                    val = tr
                    break
                if abs(rb[lv] - ra[lv - 1]) <= rel * abs(rb[lv]) + seg_ab:
                    ok = True
                    val = rb[lv]
                    break
            for q in range(lv + 1):
                ra[q] = rb[q]
            tr_prev = tr
            val = rb[lv]
        if ok:
            total += val
        else:
            if b - a < 1e-13 * width + 1e-300 or top + 2 > STACK_SIZE:
                return np.nan
            mid2 = 0.5 * (a + b)
            stack_a[top] = a
            stack_b[top] = mid2
            stack_a[top + 1] = mid2
            stack_b[top + 1] = b
            top += 2
    return total


@njit(cache=True)
def _fixed_signal_cell(s, cdf_at_s, mu_c, sg_c, i, rel, ab):
    """Outer integral over c in [s, +inf) for the fixed-signal model."""
    lo = mu_c[i] - WIN * sg_c[i]
    hi = mu_c[i] + WIN * sg_c[i]
    if lo < s:
        lo = s
    if hi <= lo:
        return 0.0
    m = mu_c.shape[0]
    stack_a = np.empty(STACK_SIZE)
    stack_b = np.empty(STACK_SIZE)
    ra = np.empty(MAX_LEVELS + 2)
    rb = np.empty(MAX_LEVELS + 2)
    stack_a[0] = lo
    stack_b[0] = hi
    top = 1
    total = 0.0
    nseg = 0
    width = hi - lo
    while top > 0:
        top -= 1
        a = stack_a[top]
        b = stack_b[top]
        nseg += 1
        if nseg > MAX_SEGMENTS:
            return np.nan
        sc = sg_c[i]
        mid = 0.5 * (a + b)
        for j in range(m):
            if j != i and sg_c[j] < sc:
                if mu_c[j] - WIN * sg_c[j] <= mid <= mu_c[j] + WIN * sg_c[j]:
                    sc = sg_c[j]
        lev0 = _start_level(b - a, sc)
        seg_ab = ab * (b - a) / width
        h = b - a
        va = _fixed_signal_outer_f(a, s, cdf_at_s, mu_c, sg_c, i)
        vb = _fixed_signal_outer_f(b, s, cdf_at_s, mu_c, sg_c, i)
        ra[0] = 0.5 * h * (va + vb)
        tr_prev = ra[0]
        ok = False
        val = ra[0]
        for lv in range(1, MAX_LEVELS + 1):
            h *= 0.5
            tot = 0.0
            for k in range(1 << (lv - 1)):
                tot += _fixed_signal_outer_f(a + (2 * k + 1) * h, s, cdf_at_s,
                                             mu_c, sg_c, i)
            tr = 0.5 * tr_prev + h * tot
            rb[0] = tr
            p4 = 1.0
            for q in range(1, lv + 1):
                p4 *= 4.0
                rb[q] = rb[q - 1] + (rb[q - 1] - ra[q - 1]) / (p4 - 1.0)
            if lv >= lev0:
                if abs(tr - tr_prev) <= rel * abs(tr) + seg_ab:
                    ok = True
                    val = tr
                    break
                if abs(rb[lv] - ra[lv - 1]) <= rel * abs(rb[lv]) + seg_ab:
                    ok = True
                    val = rb[lv]
                    break
            for q in range(lv + 1):
                ra[q] = rb[q]
            tr_prev = tr
            val = rb[lv]
        if ok:
            total += val
        else:
            if b - a < 1e-13 * width + 1e-300 or top + 2 > STACK_SIZE:
                return np.nan
            mid2 = 0.5 * (a + b)
            stack_a[top] = a
            stack_b[top] = mid2
            stack_a[top + 1] = mid2
            stack_b[top + 1] = b
            top += 2
    return total


@njit(cache=True)
def _fixed_signal_overflow(s, mu_c, sg_c):
    """Probability that every criterion draw falls below the fixed signal.

    Computed as a direct product of cdf factors rather than as one minus
    the integral cells: the complement form inherits the integration
    error of every cell, which floors the overflow probability near 1e-5
    and hides configurations that actually zero it out.
    """
    v = 1.0
    for j in range(mu_c.shape[0]):
        v *= _ncdf((s - mu_c[j]) / sg_c[j])
        if v == 0.0:
            return 0.0
    return v


@njit(cache=True)
def _full_overflow(mu_s, sg_s, mu_c, sg_c, glx, glw):
    """Probability that every criterion draw falls below the signal draw.

    Single integral of the signal density times all criterion cdfs over
    the signal envelope, on the same fixed panel layout as the cells.
    Direct for the same reason as the fixed-signal overflow.
    """
    m = mu_c.shape[0]
    edges = np.empty(MAX_PANELS + 1)
    phis_w = np.empty(MAX_PANELS * GLN)
    phi_tab = np.empty((m, MAX_PANELS * GLN))
    ne = _build_panels(mu_s, sg_s, mu_c, sg_c, -1, glx, glw, edges, phis_w, phi_tab)
    if ne < 0:
        return np.nan
    a_resid = np.zeros(m)
    top = mu_s + WIN * sg_s
    return _inner_integral(top, mu_s, sg_s, a_resid, mu_c, sg_c, -1,
                           glx, glw, edges, ne, phis_w, phi_tab)


@njit(cache=True)
def _full_row(mu_s, sg_s, mu_c, sg_c, need, rel, ab, glx, glw):
    """Integral cells 1..M of one stimulus row of the full model.

    Entries with need[i] False are left NaN and skipped. Any kernel
    failure leaves NaN in the affected slot.
    """
    m = mu_c.shape[0]
    out = np.full(m, np.nan)
    edges = np.empty(MAX_PANELS + 1)
    phis_w = np.empty(MAX_PANELS * GLN)
    phi_tab = np.empty((m, MAX_PANELS * GLN))
    for i in range(m):
        if not need[i]:
            continue
        ne = _build_panels(mu_s, sg_s, mu_c, sg_c, i, glx, glw, edges, phis_w, phi_tab)
        if ne < 0:
            return out
        out[i] = _full_cell(mu_s, sg_s, mu_c, sg_c, i, rel, ab, glx, glw,
                            edges, ne, phis_w, phi_tab)
    return out


@njit(cache=True)
def _fixed_signal_row(s, mu_c, sg_c, need, rel, ab):
    """Integral cells 1..M of one stimulus row of the fixed-signal model."""
    m = mu_c.shape[0]
    out = np.full(m, np.nan)
    cdf_at_s = np.empty(m)
    for j in range(m):
        cdf_at_s[j] = _ncdf((s - mu_c[j]) / sg_c[j])
    for i in range(m):
        if need[i]:
            out[i] = _fixed_signal_cell(s, cdf_at_s, mu_c, sg_c, i, rel, ab)
    return out


def full_model_row(mu_s, sg_s, mu_c, sg_c, need, rel_tol=REL_TOL, abs_tol=ABS_TOL):
    """Python entry point for the full-model row kernel."""
    return _full_row(
        float(mu_s), float(sg_s),
        np.ascontiguousarray(mu_c, dtype=np.float64),
        np.ascontiguousarray(sg_c, dtype=np.float64),
        np.ascontiguousarray(need, dtype=np.bool_),
        float(rel_tol), float(abs_tol), GL_X, GL_W,
    )


def fixed_signal_row(s, mu_c, sg_c, need, rel_tol=REL_TOL, abs_tol=ABS_TOL):
    """Python entry point for the fixed-signal row kernel."""
    return _fixed_signal_row(
        float(s),
        np.ascontiguousarray(mu_c, dtype=np.float64),
        np.ascontiguousarray(sg_c, dtype=np.float64),
        np.ascontiguousarray(need, dtype=np.bool_),
        float(rel_tol), float(abs_tol),
    )


def full_model_overflow(mu_s, sg_s, mu_c, sg_c):
    """Python entry point for the full-model overflow cell."""
    return _full_overflow(
        float(mu_s), float(sg_s),
        np.ascontiguousarray(mu_c, dtype=np.float64),
        np.ascontiguousarray(sg_c, dtype=np.float64),
        GL_X, GL_W,
    )


def fixed_signal_overflow(s, mu_c, sg_c):
    """Python entry point for the fixed-signal overflow cell."""
    return _fixed_signal_overflow(
        float(s),
        np.ascontiguousarray(mu_c, dtype=np.float64),
        np.ascontiguousarray(sg_c, dtype=np.float64),
    )
