"""Longley-Rice ITM 1.2.2, point-to-point mode, over a pluggable arithmetic.

The routines follow the structure of the NTIA reference code (qlrps, qlrpfl,
hzns, z1sq1, d1thx, lrprop, alos, adiff, ascat, avar and their helpers).  The
reference keeps cross-call state in function statics; here it lives on a
``_Prop`` instance created per prediction, so concurrent predictions never
share anything.

Expression order matches the reference so that native doubles reproduce it
and p-bit runs round at the same places.  Literal constants used as operands
are exact doubles; constants stored into model variables are rounded to the
working precision first (``m.num``).
"""

from __future__ import annotations

from .model import ComputationError, InvalidInputError
from .trace import NO_TRACE

_AVAR_TABLES = {
    # climate 1..7 columns
    "bv1": (-9.67, -0.62, 1.26, -9.21, -0.62, -0.39, 3.15),
    "bv2": (12.7, 9.19, 15.5, 9.05, 9.19, 2.86, 857.9),
    "xv1": (144.9e3, 228.9e3, 262.6e3, 84.1e3, 228.9e3, 141.7e3, 2222.0e3),
    "xv2": (190.3e3, 205.2e3, 185.2e3, 101.1e3, 205.2e3, 315.9e3, 164.8e3),
    "xv3": (133.8e3, 143.6e3, 99.8e3, 98.6e3, 143.6e3, 167.4e3, 116.3e3),
    "bsm1": (2.13, 2.66, 6.11, 1.98, 2.68, 6.86, 8.51),
    "bsm2": (159.5, 7.67, 6.65, 13.11, 7.16, 10.38, 169.8),
    "xsm1": (762.2e3, 100.4e3, 138.2e3, 139.1e3, 93.7e3, 187.8e3, 609.8e3),
    "xsm2": (123.6e3, 172.5e3, 242.2e3, 132.7e3, 186.8e3, 169.6e3, 119.9e3),
    "xsm3": (94.5e3, 136.4e3, 178.6e3, 193.5e3, 133.5e3, 108.9e3, 106.6e3),
    "bsp1": (2.11, 6.87, 10.08, 3.68, 4.75, 8.58, 8.43),
    "bsp2": (102.3, 15.53, 9.60, 159.3, 8.12, 13.97, 8.19),
    "xsp1": (636.9e3, 138.7e3, 165.3e3, 464.4e3, 93.2e3, 216.0e3, 136.2e3),
    "xsp2": (134.8e3, 143.7e3, 225.7e3, 93.1e3, 135.9e3, 152.0e3, 188.5e3),
    "xsp3": (95.6e3, 98.6e3, 129.7e3, 94.2e3, 113.4e3, 122.7e3, 122.9e3),
    "bsd1": (1.224, 0.801, 1.380, 1.000, 1.224, 1.518, 1.518),
    "bzd1": (1.282, 2.161, 1.282, 20.0, 1.282, 1.282, 1.282),
    "bfm1": (1.0, 1.0, 1.0, 1.0, 0.92, 1.0, 1.0),
    "bfm2": (0.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0),
    "bfm3": (0.0, 0.0, 0.0, 0.0, 1.77, 0.0, 0.0),
    "bfp1": (1.0, 0.93, 1.0, 0.93, 0.93, 1.0, 1.0),
    "bfp2": (0.0, 0.31, 0.0, 0.19, 0.31, 0.0, 0.0),
    "bfp3": (0.0, 2.00, 0.0, 1.79, 2.00, 0.0, 0.0),
}

_H0F_A = (25.0, 80.0, 177.0, 395.0, 705.0)
_H0F_B = (24.0, 45.0, 68.0, 80.0, 105.0)

_AHD_A = (133.4, 104.6, 71.8)
_AHD_B = (0.332e-3, 0.212e-3, 0.157e-3)
_AHD_C = (-4.343, -1.086, 2.171)


class _Prop:
    """Mutable per-prediction state (the reference's prop/propa/propv)."""

    __slots__ = (
        # prop
        "aref", "dist", "hg", "wn", "dh", "ens", "gme", "zgnd", "he", "dl", "the",
        "kwx", "mdp",
        # propa
        "dlsa", "dx", "ael", "ak1", "ak2", "aed", "emd", "aes", "ems", "dls", "dla", "tha",
        # propv
        "sgc", "lvar", "mdvar", "klim",
        # statics of lrprop / alos / adiff / ascat
        "dmin", "xae", "wls", "wd1", "xd1", "afo", "qk", "aht", "xht",
        "ad", "rr", "etq", "h0s",
        # profile
        "z", "np", "xi",
        # horizon search result before qlrpfl adjusts dl
        "terrain_dl", "los",
    )

    def __init__(self):
        self.kwx = 0
        self.mdp = -1
        self.lvar = 5


# C semantics of the reference's helpers: a NaN operand fails the comparison,
# so mymax(nan, 0) is 0 but mymax(0, nan) is nan


def _dim(m, x, y):
    """Fortran DIM: positive difference."""
    return x - y if x > y else m.num(0.0)


def _min(a, b):
    return a if a < b else b


def _max(a, b):
    return a if a > b else b


# ---------------------------------------------------------------------------
# helpers with closed forms
#
# No domain checks here: inside the model a reduced-precision run may feed
# them anything, and like the reference they let NaN propagate.  The public
# wrappers in ``api`` validate their arguments.


def aknfe(m, tr, v2):
    if tr.branch("aknfe.small_arg", v2 < 5.76):
        return 6.02 + 9.11 * m.sqrt(v2) - 1.27 * v2
    return 12.953 + 4.343 * m.log(v2)


def fht(m, tr, x, pk):
    if tr.branch("fht.small_x", x < 200.0):
        w = -m.log(pk)
        if tr.branch("fht.asymptotic", pk < 1e-5 or x * m.pow(w, 3.0) > 5495.0):
            fhtv = m.num(-117.0)
            if tr.branch("fht.x_above_1", x > 1.0):
                fhtv = 17.372 * m.log(x) + fhtv
        else:
            fhtv = 2.5e-5 * x * x / pk - 8.686 * w - 15.0
    else:
        fhtv = 0.05751 * x - 4.343 * m.log(x)
        if tr.branch("fht.blend", x < 2000.0):
            w = 0.0134 * x * m.exp(-0.005 * x)
            fhtv = (1.0 - w) * fhtv + w * (17.372 * m.log(x) - 117.0)
    return fhtv


def h0f(m, tr, r, et):
    it = m.trunc(et)
    if it <= 0:
        it = 1
        q = m.num(0.0)
    elif it >= 5:
        it = 5
        q = m.num(0.0)
    else:
        q = et - it
    tr.index("h0f.index", it)
    x = m.pow(1.0 / r, 2.0)
    h0fv = 4.343 * m.log((_H0F_A[it - 1] * x + _H0F_B[it - 1]) * x + 1.0)
    if tr.branch("h0f.interpolate", q != 0.0):
        h0fv = (1.0 - q) * h0fv + q * 4.343 * m.log((_H0F_A[it] * x + _H0F_B[it]) * x + 1.0)
    return h0fv


def ahd(m, tr, td):
    if tr.branch("ahd.segment_short", td <= 10e3):
        i = 0
    elif tr.branch("ahd.segment_mid", td <= 70e3):
        i = 1
    else:
        i = 2
    return _AHD_A[i] + _AHD_B[i] * td + _AHD_C[i] * m.log(td)


def qerfi(m, tr, q):
    c0, c1, c2 = 2.515516698, 0.802853, 0.010328
    d1, d2, d3 = 1.432788, 0.189269, 0.001308
    x = 0.5 - q
    t = _max(0.5 - m.fabs(x), 0.000001)
    t = m.sqrt(-2.0 * m.log(t))
    v = t - ((c2 * t + c1) * t + c0) / (((d3 * t + d2) * t + d1) * t + 1.0)
    if tr.branch("qerfi.upper_half", x < 0.0):
        v = -v
    return v


def free_space_loss(m, f_mhz, d_km):
    return 32.45 + 20.0 * m.log10(f_mhz) + 20.0 * m.log10(d_km)


# ---------------------------------------------------------------------------
# preparation


def qlrps(m, tr, s, fmhz, zsys, en0, ipol, eps, sgm):
    gma = 157e-9
    s.wn = fmhz / 47.7
    s.ens = en0
    if tr.branch("qlrps.refractivity_height_scaling", zsys != 0.0):
        s.ens = s.ens * m.exp(-zsys / 9460.0)
    s.gme = gma * (1.0 - 0.04665 * m.exp(s.ens / 179.3))
    zq = m.complex(eps, 376.62 * sgm / s.wn)
    zgnd = m.csqrt(zq - 1.0)
    if ipol != 0:
        zgnd = zgnd / zq
    s.zgnd = zgnd


def hzns(m, tr, s):
    z, np_, xi = s.z, s.np, s.xi
    za = z[0] + s.hg[0]
    zb = z[np_] + s.hg[1]
    qc = 0.5 * s.gme
    q = qc * s.dist
    the1 = (zb - za) / s.dist
    the0 = the1 - q
    the1 = -the1 - q
    dl0 = s.dist
    dl1 = s.dist
    wq = True
    if np_ >= 2:
        sa = m.num(0.0)
        sb = s.dist
        for i in range(1, np_):
            sa = sa + xi
            sb = sb - xi
            q = z[i] - (qc * sa + the0) * sa - za
            if tr.branch("hzns.tx_obstruction", q > 0.0):
                the0 = the0 + q / sa
                dl0 = sa
                wq = False
            if not wq:
                q = z[i] - (qc * sb + the1) * sb - zb
                if tr.branch("hzns.rx_obstruction", q > 0.0):
                    the1 = the1 + q / sb
                    dl1 = sb
    s.the = [the0, the1]
    s.dl = [dl0, dl1]
    s.terrain_dl = (dl0, dl1)
    s.los = wq


def z1sq1(m, tr, z, n_intervals, xi, x1, x2):
    """Least-squares line through ``z`` between x1 and x2; heights at both ends."""
    xn = m.num(n_intervals)
    xa = m.num(tr.index("z1sq1.start", m.trunc(_dim(m, x1 / xi, 0.0))))
    xb = xn - tr.index("z1sq1.end", m.trunc(_dim(m, xn, x2 / xi)))
    if tr.branch("z1sq1.widen_window", xb <= xa):
        xa = _dim(m, xa, 1.0)
        xb = xn - _dim(m, xn, xb + 1.0)
    ja = m.trunc(xa)
    jb = m.trunc(xb)
    if not (0 <= ja <= n_intervals and 0 <= jb <= n_intervals):
        # the reference would read outside the profile array here
        raise ComputationError(f"least-squares window [{ja}, {jb}] outside profile of {n_intervals} intervals")
    n = jb - ja
    xa = xb - xa
    x = -0.5 * xa
    xb = xb + x
    a = 0.5 * (z[ja] + z[jb])
    b = 0.5 * (z[ja] - z[jb]) * x
    for _ in range(2, n + 1):
        ja += 1
        x = x + 1.0
        a = a + z[ja]
        b = b + z[ja] * x
    a = a / xa
    b = b * 12.0 / ((xa * xa + 2.0) * xa)
    z0 = a - b * xb
    zn = a + b * (xn - xb)
    return z0, zn


def d1thx(m, tr, s, x1, x2):
    """Interdecile range of the detrended profile between x1 and x2 (delta h)."""
    z, np_ = s.z, s.np
    xa = x1 / s.xi
    xb = x2 / s.xi
    if tr.branch("d1thx.short_span", xb - xa < 2.0):
        return m.num(0.0)
    ka = tr.index("d1thx.ka", m.trunc(0.1 * (xb - xa + 8.0)))
    ka = min(max(4, ka), 25)
    n = 10 * ka - 5
    kb = n - ka + 1
    sn = m.num(n - 1)
    xb = (xb - xa) / sn
    k = tr.index("d1thx.first_sample", m.trunc(xa + 1.0))
    if not 0 <= k <= np_:
        raise ComputationError(f"resampling start {k} outside profile of {np_} intervals")
    xa = xa - k
    samples = []
    # z[-1] stands in for pfl[1] (the spacing) when k == 0, as in the reference
    for _ in range(n):
        while tr.branch("d1thx.advance", xa > 0.0 and k < np_):
            xa = xa - 1.0
            k += 1
        prev = z[k - 1] if k >= 1 else s.xi
        samples.append(z[k] + (z[k] - prev) * xa)
        xa = xa + xb
    xa, xb = z1sq1(m, tr, samples, n - 1, 1.0, m.num(0.0), sn)
    xb = (xb - xa) / sn
    for j in range(n):
        samples[j] = samples[j] - xa
        xa = xa + xb
    # order statistics of the detrended samples (largest first)
    ranked = sorted(samples, reverse=True)
    d = ranked[ka - 1] - ranked[kb - 1]
    return d / (1.0 - 0.8 * m.exp(-(x2 - x1) / 50.0e3))


def qlrpfl(m, tr, s):
    """Profile preprocessing: horizons, delta h, effective heights."""
    z, np_ = s.z, s.np
    s.dist = m.num(np_) * s.xi
    hzns(m, tr, s)
    xl = [_min(15.0 * s.hg[j], 0.1 * s.dl[j]) for j in range(2)]
    xl[1] = s.dist - xl[1]
    s.dh = d1thx(m, tr, s, xl[0], xl[1])
    if tr.branch("qlrpfl.smooth_earth_horizons", s.dl[0] + s.dl[1] > 1.5 * s.dist):
        za, zb = z1sq1(m, tr, z, np_, s.xi, xl[0], xl[1])
        s.he = [s.hg[0] + _dim(m, z[0], za), s.hg[1] + _dim(m, z[np_], zb)]
        for j in range(2):
            s.dl[j] = m.sqrt(2.0 * s.he[j] / s.gme) * m.exp(-0.07 * m.sqrt(s.dh / _max(s.he[j], 5.0)))
        q = s.dl[0] + s.dl[1]
        if tr.branch("qlrpfl.stretch_heights", q <= s.dist):
            q = m.pow(s.dist / q, 2.0)
            for j in range(2):
                s.he[j] = s.he[j] * q
                s.dl[j] = m.sqrt(2.0 * s.he[j] / s.gme) * m.exp(
                    -0.07 * m.sqrt(s.dh / _max(s.he[j], 5.0))
                )
        for j in range(2):
            q = m.sqrt(2.0 * s.he[j] / s.gme)
            s.the[j] = (0.65 * s.dh * (q / s.dl[j] - 1.0) - 2.0 * s.he[j]) / q
    else:
        za, _ = z1sq1(m, tr, z, np_, s.xi, xl[0], 0.9 * s.dl[0])
        _, zb = z1sq1(m, tr, z, np_, s.xi, s.dist - 0.9 * s.dl[1], xl[1])
        s.he = [s.hg[0] + _dim(m, z[0], za), s.hg[1] + _dim(m, z[np_], zb)]
    s.mdp = -1
    s.lvar = max(s.lvar, 3)
    if s.mdvar >= 0:
        s.lvar = max(s.lvar, 4)
    if s.klim > 0:
        s.lvar = 5


# ---------------------------------------------------------------------------
# attenuation regimes


def adiff_setup(m, tr, s):
    third = m.num(1.0) / 3.0
    q = s.hg[0] * s.hg[1]
    s.qk = s.he[0] * s.he[1] - q
    if s.mdp < 0:
        q = q + 10.0
    s.wd1 = m.sqrt(1.0 + s.qk / q)
    s.xd1 = s.dla + s.tha / s.gme
    q = (1.0 - 0.8 * m.exp(-s.dlsa / 50e3)) * s.dh
    q = q * (0.78 * m.exp(-m.pow(q / 16.0, 0.25)))
    s.afo = _min(m.num(15.0), 2.171 * m.log(1.0 + 4.77e-4 * s.hg[0] * s.hg[1] * s.wn * q))
    s.qk = 1.0 / m.cabs(s.zgnd)
    s.aht = m.num(20.0)
    s.xht = m.num(0.0)
    for j in range(2):
        a = 0.5 * m.pow(s.dl[j], 2.0) / s.he[j]
        wa = m.pow(a * s.wn, third)
        pk = s.qk / wa
        q = (1.607 - pk) * 151.0 * wa * s.dl[j] / a
        s.xht = s.xht + q
        s.aht = s.aht + fht(m, tr, q, pk)


def adiff(m, tr, s, d):
    third = m.num(1.0) / 3.0
    th = s.tha + d * s.gme
    ds = d - s.dla
    q = 0.0795775 * s.wn * ds * m.pow(th, 2.0)
    adiffv = aknfe(m, tr, q * s.dl[0] / (ds + s.dl[0])) + aknfe(m, tr, q * s.dl[1] / (ds + s.dl[1]))
    a = ds / th
    wa = m.pow(a * s.wn, third)
    pk = s.qk / wa
    q = (1.607 - pk) * 151.0 * wa * th + s.xht
    ar = 0.05751 * q - 4.343 * m.log(q) - s.aht
    q = (s.wd1 + s.xd1 / d) * _min((1.0 - 0.8 * m.exp(-d / 50e3)) * s.dh * s.wn, 6283.2)
    wd = 25.1 / (25.1 + m.sqrt(q))
    return ar * wd + (1.0 - wd) * adiffv + s.afo


def ascat_setup(m, tr, s):
    s.ad = s.dl[0] - s.dl[1]
    s.rr = s.he[1] / s.he[0]
    if tr.branch("ascat.swap_ends", s.ad < 0.0):
        s.ad = -s.ad
        s.rr = 1.0 / s.rr
    s.etq = (5.67e-6 * s.ens - 2.32e-3) * s.ens + 0.031
    s.h0s = m.num(-15.0)


def ascat(m, tr, s, d):
    if tr.branch("ascat.reuse_h0", s.h0s > 15.0):
        h0 = s.h0s
    else:
        th = s.the[0] + s.the[1] + d * s.gme
        r2 = 2.0 * s.wn * th
        r1 = r2 * s.he[0]
        r2 = r2 * s.he[1]
        if tr.branch("ascat.low_r", r1 < 0.2 and r2 < 0.2):
            return m.num(1001.0)
        ss = (d - s.ad) / (d + s.ad)
        q = s.rr / ss
        ss = _max(m.num(0.1), ss)
        q = _min(_max(m.num(0.1), q), 10.0)
        z0 = (d - s.ad) * (d + s.ad) * th * 0.25 / d
        et = (s.etq * m.exp(-m.pow(_min(m.num(1.7), z0 / 8.0e3), 6.0)) + 1.0) * z0 / 1.7556e3
        ett = _max(et, 1.0)
        h0 = (h0f(m, tr, r1, ett) + h0f(m, tr, r2, ett)) * 0.5
        h0 = h0 + _min(h0, (1.38 - m.log(ett)) * m.log(ss) * m.log(q) * 0.49)
        h0 = _dim(m, h0, 0.0)
        if tr.branch("ascat.low_et", et < 1.0):
            h0 = et * h0 + (1.0 - et) * 4.343 * m.log(
                m.pow((1.0 + 1.4142 / r1) * (1.0 + 1.4142 / r2), 2.0) * (r1 + r2) / (r1 + r2 + 2.8284)
            )
        if tr.branch("ascat.keep_previous_h0", h0 > 15.0 and s.h0s >= 0.0):
            h0 = s.h0s
    s.h0s = h0
    th = s.tha + d * s.gme
    return (
        ahd(m, tr, th * d)
        + 4.343 * m.log(47.7 * s.wn * m.pow(th, 4.0))
        - 0.1 * (s.ens - 301.0) * m.exp(-th * d / 40e3)
        + h0
    )


def alos_setup(m, tr, s):
    s.wls = 0.021 / (0.021 + s.wn * s.dh / _max(m.num(10e3), s.dlsa))


def alos(m, tr, s, d):
    q = (1.0 - 0.8 * m.exp(-d / 50e3)) * s.dh
    sl = 0.78 * q * m.exp(-m.pow(q / 16.0, 0.25))
    q = s.he[0] + s.he[1]
    sps = q / m.sqrt(d * d + q * q)
    r = (sps - s.zgnd) / (sps + s.zgnd) * m.exp(-_min(m.num(10.0), s.wn * sl * sps))
    q = r.real * r.real + r.imag * r.imag
    if tr.branch("alos.reflection_renorm", q < 0.25 or q < sps):
        r = r * m.sqrt(sps / q)
    alosv = s.emd * d + s.aed
    q = s.wn * s.he[0] * s.he[1] * 2.0 / d
    if tr.branch("alos.phase_clamp", q > 1.57):
        q = 3.14 - 2.4649 / q
    c = m.complex(m.cos(q), -m.sin(q)) + r
    return (-4.343 * m.log(c.real * c.real + c.imag * c.imag) - alosv) * s.wls + alosv


def lrprop(m, tr, s):
    """Reference attenuation at ``s.dist`` (point-to-point: setup and evaluation)."""
    third = m.num(1.0) / 3.0
    s.dls = [m.sqrt(2.0 * s.he[j] / s.gme) for j in range(2)]
    s.dlsa = s.dls[0] + s.dls[1]
    s.dla = s.dl[0] + s.dl[1]
    s.tha = _max(s.the[0] + s.the[1], -s.dla * s.gme)

    if tr.branch("lrprop.kwx_frequency", s.wn < 0.838 or s.wn > 210.0):
        s.kwx = max(s.kwx, 1)
    for j in range(2):
        if tr.branch("lrprop.kwx_height", s.hg[j] < 1.0 or s.hg[j] > 1000.0):
            s.kwx = max(s.kwx, 1)
    for j in range(2):
        if tr.branch(
            "lrprop.kwx_horizon",
            abs(s.the[j]) > 200e-3 or s.dl[j] < 0.1 * s.dls[j] or s.dl[j] > 3.0 * s.dls[j],
        ):
            s.kwx = max(s.kwx, 3)
    zr, zi = s.zgnd.real, s.zgnd.imag
    if tr.branch(
        "lrprop.kwx_environment",
        s.ens < 250.0 or s.ens > 400.0 or s.gme < 75e-9 or s.gme > 250e-9
        or zr <= abs(zi) or s.wn < 0.419 or s.wn > 420.0,
    ):
        s.kwx = 4
    for j in range(2):
        if tr.branch("lrprop.kwx_height_hard", s.hg[j] < 0.5 or s.hg[j] > 3000.0):
            s.kwx = 4
    s.dmin = abs(s.he[0] - s.he[1]) / 200e-3
    adiff_setup(m, tr, s)
    s.xae = m.pow(s.wn * m.pow(s.gme, 2.0), -third)
    d3 = _max(s.dlsa, 1.3787 * s.xae + s.dla)
    d4 = d3 + 2.7574 * s.xae
    a3 = adiff(m, tr, s, d3)
    a4 = adiff(m, tr, s, d4)
    s.emd = (a4 - a3) / (d4 - d3)
    s.aed = a3 - s.emd * d3

    if s.dist > 0.0:
        if tr.branch("lrprop.kwx_distance_long", s.dist > 1000e3):
            s.kwx = max(s.kwx, 1)
        if tr.branch("lrprop.kwx_distance_dmin", s.dist < s.dmin):
            s.kwx = max(s.kwx, 3)
        if tr.branch("lrprop.kwx_distance_hard", s.dist < 1e3 or s.dist > 2000e3):
            s.kwx = 4

    aref = None
    if tr.branch("lrprop.los_region", s.dist < s.dlsa):
        alos_setup(m, tr, s)
        d2 = s.dlsa
        a2 = s.aed + d2 * s.emd
        d0 = 1.908 * s.wn * s.he[0] * s.he[1]
        if tr.branch("lrprop.aed_nonnegative", s.aed >= 0.0):
            d0 = _min(d0, 0.5 * s.dla)
            d1 = d0 + 0.25 * (s.dla - d0)
        else:
            d1 = _max(-s.aed / s.emd, 0.25 * s.dla)
        a1 = alos(m, tr, s, d1)
        wq = False
        if tr.branch("lrprop.two_point_fit", d0 < d1):
            a0 = alos(m, tr, s, d0)
            q = m.log(d2 / d0)
            s.ak2 = _max(
                m.num(0.0),
                ((d2 - d0) * (a1 - a0) - (d1 - d0) * (a2 - a0))
                / ((d2 - d0) * m.log(d1 / d0) - (d1 - d0) * q),
            )
            wq = tr.branch("lrprop.log_term_fit", s.aed >= 0.0 or s.ak2 > 0.0)
            if wq:
                s.ak1 = (a2 - a0 - s.ak2 * q) / (d2 - d0)
                if tr.branch("lrprop.ak1_negative", s.ak1 < 0.0):
                    s.ak1 = m.num(0.0)
                    s.ak2 = _dim(m, a2, a0) / q
                    if tr.branch("lrprop.ak2_zero", s.ak2 == 0.0):
                        s.ak1 = s.emd
        if not wq:
            s.ak1 = _dim(m, a2, a1) / (d2 - d1)
            s.ak2 = m.num(0.0)
            if tr.branch("lrprop.ak1_zero", s.ak1 == 0.0):
                s.ak1 = s.emd
        s.ael = a2 - s.ak1 * d2 - s.ak2 * m.log(d2)
        if s.dist > 0.0:
            aref = s.ael + s.ak1 * s.dist + s.ak2 * m.log(s.dist)

    if tr.branch("lrprop.scatter_region", s.dist <= 0.0 or s.dist >= s.dlsa):
        ascat_setup(m, tr, s)
        d5 = s.dla + 200e3
        d6 = d5 + 200e3
        a6 = ascat(m, tr, s, d6)
        a5 = ascat(m, tr, s, d5)
        if tr.branch("lrprop.scatter_usable", a5 < 1000.0):
            s.ems = (a6 - a5) / 200e3
            s.dx = _max(
                s.dlsa,
                _max(s.dla + 0.3 * s.xae * m.log(47.7 * s.wn), (a5 - s.aed - s.ems * d5) / (s.emd - s.ems)),
            )
            s.aes = (s.emd - s.ems) * s.dx + s.aed
        else:
            s.ems = s.emd
            s.aes = s.aed
            s.dx = m.num(10.0e6)
        if tr.branch("lrprop.beyond_scatter_crossover", s.dist > s.dx):
            aref = s.aes + s.ems * s.dist
        else:
            aref = s.aed + s.emd * s.dist

    if aref is None:
        raise ComputationError("no propagation regime selected for this distance")
    # mymax(aref, 0): a NaN from an out-of-range regime fit also lands on 0
    if tr.branch("lrprop.clamp_negative", not aref > 0.0):
        aref = m.num(0.0)
    s.aref = aref
    return aref


def classify_mode(m, tr, s) -> str:
    """Regime label in the reference's convention (terrain horizons vs. distance)."""
    q = s.dist - s.dla
    if tr.branch("mode.los", m.trunc(q) < 0):
        return "line-of-sight"
    if tr.branch("mode.diffraction", s.dist <= s.dlsa or s.dist <= s.dx):
        return "diffraction"
    return "scatter"


# ---------------------------------------------------------------------------
# variability


def _curve(m, c1, c2, x1, x2, x3, de):
    return (c1 + c2 / (1.0 + m.pow((de - x2) / x3, 2.0))) * m.pow(de / x1, 2.0) / (
        1.0 + m.pow(de / x1, 2.0)
    )


def avar(m, tr, s, zzt, zzl, zzc):
    """Attenuation at the requested time/location/situation deviates.

    Returns the full quantile attenuation (reference attenuation included).
    """
    if s.klim not in range(1, 8):
        raise InvalidInputError(f"climate code must be 1-7, got {s.klim!r}")
    third = m.num(1.0) / 3.0
    k = s.klim - 1
    t = {name: m.num(col[k]) for name, col in _AVAR_TABLES.items()}

    kdv = s.mdvar
    ws = kdv >= 20
    if ws:
        kdv -= 20
    w1 = kdv >= 10
    if w1:
        kdv -= 10
    if kdv < 0 or kdv > 3:
        kdv = 0
        s.kwx = max(s.kwx, 2)

    q = m.log(0.133 * s.wn)
    gm = t["bfm1"] + t["bfm2"] / (m.pow(t["bfm3"] * q, 2.0) + 1.0)
    gp = t["bfp1"] + t["bfp2"] / (m.pow(t["bfp3"] * q, 2.0) + 1.0)
    dexa = m.sqrt(18e6 * s.he[0]) + m.sqrt(18e6 * s.he[1]) + m.pow(575.7e12 / s.wn, third)
    if tr.branch("avar.dist_below_dexa", s.dist < dexa):
        de = 130e3 * s.dist / dexa
    else:
        de = 130e3 + s.dist - dexa
    vmd = _curve(m, t["bv1"], t["bv2"], t["xv1"], t["xv2"], t["xv3"], de)
    sgtm = _curve(m, t["bsm1"], t["bsm2"], t["xsm1"], t["xsm2"], t["xsm3"], de) * gm
    sgtp = _curve(m, t["bsp1"], t["bsp2"], t["xsp1"], t["xsp2"], t["xsp3"], de) * gp
    sgtd = sgtp * t["bsd1"]
    zd = t["bzd1"]
    tgtd = (sgtp - sgtd) * zd
    if w1:
        sgl = m.num(0.0)
    else:
        q = (1.0 - 0.8 * m.exp(-s.dist / 50e3)) * s.dh * s.wn
        sgl = 10.0 * q / (q + 13.0)
    if ws:
        vs0 = m.num(0.0)
    else:
        vs0 = m.pow(5.0 + 3.0 * m.exp(-de / 100e3), 2.0)
    s.lvar = 0

    zt, zl, zc = zzt, zzl, zzc
    if kdv == 0:
        zt = zc
        zl = zc
    elif kdv == 1:
        zl = zc
    elif kdv == 2:
        zl = zt
    if tr.branch("avar.kwx_deviate", abs(zt) > 3.1 or abs(zl) > 3.1 or abs(zc) > 3.1):
        s.kwx = max(s.kwx, 1)
    if tr.branch("avar.zt_negative", zt < 0.0):
        sgt = sgtm
    elif tr.branch("avar.zt_within_zd", zt <= zd):
        sgt = sgtp
    else:
        sgt = sgtd + tgtd / zt
    rt, rl = 7.8, 24.0
    vs = vs0 + m.pow(sgt * zt, 2.0) / (rt + zc * zc) + m.pow(sgl * zl, 2.0) / (rl + zc * zc)
    if kdv == 0:
        yr = m.num(0.0)
        s.sgc = m.sqrt(sgt * sgt + sgl * sgl + vs)
    elif kdv == 1:
        yr = sgt * zt
        s.sgc = m.sqrt(sgl * sgl + vs)
    elif kdv == 2:
        yr = m.sqrt(sgt * sgt + sgl * sgl) * zt
        s.sgc = m.sqrt(vs)
    else:
        yr = sgt * zt + sgl * zl
        s.sgc = m.sqrt(vs)
    avarv = s.aref - vmd - yr - s.sgc * zc
    if tr.branch("avar.soft_floor", avarv < 0.0):
        avarv = avarv * (29.0 - avarv) / (29.0 - 10.0 * avarv)
    return avarv


# ---------------------------------------------------------------------------
# driver pieces


def new_state(m, tr, elevations, spacing, params) -> _Prop:
    """Ingest a profile and parameters at the working precision; run qlrps."""
    s = _Prop()
    s.z = [m.num(e) for e in elevations]
    s.np = len(elevations) - 1
    s.xi = m.num(spacing)
    s.hg = [m.num(params.tx_height), m.num(params.rx_height)]
    s.klim = params.climate
    s.mdvar = params.mdvar
    s.dx = None

    # system elevation: mean over the interior window used by the reference
    # (indices counted in the reference's header-prefixed profile array)
    ja = tr.index("point_to_point.zsys_window", m.trunc(3.0 + 0.1 * m.num(s.np)))
    jb = s.np - ja + 6
    zsys = m.num(0.0)
    for i in range(ja - 1, jb):
        zsys = zsys + (m.num(s.np) if i == 0 else s.xi if i == 1 else s.z[i - 2])
    zsys = zsys / (jb - ja + 1)

    qlrps(
        m, tr, s,
        m.num(params.frequency), zsys, m.num(params.surface_refractivity),
        params.ipol, m.num(params.permittivity), m.num(params.conductivity),
    )
    return s
