"""Branch-decision recording.

Every data-dependent decision in the model core goes through a recorder:
comparisons call ``tr.branch(site, cond)`` and float-to-integer truncations
call ``tr.index(site, n)``.  A truncation is logged as the site id with the
chosen integer appended (``"z1sq1.start#12"``) and ``taken=True``, so two
runs that pick different indices diverge at that entry.

Two runs of the same case at different precisions followed the same
control path exactly when their traces are equal.

Site ids
--------
qlrps.refractivity_height_scaling   system elevation is nonzero, so refractivity is scaled
point_to_point.zsys_window#n        start index of the system-elevation averaging window
hzns.tx_obstruction                 profile point rises above the current Tx horizon ray
hzns.rx_obstruction                 same, seen from Rx (only once Tx is obstructed)
z1sq1.start#n / z1sq1.end#n         least-squares window bounds after truncation
z1sq1.widen_window                  window was empty and is widened by one sample
d1thx.short_span                    fewer than two samples between endpoints; delta-h is 0
d1thx.ka#n                          decile index chosen from the span length
d1thx.first_sample#n                first profile index used for resampling
d1thx.advance                       resampling cursor advances one profile interval
qlrpfl.smooth_earth_horizons        horizons far apart: effective heights from a full-path fit
qlrpfl.stretch_heights              smooth-earth horizons fall short of the path; heights rescaled
lrprop.kwx_*                        nominal-range checks (warnings only)
lrprop.los_region                   distance is inside the smooth-earth line-of-sight range
lrprop.aed_nonnegative              diffraction intercept is nonnegative
lrprop.two_point_fit                d0 < d1, so a three-point LOS fit is attempted
lrprop.log_term_fit                 three-point fit keeps the logarithmic term
lrprop.ak1_negative                 linear LOS coefficient came out negative; correction applied
lrprop.ak2_zero                     logarithmic coefficient collapsed to zero after correction
lrprop.ak1_zero                     linear coefficient of the two-point fit is zero
lrprop.scatter_region               distance is at or beyond the smooth-earth horizon
lrprop.scatter_usable               troposcatter estimate below the 1000 dB sentinel
lrprop.beyond_scatter_crossover     distance exceeds the diffraction/scatter crossover
lrprop.clamp_negative               reference attenuation not positive (or NaN); set to 0
alos.reflection_renorm              reflection coefficient renormalised
alos.phase_clamp                    two-ray phase beyond 1.57 rad is folded
aknfe.small_arg                     knife-edge argument below v^2 = 5.76: polynomial form
fht.small_x                         height-gain argument below 200
fht.asymptotic                      small-x regime uses the asymptotic form
fht.x_above_1                       asymptotic form adds the log term
fht.blend                           200 <= x < 2000 blends the two forms
ascat.swap_ends                     horizon-distance difference was negative
ascat.reuse_h0                      previous frequency-gain value reused (> 15 dB)
ascat.low_r                         both r parameters below 0.2: scatter unusable
ascat.low_et                        scattering efficiency below 1: interpolated
ascat.keep_previous_h0              large h0 replaced by the previous value
h0f.index#n                         table row after clamping
h0f.interpolate                     fractional part nonzero, interpolate rows
ahd.segment_short / ahd.segment_mid distance-function breakpoints (10 km, 70 km)
avar.kwx_deviate                    a normal deviate exceeds 3.1
avar.dist_below_dexa                distance below the effective horizon-extended distance
avar.zt_negative / avar.zt_within_zd  time-variability branch
avar.soft_floor                     negative attenuation compressed toward 0
qerfi.upper_half                    q > 0.5, sign flipped
mode.los / mode.diffraction         regime reported in the result
"""

from __future__ import annotations

import hashlib


class BranchTrace:
    """Ordered list of ``(site_id, taken)`` events for one model evaluation."""

    __slots__ = ("events",)

    def __init__(self, events=None):
        self.events = list(events) if events is not None else []

    def branch(self, site: str, cond) -> bool:
        cond = bool(cond)
        self.events.append((site, cond))
        return cond

    def index(self, site: str, n: int) -> int:
        self.events.append((f"{site}#{n}", True))
        return n

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __eq__(self, other):
        if isinstance(other, BranchTrace):
            return self.events == other.events
        return NotImplemented

    def __repr__(self):
        return f"BranchTrace({len(self.events)} events)"

    def digest(self) -> int:
        return trace_hash(self.events)

    def first_divergence(self, other: "BranchTrace"):
        """Index and site id of the first differing event, or ``None``."""
        return first_divergence(self.events, other.events)


class _NoTrace:
    __slots__ = ()

    @staticmethod
    def branch(site, cond):
        return bool(cond)

    @staticmethod
    def index(site, n):
        return n


NO_TRACE = _NoTrace()


def trace_hash(events) -> int:
    """Stable unsigned 64-bit digest of an event sequence."""
    h = hashlib.blake2b(digest_size=8)
    for site, taken in events:
        h.update(site.encode())
        h.update(b"\x01" if taken else b"\x00")
    return int.from_bytes(h.digest(), "big")


def first_divergence(a, b):
    for i, (ea, eb) in enumerate(zip(a, b)):
        if ea != eb:
            return i, ea[0]
    if len(a) != len(b):
        i = min(len(a), len(b))
        longer = a if len(a) > len(b) else b
        return i, longer[i][0]
    return None
