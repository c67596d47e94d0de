"""Numeric backends the model core is written against.

The core never calls ``math`` directly.  It receives one of these objects
(conventionally ``m``) and uses ``m.log``, ``m.sqrt``, ``m.complex`` and so on,
plus ordinary operators on the values those return.  ``NativeArithmetic``
runs on IEEE doubles and libm; it is the machine-precision baseline
(precision 0).  ``MPArithmetic(p)`` runs every operation at ``p`` significand
bits.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from gmpy2 import mpc

from ..mpnum import MPComplex, MPFloat, _context, _raw, from_native, to_native
from .model import ComputationError


def _libm(f, fallback):
    def op(*args):
        try:
            return np.float64(f(*args))
        except (ValueError, OverflowError):
            return fallback(*(np.float64(a) for a in args))

    op.__name__ = f.__name__
    return op


class NativeArithmetic:
    """IEEE binary64 on numpy scalars, elementary functions from libm.

    numpy scalars keep C semantics (``1/0 -> inf``) where Python floats would
    raise.  The functions go through ``math`` so results match the C
    library; outside their domain they fall back to numpy for the IEEE
    special value (``log(0) -> -inf``, ``sqrt(-1) -> nan``).  Callers
    silence numpy's floating-point warnings with ``np.errstate``.
    """

    precision = 0

    def num(self, x):
        return np.float64(x)

    def native(self, x) -> float:
        return float(x)

    log = staticmethod(_libm(math.log, np.log))
    log10 = staticmethod(_libm(math.log10, np.log10))
    exp = staticmethod(_libm(math.exp, np.exp))
    sqrt = staticmethod(_libm(math.sqrt, np.sqrt))
    pow = staticmethod(_libm(math.pow, np.power))
    sin = staticmethod(_libm(math.sin, np.sin))
    cos = staticmethod(_libm(math.cos, np.cos))
    fabs = staticmethod(np.fabs)

    @staticmethod
    def trunc(x) -> int:
        return _trunc(x)

    @staticmethod
    def complex(re, im):
        return np.complex128(complex(re, im))

    csqrt = staticmethod(np.sqrt)

    @staticmethod
    def cabs(z):
        return np.abs(z)

    def __repr__(self):
        return "NativeArithmetic()"


def _trunc(x) -> int:
    try:
        return int(x)
    except (ValueError, OverflowError):
        raise ComputationError(f"cannot truncate non-finite value {x!r} to an index") from None


class MPArithmetic:
    """All operations rounded to ``precision`` significand bits."""

    def __init__(self, p: int):
        self.precision = p
        self._ctx = _context(p)

    def _wrap1(self, name):
        f = getattr(self._ctx, name)
        p = self.precision

        def op(x):
            return MPFloat._wrap(f(x._v if isinstance(x, MPFloat) else _raw(x)), p)

        op.__name__ = name
        return op

    def __getattr__(self, name):
        # lazily bind the unary MPFR functions used by the core
        if name in ("log", "log10", "exp", "sqrt", "sin", "cos"):
            op = self._wrap1(name)
            self.__dict__[name] = op
            return op
        raise AttributeError(name)

    def num(self, x):
        if isinstance(x, MPFloat) and x.precision == self.precision:
            return x
        return from_native(x, self.precision)

    def native(self, x) -> float:
        return to_native(x)

    def pow(self, x, y):
        xv = x._v if isinstance(x, MPFloat) else _raw(x)
        yv = y._v if isinstance(y, MPFloat) else _raw(y)
        return MPFloat._wrap(self._ctx.pow(xv, yv), self.precision)

    def fabs(self, x):
        return abs(x)

    @staticmethod
    def trunc(x) -> int:
        return _trunc(x)

    def complex(self, re, im):
        ctx = self._ctx
        return MPComplex._wrap(mpc(ctx.plus(_raw(re)), ctx.plus(_raw(im))), self.precision)

    def csqrt(self, z):
        return MPComplex._wrap(self._ctx.sqrt(z._v), self.precision)

    def cabs(self, z):
        return abs(z)

    def __repr__(self):
        return f"MPArithmetic({self.precision})"


_NATIVE = NativeArithmetic()


@lru_cache(maxsize=None)
def _mp(p: int) -> MPArithmetic:
    return MPArithmetic(p)


def arithmetic_for(p: int | None):
    """Backend for precision ``p``; ``0`` or ``None`` selects native doubles."""
    if not p:
        return _NATIVE
    return _mp(int(p))
