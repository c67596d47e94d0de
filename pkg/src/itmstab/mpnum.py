"""Binary floating point with a caller-chosen significand width.

Values are thin immutable wrappers around MPFR numbers (through gmpy2).  Every
operation rounds to nearest, ties to even, at an explicit precision ``p``
counted in significand bits (11 = IEEE half, 24 = single, 53 = double).  The
exponent range is effectively unbounded, so there is no overflow or gradual
underflow until a value is narrowed with :func:`to_native`.

Precision travels with the values: a result produced from two ``MPFloat``
operands is rounded at their (common) precision.  Plain Python ``int`` and
``float`` operands are taken exactly, the way ``mpfr_mul_d`` treats a double
constant.  No process-wide rounding mode or precision is consulted.
"""

from __future__ import annotations

import re
from functools import lru_cache

import gmpy2
from gmpy2 import mpc, mpfr

__all__ = [
    "MPFloat",
    "MPComplex",
    "PrecisionError",
    "make",
    "from_native",
    "arith",
    "elem",
    "cplx",
    "to_native",
]

_DECIMAL = re.compile(r"^\s*[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\s*$")


class PrecisionError(ValueError):
    """Operands carry incompatible precisions or ``p`` is out of range."""


@lru_cache(maxsize=None)
def _context(p: int):
    if not isinstance(p, int) or p < 2:
        raise PrecisionError(f"precision must be an integer >= 2, got {p!r}")
    return gmpy2.context(
        precision=p,
        emax=gmpy2.get_emax_max(),
        emin=gmpy2.get_emin_min(),
        subnormalize=False,
        round=gmpy2.RoundToNearest,
    )


def _raw(x):
    if isinstance(x, MPFloat):
        return x._v
    if isinstance(x, MPComplex):
        return x._v
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return mpfr(x, max(x.bit_length(), 2))
    if isinstance(x, float):
        return mpfr(x, 53)
    if isinstance(x, complex):
        return mpc(x, (53, 53))
    raise TypeError(f"unsupported operand type {type(x).__name__}")


class MPFloat:
    """A p-bit binary floating-point value.

    ``domain_error`` is set on NaN results produced by an elementary function
    evaluated outside its real domain.
    """

    __slots__ = ("_v", "_p", "domain_error")

    def __init__(self, value, p: int, *, _exact: bool = False):
        ctx = _context(p)
        if _exact:
            v = value
        elif isinstance(value, str):
            v = _parse(value, p)
        else:
            v = ctx.plus(_raw(value))
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_p", p)
        object.__setattr__(self, "domain_error", False)

    def __setattr__(self, name, value):
        raise AttributeError("MPFloat is immutable")

    @classmethod
    def _wrap(cls, v, p, domain_error=False):
        out = object.__new__(cls)
        object.__setattr__(out, "_v", v)
        object.__setattr__(out, "_p", p)
        object.__setattr__(out, "domain_error", domain_error)
        return out

    @property
    def precision(self) -> int:
        return self._p

    @property
    def raw(self):
        """The underlying gmpy2 ``mpfr``."""
        return self._v

    def as_integer_ratio(self):
        n, d = self._v.as_integer_ratio()
        return int(n), int(d)

    def is_nan(self) -> bool:
        return gmpy2.is_nan(self._v)

    def is_inf(self) -> bool:
        return gmpy2.is_infinite(self._v)

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self._v)

    def is_signed(self) -> bool:
        return gmpy2.is_signed(self._v)

    # arithmetic -----------------------------------------------------------

    def _operand(self, other):
        if isinstance(other, MPFloat):
            if other._p != self._p:
                raise PrecisionError(
                    f"mixed precisions {self._p} and {other._p}; use arith() to combine"
                )
            return other._v
        if isinstance(other, (int, float)) and not isinstance(other, bool):
            return _raw(other)
        return None

    def _binary(self, other, op, reflected=False):
        if isinstance(other, (MPComplex, complex)):
            return NotImplemented
        o = self._operand(other)
        if o is None:
            return NotImplemented
        ctx = _context(self._p)
        a, b = (o, self._v) if reflected else (self._v, o)
        return MPFloat._wrap(getattr(ctx, op)(a, b), self._p)

    def __add__(self, other):
        return self._binary(other, "add")

    def __radd__(self, other):
        return self._binary(other, "add", True)

    def __sub__(self, other):
        return self._binary(other, "sub")

    def __rsub__(self, other):
        return self._binary(other, "sub", True)

    def __mul__(self, other):
        return self._binary(other, "mul")

    def __rmul__(self, other):
        return self._binary(other, "mul", True)

    def __truediv__(self, other):
        return self._binary(other, "div")

    def __rtruediv__(self, other):
        return self._binary(other, "div", True)

    def __pow__(self, other):
        return self._binary(other, "pow")

    def __rpow__(self, other):
        return self._binary(other, "pow", True)

    def __neg__(self):
        return MPFloat._wrap(-self._v, self._p)

    def __pos__(self):
        return self

    def __abs__(self):
        return MPFloat._wrap(abs(self._v), self._p)

    # comparisons are exact, whatever the operand precisions -----------------

    def _cmp_operand(self, other):
        if isinstance(other, MPFloat):
            return other._v
        if isinstance(other, (int, float)) and not isinstance(other, bool):
            return other
        return None

    def __eq__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v == o

    def __ne__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v != o

    def __lt__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v < o

    def __le__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v <= o

    def __gt__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v > o

    def __ge__(self, other):
        o = self._cmp_operand(other)
        return NotImplemented if o is None else self._v >= o

    def __hash__(self):
        return hash(self._v)

    def __float__(self):
        return to_native(self)

    def __int__(self):
        # truncate toward zero like a C cast; int(mpfr) alone rounds to nearest
        return int(gmpy2.trunc(self._v))

    def __bool__(self):
        return not gmpy2.is_zero(self._v)

    def __repr__(self):
        return f"MPFloat('{self._v}', p={self._p})"

    def __str__(self):
        return str(self._v)

    def __reduce__(self):
        return (_unpickle_float, (gmpy2.to_binary(self._v), self._p))


def _unpickle_float(blob, p):
    return MPFloat._wrap(gmpy2.from_binary(blob), p)


class MPComplex:
    """Complex value whose real and imaginary parts share one precision."""

    __slots__ = ("_v", "_p")

    def __init__(self, re, im=0.0, p: int | None = None):
        if p is None:
            p = re.precision if isinstance(re, MPFloat) else 53
        ctx = _context(p)
        v = mpc(ctx.plus(_raw(re)), ctx.plus(_raw(im)))
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_p", p)

    def __setattr__(self, name, value):
        raise AttributeError("MPComplex is immutable")

    @classmethod
    def _wrap(cls, v, p):
        out = object.__new__(cls)
        object.__setattr__(out, "_v", v)
        object.__setattr__(out, "_p", p)
        return out

    @property
    def precision(self) -> int:
        return self._p

    @property
    def real(self) -> MPFloat:
        return MPFloat._wrap(self._v.real, self._p)

    @property
    def imag(self) -> MPFloat:
        return MPFloat._wrap(self._v.imag, self._p)

    def _operand(self, other):
        if isinstance(other, (MPComplex, MPFloat)):
            if other._p != self._p:
                raise PrecisionError(f"mixed precisions {self._p} and {other._p}")
            return other._v
        if isinstance(other, (int, float, complex)) and not isinstance(other, bool):
            return _raw(other)
        return None

    def _binary(self, other, op, reflected=False):
        o = self._operand(other)
        if o is None:
            return NotImplemented
        ctx = _context(self._p)
        a, b = (o, self._v) if reflected else (self._v, o)
        return MPComplex._wrap(getattr(ctx, op)(a, b), self._p)

    def __add__(self, other):
        return self._binary(other, "add")

    def __radd__(self, other):
        return self._binary(other, "add", True)

    def __sub__(self, other):
        return self._binary(other, "sub")

    def __rsub__(self, other):
        return self._binary(other, "sub", True)

    def __mul__(self, other):
        return self._binary(other, "mul")

    def __rmul__(self, other):
        return self._binary(other, "mul", True)

    def __truediv__(self, other):
        return self._binary(other, "div")

    def __rtruediv__(self, other):
        return self._binary(other, "div", True)

    def __neg__(self):
        return MPComplex._wrap(-self._v, self._p)

    def __abs__(self) -> MPFloat:
        return MPFloat._wrap(_context(self._p).abs(self._v), self._p)

    def __eq__(self, other):
        o = self._operand(other)
        return NotImplemented if o is None else self._v == o

    def __hash__(self):
        return hash(self._v)

    def __complex__(self):
        return complex(to_native(self.real), to_native(self.imag))

    def __repr__(self):
        return f"MPComplex('{self._v}', p={self._p})"


# module-level operations ------------------------------------------------------


def _parse(text: str, p: int):
    if not isinstance(text, str) or not _DECIMAL.match(text):
        raise ValueError(f"malformed decimal numeral: {text!r}")
    return mpfr(text.strip(), p, 10, _context(p))


def make(text: str, p: int) -> MPFloat:
    """Parse a signed decimal numeral to the nearest p-bit value (ties to even)."""
    _context(p)
    return MPFloat._wrap(_parse(text, p), p)


def from_native(x: float, p: int) -> MPFloat:
    """Round a native double (or int) to p bits."""
    return MPFloat._wrap(_context(p).plus(_raw(x)), p)


_ARITH = {"add": "add", "sub": "sub", "mul": "mul", "div": "div"}


def arith(op: str, a, b, p: int) -> MPFloat:
    """Exact ``a op b`` rounded once to p bits.

    Operands may have any precision (or be native numbers); they are used
    exactly.
    """
    try:
        name = _ARITH[op]
    except KeyError:
        raise ValueError(f"unknown arithmetic op {op!r}") from None
    ctx = _context(p)
    return MPFloat._wrap(getattr(ctx, name)(_raw(a), _raw(b)), p)


def _domain_ok(fn, args) -> bool:
    x = args[0]
    if gmpy2.is_nan(x):
        return True
    if fn == "sqrt":
        return x >= 0
    if fn in ("ln", "log10"):
        return x >= 0
    if fn == "pow":
        y = args[1]
        return not (x < 0 and gmpy2.is_finite(y) and not gmpy2.is_integer(y))
    return True


_ELEM = {
    "sqrt": "sqrt",
    "exp": "exp",
    "ln": "log",
    "log10": "log10",
    "pow": "pow",
    "sin": "sin",
    "cos": "cos",
    "atan2": "atan2",
    "abs": "abs",
    "floor": "floor",
    "min": "minnum",
    "max": "maxnum",
}

_ARITY = {"pow": 2, "atan2": 2, "min": 2, "max": 2}


def elem(fn: str, *args, p: int) -> MPFloat:
    """Elementary function of p-bit (or native) arguments, rounded to p bits.

    Outside the real domain the result is NaN with ``domain_error`` set.
    """
    try:
        name = _ELEM[fn]
    except KeyError:
        raise ValueError(f"unknown elementary function {fn!r}") from None
    if len(args) != _ARITY.get(fn, 1):
        raise TypeError(f"{fn} takes {_ARITY.get(fn, 1)} argument(s), got {len(args)}")
    ctx = _context(p)
    raw = [_raw(a) for a in args]
    if not _domain_ok(fn, raw):
        return MPFloat._wrap(mpfr("nan"), p, domain_error=True)
    return MPFloat._wrap(getattr(ctx, name)(*raw), p)


def cplx(op: str, a, b=None):
    """Complex ``add``/``mul``/``div`` of two operands, or ``abs``/``sqrt`` of one.

    Results are correctly rounded by MPFR (componentwise for complex results).
    """
    if not isinstance(a, MPComplex):
        raise TypeError("first operand must be MPComplex")
    if op in ("add", "mul", "div"):
        if b is None:
            raise TypeError(f"{op} needs two operands")
        if isinstance(b, (MPComplex, MPFloat)) and b.precision != a.precision:
            raise PrecisionError("operand precisions differ")
        return getattr(a, f"__{'truediv' if op == 'div' else op}__")(b)
    if op == "abs":
        return abs(a)
    if op == "sqrt":
        return MPComplex._wrap(_context(a.precision).sqrt(a._v), a.precision)
    raise ValueError(f"unknown complex op {op!r}")


def to_native(x) -> float:
    """Round to 53 significand bits, then narrow to an IEEE double.

    Values beyond the double range become infinities; tiny values land on the
    nearest subnormal or zero.
    """
    if isinstance(x, float):
        return x
    v = x._v if isinstance(x, MPFloat) else _raw(x)
    return float(_context(53).plus(v))
