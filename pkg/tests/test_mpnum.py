import math
import pickle
import random
import struct
import threading
from fractions import Fraction

import gmpy2
import mpmath
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from itmstab.mpnum import (
    MPComplex,
    MPFloat,
    PrecisionError,
    arith,
    cplx,
    elem,
    from_native,
    make,
    to_native,
)
from rounding_oracle import isqrt_rounded, round_to_bits

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e300, max_value=1e300)
small = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)
precisions = st.sampled_from([2, 3, 11, 24, 53, 64, 113, 128, 256])


def bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def exact(x) -> Fraction:
    return Fraction(*x.as_integer_ratio())


# --- make ---------------------------------------------------------------------


def test_make_one_is_exact():
    assert exact(make("1.0", 11)) == 1


def test_make_tenth_single():
    # 13421773 / 2**27 is the 24-bit value nearest 0.1
    assert exact(make("0.1", 24)) == Fraction(13421773, 2**27)
    assert round_to_bits(Fraction(1, 10), 24) == Fraction(13421773, 2**27)


def test_make_tenth_double_matches_native_parse():
    assert bits(to_native(make("0.1", 53))) == bits(0.1)


@pytest.mark.parametrize("text", ["", "abc", "1.2.3", "1e", "--1", "0x10", "nan", "1,5"])
def test_make_rejects_malformed(text):
    with pytest.raises(ValueError):
        make(text, 53)


@pytest.mark.parametrize("p", [0, 1, -5])
def test_bad_precision(p):
    with pytest.raises(PrecisionError):
        make("1", p)


@given(st.decimals(allow_nan=False, allow_infinity=False, places=12, min_value=-10**9, max_value=10**9), precisions)
def test_make_matches_rational_oracle(d, p):
    assert exact(make(str(d), p)) == round_to_bits(Fraction(d), p)


# --- arithmetic ------------------------------------------------------------------


def test_add_small_examples():
    one = from_native(1.0, 11)
    assert exact(one + one) == 2
    assert exact(arith("add", 1.0, 2.0**-12, 11)) == 1


def test_div_one_third_matches_double():
    assert bits(to_native(arith("div", 1.0, 3.0, 53))) == bits(1.0 / 3.0)


_NATIVE = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}
_EXACT = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


@settings(max_examples=300)
@given(finite, finite, st.sampled_from(sorted(_EXACT)), precisions)
def test_arith_matches_rational_oracle(a, b, op, p):
    assume(not (op == "div" and b == 0))
    got = arith(op, a, b, p)
    want = round_to_bits(_EXACT[op](Fraction(a), Fraction(b)), p)
    assert exact(got) == want


@settings(max_examples=200)
@given(st.floats(min_value=0, max_value=1e300, allow_nan=False), precisions)
def test_sqrt_matches_rational_oracle(a, p):
    got = elem("sqrt", from_native(a, 53), p=p)
    assert exact(got) == isqrt_rounded(Fraction(a), p)


def test_double_equivalence_on_random_pairs():
    rng = random.Random(20240601)
    for _ in range(2000):
        a = struct.unpack("<d", struct.pack("<Q", rng.getrandbits(64)))[0]
        b = struct.unpack("<d", struct.pack("<Q", rng.getrandbits(64)))[0]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        for op, f in _NATIVE.items():
            try:
                want = f(a, b)
            except ZeroDivisionError:
                continue
            if not math.isfinite(want) or (want != 0 and abs(want) < 2.2250738585072014e-308):
                continue  # overflow and subnormal results are outside the contract
            assert bits(to_native(arith(op, a, b, 53))) == bits(want), (op, a, b)


@given(finite, finite, precisions)
def test_add_mul_commute(a, b, p):
    x, y = from_native(a, p), from_native(b, p)
    assert exact(x + y) == exact(y + x)
    assert exact(x * y) == exact(y * x)


def test_nan_commutes_payload_agnostic():
    nan = from_native(float("nan"), 53)
    one = from_native(1.0, 53)
    assert (nan + one).is_nan() and (one + nan).is_nan()
    assert (nan * one).is_nan() and (one * nan).is_nan()


@settings(max_examples=100)
@given(small, small, st.sampled_from(sorted(_EXACT)))
def test_more_bits_never_worse(a, b, op):
    assume(not (op == "div" and b == 0))
    truth = _EXACT[op](Fraction(a), Fraction(b))
    errs = [abs(exact(arith(op, a, b, p)) - truth) for p in (11, 24, 53, 64, 128, 256)]
    assert errs == sorted(errs, reverse=True)


def test_special_values():
    inf = from_native(float("inf"), 24)
    zero = from_native(0.0, 24)
    assert (inf - inf).is_nan()
    assert to_native(arith("div", 1.0, 0.0, 24)) == float("inf")
    assert to_native(arith("div", -1.0, 0.0, 24)) == float("-inf")
    negz = -zero
    assert negz.is_signed() and to_native(negz) == 0.0 and math.copysign(1, to_native(negz)) < 0


def test_mixed_precision_operands_rejected():
    with pytest.raises(PrecisionError):
        from_native(1.0, 24) + from_native(1.0, 53)


def test_float_operands_are_exact():
    # 0.1 as a double is exact in the product; only the result rounds
    x = from_native(3.0, 113) * 0.1
    assert exact(x) == round_to_bits(3 * Fraction(0.1), 113)


def test_exponent_range_is_wide():
    big = from_native(1e300, 53)
    assert (big * big).is_finite()
    assert to_native(big * big) == float("inf")
    tiny = from_native(1e-300, 53)
    assert to_native(tiny * tiny) == 0.0
    assert (tiny * tiny) != 0


# --- elementary functions --------------------------------------------------------


def test_sqrt_of_four_any_precision():
    for p in (2, 11, 53, 1024):
        assert exact(elem("sqrt", 4.0, p=p)) == 2


def test_log_2000():
    # independent oracle: mpmath at 400 bits
    with mpmath.workprec(400):
        man, e = mpmath.log(2000).man_exp
    truth = man * Fraction(2) ** e
    hi = exact(elem("ln", 2000.0, p=256))
    assert abs(hi - truth) <= Fraction(2) ** (3 - 256)
    assert str(elem("ln", 2000.0, p=256)).startswith("7.60090245954208236")
    assert abs(exact(elem("ln", 2000.0, p=53)) - truth) <= Fraction(2) ** (3 - 53)


def test_atan2_zero():
    for p in (11, 53, 200):
        assert exact(elem("atan2", 0.0, 1.0, p=p)) == 0


def test_domain_errors_flag_nan():
    r = elem("ln", -1.0, p=53)
    assert r.is_nan() and r.domain_error
    r = elem("sqrt", -4.0, p=24)
    assert r.is_nan() and r.domain_error
    r = elem("pow", -8.0, 0.5, p=53)
    assert r.is_nan() and r.domain_error
    assert not elem("pow", -2.0, 3.0, p=53).domain_error


@settings(max_examples=200)
@given(st.floats(min_value=1e-6, max_value=1e6), st.sampled_from(["exp", "ln", "log10", "sin", "cos", "sqrt"]),
       st.sampled_from([11, 24, 53, 64, 128]))
def test_elementary_faithful(x, fn, p):
    assume(fn != "exp" or x < 700)
    got = exact(elem(fn, x, p=p))
    ref = exact(elem(fn, x, p=p + 64))
    if ref == 0:
        assert got == 0
        return
    ulp = Fraction(2) ** (math.frexp(float(ref))[1] - p)
    assert abs(got - ref) <= ulp


def test_min_max_floor_abs():
    assert to_native(elem("min", 2.0, -3.0, p=11)) == -3.0
    assert to_native(elem("max", 2.0, -3.0, p=11)) == 2.0
    assert to_native(elem("floor", -2.5, p=11)) == -3.0
    assert to_native(elem("abs", -2.5, p=11)) == 2.5


def test_monotone_function_keeps_order():
    xs = sorted(random.Random(3).uniform(0.1, 100) for _ in range(200))
    for p in (11, 24):
        ys = [elem("ln", x, p=p) for x in xs]
        assert all(a <= b for a, b in zip(ys, ys[1:]))


# --- complex -------------------------------------------------------------------


def test_complex_abs_pythagorean():
    assert exact(cplx("abs", MPComplex(3, 4, 11))) == 5


def test_complex_i_squared():
    i = MPComplex(0, 1, 24)
    r = cplx("mul", i, i)
    assert to_native(r.real) == -1 and to_native(r.imag) == 0


def test_complex_sqrt_minus_one():
    r = cplx("sqrt", MPComplex(-1, 0, 53))
    assert to_native(r.real) == 0 and to_native(r.imag) == 1


def test_complex_add_componentwise_rounding():
    a = MPComplex(1.0, 2.0**-30, 24)
    b = MPComplex(2.0**-30, 1.0, 24)
    r = cplx("add", a, b)
    assert exact(r.real) == round_to_bits(1 + Fraction(2) ** -30, 24)
    assert exact(r.imag) == round_to_bits(1 + Fraction(2) ** -30, 24)


def test_complex_precision_mismatch():
    with pytest.raises(PrecisionError):
        cplx("add", MPComplex(1, 1, 24), MPComplex(1, 1, 53))


# --- narrowing and round trips ---------------------------------------------------


def test_to_native_examples():
    assert to_native(from_native(1.5, 11)) == 1.5
    assert bits(to_native(make("0.1", 256))) == bits(0.1)
    assert to_native(from_native(float("inf"), 64)) == float("inf")
    assert to_native(make("1e400", 64)) == float("inf")


@given(finite)
def test_round_trip_through_decimal(d):
    assert bits(to_native(make(repr(d), 53))) == bits(d)


def test_round_trip_random_doubles():
    rng = random.Random(11)
    for _ in range(2000):
        d = struct.unpack("<d", struct.pack("<Q", rng.getrandbits(64)))[0]
        if math.isfinite(d):
            assert bits(to_native(make(repr(d), 53))) == bits(d)
            assert bits(to_native(from_native(d, 53))) == bits(d)


def test_values_are_immutable_and_picklable():
    x = make("2.5", 77)
    with pytest.raises(AttributeError):
        x._v = 3
    y = pickle.loads(pickle.dumps(x))
    assert y == x and y.precision == 77


def test_int_truncates_toward_zero():
    assert int(from_native(2.7, 53)) == 2
    assert int(from_native(-2.7, 53)) == -2
    assert int(from_native(63.9999, 64)) == 63


def test_no_hidden_global_state():
    ops = [(random.Random(i).uniform(-10, 10), random.Random(i + 1).uniform(0.1, 10)) for i in range(200)]

    def run(p):
        acc = from_native(0.0, p)
        for a, b in ops:
            acc = acc + elem("sqrt", arith("mul", a, a, p), p=p) / b
        return exact(acc)

    alone = {p: run(p) for p in (11, 53, 200)}
    # interleaved on threads, with the global gmpy2 context perturbed
    gmpy2.get_context().precision = 7
    results = {}
    threads = [threading.Thread(target=lambda p=p: results.__setitem__(p, run(p))) for p in (11, 53, 200)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    gmpy2.get_context().precision = 53
    assert results == alone
