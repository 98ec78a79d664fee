import math
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dasep.qspecial import (
    SeriesControl,
    SeriesWarning,
    e_q_big,
    e_q_small,
    exp_q,
    phi21,
    q_binomial,
    q_factorial,
    q_krawtchouk,
    q_number,
    q_pochhammer,
)

QS = (0.3, 0.5, 0.7)


def test_q_number_examples():
    assert q_number(0, 0.4) == 0
    assert q_number(1, 0.4) == 1
    assert q_number(3, 0.5) == pytest.approx(1.75, rel=1e-15)


def test_q_number_rejects_q_one():
    with pytest.raises(ValueError):
        q_number(2, 1.0)
    with pytest.raises(ValueError):
        q_number(-1, 0.5)


def test_q_factorial_examples():
    assert q_factorial(0, 0.3) == 1
    assert q_factorial(1, 0.8) == 1
    assert q_factorial(2, 0.5) == pytest.approx(1.5, rel=1e-15)


def test_exp_q_against_exact_rational_sum():
    q = Fraction(1, 2)
    total, fact = Fraction(0), Fraction(1)
    for n in range(200):
        if n:
            fact *= (1 - q**n) / (1 - q)
        total += Fraction(1) / fact
    assert exp_q(1.0, 0.5) == pytest.approx(float(total), rel=1e-14)


def test_exp_q_trivial_and_slope():
    assert exp_q(0.0, 0.5) == 1.0
    h = 1e-7
    assert (exp_q(h, 0.5) - 1.0) / h == pytest.approx(1.0, rel=1e-6)


def test_exp_q_flags_non_convergence():
    with pytest.warns(SeriesWarning):
        _, info = exp_q(50.0, 0.5, SeriesControl(max_terms=3), full_output=True)
    assert info.stop == "max_terms" and not info.converged


def test_q_pochhammer_examples():
    assert q_pochhammer(0.7, 0.5, 0) == 1.0
    assert q_pochhammer(1.0, 0.5, 4) == 0.0
    assert q_pochhammer(0.5, 0.5, 2) == pytest.approx(0.375, rel=1e-15)


def test_q_pochhammer_infinite_requires_small_q():
    with pytest.raises(ValueError):
        q_pochhammer(0.1, 1.2, math.inf)
    val, info = q_pochhammer(0.3, 0.5, math.inf, full_output=True)
    assert info.stop == "tail"
    assert val == pytest.approx(q_pochhammer(0.3, 0.5, 200), rel=1e-15)


@given(a=st.floats(-2, 2), q=st.sampled_from(QS), m=st.integers(0, 30))
def test_q_pochhammer_step(a, q, m):
    lhs = q_pochhammer(a, q, m + 1)
    rhs = q_pochhammer(a, q, m) * (1 - a * q**m)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def _gauss_binomial_table(N, b):
    # Pascal rule [n,k] = [n-1,k-1] + b^k [n-1,k] in base b
    T = [[1.0]]
    for n in range(1, N + 1):
        row = [1.0]
        for k in range(1, n):
            row.append(T[n - 1][k - 1] + b**k * T[n - 1][k])
        row.append(1.0)
        T.append(row)
    return T


@pytest.mark.parametrize("q", QS)
def test_q_binomial_matches_pascal_oracle(q):
    T = _gauss_binomial_table(12, q * q)
    for n in range(13):
        for k in range(n + 1):
            expected = q ** (-k * (n - k)) * T[n][k]
            assert q_binomial(n, k, q) == pytest.approx(expected, rel=1e-10)


def test_q_binomial_examples():
    assert q_binomial(5, 0, 0.4) == 1.0
    assert q_binomial(5, 5, 0.4) == pytest.approx(1.0, rel=1e-12)
    assert q_binomial(2, 1, 0.5) == pytest.approx(2.5, rel=1e-14)
    with pytest.raises(ValueError):
        q_binomial(2, 3, 0.5)


def test_q_binomial_inversion_symmetry():
    for n, k in [(4, 2), (6, 1), (7, 3)]:
        assert q_binomial(n, k, 0.6) == pytest.approx(q_binomial(n, k, 1 / 0.6), rel=1e-10)


def test_q_exponentials_trivial():
    assert e_q_small(0.0, 0.5) == 1.0
    assert e_q_big(0.0, 0.5) == 1.0


def test_q_exponentials_are_inverse():
    assert e_q_small(0.2, 0.5) * e_q_big(-0.2, 0.5) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("q", QS)
@pytest.mark.parametrize("z", [-0.5, -0.3, 0.0, 0.1, 0.3, 0.5])
def test_e_q_series_equals_product(q, z):
    assert e_q_small(z, q) == pytest.approx(e_q_small(z, q, method="product"), rel=1e-10)
    assert e_q_big(z, q) == pytest.approx(e_q_big(z, q, method="product"), rel=1e-10)


def test_e_q_product_domain():
    with pytest.raises(ValueError):
        e_q_small(1.5, 0.5, method="product")


def test_phi21_trivial_cases():
    assert phi21(1.0, 0.3, 0.2, 0.5, 0.9) == 1.0
    assert phi21(0.4, 0.3, 0.2, 0.5, 0.0) == 1.0


def test_phi21_two_term_expansion():
    a, c, q, z = 0.25, 0.5, 0.5, 0.1
    expected = 1 + (1 - a) * z / (1 - c) * (1 - 1 / q) / (1 - q)
    val, info = phi21(a, 1 / q, c, q, z, full_output=True)
    assert info.stop == "terminated"
    assert val == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("q", QS)
@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_phi21_chu_vandermonde(q, n):
    # 2phi1(q^-n, b; c; q, c q^n / b) = (c/b; q)_n / (c; q)_n
    b, c = 0.37, 0.21
    lhs = phi21(q ** (-n), b, c, q, c * q**n / b)
    rhs = q_pochhammer(c / b, q, n) / q_pochhammer(c, q, n)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_phi21_zero_denominator():
    q = 0.5
    with pytest.raises(ZeroDivisionError):
        phi21(q**-3, 0.3, q**-1, q, 0.2)


def test_phi21_nonterminating_converges():
    # with b = c this is the q-binomial theorem: (az; q)_inf / (z; q)_inf
    a, q, z = 0.3, 0.5, 0.4
    lhs = phi21(a, 0.2, 0.2, q, z)
    rhs = q_pochhammer(a * z, q, math.inf) / q_pochhammer(z, q, math.inf)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_q_krawtchouk_trivial_and_degree_one():
    assert q_krawtchouk(0, 0.3, 2.0, 1, 0.25) == 1.0
    assert q_krawtchouk(3, 1.0, 2.0, 1, 0.25) == 1.0
    for q in QS:
        q2 = q * q
        for p in (0.1, 2.0, 13.0):
            assert q_krawtchouk(1, 1 / q2, p, 1, q2) == pytest.approx(1 - p * q2, rel=1e-14)


@settings(max_examples=50)
@given(n=st.integers(1, 5), x=st.integers(0, 5), p=st.floats(0.01, 5.0), q=st.sampled_from(QS))
def test_q_krawtchouk_is_explicit_sum(n, x, p, q):
    # independent explicit sum of the terminating series
    c = n + 2
    total = 0.0
    for k in range(n + 1):
        total += (q_pochhammer(q**-x, q, k) * q_pochhammer(q**-n, q, k)
                  / q_pochhammer(q**-c, q, k) * (p * q ** (n + 1)) ** k / q_pochhammer(q, q, k))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = q_krawtchouk(n, q**-x, p, c, q)
    assert val == pytest.approx(total, rel=1e-9, abs=1e-9)
