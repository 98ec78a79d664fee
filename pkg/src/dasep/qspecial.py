"""q-deformed special functions.

q-numbers, q-factorials, q-exponentials, q-Pochhammer symbols, the
symmetric q-binomial, terminating 2phi1 series and the (quantum)
q-Krawtchouk polynomials. Everything is plain float64.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "SeriesControl",
    "SeriesInfo",
    "SeriesWarning",
    "q_number",
    "q_factorial",
    "exp_q",
    "q_pochhammer",
    "q_binomial",
    "e_q_small",
    "e_q_big",
    "phi21",
    "q_krawtchouk",
]

# relative closeness used to decide that a parameter equals q^{-j}
_TERMINATION_RTOL = 1e-12


class SeriesWarning(RuntimeWarning):
    """Raised (as a warning) when a series hits max_terms before its tail is small."""


@dataclass(frozen=True)
class SeriesControl:
    max_terms: int = 100_000
    tail_tolerance: float = 1e-16

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be > 0")


DEFAULT_CONTROL = SeriesControl()


class SeriesInfo(NamedTuple):
    terms: int
    stop: str  # "tail", "max_terms", "terminated" or "nonfinite"

    @property
    def converged(self) -> bool:
        return self.stop in ("tail", "terminated")


def _finish(value, info, full_output, what):
    if not info.converged:
        warnings.warn(f"{what}: stopped on {info.stop} after {info.terms} terms",
                      SeriesWarning, stacklevel=3)
    return (value, info) if full_output else value


def q_number(n: int, q: float) -> float:
    """{n}_q = (1 - q^n) / (1 - q)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if q == 1:
        raise ValueError("q = 1 is not allowed")
    return (1.0 - q**n) / (1.0 - q)


def q_factorial(n: int, q: float) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if q == 1:
        raise ValueError("q = 1 is not allowed")
    out = 1.0
    for k in range(1, n + 1):
        out *= q_number(k, q)
    return out


def exp_q(x: float, q: float, ctl: SeriesControl | None = None,
          full_output: bool = False):
    """q-exponential sum_n x^n / {n}_q!, truncated per ``ctl``.

    With ``full_output`` a ``(value, SeriesInfo)`` pair is returned.
    """
    ctl = ctl or DEFAULT_CONTROL
    if q == 1:
        raise ValueError("q = 1 is not allowed")
    total, term = 1.0, 1.0
    stop = "max_terms"
    n = 0
    for n in range(1, ctl.max_terms + 1):
        term *= x / q_number(n, q)
        if not math.isfinite(term):
            stop = "nonfinite"
            break
        total += term
        if abs(term) < ctl.tail_tolerance:
            stop = "tail"
            break
    return _finish(total, SeriesInfo(n + 1, stop), full_output, "exp_q")


def q_pochhammer(a: float, q: float, m, ctl: SeriesControl | None = None,
                 full_output: bool = False):
    """(a; q)_m = prod_{k<m} (1 - a q^k); ``m`` may be ``math.inf``.

    The infinite product stops once |a q^k| < ctl.tail_tolerance.
    """
    if m == math.inf:
        if abs(q) >= 1:
            raise ValueError("infinite q-Pochhammer needs |q| < 1")
        ctl = ctl or DEFAULT_CONTROL
        out, factor_arg = 1.0, a
        stop = "max_terms"
        k = 0
        for k in range(ctl.max_terms):
            if abs(factor_arg) < ctl.tail_tolerance:
                stop = "tail"
                break
            out *= 1.0 - factor_arg
            factor_arg *= q
        return _finish(out, SeriesInfo(k, stop), full_output, "q_pochhammer")
    m = int(m)
    if m < 0:
        raise ValueError("m must be nonnegative")
    out = 1.0
    for k in range(m):
        out *= 1.0 - a * q**k
    return (out, SeriesInfo(m, "terminated")) if full_output else out


def q_binomial(n: int, k: int, q: float) -> float:
    """Symmetric q-binomial (-1)^k q^{k(n+1)} (q^{-2n}; q^2)_k / (q^2; q^2)_k.

    Invariant under q -> 1/q; equals q^{-k(n-k)} times the Gaussian binomial
    in base q^2.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    q2 = q * q
    return ((-1) ** k * q ** (k * (n + 1))
            * q_pochhammer(q ** (-2 * n), q2, k) / q_pochhammer(q2, q2, k))


def e_q_small(z: float, q: float, ctl: SeriesControl | None = None,
              method: str = "series", full_output: bool = False):
    """e_q(z) = sum z^n/(q;q)_n = 1/(z;q)_inf  (|z| < 1)."""
    ctl = ctl or DEFAULT_CONTROL
    if method == "product":
        if not abs(z) < 1:
            raise ValueError("product form of e_q needs |z| < 1")
        val, info = q_pochhammer(z, q, math.inf, ctl, full_output=True)
        return _finish(1.0 / val, info, full_output, "e_q_small")
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    total, term = 1.0, 1.0
    stop = "max_terms"
    n = 0
    for n in range(1, ctl.max_terms + 1):
        term *= z / (1.0 - q**n)
        if not math.isfinite(term):
            stop = "nonfinite"
            break
        total += term
        if abs(term) < ctl.tail_tolerance:
            stop = "tail"
            break
    return _finish(total, SeriesInfo(n + 1, stop), full_output, "e_q_small")


def e_q_big(z: float, q: float, ctl: SeriesControl | None = None,
            method: str = "series", full_output: bool = False):
    """E_q(z) = sum q^{n(n-1)/2} z^n/(q;q)_n = (-z;q)_inf."""
    ctl = ctl or DEFAULT_CONTROL
    if method == "product":
        val, info = q_pochhammer(-z, q, math.inf, ctl, full_output=True)
        return _finish(val, info, full_output, "e_q_big")
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    total, term = 1.0, 1.0
    stop = "max_terms"
    n = 0
    for n in range(1, ctl.max_terms + 1):
        # ratio of consecutive terms: q^{n-1} z / (1 - q^n)
        term *= q ** (n - 1) * z / (1.0 - q**n)
        if not math.isfinite(term):
            stop = "nonfinite"
            break
        total += term
        if abs(term) < ctl.tail_tolerance:
            stop = "tail"
            break
    return _finish(total, SeriesInfo(n + 1, stop), full_output, "e_q_big")


def _termination_degree(a: float, q: float, max_degree: int) -> int | None:
    """j with a == q^{-j} (to rounding), or None."""
    if a == 1.0:
        return 0
    if a <= 0 or q <= 0 or q == 1:
        return None
    j = round(-math.log(a) / math.log(q))
    if 0 <= j <= max_degree and abs(a * q**j - 1.0) <= _TERMINATION_RTOL:
        return j
    return None


def phi21(a: float, b: float, c: float, q: float, z: float,
          ctl: SeriesControl | None = None, terminate_at: int | None = None,
          full_output: bool = False):
    """Basic hypergeometric 2phi1(a, b; c; q, z).

    Terminating series (a or b equal to q^{-j}) are summed exactly up to
    degree j. ``terminate_at`` forces the degree when the caller knows it.
    Raises ZeroDivisionError if (c; q)_k vanishes before termination.
    """
    ctl = ctl or DEFAULT_CONTROL
    degree = terminate_at
    for par in (a, b):
        j = _termination_degree(par, q, ctl.max_terms)
        if j is not None and (degree is None or j < degree):
            degree = j
    total, term = 1.0, 1.0
    limit = degree if degree is not None else ctl.max_terms
    stop = "terminated" if degree is not None else "max_terms"
    k = 0
    for k in range(limit):
        qk = q**k
        den = 1.0 - c * qk
        num = (1.0 - a * qk) * (1.0 - b * qk)
        if num == 0.0:
            stop = "terminated"
            break
        if abs(den) <= 1e-14 * max(1.0, abs(c * qk)):
            raise ZeroDivisionError(f"(c; q)_k vanishes at k={k + 1} before termination")
        term *= num / (den * (1.0 - q ** (k + 1))) * z
        total += term
        if degree is None and abs(term) < ctl.tail_tolerance:
            stop = "tail"
            break
    return _finish(total, SeriesInfo(k + 1, stop), full_output, "phi21")


def q_krawtchouk(n: int, x_arg: float, p: float, c: float, q: float) -> float:
    """Quantum q-Krawtchouk K_n(x_arg, p, c; q) = 2phi1(x_arg, q^{-n}; q^{-c}; q, p q^{n+1}).

    ``x_arg`` is q^{-x}; degree n >= 0 makes the series terminate.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if n == 0 or x_arg == 1.0:
        return 1.0
    return phi21(x_arg, q ** (-n), q ** (-c), q, p * q ** (n + 1), terminate_at=n)
