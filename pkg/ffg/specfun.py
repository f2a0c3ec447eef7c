"""
Special-function kernels: associated Laguerre polynomials with integer
(possibly negative) order, Bessel functions of the first kind and the
Gamma-regularized Kummer confluent hypergeometric function.
"""

import math
from typing import Union

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

ArrayLike = Union[float, np.ndarray]

KUMMER_MAX_TERMS = 10000
_KUMMER_RTOL = 1e-16


def _check_nonneg_int(value: int, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def laguerre_assoc(n: int, a: int, x: ArrayLike) -> ArrayLike:
    """
    Associated Laguerre polynomial L_n^(a)(x) for integer order a.

    Evaluated with the three-term recurrence, which is a polynomial identity in
    a and therefore also valid for negative orders (where scipy's
    eval_genlaguerre refuses to go).

    Args:
        n: Degree, n >= 0
        a: Integer order, may be negative
        x: Real argument (scalar or array)

    Returns:
        L_n^(a)(x) with the shape of x
    """
    n = _check_nonneg_int(n, "n")
    if int(a) != a:
        raise DomainError(f"order a must be an integer, got {a!r}")
    x = np.asarray(x, dtype=float)
    if a < 0 and n + a >= 0:
        # L_n^(-j)(x) = (-x)^j (n-j)!/n! L_{n-j}^(j)(x); the recurrence cancels here
        j = -int(a)
        log_ratio = special.gammaln(n - j + 1) - special.gammaln(n + 1)
        result = math.exp(log_ratio) * (-x) ** j * laguerre_assoc(n - j, j, x)
        return result if np.ndim(result) else float(result)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    curr = 1.0 + a - x
    for k in range(1, n):
        prev, curr = curr, ((2 * k + 1 + a - x) * curr - (k + a) * prev) / (k + 1)
    return curr if curr.ndim else float(curr)


def laguerre_table(n_max: int, x: np.ndarray) -> np.ndarray:
    """
    All associated Laguerre polynomials L_j^(a)(x) with 0 <= j, a < n_max.

    Args:
        n_max: Table size
        x: Arguments, shape (K,)

    Returns:
        Array of shape (n_max, n_max, K) indexed as [j, a, k]
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = np.arange(n_max, dtype=float)[:, None]
    table = np.empty((n_max, n_max, x.size))
    table[0] = 1.0
    if n_max > 1:
        table[1] = 1.0 + a - x[None, :]
    for k in range(1, n_max - 1):
        table[k + 1] = (
            (2 * k + 1 + a - x[None, :]) * table[k] - (k + a) * table[k - 1]
        ) / (k + 1)
    return table


def laguerre_reflect(m: int, n: int, x: ArrayLike) -> ArrayLike:
    """
    L_m^(n-m)(x) through the reflection L_m^(n-m) = (n!/m!) L_n^(m-n) (-x)^(m-n).

    Only valid for x > 0; used to avoid the k^(m-n) divergence of the
    plane-wave matrix elements with n > m.

    Args:
        m: Degree of the left-hand side
        n: Degree of the right-hand side
        x: Positive argument

    Returns:
        L_m^(n-m)(x)
    """
    m = _check_nonneg_int(m, "m")
    n = _check_nonneg_int(n, "n")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("the Laguerre reflection identity requires x > 0")
    log_ratio = special.gammaln(n + 1) - special.gammaln(m + 1)
    result = np.exp(log_ratio) * laguerre_assoc(n, m - n, x) * (-x) ** float(m - n)
    return result if np.ndim(result) else float(result)


def bessel_j(n: int, x: ArrayLike) -> ArrayLike:
    """Bessel function of the first kind J_n(x) for integer order n >= 0."""
    n = _check_nonneg_int(n, "n")
    return special.jv(n, x)


def _is_nonpositive_int(b: float) -> bool:
    return b <= 0 and float(b).is_integer()


def kummer_1f1_regularized(
    a: float, b: float, z: float, max_terms: int = KUMMER_MAX_TERMS
) -> float:
    """
    Gamma-regularized confluent hypergeometric function 1F1(a; b; z) / Gamma(b).

    The series sum_s (a)_s z^s / (s! Gamma(b + s)) is finite for every b,
    including the non-positive integers where the plain 1F1 has poles; for
    b = -j the first j + 1 terms vanish and the sum starts at s = 1 - b.
    Negative z is mapped to positive z with the Kummer transformation
    M(a; b; z) = e^z M(b - a; b; -z), so the summed terms never alternate
    because of z.

    Args:
        a: Numerator parameter
        b: Denominator parameter
        z: Real argument
        max_terms: Series terms allowed before giving up

    Returns:
        The regularized function value

    Raises:
        ConvergenceError: If the series has not converged after max_terms terms
    """
    a, b, z = float(a), float(b), float(z)
    if not all(math.isfinite(v) for v in (a, b, z)):
        raise DomainError("kummer_1f1_regularized needs finite arguments")
    if z < 0:
        return math.exp(z) * kummer_1f1_regularized(b - a, b, -z, max_terms)

    s = int(1 - b) if _is_nonpositive_int(b) else 0
    # (a)_s z^s / s! with Gamma(b + s) = Gamma(1) when the series is shifted
    if s:
        if z == 0:
            return 0.0
        term = special.poch(a, s) * z**s / math.factorial(s)
    else:
        term = float(special.rgamma(b))
    total = term
    if term == 0.0:
        return total
    for _ in range(max_terms):
        ratio = (a + s) * z / ((s + 1) * (b + s))
        term *= ratio
        s += 1
        total += term
        # a terminating series (a a non-positive integer) ends on an exact zero
        if term == 0.0:
            return total
        if abs(ratio) < 0.5 and abs(term) <= _KUMMER_RTOL * abs(total):
            return total
    raise ConvergenceError(
        f"1F1({a}; {b}; {z}) series did not converge in {max_terms} terms",
        module=__name__,
    )
