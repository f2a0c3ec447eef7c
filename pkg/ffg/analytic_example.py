"""
Closed forms for the monochromatically driven oscillator V(x, t) = beta cos(x + n Omega t).

In the rotating frame its time average is an n-fold rotationally symmetric
target; its first-order Magnus coefficient follows from the delta-root
brackets of two unit-wavenumber lines.
"""

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy import special

from .errors import DomainError
from .fockspace import FockOperator, SystemParams
from .ncft import ClosedForm, register_closed_form
from .specfun import bessel_j, laguerre_assoc

_SINGULAR_KERNEL = 1e-8


@dataclass(frozen=True)
class MonoParams:
    """Parameters of the monochromatic example; aliases into SystemParams."""

    n_sym: int = 2
    beta: float = 0.5
    lam: float = 2.5
    omega: float = 1.0
    t0: float = 0.0
    l_max: int = 10

    def __post_init__(self) -> None:
        if int(self.n_sym) != self.n_sym or self.n_sym < 1:
            raise DomainError(f"n_sym must be a positive integer, got {self.n_sym}")
        if self.l_max < 1:
            raise DomainError(f"l_max must be >= 1, got {self.l_max}")

    @classmethod
    def from_system(cls, params: SystemParams, l_max: int = 10) -> "MonoParams":
        return cls(params.n_sym, params.beta, params.lam, params.omega, params.t0, l_max)

    def to_system(self, n_fock: int = 60) -> SystemParams:
        return SystemParams(
            lam=self.lam,
            omega=self.omega,
            n_sym=self.n_sym,
            beta=self.beta,
            t0=self.t0,
            n_fock=n_fock,
        )


def rwa_target(params: SystemParams, n: Optional[int] = None) -> FockOperator:
    """
    Time-averaged Hamiltonian of the monochromatic drive.

    (beta/2) e^{-lam/4 - i n pi/2} (lam/2)^{-n/2} a^n L_{a^dag a}^{(-n)}(lam/2) + h.c.,
    whose only non-zero entries are
    <m|H|m+n> = (beta/2) e^{-lam/4} (-i)^n (lam/2)^{-n/2} sqrt((m+n)!/m!) L_{m+n}^{(-n)}(lam/2).
    """
    n = params.n_fock if n is None else n
    order = params.n_sym
    if n < order + 2:
        raise DomainError(f"truncation {n} too small for n_sym={order}")
    x = params.lam / 2
    op = np.zeros((n, n), dtype=complex)
    for m in range(n - order):
        log_ratio = 0.5 * (special.gammaln(m + order + 1) - special.gammaln(m + 1))
        value = (
            0.5
            * params.beta
            * math.exp(-params.lam / 4 + log_ratio - 0.5 * order * math.log(x))
            * (-1j) ** order
            * laguerre_assoc(m + order, -order, x)
        )
        op[m, m + order] = value
    return op + op.conj().T


def rwa_q_exact(params: SystemParams, r: Any, theta: Any) -> np.ndarray:
    """
    Q-function beta e^{-lam/4} J_n(r) cos(n theta + n pi/2) at the phase-space
    point (x, p) = r (cos theta, sin theta).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be non-negative")
    n = params.n_sym
    return (
        params.beta
        * math.exp(-params.lam / 4)
        * bessel_j(n, r)
        * np.cos(n * np.asarray(theta, dtype=float) + n * np.pi / 2)
    )


def _kernel(k: np.ndarray, lam: float) -> np.ndarray:
    """sin(lam/2 s) / |s| with s = sin(2 arccos(k/2)); the removable limit is lam/2 sign(k)."""
    s = k * np.sqrt(np.clip(1 - k**2 / 4, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sin(0.5 * lam * s) / np.abs(s)
    limit = 0.5 * lam * np.where(k < 0, -1.0, 1.0)
    return np.where(np.abs(s) < _SINGULAR_KERNEL, limit, ratio)


def f_l_minus_l(k: Any, theta: Any, l: int, params: SystemParams) -> np.ndarray:
    """
    Coefficient of [H_l, H_-l]:
    (beta^2/pi) K sin(2 l a) [cos(2 n theta) + (-1)^(n+l) cos(2 n a)], a = arccos(k/2).
    """
    k, theta = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(theta, dtype=float))
    inside = np.abs(k) < 2
    a = np.arccos(np.clip(k / 2, -1.0, 1.0))
    n = params.n_sym
    value = (
        params.beta**2
        / np.pi
        * _kernel(k, params.lam)
        * np.sin(2 * l * a)
        * (np.cos(2 * n * theta) + (-1) ** (n + l) * np.cos(2 * n * a))
    )
    return np.where(inside, value, 0.0).astype(complex)


def f_minus_l_0(k: Any, theta: Any, l: int, params: SystemParams) -> np.ndarray:
    """Coefficient of [H_-l, H_0]."""
    k, theta = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(theta, dtype=float))
    inside = np.abs(k) < 2
    a = np.arccos(np.clip(k / 2, -1.0, 1.0))
    n = params.n_sym
    bracket = (
        np.sin(l * a) * np.exp(1j * (2 * n + l) * theta)
        + (-1) ** l * np.sin(l * a) * np.exp(-1j * (2 * n - l) * theta)
        + np.exp(1j * l * theta)
        * ((-1) ** n * np.sin((2 * n + l) * a) - (-1) ** (n + l) * np.sin((2 * n - l) * a))
    )
    value = -(params.beta**2) / (2 * np.pi) * _kernel(k, params.lam) * bracket
    return np.where(inside, value, 0.0)


def f1_analytic(k: Any, tau: Any, params: SystemParams, l_max: int = 10) -> np.ndarray:
    """
    First-order Magnus coefficient of the monochromatic drive,
    sum_{l=1}^{l_max} (1/(lam Omega l)) [f_{l,-l} + f_{-l,0} e^{-i l Omega t0}
    + conj(f_{-l,0}(-k)) e^{i l Omega t0}].

    The last term is the coefficient of -[H_l, H_0] e^{i l Omega t0}, the
    Hermitian partner of the middle one. Zero outside |k| < 2.
    """
    k, tau = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(tau, dtype=float))
    out = np.zeros(k.shape, dtype=complex)
    for l in range(1, l_max + 1):
        phase = np.exp(1j * l * params.omega * params.t0)
        out = out + (
            f_l_minus_l(k, tau, l, params)
            + f_minus_l_0(k, tau, l, params) / phase
            + np.conj(f_minus_l_0(-k, tau, l, params)) * phase
        ) / (params.lam * params.omega * l)
    return out


@register_closed_form("mono_first_order")
def mono_first_order_coefficient(
    n_sym: int, beta: float, lam: float, omega: float, t0: float, l_max: int
) -> ClosedForm:
    """f1_analytic as a closed-form coefficient supported on |k| < 2."""
    params = SystemParams(lam=lam, omega=omega, n_sym=n_sym, beta=beta, t0=t0)
    parameters = {
        "n_sym": n_sym,
        "beta": beta,
        "lam": lam,
        "omega": omega,
        "t0": t0,
        "l_max": l_max,
    }
    return ClosedForm(
        "mono_first_order",
        lambda k, tau: f1_analytic(k, tau, params, l_max),
        2.0,
        parameters,
        rule="arccos",
    )
