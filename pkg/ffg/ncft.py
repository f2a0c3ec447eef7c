"""
Noncommutative Fourier transform (NcFT) over phase-space plane waves.

A coefficient f(k, tau) represents the operator
H(tau) = integral dk (|k|/2) f(k, tau) P(k, tau), with P the plane wave
exp(i k (x cos tau + p sin tau)). The time average over tau of H(tau) is the
operator the coefficient was built from; the tau dependence is the
rotating-frame Hamiltonian of the real-space drive
V(x, t) = integral_0^inf A(k, t) cos(k x + phi(k, t)) dk.

Every coefficient exposes the same two primitives used downstream:
a wavenumber quadrature rule and the tau-harmonics f(k, tau) = sum_h fh(k) e^{i h tau}
at the quadrature nodes.
"""

import abc
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .config import NumericsSettings
from .errors import ConfigError, ConvergenceError, DomainError
from .fockspace import FockOperator, SystemParams, phase_rotate, planewave_stack
from .specfun import kummer_1f1_regularized, laguerre_assoc

logger = logging.getLogger(__name__)

K_CHUNK = 32
HERMITICITY_TOL = 1e-12
_HARMONIC_CUTOFF = 1e-14

Harmonics = Dict[int, np.ndarray]


def split_gauss_legendre(k_max: float, nodes_per_half: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule on [-k_max, k_max] split at k = 0.

    The |k| Jacobian of the polar measure has a kink at the origin; splitting
    there keeps each half smooth.
    """
    x, w = legendre.leggauss(nodes_per_half)
    k_pos = 0.5 * k_max * (x + 1.0)
    w_pos = 0.5 * k_max * w
    return np.concatenate([-k_pos[::-1], k_pos]), np.concatenate([w_pos[::-1], w_pos])


def arccos_rule(k_max: float, nodes_per_half: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule for coefficients with compact support |k| <= k_max and square-root
    edges: k = k_max cos(a), Gauss-Legendre in a on [0, pi/2] and [pi/2, pi].
    """
    x, w = legendre.leggauss(nodes_per_half)
    a = np.concatenate([0.25 * np.pi * (x + 1.0), 0.25 * np.pi * (x + 3.0)])
    wa = np.concatenate([0.25 * np.pi * w, 0.25 * np.pi * w])
    k = k_max * np.cos(a)
    order = np.argsort(k)
    return k[order], (k_max * np.sin(a) * wa)[order]


class NcftCoefficient(abc.ABC):
    """Common interface of spectral-line, Fock-backed and closed-form coefficients."""

    kind: str = ""

    @abc.abstractmethod
    def evaluate(self, k: Any, tau: Any) -> np.ndarray:
        """Point values f(k, tau), broadcasting k against tau."""

    @abc.abstractmethod
    def k_rule(
        self, numerics: NumericsSettings, n_out: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Wavenumber nodes and plain quadrature weights (without the |k|/2 factor)."""

    @abc.abstractmethod
    def harmonics(self, k: np.ndarray, numerics: NumericsSettings) -> Harmonics:
        """Tau-harmonics fh(k) at the given nodes, omitting vanishing ones."""

    @abc.abstractmethod
    def scaled(self, factor: complex) -> "NcftCoefficient":
        """Coefficient of factor times the represented operator."""

    @abc.abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready payload tagged with the representation kind."""

    def __neg__(self) -> "NcftCoefficient":
        return self.scaled(-1.0)


@dataclass(frozen=True)
class SpectralLineSet(NcftCoefficient):
    """
    Sum of delta lines f(k, tau) = sum_j delta(k - k_j) w_j(tau).

    Each line weight w_j is a finite Fourier series given as {harmonic: coefficient}.
    Point evaluation returns the line weight at a line position and zero elsewhere.
    """

    lines: Tuple[Tuple[float, Mapping[int, complex]], ...]
    kind: str = field(default="lines", init=False)

    def __post_init__(self) -> None:
        lines = tuple(
            (float(k), {int(h): complex(c) for h, c in weights.items()})
            for k, weights in self.lines
        )
        object.__setattr__(self, "lines", lines)
        for k, weights in lines:
            if not math.isfinite(k):
                raise DomainError("spectral lines need finite wavenumbers")
            partner = self._weights_at(-k)
            for h, c in weights.items():
                if abs(partner.get(-h, 0.0) - c.conjugate()) > HERMITICITY_TOL * max(
                    1.0, abs(c)
                ):
                    raise DomainError(
                        f"line at k={k} has no conjugate partner at k={-k} for harmonic {h}"
                    )

    def _weights_at(self, k: float) -> Dict[int, complex]:
        total: Dict[int, complex] = {}
        for kj, weights in self.lines:
            if kj == k:
                for h, c in weights.items():
                    total[h] = total.get(h, 0.0) + c
        return total

    def evaluate(self, k: Any, tau: Any) -> np.ndarray:
        k, tau = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(tau, dtype=float))
        out = np.zeros(k.shape, dtype=complex)
        for kj, weights in self.lines:
            on_line = k == kj
            for h, c in weights.items():
                out = out + np.where(on_line, c * np.exp(1j * h * tau), 0.0)
        return out

    def k_rule(
        self, numerics: NumericsSettings, n_out: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        k = np.array(sorted({kj for kj, _ in self.lines}), dtype=float)
        return k, np.ones_like(k)

    def harmonics(self, k: np.ndarray, numerics: NumericsSettings) -> Harmonics:
        out: Harmonics = {}
        for kj, weights in self.lines:
            on_line = np.asarray(k) == kj
            if not on_line.any():
                continue
            for h, c in weights.items():
                out.setdefault(h, np.zeros(np.shape(k), dtype=complex))
                out[h] = out[h] + np.where(on_line, c, 0.0)
        return out

    def scaled(self, factor: complex) -> "SpectralLineSet":
        if complex(factor).imag != 0:
            raise DomainError("spectral lines only scale by real factors")
        factor = float(np.real(factor))
        return SpectralLineSet(
            tuple((k, {h: factor * c for h, c in w.items()}) for k, w in self.lines)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "lines": [
                {"k": k, "harmonics": {str(h): [c.real, c.imag] for h, c in w.items()}}
                for k, w in self.lines
            ],
        }


@dataclass(frozen=True, eq=False)
class FockBackedCoefficient(NcftCoefficient):
    """
    Coefficient of the operator sum_nm c_nm |n><m|, f = sum_nm c_nm f_nm.

    Uses f(k, tau) = lam Tr[c P(-k, tau)], so the tau-harmonic h collects the
    diagonal a - b = -h of c times the conjugated plane wave at tau = 0.
    """

    coeffs: np.ndarray
    lam: float
    kind: str = field(default="fock", init=False)

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
            raise DomainError("Fock-backed coefficients need a square matrix")
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("Fock-backed coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def support(self) -> int:
        """Highest Fock index with a non-zero row or column."""
        used = np.flatnonzero(np.any(self.coeffs != 0, axis=0) | np.any(self.coeffs != 0, axis=1))
        return int(used[-1]) if used.size else 0

    def evaluate(self, k: Any, tau: Any) -> np.ndarray:
        k, tau = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(tau, dtype=float))
        flat_k, flat_tau = k.ravel(), tau.ravel()
        out = np.empty(flat_k.size, dtype=complex)
        idx = np.arange(self.dim)
        for start in range(0, flat_k.size, K_CHUNK):
            sl = slice(start, start + K_CHUNK)
            weighted = self.coeffs[None] * planewave_stack(flat_k[sl], self.lam, self.dim).conj()
            left = np.exp(-1j * flat_tau[sl, None] * idx[None, :])
            out[sl] = self.lam * np.einsum("pab,pa,pb->p", weighted, left, left.conj())
        return out.reshape(k.shape)

    def k_rule(
        self, numerics: NumericsSettings, n_out: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        s = self.support
        k_max = numerics.k_max or (2 * math.sqrt(s) + 7) / math.sqrt(self.lam / 2)
        per_half = max(numerics.k_nodes // 2, 2 * (s + n_out))
        return split_gauss_legendre(k_max, per_half)

    def harmonics(self, k: np.ndarray, numerics: NumericsSettings) -> Harmonics:
        weighted = self.coeffs[None] * planewave_stack(k, self.lam, self.dim).conj()
        out: Harmonics = {}
        for h in range(-(self.dim - 1), self.dim):
            if not np.any(np.diagonal(self.coeffs, offset=h)):
                continue
            out[h] = self.lam * np.trace(weighted, offset=h, axis1=1, axis2=2)
        return out

    def scaled(self, factor: complex) -> "FockBackedCoefficient":
        return FockBackedCoefficient(factor * self.coeffs, self.lam)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "lam": self.lam,
            "coeffs": {"re": self.coeffs.real.tolist(), "im": self.coeffs.imag.tolist()},
        }


ClosedFormFactory = Callable[..., "ClosedForm"]
CLOSED_FORMS: Dict[str, ClosedFormFactory] = {}


def register_closed_form(name: str) -> Callable[[ClosedFormFactory], ClosedFormFactory]:
    """Register a closed-form factory so serialized coefficients can be rebuilt."""

    def decorator(factory: ClosedFormFactory) -> ClosedFormFactory:
        CLOSED_FORMS[name] = factory
        return factory

    return decorator


@dataclass(frozen=True, eq=False)
class ClosedForm(NcftCoefficient):
    """
    Named analytic coefficient.

    Attributes:
        name: Registry name of the factory that built it
        func: Vectorized f(k, tau)
        k_max: Wavenumber cutoff where the Gaussian envelope is negligible
        parameters: Factory arguments, enough to rebuild the coefficient
        scale: Overall factor applied on top of func
        rule: Optional "gauss" or "arccos" quadrature family
    """

    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    k_max: float
    parameters: Mapping[str, Any] = field(default_factory=dict)
    scale: complex = 1.0
    rule: str = "gauss"
    kind: str = field(default="closed_form", init=False)

    def evaluate(self, k: Any, tau: Any) -> np.ndarray:
        k, tau = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(tau, dtype=float))
        return self.scale * np.asarray(self.func(k, tau), dtype=complex)

    def k_rule(
        self, numerics: NumericsSettings, n_out: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        per_half = max(numerics.k_nodes // 2, 2 * n_out)
        if self.rule == "arccos":
            return arccos_rule(self.k_max, per_half)
        return split_gauss_legendre(numerics.k_max or self.k_max, per_half)

    def harmonics(self, k: np.ndarray, numerics: NumericsSettings) -> Harmonics:
        m = numerics.tau_points
        tau = 2 * np.pi * np.arange(m) / m
        values = self.evaluate(np.asarray(k)[:, None], tau[None, :])
        spectrum = np.fft.fft(values, axis=1) / m
        peak = np.max(np.abs(spectrum)) if spectrum.size else 0.0
        out: Harmonics = {}
        for j in range(m):
            h = j if j < m // 2 else j - m
            column = spectrum[:, j]
            if peak > 0 and np.max(np.abs(column)) > _HARMONIC_CUTOFF * peak:
                out[h] = column
        return out

    def scaled(self, factor: complex) -> "ClosedForm":
        return ClosedForm(
            self.name,
            self.func,
            self.k_max,
            dict(self.parameters),
            self.scale * factor,
            self.rule,
        )

    def to_dict(self) -> Dict[str, Any]:
        scale = complex(self.scale)
        return {
            "kind": self.kind,
            "name": self.name,
            "parameters": dict(self.parameters),
            "scale": [scale.real, scale.imag],
        }


def coefficient_from_dict(data: Mapping[str, Any]) -> NcftCoefficient:
    """Rebuild a coefficient from its to_dict payload."""
    kind = data.get("kind")
    if kind == "lines":
        return SpectralLineSet(
            tuple(
                (
                    line["k"],
                    {int(h): complex(re, im) for h, (re, im) in line["harmonics"].items()},
                )
                for line in data["lines"]
            )
        )
    if kind == "fock":
        coeffs = np.asarray(data["coeffs"]["re"]) + 1j * np.asarray(data["coeffs"]["im"])
        return FockBackedCoefficient(coeffs, float(data["lam"]))
    if kind == "closed_form":
        factory = CLOSED_FORMS.get(data["name"])
        if factory is None:
            raise ConfigError(f"unknown closed form {data['name']!r}", "coefficient.name")
        re, im = data.get("scale", [1.0, 0.0])
        return factory(**data["parameters"]).scaled(complex(re, im))
    raise ConfigError(f"unknown coefficient kind {kind!r}", "coefficient.kind")


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """
    Rotating-frame Hamiltonian H(tau)_ab = e^{i(a-b)tau} sum_h G_h[a, b] e^{i h tau}.

    G_h = integral dk (|k|/2) fh(k) P(k, 0). Its Fourier harmonic l collects
    the diagonal a - b = l - h of every block G_h.
    """

    blocks: Mapping[int, np.ndarray]
    n: int

    def __post_init__(self) -> None:
        order = sorted(self.blocks)
        stack = (
            np.stack([self.blocks[h] for h in order])
            if order
            else np.zeros((0, self.n, self.n), dtype=complex)
        )
        object.__setattr__(self, "_orders", np.array(order, dtype=float))
        object.__setattr__(self, "_stack", stack)
        offsets = np.subtract.outer(np.arange(self.n), np.arange(self.n))
        object.__setattr__(self, "_offsets", offsets)

    def at(self, tau: float) -> FockOperator:
        """H(tau) as a Fock matrix."""
        phases = np.exp(1j * self._orders * tau)
        return phase_rotate(np.tensordot(phases, self._stack, axes=1), tau)

    def harmonic(self, l: int) -> FockOperator:
        out = np.zeros((self.n, self.n), dtype=complex)
        for h, block in self.blocks.items():
            mask = self._offsets == l - h
            out[mask] = block[mask]
        return out

    def max_harmonic(self) -> int:
        if not self.blocks:
            return 0
        return int(max(abs(h) for h in self.blocks)) + self.n - 1

    def shifted(self, shift: float) -> "FrameSeries":
        """Series of H(tau + shift); harmonic l picks up e^{i l shift}."""
        return FrameSeries(
            {h: phase_rotate(b * np.exp(1j * h * shift), shift) for h, b in self.blocks.items()},
            self.n,
        )

    def scaled(self, factor: complex) -> "FrameSeries":
        return FrameSeries({h: factor * b for h, b in self.blocks.items()}, self.n)

    def __add__(self, other: "FrameSeries") -> "FrameSeries":
        if other.n != self.n:
            raise DomainError("frame series with different truncations cannot be added")
        blocks = {h: b.copy() for h, b in self.blocks.items()}
        for h, b in other.blocks.items():
            blocks[h] = blocks[h] + b if h in blocks else b.copy()
        return FrameSeries(blocks, self.n)


def build_frame_series(
    coefficient: NcftCoefficient,
    lam: float,
    n: int,
    numerics: Optional[NumericsSettings] = None,
) -> FrameSeries:
    """
    Integrate a coefficient against the plane waves into a FrameSeries.

    Args:
        coefficient: Any NcFT coefficient
        lam: Dimensionless Planck constant
        n: Fock truncation of the resulting operators
        numerics: Quadrature settings

    Returns:
        The rotating-frame series
    """
    numerics = numerics or NumericsSettings()
    k, w = coefficient.k_rule(numerics, n)
    measure = 0.5 * w * np.abs(k)
    acc: Dict[int, np.ndarray] = {}
    for start in range(0, k.size, K_CHUNK):
        sl = slice(start, start + K_CHUNK)
        hats = coefficient.harmonics(k[sl], numerics)
        if not hats:
            continue
        stack = planewave_stack(k[sl], lam, n).reshape(-1, n * n)
        for h, values in hats.items():
            block = (measure[sl] * values) @ stack
            acc[h] = acc[h] + block if h in acc else block
    logger.debug(
        "frame series: %d k nodes, %d tau harmonics, N=%d", k.size, len(acc), n
    )
    blocks = {h: b.reshape(n, n) for h, b in acc.items() if np.any(b != 0)}
    return FrameSeries(blocks, n)


def fnm_coefficient(
    n: int,
    m: int,
    k: float,
    tau: float,
    params: Union[SystemParams, float],
    method: str = "laguerre",
) -> complex:
    """
    NcFT coefficient f_nm(k, tau) of the single matrix unit |n><m|.

    The default evaluation is the Laguerre closed form
    lam e^{-X/2} sqrt(min!/max!) (-i k sqrt(lam/2))^{|n-m|} L_min^{|n-m|}(X) e^{-i(n-m)tau},
    X = lam k^2 / 2, which is finite at k = 0. method="kummer" evaluates the
    regularized-Kummer form e^{lam k^2/4} sqrt(n!/m!) (i e^{i tau} sqrt(2/lam)/k)^{m-n}
    lam M(1+n; 1-m+n; -lam k^2/2) literally.

    Args:
        n: Row index
        m: Column index
        k: Wavenumber
        tau: Direction
        params: SystemParams or lam
        method: "laguerre" or "kummer"

    Returns:
        Complex coefficient value
    """
    lam = params.lam if isinstance(params, SystemParams) else float(params)
    if n < 0 or m < 0:
        raise DomainError("Fock indices must be non-negative")
    x = 0.5 * lam * k * k
    if method == "kummer":
        if 0.5 * x > 700:
            raise DomainError(f"|k|={abs(k)} overflows the e^(lam k^2/4) factor")
        if k == 0 and m != n:
            raise DomainError("the Kummer form needs k != 0 off the diagonal")
        log_fact = 0.5 * (special.gammaln(n + 1) - special.gammaln(m + 1))
        base = 1j * np.exp(1j * tau) * math.sqrt(2 / lam) / k if k != 0 else 1.0
        kummer = kummer_1f1_regularized(1 + n, 1 - m + n, -x)
        return complex(math.exp(0.5 * x + log_fact) * base ** (m - n) * lam * kummer)
    if method != "laguerre":
        raise DomainError(f"unknown method {method!r}")
    lo, d = min(n, m), abs(n - m)
    log_mag = 0.5 * (special.gammaln(lo + 1) - special.gammaln(lo + d + 1)) - 0.5 * x
    kc = k * math.sqrt(lam / 2)
    value = lam * math.exp(log_mag) * (-1j * kc) ** d * laguerre_assoc(lo, d, x)
    return complex(value * np.exp(-1j * (n - m) * tau))


def ncft_forward(op: FockOperator, params: Union[SystemParams, float]) -> FockBackedCoefficient:
    """NcFT coefficient of an arbitrary Fock-space operator."""
    lam = params.lam if isinstance(params, SystemParams) else float(params)
    op = np.asarray(op)
    if not np.all(np.isfinite(op)):
        raise DomainError("ncft_forward needs a finite operator")
    return FockBackedCoefficient(op, lam)


def ncft_monochromatic(params: SystemParams) -> SpectralLineSet:
    """
    Lines beta delta(k-1) e^{i n tau} + beta delta(k+1) e^{-i n tau}, the
    coefficient of V = beta cos(x + n Omega t).
    """
    n, beta = params.n_sym, params.beta
    return SpectralLineSet(((1.0, {n: beta}), (-1.0, {-n: beta})))


def cat_lattice_q_exact(
    q: int,
    alpha0: complex,
    gamma: float,
    beta: float,
    x: Any,
    p: Any,
    lam: float,
) -> np.ndarray:
    """
    Closed-form Q-function of the q-fold rotational lattice target.

    (beta/|alpha0 e^g|^{2q}) exp(-(x^2+p^2)/(2 lam s^2)) |((x+ip)/sqrt(2 lam))^q - (alpha0 e^g)^q|^2
    with s = 1/sqrt(1 - e^{-2g}).
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    alpha1 = alpha0 * math.exp(gamma)
    nu = 1.0 - math.exp(-2 * gamma)
    point = (x + 1j * p) / math.sqrt(2 * lam)
    envelope = np.exp(-nu * np.abs(point) ** 2)
    return beta / abs(alpha1) ** (2 * q) * envelope * np.abs(point**q - alpha1**q) ** 2


@register_closed_form("cat_lattice")
def cat_lattice_coefficient(
    q: int, alpha0: float, gamma: float, beta: float, lam: float
) -> ClosedForm:
    """
    Closed-form coefficient of the q-fold lattice target.

    With a1 = alpha0 e^g, s^2 = 1/(1 - e^{-2g}), eta = i k sqrt(lam/2) e^{i tau}
    and z = s^2 lam k^2 / 2:
    f = lam beta s^{2q+2}/|a1|^{2q} e^{lam k^2/4 - z}
        [q! L_q(z) - (-conj(a1) eta)^q - (a1 conj(eta))^q + |a1/s|^{2q}].
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if int(q) != q or q < 1:
        raise DomainError(f"q must be a positive integer, got {q}")
    q = int(q)
    alpha1 = complex(alpha0) * math.exp(gamma)
    sigma2 = 1.0 / (1.0 - math.exp(-2 * gamma))
    c = math.sqrt(lam / 2)
    prefactor = lam * beta * sigma2 ** (q + 1) / abs(alpha1) ** (2 * q)
    constant = abs(alpha1) ** (2 * q) / sigma2**q

    def kernel(k: np.ndarray, tau: np.ndarray) -> np.ndarray:
        eta = 1j * k * c * np.exp(1j * tau)
        z = sigma2 * lam * k**2 / 2
        poly = (
            math.factorial(q) * special.eval_laguerre(q, z)
            - (-alpha1.conjugate() * eta) ** q
            - (alpha1 * eta.conj()) ** q
            + constant
        )
        return prefactor * np.exp(lam * k**2 / 4 - z) * poly

    k_max = 8.0 / math.sqrt(lam * (1.0 - math.exp(-2 * gamma)))
    parameters = {
        "q": q,
        "alpha0": float(np.real(alpha0)),
        "gamma": gamma,
        "beta": beta,
        "lam": lam,
    }
    return ClosedForm("cat_lattice", kernel, k_max, parameters)


def ncft_cat_lattice(
    q: int, alpha0: float, gamma: float, params: SystemParams
) -> ClosedForm:
    """Cat-lattice coefficient using params.lam and params.beta."""
    return cat_lattice_coefficient(q, alpha0, gamma, params.beta, params.lam)


def cat_lattice_k_c(gamma: float, lam: float) -> float:
    """Characteristic wavenumber k_c = sqrt((1 - e^{-2g}) / (4 lam)) of the lattice charts."""
    return math.sqrt((1.0 - math.exp(-2 * gamma)) / (4 * lam))


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """
    Real-space drive as a superposition of cosine lattices.

    Stores g(k, tau) = k f(k, tau) through its tau-harmonics at positive
    wavenumbers, so A = |g| and phi = Arg g at any time.

    Attributes:
        k: Positive wavenumbers
        weights: Quadrature weights (1 for spectral lines)
        harmonics: {h: g_h(k)} with g(k, tau) = sum_h g_h(k) e^{i h tau}
        omega: Floquet frequency, tau = omega t
        lines: True when k holds exact line positions
    """

    k: np.ndarray
    weights: np.ndarray
    harmonics: Mapping[int, np.ndarray]
    omega: float = 1.0
    lines: bool = False

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.k) <= 0):
            raise DomainError("drive wavenumbers must be positive")

    def complex_amplitude(self, t: Any) -> np.ndarray:
        """g(k, Omega t), shape (K,) + shape(t)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.shape(self.k) + t.shape, dtype=complex)
        for h, values in self.harmonics.items():
            out = out + np.multiply.outer(values, np.exp(1j * h * self.omega * t))
        return out

    def amplitude(self, t: Any) -> np.ndarray:
        return np.abs(self.complex_amplitude(t))

    def phase(self, t: Any) -> np.ndarray:
        return np.angle(self.complex_amplitude(t))

    def to_csv(self, path: Union[str, Path], t: Iterable[float]) -> None:
        """Write (k, t, amplitude, phase) rows on the given time grid."""
        t = np.asarray(list(t), dtype=float)
        g = self.complex_amplitude(t)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["k", "t", "amplitude", "phase"])
            for i, k in enumerate(self.k):
                for j, tj in enumerate(t):
                    row = (k, tj, abs(g[i, j]), np.angle(g[i, j]))
                    writer.writerow([repr(float(v)) for v in row])

    def to_json(self) -> str:
        """
        Spectral lines as [{k, harmonics: {l: [re, im]}}]; grid drives use to_csv.

        The harmonics are the line weights f_l(k) = g_l(k) / k, the form
        SpectralLineSet takes, not the stored real-space amplitudes.
        """
        if not self.lines:
            raise DomainError("only spectral-line drives have a JSON form")
        payload = []
        for i, k in enumerate(self.k):
            harm = {}
            for h, values in sorted(self.harmonics.items()):
                c = complex(values[i]) / k
                if c != 0:
                    harm[str(h)] = [c.real, c.imag]
            payload.append({"k": float(k), "harmonics": harm})
        return json.dumps(payload, indent=2)


def synth_drive(
    f: NcftCoefficient,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
) -> DriveSpec:
    """Real-space drive of a coefficient: A = |k f(k, Omega t)|, phi = Arg f(k, Omega t)."""
    numerics = numerics or NumericsSettings()
    k, w = f.k_rule(numerics, params.n_fock)
    positive = k > 0
    k, w = k[positive], w[positive]
    hats = f.harmonics(k, numerics) if k.size else {}
    harmonics = {h: k * values for h, values in hats.items()}
    return DriveSpec(k, w, harmonics, params.omega, isinstance(f, SpectralLineSet))


def drive_potential(spec: DriveSpec, x: Any, t: Any) -> np.ndarray:
    """V(x, t) = sum_k w_k A(k, t) cos(k x + phi(k, t)); real by construction."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    g = spec.complex_amplitude(t)
    waves = np.exp(1j * np.multiply.outer(spec.k, x))
    weights = np.asarray(spec.weights).reshape((-1,) + (1,) * x.ndim)
    return np.sum(weights * (g * waves).real, axis=0)


def drive_chart(f: NcftCoefficient, k_grid: Any, tau_grid: Any, scale: float = 1.0) -> np.ndarray:
    """Chart k f(k, tau) / scale on the (k, tau) grid, shape (len(k), len(tau))."""
    k_grid = np.asarray(k_grid, dtype=float)
    tau_grid = np.asarray(tau_grid, dtype=float)
    values = f.evaluate(k_grid[:, None], tau_grid[None, :])
    return k_grid[:, None] * values / scale


def _refined(
    f: NcftCoefficient, numerics: NumericsSettings, n_out: int
) -> NumericsSettings:
    """Settings whose k rule has twice the nodes the given settings produce."""
    nodes, _ = f.k_rule(numerics, n_out)
    return numerics.with_overrides(k_nodes=2 * len(nodes))


def _compare_refinement(
    coarse: np.ndarray, fine: np.ndarray, n_trust: int, tol: float, what: str
) -> float:
    coarse = coarse[:n_trust, :n_trust]
    fine = fine[:n_trust, :n_trust]
    scale = max(1.0, float(np.max(np.abs(fine))))
    diff = float(np.max(np.abs(fine - coarse)))
    logger.debug("%s: refinement difference %.3e (scale %.3e)", what, diff, scale)
    if diff > tol * scale:
        raise ConvergenceError(
            f"{what} changed by {diff:.3e} when doubling k nodes", module=__name__
        )
    return diff


def rotating_frame_hamiltonian(
    f: NcftCoefficient,
    t: float,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    tol: float = 1e-8,
) -> FockOperator:
    """
    H(t) = integral dk (|k|/2) f(k, Omega t) P(k, Omega t) on params.n_fock levels.

    Quadrature coefficients are also integrated on a rule with twice the
    nodes; spectral lines are exact and skip that comparison.

    Raises:
        ConvergenceError: If the doubled rule moves the trusted block by more than tol
    """
    numerics = numerics or NumericsSettings()
    n = params.n_fock
    tau = params.omega * t
    hamiltonian = build_frame_series(f, params.lam, n, numerics).at(tau)
    if not isinstance(f, SpectralLineSet):
        fine = build_frame_series(f, params.lam, n, _refined(f, numerics, n)).at(tau)
        _compare_refinement(
            hamiltonian, fine, numerics.trusted(n), tol, "rotating-frame Hamiltonian"
        )
    return hamiltonian


def inverse_ncft(
    f: NcftCoefficient,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
) -> FockOperator:
    """Operator represented by a coefficient: the tau average of its rotating-frame series."""
    return build_frame_series(f, params.lam, params.n_fock, numerics).harmonic(0)


def quadrature_check(
    f: NcftCoefficient,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    tol: float = 1e-8,
) -> float:
    """
    Compare the inverse transform at the configured and at doubled node counts.

    Returns:
        Max-entry difference on the trusted block

    Raises:
        ConvergenceError: If the difference exceeds tol relative to the operator scale
    """
    numerics = numerics or NumericsSettings()
    coarse = inverse_ncft(f, params, numerics)
    fine = inverse_ncft(f, params, _refined(f, numerics, params.n_fock))
    return _compare_refinement(
        coarse, fine, numerics.trusted(params.n_fock), tol, "k quadrature"
    )
