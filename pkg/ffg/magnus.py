"""
Floquet-Magnus machinery: harmonic extraction, first- and second-order terms,
the commutator bracket transform and the iterative correction-drive loop.

Conventions: the rotating-frame Hamiltonian is H(t) = sum_l H_l e^{i l Omega t}
and the Floquet Hamiltonian with reference time t0 generates the evolution
U(t0 + T, t0) = exp(-i T H_F / lam). Shifting the reference time is the same as
replacing H_l by H_l e^{i l Omega t0}, which is how t0 enters every term here.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import NumericsSettings
from .errors import AliasingError, ConfigError, DomainError
from .fockspace import FockOperator, SystemParams
from .ncft import (
    ClosedForm,
    FrameSeries,
    NcftCoefficient,
    SpectralLineSet,
    build_frame_series,
    coefficient_from_dict,
    ncft_forward,
    register_closed_form,
)

logger = logging.getLogger(__name__)

ALIASING_FACTOR = 8
_SINGULAR_KERNEL = 1e-8


@dataclass(frozen=True, eq=False)
class HarmonicSet:
    """
    Fourier harmonics H_l, |l| <= l_max, of a rotating-frame Hamiltonian.

    Missing entries are zero matrices.
    """

    l_max: int
    table: Mapping[int, np.ndarray]
    n: int

    def __post_init__(self) -> None:
        if self.l_max < 1:
            raise DomainError(f"l_max must be >= 1, got {self.l_max}")
        if any(abs(l) > self.l_max for l in self.table):
            raise DomainError("harmonic table holds entries beyond l_max")

    def __getitem__(self, l: int) -> np.ndarray:
        block = self.table.get(l)
        return block if block is not None else np.zeros((self.n, self.n), dtype=complex)

    def orders(self) -> List[int]:
        return [l for l in range(-self.l_max, self.l_max + 1) if self.is_present(l)]

    def is_present(self, l: int) -> bool:
        block = self.table.get(l)
        return block is not None and bool(np.any(block != 0))

    def conjugation_error(self) -> float:
        """max_l || H_{-l} - H_l^dag ||_max, zero for a Hermitian H(t)."""
        return max(
            float(np.max(np.abs(self[-l] - self[l].conj().T)))
            for l in range(0, self.l_max + 1)
        )

    def shifted(self, phase: float) -> "HarmonicSet":
        """Harmonics of H(t + phase / Omega): H_l -> H_l e^{i l phase}."""
        return HarmonicSet(
            self.l_max, {l: b * np.exp(1j * l * phase) for l, b in self.table.items()}, self.n
        )

    def scaled(self, factor: complex) -> "HarmonicSet":
        return HarmonicSet(self.l_max, {l: factor * b for l, b in self.table.items()}, self.n)

    def __add__(self, other: "HarmonicSet") -> "HarmonicSet":
        if other.n != self.n or other.l_max != self.l_max:
            raise DomainError("harmonic sets must share truncation and l_max")
        keys = set(self.table) | set(other.table)
        return HarmonicSet(self.l_max, {l: self[l] + other[l] for l in keys}, self.n)


def harmonics_from_series(series: FrameSeries, l_max: int) -> HarmonicSet:
    """Exact harmonics of a rotating-frame series up to l_max."""
    table = {}
    for l in range(-l_max, l_max + 1):
        block = series.harmonic(l)
        if np.any(block != 0):
            table[l] = block
    return HarmonicSet(l_max, table, series.n)


def extract_harmonics(
    f: Union[NcftCoefficient, FrameSeries],
    l_max: int,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
) -> HarmonicSet:
    """
    Harmonics H_l = (1/T) integral_0^T H(t) e^{-i l Omega t} dt of a drive.

    The tau dependence of H is a finite Fourier series in each matrix entry,
    so the harmonics are read off it directly; closed-form coefficients are
    first sampled on the uniform tau grid.

    Args:
        f: Drive coefficient, or an already integrated FrameSeries
        l_max: Highest harmonic
        params: System parameters (lam, n_fock)
        numerics: Quadrature settings

    Returns:
        HarmonicSet at params.n_fock levels

    Raises:
        AliasingError: If tau_points < 8 l_max
    """
    numerics = numerics or NumericsSettings()
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    if numerics.tau_points < ALIASING_FACTOR * l_max:
        raise AliasingError(
            f"tau grid of {numerics.tau_points} points under-resolves l_max={l_max} "
            f"(need at least {ALIASING_FACTOR * l_max})"
        )
    series = f if isinstance(f, FrameSeries) else build_frame_series(
        f, params.lam, params.n_fock, numerics
    )
    return harmonics_from_series(series, l_max)


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def magnus_first_order(h: HarmonicSet, params: SystemParams) -> FockOperator:
    """
    First-order Floquet-Magnus term.

    H_F1 = (1/(lam Omega)) sum_{l>=1} (1/l) ([H_l, H_-l]
           + [H_-l, H_0] e^{-i l Omega t0} - [H_l, H_0] e^{i l Omega t0})

    The t0 phases come from the reference-time shift of the harmonics.
    """
    shifted = h.shifted(params.omega * params.t0)
    h0 = shifted[0]
    total = np.zeros((h.n, h.n), dtype=complex)
    for l in range(1, h.l_max + 1):
        if not (shifted.is_present(l) or shifted.is_present(-l)):
            continue
        hp, hm = shifted[l], shifted[-l]
        total += (_comm(hp, hm) + _comm(hm, h0) - _comm(hp, h0)) / l
    return total / (params.lam * params.omega)


def _integrate_exp_poly(
    terms: Dict[Tuple[int, int], complex], omega: float
) -> Dict[Tuple[int, int], complex]:
    """Antiderivative from 0 of sum c t^p e^{i m Omega t}, keyed by (p, m)."""
    out: Dict[Tuple[int, int], complex] = {}

    def add(key: Tuple[int, int], value: complex) -> None:
        out[key] = out.get(key, 0.0) + value

    for (p, m), c in terms.items():
        if m == 0:
            add((p + 1, 0), c / (p + 1))
            continue
        a = 1j * m * omega
        falling = 1.0
        for j in range(p + 1):
            add((p - j, m), c * (-1) ** j * falling / a ** (j + 1))
            falling *= p - j
        add((0, 0), -c * (-1) ** p * math.factorial(p) / a ** (p + 1))
    return out


@lru_cache(maxsize=65536)
def simplex_integral(freqs: Tuple[int, ...], omega: float) -> complex:
    """
    Ordered time integral over one period,
    integral_0^T dt1 integral_0^t1 dt2 ... exp(i Omega sum_j l_j t_j),
    with freqs = (l_1, l_2, ...) from the outermost variable inward.
    """
    period = 2 * math.pi / omega
    terms: Dict[Tuple[int, int], complex] = {(0, 0): 1.0}
    for l in reversed(freqs):
        terms = {(p, m + l): c for (p, m), c in terms.items()}
        terms = _integrate_exp_poly(terms, omega)
    # e^{i m Omega T} = 1 for every integer m
    return complex(sum(c * period**p for (p, _), c in terms.items()))


def magnus_third_term(h: HarmonicSet, params: SystemParams) -> FockOperator:
    """
    Second-order Floquet-Magnus term of a single drive,
    -(1/(6 lam^2 T)) sum I(l1, l2, l3) ([H_l1, [H_l2, H_l3]] + [H_l3, [H_l2, H_l1]]).
    """
    omega = params.omega
    period = 2 * math.pi / omega
    shifted = h.shifted(omega * params.t0)
    present = shifted.orders()
    cache: Dict[Tuple[int, int], np.ndarray] = {}

    def inner(a: int, b: int) -> np.ndarray:
        if (a, b) not in cache:
            cache[(a, b)] = _comm(shifted[a], shifted[b])
            cache[(b, a)] = -cache[(a, b)]
        return cache[(a, b)]

    total = np.zeros((h.n, h.n), dtype=complex)
    floor = 1e-13 * period**3
    count = 0
    for l1 in present:
        for l2 in present:
            for l3 in present:
                weight = simplex_integral((l1, l2, l3), omega)
                if abs(weight) <= floor:
                    continue
                count += 1
                total += weight * (
                    _comm(shifted[l1], inner(l2, l3)) + _comm(shifted[l3], inner(l2, l1))
                )
    logger.debug("third Magnus term: %d contributing harmonic triples", count)
    return -total / (6 * params.lam**2 * period)


def magnus_second_order(
    h0: HarmonicSet, h1: HarmonicSet, params: SystemParams
) -> FockOperator:
    """
    Second-order Floquet Hamiltonian of the drive V0 + V1 with V1 of first order.

    The nested-commutator term of V0 plus every first-order cross commutator
    between V0 and V1.
    """
    total = magnus_third_term(h0, params)
    if any(h1.is_present(l) for l in range(-h1.l_max, h1.l_max + 1)):
        total = total + (
            magnus_first_order(h0 + h1, params)
            - magnus_first_order(h0, params)
            - magnus_first_order(h1, params)
        )
    return total


def _series_value(weights: Mapping[int, complex], tau: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(tau), dtype=complex)
    for h, c in weights.items():
        out = out + c * np.exp(1j * h * tau)
    return out


def _line_bracket_kernel(
    lines_a: Sequence[Tuple[float, Mapping[int, complex]]],
    la: int,
    lines_b: Sequence[Tuple[float, Mapping[int, complex]]],
    lb: int,
    lam: float,
):
    """
    Coefficient of [V_la, V_lb] for two spectral-line drives.

    The commutator of two plane waves is a plane wave at the summed wave vector,
    so the double tau integral collapses onto the roots (t1, t2) of
    k1 e^{i t1} + k2 e^{i t2} = K e^{i Theta}. With the Jacobian |k1 k2 sin(t1 - t2)|
    each pair of lines contributes
    (i / 4 pi) sum_roots e^{-i(la t1 + lb t2)} w1(t1) w2(t2) sin(lam/2 k1 k2 s) / |s|,
    s = sin(t1 - t2).
    """
    half_lam = 0.5 * lam

    def kernel(k: np.ndarray, theta: np.ndarray) -> np.ndarray:
        z = k * np.exp(1j * theta)
        r = np.abs(z)
        phi = np.angle(z)
        out = np.zeros(np.shape(z), dtype=complex)
        for k1, w1 in lines_a:
            for k2, w2 in lines_b:
                a1, a2 = abs(k1), abs(k2)
                if a1 == 0 or a2 == 0:
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    cos_d = (r**2 + a1**2 - a2**2) / (2 * r * a1)
                valid = (r > 0) & (np.abs(cos_d) <= 1)
                delta = np.arccos(np.clip(np.nan_to_num(cos_d), -1.0, 1.0))
                for sign in (1.0, -1.0):
                    u1 = a1 * np.exp(1j * (phi + sign * delta))
                    u2 = z - u1
                    t1 = np.angle(u1) - (np.pi if k1 < 0 else 0.0)
                    t2 = np.angle(u2) - (np.pi if k2 < 0 else 0.0)
                    s = np.sin(t1 - t2)
                    coupling = half_lam * k1 * k2
                    with np.errstate(divide="ignore", invalid="ignore"):
                        ratio = np.sin(coupling * s) / np.abs(s)
                    limit = coupling * np.where(s < 0, -1.0, 1.0)
                    ratio = np.where(np.abs(s) < _SINGULAR_KERNEL, limit, ratio)
                    weight = (
                        _series_value(w1, t1)
                        * _series_value(w2, t2)
                        * np.exp(-1j * (la * t1 + lb * t2))
                    )
                    out = out + np.where(valid, weight * ratio, 0.0)
        return 1j / (4 * np.pi) * out

    return kernel


def _lines_payload(lines: SpectralLineSet) -> List[Dict[str, Any]]:
    return lines.to_dict()["lines"]


def _lines_from_payload(payload: Sequence[Mapping[str, Any]]) -> SpectralLineSet:
    return coefficient_from_dict({"kind": "lines", "lines": list(payload)})


@register_closed_form("line_bracket")
def line_bracket_coefficient(
    lines_a: Sequence[Mapping[str, Any]],
    la: int,
    lines_b: Sequence[Mapping[str, Any]],
    lb: int,
    lam: float,
) -> ClosedForm:
    """Closed-form bracket coefficient rebuilt from serialized line sets."""
    a = _lines_from_payload(lines_a)
    b = _lines_from_payload(lines_b)
    k_max = max(abs(k) for k, _ in a.lines) + max(abs(k) for k, _ in b.lines)
    kernel = _line_bracket_kernel(a.lines, la, b.lines, lb, lam)
    parameters = {
        "lines_a": list(lines_a),
        "la": la,
        "lines_b": list(lines_b),
        "lb": lb,
        "lam": lam,
    }
    return ClosedForm("line_bracket", kernel, k_max, parameters, rule="arccos")


def bracket_transform(
    fa: NcftCoefficient,
    la: int,
    fb: NcftCoefficient,
    lb: int,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    route: str = "auto",
) -> NcftCoefficient:
    """
    NcFT coefficient of the commutator [V^a_la, V^b_lb] of two drive harmonics.

    Spectral-line drives use the delta-root closed form (route "analytic", the
    default for them); everything else commutes the harmonics in Fock space and
    transforms back (route "fock").

    Args:
        fa: Coefficient of the first drive
        la: Harmonic taken from the first drive
        fb: Coefficient of the second drive
        lb: Harmonic taken from the second drive
        params: System parameters
        numerics: Quadrature settings
        route: "auto", "analytic" or "fock"

    Returns:
        Coefficient of the commutator
    """
    lines = isinstance(fa, SpectralLineSet) and isinstance(fb, SpectralLineSet)
    if route not in ("auto", "analytic", "fock"):
        raise DomainError(f"unknown bracket route {route!r}")
    if route == "analytic" and not lines:
        raise DomainError("the analytic bracket route needs spectral-line inputs")
    if lines and route != "fock":
        return line_bracket_coefficient(
            _lines_payload(fa), la, _lines_payload(fb), lb, params.lam
        )
    va = build_frame_series(fa, params.lam, params.n_fock, numerics).harmonic(la)
    vb = build_frame_series(fb, params.lam, params.n_fock, numerics).harmonic(lb)
    return ncft_forward(_comm(va, vb), params)


@register_closed_form("line_first_order")
def line_first_order_coefficient(
    lines: Sequence[Mapping[str, Any]],
    lam: float,
    omega: float,
    t0: float,
    l_max: int,
) -> ClosedForm:
    """
    Coefficient of the first-order Magnus term of a spectral-line drive,
    assembled from delta-root bracket kernels.
    """
    drive = _lines_from_payload(lines)
    bracket = {}
    for l in range(1, l_max + 1):
        for la, lb in ((l, -l), (-l, 0), (l, 0)):
            bracket[(la, lb)] = _line_bracket_kernel(drive.lines, la, drive.lines, lb, lam)

    def kernel(k: np.ndarray, theta: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast(k, theta).shape, dtype=complex)
        for l in range(1, l_max + 1):
            phase = np.exp(1j * l * omega * t0)
            out = out + (
                bracket[(l, -l)](k, theta)
                + bracket[(-l, 0)](k, theta) / phase
                - bracket[(l, 0)](k, theta) * phase
            ) / (lam * omega * l)
        return out

    k_max = 2 * max(abs(k) for k, _ in drive.lines)
    parameters = {"lines": list(lines), "lam": lam, "omega": omega, "t0": t0, "l_max": l_max}
    return ClosedForm("line_first_order", kernel, k_max, parameters, rule="arccos")


@dataclass(frozen=True, eq=False)
class DriveStack:
    """
    Drive coefficients by order, V = V0 + V1 + V2 + ...

    Attributes:
        orders: Signed drive coefficients; entry m is the order-m drive. Order 0
            is the target coefficient, higher orders already carry the minus
            sign that cancels the matching Magnus term.
        magnus_terms: Unsigned Magnus operators H_F^(m) that produced orders m >= 1
    """

    orders: Tuple[NcftCoefficient, ...]
    magnus_terms: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.orders:
            raise DomainError("a drive stack needs at least the zeroth order")

    @property
    def order_max(self) -> int:
        return len(self.orders) - 1

    def truncated(self, order: int) -> "DriveStack":
        return DriveStack(self.orders[: order + 1], self.magnus_terms[:order])

    def frame_series(
        self,
        lam: float,
        n: int,
        numerics: Optional[NumericsSettings] = None,
        order: Optional[int] = None,
        weights: Optional[Sequence[float]] = None,
    ) -> FrameSeries:
        """Sum of the rotating-frame series of orders 0..order, optionally weighted."""
        order = self.order_max if order is None else order
        total: Optional[FrameSeries] = None
        for m, coefficient in enumerate(self.orders[: order + 1]):
            series = build_frame_series(coefficient, lam, n, numerics)
            if weights is not None:
                series = series.scaled(weights[m])
            total = series if total is None else total + series
        return total

    def to_json(self) -> str:
        return json.dumps(
            {"orders": [{"order": m, **c.to_dict()} for m, c in enumerate(self.orders)]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DriveStack":
        try:
            data = json.loads(text)
            orders = sorted(data["orders"], key=lambda item: item["order"])
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(f"malformed drive stack: {e}", "drive_stack") from e
        return cls(tuple(coefficient_from_dict(item) for item in orders))


def correction_loop(
    target: NcftCoefficient,
    order_max: int,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    route: str = "fock",
) -> DriveStack:
    """
    Build correction drives that cancel the Floquet-Magnus terms order by order.

    1. Start from the target coefficient as the zeroth-order drive.
    2. Extract its harmonics and form H_F^(1); the first-order drive is the
       coefficient of -H_F^(1) restricted to the trusted block.
    3. For order 2, extract the harmonics of the first-order drive and cancel
       the second-order term of the combined drive the same way.

    Args:
        target: Zeroth-order coefficient
        order_max: 1 or 2
        params: System parameters
        numerics: Numerical settings
        route: "fock" transforms Magnus operators back with ncft_forward;
            "analytic" assembles the first order from delta-root brackets
            (spectral-line targets only)

    Returns:
        DriveStack with order_max + 1 orders
    """
    numerics = numerics or NumericsSettings()
    if order_max not in (1, 2):
        raise DomainError(f"order_max must be 1 or 2, got {order_max}")
    n_trust = numerics.trusted(params.n_fock)
    l_max = numerics.l_max

    h0 = extract_harmonics(target, l_max, params, numerics)
    hf1 = magnus_first_order(h0, params)
    logger.info("first-order Magnus term: max entry %.3e", float(np.max(np.abs(hf1))))
    if route == "analytic":
        if not isinstance(target, SpectralLineSet):
            raise DomainError("the analytic correction route needs a spectral-line target")
        f1 = -line_first_order_coefficient(
            _lines_payload(target), params.lam, params.omega, params.t0, l_max
        )
    elif route == "fock":
        f1 = ncft_forward(-hf1[:n_trust, :n_trust], params)
    else:
        raise DomainError(f"unknown correction route {route!r}")
    if order_max == 1:
        return DriveStack((target, f1), (hf1,))

    h1 = extract_harmonics(f1, l_max, params, numerics)
    hf2 = magnus_second_order(h0, h1, params)
    logger.info("second-order Magnus term: max entry %.3e", float(np.max(np.abs(hf2))))
    f2 = ncft_forward(-hf2[:n_trust, :n_trust], params)
    return DriveStack((target, f1, f2), (hf1, hf2))
