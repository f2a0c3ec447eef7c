"""
Truncated Fock-space toolkit: system parameters, ladder operators, phase-space
plane waves, coherent and cat states, Q-functions and rotations.

Operators are dense complex numpy arrays over the number basis |0>..|N-1>;
states are complex vectors of length N.
"""

import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError, TruncationWarning
from .specfun import laguerre_table

FockOperator = np.ndarray
FockState = np.ndarray

DEFAULT_TAIL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SystemParams:
    """
    Physical parameters of the driven oscillator.

    Attributes:
        lam: Dimensionless Planck constant, [x, p] = i lam
        omega: Floquet frequency in units of the oscillator frequency
        n_sym: Drive resonance integer (driving frequency n_sym * omega)
        beta: Drive amplitude
        t0: Initial reference time in [0, 2 pi / omega)
        n_fock: Fock truncation dimension
        detuning: omega_0 - omega_d / q of the rotating frame, zero on resonance
    """

    lam: float = 2.5
    omega: float = 1.0
    n_sym: int = 2
    beta: float = 0.5
    t0: float = 0.0
    n_fock: int = 60
    detuning: float = 0.0

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise DomainError(f"omega must be positive, got {self.omega}")
        if int(self.n_sym) != self.n_sym or self.n_sym < 1:
            raise DomainError(f"n_sym must be a positive integer, got {self.n_sym}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be non-negative, got {self.beta}")
        if not 0 <= self.t0 < self.period:
            raise DomainError(f"t0 must lie in [0, {self.period}), got {self.t0}")
        if int(self.n_fock) != self.n_fock or self.n_fock < 2:
            raise DomainError(f"n_fock must be an integer >= 2, got {self.n_fock}")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def replace(self, **changes: Any) -> "SystemParams":
        values = asdict(self)
        values.update(changes)
        return SystemParams(**values)

    @classmethod
    def from_mapping(cls, data: Optional[Dict[str, Any]]) -> "SystemParams":
        """Build parameters from a mapping, turning bad input into ConfigError."""
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys {unknown}", "params")
        try:
            return cls(**data)
        except (DomainError, TypeError) as e:
            raise ConfigError(str(e), "params") from e

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def ladder(n: int) -> Tuple[FockOperator, FockOperator]:
    """Lowering and raising operators truncated to n levels."""
    if n < 2:
        raise DomainError("the Fock truncation needs at least 2 levels")
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)
    return a, a.conj().T


def quadratures(n: int, lam: float) -> Tuple[FockOperator, FockOperator]:
    """Position and momentum, x = sqrt(lam/2)(a^dag + a), p = i sqrt(lam/2)(a^dag - a)."""
    a, ad = ladder(n)
    scale = math.sqrt(lam / 2)
    return scale * (ad + a), 1j * scale * (ad - a)


def number_operator(n: int) -> FockOperator:
    return np.diag(np.arange(n, dtype=complex))


def rotation_operator(tau: float, n: int) -> FockOperator:
    """Phase-space rotation R_tau = exp(-i tau a^dag a)."""
    return np.diag(np.exp(-1j * tau * np.arange(n)))


def parity_operator(n: int) -> FockOperator:
    """Photon parity exp(i pi a^dag a)."""
    return np.diag((-1.0) ** np.arange(n)).astype(complex)


def phase_rotate(op: np.ndarray, tau: float) -> np.ndarray:
    """
    Multiply entry (a, b) by exp(i (a - b) tau).

    Equals R_tau^dag op R_tau; works on a single matrix or a stack (..., N, N).
    """
    n = op.shape[-1]
    phases = np.exp(1j * tau * np.arange(n))
    return op * phases[:, None] * phases.conj()[None, :]


def trusted_block(op: np.ndarray, n_trust: int) -> np.ndarray:
    """Inner block unaffected by ladder truncation (vectors or matrices)."""
    if op.ndim == 1:
        return op[:n_trust]
    return op[..., :n_trust, :n_trust]


def planewave_stack(k: np.ndarray, lam: float, n: int) -> np.ndarray:
    """
    Plane-wave matrices exp(i k x) at tau = 0 for every wavenumber in k.

    Matrix elements follow the closed form
    <a|.|b> = e^{-X/2} sqrt(min!/max!) (i k sqrt(lam/2))^{|a-b|} L_min^{|a-b|}(X)
    with X = lam k^2 / 2, the n > m branch written through the Laguerre
    reflection so no negative power of k appears. The Laguerre table carries the
    e^{-X/2} factor from its first row and the remaining prefactor is summed in
    logarithms, which keeps large truncations finite.

    Args:
        k: Wavenumbers, shape (K,)
        lam: Dimensionless Planck constant
        n: Fock truncation

    Returns:
        Complex array of shape (K, n, n)
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = 0.5 * lam * k**2
    table = laguerre_table(n, x) * np.exp(-0.5 * x)[None, None, :]
    idx = np.arange(n)
    lo = np.minimum.outer(idx, idx)
    hi = np.maximum.outer(idx, idx)
    d = hi - lo
    half_log_fact = 0.5 * (special.gammaln(lo + 1) - special.gammaln(hi + 1))

    kc = np.abs(k) * math.sqrt(lam / 2)
    # (|k| c)^d with 0^0 = 1 at k = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_kc = np.log(kc)
        log_mag = half_log_fact[None, :, :] + d[None, :, :] * log_kc[:, None, None]
    log_mag = np.where(d[None, :, :] == 0, half_log_fact[None, :, :], log_mag)
    magnitude = np.exp(log_mag)

    laguerre = np.moveaxis(table[lo, d, :], -1, 0)
    sign = np.where(k < 0, -1.0, 1.0)
    phase = (1j * sign[:, None, None]) ** d[None, :, :]
    return magnitude * laguerre * phase


def planewave_matrix(
    k: float, tau: float, params: Union[SystemParams, float], n: Optional[int] = None
) -> FockOperator:
    """
    Matrix of exp(i k (x cos tau + p sin tau)) in the truncated number basis.

    Args:
        k: Wavenumber
        tau: Phase-space direction
        params: SystemParams, or lam directly
        n: Truncation, defaults to params.n_fock

    Returns:
        Complex (n, n) matrix
    """
    if not math.isfinite(k):
        raise DomainError("planewave_matrix needs a finite wavenumber")
    lam, n = _lam_and_dim(params, n)
    return phase_rotate(planewave_stack(np.array([k]), lam, n)[0], tau)


def coherent_amplitudes(alpha: np.ndarray, n: int) -> np.ndarray:
    """
    Number-basis amplitudes e^{-|alpha|^2/2} alpha^m / sqrt(m!) without renormalization.

    Built by the term recursion c_{m+1} = c_m alpha / sqrt(m+1).

    Args:
        alpha: Complex amplitudes, any shape S
        n: Truncation

    Returns:
        Array of shape S + (n,)
    """
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(alpha.shape + (n,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for m in range(1, n):
        out[..., m] = out[..., m - 1] * alpha / math.sqrt(m)
    return out


def check_tail(
    state: FockState, threshold: float = DEFAULT_TAIL_THRESHOLD, label: str = "state"
) -> None:
    """Warn with TruncationWarning when the top level carries too much weight."""
    tail = abs(state[-1]) ** 2
    if tail > threshold:
        warnings.warn(
            f"{label}: weight {tail:.3e} in the top Fock level exceeds {threshold:.1e}",
            TruncationWarning,
            stacklevel=3,
        )


def coherent_state(
    alpha: complex, n: int, tail_threshold: float = DEFAULT_TAIL_THRESHOLD
) -> FockState:
    """Normalized truncated coherent state |alpha>."""
    state = coherent_amplitudes(np.asarray(alpha), n)
    check_tail(state, tail_threshold, label=f"coherent state alpha={alpha}")
    return state / np.linalg.norm(state)


def cat_normalization(q: int, s: int, alpha: complex) -> float:
    """
    Squared norm N_s of sum_p exp(-i s 2 pi p / q) |alpha exp(i 2 pi p / q)>.

    Equals q^2 sum_{m = s mod q} Poisson(m; |alpha|^2); for q = 4 this is
    8 e^{-|alpha|^2}(cosh|alpha|^2 +- cos|alpha|^2) for s = 0, 2 and
    8 e^{-|alpha|^2}(sinh|alpha|^2 +- sin|alpha|^2) for s = 1, 3.
    """
    mean = abs(alpha) ** 2
    m_stop = int(mean + 20 * math.sqrt(mean) + 60)
    m = np.arange(s, m_stop, q)
    if mean == 0:
        return float(q**2) if s == 0 else 0.0
    log_pmf = m * math.log(mean) - mean - special.gammaln(m + 1)
    return float(q**2 * np.exp(log_pmf).sum())


def cat_state(
    q: int,
    s: int,
    alpha: complex,
    n: int,
    tail_threshold: float = DEFAULT_TAIL_THRESHOLD,
) -> FockState:
    """
    q-component cat state with quasinumber s.

    The superposition sum_p exp(-i s 2 pi p / q) |alpha e^{i 2 pi p / q}> keeps
    exactly the number states m = s (mod q), so it is assembled directly in the
    number basis as q * <m|alpha> / sqrt(N_s) on that sector.

    The minus sign in the component phase is what puts the support on
    m = s (mod q); the opposite convention exp(+i s 2 pi p / q) would select
    m = -s (mod q) instead.

    Args:
        q: Number of components, q >= 2
        s: Quasinumber in 0..q-1
        alpha: Coherent amplitude
        n: Truncation
        tail_threshold: Allowed weight in the top level

    Returns:
        Normalized state vector

    Raises:
        DomainError: If the sector is empty in the alpha -> 0 limit
    """
    if int(q) != q or q < 2:
        raise DomainError(f"q must be an integer >= 2, got {q}")
    if int(s) != s or not 0 <= s < q:
        raise DomainError(f"s must lie in 0..{q - 1}, got {s}")
    norm2 = cat_normalization(q, s, alpha)
    if norm2 < 1e-24:
        raise DomainError(
            f"cat state q={q}, s={s} is degenerate at alpha={alpha} (N_s={norm2:.2e})"
        )
    amplitudes = coherent_amplitudes(np.asarray(alpha), n)
    sector = (np.arange(n) % q) == s
    state = np.where(sector, q * amplitudes, 0.0) / math.sqrt(norm2)
    check_tail(state, tail_threshold, label=f"cat state q={q} s={s}")
    return state / np.linalg.norm(state)


def qfunction(
    op: FockOperator,
    x: np.ndarray,
    p: np.ndarray,
    params: Union[SystemParams, float],
) -> np.ndarray:
    """
    Q-function <alpha|op|alpha> on phase-space points, alpha = (x + i p)/sqrt(2 lam).

    Args:
        op: Operator matrix
        x: Position coordinates (any shape, broadcast with p)
        p: Momentum coordinates
        params: SystemParams or lam

    Returns:
        Complex array with the broadcast shape of x and p
    """
    lam, _ = _lam_and_dim(params, op.shape[0])
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    alpha = (x + 1j * p) / math.sqrt(2 * lam)
    vectors = coherent_amplitudes(alpha, op.shape[0])
    return np.einsum("...a,ab,...b->...", vectors.conj(), op, vectors)


def cat_lattice_target(
    q: int, alpha0: complex, gamma: float, beta: float, n: int
) -> FockOperator:
    """
    q-fold rotational lattice target
    (beta/|alpha0|^{2q}) e^{-gamma n}(a^dag^q - alpha0*^q)(a^q - alpha0^q) e^{-gamma n}.

    The q coherent states alpha0 e^{gamma + i 2 pi s / q} are exact zero modes.
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if alpha0 == 0:
        raise DomainError("alpha0 must be non-zero")
    a, _ = ladder(n)
    aq = np.linalg.matrix_power(a, q) - alpha0**q * np.eye(n)
    damping = np.diag(np.exp(-gamma * np.arange(n)))
    core = aq.conj().T @ aq
    return beta / abs(alpha0) ** (2 * q) * damping @ core @ damping


def _lam_and_dim(
    params: Union[SystemParams, float], n: Optional[int]
) -> Tuple[float, int]:
    if isinstance(params, SystemParams):
        return params.lam, int(n if n is not None else params.n_fock)
    if n is None:
        raise DomainError("a truncation dimension is required when passing lam")
    return float(params), int(n)
