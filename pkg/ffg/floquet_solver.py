"""
Exact Floquet diagnostics: the quasienergy eigenproblem in the composite
Fock-times-Fourier space, the one-period propagator, micromotion, level
tracking and fidelity metrics.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from .config import NumericsSettings
from .errors import ConvergenceError, DimensionError, DomainError
from .fockspace import FockOperator, FockState, SystemParams, cat_state, number_operator
from .magnus import DriveStack
from .ncft import FrameSeries, NcftCoefficient, build_frame_series

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
UNITARITY_TOL = 1e-9

Drive = Union[DriveStack, NcftCoefficient, FrameSeries]

# fourth-order commutator-free exponential integrator
_CF4_NODES = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF4_A1 = (3 - 2 * math.sqrt(3)) / 12
_CF4_A2 = (3 + 2 * math.sqrt(3)) / 12


def drive_series(
    drive: Drive,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    n: Optional[int] = None,
) -> FrameSeries:
    """Rotating-frame series of any accepted drive form at n (default params.n_fock) levels."""
    n = params.n_fock if n is None else n
    if isinstance(drive, FrameSeries):
        if drive.n != n:
            raise DomainError(f"frame series has {drive.n} levels, expected {n}")
        return drive
    if isinstance(drive, DriveStack):
        return drive.frame_series(params.lam, n, numerics)
    return build_frame_series(drive, params.lam, n, numerics)


def fold_quasienergy(epsilon: np.ndarray, lam: float, omega: float) -> np.ndarray:
    """Fold into the zone (-lam Omega / 2, lam Omega / 2]."""
    width = lam * omega
    return 0.5 * width - np.mod(0.5 * width - np.asarray(epsilon), width)


@dataclass(frozen=True, eq=False)
class QuasienergySolution:
    """
    Physical Floquet modes of the composite-space eigenproblem.

    Attributes:
        epsilon: Folded quasienergies, one per physical mode
        modes: Coefficients c[alpha, M + m_max, m]
        m_max: Temporal truncation
        params: Parameters the problem was built from
        mean_m: Fourier-index centroid of each selected eigenvector
    """

    epsilon: np.ndarray
    modes: np.ndarray
    m_max: int
    params: SystemParams
    mean_m: np.ndarray

    @property
    def count(self) -> int:
        return self.epsilon.size


def quasienergy_solve(
    drive: Drive,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    m_max: Optional[int] = None,
) -> QuasienergySolution:
    """
    Diagonalize the quasienergy operator H(t) - i lam d/dt on Fock x Fourier space.

    Block (M, M') is H_{M-M'} + delta_{MM'} (lam M Omega + lam detuning a^dag a).
    Of the N (2 m_max + 1) eigenvectors, the N with the smallest Fourier
    centroid |<M>| are kept as the physical modes.

    Args:
        drive: Drive stack, coefficient or rotating-frame series
        params: System parameters
        numerics: Numerical settings
        m_max: Temporal truncation, defaults to numerics.m_max

    Returns:
        QuasienergySolution

    Raises:
        DimensionError: If the composite space exceeds numerics.max_floquet_dim
    """
    numerics = numerics or NumericsSettings()
    m_max = numerics.m_max if m_max is None else m_max
    if m_max < 1:
        raise DomainError(f"m_max must be >= 1, got {m_max}")
    n = params.n_fock
    blocks = 2 * m_max + 1
    dim = n * blocks
    if dim > numerics.max_floquet_dim:
        raise DimensionError(
            f"composite Floquet space of dimension {dim} exceeds {numerics.max_floquet_dim}"
        )
    series = drive_series(drive, params, numerics)
    harmonics = {l: series.harmonic(l) for l in range(-2 * m_max, 2 * m_max + 1)}
    detuning = params.lam * params.detuning * number_operator(n)

    matrix = np.zeros((dim, dim), dtype=complex)
    for i, big_m in enumerate(range(-m_max, m_max + 1)):
        for j, big_m2 in enumerate(range(-m_max, m_max + 1)):
            block = harmonics[big_m - big_m2].copy()
            if i == j:
                block += detuning + params.lam * big_m * params.omega * np.eye(n)
            matrix[i * n : (i + 1) * n, j * n : (j + 1) * n] = block

    deviation = float(np.max(np.abs(matrix - matrix.conj().T)))
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if deviation > HERMITICITY_TOL * scale:
        raise DomainError(f"quasienergy matrix is not Hermitian (deviation {deviation:.2e})")
    matrix = 0.5 * (matrix + matrix.conj().T)

    values, vectors = linalg.eigh(matrix)
    coeffs = vectors.T.reshape(dim, blocks, n)
    weights = np.sum(np.abs(coeffs) ** 2, axis=2)
    centroid = weights @ np.arange(-m_max, m_max + 1)
    keep = np.sort(np.argsort(np.abs(centroid), kind="stable")[:n])
    logger.debug("quasienergy solve: dim=%d, kept %d physical modes", dim, keep.size)
    return QuasienergySolution(
        epsilon=fold_quasienergy(values[keep], params.lam, params.omega),
        modes=coeffs[keep],
        m_max=m_max,
        params=params,
        mean_m=centroid[keep],
    )


def micromotion(sol: QuasienergySolution, alpha_index: int, t: float) -> FockState:
    """Floquet mode at time t, Phi(t) = sum_M c^{M} e^{i M Omega t}, normalized."""
    orders = np.arange(-sol.m_max, sol.m_max + 1)
    phases = np.exp(1j * orders * sol.params.omega * t)
    state = phases @ sol.modes[alpha_index]
    norm = np.linalg.norm(state)
    if norm == 0:
        raise DomainError(f"mode {alpha_index} vanishes at t={t}")
    return state / norm


def target_levels(op: FockOperator, count: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """Lowest eigenvalues and eigenvectors (columns) of a Hermitian target."""
    values, vectors = linalg.eigh(0.5 * (op + op.conj().T))
    return values[:count], vectors[:, :count]


def match_levels(reference: np.ndarray, candidates: np.ndarray) -> List[int]:
    """
    Assign each reference vector a distinct candidate by maximum total overlap.

    Args:
        reference: Vectors as columns, shape (N, K)
        candidates: Vectors as columns, shape (N, C) with C >= K

    Returns:
        Candidate column index for each reference column
    """
    overlap = np.abs(reference.conj().T @ candidates)
    rows, cols = optimize.linear_sum_assignment(-overlap)
    order = np.argsort(rows)
    return [int(c) for c in cols[order]]


def mode_snapshots(sol: QuasienergySolution, t: float) -> np.ndarray:
    """All physical modes at time t as columns."""
    return np.stack([micromotion(sol, a, t) for a in range(sol.count)], axis=1)


def identify_levels(
    sol: QuasienergySolution, reference: np.ndarray, t: Optional[float] = None
) -> List[int]:
    """Modes whose snapshot at t (default t0) best matches each reference vector."""
    t = sol.params.t0 if t is None else t
    snapshots = mode_snapshots(sol, t)
    n = reference.shape[0]
    return match_levels(reference, snapshots[:n])


def track_levels(
    solutions: Sequence[QuasienergySolution],
    reference: np.ndarray,
    t: Optional[float] = None,
) -> List[List[int]]:
    """
    Follow labelled levels along a parameter sweep.

    The first point is matched to the reference vectors; every later point to
    the snapshots picked at the previous point, which keeps labels on their
    branch through avoided crossings.
    """
    tracked: List[List[int]] = []
    current = reference
    for sol in solutions:
        indices = identify_levels(sol, current, t)
        tracked.append(indices)
        snapshots = mode_snapshots(sol, sol.params.t0 if t is None else t)
        current = snapshots[: reference.shape[0], indices]
    return tracked


@dataclass(frozen=True, eq=False)
class PropagatorResult:
    """
    One-period propagator in the rotating frame.

    Attributes:
        unitary: U(t_start + duration, t_start)
        step_count: Time slices of the accepted result per integrated segment
        error_estimate: Richardson estimate from the last step doubling (trusted block)
        method: Integrator used
    """

    unitary: np.ndarray
    step_count: int
    error_estimate: float
    method: str

    def quasienergies(self, lam: float, duration: float, omega: float) -> np.ndarray:
        """Eigenphases mapped to folded quasienergies, epsilon = -(lam/T) arg(u)."""
        phases = np.angle(np.linalg.eigvals(self.unitary))
        return np.sort(fold_quasienergy(-lam * phases / duration, lam, omega))


def _hermitian_exp(h: np.ndarray, factor: float) -> np.ndarray:
    """exp(-i factor h) for Hermitian h, exactly unitary."""
    values, vectors = linalg.eigh(0.5 * (h + h.conj().T))
    return (vectors * np.exp(-1j * factor * values)) @ vectors.conj().T


def _evolve(
    hamiltonian, t_start: float, duration: float, steps: int, lam: float, method: str, n: int
) -> np.ndarray:
    dt = duration / steps
    u = np.eye(n, dtype=complex)
    for j in range(steps):
        t = t_start + j * dt
        if method == "midpoint":
            u = _hermitian_exp(hamiltonian(t + 0.5 * dt), dt / lam) @ u
            continue
        h1 = hamiltonian(t + _CF4_NODES[0] * dt)
        h2 = hamiltonian(t + _CF4_NODES[1] * dt)
        u = _hermitian_exp(_CF4_A2 * h1 + _CF4_A1 * h2, dt / lam) @ u
        u = _hermitian_exp(_CF4_A1 * h1 + _CF4_A2 * h2, dt / lam) @ u
    return u


def propagator(
    drive: Drive,
    params: SystemParams,
    numerics: Optional[NumericsSettings] = None,
    t_start: Optional[float] = None,
    duration: Optional[float] = None,
    steps: Optional[int] = None,
    symmetry: int = 1,
) -> PropagatorResult:
    """
    Time-ordered propagator of i lam dU/dt = (H(t) + lam detuning a^dag a) U.

    Integrates from t_start (default params.t0) over duration (default one
    period), doubling the step count until the Richardson estimate
    |U_2s - U_s| / (2^p - 1) on the trusted block, with p the order of the
    method, is within numerics.propagator_tol.

    With symmetry=q every tau-harmonic of the rotating-frame series must be a
    multiple of q. Then H(t + T/q) = D H(t) D^dag with D = exp(2 pi i a^dag a / q),
    so only the first q-th of the period is integrated and
    U(T) = (D^dag U(T/q))^q.

    Args:
        drive: Coefficient or prebuilt FrameSeries
        params: System parameters
        numerics: Step and tolerance settings
        t_start: Initial time, default params.t0
        duration: Integration time, default one period
        steps: Initial step count, default numerics.propagator_steps
        symmetry: Rotational order q used to fold a full period

    Raises:
        DomainError: If the drive lacks the requested rotational symmetry
        ConvergenceError: If the tolerance is not met at max_propagator_steps
    """
    numerics = numerics or NumericsSettings()
    t_start = params.t0 if t_start is None else t_start
    duration = params.period if duration is None else duration
    steps = numerics.propagator_steps if steps is None else steps
    if steps < 1:
        raise DomainError("steps must be positive")
    if isinstance(symmetry, bool) or not isinstance(symmetry, int) or symmetry < 1:
        raise DomainError(f"symmetry must be a positive integer, got {symmetry}")
    n = params.n_fock
    n_trust = numerics.trusted(n)
    series = drive_series(drive, params, numerics)
    detuning = params.lam * params.detuning * number_operator(n)

    def hamiltonian(t: float) -> np.ndarray:
        return series.at(params.omega * t) + detuning

    segment = duration
    if symmetry > 1:
        broken = sorted(h for h in series.blocks if h % symmetry)
        if broken:
            raise DomainError(
                f"tau harmonics {broken} are not multiples of {symmetry}"
            )
        if not math.isclose(duration, params.period, rel_tol=1e-12):
            raise DomainError("symmetry folding needs a duration of one period")
        segment = duration / symmetry
        twist = np.exp(-2j * np.pi * np.arange(n) / symmetry)

    method = numerics.propagator_method
    richardson = 2 ** (4 if method == "cf4" else 2) - 1

    def evolve(count: int) -> np.ndarray:
        u = _evolve(hamiltonian, t_start, segment, count, params.lam, method, n)
        if symmetry == 1:
            return u
        return np.linalg.matrix_power(twist[:, None] * u, symmetry)

    previous = evolve(steps)
    while True:
        if 2 * steps > numerics.max_propagator_steps:
            raise ConvergenceError(
                f"propagator did not converge to {numerics.propagator_tol:.1e} "
                f"within {numerics.max_propagator_steps} steps",
                module=__name__,
            )
        steps *= 2
        current = evolve(steps)
        error = float(np.max(np.abs(current - previous)[:n_trust, :n_trust])) / richardson
        logger.debug("propagator: %d steps, error estimate %.3e", steps, error)
        if error <= numerics.propagator_tol:
            break
        previous = current
    unitarity = float(np.max(np.abs(current.conj().T @ current - np.eye(n))))
    if unitarity > UNITARITY_TOL:
        raise ConvergenceError(f"propagator lost unitarity ({unitarity:.2e})", module=__name__)
    return PropagatorResult(current, steps, error, method)


def fidelity_cats(u: FockOperator, q: int, alpha: complex, n: Optional[int] = None) -> float:
    """F = (1/q) sum_s |<psi_s|U|psi_s>| over the q cat states of amplitude alpha."""
    n = u.shape[0] if n is None else n
    if n > u.shape[0]:
        raise DomainError("cat states need no more levels than the propagator has")
    total = 0.0
    for s in range(q):
        psi = cat_state(q, s, alpha, n)
        total += abs(np.vdot(psi, u[:n, :n] @ psi))
    return float(min(1.0, total / q))


def state_fidelity(a: FockState, b: FockState) -> float:
    """|<a|b>|."""
    if a.shape != b.shape:
        raise DomainError("states must have equal dimension")
    return float(abs(np.vdot(a, b)))


def amplitude_profile_delta(a: FockState, b: FockState) -> np.ndarray:
    """Per-level difference of absolute amplitudes, |<m|a>| - |<m|b>|."""
    if a.shape != b.shape:
        raise DomainError("states must have equal dimension")
    return np.abs(a) - np.abs(b)
