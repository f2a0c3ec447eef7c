import math

import numpy as np
import pytest

from ffg.config import NumericsSettings
from ffg.errors import ConvergenceError, DimensionError, DomainError
from ffg.floquet_solver import (
    amplitude_profile_delta,
    fidelity_cats,
    fold_quasienergy,
    identify_levels,
    match_levels,
    micromotion,
    mode_snapshots,
    propagator,
    quasienergy_solve,
    state_fidelity,
    target_levels,
    track_levels,
)
from ffg.fockspace import SystemParams, cat_state, rotation_operator
from ffg.ncft import FrameSeries, ncft_monochromatic


def _static_series(energies):
    return FrameSeries({0: np.diag(np.asarray(energies, dtype=complex))}, len(energies))


def _circular_gap(a, b, width):
    za = np.exp(2j * math.pi * np.asarray(a) / width)
    zb = np.exp(2j * math.pi * np.asarray(b) / width)
    gaps = np.abs(za[:, None] - zb[None, :])
    return max(np.max(np.min(gaps, axis=1)), np.max(np.min(gaps, axis=0)))


def test_fold_quasienergy():
    width = 2.5
    values = np.array([-3.0, -1.25, 0.0, 1.25, 1.3, 7.1])
    folded = fold_quasienergy(values, 2.5, 1.0)
    assert np.all(folded > -width / 2) and np.all(folded <= width / 2)
    np.testing.assert_allclose(fold_quasienergy(values + width, 2.5, 1.0), folded, atol=1e-12)
    assert fold_quasienergy(1.25, 2.5, 1.0) == pytest.approx(1.25)
    assert fold_quasienergy(-1.25, 2.5, 1.0) == pytest.approx(1.25)
    assert fold_quasienergy(0.3, 2.5, 1.0) == pytest.approx(0.3)


def test_static_drive_quasienergies():
    energies = [-0.31, -0.07, 0.12, 0.29, 0.41]
    params = SystemParams(lam=2.5, n_fock=5)
    sol = quasienergy_solve(_static_series(energies), params, m_max=3)
    assert sol.count == 5
    np.testing.assert_allclose(np.sort(sol.epsilon), energies, atol=1e-12)
    np.testing.assert_allclose(sol.mean_m, 0.0, atol=1e-12)


def test_quasienergy_solve_limits(small_params):
    with pytest.raises(DimensionError):
        quasienergy_solve(
            ncft_monochromatic(small_params),
            small_params,
            NumericsSettings(max_floquet_dim=100),
            m_max=4,
        )
    with pytest.raises(DomainError):
        quasienergy_solve(ncft_monochromatic(small_params), small_params, m_max=0)
    with pytest.raises(DomainError):
        quasienergy_solve(_static_series([0.1, 0.2]), small_params, m_max=2)


def test_quasienergies_do_not_depend_on_reference_time(small_params, fast_numerics):
    drive = ncft_monochromatic(small_params)
    spectra = [
        np.sort(
            quasienergy_solve(drive, small_params.replace(t0=t0), fast_numerics).epsilon
        )
        for t0 in (0.0, small_params.period / 8, small_params.period / 4)
    ]
    for spectrum in spectra[1:]:
        np.testing.assert_allclose(spectrum, spectra[0], atol=1e-8)


def test_propagator_eigenphases_match_quasienergies():
    params = SystemParams(lam=2.5, n_sym=2, beta=0.5, n_fock=12)
    numerics = NumericsSettings(n_fock=12, trust_margin=0, m_max=20)
    drive = ncft_monochromatic(params)
    result = propagator(drive, params, numerics)
    assert result.method == "cf4"
    assert result.error_estimate <= numerics.propagator_tol
    np.testing.assert_allclose(
        result.unitary.conj().T @ result.unitary, np.eye(12), atol=1e-9
    )
    from_propagator = result.quasienergies(params.lam, params.period, params.omega)
    from_solver = quasienergy_solve(drive, params, numerics).epsilon
    assert _circular_gap(from_propagator, from_solver, params.lam) <= 1e-6


def test_mode_snapshots_are_propagator_eigenvectors():
    params = SystemParams(lam=2.5, n_sym=2, beta=0.5, n_fock=12, t0=0.9)
    numerics = NumericsSettings(n_fock=12, trust_margin=0, m_max=20)
    drive = ncft_monochromatic(params)
    unitary = propagator(drive, params, numerics).unitary
    sol = quasienergy_solve(drive, params, numerics)
    modes = mode_snapshots(sol, params.t0)
    np.testing.assert_allclose(modes.conj().T @ modes, np.eye(12), atol=1e-6)
    phases = np.exp(-1j * sol.epsilon * params.period / params.lam)
    np.testing.assert_allclose(unitary @ modes, modes * phases[None, :], atol=1e-6)
    np.testing.assert_allclose(modes[:, 5], micromotion(sol, 5, params.t0), atol=1e-12)


def test_symmetry_folded_propagator_matches_full_period():
    params = SystemParams(lam=2.5, n_sym=2, beta=0.5, n_fock=10, t0=0.4)
    numerics = NumericsSettings(n_fock=10, trust_margin=0)
    drive = ncft_monochromatic(params)
    full = propagator(drive, params, numerics)
    folded = propagator(drive, params, numerics, symmetry=2)
    assert folded.error_estimate <= numerics.propagator_tol
    np.testing.assert_allclose(folded.unitary, full.unitary, atol=1e-7)
    with pytest.raises(DomainError):
        propagator(drive, params, numerics, symmetry=3)
    with pytest.raises(DomainError):
        propagator(drive, params, numerics, duration=params.period / 2, symmetry=2)
    with pytest.raises(DomainError):
        propagator(drive, params, numerics, symmetry=0)


def test_propagator_methods_agree():
    params = SystemParams(lam=2.5, n_sym=2, beta=0.3, n_fock=10)
    drive = ncft_monochromatic(params)
    cf4 = propagator(drive, params, NumericsSettings(trust_margin=0))
    loose = NumericsSettings(trust_margin=0, propagator_method="midpoint", propagator_tol=1e-7)
    midpoint = propagator(drive, params, loose)
    assert midpoint.method == "midpoint"
    assert np.max(np.abs(cf4.unitary - midpoint.unitary)) <= 1e-6


def test_propagator_of_static_drive_is_exact():
    energies = np.array([0.1, -0.2, 0.35])
    params = SystemParams(lam=2.0, n_fock=3)
    result = propagator(_static_series(energies), params, NumericsSettings(trust_margin=0))
    expected = np.diag(np.exp(-1j * energies * params.period / params.lam))
    np.testing.assert_allclose(result.unitary, expected, atol=1e-12)


def test_propagator_errors(small_params):
    drive = ncft_monochromatic(small_params)
    with pytest.raises(DomainError):
        propagator(drive, small_params, steps=0)
    stingy = NumericsSettings(propagator_steps=64, max_propagator_steps=64)
    with pytest.raises(ConvergenceError):
        propagator(drive, small_params, stingy)


def test_micromotion_is_periodic_and_normalized(small_params, fast_numerics):
    sol = quasienergy_solve(ncft_monochromatic(small_params), small_params, fast_numerics)
    first = micromotion(sol, 3, 0.4)
    assert np.linalg.norm(first) == pytest.approx(1.0)
    later = micromotion(sol, 3, 0.4 + small_params.period)
    assert state_fidelity(first, later) == pytest.approx(1.0, abs=1e-10)


def test_match_levels_recovers_permutation():
    rng = np.random.default_rng(2)
    basis, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    perm = [4, 0, 5, 2, 1, 3]
    candidates = basis[:, perm]
    assert match_levels(basis[:, :3], candidates) == [1, 4, 3]


def test_target_levels_and_identification():
    energies = [0.3, -0.2, 0.05, 0.4]
    op = np.diag(energies).astype(complex)
    values, vectors = target_levels(op, 2)
    np.testing.assert_allclose(values, [-0.2, 0.05])
    params = SystemParams(lam=2.5, n_fock=4)
    sol = quasienergy_solve(_static_series(energies), params, m_max=2)
    picked = identify_levels(sol, vectors)
    np.testing.assert_allclose(sol.epsilon[picked], [-0.2, 0.05], atol=1e-12)
    tracked = track_levels([sol, sol], vectors)
    assert tracked == [picked, picked]


def test_fidelity_cats():
    n = 60
    assert fidelity_cats(np.eye(n), 4, 1.538) == pytest.approx(1.0)
    assert fidelity_cats(rotation_operator(math.pi / 2, n), 4, 1.538) == pytest.approx(1.0)
    assert fidelity_cats(np.zeros((n, n)), 4, 1.538) == 0.0
    with pytest.raises(DomainError):
        fidelity_cats(np.eye(10), 4, 1.538, n=20)


def test_state_metrics():
    a = cat_state(4, 0, 1.538, 30)
    b = cat_state(4, 2, 1.538, 30)
    assert state_fidelity(a, a) == pytest.approx(1.0)
    assert state_fidelity(a, b) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(amplitude_profile_delta(a, a), 0.0)
    with pytest.raises(DomainError):
        state_fidelity(a, a[:10])
    with pytest.raises(DomainError):
        amplitude_profile_delta(a, a[:10])
