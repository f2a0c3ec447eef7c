import json
import math

import numpy as np
import pytest

from ffg.analytic_example import (
    MonoParams,
    f1_analytic,
    mono_first_order_coefficient,
    rwa_q_exact,
    rwa_target,
)
from ffg.config import NumericsSettings
from ffg.errors import DomainError
from ffg.fockspace import SystemParams, qfunction, rotation_operator
from ffg.magnus import extract_harmonics, magnus_first_order
from ffg.ncft import coefficient_from_dict, inverse_ncft, ncft_monochromatic


def test_mono_params_round_trip():
    params = SystemParams(lam=2.5, n_sym=3, beta=0.4, t0=0.2, n_fock=50)
    mono = MonoParams.from_system(params, l_max=6)
    assert mono.l_max == 6 and mono.n_sym == 3
    assert mono.to_system(n_fock=50) == params
    with pytest.raises(DomainError):
        MonoParams(n_sym=0)
    with pytest.raises(DomainError):
        MonoParams(l_max=0)


def test_rwa_target_matrix_element(mono_params):
    target = rwa_target(mono_params, 20)
    lam, beta = mono_params.lam, mono_params.beta
    expected = -beta * math.exp(-lam / 4) * math.sqrt(2) * lam / 8
    assert target[0, 2] == pytest.approx(expected, rel=1e-12)
    assert target[2, 0] == pytest.approx(expected, rel=1e-12)
    assert target[0, 1] == 0


def test_rwa_target_vanishes_without_drive(mono_params):
    np.testing.assert_array_equal(rwa_target(mono_params.replace(beta=0.0), 20), 0)


def test_rwa_target_rejects_tiny_truncation(mono_params):
    with pytest.raises(DomainError):
        rwa_target(mono_params, 3)


@pytest.mark.parametrize("n_sym", [1, 2, 3, 4])
def test_rwa_target_symmetries(mono_params, n_sym):
    params = mono_params.replace(n_sym=n_sym)
    n = 40
    target = rwa_target(params, n)
    np.testing.assert_allclose(target, target.conj().T, atol=1e-14)

    r = rotation_operator(2 * math.pi / n_sym, n)
    assert np.max(np.abs(target @ r - r @ target)) <= 1e-10

    half = rotation_operator(math.pi / n_sym, n)
    chiral = half.conj().T @ target @ half
    assert np.max(np.abs(chiral + target)) <= 1e-10
    spectrum = np.linalg.eigvalsh(target)
    np.testing.assert_allclose(np.sort(-spectrum), spectrum, atol=1e-10)


def test_inverse_transform_of_monochromatic_lines_is_the_target(mono_params):
    params = mono_params.replace(n_fock=30)
    operator = inverse_ncft(ncft_monochromatic(params), params)
    np.testing.assert_allclose(operator, rwa_target(params), atol=1e-12)


def test_rwa_q_exact_simple_values(mono_params):
    assert float(rwa_q_exact(mono_params, 0.0, 0.7)) == pytest.approx(0.0)
    theta = np.linspace(0, 2 * math.pi, 9)
    np.testing.assert_allclose(
        rwa_q_exact(mono_params, 2.0, theta),
        rwa_q_exact(mono_params, 2.0, theta + math.pi),
        atol=1e-14,
    )
    with pytest.raises(DomainError):
        rwa_q_exact(mono_params, -1.0, 0.0)


def test_rwa_q_exact_matches_fock_q_function(mono_params):
    params = mono_params.replace(n_fock=80)
    r, theta = np.meshgrid(np.linspace(0.0, 6.0, 13), np.linspace(0, 2 * math.pi, 12))
    numeric = qfunction(rwa_target(params), r * np.cos(theta), r * np.sin(theta), params.lam)
    exact = rwa_q_exact(params, r, theta)
    assert np.max(np.abs(numeric.real - exact)) <= 1e-8


def test_f1_support_and_symmetry(mono_params):
    k = np.array([-2.5, -2.0, 2.0, 3.1])
    np.testing.assert_array_equal(f1_analytic(k, 0.4, mono_params), 0)

    k = np.array([0.3, 1.1, 1.9])
    for tau in (0.0, 0.8, 2.3):
        plus = f1_analytic(k, tau, mono_params)
        minus = f1_analytic(-k, tau, mono_params)
        np.testing.assert_allclose(plus, np.conj(minus), atol=1e-12)
    assert np.all(np.isfinite(f1_analytic(np.array([1e-12, 1.999999999]), 0.3, mono_params)))


def test_f1_registry_round_trip(mono_params):
    coefficient = mono_first_order_coefficient(2, 0.5, 2.5, 1.0, 0.0, 10)
    rebuilt = coefficient_from_dict(json.loads(json.dumps(coefficient.to_dict())))
    assert rebuilt.evaluate(0.7, 1.3) == pytest.approx(coefficient.evaluate(0.7, 1.3))
    assert coefficient.evaluate(0.7, 1.3) == pytest.approx(f1_analytic(0.7, 1.3, mono_params))


def test_f1_analytic_matches_fock_route(mono_params):
    params = mono_params.replace(n_fock=80)
    numerics = NumericsSettings(n_fock=80, l_max=10)
    harmonics = extract_harmonics(ncft_monochromatic(params), 10, params, numerics)
    fock = magnus_first_order(harmonics, params)[:20, :20]
    coefficient = mono_first_order_coefficient(2, 0.5, 2.5, 1.0, 0.0, 10)
    analytic = inverse_ncft(coefficient, params, numerics)[:20, :20]
    assert np.linalg.norm(analytic - fock) <= 1e-6 * np.linalg.norm(fock)
