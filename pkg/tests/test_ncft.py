import itertools
import json
import math

import numpy as np
import pytest

from ffg.config import NumericsSettings
from ffg.errors import ConfigError, ConvergenceError, DomainError
from ffg.fockspace import SystemParams, cat_lattice_target, qfunction
from ffg.ncft import (
    ClosedForm,
    SpectralLineSet,
    arccos_rule,
    build_frame_series,
    cat_lattice_k_c,
    cat_lattice_q_exact,
    coefficient_from_dict,
    drive_chart,
    drive_potential,
    fnm_coefficient,
    inverse_ncft,
    ncft_cat_lattice,
    ncft_forward,
    ncft_monochromatic,
    quadrature_check,
    rotating_frame_hamiltonian,
    split_gauss_legendre,
    synth_drive,
)


def _random_operator(n, seed=1, hermitian=False):
    rng = np.random.default_rng(seed)
    op = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return op + op.conj().T if hermitian else op


def test_split_gauss_legendre_handles_the_kink():
    k, w = split_gauss_legendre(2.0, 20)
    assert k.size == 40 and np.all(np.diff(k) > 0)
    assert np.sum(w * np.abs(k)) == pytest.approx(4.0, rel=1e-13)
    assert np.sum(w * k**4) == pytest.approx(2 * 32 / 5, rel=1e-13)


def test_arccos_rule_integrates_square_root_edges():
    k, w = arccos_rule(2.0, 30)
    assert np.all(np.abs(k) <= 2.0)
    assert np.sum(w * np.sqrt(4.0 - k**2)) == pytest.approx(2 * math.pi, rel=1e-12)
    assert np.sum(w) == pytest.approx(4.0, rel=1e-10)


@pytest.mark.parametrize("n,m", [(0, 0), (2, 5), (5, 2), (3, 3), (0, 7)])
def test_fnm_kummer_form_matches_laguerre_form(n, m):
    for k in (0.4, 1.3):
        laguerre = fnm_coefficient(n, m, k, 0.3, 2.5)
        kummer = fnm_coefficient(n, m, k, 0.3, 2.5, method="kummer")
        assert abs(kummer - laguerre) <= 1e-10 * max(1.0, abs(laguerre))


def test_fnm_is_finite_at_origin_and_rejects_bad_input():
    assert fnm_coefficient(0, 0, 0.0, 0.0, 2.5) == pytest.approx(2.5)
    assert fnm_coefficient(1, 3, 0.0, 0.0, 2.5) == 0
    with pytest.raises(DomainError):
        fnm_coefficient(1, 3, 0.0, 0.0, 2.5, method="kummer")
    with pytest.raises(DomainError):
        fnm_coefficient(-1, 0, 1.0, 0.0, 2.5)
    with pytest.raises(DomainError):
        fnm_coefficient(0, 0, 1.0, 0.0, 2.5, method="series")


def test_fock_backed_evaluate_matches_matrix_units():
    op = _random_operator(5)
    coefficient = ncft_forward(op, 2.5)
    k, tau = 0.9, 1.2
    expected = sum(
        op[a, b] * fnm_coefficient(a, b, k, tau, 2.5) for a in range(5) for b in range(5)
    )
    assert coefficient.evaluate(k, tau) == pytest.approx(expected, rel=1e-10)


def test_hermitian_operator_has_conjugate_symmetric_coefficient():
    coefficient = ncft_forward(_random_operator(6, hermitian=True), 2.5)
    k = np.array([0.2, 0.7, 1.9])
    tau = np.array([0.0, 1.0, 2.5])
    plus = coefficient.evaluate(k, tau)
    minus = coefficient.evaluate(-k, tau)
    np.testing.assert_allclose(plus, np.conj(minus), atol=1e-12)


def test_fock_backed_harmonics_reassemble_the_coefficient():
    coefficient = ncft_forward(_random_operator(6), 2.5)
    k = np.array([0.3, 1.1])
    tau = 0.8
    hats = coefficient.harmonics(k, NumericsSettings())
    total = sum(values * np.exp(1j * h * tau) for h, values in hats.items())
    np.testing.assert_allclose(total, coefficient.evaluate(k, tau), atol=1e-12)


def test_inverse_transform_round_trip():
    params = SystemParams(lam=2.5, n_fock=14)
    op = _random_operator(9, seed=4)
    recovered = inverse_ncft(ncft_forward(op, params), params)
    assert np.max(np.abs(recovered[:9, :9] - op)) <= 1e-6
    assert np.max(np.abs(recovered[9:, :])) <= 1e-6


def test_matrix_unit_round_trip():
    params = SystemParams(lam=2.5, n_fock=12)
    for n, m in itertools.product(range(9), repeat=2):
        unit = np.zeros((9, 9), dtype=complex)
        unit[n, m] = 1.0
        recovered = inverse_ncft(ncft_forward(unit, params), params)
        expected = np.zeros((12, 12))
        expected[n, m] = 1.0
        assert np.max(np.abs(recovered - expected)) <= 1e-6


def test_spectral_lines_need_conjugate_partners():
    with pytest.raises(DomainError):
        SpectralLineSet(((1.0, {2: 0.5}),))
    lines = SpectralLineSet(((1.0, {2: 0.5}), (-1.0, {-2: 0.5})))
    with pytest.raises(DomainError):
        lines.scaled(1j)
    assert lines.scaled(2.0).lines[0][1][2] == pytest.approx(1.0)


def test_drive_potential_of_monochromatic_lines(mono_params):
    spec = synth_drive(ncft_monochromatic(mono_params), mono_params)
    assert spec.lines
    x = np.linspace(-3, 3, 11)
    for t in (0.0, 0.4):
        expected = mono_params.beta * np.cos(x + mono_params.n_sym * mono_params.omega * t)
        np.testing.assert_allclose(drive_potential(spec, x, t), expected, atol=1e-14)
    payload = json.loads(spec.to_json())
    assert payload == [{"k": 1.0, "harmonics": {"2": [0.5, 0.0]}}]


def test_drive_json_holds_line_weights():
    lines = SpectralLineSet(((2.0, {1: 0.4}), (-2.0, {-1: 0.4})))
    spec = synth_drive(lines, SystemParams(lam=2.5, n_fock=10))
    assert json.loads(spec.to_json()) == [{"k": 2.0, "harmonics": {"1": [0.4, 0.0]}}]
    np.testing.assert_allclose(spec.amplitude(0.5), [0.8])
    x = np.linspace(-3, 3, 11)
    expected = 0.8 * np.cos(2 * x + 0.5)
    np.testing.assert_allclose(drive_potential(spec, x, 0.5), expected, atol=1e-14)


def test_grid_drive_spec(tmp_path):
    params = SystemParams(lam=2.5, n_fock=12)
    coefficient = ncft_forward(_random_operator(6, hermitian=True), params)
    spec = synth_drive(coefficient, params, NumericsSettings(k_nodes=40))
    assert np.all(spec.k > 0)
    with pytest.raises(DomainError):
        spec.to_json()
    path = tmp_path / "drive.csv"
    spec.to_csv(path, [0.0, 1.0])
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "k,t,amplitude,phase"
    assert len(rows) == 1 + 2 * spec.k.size


def test_frame_series_harmonics_reassemble(mono_params):
    params = mono_params.replace(n_fock=20)
    series = build_frame_series(ncft_monochromatic(params), params.lam, params.n_fock)
    tau = 0.9
    total = sum(series.harmonic(l) * np.exp(1j * l * tau) for l in range(-40, 41))
    np.testing.assert_allclose(total, series.at(tau), atol=1e-12)
    h = series.at(tau)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-12)
    np.testing.assert_allclose(series.shifted(0.5).at(tau), series.at(tau + 0.5), atol=1e-12)
    np.testing.assert_allclose(series.scaled(2.0).at(tau), 2 * h, atol=1e-12)
    np.testing.assert_allclose((series + series).at(tau), 2 * h, atol=1e-12)


def test_rotating_frame_hamiltonian_of_lines(mono_params):
    params = mono_params.replace(n_fock=20)
    t = 0.3
    h = rotating_frame_hamiltonian(ncft_monochromatic(params), t, params)
    series = build_frame_series(ncft_monochromatic(params), params.lam, params.n_fock)
    np.testing.assert_allclose(h, series.at(params.omega * t), atol=1e-14)


def test_cat_lattice_q_function_identity():
    q, alpha0, gamma, beta, lam = 4, 1.198, 0.25, 1.0, 0.25
    target = cat_lattice_target(q, alpha0, gamma, beta, 120)
    x = np.linspace(-1.5, 1.5, 7)
    x, p = np.meshgrid(x, x)
    numeric = qfunction(target, x, p, lam)
    exact = cat_lattice_q_exact(q, alpha0, gamma, beta, x, p, lam)
    np.testing.assert_allclose(numeric.real, exact, atol=1e-9)


def test_cat_lattice_closed_form_matches_fock_target():
    params = SystemParams(lam=0.25, n_sym=4, beta=1.0, n_fock=60)
    coefficient = ncft_cat_lattice(4, 1.198, 0.25, params)
    assert isinstance(coefficient, ClosedForm)
    operator = inverse_ncft(coefficient, params)
    target = cat_lattice_target(4, 1.198, 0.25, 1.0, 60)
    scale = np.max(np.abs(target[:50, :50]))
    assert np.max(np.abs(operator[:50, :50] - target[:50, :50])) <= 1e-6 * scale


def test_cat_lattice_harmonics_are_multiples_of_q():
    coefficient = ncft_cat_lattice(4, 1.198, 0.25, SystemParams(lam=0.25, beta=1.0))
    hats = coefficient.harmonics(np.array([0.5, 2.0, 6.0]), NumericsSettings())
    assert set(hats) <= {-4, 0, 4}
    assert {-4, 0, 4} <= set(hats)


def test_cat_lattice_k_c():
    assert cat_lattice_k_c(0.25, 0.25) == pytest.approx(math.sqrt(1 - math.exp(-0.5)))


def test_drive_chart_shape_and_scale():
    coefficient = ncft_cat_lattice(4, 1.198, 0.25, SystemParams(lam=0.25, beta=2.0))
    k = np.linspace(0.0, 3.0, 5)
    tau = np.linspace(0.0, 2 * math.pi, 8, endpoint=False)
    chart = drive_chart(coefficient, k, tau, scale=2.0)
    assert chart.shape == (5, 8)
    np.testing.assert_allclose(chart[0], 0.0)
    np.testing.assert_allclose(chart[2, 3], k[2] * coefficient.evaluate(k[2], tau[3]) / 2.0)


def test_coefficient_serialization():
    lines = SpectralLineSet(((1.0, {2: 0.5}), (-1.0, {-2: 0.5})))
    rebuilt = coefficient_from_dict(json.loads(json.dumps(lines.to_dict())))
    assert rebuilt.evaluate(1.0, 0.3) == pytest.approx(lines.evaluate(1.0, 0.3))

    fock = ncft_forward(_random_operator(4), 2.5)
    rebuilt = coefficient_from_dict(json.loads(json.dumps(fock.to_dict())))
    np.testing.assert_allclose(rebuilt.coeffs, fock.coeffs)

    cat = ncft_cat_lattice(4, 1.198, 0.25, SystemParams(lam=0.25, beta=1.0)).scaled(-0.5)
    rebuilt = coefficient_from_dict(json.loads(json.dumps(cat.to_dict())))
    assert rebuilt.evaluate(1.5, 0.2) == pytest.approx(cat.evaluate(1.5, 0.2))

    with pytest.raises(ConfigError):
        coefficient_from_dict({"kind": "closed_form", "name": "nope", "parameters": {}})
    with pytest.raises(ConfigError):
        coefficient_from_dict({"kind": "wavelet"})


def test_quadrature_check():
    params = SystemParams(lam=2.5, n_fock=14)
    coefficient = ncft_forward(_random_operator(6, hermitian=True), params)
    assert quadrature_check(coefficient, params) <= 1e-8
    wiggly = ClosedForm("wiggly", lambda k, tau: np.cos(25 * k) * np.exp(-(k**2) / 50), 30.0)
    coarse = NumericsSettings(k_nodes=40, n_fock=4, trust_margin=0)
    with pytest.raises(ConvergenceError):
        quadrature_check(wiggly, params.replace(n_fock=4), coarse)


def test_rotating_frame_hamiltonian_reports_unconverged_quadrature():
    params = SystemParams(lam=2.5, n_fock=14)
    op = _random_operator(6, hermitian=True)
    h = rotating_frame_hamiltonian(ncft_forward(op, params), 0.7, params)
    expected = build_frame_series(
        ncft_forward(op, params), params.lam, params.n_fock
    ).at(params.omega * 0.7)
    np.testing.assert_allclose(h, expected, atol=1e-12)
    wiggly = ClosedForm("wiggly", lambda k, tau: np.cos(25 * k) * np.exp(-(k**2) / 50), 30.0)
    coarse = NumericsSettings(k_nodes=40, n_fock=4, trust_margin=0)
    with pytest.raises(ConvergenceError):
        rotating_frame_hamiltonian(wiggly, 0.7, params.replace(n_fock=4), coarse)
