"""Shared fixtures for the ffg test suite."""

import pytest

from ffg.config import NumericsSettings
from ffg.fockspace import SystemParams

CAT_Q = 4
CAT_ALPHA0 = 1.198
CAT_GAMMA = 0.25
CAT_LAM = 0.25


@pytest.fixture
def mono_params() -> SystemParams:
    """n=2, beta=0.5, lam=2.5 on 60 Fock levels."""
    return SystemParams(lam=2.5, omega=1.0, n_sym=2, beta=0.5, n_fock=60)


@pytest.fixture
def small_params() -> SystemParams:
    return SystemParams(lam=2.5, omega=1.0, n_sym=2, beta=0.3, n_fock=30)


@pytest.fixture
def numerics() -> NumericsSettings:
    return NumericsSettings()


@pytest.fixture
def fast_numerics() -> NumericsSettings:
    """Coarser settings for tests that only check structure."""
    return NumericsSettings(k_nodes=160, tau_points=64, l_max=6, m_max=4, n_fock=30)


@pytest.fixture
def cat_params() -> SystemParams:
    return SystemParams(lam=CAT_LAM, omega=1.0, n_sym=CAT_Q, beta=0.1, n_fock=120)
