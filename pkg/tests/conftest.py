import numpy as np
import pytest

from adslab import boundary, geometry, spectrum


@pytest.fixture(scope="session")
def model_half():
    """Global AdS4 at nu = 1/2 (m^2 = -2), the workhorse background."""
    return geometry.build_model(4, -2.0)


@pytest.fixture(scope="session")
def chart():
    return geometry.default_chart()


@pytest.fixture(scope="session")
def data_dirichlet(model_half, chart):
    return spectrum.solve_spectral_data(model_half, boundary.dirichlet(),
                                        chart, l_max=3, k_max=12)


@pytest.fixture(scope="session")
def data_robin0(model_half, chart):
    return spectrum.solve_spectral_data(model_half, boundary.robin(0.0),
                                        chart, l_max=3, k_max=12)


@pytest.fixture(scope="session")
def data_robin1(model_half, chart):
    return spectrum.solve_spectral_data(model_half, boundary.robin(1.0),
                                        chart, l_max=2, k_max=10)


@pytest.fixture(scope="session")
def data_l0_deep(model_half, chart):
    """Dirichlet l=0 tower deep enough for sharp wavefronts."""
    return spectrum.solve_spectral_data(model_half, boundary.dirichlet(),
                                        chart, l_max=0, k_max=80)


@pytest.fixture(scope="session")
def halfstrip_model():
    return geometry.build_model(2, nu=0.5,
                                kind=geometry.ModelKind.HALF_STRIP_1P1)


@pytest.fixture(scope="session")
def halfstrip_chart():
    return geometry.default_chart(n_rho=3001, include_wall=True)


@pytest.fixture(scope="session")
def halfstrip_data(halfstrip_model, halfstrip_chart):
    return spectrum.solve_spectral_data(
        halfstrip_model, boundary.robin(1.0), halfstrip_chart,
        l_max=0, k_max=60)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
