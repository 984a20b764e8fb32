import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from sbldoa import AngularGrid, ArrayGeometry, SourceScenario


@pytest.fixture(scope="session", autouse=True)
def single_threaded_blas():
    """All matrices here are small; BLAS threading only adds sync overhead."""
    with threadpool_limits(limits=1):
        yield


@pytest.fixture(scope="session")
def geometry():
    return ArrayGeometry(n_sensors=20, spacing_wavelengths=0.5)


@pytest.fixture(scope="session")
def fine_grid():
    return AngularGrid.from_spec("-90:0.5:90")


@pytest.fixture(scope="session")
def scenario():
    return SourceScenario(
        doas_deg=(-3.0, 2.0, 75.0),
        magnitudes_db=(12.0, 22.0, 20.0),
        amplitude_model="random_phase_per_snapshot",
    )


def random_instance(rng, n_max=8, m_max=30, l_max=16):
    """Random steering-like dictionary with positive hyperparameters."""
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(n, m_max + 1))
    l = int(rng.integers(1, l_max + 1))
    a = np.exp(2j * np.pi * rng.random((n, m)))
    gamma = rng.uniform(0.1, 2.0, m)
    sigma2 = float(rng.uniform(0.5, 2.0))
    y = (rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l))) / np.sqrt(2)
    return a, gamma, sigma2, y


def snapshot_log_evidence(gamma, sigma2, a, y):
    """Independent L-snapshot log-evidence -tr(Y^H Sigma^-1 Y) - L logdet(Sigma),
    computed with an explicit inverse and slogdet (not the Cholesky path)."""
    cov = sigma2 * np.eye(a.shape[0], dtype=np.complex128) + (a * gamma) @ a.conj().T
    inv = np.linalg.inv(cov)
    quad = np.trace(y.conj().T @ inv @ y).real
    _, logdet = np.linalg.slogdet(cov)
    return float(-quad - y.shape[1] * logdet)
