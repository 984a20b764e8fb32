"""Uniform linear array geometry, steering dictionary, and snapshot simulation.

Angle convention: broadside is 0 degrees, endfire is +/-90 degrees.  A plane
wave from angle theta produces the phase progression
exp(-1j * (n-1) * 2*pi*(d/lambda) * sin(theta)) across sensors n = 1..N.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArrayGeometry",
    "AngularGrid",
    "SourceScenario",
    "SimulatedSnapshots",
    "AMPLITUDE_MODELS",
    "steering_vector",
    "build_transfer_matrix",
    "simulate_snapshots",
    "sample_covariance",
]

AMPLITUDE_MODELS = ("constant_phase", "random_phase_per_snapshot")


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: sensor count and element spacing in wavelengths."""

    n_sensors: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 2:
            raise ValueError(f"n_sensors must be an integer >= 2, got {self.n_sensors}")
        if not self.spacing_wavelengths > 0:
            raise ValueError(
                f"spacing_wavelengths must be positive, got {self.spacing_wavelengths}"
            )


@dataclass(frozen=True)
class AngularGrid:
    """Strictly increasing grid of candidate DOAs in [-90, 90] degrees."""

    angles_deg: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=np.float64)
        if angles.ndim != 1 or angles.size < 2:
            raise ValueError("grid needs at least 2 angles in a 1-D array")
        if angles.min() < -90.0 or angles.max() > 90.0:
            raise ValueError("grid angles must lie within [-90, 90] degrees")
        if not np.all(np.diff(angles) > 0):
            raise ValueError("grid angles must be strictly increasing")
        angles.setflags(write=False)
        object.__setattr__(self, "angles_deg", angles)

    @classmethod
    def regular(cls, start_deg: float, stop_deg: float, step_deg: float) -> "AngularGrid":
        """Uniform grid from start to stop inclusive; step must divide the span."""
        if step_deg <= 0:
            raise ValueError("step_deg must be positive")
        n_steps = (stop_deg - start_deg) / step_deg
        m = int(round(n_steps)) + 1
        if m < 2 or abs(n_steps - round(n_steps)) > 1e-9:
            raise ValueError(
                f"step {step_deg} does not divide the span [{start_deg}, {stop_deg}]"
            )
        return cls(np.linspace(start_deg, stop_deg, m))

    @classmethod
    def from_spec(cls, spec: str) -> "AngularGrid":
        """Parse a 'start:step:stop' grid specification, e.g. '-90:0.5:90'."""
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec must be 'start:step:stop', got {spec!r}")
        start, step, stop = (float(p) for p in parts)
        return cls.regular(start, stop, step)

    def __len__(self) -> int:
        return self.angles_deg.size

    @property
    def m(self) -> int:
        return self.angles_deg.size

    def nearest_index(self, angle_deg: float) -> int:
        return int(np.argmin(np.abs(self.angles_deg - angle_deg)))

    def index_of(self, angle_deg: float, tol: float = 1e-9) -> int:
        """Index of an on-grid angle; raises if no grid point is within tol."""
        idx = self.nearest_index(angle_deg)
        if abs(self.angles_deg[idx] - angle_deg) > tol:
            raise ValueError(f"angle {angle_deg} deg is not on the grid")
        return idx


@dataclass(frozen=True)
class SourceScenario:
    """True sources: DOAs, magnitudes in dB (20*log10 of amplitude modulus),
    and the per-snapshot amplitude phase model."""

    doas_deg: tuple
    magnitudes_db: tuple
    amplitude_model: str = "random_phase_per_snapshot"

    def __post_init__(self):
        object.__setattr__(self, "doas_deg", tuple(float(d) for d in self.doas_deg))
        object.__setattr__(
            self, "magnitudes_db", tuple(float(m) for m in self.magnitudes_db)
        )
        if len(self.doas_deg) < 1:
            raise ValueError("scenario needs at least one source")
        if len(self.doas_deg) != len(self.magnitudes_db):
            raise ValueError("doas_deg and magnitudes_db must have equal length")
        if self.amplitude_model not in AMPLITUDE_MODELS:
            raise ValueError(
                f"amplitude_model must be one of {AMPLITUDE_MODELS}, "
                f"got {self.amplitude_model!r}"
            )

    @property
    def k(self) -> int:
        return len(self.doas_deg)


def steering_vector(geometry: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Steering vector a(theta): element n is exp(-1j*(n-1)*2*pi*d*sin(theta)).

    The first element is always 1+0j and every element has unit modulus.
    """
    if not -90.0 <= theta_deg <= 90.0:
        raise ValueError(f"theta_deg must lie in [-90, 90], got {theta_deg}")
    n = np.arange(geometry.n_sensors)
    phase = -2.0 * np.pi * geometry.spacing_wavelengths * math.sin(math.radians(theta_deg))
    return np.exp(1j * phase * n)


def build_transfer_matrix(geometry: ArrayGeometry, grid: AngularGrid) -> np.ndarray:
    """N x M dictionary whose column m is the steering vector for grid angle m."""
    n = np.arange(geometry.n_sensors)[:, None]
    sines = np.sin(np.radians(grid.angles_deg))[None, :]
    return np.exp(-2j * np.pi * geometry.spacing_wavelengths * n * sines)


@dataclass(frozen=True)
class SimulatedSnapshots:
    """One synthetic multi-snapshot realization.

    y            : N x L observed data
    x_true       : M x L source amplitudes (nonzero rows at the source cells)
    sigma2_true  : noise variance used, calibrated from the realized signal power
    doa_indices  : grid indices of the sources
    snap_offsets_deg : per-source offset introduced by grid snapping (zeros when exact)
    """

    y: np.ndarray
    x_true: np.ndarray
    sigma2_true: float
    doa_indices: tuple
    snap_offsets_deg: tuple


def simulate_snapshots(
    scenario: SourceScenario,
    geometry: ArrayGeometry,
    grid: AngularGrid,
    snr_db: float,
    n_snapshots: int,
    seed,
    snap_to_grid: bool = False,
) -> SimulatedSnapshots:
    """Generate Y = A X + noise with the array SNR calibrated per realization.

    Parameters
    ----------
    scenario : SourceScenario
        Source DOAs, magnitudes and phase model.
    snr_db : float
        Single-snapshot array SNR in dB.  The noise variance is
        10**(-snr_db/10) * ||A X||_F^2 / (L * N), computed from the realized
        signal of this trial, so the realized SNR is exact.  Use
        ``snr_db = math.inf`` to disable noise entirely.
    n_snapshots : int
        Number of snapshots L (columns of Y).
    seed : int, numpy SeedSequence, or Generator
        Source of randomness; results are reproducible given the seed.
    snap_to_grid : bool
        When False (default), every scenario DOA must lie exactly on the grid.
        When True, DOAs are snapped to the nearest cell and the offsets are
        recorded in the returned ``snap_offsets_deg``.
    """
    if n_snapshots < 1:
        raise ValueError("n_snapshots must be >= 1")
    rng = np.random.default_rng(seed)
    n = geometry.n_sensors
    m = grid.m
    l = int(n_snapshots)

    indices = []
    offsets = []
    for doa in scenario.doas_deg:
        if snap_to_grid:
            idx = grid.nearest_index(doa)
            offsets.append(float(grid.angles_deg[idx] - doa))
        else:
            idx = grid.index_of(doa)
            offsets.append(0.0)
        indices.append(idx)
    if len(set(indices)) != len(indices):
        raise ValueError("scenario DOAs map to duplicate grid cells")

    a = build_transfer_matrix(geometry, grid)
    x = np.zeros((m, l), dtype=np.complex128)
    for k, idx in enumerate(indices):
        modulus = 10.0 ** (scenario.magnitudes_db[k] / 20.0)
        if scenario.amplitude_model == "constant_phase":
            x[idx, :] = modulus
        else:
            x[idx, :] = modulus * np.exp(2j * np.pi * rng.random(l))

    signal = a @ x
    if math.isinf(snr_db) and snr_db > 0:
        sigma2_true = 0.0
        y = signal
    else:
        signal_power = float(np.linalg.norm(signal, "fro") ** 2)
        sigma2_true = 10.0 ** (-snr_db / 10.0) * signal_power / (l * n)
        scale = math.sqrt(sigma2_true / 2.0)
        noise = scale * (rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l)))
        y = signal + noise

    return SimulatedSnapshots(
        y=y,
        x_true=x,
        sigma2_true=sigma2_true,
        doa_indices=tuple(indices),
        snap_offsets_deg=tuple(offsets),
    )


def sample_covariance(y: np.ndarray) -> np.ndarray:
    """Sample covariance Y Y^H / L, symmetrized to be exactly Hermitian."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] < 1:
        raise ValueError("y must be an N x L matrix with L >= 1")
    s = y @ y.conj().T / y.shape[1]
    return 0.5 * (s + s.conj().T)
