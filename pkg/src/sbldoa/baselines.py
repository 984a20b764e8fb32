"""Classical DOA estimators sharing the steering dictionary and sample covariance:
conventional (Bartlett) beamforming, MUSIC, and exhaustive subset maximum likelihood.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .sbl_core import top_peak_indices

__all__ = [
    "AngularSpectrum",
    "DoaEstimate",
    "MUSIC_CAP",
    "cbf_spectrum",
    "music_spectrum",
    "projection_fit",
    "exhaustive_ml",
    "pick_peaks",
    "spectrum_to_csv",
]

# Pseudospectrum values are capped here when the noise-subspace projection of a
# steering vector underflows (exact orthogonality at a true DOA).
MUSIC_CAP = 1e12

SPECTRUM_DB_FLOOR = -200.0

# Relative ridge added to subset Gram matrices in the concentrated-likelihood
# objective.  Keeps the evaluation finite for (numerically) rank-deficient
# subsets, e.g. both grid endpoints at half-wavelength spacing, where the
# objective degenerates to the fit of the subset's span.
GRAM_RIDGE = 1e-9


@dataclass(frozen=True)
class AngularSpectrum:
    """Nonnegative power values over the angular grid."""

    values: np.ndarray
    angles_deg: np.ndarray
    method: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        angles = np.asarray(self.angles_deg, dtype=np.float64)
        if values.shape != angles.shape or values.ndim != 1:
            raise ValueError("values and angles_deg must be 1-D arrays of equal length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("spectrum values must be finite and >= 0")
        values.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "angles_deg", angles)


@dataclass(frozen=True)
class DoaEstimate:
    """K estimated DOAs (sorted ascending) with method-specific source powers."""

    angles_deg: tuple
    source_powers: tuple
    method: str

    def __post_init__(self):
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))
        object.__setattr__(
            self, "source_powers", tuple(float(p) for p in self.source_powers)
        )
        if len(self.angles_deg) != len(self.source_powers):
            raise ValueError("angles_deg and source_powers must have equal length")
        if any(b < a for a, b in zip(self.angles_deg, self.angles_deg[1:])):
            raise ValueError("angles_deg must be sorted ascending")


def cbf_spectrum(s_y: np.ndarray, a: np.ndarray, angles_deg) -> AngularSpectrum:
    """Bartlett beamformer power a_m^H S_y a_m / N^2.

    The 1/N^2 normalization makes the peak of a single unit-power incoherent
    source read 1, so the values are directly interpretable as source powers.
    """
    a = np.asarray(a)
    n = a.shape[0]
    values = np.einsum("nm,nm->m", np.conj(a), s_y @ a).real / n**2
    return AngularSpectrum(np.maximum(values, 0.0), np.asarray(angles_deg), "cbf")


def music_spectrum(s_y: np.ndarray, a: np.ndarray, angles_deg, k: int) -> AngularSpectrum:
    """MUSIC pseudospectrum N / ||E_n^H a_m||^2 with an N-K dimensional noise subspace.

    Values where the denominator underflows are capped at MUSIC_CAP.
    """
    a = np.asarray(a)
    n = a.shape[0]
    if k >= n:
        raise ValueError(f"need K < N for MUSIC, got K={k}, N={n}")
    _, vecs = np.linalg.eigh(s_y)
    noise_basis = vecs[:, : n - k]
    denom = np.sum(np.abs(noise_basis.conj().T @ a) ** 2, axis=0)
    values = n / np.maximum(denom, n / MUSIC_CAP)
    return AngularSpectrum(values, np.asarray(angles_deg), "music")


def projection_fit(s_y: np.ndarray, a: np.ndarray, subset) -> float:
    """Concentrated likelihood fit tr(P S_y) with P the projector onto the
    span of the selected dictionary columns."""
    a_sub = np.asarray(a)[:, list(subset)]
    n = a_sub.shape[0]
    gram = a_sub.conj().T @ a_sub + (GRAM_RIDGE * n) * np.eye(a_sub.shape[1])
    cross = a_sub.conj().T @ s_y @ a_sub
    return float(np.trace(np.linalg.solve(gram, cross)).real)


@lru_cache(maxsize=4)
def _subset_table(m: int, k: int) -> np.ndarray:
    """All K-subsets of range(m) in lexicographic order, one row per subset."""
    count = math.comb(m, k)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(m), k)),
        dtype=np.int64,
        count=count * k,
    )
    table = flat.reshape(count, k)
    table.setflags(write=False)
    return table


def exhaustive_ml(
    s_y: np.ndarray,
    a: np.ndarray,
    angles_deg,
    k: int,
    max_subsets: int = 2_000_000,
    chunk: int = 131_072,
) -> DoaEstimate:
    """Maximize tr(P_S S_y) over all K-subsets S of dictionary columns.

    Ties go to the lexicographically smallest subset.  The subset count
    C(M, K) must not exceed ``max_subsets``.
    """
    a = np.asarray(a)
    angles = np.asarray(angles_deg, dtype=np.float64)
    n, m = a.shape
    if k >= n:
        raise ValueError(f"need K < N for subset maximum likelihood, got K={k}, N={n}")
    count = math.comb(m, k)
    if count > max_subsets:
        raise ValueError(
            f"C({m},{k}) = {count} subsets exceeds the budget of {max_subsets}; "
            "use a coarser grid or raise max_subsets"
        )

    gram = a.conj().T @ a
    cross = a.conj().T @ s_y @ a
    ridge = (GRAM_RIDGE * n) * np.eye(k)
    table = _subset_table(m, k)
    best_value = -math.inf
    best_row = 0
    for start in range(0, count, chunk):
        idx = table[start : start + chunk]
        gram_s = gram[idx[:, :, None], idx[:, None, :]] + ridge
        cross_s = cross[idx[:, :, None], idx[:, None, :]]
        objective = np.einsum("cii->c", np.linalg.solve(gram_s, cross_s)).real
        arg = int(np.argmax(objective))
        if objective[arg] > best_value:
            best_value = float(objective[arg])
            best_row = start + arg

    subset = table[best_row]
    a_sub = a[:, subset]
    pinv = np.linalg.pinv(a_sub)
    powers = np.maximum(np.diag(pinv @ s_y @ pinv.conj().T).real, 0.0)
    return DoaEstimate(tuple(angles[subset]), tuple(powers), "exhaustive")


def pick_peaks(spectrum: AngularSpectrum, k: int) -> DoaEstimate:
    """K largest peaks of a spectrum as sorted DOAs (same peak rule as the
    SBL active-set selection)."""
    values = spectrum.values
    if values.max() == values.min():
        raise ValueError("spectrum is flat; peaks are undefined")
    idx = top_peak_indices(values, k)
    return DoaEstimate(
        tuple(spectrum.angles_deg[idx]), tuple(values[idx]), spectrum.method
    )


def spectrum_to_csv(spectrum: AngularSpectrum, path) -> None:
    """Write (angle_deg, power_db) rows; power floored at -200 dB."""
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(spectrum.values)
    power_db = np.maximum(power_db, SPECTRUM_DB_FLOOR)
    lines = ["angle_deg,power_db"]
    lines += [
        f"{float(ang)!r},{float(db)!r}"
        for ang, db in zip(spectrum.angles_deg, power_db)
    ]
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
