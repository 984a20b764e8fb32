"""Sparse Bayesian learning core for multi-snapshot DOA estimation.

The model is Y = A X + noise with rows of X drawn from zero-mean complex
Gaussians of per-angle variance gamma_m and circular complex Gaussian noise
of variance sigma2.  The data covariance is

    Sigma_y = sigma2 * I + A diag(gamma) A^H

and the hyperparameters (gamma, sigma2) are fitted by evidence maximization.
Three gamma update rules are provided ("sbl", "sbl1", "msbl") together with
two noise-variance estimators ("projection", "em") and an iterative driver
``run_sbl``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .array_model import sample_covariance

__all__ = [
    "NumericalError",
    "SblConfig",
    "SblResult",
    "UPDATE_RULES",
    "NOISE_RULES",
    "model_covariance",
    "inverse_model_covariance",
    "posterior_rows",
    "posterior_covariance",
    "log_evidence",
    "evidence_gradient_gamma",
    "gamma_update_sbl",
    "gamma_update_sbl1",
    "gamma_update_msbl",
    "sample_cov_denominators",
    "top_peak_indices",
    "select_active_set",
    "noise_update_projection",
    "noise_update_em",
    "convergence_epsilon",
    "run_sbl",
]

UPDATE_RULES = ("sbl", "sbl1", "msbl")
NOISE_RULES = ("projection", "em", "fixed")

# Diagonal loading factor applied to a singular sample covariance:
# S_y + LOADING_DELTA * (tr(S_y)/N) * I.
LOADING_DELTA = 1e-3

# Noise-variance estimates are floored at NOISE_FLOOR_REL * tr(S_y)/N so the
# model covariance stays positive definite even on noiseless data.
NOISE_FLOOR_REL = 1e-10


class NumericalError(RuntimeError):
    """Linear-algebra failure (factorization, rank, or conditioning)."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (at iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class SblConfig:
    """Settings for ``run_sbl``.

    update_rule : "sbl" (sample-covariance denominator), "sbl1" (model-
        covariance denominator), or "msbl" (EM rule).
    noise_rule : "projection" (subspace-projection estimate), "em"
        (iterative EM estimate), or "fixed" (keep sigma2_init).
    strict_sample_cov : when True, a singular sample covariance raises
        instead of falling back to diagonal loading ("sbl" rule only).
    """

    update_rule: str = "sbl"
    noise_rule: str = "projection"
    k_sources: int = 3
    sigma2_init: float = 0.1
    gamma_init: float = 1.0
    epsilon_min: float = 1e-3
    j_max: int = 500
    gamma_floor: float = 0.0
    strict_sample_cov: bool = False

    def __post_init__(self):
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
        if self.noise_rule not in NOISE_RULES:
            raise ValueError(f"noise_rule must be one of {NOISE_RULES}")
        if self.k_sources < 1:
            raise ValueError("k_sources must be >= 1")
        if not self.sigma2_init > 0:
            raise ValueError("sigma2_init must be positive")
        if not self.gamma_init > 0:
            raise ValueError("gamma_init must be positive")
        if not self.epsilon_min > 0:
            raise ValueError("epsilon_min must be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be >= 1")
        if self.gamma_floor < 0:
            raise ValueError("gamma_floor must be >= 0")


@dataclass
class SblResult:
    """Output of ``run_sbl``.

    active_set holds the 0-based grid indices of the K selected peaks,
    sorted ascending; active_angles_deg is filled when the grid angles were
    supplied.  The traces have one entry per executed iteration.
    """

    active_set: np.ndarray
    gamma: np.ndarray
    sigma2: float
    iterations: int
    converged: bool
    epsilon_trace: np.ndarray
    evidence_trace: np.ndarray
    sigma2_trace: np.ndarray
    posterior_rows: np.ndarray
    active_angles_deg: np.ndarray | None = None
    sample_cov_loaded: bool = False
    gamma_snapshots: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "active_set": [int(i) for i in self.active_set],
            "gamma": [float(g) for g in self.gamma],
            "sigma2": float(self.sigma2),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "epsilon_trace": [float(e) for e in self.epsilon_trace],
            "evidence_trace": [float(e) for e in self.evidence_trace],
        }
        if self.active_angles_deg is not None:
            out["active_angles_deg"] = [float(a) for a in self.active_angles_deg]
        return out


def _as_gamma(gamma, m: int | None = None) -> np.ndarray:
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 1:
        raise ValueError("gamma must be a 1-D vector")
    if m is not None and g.size != m:
        raise ValueError(f"gamma has length {g.size}, expected {m}")
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise ValueError("gamma entries must be finite and >= 0")
    return g


def _check_sigma2(sigma2: float) -> float:
    sigma2 = float(sigma2)
    if not sigma2 > 0 or not math.isfinite(sigma2):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")
    return sigma2


def _hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def _cholesky(matrix: np.ndarray, what: str, iteration: int | None = None):
    try:
        return cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization of {what} failed: {exc}", iteration)


def model_covariance(gamma, sigma2, a: np.ndarray) -> np.ndarray:
    """sigma2 * I + sum_m gamma_m a_m a_m^H, accumulated over gamma_m > 0."""
    sigma2 = _check_sigma2(sigma2)
    a = np.asarray(a)
    gamma = _as_gamma(gamma, a.shape[1])
    n = a.shape[0]
    cov = sigma2 * np.eye(n, dtype=np.complex128)
    active = gamma > 0
    if np.any(active):
        a_act = a[:, active]
        cov = cov + (a_act * gamma[active]) @ a_act.conj().T
    return _hermitize(cov)


def inverse_model_covariance(gamma, sigma2, a: np.ndarray) -> np.ndarray:
    """Inverse of the model covariance via a Hermitian Cholesky solve."""
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    inv = cho_solve(factor, np.eye(cov.shape[0], dtype=np.complex128))
    return _hermitize(inv)


def posterior_rows(gamma, sigma2, a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Posterior mean rows mu_m = gamma_m a_m^H Sigma_y^{-1} Y (M x L).

    Rows with gamma_m = 0 are exactly zero.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    gamma = _as_gamma(gamma, a.shape[1])
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    solved = cho_solve(factor, y)
    return gamma[:, None] * (a.conj().T @ solved)


def posterior_covariance(gamma, sigma2, a: np.ndarray) -> np.ndarray:
    """Posterior covariance Gamma - Gamma A^H Sigma_y^{-1} A Gamma (M x M).

    The subtraction form stays valid for gamma_m = 0 entries.
    """
    a = np.asarray(a)
    gamma = _as_gamma(gamma, a.shape[1])
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    w = cho_solve(factor, a)
    reduction = (gamma[:, None] * (a.conj().T @ w)) * gamma[None, :]
    return _hermitize(np.diag(gamma).astype(np.complex128) - reduction)


def log_evidence(gamma, sigma2, a: np.ndarray, s_y: np.ndarray) -> float:
    """Per-snapshot marginal log-likelihood -tr(Sigma_y^{-1} S_y) - logdet(Sigma_y)."""
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
    trace = float(np.trace(cho_solve(factor, s_y)).real)
    return -trace - logdet


def evidence_gradient_gamma(gamma, sigma2, a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-angle evidence score (1/L)||a_m^H Sigma_y^{-1} Y||^2 - a_m^H Sigma_y^{-1} a_m.

    For gamma_m > 0 this equals (1/(gamma_m^2 L)) ||mu_m||^2 minus the
    quadratic term; the same expression is the algebraic limit at gamma_m = 0,
    so the score is reported for every entry.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    gamma = _as_gamma(gamma, a.shape[1])
    l = y.shape[1]
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    rows = a.conj().T @ cho_solve(factor, y)
    w = cho_solve(factor, a)
    quad = np.einsum("nm,nm->m", a.conj(), w).real
    return np.sum(np.abs(rows) ** 2, axis=1) / l - quad


def sample_cov_denominators(
    s_y: np.ndarray, a: np.ndarray, allow_loading: bool = True
) -> tuple[np.ndarray, bool]:
    """Quadratic forms a_m^H S_y^{-1} a_m for every dictionary column.

    A numerically singular S_y is diagonally loaded with
    LOADING_DELTA * (tr(S_y)/N) unless ``allow_loading`` is False, in which
    case a NumericalError naming the condition estimate is raised.  Returns
    (denominators, loading_applied).
    """
    s_y = np.asarray(s_y)
    n = s_y.shape[0]
    eigvals = np.linalg.eigvalsh(s_y)
    top = float(eigvals[-1])
    bottom = float(eigvals[0])
    loaded = False
    if bottom <= top * n * np.finfo(np.float64).eps:
        cond = top / bottom if bottom > 0 else math.inf
        if not allow_loading:
            raise NumericalError(
                "sample covariance is numerically singular "
                f"(condition estimate {cond:.3e}); enable diagonal loading or "
                "increase the number of snapshots"
            )
        s_y = s_y + (LOADING_DELTA * np.trace(s_y).real / n) * np.eye(n)
        loaded = True
    factor = _cholesky(s_y, "sample covariance")
    w = cho_solve(factor, a)
    denom = np.einsum("nm,nm->m", np.conj(a), w).real
    return denom, loaded


def gamma_update_sbl1(gamma, sigma2, a, y, gamma_floor: float = 0.0) -> np.ndarray:
    """Update gamma_m = (1/sqrt(L)) ||mu_m|| / sqrt(a_m^H Sigma_y^{-1} a_m)."""
    a = np.asarray(a)
    y = np.asarray(y)
    gamma = _as_gamma(gamma, a.shape[1])
    l = y.shape[1]
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    mu = gamma[:, None] * (a.conj().T @ cho_solve(factor, y))
    w = cho_solve(factor, a)
    quad = np.einsum("nm,nm->m", np.conj(a), w).real
    new = np.linalg.norm(mu, axis=1) / np.sqrt(l * quad)
    return np.maximum(new, gamma_floor)


def gamma_update_sbl(
    gamma,
    sigma2,
    a,
    y,
    s_y: np.ndarray | None = None,
    gamma_floor: float = 0.0,
    allow_loading: bool = True,
) -> np.ndarray:
    """Update gamma_m = (1/sqrt(L)) ||mu_m|| / sqrt(a_m^H S_y^{-1} a_m).

    The denominator uses the (fixed) sample covariance, so it does not change
    across iterations.  Requires an invertible S_y; see
    ``sample_cov_denominators`` for the singular fallback.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    gamma = _as_gamma(gamma, a.shape[1])
    l = y.shape[1]
    if s_y is None:
        s_y = sample_covariance(y)
    denom, _ = sample_cov_denominators(s_y, a, allow_loading=allow_loading)
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    mu = gamma[:, None] * (a.conj().T @ cho_solve(factor, y))
    new = np.linalg.norm(mu, axis=1) / np.sqrt(l * denom)
    return np.maximum(new, gamma_floor)


def gamma_update_msbl(gamma, sigma2, a, y, gamma_floor: float = 0.0) -> np.ndarray:
    """EM update gamma_m = (1/L)||mu_m||^2 + (Sigma_x)_mm.

    The posterior-covariance diagonal is gamma_m - gamma_m^2 a_m^H Sigma_y^{-1} a_m,
    so the full M x M matrix is never formed.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    gamma = _as_gamma(gamma, a.shape[1])
    l = y.shape[1]
    cov = model_covariance(gamma, sigma2, a)
    factor = _cholesky(cov, "model covariance")
    mu = gamma[:, None] * (a.conj().T @ cho_solve(factor, y))
    w = cho_solve(factor, a)
    quad = np.einsum("nm,nm->m", np.conj(a), w).real
    new = np.sum(np.abs(mu) ** 2, axis=1) / l + gamma * (1.0 - gamma * quad)
    return np.maximum(new, gamma_floor)


def _local_max_indices(values: np.ndarray) -> np.ndarray:
    """Indices where the value is >= both neighbors (endpoints use one neighbor)."""
    m = values.size
    ge_left = np.empty(m, dtype=bool)
    ge_right = np.empty(m, dtype=bool)
    ge_left[0] = True
    ge_left[1:] = values[1:] >= values[:-1]
    ge_right[-1] = True
    ge_right[:-1] = values[:-1] >= values[1:]
    return np.flatnonzero(ge_left & ge_right)


def top_peak_indices(values, k: int) -> np.ndarray:
    """Indices of the k largest strictly positive local maxima, sorted ascending.

    Ties break toward the lower index.  When fewer than k positive local
    maxima exist, falls back to the k largest values overall.
    """
    values = np.asarray(values, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if values.size < k:
        raise ValueError(f"need at least {k} entries, got {values.size}")
    peaks = _local_max_indices(values)
    peaks = peaks[values[peaks] > 0]
    candidates = peaks if peaks.size >= k else np.arange(values.size)
    order = np.lexsort((candidates, -values[candidates]))
    return np.sort(candidates[order[:k]])


def select_active_set(gamma, k: int) -> np.ndarray:
    """Grid indices of the k largest peaks of gamma (0-based, sorted ascending)."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.count_nonzero(gamma > 0) < k:
        raise ValueError(
            f"gamma has fewer than {k} positive entries; cannot select an active set"
        )
    return top_peak_indices(gamma, k)


def noise_update_projection(s_y: np.ndarray, a_active: np.ndarray) -> float:
    """Noise variance tr((I - A_M A_M^+) S_y) / (N - K) for the active columns.

    The pseudo-inverse comes from an SVD, so rank deficiency is detected.
    The result is floored at NOISE_FLOOR_REL * tr(S_y)/N to stay positive.
    """
    s_y = np.asarray(s_y)
    a_active = np.asarray(a_active)
    if a_active.ndim == 1:
        a_active = a_active[:, None]
    n, k = a_active.shape
    if k >= n:
        raise ValueError(f"need K < N for the projection estimate, got K={k}, N={n}")
    if np.linalg.matrix_rank(a_active) < k:
        raise NumericalError("active steering matrix is rank deficient")
    pinv = np.linalg.pinv(a_active)
    projector = a_active @ pinv
    trace_total = float(np.trace(s_y).real)
    value = (trace_total - float(np.trace(projector @ s_y).real)) / (n - k)
    return max(value, NOISE_FLOOR_REL * trace_total / n)


def noise_update_em(
    y: np.ndarray,
    a: np.ndarray,
    mu_rows: np.ndarray,
    sigma_x_diag,
    gamma,
    sigma2_old: float,
) -> float:
    """EM noise update ((1/L)||Y - A mu||_F^2 + sigma2_old*(M - sum ratios)) / N.

    The ratio (Sigma_x)_ii / gamma_i is taken over gamma_i > 0; entries with
    gamma_i = 0 contribute ratio 1 (their algebraic limit).
    """
    y = np.asarray(y)
    a = np.asarray(a)
    mu_rows = np.asarray(mu_rows)
    gamma = _as_gamma(gamma)
    sigma_x_diag = np.asarray(sigma_x_diag, dtype=np.float64)
    n, l = y.shape
    m = gamma.size
    ratios = np.ones(m)
    positive = gamma > 0
    ratios[positive] = sigma_x_diag[positive] / gamma[positive]
    residual = float(np.linalg.norm(y - a @ mu_rows, "fro") ** 2) / l
    return (residual + float(sigma2_old) * (m - float(ratios.sum()))) / n


def convergence_epsilon(gamma_new, gamma_old) -> float:
    """Relative l1 change ||gamma_new - gamma_old||_1 / ||gamma_old||_1."""
    gamma_new = np.asarray(gamma_new, dtype=np.float64)
    gamma_old = np.asarray(gamma_old, dtype=np.float64)
    denom = float(np.abs(gamma_old).sum())
    if denom == 0.0:
        raise ValueError("gamma_old is identically zero")
    return float(np.abs(gamma_new - gamma_old).sum()) / denom


def run_sbl(
    config: SblConfig,
    a: np.ndarray,
    y: np.ndarray,
    angles_deg: np.ndarray | None = None,
    gamma_snapshot_iters=(),
) -> SblResult:
    """Iterate the configured gamma update and noise estimate to convergence.

    Per iteration: form Sigma_y from the current (gamma, sigma2), update every
    gamma_m by the configured rule, pick the K largest peaks as the active
    set, re-estimate the noise variance with the configured rule, and stop
    once the relative l1 change of gamma drops to epsilon_min (or j_max is
    reached).

    All per-iteration statistics are routed through the sample covariance
    (||mu_m||^2 = gamma_m^2 L a_m^H Sigma_y^{-1} S_y Sigma_y^{-1} a_m), so the
    cost of one iteration does not grow with the number of snapshots.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    n, m = a.shape
    if y.ndim != 2 or y.shape[0] != n:
        raise ValueError(f"y must be {n} x L to match the dictionary")
    l = y.shape[1]
    k = config.k_sources
    if k >= n:
        raise ValueError(f"k_sources must be < n_sensors, got K={k}, N={n}")
    if k > m:
        raise ValueError(f"k_sources must be <= grid size, got K={k}, M={m}")

    s_y = sample_covariance(y)
    noise_floor = NOISE_FLOOR_REL * float(np.trace(s_y).real) / n
    loaded = False
    if config.update_rule == "sbl":
        sample_denom, loaded = sample_cov_denominators(
            s_y, a, allow_loading=not config.strict_sample_cov
        )

    snapshot_iters = set(int(j) for j in gamma_snapshot_iters)
    gamma = np.full(m, config.gamma_init, dtype=np.float64)
    sigma2 = config.sigma2_init
    eps = math.inf
    eps_trace: list[float] = []
    evidence_trace: list[float] = []
    sigma2_trace: list[float] = []
    snapshots: dict[int, np.ndarray] = {}
    j = 0

    while eps > config.epsilon_min and j < config.j_max:
        j += 1
        gamma_old = gamma
        cov = model_covariance(gamma, sigma2, a)
        factor = _cholesky(cov, "model covariance", iteration=j)
        w = cho_solve(factor, a)
        quad = np.einsum("nm,nm->m", np.conj(a), w).real
        # Quadratic forms are nonnegative in exact arithmetic; clip the
        # rounding noise that appears when sigma2 sits at the noiseless floor.
        row_power = np.maximum(np.einsum("nm,nm->m", np.conj(w), s_y @ w).real, 0.0)

        if config.update_rule == "sbl":
            gamma = gamma * np.sqrt(row_power / sample_denom)
        elif config.update_rule == "sbl1":
            gamma = gamma * np.sqrt(row_power / quad)
        else:
            gamma = gamma * gamma * row_power + gamma * (1.0 - gamma * quad)
        gamma = np.maximum(gamma, config.gamma_floor)

        active = select_active_set(gamma, k)
        if config.noise_rule == "projection":
            sigma2 = noise_update_projection(s_y, a[:, active])
        elif config.noise_rule == "em":
            mu = gamma_old[:, None] * (a.conj().T @ cho_solve(factor, y))
            sigma_x_diag = gamma_old * (1.0 - gamma_old * quad)
            sigma2 = noise_update_em(y, a, mu, sigma_x_diag, gamma_old, sigma2)
            sigma2 = max(sigma2, noise_floor)

        eps = convergence_epsilon(gamma, gamma_old)
        eps_trace.append(eps)
        sigma2_trace.append(sigma2)
        evidence_trace.append(log_evidence(gamma, sigma2, a, s_y))
        if j in snapshot_iters:
            snapshots[j] = gamma.copy()

    active = select_active_set(gamma, k)
    return SblResult(
        active_set=active,
        gamma=gamma,
        sigma2=float(sigma2),
        iterations=j,
        converged=eps <= config.epsilon_min,
        epsilon_trace=np.asarray(eps_trace),
        evidence_trace=np.asarray(evidence_trace),
        sigma2_trace=np.asarray(sigma2_trace),
        posterior_rows=posterior_rows(gamma, sigma2, a, y),
        active_angles_deg=None if angles_deg is None else np.asarray(angles_deg)[active],
        sample_cov_loaded=loaded,
        gamma_snapshots=snapshots,
    )
