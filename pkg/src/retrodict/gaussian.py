"""Closed-form entropies for Gaussian diffusion processes.

The process family is parameterized per dimension by a contraction factor
``lambda(t)`` and a spread ``D(t)`` (transition variance ``D(t)/2``), with a
Gaussian prior of width ``sigma`` on the shared starting point of ``N``
independent particles.  Two named members:

* Wiener (flat potential): ``D(t) = 4 D t``, ``lambda = 1``.
* Ornstein-Uhlenbeck (quadratic potential of convexity ``theta``):
  ``D(t) = 2 D (1 - exp(-2 theta t)) / theta``, ``lambda(t) = exp(-theta t)``.

All four entropies (transition, prior, observation, retrodiction) have exact
expressions; ``gaussian_entropy_bundle`` evaluates them independently and
enforces the budget identity ``S_R = S_T - (S_t - S_0)``.  An infinite prior
width is a first-class value (``math.inf``): the formulas use their analytic
wide-prior limits instead of a large float.  ``quadrature_entropies`` provides
the independent numerical-integration oracle for each entropy.

Note on the Wiener long-time limit: the exact limit of the finite-``sigma``
retrodiction entropy is the prior entropy ``(d/2) log(2 pi e sigma_GM^2)``; a
sometimes-quoted variant with ``4 pi e`` in place of ``2 pi e`` overstates it
by ``(d/2) log 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .discrete import ConsistencyError, IDENTITY_ATOL

__all__ = [
    "THETA_WIENER_CUTOFF",
    "ProcessKind",
    "GaussianProcessSpec",
    "GaussianEntropies",
    "kappa",
    "transition_entropy",
    "prior_entropy",
    "observation_entropy",
    "retrodiction_entropy",
    "wiener_sr",
    "ou_sr",
    "gaussian_entropy_bundle",
    "quadrature_entropies",
    "quadrature_residuals",
    "entropy_scan",
]

# |theta| below this dispatches to the Wiener formulas: 1 - exp(-2 theta t)
# loses all precision relative to 2 theta t well before theta reaches zero.
THETA_WIENER_CUTOFF = 1e-9

LOG_2PI_E = math.log(2.0 * math.pi * math.e)


def _per_dim(value, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must be a scalar or a length-{dim} vector")
    return arr


@dataclass(frozen=True)
class ProcessKind:
    """A named member of the Gaussian family: ``"wiener"`` or ``"ou"``.

    ``diffusion`` is the per-dimension diffusion constant; ``theta`` the
    potential convexity (ignored for Wiener).  ``|theta| < THETA_WIENER_CUTOFF``
    is treated as Wiener.
    """

    name: str
    diffusion: tuple
    theta: float = 0.0

    def __post_init__(self):
        if self.name not in ("wiener", "ou"):
            raise ValueError(f"unknown process kind {self.name!r}")
        diff = tuple(float(x) for x in np.atleast_1d(np.asarray(self.diffusion, dtype=float)))
        if not diff or any(x < 0 for x in diff):
            raise ValueError("diffusion constants must be nonnegative")
        object.__setattr__(self, "diffusion", diff)
        object.__setattr__(self, "theta", float(self.theta))

    @classmethod
    def wiener(cls, diffusion, dim: int = 1) -> "ProcessKind":
        return cls("wiener", tuple(_per_dim(diffusion, dim, "diffusion")), 0.0)

    @classmethod
    def ornstein_uhlenbeck(cls, diffusion, theta: float, dim: int = 1) -> "ProcessKind":
        return cls("ou", tuple(_per_dim(diffusion, dim, "diffusion")), theta)

    @property
    def dim(self) -> int:
        return len(self.diffusion)

    @property
    def is_wiener(self) -> bool:
        return self.name == "wiener" or abs(self.theta) < THETA_WIENER_CUTOFF

    def lambda_at(self, t: float) -> np.ndarray:
        if self.is_wiener:
            return np.ones(self.dim)
        return np.full(self.dim, math.exp(-self.theta * t))

    def big_d_at(self, t: float) -> np.ndarray:
        d = np.asarray(self.diffusion)
        if self.is_wiener:
            return 4.0 * d * t
        return -2.0 * d / self.theta * math.expm1(-2.0 * self.theta * t)

    def log_lambda_sq_at(self, t: float) -> np.ndarray:
        if self.is_wiener:
            return np.zeros(self.dim)
        return np.full(self.dim, -2.0 * self.theta * t)

    def big_d_over_lambda_sq_at(self, t: float) -> np.ndarray:
        """D(t) / lambda(t)^2 (grows like exp(2 theta t) in a trap; inf on
        float overflow, see the log-space variant)."""
        d = np.asarray(self.diffusion)
        if self.is_wiener:
            return 4.0 * d * t
        with np.errstate(over="ignore"):
            return 2.0 * d / self.theta * np.expm1(2.0 * self.theta * t)

    def log_big_d_over_lambda_sq_at(self, t: float) -> np.ndarray:
        """log(D(t) / lambda(t)^2) without overflow at any time."""
        d = np.asarray(self.diffusion)
        if self.is_wiener:
            return np.log(4.0 * d * t)
        if self.theta > 0:
            # log(1 - exp(-x)) as log(-expm1(-x)): exact at both ends
            growth = 2.0 * self.theta * t + math.log(-math.expm1(-2.0 * self.theta * t))
        else:
            growth = math.log(-math.expm1(2.0 * self.theta * t))
        return np.log(2.0 * d / abs(self.theta)) + growth


@dataclass(frozen=True)
class GaussianProcessSpec:
    """Per-dimension process functions plus prior widths and particle count.

    ``sigma`` entries may be ``inf`` (non-normalizable uniform prior).  When
    built from a :class:`ProcessKind` the kind is kept so long-time values can
    use numerically stable closed forms.
    """

    dim: int
    n_particles: int
    sigma: np.ndarray
    lambda_fn: Callable[[float], np.ndarray]
    big_d_fn: Callable[[float], np.ndarray]
    kind: ProcessKind | None = None

    def __post_init__(self):
        if self.dim < 1 or self.n_particles < 1:
            raise ValueError("dim and n_particles must be >= 1")
        sigma = _per_dim(self.sigma, self.dim, "sigma")
        if (sigma <= 0).any():
            raise ValueError("prior widths must be positive (inf allowed)")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_kind(cls, kind: ProcessKind, n_particles: int, sigma) -> "GaussianProcessSpec":
        return cls(
            dim=kind.dim,
            n_particles=n_particles,
            sigma=_per_dim(sigma, kind.dim, "sigma"),
            lambda_fn=kind.lambda_at,
            big_d_fn=kind.big_d_at,
            kind=kind,
        )

    @property
    def uniform_prior(self) -> bool:
        return bool(np.isinf(self.sigma).any())


def _require_time(t: float) -> None:
    if not t > 0.0:
        raise ValueError(f"time must be positive, got {t}")


def _big_d(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    d = np.asarray(spec.big_d_fn(t), dtype=float)
    if (d <= 0).any():
        raise ValueError(f"spread D(t) must be positive at t={t}")
    return d


def _d_over_lambda_sq(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    if spec.kind is not None:
        return spec.kind.big_d_over_lambda_sq_at(t)
    lam = np.asarray(spec.lambda_fn(t), dtype=float)
    return _big_d(spec, t) / lam**2


def _log_lambda_sq(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    if spec.kind is not None:
        return spec.kind.log_lambda_sq_at(t)
    lam = np.asarray(spec.lambda_fn(t), dtype=float)
    if (lam <= 0).any():
        raise ValueError("lambda(t) must be positive")
    return 2.0 * np.log(lam)


def _log_d_over_lambda_sq(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    if spec.kind is not None:
        return spec.kind.log_big_d_over_lambda_sq_at(t)
    lam = np.asarray(spec.lambda_fn(t), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(_big_d(spec, t)) - 2.0 * np.log(lam)  # +inf where lambda = 0


def kappa(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    """Posterior contraction factor 1 / (1 + D / (2 N sigma^2 lambda^2)) per
    dimension; 1 in the wide-prior limit."""
    _require_time(t)
    ratio = _d_over_lambda_sq(spec, t)
    with np.errstate(over="ignore", divide="ignore"):
        correction = np.where(
            np.isinf(spec.sigma),
            0.0,
            ratio / (2.0 * spec.n_particles * np.where(np.isinf(spec.sigma), 1.0, spec.sigma) ** 2),
        )
        return 1.0 / (1.0 + correction)


def transition_entropy(spec: GaussianProcessSpec, t: float) -> float:
    """Entropy of the forward transition density for all N particles,
    (N/2) sum_a [log(pi D_a(t)) + 1]; independent of the starting point."""
    _require_time(t)
    d = _big_d(spec, t)
    return 0.5 * spec.n_particles * float(np.sum(np.log(math.pi * d) + 1.0))


def prior_entropy(spec: GaussianProcessSpec) -> float:
    """(1/2) sum_a log(2 pi e sigma_a^2); +inf for a non-normalizable prior."""
    if spec.uniform_prior:
        return math.inf
    return 0.5 * float(np.sum(LOG_2PI_E + 2.0 * np.log(spec.sigma)))


def _log_lambda_sq_over_kappa(spec: GaussianProcessSpec, t: float) -> np.ndarray:
    """log(lambda^2 / kappa) = log(lambda^2 + D / (2 N sigma^2)), stable at
    long times where lambda underflows but the sum stays finite."""
    log_lam_sq = _log_lambda_sq(spec, t)
    lam_sq = np.exp(log_lam_sq)
    d = _big_d(spec, t)
    with np.errstate(divide="ignore"):
        shift = np.where(
            np.isinf(spec.sigma),
            0.0,
            d / (2.0 * spec.n_particles * np.where(np.isinf(spec.sigma), 1.0, spec.sigma) ** 2),
        )
    return np.where(shift == 0.0, log_lam_sq, np.log(lam_sq + shift))


def observation_entropy(spec: GaussianProcessSpec, t: float) -> float:
    """Entropy of the joint marginal of the N final positions; +inf for a
    non-normalizable prior."""
    _require_time(t)
    if spec.uniform_prior:
        return math.inf
    n = spec.n_particles
    d = _big_d(spec, t)
    per_dim = (
        math.log(2.0)
        + n * math.log(math.pi)
        + math.log(n)
        + 2.0 * np.log(spec.sigma)
        + (n - 1) * np.log(d)
        + _log_lambda_sq_over_kappa(spec, t)
        + n
    )
    return 0.5 * float(per_dim.sum())


def retrodiction_entropy(spec: GaussianProcessSpec, t: float) -> float:
    """Entropy of the posterior over the shared starting point,
    (1/2) sum_a log[(pi e / N) D_a / (lambda_a^2 + D_a / (2 sigma_a^2 N))].

    Supports the wide-prior limit (the sigma term drops out); a fully flat
    direction (``lambda = 0`` with ``sigma = inf``) is degenerate: +inf.
    """
    _require_time(t)
    n = spec.n_particles
    log_ratio = _log_d_over_lambda_sq(spec, t)  # log(D / lambda^2), overflow-free
    inv_sigma_term = np.where(
        np.isinf(spec.sigma),
        0.0,
        1.0 / (2.0 * np.where(np.isinf(spec.sigma), 1.0, spec.sigma) ** 2 * n),
    )
    total = 0.0
    for lr, ist in zip(log_ratio, inv_sigma_term):
        if ist == 0.0:
            log_v = lr  # wide prior: v = D / lambda^2 exactly
            if math.isinf(log_v):
                return math.inf  # flat direction, degenerate posterior
        else:
            log_v = -math.log(math.exp(-lr) + ist)  # exp underflow to 0 is the limit
        total += math.log(math.pi * math.e / n) + log_v
    return 0.5 * total


def wiener_sr(diffusion, sigma, n_particles: int, dim: int, t: float) -> float:
    """Retrodiction entropy of free diffusion,
    (1/2) sum_a log[4 pi e sigma_a^2 D_a t / (2 D_a t + sigma_a^2 N)];
    wide-prior limit (d/2) log(4 pi e D_GM t / N)."""
    _require_time(t)
    d = _per_dim(diffusion, dim, "diffusion")
    s = _per_dim(sigma, dim, "sigma")
    n = n_particles
    total = 0.0
    for d_a, s_a in zip(d, s):
        if math.isinf(s_a):
            total += 0.5 * math.log(4.0 * math.pi * math.e * d_a * t / n)
        else:
            total += 0.5 * math.log(
                4.0 * math.pi * math.e * s_a**2 * d_a * t / (2.0 * d_a * t + s_a**2 * n)
            )
    return total


def ou_sr(diffusion, theta: float, sigma, n_particles: int, dim: int, t: float) -> float:
    """Retrodiction entropy in a quadratic potential,
    (1/2) sum_a log[2 pi e sigma_a^2 D_a (1 - E) / (sigma_a^2 N theta E + D_a (1 - E))]
    with E = exp(-2 theta t).  ``|theta| < THETA_WIENER_CUTOFF`` dispatches to
    :func:`wiener_sr`."""
    _require_time(t)
    if abs(theta) < THETA_WIENER_CUTOFF:
        return wiener_sr(diffusion, sigma, n_particles, dim, t)
    d = _per_dim(diffusion, dim, "diffusion")
    s = _per_dim(sigma, dim, "sigma")
    n = n_particles
    total = 0.0
    for d_a, s_a in zip(d, s):
        if math.isinf(s_a):
            # wide prior: (1/2) log[2 pi e D (exp(2 theta t) - 1) / (N theta)]
            base = 0.5 * math.log(2.0 * math.pi * math.e * d_a / (n * abs(theta)))
            if theta > 0:
                log_growth = 2.0 * theta * t + math.log(-math.expm1(-2.0 * theta * t))
            else:
                log_growth = math.log(-math.expm1(2.0 * theta * t))
            total += base + 0.5 * log_growth
        elif theta > 0:
            # divide through by (1 - E): saturates at 2 pi e sigma^2 without
            # overflow; 1 - E via expm1 keeps short times exact
            ratio = math.exp(-2.0 * theta * t) / -math.expm1(-2.0 * theta * t)
            arg = 2.0 * math.pi * math.e * s_a**2 * d_a / (s_a**2 * n * theta * ratio + d_a)
            total += 0.5 * math.log(arg)
        else:
            m = math.expm1(2.0 * theta * t)  # in (-1, 0), exact
            arg = 2.0 * math.pi * math.e * s_a**2 * d_a * m / (s_a**2 * n * theta + d_a * m)
            total += 0.5 * math.log(arg)
    return total


@dataclass(frozen=True)
class GaussianEntropies:
    """The four closed-form entropies of one (spec, t) pair plus the
    contraction vector ``kappa``.

    When all four are finite the budget identity
    ``sr = avg_st - (st - s0)`` is enforced at construction.
    """

    avg_st: float
    s0: float
    st: float
    sr: float
    kappa: np.ndarray

    def __post_init__(self):
        kap = np.asarray(self.kappa, dtype=float)
        kap.setflags(write=False)
        object.__setattr__(self, "kappa", kap)
        if all(map(math.isfinite, (self.avg_st, self.s0, self.st, self.sr))):
            residual = abs(self.sr - (self.avg_st - (self.st - self.s0)))
            if not residual < IDENTITY_ATOL:
                raise ConsistencyError(
                    f"Gaussian entropy budget violated by {residual:.3e}"
                )


def _observation_minus_prior(spec: GaussianProcessSpec, t: float) -> float:
    """S_t - S_0 per its analytic per-dimension form, valid also in the
    wide-prior limit (the sigma^2 factors cancel)."""
    n = spec.n_particles
    d = _big_d(spec, t)
    per_dim = (
        (n - 1) * (np.log(math.pi * d))
        + math.log(n)
        + _log_lambda_sq_over_kappa(spec, t)
        + n
        - 1.0
    )
    return 0.5 * float(per_dim.sum())


def gaussian_entropy_bundle(spec: GaussianProcessSpec, t: float) -> GaussianEntropies:
    """Evaluate all four entropies independently and enforce the budget
    identity; in the wide-prior limit (infinite s0/st) the identity is checked
    against the analytic limit of S_t - S_0."""
    bundle = GaussianEntropies(
        avg_st=transition_entropy(spec, t),
        s0=prior_entropy(spec),
        st=observation_entropy(spec, t),
        sr=retrodiction_entropy(spec, t),
        kappa=kappa(spec, t),
    )
    if spec.uniform_prior and math.isfinite(bundle.sr):
        residual = abs(bundle.sr - (bundle.avg_st - _observation_minus_prior(spec, t)))
        if not residual < IDENTITY_ATOL:
            raise ConsistencyError(
                f"Gaussian entropy budget (wide-prior limit) violated by {residual:.3e}"
            )
    return bundle


# ---------------------------------------------------------------------------
# quadrature oracle


def _entropy_quad_1d(variance: float, points: int) -> float:
    std = math.sqrt(variance)
    x = np.linspace(-8.0 * std, 8.0 * std, points)
    p = np.exp(-(x**2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)
    integrand = np.where(p > 1e-300, -p * np.log(np.where(p > 1e-300, p, 1.0)), 0.0)
    return float(simpson(integrand, x=x))


def _entropy_quad_2d(cov: np.ndarray, points: int) -> float:
    stds = np.sqrt(np.diag(cov))
    x = np.linspace(-8.0 * stds[0], 8.0 * stds[0], points)
    y = np.linspace(-8.0 * stds[1], 8.0 * stds[1], points)
    inv = np.linalg.inv(cov)
    det = np.linalg.det(cov)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    quad_form = inv[0, 0] * xx**2 + 2.0 * inv[0, 1] * xx * yy + inv[1, 1] * yy**2
    p = np.exp(-0.5 * quad_form) / (2.0 * math.pi * math.sqrt(det))
    integrand = np.where(p > 1e-300, -p * np.log(np.where(p > 1e-300, p, 1.0)), 0.0)
    return float(simpson(simpson(integrand, x=y, axis=1), x=x))


def quadrature_entropies(spec: GaussianProcessSpec, t: float, points: int = 2001) -> dict:
    """Numerical-integration oracle for the four entropies.

    Each density is assembled from elementary Gaussian facts (transition
    variance D/2, convolution covariance for the observation marginal,
    precision addition for the posterior) and its differential entropy is
    integrated by Simpson's rule on a grid truncated at 8 standard deviations.
    Limits: finite sigma, dim <= 2, N <= 2.
    """
    _require_time(t)
    if spec.uniform_prior:
        raise ValueError("quadrature oracle needs a normalizable prior")
    if spec.dim > 2 or spec.n_particles > 2:
        raise ValueError("quadrature oracle is limited to dim <= 2 and N <= 2")
    n = spec.n_particles
    d = _big_d(spec, t)
    lam = np.asarray(spec.lambda_fn(t), dtype=float)
    sigma = spec.sigma

    s0 = sum(_entropy_quad_1d(s**2, points) for s in sigma)
    avg_st = n * sum(_entropy_quad_1d(d_a / 2.0, points) for d_a in d)

    st = 0.0
    for a in range(spec.dim):
        shared = lam[a] ** 2 * sigma[a] ** 2  # common variance from the shared start
        if n == 1:
            st += _entropy_quad_1d(shared + d[a] / 2.0, points)
        else:
            cov = np.full((2, 2), shared) + np.eye(2) * d[a] / 2.0
            st += _entropy_quad_2d(cov, points)

    sr = 0.0
    for a in range(spec.dim):
        posterior_var = 1.0 / (1.0 / sigma[a] ** 2 + 2.0 * n * lam[a] ** 2 / d[a])
        sr += _entropy_quad_1d(posterior_var, points)

    return {"s0": s0, "st": st, "avg_st": avg_st, "sr": sr}


def quadrature_residuals(spec: GaussianProcessSpec, t: float, points: int = 2001) -> dict:
    """Absolute differences between the closed forms and the quadrature
    oracle, keyed like the scan columns."""
    quad = quadrature_entropies(spec, t, points)
    closed = gaussian_entropy_bundle(spec, t)
    return {
        "s0": abs(closed.s0 - quad["s0"]),
        "st": abs(closed.st - quad["st"]),
        "avg_st": abs(closed.avg_st - quad["avg_st"]),
        "sr": abs(closed.sr - quad["sr"]),
    }


# ---------------------------------------------------------------------------
# scans


SCAN_COLUMNS = ("process", "theta", "D", "sigma", "N", "d", "t", "s0", "st", "avg_st", "sr")


def _scalar_or_join(values: np.ndarray) -> float | str:
    vals = np.atleast_1d(values)
    if np.all(vals == vals[0]):
        return float(vals[0])
    return ";".join(format(v, ".17g") for v in vals)


def entropy_scan(
    kind: ProcessKind,
    sigma,
    n_particles: int,
    times,
    quadrature_check: bool = False,
    max_quadrature_points: int = 5,
) -> list[dict]:
    """Closed-form entropies over a time grid, one row per time.

    With ``quadrature_check`` the numerical oracle runs on at most
    ``max_quadrature_points`` evenly chosen rows and a ``quad_max_residual``
    column reports the worst absolute deviation for those rows.
    """
    spec = GaussianProcessSpec.from_kind(kind, n_particles, sigma)
    times = [float(t) for t in np.atleast_1d(times)]
    check_at: set[int] = set()
    if quadrature_check:
        if spec.uniform_prior:
            raise ValueError("quadrature check is unavailable for a uniform prior")
        step = max(1, len(times) // max_quadrature_points)
        check_at = set(range(0, len(times), step))
    rows = []
    for i, t in enumerate(times):
        bundle = gaussian_entropy_bundle(spec, t)
        row = {
            "process": kind.name,
            "theta": kind.theta,
            "D": _scalar_or_join(np.asarray(kind.diffusion)),
            "sigma": _scalar_or_join(spec.sigma),
            "N": n_particles,
            "d": spec.dim,
            "t": t,
            "s0": bundle.s0,
            "st": bundle.st,
            "avg_st": bundle.avg_st,
            "sr": bundle.sr,
        }
        if quadrature_check:
            row["quad_max_residual"] = (
                max(quadrature_residuals(spec, t).values()) if i in check_at else math.nan
            )
        rows.append(row)
    return rows
