"""Exact retrodiction calculus for finite-state stochastic systems.

A system is a prior distribution over initial states plus a row-stochastic
transition kernel.  Bayes inversion of the kernel against the prior yields the
retrodiction kernel: for every observed final state, the posterior
distribution over initial states.  On top of that sit the entropy and
Kullback-Leibler quantities that relate prediction to retrodiction:

* ``entropy_report`` bundles S_0, S_t, <S_T>, <S_R>, I(X_0;X_t) and the six
  averaged KL divergences, and enforces the entropy budget
  ``<S_R> = <S_T> - (S_t - S_0)`` and ``<S_R> = S_0 - I(X_0;X_t)`` as
  internal-consistency checks (each side computed by an independent path).
* ``verify_kl_relations`` checks the full family of averaged-KL equalities.
* ``kl_monotonicity_check`` and ``rate_bound_check`` check the per-step
  behaviour of divergences and entropies under repeated kernel application.

Conventions: natural logarithm throughout (nats); ``0 log 0 = 0``; a KL
divergence with ``q = 0 < p`` is the distinguished value ``+inf`` which
propagates through averages and is flagged, never raised.  Final states of
zero mass carry zero weight in every average and are marked in
``RetrodictionKernel.support_mask``; their retrodiction rows are NaN so that
accidental use is loud.  All values are immutable and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "MASS_ATOL",
    "IDENTITY_ATOL",
    "UndefinedRetrodictionError",
    "ConsistencyError",
    "DiscreteDistribution",
    "TransitionKernel",
    "RetrodictionKernel",
    "EntropyReport",
    "KlRelationReport",
    "KlMonotonicityReport",
    "RateBoundStep",
    "RateBoundReport",
    "shannon_entropy",
    "evolve",
    "bayes_invert",
    "retrodiction_entropy",
    "average_retrodiction_entropy",
    "average_transition_entropy",
    "entropy_report",
    "kl_divergence",
    "averaged_kl_family",
    "verify_kl_relations",
    "mutual_information",
    "kl_monotonicity_check",
    "rate_bound_check",
    "posterior_dispersion",
    "stationary_distribution",
    "random_system",
]

MASS_ATOL = 1e-12
IDENTITY_ATOL = 1e-10

KL_FAMILY_KEYS = ("kl_t_t", "kl_t_pt", "kl_pt_t", "kl_r_r", "kl_r_p0", "kl_p0_r")


class UndefinedRetrodictionError(ValueError):
    """A retrodiction row was requested for a final state of zero mass."""


class ConsistencyError(RuntimeError):
    """An exact identity between independently computed quantities failed.

    This signals a computation bug (or severely degenerate input), not a
    property of the system under study.
    """


# ---------------------------------------------------------------------------
# numeric helpers


def _xlogx(a: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0.0, a * np.log(np.where(a > 0.0, a, 1.0)), 0.0)


def _row_entropies(rows: np.ndarray) -> np.ndarray:
    return -_xlogx(rows).sum(axis=-1)


def _cross_plogq(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """C[i, j] = sum_x P[i, x] log Q[j, x], with 0 log(.) = 0 and -inf where
    some P[i, x] > 0 sits on Q[j, x] = 0."""
    log_q = np.where(q_rows > 0.0, np.log(np.where(q_rows > 0.0, q_rows, 1.0)), 0.0)
    finite = p_rows @ log_q.T
    escapes = (p_rows > 0.0).astype(float) @ (q_rows <= 0.0).astype(float).T
    return np.where(escapes > 0.0, -np.inf, finite)


def _kl_matrix(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Pairwise divergences D(P_i || Q_j); +inf where absolute continuity fails.

    Divergences are nonnegative by Gibbs' inequality; last-bit rounding
    residue below zero is clamped.
    """
    self_term = _xlogx(p_rows).sum(axis=1)
    return np.maximum(self_term[:, None] - _cross_plogq(p_rows, q_rows), 0.0)


def _clean_mass(mass, what: str) -> tuple[np.ndarray, float]:
    arr = np.array(mass, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-d array of probabilities")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} contains non-finite entries")
    if (arr < 0.0).any():
        raise ValueError(f"{what} contains negative entries")
    total = float(arr.sum())
    if total <= 0.0:
        raise ValueError(f"{what} has zero total mass")
    arr /= total
    arr.setflags(write=False)
    return arr, abs(total - 1.0)


def _label_index(labels: tuple, key) -> int:
    try:
        return labels.index(key)
    except ValueError:
        raise ValueError(f"unknown state label {key!r}") from None


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector over a finite labeled state space.

    Construction normalizes the mass vector and records the pre-normalization
    deviation ``|sum - 1|`` for diagnostics; negative or non-finite entries
    are rejected.
    """

    labels: tuple
    mass: np.ndarray
    normalization_deviation: float = field(init=False, default=0.0)

    def __post_init__(self):
        mass, deviation = _clean_mass(self.mass, "distribution mass")
        labels = tuple(self.labels) if self.labels is not None else tuple(range(mass.size))
        if len(labels) != mass.size:
            raise ValueError("label count does not match mass length")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "normalization_deviation", float(deviation))

    def __len__(self) -> int:
        return self.mass.size

    @classmethod
    def uniform(cls, labels_or_n) -> "DiscreteDistribution":
        labels = tuple(range(labels_or_n)) if isinstance(labels_or_n, int) else tuple(labels_or_n)
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    @classmethod
    def delta(cls, labels, at) -> "DiscreteDistribution":
        labels = tuple(labels)
        mass = np.zeros(len(labels))
        mass[_label_index(labels, at)] = 1.0
        return cls(labels, mass)


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic matrix: ``rows[a, w]`` is the probability of ending in
    target state ``w`` given source state ``a``.

    Source and target spaces may differ.  Rows are renormalized on
    construction (max per-row deviation kept in ``row_deviation``).
    """

    source_labels: tuple
    target_labels: tuple
    rows: np.ndarray
    elapsed_time: float | None = None
    row_deviation: float = field(init=False, default=0.0)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.size == 0:
            raise ValueError("kernel rows must form a non-empty 2-d matrix")
        source = tuple(self.source_labels) if self.source_labels is not None else tuple(range(rows.shape[0]))
        target = tuple(self.target_labels) if self.target_labels is not None else tuple(range(rows.shape[1]))
        if rows.shape != (len(source), len(target)):
            raise ValueError("kernel shape does not match label counts")
        if not np.isfinite(rows).all() or (rows < 0.0).any():
            raise ValueError("kernel rows must be finite and nonnegative")
        sums = rows.sum(axis=1)
        if (sums <= 0.0).any():
            raise ValueError("kernel has a row of zero total mass")
        deviation = float(np.abs(sums - 1.0).max())
        rows = rows / sums[:, None]
        rows.setflags(write=False)
        object.__setattr__(self, "source_labels", source)
        object.__setattr__(self, "target_labels", target)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "row_deviation", deviation)

    @property
    def n_source(self) -> int:
        return len(self.source_labels)

    @property
    def n_target(self) -> int:
        return len(self.target_labels)

    @classmethod
    def identity(cls, labels, elapsed_time: float | None = None) -> "TransitionKernel":
        labels = tuple(labels)
        return cls(labels, labels, np.eye(len(labels)), elapsed_time)

    def row_distribution(self, alpha) -> DiscreteDistribution:
        return DiscreteDistribution(self.target_labels, self.rows[_label_index(self.source_labels, alpha)])

    def compose(self, other: "TransitionKernel") -> "TransitionKernel":
        """Kernel for applying ``self`` first and then ``other``."""
        if self.target_labels != other.source_labels:
            raise ValueError("kernels are not composable: target/source spaces differ")
        elapsed = None
        if self.elapsed_time is not None and other.elapsed_time is not None:
            elapsed = self.elapsed_time + other.elapsed_time
        return TransitionKernel(self.source_labels, other.target_labels, self.rows @ other.rows, elapsed)

    def power(self, k: int) -> "TransitionKernel":
        if self.source_labels != self.target_labels:
            raise ValueError("kernel powers need a shared source/target space")
        if k < 0:
            raise ValueError("kernel power must be >= 0")
        out = TransitionKernel.identity(self.source_labels)
        base = self
        while k:
            if k & 1:
                out = out.compose(base)
            k >>= 1
            if k:
                base = base.compose(base)
        return out


@dataclass(frozen=True)
class RetrodictionKernel:
    """Bayes inverse of a transition kernel: ``rows[w, a]`` is the posterior
    probability of source state ``a`` given final state ``w``.

    Final states of zero mass are marked False in ``support_mask``; their rows
    are NaN, never silently zero-filled.
    """

    source_labels: tuple
    target_labels: tuple
    rows: np.ndarray
    support_mask: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        mask = np.array(self.support_mask, dtype=bool)
        if rows.shape != (len(self.target_labels), len(self.source_labels)):
            raise ValueError("retrodiction shape does not match label counts")
        if mask.shape != (rows.shape[0],):
            raise ValueError("support mask length does not match final-state count")
        if mask.any():
            sub = rows[mask]
            if not np.isfinite(sub).all() or (sub < 0.0).any():
                raise ValueError("supported retrodiction rows must be finite and nonnegative")
            sums = sub.sum(axis=1)
            if (sums <= 0.0).any():
                raise ValueError("supported retrodiction row has zero mass")
            rows[mask] = sub / sums[:, None]
        rows[~mask] = np.nan
        rows.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "source_labels", tuple(self.source_labels))
        object.__setattr__(self, "target_labels", tuple(self.target_labels))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "support_mask", mask)

    def row_distribution(self, omega) -> DiscreteDistribution:
        idx = _label_index(self.target_labels, omega)
        if not self.support_mask[idx]:
            raise UndefinedRetrodictionError(
                f"final state {omega!r} has zero mass; its retrodiction is undefined"
            )
        return DiscreteDistribution(self.source_labels, self.rows[idx])

    def as_transition_kernel(self, elapsed_time: float | None = None) -> TransitionKernel:
        """View the posterior family as a kernel from final to initial states."""
        if not self.support_mask.all():
            raise UndefinedRetrodictionError(
                "cannot convert: some final states are unsupported"
            )
        return TransitionKernel(self.target_labels, self.source_labels, self.rows, elapsed_time)


@dataclass(frozen=True)
class EntropyReport:
    """Entropy/KL summary of one (kernel, prior) pair, all in nats.

    The two identities ``avg_sr = avg_st - (st - s0)`` and
    ``mutual_info = s0 - avg_sr`` are enforced at construction; every field is
    computed by an independent summation path, so a violation means a bug.
    """

    s0: float
    st: float
    avg_st: float
    avg_sr: float
    mutual_info: float
    kl_family: dict

    def __post_init__(self):
        balance = abs(self.avg_sr - (self.avg_st - (self.st - self.s0)))
        if not balance < IDENTITY_ATOL:
            raise ConsistencyError(
                f"entropy budget identity violated by {balance:.3e} "
                "(<S_R> != <S_T> - (S_t - S_0))"
            )
        info = abs(self.mutual_info - (self.s0 - self.avg_sr))
        if not info < IDENTITY_ATOL:
            raise ConsistencyError(
                f"mutual-information identity violated by {info:.3e} "
                "(I(X_0;X_t) != S_0 - <S_R>)"
            )
        object.__setattr__(self, "kl_family", dict(self.kl_family))

    def to_json_dict(self) -> dict:
        out = {
            "s0": self.s0,
            "st": self.st,
            "avg_st": self.avg_st,
            "avg_sr": self.avg_sr,
            "mutual_info": self.mutual_info,
        }
        out.update({k: self.kl_family[k] for k in KL_FAMILY_KEYS})
        return out


# ---------------------------------------------------------------------------
# elementary operations


def shannon_entropy(p: DiscreteDistribution) -> float:
    """Shannon entropy -sum p log p in nats (0 log 0 = 0)."""
    return float(_row_entropies(p.mass[None, :])[0])


def _check_prior(kernel: TransitionKernel, prior: DiscreteDistribution) -> None:
    if prior.labels != kernel.source_labels:
        raise ValueError("prior state space does not match kernel source space")


def evolve(prior: DiscreteDistribution, kernel: TransitionKernel) -> DiscreteDistribution:
    """Push the prior forward: P_t(w) = sum_a T(w|a) P_0(a)."""
    _check_prior(kernel, prior)
    return DiscreteDistribution(kernel.target_labels, prior.mass @ kernel.rows)


def bayes_invert(kernel: TransitionKernel, prior: DiscreteDistribution) -> RetrodictionKernel:
    """Bayes inversion R(a|w) = T(w|a) P_0(a) / P_t(w).

    Final states with P_t(w) = 0 are flagged in the support mask rather than
    inverted (the posterior is undefined there).
    """
    _check_prior(kernel, prior)
    pt = prior.mass @ kernel.rows
    support = pt > 0.0
    rows = np.full((kernel.n_target, kernel.n_source), np.nan)
    joint = kernel.rows * prior.mass[:, None]  # joint[a, w]
    rows[support] = joint[:, support].T / pt[support, None]
    return RetrodictionKernel(kernel.source_labels, kernel.target_labels, rows, support)


def retrodiction_entropy(rk: RetrodictionKernel, omega) -> float:
    """Shannon entropy of the posterior over initial states given final state
    ``omega``."""
    return shannon_entropy(rk.row_distribution(omega))


def average_retrodiction_entropy(kernel: TransitionKernel, prior: DiscreteDistribution) -> float:
    """<S_R> = sum_w P_t(w) S_R(w); zero-mass final states contribute 0."""
    _check_prior(kernel, prior)
    pt = prior.mass @ kernel.rows
    rk = bayes_invert(kernel, prior)
    mask = rk.support_mask
    return float(pt[mask] @ _row_entropies(rk.rows[mask]))


def average_transition_entropy(kernel: TransitionKernel, prior: DiscreteDistribution) -> float:
    """<S_T> = sum_a P_0(a) S_T(a), the prior-weighted forward row entropy."""
    _check_prior(kernel, prior)
    return float(prior.mass @ _row_entropies(kernel.rows))


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """D(p||q) in nats; +inf when q vanishes where p does not."""
    if p.labels != q.labels:
        raise ValueError("divergence needs a shared state space")
    active = p.mass > 0.0
    pa = p.mass[active]
    qa = q.mass[active]
    if (qa <= 0.0).any():
        return math.inf
    # single-pass p log(p/q): exact zero for p == q, stable for p close to q
    return max(0.0, float(pa @ np.log(pa / qa)))


def averaged_kl_family(kernel: TransitionKernel, prior: DiscreteDistribution) -> dict:
    """The six averaged KL divergences between T rows, R rows, P_0 and P_t.

    Forward-side averages weight free initial states with P_0, reverse-side
    averages weight free final states with P_t; zero-weight states are
    excluded.  An infinite pairwise divergence with positive weight makes the
    corresponding average +inf.
    """
    _check_prior(kernel, prior)
    p0 = prior.mass
    pt = p0 @ kernel.rows
    rk = bayes_invert(kernel, prior)

    a_act = p0 > 0.0
    w_act = rk.support_mask
    t_rows = kernel.rows[a_act]
    r_rows = rk.rows[w_act]
    wa = p0[a_act]
    ww = pt[w_act]

    def _pair_average(rows: np.ndarray, weights: np.ndarray) -> float:
        mat = _kl_matrix(rows, rows)
        if np.isinf(mat).any():
            return math.inf
        return float(weights @ mat @ weights)

    def _row_vs_dist(rows: np.ndarray, dist: np.ndarray, weights: np.ndarray) -> float:
        vec = _kl_matrix(rows, dist[None, :])[:, 0]
        if np.isinf(vec).any():
            return math.inf
        return float(weights @ vec)

    def _dist_vs_rows(dist: np.ndarray, rows: np.ndarray, weights: np.ndarray) -> float:
        vec = _kl_matrix(dist[None, :], rows)[0, :]
        if np.isinf(vec).any():
            return math.inf
        return float(weights @ vec)

    return {
        "kl_t_t": _pair_average(t_rows, wa),
        "kl_t_pt": _row_vs_dist(t_rows, pt, wa),
        "kl_pt_t": _dist_vs_rows(pt, t_rows, wa),
        "kl_r_r": _pair_average(r_rows, ww),
        "kl_r_p0": _row_vs_dist(r_rows, p0, ww),
        "kl_p0_r": _dist_vs_rows(p0, r_rows, ww),
    }


def mutual_information(kernel: TransitionKernel, prior: DiscreteDistribution) -> float:
    """I(X_0; X_t) computed as the P_t-averaged divergence <D(R_w || P_0)>."""
    _check_prior(kernel, prior)
    p0 = prior.mass
    pt = p0 @ kernel.rows
    rk = bayes_invert(kernel, prior)
    mask = rk.support_mask
    vec = _kl_matrix(rk.rows[mask], p0[None, :])[:, 0]
    return float(pt[mask] @ vec)


def entropy_report(kernel: TransitionKernel, prior: DiscreteDistribution) -> EntropyReport:
    """Full entropy/KL summary with identity enforcement.

    <S_R> comes from explicit Bayes inversion (not from the budget identity),
    and the mutual information from the direct double sum, so the two
    construction-time identity checks really compare independent paths.
    """
    _check_prior(kernel, prior)
    pt = evolve(prior, kernel)
    family = averaged_kl_family(kernel, prior)
    return EntropyReport(
        s0=shannon_entropy(prior),
        st=shannon_entropy(pt),
        avg_st=average_transition_entropy(kernel, prior),
        avg_sr=average_retrodiction_entropy(kernel, prior),
        mutual_info=family["kl_r_p0"],
        kl_family=family,
    )


# ---------------------------------------------------------------------------
# identity verification, monotonicity and rate checks


@dataclass(frozen=True)
class KlRelationReport:
    """Residuals of the averaged-KL equalities.

    Relations touching an infinite divergence are listed in ``not_checkable``
    (they are indeterminate, not failed); ``max_residual`` ranges over the
    checkable ones.
    """

    residuals: dict
    not_checkable: tuple
    max_residual: float


def verify_kl_relations(kernel: TransitionKernel, prior: DiscreteDistribution) -> KlRelationReport:
    """Check every equality between averaged KL divergences and entropies.

    Each side is computed by its own summation; on strictly positive kernels
    all residuals are expected at machine precision.
    """
    fam = averaged_kl_family(kernel, prior)
    pt = evolve(prior, kernel)
    s0 = shannon_entropy(prior)
    st = shannon_entropy(pt)
    avg_st = average_transition_entropy(kernel, prior)
    avg_sr = average_retrodiction_entropy(kernel, prior)

    pairs = {
        "t_t_vs_r_r": (fam["kl_t_t"], fam["kl_r_r"]),
        "t_pt_vs_r_p0": (fam["kl_t_pt"], fam["kl_r_p0"]),
        "pt_t_vs_p0_r": (fam["kl_pt_t"], fam["kl_p0_r"]),
        "t_t_vs_p0_r_entropies": (fam["kl_t_t"], fam["kl_p0_r"] + st - avg_st),
        "r_p0_vs_entropies": (fam["kl_r_p0"], s0 - avg_sr),
        "t_pt_vs_entropies": (fam["kl_t_pt"], st - avg_st),
        "symmetric_t": (fam["kl_t_pt"] + fam["kl_pt_t"], fam["kl_t_t"]),
        "symmetric_r": (fam["kl_r_p0"] + fam["kl_p0_r"], fam["kl_t_t"]),
    }
    residuals = {}
    skipped = []
    for name, (lhs, rhs) in pairs.items():
        if math.isinf(lhs) or math.isinf(rhs):
            skipped.append(name)
        else:
            residuals[name] = abs(lhs - rhs)
    max_residual = max(residuals.values(), default=0.0)
    return KlRelationReport(residuals, tuple(skipped), max_residual)


@dataclass(frozen=True)
class KlMonotonicityReport:
    """Divergence sequence D(p_t || q_t) under shared Markov evolution."""

    divergences: np.ndarray
    increments: np.ndarray
    violations: tuple
    max_increase: float


def kl_monotonicity_check(
    kernels: Sequence[TransitionKernel],
    p0: DiscreteDistribution,
    q0: DiscreteDistribution,
    slack: float = 1e-12,
) -> KlMonotonicityReport:
    """Evolve two distributions through the same one-step kernels and report
    the divergence sequence, which the data-processing property makes
    non-increasing.

    ``increments[k]`` is D_{k+1} - D_k; steps where both divergences are
    infinite are indeterminate and reported as NaN (never as violations).
    """
    if p0.labels != q0.labels:
        raise ValueError("p0 and q0 must share a state space")
    divergences = [kl_divergence(p0, q0)]
    p, q = p0, q0
    for step, kernel in enumerate(kernels):
        if kernel.source_labels != p.labels:
            raise ValueError(f"kernel at step {step} is not composable with the current state space")
        p = evolve(p, kernel)
        q = evolve(q, kernel)
        divergences.append(kl_divergence(p, q))
    div = np.asarray(divergences)
    with np.errstate(invalid="ignore"):
        inc = div[1:] - div[:-1]
    inc = np.where(np.isinf(div[1:]) & np.isinf(div[:-1]), np.nan, inc)
    violations = tuple(int(k) for k in np.nonzero(inc > slack)[0])
    finite = inc[np.isfinite(inc)]
    max_increase = float(finite.max()) if finite.size else 0.0
    return KlMonotonicityReport(div, inc, violations, max_increase)


@dataclass(frozen=True)
class RateBoundStep:
    """One forward difference of the entropy-rate bound.

    ``lhs`` is the change of S_t; ``rhs`` is the change of
    <S_T> + <D(T_a1||T_a2)> - <D(P_0||R_w)>.  ``sr_lower_bound`` is the
    equivalent lower bound on the change of <S_R>.  Steps touching an
    infinite divergence are unverifiable (differences of two equal infinite
    levels are reported as zero).
    """

    step: int
    lhs: float
    rhs: float
    margin: float
    sr_delta: float
    sr_lower_bound: float
    verifiable: bool
    holds: bool | None


@dataclass(frozen=True)
class RateBoundReport:
    steps: tuple
    levels: dict
    violations: tuple

    @property
    def max_violation(self) -> float:
        margins = [s.margin for s in self.steps if s.verifiable]
        return float(max((-m for m in margins), default=0.0))


def _delta(a: float, b: float) -> tuple[float, bool]:
    """Forward difference b - a; equal infinities difference to 0, unverifiable."""
    if math.isinf(a) or math.isinf(b):
        if a == b:
            return 0.0, False
        return b - a, False
    return b - a, True


def rate_bound_check(
    one_step_kernel: TransitionKernel,
    prior: DiscreteDistribution,
    steps: int,
    slack: float = 1e-12,
) -> RateBoundReport:
    """Check the discrete entropy-rate bound along powers of one kernel.

    At integer times t = 0..steps the four averaged quantities S_t, <S_T>,
    <D(T_a1||T_a2)> and <D(P_0||R_w)> are evaluated for the t-step kernel,
    each by direct summation, and their forward differences are compared:

        dS_t <= d<S_T> + d<D(T_a1||T_a2)> - d<D(P_0||R_w)>

    together with the equivalent lower bound d<S_R> >= -d<D(T_a1||T_a2)> +
    d<D(P_0||R_w)>.  On strictly positive kernels every quantity is finite
    and the bound holds at every step (it saturates: the four terms are tied
    by an exact summation identity, so the margin is a machine-precision
    residual).  Steps with infinite divergences, e.g. the t=0 identity
    kernel, are marked unverifiable.
    """
    if one_step_kernel.source_labels != one_step_kernel.target_labels:
        raise ValueError("rate check needs a kernel on a single state space")
    _check_prior(one_step_kernel, prior)
    if steps < 1:
        raise ValueError("steps must be >= 1")

    levels = {k: [] for k in ("st", "avg_st", "kl_t_t", "kl_p0_r", "avg_sr")}
    current = TransitionKernel.identity(one_step_kernel.source_labels)
    for _ in range(steps + 1):
        fam = averaged_kl_family(current, prior)
        levels["st"].append(shannon_entropy(evolve(prior, current)))
        levels["avg_st"].append(average_transition_entropy(current, prior))
        levels["kl_t_t"].append(fam["kl_t_t"])
        levels["kl_p0_r"].append(fam["kl_p0_r"])
        levels["avg_sr"].append(average_retrodiction_entropy(current, prior))
        current = current.compose(one_step_kernel)
    levels = {k: np.asarray(v) for k, v in levels.items()}

    records = []
    for t in range(steps):
        d_st, ok1 = _delta(levels["st"][t], levels["st"][t + 1])
        d_avg_st, ok2 = _delta(levels["avg_st"][t], levels["avg_st"][t + 1])
        d_tt, ok3 = _delta(levels["kl_t_t"][t], levels["kl_t_t"][t + 1])
        d_p0r, ok4 = _delta(levels["kl_p0_r"][t], levels["kl_p0_r"][t + 1])
        d_sr, _ = _delta(levels["avg_sr"][t], levels["avg_sr"][t + 1])
        verifiable = ok1 and ok2 and ok3 and ok4
        if all(math.isfinite(x) for x in (d_st, d_avg_st, d_tt, d_p0r)):
            rhs = d_avg_st + d_tt - d_p0r
            margin = rhs - d_st
            bound = -d_tt + d_p0r
        else:
            rhs = margin = bound = math.nan
        records.append(
            RateBoundStep(
                step=t,
                lhs=d_st,
                rhs=rhs,
                margin=margin,
                sr_delta=d_sr,
                sr_lower_bound=bound,
                verifiable=verifiable,
                holds=(margin >= -slack) if verifiable else None,
            )
        )
    violations = tuple(r.step for r in records if r.verifiable and not r.holds)
    return RateBoundReport(tuple(records), levels, violations)


# ---------------------------------------------------------------------------
# posterior geometry and chain utilities


def posterior_dispersion(rk: RetrodictionKernel, omega, coordinates: Mapping) -> float:
    """Mean squared pairwise spread of the posterior on embedded states:
    sum_{a1,a2} R(a1|w) R(a2|w) |x(a1) - x(a2)|^2, i.e. twice the posterior
    variance in one dimension."""
    row = rk.row_distribution(omega).mass
    try:
        points = np.atleast_2d(np.array([coordinates[a] for a in rk.source_labels], dtype=float))
    except KeyError as exc:
        raise ValueError(f"missing coordinate for state {exc.args[0]!r}") from None
    if points.shape[0] == 1 and len(rk.source_labels) > 1:
        points = points.T
    sq = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    return float(row @ sq @ row)


def stationary_distribution(
    kernel: TransitionKernel, tol: float = 1e-14, max_iter: int = 200_000
) -> DiscreteDistribution:
    """Stationary distribution by power iteration to ``tol`` (L1)."""
    if kernel.source_labels != kernel.target_labels:
        raise ValueError("stationary distribution needs a single state space")
    pi = np.full(kernel.n_source, 1.0 / kernel.n_source)
    for _ in range(max_iter):
        nxt = pi @ kernel.rows
        if np.abs(nxt - pi).sum() < tol:
            return DiscreteDistribution(kernel.source_labels, nxt)
        pi = nxt
    raise RuntimeError(f"power iteration did not reach {tol} in {max_iter} steps")


def random_system(
    n_states: int, rng: np.random.Generator | int, concentration: float = 1.0
) -> tuple[TransitionKernel, DiscreteDistribution]:
    """Random strictly positive kernel and prior (Dirichlet rows)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    labels = tuple(range(n_states))
    rows = rng.dirichlet(np.full(n_states, concentration), size=n_states)
    prior = rng.dirichlet(np.full(n_states, concentration))
    return TransitionKernel(labels, labels, rows), DiscreteDistribution(labels, prior)
