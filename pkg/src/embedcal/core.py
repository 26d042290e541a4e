"""Domain types shared by the calibration pipeline.

A calibration problem is a set of latent parameters, a forward model, a set of
observations with a prescribed noise level and the choice of likelihood.  Each
*embedded* parameter contributes two latent coordinates: its deterministic mean
and the standard deviation of the zero-mean Gaussian perturbation added to it::

    theta_tilde = theta_m + delta,   delta ~ N(0, theta_b**2)

Sample vectors are laid out as ``(m_1, b_1, m_2, b_2, ..., plain...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

LIKELIHOOD_KINDS = ("abc", "in", "gmm", "rgmm")


# --------------------------------------------------------------------------
# distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"Normal std must be > 0, got {self.std}")

    def logpdf(self, x: float) -> float:
        z = (x - self.mean) / self.std
        return -0.5 * z * z - math.log(self.std) - LOG_SQRT_2PI

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mean, self.std, size)

    def support_contains(self, x: float) -> bool:
        return math.isfinite(x)


@dataclass(frozen=True)
class LogNormal:
    """Log-normal law: ``log(x) ~ N(log_mean, log_std**2)``."""

    log_mean: float
    log_std: float

    def __post_init__(self):
        if not self.log_std > 0:
            raise ValueError(f"LogNormal log_std must be > 0, got {self.log_std}")

    def logpdf(self, x: float) -> float:
        if not x > 0:
            return -math.inf
        lx = math.log(x)
        z = (lx - self.log_mean) / self.log_std
        return -0.5 * z * z - math.log(self.log_std) - lx - LOG_SQRT_2PI

    def sample(self, rng: np.random.Generator, size=None):
        return rng.lognormal(self.log_mean, self.log_std, size)

    def support_contains(self, x: float) -> bool:
        return x > 0 and math.isfinite(x)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"Uniform requires low < high, got [{self.low}, {self.high}]")

    def logpdf(self, x: float) -> float:
        if self.low <= x <= self.high:
            return -math.log(self.high - self.low)
        return -math.inf

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size)

    def support_contains(self, x: float) -> bool:
        return self.low <= x <= self.high


Distribution1D = Normal | LogNormal | Uniform


def distribution_from_dict(spec: Mapping[str, Any]) -> Distribution1D:
    """Build a distribution from a config mapping such as
    ``{"kind": "normal", "mean": 4.5, "std": 0.5}``."""
    kind = str(spec.get("kind", "")).lower()
    if kind == "normal":
        return Normal(float(spec["mean"]), float(spec["std"]))
    if kind == "lognormal":
        return LogNormal(float(spec["log_mean"]), float(spec["log_std"]))
    if kind == "uniform":
        return Uniform(float(spec["low"]), float(spec["high"]))
    raise ValueError(f"unknown distribution kind {spec.get('kind')!r}")


def distribution_to_dict(dist: Distribution1D) -> dict:
    if isinstance(dist, Normal):
        return {"kind": "normal", "mean": dist.mean, "std": dist.std}
    if isinstance(dist, LogNormal):
        return {"kind": "lognormal", "log_mean": dist.log_mean, "log_std": dist.log_std}
    return {"kind": "uniform", "low": dist.low, "high": dist.high}


def _positive_support(dist: Distribution1D) -> bool:
    if isinstance(dist, LogNormal):
        return True
    if isinstance(dist, Uniform):
        return dist.low >= 0.0
    return False


# --------------------------------------------------------------------------
# parameters and observations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddedParameter:
    """Latent parameter with embedded inadequacy ``N(theta_m, theta_b**2)``."""

    name: str
    mean_prior: Distribution1D
    scale_prior: Distribution1D

    def __post_init__(self):
        if not _positive_support(self.scale_prior):
            raise ValueError(
                f"scale prior of {self.name!r} must have strictly positive support"
            )


@dataclass(frozen=True)
class PlainParameter:
    """Deterministic latent parameter without an inadequacy term."""

    name: str
    prior: Distribution1D


Parameter = EmbeddedParameter | PlainParameter


@dataclass(frozen=True)
class ObservationSet:
    x: np.ndarray
    y: np.ndarray
    noise_std: float
    # optional per-observation tag, e.g. the sensor a reading came from
    labels: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.size != y.size:
            raise ValueError(f"x and y lengths differ ({x.size} != {y.size})")
        if y.size < 1:
            raise ValueError("an observation set needs at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("observations must be finite")
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise ValueError(f"noise_std must be finite and >= 0, got {self.noise_std}")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != y.shape:
                raise ValueError("labels must match the observation vector")
            object.__setattr__(self, "labels", labels)

    @property
    def n_y(self) -> int:
        return int(self.y.size)

    def with_noise(self, noise_std: float) -> "ObservationSet":
        return ObservationSet(self.x, self.y, noise_std, self.labels)


@dataclass(frozen=True)
class LikelihoodSpec:
    """Choice of likelihood.  ``epsilon`` and ``gamma`` only apply to ABC.

    ``center_variance`` switches the GMM/RGMM second moment from the
    zero-centred estimator ``sum(u**2)/(n-1)`` to the usual sample variance
    about the residual mean.
    """

    kind: str
    epsilon: float | None = None
    gamma: float = math.sqrt(math.pi / 2.0)
    center_variance: bool = False

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in LIKELIHOOD_KINDS:
            raise ValueError(f"unknown likelihood kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "abc":
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError("ABC likelihood requires epsilon > 0")
            if not self.gamma > 0:
                raise ValueError("ABC likelihood requires gamma > 0")


ForwardModel = Callable[[np.ndarray], np.ndarray]


# --------------------------------------------------------------------------
# the problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InferenceProblem:
    """Everything needed to evaluate the posterior of a calibration run.

    ``forward`` receives the physical parameter vector (embedded parameters
    first, then plain ones, in declaration order) and returns one value per
    observation.  Models may also expose ``evaluate_batch(thetas)`` taking a
    ``(n_points, n_params)`` array, which the PCE projection uses when present.
    """

    parameters: tuple
    forward: Any
    observations: ObservationSet
    likelihood: LikelihoodSpec
    pce_degree: int = 1
    quad_order: int | None = None
    _layout: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        params = tuple(self.parameters)
        object.__setattr__(self, "parameters", params)
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        for p in params:
            if not isinstance(p, (EmbeddedParameter, PlainParameter)):
                raise TypeError(f"unsupported parameter type {type(p).__name__}")
        # embedded parameters must precede plain ones
        seen_plain = False
        for p in params:
            if isinstance(p, PlainParameter):
                seen_plain = True
            elif seen_plain:
                raise ValueError("embedded parameters must be declared before plain ones")
        layout = []
        for p in params:
            if isinstance(p, EmbeddedParameter):
                layout.append((f"{p.name}_m", p.mean_prior, "mean"))
                layout.append((f"{p.name}_b", p.scale_prior, "scale"))
            else:
                layout.append((p.name, p.prior, "plain"))
        object.__setattr__(self, "_layout", tuple(layout))
        if self.pce_degree < 0:
            raise ValueError("pce_degree must be >= 0")

    @property
    def embedded(self) -> tuple:
        return tuple(p for p in self.parameters if isinstance(p, EmbeddedParameter))

    @property
    def plain(self) -> tuple:
        return tuple(p for p in self.parameters if isinstance(p, PlainParameter))

    @property
    def dim(self) -> int:
        return len(self._layout)

    @property
    def names(self) -> list[str]:
        return [entry[0] for entry in self._layout]

    @property
    def priors(self) -> list:
        return [entry[1] for entry in self._layout]

    def log_prior(self, sample) -> float:
        return log_prior(self, sample)

    def split_sample(self, sample):
        return split_sample(self, sample)

    def plain_values(self, sample) -> np.ndarray:
        sample = _checked_sample(self, sample)
        return sample[2 * len(self.embedded):]

    def log_likelihood(self, sample) -> float:
        from embedcal.likelihood import log_likelihood

        return log_likelihood(self, sample)

    def log_posterior(self, sample) -> float:
        lp = self.log_prior(sample)
        if not math.isfinite(lp):
            return -math.inf
        from embedcal.pce import ModelEvaluationError

        try:
            ll = self.log_likelihood(sample)
        except ModelEvaluationError:
            return -math.inf
        if math.isnan(ll):
            return -math.inf
        return lp + ll

    def log_posterior_batch(self, samples) -> np.ndarray:
        """:meth:`log_posterior` for every row, with one batched model call."""
        from embedcal.likelihood import log_likelihood_batch

        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        lp = np.array([self.log_prior(s) for s in samples])
        ll = log_likelihood_batch(self, samples)
        out = lp + ll
        out[~np.isfinite(lp) | np.isnan(out)] = -math.inf
        return out

    def sample_prior(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([float(dist.sample(rng)) for dist in self.priors])

    def with_likelihood(self, likelihood: LikelihoodSpec) -> "InferenceProblem":
        return InferenceProblem(
            self.parameters, self.forward, self.observations, likelihood,
            self.pce_degree, self.quad_order,
        )

    def with_observations(self, observations: ObservationSet) -> "InferenceProblem":
        return InferenceProblem(
            self.parameters, self.forward, observations, self.likelihood,
            self.pce_degree, self.quad_order,
        )


def _checked_sample(problem: InferenceProblem, sample) -> np.ndarray:
    sample = np.asarray(sample, dtype=float).reshape(-1)
    if sample.size != problem.dim:
        raise ValueError(
            f"sample has {sample.size} entries but the problem layout needs {problem.dim}"
        )
    return sample


def log_prior(problem: InferenceProblem, sample) -> float:
    """Sum of the component log-densities; ``-inf`` outside the support."""
    sample = _checked_sample(problem, sample)
    total = 0.0
    for value, dist in zip(sample, problem.priors):
        lp = dist.logpdf(float(value))
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total


def split_sample(problem: InferenceProblem, sample) -> tuple[np.ndarray, np.ndarray]:
    """Return the (means, scales) of the embedded parameters."""
    sample = _checked_sample(problem, sample)
    n = len(problem.embedded)
    head = sample[: 2 * n]
    return head[0::2].copy(), head[1::2].copy()


def interleave(means: Sequence[float], scales: Sequence[float], plain: Sequence[float] = ()) -> np.ndarray:
    """Inverse of :func:`split_sample`."""
    means = np.asarray(means, dtype=float).reshape(-1)
    scales = np.asarray(scales, dtype=float).reshape(-1)
    if means.size != scales.size:
        raise ValueError("means and scales must have the same length")
    out = np.empty(2 * means.size)
    out[0::2] = means
    out[1::2] = scales
    return np.concatenate([out, np.asarray(plain, dtype=float).reshape(-1)])
