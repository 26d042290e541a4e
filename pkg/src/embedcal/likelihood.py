"""Moment-matching log-likelihoods for stochastic (embedded) model responses.

All four formulations take the predicted mean ``mu_h`` and standard deviation
``sigma_h`` of every output plus the prescribed homoscedastic noise ``sigma_N``:

* ``abc``  -- noisy moment matching, means against the noise model and
  ``sigma_h + sigma_N`` against ``gamma * |mu_h - y|`` with tolerance ``epsilon``;
* ``in``   -- independent normal with variance ``sigma_h**2 + sigma_N**2``;
* ``gmm``  -- sampling distributions (normal mean, chi-square variance) of the
  residuals pooled into an equal-weight Gaussian mixture;
* ``rgmm`` -- the same on residuals standardised by the predictive std.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from embedcal import pce
from embedcal.core import InferenceProblem, split_sample

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MomentSummary:
    mu: np.ndarray
    sigma: np.ndarray
    noise_std: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must have the same length")
        if mu.size == 0:
            raise ValueError("empty moment summary")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("moments must be finite")
        if np.any(sigma < 0):
            raise ValueError("predicted standard deviations must be >= 0")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def n_y(self) -> int:
        return int(self.mu.size)


def _check_y(ms: MomentSummary, y) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != ms.n_y:
        raise ValueError(f"{y.size} observations for {ms.n_y} predicted moments")
    return y


def log_abc(ms: MomentSummary, y, epsilon: float, gamma: float = math.sqrt(math.pi / 2)) -> float:
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    s_n = ms.noise_std
    if not s_n > 0:
        raise ValueError("the ABC likelihood is undefined for a zero noise level")
    y = _check_y(ms, y)
    resid = ms.mu - y
    n_y = ms.n_y
    spread = ms.sigma + s_n - gamma * np.abs(resid)
    return float(
        -0.5 * n_y * math.log(2.0 * math.pi * epsilon**2 * s_n**2)
        - np.sum(resid**2) / (2.0 * s_n**2)
        - np.sum(spread**2) / (2.0 * epsilon**2)
    )


def log_in(ms: MomentSummary, y) -> float:
    y = _check_y(ms, y)
    var = ms.sigma**2 + ms.noise_std**2
    if np.any(var <= 0):
        raise ValueError("zero total predictive variance at some observation")
    resid = y - ms.mu
    return float(-0.5 * ms.n_y * LOG_2PI - 0.5 * np.sum(np.log(var)) - np.sum(resid**2 / (2.0 * var)))


@dataclass(frozen=True)
class ResidualStats:
    u: np.ndarray
    u_r: np.ndarray
    u_mean: float
    u_r_mean: float
    s2_u: float
    s2_u_r: float
    var_f: float
    var_f_r: float = 1.0


def residual_stats(ms: MomentSummary, y, center: bool = False) -> ResidualStats:
    """Raw and standardised residual statistics.

    The second moments are taken about zero (the mixture mean) unless
    ``center`` is set, in which case the residual mean is subtracted first.
    """
    y = _check_y(ms, y)
    n_y = ms.n_y
    if n_y < 2:
        raise ValueError("residual statistics need at least two observations")
    total_var = ms.sigma**2 + ms.noise_std**2
    if np.any(total_var <= 0):
        raise ValueError("zero total predictive variance at some observation")
    u = y - ms.mu
    u_r = u / np.sqrt(total_var)
    u_mean = float(np.mean(u))
    u_r_mean = float(np.mean(u_r))
    if center:
        s2_u = float(np.sum((u - u_mean) ** 2) / (n_y - 1))
        s2_u_r = float(np.sum((u_r - u_r_mean) ** 2) / (n_y - 1))
    else:
        s2_u = float(np.sum(u**2) / (n_y - 1))
        s2_u_r = float(np.sum(u_r**2) / (n_y - 1))
    var_f = float(np.mean(ms.sigma**2) + ms.noise_std**2)
    return ResidualStats(u, u_r, u_mean, u_r_mean, s2_u, s2_u_r, var_f, 1.0)


def _global_moment_loglik(mean: float, s2: float, var_f: float, n_y: int) -> float:
    if n_y < 2:
        raise ValueError("global moment matching needs at least two observations")
    if not var_f > 0:
        raise ValueError("mixture variance must be > 0")
    if not s2 > 0:
        return -math.inf
    first = -0.5 * math.log(2.0 * math.pi * var_f / n_y) - n_y * mean**2 / (2.0 * var_f)
    return first + _chi2_term(n_y * s2 / var_f, n_y - 1)


def _chi2_term(x: float, dof: int) -> float:
    # log chi-square density, written out as the likelihood defines it
    half = 0.5 * dof
    return -half * math.log(2.0) - float(gammaln(half)) - 0.5 * x + (half - 1.0) * math.log(x)


def log_gmm(stats: ResidualStats, n_y: int) -> float:
    return _global_moment_loglik(stats.u_mean, stats.s2_u, stats.var_f, n_y)


def log_rgmm(stats: ResidualStats, n_y: int) -> float:
    return _global_moment_loglik(stats.u_r_mean, stats.s2_u_r, stats.var_f_r, n_y)


def gmm_terms(stats: ResidualStats, n_y: int, relative: bool = False) -> tuple[float, float]:
    """The mean-matching and variance-matching parts ``(L1, L2)`` separately."""
    mean, s2, var_f = (
        (stats.u_r_mean, stats.s2_u_r, stats.var_f_r) if relative else (stats.u_mean, stats.s2_u, stats.var_f)
    )
    first = -0.5 * math.log(2.0 * math.pi * var_f / n_y) - n_y * mean**2 / (2.0 * var_f)
    second = _chi2_term(n_y * s2 / var_f, n_y - 1) if s2 > 0 else -math.inf
    return first, second


def evaluate(kind: str, ms: MomentSummary, y, epsilon=None, gamma=math.sqrt(math.pi / 2), center=False) -> float:
    kind = kind.lower()
    if kind == "abc":
        return log_abc(ms, y, epsilon, gamma)
    if kind == "in":
        return log_in(ms, y)
    if kind in ("gmm", "rgmm"):
        stats = residual_stats(ms, y, center=center)
        return log_gmm(stats, ms.n_y) if kind == "gmm" else log_rgmm(stats, ms.n_y)
    raise ValueError(f"unknown likelihood kind {kind!r}")


# --------------------------------------------------------------------------
# problem-level dispatch
# --------------------------------------------------------------------------

_RULES: dict = {}


def _rules(degree: int, order: int, n_germs: int):
    key = (degree, order, n_germs)
    if key not in _RULES:
        _RULES[key] = (pce.build_basis(degree, n_germs), pce.build_quadrature(order, n_germs))
    return _RULES[key]


def predictive_moments(problem: InferenceProblem, sample) -> tuple[np.ndarray, np.ndarray]:
    """Model-only mean and std of every output for a latent sample."""
    means, scales = split_sample(problem, sample)
    plain = problem.plain_values(sample)
    if means.size == 0:
        theta = np.asarray(plain, dtype=float)
        mu = np.asarray(pce.evaluate_model(problem.forward, theta[None, :])[0], dtype=float)
        return mu, np.zeros_like(mu)
    order = problem.quad_order if problem.quad_order is not None else problem.pce_degree + 1
    basis, quad = _rules(problem.pce_degree, order, means.size)
    resp = pce.project(problem.forward, means, scales, basis, quad, fixed=plain)
    return pce.moments(resp)


def log_likelihood(problem: InferenceProblem, sample) -> float:
    """Project, take moments, and evaluate the selected likelihood.

    Samples outside the prior support (e.g. a negative scale) give ``-inf``.
    """
    if not math.isfinite(problem.log_prior(sample)):
        return -math.inf
    obs = problem.observations
    if obs.n_y < 1:
        raise ValueError("no observations")
    spec = problem.likelihood
    if spec.kind in ("gmm", "rgmm") and obs.n_y < 2:
        raise ValueError(f"{spec.kind} needs at least two observations")
    mu, sigma = predictive_moments(problem, sample)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        return -math.inf
    ms = MomentSummary(mu, sigma, obs.noise_std)
    return evaluate(spec.kind, ms, obs.y, spec.epsilon, spec.gamma, spec.center_variance)


def log_likelihood_batch(problem: InferenceProblem, samples) -> np.ndarray:
    """:func:`log_likelihood` for many samples, projecting all of them in one model call.

    Entries outside the prior support are ``-inf``.  If the batched model call
    fails the samples are evaluated one by one so that a single bad sample
    only costs its own entry.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    out = np.full(samples.shape[0], -math.inf)
    ok = np.array([math.isfinite(problem.log_prior(s)) for s in samples], dtype=bool)
    if not ok.any():
        return out
    obs = problem.observations
    spec = problem.likelihood
    if spec.kind in ("gmm", "rgmm") and obs.n_y < 2:
        raise ValueError(f"{spec.kind} needs at least two observations")
    good = samples[ok]
    n_emb = len(problem.embedded)
    means, scales = good[:, 0 : 2 * n_emb : 2], good[:, 1 : 2 * n_emb : 2]
    plain = good[:, 2 * n_emb :]
    try:
        if n_emb == 0:
            mu = pce.evaluate_model(problem.forward, plain)
            sigma = np.zeros_like(mu)
        else:
            order = problem.quad_order if problem.quad_order is not None else problem.pce_degree + 1
            basis, quad = _rules(problem.pce_degree, order, n_emb)
            mu, sigma = pce.project_batch(problem.forward, means, scales, basis, quad, plain)
    except pce.ModelEvaluationError:
        vals = []
        for s in good:
            try:
                vals.append(log_likelihood(problem, s))
            except pce.ModelEvaluationError:
                vals.append(-math.inf)
        out[ok] = vals
        return out
    vals = np.empty(good.shape[0])
    for i in range(good.shape[0]):
        if not (np.all(np.isfinite(mu[i])) and np.all(np.isfinite(sigma[i]))):
            vals[i] = -math.inf
            continue
        ms = MomentSummary(mu[i], sigma[i], obs.noise_std)
        vals[i] = evaluate(spec.kind, ms, obs.y, spec.epsilon, spec.gamma, spec.center_variance)
    out[ok] = vals
    return out
