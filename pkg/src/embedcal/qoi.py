"""Push-forward of posterior samples to quantities of interest.

For every retained posterior draw the embedded model is projected onto the
chaos basis again, this time with the QoI model ``g``, giving a predictive
mean ``mu`` and standard deviation ``sigma``.  A realisation of the QoI is
then drawn from ``N(mu, sigma**2)``; this is exact for linear models and an
approximation otherwise.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embedcal import pce
from embedcal.core import InferenceProblem
from embedcal.sampler import EnsembleChain

Z_CRITICAL = 1.96
MODES = ("full_posterior", "map_estimate")


@dataclass(frozen=True)
class QoIDistribution:
    name: str
    samples: np.ndarray
    n_P: int
    mode: str = "full_posterior"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if samples.size < 1 or self.n_P < 1:
            raise ValueError("a QoI distribution needs at least one sample")
        object.__setattr__(self, "samples", samples)

    def summary(self) -> dict:
        s = self.samples
        q05, q50, q95 = np.quantile(s, [0.05, 0.5, 0.95])
        return {
            "mean": float(np.mean(s)),
            "std": float(np.std(s, ddof=1)) if s.size > 1 else 0.0,
            "q05": float(q05),
            "q50": float(q50),
            "q95": float(q95),
            "n": int(s.size),
        }


def z_value(mu: float, sigma: float, y_obs: float) -> float:
    """``|mu - y_obs| / sigma``."""
    if sigma < 0 or math.isnan(sigma):
        raise ValueError("sigma must be >= 0")
    diff = abs(mu - y_obs)
    if sigma == 0:
        if diff == 0:
            return 0.0
        raise ValueError("z-value undefined for a zero predictive std and a non-zero residual")
    return diff / sigma


def thin_indices(n_available: int, n_P: int) -> np.ndarray:
    """``n_P`` evenly spaced indices into ``range(n_available)``."""
    if n_available < 1:
        raise ValueError("empty chain")
    if not 1 <= n_P <= n_available:
        raise ValueError(f"n_P={n_P} must lie in [1, {n_available}]")
    return np.unique(np.linspace(0, n_available - 1, n_P).round().astype(int))


def posterior_draws(chain: EnsembleChain, n_P: int, mode: str = "full_posterior", discard: int | None = None) -> np.ndarray:
    """Thinned post-burn-in samples, or the single stored sample of highest density."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    flat = chain.samples(discard=discard, flat=True)
    if flat.shape[0] == 0:
        raise ValueError("empty chain")
    if mode == "map_estimate":
        lps = chain.log_probs(discard=discard, flat=True)
        return flat[int(np.argmax(lps))][None, :]
    return flat[thin_indices(flat.shape[0], n_P)]


def predictive_batch(problem: InferenceProblem, model, draws: np.ndarray, degree: int | None = None, quad_order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """PCE mean and std of ``model`` for every latent draw, evaluating all nodes at once.

    Returns arrays of shape ``(n_draws, n_outputs)``.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    n_emb = len(problem.embedded)
    if n_emb == 0:
        vals = pce.evaluate_model(model, draws)
        return vals, np.zeros_like(vals)
    degree = problem.pce_degree if degree is None else degree
    if quad_order is None:
        quad_order = problem.quad_order if problem.quad_order is not None else degree + 1
    basis = pce.build_basis(degree, n_emb)
    quad = pce.build_quadrature(quad_order, n_emb)
    means, scales = draws[:, 0 : 2 * n_emb : 2], draws[:, 1 : 2 * n_emb : 2]
    mu, sigma = pce.project_batch(model, means, scales, basis, quad, draws[:, 2 * n_emb :])
    return mu, sigma


def push_forward(
    chain: EnsembleChain,
    problem: InferenceProblem,
    model,
    n_P: int = 1000,
    mode: str = "full_posterior",
    y_obs: float | None = None,
    output_index: int = 0,
    extra_std: float = 0.0,
    seed: int | None = None,
    discard: int | None = None,
    degree: int | None = None,
    quad_order: int | None = None,
) -> dict[str, QoIDistribution]:
    """QoI distributions ``value``, ``mu``, ``sigma`` and, given ``y_obs``, ``z``.

    ``extra_std`` is added in quadrature to the predictive std, e.g. the
    measurement noise when the QoI is an observable.  In MAP mode ``mu`` and
    ``sigma`` are single points and ``value`` holds ``n_P`` realisations.
    """
    if chain.n_iterations == 0:
        raise ValueError("empty chain")
    draws = posterior_draws(chain, n_P, mode, discard)
    mu, sigma = predictive_batch(problem, model, draws, degree, quad_order)
    mu = mu[:, output_index]
    sigma = np.sqrt(sigma[:, output_index] ** 2 + extra_std**2)
    rng = np.random.Generator(np.random.PCG64(seed))
    if mode == "map_estimate":
        values = rng.normal(mu[0], sigma[0], n_P) if sigma[0] > 0 else np.full(n_P, mu[0])
    else:
        values = rng.normal(mu, sigma)
    prov = {"mode": mode, "n_draws": int(draws.shape[0]), "seed": seed, "extra_std": extra_std}
    out = {
        "value": QoIDistribution("value", values, n_P, mode, prov),
        "mu": QoIDistribution("mu", mu, n_P, mode, prov),
        "sigma": QoIDistribution("sigma", sigma, n_P, mode, prov),
    }
    if y_obs is not None:
        z = np.array([z_value(m, s, y_obs) for m, s in zip(mu, sigma)])
        out["z"] = QoIDistribution("z", z, n_P, mode, {**prov, "y_obs": float(y_obs)})
    return out


def cumulative_heat_qoi(
    chain: EnsembleChain,
    problem: InferenceProblem,
    q_true: float | None = None,
    horizon_minutes: float = 5000.0,
    n_P: int = 1000,
    mode: str = "full_posterior",
    n: int = 20,
    depth: float = 1.0,
    boundary=None,
    seed: int | None = None,
    degree: int | None = None,
) -> dict[str, QoIDistribution]:
    """Cumulative heat into the left half at ``horizon_minutes`` for every draw."""
    from embedcal.models.thermal import ThermalForward

    model = ThermalForward(sample_minutes=[horizon_minutes], n=n, output="heat", depth=depth, boundary=boundary)
    return push_forward(chain, problem, model, n_P, mode, y_obs=q_true, seed=seed, degree=degree)


def summary_dict(qois: dict[str, QoIDistribution]) -> dict:
    out = {name: q.summary() for name, q in qois.items()}
    if "z" in qois:
        z = qois["z"].samples
        out["z_fraction_below_1.96"] = float(np.mean(z < Z_CRITICAL))
    return out


def write_qoi_csv(path, qois: dict[str, QoIDistribution]) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("qoi,index,value\n")
        for name, q in qois.items():
            for i, v in enumerate(q.samples):
                fh.write(f"{name},{i},{float(v)!r}\n")
    return path


def write_summary_json(path, qois: dict[str, QoIDistribution], extra: dict | None = None) -> Path:
    data = summary_dict(qois)
    if extra:
        data = {**extra, **data}
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def replace_forward(problem: InferenceProblem, model) -> InferenceProblem:
    return dataclasses.replace(problem, forward=model)
