"""Affine-invariant ensemble MCMC with an effective-sample-size stopping rule.

The ensemble is advanced with the Goodman & Weare stretch move, updating the
two halves of the ensemble in turn.  Every ``batch`` iterations the integrated
autocorrelation time of each parameter is estimated on the post burn-in
history and the run stops once ``n * m / tau`` reaches the target for every
parameter, or when ``max_samples`` iterations have been taken.
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gammainc, gammaln

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# stopping threshold
# --------------------------------------------------------------------------


def chi2_quantile(prob: float, dof: int, tol: float = 1e-10) -> float:
    """Quantile of the chi-square distribution by bisection on its CDF."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0, 1)")
    if dof < 1:
        raise ValueError("dof must be >= 1")
    k = 0.5 * dof
    lo, hi = 0.0, max(1.0, float(dof))
    while gammainc(k, 0.5 * hi) < prob:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if gammainc(k, 0.5 * mid) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ess_threshold(p: int, alpha: float = 0.05, precision: float = 0.15) -> float:
    """Minimum multivariate ESS for a ``1 - alpha`` region of relative precision ``precision``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not precision > 0:
        raise ValueError("precision must be > 0")
    log_const = (2.0 / p) * math.log(2.0) + math.log(math.pi) - (2.0 / p) * (math.log(p) + gammaln(p / 2.0))
    return math.exp(log_const) * chi2_quantile(1.0 - alpha, p) / precision**2


# --------------------------------------------------------------------------
# autocorrelation
# --------------------------------------------------------------------------


def _next_pow_two(n: int) -> int:
    i = 1
    while i < n:
        i <<= 1
    return i


def autocorrelation(series: np.ndarray) -> np.ndarray:
    """Walker-averaged normalised autocorrelation function of ``(n_iter, m)`` data."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    centred = x - x.mean(axis=0)
    size = 2 * _next_pow_two(n)
    f = np.fft.rfft(centred, n=size, axis=0)
    acov = np.fft.irfft(f * np.conjugate(f), axis=0)[:n]
    acf = acov.mean(axis=1)
    if not acf[0] > 0:
        raise ValueError("autocorrelation is undefined for a constant series")
    return acf / acf[0]


def integrated_autocorrelation_time(series, c: float = 5.0, warn: bool = True) -> float:
    """Sokal's windowed estimate of the integrated autocorrelation time.

    ``series`` has shape ``(n_iter, n_walkers)`` (a 1-D array is one walker).
    The window is the smallest ``M`` with ``M >= c * tau(M)``.  Estimates below
    one (anti-correlated chains) are clamped to one.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two iterations")
    if np.ptp(x) == 0:
        raise ValueError("autocorrelation time is undefined for a constant series")
    rho = autocorrelation(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    m = np.arange(taus.size)
    ok = m >= c * taus
    window = int(np.argmax(ok)) if np.any(ok) else taus.size - 1
    tau = float(taus[window])
    if warn and x.shape[0] < 50 * tau:
        log.debug("chain of %d iterations is short for tau=%.1f", x.shape[0], tau)
    return max(tau, 1.0)


# --------------------------------------------------------------------------
# stretch move
# --------------------------------------------------------------------------


def _evaluate(log_prob: Callable, points: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(log_prob(points), dtype=float).reshape(-1)
    return np.array([log_prob(p) for p in points], dtype=float)


def stretch_move(
    positions: np.ndarray,
    log_probs: np.ndarray,
    log_prob: Callable,
    rng: np.random.Generator,
    a: float = 2.0,
    vectorized: bool = False,
):
    """One full ensemble update; returns ``(positions, log_probs, accepted)``.

    The first half is moved using companions from the second (frozen) half,
    then the second half using the already-updated first half.
    """
    if not a > 1:
        raise ValueError("stretch scale a must be > 1")
    pos = np.array(positions, dtype=float, copy=True)
    lp = np.array(log_probs, dtype=float, copy=True)
    if not np.any(np.isfinite(lp)):
        raise SamplerError(f"log-density is non-finite at every walker: {lp}")
    n_walkers, dim = pos.shape
    accepted = np.zeros(n_walkers, dtype=bool)
    half = n_walkers // 2
    groups = (np.arange(half), np.arange(half, n_walkers))
    for moving, other in (groups, groups[::-1]):
        n = moving.size
        z = ((a - 1.0) * rng.random(n) + 1.0) ** 2 / a
        partners = pos[other[rng.integers(0, other.size, n)]]
        proposal = partners + z[:, None] * (pos[moving] - partners)
        new_lp = _evaluate(log_prob, proposal, vectorized)
        with np.errstate(invalid="ignore"):
            log_ratio = (dim - 1) * np.log(z) + new_lp - lp[moving]
        log_ratio = np.where(np.isnan(log_ratio), -np.inf, log_ratio)
        accept = np.log(rng.random(n)) < log_ratio
        idx = moving[accept]
        pos[idx] = proposal[accept]
        lp[idx] = new_lp[accept]
        accepted[idx] = True
    return pos, lp, accepted


# --------------------------------------------------------------------------
# chains and the driver
# --------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    n_walkers: int = 10
    burn_in: int = 200
    batch: int = 100
    max_samples: int = 10000
    ess_target: float | None = None  # None -> ess_threshold(dim, alpha, precision)
    alpha: float = 0.05
    precision: float = 0.15
    stretch: float = 2.0
    vectorized: bool = False
    max_init_attempts: int = 100

    def target_for(self, dim: int) -> float:
        if self.ess_target is not None:
            return float(self.ess_target)
        return ess_threshold(dim, self.alpha, self.precision)


@dataclass
class EnsembleChain:
    n_walkers: int
    dim: int
    seed: int | None = None
    names: list = field(default_factory=list)
    burn_in: int = 0
    _positions: list = field(default_factory=list, repr=False)
    _log_probs: list = field(default_factory=list, repr=False)
    n_accepted: int = 0
    converged: bool = False
    stop_reason: str = ""
    ess: np.ndarray | None = None
    tau: np.ndarray | None = None
    ess_target: float = math.nan

    def append(self, positions: np.ndarray, log_probs: np.ndarray) -> None:
        self._positions.append(np.array(positions, dtype=float, copy=True))
        self._log_probs.append(np.array(log_probs, dtype=float, copy=True))

    @property
    def n_iterations(self) -> int:
        """Number of stored states, including the initial ensemble."""
        return len(self._positions)

    @property
    def history(self) -> np.ndarray:
        if not self._positions:
            return np.empty((0, self.n_walkers, self.dim))
        return np.stack(self._positions)

    @property
    def log_prob_history(self) -> np.ndarray:
        if not self._log_probs:
            return np.empty((0, self.n_walkers))
        return np.stack(self._log_probs)

    def samples(self, discard: int | None = None, flat: bool = False) -> np.ndarray:
        discard = self.burn_in if discard is None else discard
        h = self.history[discard:]
        return h.reshape(-1, self.dim) if flat else h

    def log_probs(self, discard: int | None = None, flat: bool = False) -> np.ndarray:
        discard = self.burn_in if discard is None else discard
        lp = self.log_prob_history[discard:]
        return lp.reshape(-1) if flat else lp

    @property
    def acceptance_fraction(self) -> float:
        steps = max(self.n_iterations - 1, 0) * self.n_walkers
        return self.n_accepted / steps if steps else math.nan

    def estimate_ess(self, discard: int | None = None):
        post = self.samples(discard)
        taus = np.array([integrated_autocorrelation_time(post[:, :, i]) for i in range(self.dim)])
        return post.shape[0] * self.n_walkers / taus, taus


def initial_ensemble(target, n_walkers: int, rng: np.random.Generator, max_attempts: int = 100):
    """Draw walkers from the prior, redrawing any with a non-finite posterior."""
    pos = np.empty((n_walkers, target.dim))
    lp = np.empty(n_walkers)
    for k in range(n_walkers):
        for _ in range(max_attempts):
            trial = np.asarray(target.sample_prior(rng), dtype=float)
            value = float(target.log_posterior(trial))
            if math.isfinite(value):
                pos[k], lp[k] = trial, value
                break
        else:
            raise SamplerError(
                f"walker {k}: no prior draw with finite posterior in {max_attempts} attempts"
            )
    return pos, lp


def run(target, config: SamplerConfig | None = None, seed: int | None = None,
        initial: np.ndarray | None = None) -> EnsembleChain:
    """Sample ``target`` until the ESS rule or the iteration cap fires.

    ``target`` needs ``dim``, ``log_posterior(x)`` and ``sample_prior(rng)``;
    with ``config.vectorized`` it must also provide ``log_posterior_batch``.
    """
    config = config or SamplerConfig()
    dim = int(target.dim)
    m = int(config.n_walkers)
    if m < 2 * dim:
        raise ValueError(f"need at least 2*dim = {2 * dim} walkers, got {m}")
    if m % 2:
        raise ValueError("the number of walkers must be even")
    rng = np.random.Generator(np.random.PCG64(seed))
    if config.vectorized:
        log_prob = target.log_posterior_batch
    else:
        log_prob = target.log_posterior
    if initial is None:
        pos, lp = initial_ensemble(target, m, rng, config.max_init_attempts)
    else:
        pos = np.array(initial, dtype=float).reshape(m, dim)
        lp = _evaluate(log_prob, pos, config.vectorized)
    if not np.any(np.isfinite(lp)):
        raise SamplerError("log-density is non-finite at every walker")

    target_ess = config.target_for(dim)
    chain = EnsembleChain(m, dim, seed=seed, names=list(getattr(target, "names", [])),
                          burn_in=int(config.burn_in), ess_target=target_ess)
    chain.append(pos, lp)
    iterations = 0
    while True:
        if iterations >= config.max_samples:
            chain.stop_reason = "max_samples"
            break
        n_batch = min(config.batch, config.max_samples - iterations)
        batch_accepts = 0
        for _ in range(n_batch):
            pos, lp, acc = stretch_move(pos, lp, log_prob, rng, config.stretch, config.vectorized)
            batch_accepts += int(acc.sum())
            chain.append(pos, lp)
        iterations += n_batch
        chain.n_accepted += batch_accepts
        if batch_accepts == 0:
            raise SamplerError(
                f"no proposal accepted in {n_batch} iterations (iteration {iterations}); "
                f"current log-densities {lp}"
            )
        n_post = chain.n_iterations - 1 - config.burn_in
        if n_post >= 2 and math.isfinite(target_ess):
            try:
                ess, tau = chain.estimate_ess()
            except ValueError:
                continue
            chain.ess, chain.tau = ess, tau
            if np.all(ess >= target_ess):
                chain.converged = True
                chain.stop_reason = "ess"
                break
    if chain.ess is None and chain.n_iterations - 1 - config.burn_in >= 2:
        try:
            chain.ess, chain.tau = chain.estimate_ess()
        except ValueError:
            pass
    return chain


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

_MAGIC = b"ECHN"
_HEADER = struct.Struct("<4sIQQQ")


def write_chain_csv(chain: EnsembleChain, path) -> None:
    """One row per (iteration, walker) with every parameter and the log-posterior."""
    names = chain.names or [f"p{i}" for i in range(chain.dim)]
    hist = chain.history
    lps = chain.log_prob_history
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "walker", *names, "log_posterior"])
        for it in range(hist.shape[0]):
            for w in range(chain.n_walkers):
                writer.writerow([it, w, *(repr(float(v)) for v in hist[it, w]), repr(float(lps[it, w]))])


def write_chain_binary(chain: EnsembleChain, path) -> None:
    """Little-endian dump.

    Layout: ``b"ECHN"``, uint32 version (1), uint64 n_iterations, uint64
    n_walkers, uint64 dim, then ``n_iterations*n_walkers*dim`` float64 positions
    (C order) followed by ``n_iterations*n_walkers`` float64 log-posteriors.
    """
    hist = chain.history.astype("<f8")
    lps = chain.log_prob_history.astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, hist.shape[0], chain.n_walkers, chain.dim))
        fh.write(hist.tobytes(order="C"))
        fh.write(lps.tobytes(order="C"))


def read_chain_binary(path) -> tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    magic, version, n_it, m, dim = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not an embedcal chain dump")
    off = _HEADER.size
    n_pos = n_it * m * dim
    hist = np.frombuffer(data, dtype="<f8", count=n_pos, offset=off).reshape(n_it, m, dim)
    lps = np.frombuffer(data, dtype="<f8", count=n_it * m, offset=off + 8 * n_pos).reshape(n_it, m)
    return hist.copy(), lps.copy()


def read_chain_csv(path):
    """Inverse of :func:`write_chain_csv`; returns ``(history, log_probs, names)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader]
    names = header[2:-1]
    arr = np.array(rows)
    n_it = int(arr[:, 0].max()) + 1
    m = int(arr[:, 1].max()) + 1
    hist = arr[:, 2:-1].reshape(n_it, m, len(names))
    lps = arr[:, -1].reshape(n_it, m)
    return hist, lps, names


def chain_from_arrays(history: np.ndarray, log_probs: np.ndarray, names=None, burn_in: int = 0) -> EnsembleChain:
    n_it, m, dim = history.shape
    chain = EnsembleChain(m, dim, names=list(names or []), burn_in=burn_in)
    for it in range(n_it):
        chain.append(history[it], log_probs[it])
    return chain
