"""Hermite polynomial chaos by pseudo-spectral projection.

The germs are independent standard normals, so the basis is the tensorised
probabilists' Hermite family normalised to unit norm under the Gaussian weight
and the coefficients are Gauss-Hermite inner products whose weights already
include the normal density.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


class ModelEvaluationError(RuntimeError):
    """A forward model failed at one of the quadrature nodes."""

    def __init__(self, node_index: int, theta: np.ndarray, cause: BaseException):
        self.node_index = node_index
        self.theta = theta
        super().__init__(
            f"forward model failed at quadrature node {node_index} "
            f"(theta={np.array2string(theta, precision=6)}): {cause}"
        )


def total_degree_indices(degree: int, n_germs: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree <= ``degree``, graded, lexicographic within
    a degree (first germ varying slowest)."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.product(range(total + 1), repeat=n_germs):
            if sum(combo) == total:
                out.append(combo)
    # itertools.product yields ascending order; reverse within each degree so
    # that e.g. (1, 0) precedes (0, 1)
    graded = []
    for total in range(degree + 1):
        graded.extend(sorted((c for c in out if sum(c) == total), reverse=True))
    return graded


def hermite_normalized(max_degree: int, xi: np.ndarray) -> np.ndarray:
    """Evaluate He_n(xi)/sqrt(n!) for n = 0..max_degree.

    Returns an array of shape ``xi.shape + (max_degree + 1,)``.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = xi
    # normalised three-term recurrence:
    # psi_{n+1} = (xi psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1)
    for n in range(1, max_degree):
        out[..., n + 1] = (xi * out[..., n] - math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    return out


@dataclass(frozen=True)
class HermiteBasis:
    degree: int
    n_germs: int
    indices: tuple

    @property
    def size(self) -> int:
        return len(self.indices)

    def evaluate(self, xi) -> np.ndarray:
        """Evaluate every basis function at the points ``xi`` (shape ``(P, n_germs)``).

        Returns a ``(P, D)`` matrix.
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.n_germs:
            raise ValueError(f"expected points with {self.n_germs} coordinates, got {xi.shape[1]}")
        univariate = hermite_normalized(self.degree, xi)  # (P, n_germs, degree+1)
        psi = np.ones((xi.shape[0], self.size))
        for j, multi in enumerate(self.indices):
            for k, order in enumerate(multi):
                if order:
                    psi[:, j] *= univariate[:, k, order]
        return psi


def build_basis(degree: int, n_germs: int) -> HermiteBasis:
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if n_germs < 1:
        raise ValueError("n_germs must be >= 1")
    indices = tuple(total_degree_indices(degree, n_germs))
    assert len(indices) == math.comb(degree + n_germs, degree)
    return HermiteBasis(degree, n_germs, indices)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (P, n_germs)
    weights: np.ndarray  # (P,)
    order: int

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def n_germs(self) -> int:
        return int(self.nodes.shape[1])


def build_quadrature(order: int, n_germs: int) -> QuadratureRule:
    """Tensor Gauss-Hermite rule for the standard normal weight, ``order**n_germs`` points."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if n_germs < 1:
        raise ValueError("n_germs must be >= 1")
    x1, w1 = hermegauss(order)
    w1 = w1 / math.sqrt(2.0 * math.pi)
    nodes = np.array(list(itertools.product(x1, repeat=n_germs)), dtype=float)
    weights = np.array([math.prod(c) for c in itertools.product(w1, repeat=n_germs)])
    weights = weights / weights.sum()
    return QuadratureRule(nodes.reshape(-1, n_germs), weights, order)


@dataclass(frozen=True)
class StochasticResponse:
    """PCE coefficients, one row per model output and one column per basis function."""

    coefficients: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.coefficients[:, 0].copy()

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coefficients[:, 1:] ** 2, axis=1))

    def to_csv(self, path) -> None:
        coeffs = np.atleast_2d(self.coefficients)
        header = ",".join(f"alpha_{j}" for j in range(coeffs.shape[1]))
        np.savetxt(Path(path), coeffs, delimiter=",", header=header, comments="")


def evaluate_model(model, thetas: np.ndarray) -> np.ndarray:
    """Evaluate ``model`` at each row of ``thetas``; batched when the model supports it."""
    batch = getattr(model, "evaluate_batch", None)
    if batch is not None:
        try:
            out = np.asarray(batch(thetas), dtype=float)
        except Exception:
            out = None  # fall back to per-node evaluation to locate the failure
        if out is not None:
            return out.reshape(thetas.shape[0], -1)
    rows = []
    for k, theta in enumerate(thetas):
        try:
            rows.append(np.asarray(model(theta), dtype=float).reshape(-1))
        except Exception as exc:
            raise ModelEvaluationError(k, theta, exc) from exc
    return np.vstack(rows)


def project(model, means, scales, basis: HermiteBasis, quad: QuadratureRule, fixed=None) -> StochasticResponse:
    """Pseudo-spectral projection of ``model`` over the embedded parameters.

    The model is evaluated at ``means + scales * xi_k`` for every quadrature
    node; ``fixed`` values (plain parameters) are appended unchanged.
    """
    means = np.asarray(means, dtype=float).reshape(-1)
    scales = np.asarray(scales, dtype=float).reshape(-1)
    if means.size != scales.size:
        raise ValueError("means and scales must have the same length")
    if means.size != basis.n_germs or quad.n_germs != basis.n_germs:
        raise ValueError(
            f"germ dimension mismatch: {means.size} parameters, basis {basis.n_germs}, "
            f"quadrature {quad.n_germs}"
        )
    if np.any(scales < 0):
        raise ValueError(f"scales must be non-negative, got {scales}")
    thetas = means + scales * quad.nodes
    if fixed is not None:
        fixed = np.asarray(fixed, dtype=float).reshape(-1)
        if fixed.size:
            thetas = np.hstack([thetas, np.broadcast_to(fixed, (thetas.shape[0], fixed.size))])
    values = evaluate_model(model, thetas)  # (P, n_out)
    psi = basis.evaluate(quad.nodes)  # (P, D)
    coeffs = (values * quad.weights[:, None]).T @ psi
    return StochasticResponse(coeffs)


def project_batch(model, means, scales, basis: HermiteBasis, quad: QuadratureRule, fixed=None) -> tuple[np.ndarray, np.ndarray]:
    """Mean and std for many ``(means, scales)`` rows with a single model call.

    ``means`` and ``scales`` have shape ``(N, n_germs)``, ``fixed`` (if any)
    ``(N, n_fixed)``.  Returns two ``(N, n_outputs)`` arrays.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    scales = np.atleast_2d(np.asarray(scales, dtype=float))
    if means.shape != scales.shape:
        raise ValueError("means and scales must have the same shape")
    if means.shape[1] != basis.n_germs or quad.n_germs != basis.n_germs:
        raise ValueError("germ dimension mismatch")
    if np.any(scales < 0):
        raise ValueError("scales must be non-negative")
    n, p = means.shape[0], quad.size
    thetas = (means[:, None, :] + scales[:, None, :] * quad.nodes[None, :, :]).reshape(n * p, -1)
    if fixed is not None:
        fixed = np.atleast_2d(np.asarray(fixed, dtype=float))
        if fixed.size:
            thetas = np.hstack([thetas, np.repeat(fixed, p, axis=0)])
    values = evaluate_model(model, thetas).reshape(n, p, -1)
    psi = basis.evaluate(quad.nodes)
    coeffs = np.einsum("npo,p,pj->noj", values, quad.weights, psi)
    return coeffs[:, :, 0], np.sqrt(np.sum(coeffs[:, :, 1:] ** 2, axis=2))


def moments(resp: StochasticResponse) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation of every output."""
    return resp.mean, resp.std
