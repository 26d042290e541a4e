"""YAML experiment configuration.

A config names the experiment, the latent parameters with their priors, the
likelihoods to run and the sampler settings.  Unknown top-level keys are
rejected so that typos do not silently fall back to defaults.  Example::

    experiment: linear
    seed: 0
    likelihoods: [abc, in, gmm, rgmm]
    likelihood: {epsilon: 0.05}
    parameters:
      - name: t
        mean_prior: {kind: normal, mean: 4.5, std: 0.5}
        scale_prior: {kind: lognormal, log_mean: -1.0, log_std: 0.5}
    sampler: {n_walkers: 10, burn_in: 200, max_samples: 10000}
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from embedcal.core import (
    LIKELIHOOD_KINDS,
    EmbeddedParameter,
    LikelihoodSpec,
    PlainParameter,
    distribution_from_dict,
)
from embedcal.sampler import SamplerConfig

EXPERIMENTS = (
    "linear",
    "linear_noise_scan",
    "linear_offset_scan",
    "linear_outlier_scan",
    "linear_seed_replication",
    "thermal",
)

_TOP_KEYS = {
    "experiment", "seed", "seeds", "likelihoods", "likelihood", "parameters", "pce",
    "observations", "data", "sampler", "scan", "qoi", "model", "output",
}

LINEAR_DEFAULTS: dict = {
    "parameters": [
        {
            "name": "t",
            "mean_prior": {"kind": "normal", "mean": 4.5, "std": 0.5},
            "scale_prior": {"kind": "lognormal", "log_mean": -1.0, "log_std": 0.5},
        }
    ],
    "pce": {"degree": 1, "quad_order": 2},
    "observations": {"path": None, "noise_std": 0.01},
    "qoi": {"x": 1.0, "n_P": 1000, "mode": "full_posterior"},
}

THERMAL_DEFAULTS: dict = {
    "parameters": [
        {
            "name": "alpha",
            "mean_prior": {"kind": "normal", "mean": 1.0e-6, "std": 1.0e-7},
            "scale_prior": {"kind": "lognormal", "log_mean": -16.0, "log_std": 0.1},
        }
    ],
    "pce": {"degree": 2, "quad_order": 3},
    "observations": {"path": None, "noise_std": 0.2},
    "model": {"n": 20, "depth": 1.0},
    "sampler": {"burn_in": 250},
    "qoi": {"horizon_minutes": 5000.0, "n_P": 1000, "mode": "full_posterior"},
}

SCAN_DEFAULTS = {
    "linear_noise_scan": {"kind": "noise", "values": {"logspace": [0.001, 10.0, 20]}},
    "linear_offset_scan": {"kind": "offset", "values": {"linspace": [0.0, 1.0, 11]}},
    "linear_outlier_scan": {"kind": "outliers", "values": {"linspace": [0.0, 2.0, 21]}},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def scan_values(spec) -> list[float]:
    """Expand ``{"logspace": [lo, hi, n]}``, ``{"linspace": [...]}`` or a plain list."""
    import numpy as np

    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict) and "logspace" in spec:
        lo, hi, n = spec["logspace"]
        return [float(v) for v in np.geomspace(float(lo), float(hi), int(n))]
    if isinstance(spec, dict) and "linspace" in spec:
        lo, hi, n = spec["linspace"]
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    raise ConfigError(f"cannot read scan values from {spec!r}")


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict
    seed: int = 0
    seeds: list = field(default_factory=list)
    likelihoods: list = field(default_factory=lambda: list(LIKELIHOOD_KINDS))
    source: str | None = None

    # ---- derived views -------------------------------------------------
    @property
    def is_thermal(self) -> bool:
        return self.experiment == "thermal"

    def parameters(self) -> tuple:
        out = []
        for entry in self.raw["parameters"]:
            if "name" not in entry:
                raise ConfigError("every parameter needs a name")
            if "prior" in entry:
                out.append(PlainParameter(entry["name"], distribution_from_dict(entry["prior"])))
            else:
                try:
                    out.append(
                        EmbeddedParameter(
                            entry["name"],
                            distribution_from_dict(entry["mean_prior"]),
                            distribution_from_dict(entry["scale_prior"]),
                        )
                    )
                except KeyError as exc:
                    raise ConfigError(f"parameter {entry['name']!r} is missing {exc}") from exc
        return tuple(out)

    def likelihood(self, kind: str) -> LikelihoodSpec:
        opts = self.raw.get("likelihood", {}) or {}
        eps = opts.get("epsilon")
        if kind == "abc" and eps is None:
            raise ConfigError("the ABC likelihood needs likelihood.epsilon in the config")
        return LikelihoodSpec(
            kind,
            epsilon=float(eps) if (kind == "abc") else None,
            gamma=float(opts.get("gamma", math.sqrt(math.pi / 2))),
            center_variance=bool(opts.get("center_variance", False)),
        )

    def sampler(self, max_samples: int | None = None) -> SamplerConfig:
        opts = dict(self.raw.get("sampler", {}) or {})
        if max_samples is not None:
            opts["max_samples"] = int(max_samples)
        allowed = set(SamplerConfig.__dataclass_fields__)
        bad = set(opts) - allowed
        if bad:
            raise ConfigError(f"unknown sampler option(s) {sorted(bad)}")
        if opts.get("ess_target") is not None:
            opts["ess_target"] = float(opts["ess_target"])
        return SamplerConfig(**opts)

    @property
    def pce_degree(self) -> int:
        return int(self.raw["pce"]["degree"])

    @property
    def quad_order(self) -> int | None:
        q = self.raw["pce"].get("quad_order")
        return None if q is None else int(q)

    @property
    def noise_std(self) -> float:
        return float(self.raw["observations"]["noise_std"])

    @property
    def observations_path(self) -> str | None:
        return self.raw["observations"].get("path")

    def scan(self) -> tuple[str, list[float]]:
        sc = self.raw.get("scan") or {}
        kind = sc.get("kind")
        if kind not in ("noise", "offset", "outliers"):
            raise ConfigError(f"scan.kind must be noise, offset or outliers, got {kind!r}")
        return kind, scan_values(sc.get("values"))

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def load_config(source: str | Path | dict | None = None, experiment: str | None = None) -> ExperimentConfig:
    """Read a YAML file (or mapping) and fill in experiment defaults."""
    if source is None:
        data: dict = {}
        src = None
    elif isinstance(source, dict):
        data, src = copy.deepcopy(source), None
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        data = yaml.safe_load(path.read_text()) or {}
        src = str(path)
        if not isinstance(data, dict):
            raise ConfigError("the config must be a mapping")
    bad = set(data) - _TOP_KEYS
    if bad:
        raise ConfigError(f"unknown config key(s) {sorted(bad)}")
    exp = experiment or data.get("experiment", "linear")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
    defaults = THERMAL_DEFAULTS if exp == "thermal" else LINEAR_DEFAULTS
    # problems always provide a batched posterior, so sample half-ensembles at once
    base = _merge(defaults, {"likelihood": {"epsilon": 0.05}, "sampler": {"vectorized": True}, "data": {}})
    if exp in SCAN_DEFAULTS:
        base["scan"] = copy.deepcopy(SCAN_DEFAULTS[exp])
    # parameter lists are replaced, not merged
    merged = _merge(base, data)
    merged["experiment"] = exp
    likelihoods = [str(k).lower() for k in merged.get("likelihoods", LIKELIHOOD_KINDS)]
    for k in likelihoods:
        if k not in LIKELIHOOD_KINDS:
            raise ConfigError(f"unknown likelihood {k!r}")
    merged["likelihoods"] = likelihoods
    seed = int(merged.get("seed", 0))
    merged["seed"] = seed
    seeds = [int(s) for s in merged.get("seeds", [])]
    if exp == "linear_seed_replication" and not seeds:
        seeds = list(range(20))
        merged["seeds"] = seeds
    cfg = ExperimentConfig(exp, merged, seed, seeds, likelihoods, src)
    cfg.parameters()  # validate priors early
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.echo(), sort_keys=True)


def as_plain(value: Any) -> Any:
    """Convert tuples and numpy scalars for YAML/JSON output."""
    import numpy as np

    if isinstance(value, dict):
        return {k: as_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
