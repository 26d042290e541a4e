"""Synthetic observation sets for the linear and the thermal studies.

Every generator draws from a Philox counter-based bit generator seeded through
``numpy.random.SeedSequence``, so a given seed yields the same stream on every
platform.  Independent sub-streams are obtained with ``SeedSequence.spawn``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from embedcal.core import ObservationSet
from embedcal.models.thermal import (
    CONCRETE,
    STEEL,
    Material,
    SensorLayout,
    ThermalModel,
    cumulative_heat,
    midline_heat_rate,
    sensor_temperatures,
    solve_transient,
)

LINEAR_VARIANTS = ("none", "offset", "outliers", "noise_scan")


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# linear
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearGenSpec:
    n_points: int = 120
    x_min: float = 0.4
    x_max: float = 1.0
    theta_mean: float = 4.0
    theta_std: float = 1.0
    noise_std: float = 0.01
    variant: str = "none"
    delta_y: float = 0.0
    outlier_range: tuple = (0.6, 0.7)
    # prescribed noise levels for the noise scan; the data itself keeps noise_std
    noise_levels: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.variant not in LINEAR_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")
        if self.theta_std < 0 or self.noise_std < 0:
            raise ValueError("standard deviations must be >= 0")
        object.__setattr__(self, "outlier_range", tuple(float(v) for v in self.outlier_range))
        object.__setattr__(self, "noise_levels", tuple(float(v) for v in self.noise_levels))


def generate_linear(spec: LinearGenSpec) -> ObservationSet:
    """``y_i = theta_i x_i + eps_i`` with a fresh ``theta_i`` per point, plus the variant."""
    rng = make_rng(spec.seed)
    x = np.linspace(spec.x_min, spec.x_max, spec.n_points)
    theta = rng.normal(spec.theta_mean, spec.theta_std, spec.n_points)
    noise = rng.normal(0.0, spec.noise_std, spec.n_points)
    y = theta * x
    if spec.variant == "offset":
        y = y + spec.delta_y
    elif spec.variant == "outliers":
        lo, hi = spec.outlier_range
        y = y - spec.delta_y * outlier_mask(x, lo, hi)
    y = y + noise
    return ObservationSet(x, y, spec.noise_std)


def outlier_mask(x, lo: float = 0.6, hi: float = 0.7) -> np.ndarray:
    # tolerance so that grid points meant to sit on the bounds are included
    x = np.asarray(x, dtype=float)
    tol = 1e-12
    return ((x >= lo - tol) & (x <= hi + tol)).astype(float)


# --------------------------------------------------------------------------
# materials and the external temperature
# --------------------------------------------------------------------------


def steel_fraction(bar_diameter: float = 0.012, area: float = 0.0004) -> float:
    return bar_diameter**2 * 0.25 * math.pi / area


def voigt_mix(f_steel: float, steel: Material = STEEL, concrete: Material = CONCRETE) -> Material:
    """Volume-weighted arithmetic mean of ``rho``, ``c_p`` and ``k``.

    The diffusivity of the mix follows as ``k / (rho c_p)``.
    """
    if not 0.0 <= f_steel <= 1.0:
        raise ValueError("steel fraction must lie in [0, 1]")
    rho = f_steel * steel.rho + (1.0 - f_steel) * concrete.rho
    cp = f_steel * steel.cp + (1.0 - f_steel) * concrete.cp
    k = f_steel * steel.k + (1.0 - f_steel) * concrete.k
    return Material(rho, cp, k / (rho * cp))


@dataclass(frozen=True)
class ExternalTemperatureSpec:
    t0: float = 273.0
    plateau: float = 303.0
    ramp_minutes: float = 29.0
    step_minutes: float = 5.0
    short_std: float = 1.0
    long_std: float = 10.0
    knot_every: int = 5


def _ramp_steps(spec: ExternalTemperatureSpec) -> int:
    # first step at or after the end of the ramp
    return int(math.ceil(spec.ramp_minutes / spec.step_minutes - 1e-12))


def external_temperature_series(
    horizon_minutes: float,
    seed: int | np.random.SeedSequence,
    spec: ExternalTemperatureSpec = ExternalTemperatureSpec(),
) -> tuple[np.ndarray, np.ndarray]:
    """``(times_min, T_ext)`` on the step grid.

    Ramp from ``t0`` to ``plateau`` over ``ramp_minutes``; from the first
    post-ramp step on, ``plateau + s + l`` with i.i.d. short-term ``s`` and a
    long-term ``l`` drawn at every ``knot_every``-th step and linearly
    interpolated in between.
    """
    n_steps = horizon_minutes / spec.step_minutes
    if abs(n_steps - round(n_steps)) > 1e-9 or n_steps < 0:
        raise ValueError("horizon must be a multiple of the step")
    n_steps = int(round(n_steps))
    times = np.arange(n_steps + 1) * spec.step_minutes
    values = spec.t0 + (spec.plateau - spec.t0) * np.clip(times / spec.ramp_minutes, 0.0, 1.0)
    start = _ramp_steps(spec)
    n_post = max(n_steps + 1 - start, 0)
    rng = make_rng(seed)
    short = rng.normal(0.0, spec.short_std, n_post)
    n_knots = n_post // spec.knot_every + 2
    knots = rng.normal(0.0, spec.long_std, n_knots)
    if n_post:
        offs = np.arange(n_post)
        long_term = np.interp(offs, np.arange(n_knots) * spec.knot_every, knots)
        values[start:] = spec.plateau + short + long_term
    return times, values


# --------------------------------------------------------------------------
# thermal
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermalGenSpec:
    n: int = 20
    band: tuple = (0.16, 0.18)
    f_steel: float = 0.283
    output_noise: float = 0.2
    train_minutes: tuple = (20.0, 220.0)
    test_minutes: tuple = (20.0, 270.0)
    horizon_minutes: float = 5000.0
    sample_every: float = 5.0
    depth: float = 1.0
    x_mid: float = 0.2
    external: ExternalTemperatureSpec = field(default_factory=ExternalTemperatureSpec)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "band", tuple(float(v) for v in self.band))
        object.__setattr__(self, "train_minutes", tuple(float(v) for v in self.train_minutes))
        object.__setattr__(self, "test_minutes", tuple(float(v) for v in self.test_minutes))
        if self.test_minutes[1] > self.horizon_minutes:
            raise ValueError("testing window must fit in the full horizon")

    def sample_minutes(self, window) -> np.ndarray:
        lo, hi = window
        return np.arange(lo, hi + 0.5 * self.sample_every, self.sample_every)


@dataclass(frozen=True)
class ThermalTruth:
    times_min: np.ndarray
    external: np.ndarray
    heat_rate: np.ndarray  # W, heat entering the left half
    heat: np.ndarray  # J, cumulative

    def heat_at(self, minutes: float) -> float:
        idx = int(np.argmin(np.abs(self.times_min - minutes)))
        if abs(self.times_min[idx] - minutes) > 1e-9:
            raise ValueError(f"{minutes} min is not on the step grid")
        return float(self.heat[idx])


@dataclass(frozen=True)
class ThermalDataset:
    training: ObservationSet
    testing: ObservationSet
    truth: ThermalTruth
    training_external: np.ndarray
    spec: ThermalGenSpec


def generative_model(spec: ThermalGenSpec) -> ThermalModel:
    rein = voigt_mix(spec.f_steel)
    return ThermalModel.biphasic(CONCRETE, rein, spec.band, n=spec.n, depth=spec.depth, x_mid=spec.x_mid)


def sensor_observations(readings: np.ndarray, minutes: np.ndarray, noise_std: float, labels) -> ObservationSet:
    """Flatten ``(times, sensors)`` readings time-major into an observation set."""
    n_t, n_s = readings.shape
    x = np.repeat(np.asarray(minutes, dtype=float), n_s)
    lab = np.tile(np.asarray(labels), n_t)
    return ObservationSet(x, readings.reshape(-1), noise_std, lab)


def generate_thermal(spec: ThermalGenSpec = ThermalGenSpec()) -> ThermalDataset:
    """Training run and an independent full-horizon run for testing and truth."""
    root = np.random.SeedSequence(int(spec.seed))
    train_ss, test_ss, noise_ss = root.spawn(3)
    model = generative_model(spec)
    layout = model.layout
    dt_min = model.dt / 60.0
    if abs(spec.external.step_minutes - dt_min) > 1e-12:
        raise ValueError("external series step must equal the solver step")
    noise_rng = make_rng(noise_ss)

    # training run
    train_t = spec.sample_minutes(spec.train_minutes)
    _, ext_train = external_temperature_series(spec.train_minutes[1], train_ss, spec.external)
    hist = solve_transient(model, ext_train, spec.train_minutes[1] * 60.0)
    clean = sensor_temperatures(hist, layout, train_t * 60.0)
    train = clean + noise_rng.normal(0.0, spec.output_noise, clean.shape)

    # independent run over the full horizon
    test_t = spec.sample_minutes(spec.test_minutes)
    times_min, ext_full = external_temperature_series(spec.horizon_minutes, test_ss, spec.external)
    hist_full = solve_transient(model, ext_full, spec.horizon_minutes * 60.0)
    clean_test = sensor_temperatures(hist_full, layout, test_t * 60.0)
    test = clean_test + noise_rng.normal(0.0, spec.output_noise, clean_test.shape)
    inflow = -midline_heat_rate(hist_full)
    heat = cumulative_heat(inflow, hist_full.times)

    return ThermalDataset(
        training=sensor_observations(train, train_t, spec.output_noise, layout.labels),
        testing=sensor_observations(test, test_t, spec.output_noise, layout.labels),
        truth=ThermalTruth(times_min, ext_full, inflow, heat),
        training_external=ext_train,
        spec=spec,
    )


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------


def _spec_echo(spec) -> dict:
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (tuple, list)):
            return [clean(x) for x in v]
        return v

    return clean(asdict(spec))


def write_metadata(path, spec, extra: dict | None = None) -> Path:
    meta = {"generator": type(spec).__name__, "seed": spec.seed, "spec": _spec_echo(spec)}
    if extra:
        meta.update(extra)
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def write_observations(path, obs: ObservationSet, x_name: str = "x", spec=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        if obs.labels is None:
            fh.write(f"{x_name},value\n")
            for xv, yv in zip(obs.x, obs.y):
                fh.write(f"{float(xv)!r},{float(yv)!r}\n")
        else:
            fh.write(f"{x_name},sensor,value\n")
            for xv, lab, yv in zip(obs.x, obs.labels, obs.y):
                fh.write(f"{float(xv)!r},{lab},{float(yv)!r}\n")
    if spec is not None:
        write_metadata(path, spec, {"noise_std": obs.noise_std})
    return path


def read_observations(path, noise_std: float | None = None) -> ObservationSet:
    """Read a file written by :func:`write_observations`.

    The noise level comes from the sidecar metadata unless given explicitly.
    """
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    if noise_std is None:
        side = Path(str(path) + ".meta.json")
        if not side.exists():
            raise ValueError(f"no noise level given and no metadata next to {path}")
        noise_std = float(json.loads(side.read_text())["noise_std"])
    x = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[-1]) for r in rows])
    labels = np.array([r[1] for r in rows]) if len(header) == 3 else None
    return ObservationSet(x, y, noise_std, labels)


def write_truth(path, truth: ThermalTruth) -> Path:
    path = Path(path)
    data = np.column_stack([truth.times_min * 60.0, truth.external, truth.heat_rate, truth.heat])
    np.savetxt(
        path, data, delimiter=",", header="time_s,external_K,heat_rate_W,heat_J", comments="", fmt="%.12g"
    )
    return path


def read_truth(path) -> ThermalTruth:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return ThermalTruth(data[:, 0] / 60.0, data[:, 1], data[:, 2], data[:, 3])


__all__ = [
    "ExternalTemperatureSpec",
    "LinearGenSpec",
    "SensorLayout",
    "ThermalDataset",
    "ThermalGenSpec",
    "ThermalTruth",
    "external_temperature_series",
    "generate_linear",
    "generate_thermal",
    "generative_model",
    "make_rng",
    "outlier_mask",
    "read_observations",
    "read_truth",
    "sensor_observations",
    "steel_fraction",
    "voigt_mix",
    "write_metadata",
    "write_observations",
    "write_truth",
]
