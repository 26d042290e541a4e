"""Batch harness: generate data, calibrate, scan and push forward QoIs.

Every output file gets a ``<file>.meta.json`` sidecar with the config echo and
the seed.  Exit status is 0 on success, 2 when some result rows are flagged
(e.g. the ESS target was not reached) and 1 on a hard failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from embedcal import datagen, qoi
from embedcal.config import ConfigError, ExperimentConfig, as_plain, load_config
from embedcal.core import InferenceProblem, ObservationSet
from embedcal.models.linear import LinearModel
from embedcal.models.thermal import ThermalForward
from embedcal.sampler import (
    EnsembleChain,
    SamplerError,
    chain_from_arrays,
    read_chain_csv,
    run,
    write_chain_csv,
)

OUT_ENV = "EMBEDCAL_OUT"
EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2
SUMMARY_COLUMNS = ("likelihood", "seed", "param", "mean", "std", "ess", "converged", "flagged")
SCAN_COLUMNS = ("scan_kind", "scan_value", "likelihood", "seed", "param", "mean", "std", "ess", "flagged")

log = logging.getLogger("embedcal")


# --------------------------------------------------------------------------
# building blocks shared by the subcommands
# --------------------------------------------------------------------------


def chain_seed(*keys: int) -> int:
    """Deterministic sampler seed for a (seed, likelihood, point) job."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def linear_spec(cfg: ExperimentConfig, seed: int, **overrides) -> datagen.LinearGenSpec:
    opts = dict(cfg.raw.get("data") or {})
    opts.update(overrides)
    opts["seed"] = seed
    return datagen.LinearGenSpec(**opts)


def thermal_spec(cfg: ExperimentConfig, seed: int) -> datagen.ThermalGenSpec:
    opts = dict(cfg.raw.get("data") or {})
    if "external" in opts:
        opts["external"] = datagen.ExternalTemperatureSpec(**opts["external"])
    opts.setdefault("depth", float(cfg.raw.get("model", {}).get("depth", 1.0)))
    opts["seed"] = seed
    return datagen.ThermalGenSpec(**opts)


def build_problem(cfg: ExperimentConfig, obs: ObservationSet, kind: str, noise_std: float | None = None) -> InferenceProblem:
    if noise_std is not None:
        obs = obs.with_noise(noise_std)
    if cfg.is_thermal:
        minutes = np.unique(obs.x)
        forward = ThermalForward(sample_minutes=minutes, n=int(cfg.raw["model"].get("n", 20)))
        if forward.n_outputs != obs.n_y:
            raise ConfigError("thermal observations must hold every sensor at every sample time")
    else:
        forward = LinearModel(obs.x)
    return InferenceProblem(
        cfg.parameters(), forward, obs, cfg.likelihood(kind), cfg.pce_degree, cfg.quad_order
    )


def summary_rows(chain: EnsembleChain, kind: str, seed: int) -> list[dict]:
    post = chain.samples(flat=True)
    ess_target = chain.ess_target
    flagged = math.isfinite(ess_target) and not chain.converged
    rows = []
    for i, name in enumerate(chain.names):
        ess = float(chain.ess[i]) if chain.ess is not None else math.nan
        rows.append(
            {
                "likelihood": kind,
                "seed": seed,
                "param": name,
                "mean": float(np.mean(post[:, i])) if post.size else math.nan,
                "std": float(np.std(post[:, i], ddof=1)) if post.shape[0] > 1 else math.nan,
                "ess": ess,
                "converged": bool(chain.converged),
                "flagged": bool(flagged),
            }
        )
    return rows


def write_rows(path: Path, rows: list[dict], columns) -> Path:
    with path.open("w") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r.get(c, "")) for c in columns) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_rows(path: Path) -> list[dict]:
    lines = Path(path).read_text().strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:]]


def write_meta(path: Path, cfg: ExperimentConfig, seed, extra: dict | None = None) -> Path:
    side = Path(str(path) + ".meta.json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    meta.update({"config": as_plain(cfg.echo()), "seed": seed})
    if extra:
        meta.update(as_plain(extra))
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


@dataclass
class Paths:
    root: Path

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def chains(self) -> Path:
        return self.root / "chains"

    @property
    def qoi(self) -> Path:
        return self.root / "qoi"

    def make(self) -> None:
        for d in (self.root, self.data, self.chains, self.qoi):
            d.mkdir(parents=True, exist_ok=True)

    def linear_data(self, seed: int) -> Path:
        return self.data / f"linear_seed{seed}.csv"

    def thermal_data(self, seed: int, part: str) -> Path:
        return self.data / f"thermal_{part}_seed{seed}.csv"

    def chain(self, tag: str, kind: str, seed: int) -> Path:
        return self.chains / f"{tag}_{kind}_seed{seed}.csv"


def _seeds(cfg: ExperimentConfig, seed_flag: int | None) -> list[int]:
    if seed_flag is not None:
        return [seed_flag]
    return cfg.seeds or [cfg.seed]


def _map_jobs(func, jobs: list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, jobs))


# --------------------------------------------------------------------------
# generate
# --------------------------------------------------------------------------


def cmd_generate(cfg: ExperimentConfig, paths: Paths, seeds: list[int]) -> int:
    paths.make()
    for seed in seeds:
        if cfg.is_thermal:
            spec = thermal_spec(cfg, seed)
            ds = datagen.generate_thermal(spec)
            for part, obs in (("train", ds.training), ("test", ds.testing)):
                p = datagen.write_observations(paths.thermal_data(seed, part), obs, "time_min", spec)
                write_meta(p, cfg, seed, {"noise_std": obs.noise_std})
            p = datagen.write_truth(paths.thermal_data(seed, "truth"), ds.truth)
            write_meta(p, cfg, seed)
        else:
            spec = linear_spec(cfg, seed)
            obs = datagen.generate_linear(spec)
            p = datagen.write_observations(paths.linear_data(seed), obs, "x", spec)
            write_meta(p, cfg, seed, {"noise_std": obs.noise_std})
        log.info("generated data for seed %d", seed)
    return EXIT_OK


def _load_training(cfg: ExperimentConfig, paths: Paths, seed: int) -> ObservationSet:
    if cfg.observations_path:
        return datagen.read_observations(cfg.observations_path, cfg.noise_std)
    path = paths.thermal_data(seed, "train") if cfg.is_thermal else paths.linear_data(seed)
    if not path.exists():
        cmd_generate(cfg, paths, [seed])
    return datagen.read_observations(path, cfg.noise_std)


# --------------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------------


@dataclass
class CalibrationJob:
    raw: dict
    obs: ObservationSet
    kind: str
    seed: int
    chain_seed: int
    noise_std: float | None
    max_samples: int | None
    chain_path: str | None


def run_calibration(job: CalibrationJob) -> tuple[list[dict], str]:
    cfg = load_config(job.raw)
    problem = build_problem(cfg, job.obs, job.kind, job.noise_std)
    try:
        chain = run(problem, cfg.sampler(job.max_samples), seed=job.chain_seed)
    except SamplerError as exc:
        row = {
            "likelihood": job.kind, "seed": job.seed, "param": "*", "mean": math.nan,
            "std": math.nan, "ess": math.nan, "converged": False, "flagged": True,
        }
        return [row], f"sampler failure: {exc}"
    if job.chain_path:
        write_chain_csv(chain, job.chain_path)
        meta = {"likelihood": job.kind, "chain_seed": job.chain_seed, "burn_in": chain.burn_in,
                "stop_reason": chain.stop_reason, "noise_std": problem.observations.noise_std}
        write_meta(Path(job.chain_path), cfg, job.seed, meta)
    return summary_rows(chain, job.kind, job.seed), chain.stop_reason


def cmd_calibrate(cfg: ExperimentConfig, paths: Paths, seeds: list[int], n_jobs: int = 1, max_samples: int | None = None) -> int:
    paths.make()
    jobs = []
    for seed in seeds:
        obs = _load_training(cfg, paths, seed)
        for k, kind in enumerate(cfg.likelihoods):
            jobs.append(
                CalibrationJob(cfg.raw, obs, kind, seed, chain_seed(seed, k), None, max_samples,
                               str(paths.chain(cfg.experiment, kind, seed)))
            )
    results = _map_jobs(run_calibration, jobs, n_jobs)
    rows = [r for res, _ in results for r in res]
    out = write_rows(paths.root / f"summary_{cfg.experiment}.csv", rows, SUMMARY_COLUMNS)
    write_meta(out, cfg, seeds)
    for job, (_, reason) in zip(jobs, results):
        log.info("%s seed %d: %s", job.kind, job.seed, reason)
    return EXIT_PARTIAL if any(r["flagged"] for r in rows) else EXIT_OK


# --------------------------------------------------------------------------
# scan
# --------------------------------------------------------------------------


def cmd_scan(cfg: ExperimentConfig, paths: Paths, seeds: list[int], n_jobs: int = 1, max_samples: int | None = None) -> int:
    if cfg.is_thermal:
        raise ConfigError("scans are defined for the linear experiments only")
    kind_scan, values = cfg.scan()
    paths.make()
    jobs, tags = [], []
    for seed in seeds:
        for j, value in enumerate(values):
            noise = None
            if kind_scan == "noise":
                obs = datagen.generate_linear(linear_spec(cfg, seed))
                noise = value
            else:
                obs = datagen.generate_linear(linear_spec(cfg, seed, variant=kind_scan, delta_y=value))
            for k, kind in enumerate(cfg.likelihoods):
                jobs.append(CalibrationJob(cfg.raw, obs, kind, seed, chain_seed(seed, k, j + 1), noise, max_samples, None))
                tags.append(value)
    results = _map_jobs(run_calibration, jobs, n_jobs)
    rows = []
    for value, (res, _) in zip(tags, results):
        for r in res:
            rows.append({**r, "scan_kind": kind_scan, "scan_value": float(value)})
    out = write_rows(paths.root / f"scan_{kind_scan}.csv", rows, SCAN_COLUMNS)
    write_meta(out, cfg, seeds, {"scan_values": values})
    return EXIT_PARTIAL if any(r["flagged"] for r in rows) else EXIT_OK


# --------------------------------------------------------------------------
# push
# --------------------------------------------------------------------------


def _load_chain(path: Path, burn_in: int) -> EnsembleChain:
    if not path.exists():
        raise FileNotFoundError(f"chain file {path} not found; run 'calibrate' first")
    hist, lps, names = read_chain_csv(path)
    return chain_from_arrays(hist, lps, names, burn_in=burn_in)


def cmd_push(cfg: ExperimentConfig, paths: Paths, seeds: list[int]) -> int:
    paths.make()
    qcfg = cfg.raw.get("qoi") or {}
    n_P = int(qcfg.get("n_P", 1000))
    mode = str(qcfg.get("mode", "full_posterior"))
    burn_in = cfg.sampler().burn_in
    for seed in seeds:
        obs = _load_training(cfg, paths, seed)
        for k, kind in enumerate(cfg.likelihoods):
            chain = _load_chain(paths.chain(cfg.experiment, kind, seed), burn_in)
            n_avail = chain.samples(flat=True).shape[0]
            problem = build_problem(cfg, obs, kind)
            if cfg.is_thermal:
                truth_path = paths.thermal_data(seed, "truth")
                q_true = datagen.read_truth(truth_path).heat_at(float(qcfg["horizon_minutes"])) if truth_path.exists() else None
                qois = qoi.cumulative_heat_qoi(
                    chain, problem, q_true, float(qcfg["horizon_minutes"]), min(n_P, n_avail), mode,
                    n=int(cfg.raw["model"].get("n", 20)), depth=float(cfg.raw["model"].get("depth", 1.0)),
                    seed=chain_seed(seed, k, 10_000),
                )
            else:
                x0 = float(qcfg.get("x", 1.0))
                near = np.flatnonzero(np.abs(obs.x - x0) < 1e-9)
                y_obs = float(obs.y[near[0]]) if near.size else None
                qois = qoi.push_forward(
                    chain, problem, LinearModel(np.array([x0])), min(n_P, n_avail), mode, y_obs=y_obs,
                    extra_std=float(qcfg.get("extra_std", 0.0)), seed=chain_seed(seed, k, 10_000),
                )
            stem = paths.qoi / f"{cfg.experiment}_{kind}_seed{seed}"
            csv_path = qoi.write_qoi_csv(Path(str(stem) + ".csv"), qois)
            write_meta(csv_path, cfg, seed, {"likelihood": kind})
            js = qoi.write_summary_json(Path(str(stem) + ".json"), qois, {"likelihood": kind, "seed": seed, "mode": mode})
            write_meta(js, cfg, seed, {"likelihood": kind})
    return EXIT_OK


def cmd_all(cfg: ExperimentConfig, paths: Paths, seeds: list[int], n_jobs: int = 1, max_samples: int | None = None) -> int:
    codes = [cmd_generate(cfg, paths, seeds)]
    if cfg.experiment in ("linear_noise_scan", "linear_offset_scan", "linear_outlier_scan"):
        codes.append(cmd_scan(cfg, paths, seeds, n_jobs, max_samples))
    else:
        codes.append(cmd_calibrate(cfg, paths, seeds, n_jobs, max_samples))
        codes.append(cmd_push(cfg, paths, seeds))
    return max(codes)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedcal",
        description="Calibrate models with embedded inadequacy and push forward quantities of interest.",
        epilog=f"The default output directory is taken from ${OUT_ENV}, falling back to ./embedcal-out. "
        "Exit status: 0 success, 2 some rows flagged, 1 failure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "write synthetic data sets",
        "calibrate": "sample the posterior for every likelihood and seed",
        "scan": "calibrate over a grid of noise levels, offsets or outlier magnitudes",
        "push": "push posterior chains forward to quantities of interest",
        "all": "generate, then calibrate and push (or scan)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="YAML experiment config (defaults: linear experiment)")
        p.add_argument("--experiment", help="override the experiment named in the config")
        p.add_argument("--seed", type=int, help="single data seed, overrides the config")
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./embedcal-out)")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--max-samples", type=int, help="iteration cap per chain")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = args.out or Path(os.environ.get(OUT_ENV, "embedcal-out"))
    try:
        cfg = load_config(args.config, args.experiment)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        seeds = _seeds(cfg, args.seed)
        paths = Paths(out)
        if args.command == "generate":
            code = cmd_generate(cfg, paths, seeds)
        elif args.command == "calibrate":
            code = cmd_calibrate(cfg, paths, seeds, args.jobs, args.max_samples)
        elif args.command == "scan":
            code = cmd_scan(cfg, paths, seeds, args.jobs, args.max_samples)
        elif args.command == "push":
            code = cmd_push(cfg, paths, seeds)
        else:
            code = cmd_all(cfg, paths, seeds, args.jobs, args.max_samples)
    except (ConfigError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"embedcal: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if code == EXIT_PARTIAL:
        print("embedcal: finished with flagged rows (see summary)", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
