"""Configuration-driven experiment runner.

Subcommands::

    mhgp run --config CONFIG.json [--seed N] [--output DIR] [--iterations N]
    mhgp compare --a A.csv --b B.csv [--n-sub 500] [--n-perm 999] [--seed N]
    mhgp defaults --experiment banana [--algorithm mhgp]

Precedence for every setting is flag > config file > built-in default. The
output directory may also come from ``MHGP_OUTPUT_DIR``, which sits between
the ``--output`` flag and the config file.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import targets
from .bayes_opt import BoConfig
from .diagnostics import chain_summary, permutation_test, subsample
from .io import read_samples_csv, write_evals_jsonl, write_samples_csv
from .laplace import RefineConfig, haario_scale, scale_covariance
from .samplers import DramConfig, MhgpConfig, dram_run, mh_run, mhgp_run

logger = logging.getLogger(__name__)

OUTPUT_ENV = "MHGP_OUTPUT_DIR"
EXPERIMENTS = ("banana", "kinetics", "gaussian")
ALGORITHMS = ("mhgp", "mh", "dram")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


_BASE = {
    "experiment": "banana",
    "algorithm": "mhgp",
    "iterations": 15000,
    "seed": 0,
    "output_dir": "runs",
    "burn_in": None,
    "x0": None,
    "target": {},
    "mhgp": {
        "threshold": 0.1,
        "local_k": 50,
        "scale": 0.5,
        "bo": {"budget": 50, "bounds": None, "n_candidates": 2048, "exploration_weight": 0.01},
        "refine": {"steps": 100, "iso_sigma": None, "recheck_every": 25},
    },
    "mh": {"proposal_cov": None},
    "dram": {
        "initial_cov": None,
        "adapt": True,
        "adapt_start": 500,
        "adapt_interval": 100,
        "delayed_rejection": True,
        "dr_scale": 0.2,
    },
}

_PER_EXPERIMENT = {
    "banana": {
        "iterations": 15000,
        "x0": [-10.0, -10.0],
        "target": {"b": 0.1},
        "mhgp": {"bo": {"bounds": [[-25.0, 25.0], [-30.0, 20.0]]},
                 "refine": {"iso_sigma": 1.0}},
        "mh": {"proposal_cov": [[50.0, 0.0], [0.0, 0.5]]},
        "dram": {"initial_cov": [[50.0, 0.0], [0.0, 0.5]]},
    },
    "kinetics": {
        "iterations": 5000,
        "x0": [0.9] * 6,
        "target": {"noise_sigma": 0.01, "data_seed": 0, "data_csv": None,
                   "rel_bounds": [0.5, 1.5]},
        "mhgp": {"bo": {"bounds": [[0.8, 1.2]] * 6}},
        "mh": {"proposal_cov": (2.5e-5 * np.eye(6)).tolist()},
        "dram": {"initial_cov": (2.5e-5 * np.eye(6)).tolist()},
    },
    "gaussian": {
        "iterations": 20000,
        "x0": [3.0, 3.0],
        "target": {"mean": [0.0, 0.0], "cov": [[1.0, 0.9], [0.9, 1.0]]},
        "mhgp": {"bo": {"bounds": [[-5.0, 5.0], [-5.0, 5.0]]}},
        "mh": {"proposal_cov": [[1.0, 0.9], [0.9, 1.0]]},
        "dram": {"initial_cov": [[1.0, 0.0], [0.0, 1.0]]},
    },
}


def _deep_update(base: dict, upd: dict, path: str = "", strict: bool = True) -> dict:
    out = copy.deepcopy(base)
    for k, v in upd.items():
        where = f"{path}.{k}" if path else k
        if strict and k not in out:
            raise ConfigError(f"unknown field '{where}'")
        if isinstance(out.get(k), dict) and out[k] and k != "target":
            if not isinstance(v, dict):
                raise ConfigError(f"field '{where}' must be an object")
            out[k] = _deep_update(out[k], v, where, strict)
        elif k == "target" and isinstance(v, dict):
            known = out.get(k) or {}
            for tk in v:
                if known and tk not in known:
                    raise ConfigError(f"unknown field '{where}.{tk}'")
            out[k] = {**known, **v}
        else:
            out[k] = v
    return out


def default_config(experiment: str = "banana", algorithm: str = "mhgp") -> dict:
    """Fully populated configuration for a named experiment."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"field 'experiment' must be one of {EXPERIMENTS}")
    cfg = _deep_update(_BASE, _PER_EXPERIMENT[experiment], strict=False)
    cfg["experiment"] = experiment
    cfg["algorithm"] = algorithm
    cfg["output_dir"] = f"runs/{experiment}-{algorithm}"
    return cfg


def resolve_config(user: dict) -> dict:
    """Merge a user config over the defaults of its experiment and validate it."""
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    experiment = user.get("experiment", "banana")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"field 'experiment' must be one of {list(EXPERIMENTS)}")
    algorithm = user.get("algorithm", "mhgp")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"field 'algorithm' must be one of {list(ALGORITHMS)}")
    cfg = _deep_update(default_config(experiment, algorithm), user)
    _validate(cfg)
    return cfg


def _check(cond: bool, field: str, msg: str):
    if not cond:
        raise ConfigError(f"field '{field}' {msg}")


def _validate(cfg: dict) -> None:
    it = cfg["iterations"]
    _check(isinstance(it, int) and not isinstance(it, bool) and it >= 1, "iterations",
           "must be an integer >= 1")
    _check(isinstance(cfg["seed"], int), "seed", "must be an integer")
    d = len(cfg["x0"]) if isinstance(cfg["x0"], list) else -1
    _check(d >= 1, "x0", "must be a non-empty list of numbers")
    m = cfg["mhgp"]
    _check(isinstance(m["threshold"], (int, float)) and m["threshold"] > 0,
           "mhgp.threshold", "must be positive")
    _check(isinstance(m["local_k"], int) and m["local_k"] >= 1, "mhgp.local_k", "must be >= 1")
    _check(m["scale"] == "haario" or (isinstance(m["scale"], (int, float)) and m["scale"] > 0),
           "mhgp.scale", "must be positive or 'haario'")
    bo = m["bo"]
    _check(isinstance(bo["budget"], int) and bo["budget"] >= 0, "mhgp.bo.budget", "must be >= 0")
    _check(isinstance(bo["n_candidates"], int) and bo["n_candidates"] >= 1,
           "mhgp.bo.n_candidates", "must be >= 1")
    b = np.asarray(bo["bounds"], dtype=float) if bo["bounds"] is not None else None
    _check(b is not None and b.shape == (d, 2) and np.all(b[:, 0] < b[:, 1]),
           "mhgp.bo.bounds", f"must be {d} pairs [low, high] with low < high")
    ref = m["refine"]
    _check(isinstance(ref["steps"], int) and ref["steps"] >= 0, "mhgp.refine.steps", "must be >= 0")
    _check(ref["iso_sigma"] is None or ref["iso_sigma"] > 0, "mhgp.refine.iso_sigma",
           "must be positive or null")
    _check(isinstance(ref["recheck_every"], int) and ref["recheck_every"] >= 1,
           "mhgp.refine.recheck_every", "must be >= 1")
    for key in ("mh.proposal_cov", "dram.initial_cov"):
        sec, name = key.split(".")
        c = np.asarray(cfg[sec][name], dtype=float)
        _check(c.shape == (d, d), key, f"must be a {d}x{d} matrix")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ConfigError(f"field '{key}' must be positive definite")
    dr = cfg["dram"]
    _check(dr["adapt_interval"] >= 1, "dram.adapt_interval", "must be >= 1")
    _check(0 < dr["dr_scale"] <= 1, "dram.dr_scale", "must be in (0, 1]")
    bi = cfg["burn_in"]
    _check(bi is None or (isinstance(bi, int) and 0 <= bi < it), "burn_in",
           "must be null or an integer in [0, iterations)")


def build_target(cfg: dict, record: bool = False):
    t = cfg["target"]
    exp = cfg["experiment"]
    if exp == "banana":
        return targets.banana_target(float(t.get("b", 0.1)), record=record)
    if exp == "kinetics":
        if t.get("data_csv"):
            data = targets.KineticsDataset.from_csv(t["data_csv"], t["noise_sigma"])
        else:
            data = targets.generate_synthetic_data(noise_sigma=t["noise_sigma"],
                                                   seed=t["data_seed"])
        return targets.kinetics_target(data, rel_bounds=tuple(t["rel_bounds"]), record=record)
    return targets.gaussian_target(t["mean"], t["cov"], record=record)


def mhgp_config(cfg: dict) -> MhgpConfig:
    m = cfg["mhgp"]
    d = len(cfg["x0"])
    scale = haario_scale(d) if m["scale"] == "haario" else float(m["scale"])
    bo = BoConfig(np.asarray(m["bo"]["bounds"], dtype=float), m["bo"]["budget"],
                  m["bo"]["n_candidates"], m["bo"]["exploration_weight"])
    return MhgpConfig(cfg["iterations"], bo, cfg["x0"], float(m["threshold"]), m["local_k"],
                      scale, RefineConfig(**m["refine"]), seed=cfg["seed"])


def dram_config(cfg: dict) -> DramConfig:
    dr = cfg["dram"]
    return DramConfig(cfg["iterations"], cfg["x0"], dr["initial_cov"], dr["adapt"],
                      dr["adapt_start"], dr["adapt_interval"], dr["delayed_rejection"],
                      dr["dr_scale"], seed=cfg["seed"])


def run_chain(cfg: dict, target):
    """Run the configured sampler on ``target`` and return the chain."""
    alg = cfg["algorithm"]
    if alg == "mhgp":
        return mhgp_run(target, mhgp_config(cfg), cfg["seed"])
    target.phase = "sampling"
    if alg == "mh":
        prop = scale_covariance(cfg["mh"]["proposal_cov"], 1.0)
        return mh_run(target, cfg["iterations"], prop, cfg["x0"],
                      np.random.default_rng(cfg["seed"]))
    return dram_run(target, dram_config(cfg), np.random.default_rng(cfg["seed"]))


def default_burn_in(cfg: dict) -> int:
    if cfg["burn_in"] is not None:
        return cfg["burn_in"]
    return 0 if cfg["algorithm"] == "mhgp" else int(0.2 * cfg["iterations"])


def run_experiment(cfg: dict) -> dict:
    """Run one experiment and write samples.csv, evals.jsonl and summary.json.

    Returns the summary dictionary.
    """
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    target = build_target(cfg, record=True)
    t0 = time.perf_counter()
    chain = run_chain(cfg, target)
    wall = time.perf_counter() - t0
    write_samples_csv(out / "samples.csv", chain)
    write_evals_jsonl(out / "evals.jsonl", target.records)
    summary = chain_summary(chain, default_burn_in(cfg))
    if chain.proposal is not None:
        summary["proposal_covariance"] = chain.proposal.scaled_covariance.tolist()
    if chain.gp is not None:
        summary["gp_hyper"] = chain.gp.hyper.to_dict()
        summary["gp_size"] = int(chain.gp.n)
    summary["config"] = cfg
    summary["wall_time_s"] = wall
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def compare_runs(samples_a, samples_b, n_sub: int = 500, n_perm: int = 999, seed: int = 0,
                 burn_in_a: float = 0.0, burn_in_b: float = 0.0, output=None):
    """Energy permutation test between subsamples of two sample CSVs.

    ``burn_in_a``/``burn_in_b`` are fractions of each file to discard. The two
    subsamples use disjoint RNG streams derived from ``seed``.
    """
    A, _, _ = read_samples_csv(samples_a)
    B, _, _ = read_samples_csv(samples_b)
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch: %d vs %d" % (A.shape[1], B.shape[1]))
    sa, sb = np.random.SeedSequence(seed).spawn(2)
    xa = subsample(A, n_sub, int(burn_in_a * len(A)), sa)
    xb = subsample(B, n_sub, int(burn_in_b * len(B)), sb)
    res = permutation_test(xa, xb, n_perm, seed)
    if output is not None:
        Path(output).write_text(res.to_json() + "\n")
    return res


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mhgp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True, help="JSON config file")
    r.add_argument("--seed", type=int)
    r.add_argument("--output", help="output directory")
    r.add_argument("--iterations", type=int)

    c = sub.add_parser("compare", help="energy-distance test between two samples.csv files")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--n-sub", type=int, default=500)
    c.add_argument("--n-perm", type=int, default=999)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--burn-in-a", type=float, default=0.0, help="fraction of A to discard")
    c.add_argument("--burn-in-b", type=float, default=0.0, help="fraction of B to discard")
    c.add_argument("--output", help="write the result JSON here (also printed)")

    d = sub.add_parser("defaults", help="print a fully populated config")
    d.add_argument("--experiment", choices=EXPERIMENTS, default="banana")
    d.add_argument("--algorithm", choices=ALGORITHMS, default="mhgp")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "defaults":
        print(json.dumps(default_config(args.experiment, args.algorithm), indent=2))
        return 0

    if args.command == "compare":
        try:
            res = compare_runs(args.a, args.b, args.n_sub, args.n_perm, args.seed,
                               args.burn_in_a, args.burn_in_b, args.output)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(res.to_json())
        return 0

    try:
        with open(args.config) as fh:
            user = json.load(fh)
        if args.seed is not None:
            user["seed"] = args.seed
        if args.iterations is not None:
            user["iterations"] = args.iterations
        env_out = os.environ.get(OUTPUT_ENV)
        if args.output is not None:
            user["output_dir"] = args.output
        elif env_out:
            user["output_dir"] = env_out
        cfg = resolve_config(user)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise OSError(f"output directory {out} is not writable")
        summary = run_experiment(cfg)
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({k: summary[k] for k in ("eval_count_total", "phase_counts",
                                              "acceptance_rate", "wall_time_s")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
