"""Command-line experiment runner.

Usage::

    nashgym MODE [--config CONFIG.json] [--out PATH] [--seeds 0,1,2] [--k 64,256]

MODE is one of ``learn``, ``sweep-k``, ``ftrl-regret``, ``eval``, ``solve``.
Flags override the matching config-file fields. Exit status is 0 on success,
1 for usage or configuration errors and 2 when an invariant or regret bound
is violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ftrl
from .exact_eval import ne_gap, solve_nash_exact
from .game_model import (GameFileError, GameValidationError, MarkovGame, dumps_array,
                         game_from_dict, load_game, matching_pennies, random_game,
                         validate_policy)
from .nash_q_ftrl import LearnerConfig, run

log = logging.getLogger("nashgym")

MODES = ("learn", "sweep-k", "ftrl-regret", "eval", "solve")
SWEEP_COLUMNS = ["K", "seed", "neGap", "maxSideGap", "minSideGap", "sampleCount", "wallClockMs"]
REGRET_COLUMNS = ["family", "instance", "k", "regret_so_far", "bound_rhs",
                  "variance_term", "norm_term"]

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    game: dict | None = None
    K: int | None = None
    c_alpha: float = ftrl.DEFAULT_C_ALPHA
    c_b: float = 0.5
    delta: float = 0.01
    seeds: list[int] = field(default_factory=lambda: [0])
    k_grid: list[int] = field(default_factory=list)
    out: str | None = None
    policies: str | None = None
    instances: int = 200
    extra_instances: int = 10
    ftrl_seed: int = 0

    _KEYS = {"game": "game", "K": "K", "cAlpha": "c_alpha", "cB": "c_b", "delta": "delta",
             "seeds": "seeds", "kGrid": "k_grid", "out": "out", "policies": "policies",
             "instances": "instances", "extraInstances": "extra_instances",
             "ftrlSeed": "ftrl_seed", "mode": "mode"}

    @classmethod
    def from_dict(cls, data: dict, mode: str) -> "ExperimentConfig":
        unknown = set(data) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if data.get("mode", mode) != mode:
            raise ConfigError(f"config is for mode {data['mode']!r}, not {mode!r}")
        kwargs = {cls._KEYS[k]: v for k, v in data.items() if k != "mode"}
        cfg = cls(mode=mode, **kwargs)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError(f"seeds must be nonnegative integers, got {self.seeds}")
        if self.mode in ("learn", "sweep-k", "eval", "solve") and self.game is None:
            raise ConfigError(f"mode {self.mode!r} needs a 'game' entry")
        if self.mode == "learn" and self.K is None:
            raise ConfigError("mode 'learn' needs K")
        if self.mode == "sweep-k":
            if not self.k_grid:
                raise ConfigError("mode 'sweep-k' needs a non-empty kGrid")
            if any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
                raise ConfigError(f"kGrid must be strictly increasing, got {self.k_grid}")
        if self.mode == "eval" and self.policies is None:
            raise ConfigError("mode 'eval' needs a 'policies' file")
        for K in ([self.K] if self.K is not None else []) + list(self.k_grid):
            if not isinstance(K, int) or K < 2:
                raise ConfigError(f"K values must be integers >= 2, got {K!r}")

    def learner_config(self, K: int, seed: int) -> LearnerConfig:
        return LearnerConfig(K=K, c_alpha=self.c_alpha, c_b=self.c_b, delta=self.delta, seed=seed)


def build_game(spec: dict) -> MarkovGame:
    """Game from a config entry: ``{"kind": "matching_pennies" | "random" | "file", ...}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("'game' must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "matching_pennies":
        return matching_pennies()
    if kind == "random":
        try:
            return random_game(spec["S"], spec["A"], spec["B"], spec["H"], spec.get("seed", 0))
        except KeyError as exc:
            raise ConfigError(f"random game spec is missing {exc}") from None
    if kind == "file":
        return load_game(spec["path"])
    if kind == "inline":
        return game_from_dict(spec["data"])
    raise ConfigError(f"unknown game kind {kind!r}")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) or isinstance(x, str):
        return str(x)
    return format(float(x), ".17g")


def lower_median(values) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("NASHGYM_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- learning runs ---------------------------------------------------------

def _learn_one(args):
    game_spec, lcfg = args
    game = build_game(game_spec)
    t0 = time.perf_counter()
    result = run(game, lcfg)
    elapsed = (time.perf_counter() - t0) * 1e3
    expected = lcfg.K * game.S * (game.A + game.B) * game.H
    if result.sample_count != expected:
        raise InvariantViolation(
            f"run consumed {result.sample_count} samples, expected {expected}")
    report = ne_gap(game, result.mu_hat, result.nu_hat)
    record = {"K": lcfg.K, "seed": lcfg.seed, "neGap": report.gap,
              "maxSideGap": float(report.max_side.max()),
              "minSideGap": float(report.min_side.max()),
              "sampleCount": result.sample_count, "wallClockMs": elapsed}
    return record, result.to_json(), report.as_dict()


def _write_csv(rows, columns, out) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) if row.get(c) is not None else "" for c in columns])
    text = buf.getvalue()
    if out:
        with open(out, "w") as f:
            f.write(text)
    return text


def sweep_records(cfg: ExperimentConfig, k_values) -> list[tuple]:
    jobs = [(cfg.game, cfg.learner_config(K, seed)) for K in k_values for seed in cfg.seeds]
    results = _map(_learn_one, jobs)
    return sorted(results, key=lambda item: (item[0]["K"], item[0]["seed"]))


def cmd_learn(cfg: ExperimentConfig) -> str:
    results = sweep_records(cfg, [cfg.K])
    rows = [rec for rec, _, _ in results]
    text = _write_csv(rows, SWEEP_COLUMNS, cfg.out)
    if cfg.out:
        runs = ",".join(f'{{"seed":{rec["seed"]},"result":{res.strip()},'
                        f'"neGap":{json.dumps(rep)}}}' for rec, res, rep in results)
        with open(os.path.splitext(cfg.out)[0] + ".json", "w") as f:
            f.write(f'{{"runs":[{runs}]}}\n')
    return text


def sweep_summary(rows) -> list[dict]:
    summary = []
    for K in sorted({r["K"] for r in rows}):
        group = [r for r in rows if r["K"] == K]
        summary.append({"K": K, "seed": "median",
                        "neGap": lower_median(r["neGap"] for r in group),
                        "maxSideGap": lower_median(r["maxSideGap"] for r in group),
                        "minSideGap": lower_median(r["minSideGap"] for r in group),
                        "sampleCount": group[0]["sampleCount"], "wallClockMs": None})
    return summary


def cmd_sweep_k(cfg: ExperimentConfig) -> str:
    rows = [rec for rec, _, _ in sweep_records(cfg, cfg.k_grid)]
    return _write_csv(rows + sweep_summary(rows), SWEEP_COLUMNS, cfg.out)


# -- FTRL audit ------------------------------------------------------------

def loss_families(cfg: ExperimentConfig):
    """Yield ``(family, index, losses, H)`` for the regret audit."""
    rng = np.random.default_rng(cfg.ftrl_seed)
    for i in range(cfg.instances):
        A, n, H = int(rng.integers(2, 11)), int(rng.integers(10, 501)), int(rng.integers(1, 11))
        yield "random", i, rng.uniform(0, H, size=(n, A)), H
    for i in range(cfg.extra_instances):
        A, n, H = int(rng.integers(2, 11)), int(rng.integers(10, 201)), int(rng.integers(1, 11))
        losses = rng.uniform(0, H, size=(n, A))
        losses[0] = 0.0
        losses[0, rng.integers(A)] = 50.0 * H
        yield "spike", i, losses, H
    for i in range(cfg.extra_instances):
        A, n, H = int(rng.integers(2, 11)), int(rng.integers(10, 201)), int(rng.integers(1, 11))
        yield "constant", i, np.full((n, A), rng.uniform(0, H)), H


def audit_instance(losses, H, c_alpha):
    n = losses.shape[0]
    sched = ftrl.WeightSchedule(n, c_alpha, H)
    preds = ftrl.run_ftrl(losses, sched)
    rows = []
    for k in range(1, n + 1):
        regret, _ = ftrl.weighted_regret(losses, preds, sched, k)
        var_t, log_t, norm_t = ftrl.regret_bound_terms(losses, preds, sched, k)
        rows.append({"k": k, "regret_so_far": regret, "bound_rhs": var_t + log_t + norm_t,
                     "variance_term": var_t, "norm_term": norm_t})
    return rows


def cmd_ftrl_regret(cfg: ExperimentConfig) -> tuple[str, int]:
    rows, violations = [], 0
    for family, i, losses, H in loss_families(cfg):
        for row in audit_instance(losses, H, cfg.c_alpha):
            if row["regret_so_far"] > row["bound_rhs"] + 1e-9:
                violations += 1
                log.error("bound violated: %s #%d k=%d", family, i, row["k"])
            rows.append({"family": family, "instance": i, **row})
    return _write_csv(rows, REGRET_COLUMNS, cfg.out), violations


# -- exact evaluation --------------------------------------------------------

def load_policies(path: str, game: MarkovGame):
    with open(path) as f:
        data = json.load(f)
    if "runs" in data:
        data = data["runs"][0]["result"]
    mu = data.get("muHat", data.get("mu"))
    nu = data.get("nuHat", data.get("nu"))
    if mu is None or nu is None:
        raise ConfigError(f"{path}: expected muHat/nuHat or mu/nu fields")
    return validate_policy(mu, game, "max"), validate_policy(nu, game, "min")


def cmd_eval(cfg: ExperimentConfig) -> str:
    game = build_game(cfg.game)
    mu, nu = load_policies(cfg.policies, game)
    return json.dumps(ne_gap(game, mu, nu).as_dict()) + "\n"


def cmd_solve(cfg: ExperimentConfig) -> str:
    game = build_game(cfg.game)
    mu, nu, V = solve_nash_exact(game)
    gap = ne_gap(game, mu, nu).gap
    return (f'{{"mu":{dumps_array(mu)},"nu":{dumps_array(nu)},'
            f'"value":{dumps_array(V)},"gap":{fmt(gap)}}}\n')


# -- entry point -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nashgym", description="Nash-Q-FTRL experiments on tabular Markov games.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output path (CSV for learn/sweep-k/ftrl-regret, JSON otherwise)")
    p.add_argument("--seeds", type=_int_list, help="comma-separated learner seeds")
    p.add_argument("--k", type=_int_list, help="comma-separated K values")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    if args.out is not None:
        data["out"] = args.out
    if args.seeds is not None:
        data["seeds"] = args.seeds
    if args.k is not None:
        if args.mode == "learn":
            if len(args.k) != 1:
                raise ConfigError("mode 'learn' takes a single --k value")
            data["K"] = args.k[0]
        else:
            data["kGrid"] = args.k
    return ExperimentConfig.from_dict(data, args.mode)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        status = EXIT_OK
        if cfg.mode == "learn":
            text = cmd_learn(cfg)
        elif cfg.mode == "sweep-k":
            text = cmd_sweep_k(cfg)
        elif cfg.mode == "ftrl-regret":
            text, violations = cmd_ftrl_regret(cfg)
            if violations:
                log.error("%d regret-bound violations", violations)
                status = EXIT_VIOLATION
        else:
            text = cmd_eval(cfg) if cfg.mode == "eval" else cmd_solve(cfg)
            if cfg.out:
                with open(cfg.out, "w") as f:
                    f.write(text)
        if not cfg.out:
            sys.stdout.write(text)
        return status
    except InvariantViolation as exc:
        log.error("%s", exc)
        return EXIT_VIOLATION
    except (ConfigError, GameFileError, GameValidationError, OSError,
            json.JSONDecodeError, TypeError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
