"""Command-line entry point: training, evaluation and sweeps with CSV output."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import signal_ssp
from .config import ExperimentConfig, parse_config, write_resolved
from .delay_models import matched_mean
from .errors import ConfigError, DomainError, StateError
from .learner import (
    METRICS,
    delay_edges_for,
    evaluate,
    format_pm,
    load_policy,
    make_baseline_agent,
    save_policy,
    train,
)

log = logging.getLogger("aoimdp")

METRICS_HEADER = ["epoch", *METRICS]
EPISODE_LOG_HEADER = [
    "epoch", "step", "agent", "clock_s", "wait_s", "delay_s", "inst_aoi_s",
    "run_avg_aoi_s", "data_rate_bps", "energy_j", "reward_total", "done",
]
SUMMARY_HEADER = ["metric", "mean", "std", "mean_pm_std"]
SWEEP_HEADER = ["model", "aoi", "sum_data_rate", "energy"]
SWEEP_RUNS_HEADER = ["model", "seed", "aoi", "sum_data_rate", "energy", "cumulative_reward"]
SELFTEST_HEADER = ["snr_db", "trials", "exact_rate", "mean_abs_err"]
SWEEP_KINDS = ("ssp", "poisson", "exponential", "geometric")


def _cell(v):
    if isinstance(v, (np.integer, bool)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(row[h]) for h in header])
    return path


# ---------------------------------------------------------------------------
# building blocks


def build_agents(cfg: ExperimentConfig, seed: int | None = None):
    world = cfg.world_config()
    kind = cfg["agent.kind"]
    params = cfg.agent_params()
    seed = cfg["train.seed"] if seed is None else seed
    agents = []
    for j in range(world.num_auvs):
        if kind == "q_discrete":
            edges = delay_edges_for(world, cfg.delay_model(), params["delay_bins"], seed)
            agents.append(
                make_baseline_agent(kind, world, delay_edges=edges, seed=[seed, 2, j], **params)
            )
        else:
            agents.append(make_baseline_agent(kind, world, **params))
    return agents


def train_run(cfg: ExperimentConfig, log_episodes=None):
    world = cfg.world_config()
    agents = build_agents(cfg)
    log_episodes = cfg["train.log_episodes"] if log_episodes is None else log_episodes
    metrics, rows = train(world, cfg.delay_model(), agents, cfg.train_settings(), log_episodes)
    return agents, metrics, rows


def eval_run(cfg: ExperimentConfig, agents, log_episodes=False):
    return evaluate(
        cfg.world_config(),
        cfg.delay_model(),
        agents,
        cfg["train.eval_episodes"],
        cfg["train.steps"],
        seed=cfg["train.seed"],
        log_episodes=log_episodes,
    )


def ssp_mean_delay(cfg: ExperimentConfig, n_draws: int = 2000) -> float:
    """Monte-Carlo mean of the sonar-derived delay over uniform AUV/node placements."""
    world = cfg.with_overrides(**{"delay.kind": "ssp"})
    edges_model = world.delay_model()
    w = world.world_config()
    size = np.array([w.width, w.height])
    rng = np.random.default_rng([cfg["train.seed"], 5])
    draws = []
    for _ in range(n_draws):
        auv = rng.uniform(0, 1, 2) * size
        nodes = rng.uniform(0, 1, (w.num_nodes, 2)) * size
        d = float(np.min(np.linalg.norm(nodes - auv, axis=1)))
        draws.append(edges_model.sample(rng, d))
    return float(np.mean(draws))


def sweep_configs(cfg: ExperimentConfig) -> dict[str, ExperimentConfig]:
    """One config per swept kind; parametric kinds match the ssp mean delay."""
    ssp_cfg = cfg.with_overrides(**{"delay.kind": "ssp"})
    mean = ssp_mean_delay(cfg)
    out = {"ssp": ssp_cfg}
    for kind in SWEEP_KINDS[1:]:
        m = matched_mean(kind, mean)
        changes = {"delay.kind": kind, **{f"delay.{k}": v for k, v in m.params.items()}}
        out[kind] = cfg.with_overrides(**changes)
    return out


def standard_mdp_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Delay-blind twin: no delay feature, no waiting, no AoI reward term."""
    weights = list(cfg["env.weights"])
    weights[-1] = 0.0
    if not any(w > 0 for w in weights):
        raise ConfigError("env.weights: standard-MDP twin needs a nonzero task weight")
    return cfg.with_overrides(
        **{
            "agent.kind": "q_discrete",
            "agent.wait_buckets": 1,
            "agent.delay_bins": 1,
            "env.weights": tuple(weights),
        }
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = cfg.report_dir
    write_resolved(cfg, out)
    agents, metrics, rows = train_run(cfg)
    write_csv(out / "metrics.csv", METRICS_HEADER, metrics)
    if rows:
        write_csv(out / "episode_log.csv", EPISODE_LOG_HEADER, rows)
    for j, ag in enumerate(agents):
        save_policy(ag, out / f"policy_agent{j}.aoimdp")
    return 0


def _summary_rows(summary):
    return [
        {"metric": m, "mean": summary[m][0], "std": summary[m][1], "mean_pm_std": format_pm(*summary[m])}
        for m in METRICS
    ]


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    out = cfg.report_dir
    write_resolved(cfg, out)
    world = cfg.world_config()
    if args.policy_dir:
        agents = [
            load_policy(Path(args.policy_dir) / f"policy_agent{j}.aoimdp", world, seed=[cfg["train.seed"], 2, j])
            for j in range(world.num_auvs)
        ]
    elif cfg["agent.kind"] == "q_discrete":
        raise ConfigError("eval of agent.kind=q_discrete needs --policy-dir with trained snapshots")
    else:
        agents = build_agents(cfg)
    summary, rows = eval_run(cfg, agents, log_episodes=True)
    write_csv(out / "summary.csv", SUMMARY_HEADER, _summary_rows(summary))
    write_csv(out / "episode_log.csv", EPISODE_LOG_HEADER, rows)
    return 0


def cmd_sweep_delay(cfg: ExperimentConfig, args) -> int:
    out = cfg.report_dir
    write_resolved(cfg, out)
    base_seed = cfg["train.seed"]
    runs = []
    table = []
    for kind, kcfg in sweep_configs(cfg).items():
        per_seed = []
        for s in range(base_seed, base_seed + args.seeds):
            scfg = kcfg.with_overrides(**{"train.seed": s})
            agents, _, _ = train_run(scfg, log_episodes=False)
            summary, _ = eval_run(scfg, agents)
            row = {
                "model": kind,
                "seed": s,
                "aoi": summary["mean_time_avg_aoi_s"][0],
                "sum_data_rate": summary["sum_data_rate_bps"][0],
                "energy": summary["energy_j"][0],
                "cumulative_reward": summary["cumulative_reward"][0],
            }
            per_seed.append(row)
            log.info("sweep %s seed %d: aoi=%.4f", kind, s, row["aoi"])
        runs.extend(per_seed)
        table.append(
            {
                "model": kind,
                **{
                    col: format_pm(float(np.mean([r[col] for r in per_seed])), float(np.std([r[col] for r in per_seed])))
                    for col in SWEEP_HEADER[1:]
                },
            }
        )
    write_csv(out / "delay_sweep.csv", SWEEP_HEADER, table)
    write_csv(out / "delay_sweep_runs.csv", SWEEP_RUNS_HEADER, runs)
    return 0


def cmd_compare_mdp(cfg: ExperimentConfig, args) -> int:
    out = cfg.report_dir
    write_resolved(cfg, out)
    aoi_cfg = cfg.with_overrides(**{"agent.kind": "q_discrete"})
    _, m_aoi, _ = train_run(aoi_cfg, log_episodes=False)
    _, m_std, _ = train_run(standard_mdp_config(cfg), log_episodes=False)
    write_csv(out / "metrics_aoi_mdp.csv", METRICS_HEADER, m_aoi)
    write_csv(out / "metrics_standard_mdp.csv", METRICS_HEADER, m_std)
    return 0


def cmd_ssp_selftest(cfg: ExperimentConfig, args) -> int:
    out = cfg.report_dir
    rows = signal_ssp.selftest_curve(trials=args.trials, seed=cfg["train.seed"])
    write_csv(out / "ssp_selftest.csv", SELFTEST_HEADER, rows)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-delay": cmd_sweep_delay,
    "compare-mdp": cmd_compare_mdp,
    "ssp-selftest": cmd_ssp_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoimdp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--out", help="output directory (overrides report.dir)")
    sub.add_parser("train", parents=[common], help="train agents and write per-epoch metrics")
    p = sub.add_parser("eval", parents=[common], help="evaluate a policy greedily")
    p.add_argument("--policy-dir", help="directory holding policy_agent<j>.aoimdp snapshots")
    p = sub.add_parser("sweep-delay", parents=[common], help="train and evaluate under each delay model")
    p.add_argument("--seeds", type=int, default=5)
    sub.add_parser("compare-mdp", parents=[common], help="AoI-MDP versus delay-blind training curves")
    p = sub.add_parser("ssp-selftest", parents=[common], help="correlator recovery rate versus SNR")
    p.add_argument("--trials", type=int, default=200)
    return parser


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        overrides = list(args.overrides)
        if args.out:
            overrides.append(f"report.dir={args.out}")
        cfg = parse_config(args.config, overrides)
        if getattr(args, "seeds", 1) < 1 or getattr(args, "trials", 1) < 1:
            raise ConfigError("--seeds and --trials must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError, StateError, OSError) as exc:
        print(f"aoimdp {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
