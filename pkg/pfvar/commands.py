"""
Subcommand handlers. Each takes a validated config and an output directory,
writes its artifacts and returns the written paths. Every tabular artifact is
accompanied by a JSON summary echoing the resolved config.
"""

from pathlib import Path
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from .config import CONFIG, ExperimentConfig
from .errors import ModelNotTractable
from .exact_oracle import exact_asymptotic_variance, exact_filter_variance, exact_tables
from .experiments import (
    ci_failure_rates,
    discrete_h_vector,
    failure_summary,
    lag_sweep,
    long_run,
    observation_record,
    replicate_reference_summary,
    replicate_variance_track,
    single_run,
    sweep_rows,
)
from .helpers import derive_seed, format_lag
from .io_utils import write_csv, write_json, write_observations
from .models import simulate
from .stats_utils import summarize_sweep_rows

Handler = Callable[[ExperimentConfig, Path], List[Path]]


def _summary(name: str, cfg: ExperimentConfig, **derived) -> Dict[str, object]:
    return {"command": name, "config": cfg.echo(), **derived}


def _paths(name: str, out_dir: Path):
    csv_name, json_name = CONFIG["outputs"][name]
    return (out_dir / csv_name if csv_name else None), out_dir / json_name


def _discrete_model(cfg: ExperimentConfig, name: str):
    if cfg.model_kind != "discrete":
        raise ModelNotTractable(f"{name} needs a discrete model, got {cfg.model_kind}")
    return cfg.model_params()


# =====================================================================
# Handlers
# =====================================================================

def cmd_simulate(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    if cfg.model_kind == "discrete":
        raise ModelNotTractable("simulate needs a linear_gaussian or stochastic_volatility model")
    csv_path, json_path = _paths("simulate", out_dir)
    seed = derive_seed(cfg.seed, "observations")
    states, y = simulate(cfg.model_params(), cfg.n + 1, seed)

    written = [write_observations(y, csv_path)]
    written.append(write_csv(pd.DataFrame({"x": states}), out_dir / "states.csv"))
    written.append(write_json(_summary("simulate", cfg, length=int(y.size), simulation_seed=seed), json_path))
    return written


def cmd_run(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    csv_path, json_path = _paths("run", out_dir)
    df = single_run(cfg)
    last = df.iloc[-1].to_dict() if len(df) else {}
    return [
        write_csv(df, csv_path),
        write_json(_summary("run", cfg, lag=format_lag(cfg.lags[0]), final=last), json_path),
    ]


def cmd_sweep_lag(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    csv_path, json_path = _paths("sweep-lag", out_dir)
    results = lag_sweep(cfg)
    rows = sweep_rows(results)
    reference = next(iter(results.values())).reference
    summary = summarize_sweep_rows(rows)
    for row, res in zip(summary, results.values()):
        row["mean_unique_ancestors"] = float(np.mean(res.unique_ancestors))
    return [
        write_csv([{**row, "lag": format_lag(row["lag"])} for row in rows], csv_path, ["lag", "replicate", "estimate"]),
        write_json(_summary("sweep-lag", cfg, reference=reference, lags=summary), json_path),
    ]


def cmd_long_run(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    csv_path, json_path = _paths("long-run", out_dir)
    df = long_run(cfg)
    collapsed = df.loc[df["eve_count"] == 1, "n"]
    derived = {
        "first_reported_collapse": int(collapsed.iloc[0]) if len(collapsed) else None,
        "fixed_lag_positive_fraction": float((df["fixed_lag"] > 0).mean()) if len(df) else None,
        "mean_fixed_lag": float(df["fixed_lag"].mean()) if len(df) else None,
        "mean_cle": float(df["cle"].mean()) if len(df) else None,
    }
    written = [write_csv(df, csv_path)]
    if cfg.reference_replicates > 0:
        written.append(write_csv(replicate_variance_track(cfg), out_dir / "long_run_reference.csv"))
    written.append(write_json(_summary("long-run", cfg, **derived), json_path))
    return written


def cmd_ci_failure(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    csv_path, json_path = _paths("ci-failure", out_dir)
    rates = ci_failure_rates(cfg)
    return [
        write_csv(rates, csv_path),
        write_json(_summary("ci-failure", cfg, **failure_summary(rates, cfg.replicates)), json_path),
    ]


def cmd_oracle_exact(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    _, json_path = _paths("oracle-exact", out_dir)
    dm = _discrete_model(cfg, "oracle-exact")
    y = observation_record(cfg)
    h = discrete_h_vector(cfg, dm)
    tables = exact_tables(dm, list(y[: cfg.n]), h)
    return [write_json(_summary("oracle-exact", cfg, h=h, **tables), json_path)]


def cmd_oracle_replicate(cfg: ExperimentConfig, out_dir: Path) -> List[Path]:
    _, json_path = _paths("oracle-replicate", out_dir)
    y = observation_record(cfg)
    derived = replicate_reference_summary(cfg, y)
    if cfg.model_kind == "discrete":
        dm = cfg.model_params()
        h = discrete_h_vector(cfg, dm)
        if cfg.flow == "filter":
            derived["exact"] = exact_filter_variance(dm, list(y[: cfg.n + 1]), h, 0).value
        else:
            derived["exact"] = exact_asymptotic_variance(dm, list(y[: cfg.n]), h, 0).value
    return [write_json(_summary("oracle-replicate", cfg, **derived), json_path)]


COMMAND_REGISTRY: Dict[str, Handler] = {
    "simulate": cmd_simulate,
    "run": cmd_run,
    "sweep-lag": cmd_sweep_lag,
    "long-run": cmd_long_run,
    "ci-failure": cmd_ci_failure,
    "oracle-exact": cmd_oracle_exact,
    "oracle-replicate": cmd_oracle_replicate,
}
