"""Command-line front end: single-point analysis, sweeps, stability frontiers, simulation.

Configuration is a single JSON document with explicit units in the key names
(theta_db, rho_dbm, sigma2_dbm, lambda_per_km2, ...).  Every command writes a
CSV with a fixed, documented column order.  Exit codes: 0 success, 2
configuration error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ConfigError, Strategy, SystemConfig, make_config
from .fixed_point import NetworkSolution, solve_network
from .mc_sim import run_campaign
from .metrics import network_metrics
from .steady_state import SolverError

ANALYZE_COLUMNS = [
    "theta_db", "strategy", "class", "p", "gamma", "tsp", "mean_q",
    "availability", "mean_wait", "mean_service", "paoi", "overflow",
]
SWEEP_COLUMNS = ["sweep_parameter", "sweep_value"] + ANALYZE_COLUMNS
FRONTIER_COLUMNS = [
    "grid_parameter", "grid_value", "search_parameter", "search_max",
    "strategy", "bracket_flag",
]
SIMULATE_COLUMNS = ANALYZE_COLUMNS + [
    "tsp_hw", "delay_hw", "mean_delay", "departures", "drops", "warmed_up",
]
EVENT_COLUMNS = [
    "realization", "slot", "device", "class", "wait_slots", "service_slots",
]

#: Default truncation of the waiting-time support in CLI reports.
DEFAULT_WAIT_CAP = 5000

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_SOLVER = 3


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str, columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def set_parameter(config: SystemConfig, name: str, value: float) -> SystemConfig:
    """Return a config with the named swept/searched parameter replaced."""
    direct = {
        "theta_db", "rho_dbm", "sigma2_dbm", "eta",
        "lambda_per_km2", "mu_per_km2",
    }
    if name in direct:
        return config.with_(**{name: float(value)})
    if name == "channels":
        return config.with_(channels=int(round(value)))
    if name == "kappa":
        mu = float(value) * config.lambda_per_km2 * config.channels
        return config.with_(mu_per_km2=mu)
    if name.startswith("alpha_"):
        try:
            idx = int(name.split("_", 1)[1])
        except ValueError:
            raise ConfigError(f"bad class parameter name {name!r}") from None
        if not 1 <= idx <= config.n_classes:
            raise ConfigError(
                f"{name!r} is out of range for {config.n_classes} classes"
            )
        alphas = list(config.alphas)
        alphas[idx - 1] = float(value)
        return make_config(
            alphas, config.queue_sizes,
            lambda_per_km2=config.lambda_per_km2, mu_per_km2=config.mu_per_km2,
            eta=config.eta, rho_dbm=config.rho_dbm, sigma2_dbm=config.sigma2_dbm,
            theta_db=config.theta_db, channels=config.channels,
            strategy=config.strategy, epsilon=config.epsilon,
            max_iterations=config.max_iterations, damping=config.damping,
            strict_overflow_break=config.strict_overflow_break,
        )
    raise ConfigError(f"unknown sweep/search parameter {name!r}")


def load_document(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def system_config_from(doc: dict) -> SystemConfig:
    required = ("alphas", "queue_sizes")
    for key in required:
        if key not in doc:
            raise ConfigError(f"config is missing required key {key!r}")
    kwargs = {}
    for key in ("lambda_per_km2", "mu_per_km2", "eta", "rho_dbm", "sigma2_dbm",
                "theta_db", "epsilon", "damping"):
        if key in doc:
            kwargs[key] = float(doc[key])
    for key in ("channels", "max_iterations"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if "strict_overflow_break" in doc:
        kwargs["strict_overflow_break"] = bool(doc["strict_overflow_break"])
    if "strategy" in doc:
        kwargs["strategy"] = Strategy.parse(str(doc["strategy"]))
    try:
        return make_config(doc["alphas"], doc["queue_sizes"], **kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration value: {exc}") from exc


def _analyze_rows(config: SystemConfig, wait_cap: int) -> tuple[list, NetworkSolution]:
    solution = solve_network(config)
    metrics = network_metrics(solution, n_cap=wait_cap)
    rows = []
    for met in metrics:
        i = met.class_index
        rows.append([
            config.theta_db,
            config.strategy.value,
            i,
            solution.coverage[i - 1],
            solution.steady_states[i - 1].gamma,
            met.tsp,
            met.mean_queue,
            met.availability,
            met.mean_wait,
            met.mean_service,
            met.paoi,
            solution.overflow[i - 1],
        ])
    return rows, solution


def run_analyze(doc: dict, out_path: str, threads: int) -> int:
    config = system_config_from(doc)
    wait_cap = int(doc.get("wait_n_cap", DEFAULT_WAIT_CAP))
    rows, solution = _analyze_rows(config, wait_cap)
    _write_csv(out_path, ANALYZE_COLUMNS, rows)
    return _EXIT_OK if solution.converged else _EXIT_SOLVER


def _sweep_values(spec: dict) -> tuple[str, np.ndarray]:
    for key in ("parameter", "from", "to", "steps"):
        if key not in spec:
            raise ConfigError(f"sweep spec is missing {key!r}")
    lo, hi, steps = float(spec["from"]), float(spec["to"]), int(spec["steps"])
    if steps < 2:
        raise ConfigError(f"sweep needs steps >= 2, got {steps}")
    if not lo < hi:
        raise ConfigError(f"sweep bounds must be ordered, got [{lo}, {hi}]")
    values = np.linspace(lo, hi, steps)
    scale = str(spec.get("scale", "linear")).lower()
    name = str(spec["parameter"])
    if scale == "db":
        # dB-named axes are already logarithmic; linear-domain parameters get
        # the values interpreted as dB and mapped through 10^(x/10).
        if not (name.endswith("_db") or name.endswith("_dbm")):
            values = 10.0 ** (values / 10.0)
    elif scale != "linear":
        raise ConfigError(f"unknown sweep scale {scale!r}")
    return name, values


def run_sweep(doc: dict, out_path: str, threads: int) -> int:
    base = system_config_from(doc)
    spec = doc.get("sweep")
    if not isinstance(spec, dict):
        raise ConfigError("sweep mode needs a 'sweep' object in the config")
    name, values = _sweep_values(spec)
    wait_cap = int(doc.get("wait_n_cap", DEFAULT_WAIT_CAP))

    def solve_point(value: float):
        return _analyze_rows(set_parameter(base, name, value), wait_cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_point, values))
    else:
        results = [solve_point(v) for v in values]

    rows = []
    all_converged = True
    for value, (point_rows, solution) in zip(values, results):
        all_converged &= solution.converged
        for row in point_rows:
            rows.append([name, float(value)] + row)
    _write_csv(out_path, SWEEP_COLUMNS, rows)
    return _EXIT_OK if all_converged else _EXIT_SOLVER


def _frontier_grid(spec: dict) -> tuple[str, np.ndarray]:
    name = spec.get("grid_parameter")
    if not name:
        raise ConfigError("frontier spec needs 'grid_parameter'")
    if "grid_values" in spec:
        values = np.asarray([float(v) for v in spec["grid_values"]])
        if values.size < 1:
            raise ConfigError("frontier grid_values must be non-empty")
        return str(name), values
    for key in ("grid_from", "grid_to", "grid_steps"):
        if key not in spec:
            raise ConfigError(f"frontier spec is missing {key!r}")
    steps = int(spec["grid_steps"])
    if steps < 1:
        raise ConfigError("frontier grid needs at least one point")
    return str(name), np.linspace(
        float(spec["grid_from"]), float(spec["grid_to"]), steps
    )


def run_frontier(doc: dict, out_path: str, threads: int) -> int:
    base = system_config_from(doc)
    spec = doc.get("frontier")
    if not isinstance(spec, dict):
        raise ConfigError("frontier mode needs a 'frontier' object in the config")
    grid_name, grid_values = _frontier_grid(spec)
    search_name = spec.get("search_parameter")
    if not search_name:
        raise ConfigError("frontier spec needs 'search_parameter'")
    bracket = spec.get("bracket")
    if (not isinstance(bracket, (list, tuple)) or len(bracket) != 2
            or not float(bracket[0]) < float(bracket[1])):
        raise ConfigError("frontier 'bracket' must be an ordered [lo, hi] pair")
    lo_edge, hi_edge = float(bracket[0]), float(bracket[1])
    bisections = int(spec.get("bisection_steps", 12))
    if bisections < 1:
        raise ConfigError("bisection_steps must be >= 1")

    def feasible(config: SystemConfig, value: float) -> bool:
        try:
            solution = solve_network(set_parameter(config, search_name, value))
        except (SolverError, ConfigError):
            return False
        return not any(solution.overflow)

    def search(grid_value: float):
        config = set_parameter(base, grid_name, grid_value)
        if not feasible(config, lo_edge):
            return grid_value, lo_edge, "empty-bracket"
        if feasible(config, hi_edge):
            return grid_value, hi_edge, "saturated"
        lo, hi = lo_edge, hi_edge
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            if feasible(config, mid):
                lo = mid
            else:
                hi = mid
        return grid_value, lo, "ok"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(search, grid_values))
    else:
        results = [search(v) for v in grid_values]

    rows = [
        [grid_name, float(gv), search_name, float(mx), base.strategy.value, flag]
        for gv, mx, flag in results
    ]
    _write_csv(out_path, FRONTIER_COLUMNS, rows)
    return _EXIT_OK


def run_simulate(doc: dict, out_path: str, threads: int, seed_override) -> int:
    config = system_config_from(doc)
    spec = doc.get("sim")
    if not isinstance(spec, dict):
        raise ConfigError("simulate mode needs a 'sim' object in the config")
    for key in ("realizations", "slots", "area_km"):
        if key not in spec:
            raise ConfigError(f"sim spec is missing {key!r}")
    realizations = int(spec["realizations"])
    slots = int(spec["slots"])
    area_km = float(spec["area_km"])
    if realizations < 1:
        raise ConfigError(f"realizations must be >= 1, got {realizations}")
    if slots < 1:
        raise ConfigError(f"slots must be >= 1, got {slots}")
    if area_km <= 0:
        raise ConfigError(f"area_km must be positive, got {area_km}")
    master_seed = seed_override if seed_override is not None else int(
        doc.get("master_seed", 0)
    )
    events_out = spec.get("events_out")
    stats = run_campaign(
        config,
        realizations=realizations,
        slots=slots,
        master_seed=master_seed,
        area_km=area_km,
        threads=threads,
        warmup_window=int(spec.get("warmup_window", 500)),
        warmup_tol=float(spec.get("warmup_tol", 1e-3)),
        collect_events=bool(events_out),
    )
    rows = []
    for i in range(config.n_classes):
        rows.append([
            config.theta_db,
            config.strategy.value,
            i + 1,
            stats.coverage[i],
            stats.gamma[i],
            stats.tsp[i],
            stats.mean_queue[i],
            stats.availability[i],
            stats.mean_wait[i],
            stats.mean_service[i],
            stats.paoi[i],
            bool(stats.drops[i] > 0),
            stats.tsp_hw[i],
            stats.delay_hw[i],
            stats.mean_delay[i],
            stats.departures[i],
            stats.drops[i],
            stats.warmed_up,
        ])
    _write_csv(out_path, SIMULATE_COLUMNS, rows)
    if events_out and stats.events is not None:
        event_rows = [
            [int(r), int(s), int(d), int(c), int(w), int(sv)]
            for r, s, d, c, w, sv in stats.events
        ]
        _write_csv(events_out, EVENT_COLUMNS, event_rows)
    return _EXIT_OK


def _resolve_threads(arg_threads) -> int:
    if arg_threads is not None:
        return max(int(arg_threads), 1)
    env = os.environ.get("VACQNET_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ConfigError(f"VACQNET_THREADS={env!r} is not an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vacqnet",
        description=(
            "Steady-state, delay, and stability analysis of prioritized "
            "uplink IoT networks"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "solve one operating point and write per-class KPIs"),
        ("sweep", "solve an operating point per grid value of one parameter"),
        ("frontier", "bisect the largest non-overflow value of a parameter"),
        ("simulate", "run the Monte Carlo campaign"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON configuration file")
        cmd.add_argument("--out", required=True, help="output CSV path")
        cmd.add_argument("--seed", type=int, default=None,
                         help="master seed override (simulate)")
        cmd.add_argument("--threads", type=int, default=None,
                         help="worker threads (default: VACQNET_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        doc = load_document(args.config)
        declared = doc.get("mode")
        if declared is not None and str(declared) != args.command:
            raise ConfigError(
                f"config declares mode {declared!r} but command is "
                f"{args.command!r}"
            )
        if args.command == "analyze":
            return run_analyze(doc, args.out, threads)
        if args.command == "sweep":
            return run_sweep(doc, args.out, threads)
        if args.command == "frontier":
            return run_frontier(doc, args.out, threads)
        return run_simulate(doc, args.out, threads, args.seed)
    except ConfigError as exc:
        print(f"vacqnet: configuration error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except SolverError as exc:
        print(f"vacqnet: solver failure: {exc}", file=sys.stderr)
        return _EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
