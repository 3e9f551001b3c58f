"""Command-line driver writing CSV/JSON artifacts and a run manifest.

Every subcommand takes ``--output DIR`` and ``--seed``; values may also come
from ``--config file.json`` whose keys are the long flag names with dashes
replaced by underscores. Flags given on the command line win.
"""
import argparse
import json
import logging
import os
import subprocess
import sys
import time
import traceback
from dataclasses import asdict
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from floquetlab import __version__
from floquetlab.api import (
    COMMANDS,
    ExperimentConfig,
    decay_summary,
    fourier_summary,
    plan_experiment,
    records_frame,
    series_from_frame,
)
from floquetlab.collapse import ScalingDataset, collapse, collapsed_frame
from floquetlab.errors import FitError
from floquetlab.lattice import HoneycombLattice
from floquetlab.markov import compare, estimate, estimate_columns
from floquetlab.observables import (
    PurificationConfig,
    TimeSeries,
    fit_power_law,
    purification_experiment,
    purification_time,
)
from floquetlab.percolation import spanning_table, threshold_from_table

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"
MANIFEST = "manifest.json"


# -- argument parsing -----------------------------------------------------------


def int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def float_list(text: str) -> List[float]:
    """Comma-separated floats, or ``start:stop:count`` for an inclusive grid."""
    if ":" in text:
        start, stop, count = text.split(":")
        return np.round(np.linspace(float(start), float(stop), int(count)), 9).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with default values for the flags below")
    parser.add_argument("--output", help="directory receiving the artifacts")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--executor", choices=("python", "dask"))
    parser.add_argument("--workers", type=int)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")


def _grid(parser: argparse.ArgumentParser, p_S: bool = True) -> None:
    parser.add_argument("--L", dest="L", type=int_list, help="sizes, e.g. 9,12,15")
    parser.add_argument("--pm", dest="p_M", type=float_list, help="missing probabilities")
    if p_S:
        parser.add_argument("--ps", dest="p_S", type=float_list, help="single-qubit replacement probabilities")
    parser.add_argument("--mode", choices=("blue_green", "green_only", "all_rounds"))
    parser.add_argument("--cycles", type=int)
    parser.add_argument("--realizations", type=int)


def _readout(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=int, help="strip width of the corrected readout")
    parser.add_argument("--corrected", action="store_const", const=True, help="also record the corrected readout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floquetlab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    gt = commands.add_parser("gt", help="G(t) series per parameter point")
    _grid(gt)
    _readout(gt)

    sweep = commands.add_parser("sweep", help="Fourier components and decay rates over a grid")
    _grid(sweep)
    _readout(sweep)

    tee = commands.add_parser("tee", help="tripartite entanglement entropy after every red round")
    _grid(tee)

    purify = commands.add_parser("purify", help="ancilla purification")
    _grid(purify, p_S=False)
    purify.add_argument("--ancillas", type=int)
    purify.add_argument("--no-scramble", dest="scramble", action="store_const", const=False)

    percolate = commands.add_parser("percolate", help="bond percolation threshold")
    percolate.add_argument("--kind", choices=("kagome", "hexagonal", "square"))
    percolate.add_argument("--L", dest="L", type=int_list)
    percolate.add_argument("--p", dest="p_bond", type=float_list, help="bond probabilities")
    percolate.add_argument("--samples", type=int)
    percolate.add_argument("--criterion", choices=("x", "z", "either", "both"))
    percolate.add_argument("--bootstrap", type=int)

    markov = commands.add_parser("markov", help="channel probabilities and transfer matrix")
    markov.add_argument("--L", dest="L", type=int_list)
    markov.add_argument("--pm", dest="p_M", type=float_list)
    markov.add_argument("--mode", choices=("blue_green", "green_only", "all_rounds"))
    markov.add_argument("--samples", type=int)
    markov.add_argument("--cycles", type=int, help="length of the predicted G(t) series")
    markov.add_argument("--columns", action="store_const", const=True, help="also sample every matrix column")
    markov.add_argument("--measured", dest="input", help="gt.csv to compare the prediction against")

    fss = commands.add_parser("collapse", help="finite-size-scaling collapse of a CSV column")
    fss.add_argument("--input")
    fss.add_argument("--ansatz", choices=("plain", "power", "one_plus_power"))
    fss.add_argument("--p-column")
    fss.add_argument("--y-column")
    fss.add_argument("--sigma-column")
    fss.add_argument("--size-column")
    fss.add_argument("--bootstrap", type=int)

    phase = commands.add_parser("phase-diagram", help="order parameters and TEE over a (p_M, p_S) grid")
    _grid(phase)
    _readout(phase)

    for sub in commands.choices.values():
        _common(sub)
    return parser


_CLI_ONLY = ("config", "verbose", "quiet", "command")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge ``--config`` JSON with the flags that were given."""
    values: Dict[str, Any] = {}
    if args.config:
        with open(args.config) as f:
            values.update(json.load(f))
    for key, value in vars(args).items():
        if key not in _CLI_ONLY and value is not None:
            values[key] = value
    if args.command == "markov" and "cycles" not in values:
        values["cycles"] = 30
    return ExperimentConfig.from_mapping(args.command, values)


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


# -- artifacts ------------------------------------------------------------------


def write_frame(frame: pd.DataFrame, path: str) -> str:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"wrote {path}")
    return path


def write_json(data: Any, path: str) -> str:
    with open(path, "w") as f:
        json.dump(data, f, indent=2, default=_json_default)
    logger.debug(f"wrote {path}")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def git_describe() -> Optional[str]:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def point_path(output: str, prefix: str, L: int, p_M: float, p_S: Optional[float] = None) -> str:
    name = f"{prefix}_L{L}_pm{p_M:.6g}"
    if p_S is not None:
        name += f"_ps{p_S:.6g}"
    return os.path.join(output, "points", name + ".csv")


def params_path(path: str) -> str:
    """Sidecar JSON holding the parameters a point file was computed with."""
    return os.path.splitext(path)[0] + ".json"


def _plain(params: Any) -> Any:
    return json.loads(json.dumps(params, default=_json_default))


def load_point(path: str, params: Dict[str, Any], columns: Sequence[str]) -> Optional[pd.DataFrame]:
    """A previously written point file, if its parameters match and it holds every column."""
    sidecar = params_path(path)
    if not (os.path.isfile(path) and os.path.isfile(sidecar)):
        return None
    with open(sidecar) as f:
        stored = json.load(f)
    if stored != _plain(params):
        logger.info(f"parameters of {path} changed, recomputing")
        return None
    frame = pd.read_csv(path)
    if not set(columns) <= set(frame.columns):
        return None
    logger.info(f"reusing {path}")
    return frame


def save_point(frame: pd.DataFrame, path: str, params: Dict[str, Any]) -> str:
    write_frame(frame, path)
    write_json(_plain(params), params_path(path))
    return path


def run_points(config: ExperimentConfig, prefix: str, **overrides) -> Dict[tuple, pd.DataFrame]:
    """Per-realization series of every grid point, reusing point files computed with the same parameters."""
    protocols = config.protocol_configs(**overrides)
    columns = ["realization", "t", "G"]
    if protocols[0].corrected:
        columns.append("corrected_G")
    if protocols[0].record_tee:
        columns.append("tee")
    frames: Dict[tuple, pd.DataFrame] = {}
    pending = []
    for protocol in protocols:
        key = (protocol.L, protocol.p_M, protocol.p_S)
        found = load_point(point_path(config.output, prefix, *key), asdict(protocol), columns)
        if found is None:
            pending.append(protocol)
        else:
            frames[key] = found
    if pending:
        results = plan_experiment(pending, config.executor, config.workers).execute()
        for protocol, records in zip(pending, results):
            key = (protocol.L, protocol.p_M, protocol.p_S)
            frames[key] = records_frame(records)
            save_point(frames[key], point_path(config.output, prefix, *key), asdict(protocol))
    return {k: frames[k] for k in sorted(frames)}


# -- subcommands ----------------------------------------------------------------


def _series_rows(frames: Dict[tuple, pd.DataFrame], field: str) -> pd.DataFrame:
    rows = []
    for (L, p_M, p_S), frame in frames.items():
        table = series_from_frame(frame, field).to_frame()
        table.insert(0, "p_S", p_S)
        table.insert(0, "p_M", p_M)
        table.insert(0, "L", L)
        rows.append(table)
    return pd.concat(rows, ignore_index=True)


def cmd_gt(config: ExperimentConfig) -> Dict[str, Any]:
    frames = run_points(config, "runs")
    table = _series_rows(frames, "G")
    if config.corrected:
        corrected = _series_rows(frames, "corrected_G")
        table["corrected_mean"] = corrected["mean"].to_numpy()
        table["corrected_stderr"] = corrected["stderr"].to_numpy()
    return {"gt": write_frame(table, os.path.join(config.output, "gt.csv"))}


def _summary_rows(frames: Dict[tuple, pd.DataFrame], corrected: bool, tee: bool = False) -> pd.DataFrame:
    rows = []
    for (L, p_M, p_S), frame in frames.items():
        row = {"L": L, "p_M": p_M, "p_S": p_S, "realizations": frame["realization"].nunique()}
        row.update(fourier_summary(frame))
        if corrected:
            row.update(fourier_summary(frame, "corrected_G", prefix="corrected_"))
        row.update(decay_summary(frame))
        if tee:
            final = frame[frame["t"] == frame["t"].max()]["tee"].to_numpy(dtype=float)
            row["tee"] = float(final.mean())
            row["tee_stderr"] = float(final.std(ddof=1) / np.sqrt(len(final))) if len(final) > 1 else 0.0
        rows.append(row)
    return pd.DataFrame(rows)


def cmd_sweep(config: ExperimentConfig) -> Dict[str, Any]:
    frames = run_points(config, "runs")
    table = _summary_rows(frames, config.corrected)
    return {"sweep": write_frame(table, os.path.join(config.output, "sweep.csv"))}


def cmd_tee(config: ExperimentConfig) -> Dict[str, Any]:
    frames = run_points(config, "tee", record_tee=True)
    table = _series_rows(frames, "tee")
    return {"tee": write_frame(table, os.path.join(config.output, "tee.csv"))}


def cmd_phase_diagram(config: ExperimentConfig) -> Dict[str, Any]:
    frames = run_points(config, "tee", record_tee=True)
    table = _summary_rows(frames, config.corrected, tee=True)
    return {"phase_diagram": write_frame(table, os.path.join(config.output, "phase_diagram.csv"))}


def purification_fits(table: pd.DataFrame) -> Dict[str, Any]:
    """Power law of the mean purification time against ``L``, per ``p_M``.

    Sizes where no realization purified within the run have a NaN time and
    are listed under ``unpurified_sizes`` instead of entering the fit.
    """
    fits = {}
    for p_M, group in table.groupby("p_M"):
        measured = group[group["purification_time"] > 0]
        unpurified = sorted(group.loc[group["purification_time"].isna(), "L"].tolist())
        if unpurified:
            logger.warning(f"no realization purified at p_M={p_M} for L={unpurified}, left out of the fit")
        try:
            fit = fit_power_law(measured["L"], measured["purification_time"])
        except FitError as e:
            logger.info(f"no purification power law at p_M={p_M}: {e}")
            continue
        fits[f"{p_M:.6g}"] = dict(fit._asdict(), sizes=measured["L"].tolist(), unpurified_sizes=unpurified)
    return fits


def cmd_purify(config: ExperimentConfig) -> Dict[str, Any]:
    rows = []
    for protocol in config.protocol_configs():
        purification = PurificationConfig(protocol, config.ancillas, config.scramble)
        path = point_path(config.output, "purify", protocol.L, protocol.p_M)
        frame = load_point(path, asdict(purification), ["realization", "t", "S_a"])
        if frame is None:
            entropy = purification_experiment(purification, config.executor, config.workers)
            frame = pd.DataFrame(
                {
                    "realization": np.repeat(np.arange(entropy.shape[0]), entropy.shape[1]),
                    "t": np.tile(np.arange(entropy.shape[1]), entropy.shape[0]),
                    "S_a": entropy.ravel(),
                }
            )
            save_point(frame, path, asdict(purification))
        wide = frame.pivot(index="realization", columns="t", values="S_a").sort_index(axis=1).to_numpy()
        series = TimeSeries.from_samples(wide)
        times = [purification_time(row) for row in wide]
        purified = [t for t in times if t is not None]
        rows.append(
            {
                "L": protocol.L,
                "p_M": protocol.p_M,
                "realizations": len(times),
                "purified_fraction": len(purified) / len(times),
                "purification_time": float(np.mean(purified)) if purified else float("nan"),
                "final_entropy": float(series.values[-1]),
                "final_entropy_stderr": float(series.stderr[-1]),
            }
        )
    table = pd.DataFrame(rows)
    return {
        "purify": write_frame(table, os.path.join(config.output, "purify.csv")),
        "fits": write_json(purification_fits(table), os.path.join(config.output, "purify_fit.json")),
    }


def cmd_percolate(config: ExperimentConfig) -> Dict[str, Any]:
    frames = []
    for L in sorted(set(config.L)):
        path = os.path.join(config.output, "points", f"spanning_{config.kind}_L{L}.csv")
        params = dict(kind=config.kind, L=L, p_bond=list(config.p_bond), samples=config.samples,
                      seed=config.seed, criterion=config.criterion)
        found = load_point(path, params, ["L", "p_bond", "spanning_probability"])
        if found is None:
            found = spanning_table(
                config.kind, [L], config.p_bond, config.samples, config.seed, config.criterion,
                config.executor, config.workers,
            )
            save_point(found, path, params)
        frames.append(found)
    table = pd.concat(frames, ignore_index=True)
    estimate_ = threshold_from_table(table, config.seed, config.bootstrap)
    report = {
        "kind": config.kind,
        "criterion": config.criterion,
        "sizes": sorted(set(config.L)),
        "samples": config.samples,
        "p_c": estimate_.p_c,
        "stderr": estimate_.stderr,
        "missing_threshold": estimate_.missing_threshold,
    }
    return {
        "spanning": write_frame(table, os.path.join(config.output, "spanning.csv")),
        "threshold": write_json(report, os.path.join(config.output, "threshold.json")),
    }


def cmd_markov(config: ExperimentConfig) -> Dict[str, Any]:
    lattice = HoneycombLattice.build(config.L[0])
    p_M = config.p_M[0]
    channels = estimate(lattice, p_M, config.samples, config.seed, config.mode, config.executor, config.workers)
    matrix = channels.transfer_matrix()
    report: Dict[str, Any] = {"L": lattice.L, "p_M": p_M, "mode": config.mode}
    report["channels"] = channels.to_dict()
    report["transfer_matrix"] = matrix.to_dict()
    if config.columns:
        report["sampled_matrix"] = estimate_columns(
            lattice, p_M, config.samples, config.seed, config.mode, config.executor, config.workers
        ).to_dict()
    if config.input is not None:
        measured = pd.read_csv(config.input)
        point = measured[(measured["L"] == lattice.L) & np.isclose(measured["p_M"], p_M)].sort_values("t")
        if point.empty:
            raise ValueError(f"{config.input} holds no series for L={lattice.L}, p_M={p_M}")
        series = TimeSeries(point["mean"].to_numpy(dtype=float), point["stderr"].to_numpy(dtype=float))
        report["comparison"] = compare(matrix, series, config.cycles)
    predicted = pd.DataFrame({"t": np.arange(config.cycles + 1), "predicted": matrix.predict_series(config.cycles)})
    return {
        "markov": write_json(report, os.path.join(config.output, "markov.json")),
        "predicted": write_frame(predicted, os.path.join(config.output, "predicted.csv")),
    }


def cmd_collapse(config: ExperimentConfig) -> Dict[str, Any]:
    frame = pd.read_csv(config.input)
    dataset = ScalingDataset.from_frame(
        frame,
        p=config.p_column,
        L=config.size_column,
        y=config.y_column,
        sigma=config.sigma_column,
        ansatz=config.ansatz,
    )
    result = collapse(dataset, config.seed, config.bootstrap)
    return {
        "collapse": write_json(result.to_dict(), os.path.join(config.output, "collapse.json")),
        "collapsed": write_frame(collapsed_frame(dataset, result), os.path.join(config.output, "collapsed.csv")),
    }


SUBCOMMANDS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    "gt": cmd_gt,
    "sweep": cmd_sweep,
    "tee": cmd_tee,
    "purify": cmd_purify,
    "percolate": cmd_percolate,
    "markov": cmd_markov,
    "collapse": cmd_collapse,
    "phase-diagram": cmd_phase_diagram,
}
assert set(SUBCOMMANDS) == set(COMMANDS)


# -- entry point ----------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = resolve_config(args)
    except (ValueError, TypeError, OSError) as e:
        print(f"floquetlab {args.command}: invalid configuration: {e}", file=sys.stderr)
        if args.output:
            _try_manifest(args.output, {"command": args.command, "status": "invalid", "error": str(e)})
        return 2

    os.makedirs(os.path.join(config.output, "points"), exist_ok=True)
    manifest: Dict[str, Any] = {
        "command": config.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "config": config.to_dict(),
        "seed": config.seed,
        "version": __version__,
        "git": git_describe(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "status": "running",
        "error": None,
    }
    start = time.perf_counter()
    status = 0
    try:
        manifest["artifacts"] = SUBCOMMANDS[config.command](config)
        manifest["status"] = "ok"
    except Exception as e:
        logger.error(f"{config.command} failed: {e}")
        manifest["status"] = "failed"
        manifest["error"] = f"{type(e).__name__}: {e}"
        manifest["traceback"] = traceback.format_exc()
        status = 1
    finally:
        manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        manifest["wall_time"] = time.perf_counter() - start
        write_json(manifest, os.path.join(config.output, MANIFEST))
    return status


def _try_manifest(output: str, manifest: Dict[str, Any]) -> None:
    try:
        os.makedirs(output, exist_ok=True)
        write_json(manifest, os.path.join(output, MANIFEST))
    except OSError:
        pass


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
