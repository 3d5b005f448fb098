"""Command-line front end.

Subcommands ``ingest-check``, ``diagnose``, ``fit`` and ``forecast`` write
their artifacts under ``<out>/<subcommand>/`` together with a
``manifest.json`` of SHA-256 hashes. Exit codes: 0 success, 2 input
error, 3 insufficient or degenerate data, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import (
    conditional_tail_stats,
    empirical_ccdf,
    hill_curve,
    max_sum_ratio,
    mean_excess,
    mef_linear_onset,
    pickands_curve,
    records_analysis,
)
from .errors import (
    DataError,
    DegenerateInputError,
    FitError,
    GofError,
    InputError,
    InsufficientDataError,
    ParseError,
    TailcastError,
)
from .forecast import (
    forecast,
    mean_waiting_time,
    posterior_density_series,
    prior_from_process,
    update,
)
from .ingest import (
    SECONDS_PER_DAY,
    apply_rescale,
    bucket_weekly,
    cumulative_weekly,
    parse_events,
    rescale_factors,
    serialize_events,
)
from .jsonio import dumps
from .pot import MIN_EXCEED_FIT, MIN_EXCEED_GOF, bootstrap_gof, exceedances, gpd_mle, threshold_scan
from .process import build_process, expected_count, iid_checks

logger = logging.getLogger("tailcast")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_SEED = 20160101
DEFAULT_HORIZON = 365.0
DEFAULT_N_BOOT = 199
# fit: stability grid as multiples of --threshold
SCAN_MULTIPLES = (1.0, 2.5, 5.0, 10.0, 15.0)


@dataclass
class RunConfig:
    input: Optional[str] = None
    format: Optional[str] = None
    rescale: str = "max"
    threshold: Optional[float] = None
    horizon_days: float = DEFAULT_HORIZON
    n_boot: int = DEFAULT_N_BOOT
    seed: int = DEFAULT_SEED
    out: str = "tailcast-out"
    update_file: Optional[str] = None
    thresholds: Optional[list] = None

    def resolved_format(self) -> str:
        if self.format:
            return self.format
        return "jsonl" if str(self.input).lower().endswith((".jsonl", ".ndjson")) else "csv"


class _Outputs:
    """Collects artifacts for one subcommand and writes them with a manifest."""

    def __init__(self, cfg: RunConfig, command: str):
        self.dir = Path(cfg.out) / command
        self.command = command
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[f"{self.command}.{name}"] = text

    def write(self, extra: Optional[dict] = None):
        self.dir.mkdir(parents=True, exist_ok=True)
        manifest = []
        for name in sorted(self.files):
            data = self.files[name].encode("utf-8")
            (self.dir / name).write_bytes(data)
            manifest.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        doc = {"command": self.command, "version": __version__, "artifacts": manifest}
        if extra:
            doc.update(extra)
        (self.dir / "manifest.json").write_text(dumps(doc), encoding="utf-8")


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be > 0, got {text!r}")
    return v


def _boot_count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 99:
        raise argparse.ArgumentTypeError("--n-boot must be >= 99")
    return v


def _threshold_list(text):
    try:
        return [_positive_float(t) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad --thresholds: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values; flags win")
    common.add_argument("--input", help="event file (CSV or JSONL)")
    common.add_argument("--format", choices=["csv", "jsonl"], help="input format (default: from extension)")
    common.add_argument("--rescale", choices=["max", "mean", "median", "none"],
                        help="weekly activity rescaling (default: max)")
    common.add_argument("--threshold", type=_positive_float, help="exceedance threshold")
    common.add_argument("--horizon-days", type=_positive_float, dest="horizon_days",
                        help=f"forecast window in days (default: {DEFAULT_HORIZON:g})")
    common.add_argument("--n-boot", type=_boot_count, dest="n_boot",
                        help=f"bootstrap resamples (default: {DEFAULT_N_BOOT})")
    common.add_argument("--seed", type=int, help=f"random seed (default: {DEFAULT_SEED})")
    common.add_argument("--out", help="output directory (default: tailcast-out)")
    common.add_argument("--update-file", dest="update_file",
                        help="new interarrival times in days, one per line")
    common.add_argument("--thresholds", type=_threshold_list,
                        help="comma-separated stability grid for fit")

    parser = argparse.ArgumentParser(prog="tailcast", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest-check", parents=[common], help="parse input and report weekly activity")
    sub.add_parser("diagnose", parents=[common], help="records, CCDF, mean excess, Hill, Pickands, max/sum")
    sub.add_parser("fit", parents=[common], help="GPD stability table and bootstrap goodness of fit")
    sub.add_parser("forecast", parents=[common], help="Poisson exceedance process and Bayesian count forecast")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        names = {f.name for f in fields(RunConfig)}
        for key, val in raw.items():
            key = key.replace("-", "_")
            if key not in names:
                raise InputError(f"unknown config key {key!r}")
            values[key] = val
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            values[f.name] = val
    cfg = RunConfig(**values)
    if cfg.input is None:
        raise InputError("--input is required")
    if cfg.rescale not in ("max", "mean", "median", "none"):
        raise InputError(f"unknown rescale mode {cfg.rescale!r}")
    if not (cfg.horizon_days > 0):
        raise InputError("horizon must be > 0")
    if int(cfg.n_boot) < 99:
        raise InputError("n_boot must be >= 99")
    return cfg


def _load(cfg: RunConfig):
    try:
        with open(cfg.input, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {cfg.input}: {exc}") from None
    series = parse_events(data, cfg.resolved_format())
    return series, hashlib.sha256(data).hexdigest()


def _rescaled(series, mode):
    if mode == "none":
        return series, None
    plan = rescale_factors(bucket_weekly(series), mode)
    return apply_rescale(series, plan), plan


def _require_threshold(cfg):
    if cfg.threshold is None:
        raise InputError("--threshold is required for this subcommand")
    return float(cfg.threshold)


# -- subcommands ---------------------------------------------------------------


def cmd_ingest_check(cfg: RunConfig) -> int:
    series, digest = _load(cfg)
    weeks = bucket_weekly(series)
    cum = cumulative_weekly(weeks)
    out = _Outputs(cfg, "ingest-check")
    factors = None
    if cfg.rescale != "none":
        rescaled, plan = _rescaled(series, cfg.rescale)
        factors = plan.factors
        out.add("rescaled.csv", serialize_events(rescaled))
    lines = ["week_index,count,cumulative" + (",factor" if factors else "")]
    for w, (_, c) in zip(weeks, cum):
        row = f"{w.week_index},{w.count},{c}"
        if factors:
            row += f",{factors[w.week_index - 1]:.17g}"
        lines.append(row)
    out.add("weekly.csv", "\n".join(lines) + "\n")
    out.add("events.csv", serialize_events(series))
    out.add("summary.json", dumps({
        "n_events": len(series),
        "n_row_errors": len(series.row_errors),
        "row_errors": [{"line": e.line, "message": e.message} for e in series.row_errors],
        "origin": series.origin,
        "span_days": float(series.timestamps[-1] - series.origin) / SECONDS_PER_DAY,
        "n_weeks": len(weeks),
        "rescale": cfg.rescale,
        "magnitude_max": float(series.magnitudes.max()),
    }))
    out.write({"input_sha256": digest})
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    series, digest = _load(cfg)
    data, _ = _rescaled(series, cfg.rescale)
    mags = data.magnitudes
    out = _Outputs(cfg, "diagnose")

    rec = records_analysis(mags)
    ccdf = empirical_ccdf(mags)
    mef = mean_excess(mags)
    positive = mags[mags > 0]
    if positive.size < 4:
        raise DegenerateInputError("fewer than 4 positive magnitudes")
    hill = hill_curve(positive)
    pick = pickands_curve(mags)
    msr = max_sum_ratio(mags, 1.0)

    for s in (rec.as_series(), ccdf, mef, hill, pick):
        out.add(f"{s.name}.csv", s.to_csv())
    out.add("max_sum_ratio.csv", msr.to_csv())

    summary = {
        "n_events": len(data),
        "rescale": cfg.rescale,
        "records": {
            "count": rec.total,
            "expected": float(rec.expected[-1]),
            "band95": [float(rec.band_low[-1]), float(rec.band_high[-1])],
            "within_band": bool(not rec.outside_band()[-1]),
        },
        "max_sum_ratio_final": {
            f"p{p}": float(max_sum_ratio(mags, float(p)).y[-1]) for p in (1, 2, 3, 4)
        },
        "mef_linear_onset": mef_linear_onset(mef),
    }
    if cfg.rescale != "none":
        raw = records_analysis(series.magnitudes)
        summary["records_raw"] = {
            "count": raw.total,
            "within_band": bool(not raw.outside_band()[-1]),
        }
    if cfg.threshold is not None and np.any(mags > cfg.threshold):
        tail = conditional_tail_stats(mags, cfg.threshold)
        summary["conditional_tail"] = tail.__dict__
    out.add("summary.json", dumps(summary))
    out.write({"input_sha256": digest})
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    t = _require_threshold(cfg)
    series, digest = _load(cfg)
    data, _ = _rescaled(series, cfg.rescale)
    mags = data.magnitudes
    exc = exceedances(mags, t)
    if exc.size < MIN_EXCEED_FIT:
        raise InsufficientDataError(f"{exc.size} exceedances above {t:g}; need {MIN_EXCEED_FIT}")
    grid = cfg.thresholds if cfg.thresholds else [t * m for m in SCAN_MULTIPLES]
    grid = sorted(set(float(g) for g in grid) | {t})
    table = threshold_scan(mags, grid)
    out = _Outputs(cfg, "fit")
    out.add("stability.csv", table.to_csv())
    out.add("stability.json", table.to_json())

    fit = gpd_mle(exc, t, raise_on_failure=False)
    status = EXIT_OK
    gof_doc = {"threshold": t, "fit": fit.to_dict()}
    if not fit.converged:
        gof_doc["error"] = "GPD likelihood did not converge; best iterate reported"
        status = EXIT_NUMERIC
    elif exc.size < MIN_EXCEED_GOF:
        gof_doc["skipped"] = f"goodness of fit needs {MIN_EXCEED_GOF} exceedances, got {exc.size}"
    else:
        try:
            gof = bootstrap_gof(exc, t, int(cfg.n_boot), int(cfg.seed))
            gof_doc.update(gof.to_dict())
        except GofError as exc_:
            gof_doc["error"] = str(exc_)
            status = EXIT_NUMERIC
    out.add("gof.json", dumps(gof_doc))
    out.write({"input_sha256": digest})
    if status != EXIT_OK:
        _err(gof_doc["error"])
    return status


def read_update_file(path: str) -> list[float]:
    """One positive interarrival (days) per line; blank lines and ``#`` comments skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read update file {path}: {exc}") from None
    values = []
    for no, line in enumerate(lines, start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        try:
            v = float(s)
        except ValueError:
            raise ParseError(f"{path}:{no}: not a number: {s!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise ParseError(f"{path}:{no}: interarrival must be > 0, got {s!r}")
        values.append(v)
    return values


def cmd_forecast(cfg: RunConfig) -> int:
    t = _require_threshold(cfg)
    new = read_update_file(cfg.update_file) if cfg.update_file else []
    series, digest = _load(cfg)
    data, _ = _rescaled(series, cfg.rescale)
    proc = build_process(data, t)
    prior = prior_from_process(proc)
    post = update(prior, new)
    theta = float(cfg.horizon_days)
    fc = forecast(post, theta)

    out = _Outputs(cfg, "forecast")
    checks = iid_checks(proc)
    out.add("qq.csv", checks.qq.to_csv())
    if checks.acf is not None:
        out.add("acf.csv", checks.acf.to_csv())
    out.add("pmf.csv", fc.pmf_csv())
    out.add("prior_density.csv", posterior_density_series(prior, name="prior_density").to_csv())
    out.add("posterior_density.csv", posterior_density_series(post).to_csv())
    out.add("json", dumps({
        "threshold": t,
        "horizon_days": theta,
        "process": proc.to_dict(),
        "plugin_expected_count": expected_count(proc, theta),
        "prior": prior.to_dict(),
        "posterior": post.to_dict(),
        "update_interarrivals": new,
        "mean_waiting_time_days": mean_waiting_time(post),
        "predictive_mean": fc.predictive_mean,
        "predictive_var": fc.predictive_var,
        "credible_90": list(fc.credible_90),
        "pmf": fc.probabilities.tolist(),
        "qq_slope_days": checks.qq.meta["slope"],
    }))
    out.write({"input_sha256": digest})
    return EXIT_OK


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "diagnose": cmd_diagnose,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
}


def _err(msg):
    print(f"tailcast: error: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="tailcast: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        _err(exc)
        return EXIT_INPUT
    except DataError as exc:
        _err(exc)
        return EXIT_DATA
    except (FitError, GofError) as exc:
        _err(exc)
        return EXIT_NUMERIC
    except TailcastError as exc:  # pragma: no cover - every subclass is mapped above
        _err(exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
