"""Command-line entry point for the Monte Carlo experiments.

Subcommands: ber, feedback, sumrate, convergence, complexity.  Numeric
defaults can also come from a plain key=value config file (--config);
explicit flags win over the file, which wins over built-in defaults.

Exit codes: 0 success, 2 invalid configuration, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .complexity import ALGORITHMS as COMPLEXITY_ALGORITHMS
from .complexity import complexity_counts
from .core import SystemConfig
from .errors import ConfigError, DivergenceError
from .harness import (
    ExperimentSpec,
    KNOWN_ALGORITHMS,
    run_experiment,
    write_results,
)

_CFG_FIELDS = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_SPEC_FIELDS = {
    f.name for f in dataclasses.fields(ExperimentSpec)
    if f.name not in ("experiment", "cfg", "output_path")
}
_GRID_KEYS = ("snr_min", "snr_max", "snr_step")


def _coerce(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "," in text:
        return tuple(_coerce(part) for part in text.split(","))
    return text


def load_config(path) -> dict:
    """Parse a key=value file; '#' starts a comment."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: expected key=value, got {raw!r}")
        key, text = line.split("=", 1)
        values[key.strip()] = _coerce(text)
    return values


def _add_common(parser: argparse.ArgumentParser, with_grid: bool = True):
    parser.add_argument("--config", type=str, default=None,
                        help="key=value file with SystemConfig/experiment fields")
    parser.add_argument("--algorithms", type=str, default=None,
                        help=f"comma-separated subset of {', '.join(KNOWN_ALGORITHMS)}")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--training-len", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, required=True, help="output CSV path")
    if with_grid:
        parser.add_argument("--snr-min", type=float, default=None)
        parser.add_argument("--snr-max", type=float, default=None)
        parser.add_argument("--snr-step", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopmimo",
        description="Monte Carlo experiments for adaptive power allocation "
                    "in two-hop cooperative MIMO links",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", help="BER versus received SNR")
    _add_common(ber)

    fb = sub.add_parser("feedback", help="BER under quantized feedback")
    _add_common(fb)
    fb.add_argument("--bits", type=str, default="2,3,4",
                    help="comma-separated quantizer widths")

    sr = sub.add_parser("sumrate", help="sum rate versus received SNR")
    _add_common(sr)

    conv = sub.add_parser("convergence", help="BER versus received symbols")
    _add_common(conv, with_grid=False)
    conv.add_argument("--symbols", type=int, default=None)
    conv.add_argument("--snr-db", type=float, default=None)

    comp = sub.add_parser("complexity", help="per-symbol operation counts")
    comp.add_argument("--algorithms", type=str,
                      default=",".join(COMPLEXITY_ALGORITHMS))
    comp.add_argument("-N", "--antennas", type=int, default=2)
    comp.add_argument("-T", "--slots", type=int, default=2)
    comp.add_argument("-M", "--window", type=int, default=10)
    return parser


def _grid_from(file_cfg: dict, args) -> tuple[float, ...]:
    lo = args.snr_min if args.snr_min is not None else file_cfg.get("snr_min", 0.0)
    hi = args.snr_max if args.snr_max is not None else file_cfg.get("snr_max", 15.0)
    step = args.snr_step if args.snr_step is not None else file_cfg.get("snr_step", 3.0)
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad SNR grid: min={lo}, max={hi}, step={step}")
    grid = []
    x = float(lo)
    while x <= hi + 1e-9:
        grid.append(round(x, 9))
        x += step
    return tuple(grid)


def _build_spec(experiment: str, args) -> ExperimentSpec:
    file_cfg = load_config(args.config) if args.config else {}

    cfg_kwargs = {k: v for k, v in file_cfg.items() if k in _CFG_FIELDS}
    if args.seed is not None:
        cfg_kwargs["seed"] = args.seed
    cfg = SystemConfig(**cfg_kwargs)

    spec_kwargs = {k: v for k, v in file_cfg.items()
                   if k in _SPEC_FIELDS and k not in ("snr_grid_db",)}
    if "snr_grid_db" in file_cfg:
        spec_kwargs["snr_grid_db"] = file_cfg["snr_grid_db"]
    elif experiment != "convergence":
        spec_kwargs["snr_grid_db"] = _grid_from(file_cfg, args)
    if args.algorithms:
        spec_kwargs["algorithms"] = tuple(a.strip() for a in args.algorithms.split(","))
    if args.trials is not None:
        spec_kwargs["trials"] = args.trials
    if args.training_len is not None:
        spec_kwargs["training_len"] = args.training_len
    if experiment == "feedback-bits":
        bits = getattr(args, "bits", None)
        if bits:
            spec_kwargs["feedback_bits"] = tuple(int(b) for b in bits.split(","))
        spec_kwargs.setdefault("algorithms", ("JAPA-MBER-SG",))
    if experiment == "convergence":
        if args.symbols is not None:
            spec_kwargs["convergence_symbols"] = args.symbols
        if args.snr_db is not None:
            spec_kwargs["convergence_snr_db"] = args.snr_db
    return ExperimentSpec(experiment=experiment, cfg=cfg,
                          output_path=args.out, **spec_kwargs)


def _run_complexity(args) -> int:
    rows = []
    for name in args.algorithms.split(","):
        report = complexity_counts(name.strip(), args.antennas, args.slots,
                                   window=args.window)
        rows.append(report)
    width = max(len(r.algorithm) for r in rows)
    print(f"{'algorithm'.ljust(width)}  multiplications  additions")
    for r in rows:
        print(f"{r.algorithm.ljust(width)}  {r.multiplications:>15d}  {r.additions:>9d}")
    return 0


_COMMAND_TO_EXPERIMENT = {
    "ber": "ber-vs-snr",
    "feedback": "feedback-bits",
    "sumrate": "sum-rate",
    "convergence": "convergence",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "complexity":
            return _run_complexity(args)
        experiment = _COMMAND_TO_EXPERIMENT[args.command]
        spec = _build_spec(experiment, args)
        points = run_experiment(spec)
        write_results(points, spec.output_path)
        print(f"wrote {len(points)} points to {spec.output_path}")
        return 0
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
