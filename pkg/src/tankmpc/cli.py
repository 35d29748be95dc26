"""Command-line front end: linearize, simulate, sweep.

Exit codes: 0 success, 1 partial sweep failure, 2 configuration error,
3 runtime (solver/integrator/IO) error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    default_run_config,
    load_config,
    with_mpc_value,
)
from .discretize import zoh_discretize
from .loop import SimulationError, StepMetrics, run_closed_loop, summarize
from .tank import linearize, make_operating_point

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load(config_path: str | None) -> RunConfig:
    if config_path is None:
        return default_run_config()
    return load_config(config_path)


def _fmt_matrix(name: str, mat: np.ndarray) -> str:
    rows = ["  ".join(f"{v:10.4g}" for v in row) for row in np.atleast_2d(mat)]
    pad = " " * (len(name) + 3)
    return f"{name} = " + ("\n" + pad).join(rows)


def cmd_linearize(args) -> int:
    cfg = _load(args.config)
    sc = cfg.scenario
    op = make_operating_point(sc.params, *sc.op_levels)
    lin = linearize(sc.params, op)
    disc = zoh_discretize(lin, sc.ts)

    print(f"Operating point: l1={op.l1:g} m, l2={op.l2:g} m, "
          f"fi1_bar={op.fi1_bar:.4g} m^3/s, fi2_bar={op.fi2_bar:.4g} m^3/s")
    print("\nContinuous-time model:")
    for name, mat in (("A", lin.a), ("B", lin.b), ("C", lin.c), ("D", lin.d)):
        print(_fmt_matrix(name, mat))
    print(f"\nZero-order-hold model at Ts = {sc.ts:g} s:")
    for name, mat in (("Ad", disc.ad), ("Bd", disc.bd)):
        print(_fmt_matrix(name, mat))
    return EXIT_OK


def _write_csv_atomic(text: str, out_path: Path) -> None:
    """Write via a same-directory temp file so failures leave nothing behind."""
    out_path = Path(out_path)
    try:
        fd, tmp = tempfile.mkstemp(dir=str(out_path.parent), suffix=".tmp")
    except OSError as exc:
        raise OSError(f"cannot write {out_path}: {exc}") from None
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _metric_lines(metrics) -> list[str]:
    def fmt(m: StepMetrics) -> str:
        settle = f"{m.settling_time:.3g} s" if m.settled else "not settled"
        rise = f"{m.rise_time:.3g} s" if m.rise_time is not None else "-"
        return (f"  {m.output} @ t={m.t_edge:g} s -> {m.target:g} m: "
                f"rise {rise}, settling {settle}, overshoot {m.overshoot_pct:.2f}%, "
                f"final error {m.steady_state_error:.3g} m")

    lines = []
    for name in sorted(metrics.outputs):
        lines.extend(fmt(m) for m in metrics.outputs[name])
    for name in sorted(metrics.max_control_step):
        lines.append(f"  max |d{name}| per step: {metrics.max_control_step[name]:.4g} m^3/s")
    return lines


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    out = args.out or cfg.output_path
    if out is None:
        raise ConfigError("no output path: pass --out or set output.path in the config")

    log = run_closed_loop(cfg.scenario)
    _write_csv_atomic(log.to_csv_text(), Path(out))
    print(f"wrote {len(log)} samples to {out}")
    print("step-response metrics:")
    for line in _metric_lines(summarize(log, cfg.scenario)):
        print(line)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    raw_values = [v for v in (s.strip() for s in args.values.split(",")) if v]
    if not raw_values:
        raise ConfigError("empty --values list")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results: list[tuple[float, str]] = []  # (value, summary line or FAILED)
    any_failed = False
    for raw in raw_values:
        try:
            value = float(raw) if args.param == "rw" else int(raw)
            run_cfg = with_mpc_value(cfg, args.param, value)
            log = run_closed_loop(run_cfg.scenario)
            out_path = out_dir / f"{args.param}_{raw}.csv"
            _write_csv_atomic(log.to_csv_text(), out_path)
            metrics = summarize(log, run_cfg.scenario)
            settle = []
            for name in sorted(metrics.outputs):
                worst = None
                for m in metrics.outputs[name]:
                    if not m.settled:
                        worst = "not settled"
                        break
                    worst = max(worst or 0.0, m.settling_time)
                settle.append(f"{name}: {worst if isinstance(worst, str) else f'{worst:.3g} s'}")
            results.append((float(value), f"{args.param}={raw}  " + "  ".join(settle)
                            + f"  -> {out_path.name}"))
        except (ConfigError, ValueError, SimulationError, np.linalg.LinAlgError) as exc:
            any_failed = True
            results.append((float("inf") if _nansafe(raw) is None else _nansafe(raw),
                            f"{args.param}={raw}  FAILED: {exc}"))
            print(f"value {raw}: FAILED ({exc})", file=sys.stderr)

    print(f"sweep over {args.param}:")
    for _, line in sorted(results, key=lambda kv: kv[0]):
        print(" ", line)
    return EXIT_PARTIAL if any_failed else EXIT_OK


def _nansafe(raw: str):
    try:
        return float(raw)
    except ValueError:
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tankmpc",
        description="Receding-horizon level control of a two-coupled-tank plant",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lin = sub.add_parser("linearize", help="print the continuous and sampled models")
    p_lin.add_argument("--config", help="config file (defaults to the bundled scenario)")
    p_lin.set_defaults(func=cmd_linearize)

    p_sim = sub.add_parser("simulate", help="run a closed-loop scenario to CSV")
    p_sim.add_argument("--config", help="config file (defaults to the bundled scenario)")
    p_sim.add_argument("--out", help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_swp = sub.add_parser("sweep", help="re-run the scenario over a parameter list")
    p_swp.add_argument("--config", help="config file (defaults to the bundled scenario)")
    p_swp.add_argument("--param", required=True, choices=("rw", "np", "nc"))
    p_swp.add_argument("--values", required=True, help="comma-separated values")
    p_swp.add_argument("--out-dir", required=True, help="directory for per-value CSVs")
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, np.linalg.LinAlgError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
