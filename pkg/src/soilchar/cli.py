"""``soilchar`` command line: one binary, one subcommand per workflow step.

Exit codes: 0 success (or suitable soil), 1 unsuitable soil, 2 usage error,
3 data or validation error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from enum import IntEnum

import numpy as np

from . import measurement, salinity, suitability
from .ann import data as ann_data
from .ann.lm import STOP_MU, TrainingConfig, train_on_split
from .ann.metrics import evaluate
from .ann.network import Network, forward
from .errors import NumericError, OutOfCalibrationWarning, SoilcharError

log = logging.getLogger("soilchar")


class ExitStatus(IntEnum):
    OK = 0
    UNSUITABLE = 1
    USAGE = 2
    DATA = 3
    NUMERIC = 4


class UsageError(Exception):
    pass


def _num(value: float, digits: int = 6) -> str:
    return f"{value:#.{digits}g}"


def _full(value: float) -> str:
    return repr(float(value))


def _csv(args) -> bool:
    return args.format == "csv"


# -- subcommands -----------------------------------------------------------


def cmd_resistivity(args) -> int:
    if (args.area is None) == (args.radius is None):
        raise UsageError("give exactly one of --area or --radius")
    area = args.area if args.area is not None else measurement.cross_section_area(args.radius)
    rho = measurement.resistivity(args.resistance, area, args.spacing)
    if _csv(args):
        print("resistivity_kohm_m")
        print(_full(rho))
    else:
        print(_num(rho))
    return ExitStatus.OK


def cmd_fit(args) -> int:
    samples = measurement.load_calibration(args.data)
    if not samples:
        raise SoilcharError(f"{args.data}: no calibration rows")
    bank = salinity.fit_bank(samples, levels=args.moisture, drop_rising=not args.keep_all)
    if args.out:
        salinity.save_bank(bank, args.out)
    if _csv(args):
        print("moisture_pct,amplitude,decay,r_squared,n_points,low_confidence")
        for level in bank.levels():
            m = bank.models[level]
            print(
                f"{_full(level)},{_full(m.amplitude)},{_full(m.decay)},"
                f"{_full(m.r_squared)},{m.n_points},{str(m.low_confidence).lower()}"
            )
    else:
        print(f"{'moisture%':>9}  {'A':>12}  {'B':>12}  {'R2':>8}  {'n':>3}")
        for level in bank.levels():
            m = bank.models[level]
            flag = "  low-confidence" if m.low_confidence else ""
            print(
                f"{level:>9g}  {_num(m.amplitude):>12}  {_num(m.decay):>12}  "
                f"{_num(m.r_squared, 4):>8}  {m.n_points:>3}{flag}"
            )
    return ExitStatus.OK


def cmd_invert(args) -> int:
    bank = salinity.load_bank(args.bank)
    model = salinity.select_model(bank, args.moisture)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutOfCalibrationWarning)
        x = salinity.invert_salinity(model, args.resistivity)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if _csv(args):
        print("moisture_pct,salinity_pct")
        print(f"{_full(model.moisture_pct)},{_full(x)}")
    else:
        print(_num(x, 4))
    return ExitStatus.OK


def cmd_train(args) -> int:
    if args.synthesize:
        calibration = measurement.load_calibration(args.calibration)
        dataset = ann_data.synthesize_training_set(
            calibration, moisture_levels=args.levels, seed=args.seed, n_samples=args.samples
        )
    else:
        dataset = ann_data.load_dataset(args.data)
    config = TrainingConfig(
        hidden_units=args.hidden,
        seed=args.seed,
        max_epochs=args.max_epochs,
        patience=args.patience,
        log_resistivity=not args.linear_resistivity,
    )
    train_set, val_set, test_set = ann_data.split_dataset(dataset, config.split_fractions, config.seed)
    network, report = train_on_split(config, train_set, val_set, test_set)
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    network.save(args.out)

    scores = {}
    for name, part in (("train", train_set), ("validation", val_set), ("test", test_set)):
        try:
            scores[name] = evaluate(network, part).r_squared
        except SoilcharError:
            scores[name] = float("nan")
    if _csv(args):
        print("best_epoch,best_val_mse,stop_reason,r2_train,r2_validation,r2_test")
        print(
            f"{report.best_epoch},{_full(report.best_val_mse)},{report.stop_reason},"
            f"{_full(scores['train'])},{_full(scores['validation'])},{_full(scores['test'])}"
        )
    else:
        print(f"samples       {len(dataset)} ({len(train_set)}/{len(val_set)}/{len(test_set)})")
        print(f"best_epoch    {report.best_epoch}")
        print(f"best_val_mse  {_num(report.best_val_mse)}")
        print(f"stop_reason   {report.stop_reason}")
        for name, value in scores.items():
            print(f"r2_{name:<10} {_num(value)}")
    if report.stop_reason == STOP_MU and report.accepted_epochs == 0:
        print("error: no LM step reduced the training error", file=sys.stderr)
        return ExitStatus.NUMERIC
    return ExitStatus.OK


def cmd_predict(args) -> int:
    try:
        values = [float(v) for v in args.input.split(",")]
    except ValueError as exc:
        raise UsageError(f"--input: {exc}") from exc
    if len(values) != 4:
        raise UsageError(f"--input needs 4 values (moisture,ph,temperature,resistivity), got {len(values)}")
    network = Network.load(args.model)
    y = forward(network, np.array(values))
    if _csv(args):
        print("salinity_pct")
        print(_full(y))
    else:
        print(_num(y))
    return ExitStatus.OK


def cmd_analyze(args) -> int:
    reading = suitability.load_reading(args.reading)
    ranges = suitability.load_ranges(args.ranges)
    decision = suitability.analyze(reading, ranges)
    if _csv(args):
        print("verdict,problems")
        print(f"{decision.verdict},{';'.join(decision.problems)}")
    else:
        print(decision.verdict)
        for tag in decision.problems:
            print(tag)
    return ExitStatus.OK if decision.suitable else ExitStatus.UNSUITABLE


def cmd_report_agreement(args) -> int:
    report = measurement.method_agreement(measurement.load_agreement(args.data))
    if _csv(args):
        print("parameter,max_spread,all_within_field")
        for param, spread in report.max_spread.items():
            within = report.all_within_field.get(param)
            print(f"{param},{_full(spread)},{'' if within is None else str(within).lower()}")
        return ExitStatus.OK
    for row in report.rows:
        field = (
            f"[{row.field_low:g}, {row.field_high:g}]" if row.field_is_interval else f"{row.field_low:g}"
        )
        inside = "" if row.within_field is None else ("  inside" if row.within_field else "  OUTSIDE")
        print(
            f"{row.parameter:<12}{row.sample_label:<4}field {field:<10} lab {row.lab_value:<6g} "
            f"iot {row.iot_value:<6g} spread {row.spread:.6g}{inside}"
        )
    print()
    for param, spread in report.max_spread.items():
        line = f"max {param} spread: {spread:.6g}"
        if param in report.all_within_field:
            line += f" (lab and iot inside field interval: {'yes' if report.all_within_field[param] else 'no'})"
        print(line)
    return ExitStatus.OK


def cmd_serve(args) -> int:
    from .telemetry import make_server

    try:
        server = make_server(args.data_dir, host=args.host, port=args.port, admin_key=args.admin_key)
    except OSError as exc:
        print(f"error: cannot listen on {args.host}:{args.port}: {exc}", file=sys.stderr)
        return ExitStatus.DATA
    print(f"serving {args.data_dir} on {server.url}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return ExitStatus.OK


def cmd_channel_create(args) -> int:
    from .telemetry import ChannelStore

    field_map = {}
    for item in args.field:
        slot, sep, label = item.partition("=")
        if not sep:
            raise UsageError(f"--field expects slot=label, got {item!r}")
        field_map[slot] = label
    channel = ChannelStore(args.data_dir).create_channel(args.name, field_map, public=args.public)
    if _csv(args):
        print("id,write_key,read_key")
        print(f"{channel.id},{channel.write_key},{channel.read_key}")
    else:
        print(f"channel    {channel.id}")
        print(f"write_key  {channel.write_key}")
        print(f"read_key   {channel.read_key}")
    return ExitStatus.OK


# -- parser ------------------------------------------------------------------


def _bundled(name: str) -> str:
    return str(measurement.bundled_path(name))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soilchar", description=__doc__.splitlines()[0])
    parser.add_argument("--format", choices=("human", "csv"), default="human")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resistivity", help="resistivity from a probe resistance")
    p.add_argument("--resistance", type=float, required=True, help="kΩ")
    p.add_argument("--spacing", type=float, required=True, help="probe spacing, m")
    p.add_argument("--area", type=float, help="cross-section, m²")
    p.add_argument("--radius", type=float, help="bowl radius, m")
    p.set_defaults(func=cmd_resistivity)

    p = sub.add_parser("fit", help="fit per-moisture exponential models")
    p.add_argument("--data", default=_bundled("table2.csv"))
    p.add_argument("--moisture", type=float, action="append", help="level to fit (repeatable)")
    p.add_argument("--out", help="write the model bank here")
    p.add_argument("--keep-all", action="store_true", help="do not drop rising readings")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("invert", help="salinity from resistivity")
    p.add_argument("--bank", required=True)
    p.add_argument("--moisture", type=float, required=True)
    p.add_argument("--resistivity", type=float, required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("train", help="train the salinity network")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV: moisture_pct,ph,temperature_c,resistivity_kohm_m,salinity_pct")
    src.add_argument("--synthesize", action="store_true", help="build the dataset from calibration rows")
    p.add_argument("--calibration", default=_bundled("table2.csv"))
    p.add_argument("--levels", type=float, nargs="+", default=list(ann_data.DEFAULT_LEVELS))
    p.add_argument("--samples", type=int, default=100, help="synthesized dataset size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=6)
    p.add_argument("--linear-resistivity", action="store_true", help="skip log scaling of resistivity")
    p.add_argument("--out", default="network.json")
    p.add_argument("--report", default="train_report.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="salinity from a trained network")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="moisture,ph,temperature,resistivity")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("analyze", help="suitability verdict for a reading")
    p.add_argument("--reading", required=True)
    p.add_argument("--ranges", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the telemetry HTTP service")
    p.add_argument("--port", type=int, default=int(os.environ.get("SOILCHAR_PORT", "8080")))
    p.add_argument("--host", default=os.environ.get("SOILCHAR_HOST", "127.0.0.1"))
    p.add_argument("--data-dir", default=os.environ.get("SOILCHAR_DATA_DIR", "telemetry-data"))
    p.add_argument("--admin-key", default=os.environ.get("SOILCHAR_ADMIN_KEY"))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("channel-create", help="create a telemetry channel in a data directory")
    p.add_argument("--data-dir", default=os.environ.get("SOILCHAR_DATA_DIR", "telemetry-data"))
    p.add_argument("--name", required=True)
    p.add_argument("--field", action="append", required=True, help="slot=label, e.g. field1=moisture_pct")
    p.add_argument("--public", action="store_true")
    p.set_defaults(func=cmd_channel_create)

    p = sub.add_parser("report-agreement", help="field/lab/IoT agreement report")
    p.add_argument("--data", default=_bundled("agreement.csv"))
    p.set_defaults(func=cmd_report_agreement)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return int(args.func(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.USAGE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.NUMERIC
    except (SoilcharError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ExitStatus.DATA


if __name__ == "__main__":
    sys.exit(main())
