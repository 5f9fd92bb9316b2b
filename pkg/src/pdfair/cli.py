"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Output files are written to a temporary name and renamed into place only
after the whole command has succeeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import dataset as ds
from . import harness
from .errors import ConfigError, DataError, NumericError, PdfairError
from .preprocess import apply_plan, fit_plan
from .tsvd import format_spectrum, singular_values

OUTPUT_DIR_ENV = "PDFAIR_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _write_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(outputs: dict[Path | None, bytes]) -> None:
    """Write every (path, payload) pair; a ``None`` path means stdout."""
    for path, payload in outputs.items():
        if path is None:
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
        else:
            _write_atomic(path, payload)


def _out_path(args, default_name: str) -> Path | None:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) / default_name if env else None


def _add_data_flags(p):
    src = p.add_argument_group("data")
    src.add_argument("--data", help="loan CSV file")
    src.add_argument("--schema", help="schema JSON path or bundled preset name")
    src.add_argument("--delimiter", default=",", choices=[",", "\t", ";"])
    src.add_argument("--synth-config", help="JSON synth config (rows, default_rate, seed, schema, ...)")
    p.add_argument("--seed", type=int, default=0, help="split and SVD seed")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--include-sensitive", action="store_true", help="use sensitive columns as model features")
    return src


def _add_model_flags(p, svd_required):
    p.add_argument("--model", choices=["ols", "logistic"], default="ols")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--class-weight", choices=["none", "balanced"], default="none")
    p.add_argument("--max-iters", type=int, default=500, help="logistic gradient-descent iterations")
    p.add_argument("--svd-rank", type=int, required=svd_required, help="truncated SVD rank k")
    p.add_argument("--oversampling", type=int, default=10)
    p.add_argument("--power-iters", type=int, default=2)
    p.add_argument("--group-by", action="append", default=[], metavar="ATTR[:BINS]",
                   help="fairness slice, e.g. MaritalStatus or Age:18-30,31-40,41-50,51-60,61+")
    p.add_argument("--reference", action="append", default=[], metavar="ATTR=GROUP",
                   help="disparate-impact reference group (default: largest group)")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out", help="report path; ROC CSVs are written next to it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdfair", description="PD model ablation with and without truncated SVD")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic loan CSV")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--default-rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schema", default="schema_kaggle_default.json")
    p.add_argument("--group-effect", action="append", default=[], metavar="ATTR:GROUP=SHIFT")
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--out")

    for name, required in (("run", False), ("ablate", True)):
        p = sub.add_parser(name, help="evaluate one arm" if name == "run" else "evaluate both arms")
        _add_data_flags(p)
        _add_model_flags(p, required)

    p = sub.add_parser("spectrum", help="dump singular values of the training design matrix")
    _add_data_flags(p)
    p.add_argument("--out")

    p = sub.add_parser("report", help="re-render a JSON report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--out")
    return parser


def _synth_spec(path: str) -> harness.SynthSpec:
    p = Path(path)
    if not p.exists():
        preset = ds.preset_path(p.name)
        if not preset.exists():
            raise DataError(f"synth config not found: {path}")
        p = preset
    try:
        return harness.SynthSpec.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"synth config {p}: {exc}") from None


def _pairs(items, sep, flag):
    out = {}
    for item in items:
        key, found, value = item.rpartition(sep)
        if not found or not key:
            raise ConfigError(f"{flag} {item!r}: expected KEY{sep}VALUE")
        out[key] = value
    return out


def config_from_args(args) -> harness.RunConfig:
    if args.data and args.synth_config:
        raise ConfigError("--data and --synth-config are mutually exclusive")
    if not args.data and not args.synth_config:
        raise ConfigError("one of --data or --synth-config is required")
    svd = None
    rank = getattr(args, "svd_rank", None)
    if rank is not None:
        svd = harness.SvdSpec(rank, getattr(args, "oversampling", 10), getattr(args, "power_iters", 2))
    return harness.RunConfig(
        data=args.data,
        schema=args.schema,
        delimiter=args.delimiter,
        synth=_synth_spec(args.synth_config) if args.synth_config else None,
        seed=args.seed,
        test_fraction=args.test_fraction,
        stratified=not args.no_stratify,
        model=getattr(args, "model", "ols"),
        threshold=getattr(args, "threshold", 0.5),
        class_weight=None if getattr(args, "class_weight", "none") == "none" else args.class_weight,
        max_iters=getattr(args, "max_iters", 500),
        svd=svd,
        group_by=tuple(harness.GroupSpec.parse(g) for g in getattr(args, "group_by", [])),
        references=_pairs(getattr(args, "reference", []), "=", "--reference"),
        include_sensitive=args.include_sensitive,
        format=getattr(args, "format", "text"),
    ).validate()


def _echo(config: harness.RunConfig) -> None:
    print("resolved config: " + json.dumps(config.to_dict(), sort_keys=True), file=sys.stderr)


def _cmd_synth(args) -> dict:
    try:
        effects = {k: float(v) for k, v in _pairs(args.group_effect, "=", "--group-effect").items()}
    except ValueError:
        raise ConfigError(f"--group-effect shifts must be numbers: {args.group_effect}") from None
    schema = ds.load_schema(args.schema)
    echo = {"rows": args.rows, "default_rate": args.default_rate, "seed": args.seed, "schema": args.schema,
            "group_effects": effects, "missing_rate": args.missing_rate}
    print("resolved config: " + json.dumps(echo, sort_keys=True), file=sys.stderr)
    frame = ds.synthesize(args.rows, schema, args.default_rate, effects, args.seed, args.missing_rate)
    with tempfile.TemporaryDirectory() as tmp:
        tmp_csv = Path(tmp) / "synth.csv"
        ds.write_csv(frame, tmp_csv)
        payload = tmp_csv.read_bytes()
    return {_out_path(args, "synth.csv"): payload}


def _report_outputs(args, report: harness.AblationReport) -> dict:
    out = _out_path(args, f"report.{args.format}")
    outputs = {out: harness.render_report(report, args.format)}
    if out is not None:
        for arm in report.arms:
            outputs[out.with_name(f"{out.stem}.roc_{arm.arm}.csv")] = arm.roc.to_csv().encode("utf-8")
    return outputs


def _cmd_run(args) -> dict:
    config = config_from_args(args)
    frame = harness.load_frame(config)
    config = harness.resolve(config, frame)
    _echo(config)
    split = harness.make_split(config, frame)
    arm = harness.run_arm(config, harness.SVD if config.svd else harness.BASELINE, split)
    report = harness.AblationReport(
        config=config.to_dict(),
        baseline=arm if arm.arm == harness.BASELINE else None,
        svd=arm if arm.arm == harness.SVD else None,
        flags=harness.arm_flags(arm),
    )
    return _report_outputs(args, report)


def _cmd_ablate(args) -> dict:
    config = config_from_args(args)
    frame = harness.load_frame(config)
    config = harness.resolve(config, frame)
    _echo(config)
    split = harness.make_split(config, frame)
    baseline = harness.run_arm(config, harness.BASELINE, split)
    svd = harness.run_arm(config, harness.SVD, split)
    return _report_outputs(args, harness.compare(baseline, svd, config.to_dict()))


def _cmd_spectrum(args) -> dict:
    config = config_from_args(args)
    frame = harness.load_frame(config)
    _echo(config)
    train = harness.make_split(config, frame).train
    X = apply_plan(fit_plan(train, config.include_sensitive), train).values
    return {_out_path(args, "spectrum.txt"): format_spectrum(singular_values(X, seed=config.seed)).encode()}


def _cmd_report(args) -> dict:
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    try:
        report = harness.load_report(path.read_bytes())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a report JSON ({exc})") from None
    return {_out_path(args, f"report.{args.format}"): harness.render_report(report, args.format)}


COMMANDS = {
    "synth": _cmd_synth,
    "run": _cmd_run,
    "ablate": _cmd_ablate,
    "spectrum": _cmd_spectrum,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _emit(COMMANDS[args.command](args))
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PdfairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
