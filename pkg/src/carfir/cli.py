"""Command-line pipeline: gen, partition, identify, extract, errors, sweep, predict.

Every stage reads and writes artifacts in ``--workdir``.  Options may also
come from a ``key = value`` file given with ``--config``; flags on the
command line win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence


from .dataset import Dataset, TimeSeries, load_csv, normalize, parse_range, split, write_csv
from .evaluation import (
    DEFAULT_PERCENTS,
    SynthSpec,
    config_digest,
    efp_partitions,
    emit_report,
    format_report,
    forecast_error,
    run_sweep,
    synth_generate,
)
from .forecast import fir_forecast
from .fuzzifier import Partition
from .identification import Mask, PatternRuleBase, apply_mask, best_mask, default_template, mask_quality
from .mixed import KINDS, build_error_model, build_mixed_model, mixed_forecast, select_retained_rules
from .sugeno import SugenoRuleBase, cost, init_rule_grid, tune_weights


PARTITIONS = "partitions.json"
MASK = "mask.txt"
PRB = "prb.json"
SUGENO = "sugeno.json"
ERRORS = "errors.json"
MIXED = "mixed.json"
DATA = "data.csv"


class CliError(Exception):
    pass


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(f"missing artifact {path}; run the earlier stage first") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from None


def _ranges(text: str) -> list[tuple[int, int]]:
    return [parse_range(r) for r in text.split(",") if r.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _data_path(args) -> Path:
    return Path(args.data) if args.data else Path(args.workdir) / DATA


def _load_raw(args) -> Dataset:
    path = _data_path(args)
    try:
        with open(path, "rb") as fh:
            return load_csv(fh, args.columns.split(","), time_column=args.time_column or None)
    except FileNotFoundError:
        raise CliError(f"cannot read data file {path}") from None


def _load_normalized(args) -> tuple[Dataset, dict]:
    info = _read_json(Path(args.workdir) / PARTITIONS)
    raw = _load_raw(args)
    if raw.names != info["variables"]:
        raise CliError(f"data columns {raw.names} do not match partitions.json {info['variables']}")
    params = {k: tuple(v) for k, v in info["normalization"].items()}
    return normalize(raw, params), info


def _partitions(info: dict) -> list[Partition]:
    return [Partition.from_dict(p) for p in info["partitions"]]


def _load_prb(args) -> PatternRuleBase:
    return PatternRuleBase.from_dict(_read_json(Path(args.workdir) / PRB))


def _load_srb(args) -> SugenoRuleBase:
    return SugenoRuleBase.from_dict(_read_json(Path(args.workdir) / SUGENO))


# --------------------------------------------------------------------------
# stages


def cmd_gen(args) -> int:
    lo_u, hi_u, lo_y, hi_y = _floats(args.window)
    spec = SynthSpec(
        length=args.length,
        seed=args.seed,
        delay=args.delay,
        feedback=args.feedback,
        gain=args.gain,
        steepness=args.steepness,
        ripple=args.ripple,
        noise=args.noise,
        window=((lo_u, hi_u), (lo_y, hi_y)),
    )
    ds = synth_generate(spec)
    path = _data_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        write_csv(ds, fh)
    print(f"wrote {len(ds)} samples to {path}")
    return 0


def cmd_partition(args) -> int:
    raw = _load_raw(args)
    train_range = parse_range(args.train)
    raw_train, _ = split(raw, train_range)
    train = normalize(raw_train)
    parts = efp_partitions(train, args.classes)
    info = {
        "variables": raw.names,
        "train": list(train_range),
        "normalization": {k: list(v) for k, v in train.normalization.items()},
        "partitions": [p.to_dict() for p in parts],
    }
    _write_json(Path(args.workdir) / PARTITIONS, info)
    for name, p in zip(raw.names, parts):
        print(f"{name}: " + " ".join(repr(v) for v in p.landmarks))
    return 0


def cmd_identify(args) -> int:
    ds, info = _load_normalized(args)
    parts = _partitions(info)
    train, _ = split(ds, tuple(info["train"]))
    if args.mask:
        mask = Mask.from_text(args.mask)
        prb = apply_mask(mask, train, parts)
        quality = mask_quality(prb)
    else:
        template = default_template(len(ds.inputs), args.depth)
        mask, prb, quality = best_mask(train, parts, template, args.max_inputs, jobs=args.jobs)
    work = Path(args.workdir)
    (work / MASK).write_text(mask.to_text() + "\n")
    _write_json(work / PRB, prb.to_dict())
    print(f"mask: {mask.to_text()}")
    print(f"quality: {quality!r}")
    print(f"rules: {len(prb)}")
    return 0


def cmd_extract(args) -> int:
    prb = _load_prb(args)
    srb0 = init_rule_grid(prb)
    srb = tune_weights(srb0, prb, rate=args.rate, epochs=args.epochs)
    _write_json(Path(args.workdir) / SUGENO, srb.to_dict())
    print(f"rules: {srb.n_rules} (from {len(prb)} pattern rules)")
    print(f"cost: initial {cost(srb0, prb)!r} final {cost(srb, prb)!r}")
    return 0


def cmd_errors(args) -> int:
    prb, srb = _load_prb(args), _load_srb(args)
    out = {}
    for kind in args.kinds.split(","):
        em = build_error_model(kind, prb, srb, args.k)
        out[kind] = em.to_dict()
        top = ", ".join(f"{c}:{em.mean[c]:.3g}" for c in em.ranking[:5])
        print(f"{kind}: {len(em.ranking)} regions, top {top}")
    _write_json(Path(args.workdir) / ERRORS, out)
    return 0


def _tests(args, ds: Dataset) -> list[Dataset]:
    ranges = _ranges(args.tests)
    if not ranges:
        raise CliError("no test ranges given")
    first, rest = split(ds, ranges[0], ranges[1:])
    return [first] + rest


def _digest(args, extra: dict) -> str:
    work = Path(args.workdir)
    blobs = {name: hashlib.sha256((work / name).read_bytes()).hexdigest() for name in (PRB, SUGENO)}
    return config_digest({**extra, **blobs})


def cmd_sweep(args) -> int:
    ds, _ = _load_normalized(args)
    prb, srb = _load_prb(args), _load_srb(args)
    tests = _tests(args, ds)
    percents = _floats(args.percents)
    kinds = args.kinds.split(",")
    settings = {"k": args.k, "percents": percents, "kinds": kinds, "tests": args.tests}
    meta = {"seed": args.seed, "config": _digest(args, settings)}
    sr = run_sweep(prb, srb, tests, percents=percents, kinds=kinds, k=args.k, jobs=args.jobs, metadata=meta)
    emit_report(sr, args.workdir)
    sys.stdout.write(format_report(sr))
    return 0


def cmd_predict(args) -> int:
    ds, _ = _load_normalized(args)
    prb, srb = _load_prb(args), _load_srb(args)
    test = _tests(args, ds)[0]
    if args.scheme == "pattern":
        yhat = fir_forecast(prb, test, k=args.k)
    elif args.scheme == "sugeno":
        yhat = mixed_forecast(build_mixed_model(prb, srb, []), test)
    else:
        em = build_error_model(args.kind, prb, srb, args.k)
        retained = select_retained_rules(em, prb, args.percent)
        mm = build_mixed_model(prb, srb, retained)
        _write_json(Path(args.workdir) / MIXED, mm.to_dict())
        yhat = mixed_forecast(mm, test)
    err = forecast_error(test, yhat, prb.mask.depth)
    out = Path(args.workdir) / f"predict_{args.scheme}.csv"
    pred = Dataset(inputs=(test.output,), output=TimeSeries("yhat", yhat.samples, test.output.dt))
    with open(out, "w", newline="") as fh:
        write_csv(pred, fh, time_column=None)
    print(f"scheme: {args.scheme}")
    print(f"mse%: {err!r}")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workdir", default=".", help="artifact directory")
    p.add_argument("--config", help="key = value options file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--data", help=f"CSV data file (default WORKDIR/{DATA})")
    p.add_argument("--columns", default="u,y", help="input columns then output column")
    p.add_argument("--time-column", default="t")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carfir", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic benchmark CSV")
    _common(p)
    p.add_argument("--length", type=int, default=4800)
    p.add_argument("--delay", type=int, default=1)
    p.add_argument("--feedback", type=float, default=0.4)
    p.add_argument("--gain", type=float, default=0.5)
    p.add_argument("--steepness", type=float, default=12.0)
    p.add_argument("--ripple", type=float, default=0.15)
    p.add_argument("--noise", type=float, default=0.04)
    p.add_argument("--window", default="0.6,0.9,0.6,0.9", help="u_lo,u_hi,y_lo,y_hi")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("partition", help="normalize and compute EFP landmarks")
    _common(p)
    p.add_argument("--train", default="0:2999", help="training range first:last")
    p.add_argument("--classes", type=int, default=9)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("identify", help="search the best mask and build the behavior matrix")
    _common(p)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--max-inputs", type=int, default=2)
    p.add_argument("--mask", help="evaluate this mask instead of searching, e.g. '-1 -2 / 0 +1'")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("extract", help="build and tune the Sugeno rule grid")
    _common(p)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--rate", type=float, default=0.1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("errors", help="build the G1/G2/G3 error models")
    _common(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--kinds", default=",".join(KINDS))
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("sweep", help="mixed-scheme retention sweep over test sets")
    _common(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--kinds", default=",".join(KINDS))
    p.add_argument("--percents", default=",".join(str(v) for v in DEFAULT_PERCENTS))
    p.add_argument("--tests", default="3000:3599,3600:4199,4200:4799")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="forecast one test range with a chosen scheme")
    _common(p)
    p.add_argument("--scheme", choices=("pattern", "sugeno", "mixed"), default="mixed")
    p.add_argument("--kind", choices=KINDS, default="G2")
    p.add_argument("--percent", type=float, default=30.0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--tests", default="3000:3599")
    p.set_defaults(func=cmd_predict)
    return parser


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        overrides = read_config(args.config)
        for key in overrides:
            if key not in known or key in ("config", "help"):
                raise CliError(f"unknown config key {key!r} for {args.command}")
        for key, value in overrides.items():
            action = known[key]
            if action.type is not None:
                try:
                    overrides[key] = action.type(value)
                except ValueError:
                    raise CliError(f"bad value for {key}: {value!r}") from None
            if action.choices is not None and overrides[key] not in action.choices:
                raise CliError(f"bad value for {key}: {value!r}")
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        Path(args.workdir).mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except CliError as exc:
        print(f"carfir: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"carfir: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse usage errors
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
