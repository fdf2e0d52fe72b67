"""Command-line front end.

Subcommands: simulate, train, predict, evaluate, muc, sweep. Exit codes: 0 ok,
1 usage or invalid configuration, 2 data or model-file error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import evaluation, model_io
from .baselines import RegressionForestParams, train_cts, train_sma
from .data import DataError, encode_features, parse_csv, read_csv, read_schema, validate_dataset
from .forest import ForestConfig, train
from .synthetic import get_model
from .tree import GrowthParams

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (type, default, help); settable by flag or by --config file
FOREST_OPTIONS = {
    "method": (str, "ucts", "ucts, cts or sma"),
    "ntree": (int, 100, "number of trees"),
    "rho": (float, 0.5, "approximation-set fraction"),
    "mtry": (int, None, "coordinates searched per node (default ceil(d/2); sma: max(1, d//3))"),
    "pi": (float, 0.05, "probability of searching a single random coordinate"),
    "min_split": (int, 25, "per-treatment count needed for a fresh child estimate and for splitting"),
    "n_reg": (float, 0.0, "shrinkage weight toward the parent estimate"),
    "alpha": (float, 0.1, "minimum fraction of node members on each side of a split"),
    "min_leaf": (int, 5, "sma only: minimum leaf size of the regression trees"),
    "bootstrap": (_bool, True, "sma only: bootstrap rows for each regression tree"),
    "seed": (int, 0, "master seed"),
    "threads": (int, 0, "worker processes for training (0 = all cores)"),
}
EVAL_OPTIONS = {
    "control": (int, 1, "control treatment id"),
    "grid": (_float_list, None, "comma-separated fractions (default 0,0.1,...,1)"),
    "mc_samples": (int, 200_000, "Monte Carlo draws for oracle values"),
    "estimator": (str, "ips", "ips, or oracle for synthetic test distributions"),
    "oracle_model": (str, None, "synthetic model name for the oracle estimator"),
    "propensities": (_float_list, None, "experiment assignment probabilities (default: empirical)"),
}
SIM_OPTIONS = {
    "model": (str, "2d", "2d or 50d"),
    "n": (int, 1000, "samples per treatment"),
    "d": (int, 50, "50d model: dimension"),
    "effect_scale": (float, 1.0, "50d model: treatment-effect magnitude"),
    "sizes": (_int_list, [250, 1000, 4000], "sweep: samples per treatment"),
    "seeds": (int, 10, "sweep: number of seeds"),
}


def _add_options(p, names):
    for name in names:
        spec = {**FOREST_OPTIONS, **EVAL_OPTIONS, **SIM_OPTIONS}[name]
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=spec[0], default=None, help=spec[2])


def build_parser():
    parser = _Parser(prog="ucts", description="Honest uplift forests for treatment selection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic RCT dataset (CSV + schema sidecar)")
    _add_options(p, ["model", "n", "d", "effect_scale", "seed"])
    p.add_argument("--out", required=True)
    p.add_argument("--schema", help="schema path (default: <out> with suffix .schema)")

    p = sub.add_parser("train", help="fit a model and write the model file")
    _add_options(p, list(FOREST_OPTIONS) + ["propensities"])
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="training summary path (default: <out>.summary.json)")

    p = sub.add_parser("predict", help="predicted responses and chosen treatment per row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="policy value of a model on a test set")
    _add_options(p, ["estimator", "oracle_model", "mc_samples", "seed", "propensities", "d", "effect_scale"])
    p.add_argument("--model", required=True)
    p.add_argument("--data")
    p.add_argument("--out", required=True)

    p = sub.add_parser("muc", help="modified uplift curve on an RCT test set")
    _add_options(p, ["control", "grid", "propensities"])
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="oracle value versus training size on a synthetic model")
    _add_options(p, list(FOREST_OPTIONS) + ["model", "sizes", "seeds", "mc_samples", "d", "effect_scale"])
    p.add_argument("--out", required=True)

    for p in sub.choices.values():
        p.add_argument("--config", help="file of key=value lines; flags override it")
    return parser


def _read_config(path, allowed):
    values = {}
    specs = {**FOREST_OPTIONS, **EVAL_OPTIONS, **SIM_OPTIONS}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        if key not in allowed:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = specs[key][0](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(args, names):
    """Merge defaults, the --config file and flags (flags win)."""
    specs = {**FOREST_OPTIONS, **EVAL_OPTIONS, **SIM_OPTIONS}
    from_file = _read_config(args.config, set(names)) if getattr(args, "config", None) else {}
    out = {}
    for name in names:
        flag = getattr(args, name, None)
        out[name] = flag if flag is not None else from_file.get(name, specs[name][1])
    return argparse.Namespace(**out)


def _forest_setup(opts, d=None):
    if opts.method not in ("ucts", "cts", "sma"):
        raise UsageError(f"unknown method {opts.method!r}")
    if opts.threads < 0:
        raise UsageError("threads must be >= 0")
    if opts.method == "sma":
        return RegressionForestParams(ntree=opts.ntree, mtry=opts.mtry, min_leaf=opts.min_leaf,
                                      bootstrap=opts.bootstrap, seed=opts.seed)
    growth = GrowthParams(min_split=opts.min_split, n_reg=opts.n_reg, alpha=opts.alpha,
                          mtry=opts.mtry, pi=opts.pi)
    if d is not None:
        growth.resolve_mtry(d)
    return ForestConfig(ntree=opts.ntree, rho=opts.rho, growth=growth, seed=opts.seed)


def _fit(data, opts, setup):
    if opts.method == "sma":
        return train_sma(data, setup)
    fn = train if opts.method == "ucts" else train_cts
    return fn(data, setup, n_jobs=opts.threads)


def _schema_path(data_path, explicit):
    return Path(explicit) if explicit else Path(data_path).with_suffix(".schema")


def _load_dataset(data_path, schema, propensities):
    return validate_dataset(read_csv(data_path), schema, propensities)


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_simulate(args):
    opts = resolve(args, ["model", "n", "d", "effect_scale", "seed"])
    if opts.n < 1:
        raise UsageError("--n must be >= 1")
    kwargs = {"d": opts.d, "effect_scale": opts.effect_scale} if opts.model == "50d" else {}
    try:
        model = get_model(opts.model, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = model.sample(opts.n, opts.seed)
    out = Path(args.out)
    schema_path = _schema_path(out, args.schema)
    with open(out, "w", newline="") as fh:
        fh.write(f"# simulate {model.describe()} n_per_treatment={opts.n} seed={opts.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.schema.names + ["treatment", "response"])
        for x, t, y in zip(data.features, data.treatments, data.responses):
            cells = [c.levels[int(v)] if c.is_categorical else _fmt(v) for c, v in zip(data.schema.columns, x)]
            w.writerow(cells + [data.treatment_labels[t - 1], _fmt(y)])
    schema_path.write_text(data.schema.to_text())
    print(f"wrote {data.n} rows to {out} and schema to {schema_path}")


def _summary(model):
    if model.method == "sma":
        trees = [t for f in model.forests for t in f.trees]
    else:
        trees = model.trees
    per_tree = [{"tree": b, "leaves": t.n_leaves, "depth": t.depth} for b, t in enumerate(trees)]
    hist = Counter(n.depth for t in trees for n in t.nodes if n.is_leaf)
    return {
        "method": model.method,
        "n_trees": len(trees),
        "per_tree": per_tree,
        "leaf_depth_histogram": {str(k): hist[k] for k in sorted(hist)},
    }


def cmd_train(args):
    opts = resolve(args, list(FOREST_OPTIONS) + ["propensities"])
    schema = read_schema(_schema_path(args.data, args.schema))
    setup = _forest_setup(opts, schema.d)
    data = _load_dataset(args.data, schema, opts.propensities)
    model = _fit(data, opts, setup)
    model_io.save(model, args.out)
    summary_path = Path(args.summary) if args.summary else Path(str(args.out) + ".summary.json")
    summary_path.write_text(json.dumps(_summary(model), indent=1, sort_keys=True) + "\n")
    print(f"wrote {model.method} model to {args.out}")


def cmd_predict(args):
    model = model_io.load(args.model)
    raw = parse_csv(Path(args.data).read_text())
    X = encode_features(raw, model.schema)
    mu = model.predict_mu(X)
    chosen = np.argmax(mu, axis=1) + 1
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"mu_{lab}" for lab in model.treatment_labels] + ["treatment"])
        for row, t in zip(mu, chosen):
            w.writerow([_fmt(v) for v in row] + [model.treatment_labels[t - 1]])


def cmd_evaluate(args):
    opts = resolve(args, ["estimator", "oracle_model", "mc_samples", "seed", "propensities", "d", "effect_scale"])
    model = model_io.load(args.model)
    if opts.estimator == "ips":
        if not args.data:
            raise UsageError("--data is required for the ips estimator")
        test = _load_dataset(args.data, model.schema, opts.propensities)
        report = evaluation.ips_value(model.select_treatment, test)
    elif opts.estimator == "oracle":
        if not opts.oracle_model:
            raise UsageError("--oracle-model is required for the oracle estimator")
        kwargs = {"d": opts.d, "effect_scale": opts.effect_scale} if opts.oracle_model == "50d" else {}
        synth = get_model(opts.oracle_model, **kwargs)
        if synth.schema != model.schema:
            raise DataError("model schema does not match the synthetic model")
        report = evaluation.oracle_value(model.select_treatment, synth, opts.mc_samples, opts.seed)
    else:
        raise UsageError(f"unknown estimator {opts.estimator!r}")
    evaluation.write_report_csv(report, args.out)


def cmd_muc(args):
    opts = resolve(args, ["control", "grid", "propensities"])
    model = model_io.load(args.model)
    test = _load_dataset(args.data, model.schema, opts.propensities)
    curve = evaluation.muc_curve(model, test, opts.control, opts.grid)
    evaluation.write_curve_csv(curve, test.n, args.out)


def cmd_sweep(args):
    opts = resolve(args, list(FOREST_OPTIONS) + ["model", "sizes", "seeds", "mc_samples", "d", "effect_scale"])
    kwargs = {"d": opts.d, "effect_scale": opts.effect_scale} if opts.model == "50d" else {}
    try:
        synth = get_model(opts.model, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    setup = _forest_setup(opts, synth.schema.d)
    if opts.seeds < 2:
        raise UsageError("--seeds must be >= 2")
    if opts.method == "sma":
        fit = evaluation.forest_fitter(None, "sma", sma_params=setup)
    else:
        fit = evaluation.forest_fitter(setup, opts.method, n_jobs=opts.threads)
    seeds = list(range(opts.seed, opts.seed + opts.seeds))
    rows = evaluation.regret_sweep(synth, opts.sizes, fit, seeds, opts.mc_samples, mc_seed=opts.seed)
    evaluation.write_sweep_csv(rows, args.out)


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "muc": cmd_muc, "sweep": cmd_sweep}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"ucts: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ucts: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, model_io.ModelFormatError, OSError) as exc:
        print(f"ucts: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # parameter range checks in the config dataclasses
        print(f"ucts: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"ucts: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
