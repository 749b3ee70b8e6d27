"""Command-line interface.

Exit codes:
    0  success
    1  demo-consistency check failed
    2  unreadable or malformed input (model, data, schema, attribution files)
    3  data does not align with the model (feature names, row counts)
    4  gain importance requested but a split has no gain
    5  method not applicable to the model kind (beta needs a GLM, gain an ensemble)
    6  invalid or overlapping feature groups
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import attribution, fixtures, importance, packing, plots, synthetic
from .dataset import DataError, Dataset, Schema, StandardizationStats, load_schema, one_hot_encode, read_csv
from .model import GlmModel, ModelError, TreeEnsemble, load_model, predict_margins, serialize_model

log = logging.getLogger("shapack")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_ALIGN = 3
EXIT_NO_GAIN = 4
EXIT_WRONG_MODEL = 5
EXIT_GROUPS = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- loading ---------------------------------------------------------------

def _model(path):
    if path is None:
        raise CliError(EXIT_PARSE, "--model is required")
    try:
        return load_model(path)
    except (OSError, ModelError) as exc:
        raise CliError(EXIT_PARSE, f"cannot load model {path}: {exc}") from None


def _dataset(path, schema_path) -> Dataset:
    if path is None:
        raise CliError(EXIT_PARSE, "--data is required")
    try:
        schema = load_schema(schema_path) if schema_path else Schema()
        data = read_csv(path, schema)
    except (OSError, DataError) as exc:
        raise CliError(EXIT_PARSE, f"cannot load data {path}: {exc}") from None
    if data.nominal:
        try:
            data = one_hot_encode(data)
        except DataError as exc:
            raise CliError(EXIT_PARSE, str(exc)) from None
    return data


def _shap(path):
    try:
        return attribution.read_shap(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot load attributions {path}: {exc}") from None


def _aligned(model, data: Dataset) -> Dataset:
    try:
        return data.reorder(model.feature_names)
    except KeyError as exc:
        raise CliError(EXIT_ALIGN, str(exc.args[0])) from None


def _explain(model, data):
    aligned = _aligned(model, data)
    try:
        return attribution.explain(model, aligned)
    except ValueError as exc:
        raise CliError(EXIT_ALIGN, str(exc)) from None


def _shap_from_args(args):
    if getattr(args, "shap", None):
        return _shap(args.shap)
    return _explain(_model(args.model), _dataset(args.data, args.schema))


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")
    return path


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _groups(args, shap):
    try:
        if args.groups:
            return packing.load_groups(args.groups, shap)
        if args.suggest:
            return packing.suggest_groups(shap, args.suggest, args.threshold)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read groups file: {exc}") from None
    except (packing.GroupError, ValueError) as exc:
        raise CliError(EXIT_GROUPS, str(exc)) from None
    raise CliError(EXIT_GROUPS, "pack needs --groups or --suggest")


def _group_mapping(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot read groups file: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError(EXIT_GROUPS, "groups document must map group names to feature lists")
    return doc


def _values_for(shap, data: Dataset, mapping: dict) -> Dataset:
    """Dataset whose columns match ``shap``; packed groups get summed member values.

    Group members come from ``mapping`` or, for suggested covariance groups,
    from the ``a+b`` naming.
    """
    if shap.n_rows != data.n_rows:
        raise CliError(EXIT_ALIGN, f"attributions have {shap.n_rows} rows, data has {data.n_rows}")
    cols = []
    for name in shap.feature_names:
        if name in data.feature_names:
            cols.append(data.column(name))
            continue
        members = mapping.get(name) or name.split("+")
        members = [m for m in members if m in data.feature_names]
        if not members:
            raise CliError(EXIT_ALIGN, f"feature {name!r} not found in data")
        cols.append(np.sum([data.column(m) for m in members], axis=0))
    return Dataset(values=np.column_stack(cols), feature_names=shap.feature_names, row_ids=data.row_ids)


# -- subcommands -----------------------------------------------------------

def cmd_explain(args) -> int:
    model = _model(args.model)
    data = _dataset(args.data, args.schema)
    shap = _explain(model, data)
    out = _out(args)
    csv_path = out / "shap.csv"
    sidecar = attribution.write_shap(shap, csv_path)
    worst = float(np.abs(shap.totals() - predict_margins(model, _aligned(model, data).values)).max())
    log.info("explained %d rows x %d features; max local-accuracy error %.3g", shap.n_rows, shap.n_features, worst)
    print(csv_path)
    print(sidecar)
    return EXIT_OK


def _report(args, method: str):
    if method in ("variance", "l1"):
        shap = _shap_from_args(args)
        return (importance.variance_importance if method == "variance" else importance.l1_importance)(shap)
    model = _model(args.model)
    if method == "gain":
        if not isinstance(model, TreeEnsemble):
            raise CliError(EXIT_WRONG_MODEL, "gain requires an ensemble")
        try:
            return importance.gain_importance(model)
        except importance.MissingGainError as exc:
            raise CliError(EXIT_NO_GAIN, str(exc)) from None
    if method == "beta":
        if not isinstance(model, GlmModel):
            raise CliError(EXIT_WRONG_MODEL, "beta requires glm")
        data = _aligned(model, _dataset(args.data, args.schema))
        try:
            stats = StandardizationStats.from_dataset(data)
        except DataError as exc:
            raise CliError(EXIT_ALIGN, str(exc)) from None
        return importance.beta_importance(model, stats)
    raise CliError(EXIT_PARSE, f"unknown method {method!r}")


def cmd_importance(args) -> int:
    report = _report(args, args.method)
    path = _write_json(_out(args) / f"importance_{args.method}.json", report.to_dict())
    print(path)
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.top_k < 1:
        raise CliError(EXIT_PARSE, "--top-k must be at least 1")
    out = _out(args)
    spec = plots.PlotSpec(top_k=args.top_k, seed=args.seed)
    kind = args.kind
    if kind == "pdp":
        model = _model(args.model)
        data = _aligned(model, _dataset(args.data, args.schema))
        if args.feature not in data.feature_names:
            raise CliError(EXIT_ALIGN, f"unknown feature {args.feature!r}")
        try:
            curve = plots.partial_dependence(model, data, args.feature, grid_size=args.grid)
        except ValueError as exc:
            raise CliError(EXIT_ALIGN, str(exc)) from None
        result, stem = plots.pdp_plot(curve, spec), f"pdp_{_safe(args.feature)}"
    elif kind == "importance":
        result, stem = plots.importance_plot(_report(args, args.method), args.top_k, spec), "importance"
    else:
        shap = _shap_from_args(args)
        values = _values_for(shap, _dataset(args.data, args.schema), _group_mapping(args.groups))
        if kind == "summary":
            result, stem = plots.summary_plot(shap, values, spec), "summary"
        else:
            for name in (args.feature, args.color_by):
                if name is not None and name not in shap.feature_names:
                    raise CliError(EXIT_ALIGN, f"unknown feature {name!r}")
            if args.feature is None:
                raise CliError(EXIT_ALIGN, "dependence plot needs --feature")
            result = plots.dependence_plot(shap, values, args.feature, args.color_by, spec)
            stem = f"dependence_{_safe(args.feature)}"
    for path in result.write(out, stem):
        print(path)
    return EXIT_OK


def cmd_pack(args) -> int:
    shap = _shap_from_args(args)
    groups = _groups(args, shap)
    if not groups:
        log.warning("no groups to pack")
    try:
        packed, report, checks = packing.packed_report(shap, groups)
    except packing.GroupError as exc:
        raise CliError(EXIT_GROUPS, str(exc)) from None
    for name, check in checks.items():
        log.info("group %s: grouped importance %.6g (identity error %.3g)", name, check["grouped_importance"], check["abs_difference"])
    out = _out(args)
    csv_path = out / "shap_packed.csv"
    sidecar = attribution.write_shap(packed, csv_path)
    doc = {
        "groups": packing.groups_to_mapping(shap, groups),
        "group_checks": checks,
        "importance": report.to_dict(),
        "max_total_change": float(np.abs(packed.totals() - shap.totals()).max(initial=0.0)),
    }
    report_path = _write_json(out / "pack_report.json", doc)
    for p in (csv_path, sidecar, report_path):
        print(p)
    return EXIT_OK


def cmd_demo_consistency(args) -> int:
    report = fixtures.demo_consistency()
    text = json.dumps(report, indent=1) + "\n"
    if args.out:
        path = _out(args) / "demo_consistency.json"
        path.write_text(text, encoding="utf-8")
        print(path)
    else:
        sys.stdout.write(text)
    if not report["consistent_with_expectation"]:
        log.error("consistency fixture did not show the expected ranking changes")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_demo_data(args) -> int:
    if args.rows < 50:
        raise CliError(EXIT_PARSE, "--rows must be at least 50")
    bundle = synthetic.generate(seed=args.seed, n_rows=args.rows)
    out = _out(args)
    paths = [out / "data.csv", out / "schema.json", out / "model.json", out / "groups.json"]
    paths[0].write_text(bundle.csv_text, encoding="utf-8")
    _write_json(paths[1], bundle.schema.to_dict())
    paths[2].write_text(serialize_model(bundle.model) + "\n", encoding="utf-8")
    _write_json(paths[3], bundle.groups)
    for p in paths:
        print(p)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapack", description="Shapley attributions, importance and feature packing.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p, shap=True):
        p.add_argument("--model")
        p.add_argument("--data")
        p.add_argument("--schema")
        if shap:
            p.add_argument("--shap", help="attribution CSV written by 'explain' (sidecar .json alongside)")
        p.add_argument("--out", default=".")

    p = sub.add_parser("explain", help="write the centered attribution matrix")
    inputs(p, shap=False)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("importance", help="score and rank features")
    inputs(p)
    p.add_argument("--method", choices=importance.METHODS, default="variance")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("plot", help="render a figure and its CSV twin")
    p.add_argument("kind", choices=("summary", "dependence", "pdp", "importance"))
    inputs(p)
    p.add_argument("--feature")
    p.add_argument("--color-by", dest="color_by")
    p.add_argument("--top-k", dest="top_k", type=int, default=20)
    p.add_argument("--method", choices=importance.METHODS, default="variance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--groups", help="groups file, to colour packed features by summed member values")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("pack", help="merge attribution columns into grouped features")
    inputs(p)
    p.add_argument("--groups")
    p.add_argument("--suggest", choices=("prefix", "covariance"))
    p.add_argument("--threshold", type=float, default=0.9)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("demo-consistency", help="gain vs variance importance on a built-in fixture")
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_consistency)

    p = sub.add_parser("demo-data", help="write seeded synthetic data, schema, model and groups")
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, default=1000)
    p.set_defaults(func=cmd_demo_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
