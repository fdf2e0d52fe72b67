"""Versioned text model files.

Layout::

    UCTS-MODEL <version> sha256=<hex digest of the body>
    <body: one line of JSON with sorted keys>

The body holds ``method`` ("ucts", "cts" or "sma"), ``schema``,
``treatment_labels``, ``config`` and the trees. Each tree is a list of node
records whose field order is given once in ``node_fields``:

    id, depth, coordinate, threshold, left_levels, left, right,
    honest, approx, counts, leaf_reason, gain

``coordinate`` is -1 for leaves; ``threshold`` is null for categorical rules and
``left_levels`` null for numeric ones. Floats are written with ``repr`` so a
round trip is exact.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .baselines import CTSForest, RegressionForest, RegressionForestParams, SeparateModelForest
from .data import Column, FeatureSchema
from .forest import ForestConfig, UpliftForest
from .splitting import SplitCandidate
from .tree import GrowthParams, TreeNode, UpliftTree

MAGIC = "UCTS-MODEL"
FORMAT_VERSION = 1
NODE_FIELDS = ["id", "depth", "coordinate", "threshold", "left_levels", "left", "right",
               "honest", "approx", "counts", "leaf_reason", "gain"]


class ModelFormatError(ValueError):
    pass


def _floats(a):
    return [float(v) for v in a]


def _tree_to_records(tree: UpliftTree) -> list:
    out = []
    for n in tree.nodes:
        s = n.split
        out.append([
            n.id, n.depth,
            -1 if s is None else int(s.coordinate),
            None if s is None or s.threshold is None else float(s.threshold),
            None if s is None or s.left_levels is None else sorted(int(v) for v in s.left_levels),
            n.left, n.right,
            _floats(n.honest_estimates), _floats(n.approx_estimates),
            [int(c) for c in n.approx_counts], n.leaf_reason, float(n.gain),
        ])
    return out


def _tree_from_records(records, K, schema) -> UpliftTree:
    tree = UpliftTree(K, schema)
    for rec in records:
        if len(rec) != len(NODE_FIELDS):
            raise ModelFormatError(f"node record has {len(rec)} fields, expected {len(NODE_FIELDS)}")
        nid, depth, coord, thr, levels, left, right, honest, approx, counts, reason, gain = rec
        split = None
        if coord >= 0:
            split = SplitCandidate(coord, thr, None if levels is None else frozenset(float(v) for v in levels))
        tree.nodes.append(TreeNode(nid, depth, np.array(counts, dtype=np.int64), np.array(approx),
                                   np.array(honest), split, left, right, gain, reason))
    if not tree.nodes or any(n.id != i for i, n in enumerate(tree.nodes)):
        raise ModelFormatError("node ids must be 0..N-1 in order")
    return tree


def _schema_to_json(schema: FeatureSchema):
    return [{"name": c.name, "kind": c.kind, "levels": list(c.levels)} for c in schema.columns]


def _schema_from_json(cols) -> FeatureSchema:
    return FeatureSchema(tuple(Column(c["name"], c["kind"], tuple(c["levels"])) for c in cols))


def to_dict(model) -> dict:
    body = {
        "method": model.method,
        "K": model.K,
        "schema": _schema_to_json(model.schema),
        "treatment_labels": list(model.treatment_labels),
        "node_fields": NODE_FIELDS,
    }
    if isinstance(model, SeparateModelForest):
        body["config"] = asdict(model.params)
        body["forests"] = [[_tree_to_records(t) for t in f.trees] for f in model.forests]
    else:
        cfg = asdict(model.config)
        body["config"] = cfg
        body["trees"] = [_tree_to_records(t) for t in model.trees]
    return body


def from_dict(body: dict):
    try:
        method = body["method"]
        schema = _schema_from_json(body["schema"])
        labels = body["treatment_labels"]
        K = int(body["K"])
        if body.get("node_fields") != NODE_FIELDS:
            raise ModelFormatError("unexpected node field list")
        if method == "sma":
            params = RegressionForestParams(**body["config"])
            forests = [RegressionForest([_tree_from_records(r, 1, schema) for r in f])
                       for f in body["forests"]]
            return SeparateModelForest(params, schema, forests, labels)
        cfg = dict(body["config"])
        cfg["growth"] = GrowthParams(**cfg["growth"])
        config = ForestConfig(**cfg)
        trees = [_tree_from_records(r, K, schema) for r in body["trees"]]
        cls = {"ucts": UpliftForest, "cts": CTSForest}.get(method)
        if cls is None:
            raise ModelFormatError(f"unknown model method {method!r}")
        return cls(config, K, schema, trees, labels)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model body: {exc}") from exc


def serialize(model) -> bytes:
    body = json.dumps(to_dict(model), sort_keys=True, separators=(",", ":"), allow_nan=False)
    digest = hashlib.sha256(body.encode()).hexdigest()
    return f"{MAGIC} {FORMAT_VERSION} sha256={digest}\n{body}\n".encode()


def deserialize(blob: bytes):
    if not blob:
        raise ModelFormatError("empty model stream")
    try:
        text = blob.decode()
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"model stream is not UTF-8: {exc}") from exc
    header, sep, body = text.partition("\n")
    parts = header.split(" ")
    if len(parts) != 3 or parts[0] != MAGIC or not parts[2].startswith("sha256="):
        raise ModelFormatError("not a model file (bad header)")
    if parts[1] != str(FORMAT_VERSION):
        raise ModelFormatError(f"unsupported model format version {parts[1]}; expected {FORMAT_VERSION}")
    if not sep or not body.endswith("\n"):
        raise ModelFormatError("truncated model stream")
    body = body[:-1]
    if hashlib.sha256(body.encode()).hexdigest() != parts[2][len("sha256="):]:
        raise ModelFormatError("checksum mismatch: model stream is corrupted")
    try:
        return from_dict(json.loads(body))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model body is not valid JSON: {exc}") from exc


def save(model, path) -> None:
    Path(path).write_bytes(serialize(model))


def load(path):
    return deserialize(Path(path).read_bytes())
