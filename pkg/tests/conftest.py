"""Suite-wide tree audit.

Every tree grown through ``ucts.tree.grow_tree`` or ``ucts.forest.fit_trees``
while a test runs is queued and audited for the regularity guarantees after
that test finishes. Trees grown in worker processes are re-derived from their
seed to recover the approximation set.
"""
import numpy as np
import pytest

import ucts
from ucts import baselines as baselines_mod
from ucts import forest as forest_mod
from ucts import tree as tree_mod
from ucts.data import stratified_split

AUDIT = {"trees": 0, "problems": []}
CRITERIA = {}
_pending = []

_orig_grow = tree_mod.grow_tree
_orig_fit_trees = forest_mod.fit_trees


def _recording_grow(data, approx_indices, params, rng):
    tree = _orig_grow(data, approx_indices, params, rng)
    _pending.append((tree, data, np.array(approx_indices, copy=True), params))
    return tree


def _recording_fit_trees(data, config, honest, n_jobs=1):
    trees = _orig_fit_trees(data, config, honest, n_jobs)
    for b, tree in enumerate(trees):
        split = stratified_split(data, config.rho, forest_mod.tree_rng(config.seed, b))
        _pending.append((tree, data, split.approximation, config.growth))
    return trees


def drain_audit():
    """Audit all queued trees; returns the new problem messages."""
    found = []
    while _pending:
        tree, data, approx, params = _pending.pop()
        AUDIT["trees"] += 1
        found.extend(tree_mod.audit_tree(tree, data, approx, params))
    AUDIT["problems"].extend(found)
    return found


@pytest.fixture(autouse=True)
def _audit_every_tree(monkeypatch):
    monkeypatch.setattr(tree_mod, "grow_tree", _recording_grow)
    monkeypatch.setattr(ucts, "grow_tree", _recording_grow)
    monkeypatch.setattr(forest_mod, "fit_trees", _recording_fit_trees)
    monkeypatch.setattr(baselines_mod, "fit_trees", _recording_fit_trees)
    yield
    problems = drain_audit()
    assert not problems, "regularity audit failed:\n" + "\n".join(problems[:20])


class criterion:
    """Context manager recording the PASS/FAIL line of one acceptance criterion."""

    def __init__(self, key, title):
        self.key, self.title, self.detail = key, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"[criterion {self.key}] {status}: {self.title}" + (f" ({self.detail})" if self.detail else "")
        if exc_type is not None and exc is not None:
            line += f" -> {str(exc).splitlines()[0] if str(exc) else exc_type.__name__}"
        CRITERIA[self.key] = line
        print(line)
        return False


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA, key=lambda k: (len(k), k)):
            terminalreporter.write_line(CRITERIA[key])
    n, bad = AUDIT["trees"], len(AUDIT["problems"])
    status = "PASS" if bad == 0 else "FAIL"
    terminalreporter.write_line(
        f"[criterion 3, suite-wide] {status}: audited {n} trees, {bad} regularity violations")
