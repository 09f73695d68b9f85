"""Dynamic Bayesian network structure and parameter learning.

Structures, parameters and learner reports travel as plain dicts with the same layout as the
JSON files written by the ``dbn`` command-line tool.
"""

import json

from . import _core
from ._core import (
    Dataset,
    DbnError,
    auroc,
    h_expm,
    h_expm_grad,
    h_poly,
    threshold_and_repair,
)

__all__ = [
    "Dataset",
    "DbnError",
    "auroc",
    "benchmark",
    "family_score",
    "fit_parameters",
    "h_expm",
    "h_expm_grad",
    "h_poly",
    "holdout",
    "learn",
    "loglik",
    "report_auroc",
    "sample",
    "shd",
    "structure_score",
    "threshold_and_repair",
]


def _text(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def sample(generator, n_x, trajectories, steps, seed=0):
    """Random DBN plus sampled data. Returns (structure, params, Dataset)."""
    s, p, data = _core.sample(_text(generator), n_x, trajectories, steps, seed)
    return json.loads(s), json.loads(p), data


def learn(data, learner, seed=0, timeout_sec=0.0, **hyper):
    """Run a learner by name ("exact", "hillclimb", "dynotears", ...) or learner dict."""
    spec = {"name": learner} if isinstance(learner, str) else dict(learner)
    spec.update(hyper)
    return json.loads(_core.learn(data, json.dumps(spec), seed, timeout_sec))


def structure_score(data, structure, kind="bic", ess=1.0):
    return _core.structure_score(data, _text(structure), kind, ess)


def family_score(data, node, parents, kind="bde", ess=1.0):
    """Parents are (kind, index) pairs with kind in inter, intra, auto, static."""
    return _core.family_score(data, node, [tuple(p) for p in parents], kind, ess)


def fit_parameters(data, structure, smoothed=False, ess=1.0):
    return json.loads(_core.fit_parameters(data, _text(structure), smoothed, ess))


def loglik(data, params):
    return _core.loglik(data, _text(params))


def shd(predicted, truth, reversal_cost=2):
    return _core.shd(_text(predicted), _text(truth), reversal_cost)


def report_auroc(report, truth):
    """(value, degenerate) for a learner report against a truth structure."""
    return _core.report_auroc(_text(report), _text(truth))


def holdout(data, structure, fraction=0.7, strict=False, ess=1.0):
    return _core.holdout(data, _text(structure), fraction, strict, ess)


def benchmark(config):
    """Run an experiment document. Returns (CSV text, summary table text)."""
    return _core.benchmark(_text(config))
