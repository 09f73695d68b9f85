import json
import math

import numpy as np
import pytest

import dbnlearn as dl


def chain(n_x=3, intra=None, inter=None):
    z = [[0] * n_x for _ in range(n_x)]
    return {
        "n_x": n_x,
        "n_z": 0,
        "p": 1,
        "intra": intra or z,
        "inter": inter or z,
        "auto_lags": [[] for _ in range(n_x)],
        "static_edges": [],
    }


@pytest.fixture(scope="module")
def discrete():
    return dl.sample({"family": "cpt", "edge_prob": {"intra": 0.3, "inter": 0.4}}, 3, 30, 10, seed=4)


def test_dataset_arrays_round_trip():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 3, size=(4, 6, 2)).astype(float)
    z = rng.integers(0, 2, size=(4, 1)).astype(float)
    d = dl.Dataset.discrete(x, [3, 3], z=z, z_arities=[2])
    assert (d.trajectories, d.steps, d.n_x, d.n_z) == (4, 5, 2, 1)
    assert d.is_discrete
    np.testing.assert_array_equal(d.x, x)
    np.testing.assert_array_equal(d.z, z)
    assert d.csv().count("\n") == 1 + 4 * 6

    c = dl.Dataset.continuous(rng.normal(size=(2, 3, 4)))
    assert not c.is_discrete and c.n_x == 4


def test_dataset_validation():
    with pytest.raises(dl.DbnError) as e:
        dl.Dataset.discrete(np.full((1, 3, 1), 5.0), [2])
    assert e.value.kind == "data"
    with pytest.raises(dl.DbnError) as e:
        dl.Dataset.continuous(np.zeros((2, 3)))
    assert e.value.kind == "dimension"


def test_sampling_is_deterministic(discrete):
    s, p, d = discrete
    s2, p2, d2 = dl.sample({"family": "cpt", "edge_prob": {"intra": 0.3, "inter": 0.4}}, 3, 30, 10, seed=4)
    assert s == s2 and p == p2
    np.testing.assert_array_equal(d.x, d2.x)
    assert d.x.shape == (30, 11, 3)


def test_empty_family_bic_matches_counts(discrete):
    _, _, d = discrete
    r = d.x_arities[0]
    values = d.x[:, 1:, 0].ravel().astype(int)
    counts = np.bincount(values, minlength=r)
    m = values.size
    ll = sum(c * math.log(c / m) for c in counts if c > 0)
    expected = ll - 0.5 * (r - 1) * math.log(m)
    assert dl.family_score(d, 0, [], kind="bic") == pytest.approx(expected, rel=1e-12)


def test_exact_learner_report(discrete):
    s, _, d = discrete
    rep = dl.learn(d, "exact", score="bic")
    assert rep["score"] == pytest.approx(dl.structure_score(d, rep["structure"], "bic"), rel=1e-12)
    hc = dl.learn(d, "hillclimb", score="bic", seed=3)
    assert hc["score"] <= rep["score"] + 1e-9
    assert dl.shd(rep["structure"], rep["structure"]) == 0
    value, degenerate = dl.report_auroc(rep, s)
    assert 0.0 <= value <= 1.0 and not degenerate
    params = dl.fit_parameters(d, rep["structure"])
    assert dl.loglik(d, params) <= 0.0


def test_learn_with_learner_dict(discrete):
    _, _, d = discrete
    a = dl.learn(d, {"name": "hillclimb", "restarts": 2}, seed=9)
    b = dl.learn(d, "hillclimb", seed=9, restarts=2)
    assert a == b


def test_shd_hand_cases():
    a = chain(3, intra=[[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    b = chain(3, intra=[[0, 0, 0], [1, 0, 0], [0, 0, 0]])
    assert dl.shd(a, b) == 2
    assert dl.shd(a, b, reversal_cost=1) == 1
    assert dl.shd(a, chain(3)) == 1


def test_auroc_hand_case():
    value, degenerate = dl.auroc([0.9, 0.2, 0.5, 0.1], [True, True, False, False])
    assert value == pytest.approx(0.75)
    assert not degenerate
    assert dl.auroc([0.1, 0.2], [False, False]) == (0.5, True)


def test_acyclicity_against_scipy():
    scipy_linalg = pytest.importorskip("scipy.linalg")
    rng = np.random.default_rng(1)
    for _ in range(20):
        w = rng.normal(size=(4, 4)) * (rng.random((4, 4)) < 0.5)
        expected = np.trace(scipy_linalg.expm(w * w)) - 4
        assert dl.h_expm(w) == pytest.approx(expected, rel=1e-10, abs=1e-12)
        grad = dl.h_expm_grad(w)
        np.testing.assert_allclose(grad, scipy_linalg.expm(w * w).T * 2 * w, rtol=1e-9, atol=1e-12)
    cycle = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert dl.h_expm(cycle) == pytest.approx(math.e + 1 / math.e - 2)
    value, grad = dl.h_poly(cycle, 0.1)
    assert value > 0 and grad.shape == (2, 2)
    repaired = dl.threshold_and_repair(np.array([[0.0, 0.9], [0.2, 0.0]]), 0.1)
    np.testing.assert_array_equal(repaired, [[0, 1], [0, 0]])


def test_holdout_counts(discrete):
    _, _, d = discrete
    h = dl.holdout(d, chain(3), fraction=0.7)
    assert h["train_transitions"] == 30 * 7
    assert h["test_transitions"] == 30 * 3
    assert h["train_ll"] < 0 and h["test_ll"] < 0


def test_continuous_learners():
    _, _, d = dl.sample(
        {"family": "linear_gaussian", "edge_prob": {"intra": 0.4, "inter": 0.3}}, 3, 20, 20, seed=2
    )
    assert not d.is_discrete
    rep = dl.learn(d, "dynotears", lambda_w=0.05, lambda_a=0.05, w_threshold=0.2)
    st = rep["structure"]
    assert st["n_x"] == 3
    # The learned intra graph is acyclic.
    assert dl.h_expm(np.array(st["intra"], dtype=float)) == pytest.approx(0.0, abs=1e-12)
    assert rep["h_residual"] <= 1e-8 or not rep["converged"]


def test_errors_carry_kind(discrete):
    _, _, d = discrete
    cyclic = chain(2, intra=[[0, 1], [1, 0]])
    with pytest.raises(dl.DbnError) as e:
        dl.shd(cyclic, chain(2))
    assert e.value.kind == "cycle"
    with pytest.raises(dl.DbnError) as e:
        dl.learn(d, "dynotears")
    assert e.value.kind == "domain"
    with pytest.raises(dl.DbnError) as e:
        dl.learn(d, "magic")
    assert e.value.kind == "schema"
    with pytest.raises(dl.DbnError) as e:
        dl.shd(chain(2), chain(2), reversal_cost=3)
    assert e.value.kind == "usage"
    with pytest.raises(dl.DbnError) as e:
        dl.benchmark("{")
    assert e.value.kind == "schema"
    assert isinstance(e.value, RuntimeError)


def test_benchmark_csv():
    config = {
        "seed": 7,
        "regime": {"label": "mini", "triples": [[3, 10, 10]]},
        "generator": {"family": "cpt"},
        "learners": [{"name": "exact", "score": "bde"}, {"name": "hillclimb", "restarts": 2}],
        "replicates": 2,
        "record_wall_time": False,
    }
    csv, table = dl.benchmark(config)
    assert csv == dl.benchmark(json.dumps(config))[0]
    lines = csv.strip().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert table
