import json

import numpy as np
import pytest

from factories import nested_split_tree, two_subtree_tree, leaf, random_forest, random_tree, split
from oracles import all_pairs_overlap, brute_route
from rulereshape import (ForestModel, InvalidInputError, InvalidModelError, ModelParseError, Tree,
                         dumps_forest, from_sklearn, leaf_cells, load_forest, loads_forest,
                         overlapping_pairs, predict, save_forest)


def small_doc(**over):
    doc = {"format_version": 1, "task": "regression", "n_features": 3, "routing": "le_left",
           "trees": [{"root": 0, "nodes": [
               {"id": 0, "feature": 2, "threshold": 0.5, "left": 1, "right": 2},
               {"id": 1, "value": 1.0}, {"id": 2, "value": 3.0}]}]}
    doc.update(over)
    return doc


def test_load_small_model_and_predict():
    m = loads_forest(json.dumps(small_doc()))
    assert predict(m, [0, 0, 0.5]) == 1.0  # x <= t goes left
    assert predict(m, [0, 0, 0.5000001]) == 3.0
    np.testing.assert_array_equal(m.predict([[9, 9, -1], [9, 9, 2]]), [1.0, 3.0])


def test_forest_mean():
    t1 = Tree([leaf(0, 1.0)], 0)
    t2 = Tree([split(0, 0, 0.0, 1, 2), leaf(1, 2.0), leaf(2, 4.0)], 0)
    m = ForestModel([t1, t2], 1)
    assert predict(m, [-1.0]) == 1.5
    assert predict(m, [1.0]) == 2.5


def test_single_leaf_round_trip(tmp_path):
    m = ForestModel([Tree([leaf(7, -0.1)], 7)], 2)
    p = tmp_path / "m.json"
    save_forest(m, p)
    back = load_forest(p)
    assert back == m
    assert predict(back, [1e9, -1e9]) == -0.1


def test_nested_split_round_trip():
    m = ForestModel([nested_split_tree(other=1)], 2)
    assert loads_forest(dumps_forest(m)) == m


def test_random_models_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for t in range(20):
        m = random_forest(rng, n_trees=3, d=4, task="probability" if t % 2 else "regression")
        # Awkward floats must survive too.
        m = m.with_trees([tr.with_leaf_values({i: v / 3 + 1e-17 * i for i, v in tr.leaf_values().items()})
                          for tr in m.trees])
        p = tmp_path / f"m{t}.json"
        save_forest(m, p)
        back = load_forest(p)
        assert back == m
        X = rng.normal(size=(50, 4))
        assert np.array_equal(back.predict(X), m.predict(X))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(trees=[]), "$.trees"),
    (lambda d: d.update(routing="lt_left"), "$"),
    (lambda d: d.update(format_version=2), "$"),
    (lambda d: d.pop("n_features"), "$"),
    (lambda d: d["trees"][0]["nodes"][0].update(right=99), "trees[0]"),
    (lambda d: d["trees"][0]["nodes"][0].update(right=0), "trees[0]"),
    (lambda d: d["trees"][0]["nodes"][1].update(value="x"), "trees[0].nodes[1]"),
    (lambda d: d["trees"][0]["nodes"][0].pop("threshold"), "trees[0].nodes[0]"),
    (lambda d: d["trees"][0]["nodes"].append({"id": 1, "value": 0.0}), "trees[0]"),
    (lambda d: d["trees"][0]["nodes"][0].update(feature=3), "$"),
])
def test_malformed_models(mutate, where):
    doc = small_doc()
    mutate(doc)
    with pytest.raises(ModelParseError) as exc:
        loads_forest(json.dumps(doc))
    assert exc.value.location == where


def test_cycle_rejected():
    doc = small_doc()
    doc["trees"][0]["nodes"] = [
        {"id": 0, "feature": 0, "threshold": 0.0, "left": 1, "right": 2},
        {"id": 1, "feature": 0, "threshold": 0.0, "left": 3, "right": 2},
        {"id": 2, "value": 0.0}, {"id": 3, "value": 0.0}]
    with pytest.raises(ModelParseError, match="parent"):
        loads_forest(json.dumps(doc))


def test_bad_json_and_missing_file(tmp_path):
    with pytest.raises(ModelParseError, match="line 1"):
        loads_forest("{not json")
    with pytest.raises(ModelParseError):
        load_forest(tmp_path / "absent.json")


def test_probability_leaves_checked():
    with pytest.raises(InvalidModelError):
        ForestModel([Tree([leaf(0, 1.5)], 0)], 1, "probability")


def test_predict_input_checks():
    m = ForestModel([nested_split_tree()], 2)
    with pytest.raises(InvalidInputError):
        predict(m, [0.0])
    with pytest.raises(InvalidInputError):
        predict(m, [np.nan, 0.0])


def test_vectorized_routing_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        tree = random_tree(rng, d=4)
        # Half the points sit exactly on the lattice of thresholds.
        X = np.vstack([rng.normal(size=(500, 4)),
                       rng.integers(-4, 5, size=(500, 4)) / 2.0])
        leaves = tree.apply(X)
        assert all(leaves[i] == brute_route(tree, X[i]) for i in range(len(X)))
        vals = tree.leaf_values()
        np.testing.assert_array_equal(tree.predict(X), [vals[l] for l in leaves])


def test_two_subtree_cells():
    tree, ids = two_subtree_tree()
    cells = {c.leaf: c for c in leaf_cells(tree, 3)}
    inf = np.inf
    np.testing.assert_array_equal(cells[ids["l1"]].lower, [-inf, -inf, -inf])
    np.testing.assert_array_equal(cells[ids["l1"]].upper, [2, 1, 0])
    np.testing.assert_array_equal(cells[ids["r3"]].lower, [1, 3, 0])
    np.testing.assert_array_equal(cells[ids["r3"]].upper, [inf, inf, inf])
    sub = leaf_cells(tree, 3, node_id=2)
    assert [c.leaf for c in sub] == [ids["r1"], ids["r2"], ids["r3"]]
    assert all(c.lower[2] == 0.0 for c in sub)


def test_cells_partition_space():
    rng = np.random.default_rng(2)
    for _ in range(10):
        tree = random_tree(rng, d=3)
        cells = leaf_cells(tree, 3)
        X = np.vstack([rng.normal(size=(300, 3)), rng.integers(-4, 5, size=(300, 3)) / 2.0])
        routed = tree.apply(X)
        for x, lid in zip(X, routed):
            hits = [c.leaf for c in cells if c.contains(x)]
            assert hits == [lid]


def test_two_subtree_overlapping_pairs():
    tree, ids = two_subtree_tree()
    left = leaf_cells(tree, 3, node_id=1)
    right = leaf_cells(tree, 3, node_id=2)
    pairs = overlapping_pairs(left, right, drop_feature=2)
    name = {v: k for k, v in ids.items()}
    assert sorted((name[a], name[b]) for a, b in pairs) == [
        ("l1", "r1"), ("l1", "r2"), ("l2", "r2"), ("l3", "r1"), ("l3", "r2"), ("l3", "r3")]


def test_shared_boundary_does_not_overlap():
    # Left cell x0 <= 1, right cell x0 > 1: touching but disjoint.
    tree = Tree([split(0, 1, 0.0, 1, 2),
                 split(1, 0, 1.0, 3, 4), leaf(3, 0), leaf(4, 0),
                 split(2, 0, 1.0, 5, 6), leaf(5, 0), leaf(6, 0)], 0)
    pairs = overlapping_pairs(leaf_cells(tree, 2, 1), leaf_cells(tree, 2, 2), drop_feature=1)
    assert pairs == [(3, 5), (4, 6)]


def test_overlapping_pairs_match_all_pairs():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(60):
        tree = random_tree(rng, d=3, max_depth=7)
        for lvl in tree.levels():
            for nid in lvl:
                nd = tree.node(nid)
                left = leaf_cells(tree, 3, nd.left)
                right = leaf_cells(tree, 3, nd.right)
                got = overlapping_pairs(left, right, nd.feature)
                assert got == all_pairs_overlap(left, right, nd.feature)
                checked += 1
    assert checked > 100


def test_from_sklearn_regressor_and_classifier():
    ensemble = pytest.importorskip("sklearn.ensemble")
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 3)).astype(np.float32).astype(float)
    y = X[:, 0] - X[:, 1] ** 2 + rng.normal(scale=0.1, size=200)
    rf = ensemble.RandomForestRegressor(n_estimators=5, max_depth=4, random_state=0).fit(X, y)
    m = from_sklearn(rf)
    assert m.task == "regression" and len(m.trees) == 5
    np.testing.assert_allclose(m.predict(X), rf.predict(X), rtol=0, atol=1e-12)
    clf = ensemble.RandomForestClassifier(n_estimators=4, max_depth=3, random_state=0)
    clf.fit(X, (y > 0).astype(int))
    mc = from_sklearn(clf)
    assert mc.task == "probability"
    np.testing.assert_allclose(mc.predict(X), clf.predict_proba(X)[:, 1], atol=1e-12)
    assert loads_forest(dumps_forest(mc)) == mc
