import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factories import nested_split_tree
from rulereshape import (AuditConfig, ForestModel, InvalidInputError, InvalidModelError, ShapeSpec,
                         accuracy, audit_forest, audit_grid, audit_monotonicity, fold_summary,
                         kfold_indices, mape, mse)
from rulereshape.audit import threshold_points


def config(spec="0:inc", d=2, **kw):
    return AuditConfig(ShapeSpec.parse(spec), [(-1.0, 1.0)] * d, **kw)


def test_constant_predictor_passes():
    res = audit_monotonicity(lambda X: np.ones(len(X)), config("0:inc,1:dec", probes=7, grid_size=5))
    assert res.passed
    assert res.total_checks == 2 * 7 * 4
    assert res.worst_violation == 0.0 and res.witnesses == []


def test_negated_coordinate_fails_every_check():
    res = audit_monotonicity(lambda X: -X[:, 1], config("1:inc", probes=9, grid_size=6))
    assert res.violations == res.total_checks == 9 * 5
    assert len(res.witnesses) == 10
    assert res.worst_violation == pytest.approx(0.4)
    assert audit_monotonicity(lambda X: -X[:, 1], config("1:dec", probes=9, grid_size=6)).passed


def test_tolerance_is_1e12():
    cfg = config("0:inc", probes=3, grid_size=3)
    small = audit_monotonicity(lambda X: -1e-13 * X[:, 0], cfg)
    large = audit_monotonicity(lambda X: -1e-11 * X[:, 0], cfg)
    assert small.passed and not large.passed


def test_non_finite_prediction_is_model_error():
    with pytest.raises(InvalidModelError, match="non-finite"):
        audit_monotonicity(lambda X: np.where(X[:, 0] < 0, np.nan, X[:, 0]), config("0:inc", probes=2))


def test_audit_is_deterministic():
    f = lambda X: np.sin(5 * X[:, 0]) + X[:, 1]
    a = audit_monotonicity(f, config(seed=3))
    b = audit_monotonicity(f, config(seed=3))
    assert a == b
    assert a.witnesses != audit_monotonicity(f, config(seed=4)).witnesses


def test_config_validation():
    spec = ShapeSpec.parse("0:inc")
    with pytest.raises(InvalidInputError):
        AuditConfig(spec, [(0, 1)], probes=0)
    with pytest.raises(InvalidInputError):
        AuditConfig(spec, [(0, 1)], grid_size=1)
    with pytest.raises(InvalidInputError):
        AuditConfig(spec, [(1, 1)])
    with pytest.raises(InvalidInputError):
        AuditConfig(ShapeSpec.parse("3:inc"), [(0, 1)])


def test_threshold_points_straddle():
    pts = threshold_points([0.0, 1e6])
    assert 0.0 in pts and 1e6 in pts
    assert pts[0] < 0.0 < pts[2]
    assert np.sum(pts > 1e6) == 1 and np.sum(pts < 1e6) == 4


def test_threshold_aware_sweep_catches_narrow_step():
    # A tiny non-monotone window the coarse grid alone would skip over.
    model = ForestModel([nested_split_tree(0.0, 1.0, 0.0, t1=0.3001, t2=0.3002)], 2)
    spec = ShapeSpec.parse("0:inc")
    res = audit_forest(model, spec, feature_ranges=[(-1, 1), (-1, 1)], probes=2, grid_size=3)
    assert res.violations == 2
    plain = audit_monotonicity(model, AuditConfig(spec, [(-1, 1), (-1, 1)], probes=2, grid_size=3))
    assert plain.passed


def test_audit_grid_ties_and_direction():
    coords = np.array([[0.0], [1.0], [1.0]])
    spec = ShapeSpec.parse("0:inc")
    ok = np.array([[1.0, 2.0, 2.0]] * 3)[:, :, None]
    assert audit_grid(ok, coords, spec).passed
    split_tie = np.array([[1.0, 2.0, 3.0]] * 3)[:, :, None]
    assert audit_grid(split_tie, coords, spec).violations == 3
    assert audit_grid(ok, coords, ShapeSpec.parse("0:dec")).violations == 3


# -- metrics -------------------------------------------------------------------

def test_metric_examples():
    t = np.full(4, 2.0)
    assert mse(t, t) == 0 and mape(t, t) == 0
    assert mse(t + 1, t) == 1.0
    assert mape(t + 1, t) == 0.5
    assert accuracy([0.9, 0.2, 0.6], [1, 0, 0]) == pytest.approx(2 / 3)
    assert accuracy([0.5], [1]) == 0.0  # strict threshold


def test_mape_zero_truth():
    with pytest.raises(InvalidInputError, match=r"truth\[1\]"):
        mape([1, 2], [1, 0])


def test_metric_length_mismatch():
    with pytest.raises(InvalidInputError):
        mse([1, 2], [1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(0.5, 1e3)), min_size=1, max_size=30))
def test_metrics_against_plain_python(pairs):
    p = [a for a, _ in pairs]
    t = [b for _, b in pairs]
    m = sum((a - b) ** 2 for a, b in zip(p, t)) / len(p)
    assert abs(mse(p, t) - m) <= 1e-12 * max(1.0, m)
    assert mse(p, t) == mse(t, p)
    ape = sum(abs(a - b) / b for a, b in zip(p, t)) / len(p)
    assert abs(mape(p, t) - ape) <= 1e-12 * max(1.0, ape)


def test_mape_relative_to_truth():
    assert mape([2.0], [1.0]) == 1.0
    assert mape([1.0], [2.0]) == 0.5


# -- folds ---------------------------------------------------------------------

def test_kfold_shapes():
    assert sorted(len(f) for f in kfold_indices(5, 5)) == [1] * 5
    folds = kfold_indices(10, 5, seed=1)
    assert [len(f) for f in folds] == [2] * 5
    assert sorted(np.concatenate(folds).tolist()) == list(range(10))
    sizes = [len(f) for f in kfold_indices(23, 5)]
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == 23


def test_kfold_determinism_and_errors():
    a, b = kfold_indices(50, 5, seed=7), kfold_indices(50, 5, seed=7)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(InvalidInputError):
        kfold_indices(3, 4)


def test_fold_summary():
    s = fold_summary([1.0, 2.0, 3.0, 4.0])
    assert s["mean"] == 2.5
    assert s["sd"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert s["se"] == pytest.approx(s["sd"] / 2)
