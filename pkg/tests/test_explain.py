import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import integer_schema, stump
from treextract.data import CONTINUOUS, DatasetSchema, FeatureSpec, LabeledSample, as_sample
from treextract.exceptions import NumericError, ValidationError
from treextract.explain import (ExplainerConfig, Explanation, discretizer_from_array,
                                discretizer_from_dict, discretizer_to_dict, explain, fit_local,
                                kernel_weight, perturb, quartiles)


def _interp_quartiles(values):
    """Textbook linear-interpolation quartiles, written out by hand."""
    v = sorted(values)
    out = []
    for q in (0.25, 0.5, 0.75):
        pos = q * (len(v) - 1)
        lo = int(pos)
        frac = pos - lo
        hi = min(lo + 1, len(v) - 1)
        out.append(v[lo] + frac * (v[hi] - v[lo]))
    return tuple(out)


def _wls_oracle(Z, t, w, lam):
    """Ridge with unpenalized intercept via an augmented least-squares system."""
    n, f = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    sw = np.sqrt(w)
    rows = [A * sw[:, None]]
    rhs = [t * sw]
    if lam > 0:
        pen = np.hstack([np.zeros((f, 1)), np.sqrt(lam) * np.eye(f)])
        rows.append(pen)
        rhs.append(np.zeros(f))
    sol, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    return sol[1:]


def test_quartiles_1_to_100():
    assert _interp_quartiles(range(1, 101)) == (25.75, 50.5, 75.25)
    assert quartiles(np.arange(1, 101)) == pytest.approx((25.75, 50.5, 75.25), abs=1e-12)


def test_quartiles_two_points():
    assert quartiles([0, 10]) == pytest.approx((2.5, 5.0, 7.5))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_quartiles_match_hand_oracle(values):
    assert quartiles(values) == pytest.approx(_interp_quartiles(values), rel=1e-12, abs=1e-9)


def test_constant_feature_has_single_bin():
    schema = integer_schema(1, 0, 10)
    disc = discretizer_from_array(np.full((20, 1), 4.0), schema)
    assert len(disc.occupied_bins(0)) == 1
    pts, agree = perturb([4.0], disc, 50, 0)
    assert np.all(agree == 1)
    assert np.all(pts == 4.0)


def test_bins_cover_center():
    schema = integer_schema(1, 0, 100)
    disc = discretizer_from_array(np.arange(1, 101, dtype=float)[:, None], schema)
    for v in range(0, 101):
        lo, hi = disc.interval(0, disc.bin_of(0, v))
        assert (lo is None or v > lo) and (hi is None or v <= hi)


def test_discretizer_dict_round_trip():
    schema = integer_schema(2, 0, 100)
    X = np.random.default_rng(0).integers(0, 101, size=(40, 2)).astype(float)
    disc = discretizer_from_array(X, schema)
    back = discretizer_from_dict(discretizer_to_dict(disc), schema)
    for j in range(2):
        assert np.array_equal(back.cuts[j], disc.cuts[j])


# perturbation -------------------------------------------------------------------

def test_perturb_single_row_is_center():
    schema = integer_schema(3, 0, 100)
    disc = discretizer_from_array(np.arange(300.0).reshape(100, 3) % 101, schema)
    pts, agree = perturb([5, 50, 95], disc, 1, 3)
    assert pts.tolist() == [[5.0, 50.0, 95.0]]
    assert agree.tolist() == [[1, 1, 1]]


def test_perturb_agreement_rate():
    schema = integer_schema(4, 0, 100)
    X = np.random.default_rng(1).integers(0, 101, size=(200, 4)).astype(float)
    disc = discretizer_from_array(X, schema)
    _, agree = perturb([50, 50, 50, 50], disc, 10000, 11)
    rates = agree[1:].mean(axis=0)
    assert np.all(np.abs(rates - 0.5) <= 0.02)


def test_perturb_points_respect_bins():
    schema = integer_schema(2, 0, 100)
    X = np.random.default_rng(2).integers(0, 101, size=(100, 2)).astype(float)
    disc = discretizer_from_array(X, schema)
    center = np.array([10.0, 90.0])
    pts, agree = perturb(center, disc, 500, 5)
    for j in range(2):
        own = disc.bin_of(j, center[j])
        same = np.array([disc.bin_of(j, v) == own for v in pts[:, j]])
        assert np.array_equal(same, agree[:, j] == 1)
        assert np.all(pts[:, j] == np.floor(pts[:, j]))


@pytest.mark.parametrize("d2,width", [(0, 1.0), (1, 1.0), (3, 1.5), (2, 0.75 * 2)])
def test_kernel_values(d2, width):
    a = np.array([0] * d2 + [1] * (4 - d2))
    assert kernel_weight(a, width) == pytest.approx(np.exp(-d2 / width**2), rel=1e-15)


def test_kernel_rejects_zero_width():
    with pytest.raises(ValidationError):
        kernel_weight([1, 1], 0.0)


# local surrogate --------------------------------------------------------------------

def test_fit_local_matches_lstsq_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n, f = int(rng.integers(30, 200)), int(rng.integers(1, 7))
        Z = rng.integers(0, 2, size=(n, f)).astype(float)
        t = rng.integers(0, 2, size=n).astype(float)
        w = rng.uniform(0.05, 1.0, size=n)
        lam = float(rng.choice([0.5, 1.0, 3.0]))
        got = dict(fit_local(Z, t, w, top_k=f, ridge_lambda=lam))
        want = _wls_oracle(Z, t, w, lam)
        assert np.allclose([got[j] for j in range(f)], want, atol=1e-8, rtol=0)


def test_fit_local_unit_coefficients():
    rng = np.random.default_rng(0)
    Z = rng.integers(0, 2, size=(400, 3)).astype(float)
    w = np.ones(400)
    top = fit_local(Z, Z[:, 1], w, top_k=1, ridge_lambda=0.0)
    assert top[0][0] == 1 and top[0][1] == pytest.approx(1.0, abs=1e-12)
    neg = fit_local(Z, 1 - Z[:, 1], w, top_k=1, ridge_lambda=0.0)
    assert neg[0][1] == pytest.approx(-1.0, abs=1e-12)


def test_fit_local_constant_target_gives_zero():
    Z = np.random.default_rng(1).integers(0, 2, size=(100, 3)).astype(float)
    for _, w in fit_local(Z, np.ones(100), np.ones(100), top_k=3):
        assert w == pytest.approx(0.0, abs=1e-12)


def test_fit_local_singular_without_ridge():
    Z = np.ones((50, 2))
    with pytest.raises(NumericError):
        fit_local(Z, np.arange(50) % 2, np.ones(50), top_k=2, ridge_lambda=0.0)


def test_fit_local_rejects_mismatched_lengths():
    with pytest.raises(ValidationError):
        fit_local(np.ones((5, 2)), np.ones(4), np.ones(5), top_k=1)


# end-to-end explanations ---------------------------------------------------------

def _stump_setup(n_features=4, threshold=50):
    schema = integer_schema(n_features, 0, 100)
    X = np.random.default_rng(3).integers(0, 101, size=(300, n_features)).astype(float)
    disc = discretizer_from_array(X, schema)
    return schema, stump(schema, threshold), disc


def test_split_feature_ranks_first():
    schema, target, disc = _stump_setup()
    exp = explain(target.predict_batch, [20, 50, 50, 50], disc, ExplainerConfig(rng_seed=0))
    assert exp.predicted_label == 0
    assert exp.terms[0].feature == 0
    assert exp.terms[0].weight > 0
    assert exp.terms[0].contains(20)


def test_terms_contain_center_and_respect_top_k():
    schema, target, disc = _stump_setup(6)
    center = [70, 3, 99, 40, 12, 60]
    exp = explain(target.predict_batch, center, disc, ExplainerConfig(top_k=3))
    assert len(exp.terms) == 3
    for term in exp.terms:
        assert term.contains(center[term.feature])


def test_constant_target_gives_zero_weights():
    schema = integer_schema(3, 0, 100)
    X = np.random.default_rng(4).integers(0, 101, size=(100, 3)).astype(float)
    disc = discretizer_from_array(X, schema)
    exp = explain(lambda A: np.zeros(len(A), dtype=int), [5, 5, 5], disc)
    assert exp.predicted_label == 0
    assert all(abs(t.weight) < 1e-12 for t in exp.terms)


def test_explain_issues_n_plus_one_predictions():
    schema, target, disc = _stump_setup()
    calls = []

    def counted(X):
        calls.append(len(X))
        return target.predict_batch(X)

    explain(counted, [1, 2, 3, 4], disc, ExplainerConfig(num_perturbations=250))
    assert sum(calls) == 251


def test_explain_is_deterministic():
    schema, target, disc = _stump_setup()
    cfg = ExplainerConfig(rng_seed=9)
    a = explain(target.predict_batch, [60, 1, 2, 3], disc, cfg)
    b = explain(target.predict_batch, [60, 1, 2, 3], disc, cfg)
    assert a == b
    assert Explanation.from_dict(a.to_dict()) == a


def test_continuous_features_supported():
    schema = DatasetSchema((FeatureSpec("a", CONTINUOUS, 0, 1), FeatureSpec("b", CONTINUOUS, 0, 1)),
                           ("lo", "hi"))
    X = np.random.default_rng(5).random((200, 2))
    disc = discretizer_from_array(X, schema)
    target = stump(schema, 0.5, feature=1)
    exp = explain(target.predict_batch, [0.2, 0.9], disc, ExplainerConfig(top_k=1))
    assert exp.predicted_label == 1
    assert exp.terms[0].feature == 1


def test_config_validation():
    with pytest.raises(ValidationError):
        ExplainerConfig(top_k=0).resolve(3)
    with pytest.raises(ValidationError):
        ExplainerConfig(num_perturbations=2, top_k=3).resolve(3)
    assert ExplainerConfig().resolve(16).kernel_width == pytest.approx(3.0)
    assert ExplainerConfig().resolve(16).top_k == 5


def test_labeled_input_sanity():
    # the discretizer builder accepts labeled samples via build_discretizer
    from treextract.explain import build_discretizer
    schema = integer_schema(1, 0, 10)
    data = [LabeledSample(as_sample([v]), 0) for v in range(11)]
    disc = build_discretizer(data, schema)
    assert disc.quartiles[0] == pytest.approx((2.5, 5.0, 7.5))
