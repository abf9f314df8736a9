import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from isodiffi.errors import InvalidArgumentError
from isodiffi.metrics import emd_locations, metric_record, ordered_emd, ordered_signatures, t_top_k


def lp_emd(ground_truth, estimated):
    """Generic transportation LP on the ranked locations (test-only oracle)."""
    w = np.asarray(ground_truth, float)
    w_hat = np.asarray(estimated, float)
    w, w_hat = w / w.sum(), w_hat / w_hat.sum()
    p = w.size
    order = np.argsort(w, kind="stable")
    loc = np.zeros(p)
    for i in range(1, p):
        loc[i] = loc[i - 1] + (i + 1)
    src, dst = w_hat[order], w[order]
    cost = np.abs(loc[:, None] - loc[None, :]).ravel()
    A_eq, b_eq = [], []
    for i in range(p):
        row = np.zeros((p, p))
        row[i, :] = 1
        A_eq.append(row.ravel())
        b_eq.append(src[i])
    for j in range(p):
        col = np.zeros((p, p))
        col[:, j] = 1
        A_eq.append(col.ravel())
        b_eq.append(dst[j])
    res = linprog(cost, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0
    return res.fun / np.sum(res.x)


def test_locations():
    assert emd_locations(1).tolist() == [0.0]
    assert emd_locations(4).tolist() == [0.0, 2.0, 5.0, 9.0]
    assert np.diff(emd_locations(8)).tolist() == list(range(2, 9))


def test_p2_example():
    assert ordered_emd([0.3, 0.7], [0.5, 0.5]) == 0.4
    assert lp_emd([0.3, 0.7], [0.5, 0.5]) == pytest.approx(0.4, abs=1e-12)


def test_identity_is_zero():
    assert ordered_emd([1, 2, 3, 4], [2, 4, 6, 8]) == 0.0


def test_closed_form_matches_lp_on_1000_pairs():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        p = int(rng.integers(2, 7))
        a = rng.random(p)
        b = rng.random(p)
        if rng.random() < 0.2:
            b[rng.integers(p)] = 0.0
        worst = max(worst, abs(ordered_emd(a, b) - lp_emd(a, b)))
    assert worst <= 1e-9


@given(st.integers(2, 6).flatmap(lambda p: st.tuples(
    st.lists(st.floats(0.01, 10), min_size=p, max_size=p),
    st.lists(st.floats(0.01, 10), min_size=p, max_size=p))))
def test_emd_properties(pair):
    a, b = map(np.array, pair)
    d = ordered_emd(a, b)
    assert d >= 0
    truth, est = ordered_signatures(a, b)
    assert abs(truth.weights.sum() - 1) <= 1e-9 and abs(est.weights.sum() - 1) <= 1e-9
    assert (np.diff(truth.locations) > 0).all()
    # swapping the weight roles under the same ordering leaves the value unchanged
    gaps = np.diff(truth.locations)
    swapped = float(np.sum(gaps * np.abs(np.cumsum(est.weights - truth.weights)[:-1])))
    assert swapped == pytest.approx(d, abs=1e-15)


def test_ties_in_truth_use_index_order():
    _, est = ordered_signatures([0.5, 0.5, 1.0], [0.1, 0.2, 0.7])
    assert est.order.tolist() == [0, 1, 2]
    assert ordered_signatures([1.0, 0.5, 0.5], [1, 1, 1])[0].order.tolist() == [1, 2, 0]


def test_penalty_larger_for_important_clusters():
    truth = np.array([0.1, 0.2, 0.3, 0.4])
    delta = 0.05
    low = truth.copy()
    low[0] += delta
    low[1] -= delta
    high = truth.copy()
    high[2] -= delta
    high[3] += delta
    assert ordered_emd(truth, high) > ordered_emd(truth, low)
    assert ordered_emd(truth, high) == pytest.approx(4 * delta)
    assert ordered_emd(truth, low) == pytest.approx(2 * delta)


def test_emd_errors():
    with pytest.raises(InvalidArgumentError):
        ordered_emd([0, 0], [1, 1])
    with pytest.raises(InvalidArgumentError):
        ordered_emd([1, 1], [0, 0])
    with pytest.raises(InvalidArgumentError):
        ordered_emd([1, -1], [1, 1])
    with pytest.raises(InvalidArgumentError):
        ordered_emd([1, 2], [1, 2, 3])
    with pytest.raises(InvalidArgumentError):
        ordered_emd([1], [1])


def test_ttk_examples():
    r = [[2, 0, 1, 3]] * 5
    assert t_top_k(r, 2).tolist() == [5, 0, 5, 0]
    assert t_top_k(r, 4).tolist() == [5, 5, 5, 5]
    with pytest.raises(InvalidArgumentError):
        t_top_k(r, 5)
    with pytest.raises(InvalidArgumentError):
        t_top_k([[0, 0, 1]], 1)


@given(st.integers(1, 8).flatmap(lambda p: st.tuples(
    st.lists(st.permutations(range(p)), min_size=1, max_size=10), st.integers(1, p))))
def test_ttk_brute_force(case):
    rankings, K = case
    counts = t_top_k(rankings, K)
    p = len(rankings[0])
    tally = [sum(1 for r in rankings if f in r[:K]) for f in range(p)]
    assert counts.tolist() == tally
    assert (counts <= len(rankings)).all()


def test_metric_record():
    rec = metric_record("t_top_k", np.array([1, 2]), K=1)
    assert rec == {"metric": "t_top_k", "K": 1, "value": [1, 2]}
