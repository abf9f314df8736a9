import json
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isodiffi.diffi import (
    InlierExplanationWarning,
    combine_global,
    global_diffi,
    imbalance_array,
    induced_imbalance,
    local_diffi,
    rank_features,
)
from isodiffi.errors import DegenerateImportanceError, InvalidArgumentError
from isodiffi.forest import ForestModel, IsolationTree, fit, model_from_dict, model_to_dict

# --- induced imbalance ---------------------------------------------------


def iic_definition(nl: int, nr: int) -> Fraction:
    """The IIC written out literally with exact rationals."""
    n = nl + nr
    if nl == 0 or nr == 0:
        return Fraction(0)
    if min(nl, nr) == 1:
        return Fraction(1)
    a = Fraction(max(nl, nr), n)
    lmin = Fraction(math.ceil(n / 2), n)
    lmax = Fraction(n - 1, n)
    return (a - lmin) / (lmax - lmin) / 2 + Fraction(1, 2)


@pytest.mark.parametrize("nl,nr,expected", [(5, 0, 0.0), (0, 5, 0.0), (9, 1, 1.0), (1, 9, 1.0),
                                            (6, 5, 0.5), (7, 3, 0.75), (1, 1, 1.0), (2, 2, 0.5)])
def test_iic_examples(nl, nr, expected):
    assert induced_imbalance(nl, nr) == expected


def test_iic_6_5_raw_ratio_is_lambda_min():
    assert Fraction(6, 11) == Fraction(math.ceil(11 / 2), 11)


@given(st.integers(0, 500), st.integers(0, 500))
def test_iic_properties(nl, nr):
    v = induced_imbalance(nl, nr)
    assert v == induced_imbalance(nr, nl)
    assert v == 0.0 or 0.5 <= v <= 1.0
    assert (v == 0.0) == (nl == 0 or nr == 0)
    assert (v == 1.0) == (min(nl, nr) == 1)
    if nl + nr >= 2:
        assert abs(v - float(iic_definition(nl, nr))) <= 2e-16


def test_iic_vectorised_matches_scalar():
    nl, nr = np.meshgrid(np.arange(40), np.arange(40))
    vec = imbalance_array(nl.ravel(), nr.ravel())
    ref = [induced_imbalance(a, b) for a, b in zip(nl.ravel(), nr.ravel())]
    assert np.array_equal(vec, ref)


def test_iic_rejects_negative():
    with pytest.raises(InvalidArgumentError):
        induced_imbalance(-1, 3)


# --- micro-forest golden trace ------------------------------------------


def trace_oracle(fx, num=Fraction):
    """Step-by-step replay of the update rules on the nested fixture trees.

    Touches no library code. With ``num=Fraction`` every quantity is exact;
    with ``num=float`` the same steps run in IEEE doubles, accumulating each
    tree from zero and then summing trees in order.
    """
    X = fx["data"]
    psi = fx["psi"]
    p = len(X[0])
    c = 2 * (math.log(psi - 1) + 0.5772156649) - 2 * (psi - 1) / psi

    def route(node, x, trail):
        if "leaf" in node:
            return trail
        trail = trail + [node]
        nxt = node["left"] if x[node["feature"]] < node["threshold"] else node["right"]
        return route(nxt, x, trail)

    I = {"in": [num(0)] * p, "out": [num(0)] * p}
    C = {"in": [0] * p, "out": [0] * p}
    outliers_per_tree = []
    for tree in fx["trees"]:
        paths = {i: route(tree, X[i], []) for i in range(psi)}
        cls = {i: ("out" if 2 ** (-len(paths[i]) / c) >= fx["score_threshold"] else "in") for i in range(psi)}
        outliers_per_tree.append(sorted(i for i in cls if cls[i] == "out"))
        for k in ("in", "out"):
            members = [i for i in range(psi) if cls[i] == k]
            acc = [num(0)] * p
            for i in members:
                h = len(paths[i])
                for node in paths[i]:
                    # class-specific occupancy of the two children
                    here = [m for m in members if any(v is node for v in paths[m])]
                    nl = sum(1 for m in here if X[m][node["feature"]] < node["threshold"])
                    lam = iic_definition(nl, len(here) - nl)
                    j = node["feature"]
                    acc[j] += num(1) / num(h) * num(lam)
                    C[k][j] += 1
            I[k] = [a + b for a, b in zip(I[k], acc)]
    in_terms = [I["in"][j] / C["in"][j] if C["in"][j] else num(0) for j in range(p)]
    floor = min(t for t in in_terms if t > 0)
    gfi = []
    for j in range(p):
        if C["out"][j] == 0:
            gfi.append(num(0))
        else:
            gfi.append((I["out"][j] / C["out"][j]) / (in_terms[j] if in_terms[j] > 0 else floor))
    return {"outliers_per_tree": outliers_per_tree, "I_I": I["in"], "C_I": C["in"],
            "I_O": I["out"], "C_O": C["out"], "GFI": gfi}


def test_oracle_matches_committed_trace(micro_fixture):
    oracle = trace_oracle(micro_fixture)
    exp = micro_fixture["expected"]
    assert oracle["outliers_per_tree"] == exp["outliers_per_tree"]
    for key in ("I_I", "I_O", "GFI"):
        assert oracle[key] == [Fraction(v) for v in exp[key]], key
    assert oracle["C_I"] == exp["C_I"]
    assert oracle["C_O"] == exp["C_O"]


def test_micro_forest_leaf_contents(micro_model, micro_fixture):
    model, data = micro_model
    leaves = []

    def collect(node):
        if "leaf" in node:
            leaves.append(node["leaf"])
        else:
            collect(node["left"])
            collect(node["right"])

    for k, tree in enumerate(micro_fixture["trees"]):
        leaves.clear()
        collect(tree)
        t = model.trees[k]
        reached = {}
        for i in range(data.n):
            reached.setdefault(t.path(data.values[i])[-1], []).append(i)
        assert sorted(reached.values()) == sorted(leaves)


def test_float_trace_agrees_with_exact_trace(micro_fixture):
    exact = trace_oracle(micro_fixture)
    approx = trace_oracle(micro_fixture, num=float)
    for key in ("I_I", "I_O", "GFI"):
        assert approx[key] == pytest.approx([float(v) for v in exact[key]], rel=4e-16), key


def test_micro_forest_golden(micro_model, micro_fixture):
    model, data = micro_model
    rep = global_diffi(model, data)
    oracle = trace_oracle(micro_fixture, num=float)
    assert rep.counts_inlier.tolist() == oracle["C_I"]
    assert rep.counts_outlier.tolist() == oracle["C_O"]
    for key, got in (("I_I", rep.cumulative_inlier), ("I_O", rep.cumulative_outlier), ("GFI", rep.scores)):
        assert got.tolist() == oracle[key], key
    assert rep.ranking == [0, 1]


# --- global DIFFI --------------------------------------------------------


def test_global_invariants(synth_small, small_model):
    data, _ = synth_small
    rep = global_diffi(small_model, data)
    for I, C in ((rep.cumulative_inlier, rep.counts_inlier), (rep.cumulative_outlier, rep.counts_outlier)):
        assert (I >= 0).all()
        assert ((I > 0) <= (C > 0)).all()
        assert (I <= C).all()
    assert np.isfinite(rep.scores).all()
    assert rep.kind == "global"


def test_global_scaling_hook(synth_small, small_model):
    data, _ = synth_small
    base = global_diffi(small_model, data)
    for k in (0.5, 2.0, 3.0):
        scaled = global_diffi(small_model, data, iic_outlier_scale=k)
        np.testing.assert_allclose(scaled.scores, k * base.scores, rtol=1e-12)
        assert scaled.ranking == base.ranking


def test_global_deterministic_and_thread_independent(synth_small):
    data, _ = synth_small
    a = global_diffi(fit(data, 64, 16, seed=9), data, n_jobs=1)
    b = global_diffi(fit(data, 64, 16, seed=9, n_jobs=3), data, n_jobs=3)
    assert a.equals(b)


def test_global_degenerate_when_no_outliers(synth_small, small_model):
    data, _ = synth_small
    with pytest.raises(DegenerateImportanceError):
        global_diffi(small_model.with_threshold(0.999), data)


def test_global_degenerate_when_no_inliers(synth_small, small_model):
    data, _ = synth_small
    with pytest.raises(DegenerateImportanceError):
        global_diffi(small_model.with_threshold(1e-6), data)


def test_combine_zero_count_rules():
    I_I = np.array([1.0, 0.0, 2.0])
    C_I = np.array([2, 0, 8])
    I_O = np.array([1.0, 3.0, 0.0])
    C_O = np.array([1, 3, 0])
    scores, defined = combine_global(I_I, C_I, I_O, C_O)
    # inlier terms 0.5, missing, 0.25 -> the missing one falls back to 0.25
    assert scores.tolist() == [2.0, 4.0, 0.0]
    assert defined.tolist() == [True, True, False]


def test_permuting_features_in_serialized_model(synth_small, small_model):
    data, _ = synth_small
    perm = [2, 0, 5, 1, 4, 3]  # new column k holds old column perm[k]
    inv = np.argsort(perm)
    doc = json.loads(json.dumps(model_to_dict(small_model)))
    for t in doc["trees"]:
        for row in t["nodes"]:
            if row[1] >= 0:
                row[1] = int(inv[row[1]])
    doc["feature_names"] = [small_model.feature_names[j] for j in perm]
    relabeled = model_from_dict(doc)
    base = global_diffi(small_model, data)
    moved = global_diffi(relabeled, data.columns(perm))
    assert np.array_equal(moved.scores, base.scores[perm])
    assert moved.feature_names == tuple(base.feature_names[j] for j in perm)


# --- local DIFFI ---------------------------------------------------------


def single_split_forest(psi=256):
    t = IsolationTree(
        feature=[0, -1, -1], threshold=[0.5, 0.0, 0.0], left=[1, -1, -1], right=[2, -1, -1],
        n_samples=[psi, 1, psi - 1], depth=[0, 1, 1], bootstrap_indices=np.arange(psi),
    )
    return ForestModel(trees=[t], psi=psi, score_threshold=0.5, rng_seed=0, feature_names=("f1", "f2", "f3"))


def test_local_single_split():
    model = single_split_forest()
    rep = local_diffi(model, [0.1, 0.0, 0.0])
    assert rep.scores[0] == 0.875
    assert rep.counts_outlier.tolist() == [1, 0, 0]
    assert rep.defined.tolist() == [True, False, False]
    assert rep.scores[1:].tolist() == [0.0, 0.0]


def reference_local(model, x):
    I = np.zeros(model.p)
    C = np.zeros(model.p, dtype=int)
    for t in model.trees:
        path = t.path(x)
        h = len(path) - 1
        if h == 0:
            continue
        delta = 1.0 / h - 1.0 / model.h_max
        for v in path[:-1]:
            I[t.feature[v]] += delta
            C[t.feature[v]] += 1
    return I, C


def test_local_matches_reference(small_model, synth_small):
    data, labels = synth_small
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        for i in np.flatnonzero(labels)[:10]:
            x = data.values[i]
            rep = local_diffi(small_model, x)
            I, C = reference_local(small_model, x)
            assert np.array_equal(rep.counts_outlier, C)
            np.testing.assert_allclose(rep.cumulative_outlier, I, rtol=1e-13, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-40, 40), min_size=6, max_size=6))
def test_local_delta_bounds(small_model, x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        rep = local_diffi(small_model, np.array(x))
    hmax = small_model.h_max
    d = rep.scores[rep.defined]
    assert (d >= 0).all() and (d <= 1 - 1 / hmax + 1e-15).all()


def test_local_depth_cap_path_contributes_zero(small_model, synth_small):
    data, _ = synth_small
    tree = small_model.trees[0]
    one = ForestModel(trees=[tree], psi=small_model.psi, score_threshold=0.5, rng_seed=0,
                      feature_names=small_model.feature_names)
    capped = [x for x in data.values if len(tree.path(x)) - 1 == small_model.h_max]
    assert capped
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InlierExplanationWarning)
        rep = local_diffi(one, capped[0])
    assert rep.counts_outlier.sum() == small_model.h_max
    assert (rep.cumulative_outlier == 0.0).all()


def test_local_on_inlier_warns(small_model):
    with pytest.warns(InlierExplanationWarning):
        rep = local_diffi(small_model, np.zeros(small_model.p))
    assert rep.status == "inlier"


def test_local_on_outlier_is_ok(small_model):
    with warnings.catch_warnings():
        warnings.simplefilter("error", InlierExplanationWarning)
        rep = local_diffi(small_model, np.array([25.0, 0, 0, 0, 0, 0]))
    assert rep.status == "ok"
    assert rep.ranking[0] == 0


def test_local_rejects_wrong_dimension(small_model):
    with pytest.raises(InvalidArgumentError):
        local_diffi(small_model, np.zeros(3))


# --- ranking -------------------------------------------------------------


def test_rank_examples():
    assert rank_features(np.array([0.2, 0.9, 0.9])) == [1, 2, 0]
    assert rank_features(np.full(5, 0.3)) == [0, 1, 2, 3, 4]
    assert rank_features(np.array([0.0, 0.5, 0.1]), np.array([True, False, True])) == [2, 0, 1]


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12))
def test_rank_matches_reference_sort(scores):
    ref = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    assert rank_features(np.array(scores)) == ref
