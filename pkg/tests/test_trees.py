import itertools
import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigrecon.observables import CoordinateProjection, ExpLinear, GradientOnly, QuadraticForm
from sigrecon.signature import words
from sigrecon.trees import (
    LabeledRecursiveTree,
    RootedOpTree,
    apply_rooted_op,
    apply_word_direct,
    apply_word_via_trees,
    brute_force_tree_count,
    canonical_form,
    enumerate_rooted_ops,
    enumerate_trees,
    eval_tree_vf,
    eval_tree_vf_fixed_directions,
    sum_tree_field,
)
from sigrecon.vector_fields import LinearModel, UnsupportedOrderError, sample_model


@pytest.mark.parametrize("m", range(1, 7))
def test_counts_match_brute_force(m):
    w = (1,) * m
    assert len(enumerate_trees(w)) == math.factorial(m - 1) == brute_force_tree_count(m)
    assert len(enumerate_rooted_ops(w)) == math.factorial(m) == brute_force_tree_count(m, rooted=True)


def test_trees_are_distinct_and_valid():
    trees = enumerate_trees((1, 2, 1, 2))
    assert len({t.parents for t in trees}) == 6
    for t in trees:
        assert all(1 <= p <= k for k, p in enumerate(t.parents, start=1))


def test_invalid_parent_vectors():
    with pytest.raises(ValueError):
        LabeledRecursiveTree((2,), (1, 1))
    with pytest.raises(ValueError):
        RootedOpTree((0, 2), (1, 1))


def test_word_length_guard():
    with pytest.raises(ValueError):
        enumerate_trees((1,) * 9)
    with pytest.raises(ValueError):
        enumerate_trees(())


def test_bracket_and_dict():
    t = LabeledRecursiveTree((1, 1), (1, 2, 3))
    assert str(t) == "[*2 *3]*1"
    assert LabeledRecursiveTree.from_dict(t.to_dict()) == t
    op = RootedOpTree((0, 1), (2, 1))
    assert op.root_degree == 1
    assert RootedOpTree.from_dict(op.to_dict()) == op


def test_canonical_form_identifies_reordered_children():
    a = LabeledRecursiveTree((1, 1), (1, 2, 3))
    b = LabeledRecursiveTree((1, 1), (1, 3, 2))
    c = LabeledRecursiveTree((1, 2), (1, 2, 3))
    assert canonical_form(a) == canonical_form(b) != canonical_form(c)
    shapes = {canonical_form(t) for w in words(2, 3) for t in enumerate_trees(w)}
    assert len(shapes) == 14


def test_reordered_children_give_identical_fields(rng):
    model = sample_model("neural2exp", 2, 2, seed=0)
    x = rng.uniform(-1, 1, (6, 2))
    a = eval_tree_vf(LabeledRecursiveTree((1, 1), (1, 1, 2)), model, x)
    b = eval_tree_vf(LabeledRecursiveTree((1, 1), (1, 2, 1)), model, x)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


def linear_word_oracle(A, w, c, x):
    """For V_i(x) = A_i x and g = c.x the word operator is c^T A_{w_1} ... A_{w_m} x."""
    M = reduce(np.matmul, [A[a - 1] for a in w])
    return c @ M @ x


def test_linear_model_closed_form(rng):
    A = rng.standard_normal((2, 3, 3))
    model = LinearModel(A)
    x = rng.standard_normal(3)
    for w in itertools.chain(words(2, 1), words(2, 2), words(2, 3), words(2, 4)):
        for j in range(1, 4):
            c = np.eye(3)[j - 1]
            expected = linear_word_oracle(A, w, c, x)
            g = CoordinateProjection(j, 3)
            assert apply_word_direct(w, g, model, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)
            assert apply_word_via_trees(w, g, model, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(sum_tree_field(w, model, x), reduce(np.matmul, [A[a - 1] for a in w]) @ x,
                                   rtol=1e-12)


def test_one_letter_is_lie_derivative(rng):
    model = sample_model("neural1", 2, 3, seed=4)
    g = ExpLinear(np.array([0.2, -0.4, 0.1]))
    x = rng.uniform(-1, 1, 3)
    grad = np.array([g.partial((j,), x) for j in (1, 2, 3)])
    assert apply_word_direct((2,), g, model, x) == pytest.approx(grad @ model.eval(2, x))


def test_two_letter_order_convention(rng):
    # V_{(1,2)} g = V_2(V_1 g): the last letter is applied last
    model = sample_model("neural1", 2, 2, seed=9)
    g = QuadraticForm(np.array([[1.0, 0.3], [0.3, -0.5]]))
    x = rng.uniform(-1, 1, 2)
    v1, v2 = model.eval(1, x), model.eval(2, x)
    J1 = np.stack([model.mixed_partial(1, (j,), x) for j in (1, 2)], axis=-1)
    H = np.array([[g.partial((a, b), x) for b in (1, 2)] for a in (1, 2)])
    grad = np.array([g.partial((a,), x) for a in (1, 2)])
    expected = v1 @ H @ v2 + grad @ J1 @ v2
    assert apply_word_direct((1, 2), g, model, x) == pytest.approx(expected, rel=1e-12)


def test_fixed_directions_sum_to_tree_field(rng):
    model = sample_model("neural2exp", 2, 2, seed=1)
    x = rng.uniform(-1, 1, 2)
    for t in enumerate_trees((1, 2, 1)):
        total = sum(eval_tree_vf_fixed_directions(t, j, model, x) for j in itertools.product((1, 2), repeat=2))
        np.testing.assert_allclose(total, eval_tree_vf(t, model, x), rtol=1e-12)


def test_rooted_op_single_root_edge_is_tree_field(rng):
    model = sample_model("neural1", 1, 2, seed=3)
    x = rng.uniform(-1, 1, 2)
    op = RootedOpTree((0, 1, 1), (1, 1, 1))
    tree = LabeledRecursiveTree((1, 1), (1, 1, 1))
    for j in (1, 2):
        assert apply_rooted_op(op, CoordinateProjection(j, 2), model, x) == pytest.approx(eval_tree_vf(tree, model, x)[j - 1])


def test_gradient_only_observable_rejected_for_long_words():
    model = sample_model("linear", 1, 1, seed=0)
    g = GradientOnly(lambda x: x[..., 0] ** 3, lambda x: 3 * x ** 2, 1)
    apply_word_via_trees((1,), g, model, np.ones(1))
    with pytest.raises(UnsupportedOrderError):
        apply_word_via_trees((1, 1), g, model, np.ones(1))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["linear", "neural1", "neural2exp", "scalar_poly"]),
       st.lists(st.integers(1, 2), min_size=1, max_size=4), st.integers(0, 50))
def test_direct_and_tree_expansions_agree(kind, w, seed):
    N = 1 if kind == "scalar_poly" else 2
    model = sample_model(kind, 2, N, seed=seed)
    x = np.random.default_rng(seed).uniform(-1, 1, N)
    g = ExpLinear(np.full(N, 0.5))
    a, b = apply_word_direct(w, g, model, x), apply_word_via_trees(w, g, model, x)
    assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1e-300) + 1e-300
