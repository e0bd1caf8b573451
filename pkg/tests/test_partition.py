"""Soft assignment, thresholded partitions and the modularity objective."""

import itertools
import math

import numpy as np
import pytest

from hiconn.autodiff import Tape, Tensor, backward
from hiconn.connectome import Subject, init_node_features, validate_graph
from hiconn.gradcheck import central_difference, relative_error
from hiconn.partition import (
    AssignmentNetwork,
    build_modular_pairs,
    compute_assignment,
    modularity,
    modularity_loss,
    threshold_partition,
)

RNG = np.random.default_rng(4242)


def graph_from(a):
    return init_node_features(validate_graph(np.asarray(a, dtype=float)))


def random_adjacency(rng, n, density=0.6):
    a = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    a[iu] = np.abs(rng.normal(1.0, 0.4, len(iu[0]))) * (rng.random(len(iu[0])) < density)
    return a + a.T


def two_cliques(m=4):
    """Two disconnected unweighted m-cliques; block partition has q = 0.5."""
    block = np.ones((m, m)) - np.eye(m)
    a = np.zeros((2 * m, 2 * m))
    a[:m, :m] = block
    a[m:, m:] = block
    return a


def brute_force_modularity(a, labels):
    """Double-loop Newman modularity for a hard partition."""
    total = a.sum()
    if total == 0:
        return 0.0
    b = a.sum(axis=1)
    q = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[0]):
            if labels[i] == labels[j]:
                q += a[i, j] - b[i] * b[j] / total
    return q / total


def one_hot(labels, k):
    s = np.zeros((len(labels), k))
    s[np.arange(len(labels)), labels] = 1.0
    return s


# ---------------------------------------------------------------------------
# assignment

def test_zero_weight_gives_uniform_assignment():
    g = graph_from(random_adjacency(RNG, 5))
    z_r = Tensor(RNG.normal(size=(5, 3)))
    s = compute_assignment(z_r, g, AssignmentNetwork(Tensor(np.zeros((3, 4)))))
    np.testing.assert_allclose(s.values, np.full((5, 4), 0.25))


def test_hand_softmax_logit_row():
    # zero graph makes the propagation matrix the identity; logits (ln 3, 0)
    g = graph_from(np.zeros((1, 1)))
    z_r = Tensor(np.array([[1.0]]))
    net = AssignmentNetwork(Tensor(np.array([[math.log(3.0), 0.0]])))
    s = compute_assignment(z_r, g, net)
    np.testing.assert_allclose(s.values, [[0.75, 0.25]], atol=1e-15)


def test_assignment_permutation_equivariance():
    a = random_adjacency(RNG, 6)
    z = RNG.normal(size=(6, 4))
    w = RNG.normal(size=(4, 3))
    s = compute_assignment(Tensor(z), graph_from(a), AssignmentNetwork(Tensor(w))).values
    perm = RNG.permutation(6)
    s_p = compute_assignment(Tensor(z[perm]), graph_from(a[np.ix_(perm, perm)]),
                             AssignmentNetwork(Tensor(w))).values
    np.testing.assert_allclose(s_p, s[perm], atol=1e-12)


def test_assignment_rows_sum_to_one():
    g = graph_from(random_adjacency(RNG, 7))
    s = compute_assignment(Tensor(RNG.normal(size=(7, 4))), g,
                           AssignmentNetwork(Tensor(RNG.normal(size=(4, 5)))))
    np.testing.assert_allclose(s.values.sum(axis=1), np.ones(7), atol=1e-12)


# ---------------------------------------------------------------------------
# thresholding

def test_threshold_simple_two_modules():
    p = threshold_partition(np.array([[0.9, 0.1], [0.2, 0.8]]), 0.5)
    np.testing.assert_array_equal(p.modules[0], [0])
    np.testing.assert_array_equal(p.modules[1], [1])
    assert p.retained == [0, 1]


def test_uniform_assignment_falls_back_to_first_module():
    k = 4
    p = threshold_partition(np.full((5, k), 1.0 / k), 0.5)
    np.testing.assert_array_equal(p.modules[0], np.arange(5))
    assert p.retained == [0]


def test_overlapping_membership_allowed():
    p = threshold_partition(np.array([[0.4, 0.35, 0.25]]), 0.3)
    np.testing.assert_array_equal(p.modules[0], [0])
    np.testing.assert_array_equal(p.modules[1], [0])
    assert p.modules[2].size == 0
    assert p.retained == [0, 1]


def test_every_node_covered():
    for trial in range(25):
        rng = np.random.default_rng(trial)
        s = rng.dirichlet(np.ones(4), size=9)
        p = threshold_partition(s, 1.5 / 4)
        assert p.covered_nodes() == set(range(9))


# ---------------------------------------------------------------------------
# modular pairs

def make_subject(a_s, a_m):
    return Subject("t", graph_from(a_s), graph_from(a_m), 0)


def test_single_module_pair_is_full_graph():
    a = random_adjacency(RNG, 5)
    subject = make_subject(a, a)
    p = threshold_partition(np.full((5, 2), 0.5), 0.9)  # fallback puts all in module 0
    pairs = build_modular_pairs(subject, p)
    assert len(pairs) == 1
    np.testing.assert_array_equal(pairs[0].structural.adjacency, subject.structural.adjacency)


def test_singleton_module_zero_adjacency():
    a = random_adjacency(RNG, 4)
    subject = make_subject(a, a)
    s = one_hot([0, 1, 1, 1], 2)
    pairs = build_modular_pairs(subject, threshold_partition(s, 0.5))
    assert pairs[0].node_set.tolist() == [0]
    np.testing.assert_array_equal(pairs[0].structural.adjacency, [[0.0]])


def test_two_module_slicing_matches_manual():
    a = random_adjacency(RNG, 6)
    subject = make_subject(a, a * 0.5)
    s = one_hot([0, 0, 1, 1, 0, 1], 2)
    pairs = build_modular_pairs(subject, threshold_partition(s, 0.5))
    np.testing.assert_array_equal(pairs[0].node_set, [0, 1, 4])
    np.testing.assert_array_equal(pairs[1].node_set, [2, 3, 5])
    np.testing.assert_array_equal(pairs[0].structural.adjacency, a[np.ix_([0, 1, 4], [0, 1, 4])])
    np.testing.assert_array_equal(pairs[1].morphological.adjacency,
                                  (a * 0.5)[np.ix_([2, 3, 5], [2, 3, 5])])


# ---------------------------------------------------------------------------
# modularity

def test_single_column_assignment_gives_zero():
    for trial in range(10):
        a = random_adjacency(np.random.default_rng(trial), 7)
        q = modularity(np.ones((7, 1)), a).item()
        assert abs(q) < 1e-12


def test_two_disconnected_cliques_give_half():
    a = two_cliques(4)
    s = one_hot([0] * 4 + [1] * 4, 2)
    assert modularity(s, a).item() == 0.5


def test_trace_form_matches_double_loop_oracle():
    for trial in range(30):
        rng = np.random.default_rng(trial)
        n = rng.integers(4, 9)
        a = random_adjacency(rng, n)
        labels = rng.integers(0, 3, size=n)
        q = modularity(one_hot(labels, 3), a).item()
        assert abs(q - brute_force_modularity(a, labels)) < 1e-12


def test_exhaustive_bipartitions_small_graph():
    rng = np.random.default_rng(12)
    n = 6
    a = random_adjacency(rng, n)
    for bits in itertools.product([0, 1], repeat=n - 1):
        labels = [0] + list(bits)
        q = modularity(one_hot(labels, 2), a).item()
        assert abs(q - brute_force_modularity(a, labels)) < 1e-12


def test_modularity_range_and_column_permutation_invariance():
    for trial in range(20):
        rng = np.random.default_rng(100 + trial)
        a = random_adjacency(rng, 8)
        s = rng.dirichlet(np.ones(4), size=8)
        q = modularity(s, a).item()
        assert -1.0 - 1e-9 <= q <= 1.0 + 1e-9
        perm = rng.permutation(4)
        assert abs(modularity(s[:, perm], a).item() - q) < 1e-12


def test_empty_graph_defined_as_zero():
    assert modularity(np.ones((3, 1)), np.zeros((3, 3))).item() == 0.0
    subject = make_subject(np.zeros((3, 3)), np.zeros((3, 3)))
    assert modularity_loss(np.ones((3, 1)), subject).item() == 0.0


def test_loss_sums_both_modalities():
    a_s = two_cliques(4)
    a_m = two_cliques(4)
    subject = make_subject(a_s, a_m)
    s = one_hot([0] * 4 + [1] * 4, 2)
    assert modularity_loss(s, subject).item() == -1.0

    rng = np.random.default_rng(9)
    a1, a2 = random_adjacency(rng, 6), random_adjacency(rng, 6)
    subject = make_subject(a1, a2)
    labels = rng.integers(0, 2, size=6)
    loss = modularity_loss(one_hot(labels, 2), subject).item()
    # normalization at graph construction rescales weights; oracle uses the same view
    expected = -(brute_force_modularity(subject.structural.adjacency, labels)
                 + brute_force_modularity(subject.morphological.adjacency, labels))
    assert abs(loss - expected) < 1e-12


def test_modularity_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    subject = make_subject(random_adjacency(rng, 6), random_adjacency(rng, 6))
    logits = rng.normal(size=(6, 3))

    from hiconn.autodiff import softmax_rows
    s_leaf = Tensor(logits, requires_grad=True)
    with Tape() as tape:
        loss = modularity_loss(softmax_rows(s_leaf), subject)
        backward(loss, tape)
    analytic = s_leaf.grad.copy()

    holder = logits.copy()

    def f():
        return modularity_loss(softmax_rows(Tensor(holder)), subject).item()

    numeric = central_difference(f, [holder])[0]
    assert relative_error(analytic, numeric).max() < 1e-5
