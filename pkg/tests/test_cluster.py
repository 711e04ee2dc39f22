import numpy as np
import pytest

from classtree import ClassWeights, InvalidInputError, induce_hierarchy, merge_sequence

from oracles import brute_force_merge_sequence
from util import hierarchical_prototypes, random_weights


def leaf_partitions(tree):
    """Set of leaf-class frozensets across inner nodes: the tree's shape."""
    return {frozenset(tree.leaf_classes(nid)) for nid in tree.inner_ids()}


def test_two_classes_single_merge():
    w = ClassWeights(rows=np.array([[1.0, 0.0], [0.0, 2.0]]), class_ids=("a", "b"))
    tree = induce_hierarchy(w)
    assert tree.num_nodes == 3
    assert tree.root.children == (0, 1)
    assert np.allclose(tree.root.weight, np.array([0.5, 1.0]), atol=0)


def test_pairwise_closest_pairs_merge_first():
    rows = np.array([
        [1.0, 0.02, 0.0],
        [1.0, -0.02, 0.0],
        [0.0, 1.0, 0.02],
        [0.0, 1.0, -0.02],
    ])
    w = ClassWeights(rows=rows, class_ids=("a", "b", "c", "d"))
    tree = induce_hierarchy(w)
    assert leaf_partitions(tree) == {
        frozenset({0, 1}), frozenset({2, 3}), frozenset({0, 1, 2, 3})
    }
    pair_01 = next(nid for nid in tree.inner_ids() if tree.leaf_classes(nid) == (0, 1))
    pair_23 = next(nid for nid in tree.inner_ids() if tree.leaf_classes(nid) == (2, 3))
    assert np.allclose(tree.node(pair_01).weight, (rows[0] + rows[1]) / 2, atol=1e-15)
    assert np.allclose(tree.node(pair_23).weight, (rows[2] + rows[3]) / 2, atol=1e-15)
    assert np.allclose(tree.root.weight, rows.mean(axis=0), atol=1e-15)


def test_node_count_and_ids():
    rng = np.random.default_rng(2)
    for k in (2, 3, 5, 9):
        tree = induce_hierarchy(random_weights(rng, k, 6))
        assert tree.num_nodes == 2 * k - 1
        assert tree.root_id == 2 * k - 2
        assert sorted(n.id for n in tree.nodes) == list(range(2 * k - 1))


def test_merge_trace_matches_bruteforce_oracle():
    rng = np.random.default_rng(42)
    for _ in range(30):
        k = int(rng.integers(2, 9))
        d = int(rng.integers(2, 7))
        rows = rng.normal(size=(k, d))
        normalized = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        assert merge_sequence(normalized, "ward") == \
            brute_force_merge_sequence(normalized, "ward")


@pytest.mark.parametrize("linkage", ["average", "complete"])
def test_other_linkages_match_bruteforce(linkage):
    rng = np.random.default_rng(17)
    for _ in range(10):
        k = int(rng.integers(2, 8))
        rows = rng.normal(size=(k, 4))
        normalized = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        assert merge_sequence(normalized, linkage) == \
            brute_force_merge_sequence(normalized, linkage)


def test_duplicate_rows_resolved_by_tie_break():
    rows = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    w = ClassWeights(rows=rows, class_ids=("a", "b", "c", "d"))
    tree = induce_hierarchy(w)
    # identical rows 0,1,2: tie-break pairs (0,1) first, then merges in 2
    assert frozenset({0, 1}) in leaf_partitions(tree)
    assert frozenset({0, 1, 2}) in leaf_partitions(tree)


def test_permutation_yields_isomorphic_tree():
    rng = np.random.default_rng(23)
    for _ in range(10):
        k = int(rng.integers(3, 10))
        w = random_weights(rng, k, 5)
        tree = induce_hierarchy(w)
        perm = rng.permutation(k)
        permuted = ClassWeights(rows=w.rows[perm],
                                class_ids=tuple(w.class_ids[i] for i in perm))
        tree_p = induce_hierarchy(permuted)
        # map permuted leaf indices back to original class indices
        back = {new: old for new, old in enumerate(perm.tolist())}
        parts_p = {
            frozenset(back[c] for c in tree_p.leaf_classes(nid))
            for nid in tree_p.inner_ids()
        }
        assert parts_p == leaf_partitions(tree)


def test_scaling_one_row_keeps_topology():
    rng = np.random.default_rng(29)
    w = random_weights(rng, 8, 5)
    tree = induce_hierarchy(w)
    scaled_rows = w.rows.copy()
    scaled_rows[3] *= 17.5
    scaled = ClassWeights(rows=scaled_rows, class_ids=w.class_ids)
    assert leaf_partitions(induce_hierarchy(scaled)) == leaf_partitions(tree)


def test_planted_structure_recovered():
    rng = np.random.default_rng(31)
    rows = hierarchical_prototypes(rng, pairs=4, d=16)
    rows = rows + 0.01 * rng.normal(size=rows.shape)
    w = ClassWeights(rows=rows, class_ids=tuple(f"c{i}" for i in range(8)))
    parts = leaf_partitions(induce_hierarchy(w))
    for pair in ({0, 1}, {2, 3}, {4, 5}, {6, 7}):
        assert frozenset(pair) in parts
    for quad in ({0, 1, 2, 3}, {4, 5, 6, 7}):
        assert frozenset(quad) in parts


def test_invalid_inputs():
    with pytest.raises(InvalidInputError):
        induce_hierarchy(ClassWeights(rows=np.ones((1, 4)), class_ids=("a",)))
    with pytest.raises(InvalidInputError):
        ClassWeights(rows=np.array([[0.0, 0.0], [1.0, 0.0]]), class_ids=("a", "b"))
    with pytest.raises(InvalidInputError):
        ClassWeights(rows=np.array([[np.inf, 0.0], [1.0, 0.0]]), class_ids=("a", "b"))
    with pytest.raises(InvalidInputError):
        merge_sequence(np.eye(3), "median")
