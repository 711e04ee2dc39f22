import numpy as np
import pytest

from classtree import InvalidInputError, build_info_gain_hierarchy

from oracles import exhaustive_best_split


def test_perfectly_separated_single_split():
    x = np.array([[0.0], [0.2], [0.4], [1.6], [1.8], [2.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    tree = build_info_gain_hierarchy(x, y, max_depth=5)
    assert tree.depth == 1
    root = tree.nodes[0]
    assert root.feature == 0
    assert abs(root.threshold - 1.0) < 1e-12  # midpoint of 0.4 and 1.6
    assert np.array_equal(tree.predict_batch(x), y)


def test_xor_blobs_need_depth_two_and_fit_training_set():
    rng = np.random.default_rng(0)
    centers = [(0, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, 1)]
    xs, ys = [], []
    for cx, cy, label in centers:
        pts = np.array([cx, cy]) + 0.05 * rng.normal(size=(20, 2))
        xs.append(pts)
        ys.extend([label] * 20)
    x = np.vstack(xs)
    y = np.array(ys)
    tree = build_info_gain_hierarchy(x, y, max_depth=8)
    assert tree.depth >= 2
    assert np.mean(tree.predict_batch(x) == y) == 1.0


def test_root_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        k = 4
        centers = rng.normal(size=(k, 3)) * 3.0
        x = np.vstack([centers[c] + rng.normal(size=(50, 3)) for c in range(k)])
        y = np.repeat(np.arange(k), 50)
        tree = build_info_gain_hierarchy(x, y, max_depth=6)
        root = tree.nodes[0]
        gain, feature, threshold = exhaustive_best_split(x, y)
        assert root.feature == feature
        assert abs(root.threshold - threshold) < 1e-12
        assert gain > 0


def test_small_tree_every_split_matches_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(60, 2))
    y = (x[:, 0] + 0.3 * x[:, 1] > 0).astype(int)
    tree = build_info_gain_hierarchy(x, y, max_depth=3)

    def walk(nid, rows):
        node = tree.nodes[nid]
        if node.is_leaf:
            return
        gain, feature, threshold = exhaustive_best_split(x[rows], y[rows])
        assert node.feature == feature
        assert abs(node.threshold - threshold) < 1e-12
        mask = x[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(0, np.arange(len(y)))


def test_empty_class_rejected():
    with pytest.raises(InvalidInputError):
        build_info_gain_hierarchy(np.zeros((4, 2)), np.array([0, 0, 2, 2]), max_depth=3)


def test_class_partition_and_hierarchy_conversion():
    x = np.array([[0.0], [0.1], [1.0], [1.1], [2.0], [2.1]])
    y = np.array([0, 0, 1, 1, 2, 2])
    tree = build_info_gain_hierarchy(x, y, max_depth=4)
    partition = tree.class_partition()
    assert sorted(partition) == [0, 1, 2]
    hierarchy = tree.to_class_hierarchy()
    assert hierarchy.num_classes == 3
    assert {tuple(hierarchy.leaf_classes(nid)) for nid in hierarchy.inner_ids()} \
        <= {(0, 1), (1, 2), (0, 1, 2)}


def test_duplicated_class_regions_cannot_convert():
    # XOR: class 0 occupies two opposite corners, so no leaf-per-class form
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]] * 5)
    x = x + 0.01 * np.random.default_rng(3).normal(size=x.shape)
    y = np.array([0, 0, 1, 1] * 5)
    tree = build_info_gain_hierarchy(x, y, max_depth=6)
    assert np.mean(tree.predict_batch(x) == y) == 1.0
    with pytest.raises(InvalidInputError):
        tree.to_class_hierarchy()


def test_max_depth_respected():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(100, 3))
    y = (x[:, 0] > 0).astype(int) + 2 * (x[:, 1] > 0).astype(int)
    tree = build_info_gain_hierarchy(x, y, max_depth=2)
    assert tree.depth <= 2
