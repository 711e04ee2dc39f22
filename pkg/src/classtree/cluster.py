"""Agglomerative induction of a binary class hierarchy from weight rows.

Clustering runs on l2-normalized rows; the weights attached to the resulting
tree are the raw (un-normalized) rows, so a flat tree reproduces the original
linear layer exactly.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .hierarchy import ClassWeights, Hierarchy, Node, attach_weights

LINKAGES = ("ward", "average", "complete")

# Two candidate merges whose costs differ by no more than this are treated as
# tied and resolved by the leaf-index rule below.
TIE_EPS = 1e-12


def _initial_distances(points: np.ndarray, linkage: str) -> dict:
    diffs = points[:, None, :] - points[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diffs, diffs)
    if linkage != "ward":
        sq = np.sqrt(sq)
    n = len(points)
    return {(i, j): float(sq[i, j]) for i in range(n) for j in range(i + 1, n)}


def _pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def merge_sequence(points: np.ndarray, linkage: str = "ward"):
    """Run agglomerative clustering and return the ordered list of merges.

    Each entry is a pair (members_a, members_b) of sorted index tuples with
    min(members_a) < min(members_b). Ties in merge cost (within TIE_EPS) go to
    the pair whose sorted union of member indices is lexicographically
    smallest, i.e. lowest smallest member first, then second-smallest, etc.
    """
    if linkage not in LINKAGES:
        raise InvalidInputError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    dist = _initial_distances(points, linkage)
    members = {i: (i,) for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    active = list(range(n))
    merges = []
    next_id = n
    while len(active) > 1:
        best = min(dist[_pair_key(a, b)]
                   for i, a in enumerate(active) for b in active[i + 1:])
        candidate = None
        cand_key = None
        for i, a in enumerate(active):
            for b in active[i + 1:]:
                if dist[_pair_key(a, b)] <= best + TIE_EPS:
                    key = tuple(sorted(members[a] + members[b]))
                    if cand_key is None or key < cand_key:
                        cand_key = key
                        candidate = (a, b)
        a, b = candidate
        if min(members[a]) > min(members[b]):
            a, b = b, a
        merges.append((members[a], members[b]))

        sa, sb = sizes[a], sizes[b]
        dab = dist[_pair_key(a, b)]
        new = next_id
        next_id += 1
        for c in active:
            if c in (a, b):
                continue
            sc = sizes[c]
            dac = dist[_pair_key(a, c)]
            dbc = dist[_pair_key(b, c)]
            if linkage == "ward":
                d = ((sa + sc) * dac + (sb + sc) * dbc - sc * dab) / (sa + sb + sc)
            elif linkage == "average":
                d = (sa * dac + sb * dbc) / (sa + sb)
            else:
                d = max(dac, dbc)
            dist[_pair_key(new, c)] = d
        members[new] = tuple(sorted(members[a] + members[b]))
        sizes[new] = sa + sb
        active = [c for c in active if c not in (a, b)] + [new]
    return merges


def induce_hierarchy(weights: ClassWeights, linkage: str = "ward") -> Hierarchy:
    """Build a binary hierarchy by agglomerative clustering of the weight rows.

    The rows are l2-normalized before clustering, so scaling any single row by
    a positive factor leaves the tree topology unchanged. The returned tree has
    K leaves (ids 0..K-1, bound to class indices) and K-1 inner nodes
    (ids K..2K-2 in merge order, the root last), with raw-row weights attached.
    """
    rows = weights.rows
    norms = np.linalg.norm(rows, axis=1)
    # ClassWeights already rejects zero rows; guard anyway for direct callers.
    if np.any(norms == 0.0):
        raise InvalidInputError("cannot normalize a zero weight row")
    normalized = rows / norms[:, None]

    merges = merge_sequence(normalized, linkage)
    k = weights.num_classes
    nodes = [Node(id=i, class_index=i) for i in range(k)]
    cluster_node = {(i,): i for i in range(k)}
    for idx, (ma, mb) in enumerate(merges):
        node_id = k + idx
        ca, cb = cluster_node[ma], cluster_node[mb]
        children = (ca, cb) if min(ma) < min(mb) else (cb, ca)
        nodes.append(Node(id=node_id, children=children))
        cluster_node[tuple(sorted(ma + mb))] = node_id
    tree = Hierarchy(nodes, root_id=2 * k - 2)
    return attach_weights(tree, weights)
