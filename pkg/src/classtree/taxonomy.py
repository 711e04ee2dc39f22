"""Concept taxonomies (hypernym DAGs) and the tree operations built on them:
spanning-hierarchy construction and node labeling by earliest common ancestor.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from .errors import FormatError, InvalidInputError
from .hierarchy import Hierarchy, Node, NodeLabel


@dataclass
class Taxonomy:
    """A DAG of concept ids (child -> parent edges) with display names.

    Multiple parents are permitted; cycles are not. Every id appearing in an
    edge must have a name.
    """

    edges: tuple[tuple[str, str], ...]
    names: dict[str, str]

    def __post_init__(self):
        edges = tuple((str(c), str(p)) for c, p in self.edges)
        object.__setattr__(self, "edges", edges)
        for child, parent in edges:
            for cid in (child, parent):
                if cid not in self.names:
                    raise InvalidInputError(f"taxonomy id {cid!r} has no name entry")
        parents: dict[str, list[str]] = {}
        for child, parent in edges:
            parents.setdefault(child, [])
            if parent not in parents[child]:
                parents[child].append(parent)
        self._parents = {c: tuple(sorted(ps)) for c, ps in parents.items()}
        self._check_acyclic()

    def _check_acyclic(self):
        state: dict[str, int] = {}  # 1 = on stack, 2 = done

        def visit(start: str):
            stack = [(start, iter(self._parents.get(start, ())))]
            state[start] = 1
            while stack:
                nid, it = stack[-1]
                advanced = False
                for parent in it:
                    if state.get(parent) == 1:
                        raise InvalidInputError(f"taxonomy contains a cycle through {parent!r}")
                    if parent not in state:
                        state[parent] = 1
                        stack.append((parent, iter(self._parents.get(parent, ()))))
                        advanced = True
                        break
                if not advanced:
                    state[nid] = 2
                    stack.pop()

        for cid in self.names:
            if cid not in state:
                visit(cid)

    def parents(self, concept_id: str) -> tuple[str, ...]:
        return self._parents.get(concept_id, ())

    def has(self, concept_id: str) -> bool:
        return concept_id in self.names

    def name(self, concept_id: str) -> str:
        return self.names[concept_id]

    def ancestor_depths(self, concept_id: str) -> dict[str, int]:
        """Minimum hop count from the concept to each ancestor (self = 0)."""
        if concept_id not in self.names:
            raise InvalidInputError(f"unresolvable concept id {concept_id!r}")
        depths = {concept_id: 0}
        queue = deque([concept_id])
        while queue:
            cur = queue.popleft()
            for parent in self.parents(cur):
                if parent not in depths:
                    depths[parent] = depths[cur] + 1
                    queue.append(parent)
        return depths

    @classmethod
    def from_tsv(cls, edges_text: str, names_text: str) -> "Taxonomy":
        """Parse edge and name tables: `child<TAB>parent` / `id<TAB>name` lines."""
        names: dict[str, str] = {}
        for lineno, line in enumerate(names_text.split("\n"), 1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(f"names TSV line {lineno}: expected 2 fields, got {len(fields)}")
            names[fields[0]] = fields[1]
        edges = []
        for lineno, line in enumerate(edges_text.split("\n"), 1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(f"edges TSV line {lineno}: expected 2 fields, got {len(fields)}")
            edges.append((fields[0], fields[1]))
        return cls(edges=tuple(edges), names=names)


def earliest_common_ancestor(tax: Taxonomy, concept_ids) -> tuple[str, int, tuple[str, ...]]:
    """Earliest (closest-to-the-leaves) concept that is an ancestor of all ids.

    Depth of a candidate is its maximum hop distance over the given concepts.
    Returns (concept, depth, other candidates tied at the same depth, sorted);
    equal-depth ties resolve to the lexicographically smallest id.
    """
    concept_ids = list(concept_ids)
    if not concept_ids:
        raise InvalidInputError("need at least one concept id")
    depth_maps = [tax.ancestor_depths(c) for c in concept_ids]
    common = set(depth_maps[0])
    for dm in depth_maps[1:]:
        common &= set(dm)
    if not common:
        raise InvalidInputError(f"concepts {sorted(concept_ids)} have no common ancestor")
    best_depth = min(max(dm[c] for dm in depth_maps) for c in common)
    tied = sorted(c for c in common if max(dm[c] for dm in depth_maps) == best_depth)
    return tied[0], best_depth, tuple(tied[1:])


def _resolve_class_ids(tax: Taxonomy, class_ids) -> list[str]:
    ids = [str(c) for c in class_ids]
    for cid in ids:
        if not tax.has(cid):
            raise InvalidInputError(f"class id {cid!r} is not in the taxonomy")
    if len(set(ids)) != len(ids):
        raise InvalidInputError("class ids map to duplicate taxonomy concepts")
    return ids


def label_nodes(tree: Hierarchy, tax: Taxonomy, class_ids) -> Hierarchy:
    """Label every node with a taxonomy concept.

    Leaves get their class concept; each inner node gets the earliest common
    ancestor of its subtree's class concepts. Ties at equal depth pick the
    lexicographically smallest id and record the remainder on the label.
    """
    ids = _resolve_class_ids(tax, class_ids)
    if len(ids) != tree.num_classes:
        raise InvalidInputError(
            f"got {len(ids)} class ids for a tree over {tree.num_classes} classes"
        )
    new_nodes = []
    for node in tree.nodes:
        concepts = [ids[c] for c in tree.leaf_classes(node.id)]
        if node.is_leaf:
            label = NodeLabel(id=concepts[0], name=tax.name(concepts[0]))
        else:
            concept, _, tied = earliest_common_ancestor(tax, concepts)
            label = NodeLabel(id=concept, name=tax.name(concept), ambiguous=tied)
        new_nodes.append(replace(node, label=label))
    return tree.with_nodes(new_nodes)


def build_taxonomy_hierarchy(tax: Taxonomy, class_ids) -> Hierarchy:
    """Minimal spanning hierarchy of the taxonomy over the given class leaves.

    Branch nodes are the earliest common ancestors of class pairs (plus the
    ECA of the whole class set as root); every node's parent is its nearest
    strict ancestor among the kept concepts. Chains of single-child inner
    nodes collapse away, so inner nodes always have >= 2 children.
    """
    ids = _resolve_class_ids(tax, class_ids)
    class_set = set(ids)
    for cid in ids:
        others = [o for o in ids if o != cid]
        if others and any(cid in tax.ancestor_depths(o) and o != cid for o in others):
            raise InvalidInputError(
                f"class {cid!r} is an ancestor of another class; cannot form leaf partition"
            )

    if len(ids) == 1:
        only = ids[0]
        node = Node(id=0, class_index=0, label=NodeLabel(id=only, name=tax.name(only)))
        return Hierarchy([node], root_id=0)

    root_concept, _, _ = earliest_common_ancestor(tax, ids)
    kept = set(ids)
    kept.add(root_concept)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            concept, _, _ = earliest_common_ancestor(tax, [a, b])
            kept.add(concept)

    # Parent = nearest kept strict ancestor (fewest hops, ties to smallest id).
    # Iterate in sorted order: set order is not stable across processes.
    parent: dict[str, str] = {}
    for concept in sorted(kept):
        if concept == root_concept:
            continue
        depths = tax.ancestor_depths(concept)
        candidates = [(d, c) for c, d in depths.items() if c in kept and c != concept and d > 0]
        if not candidates:
            raise InvalidInputError(
                f"concept {concept!r} has no ancestor among the spanning set"
            )
        parent[concept] = min(candidates)[1]

    children: dict[str, list[str]] = {c: [] for c in sorted(kept)}
    for child, par in parent.items():
        children[par].append(child)

    # Collapse single-child inner concepts (classes always stay).
    def effective_children(concept: str) -> list[str]:
        out = []
        for ch in children[concept]:
            while ch not in class_set and len(children[ch]) == 1:
                ch = children[ch][0]
            out.append(ch)
        return out

    root = root_concept
    while root not in class_set and len(children[root]) == 1:
        root = children[root][0]

    class_index = {cid: i for i, cid in enumerate(ids)}
    nodes: list[Node] = []
    next_inner = [len(ids)]

    def build(concept: str) -> tuple[int, tuple[int, ...]]:
        if concept in class_set:
            idx = class_index[concept]
            nodes.append(Node(id=idx, class_index=idx,
                              label=NodeLabel(id=concept, name=tax.name(concept))))
            return idx, (idx,)
        built = [build(ch) for ch in effective_children(concept)]
        order = sorted(range(len(built)), key=lambda i: min(built[i][1]))
        child_ids = tuple(built[i][0] for i in order)
        node_id = next_inner[0]
        next_inner[0] += 1
        nodes.append(Node(id=node_id, children=child_ids,
                          label=NodeLabel(id=concept, name=tax.name(concept))))
        classes = tuple(sorted(c for _, cs in built for c in cs))
        return node_id, classes

    root_id, _ = build(root)
    return Hierarchy(nodes, root_id=root_id)
