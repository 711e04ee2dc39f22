"""Graphviz DOT export for hierarchies, with optional per-node and per-edge
annotations (probabilities, traversal counts). Output is deterministic: nodes
in ascending id order, edges in child order.
"""
from __future__ import annotations

from .hierarchy import Hierarchy


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(tree: Hierarchy, class_names=None, node_annotations=None,
               edge_annotations=None) -> str:
    """Render the tree as a DOT digraph.

    class_names: optional list indexed by class for leaf captions.
    node_annotations: optional map node id -> extra caption line.
    edge_annotations: optional map (parent id, child id) -> edge label,
    e.g. the counts from traversal_frequencies.
    """
    node_annotations = node_annotations or {}
    edge_annotations = edge_annotations or {}
    lines = ["digraph hierarchy {", "  node [shape=box];"]
    for node in tree.nodes:
        caption = [f"node {node.id}"]
        if node.label is not None:
            caption.append(node.label.name)
        if node.class_index is not None:
            if class_names is not None:
                caption.append(str(class_names[node.class_index]))
            caption.append(f"class {node.class_index}")
        if node.id in node_annotations:
            caption.append(str(node_annotations[node.id]))
        label = "\\n".join(_escape(part) for part in caption)
        lines.append(f'  n{node.id} [label="{label}"];')
    for node in tree.nodes:
        for child in node.children:
            edge = ""
            if (node.id, child) in edge_annotations:
                edge = f' [label="{_escape(str(edge_annotations[(node.id, child)]))}"]'
            lines.append(f"  n{node.id} -> n{child}{edge};")
    lines.append("}")
    return "\n".join(lines) + "\n"
