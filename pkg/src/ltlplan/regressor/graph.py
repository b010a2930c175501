"""Graph encoding of formula syntax trees for relational message passing.

Nodes are the AST nodes in depth-first preorder (root first), labeled by
operator kind, atoms carrying their proposition index. Edges are typed by
the child's role and point from child to parent so that K rounds of message
passing aggregate a depth-K subtree into the root; every node also has a
typed self-loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ltlf import (
    Always,
    And,
    Atom,
    Eventually,
    Falsehood,
    Formula,
    Next,
    Not,
    Or,
    Truth,
    Until,
)

__all__ = ["NODE_KINDS", "RELATIONS", "FormulaGraph", "formula_to_graph"]

NODE_KINDS = (
    "true",
    "false",
    "atom",
    "not",
    "and",
    "or",
    "next",
    "until",
    "always",
    "eventually",
)

# unary: child of a one-argument operator; left/right: binary operand roles.
RELATIONS = ("unary", "left", "right", "self")

_KIND_OF = {
    Truth: "true",
    Falsehood: "false",
    Atom: "atom",
    Not: "not",
    And: "and",
    Or: "or",
    Next: "next",
    Until: "until",
    Always: "always",
    Eventually: "eventually",
}


@dataclass(frozen=True)
class FormulaGraph:
    """AST as a typed directed graph; node 0 is the root."""

    kinds: np.ndarray  # (n,) int index into NODE_KINDS
    atom_index: np.ndarray  # (n,) int, -1 for non-atoms
    edges: tuple  # per relation: (src, dst) int arrays, child -> parent

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    def __eq__(self, other):
        return (
            isinstance(other, FormulaGraph)
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.atom_index, other.atom_index)
            and all(
                np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                for a, b in zip(self.edges, other.edges)
            )
        )


def formula_to_graph(formula: Formula) -> FormulaGraph:
    """Deterministic graph encoding; equal ASTs map to identical graphs."""
    kinds: list[int] = []
    atom_index: list[int] = []
    edge_lists: dict[str, list[tuple[int, int]]] = {r: [] for r in RELATIONS}

    def visit(node: Formula) -> int:
        me = len(kinds)
        kinds.append(NODE_KINDS.index(_KIND_OF[type(node)]))
        atom_index.append(node.index if isinstance(node, Atom) else -1)
        edge_lists["self"].append((me, me))
        if isinstance(node, (Not, Next, Always, Eventually)):
            child = visit(node.child)
            edge_lists["unary"].append((child, me))
        elif isinstance(node, (And, Or, Until)):
            left = visit(node.left)
            edge_lists["left"].append((left, me))
            right = visit(node.right)
            edge_lists["right"].append((right, me))
        return me

    visit(formula)
    edges = tuple(
        (
            np.array([s for s, _ in edge_lists[r]], dtype=np.int64),
            np.array([d for _, d in edge_lists[r]], dtype=np.int64),
        )
        for r in RELATIONS
    )
    return FormulaGraph(np.array(kinds, dtype=np.int64), np.array(atom_index, dtype=np.int64), edges)
