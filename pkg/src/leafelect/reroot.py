"""g-rules and per-directed-edge subtree aggregates.

For every ordered pair of neighbours ``(u, v)`` the table holds the size,
theta and path length of the subtree ``T[u, \\v]``: the part of the tree that
stays attached to ``u`` once the edge to ``v`` is cut, rooted at ``u``.

theta follows the first-category recursion: a rooted subtree's theta is the
root's g-value plus the thetas of the child subtrees.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

from .errors import SchemeError
from .trees import NodeInfo, Tree


class Summary(NamedTuple):
    """Aggregate a dying subtree hands to its parent."""

    theta: int
    size: int
    pls: int


# --- g-rules ---------------------------------------------------------------


class GRule:
    """Maps a node and the summaries of its finished child subtrees to g.

    ``additive`` rules depend on the children only through the component-wise
    sums of their summaries; the rerooting pass exploits that to stay linear.
    ``local`` rules ignore the children entirely.
    """

    name = "grule"
    additive = True
    commutative = True
    local = False

    def g(self, node: NodeInfo, children: Sequence[Summary]) -> int:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))


class Unit(GRule):
    name = "uniform"
    local = True

    def g(self, node, children):
        return 1


class Weight(GRule):
    name = "weight"
    local = True

    def g(self, node, children):
        return integer_weight(node)


class Degree(GRule):
    name = "degree"
    local = True

    def g(self, node, children):
        return node.degree if node.degree > 0 else 1


class SubtreeSize(GRule):
    """g = size of the rooted subtree at the node (1 for leaves)."""

    name = "pls"

    def g(self, node, children):
        return 1 + sum(c.size for c in children)


class Custom(GRule):
    """User fold over ``(node, child summaries)``.

    The exact engine requires ``commutative=True``: the fold must not depend
    on the order of the children. Non-commutative folds see children in the
    order they died and are usable in simulation only.
    """

    name = "custom"

    def __init__(self, fn: Callable[[NodeInfo, Sequence[Summary]], int], *,
                 commutative: bool = True, additive: bool = False, name: str | None = None):
        self.fn = fn
        self.commutative = commutative
        self.additive = additive
        if name:
            self.name = name

    def g(self, node, children):
        return self.fn(node, children)

    def __repr__(self):
        return f"Custom({getattr(self.fn, '__name__', self.fn)!r})"

    def __eq__(self, other):
        return isinstance(other, Custom) and self.fn is other.fn

    def __hash__(self):
        return hash(self.fn)


def integer_weight(node: NodeInfo) -> int:
    w = node.weight
    if not float(w).is_integer() or w < 1:
        raise SchemeError(
            f"node {node.id}: weight rule needs integer weights >= 1, got {w!r}; "
            "use the Poisson-weighted scheme for real weights"
        )
    return int(w)


def checked_g(rule: GRule, node: NodeInfo, children: Sequence[Summary]) -> int:
    g = rule.g(node, children)
    if isinstance(g, bool) or int(g) != g or g < 1:
        raise SchemeError(f"node {node.id}: {rule!r} gave g={g!r}, expected a positive integer")
    return int(g)


RULES = {r.name: r for r in (Unit(), Weight(), Degree(), SubtreeSize())}


def rule_by_name(name: str) -> GRule:
    try:
        return RULES[name]
    except KeyError:
        raise SchemeError(f"unknown g-rule {name!r}; known: {sorted(RULES)}") from None


# --- directed edge table -----------------------------------------------------


@dataclass(frozen=True)
class DirectedEdgeTable:
    tree: Tree
    rule: GRule
    entries: dict  # (u, v) -> Summary of T[u, \v]

    def __getitem__(self, uv: tuple[int, int]) -> Summary:
        return self.entries[uv]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def size(self, u: int, v: int) -> int:
        return self.entries[(u, v)].size

    def theta(self, u: int, v: int) -> int:
        return self.entries[(u, v)].theta

    def pls(self, u: int, v: int) -> int:
        return self.entries[(u, v)].pls


def _combine(rule: GRule, node: NodeInfo, children: Sequence[Summary]) -> Summary:
    g = checked_g(rule, node, children)
    theta = g
    size = 1
    pls = 0
    for c in children:
        theta += c.theta
        size += c.size
        pls += c.pls + c.size
    return Summary(theta, size, pls)


def _sum(summaries) -> Summary:
    t = s = p = 0
    for c in summaries:
        t += c.theta
        s += c.size
        p += c.pls
    return Summary(t, s, p)


def reroot_aggregates(tree: Tree, rule: GRule | None = None) -> DirectedEdgeTable:
    """Size, theta and path length of ``T[u, \\v]`` for all ``2(n-1)`` directed edges.

    Two passes from an arbitrary root: a post-order pass fills the edges that
    point away from the root, a pre-order pass fills the ones pointing back.
    """
    rule = Unit() if rule is None else rule
    if not rule.commutative:
        raise SchemeError(f"{rule!r} is order-dependent; exact aggregates need a commutative fold")
    n = tree.n
    adj = tree.adj
    info = tree.info
    entries: dict[tuple[int, int], Summary] = {}
    if n == 1:
        # still validate the rule on the lone node
        checked_g(rule, info(0), ())
        return DirectedEdgeTable(tree, rule, entries)

    parent = [-1] * n
    order = []
    stack = [0]
    seen = [False] * n
    seen[0] = True
    while stack:
        u = stack.pop()
        order.append(u)
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                stack.append(v)

    # down: entries (u, parent[u])
    for u in reversed(order):
        p = parent[u]
        if p < 0:
            continue
        kids = [entries[(c, u)] for c in adj[u] if c != p]
        entries[(u, p)] = _combine(rule, info(u), kids)

    # up: entries (u, c) for every child c, from all neighbours of u except c
    for u in order:
        nbrs = adj[u]
        incoming = [entries[(x, u)] for x in nbrs]
        if rule.additive:
            total = _sum(incoming)
            for x, s in zip(nbrs, incoming):
                if x == parent[u]:
                    continue
                rest = Summary(total.theta - s.theta, total.size - s.size, total.pls - s.pls)
                entries[(u, x)] = _combine(rule, info(u), [rest] if len(nbrs) > 1 else [])
        else:
            for i, x in enumerate(nbrs):
                if x == parent[u]:
                    continue
                entries[(u, x)] = _combine(rule, info(u), incoming[:i] + incoming[i + 1:])
    return DirectedEdgeTable(tree, rule, entries)

