"""Tree data model, the two on-disk formats, and family generators."""
from __future__ import annotations

import heapq
import json
import math
import random
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    CycleError,
    DisconnectedError,
    DuplicateEdgeError,
    NegativeWeightError,
    ParameterError,
    SelfLoopError,
    TreeSyntaxError,
    UnknownNodeError,
)


@dataclass(frozen=True)
class NodeInfo:
    """What a node knows about itself at time 0."""

    id: int
    weight: float
    degree: int


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


class Tree:
    """Immutable undirected tree on dense node ids ``0..n-1``.

    Validation happens on construction: exactly ``n - 1`` distinct edges, no
    self-loops, no cycles, connected, finite non-negative weights.
    """

    __slots__ = ("n", "weights", "labels", "edges", "adj", "_infos")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]],
        weights: Sequence[float] | None = None,
        labels: Sequence[str | None] | None = None,
    ):
        if n < 1:
            raise ParameterError(f"a tree needs at least one node, got n={n}")
        edges = [(int(u), int(v)) for u, v in edges]
        weights = [1.0] * n if weights is None else [float(w) for w in weights]
        labels = [None] * n if labels is None else list(labels)
        if len(weights) != n or len(labels) != n:
            raise ParameterError("weights and labels must have one entry per node")
        for i, w in enumerate(weights):
            if not math.isfinite(w):
                raise NegativeWeightError(f"node {i}: weight {w!r} is not finite")
            if w < 0:
                raise NegativeWeightError(f"node {i}: negative weight {w!r}")

        seen = set()
        uf = _UnionFind(n)
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            for x in (u, v):
                if not 0 <= x < n:
                    raise UnknownNodeError(f"edge ({u}, {v}) references unknown node {x}")
            if u == v:
                raise SelfLoopError(f"self-loop on node {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DuplicateEdgeError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            if not uf.union(u, v):
                raise CycleError(f"edge ({u}, {v}) closes a cycle")
            adj[u].append(v)
            adj[v].append(u)
        if len(edges) != n - 1:
            roots = sorted({uf.find(x) for x in range(n)})
            lonely = [x for x in range(n) if uf.find(x) != uf.find(0)]
            raise DisconnectedError(
                f"{len(roots)} components; node {lonely[0]} is not connected to node 0"
            )

        self.n = n
        self.weights = tuple(weights)
        self.labels = tuple(labels)
        self.edges = tuple(edges)
        self.adj = tuple(tuple(a) for a in adj)
        self._infos = tuple(NodeInfo(i, self.weights[i], len(self.adj[i])) for i in range(n))

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return (
            self.n == other.n
            and self.weights == other.weights
            and self.labels == other.labels
            and {frozenset(e) for e in self.edges} == {frozenset(e) for e in other.edges}
        )

    def __hash__(self):
        return hash((self.n, self.weights, frozenset(frozenset(e) for e in self.edges)))

    def __repr__(self):
        return f"Tree(n={self.n}, edges={list(self.edges)})"

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def info(self, u: int) -> NodeInfo:
        return self._infos[u]

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def with_weights(self, weights: Sequence[float]) -> Tree:
        return Tree(self.n, self.edges, weights, self.labels)

    def leaves(self) -> list[int]:
        if self.n == 1:
            return [0]
        return [u for u in range(self.n) if len(self.adj[u]) == 1]

    def side(self, u: int, away_from: int | None) -> list[int]:
        """Nodes of the subtree rooted at ``u`` not containing ``away_from``, in preorder."""
        out = []
        stack = [(u, away_from)]
        while stack:
            x, p = stack.pop()
            out.append(x)
            for y in reversed(self.adj[x]):
                if y != p:
                    stack.append((y, x))
        return out

    # --- serialisation ---

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n):
            rec = {"id": i, "weight": self.weights[i]}
            if self.labels[i] is not None:
                rec["label"] = self.labels[i]
            nodes.append(rec)
        return {"nodes": nodes, "edges": [list(e) for e in self.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_edgelist(self) -> str:
        # one weight line per node first, so re-parsing keeps the id order
        lines = [f"# weights: {i} {w!r}" for i, w in enumerate(self.weights)]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"


# --- parsing ---------------------------------------------------------------


def parse_tree(text: bytes | str, format: str = "json") -> Tree:
    """Parse a tree from JSON or edge-list text; node ids are densified in input order."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TreeSyntaxError(f"input is not UTF-8: {exc}") from None
    if format == "json":
        return _parse_json(text)
    if format == "edgelist":
        return _parse_edgelist(text)
    raise ParameterError(f"unknown tree format {format!r}")


def _parse_json(text: str) -> Tree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeSyntaxError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list):
        raise TreeSyntaxError('expected an object with a "nodes" list')
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise TreeSyntaxError('"edges" must be a list')

    index: dict[int, int] = {}
    weights, labels = [], []
    for pos, rec in enumerate(doc["nodes"]):
        if not isinstance(rec, dict) or "id" not in rec:
            raise TreeSyntaxError(f"nodes[{pos}]: expected an object with an \"id\"")
        nid = rec["id"]
        if isinstance(nid, bool) or not isinstance(nid, int):
            raise TreeSyntaxError(f"nodes[{pos}]: id must be an integer, got {nid!r}")
        if nid in index:
            raise TreeSyntaxError(f"nodes[{pos}]: duplicate node id {nid}")
        w = rec.get("weight", 1.0)
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise TreeSyntaxError(f"node {nid}: weight must be a number, got {w!r}")
        if w < 0:
            raise NegativeWeightError(f"node {nid}: negative weight {w!r}")
        label = rec.get("label")
        if label is not None and not isinstance(label, str):
            raise TreeSyntaxError(f"node {nid}: label must be a string")
        index[nid] = len(weights)
        weights.append(float(w))
        labels.append(label)

    edges = []
    for pos, e in enumerate(raw_edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
            raise TreeSyntaxError(f"edges[{pos}]: expected a pair of integer ids, got {e!r}")
        for x in e:
            if x not in index:
                raise UnknownNodeError(f"edges[{pos}] references unknown node {x}")
        edges.append((index[e[0]], index[e[1]]))
    if not weights:
        raise TreeSyntaxError("a tree needs at least one node")
    return Tree(len(weights), edges, weights, labels)


_WEIGHT_LINE = re.compile(r"^#\s*weights?\s*:\s*(\S+)\s+(\S+)\s*$")


def _parse_edgelist(text: str) -> Tree:
    index: dict[str, int] = {}
    weights: dict[str, float] = {}
    pairs = []

    def node(tok):
        if tok not in index:
            index[tok] = len(index)
        return index[tok]

    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _WEIGHT_LINE.match(s)
            if m:
                tok, wtxt = m.groups()
                try:
                    w = float(wtxt)
                except ValueError:
                    raise TreeSyntaxError(f"line {lineno}: bad weight {wtxt!r}") from None
                if w < 0:
                    raise NegativeWeightError(f"line {lineno}: node {tok} has negative weight {w!r}")
                node(tok)
                weights[tok] = w
            continue
        parts = s.split()
        if len(parts) != 2:
            raise TreeSyntaxError(f"line {lineno}: expected 'u v', got {s!r}")
        pairs.append((node(parts[0]), node(parts[1])))

    if not index:
        raise TreeSyntaxError("empty edge list")
    n = len(index)
    toks = sorted(index, key=index.get)
    w = [weights.get(t, 1.0) for t in toks]
    # keep the original token as a label only where densifying changed it
    labels = [None if t == str(i) else t for i, t in enumerate(toks)]
    return Tree(n, pairs, w, labels)


def serialize_tree(tree: Tree, format: str = "json") -> str:
    if format == "json":
        return tree.to_json()
    if format == "edgelist":
        return tree.to_edgelist()
    raise ParameterError(f"unknown tree format {format!r}")


# --- generators ------------------------------------------------------------


def path(k: int) -> Tree:
    if k < 1:
        raise ParameterError(f"path needs k >= 1, got {k}")
    return Tree(k, [(i, i + 1) for i in range(k - 1)])


def star(n: int) -> Tree:
    """Center 0 with leaves 1..n-1."""
    if n < 2:
        raise ParameterError(f"star needs n >= 2, got {n}")
    return Tree(n, [(0, i) for i in range(1, n)])


def double_star(alpha: int, beta: int) -> Tree:
    """Centers 0 and 1, joined by an edge, carrying ``alpha`` and ``beta`` leaves."""
    if alpha < 1 or beta < 1:
        raise ParameterError(f"double star needs alpha, beta >= 1, got {alpha}, {beta}")
    edges = [(0, 1)]
    edges += [(0, 2 + i) for i in range(alpha)]
    edges += [(1, 2 + alpha + j) for j in range(beta)]
    return Tree(alpha + beta + 2, edges)


def caterpillar(alphas: Sequence[int]) -> Tree:
    """Spine 0..k-1; spine node i carries ``alphas[i]`` pendant leaves."""
    k = len(alphas)
    if k < 1:
        raise ParameterError("caterpillar needs at least one spine node")
    if any(a < 0 or int(a) != a for a in alphas):
        raise ParameterError(f"leaf counts must be non-negative integers, got {list(alphas)}")
    edges = [(i, i + 1) for i in range(k - 1)]
    nxt = k
    for i, a in enumerate(alphas):
        for _ in range(int(a)):
            edges.append((i, nxt))
            nxt += 1
    return Tree(nxt, edges)


def from_prufer(seq: Sequence[int]) -> Tree:
    """Decode a Prufer sequence over ``0..len(seq)+1`` into a labelled tree."""
    n = len(seq) + 2
    degree = [1] * n
    for x in seq:
        if not 0 <= x < n:
            raise ParameterError(f"Prufer entry {x} out of range for n={n}")
        degree[x] += 1
    heap = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(heap)
    edges = []
    for x in seq:
        leaf = heapq.heappop(heap)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(heap, x)
    u, v = heapq.heappop(heap), heapq.heappop(heap)
    edges.append((u, v))
    return Tree(n, edges)


def random_tree(n: int, seed: int) -> Tree:
    """Uniform labelled tree on n nodes via a uniform Prufer sequence."""
    if n < 1:
        raise ParameterError(f"random tree needs n >= 1, got {n}")
    if n == 1:
        return Tree(1, [])
    if n == 2:
        return Tree(2, [(0, 1)])
    rng = random.Random(seed)
    return from_prufer([rng.randrange(n) for _ in range(n - 2)])


def generate(shape: str, *params, seed: int | None = None) -> Tree:
    """Build a named family: path, star, double_star, caterpillar, random."""
    try:
        if shape == "path":
            (k,) = params
            return path(int(k))
        if shape == "star":
            (n,) = params
            return star(int(n))
        if shape in ("double_star", "double-star"):
            a, b = params
            return double_star(int(a), int(b))
        if shape == "caterpillar":
            return caterpillar([int(a) for a in params])
        if shape in ("random", "random_tree"):
            if len(params) == 2:
                n, s = params
            else:
                (n,) = params
                s = 0 if seed is None else seed
            return random_tree(int(n), int(s))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad parameters for {shape}: {list(params)}") from None
    raise ParameterError(f"unknown tree shape {shape!r}")
