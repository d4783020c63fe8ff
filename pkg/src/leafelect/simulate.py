"""Event-driven simulation of leaf-elimination elections.

A node that becomes a leaf (or starts as one) asks its scheme for a remaining
lifetime, using only the messages its already-dead neighbours sent it. When
it dies it forwards its own message to its last living neighbour. The
message is the aggregated form of everything the node knew: the pair (C, g)
for the first category, the subtree duration Gamma for the stable scheme,
and the subtree size and path length for g-rules that need them.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .distributions import RngStream, sample_poisson, sum_exp_seq
from .errors import ParameterError, SchemeError, SimulationError
from .reroot import GRule, Summary, Unit, Weight, checked_g, integer_weight
from .trees import NodeInfo, Tree


class Message(NamedTuple):
    C: int = 0
    g: int = 0
    gamma: float = 0.0
    size: int = 1
    pls: int = 0


def _shape(received: Sequence[Message]) -> tuple[int, int]:
    size = 1
    pls = 0
    for m in received:
        size += m.size
        pls += m.pls + m.size
    return size, pls


class Scheme:
    """Decides a leaf's remaining lifetime and the message it will forward."""

    name = "scheme"
    atom_free = True

    def on_leaf(self, node: NodeInfo, received: Sequence[Message], rng: RngStream) -> tuple[float, Message]:
        raise NotImplementedError

    def validate(self, tree: Tree) -> None:
        """Reject trees the scheme cannot run on, before any randomness is used."""


class FirstCategory(Scheme):
    """Lifetime Y[C_u, g_u] with C_u = sum over dead neighbours of (C_i + g_i)."""

    def __init__(self, rule: GRule | None = None):
        self.rule = Unit() if rule is None else rule
        self.name = f"first:{self.rule.name}"

    def __repr__(self):
        return f"FirstCategory({self.rule!r})"

    def validate(self, tree):
        if isinstance(self.rule, Weight):
            for u in range(tree.n):
                integer_weight(tree.info(u))

    def on_leaf(self, node, received, rng):
        C = 0
        size = 1
        pls = 0
        for m in received:
            C += m.C + m.g
            size += m.size
            pls += m.pls + m.size
        rule = self.rule
        if rule.local:
            g = rule.g(node, ())
        else:
            g = rule.g(node, [Summary(m.C + m.g, m.size, m.pls) for m in received])
        if g.__class__ is not int or g < 1:
            g = checked_g(rule, node, [Summary(m.C + m.g, m.size, m.pls) for m in received])
        return sum_exp_seq(C, g, rng), Message(C, g, 0.0, size, pls)


class SecondCategoryStable(Scheme):
    """Draws X ~ stable-1/2 and lives X + sum(Gamma_i) - max(Gamma_i).

    Gamma_u = X + sum(Gamma_i) is forwarded; it equals the node's death time,
    so the duration of a rooted subtree is the sum of its nodes' X draws.
    """

    name = "stable"

    def __repr__(self):
        return "SecondCategoryStable()"

    def on_leaf(self, node, received, rng):
        z = rng.normal()
        while z == 0.0:
            z = rng.normal()
        x = 1.0 / (z * z)
        size, pls = _shape(received)
        if not received:
            return x, Message(gamma=x, size=size, pls=pls)
        gammas = [m.gamma for m in received]
        top = max(gammas)
        gammas.remove(top)
        # sum minus max, computed without cancellation
        rest = math.fsum(gammas)
        total = math.fsum(gammas + [top, x])
        return x + rest, Message(gamma=total, size=size, pls=pls)


class ConstantRate(Scheme):
    """Every leaf lives Expo(rate), whatever it received."""

    def __init__(self, rate: float = 1.0):
        if not (math.isfinite(rate) and rate > 0):
            raise ParameterError(f"rate must be positive, got {rate!r}")
        self.rate = float(rate)
        self.name = "constant"

    def __repr__(self):
        return f"ConstantRate({self.rate!r})"

    def on_leaf(self, node, received, rng):
        size, pls = _shape(received)
        return rng.exponential(self.rate), Message(size=size, pls=pls)


class PoissonWeighted(Scheme):
    """First category with g = W ~ Poisson(scale * w_u), drawn when u becomes a leaf.

    W = 0 gives a zero lifetime: the node dies the instant it becomes a leaf.
    """

    atom_free = False

    def __init__(self, scale: float = 1.0):
        if not (math.isfinite(scale) and scale > 0):
            raise ParameterError(f"scale must be positive, got {scale!r}")
        self.scale = float(scale)
        self.name = "poisson"

    def __repr__(self):
        return f"PoissonWeighted({self.scale!r})"

    def on_leaf(self, node, received, rng):
        C = 0
        for m in received:
            C += m.C + m.g
        size, pls = _shape(received)
        w = sample_poisson(self.scale * node.weight, rng)
        return sum_exp_seq(C, w, rng), Message(C, w, 0.0, size, pls)


# --- election ---------------------------------------------------------------


@dataclass
class ElectionOutcome:
    winner: int | None
    eliminations: list[tuple[int, float]]
    leaf_times: list[float | None]
    duration: float
    trace: list[dict] | None = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return self.winner is None

    def death_order(self) -> dict[int, int]:
        return {u: i for i, (u, _) in enumerate(self.eliminations)}


def _check_lifetime(node, life):
    if not life >= 0.0:  # also catches NaN
        raise SimulationError(f"node {node}: invalid lifetime {life!r}")


def run_election(tree: Tree, scheme: Scheme, rng: RngStream, trace: bool = False) -> ElectionOutcome:
    """Run one election to completion.

    Pending deaths sit in a heap keyed by (time, node). Exactly equal times
    are resolved in uniformly random order. The last node alive is elected,
    unless its own death is due at the very instant it became alone, which
    only happens through zero-lifetime cascades and counts as a failure.
    """
    scheme.validate(tree)
    n = tree.n
    events = [] if trace else None
    if n == 1:
        if trace:
            events.append({"t": 0.0, "event": "elected", "node": 0})
        return ElectionOutcome(0, [], [0.0], 0.0, events)

    adj = tree.adj
    info = tree.info
    on_leaf = scheme.on_leaf
    alive = [True] * n
    alive_deg = [len(a) for a in adj]
    received: list[list[Message]] = [[] for _ in range(n)]
    message: list[Message | None] = [None] * n
    leaf_time: list[float | None] = [None] * n
    due = [math.inf] * n
    heap: list[tuple[float, int]] = []

    def become_leaf(u, t):
        life, msg = on_leaf(info(u), received[u], rng)
        _check_lifetime(u, life)
        leaf_time[u] = t
        message[u] = msg
        due[u] = t + life
        heapq.heappush(heap, (t + life, u))
        if trace:
            events.append(_event(t, "becomes_leaf", u, msg, scheme))

    for u in range(n):
        if alive_deg[u] == 1:
            become_leaf(u, 0.0)

    eliminations = []
    remaining = n
    heappop, heappush = heapq.heappop, heapq.heappush
    while True:
        t, u = heappop(heap)
        if heap and heap[0][0] == t:
            tied = [(t, u)]
            while heap and heap[0][0] == t:
                tied.append(heappop(heap))
            t, u = tied.pop(rng.randbelow(len(tied)))
            for item in tied:
                heappush(heap, item)

        alive[u] = False
        remaining -= 1
        eliminations.append((u, t))
        if trace:
            events.append(_event(t, "death", u, message[u], scheme))
        v = -1
        for x in adj[u]:
            if alive[x]:
                v = x
                break
        if v < 0:  # pragma: no cover - alive nodes always stay connected
            raise SimulationError(f"node {u} died with no living neighbour")
        received[v].append(message[u])
        alive_deg[v] -= 1

        if remaining == 1:
            if due[v] == t:
                alive[v] = False
                eliminations.append((v, t))
                if trace:
                    events.append(_event(t, "death", v, message[v], scheme))
                    events.append({"t": t, "event": "failure", "node": None})
                return ElectionOutcome(None, eliminations, leaf_time, t, events)
            if trace:
                events.append({"t": t, "event": "elected", "node": v})
            return ElectionOutcome(v, eliminations, leaf_time, t, events)
        if alive_deg[v] == 1:
            become_leaf(v, t)


def run_weighted_poisson(tree: Tree, rng: RngStream, scale: float = 1.0,
                         trace: bool = False) -> ElectionOutcome:
    """One election of the Poisson-randomised real-weight variant."""
    return run_election(tree, PoissonWeighted(scale), rng, trace)


def _event(t, kind, u, msg, scheme):
    ev = {"t": t, "event": kind, "node": u}
    if msg is not None:
        if isinstance(scheme, (FirstCategory, PoissonWeighted)):
            ev["C"] = msg.C
            ev["g"] = msg.g
        elif isinstance(scheme, SecondCategoryStable):
            ev["Gamma"] = msg.gamma
    return ev


# --- directed elimination ----------------------------------------------------


def run_directed(tree: Tree, root: int, scheme: Scheme, rng: RngStream,
                 away_from: int | None = None) -> float:
    """Duration of the directed elimination of the subtree rooted at ``root``.

    With ``away_from`` set, the subtree is ``T[root, \\away_from]``. Node
    information (degree, weight) is always taken from the full tree. The
    root is not a leaf until alone, so every node starts its lifetime when
    its last child dies; children report in the order they died.
    """
    if not 0 <= root < tree.n:
        raise ParameterError(f"root {root} not in tree")
    if away_from is not None and away_from not in tree.adj[root]:
        raise ParameterError(f"{away_from} is not a neighbour of {root}")
    scheme.validate(tree)
    info = tree.info
    on_leaf = scheme.on_leaf
    order, parent = _postorder(tree, root, away_from)

    done: dict[int, list[tuple[float, Message]]] = {}
    death = 0.0
    for u in order:
        kids = done.pop(u, None)
        if kids:
            if len(kids) > 1:
                kids.sort(key=lambda km: km[0])
            start = kids[-1][0]
            msgs = [m for _, m in kids]
        else:
            start = 0.0
            msgs = []
        life, msg = on_leaf(info(u), msgs, rng)
        _check_lifetime(u, life)
        death = start + life
        if u != root:
            done.setdefault(parent[u], []).append((death, msg))
    return death


def _postorder(tree: Tree, root: int, away_from: int | None):
    parent = {root: away_from}
    order = []
    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        for v in tree.adj[u]:
            if v != parent[u]:
                parent[v] = u
                stack.append(v)
    order.reverse()
    return order, parent


def run_directed_batch(tree: Tree, root: int, scheme: Scheme, runs: int, rng: RngStream,
                       away_from: int | None = None) -> np.ndarray:
    """``runs`` independent directed-elimination durations as an array.

    For the first category with a commutative rule, the constant-rate scheme
    and the stable scheme, what a node forwards does not depend on the random
    draws, so the recursion D*(tau) = D*_root + max_i D*(tau_i) is evaluated
    for all runs at once. Other schemes fall back to :func:`run_directed`
    with one spawned stream per run.
    """
    if away_from is not None and away_from not in tree.adj[root]:
        raise ParameterError(f"{away_from} is not a neighbour of {root}")
    scheme.validate(tree)
    vector_ok = (
        isinstance(scheme, (ConstantRate, SecondCategoryStable))
        or (isinstance(scheme, FirstCategory) and scheme.rule.commutative)
    )
    if not vector_ok:
        return np.array([run_directed(tree, root, scheme, rng.spawn(i), away_from) for i in range(runs)])

    order, parent = _postorder(tree, root, away_from)

    def body(gen):
        death: dict[int, np.ndarray] = {}
        summary: dict[int, Summary] = {}
        for u in order:
            kids = [v for v in tree.adj[u] if v != parent[u]]
            if isinstance(scheme, SecondCategoryStable):
                z = gen.standard_normal(runs)
                total = 1.0 / (z * z)
                for v in kids:
                    total = total + death.pop(v)
                death[u] = total
                continue
            start = np.zeros(runs)
            for v in kids:
                start = np.maximum(start, death.pop(v))
            if isinstance(scheme, ConstantRate):
                death[u] = start - np.log1p(-gen.random(runs)) / scheme.rate
                continue
            subs = [summary.pop(v) for v in kids]
            g = checked_g(scheme.rule, tree.info(u), subs)
            C = sum(c.theta for c in subs)
            life = np.zeros(runs)
            for rate in range(C + 1, C + g + 1):
                life -= np.log1p(-gen.random(runs)) / rate
            death[u] = start + life
            summary[u] = Summary(C + g, 1 + sum(c.size for c in subs), sum(c.pls + c.size for c in subs))
        return death[root]

    return rng.draw_array(body)


SCHEME_NAMES = ("uniform", "weight", "degree", "pls", "stable", "constant", "poisson")


def scheme_from_spec(spec: str) -> Scheme:
    """Parse ``NAME[:param]`` into a scheme."""
    from .reroot import rule_by_name

    name, _, param = spec.partition(":")
    name = name.strip().lower()
    try:
        if name in ("uniform", "unit", "weight", "degree", "pls", "subtree"):
            key = {"unit": "uniform", "subtree": "pls"}.get(name, name)
            return FirstCategory(rule_by_name(key))
        if name == "stable":
            return SecondCategoryStable()
        if name in ("constant", "constant-rate", "memoryless"):
            return ConstantRate(float(param) if param else 1.0)
        if name in ("poisson", "poisson-weighted"):
            return PoissonWeighted(float(param) if param else 1.0)
        if name in ("custom", "custom-fold"):
            return FirstCategory(load_custom_rule(param))
    except ValueError as exc:
        if isinstance(exc, SchemeError):
            raise
        raise SchemeError(f"bad scheme parameter in {spec!r}") from None
    raise SchemeError(f"unknown scheme {spec!r}; known: {', '.join(SCHEME_NAMES)}, custom:MODULE:FUNC")


def load_custom_rule(target: str) -> GRule:
    """Import ``module:attr``; the attribute is a GRule or a callable fold."""
    import importlib

    from .reroot import Custom

    mod_name, _, attr = target.partition(":")
    if not mod_name or not attr:
        raise SchemeError("custom scheme needs custom:MODULE:FUNC")
    try:
        obj = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise SchemeError(f"cannot load custom rule {target!r}: {exc}") from None
    if isinstance(obj, GRule):
        return obj
    if callable(obj):
        return Custom(obj, name=f"custom:{target}")
    raise SchemeError(f"{target!r} is neither a GRule nor callable")
