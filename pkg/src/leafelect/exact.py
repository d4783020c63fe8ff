"""Closed-form election probabilities.

Every formula here has the same shape: a node ``u`` fails to be elected
exactly when, for one neighbour ``v``, the directed elimination of ``T[u, \\v]``
finishes before that of ``T[v, \\u]``. ``q_general`` implements that
reduction for an arbitrary pairwise comparison; the first-category and
stable-1/2 engines only supply the comparison.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .distributions import prob_max_exp_first, prob_stable_sum_first
from .errors import InconsistentModelError, ParameterError
from .reroot import GRule, Unit, reroot_aggregates
from .trees import Tree

EXACT_FIRST_CATEGORY = "exact_first_category"
EXACT_STABLE = "exact_stable"
EXACT_GENERAL = "exact_general"
EXACT_MEMORYLESS = "exact_memoryless"
EMPIRICAL = "empirical"

SUM_TOL = 1e-9

DurationCmp = Callable[[tuple[int, int], tuple[int, int]], float]


@dataclass(frozen=True)
class ProbTable:
    q: tuple[float, ...]
    provenance: str
    half_width: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.half_width:
            object.__setattr__(self, "half_width", (0.0,) * len(self.q))
        if len(self.half_width) != len(self.q):
            raise ParameterError("half_width must have one entry per node")

    def __len__(self):
        return len(self.q)

    def __getitem__(self, u: int) -> float:
        return self.q[u]

    @property
    def total(self) -> float:
        return math.fsum(self.q)

    @property
    def is_exact(self) -> bool:
        return self.provenance != EMPIRICAL

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": i, "q": q, "half_width": h}
                for i, (q, h) in enumerate(zip(self.q, self.half_width))
            ],
            "provenance": self.provenance,
            "sum": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "q", "half_width"])
        for i, (q, h) in enumerate(zip(self.q, self.half_width)):
            w.writerow([i, repr(q), repr(h)])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: dict) -> ProbTable:
        nodes = sorted(doc["nodes"], key=lambda r: r["id"])
        return cls(
            tuple(float(r["q"]) for r in nodes),
            doc["provenance"],
            tuple(float(r.get("half_width", 0.0)) for r in nodes),
        )


def _clean(p: float) -> float:
    # absorb rounding just outside [0, 1]
    if -1e-12 < p < 0.0:
        return 0.0
    if 1.0 < p < 1.0 + 1e-12:
        return 1.0
    return p


def q_general(tree: Tree, duration_cmp: DurationCmp, provenance: str = EXACT_GENERAL,
              tol: float = SUM_TOL) -> ProbTable:
    """q_u = 1 - sum over neighbours v of P(D*(T[u,\\v]) < D*(T[v,\\u])).

    ``duration_cmp((u, v), (v, u))`` must return that probability. The two
    orientations of every edge are checked to be complementary.
    """
    n = tree.n
    if n == 1:
        return ProbTable((1.0,), provenance)
    first = {}
    for a, b in tree.edges:
        p = duration_cmp((a, b), (b, a))
        pb = duration_cmp((b, a), (a, b))
        if not (0.0 <= p <= 1.0 and 0.0 <= pb <= 1.0) or abs(p + pb - 1.0) > tol:
            raise InconsistentModelError(
                f"edge ({a}, {b}): comparison gives {p!r} and {pb!r}, which do not sum to 1"
            )
        first[(a, b)] = p
        first[(b, a)] = pb
    q = tuple(_clean(1.0 - math.fsum(first[(u, v)] for v in tree.adj[u])) for u in range(n))
    return ProbTable(q, provenance)


def q_first_category(tree: Tree, rule: GRule | None = None) -> ProbTable:
    """Exact election probabilities for the first category with g-rule ``rule``.

    The directed duration of a rooted subtree is distributed as M_theta, and
    P(M_a < M_b) = b / (a + b).
    """
    table = reroot_aggregates(tree, Unit() if rule is None else rule)
    theta = table.entries

    def cmp(e, f):
        return prob_max_exp_first(theta[e].theta, theta[f].theta)

    return q_general(tree, cmp, EXACT_FIRST_CATEGORY)


def q_stable(tree: Tree) -> ProbTable:
    """Exact probabilities for the stable-1/2 second-category scheme.

    The directed duration of a subtree of size m is distributed as m**2 X, so the
    comparison is (2/pi) arctan(|T[v,\\u]| / |T[u,\\v]|).
    """
    table = reroot_aggregates(tree, Unit())
    ent = table.entries

    def cmp(e, f):
        return prob_stable_sum_first(ent[e].size, ent[f].size)

    return q_general(tree, cmp, EXACT_STABLE)


def star_stable_probabilities(n: int) -> tuple[float, float]:
    """(center, leaf) probabilities on the n-node star under the stable scheme."""
    if n < 2:
        raise ParameterError(f"star needs n >= 2, got {n}")
    leaf = 1.0 - 2.0 / math.pi * math.atan(n - 1)
    center = 1.0 - 2.0 * (n - 1) / math.pi * math.atan(1.0 / (n - 1))
    return center, leaf


# --- arctan identities ------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    which: str
    lhs: float
    rhs: float

    @property
    def abs_error(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_dict(self) -> dict:
        return {"identity": self.which, "lhs": self.lhs, "rhs": self.rhs, "abs_error": self.abs_error}


def check_reciprocal(x: float) -> IdentityReport:
    """arctan(x) + arctan(1/x) = pi/2."""
    if not x > 0:
        raise ParameterError(f"x must be positive, got {x!r}")
    return IdentityReport("reciprocal", math.atan(x) + math.atan(1.0 / x), math.pi / 2)


def check_star(n: int) -> IdentityReport:
    """Star-tree instance: arctan(n-1) + arctan(1/(n-1)) = pi/2."""
    if n < 2:
        raise ParameterError(f"star identity needs n >= 2, got {n}")
    return IdentityReport("star", math.atan(n - 1) + math.atan(1.0 / (n - 1)), math.pi / 2)


def check_caterpillar(alphas: Sequence[float]) -> IdentityReport:
    """Caterpillar identity for positive reals alpha_1..alpha_k.

    sum_i [arctan(A_{>i} / A_{<=i}) + arctan(A_{<i} / A_{>=i})] = (pi/2)(k-1),
    with A_S the sum of alpha_j over j in S.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(not (a > 0 and math.isfinite(a)) for a in alphas):
        raise ParameterError(f"alphas must be positive reals, got {alphas}")
    k = len(alphas)
    terms = []
    for i in range(k):
        before = math.fsum(alphas[:i])
        upto = math.fsum(alphas[:i + 1])
        after = math.fsum(alphas[i + 1:])
        from_i = math.fsum(alphas[i:])
        terms.append(math.atan(after / upto))
        terms.append(math.atan(before / from_i))
    return IdentityReport("caterpillar", math.fsum(terms), math.pi / 2 * (k - 1))


def check_identity(which: str, *args) -> IdentityReport:
    if which == "reciprocal":
        return check_reciprocal(*args)
    if which == "star":
        return check_star(*args)
    if which == "caterpillar":
        (alphas,) = args
        return check_caterpillar(alphas)
    raise ParameterError(f"unknown identity {which!r}")
