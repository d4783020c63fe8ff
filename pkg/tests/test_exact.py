import json
import math
import random
from fractions import Fraction

import pytest

from conftest import sample_trees
from leafelect.distributions import prob_max_exp_first, prob_stable_sum_first
from leafelect.errors import InconsistentModelError, ParameterError, SchemeError
from leafelect.exact import (
    EXACT_FIRST_CATEGORY,
    EXACT_STABLE,
    ProbTable,
    check_caterpillar,
    check_identity,
    check_reciprocal,
    check_star,
    q_first_category,
    q_general,
    q_stable,
    star_stable_probabilities,
)
from leafelect.reroot import Custom, Degree, SubtreeSize, Unit, Weight, reroot_aggregates
from leafelect.trees import Tree, caterpillar, double_star, path, star

TREES = sample_trees(60, 1, 12, seed=99)


def random_fold(seed):
    """A commutative g-rule with arbitrary positive values."""
    salt = random.Random(seed).randrange(10**6)

    def fold(node, kids):
        key = (node.id, node.degree, tuple(sorted(kids)), salt)
        return 1 + hash(key) % 7

    return Custom(fold)


def test_uniform_rule_gives_one_over_n():
    for tree in TREES:
        q = q_first_category(tree, Unit())
        assert q.provenance == EXACT_FIRST_CATEGORY
        assert max(abs(x - 1 / tree.n) for x in q.q) <= 1e-12


def test_weight_rule_proportional_to_weight():
    rng = random.Random(1)
    for tree in TREES:
        t = tree.with_weights([rng.randint(1, 9) for _ in range(tree.n)])
        q = q_first_category(t, Weight())
        wt = t.total_weight
        for u in range(t.n):
            assert abs(q[u] * wt - t.weights[u]) <= 1e-9


def test_degree_rule_proportional_to_degree():
    for tree in TREES:
        if tree.n < 2:
            continue
        q = q_first_category(tree, Degree())
        for u in range(tree.n):
            assert q[u] == pytest.approx(tree.degree(u) / (2 * (tree.n - 1)), abs=1e-12)


@pytest.mark.parametrize("rule", [Unit(), Weight(), Degree(), SubtreeSize()], ids=lambda r: r.name)
def test_sum_to_one_builtin(rule):
    for tree in TREES:
        q = q_first_category(tree, rule)
        assert abs(q.total - 1) <= 1e-9
        assert all(0 <= x <= 1 for x in q.q)


def test_sum_to_one_random_folds():
    for i, tree in enumerate(TREES):
        assert abs(q_first_category(tree, random_fold(i)).total - 1) <= 1e-9


def test_scaling_weights_leaves_table_unchanged():
    rng = random.Random(2)
    for tree in TREES[:30]:
        w = [rng.randint(1, 9) for _ in range(tree.n)]
        base = q_first_category(tree.with_weights(w), Weight()).q
        for k in (2, 7):
            scaled = q_first_category(tree.with_weights([k * x for x in w]), Weight()).q
            assert max(abs(a - b) for a, b in zip(base, scaled)) <= 1e-12


def test_path_fraction_values():
    # exact rational check on a 4-path with SubtreeSize: theta comes from the rule table
    t = path(4)
    table = reroot_aggregates(t, SubtreeSize())
    q = q_first_category(t, SubtreeSize())
    for u in range(4):
        expect = Fraction(1)
        for v in t.adj[u]:
            a, b = table.theta(u, v), table.theta(v, u)
            expect -= Fraction(b, a + b)
        assert q[u] == pytest.approx(float(expect), abs=1e-15)


def test_q_general_reproduces_engines():
    for tree in TREES:
        unit = reroot_aggregates(tree, Degree())
        got = q_general(tree, lambda e, f: prob_max_exp_first(unit[e].theta, unit[f].theta),
                        EXACT_FIRST_CATEGORY)
        assert got == q_first_category(tree, Degree())
        sizes = reroot_aggregates(tree)
        got = q_general(tree, lambda e, f: prob_stable_sum_first(sizes[e].size, sizes[f].size),
                        EXACT_STABLE)
        assert got == q_stable(tree)


def test_two_node_symmetric():
    t = path(2)
    assert q_general(t, lambda e, f: 0.5).q == (0.5, 0.5)
    assert q_stable(t).q == (0.5, 0.5)
    assert q_first_category(t).q == (0.5, 0.5)


def test_single_node():
    t = path(1)
    assert q_stable(t).q == (1.0,)
    assert q_first_category(t, Degree()).q == (1.0,)


def test_inconsistent_comparison_rejected():
    with pytest.raises(InconsistentModelError):
        q_general(path(3), lambda e, f: 0.7)
    with pytest.raises(InconsistentModelError):
        q_general(path(2), lambda e, f: 1.5 if e[0] == 0 else -0.5)


def test_stable_sums_to_one():
    for tree in TREES:
        q = q_stable(tree)
        assert abs(q.total - 1) <= 1e-9


@pytest.mark.parametrize("n", [2, 3, 5, 8, 20])
def test_stable_star_closed_form(n):
    q = q_stable(star(n))
    center, leaf = star_stable_probabilities(n)
    assert q[0] == pytest.approx(center, abs=1e-12)
    for u in range(1, n):
        assert q[u] == pytest.approx(leaf, abs=1e-12)


def test_stable_star3_leaf():
    assert q_stable(star(3))[1] == pytest.approx(1 - 2 / math.pi * math.atan(2), abs=1e-15)


def test_stable_double_star_symmetric():
    q = q_stable(double_star(3, 3))
    assert q[0] == pytest.approx(q[1], abs=1e-15)
    assert abs(q.total - 1) <= 1e-12


def test_weight_rule_rejects_reals():
    with pytest.raises(SchemeError):
        q_first_category(path(3).with_weights([1.0, 0.5, 1.0]), Weight())


def test_probtable_serialization():
    q = q_first_category(path(3).with_weights([1, 2, 3]), Weight())
    doc = json.loads(q.to_json())
    assert doc["provenance"] == "exact_first_category"
    assert [r["q"] for r in doc["nodes"]] == pytest.approx([1 / 6, 2 / 6, 3 / 6])
    assert doc["sum"] == pytest.approx(1.0)
    assert ProbTable.from_dict(doc) == q
    lines = q.to_csv().splitlines()
    assert lines[0] == "id,q,half_width"
    assert len(lines) == 4


def test_identity_examples():
    assert check_reciprocal(1.0).abs_error == 0.0
    assert check_star(5).abs_error <= 1e-12
    rep = check_caterpillar([1, 1, 1])
    assert rep.rhs == pytest.approx(math.pi)
    assert rep.abs_error <= 1e-12


def test_identity_random_inputs():
    rng = random.Random(8)
    for _ in range(200):
        assert check_reciprocal(rng.uniform(1e-6, 1e6)).abs_error <= 1e-10
        alphas = [rng.uniform(0.01, 50) for _ in range(rng.randint(1, 8))]
        assert check_caterpillar(alphas).abs_error <= 1e-10


def test_caterpillar_identity_matches_stable_sum():
    # on an integer caterpillar the identity is the stable sum-to-one in disguise
    alphas = [2, 3, 1]
    q = q_stable(caterpillar(alphas))
    assert abs(q.total - 1) <= 1e-12
    assert check_identity("caterpillar", alphas).abs_error <= 1e-12


def test_identity_bad_inputs():
    with pytest.raises(ParameterError):
        check_reciprocal(0)
    with pytest.raises(ParameterError):
        check_star(1)
    with pytest.raises(ParameterError):
        check_caterpillar([1, -2])
    with pytest.raises(ParameterError):
        check_identity("hexagon", 3)
