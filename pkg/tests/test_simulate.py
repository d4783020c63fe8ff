import json
import math
import random

import numpy as np
import pytest
from scipy import stats

from conftest import sample_trees, z_score
from leafelect.distributions import RngStream, StableHalf, cdf
from leafelect.errors import ParameterError, SchemeError, SimulationError
from leafelect.montecarlo import directed_durations
from leafelect.reroot import Custom, Degree, SubtreeSize, Unit, Weight, reroot_aggregates
from leafelect.simulate import (
    ConstantRate,
    FirstCategory,
    Message,
    PoissonWeighted,
    Scheme,
    SecondCategoryStable,
    run_directed,
    run_directed_batch,
    run_election,
    run_weighted_poisson,
    scheme_from_spec,
)
from leafelect.trees import path, star

ALPHA = 0.01


def max_exp_cdf(theta):
    return lambda x: (-np.expm1(-np.asarray(x))) ** theta


def test_single_node_elects_immediately():
    out = run_election(path(1), FirstCategory(), RngStream(0))
    assert out.winner == 0 and out.eliminations == [] and not out.failed


def test_two_node_constant_rate_fair():
    wins = sum(run_election(path(2), ConstantRate(), RngStream(1, i)).winner for i in range(100_000))
    assert abs(wins / 100_000 - 0.5) <= 0.005


def test_path3_uniform_election():
    trials = 60_000
    counts = [0, 0, 0]
    for i in range(trials):
        counts[run_election(path(3), FirstCategory(Unit()), RngStream(2, i)).winner] += 1
    for c in counts:
        assert abs(z_score(c / trials, 1 / 3, trials)) <= 3


@pytest.mark.parametrize("scheme", [FirstCategory(Unit()), FirstCategory(SubtreeSize()),
                                    SecondCategoryStable(), ConstantRate(2.0)], ids=repr)
def test_outcome_invariants(scheme):
    for k, tree in enumerate(sample_trees(40, 2, 10, seed=4)):
        out = run_election(tree, scheme, RngStream(3, k))
        assert len(out.eliminations) == tree.n - 1
        times = [t for _, t in out.eliminations]
        assert times == sorted(times)
        assert out.winner not in {u for u, _ in out.eliminations}
        assert out.duration == times[-1]
        assert all(t is not None for t in out.leaf_times if t is not None)


def test_atom_free_schemes_have_no_tied_deaths():
    ties = 0
    for i in range(20_000):
        out = run_election(star(6), FirstCategory(Unit()), RngStream(5, i))
        times = [t for _, t in out.eliminations]
        ties += len(times) != len(set(times))
    assert ties == 0


def test_directed_single_node_is_expo1():
    d = directed_durations(path(1), 0, FirstCategory(), 10_000, seed=6)
    assert stats.kstest(d, "expon").pvalue > ALPHA


@pytest.mark.parametrize("tree,root,theta", [(path(3), 0, 3), (star(4), 0, 4), (star(4), 2, 4)])
def test_directed_duration_unit(tree, root, theta):
    d = directed_durations(tree, root, FirstCategory(), 10_000, seed=7)
    assert stats.kstest(d, max_exp_cdf(theta)).pvalue > ALPHA


def test_directed_duration_mixed_rules():
    rng = random.Random(8)
    rejects = 0
    rules = [Unit(), Degree(), SubtreeSize(), Weight()]
    for k, tree in enumerate(sample_trees(20, 1, 10, seed=8)):
        tree = tree.with_weights([rng.randint(1, 4) for _ in range(tree.n)])
        rule = rules[k % 4]
        root = rng.randrange(tree.n)
        # full tree rooted at root: root's g plus the thetas of every branch
        table = reroot_aggregates(tree, rule)
        kids = [table[(v, root)] for v in tree.adj[root]]
        theta = sum(c.theta for c in kids) + rule.g(tree.info(root), kids)
        d = directed_durations(tree, root, FirstCategory(rule), 4_000, seed=100 + k)
        rejects += stats.kstest(d, max_exp_cdf(theta)).pvalue < ALPHA
    assert rejects <= 2


def test_directed_subtree_excludes_neighbour():
    tree = path(5)
    d = directed_durations(tree, 2, FirstCategory(), 8_000, seed=9, away_from=3)
    assert stats.kstest(d, max_exp_cdf(3)).pvalue > ALPHA


def test_directed_stable_scales_with_size_squared():
    tree = star(5)
    d = directed_durations(tree, 1, SecondCategoryStable(), 10_000, seed=10)
    scaled = d / 25.0
    assert stats.kstest(scaled, lambda x: cdf(StableHalf(), x)).pvalue > ALPHA


@pytest.mark.parametrize("scheme", [FirstCategory(Degree()), SecondCategoryStable(), ConstantRate(1.5)], ids=repr)
def test_batch_matches_scalar(scheme):
    tree = sample_trees(1, 7, 7, seed=11)[0]
    batch = run_directed_batch(tree, 0, scheme, 8_000, RngStream(12))
    scalar = directed_durations(tree, 0, scheme, 8_000, seed=13)
    assert batch.shape == (8_000,)
    assert stats.ks_2samp(batch, scalar).pvalue > ALPHA


def test_batch_fallback_for_non_commutative_rule():
    rule = Custom(lambda node, kids: 1 + (kids[0].size if kids else 0), commutative=False)
    out = run_directed_batch(path(4), 1, FirstCategory(rule), 50, RngStream(14))
    assert out.shape == (50,) and np.all(out > 0)


def test_non_commutative_rule_runs_in_election():
    rule = Custom(lambda node, kids: 1 + (kids[-1].size if kids else 0), commutative=False)
    out = run_election(star(5), FirstCategory(rule), RngStream(15))
    assert out.winner is not None


def test_directed_bad_root():
    with pytest.raises(ParameterError):
        run_directed(path(3), 5, FirstCategory(), RngStream(0))
    with pytest.raises(ParameterError):
        run_directed(path(3), 0, FirstCategory(), RngStream(0), away_from=2)


def test_trace_events():
    out = run_election(path(3), FirstCategory(), RngStream(16), trace=True)
    kinds = [e["event"] for e in out.trace]
    assert kinds.count("becomes_leaf") == 3
    assert kinds.count("death") == 2
    assert kinds[-1] == "elected" and out.trace[-1]["node"] == out.winner
    json.dumps(out.trace)
    leaf = next(e for e in out.trace if e["event"] == "becomes_leaf")
    assert {"t", "node", "C", "g"} <= set(leaf)


def test_stable_trace_has_gamma():
    out = run_election(star(4), SecondCategoryStable(), RngStream(17), trace=True)
    assert all("Gamma" in e for e in out.trace if e["event"] == "death")


def test_stable_gamma_equals_death_time():
    out = run_election(path(4), SecondCategoryStable(), RngStream(18), trace=True)
    for e in out.trace:
        if e["event"] == "death":
            assert e["Gamma"] == pytest.approx(e["t"], rel=1e-12)


def test_first_category_messages():
    scheme = FirstCategory(Unit())
    node = path(3).info(1)
    _, msg = scheme.on_leaf(node, [Message(0, 1), Message(0, 1)], RngStream(0))
    assert (msg.C, msg.g, msg.size, msg.pls) == (2, 1, 3, 2)


def test_poisson_zero_weights_always_fail():
    tree = path(4).with_weights([0, 0, 0, 0])
    for i in range(50):
        out = run_weighted_poisson(tree, RngStream(19, i))
        assert out.failed
        assert len(out.eliminations) == 4
        assert out.duration == 0.0


def test_poisson_failure_trace():
    tree = path(2).with_weights([0, 0])
    out = run_election(tree, PoissonWeighted(), RngStream(20), trace=True)
    assert out.trace[-1]["event"] == "failure"


def test_elections_terminate_under_poisson():
    tree = sample_trees(1, 8, 8, seed=21)[0].with_weights([0.1, 0, 2, 0.3, 0, 0.5, 0, 1])
    for i in range(2_000):
        out = run_weighted_poisson(tree, RngStream(22, i))
        assert len(out.eliminations) == (8 if out.failed else 7)


def test_reproducible():
    tree = sample_trees(1, 9, 9, seed=23)[0]
    a = run_election(tree, SecondCategoryStable(), RngStream(24, 3))
    b = run_election(tree, SecondCategoryStable(), RngStream(24, 3))
    assert a.eliminations == b.eliminations and a.winner == b.winner


class _NanScheme(Scheme):
    def on_leaf(self, node, received, rng):
        return math.nan, Message()


def test_nan_lifetime_is_an_error():
    with pytest.raises(SimulationError):
        run_election(path(3), _NanScheme(), RngStream(0))


def test_scheme_specs():
    assert isinstance(scheme_from_spec("uniform"), FirstCategory)
    assert isinstance(scheme_from_spec("degree").rule, Degree)
    assert scheme_from_spec("constant:2.5").rate == 2.5
    assert scheme_from_spec("poisson:0.5").scale == 0.5
    assert isinstance(scheme_from_spec("stable"), SecondCategoryStable)
    assert scheme_from_spec("custom:math:gcd").rule.name == "custom:math:gcd"
    for bad in ("nope", "constant:x", "constant:-1", "custom:math", "custom:nomod_xyz:f"):
        with pytest.raises((SchemeError, ParameterError)):
            scheme_from_spec(bad)


def test_weight_scheme_validates_before_running():
    with pytest.raises(SchemeError):
        run_election(path(3).with_weights([1, 1.5, 1]), FirstCategory(Weight()), RngStream(0))
