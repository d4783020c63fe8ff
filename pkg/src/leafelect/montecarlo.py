"""Monte Carlo estimation and the exact oracle for the memoryless baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist

import numpy as np

from .distributions import RngStream
from .errors import LeafElectError, ParameterError, SimulationError
from .exact import EMPIRICAL, EXACT_MEMORYLESS, ProbTable
from .simulate import Scheme, run_directed, run_directed_batch, run_election
from .trees import Tree

CONFIDENCE = 0.99
Z99 = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)

ORACLE_MAX_N = 9


def half_width(p: float, trials: int, z: float = Z99) -> float:
    """Normal-approximation confidence half-width for a binomial proportion."""
    return z * math.sqrt(max(p * (1.0 - p), 0.0) / trials) if trials else math.inf


@dataclass(frozen=True)
class MonteCarloResult:
    table: ProbTable
    counts: tuple[int, ...]
    trials: int
    failures: int
    mean_duration: float
    seed: int

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def successes(self) -> int:
        return self.trials - self.failures

    def conditional_table(self) -> ProbTable:
        """Winner frequencies among successful runs only."""
        s = self.successes
        if s == 0:
            raise SimulationError("no successful trial to condition on")
        q = tuple(c / s for c in self.counts)
        return ProbTable(q, EMPIRICAL, tuple(half_width(p, s) for p in q))

    def to_dict(self) -> dict:
        doc = self.table.to_dict()
        doc.update(
            trials=self.trials,
            seed=self.seed,
            failures=self.failures,
            failure_rate=self.failure_rate,
            mean_duration=self.mean_duration,
        )
        return doc


def _run_chunk(tree, scheme, seed, start, stop):
    counts = [0] * tree.n
    failures = 0
    durations = []
    for i in range(start, stop):
        try:
            out = run_election(tree, scheme, RngStream(seed, i))
        except LeafElectError as exc:
            raise SimulationError(f"trial {i}: {exc}", trial=i) from exc
        if out.winner is None:
            failures += 1
        else:
            counts[out.winner] += 1
        durations.append(out.duration)
    return counts, failures, durations


def monte_carlo(tree: Tree, scheme: Scheme, trials: int, seed: int = 0, workers: int = 1) -> MonteCarloResult:
    """Estimate election probabilities from ``trials`` independent elections.

    Trial ``i`` draws from ``RngStream(seed, i)``, so results do not depend on
    how trials are split across workers. Half-widths are 99% normal
    intervals; failed runs count toward the denominator.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    scheme.validate(tree)
    if workers <= 1:
        parts = [_run_chunk(tree, scheme, seed, 0, trials)]
    else:
        from concurrent.futures import ProcessPoolExecutor

        bounds = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(workers) as pool:
            futs = [pool.submit(_run_chunk, tree, scheme, seed, int(a), int(b))
                    for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            parts = [f.result() for f in futs]

    counts = [0] * tree.n
    failures = 0
    durations = []
    for c, f, d in parts:
        counts = [a + b for a, b in zip(counts, c)]
        failures += f
        durations.extend(d)
    q = tuple(c / trials for c in counts)
    table = ProbTable(q, EMPIRICAL, tuple(half_width(p, trials) for p in q))
    return MonteCarloResult(table, tuple(counts), trials, failures,
                            math.fsum(durations) / trials, seed)


def directed_durations(tree: Tree, root: int, scheme: Scheme, runs: int, seed: int = 0,
                       away_from: int | None = None) -> np.ndarray:
    """``runs`` independent directed-elimination durations, run ``i`` on stream ``(seed, i)``."""
    out = np.empty(runs)
    for i in range(runs):
        out[i] = run_directed(tree, root, scheme, RngStream(seed, i), away_from)
    return out


def edge_first_frequencies(tree: Tree, scheme: Scheme, trials: int, seed: int = 0) -> dict:
    """Empirical P(D*(T[u,\\v]) < D*(T[v,\\u])) for every directed edge.

    Each comparison pairs two independent directed eliminations; edge ``k``
    draws its two sides from streams ``2k`` and ``2k + 1``.
    """
    freq = {}
    for k, (a, b) in enumerate(tree.edges):
        da = run_directed_batch(tree, a, scheme, trials, RngStream(seed, 2 * k), b)
        db = run_directed_batch(tree, b, scheme, trials, RngStream(seed, 2 * k + 1), a)
        freq[(a, b)] = float(np.count_nonzero(da < db)) / trials
        freq[(b, a)] = float(np.count_nonzero(db < da)) / trials
    return freq


def election_edge_frequencies(tree: Tree, scheme: Scheme, trials: int, seed: int = 0) -> dict:
    """Empirical P(E_{u,v}): u is not elected and its last neighbour is v.

    For neighbours u, v that is the event that u dies before v.
    """
    hits = {}
    for a, b in tree.edges:
        hits[(a, b)] = 0
        hits[(b, a)] = 0
    for i in range(trials):
        out = run_election(tree, scheme, RngStream(seed, i))
        pos = out.death_order()
        for a, b in tree.edges:
            pa = pos.get(a, math.inf)
            pb = pos.get(b, math.inf)
            if pa < pb:
                hits[(a, b)] += 1
            elif pb < pa:
                hits[(b, a)] += 1
    return {e: c / trials for e, c in hits.items()}


# --- memoryless oracle ----------------------------------------------------------


def brute_force_memoryless(tree: Tree, exact: bool = False):
    """Exact election probabilities when every current leaf is equally likely to go next.

    Enumerates every leaf-elimination order and adds the product of
    1/(number of leaves) along it to the survivor. Only for n <= 9.
    With ``exact=True`` returns a tuple of Fractions instead of a ProbTable.
    """
    n = tree.n
    if n > ORACLE_MAX_N:
        raise ParameterError(f"enumeration limited to n <= {ORACLE_MAX_N}, got n={n}")
    q = [Fraction(0)] * n
    if n == 1:
        q[0] = Fraction(1)
    else:
        adj = tree.adj
        alive = [True] * n
        deg = [len(a) for a in adj]

        def walk(remaining, weight):
            if remaining == 1:
                q[alive.index(True)] += weight
                return
            leaves = [u for u in range(n) if alive[u] and deg[u] == 1]
            w = weight / len(leaves)
            for u in leaves:
                alive[u] = False
                for v in adj[u]:
                    if alive[v]:
                        deg[v] -= 1
                walk(remaining - 1, w)
                for v in adj[u]:
                    if alive[v]:
                        deg[v] += 1
                alive[u] = True

        walk(n, Fraction(1))
    if exact:
        return tuple(q)
    return ProbTable(tuple(float(x) for x in q), EXACT_MEMORYLESS)
