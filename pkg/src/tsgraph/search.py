"""Stochastic search over decomposable graphs.

:func:`fincs_run` interleaves three moves: local single-edge toggles drawn in
proportion to running edge-inclusion estimates, global proposals built by
sampling every edge independently and triangulating, and jumps back to
previously visited graphs drawn in proportion to their posterior mass.
:func:`mh_sampler` is the plain Metropolis-Hastings edge-flip chain.

Both depend on the data only through :class:`~tsgraph.likelihood.GraphScorer`,
whose clique cache makes rescoring after a local move cost only the new
cliques and separators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import InputError, NumericalError
from .graphs import (
    DecomposableGraph,
    GraphPriorConfig,
    can_add_edge,
    can_remove_edge,
    is_decomposable,
    num_pairs,
    pairs,
    triangulate,
)
from .likelihood import GraphScorer, HiwPrior, ScoredGraph, check_rank_guard, log_marginal_likelihood
from .spectral import SpectralStatistics

__all__ = [
    "MHSummary",
    "SearchConfig",
    "SearchResult",
    "SearchState",
    "TraceRecord",
    "fincs_restarts",
    "fincs_run",
    "global_move",
    "local_move",
    "make_rng",
    "mh_sampler",
    "resample_move",
]

RNG_ALGORITHM = "numpy.random.PCG64"
# "always" moves to every local/global proposal, as a pure search would; the
# best-visited graph is tracked either way.
ACCEPT_RULES = ("metropolis", "always")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 10_000
    global_move_period: int = 50
    resample_period: int = 100
    edge_prob_smoothing: float = 1.0
    seed: int = 0
    prior: GraphPriorConfig = field(default_factory=GraphPriorConfig)
    scoring: HiwPrior | None = None
    initial_edges: tuple[tuple[int, int], ...] = ()
    burn_in_fraction: float = 0.2
    accept_rule: str = "metropolis"
    debug: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise InputError("iterations must be nonnegative", module="search")
        if self.global_move_period < 1 or self.resample_period < 1:
            raise InputError("move periods must be >= 1", module="search")
        if not self.edge_prob_smoothing > 0:
            raise InputError("edge_prob_smoothing must be positive", module="search")
        if not 0 <= self.burn_in_fraction < 1:
            raise InputError("burn_in_fraction must lie in [0, 1)", module="search")
        if self.accept_rule not in ACCEPT_RULES:
            raise InputError(f"accept_rule must be one of {ACCEPT_RULES}, got {self.accept_rule!r}", module="search")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer", module="search")

    def header(self) -> dict:
        return {
            "rng": RNG_ALGORITHM,
            "seed": self.seed,
            "iterations": self.iterations,
            "global_move_period": self.global_move_period,
            "resample_period": self.resample_period,
            "edge_prob_smoothing": self.edge_prob_smoothing,
            "accept_rule": self.accept_rule,
            "graph_prior": {"a": self.prior.a, "b": self.prior.b},
            "scoring": self.scoring.describe() if self.scoring is not None else None,
            "initial_edges": [list(e) for e in self.initial_edges],
        }


class SearchState:
    """Current and best graphs, edge-inclusion accumulators and the visited ledger.

    Accumulators are kept as log sums of posterior mass. The ``edge_num`` and
    ``edge_den`` views rescale them by the running maximum log posterior, so
    each visit contributes ``exp(log_posterior - running_max)``.
    """

    def __init__(self, scorer: GraphScorer, initial: DecomposableGraph, smoothing: float, accept_rule: str = "metropolis"):
        self.scorer = scorer
        self.p = initial.num_nodes
        self.m = num_pairs(self.p)
        self.smoothing = smoothing
        self.accept_rule = accept_rule
        self.pairs = pairs(self.p)
        self.log_num = np.full(self.m, -np.inf)
        self.log_den = -np.inf
        self.running_max = -np.inf
        self.ledger: dict[str, ScoredGraph] = {}
        self.current = scorer.score(initial)
        self.best = self.current
        self._moves: dict[int, tuple[list[int], list[int]]] = {}
        self._neighbors: dict[int, dict[int, DecomposableGraph | None]] = {}

    def visit(self) -> None:
        """Record the current graph in the ledger and the accumulators."""
        sg = self.current
        lp = sg.log_posterior
        if not math.isfinite(lp):
            raise NumericalError(f"non-finite log posterior {lp} for {sg.graph}", module="search")
        self.ledger.setdefault(sg.graph.digest, sg)
        self.running_max = max(self.running_max, lp)
        self.log_den = np.logaddexp(self.log_den, lp)
        if sg.graph.num_edges:
            idx = self._edge_indices(sg.graph)
            self.log_num[idx] = np.logaddexp(self.log_num[idx], lp)
        if lp > self.best.log_posterior:
            self.best = sg

    def _edge_indices(self, graph: DecomposableGraph) -> list[int]:
        key = graph.key
        return [b for b in range(self.m) if key >> b & 1]

    @property
    def edge_num(self) -> np.ndarray:
        if not math.isfinite(self.running_max):
            return np.zeros(self.m)
        return np.exp(self.log_num - self.running_max)

    @property
    def edge_den(self) -> float:
        if not math.isfinite(self.running_max):
            return 0.0
        return float(np.exp(self.log_den - self.running_max))

    def edge_probs(self) -> np.ndarray:
        """Smoothed inclusion estimates ``(num + eps/m) / (den + eps)`` in pair order."""
        eps = self.smoothing
        return (self.edge_num + eps / self.m) / (self.edge_den + eps)

    def edge_prob_matrix(self) -> np.ndarray:
        q = self.edge_probs()
        out = np.zeros((self.p, self.p))
        for b, (i, j) in enumerate(self.pairs):
            out[i, j] = out[j, i] = q[b]
        return out

    def legal_moves(self, graph: DecomposableGraph) -> tuple[list[int], list[int]]:
        """Pair indices whose toggle keeps ``graph`` decomposable: (additions, deletions)."""
        key = graph.key
        hit = self._moves.get(key)
        if hit is None:
            adds, dels = [], []
            for b, (i, j) in enumerate(self.pairs):
                if key >> b & 1:
                    if can_remove_edge(graph, i, j):
                        dels.append(b)
                elif can_add_edge(graph, i, j):
                    adds.append(b)
            hit = (adds, dels)
            self._moves[key] = hit
        return hit

    def toggled(self, graph: DecomposableGraph, b: int) -> DecomposableGraph:
        nb = self._neighbors.setdefault(graph.key, {})
        g = nb.get(b)
        if g is None:
            e = self.pairs[b]
            edges = graph.edges - {e} if graph.key >> b & 1 else graph.edges | {e}
            g = DecomposableGraph(self.p, edges, _checked=True)
            nb[b] = g
        return g


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    move: str
    accepted: bool
    log_posterior: float

    def to_json(self) -> dict:
        return {"iter": self.iter, "move": self.move, "accepted": self.accepted, "log_posterior": self.log_posterior}


@dataclass
class SearchResult:
    map_graph: ScoredGraph
    edge_probabilities: np.ndarray
    trace: list[TraceRecord]
    header: dict = field(default_factory=dict)
    num_visited: int = 0

    def to_json(self) -> dict:
        return {
            "map_graph": self.map_graph.to_json(),
            "edge_probabilities": self.edge_probabilities.tolist(),
            "num_visited": self.num_visited,
            "header": self.header,
        }

    def trace_ndjson(self) -> str:
        lines = [json.dumps({"header": self.header})]
        lines += [json.dumps(r.to_json()) for r in self.trace]
        return "\n".join(lines) + "\n"

    def edge_probabilities_csv(self) -> str:
        return "\n".join(",".join(repr(float(v)) for v in row) for row in self.edge_probabilities) + "\n"


def _metropolis(state: SearchState, proposal: ScoredGraph, rng: np.random.Generator) -> bool:
    delta = proposal.log_posterior - state.current.log_posterior
    u = rng.random()
    if state.accept_rule == "always" or delta >= 0 or u < math.exp(delta):
        state.current = proposal
        return True
    return False


def _draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(weights) - 1))


def local_move(state: SearchState, rng: np.random.Generator) -> bool | None:
    """One single-edge toggle; returns the acceptance flag, or ``None`` for a no-op.

    Additions are drawn with weight ``q_ij``, deletions with ``1 / q_ij``.
    """
    graph = state.current.graph
    adds, dels = state.legal_moves(graph)
    add_first = rng.random() < 0.5
    order = (adds, dels) if add_first else (dels, adds)
    q = state.edge_probs()
    for cand in order:
        if not cand:
            continue
        w = q[cand] if cand is adds else 1.0 / q[cand]
        b = cand[_draw(w, rng)]
        return _metropolis(state, state.scorer.score(state.toggled(graph, b)), rng)
    return None


def global_move(state: SearchState, rng: np.random.Generator) -> bool:
    """Independent edge draws with probabilities ``q_ij``, triangulated, then Metropolis."""
    q = state.edge_probs()
    draws = rng.random(state.m) < q
    edges = [state.pairs[b] for b in np.flatnonzero(draws)]
    proposal = state.scorer.score(triangulate(state.p, edges))
    return _metropolis(state, proposal, rng)


def resample_move(state: SearchState, rng: np.random.Generator) -> bool:
    """Jump to a ledger entry drawn with probability proportional to its posterior."""
    if not state.ledger:
        return False
    entries = list(state.ledger.values())
    lp = np.array([e.log_posterior for e in entries])
    w = np.exp(lp - lp.max())
    state.current = entries[_draw(w, rng)]
    return True


def _make_scorer(stats: SpectralStatistics, config: SearchConfig) -> GraphScorer:
    scoring = config.scoring
    if scoring is None:
        raise InputError("search config has no scoring prior", module="search")
    if scoring.mode == "fractional":
        check_rank_guard(stats, stats.p)
    return GraphScorer(stats, scoring, config.prior)


def fincs_run(stats: SpectralStatistics, config: SearchConfig, scorer: GraphScorer | None = None) -> SearchResult:
    """Run the feature-inclusion stochastic search; deterministic in ``config.seed``.

    Step ``t`` (1-based) is a resampling move when ``t`` is a multiple of
    ``resample_period``, else a global move when a multiple of
    ``global_move_period``, else a local move.
    """
    scorer = scorer or _make_scorer(stats, config)
    rng = make_rng(config.seed)
    initial = DecomposableGraph(stats.p, config.initial_edges)
    state = SearchState(scorer, initial, config.edge_prob_smoothing, config.accept_rule)
    state.visit()
    trace: list[TraceRecord] = []
    for t in range(1, config.iterations + 1):
        if t % config.resample_period == 0:
            move, accepted = "resample", resample_move(state, rng)
        elif t % config.global_move_period == 0:
            move, accepted = "global", global_move(state, rng)
        else:
            res = local_move(state, rng)
            move, accepted = ("local", res) if res is not None else ("noop", False)
        state.visit()
        trace.append(TraceRecord(t, move, bool(accepted), state.current.log_posterior))
        if config.debug and t % 1000 == 0:
            _spot_check(state, stats, config)
    return SearchResult(
        map_graph=state.best,
        edge_probabilities=state.edge_prob_matrix(),
        trace=trace,
        header=config.header(),
        num_visited=len(state.ledger),
    )


def _spot_check(state: SearchState, stats: SpectralStatistics, config: SearchConfig) -> None:
    g = state.current.graph
    full = log_marginal_likelihood(stats, g, config.scoring)
    if abs(full - state.current.log_marginal) > 1e-9 * max(1.0, abs(full)):
        raise NumericalError(f"cached score {state.current.log_marginal} != full rescoring {full} for {g}", module="search")


def fincs_restarts(stats: SpectralStatistics, config: SearchConfig, restarts: int = 1) -> SearchResult:
    """Independent runs with seeds spawned from ``config.seed``; the best MAP wins.

    Edge probabilities are averaged over runs. Runs share one clique cache.
    """
    if restarts < 1:
        raise InputError("restarts must be >= 1", module="search")
    if restarts == 1:
        return fincs_run(stats, config)
    scorer = _make_scorer(stats, config)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(config.seed).spawn(restarts)]
    results = []
    for s in seeds:
        cfg = replace(config, seed=s)
        results.append(fincs_run(stats, cfg, scorer))
    best = max(results, key=lambda r: r.map_graph.log_posterior)
    header = {**config.header(), "restarts": restarts, "restart_seeds": seeds}
    return SearchResult(
        map_graph=best.map_graph,
        edge_probabilities=np.mean([r.edge_probabilities for r in results], axis=0),
        trace=best.trace,
        header=header,
        num_visited=sum(r.num_visited for r in results),
    )


@dataclass
class MHSummary:
    edge_frequencies: np.ndarray
    visited_scores: dict[str, float]
    num_samples: int
    acceptance_rate: float
    graph_counts: dict[str, int] = field(default_factory=dict)


def mh_sampler(stats: SpectralStatistics, config: SearchConfig, scorer: GraphScorer | None = None) -> MHSummary:
    """Metropolis-Hastings over decomposable graphs with uniform pair proposals.

    A proposed toggle that breaks decomposability is rejected outright; the
    proposal is then symmetric between neighbouring decomposable graphs and
    no Hastings correction is needed.
    """
    scorer = scorer or _make_scorer(stats, config)
    p, m = stats.p, num_pairs(stats.p)
    if config.iterations == 0 or m == 0:
        return MHSummary(np.zeros((p, p)), {}, 0, 0.0)
    rng = make_rng(config.seed)
    state = SearchState(scorer, DecomposableGraph(p, config.initial_edges), config.edge_prob_smoothing)
    burn = int(config.burn_in_fraction * config.iterations)
    proposals = rng.integers(0, m, size=config.iterations)
    uniforms = rng.random(config.iterations)
    counts: dict[int, int] = {}
    graphs: dict[int, ScoredGraph] = {}
    legal: dict[int, set[int]] = {}
    cur = state.current
    accepted = 0
    for t in range(config.iterations):
        g = cur.graph
        key = g.key
        ok = legal.get(key)
        if ok is None:
            adds, dels = state.legal_moves(g)
            ok = legal[key] = set(adds) | set(dels)
        b = int(proposals[t])
        if b in ok:
            prop = scorer.score(state.toggled(g, b))
            delta = prop.log_posterior - cur.log_posterior
            if delta >= 0 or uniforms[t] < math.exp(delta):
                cur = prop
                accepted += 1
        if t >= burn:
            k = cur.graph.key
            counts[k] = counts.get(k, 0) + 1
            graphs[k] = cur
    n = sum(counts.values())
    freq = np.zeros(m)
    for k, c in counts.items():
        for b in range(m):
            if k >> b & 1:
                freq[b] += c
    freq /= max(n, 1)
    mat = np.zeros((p, p))
    for b, (i, j) in enumerate(pairs(p)):
        mat[i, j] = mat[j, i] = freq[b]
    return MHSummary(
        edge_frequencies=mat,
        visited_scores={graphs[k].graph.digest: graphs[k].log_posterior for k in graphs},
        num_samples=n,
        acceptance_rate=accepted / config.iterations,
        graph_counts={graphs[k].graph.digest: c for k, c in counts.items()},
    )


def enumerate_decomposable(num_nodes: int) -> Iterable[DecomposableGraph]:
    """Every decomposable graph on ``num_nodes`` nodes, by brute force over edge subsets."""
    all_pairs = pairs(num_nodes)
    for mask in range(1 << len(all_pairs)):
        edges = [all_pairs[b] for b in range(len(all_pairs)) if mask >> b & 1]
        if is_decomposable(num_nodes, edges):
            yield DecomposableGraph(num_nodes, edges, _checked=True)
