"""Closed-form graph scores under the Whittle likelihood.

With a hyper complex inverse Wishart prior on each spectral matrix, the
marginal likelihood of a decomposable graph is a product over frequency
entries of ratios of normalizing constants ``h(W, delta, G)``, and ``h``
itself factorizes over cliques and separators. Everything here works in the
log domain.

Conventions: ``B(W, delta) = |W|^(delta+q) / (pi^(q(q-1)/2) prod_j Gamma(delta+q-j+1))``
for a ``q x q`` scale matrix. Factorials are written as Gamma functions so
that non-integer degrees of freedom (fractional priors) are allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .errors import InputError, RankDeficiencyError, SingularMatrixError
from .graphs import DecomposableGraph, GraphPriorConfig, log_graph_prior
from .spectral import SpectralStatistics

__all__ = [
    "GraphScorer",
    "HiwPrior",
    "ScoredGraph",
    "clique_log_marginal",
    "hermitian_chol_logdet",
    "log_complex_iw_normalizer",
    "log_fractional_marginal",
    "log_h",
    "log_marginal_likelihood",
    "predictive_log_likelihood",
]

LOG_PI = math.log(math.pi)
DEFAULT_JITTER = 1e-8


def hermitian_chol_logdet(W: np.ndarray, jitter: float = DEFAULT_JITTER, context: str = "") -> float:
    """``log|W|`` for Hermitian positive definite ``W`` via complex Cholesky.

    On factorization failure a ridge ``jitter * trace(W)/q * I`` is added and
    the factorization retried once.
    """
    W = np.asarray(W, dtype=complex)
    q = W.shape[0]
    if q == 0:
        return 0.0
    scale = max(np.abs(W).max(), 1e-300)
    if np.abs(W - W.conj().T).max() > 1e-8 * scale:
        raise InputError(f"matrix is not Hermitian{_ctx(context)}", module="likelihood")
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        ridge = jitter * np.trace(W).real / q
        try:
            if not ridge > 0:
                raise np.linalg.LinAlgError
            L = np.linalg.cholesky(W + ridge * np.eye(q))
        except np.linalg.LinAlgError:
            raise SingularMatrixError(f"matrix is not positive definite{_ctx(context)}", module="likelihood") from None
    return float(2.0 * np.sum(np.log(np.diagonal(L).real)))


def _ctx(context: str) -> str:
    return f" ({context})" if context else ""


def _batch_logdet(W: np.ndarray, jitter: float, context: str = "") -> np.ndarray:
    """``log|W_k|`` for a stack ``(K, q, q)``."""
    K, q = W.shape[0], W.shape[1]
    if q == 0:
        return np.zeros(K)
    if q == 1:
        d = W[:, 0, 0].real
        if np.all(d > 0):
            return np.log(d)
    else:
        try:
            L = np.linalg.cholesky(W)
            return 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2).real).sum(axis=1)
        except np.linalg.LinAlgError:
            pass
    out = np.empty(K)
    for k in range(K):
        out[k] = hermitian_chol_logdet(W[k], jitter, context=f"{context}, entry {k}" if context else f"entry {k}")
    return out


def _log_gamma_sum(delta: np.ndarray, q: int) -> np.ndarray:
    # sum_{j=1}^{q} log Gamma(delta + q - j + 1) = sum_{i=1}^{q} log Gamma(delta + i)
    delta = np.asarray(delta, dtype=float)
    return sum((gammaln(delta + i) for i in range(1, q + 1)), np.zeros_like(delta))


def _log_B(logdet: np.ndarray, delta: np.ndarray, q: int) -> np.ndarray:
    return (delta + q) * logdet - 0.5 * q * (q - 1) * LOG_PI - _log_gamma_sum(delta, q)


def log_complex_iw_normalizer(W: np.ndarray, delta: float, jitter: float = DEFAULT_JITTER) -> float:
    """``log B(W, delta)`` of the complex inverse Wishart."""
    if not delta > 0:
        raise InputError(f"degrees of freedom must be positive, got {delta}", module="likelihood")
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    q = W.shape[0]
    ld = hermitian_chol_logdet(W, jitter)
    return float(_log_B(np.array(ld), np.array(float(delta)), q))


def log_h(W: np.ndarray, delta: float, graph: DecomposableGraph, jitter: float = DEFAULT_JITTER) -> float:
    """Log normalizer of the hyper law: cliques minus separators (with multiplicity)."""
    W = np.asarray(W, dtype=complex)
    dec = graph.decomposition
    total = 0.0
    for sign, blocks in ((1.0, dec.cliques), (-1.0, dec.separators)):
        for block in blocks:
            idx = sorted(block)
            try:
                total += sign * log_complex_iw_normalizer(W[np.ix_(idx, idx)], delta, jitter)
            except SingularMatrixError as exc:
                raise SingularMatrixError(f"{exc} in block {idx}", module="likelihood") from None
    return total


@dataclass(frozen=True)
class HiwPrior:
    """Prior on the per-entry spectral matrices.

    ``mode="fractional"`` uses ``g * stat`` and ``g * dof`` as the prior
    scale and degrees of freedom. ``mode="explicit"`` takes a scale matrix
    ``W`` (``(K, p, p)``) and degrees of freedom ``delta`` (``(K,)``) aligned
    with the statistics' entries.
    """

    mode: str = "fractional"
    g: float | None = None
    W: np.ndarray | None = None
    delta: np.ndarray | None = None
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        if self.jitter < 0:
            raise InputError("jitter must be nonnegative", module="likelihood")
        if self.mode == "fractional":
            if self.g is None or not (0.0 < self.g < 1.0):
                raise InputError(f"fractional prior needs 0 < g < 1, got {self.g}", module="likelihood")
        elif self.mode == "explicit":
            if self.W is None or self.delta is None:
                raise InputError("explicit prior needs W and delta", module="likelihood")
            W = np.asarray(self.W, dtype=complex)
            delta = np.asarray(self.delta, dtype=float).reshape(-1)
            if W.ndim != 3 or W.shape[0] != delta.shape[0]:
                raise InputError("explicit prior W must be (K, p, p) aligned with delta (K,)", module="likelihood")
            if np.any(delta <= 0):
                raise InputError("explicit prior degrees of freedom must be positive", module="likelihood")
            object.__setattr__(self, "W", W)
            object.__setattr__(self, "delta", delta)
        else:
            raise InputError(f"unknown prior mode {self.mode!r}", module="likelihood")

    @classmethod
    def fractional(cls, g: float, jitter: float = DEFAULT_JITTER) -> HiwPrior:
        return cls(mode="fractional", g=g, jitter=jitter)

    @classmethod
    def explicit(cls, W, delta, jitter: float = DEFAULT_JITTER) -> HiwPrior:
        return cls(mode="explicit", W=W, delta=delta, jitter=jitter)

    def describe(self) -> dict:
        if self.mode == "fractional":
            return {"mode": "fractional", "g": self.g, "jitter": self.jitter}
        return {"mode": "explicit", "entries": int(self.delta.shape[0]), "jitter": self.jitter}


def _check_dims(stats: SpectralStatistics, p: int, prior: HiwPrior) -> None:
    if stats.p != p:
        raise InputError(f"statistics have p={stats.p} but graph has p={p}", module="likelihood")
    if prior.mode == "explicit":
        if prior.W.shape[0] != stats.num_entries or prior.W.shape[1] != stats.p:
            raise InputError("explicit prior is not aligned with the statistics", module="likelihood")


def check_rank_guard(stats: SpectralStatistics, max_clique: int) -> None:
    """Fractional scores diverge when an entry has fewer terms than the clique size."""
    if stats.num_entries == 0:
        return
    low = float(stats.dof.min())
    if low < max_clique:
        k = int(np.argmin(stats.dof))
        raise RankDeficiencyError(
            f"entry {k} (Fourier indices {stats.freq_ranges[k]}) has only {low:g} degrees of freedom, "
            f"fewer than the clique size {max_clique}; increase smoothing (daniell/bartlett/piecewise) "
            "or the number of replicates",
            module="likelihood",
        )


def clique_log_marginal(clique: Iterable[int], stats: SpectralStatistics, prior: HiwPrior) -> float:
    """Additive contribution of one clique (or separator):
    ``sum_k weight_k * [log B(W_kC, delta_k) - log B(W*_kC, delta*_k)]``."""
    idx = sorted(clique)
    q = len(idx)
    if q == 0 or stats.num_entries == 0:
        return 0.0
    sub = stats.stats[:, idx][:, :, idx]
    ctx = f"clique {idx}"
    if prior.mode == "fractional":
        check_rank_guard(stats, q)
        ld_post = _batch_logdet(sub, prior.jitter, ctx)
        ld_prior = ld_post + q * math.log(prior.g)
        d_prior, d_post = prior.g * stats.dof, stats.dof
    else:
        W = prior.W[:, idx][:, :, idx]
        ld_prior = _batch_logdet(W, prior.jitter, ctx)
        ld_post = _batch_logdet(W + sub, prior.jitter, ctx)
        d_prior, d_post = prior.delta, prior.delta + stats.dof
    terms = _log_B(ld_prior, d_prior, q) - _log_B(ld_post, d_post, q)
    return float(np.dot(stats.weights, terms))


def _pi_constant(stats: SpectralStatistics) -> float:
    return -stats.total_dof * stats.p * LOG_PI


def _assemble(graph: DecomposableGraph, clique_score) -> float:
    dec = graph.decomposition
    total = 0.0
    for c in dec.cliques:
        total += clique_score(c)
    for s in dec.separators:
        total -= clique_score(s)
    return total


def log_marginal_likelihood(stats: SpectralStatistics, graph: DecomposableGraph, prior: HiwPrior) -> float:
    """``log p(X | G)`` including the ``-(sum dof) p log pi`` constant."""
    _check_dims(stats, graph.num_nodes, prior)
    if prior.mode == "fractional":
        check_rank_guard(stats, max((len(c) for c in graph.decomposition.cliques), default=0))
    return _pi_constant(stats) + _assemble(graph, lambda c: clique_log_marginal(c, stats, prior))


def log_fractional_marginal(stats: SpectralStatistics, graph: DecomposableGraph, g: float, jitter: float = DEFAULT_JITTER) -> float:
    return log_marginal_likelihood(stats, graph, HiwPrior.fractional(g, jitter))


def _check_aligned(train: SpectralStatistics, test: SpectralStatistics) -> None:
    if (
        train.p != test.p
        or train.T != test.T
        or train.freq_ranges != test.freq_ranges
        or not np.array_equal(train.weights, test.weights)
    ):
        raise InputError(
            f"train/test statistics are not aligned (T={train.T} vs {test.T}, "
            f"{train.num_entries} vs {test.num_entries} entries)",
            module="likelihood",
        )


def predictive_log_likelihood(
    train_stats_as_prior: SpectralStatistics,
    test_stats: SpectralStatistics,
    graph: DecomposableGraph,
    jitter: float = DEFAULT_JITTER,
) -> float:
    """Score held-out statistics with the training statistics as an explicit prior."""
    _check_aligned(train_stats_as_prior, test_stats)
    prior = HiwPrior.explicit(train_stats_as_prior.stats, train_stats_as_prior.dof, jitter)
    return log_marginal_likelihood(test_stats, graph, prior)


@dataclass(frozen=True)
class ScoredGraph:
    graph: DecomposableGraph
    log_marginal: float
    log_prior: float
    log_posterior: float

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "log_marginal": self.log_marginal,
            "log_prior": self.log_prior,
            "log_posterior": self.log_posterior,
        }

    @classmethod
    def from_json(cls, obj: dict) -> ScoredGraph:
        return cls(
            DecomposableGraph.from_json(obj["graph"]),
            float(obj["log_marginal"]),
            float(obj["log_prior"]),
            float(obj["log_posterior"]),
        )


@dataclass
class GraphScorer:
    """Scores graphs against fixed statistics, caching clique and graph terms.

    Repeated cliques and separators are looked up rather than recomputed, so
    a local move only pays for the blocks it creates.
    """

    stats: SpectralStatistics
    prior: HiwPrior
    graph_prior: GraphPriorConfig = field(default_factory=GraphPriorConfig)
    _cliques: dict = field(default_factory=dict, init=False, repr=False)
    _graphs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        _check_dims(self.stats, self.stats.p, self.prior)
        self._const = _pi_constant(self.stats)

    @property
    def num_nodes(self) -> int:
        return self.stats.p

    def clique(self, block: frozenset[int]) -> float:
        val = self._cliques.get(block)
        if val is None:
            val = clique_log_marginal(block, self.stats, self.prior)
            self._cliques[block] = val
        return val

    def log_marginal(self, graph: DecomposableGraph) -> float:
        if graph.num_nodes != self.stats.p:
            raise InputError(f"graph has p={graph.num_nodes}, statistics p={self.stats.p}", module="likelihood")
        return self._const + _assemble(graph, self.clique)

    def score(self, graph: DecomposableGraph) -> ScoredGraph:
        key = graph.key
        hit = self._graphs.get(key)
        if hit is not None:
            return hit
        lm = self.log_marginal(graph)
        lp = log_graph_prior(graph, self.graph_prior)
        sg = ScoredGraph(graph, lm, lp, lm + lp)
        self._graphs[key] = sg
        return sg
