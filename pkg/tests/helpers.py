"""Shared generators and brute-force oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from tsgraph.graphs import DecomposableGraph, pairs, triangulate
from tsgraph.spectral import SpectralStatistics

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def brute_force_chordal(p, edges):
    """Decomposable iff some vertex ordering is a perfect elimination ordering."""
    adj = {i: set() for i in range(p)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    for order in itertools.permutations(range(p)):
        pos = {v: k for k, v in enumerate(order)}
        ok = True
        for v in order:
            later = [u for u in adj[v] if pos[u] > pos[v]]
            if any(b not in adj[a] for a, b in itertools.combinations(later, 2)):
                ok = False
                break
        if ok:
            return True
    return False


def connected_components(p, edges):
    parent = list(range(p))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(p)})


def random_edges(rng, p, density):
    return [e for e in pairs(p) if rng.random() < density]


def random_decomposable(rng, p, density=0.3):
    return triangulate(p, random_edges(rng, p, density))


def random_covariance(rng, p, scale=1.0):
    L = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return scale * (L @ L.conj().T / p + np.eye(p))


def random_stats(rng, p, K, dof, T=None):
    """Sums of ``dof`` complex-normal outer products per entry (complex Wishart draws)."""
    S = np.empty((K, p, p), dtype=complex)
    for k in range(K):
        C = np.linalg.cholesky(random_covariance(rng, p))
        z = (rng.standard_normal((dof, p)) + 1j * rng.standard_normal((dof, p))) / np.sqrt(2) @ C.T
        S[k] = z.T @ z.conj()
    T = T or K + 1
    return SpectralStatistics(S, np.full(K, float(dof)), [(k, k) for k in range(1, K + 1)], T=T, N=dof)


def shared_cov_stats(rng, p, K, dof):
    """Like :func:`random_stats` but one covariance shared by all entries."""
    C = np.linalg.cholesky(random_covariance(rng, p))
    S = np.empty((K, p, p), dtype=complex)
    for k in range(K):
        z = (rng.standard_normal((dof, p)) + 1j * rng.standard_normal((dof, p))) / np.sqrt(2) @ C.T
        S[k] = z.T @ z.conj()
    return SpectralStatistics(S, np.full(K, float(dof)), [(k, k) for k in range(1, K + 1)], T=K + 1, N=dof)


def all_decomposable(p):
    out = []
    all_pairs = pairs(p)
    for mask in range(1 << len(all_pairs)):
        edges = [all_pairs[b] for b in range(len(all_pairs)) if mask >> b & 1]
        if brute_force_chordal(p, edges):
            out.append(DecomposableGraph(p, edges))
    return out
