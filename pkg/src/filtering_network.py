"""
Triangulated maximally filtered graph and local-global sparse precision.

build_tmfg grows a planar maximal chordal graph from a similarity matrix;
logo_precision sums inverted clique blocks and subtracts inverted separator
blocks to get a precision matrix supported on the graph edges.

三角化最大過濾圖 (TMFG) 與局部-全局 (LoGo) 稀疏精度矩陣。
"""

import os
import sys
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import FrozenSet, List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, LinAlgError

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import DataError, NotPositiveDefiniteError, SingularCliqueError

# Exhaustive seed search is used up to this many candidate 4-cliques
MAX_SEED_CANDIDATES = 200_000
SINGULAR_TOLERANCE = 1e-12


@dataclass
class TmfgGraph:
    n: int
    edges: FrozenSet[Tuple[int, int]]
    cliques: List[Tuple[int, ...]] = field(default_factory=list)
    separators: List[Tuple[int, int, int]] = field(default_factory=list)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj


@dataclass
class SparsePrecision:
    matrix: np.ndarray
    support: FrozenSet[Tuple[int, int]]


def _edge(i: int, j: int) -> Tuple[int, int]:
    return (int(i), int(j)) if i < j else (int(j), int(i))


def _seed_clique(similarity: np.ndarray) -> Tuple[int, int, int, int]:
    n = similarity.shape[0]
    if math.comb(n, 4) <= MAX_SEED_CANDIDATES:
        candidates = np.array(list(combinations(range(n), 4)))
        weight = np.zeros(len(candidates))
        for a, b in combinations(range(4), 2):
            weight += similarity[candidates[:, a], candidates[:, b]]
        return tuple(int(v) for v in candidates[int(np.argmax(weight))])

    # too many candidates: the four vertices of largest total similarity
    off_diagonal = similarity - np.diag(np.diag(similarity))
    strength = off_diagonal.sum(axis=1)
    order = np.argsort(-strength, kind="stable")
    return tuple(sorted(int(v) for v in order[:4]))


def build_tmfg(similarity: np.ndarray) -> TmfgGraph:
    """
    Greedy TMFG construction.

    Starts from the maximum weight 4-clique and repeatedly inserts the
    remaining vertex with the largest summed similarity to a triangular face,
    splitting that face into three. Ties go to the lowest vertex index, then
    to the earliest face.

    Args:
        similarity: Symmetric n x n matrix with finite entries, n >= 3

    Returns:
        TmfgGraph: 3n - 6 edges, n - 3 cliques and n - 4 separators
    """
    s = np.asarray(similarity, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DataError(f"similarity must be a square matrix, got shape {s.shape}")
    n = s.shape[0]
    if n < 3:
        raise DataError(f"TMFG needs at least 3 vertices, got {n}")
    if not np.all(np.isfinite(s)):
        raise DataError("similarity matrix contains NaN or infinite entries")
    if not np.allclose(s, s.T, rtol=0.0, atol=1e-12):
        raise DataError("similarity matrix must be symmetric")

    if n == 3:
        return TmfgGraph(n=3, edges=frozenset({(0, 1), (0, 2), (1, 2)}), cliques=[(0, 1, 2)], separators=[])

    seed = _seed_clique(s)
    edges = {_edge(a, b) for a, b in combinations(seed, 2)}
    cliques: List[Tuple[int, ...]] = [seed]
    separators: List[Tuple[int, int, int]] = []
    faces: List[Tuple[int, int, int]] = [tuple(f) for f in combinations(seed, 3)]
    remaining = [v for v in range(n) if v not in seed]

    while remaining:
        face_array = np.array(faces)
        rows = np.array(remaining)
        gain = (s[np.ix_(rows, face_array[:, 0])]
                + s[np.ix_(rows, face_array[:, 1])]
                + s[np.ix_(rows, face_array[:, 2])])
        vertex_pos, face_pos = np.unravel_index(int(np.argmax(gain)), gain.shape)
        vertex = remaining.pop(int(vertex_pos))
        a, b, c = faces[int(face_pos)]

        edges.update({_edge(vertex, a), _edge(vertex, b), _edge(vertex, c)})
        cliques.append(tuple(sorted((vertex, a, b, c))))
        separators.append((a, b, c))
        faces[int(face_pos)] = tuple(sorted((a, b, vertex)))
        faces.append(tuple(sorted((a, c, vertex))))
        faces.append(tuple(sorted((b, c, vertex))))

    return TmfgGraph(n=n, edges=frozenset(edges), cliques=cliques, separators=separators)


def _is_singular(block: np.ndarray) -> bool:
    eigenvalues = np.linalg.eigvalsh(block)
    scale = max(abs(eigenvalues[-1]), np.finfo(float).tiny)
    return eigenvalues[0] <= SINGULAR_TOLERANCE * scale


def _invert_block(cov: np.ndarray, members: Tuple[int, ...], ridge_fallback: bool) -> np.ndarray:
    block = cov[np.ix_(members, members)]
    if _is_singular(block):
        if not ridge_fallback:
            raise SingularCliqueError(members)
        trace = float(np.trace(block))
        epsilon = config.RIDGE_SCALE * trace / len(members) if trace > 0 else config.RIDGE_SCALE
        block = block + epsilon * np.eye(len(members))
        if _is_singular(block):
            raise SingularCliqueError(members)
        warnings.warn(f"ridge {epsilon:.3g} added to singular covariance block {tuple(members)}")
    return np.linalg.inv(block)


def logo_precision(covariance: np.ndarray, graph: TmfgGraph, ridge_fallback: bool = True) -> SparsePrecision:
    """
    LoGo inversion: sum of embedded clique inverses minus embedded separator inverses.

    A singular block gets a ridge of RIDGE_SCALE * trace / size and is retried
    once when ridge_fallback is set.

    Raises:
        SingularCliqueError: A block is still singular
    """
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (graph.n, graph.n):
        raise DataError(f"covariance shape {cov.shape} does not match graph size {graph.n}")

    precision = np.zeros_like(cov)
    for clique in graph.cliques:
        precision[np.ix_(clique, clique)] += _invert_block(cov, clique, ridge_fallback)
    for separator in graph.separators:
        precision[np.ix_(separator, separator)] -= _invert_block(cov, separator, ridge_fallback)

    precision = 0.5 * (precision + precision.T)
    return SparsePrecision(matrix=precision, support=graph.edges)


def correlation_similarity(covariance: np.ndarray) -> np.ndarray:
    """Element-wise squared correlation; zero-variance rows get zero similarity."""
    cov = np.asarray(covariance, dtype=float)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / np.outer(sd, sd)
    corr[~np.isfinite(corr)] = 0.0
    return corr ** 2


def sparse_precision(covariance: np.ndarray, ridge_fallback: bool = True) -> SparsePrecision:
    """
    TMFG on squared correlations followed by LoGo. Fewer than three variables
    have no triangular faces and are inverted densely.
    """
    cov = np.asarray(covariance, dtype=float)
    n = cov.shape[0]
    if n < 3:
        members = tuple(range(n))
        support = frozenset(_edge(i, j) for i, j in combinations(members, 2))
        matrix = _invert_block(cov, members, ridge_fallback)
        return SparsePrecision(matrix=0.5 * (matrix + matrix.T), support=support)
    graph = build_tmfg(correlation_similarity(cov))
    return logo_precision(cov, graph, ridge_fallback=ridge_fallback)


def log_det(precision) -> float:
    """
    Natural log determinant through a Cholesky factorization.

    Raises:
        NotPositiveDefiniteError: The matrix is not positive definite
    """
    matrix = precision.matrix if isinstance(precision, SparsePrecision) else np.asarray(precision, dtype=float)
    try:
        factor, _ = cho_factor(matrix, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise NotPositiveDefiniteError(f"precision matrix is not positive definite: {e}") from e
    return float(2.0 * np.sum(np.log(np.diag(factor))))

