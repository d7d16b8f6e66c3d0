"""Injective homomorphism counts of bistar glyphs in an observed graph.

Everything is derived from four N x N matrices: the adjacency ``A``, the
two-hop matrix ``Lam = A @ A - D`` (common neighbours, zero diagonal) and
the left/right degree matrices ``L[i, j] = deg(i) - A[i, j]`` and
``R = L.T`` (degree of one root once the other root is excluded).  The
count matrix ``M[l, c, r]`` has entry ``(i, j)`` equal to the number of
injective maps of the birooted glyph sending the left root to ``i`` and
the right root to ``j``::

    M[0, 0, 0]   = 1 - I
    M[0, c+1, 0] = M[0, c, 0] o (Lam - c)
    M[l+1, c, 0] = M[l, c, 0] o (L - (l + c))
    M[l, c, r+1] = M[l, c, r] o (R - (r + c)) - l * M[l-1, c+1, r]

The subtracted term removes maps where the new right pendant lands on one
of the ``l`` left pendants (which turns that pendant into a two-hop path).
A bridge edge multiplies by ``A``.  Because the recursion is entrywise, any
subset of rows can be evaluated on its own, which keeps memory bounded for
large graphs.
"""

from __future__ import annotations

import itertools
import logging
import math
from functools import lru_cache

import numpy as np

from .errors import BudgetError, ValidationError
from .glyphs import BistarGlyph
from .graph import UndirectedGraph

log = logging.getLogger(__name__)

# Entries per row block in streamed evaluation (all live states together).
_BLOCK_ELEMENTS = 1 << 22
_INT_LIMIT = 2**62


def falling_factorial(n, k):
    out = 1
    for t in range(k):
        out *= n - t
    return out


def two_hop_decompose(graph: UndirectedGraph):
    """Split ``A @ A`` into the degree matrix ``D`` and the traceless two-hop part."""
    return np.diag(graph.degrees()), _two_hop(graph)


def _two_hop(graph):
    # integer sums below 2**24 are exact in float32, and BLAS is much faster than int matmul
    dtype = np.float32 if graph.n < (1 << 24) else np.float64
    a = graph.adjacency.astype(dtype)
    lam = np.rint(a @ a).astype(np.int64)
    np.fill_diagonal(lam, 0)
    return lam


def _glyph_key(glyph):
    if isinstance(glyph, BistarGlyph):
        return glyph.key
    l, c, r, *rest = glyph
    return (int(l), int(c), int(r), bool(rest[0]) if rest else False)


def _needed_states(keys):
    """All (l, c, r) states the recursion visits on the way to ``keys``."""
    needed = set()
    stack = [k[:3] for k in keys]
    while stack:
        l, c, r = stack.pop()
        if (l, c, r) in needed:
            continue
        needed.add((l, c, r))
        if r > 0:
            stack.append((l, c, r - 1))
            if l > 0:
                stack.append((l - 1, c + 1, r - 1))
        elif l > 0:
            stack.append((l - 1, c, 0))
        elif c > 0:
            stack.append((0, c - 1, 0))
    return needed


def _evaluate_rows(states, a, lam, left, right, offdiag, dtype):
    """Run the recursion on one row block; returns ``{(l, c, r): block}``.

    ``states`` must be closed under the recursion (see ``_needed_states``).
    Lexicographic order puts every dependency first.
    """
    memo = {}
    for l, c, r in sorted(states):
        if r > 0:
            out = memo[l, c, r - 1] * (right - (r - 1 + c))
            if l > 0:
                out -= l * memo[l - 1, c + 1, r - 1]
        elif l > 0:
            out = memo[l - 1, c, 0] * (left - (l - 1 + c))
        elif c > 0:
            out = memo[0, c - 1, 0] * (lam - (c - 1))
        else:
            out = offdiag.astype(dtype)
        memo[l, c, r] = out
    return memo


def _exact_sum(block):
    """Exact Python-int sum of a non-negative int64 array without overflow."""
    if block.dtype.kind == "f":
        return float(block.sum())
    lo = block & 0xFFFFFFFF
    hi = block >> 32
    # each half is < 2**32, so an int64 sum is safe below 2**31 entries
    return int(hi.sum(dtype=np.int64)) * (1 << 32) + int(lo.sum(dtype=np.int64))


class CountTable:
    """Rooted injective count matrices for all glyphs up to ``(max_l, max_c, max_r)``.

    Full matrices are produced on demand by :meth:`matrix` and cached; totals
    from :meth:`count` / :meth:`counts` are streamed over row blocks and never
    hold more than a bounded number of entries.  Counts are exact integers
    unless the entry bound ``max_degree ** (l + c + r)`` could overflow int64,
    in which case evaluation switches to float64 and logs a warning.
    """

    def __init__(self, graph: UndirectedGraph, max_l, max_c, max_r):
        n = graph.n
        need = 2 + max_l + max_c + max_r
        if min(max_l, max_c, max_r) < 0:
            raise ValidationError("max_l, max_c and max_r must be non-negative")
        if need > n:
            raise BudgetError(
                f"glyphs up to (l={max_l}, c={max_c}, r={max_r}) need {need} nodes, "
                f"graph has {n}")
        self.graph = graph
        self.graph_n = n
        self.max_l, self.max_c, self.max_r = max_l, max_c, max_r
        self.adjacency = graph.adjacency
        self.lam = _two_hop(graph)
        self.degrees = graph.degrees()
        max_deg = int(self.degrees.max()) if n else 0
        # the recursion reaches c up to max_c + max_r, but l + c + r never grows
        self.exact = max(max_deg, 1) ** (max_l + max_c + max_r) < _INT_LIMIT
        self.dtype = np.int64 if self.exact else np.float64
        if not self.exact:
            log.warning("count entries may overflow int64 (max degree %d, order %d); "
                        "using float64", max_deg, max_l + max_c + max_r)
        self._matrices = {}
        self._totals = {}

    def _check(self, key):
        l, c, r, _ = key
        if l > self.max_l or c > self.max_c or r > self.max_r:
            raise KeyError(f"glyph (l={l}, c={c}, r={r}, e={int(key[3])}) is outside this "
                           f"table (max l={self.max_l}, c={self.max_c}, r={self.max_r})")

    def _blocks(self, rows):
        n = self.graph_n
        a = self.adjacency
        deg = self.degrees
        for start in range(0, n, rows):
            stop = min(start + rows, n)
            idx = np.arange(start, stop)
            a_s = a[start:stop].astype(self.dtype)
            offdiag = np.ones((stop - start, n), dtype=bool)
            offdiag[idx - start, idx] = False
            left = deg[start:stop, None].astype(self.dtype) - a_s
            right = deg[None, :].astype(self.dtype) - a_s
            lam = self.lam[start:stop].astype(self.dtype)
            yield slice(start, stop), a_s, lam, left, right, offdiag

    def matrix(self, glyph):
        """N x N matrix of rooted counts for ``glyph`` (rooting is ignored)."""
        key = _glyph_key(glyph)
        self._check(key)
        if key in self._matrices:
            return self._matrices[key]
        base = key[:3] + (False,)
        if base not in self._matrices:
            states = _needed_states([base])
            (_, a_s, lam, left, right, off), = self._blocks(self.graph_n)
            memo = _evaluate_rows(states, a_s, lam, left, right, off, self.dtype)
            for s, m in memo.items():
                if s[0] <= self.max_l and s[1] <= self.max_c and s[2] <= self.max_r:
                    m.setflags(write=False)
                    self._matrices.setdefault(s + (False,), m)
        if key[3]:
            marked = self._matrices[base] * self.adjacency
            marked.setflags(write=False)
            self._matrices[key] = marked
        return self._matrices[key]

    def counts(self, glyphs):
        """Totals for many glyphs in one streamed pass over row blocks."""
        keys = [_glyph_key(g) for g in glyphs]
        for k in keys:
            self._check(k)
        todo = sorted({k for k in keys if k not in self._totals})
        if todo:
            states = _needed_states(todo)
            rows = max(1, _BLOCK_ELEMENTS // (self.graph_n * (len(states) + 4)))
            acc = dict.fromkeys(todo, 0)
            for _, a_s, lam, left, right, off in self._blocks(rows):
                memo = _evaluate_rows(states, a_s, lam, left, right, off, self.dtype)
                for k in todo:
                    m = memo[k[:3]]
                    if k[3]:
                        m = m * a_s
                    acc[k] += _exact_sum(m)
            self._totals.update(acc)
        return {k: self._totals[k] for k in keys}

    def count(self, glyph):
        key = _glyph_key(glyph)
        return self.counts([key])[key]

    def density(self, glyph):
        key = _glyph_key(glyph)
        nv = 2 + sum(key[:3])
        return self.count(key) / falling_factorial(self.graph_n, nv)


def build_count_table(graph, max_l, max_c, max_r) -> CountTable:
    return CountTable(graph, max_l, max_c, max_r)


def inj_hom_count(table: CountTable, glyph):
    """Number of injective homomorphisms of the unrooted glyph into the graph."""
    return table.count(glyph)


def inj_hom_density(table: CountTable, glyph) -> float:
    """Injective count divided by the number of injective vertex maps."""
    key = _glyph_key(glyph)
    nv = 2 + sum(key[:3])
    if table.graph_n < nv:
        raise BudgetError(f"glyph needs {nv} nodes, graph has {table.graph_n}")
    return table.density(key)


def table_for(graph, glyphs):
    """Smallest table covering ``glyphs``."""
    keys = [_glyph_key(g) for g in glyphs]
    return CountTable(graph, max(k[0] for k in keys), max(k[1] for k in keys),
                      max(k[2] for k in keys))


BRUTE_MAX_VERTICES = 6
BRUTE_MAX_NODES = 14


@lru_cache(maxsize=32)
def _injections(n, k):
    return np.array(list(itertools.permutations(range(n), k)), dtype=np.int8).reshape(-1, k)


def brute_force_inj_count(graph: UndirectedGraph, glyph: BistarGlyph) -> int:
    """Count injective homomorphisms by listing every injective vertex map."""
    nv, edges = glyph.structure()
    n = graph.n
    if nv > BRUTE_MAX_VERTICES or n > BRUTE_MAX_NODES:
        raise BudgetError(
            f"brute-force counting limited to {BRUTE_MAX_VERTICES}-vertex glyphs on "
            f"{BRUTE_MAX_NODES}-node graphs (asked {nv} on {n})")
    if nv > n:
        return 0
    maps = _injections(n, nv)
    ok = np.ones(len(maps), dtype=bool)
    for u, v in edges:
        ok &= graph.adjacency[maps[:, u], maps[:, v]]
    return int(np.count_nonzero(ok))


def _jackknife_from_densities(full, loo):
    n = len(loo)
    return n / (n - 1) * float(np.sum((np.asarray(loo) - full) ** 2))


def leave_one_out_densities_naive(graph: UndirectedGraph, glyph) -> np.ndarray:
    """Densities of ``glyph`` in every ``G - v``, rebuilding the table each time."""
    key = _glyph_key(glyph)
    out = np.empty(graph.n)
    for v in range(graph.n):
        sub = graph.delete_node(v)
        out[v] = CountTable(sub, *key[:3]).density(key)
    return out


def leave_one_out_densities(graph: UndirectedGraph, glyph) -> np.ndarray:
    """Densities of ``glyph`` in every ``G - v`` without per-node rebuilds.

    Deleting ``v`` lowers ``Lam[i, j]`` by ``A[i, v] A[j, v]``, ``L[i, j]`` by
    ``A[i, v]`` and ``R[i, j]`` by ``A[j, v]``; nothing else changes.  So the
    count matrix of ``G - v`` restricted to pairs avoiding ``v`` is one of
    four shifted matrices ``F[a, b]`` picked by ``(A[i, v], A[j, v])``, and
    every leave-one-out total is a sum of quadratic forms in the columns of
    ``A``: four matrix products in total.
    """
    key = _glyph_key(glyph)
    n = graph.n
    nv = 2 + sum(key[:3])
    if n < nv + 1:
        raise BudgetError(f"leave-one-out needs at least {nv + 1} nodes, graph has {n}")
    a = graph.adjacency.astype(np.float64)
    lam = _two_hop(graph)
    deg = graph.degrees().astype(np.float64)
    states = _needed_states([key])
    indicator = {1: a, 0: 1.0 - a - np.eye(n)}
    totals = np.zeros(n)
    rows = max(1, _BLOCK_ELEMENTS // (n * (len(states) + 8)))
    for start in range(0, n, rows):
        sl = slice(start, min(start + rows, n))
        a_s = a[sl]
        lam_s = lam[sl].astype(np.float64)
        left = deg[sl, None] - a_s
        right = deg[None, :] - a_s
        off = np.ones_like(a_s, dtype=bool)
        off[np.arange(sl.stop - start), np.arange(start, sl.stop)] = False
        for sa in (0, 1):
            # with no mid paths or right pendants F ignores the right shift, and the two
            # right indicators sum to 1 - I: no matrix product needed
            right_free = key[1] == 0 and key[2] == 0
            for sb in ((0,) if right_free else (0, 1)):
                memo = _evaluate_rows(states, a_s, lam_s - sa * sb, left - sa, right - sb,
                                      off, np.float64)
                f = memo[key[:3]]
                if key[3]:
                    f = f * a_s
                if right_free:
                    g = f.sum(axis=1, keepdims=True) - f
                else:
                    g = f @ indicator[sb]
                totals += (g * indicator[sa][sl]).sum(axis=0)
    return totals / falling_factorial(n - 1, nv)


def jackknife_variance(graph: UndirectedGraph, glyph, method="fast") -> float:
    """Leave-one-node-out variance estimate of the glyph's density estimator.

    ``n / (n - 1) * sum_i (mu(G - i) - mu(G))**2``.
    """
    key = _glyph_key(glyph)
    nv = 2 + sum(key[:3])
    if graph.n < nv + 1:
        raise BudgetError(f"jackknife needs at least {nv + 1} nodes, graph has {graph.n}")
    full = CountTable(graph, *key[:3]).density(key)
    if method == "fast":
        loo = leave_one_out_densities(graph, key)
    elif method == "naive":
        loo = leave_one_out_densities_naive(graph, key)
    else:
        raise ValueError(f"unknown jackknife method {method!r}")
    return _jackknife_from_densities(full, loo)


def star_counts_check(graph, j):
    """Total of ``sum_i deg_i (deg_i - 1) ... (deg_i - j + 1)``: injective j-stars."""
    return sum(math.perm(int(d), j) for d in graph.degrees())
