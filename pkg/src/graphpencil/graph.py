"""Graphs, SBM parameters, seeded sampling and the on-disk formats.

Edge-list files are UTF-8 text with one edge per line (two 0-based node
ids separated by whitespace).  Lines starting with ``#`` are comments,
except that a header ``# n=<N>`` declares the node count so isolated
nodes survive a round trip.  Parameter files are JSON documents::

    {"schema": "graphpencil.sbm/1", "pi": [0.5, 0.5], "B": [[0.7, 0.2], [0.2, 0.4]]}

``schema`` is optional on input.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

PARAMS_SCHEMA = "graphpencil.sbm/1"

# Rows per independently seeded sampling stream.  Part of the sampling
# contract: changing it changes every sampled graph.
SAMPLE_ROW_BLOCK = 256

_HEADER_RE = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$")


class UndirectedGraph:
    """Simple undirected graph stored as a dense boolean adjacency matrix.

    The adjacency array is made read-only on construction.  ``blocks``
    optionally carries the latent block of every node (only known for
    sampled graphs); it never takes part in counting or inference.
    """

    __slots__ = ("adjacency", "blocks")

    def __init__(self, adjacency, blocks=None, check=True):
        adj = np.array(adjacency, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {adj.shape}")
        if check:
            if adj.diagonal().any():
                raise ValidationError("adjacency has self-loops (nonzero diagonal)")
            if not np.array_equal(adj, adj.T):
                raise ValidationError("adjacency is not symmetric")
        adj.setflags(write=False)
        if blocks is not None:
            blocks = np.array(blocks, dtype=np.int64, copy=True)
            if blocks.shape != (adj.shape[0],):
                raise ValidationError("blocks must have one entry per node")
            blocks.setflags(write=False)
        self.adjacency = adj
        self.blocks = blocks

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n, edges):
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            adj[u, v] = adj[v, u] = True
        return cls(adj)

    def edges(self):
        """Sorted ``(i, j)`` pairs with ``i < j``."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2

    def degrees(self):
        return self.adjacency.sum(axis=1, dtype=np.int64)

    def edge_density(self) -> float:
        n = self.n
        if n < 2:
            return 0.0
        return self.edge_count / (n * (n - 1) / 2)

    def delete_node(self, v):
        keep = np.arange(self.n) != v
        blocks = None if self.blocks is None else self.blocks[keep]
        return UndirectedGraph(self.adjacency[np.ix_(keep, keep)], blocks, check=False)

    def permute(self, perm):
        """Relabel nodes so that new node ``a`` is old node ``perm[a]``."""
        perm = np.asarray(perm)
        blocks = None if self.blocks is None else self.blocks[perm]
        return UndirectedGraph(self.adjacency[np.ix_(perm, perm)], blocks, check=False)

    def __eq__(self, other):
        if not isinstance(other, UndirectedGraph):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    __hash__ = None

    def __repr__(self):
        return f"UndirectedGraph(n={self.n}, edges={self.edge_count})"


@dataclass(frozen=True)
class SbmParams:
    """Block proportions ``pi`` (length K) and symmetric connectivity ``b`` (K x K)."""

    pi: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float)
        if b.ndim == 0:
            b = b.reshape(1, 1)
        pi.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "b", b)
        self.validate()

    @property
    def k(self) -> int:
        return self.pi.shape[0]

    def validate(self):
        pi, b = self.pi, self.b
        if pi.size == 0:
            raise ValidationError("pi must have at least one block")
        if b.shape != (pi.size, pi.size):
            raise ValidationError(f"B must be {pi.size}x{pi.size}, got shape {b.shape}")
        if not (np.all(np.isfinite(pi)) and np.all(np.isfinite(b))):
            raise ValidationError("pi and B must be finite")
        if np.any(pi < 0):
            raise ValidationError("pi entries must be non-negative")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValidationError(f"pi must sum to 1 (sum is {pi.sum()!r})")
        if not np.array_equal(b, b.T):
            raise ValidationError("B must be symmetric")
        if np.any(b < 0) or np.any(b > 1):
            raise ValidationError("B entries must lie in [0, 1]")

    def permuted(self, perm):
        perm = np.asarray(perm)
        return SbmParams(self.pi[perm], self.b[np.ix_(perm, perm)])

    def to_dict(self):
        return {"schema": PARAMS_SCHEMA, "pi": self.pi.tolist(), "B": self.b.tolist()}

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or "pi" not in doc or "B" not in doc:
            raise ValidationError("parameter document needs fields 'pi' and 'B'")
        schema = doc.get("schema", PARAMS_SCHEMA)
        if schema != PARAMS_SCHEMA:
            raise ValidationError(f"unsupported parameter schema {schema!r}")
        return cls(np.asarray(doc["pi"], dtype=float), np.asarray(doc["B"], dtype=float))

    @classmethod
    def erdos_renyi(cls, p):
        return cls(np.array([1.0]), np.array([[p]]))


@dataclass(frozen=True)
class SampleConfig:
    n: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")


def _stream(seed, *key):
    # Philox is counter based: every (seed, key) pair is an independent stream.
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_graph(params: SbmParams, config: SampleConfig) -> UndirectedGraph:
    """Draw a graph from ``SBM(pi, B)``.

    Node blocks come from one stream; each block of ``SAMPLE_ROW_BLOCK``
    adjacency rows has its own stream keyed by the row-block index, so the
    result depends only on ``(params, n, seed)``.
    """
    params.validate()
    n = int(config.n)
    blocks = _stream(config.seed, 0).choice(params.k, size=n, p=params.pi)
    probs = params.b[blocks]  # row i holds B[k(i), :]
    adj = np.zeros((n, n), dtype=bool)
    for start in range(0, n, SAMPLE_ROW_BLOCK):
        stop = min(start + SAMPLE_ROW_BLOCK, n)
        u = _stream(config.seed, 1, start // SAMPLE_ROW_BLOCK).random((stop - start, n))
        p = probs[start:stop][:, blocks]
        rows = u < p
        # keep strictly upper-triangular draws only
        cols = np.arange(n)
        rows &= cols[None, :] > np.arange(start, stop)[:, None]
        adj[start:stop] = rows
    adj |= adj.T
    return UndirectedGraph(adj, blocks=blocks, check=False)


def load_edge_list(path) -> UndirectedGraph:
    declared = None
    edges = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER_RE.match(line)
                if m:
                    declared = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected two node ids, got {line!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"node ids must be integers, got {line!r}", lineno) from None
            if u < 0 or v < 0:
                raise ParseError("node ids must be non-negative", lineno)
            if u == v:
                raise ParseError(f"self-loop on node {u}", lineno)
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ParseError(f"duplicate edge {key[0]}-{key[1]}", lineno)
            seen.add(key)
            edges.append(key)
    n = max((v for e in edges for v in e), default=-1) + 1
    if declared is not None:
        if declared < n:
            raise ParseError(f"header declares n={declared} but node id {n - 1} appears")
        n = declared
    return UndirectedGraph.from_edges(n, edges)


def save_edge_list(graph: UndirectedGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n}\n")
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")


def save_labels(blocks, path):
    with open(path, "w", encoding="utf-8") as fh:
        for k in blocks:
            fh.write(f"{int(k)}\n")


def load_labels(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ParseError(f"block label must be an integer, got {line!r}", lineno) from None
    return np.array(out, dtype=np.int64)


def load_params(path) -> SbmParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None
    return SbmParams.from_dict(doc)


def save_params(params: SbmParams, path):
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n", encoding="utf-8")
