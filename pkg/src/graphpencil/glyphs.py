"""Bistar glyphs and their homomorphism densities under an SBM.

A bistar glyph ``(l, c, r, e)`` has two centre vertices (the left and right
roots), ``l`` pendant edges on the left centre, ``r`` on the right centre,
``c`` two-hop paths between the centres and, when ``e`` is set, a bridge
edge joining them.  Its birooted density is the K x K matrix::

    (d 1^T)^l  o  (1 d^T)^r  o  Lambda^c  o  B^e

(``o`` = entrywise product, powers entrywise).  Left-rooted densities
contract the right index with ``pi``; unrooted densities contract both.

Text notation
-------------
``"L2 C1 E"`` is ``(2, 1, 0, True)``.  Tokens are ``L<n>``, ``C<n>``,
``R<n>`` (``L^2`` is accepted too, a bare ``L`` means one) and ``E`` for the
bridge, in any order, each at most once.  ``"1"`` or an empty string is the
glyph with no edges.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import BudgetError, ParseError, ValidationError
from .graph import SbmParams


class Rooting(enum.Enum):
    UNROOTED = "unrooted"
    LEFT = "left"
    BIROOTED = "birooted"


@dataclass(frozen=True)
class BistarGlyph:
    left: int = 0
    mid: int = 0
    right: int = 0
    bridge: bool = False
    rooting: Rooting = Rooting.UNROOTED

    def __post_init__(self):
        for name in ("left", "mid", "right"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        object.__setattr__(self, "bridge", bool(self.bridge))
        object.__setattr__(self, "rooting", Rooting(self.rooting))

    def sort_key(self):
        return (self.left, self.mid, self.right, self.bridge, self.rooting.value)

    @classmethod
    def star(cls, j, rooting=Rooting.UNROOTED):
        """Star with ``j`` edges, centred on the left root.  ``j == 0`` is a single vertex."""
        if j == 0:
            return cls(rooting=rooting)
        return cls(j - 1, 0, 0, True, rooting)

    @property
    def key(self):
        return (self.left, self.mid, self.right, self.bridge)

    def vertex_count(self) -> int:
        return 2 + self.left + self.mid + self.right

    def edge_count(self) -> int:
        return self.left + self.right + 2 * self.mid + int(self.bridge)

    def structure(self):
        """Vertex count and edge list.  Vertex 0 is the left root, 1 the right root."""
        edges = []
        nxt = 2
        for _ in range(self.left):
            edges.append((0, nxt))
            nxt += 1
        for _ in range(self.mid):
            edges.append((0, nxt))
            edges.append((nxt, 1))
            nxt += 1
        for _ in range(self.right):
            edges.append((1, nxt))
            nxt += 1
        if self.bridge:
            edges.append((0, 1))
        return nxt, edges

    def roots(self):
        return {Rooting.UNROOTED: (), Rooting.LEFT: (0,), Rooting.BIROOTED: (0, 1)}[self.rooting]

    def with_rooting(self, rooting):
        return BistarGlyph(self.left, self.mid, self.right, self.bridge, rooting)

    def mirrored(self):
        return BistarGlyph(self.right, self.mid, self.left, self.bridge, self.rooting)

    def canonical(self):
        """Unrooted glyphs are identified with their mirror image (``left >= right``)."""
        if self.rooting is Rooting.UNROOTED and self.left < self.right:
            return self.mirrored()
        return self

    def glue(self, other):
        """Merge the two left roots and the two right roots (birooted only)."""
        if self.rooting is not Rooting.BIROOTED or other.rooting is not Rooting.BIROOTED:
            raise ValidationError("gluing is defined for birooted glyphs only")
        if self.bridge and other.bridge:
            raise ValidationError(
                f"gluing {self} with {other} would create a parallel bridge edge")
        return BistarGlyph(self.left + other.left, self.mid + other.mid,
                           self.right + other.right, self.bridge or other.bridge,
                           Rooting.BIROOTED)

    def __str__(self):
        parts = []
        for sym, n in (("L", self.left), ("C", self.mid), ("R", self.right)):
            if n:
                parts.append(f"{sym}{n}")
        if self.bridge:
            parts.append("E")
        return " ".join(parts) or "1"


_TOKEN_RE = re.compile(r"^([LCRE])\^?(\d*)$")


def parse_glyph(text, rooting=Rooting.UNROOTED) -> BistarGlyph:
    text = text.strip()
    counts = {"L": 0, "C": 0, "R": 0}
    bridge = False
    seen = set()
    if text in ("", "1"):
        return BistarGlyph(rooting=rooting)
    for tok in text.replace(",", " ").split():
        m = _TOKEN_RE.match(tok.upper())
        if not m:
            raise ParseError(f"bad glyph token {tok!r} in {text!r}")
        sym, num = m.groups()
        if sym in seen:
            raise ParseError(f"token {sym} repeated in {text!r}")
        seen.add(sym)
        if sym == "E":
            if num:
                raise ParseError(f"bridge token takes no count in {text!r}")
            bridge = True
        else:
            counts[sym] = int(num) if num else 1
    return BistarGlyph(counts["L"], counts["C"], counts["R"], bridge, rooting)


class GlyphCombination:
    """Formal linear combination of glyphs; evaluation is linear."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        acc = {}
        for coef, g in terms:
            if g.rooting is Rooting.UNROOTED:
                g = g.canonical()
            acc[g] = acc.get(g, 0) + coef
        self.terms = tuple(sorted(((c, g) for g, c in acc.items() if c != 0),
                                  key=lambda t: t[1].sort_key()))

    @classmethod
    def of(cls, glyph, coef=1):
        return cls([(coef, glyph)])

    def __add__(self, other):
        other = _as_combination(other)
        return GlyphCombination(self.terms + other.terms)

    def __mul__(self, scalar):
        return GlyphCombination([(scalar * c, g) for c, g in self.terms])

    __rmul__ = __mul__

    def glue(self, other):
        other = _as_combination(other)
        return GlyphCombination([(c1 * c2, g1.glue(g2))
                                 for c1, g1 in self.terms for c2, g2 in other.terms])

    def with_rooting(self, rooting):
        return GlyphCombination([(c, g.with_rooting(rooting)) for c, g in self.terms])

    def unrooted(self):
        return self.with_rooting(Rooting.UNROOTED)

    def glyphs(self):
        return [g for _, g in self.terms]

    def __eq__(self, other):
        if isinstance(other, BistarGlyph):
            other = GlyphCombination.of(other)
        if not isinstance(other, GlyphCombination):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None

    def __str__(self):
        if not self.terms:
            return "0"
        out = []
        for c, g in self.terms:
            out.append(str(g) if c == 1 else f"{c}*({g})")
        return " + ".join(out)

    __repr__ = __str__


Glyphish = Union[BistarGlyph, GlyphCombination]


def _as_combination(x) -> GlyphCombination:
    if isinstance(x, GlyphCombination):
        return x
    if isinstance(x, BistarGlyph):
        return GlyphCombination.of(x)
    raise TypeError(f"expected a glyph or glyph combination, got {type(x).__name__}")


def block_degrees(params: SbmParams):
    """Normalised block degrees ``d_k = sum_j pi_j B_jk``."""
    return params.b.T @ params.pi


def two_hop_matrix(params: SbmParams):
    """``Lambda = B diag(pi) B``."""
    lam = params.b @ np.diag(params.pi) @ params.b
    return 0.5 * (lam + lam.T)


def birooted_density(params: SbmParams, glyph: BistarGlyph):
    d = block_degrees(params)
    k = params.k
    out = np.ones((k, k))
    if glyph.left:
        out *= (d ** glyph.left)[:, None]
    if glyph.right:
        out *= (d ** glyph.right)[None, :]
    if glyph.mid:
        out *= two_hop_matrix(params) ** glyph.mid
    if glyph.bridge:
        out *= params.b
    return out


def eval_density(params: SbmParams, glyph: Glyphish):
    """Exact density of a glyph (or formal combination) in ``SBM(pi, B)``.

    Returns a K x K matrix, a length-K vector or a float depending on the
    rooting.  Combinations must share a single rooting.
    """
    if isinstance(glyph, GlyphCombination):
        rootings = {g.rooting for g in glyph.glyphs()}
        if len(rootings) > 1:
            raise ValidationError("combination mixes rootings")
        total = 0.0
        for coef, g in glyph.terms:
            total = total + coef * eval_density(params, g)
        return total
    mat = birooted_density(params, glyph)
    if glyph.rooting is Rooting.BIROOTED:
        return mat
    if glyph.rooting is Rooting.LEFT:
        return mat @ params.pi
    return float(params.pi @ mat @ params.pi)


BRUTE_MAX_VERTICES = 10
BRUTE_MAX_BLOCKS = 5


def brute_force_density(params: SbmParams, n_vertices, edges, roots=()):
    """Density by summing over every assignment of vertices to blocks.

    ``roots`` lists the rooted vertices; the result has one K-sized axis per
    root (a float when there are none).  Rooted vertices carry no ``pi``
    weight.
    """
    k = params.k
    if n_vertices > BRUTE_MAX_VERTICES or k > BRUTE_MAX_BLOCKS:
        raise BudgetError(
            f"brute-force enumeration limited to {BRUTE_MAX_VERTICES} vertices and "
            f"{BRUTE_MAX_BLOCKS} blocks (asked for {n_vertices} vertices, K={k})")
    roots = tuple(roots)
    if len(set(roots)) != len(roots) or any(not 0 <= v < n_vertices for v in roots):
        raise ValidationError(f"bad root set {roots} for {n_vertices} vertices")
    # every map V(g) -> [K] as one column of phi
    phi = np.indices((k,) * n_vertices, dtype=np.int8).reshape(n_vertices, -1)
    weight = np.ones(phi.shape[1])
    for v in range(n_vertices):
        if v not in roots:
            weight *= params.pi[phi[v]]
    for u, v in edges:
        weight *= params.b[phi[u], phi[v]]
    weight = weight.reshape((k,) * n_vertices)
    free_axes = tuple(v for v in range(n_vertices) if v not in roots)
    out = weight.sum(axis=free_axes)
    if not roots:
        return float(out)
    # summed array keeps root axes in vertex order; reorder to the order given
    order = np.argsort(np.argsort(roots))
    return np.transpose(out, order)


def brute_force_glyph(params: SbmParams, glyph: BistarGlyph):
    n, edges = glyph.structure()
    return brute_force_density(params, n, edges, glyph.roots())
