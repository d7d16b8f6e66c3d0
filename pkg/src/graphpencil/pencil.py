"""Matrix-pencil recovery of SBM parameters from subgraph densities.

Two stages.  Star densities give the moments ``<d^j> = sum_k pi_k d_k^j``;
the Hankel pencil built from them has the block degrees ``d`` as
eigenvalues, and ``pi`` then solves a Vandermonde system.  Bistar densities
built from a symmetric polynomial basis in the two root degrees give a
second pencil whose eigenvalues are the entries of ``B``; each entry is read
off with a Rayleigh quotient at the eigenvector predicted by ``d``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.linalg

from . import counting
from .errors import ConditioningError, DegeneracyError, NumericalError, ValidationError
from .glyphs import (BistarGlyph, GlyphCombination, Rooting, block_degrees, eval_density,
                     two_hop_matrix)
from .graph import SbmParams, UndirectedGraph

log = logging.getLogger(__name__)

SOLUTION_SCHEMA = "graphpencil.solution/1"

# |Im| / |Re| of a pencil eigenvalue: record above the first, fail above the second
IMAG_WARN = 1e-6
IMAG_FAIL = 0.5
# min |d_k - d_k'| relative to max |d|
SEPARATION_TOL = 1e-6
# relative singular-value floor for the K x K Hankel matrix
HANKEL_RCOND = 1e-13
# pseudoinverse cutoff for the bistar matrix
PINV_RCOND = 1e-10

EDGE = BistarGlyph(0, 0, 0, True, Rooting.BIROOTED)
TWO_HOP = BistarGlyph(0, 1, 0, False, Rooting.BIROOTED)


@dataclass(frozen=True)
class MomentSequence:
    values: np.ndarray
    source: str = "exact"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size == 0 or v[0] != 1.0:
            raise ValidationError("moment sequence must start with <d^0> = 1")
        if self.source not in ("exact", "estimated"):
            raise ValidationError(f"source must be 'exact' or 'estimated', got {self.source!r}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class SymmetricBasis:
    """Basis of symmetric polynomials in the two root degrees, exponents <= K-1.

    ``entries`` are the basis elements as formal glyph combinations (their
    monomial expansion, used when densities come from counts).  ``nodes`` is
    ``None`` for the monomial basis ``m_(a,b)`` and holds the interpolation
    nodes for a Lagrange basis; :meth:`evaluate` uses a product form there so
    no cancellation happens at the nodes.
    """

    k: int
    exponents: tuple
    entries: tuple
    nodes: tuple = None

    def __len__(self):
        return len(self.entries)

    def _univariate(self, x):
        x = np.asarray(x, dtype=float)
        if self.nodes is None:
            return [x**a for a in range(self.k)]
        out = []
        for a, na in enumerate(self.nodes):
            val = np.ones_like(x)
            for j, nj in enumerate(self.nodes):
                if j != a:
                    val = val * (x - nj) / (na - nj)
            out.append(val)
        return out

    def evaluate(self, x, y):
        """Every basis polynomial at left degree ``x`` and right degree ``y``.

        Broadcasts: the result has shape ``(len(basis),) + broadcast(x, y).shape``.
        """
        px, py = self._univariate(x), self._univariate(y)
        out = []
        for a, b in self.exponents:
            if a == b:
                out.append(px[a] * py[a])
            else:
                out.append(px[a] * py[b] + px[b] * py[a])
        return np.array(out, dtype=float)


def _basis_from_univariate(k, coeffs, nodes=None):
    # coeffs[a][i]: coefficient of x**i in the a-th univariate polynomial
    exps = tuple((a, b) for b in range(k) for a in range(b + 1))
    entries = []
    for a, b in exps:
        terms = []
        for i in range(k):
            for j in range(k):
                c = coeffs[a][i] * coeffs[b][j]
                if a != b:
                    c += coeffs[b][i] * coeffs[a][j]
                if c:
                    terms.append((c, BistarGlyph(i, 0, j, False, Rooting.BIROOTED)))
        entries.append(GlyphCombination(terms))
    return SymmetricBasis(k, exps, tuple(entries), nodes)


def build_symmetric_basis(k) -> SymmetricBasis:
    """Monomial symmetric polynomials ``L^a R^b + L^b R^a`` (``L^a R^a`` when a == b).

    Ordered by the larger exponent, then the smaller: for K = 2 this is
    ``[1, L + R, L R]``.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    coeffs = [[1 if i == a else 0 for i in range(k)] for a in range(k)]
    return _basis_from_univariate(k, coeffs)


def build_lagrange_basis(nodes) -> SymmetricBasis:
    """Same polynomial space as :func:`build_symmetric_basis`, in a Lagrange basis.

    With ``nodes`` equal to the block degrees, the basis evaluated at the
    block pairs is the identity, which keeps the bistar pencil well
    conditioned for larger K.
    """
    nodes = np.asarray(nodes, dtype=float)
    k = nodes.size
    if k < 1:
        raise ValidationError("need at least one node")
    if k > 1 and np.min(np.abs(np.subtract.outer(nodes, nodes))[~np.eye(k, dtype=bool)]) == 0:
        raise DegeneracyError("Lagrange nodes must be distinct", "connectivity")
    coeffs = []
    for a in range(k):
        others = np.delete(nodes, a)
        poly = np.atleast_1d(np.poly(others))[::-1] / np.prod(nodes[a] - others)  # increasing powers
        coeffs.append([float(c) for c in poly])
    return _basis_from_univariate(k, coeffs, tuple(nodes.tolist()))


class DensitySource(Protocol):
    def density(self, glyph: BistarGlyph) -> float: ...

    def prefetch(self, glyphs) -> None: ...


class ExactDensities:
    """Densities computed in closed form from known parameters."""

    def __init__(self, params: SbmParams):
        self.params = params

    def density(self, glyph):
        return eval_density(self.params, glyph.with_rooting(Rooting.UNROOTED))

    def prefetch(self, glyphs):
        pass

    def bistar_matrices(self, basis, two_hop=False):
        """Pencil matrices by entrywise gluing of K x K density matrices.

        Each basis element's birooted density is the basis polynomial applied
        entrywise to ``(d 1^T, 1 d^T)``; gluing multiplies these matrices and
        unrooting contracts with ``pi`` on both sides.
        """
        p = self.params
        d = block_degrees(p)
        rows = basis.evaluate(d[:, None], d[None, :])  # (n, K, K)
        cols = rows
        if two_hop:
            cols = np.concatenate([rows, rows * two_hop_matrix(p)[None]], axis=0)
        prod = rows[:, None] * cols[None, :]
        c_plain = np.einsum("k,ijkl,l->ij", p.pi, prod, p.pi)
        c_b = np.einsum("k,ijkl,l->ij", p.pi, prod * p.b, p.pi)
        return c_plain, c_b


class GraphDensities:
    """Unbiased injective-homomorphism density estimates from an observed graph."""

    def __init__(self, graph: UndirectedGraph):
        self.graph = graph
        self._cache = {}

    def prefetch(self, glyphs):
        keys = {g.with_rooting(Rooting.UNROOTED).canonical().key for g in glyphs}
        keys -= set(self._cache)
        if not keys:
            return
        table = counting.table_for(self.graph, keys)
        counts = table.counts(keys)
        for key, cnt in counts.items():
            self._cache[key] = cnt / counting.falling_factorial(self.graph.n, 2 + sum(key[:3]))

    def density(self, glyph):
        key = glyph.with_rooting(Rooting.UNROOTED).canonical().key
        if key not in self._cache:
            self.prefetch([glyph])
        return self._cache[key]


def combination_density(source, comb: GlyphCombination) -> float:
    return float(sum(c * source.density(g) for c, g in comb.terms))


@dataclass
class PencilSolution:
    pi: np.ndarray
    d: np.ndarray
    b: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.pi)

    def params(self) -> SbmParams:
        """As validated SBM parameters (requires entries already in range)."""
        pi = np.asarray(self.pi) / np.sum(self.pi)
        return SbmParams(pi, 0.5 * (self.b + self.b.T))

    def to_dict(self):
        return {
            "schema": SOLUTION_SCHEMA,
            "k": self.k,
            "pi": np.asarray(self.pi).tolist(),
            "d": np.asarray(self.d).tolist(),
            "B": np.asarray(self.b).tolist(),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _real_spectrum(mat, stage, imag_warn=IMAG_WARN, imag_fail=IMAG_FAIL):
    vals = np.linalg.eigvals(mat)
    re = vals.real
    residue = np.abs(vals.imag) / np.maximum(np.abs(re), np.finfo(float).tiny)
    residue = np.where(vals.imag == 0, 0.0, residue)
    diag = {"eigenvalues_real": np.sort(re)[::-1], "imag_residue": float(residue.max(initial=0))}
    if residue.max(initial=0) > imag_fail:
        raise NumericalError(
            f"pencil eigenvalue far from real axis (|Im|/|Re| = {residue.max():.3g} > "
            f"{imag_fail}); densities too noisy for this K", stage, diag)
    if residue.max(initial=0) > imag_warn:
        diag["warning"] = f"eigenvalues have imaginary residue up to {residue.max():.3g}"
        log.warning("%s: %s", stage, diag["warning"])
    return np.sort(re)[::-1], diag


def solve_coin_pencil(moments, k, stage="degree", hankel_rcond=HANKEL_RCOND,
                      separation_tol=SEPARATION_TOL):
    """Mixture weights and latent values from the first ``2k`` moments.

    Returns ``(pi, values, diagnostics)`` with ``values`` sorted descending.
    """
    if not isinstance(moments, MomentSequence):
        moments = MomentSequence(moments)
    m = moments.values
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if len(m) < 2 * k:
        raise ValidationError(f"need {2 * k} moments for k={k}, got {len(m)}")
    c0 = scipy.linalg.hankel(m[:k], m[k - 1:2 * k - 1])
    c1 = scipy.linalg.hankel(m[1:k + 1], m[k:2 * k])
    sv = np.linalg.svd(c0, compute_uv=False)
    diag = {"hankel_singular_values": sv}
    if sv[-1] <= hankel_rcond * sv[0]:
        raise DegeneracyError(
            "moment matrix is singular: block degrees are not distinct (degree-separation "
            "assumption violated, Vandermonde matrix not invertible)", stage,
            {**diag, "relative_floor": hankel_rcond})
    shift = scipy.linalg.solve(c0.T, c1.T).T  # c1 @ inv(c0)
    values, spec = _real_spectrum(shift, stage)
    diag.update(spec)
    scale = max(np.max(np.abs(values)), np.finfo(float).tiny)
    gaps = np.abs(np.diff(values)) if k > 1 else np.array([np.inf])
    diag["min_gap"] = float(gaps.min())
    if k > 1 and gaps.min() < separation_tol * scale:
        raise DegeneracyError(
            f"recovered degrees {values} are not separated (min gap {gaps.min():.3g}); "
            "blocks are not degree-separated", stage, diag)
    vander = np.vander(values, k, increasing=True).T  # vander[j, k] = values[k]**j
    diag["vandermonde_cond"] = float(np.linalg.cond(vander))
    pi = scipy.linalg.solve(vander, m[:k])
    diag["pi_sum"] = float(pi.sum())
    return pi, values, diag


def solve_degree_pencil(moments, k, **kwargs):
    """Block proportions and normalised degrees from star densities."""
    return solve_coin_pencil(moments, k, stage="degree", **kwargs)


def star_moments(source, k) -> MomentSequence:
    stars = [BistarGlyph.star(j) for j in range(1, 2 * k)]
    source.prefetch(stars)
    kind = "exact" if isinstance(source, ExactDensities) else "estimated"
    return MomentSequence([1.0] + [source.density(s) for s in stars], kind)


def pencil_columns(basis: SymmetricBasis, two_hop: bool):
    cols = list(basis.entries)
    if two_hop:
        cols += [e.glue(TWO_HOP) for e in basis.entries]
    return cols


def required_glyphs(k, two_hop=False):
    """Unrooted glyphs whose densities ``infer_sbm`` reads."""
    out = {BistarGlyph.star(j) for j in range(1, 2 * k)}
    basis = build_symmetric_basis(k)
    for row in basis.entries:
        for col in pencil_columns(basis, two_hop):
            prod = row.glue(col)
            out.update(prod.unrooted().glyphs())
            out.update(prod.glue(EDGE).unrooted().glyphs())
    return sorted(out, key=BistarGlyph.sort_key)


def build_bistar_matrices(source, basis: SymmetricBasis, two_hop=False):
    """``(C_plain, C_B)``: unrooted densities of ``v_i o w_j`` and of ``v_i o w_j o B``.

    With ``two_hop`` the column set ``w`` is the basis followed by the basis
    glued with the two-hop glyph, giving ``n x 2n`` matrices.
    """
    if hasattr(source, "bistar_matrices"):
        return source.bistar_matrices(basis, two_hop)
    return bistar_matrices_from_glyphs(source, basis, two_hop)


def bistar_matrices_from_glyphs(source, basis: SymmetricBasis, two_hop=False):
    """Same as :func:`build_bistar_matrices` but always via glyph expansions."""
    cols = pencil_columns(basis, two_hop)
    plain = [[row.glue(col) for col in cols] for row in basis.entries]
    source.prefetch({g for r in plain for p in r
                     for g in p.unrooted().glyphs() + p.glue(EDGE).unrooted().glyphs()})
    c_plain = np.array([[combination_density(source, p.unrooted()) for p in r] for r in plain])
    c_b = np.array([[combination_density(source, p.glue(EDGE).unrooted()) for p in r]
                    for r in plain])
    return c_plain, c_b


def pencil_operator(c_plain, c_b, rcond=PINV_RCOND, min_rank=None, stage="connectivity"):
    """``C_B @ pinv(C_plain)`` with a relative singular-value cutoff."""
    u, s, vt = np.linalg.svd(c_plain, full_matrices=False)
    cutoff = rcond * s[0] if s.size else 0.0
    keep = s > cutoff
    diag = {"singular_values": s, "pinv_cutoff": cutoff, "rank": int(keep.sum())}
    if min_rank is not None and keep.sum() < min_rank:
        raise ConditioningError(
            f"bistar matrix has numerical rank {keep.sum()} < {min_rank} "
            f"(cutoff {cutoff:.3g}); densities do not determine B at this K", stage, diag)
    pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return c_b @ pinv, diag


def recover_B(c_plain, c_b, d, basis: SymmetricBasis, rcond=PINV_RCOND):
    """Connectivity matrix from the bistar pencil via Rayleigh quotients.

    For each block pair the eigenvector of ``C_B pinv(C_plain)`` is the basis
    evaluated at ``(d_k, d_k')``; its Rayleigh quotient is ``B[k, k']``.
    """
    op, diag = pencil_operator(c_plain, c_b, rcond, min_rank=len(basis))
    k = len(d)
    b = np.empty((k, k))
    residual = 0.0
    for i in range(k):
        for j in range(i, k):
            v = basis.evaluate(d[i], d[j])
            mv = op @ v
            val = float(v @ mv / (v @ v))
            residual = max(residual, float(np.linalg.norm(mv - val * v) / np.linalg.norm(v)))
            b[i, j] = b[j, i] = val
    ev = np.linalg.eigvals(op)
    diag["eigenvalues"] = np.sort(ev.real)[::-1]
    diag["eigenvalue_imag_max"] = float(np.abs(ev.imag).max(initial=0))
    diag["rayleigh_residual"] = residual
    return b, diag


def _project_simplex(v):
    # Euclidean projection onto {x >= 0, sum x = 1}
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


BASES = ("auto", "lagrange", "monomial")


def resolve_basis(basis, k):
    """``"auto"`` picks the monomial basis for K <= 2 and Lagrange above."""
    if basis not in BASES:
        raise ValidationError(f"basis must be one of {BASES}, got {basis!r}")
    if basis == "auto":
        return "monomial" if k <= 2 else "lagrange"
    return basis


def infer_sbm(source, k, two_hop=False, clamp=False, basis="auto") -> PencilSolution:
    """Recover ``(pi, d, B)`` for a ``k``-block SBM from a density source.

    ``basis`` selects the symmetric polynomial basis of the connectivity
    stage: ``"monomial"`` is ``[1, L+R, LR, ...]``; ``"lagrange"`` spans the
    same space but interpolates at the recovered degrees, which is far
    better conditioned once K exceeds 2.  The choice also sets the column
    weighting of the two-hop least-squares fit; at K = 2 the monomial
    weighting gives the lower error on sampled graphs.
    """
    basis = resolve_basis(basis, k)
    source.prefetch(required_glyphs(k, two_hop))
    moments = star_moments(source, k)
    try:
        pi, d, deg_diag = solve_degree_pencil(moments, k)
    except NumericalError as exc:
        exc.stage = exc.stage or "degree"
        raise
    try:
        basis_obj = build_lagrange_basis(d) if basis == "lagrange" else build_symmetric_basis(k)
        c_plain, c_b = build_bistar_matrices(source, basis_obj, two_hop)
        b, b_diag = recover_B(c_plain, c_b, d, basis_obj)
    except NumericalError as exc:
        exc.stage = exc.stage or "connectivity"
        raise
    diagnostics = {
        "moments": moments.values,
        "moment_source": moments.source,
        "degree": deg_diag,
        "connectivity": b_diag,
        "two_hop": bool(two_hop),
        "basis": basis,
        "vandermonde_cond": deg_diag["vandermonde_cond"],
        "pinv_cutoff": b_diag["pinv_cutoff"],
        "imag_residue": deg_diag["imag_residue"],
        "clamped_pi": False,
        "clamped_b": False,
    }
    if clamp:
        new_pi = _project_simplex(pi)
        new_b = np.clip(b, 0.0, 1.0)
        diagnostics["clamped_pi"] = bool(not np.allclose(new_pi, pi, rtol=0, atol=0))
        diagnostics["clamped_b"] = bool(not np.array_equal(new_b, b))
        pi, b = new_pi, new_b
    return PencilSolution(pi, d, b, diagnostics)
