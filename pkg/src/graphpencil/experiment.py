"""Convergence experiments: sample graphs, infer, score against the truth.

Replicate ``r`` at size ``n`` uses the graph seed
``hash(seed, n, r)`` (a SeedSequence digest), so any single cell of the
experiment can be rerun on its own and results do not depend on run order.
Every method in one replicate sees the same sampled graph and shares its
subgraph counts.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphPencilError, ValidationError
from .glyphs import block_degrees
from .graph import SampleConfig, SbmParams, sample_graph
from .pencil import GraphDensities, infer_sbm, resolve_basis

log = logging.getLogger(__name__)

SPEC_SCHEMA = "graphpencil.experiment/1"
METHODS = ("bistar", "two_hop")

# default desk-scale schedule: replicates shrink as size grows
DESK_SIZES = (256, 512, 1024, 2048)
DESK_REPLICATES = (64, 32, 16, 8)

# equal-sized K=2 regimes with degree gap 0.2 and varying (dis)assortativity
REGIMES = {
    "assortative": ([0.5, 0.5], [[0.9, 0.1], [0.1, 0.5]]),
    "middle": ([0.5, 0.5], [[0.7, 0.3], [0.3, 0.3]]),
    "disassortative": ([0.5, 0.5], [[0.6, 0.8], [0.8, 0.2]]),
}

SUMMARY_FIELDS = ("size", "method", "mean_sq_error", "stdev", "baseline", "replicates",
                  "failures", "failure_rate", "log_mean", "log_lower", "log_upper")
RAW_FIELDS = ("size", "replicate", "seed", "method", "sq_error", "status", "message")


def regime(name) -> SbmParams:
    try:
        pi, b = REGIMES[name]
    except KeyError:
        raise ValidationError(f"unknown regime {name!r}; choose from {sorted(REGIMES)}") from None
    return SbmParams(pi, b)


def random_degree_separated_sbm(rng, k, gap=0.05, pi_min=0.05) -> SbmParams:
    """Random SBM whose sorted block degrees differ by at least ``gap``.

    ``pi`` is Dirichlet(1) rejected below ``pi_min``; ``B`` is uniform
    symmetric.  Draws are repeated until both conditions hold.
    """
    while True:
        pi = rng.dirichlet(np.ones(k))
        if pi.min() < pi_min:
            continue
        u = rng.random((k, k))
        params = SbmParams(pi / pi.sum(), np.triu(u) + np.triu(u, 1).T)
        if k == 1 or np.diff(np.sort(block_degrees(params))).min() >= gap:
            return params


def squared_error(b_true, b_inferred, pi_true) -> float:
    """``pi^T (B_inferred - B_true)^2 pi`` with the square taken entrywise."""
    b_true = np.asarray(b_true, dtype=float)
    b_inferred = np.asarray(b_inferred, dtype=float)
    pi_true = np.asarray(pi_true, dtype=float)
    if b_true.shape != b_inferred.shape or b_true.shape != (pi_true.size, pi_true.size):
        raise ValidationError(
            f"shape mismatch: B_true {b_true.shape}, B_inferred {b_inferred.shape}, "
            f"pi {pi_true.shape}")
    diff = b_inferred - b_true
    return float(pi_true @ (diff * diff) @ pi_true)


def known_blocks_baseline(params: SbmParams, n) -> float:
    """Expected squared error of B when every node's block is known.

    Off-diagonal entries are binomial means over ``(n pi_i)(n pi_j)`` pairs,
    diagonal ones over ``(n pi_i)^2 / 2`` pairs.
    """
    b, pi = params.b, params.pi
    sizes = n * pi
    with np.errstate(divide="ignore", invalid="ignore"):
        var = b * (1 - b) / np.outer(sizes, sizes)
        np.fill_diagonal(var, np.diag(b) * (1 - np.diag(b)) / (sizes**2 / 2))
    var = np.where(np.isfinite(var), var, 0.0)
    return float(pi @ var @ pi)


def align_to_truth(params: SbmParams):
    """Truth relabelled by descending block degree, the order inference reports."""
    return params.permuted(np.argsort(-block_degrees(params), kind="stable"))


def replicate_seed(seed, size, replicate) -> int:
    ss = np.random.SeedSequence([int(seed), int(size), int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run.

    ``replicates`` is one count per size.  With ``sparse_mode`` the
    connectivity at size ``n`` is ``B * n_ref / n`` (``n_ref`` defaults to
    the smallest size), holding expected degrees fixed.
    """

    sbm: SbmParams
    sizes: tuple = DESK_SIZES
    replicates: tuple = DESK_REPLICATES
    methods: tuple = METHODS
    seed: int = 0
    sparse_mode: bool = False
    n_ref: int = None
    k: int = None
    basis: str = "auto"

    def __post_init__(self):
        sizes = tuple(int(s) for s in np.atleast_1d(self.sizes))
        reps = np.atleast_1d(self.replicates)
        if reps.size == 1:
            reps = np.repeat(reps, len(sizes))
        reps = tuple(int(r) for r in reps)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "replicates", reps)
        object.__setattr__(self, "methods", tuple(self.methods))
        if not sizes:
            raise ValidationError("need at least one size")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError(f"sizes must be strictly ascending, got {sizes}")
        if sizes[0] < 2:
            raise ValidationError("sizes must be >= 2")
        if len(reps) != len(sizes) or min(reps) < 1:
            raise ValidationError("need one positive replicate count per size")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValidationError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        resolve_basis(self.basis, self.sbm.k)
        if self.k is None:
            object.__setattr__(self, "k", self.sbm.k)
        if self.sparse_mode:
            if self.n_ref is None:
                object.__setattr__(self, "n_ref", sizes[0])
            for n in sizes:
                self.params_at(n)

    def params_at(self, n) -> SbmParams:
        if not self.sparse_mode:
            return self.sbm
        b = self.sbm.b * (self.n_ref / n)
        if np.any(b > 1):
            raise ValidationError(f"sparse scaling pushes B above 1 at n={n}")
        return SbmParams(self.sbm.pi, b)

    def to_dict(self):
        return {
            "schema": SPEC_SCHEMA,
            "sbm": self.sbm.to_dict(),
            "sizes": list(self.sizes),
            "replicates": list(self.replicates),
            "methods": list(self.methods),
            "seed": self.seed,
            "sparse_mode": self.sparse_mode,
            "n_ref": self.n_ref,
            "k": self.k,
            "basis": self.basis,
        }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or "sbm" not in doc:
            raise ValidationError("experiment document needs an 'sbm' field")
        schema = doc.get("schema", SPEC_SCHEMA)
        if schema != SPEC_SCHEMA:
            raise ValidationError(f"unsupported experiment schema {schema!r}")
        kw = {k: doc[k] for k in ("sizes", "replicates", "methods", "seed", "sparse_mode",
                                  "n_ref", "k", "basis") if k in doc}
        return cls(SbmParams.from_dict(doc["sbm"]), **kw)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    raw: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    def summary_for(self, method):
        return [row for row in self.summary if row["method"] == method]

    def means(self, method):
        return np.array([row["mean_sq_error"] for row in self.summary_for(method)])

    def baselines(self):
        return np.array([row["baseline"] for row in self.summary_for(self.spec.methods[0])])

    def slope(self, method):
        return convergence_slope(self.spec.sizes, self.means(method))

    def summary_csv(self) -> str:
        return _to_csv(SUMMARY_FIELDS, self.summary)

    def raw_csv(self) -> str:
        return _to_csv(RAW_FIELDS, self.raw)


def convergence_slope(sizes, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(sizes)``."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2 or not np.all(np.isfinite(y)):
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _to_csv(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def run_replicate(spec: ExperimentSpec, size, replicate):
    """Rows of the raw table for one sampled graph."""
    params = spec.params_at(size)
    truth = align_to_truth(params)
    seed = replicate_seed(spec.seed, size, replicate)
    graph = sample_graph(params, SampleConfig(size, seed))
    source = GraphDensities(graph)
    rows = []
    for method in spec.methods:
        row = {"size": size, "replicate": replicate, "seed": seed, "method": method,
               "sq_error": float("nan"), "status": "ok", "message": ""}
        try:
            sol = infer_sbm(source, spec.k, two_hop=(method == "two_hop"), basis=spec.basis)
            row["sq_error"] = squared_error(truth.b, sol.b, truth.pi)
        except GraphPencilError as exc:
            row["status"] = "failed"
            row["message"] = str(exc).replace("\n", " ")
        rows.append(row)
    return rows


def summarize(spec: ExperimentSpec, raw):
    out = []
    for size in spec.sizes:
        baseline = known_blocks_baseline(spec.params_at(size), size)
        for method in spec.methods:
            cell = [r for r in raw if r["size"] == size and r["method"] == method]
            ok = np.array([r["sq_error"] for r in cell if r["status"] == "ok"])
            mean = float(ok.mean()) if ok.size else float("nan")
            std = float(ok.std(ddof=1)) if ok.size > 1 else 0.0 if ok.size else float("nan")
            log_mean = math.log(mean) if mean > 0 else float("nan")
            band = std / mean if mean > 0 else float("nan")
            out.append({
                "size": size, "method": method, "mean_sq_error": mean, "stdev": std,
                "baseline": baseline, "replicates": len(cell),
                "failures": len(cell) - ok.size,
                "failure_rate": (len(cell) - ok.size) / len(cell) if cell else float("nan"),
                "log_mean": log_mean, "log_lower": log_mean - band, "log_upper": log_mean + band,
            })
    return out


def run_experiment(spec: ExperimentSpec, progress=None) -> ExperimentResult:
    """Run every (size, replicate) cell in order and summarise.

    ``progress``, if given, is called as ``progress(size, replicate)``
    before each cell.
    """
    raw = []
    for size, reps in zip(spec.sizes, spec.replicates):
        for rep in range(reps):
            if progress is not None:
                progress(size, rep)
            raw.extend(run_replicate(spec, size, rep))
        fails = sum(r["status"] != "ok" for r in raw if r["size"] == size)
        if fails:
            log.warning("n=%d: %d of %d inferences failed", size, fails, reps * len(spec.methods))
    return ExperimentResult(spec, raw, summarize(spec, raw))


def load_experiment_spec(path) -> ExperimentSpec:
    from .errors import ParseError
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None
    return ExperimentSpec.from_dict(doc)


VARIANCE_FIELDS = ("glyph", "n", "graphs", "true_density", "mean_density", "empirical_variance",
                   "median_jackknife", "mean_jackknife", "ratio")


@dataclass
class VarianceCheckResult:
    """Jackknife estimates against the spread of densities over sampled graphs."""

    params: SbmParams
    n: int
    glyphs: list
    densities: np.ndarray  # (graphs, glyphs)
    jackknife: np.ndarray  # (graphs, glyphs)
    rows: list = field(default_factory=list)

    def summary_csv(self) -> str:
        return _to_csv(VARIANCE_FIELDS, self.rows)

    def raw_csv(self) -> str:
        fields = ("graph",) + tuple(f"{g}|{kind}" for g in map(str, self.glyphs)
                                    for kind in ("density", "jackknife"))
        rows = []
        for i in range(self.densities.shape[0]):
            row = {"graph": i}
            for j, g in enumerate(self.glyphs):
                row[f"{g}|density"] = float(self.densities[i, j])
                row[f"{g}|jackknife"] = float(self.jackknife[i, j])
            rows.append(row)
        return _to_csv(fields, rows)


def variance_check(params: SbmParams, n, glyphs, graphs=200, seed=0, progress=None):
    """Sample ``graphs`` graphs and compare jackknife variances with the observed one.

    ``ratio`` is the median jackknife estimate over the empirical variance
    (``ddof=1``) of the densities.
    """
    from .counting import jackknife_variance, table_for
    from .glyphs import Rooting, eval_density

    glyphs = [g.with_rooting(Rooting.UNROOTED).canonical() for g in glyphs]
    if graphs < 2:
        raise ValidationError("need at least two graphs to estimate a variance")
    dens = np.empty((graphs, len(glyphs)))
    jack = np.empty_like(dens)
    for i in range(graphs):
        if progress is not None:
            progress(i)
        graph = sample_graph(params, SampleConfig(n, replicate_seed(seed, n, i)))
        table = table_for(graph, [g.key for g in glyphs])
        for j, g in enumerate(glyphs):
            dens[i, j] = table.density(g.key)
            jack[i, j] = jackknife_variance(graph, g)
    rows = []
    for j, g in enumerate(glyphs):
        emp = float(dens[:, j].var(ddof=1))
        med = float(np.median(jack[:, j]))
        rows.append({
            "glyph": str(g), "n": n, "graphs": graphs,
            "true_density": float(eval_density(params, g)),
            "mean_density": float(dens[:, j].mean()),
            "empirical_variance": emp, "median_jackknife": med,
            "mean_jackknife": float(jack[:, j].mean()),
            "ratio": med / emp if emp > 0 else float("nan"),
        })
    return VarianceCheckResult(params, n, glyphs, dens, jack, rows)
