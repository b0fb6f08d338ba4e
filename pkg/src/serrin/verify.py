"""Identity checks comparing solved fields against the radial model.

Given a solved torsion field on a doubly connected domain and the model
fitted from its boundary data, this module evaluates the quantities whose
vanishing characterizes the annulus: Neumann-trace constancy, the Pohozaev
area balance, the pointwise gradient bound through the pseudo-radius, the
length comparisons on both boundaries, a divergence identity for increasing
profiles, a refined integral identity for decreasing profiles, and the
quadratic boundary expansion at a degenerate (zero-slope) boundary.
``full_report`` bundles everything into one serializable report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InconsistentModelError, InvalidInputError, UnsupportedRegimeError
from .geometry import (
    CurvGrid,
    DomainSpec,
    boundary_length,
    build_grid,
    integrate_area,
    integrate_boundary,
    region_areas,
)
from .models import (
    SINGULAR_CUTOFF,
    BoundaryData,
    ModelParams,
    ProblemCase,
    boundary_data_of,
    classify_case,
    compatibility,
    fit_model,
    model_gradient_sq,
    model_u,
    pseudo_radius,
    refined_k,
)
from .solver import ScalarField, SolveOptions, gradient_field, neumann_trace, solve_dirichlet

TOLERANCES = {
    "neumann_sd": 1e-2,
    "pohozaev": 5e-3,
    "grad_margin": 5e-3,
    "area_margin": 1e-8,
    "div_identity": 1e-2,
    "div_boundary_term": 1e-3,
    "refined_identity": 2e-2,
    "case1_margin": 2e-2,
    "expansion": 0.1,
}

# Degenerate boundaries are detected by an arc-averaged |Neumann| below this.
_DEGENERATE_NEUMANN = 1e-3

# Default truncation half-width (relative to sqrt(M)) around the level where
# the model gradient vanishes.
DEFAULT_TRUNCATION = 1e-4

CSV_COLUMNS = [
    "case", "Ns", "Ntheta", "eps",
    "neumann_sd_inner", "neumann_sd_outer", "pohozaev_res", "grad_margin",
    "area_margin_in", "area_margin_out", "div_identity_res",
    "refined_identity_res", "case1_margin", "expansion_coeff", "error",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.12g}"


@dataclass(frozen=True)
class NeumannStats:
    mean: float
    sd: float
    max_dev: float


def neumann_constancy(values, weights=None) -> NeumannStats:
    """Weighted mean, standard deviation and maximum deviation of a trace."""
    vals = np.asarray(values, dtype=float)
    w = np.ones_like(vals) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != vals.shape or vals.size == 0:
        raise InvalidInputError("weights must match the trace values")
    total = float(np.sum(w))
    mean = float(np.sum(vals * w) / total)
    var = float(np.sum(w * (vals - mean) ** 2) / total)
    return NeumannStats(mean=mean, sd=math.sqrt(max(var, 0.0)),
                        max_dev=float(np.max(np.abs(vals - mean))))


def measured_boundary_data(grid: CurvGrid, field: ScalarField) -> BoundaryData:
    """Boundary data read off a field: arc-averaged values and traces."""
    wi, wo = grid.inner_arc_w, grid.outer_arc_w
    a = float(np.sum(field.values[0] * wi) / np.sum(wi))
    b = float(np.sum(field.values[-1] * wo) / np.sum(wo))
    alpha = neumann_constancy(neumann_trace(grid, field, "inner"), wi).mean
    beta = neumann_constancy(neumann_trace(grid, field, "outer"), wo).mean
    return BoundaryData(a=a, b=b, alpha=alpha, beta=beta)


def fit_from_field(grid: CurvGrid, field: ScalarField):
    """Measure boundary data from a field and fit the model to it."""
    data = measured_boundary_data(grid, field)
    return data, fit_model(data)


def pohozaev_residual(grid: CurvGrid, field: ScalarField,
                      data: Optional[BoundaryData] = None) -> float:
    """Residual of the area balance

        integral(4u) = (4b + beta^2)|E_o| - (4a + alpha^2)|E_i|,

    with |E_i|, |E_o| the areas enclosed by the two boundary curves.  When
    ``data`` is omitted the boundary values are measured from the field.
    """
    if data is None:
        data = measured_boundary_data(grid, field)
    ei, eo, _ = region_areas(grid.spec)
    lhs = integrate_area(grid, 4.0 * field.values)
    rhs = (4 * data.b + data.beta**2) * eo - (4 * data.a + data.alpha**2) * ei
    return lhs - rhs


def _psi_of_field(params: ModelParams, values, clip_tol: float = 1e-8):
    ua = model_u(params, params.r_i)
    ub = model_u(params, params.r_o)
    lo, hi = min(ua, ub), max(ua, ub)
    scale = max(1.0, abs(lo), abs(hi))
    worst = float(np.max(np.maximum(values - hi, lo - values)))
    if worst > clip_tol * scale:
        raise InconsistentModelError(
            f"field values leave the model value range by {worst:.3e} "
            f"(allowed {clip_tol * scale:.3e})"
        )
    return pseudo_radius(params, np.clip(values, lo, hi))


def gradient_bound_margin(grid: CurvGrid, field: ScalarField, params: ModelParams,
                          clip_tol: float = 1e-8):
    """Worst violation of the gradient bound ``W <= W0(psi)``.

    Returns ``(margin, (x, y))`` where margin = max(W - W0) over interior
    nodes and (x, y) is the node attaining it.  Nonpositive margins mean the
    bound holds on the grid.
    """
    psi = _psi_of_field(params, field.values, clip_tol)
    g = gradient_field(grid, field)
    diff = g.w - model_gradient_sq(params, psi)
    inner = diff[1:-1]
    flat = int(np.argmax(inner))
    i, j = 1 + flat // grid.ntheta, flat % grid.ntheta
    return float(inner.max()), (float(grid.x[i, j]), float(grid.y[i, j]))


def area_bound_check(spec: DomainSpec, params: ModelParams):
    """Boundary-length margins against the model circles.

    Returns ``(inner_margin, outer_margin)`` with
    ``inner_margin = |boundary_inner| - 2 pi r_i`` (nonpositive for genuine
    solutions) and ``outer_margin = |boundary_outer| - 2 pi r_o``
    (nonnegative for genuine solutions); both vanish exactly on the model
    annulus.
    """
    li = boundary_length(spec, "inner")
    lo = boundary_length(spec, "outer")
    return li - 2 * math.pi * params.r_i, lo - 2 * math.pi * params.r_o


@dataclass
class DivergenceIdentityResult:
    residual: float
    interior: float
    inner_term: float
    outer_term: float
    cutoff: float
    excluded_nodes: int
    outer_limit_used: bool


def divergence_identity_residual(grid: CurvGrid, field: ScalarField,
                                 params: ModelParams,
                                 cutoff: float = DEFAULT_TRUNCATION,
                                 clip_tol: float = 1e-8) -> DivergenceIdentityResult:
    """Divergence identity for increasing profiles.

    Checks

        integral( 2 psi^2 (W0 - W) / (M - psi^2)^3 )
            = integral_inner( |grad u| / (M - psi^2) )
            - integral_outer( |grad u| / (M - psi^2) ),

    whose boundary terms both equal 2 pi on the model annulus.  Nodes with
    ``psi`` within ``cutoff * sqrt(M)`` of ``sqrt(M)`` (or inside the hard
    singular cutoff) are excluded from the interior integral and counted.
    When the outer boundary itself is degenerate the outer term is replaced
    by its analytic limit ``integral_outer(1/psi)``.
    """
    if params.case is not ProblemCase.INCREASING:
        raise UnsupportedRegimeError(
            "divergence identity applies to increasing profiles", case=params.case
        )
    M = params.M
    psi = _psi_of_field(params, field.values, clip_tol)
    g = gradient_field(grid, field)
    w0 = model_gradient_sq(params, psi)
    den = M - psi * psi
    eps_sing = SINGULAR_CUTOFF * max(1.0, M)
    keep = den > eps_sing
    if M > 0:
        rt = math.sqrt(M)
        keep &= (rt - psi) > cutoff * rt
    integrand = np.zeros_like(psi)
    np.divide(2 * psi * psi * (w0 - g.w), den**3, out=integrand, where=keep)
    interior = integrate_area(grid, integrand)

    # On a degenerate (zero-slope) boundary the term |grad u|/(M - psi^2)
    # has the analytic limit 1/psi; the direct quotient amplifies trace
    # errors by 1/(M - r^2), so the limit is used throughout the truncation
    # neighbourhood of sqrt(M), not just at the hard singular cutoff.
    rt = math.sqrt(M) if M > 0 else 0.0

    def _boundary_term(row, radius, which):
        degenerate = M > 0 and (rt - radius) <= cutoff * rt
        if degenerate:
            return integrate_boundary(grid, 1.0 / psi[row], which), True
        return (
            integrate_boundary(grid, np.sqrt(g.w[row]) / (M - psi[row] ** 2), which),
            False,
        )

    inner_term, _ = _boundary_term(0, params.r_i, "inner")
    outer_term, outer_limit_used = _boundary_term(-1, params.r_o, "outer")
    return DivergenceIdentityResult(
        residual=float(interior - (inner_term - outer_term)),
        interior=float(interior),
        inner_term=float(inner_term),
        outer_term=float(outer_term),
        cutoff=cutoff,
        excluded_nodes=int(keep.size - np.count_nonzero(keep)),
        outer_limit_used=outer_limit_used,
    )


@dataclass
class RefinedPohozaevResult:
    identity_residual: float
    case1_margin: float
    k: float
    weighted_integral: float
    inner_term: float
    outer_term: float
    cutoff: float
    excluded_nodes: int


def refined_pohozaev_check(grid: CurvGrid, field: ScalarField, params: ModelParams,
                           k: Optional[float] = None,
                           cutoff: float = DEFAULT_TRUNCATION,
                           clip_tol: float = 1e-8) -> RefinedPohozaevResult:
    """Refined integral identity for decreasing profiles.

    With the weight density ``phi_dot`` built from constant ``k`` (defaults
    to :func:`refined_k`), checks

        integral(4u) = integral(phi_dot (W - W0))
                       - alpha phi(r_i) |G_i| - beta phi(r_o) |G_o|,

    where the boundary factors are evaluated in closed form, so the check is
    stable even when the inner boundary is degenerate.  Also reports the
    comparison margin

        integral(phi_dot (W - W0))
            - (M(4a + alpha^2 - 4L - M) + k)/2 * (|G_i|/r_i - |G_o|/r_o),

    which is nonnegative for genuine solutions.  Interior nodes within
    ``cutoff * sqrt(M)`` of the degenerate level are excluded and counted.
    """
    if params.case is not ProblemCase.DECREASING_COVERED:
        raise UnsupportedRegimeError(
            "refined identity applies to covered decreasing profiles", case=params.case
        )
    k_ref = refined_k(params)
    if k is None:
        k = k_ref
    M, ri, ro = params.M, params.r_i, params.r_o
    d = boundary_data_of(params)
    psi = _psi_of_field(params, field.values, clip_tol)
    g = gradient_field(grid, field)
    w0 = model_gradient_sq(params, psi)
    den = M - psi * psi
    eps_sing = SINGULAR_CUTOFF * max(1.0, M)
    keep = np.abs(den) > eps_sing
    if M > 0:
        rt = math.sqrt(M)
        keep &= np.abs(psi - rt) > cutoff * rt
    phidot = np.zeros_like(psi)
    bracket = 4 * M * psi * psi - psi**4 - 4 * M * M * np.log(psi) - k
    np.divide(psi * psi * bracket * (g.w - w0), den**3, out=phidot, where=keep)
    weighted = integrate_area(grid, phidot)

    li = boundary_length(grid.spec, "inner")
    lo = boundary_length(grid.spec, "outer")
    # alpha*phi(r_i) and beta*phi(r_o) in closed form; the slope factor of
    # phi's singular part cancels against the boundary slope, with opposite
    # orientation on the two boundaries (M - r^2 = -alpha*r_i = +beta*r_o).
    k_out = 4 * M * ro * ro - ro**4 - 4 * M * M * math.log(ro)
    inner_term = li * (2 * d.a * d.alpha + (k - k_ref) / (2 * ri))
    outer_term = lo * (2 * d.b * d.beta - (k - k_out) / (2 * ro))

    int4u = integrate_area(grid, 4.0 * field.values)
    residual = int4u - weighted + inner_term + outer_term

    prefactor = 0.5 * (M * (4 * d.a + d.alpha**2 - 4 * params.L - M) + k)
    margin = weighted - prefactor * (li / ri - lo / ro)
    return RefinedPohozaevResult(
        identity_residual=float(residual),
        case1_margin=float(margin),
        k=float(k),
        weighted_integral=float(weighted),
        inner_term=float(inner_term),
        outer_term=float(outer_term),
        cutoff=cutoff,
        excluded_nodes=int(keep.size - np.count_nonzero(keep)),
    )


def boundary_distance(grid: CurvGrid, which: str, rows=None, samples: int = 8192):
    """Distance from grid nodes to one boundary curve.

    ``rows`` selects grid rows (default all).  Distances are measured to a
    dense sample of the curve; the sampling error is quadratic in the sample
    spacing.  Returns an array shaped ``(len(rows), ntheta)``.
    """
    curve = grid.spec.inner if which == "inner" else grid.spec.outer
    rows = np.arange(grid.ns) if rows is None else np.asarray(rows, dtype=int)
    th = np.arange(samples) * (2 * np.pi / samples)
    bx, by = curve.point(th)
    px = grid.x[rows].ravel()
    py = grid.y[rows].ravel()
    out = np.empty(px.size)
    chunk = 256
    for start in range(0, px.size, chunk):
        sl = slice(start, start + chunk)
        d2 = (px[sl, None] - bx[None, :]) ** 2 + (py[sl, None] - by[None, :]) ** 2
        out[sl] = np.sqrt(d2.min(axis=1))
    return out.reshape(rows.size, grid.ntheta)


@dataclass
class ExpansionResult:
    boundary: str
    coefficient: float
    neumann_mean: float
    layer_width: float
    n_nodes: int


def degenerate_expansion_check(grid: CurvGrid, field: ScalarField,
                               detect_tol: float = _DEGENERATE_NEUMANN
                               ) -> Optional[ExpansionResult]:
    """Quadratic expansion coefficient at a degenerate boundary.

    A boundary qualifies when the arc-averaged Neumann trace is below
    ``detect_tol`` in magnitude.  Around the qualifying boundary (the one
    with the smaller mean if both qualify) the model predicts
    ``u = c - dist^2 + o(dist^2)``; the coefficient of ``-dist^2`` is fitted
    by least squares on nodes whose boundary distance lies in [h, 10h], with
    h the first interior layer width.  Returns ``None`` when no boundary
    qualifies.
    """
    cands = []
    for which in ("inner", "outer"):
        tr = neumann_trace(grid, field, which)
        stats = neumann_constancy(tr, grid.arc_weights(which))
        if abs(stats.mean) < detect_tol:
            cands.append((abs(stats.mean), which, stats.mean))
    if not cands:
        return None
    _, which, mean = min(cands)
    ns = grid.ns
    if which == "inner":
        row0, rows = 0, np.arange(1, min(ns - 1, 17))
    else:
        row0, rows = ns - 1, np.arange(max(1, ns - 17), ns - 1)
    w = grid.arc_weights(which)
    c = float(np.sum(field.values[row0] * w) / np.sum(w))
    dist = boundary_distance(grid, which, rows)
    first = dist[0] if which == "inner" else dist[-1]
    h = float(np.median(first))
    sel = (dist >= 0.999 * h) & (dist <= 10.001 * h)
    if not np.any(sel):
        return None
    du = field.values[rows][sel] - c
    d2 = dist[sel] ** 2
    coeff = float(np.sum(du * d2) / np.sum(d2 * d2))
    return ExpansionResult(boundary=which, coefficient=coeff, neumann_mean=mean,
                           layer_width=h, n_nodes=int(np.count_nonzero(sel)))


_REGIME_NOTES = {
    ProblemCase.INCREASING: "covered regime: increasing profile",
    ProblemCase.DECREASING_COVERED:
        "covered regime: decreasing profile within the comparison bound",
    ProblemCase.DECREASING_UNCOVERED:
        "unproven regime: decreasing data outside the covered comparison bound; "
        "checks limited to Neumann statistics and the area balance",
    ProblemCase.INADMISSIBLE:
        "inadmissible boundary data: no monotone profile matches; "
        "checks limited to Neumann statistics and the area balance",
}


@dataclass
class VerificationReport:
    case: str
    ns: int
    ntheta: int
    regime_note: str
    diagnostic_only: bool
    neumann_inner: NeumannStats
    neumann_outer: NeumannStats
    pohozaev_res: float
    model: Optional[ModelParams] = None
    fit_residual: Optional[float] = None
    grad_margin: Optional[float] = None
    grad_margin_at: Optional[tuple] = None
    area_margin_in: Optional[float] = None
    area_margin_out: Optional[float] = None
    divergence: Optional[DivergenceIdentityResult] = None
    refined: Optional[RefinedPohozaevResult] = None
    expansion: Optional[ExpansionResult] = None
    solver: Optional[dict] = None

    def to_dict(self) -> dict:
        """JSON-ready tree; inapplicable checks are omitted, never zeroed."""
        out = {
            "case": self.case,
            "resolution": {"ns": self.ns, "ntheta": self.ntheta},
            "regime_note": self.regime_note,
            "diagnostic_only": self.diagnostic_only,
            "neumann": {
                "inner": vars(self.neumann_inner).copy(),
                "outer": vars(self.neumann_outer).copy(),
            },
            "pohozaev_residual": self.pohozaev_res,
            "tolerances": dict(TOLERANCES),
        }
        if self.model is not None:
            out["model"] = {
                "L": self.model.L, "M": self.model.M,
                "r_i": self.model.r_i, "r_o": self.model.r_o,
            }
            out["fit_residual"] = self.fit_residual
        if self.grad_margin is not None:
            out["gradient_bound"] = {
                "margin": self.grad_margin, "at": list(self.grad_margin_at),
            }
        if self.area_margin_in is not None:
            out["area_margins"] = {
                "inner": self.area_margin_in, "outer": self.area_margin_out,
            }
        if self.divergence is not None:
            out["divergence_identity"] = vars(self.divergence).copy()
        if self.refined is not None:
            out["refined_identity"] = vars(self.refined).copy()
        if self.expansion is not None:
            out["expansion"] = vars(self.expansion).copy()
        if self.solver is not None:
            out["solver"] = dict(self.solver)
        return out

    def csv_row(self, eps: float = 0.0, error: str = "") -> list:
        div_res = self.divergence.residual if self.divergence else None
        ref_res = self.refined.identity_residual if self.refined else None
        margin = self.refined.case1_margin if self.refined else None
        coeff = self.expansion.coefficient if self.expansion else None
        return [
            self.case, str(self.ns), str(self.ntheta), _fmt(eps),
            _fmt(self.neumann_inner.sd), _fmt(self.neumann_outer.sd),
            _fmt(self.pohozaev_res), _fmt(self.grad_margin),
            _fmt(self.area_margin_in), _fmt(self.area_margin_out),
            _fmt(div_res), _fmt(ref_res), _fmt(margin), _fmt(coeff), error,
        ]


@dataclass
class CheckResult:
    name: str
    value: float
    limit: float
    kind: str  # "abs_le", "le" or "ge"
    passed: bool
    gated: bool = True
    waived: bool = False

    def describe(self) -> str:
        op = {"abs_le": "|value| <=", "le": "value <=", "ge": "value >="}[self.kind]
        if self.passed:
            status = "PASS"
        elif self.waived:
            status = "PASS (expected asymmetric)"
        elif not self.gated:
            status = "DIAG"
        else:
            status = "FAIL"
        return f"{self.name:<22} {self.value: .6e}  {op} {self.limit:.1e}  {status}"


def evaluate_checks(report: VerificationReport, expect_asymmetric: bool = False):
    """Apply the gating tolerances to a report.

    Returns ``(checks, ok)``.  Identity checks are only gated when the
    Neumann traces are constant enough for the radial model to be meaningful;
    otherwise they are reported as diagnostic, without gating.
    ``expect_asymmetric`` turns Neumann failures into waived passes.
    """
    checks = []

    def add(name, value, limit, kind, gate=True, waive=False):
        if value is None:
            return
        if kind == "abs_le":
            ok = abs(value) <= limit
        elif kind == "le":
            ok = value <= limit
        else:
            ok = value >= limit
        checks.append(CheckResult(name, float(value), limit, kind,
                                  passed=ok, gated=gate, waived=(not ok) and waive))

    sd_tol = TOLERANCES["neumann_sd"]
    add("neumann_sd_inner", report.neumann_inner.sd, sd_tol, "abs_le",
        waive=expect_asymmetric)
    add("neumann_sd_outer", report.neumann_outer.sd, sd_tol, "abs_le",
        waive=expect_asymmetric)
    gate = not report.diagnostic_only
    add("pohozaev_res", report.pohozaev_res, TOLERANCES["pohozaev"], "abs_le", gate)
    add("grad_margin", report.grad_margin, TOLERANCES["grad_margin"], "le", gate)
    add("area_margin_in", report.area_margin_in, TOLERANCES["area_margin"], "le", gate)
    add("area_margin_out", report.area_margin_out, -TOLERANCES["area_margin"], "ge", gate)
    if report.divergence is not None:
        add("div_identity_res", report.divergence.residual,
            TOLERANCES["div_identity"], "abs_le", gate)
    if report.refined is not None:
        add("refined_identity_res", report.refined.identity_residual,
            TOLERANCES["refined_identity"], "abs_le", gate)
        add("case1_margin", report.refined.case1_margin,
            -TOLERANCES["case1_margin"], "ge", gate)
    if report.expansion is not None:
        add("expansion_coeff", report.expansion.coefficient + 1.0,
            TOLERANCES["expansion"], "abs_le", gate)
    ok = all(c.passed or c.waived or not c.gated for c in checks)
    return checks, ok


def full_report(spec: DomainSpec, data: BoundaryData, ns: int, ntheta: int,
                options: Optional[SolveOptions] = None,
                cutoff: float = DEFAULT_TRUNCATION,
                clip_tol: float = 1e-8) -> VerificationReport:
    """Solve the torsion problem and run every applicable identity check.

    Model-based checks are run for covered regimes only; for unproven or
    inadmissible data the report is limited to Neumann statistics, the area
    balance and the expansion probe, and says so in ``regime_note``.
    """
    case = classify_case(data)
    params = None
    fit_residual = None
    if case in (ProblemCase.INCREASING, ProblemCase.DECREASING_COVERED):
        params = fit_model(data)
        fit_residual = abs(compatibility(data, params.M))
    grid = build_grid(spec, ns, ntheta)
    field, stats = solve_dirichlet(grid, -2.0, data.a, data.b, options)

    n_in = neumann_constancy(neumann_trace(grid, field, "inner"), grid.inner_arc_w)
    n_out = neumann_constancy(neumann_trace(grid, field, "outer"), grid.outer_arc_w)
    diagnostic = (n_in.sd > TOLERANCES["neumann_sd"]
                  or n_out.sd > TOLERANCES["neumann_sd"])
    note = _REGIME_NOTES[case]
    if diagnostic:
        note += ("; Neumann trace is not constant at this resolution, "
                 "model-based checks are diagnostic only")

    report = VerificationReport(
        case=str(case), ns=grid.ns, ntheta=grid.ntheta, regime_note=note,
        diagnostic_only=diagnostic, neumann_inner=n_in, neumann_outer=n_out,
        pohozaev_res=pohozaev_residual(grid, field, data),
        solver={"method": stats.method, "unknowns": stats.unknowns,
                "iterations": stats.iterations, "residual": stats.residual,
                "seconds": stats.seconds},
    )
    if params is not None:
        report.model = params
        report.fit_residual = fit_residual
        report.grad_margin, report.grad_margin_at = gradient_bound_margin(
            grid, field, params, clip_tol
        )
        report.area_margin_in, report.area_margin_out = area_bound_check(spec, params)
        if case is ProblemCase.INCREASING:
            report.divergence = divergence_identity_residual(
                grid, field, params, cutoff, clip_tol
            )
        else:
            report.refined = refined_pohozaev_check(
                grid, field, params, None, cutoff, clip_tol
            )
    report.expansion = degenerate_expansion_check(grid, field)
    return report
