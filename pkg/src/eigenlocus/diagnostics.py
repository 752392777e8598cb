"""Audits of a trained model: KKT residuals, equilibrium and eigenenergy identities,
pointwise covariance statistics, eigenspectrum and Rayleigh reports.

Identities that hold only at the exact optimum are checked as residuals
against a tolerance scaled by ``max(1, |tau|^2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .geometry import gram_matrix
from .model import EigenlocusModel, margin_geometry, model_from_dual
from .solver import DualProblem, SolverOptions, solve_dual

REPORT_VERSION = 1
KKT_AUDIT_TOL = 1e-6
IDENTITY_REL_TOL = 1e-5
RANK_REL_TOL = 1e-10
SPECTRUM_MAX_N = 5000


def _check_pair(model: EigenlocusModel, data: LabeledDataset) -> None:
    if data.d != model.d or data.n != model.n:
        raise ValueError(
            f"model was trained on N={model.n}, d={model.d} but data has N={data.n}, d={data.d}")


# --- KKT audit ---------------------------------------------------------------

@dataclass(frozen=True)
class KKTReport:
    stationarity: float  # KKTE1: |tau - sum psi_i y_i x_i|_inf
    equality: float  # KKTE2: |sum psi_i y_i|
    slack_balance: float  # KKTE3: |C sum xi_i - sum psi_i|
    feasibility: float  # KKTE4: max(0, 1 - xi_i - y_i D(x_i))
    sign: float  # KKTE5: max(0, -min psi_i)
    complementarity: float  # KKTE6: max |psi_i (y_i D(x_i) - 1 + xi_i)|
    tol: float

    def residuals(self) -> dict[str, float]:
        return {
            "KKTE1 stationarity": self.stationarity,
            "KKTE2 equality": self.equality,
            "KKTE3 slack balance": self.slack_balance,
            "KKTE4 feasibility": self.feasibility,
            "KKTE5 sign": self.sign,
            "KKTE6 complementarity": self.complementarity,
        }

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.residuals().items() if not v <= self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures


def kkt_audit(model: EigenlocusModel, data: LabeledDataset, tol: float = KKT_AUDIT_TOL) -> KKTReport:
    _check_pair(model, data)
    psi, y, xi = model.psi, data.y, model.xi
    tau_rebuilt = (psi * y) @ data.X
    margins = y * model.decision_function(data.X)
    r = margins - 1.0 + xi
    # xi = eps*psi, so C*sum(xi) uses the penalty 1/eps actually applied
    penalty = 1.0 / model.eps if model.eps > 0 else math.inf
    slack = abs(penalty * xi.sum() - psi.sum()) if math.isfinite(penalty) else (0.0 if not xi.any() else math.inf)
    return KKTReport(
        stationarity=float(np.max(np.abs(model.tau - tau_rebuilt))),
        equality=abs(float(psi @ y)),
        slack_balance=float(slack),
        feasibility=float(np.max(np.maximum(0.0, -r))),
        sign=float(max(0.0, -psi.min())),
        complementarity=float(np.max(np.abs(psi * r))),
        tol=tol,
    )


# --- equilibrium and eigenenergy -------------------------------------------

@dataclass(frozen=True)
class EquilibriumReport:
    sum1: float
    sum2: float

    @property
    def residual(self) -> float:
        return abs(self.sum1 - self.sum2)


def equilibrium_check(model: EigenlocusModel) -> EquilibriumReport:
    pos = np.zeros(model.n, dtype=bool)
    pos[model.class1_extremes] = True
    return EquilibriumReport(float(model.psi[pos].sum()), float(model.psi[~pos].sum()))


@dataclass(frozen=True)
class EigenenergyLedger:
    tau_norm_sq: float
    sum_psi_weighted: float  # sum psi_i (1 - xi_i)
    E_tau1: float
    E_tau2: float
    class1_rhs: float  # sum_1 psi_i (1 - xi_i - tau0)
    class2_rhs: float  # sum_2 psi_i (1 - xi_i + tau0)
    nabla_eq: float
    fulcrum: float
    tol: float

    def residuals(self) -> dict[str, float]:
        left = self.E_tau1 + self.nabla_eq
        right = self.E_tau2 - self.nabla_eq
        return {
            "(a) total eigenenergy": abs(self.tau_norm_sq - self.sum_psi_weighted),
            "(b) class one component": abs(self.E_tau1 - self.class1_rhs),
            "(c) class two component": abs(self.E_tau2 - self.class2_rhs),
            "(d) law of cosines": abs(self.E_tau1 + self.E_tau2 - self.tau_norm_sq),
            "(e) equilibrium about fulcrum": max(abs(left - right), abs(left - self.fulcrum),
                                                 abs(right - self.fulcrum)),
        }

    @property
    def bound(self) -> float:
        return self.tol * max(1.0, self.tau_norm_sq)

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.residuals().items() if not v <= self.bound]

    @property
    def passed(self) -> bool:
        return not self.failures


def eigenenergy_ledger(model: EigenlocusModel, tol: float = IDENTITY_REL_TOL) -> EigenenergyLedger:
    psi, xi, t0 = model.psi, model.xi, model.tau0
    pos = np.zeros(model.n, dtype=bool)
    pos[model.class1_extremes] = True
    neg = np.zeros(model.n, dtype=bool)
    neg[model.class2_extremes] = True
    t1, t2 = model.tau1, model.tau2
    w = psi * (1.0 - xi)
    return EigenenergyLedger(
        tau_norm_sq=float(model.tau @ model.tau),
        sum_psi_weighted=float(w.sum()),
        E_tau1=float(t1 @ t1 - t1 @ t2),
        E_tau2=float(t2 @ t2 - t2 @ t1),
        class1_rhs=float(psi[pos] @ (1.0 - xi[pos] - t0)),
        class2_rhs=float(psi[neg] @ (1.0 - xi[neg] + t0)),
        nabla_eq=0.5 * t0 * float(psi.sum()),
        fulcrum=0.5 * float(w.sum()),
        tol=tol,
    )


# --- pointwise covariance --------------------------------------------------

@dataclass(frozen=True)
class PointwiseCovReport:
    index: np.ndarray
    label: np.ndarray
    cov_up: np.ndarray  # x_i' sum_j x_j
    cov_up_labeled: np.ndarray  # x_i' (sum_own x_j - sum_other x_j)
    cov_up_eigenbalanced: np.ndarray | None  # x_i' (sum_own psi_j x_j - sum_other psi_j x_j)
    is_extreme: np.ndarray | None


def pointwise_covariance(data: LabeledDataset, psi=None) -> PointwiseCovReport:
    X, y = data.X, data.y
    total = X.sum(axis=0)
    signed = (y[:, None] * X).sum(axis=0)  # sum_class1 - sum_class2
    cov = X @ total
    labeled = y * (X @ signed)
    eb = ext = None
    if psi is not None:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (data.n,):
            raise ValueError(f"psi must have length {data.n}")
        tau = (psi * y) @ X
        eb = y * (X @ tau)
        ext = psi > 0
    return PointwiseCovReport(np.arange(data.n), y.copy(), cov, labeled, eb, ext)


@dataclass(frozen=True)
class ExtremeRankCheck:
    n_top: int
    n_above_median: int
    threshold: float = 0.90

    @property
    def fraction(self) -> float:
        return self.n_above_median / self.n_top if self.n_top else math.nan

    @property
    def passed(self) -> bool:
        return self.n_top > 0 and self.fraction >= self.threshold


def extreme_rank_check(data: LabeledDataset, psi, threshold: float = 0.90) -> ExtremeRankCheck:
    """Share of the top-decile-psi points whose labeled cov_up exceeds their class median."""
    psi = np.asarray(psi, dtype=float)
    rep = pointwise_covariance(data, psi)
    k = max(1, int(math.ceil(0.1 * data.n)))
    top = np.argsort(-psi, kind="stable")[:k]
    med = {lab: float(np.median(rep.cov_up_labeled[data.y == lab])) for lab in (1.0, -1.0)}
    above = sum(rep.cov_up_labeled[i] > med[data.y[i]] for i in top)
    return ExtremeRankCheck(k, int(above), threshold)


# --- spectra ----------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray  # descending
    rank_estimate: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])


def spectrum_report(Q, max_n: int = SPECTRUM_MAX_N, rank_tol: float = RANK_REL_TOL) -> SpectrumReport:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
        raise ValueError(f"Q must be a nonempty square matrix, got shape {Q.shape}")
    if Q.shape[0] > max_n:
        raise ValueError(f"N={Q.shape[0]} exceeds the spectrum size cap {max_n}")
    if np.max(np.abs(Q - Q.T)) > 1e-10 * max(1.0, float(np.max(np.abs(Q)))):
        raise ValueError("Q is not symmetric")
    ev = np.linalg.eigvalsh(Q)[::-1].copy()
    lmax = float(ev[0])
    rank = int(np.count_nonzero(ev > rank_tol * lmax)) if lmax > 0 else 0
    return SpectrumReport(ev, rank)


@dataclass(frozen=True)
class RayleighReport:
    quotient: float
    eigen_residual_norm: float


def rayleigh_report(Q, psi) -> RayleighReport:
    Q = np.asarray(Q, dtype=float)
    psi = np.asarray(psi, dtype=float)
    nn = float(psi @ psi)
    if nn == 0.0:
        raise ValueError("psi is zero: the Rayleigh quotient is undefined")
    Qp = Q @ psi
    q = float(psi @ Qp) / nn
    return RayleighReport(q, float(np.linalg.norm(Qp - q * psi)) / math.sqrt(nn))


@dataclass(frozen=True)
class ComponentEigenlocusReport:
    """Both sides of the principal-eigenvector reading of psi, reported only.

    ``predicted_i = y_i x_i'tau / lambda_max`` is compared against ``psi_i``
    on the extreme points.  The relation that does hold at the optimum,
    ``(Q psi)_i = 1 - y_i tau0``, is reported alongside.
    """

    lambda_max: float
    max_abs_discrepancy: float
    rel_discrepancy: float  # |psi - predicted| / |psi| over extremes
    optimum_relation_residual: float
    class1_sq_length_sum: float  # sum over class one of |psi_i x_i|^2
    class2_sq_length_sum: float


def component_eigenlocus_report(model: EigenlocusModel, data: LabeledDataset,
                                Q=None) -> ComponentEigenlocusReport:
    _check_pair(model, data)
    if Q is None:
        Q = gram_matrix(data.X, data.y, model.eps)
    lmax = float(np.linalg.eigvalsh(Q)[-1])
    idx = model.extreme_idx
    psi = model.psi
    pred = data.y[idx] * (data.X[idx] @ model.tau) / lmax
    diff = psi[idx] - pred
    relation = (Q @ psi)[idx] - (1.0 - data.y[idx] * model.tau0)
    sq = psi**2 * np.einsum("ij,ij->i", data.X, data.X)
    return ComponentEigenlocusReport(
        lambda_max=lmax,
        max_abs_discrepancy=float(np.max(np.abs(diff), initial=0.0)),
        rel_discrepancy=float(np.linalg.norm(diff) / max(np.linalg.norm(psi[idx]), 1e-300)),
        optimum_relation_residual=float(np.max(np.abs(relation), initial=0.0)),
        class1_sq_length_sum=float(sq[data.y > 0].sum()),
        class2_sq_length_sum=float(sq[data.y < 0].sum()),
    )


def directional_symmetry(model: EigenlocusModel, data: LabeledDataset) -> float:
    """Largest ``1 - cos(psi_i x_i, x_i)`` over points with psi_i > 0 and x_i != 0."""
    _check_pair(model, data)
    worst = 0.0
    for i in np.flatnonzero(model.psi > 0):
        x = data.X[i]
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            continue
        comp = model.psi[i] * x
        cos = float(comp @ x) / (float(np.linalg.norm(comp)) * nx)
        worst = max(worst, 1.0 - cos)
    return worst


def sv_fraction(model: EigenlocusModel) -> float:
    return model.sv_fraction


# --- weak dual ---------------------------------------------------------------

@dataclass(frozen=True)
class WeakDualSide:
    eps: float
    sv_fraction: float
    test_error: float | None
    rank: int
    converged: bool
    kkt_passed: bool


@dataclass(frozen=True)
class WeakDualReport:
    regularized: WeakDualSide
    unregularized: WeakDualSide
    well_posed: bool  # bare Gram matrix already has full rank
    note: str

    @property
    def sv_fraction_gap(self) -> float:
        return self.regularized.sv_fraction - self.unregularized.sv_fraction


def _side(data, psi, C, eps, sol, test, rank):
    model = model_from_dual(data, psi, C, eps, sol)
    err = None
    if test is not None:
        err = float(np.mean(model.predict(test.X) != test.y))
    return WeakDualSide(eps, model.sv_fraction, err, rank, sol.converged,
                        kkt_audit(model, data).passed)


def weak_dual_experiment(data: LabeledDataset, C: float = 1.0,
                         test: LabeledDataset | None = None,
                         opts: SolverOptions | None = None,
                         unregularized_budget: int | None = None) -> WeakDualReport:
    """Fit once with ``eps = 1/C`` and once with the bare Gram matrix (``eps = 0``).

    With ``N > d`` the bare matrix has rank at most ``d`` and the dual has no
    unique maximiser; that run is stopped after ``unregularized_budget``
    iterations (default ``10*N``) and reported as-is.
    """
    reg = DualProblem.from_data(data.X, data.y, C)
    bare = DualProblem.unregularized(data.X, data.y)
    rank_reg = spectrum_report(reg.Q).rank_estimate
    rank_bare = spectrum_report(bare.Q).rank_estimate
    well_posed = rank_bare == data.n

    sol_reg = solve_dual(reg, opts)
    budget = unregularized_budget if unregularized_budget is not None else 10 * data.n
    base = opts or SolverOptions()
    bare_opts = SolverOptions(gap_tol=base.gap_tol, kkt_tol=base.kkt_tol,
                              max_iter=budget if not well_posed else base.max_iter,
                              equality_tol=base.equality_tol, check_every=base.check_every)
    sol_bare = solve_dual(bare, bare_opts, allow_singular=True, warn=well_posed)

    note = ("well-posed: the Gram matrix has full rank without regularization"
            if well_posed else
            f"rank-deficient Gram matrix (rank {rank_bare} < N={data.n}); the unregularized dual is not strictly concave")
    return WeakDualReport(
        regularized=_side(data, sol_reg.psi, C, reg.eps, sol_reg, test, rank_reg),
        unregularized=_side(data, sol_bare.psi, math.inf, 0.0, sol_bare, test, rank_bare),
        well_posed=well_posed,
        note=note,
    )


# --- full report -----------------------------------------------------------

@dataclass
class DiagnosticsReport:
    kkt: KKTReport
    equilibrium: EquilibriumReport
    eigenenergy: EigenenergyLedger
    spectrum: SpectrumReport | None
    rayleigh: RayleighReport | None
    components: ComponentEigenlocusReport | None
    full_width: float | None
    half_width: float | None
    sv_fraction: float
    directional_symmetry: float
    converged: bool
    equality_tol: float
    extras: dict = field(default_factory=dict)

    def checks(self) -> dict[str, tuple[float, float, bool]]:
        """Asserted checks as ``name -> (residual, bound, passed)``."""
        out = {}
        for k, v in self.kkt.residuals().items():
            out[k] = (v, self.kkt.tol, v <= self.kkt.tol)
        eq = self.equilibrium.residual
        out["equilibrium"] = (eq, self.equality_tol, eq <= self.equality_tol)
        b = self.eigenenergy.bound
        for k, v in self.eigenenergy.residuals().items():
            out[k] = (v, b, v <= b)
        return out

    @property
    def failures(self) -> list[str]:
        return [k for k, (_, _, ok) in self.checks().items() if not ok]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_document(self) -> dict:
        def conv(obj):
            if obj is None:
                return None
            d = asdict(obj)
            return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}

        return {
            "version": REPORT_VERSION,
            "passed": self.passed,
            "failures": self.failures,
            "converged": self.converged,
            "checks": {k: {"residual": r, "bound": b, "passed": ok}
                       for k, (r, b, ok) in self.checks().items()},
            "kkt": conv(self.kkt),
            "equilibrium": {**conv(self.equilibrium), "residual": self.equilibrium.residual},
            "eigenenergy": conv(self.eigenenergy),
            "widths": {"full_width": self.full_width, "half_width": self.half_width},
            "spectrum": None if self.spectrum is None else {
                "eigenvalues": self.spectrum.eigenvalues.tolist(),
                "lambda_max": self.spectrum.lambda_max,
                "rank_estimate": self.spectrum.rank_estimate,
            },
            "rayleigh": conv(self.rayleigh),
            "component_eigenlocus": conv(self.components),
            "sv_fraction": self.sv_fraction,
            "directional_symmetry": self.directional_symmetry,
            **self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=1)

    def table(self) -> str:
        rows = [f"{'check':<32} {'residual':>12} {'bound':>12}  status"]
        for k, (r, b, ok) in self.checks().items():
            rows.append(f"{k:<32} {r:12.3e} {b:12.3e}  {'PASS' if ok else 'FAIL'}")
        rows.append("")
        rows.append(f"sv_fraction                      {self.sv_fraction:.4f}")
        if self.full_width is not None:
            rows.append(f"full_width                       {self.full_width:.6g}")
        if self.spectrum is not None:
            rows.append(f"lambda_max                       {self.spectrum.lambda_max:.6g}")
            rows.append(f"rank_estimate                    {self.spectrum.rank_estimate}")
        if self.rayleigh is not None:
            rows.append(f"rayleigh quotient                {self.rayleigh.quotient:.6g}")
            rows.append(f"rayleigh residual                {self.rayleigh.eigen_residual_norm:.6g}")
        if self.components is not None:
            rows.append(f"component eigenlocus rel. gap    {self.components.rel_discrepancy:.6g}")
        rows.append(f"overall                          {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(rows)


def diagnose(model: EigenlocusModel, data: LabeledDataset, tol: float = KKT_AUDIT_TOL,
             identity_tol: float = IDENTITY_REL_TOL, spectrum: bool = True) -> DiagnosticsReport:
    _check_pair(model, data)
    Q = gram_matrix(data.X, data.y, model.eps)
    spec = ray = comp = None
    if spectrum and data.n <= SPECTRUM_MAX_N:
        spec = spectrum_report(Q)
        comp = component_eigenlocus_report(model, data, Q)
    if model.psi.any():
        ray = rayleigh_report(Q, model.psi)
    fw = hw = None
    if model.tau_norm > 0:
        g = margin_geometry(model)
        fw, hw = g.full_width, g.half_width
    return DiagnosticsReport(
        kkt=kkt_audit(model, data, tol),
        equilibrium=equilibrium_check(model),
        eigenenergy=eigenenergy_ledger(model, identity_tol),
        spectrum=spec,
        rayleigh=ray,
        components=comp,
        full_width=fw,
        half_width=hw,
        sv_fraction=model.sv_fraction,
        directional_symmetry=directional_symmetry(model, data),
        converged=model.converged,
        equality_tol=SolverOptions().resolved_equality_tol(data.n),
    )
