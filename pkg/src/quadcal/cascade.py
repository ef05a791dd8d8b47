"""Fitting cascades: hard test, reduced-hull scan, soft fallback.

Binary fits go hard certificate -> descending reduced-hull cap scan -> soft
sweep below the cap grid; multiclass fits go hard-margin QP -> soft C grid.
Every hard claim is re-verified through the direct polynomial forward pass
(a different computational route from the lifted algebra used to fit), and a
fit is only labelled exact after that recheck passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import KindMismatch, NotHardRegime, SingleClassCalibration
from .evaluator import poly_decisions
from .geom2d import (
    SeparationCertificate,
    directional_margin,
    eta_for_zero_threshold,
    quantization_check,
    separation_certificate,
)
from .lift import BinaryLiftCloud, binary_lift, class_stats, hidden_preacts, pairwise_lifts
from .model_io import CalibrationSet, MlpModel, relu_decisions
from .qpsolvers import mc_hard, mc_soft, rch_closest_point

DEFAULT_MU_GRID = (0.80, 0.60, 0.40, 0.30, 0.20, 0.15, 0.10, 0.08, 0.05, 0.03, 0.02, 0.01)
DEFAULT_C_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class QuadCoeffs:
    """The shared replacement polynomial q(u) = alpha u^2 + beta u + eta."""

    alpha: float
    beta: float
    eta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.eta])


@dataclass(frozen=True)
class CascadeOptions:
    mu_grid: tuple = DEFAULT_MU_GRID
    C_grid: tuple = DEFAULT_C_GRID
    threshold_mode: str = "fixed_zero"  # "fixed_zero" | "free"
    validation_fraction: float = 0.2
    seed: int = 2026
    quantization_step: float | None = None


@dataclass(frozen=True)
class FitReport:
    """Everything a fit run decided, measured, and logged."""

    regime: str  # "hard" | "rch" | "soft"
    regime_param: float | None
    coeffs: QuadCoeffs
    exact: bool
    n_c: int
    pair_count: int | None
    cal_agreement: float
    cal_mismatches: int
    cal_mismatch_indices: np.ndarray
    normalized_margin: float
    threshold_mode: str
    threshold: float
    test_agreement: float | None = None
    test_mismatches: int | None = None
    test_mismatch_indices: np.ndarray | None = None
    slack_count: int | None = None
    slack_sum: float | None = None
    soft_state: dict | None = None  # solver state letting slacks be recounted
    selection_trace: tuple = ()
    quantization: dict | None = None

    @property
    def regime_label(self) -> str:
        if self.regime == "hard":
            return "hard"
        return f"{self.regime}({self.regime_param:g})"

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "regime": self.regime,
            "regime_param": self.regime_param,
            "regime_label": self.regime_label,
            "coeffs": {"alpha": self.coeffs.alpha, "beta": self.coeffs.beta, "eta": self.coeffs.eta},
            "exact": self.exact,
            "n_c": self.n_c,
            "pair_count": self.pair_count,
            "cal_agreement": self.cal_agreement,
            "cal_mismatches": self.cal_mismatches,
            "cal_mismatch_indices": [int(i) for i in self.cal_mismatch_indices],
            "normalized_margin": self.normalized_margin,
            "threshold_mode": self.threshold_mode,
            "threshold": self.threshold,
            "test_agreement": self.test_agreement,
            "test_mismatches": self.test_mismatches,
            "test_mismatch_indices": None
            if self.test_mismatch_indices is None
            else [int(i) for i in self.test_mismatch_indices],
            "slack_count": self.slack_count,
            "slack_sum": self.slack_sum,
            "soft_state": self.soft_state,
            "selection_trace": list(self.selection_trace),
            "quantization": self.quantization,
        }


def stratified_validation_indices(targets: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Deterministic per-class holdout used only for reduced-hull tie-breaks."""
    rng = np.random.default_rng(seed)
    picks = []
    for cls in np.unique(targets):
        idx = np.flatnonzero(targets == cls)
        take = max(1, int(math.ceil(fraction * idx.shape[0])))
        picks.append(rng.permutation(idx)[:take])
    return np.sort(np.concatenate(picks))


def _binary_offset(theta_hat, t_mid: float, cloud: BinaryLiftCloud, mode: str):
    """Coefficients and decision threshold realizing the separated interval.

    fixed_zero recenters scores around zero through the constant coefficient
    (impossible when B = 0, in which case eta stays 0 and the recheck has the
    final word); free mode keeps eta at 0 and moves the threshold instead.
    """
    alpha, beta = float(theta_hat[0]), float(theta_hat[1])
    if mode == "fixed_zero":
        if cloud.weight_sum != 0.0:
            eta = (-t_mid - (1.0 - beta) * cloud.head_bias) / cloud.weight_sum
        else:
            eta = 0.0
        return QuadCoeffs(alpha, beta, eta), 0.0
    return QuadCoeffs(alpha, beta, 0.0), t_mid + (1.0 - beta) * cloud.head_bias


def _binary_agreement(model, coeffs, features, targets, threshold):
    decisions = poly_decisions(model, coeffs, features, threshold)
    mism = np.flatnonzero(decisions != targets)
    return 100.0 * (targets.shape[0] - mism.shape[0]) / targets.shape[0], mism


def _binary_normalized_margin(theta_hat, t_hat: float, cloud: BinaryLiftCloud) -> float:
    """Worst signed decision margin along the unit direction (negative when
    some calibration sample sits on the wrong side of the threshold)."""
    proj = cloud.points @ np.asarray(theta_hat, dtype=np.float64)
    signed = np.where(cloud.labels > 0, proj - t_hat, t_hat - proj)
    return float(signed.min())


def _soft_mu_values(mu_grid, n_plus: int, n_minus: int):
    """The cap grid extended decade by decade below its floor, stopping once
    both per-class caps are pinned at their 1/n feasibility clamps."""
    floor = min(1.0 / n_plus, 1.0 / n_minus)
    values = list(mu_grid)
    pattern = (8.0, 6.0, 4.0, 3.0, 2.0, 1.5, 1.0)
    scale = min(mu_grid) if mu_grid else 0.01
    decade = 10.0 ** math.floor(math.log10(scale) - 1e-12)
    while values[-1] > floor and decade > floor * 1e-4:
        for p in pattern:
            v = p * decade
            if v < values[-1]:
                values.append(v)
                if v <= floor:
                    break
        decade /= 10.0
    return values


def fit_binary(
    model: MlpModel,
    cal: CalibrationSet,
    opts: CascadeOptions = CascadeOptions(),
    test_features: np.ndarray | None = None,
) -> FitReport:
    """Binary cascade: hard certificate, reduced-hull cap scan, soft sweep."""
    if model.kind != "binary":
        raise KindMismatch("fit_binary requires a binary model")
    targets = cal.targets
    preacts = hidden_preacts(model, cal.features)
    cloud = binary_lift(model, preacts, targets)
    s_plus, s_minus = cloud.split()
    if s_plus.shape[0] == 0 or s_minus.shape[0] == 0:
        raise SingleClassCalibration("both binary target classes must be present")
    n_plus, n_minus = s_plus.shape[0], s_minus.shape[0]
    trace = []

    def finish(regime, param, coeffs, threshold, norm_margin, exact, slacks=None, soft_state=None):
        agree, mism = _binary_agreement(model, coeffs, cal.features, targets, threshold)
        test_agree = test_mism = None
        if test_features is not None:
            ref = relu_decisions(model, test_features)
            test_agree, test_mism = _binary_agreement(
                model, coeffs, test_features, ref, threshold
            )
        report = FitReport(
            regime=regime,
            regime_param=param,
            coeffs=coeffs,
            exact=exact,
            n_c=cal.n,
            pair_count=None,
            cal_agreement=agree,
            cal_mismatches=mism.shape[0],
            cal_mismatch_indices=mism,
            normalized_margin=norm_margin,
            threshold_mode=opts.threshold_mode,
            threshold=threshold,
            test_agreement=test_agree,
            test_mismatches=None if test_mism is None else test_mism.shape[0],
            test_mismatch_indices=test_mism,
            slack_count=None if slacks is None else int(np.sum(slacks > 0)),
            slack_sum=None if slacks is None else float(slacks.sum()),
            soft_state=soft_state,
            selection_trace=tuple(trace),
        )
        if opts.quantization_step is not None and regime == "hard":
            cert = separation_certificate(s_plus, s_minus, method="exact")
            report = quantize_and_certify(report, cert, opts.quantization_step, cloud)
        return report

    # (1) hard test through the shared QP back-end
    cert = separation_certificate(s_plus, s_minus, method="qp")
    if cert.feasible:
        if opts.threshold_mode == "fixed_zero" and cloud.weight_sum != 0.0:
            eta = eta_for_zero_threshold(
                cert.theta_star, s_plus, s_minus, cloud.head_bias, cloud.weight_sum
            )
            coeffs = QuadCoeffs(float(cert.theta_star[0]), float(cert.theta_star[1]), eta)
            threshold = 0.0
        else:
            t_mid = float(cert.theta_star @ (cert.u_star + cert.v_star)) / 2.0
            coeffs, threshold = _binary_offset(
                cert.theta_star, t_mid, cloud, opts.threshold_mode
            )
        decisions = poly_decisions(model, coeffs, cal.features, threshold)
        if np.array_equal(decisions, targets):
            trace.append({"stage": "hard", "feasible": True, "margin": cert.margin})
            return finish("hard", None, coeffs, threshold, cert.margin, exact=True)
        trace.append(
            {"stage": "hard", "feasible": True, "margin": cert.margin, "demoted": True}
        )
    else:
        trace.append({"stage": "hard", "feasible": False})

    # (2) reduced-hull cap scan, largest separating cap wins
    val_idx = stratified_validation_indices(targets, opts.validation_fraction, opts.seed)
    candidates = []
    for mu in opts.mu_grid:
        mu_p = max(mu, 1.0 / n_plus)
        mu_m = max(mu, 1.0 / n_minus)
        sol = rch_closest_point(s_plus, s_minus, mu_p, mu_m)
        entry = {
            "stage": "rch",
            "mu": mu,
            "mu_plus": mu_p,
            "mu_minus": mu_m,
            "distance": sol.distance,
            "separating": sol.certified_separating,
        }
        if sol.certified_separating:
            theta_hat = sol.theta / sol.distance
            t_hat = sol.threshold / sol.distance
            coeffs, threshold = _binary_offset(theta_hat, t_hat, cloud, opts.threshold_mode)
            val_dec = poly_decisions(model, coeffs, cal.features[val_idx], threshold)
            val_agree = 100.0 * float(np.mean(val_dec == targets[val_idx]))
            entry["val_agreement"] = val_agree
            candidates.append((mu, val_agree, sol.distance, coeffs, threshold))
        trace.append(entry)
    if candidates:
        mu, _va, dist, coeffs, threshold = max(candidates, key=lambda c: (c[0], c[1], c[2]))
        return finish("rch", mu, coeffs, threshold, dist, exact=False)

    # (3) soft fallback: same P-RCH family swept below the cap grid,
    # selected by calibration agreement, then total slack, then margin
    soft_candidates = []
    for mu in _soft_mu_values(opts.mu_grid, n_plus, n_minus):
        mu_p = max(mu, 1.0 / n_plus)
        mu_m = max(mu, 1.0 / n_minus)
        sol = rch_closest_point(s_plus, s_minus, mu_p, mu_m)
        if sol.certified_separating:
            theta_hat = sol.theta / sol.distance
            t_hat = sol.threshold / sol.distance
        else:  # degenerate contact: no usable direction at this cap
            theta_hat = np.zeros(2)
            t_hat = 0.0
        coeffs, threshold = _binary_offset(theta_hat, t_hat, cloud, opts.threshold_mode)
        agree, _ = _binary_agreement(model, coeffs, cal.features, targets, threshold)
        # support-vector slacks of the cap-mu soft separator
        proj = cloud.points @ sol.theta
        signed = np.where(cloud.labels > 0, proj - sol.threshold, sol.threshold - proj)
        slacks = np.maximum(0.0, sol.rho - signed)
        margin = _binary_normalized_margin(theta_hat, t_hat, cloud)
        trace.append(
            {
                "stage": "soft",
                "mu": mu,
                "distance": sol.distance,
                "cal_agreement": agree,
                "slack_sum": float(slacks.sum()),
                "margin": margin,
            }
        )
        soft_candidates.append(
            (agree, -float(slacks.sum()), margin, mu, coeffs, threshold, slacks,
             {"theta": [float(sol.theta[0]), float(sol.theta[1])],
              "t": float(sol.threshold), "rho": float(sol.rho)})
        )
    agree, _negsum, margin, mu, coeffs, threshold, slacks, state = max(
        soft_candidates, key=lambda c: (c[0], c[1], c[2])
    )
    return finish("soft", mu, coeffs, threshold, margin, exact=False, slacks=slacks,
                  soft_state=state)


def _mc_candidate_stats(model, cal, lifts, sol):
    coeffs = QuadCoeffs(*[float(v) for v in sol.coeffs])
    hom = np.array([coeffs.alpha, coeffs.beta, coeffs.eta, 1.0])
    pair_margins = lifts.margins(hom)
    decisions = poly_decisions(model, coeffs, cal.features)
    mism = np.flatnonzero(decisions != cal.targets)
    agree = 100.0 * (cal.n - mism.shape[0]) / cal.n
    return coeffs, pair_margins, agree, mism


def fit_multiclass(
    model: MlpModel,
    cal: CalibrationSet,
    opts: CascadeOptions = CascadeOptions(),
    test_features: np.ndarray | None = None,
) -> FitReport:
    """Multiclass cascade: hard-margin QP, then the soft C grid."""
    targets = cal.targets
    if np.unique(targets).shape[0] < 2:
        raise SingleClassCalibration("calibration targets cover fewer than two classes")
    stats = class_stats(model, hidden_preacts(model, cal.features))
    lifts = pairwise_lifts(stats, targets)
    trace = []

    def finish(regime, param, coeffs, norm_margin, exact, mism, agree, slacks=None, soft_state=None):
        test_agree = test_mism_idx = None
        if test_features is not None:
            ref = relu_decisions(model, test_features)
            dec = poly_decisions(model, coeffs, test_features)
            test_mism_idx = np.flatnonzero(dec != ref)
            test_agree = 100.0 * (ref.shape[0] - test_mism_idx.shape[0]) / ref.shape[0]
        return FitReport(
            regime=regime,
            regime_param=param,
            coeffs=coeffs,
            exact=exact,
            n_c=cal.n,
            pair_count=lifts.n_rows,
            cal_agreement=agree,
            cal_mismatches=mism.shape[0],
            cal_mismatch_indices=mism,
            normalized_margin=norm_margin,
            threshold_mode=opts.threshold_mode,
            threshold=0.0,
            test_agreement=test_agree,
            test_mismatches=None if test_mism_idx is None else test_mism_idx.shape[0],
            test_mismatch_indices=test_mism_idx,
            slack_count=None if slacks is None else int(np.sum(slacks > 0)),
            slack_sum=None if slacks is None else float(slacks.sum()),
            soft_state=soft_state,
            selection_trace=tuple(trace),
        )

    hard = mc_hard(lifts)
    if hard.status == "feasible":
        coeffs, pair_margins, agree, mism = _mc_candidate_stats(model, cal, lifts, hard)
        if pair_margins.min() > 0.0 and mism.shape[0] == 0:
            trace.append({"stage": "hard", "feasible": True, "worst_margin": hard.worst_margin})
            norm = float(hard.worst_margin / np.linalg.norm(hard.theta_bar))
            return finish("hard", None, coeffs, norm, True, mism, agree)
        trace.append({"stage": "hard", "feasible": True, "demoted": True})
    else:
        trace.append({"stage": "hard", "feasible": False})

    warm = None
    candidates = []
    for c_val in opts.C_grid:
        sol = mc_soft(lifts, c_val, warm_cuts=warm)
        warm = sol.cuts
        coeffs, pair_margins, agree, mism = _mc_candidate_stats(model, cal, lifts, sol)
        worst = float(pair_margins.min())
        norm = float(np.linalg.norm(sol.theta_bar))
        trace.append(
            {
                "stage": "soft",
                "C": c_val,
                "cal_agreement": agree,
                "slack_sum": float(sol.slacks.sum()),
                "slack_count": int(np.sum(sol.slacks > 0)),
                "worst_margin": worst,
                "coeff_norm": norm,
                "objective": sol.objective,
                "gap": sol.gap,
            }
        )
        candidates.append(
            {
                "C": c_val,
                "agree": agree,
                "slack_sum": float(sol.slacks.sum()),
                "worst_margin": worst,
                "norm": norm,
                "coeffs": coeffs,
                "mism": mism,
                "slacks": sol.slacks,
                "theta_bar": sol.theta_bar,
            }
        )
    best = select_soft_candidate(candidates)
    norm_margin = float(best["worst_margin"] / np.linalg.norm(best["theta_bar"]))
    return finish(
        "soft",
        best["C"],
        best["coeffs"],
        norm_margin,
        False,
        best["mism"],
        best["agree"],
        slacks=best["slacks"],
        soft_state={"theta_bar": [float(v) for v in best["theta_bar"]]},
    )


def select_soft_candidate(candidates: list[dict]) -> dict:
    """Documented C-grid selection order: calibration agreement, then smaller
    total slack, then larger worst pairwise margin, then smaller coefficient
    norm; remaining ties keep the earliest grid point."""
    return max(
        candidates,
        key=lambda c: (c["agree"], -c["slack_sum"], c["worst_margin"], -c["norm"]),
    )


def quantize_and_certify(
    report: FitReport,
    cert: SeparationCertificate,
    step: float,
    cloud: BinaryLiftCloud,
    model: MlpModel | None = None,
    features: np.ndarray | None = None,
    targets: np.ndarray | None = None,
) -> FitReport:
    """Round the hard-regime direction to the quantization lattice and attach
    the margin certificate plus an empirical recheck."""
    if report.regime != "hard":
        raise NotHardRegime("quantization applies to hard-regime binary fits")
    if not step > 0.0:
        raise ValueError("quantization step must be positive")
    s_plus, s_minus = cloud.split()
    theta_hat = np.round(cert.theta_star / step) * step
    check = quantization_check(cert, theta_hat)
    emp_margin = directional_margin(theta_hat, s_plus, s_minus)
    if report.threshold_mode == "fixed_zero" and cloud.weight_sum != 0.0:
        eta = eta_for_zero_threshold(theta_hat, s_plus, s_minus, cloud.head_bias, cloud.weight_sum)
        coeffs = QuadCoeffs(float(theta_hat[0]), float(theta_hat[1]), eta)
        threshold = 0.0
    else:
        proj_p = s_plus @ theta_hat
        proj_m = s_minus @ theta_hat
        t_mid = (float(proj_p.min()) + float(proj_m.max())) / 2.0
        coeffs, threshold = _binary_offset(theta_hat, t_mid, cloud, report.threshold_mode)
    preserved = bool(emp_margin > 0.0)
    if model is not None and features is not None and targets is not None:
        decisions = poly_decisions(model, coeffs, features, threshold)
        preserved = bool(np.array_equal(decisions, targets))
    quant = {
        "step": step,
        "theta": [float(theta_hat[0]), float(theta_hat[1])],
        "certified": check.certified,
        "margin_bound": check.margin_bound,
        "empirical_margin": float(emp_margin),
        "decisions_preserved": preserved,
    }
    return replace(
        report,
        coeffs=coeffs,
        threshold=threshold,
        exact=report.exact and preserved,
        quantization=quant,
    )
