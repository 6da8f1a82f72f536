"""Assembly of the responder-stratum treatment effect from fitted ingredients.

The target contrast is the difference in outcome-success probability, under
treatment versus under control, among subjects who would respond if treated.
The treated term is directly identified from treatment-arm responders. The
control term mixes, per covariate level, the always-responder path (weight
p11, counterfactual response certain) with the treatment-gained path (weight
p00 + p01, counterfactual response given by the model evaluated at outcome
y=1), normalized by the responder mass per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, ModelParams, SURVIVAL, _frozen
from .empirical import EmpiricalTables
from .errors import StratumNotIdentified, ZeroResponderMass
from .model import FitConfig, FitResult, fit_beta, g_m


@dataclass(frozen=True)
class ThetaBreakdown:
    """Point estimate with its two terms and per-level accumulators."""

    term_treated: float
    term_control: float
    theta_hat: float
    per_x_numerator: np.ndarray
    per_x_denominator: np.ndarray

    def __post_init__(self):
        num = np.asarray(self.per_x_numerator, dtype=float)
        den = np.asarray(self.per_x_denominator, dtype=float)
        if np.any(den < 0):
            raise ValueError("denominator terms must be nonnegative")
        if abs(self.theta_hat - (self.term_treated - self.term_control)) > 1e-12:
            raise ValueError("theta_hat must equal term_treated - term_control")
        object.__setattr__(self, "per_x_numerator", _frozen(num))
        object.__setattr__(self, "per_x_denominator", _frozen(den))


GmFunc = Callable[[int, int], float]


def theta_from_tables(tables: EmpiricalTables, gm: GmFunc, *,
                      model_consistent_s1: bool = False) -> ThetaBreakdown:
    """Evaluate the contrast from prepared tables and a response model.

    ``gm(x, y)`` is the modeled probability that a control non-responder with
    covariate ``x`` and control outcome ``y`` would respond under treatment.
    The per-level responder mass in the denominator defaults to the stratum
    MLE plug-in p01 + p11; with ``model_consistent_s1`` it is instead
    p11 + (p00 + p01) times the model's average response probability, which
    keeps numerator and denominator on the same model.
    """
    term_treated = tables.treated_responder_prob()
    stratum = tables.stratum
    num = np.zeros(tables.k_levels)
    den = np.zeros(tables.k_levels)
    for x in range(tables.k_levels):
        p00, p01, p11 = stratum.at(x)
        weight_nonresp = p00 + p01
        acc = 0.0
        if p11 > 0.0:
            acc += p11 * tables.outcome_prob_control(1, x)
        if weight_nonresp > 0.0:
            acc += gm(x, 1) * tables.outcome_prob_control(0, x) * weight_nonresp
        num[x] = tables.px_hat[x] * acc
        if model_consistent_s1:
            mass = p11
            if weight_nonresp > 0.0:
                g_r = tables.g_r_matrix()[x]
                mass += weight_nonresp * (gm(x, 0) * g_r[0] + gm(x, 1) * g_r[1])
        else:
            mass = p01 + p11
        den[x] = tables.px_hat[x] * mass
    total_den = float(den.sum())
    if total_den <= 0.0:
        raise ZeroResponderMass("estimated responder mass is zero at every level")
    term_control = float(num.sum()) / total_den
    return ThetaBreakdown(
        term_treated=term_treated,
        term_control=term_control,
        theta_hat=term_treated - term_control,
        per_x_numerator=num,
        per_x_denominator=den,
    )


def _gm_from_params(beta: ModelParams) -> GmFunc:
    return lambda x, y: g_m(beta, x, y)


def estimate_theta(dataset: Dataset, beta_hat: ModelParams, *,
                   model_consistent_s1: bool = False) -> ThetaBreakdown:
    """Contrast estimate on a dataset for given model coefficients.

    Survival datasets are evaluated at their declared horizon.
    """
    tables = EmpiricalTables.from_dataset(dataset)
    return theta_from_tables(tables, _gm_from_params(beta_hat),
                             model_consistent_s1=model_consistent_s1)


def estimate_theta_at(dataset: Dataset, beta_hat: ModelParams, t0: float, *,
                      model_consistent_s1: bool = False) -> ThetaBreakdown:
    """Contrast estimate at horizon ``t0`` for a survival dataset."""
    if dataset.outcome_kind != SURVIVAL:
        raise ValueError("estimate_theta_at requires survival outcomes")
    tables = EmpiricalTables.from_dataset(dataset, t0=t0)
    return theta_from_tables(tables, _gm_from_params(beta_hat),
                             model_consistent_s1=model_consistent_s1)


def estimate_theta_always_responders(dataset: Dataset) -> ThetaBreakdown:
    """Contrast restricted to the always-responder stratum.

    Only identified when the estimated treatment-gained mass is zero at every
    level, so that treatment-arm responders and would-be responders coincide;
    otherwise :class:`StratumNotIdentified` is raised. No response model is
    involved.
    """
    tables = EmpiricalTables.from_dataset(dataset)
    stratum = tables.stratum
    if np.any(stratum.p01 > 0.0):
        raise StratumNotIdentified(
            "treatment-gained stratum has positive estimated mass; the "
            "always-responder contrast is not identified"
        )
    term_treated = tables.treated_responder_prob()
    num = np.zeros(tables.k_levels)
    den = np.zeros(tables.k_levels)
    for x in range(tables.k_levels):
        p11 = stratum.p11[x]
        if p11 > 0.0:
            num[x] = tables.px_hat[x] * p11 * tables.outcome_prob_control(1, x)
        den[x] = tables.px_hat[x] * p11
    total = float(den.sum())
    if total <= 0.0:
        raise ZeroResponderMass("no always-responder mass at any level")
    term_control = float(num.sum()) / total
    return ThetaBreakdown(
        term_treated=term_treated,
        term_control=term_control,
        theta_hat=term_treated - term_control,
        per_x_numerator=num,
        per_x_denominator=den,
    )


def fit_and_estimate(dataset: Dataset, fit_config: FitConfig | None = None, *,
                     t0: float | None = None,
                     model_consistent_s1: bool = False
                     ) -> tuple[ThetaBreakdown, FitResult, EmpiricalTables]:
    """Full pipeline: empirical tables, coefficient fit, contrast assembly."""
    tables = EmpiricalTables.from_dataset(dataset, t0=t0)
    fit = fit_beta(tables, fit_config)
    breakdown = theta_from_tables(tables, _gm_from_params(fit.beta_hat),
                                  model_consistent_s1=model_consistent_s1)
    return breakdown, fit, tables
