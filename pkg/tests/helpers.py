"""Shared builders and independent oracles for the test suite.

The oracles here deliberately re-derive quantities from first principles
(plain loops, exhaustive grids, finite differences) so they stay independent
of the library code paths they check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import xlogy

from pstratum import Dataset, EmpiricalTables, ModelParams, StratumProbabilities


def dataset_from_cells(cells, k_levels=None):
    """Binary dataset from a mapping (z, s, x, y) -> count."""
    z, s, x, y = [], [], [], []
    for (cz, cs, cx, cy), count in cells.items():
        z.extend([cz] * count)
        s.extend([cs] * count)
        x.extend([cx] * count)
        y.extend([cy] * count)
    if k_levels is None:
        k_levels = max(x) + 1
    return Dataset(z=z, x=x, s=s, y=y, k_levels=k_levels)


def arm_cells(x, n_control, r_control, n_treated, r_treated, y_value=1):
    """Cells for one level with given arm sizes and responder counts."""
    return {
        (0, 1, x, y_value): r_control,
        (0, 0, x, y_value): n_control - r_control,
        (1, 1, x, y_value): r_treated,
        (1, 0, x, y_value): n_treated - r_treated,
    }


def random_tiny_dataset(rng, n_max=60, k_levels=3):
    """Small binary dataset where every estimator ingredient is populated.

    Rejection samples until each (arm, level) cell, each control
    non-responder cell, and the treated-responder pool are nonempty.
    """
    while True:
        n = int(rng.integers(30, n_max + 1))
        z = rng.integers(0, 2, size=n)
        x = rng.integers(0, k_levels, size=n)
        s = rng.integers(0, 2, size=n)
        y = rng.integers(0, 2, size=n)
        ok = True
        for lvl in range(k_levels):
            if not np.any((z == 0) & (x == lvl)) or not np.any((z == 1) & (x == lvl)):
                ok = False
                break
            if not np.any((z == 0) & (s == 0) & (x == lvl)):
                ok = False
                break
        if ok and np.any((z == 1) & (s == 1)):
            return Dataset(z=z, x=x, s=s, y=y, k_levels=k_levels)


def tables_from_gl_gr(g_l, g_r, px=None, p11=0.3):
    """Population-style tables with prescribed mixture ingredients."""
    g_l = np.asarray(g_l, dtype=float)
    g_r = np.asarray(g_r, dtype=float)
    k = g_l.shape[0]
    if px is None:
        px = np.full(k, 1.0 / k)
    p11_vec = np.full(k, p11)
    p01 = (1.0 - p11_vec) * g_l
    p00 = 1.0 - p11_vec - p01
    stratum = StratumProbabilities(p00=p00, p01=p01, p11=p11_vec)
    pr_y0 = np.vstack([g_r[:, 1], np.full(k, 0.5)])
    return EmpiricalTables.from_population(
        px=px, stratum=stratum, g_r=g_r, pr_y0_given_s0=pr_y0,
        pr_y1_responders=0.8,
    )


# ---------------------------------------------------------------------------
# independent oracles


def theta_by_transcription(dataset, beta: ModelParams) -> float:
    """Literal per-symbol recomputation of the contrast from raw columns.

    Follows the estimator definitions step by step with plain Python loops:
    pooled treated-responder success, per-level responder-proportion branches,
    the per-level three-factor products, and the ratio of weighted sums.
    """
    z = np.asarray(dataset.z)
    x = np.asarray(dataset.x)
    s = np.asarray(dataset.s)
    y = np.asarray(dataset.y)
    n = len(z)

    treated_resp = (z == 1) & (s == 1)
    term1 = y[treated_resp].sum() / treated_resp.sum()

    num = 0.0
    den = 0.0
    for lvl in range(dataset.k_levels):
        at = x == lvl
        px = at.sum() / n
        n0 = ((z == 0) & at).sum()
        n1 = ((z == 1) & at).sum()
        q0 = ((z == 0) & (s == 1) & at).sum() / n0
        q1 = ((z == 1) & (s == 1) & at).sum() / n1
        if q1 >= q0:
            p_s0_is_1 = q0
            p_s1_is_1 = q1
        else:
            pooled = ((s == 1) & at).sum() / (n0 + n1)
            p_s0_is_1 = pooled
            p_s1_is_1 = pooled
        p_s0_is_0 = 1.0 - p_s0_is_1

        gm_y1 = 1.0 / (1.0 + math.exp(-(beta.beta0 + beta.beta1 + beta.beta2 * lvl)))
        acc = 0.0
        if p_s0_is_1 > 0:
            sel = (z == 0) & (s == 1) & at
            acc += 1.0 * (y[sel].sum() / sel.sum()) * p_s0_is_1
        if p_s0_is_0 > 0:
            sel = (z == 0) & (s == 0) & at
            acc += gm_y1 * (y[sel].sum() / sel.sum()) * p_s0_is_0
        num += px * acc
        den += px * p_s1_is_1
    return term1 - num / den


def stratum_loglik(n00, n01, n10, n11, p00, p11) -> float:
    """Log of the monotone-strata cell likelihood at (p00, p11)."""
    return (xlogy(n00, 1.0 - p11) + xlogy(n01, p11)
            + xlogy(n10, p00) + xlogy(n11, 1.0 - p00))


def grid_max_loglik(n00, n01, n10, n11, step=1e-3) -> float:
    """Exhaustive-grid maximum of the cell likelihood over the simplex."""
    p = np.arange(0.0, 1.0 + step / 2, step)
    p00_grid, p11_grid = np.meshgrid(p, p, indexing="ij")
    ll = (xlogy(n00, 1.0 - p11_grid) + xlogy(n01, p11_grid)
          + xlogy(n10, p00_grid) + xlogy(n11, 1.0 - p00_grid))
    ll[p00_grid + p11_grid > 1.0 + 1e-12] = -np.inf
    return float(ll.max())


def fd_gradient(objective_fn, beta: ModelParams, step=1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of the coefficients."""
    base = beta.as_array()
    out = np.zeros(3)
    for i in range(3):
        delta = np.zeros(3)
        delta[i] = step
        up = objective_fn(ModelParams.from_array(base + delta))
        down = objective_fn(ModelParams.from_array(base - delta))
        out[i] = (up - down) / (2.0 * step)
    return out


def quantile_by_hand(values, q) -> float:
    """Inclusive linear-interpolation quantile on sorted values."""
    v = np.sort(np.asarray(values, dtype=float))
    pos = (v.size - 1) * q
    lo = int(math.floor(pos))
    frac = pos - lo
    if lo + 1 >= v.size:
        return float(v[-1])
    return float(v[lo] * (1.0 - frac) + v[lo + 1] * frac)
