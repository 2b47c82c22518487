"""
Empirical-process terms of the first-order representation

    sqrt(n)(J_n(t) - J(t)) = alpha_{t,n}(g_t) + beta_n(nu_t, t) + o_P(1).
"""

import numpy as np
from scipy import special

from .bundle import TheoremOneBundle

# Gauss-Legendre nodes per empirical quantile cell
CELL_NODES = 4


def alpha_term(bundle: TheoremOneBundle, values) -> float:
    """alpha_{t,n}(g_t) = n^{-1/2} sum (g_t(Y_j) - E g_t(Y_j))."""
    y = np.asarray(values, dtype=float)
    return float(np.sum(bundle.g(y) - bundle.eta) / np.sqrt(y.size))


def beta_term(bundle: TheoremOneBundle, values) -> float:
    """beta_n(nu_t, t) = n^{-1/2} sum (G_{t,n}(Y_j) - G_t(Y_j)) nu_t(Y_j)."""
    y = np.asarray(values, dtype=float)
    n = y.size
    if bundle.degenerate:
        return 0.0
    empirical = np.searchsorted(np.sort(y), y, side="right") / n
    return float(np.sum((empirical - bundle.marginal.cdf(y)) * bundle.nu(y)) / np.sqrt(n))


def quantile_process_term(bundle: TheoremOneBundle, values) -> float:
    """
    beta_n written as an integral of the uniform quantile process:
    sqrt(n) int_0^1 (s - V_n(s)) nu_t(G_t^{-1}(s)) ds, with V_n the empirical
    quantile function of G_t(Y_1), ..., G_t(Y_n).
    """
    if bundle.degenerate:
        return 0.0
    y = np.sort(np.asarray(values, dtype=float))
    n = y.size
    u = bundle.marginal.cdf(y)

    # Cells ((j-1)/n, j/n] beyond p carry nu = 0
    cells = int(min(n, np.ceil(bundle.p * n) + 1))
    nodes, weights = special.roots_legendre(CELL_NODES)
    left = np.arange(cells)[:, None] / n
    s = left + (nodes[None, :] + 1.0) / (2.0 * n)
    w = weights[None, :] / (2.0 * n)

    flat = s.ravel()
    outcomes = bundle.marginal.ppf(flat)
    nu = bundle.terms(flat, outcomes, flat <= bundle.p)["nu"].reshape(s.shape)
    gap = s - u[:cells, None]
    return float(np.sqrt(n) * np.sum(w * gap * nu))
