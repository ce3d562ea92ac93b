"""Spectral-perturbation radii and the (shifted) Gram matrices they act on.

A ball ||e|| <= eps around an estimated channel hbar induces a Frobenius ball
of radius eps^2 + 2 eps ||hbar|| around the Gram hbar hbar^H; the surrogate
constraints replace that matrix ball with a scalar shift +/- xi*I.  The shift
is conservative (||.||_2 <= ||.||_F) and the minus-shifted Grams may be
indefinite because the unshifted Grams are rank-deficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelSet


@dataclass(frozen=True)
class RobustBounds:
    """Frobenius bounds on the Gram-matrix perturbations, per receiver."""

    xi_cr: np.ndarray        # K: transmitter->CR Gram
    xi_cr_jam: np.ndarray    # K: jammer->CR Gram
    alpha_er: np.ndarray     # L: transmitter->ER Gram
    alpha_er_jam: np.ndarray  # L: jammer->ER Gram


def compute_robust_bounds(ch: ChannelSet) -> RobustBounds:
    """Closed-form radii: eps^2 + 2*eps*||estimate|| per channel group."""
    xi_cr = np.array([e * e + 2.0 * e * np.linalg.norm(h)
                      for e, h in zip(ch.eps_cr, ch.h_cr)])
    xi_cr_jam = np.array([e * e + 2.0 * e * np.linalg.norm(g)
                          for e, g in zip(ch.eps_cr_jam, ch.g_cr)])
    alpha_er = np.array([t * t + 2.0 * t * np.linalg.norm(H, "fro")
                         for t, H in zip(ch.theta_er, ch.H_er)])
    alpha_er_jam = np.array([t * t + 2.0 * t * np.linalg.norm(G, "fro")
                             for t, G in zip(ch.theta_er_jam, ch.G_er)])
    return RobustBounds(xi_cr=xi_cr, xi_cr_jam=xi_cr_jam,
                        alpha_er=alpha_er, alpha_er_jam=alpha_er_jam)


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _gram_vec(v: np.ndarray) -> np.ndarray:
    return _hermitize(np.outer(v, v.conj()))


def _gram_mat(m: np.ndarray) -> np.ndarray:
    return _hermitize(m @ m.conj().T)


@dataclass(frozen=True)
class GramSet:
    """Outer-product Grams of the estimated channels plus their scalar-shifted
    variants used by the surrogate constraints.

    ``*_minus`` entries subtract the perturbation radius times identity (the
    worst-case lower-bound direction), ``*_plus`` add it (upper bound).
    """

    cr: list          # K (NT,NT): h h^H
    cr_jam: list      # K (NJ,NJ): g g^H
    er: list          # L (NT,NT): H H^H
    er_jam: list      # L (NJ,NJ): G G^H
    cr_minus: list
    cr_plus: list
    cr_jam_plus: list
    er_minus: list
    er_plus: list
    er_jam_minus: list
    er_jam_plus: list


def build_gram_set(ch: ChannelSet, rb: RobustBounds) -> GramSet:
    dims = ch.dims
    I_t = np.eye(dims.NT)
    I_j = np.eye(dims.NJ)
    cr = [_gram_vec(h) for h in ch.h_cr]
    cr_jam = [_gram_vec(g) for g in ch.g_cr]
    er = [_gram_mat(H) for H in ch.H_er]
    er_jam = [_gram_mat(G) for G in ch.G_er]
    return GramSet(
        cr=cr, cr_jam=cr_jam, er=er, er_jam=er_jam,
        cr_minus=[cr[k] - rb.xi_cr[k] * I_t for k in range(dims.K)],
        cr_plus=[cr[k] + rb.xi_cr[k] * I_t for k in range(dims.K)],
        cr_jam_plus=[cr_jam[k] + rb.xi_cr_jam[k] * I_j for k in range(dims.K)],
        er_minus=[er[l] - rb.alpha_er[l] * I_t for l in range(dims.L)],
        er_plus=[er[l] + rb.alpha_er[l] * I_t for l in range(dims.L)],
        er_jam_minus=[er_jam[l] - rb.alpha_er_jam[l] * I_j for l in range(dims.L)],
        er_jam_plus=[er_jam[l] + rb.alpha_er_jam[l] * I_j for l in range(dims.L)],
    )


def gram_perturbation(estimate: np.ndarray, error: np.ndarray) -> np.ndarray:
    """Exact Gram perturbation induced by a channel error:
    (hbar+e)(hbar+e)^H - hbar hbar^H for vectors, analogously for matrices."""
    est = np.atleast_2d(estimate.T).T if estimate.ndim == 1 else estimate
    err = np.atleast_2d(error.T).T if error.ndim == 1 else error
    return est @ err.conj().T + err @ est.conj().T + err @ err.conj().T
