"""Compiled random-walk Metropolis kernel for the six-coefficient model."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def log_posterior(beta, log_a, log_b, counts, loc, scale, df):
    lp = 0.0
    for k in range(6):
        z = (beta[k] - loc[k]) / scale[k]
        lp -= 0.5 * (df[k] + 1.0) * math.log1p(z * z / df[k])
    for i in range(counts.shape[0]):
        eta_u = beta[0] + beta[1] * log_a[i] + beta[2] * log_b[i]
        eta_o = beta[3] + beta[4] * log_a[i] + beta[5] * log_b[i]
        p_u = 1.0 / (1.0 + math.exp(-eta_u))
        p_o = 1.0 / (1.0 + math.exp(-eta_o))
        p_a = 1.0 - p_u - p_o
        # strict interior of the simplex as represented in floating point:
        # p_a rounding to exactly 1 counts as the boundary
        if not (p_u > 0.0 and p_o > 0.0 and p_a > 0.0 and p_a < 1.0 and p_u < 1.0 and p_o < 1.0):
            return -np.inf
        if counts[i, 0] > 0:
            lp += counts[i, 0] * math.log(p_u)
        if counts[i, 1] > 0:
            lp += counts[i, 1] * math.log(p_a)
        if counts[i, 2] > 0:
            lp += counts[i, 2] * math.log(p_o)
    return lp


@njit(cache=True)
def rwm_segment(beta, lp, chol, z, log_u, log_a, log_b, counts, loc, scale, df, out):
    """Run ``len(z)`` Metropolis steps with proposal ``beta + chol @ z[t]``.

    Writes the chain into ``out`` and returns (final beta, final log density,
    number of accepted proposals).
    """
    d = beta.shape[0]
    cur = beta.copy()
    prop = np.empty(d)
    accepted = 0
    for t in range(z.shape[0]):
        for r in range(d):
            s = cur[r]
            for c in range(d):
                s += chol[r, c] * z[t, c]
            prop[r] = s
        lp_prop = log_posterior(prop, log_a, log_b, counts, loc, scale, df)
        if log_u[t] < lp_prop - lp:
            cur[:] = prop
            lp = lp_prop
            accepted += 1
        out[t, :] = cur
    return cur, lp, accepted
