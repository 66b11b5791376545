"""Linear quantile regression by exact linear programming."""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..errors import DomainError, NumericalError


def pinball_loss(residual, tau, weights=None):
    """Sum of ``r (tau - 1[r < 0])``."""
    r = np.asarray(residual, dtype=float)
    loss = r * (tau - (r < 0))
    return float(loss.sum() if weights is None else np.asarray(weights) @ loss)


def _polish(X, y, tau, w, beta):
    # An LP optimum sits at a vertex that interpolates p observations. Refit
    # that vertex exactly from the p smallest residuals and keep whichever is
    # better, which removes the solver's feasibility tolerance.
    n, p = X.shape
    order = np.argsort(np.abs(y - X @ beta))
    best = beta
    best_obj = pinball_loss(y - X @ beta, tau, w)
    rows = []
    for i in order:
        trial = rows + [i]
        if np.linalg.matrix_rank(X[trial]) == len(trial):
            rows = trial
        if len(rows) == p:
            break
    if len(rows) == p:
        cand = np.linalg.solve(X[rows], y[rows])
        obj = pinball_loss(y - X @ cand, tau, w)
        if obj <= best_obj:
            best, best_obj = cand, obj
    return best


def quantile_regression(design, response, tau, weights=None):
    """Coefficients minimizing the (weighted) pinball loss at level ``tau``."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if not 0.0 < tau < 1.0:
        raise DomainError("tau must lie in (0, 1)")
    if y.shape != (n,):
        raise DomainError("response length must match design rows")
    if n <= p:
        raise DomainError(f"need more observations ({n}) than columns ({p})")
    if np.linalg.matrix_rank(X) < p:
        raise DomainError("quantile regression design is rank deficient")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    # variables: beta (free), positive part, negative part of residuals
    c = np.concatenate([np.zeros(p), tau * w, (1.0 - tau) * w])
    eye = sparse.identity(n, format="csr")
    A_eq = sparse.hstack([sparse.csr_matrix(X), eye, -eye], format="csr")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericalError(f"quantile regression LP failed: {res.message}")
    return _polish(X, y, tau, w, res.x[:p])
