"""Structure-matrix diagnostics: Gram matrices of per-output gradients,
their extreme eigenvalues, gradient energy, and the bound sandwich.

For a network with per-output parameter-gradient rows J (output_dim x m)
the structure matrix is the Gram matrix A = J J^T.  With e the
logit-space loss gradient, the parameter-gradient energy satisfies
||J^T e||^2 = e^T A e exactly, which sandwiches the squared distribution
fitting error ||one_hot(y) - prediction||^2 between

    ||g||^2 / lambda_max(A)   and   ||g||^2 / lambda_min(A),

valid whenever lambda_min is bounded away from zero.  Rank-deficient
matrices are rejected rather than clamped: silently flooring the
eigenvalue would fabricate bound data.

Eigenvalues come from a cyclic Jacobi rotation solver: exact for the
symmetric matrices at hand, dependency-free, and convergent to machine
precision in a handful of sweeps at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError, NumericalError, RankDeficiencyError
from .generators import Generator, one_hot

#: Smallest eigenvalue treated as numerically nonzero in bound sandwiches.
RANK_TOL = 1e-10
#: Window variance below which a Pearson coefficient is undefined.
PEARSON_VAR_FLOOR = 1e-18


def structure_matrix(jac) -> np.ndarray:
    """Gram matrix J J^T of the Jacobian's rows (output_dim x output_dim)."""
    j = np.asarray(jac, dtype=float)
    if j.ndim != 2:
        raise InputError("jacobian must be a 2-d matrix")
    return j @ j.T


def jacobi_eigh(sym, tol: float = 1e-12, max_sweeps: int = 100):
    """Full symmetric eigendecomposition by cyclic Jacobi rotations.

    Sweeps rotate away every off-diagonal pair until the off-diagonal
    Frobenius norm drops below ``tol`` relative to the matrix norm, or
    ``max_sweeps`` is exhausted (-> NumericalError carrying the
    residual).  Returns (eigenvalues ascending, eigenvector columns).
    """
    a = np.asarray(sym, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, float(np.abs(a).max()))):
        raise InputError("matrix must be symmetric")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if scale == 0.0 or n == 1:
        w = np.diag(a).copy()
        order = np.argsort(w)
        return w[order], v[:, order]

    def offdiag(m):
        return float(np.sqrt(np.sum(np.tril(m, -1) ** 2) * 2.0))

    residual = offdiag(a)
    for _sweep in range(int(max_sweeps)):
        if residual <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # stable rotation angle (Rutishauser form)
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
        residual = offdiag(a)
    else:
        if residual > tol * scale:
            raise NumericalError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps",
                residual=residual,
            )
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def sym_eigs_extreme(sym, tol: float = 1e-12, max_sweeps: int = 100):
    """(lambda_min, lambda_max) of a symmetric matrix via cyclic Jacobi."""
    w, _v = jacobi_eigh(sym, tol=tol, max_sweeps=max_sweeps)
    return float(w[0]), float(w[-1])


def gradient_energy(g) -> float:
    """Squared L2 norm of a gradient vector (exponent fixed at 2)."""
    arr = np.asarray(g, dtype=float).ravel()
    return float(np.dot(arr, arr))


def sample_bounds(g, lambda_min: float, lambda_max: float,
                  rank_tol: float = RANK_TOL):
    """(lower, upper) = (||g||^2 / lambda_max, ||g||^2 / lambda_min).

    The pair sandwiches the squared fitting error of the sample that
    produced ``g``.  Raises RankDeficiencyError when lambda_min is not
    safely above ``rank_tol``.
    """
    if lambda_max < lambda_min:
        raise InputError("lambda_max must be >= lambda_min")
    if lambda_min < -rank_tol:
        raise InputError("negative eigenvalue passed to sample_bounds")
    if lambda_min <= rank_tol:
        raise RankDeficiencyError(
            f"lambda_min={lambda_min:.3e} is within rank tolerance {rank_tol:.1e}"
        )
    energy = gradient_energy(g)
    return energy / lambda_max, energy / lambda_min


def fitting_error_l2(gen: Generator, y: int, logits) -> float:
    """||one_hot(y) - grad phi*(logits)||^2, the un-halved fitting error."""
    arr = np.asarray(logits, dtype=float)
    p = gen.grad_conjugate(arr)
    diff = one_hot(y, arr.shape[-1]) - p
    return float(np.dot(diff, diff))


def dataset_lambda_min(lams) -> float:
    """Minimum per-sample smallest eigenvalue over a dataset."""
    arr = np.asarray(lams, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("dataset_lambda_min needs a nonempty sequence")
    return float(arr.min())


def local_pearson(a, b, window: int):
    """Sliding-window Pearson correlation of two equal-length sequences.

    Entry t (for t >= window - 1) is the coefficient over
    a[t-window+1 .. t] against the same slice of b; earlier entries and
    any window with sample variance below 1e-18 (or non-finite values)
    are None rather than NaN.
    """
    xs = np.asarray(a, dtype=float)
    ys = np.asarray(b, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise InputError("sequences must be 1-d and of equal length")
    if window < 2:
        raise InputError("window must be >= 2")
    if xs.size < window:
        raise InputError("sequences shorter than the window")
    out: list[Optional[float]] = [None] * xs.size
    for t in range(window - 1, xs.size):
        wx = xs[t - window + 1:t + 1]
        wy = ys[t - window + 1:t + 1]
        if not (np.all(np.isfinite(wx)) and np.all(np.isfinite(wy))):
            continue
        vx = float(np.var(wx, ddof=1))
        vy = float(np.var(wy, ddof=1))
        if vx < PEARSON_VAR_FLOOR or vy < PEARSON_VAR_FLOOR:
            continue
        cov = float(np.mean((wx - wx.mean()) * (wy - wy.mean())) * window / (window - 1))
        out[t] = cov / np.sqrt(vx * vy)
    return out


@dataclass
class MetricsRow:
    """One logged training step.

    ``risk_surrogate`` is the batch-mean squared fitting error (twice
    the halved form used as the plotted risk).  Eigen-derived fields are
    None on steps where the spectrum was not computed or the structure
    matrix was rank deficient.
    """

    step: int
    risk_surrogate: float
    grad_energy: float
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    lower_bound: Optional[float] = None
    upper_bound: Optional[float] = None

    @property
    def log2_risk(self) -> float:
        return float(np.log2(self.risk_surrogate)) if self.risk_surrogate > 0 else -np.inf

    @property
    def log2_lower(self) -> Optional[float]:
        if self.lower_bound is None or self.lower_bound <= 0:
            return None
        return float(np.log2(self.lower_bound))

    @property
    def log2_upper(self) -> Optional[float]:
        if self.upper_bound is None or self.upper_bound <= 0:
            return None
        return float(np.log2(self.upper_bound))
