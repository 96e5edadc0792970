"""SGD with the smoothness-optimal step size, per-step descent checks,
empirical smoothness majorants, and the quadratic sandwich check.

For an objective whose Bregman gap is majorized by a norm power
function xi (order r, scale a), one gradient step from theta with

    alpha* = (||g||^2 / (r * xi(g))) ** (1 / (r - 1))

is guaranteed to decrease the minibatch objective by at least

    decrement = (1/r*) * (||g||^2)**r* * (r * xi(g))**(-1/(r-1)),

where r* = r / (r - 1).  The training loop counts violations of that
inequality when running in optimal-step mode; on a quadratic objective
with an exact majorant the count must be zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics, netcore
from .errors import InputError, NumericalError, RankDeficiencyError
from .generators import Generator, NormPowerFn, fy_loss, one_hot
from .netcore import NetworkSpec, ParamVector


def optimal_step(g, xi: NormPowerFn) -> Optional[float]:
    """Optimal step size for a xi-majorized objective; None if ||g|| = 0.

    A zero gradient is a converged signal: there is no step to take.
    """
    arr = np.asarray(g, dtype=float).ravel()
    sq = float(np.dot(arr, arr))
    if sq == 0.0:
        return None
    r = xi.order
    return float((sq / (r * xi(arr))) ** (1.0 / (r - 1.0)))


def sgd_step(theta: ParamVector, g, alpha: float) -> ParamVector:
    """theta - alpha * g as a new parameter vector (input untouched)."""
    arr = np.asarray(g, dtype=float).ravel()
    if arr.size != theta.size:
        raise InputError(
            f"gradient has {arr.size} entries, parameters have {theta.size}"
        )
    return theta.replace(theta.values - alpha * arr)


def descent_decrement(g, xi: NormPowerFn) -> float:
    """Guaranteed objective decrease for the optimal step under majorant xi."""
    arr = np.asarray(g, dtype=float).ravel()
    sq = float(np.dot(arr, arr))
    if sq == 0.0:
        return 0.0
    r = xi.order
    r_conj = r / (r - 1.0)
    return (sq ** r_conj) * (r * xi(arr)) ** (-1.0 / (r - 1.0)) / r_conj


def h_sandwich_check(hessian, mu, tol: float = 1e-9):
    """Sandwich G(mu) - G* between conjugate norm-power values of the gradient.

    For the quadratic G(mu) = mu^T H mu / 2 with positive definite H,
    the eigenvalue envelopes psi = (lambda_min/2)||.||^2 and
    Psi = (lambda_max/2)||.||^2 give

        Psi*(grad G) <= G(mu) - G* <= psi*(grad G).

    Returns (lower, mid, upper, ok) with ok true when the chain holds
    within ``tol`` relative slack.
    """
    h = np.asarray(hessian, dtype=float)
    arr = np.asarray(mu, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] != arr.size:
        raise InputError("hessian/mu dimensions are inconsistent")
    if not np.allclose(h, h.T, atol=1e-12 * max(1.0, float(np.abs(h).max()))):
        raise InputError("hessian must be symmetric")
    lam_min, lam_max = diagnostics.sym_eigs_extreme(h)
    if lam_min <= 0.0:
        raise InputError(f"hessian must be positive definite (lambda_min={lam_min:.3e})")
    grad = h @ arr
    gsq = float(np.dot(grad, grad))
    mid = 0.5 * float(arr @ h @ arr)
    lower = gsq / (2.0 * lam_max)
    upper = gsq / (2.0 * lam_min)
    slack = tol * max(1.0, abs(mid))
    ok = (lower <= mid + slack) and (mid <= upper + slack)
    return lower, mid, upper, bool(ok)


def batch_loss(spec: NetworkSpec, theta: ParamVector, gen: Generator,
               features, labels) -> float:
    """Mean generator loss over a batch of (feature, label) pairs."""
    logits = netcore.forward(spec, theta, features)
    total = 0.0
    for i in range(logits.shape[0]):
        total += fy_loss(gen, one_hot(int(labels[i]), spec.output_dim), logits[i])
    return total / logits.shape[0]


def batch_grad(spec: NetworkSpec, theta: ParamVector, gen: Generator,
               features, labels):
    """Mean parameter gradient over a batch (fixed sample order)."""
    feats = np.asarray(features, dtype=float)
    grads = np.zeros((feats.shape[0], theta.size))
    for i in range(feats.shape[0]):
        grads[i] = netcore.loss_grad(spec, theta, gen, feats[i], int(labels[i]))
    return grads.mean(axis=0), grads


def estimate_majorant(spec: NetworkSpec, gen: Generator, features, labels,
                      order: float, probe_pairs: int, seed: int,
                      radius: float = 0.5, safety: float = 1.5) -> NormPowerFn:
    """Empirical norm-power majorant of the dataset loss's Bregman gap.

    Draws ``probe_pairs`` parameter pairs in a ball of ``radius`` around
    a seeded initialization (a stand-in for the training trajectory
    neighborhood), measures the gap

        S(t1, t2) = G(t1) - G(t2) - <grad G(t2), t1 - t2>,

    and returns the norm power function of the given order whose scale
    is the smallest value covering every probe, times ``safety``.
    """
    if not order > 1.0:
        raise InputError("majorant order must be > 1")
    if probe_pairs < 1:
        raise InputError("need at least one probe pair")
    rng = np.random.default_rng(int(seed))
    center = netcore.init_params(spec, seed=int(seed), scale=1.0)
    feats = np.asarray(features, dtype=float)

    def loss_and_grad(values):
        theta = center.replace(values)
        g, _ = batch_grad(spec, theta, gen, feats, labels)
        return batch_loss(spec, theta, gen, feats, labels), g

    envelope = 0.0
    for _ in range(int(probe_pairs)):
        t1 = center.values + radius * rng.standard_normal(center.size)
        t2 = center.values + radius * rng.standard_normal(center.size)
        l1, _ = loss_and_grad(t1)
        l2, g2 = loss_and_grad(t2)
        if not (np.isfinite(l1) and np.isfinite(l2) and np.all(np.isfinite(g2))):
            raise NumericalError("non-finite loss in majorant probe")
        delta = t1 - t2
        gap = l1 - l2 - float(np.dot(g2, delta))
        dist = float(np.linalg.norm(delta))
        if gap <= 0.0 or dist == 0.0:
            continue
        envelope = max(envelope, (order * gap) ** (1.0 / order) / dist)
    if envelope == 0.0:
        # all probe gaps were nonpositive; any positive scale majorizes them
        envelope = np.finfo(float).tiny ** (1.0 / order)
    return NormPowerFn(order=float(order), scale=float(envelope * safety))


@dataclass(frozen=True)
class SgdConfig:
    """Training hyperparameters.

    ``mode`` is "fixedAlpha" (requires ``alpha`` > 0) or "optimalFromXi"
    (requires ``xi``).  ``eigen_every`` controls how often the per-step
    metrics include structure-matrix spectra and bound values.
    """

    mode: str
    batch_size: int
    steps: int
    seed: int
    eigen_every: int = 1
    alpha: Optional[float] = None
    xi: Optional[NormPowerFn] = None
    rank_tol: float = diagnostics.RANK_TOL

    def __post_init__(self):
        if self.mode not in ("fixedAlpha", "optimalFromXi"):
            raise InputError(f"unknown sgd mode {self.mode!r}")
        if self.mode == "fixedAlpha":
            if self.alpha is None or not self.alpha > 0.0:
                raise InputError("fixedAlpha mode requires alpha > 0")
        else:
            if self.xi is None:
                raise InputError("optimalFromXi mode requires a norm power xi")
        if int(self.batch_size) < 1:
            raise InputError("batch_size must be positive")
        if int(self.steps) < 0:
            raise InputError("steps must be >= 0")
        if int(self.eigen_every) < 1:
            raise InputError("eigen_every must be positive")


@dataclass
class TrainTrace:
    """Output of a training run: per-step metrics rows (strictly
    increasing in step), final parameters, and the count of descent
    inequality violations (optimal-step mode only)."""

    rows: list
    final_params: ParamVector
    descent_violations: Optional[int] = None
    beta_samples: list = field(default_factory=list)


class _Minibatcher:
    """Uniform without-replacement batches, reshuffled every epoch."""

    def __init__(self, n, batch_size, rng):
        if batch_size > n:
            raise InputError(f"batch size {batch_size} exceeds dataset size {n}")
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next_batch(self):
        if self.pos + self.batch_size > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        idx = self.order[self.pos:self.pos + self.batch_size]
        self.pos += self.batch_size
        return idx


def train(spec: NetworkSpec, gen: Generator, features, labels,
          cfg: SgdConfig, theta0: ParamVector, measure_beta: bool = False) -> TrainTrace:
    """Minibatch SGD with per-step metrics.

    Every step logs the batch risk surrogate (mean squared fitting
    error) and batch-mean gradient energy at the pre-update parameters;
    every ``eigen_every`` steps additionally logs batch-averaged extreme
    structure-matrix eigenvalues and the bound sandwich.  In
    optimal-step mode the per-batch descent inequality is verified after
    each update.  Deterministic given the config seed.
    """
    feats = np.asarray(features, dtype=float)
    labs = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[0] != labs.shape[0]:
        raise InputError("features/labels shapes are inconsistent")
    if feats.shape[1] != spec.input_dim:
        raise InputError(
            f"features have dimension {feats.shape[1]}, model expects {spec.input_dim}"
        )
    rng = np.random.default_rng(int(cfg.seed))
    theta = theta0
    rows = []
    violations = 0 if cfg.mode == "optimalFromXi" else None
    betas = []
    batcher = _Minibatcher(feats.shape[0], int(cfg.batch_size), rng) if cfg.steps else None

    for step in range(int(cfg.steps)):
        idx = batcher.next_batch()
        bx, by = feats[idx], labs[idx]
        logits = netcore.forward(spec, theta, bx)
        if not np.all(np.isfinite(logits)):
            raise NumericalError("non-finite logits during training", step=step)

        risk = 0.0
        energies = np.zeros(len(idx))
        per_sample = np.zeros((len(idx), theta.size))
        for i in range(len(idx)):
            y = int(by[i])
            risk += diagnostics.fitting_error_l2(gen, y, logits[i])
            per_sample[i] = netcore.loss_grad(spec, theta, gen, bx[i], y)
            energies[i] = diagnostics.gradient_energy(per_sample[i])
        risk /= len(idx)
        mean_grad = per_sample.mean(axis=0)
        grad_energy = float(energies.mean())
        if not np.isfinite(risk) or not np.isfinite(grad_energy):
            raise NumericalError("non-finite loss during training", step=step)

        row = diagnostics.MetricsRow(step=step, risk_surrogate=risk,
                                     grad_energy=grad_energy)
        if step % int(cfg.eigen_every) == 0:
            lam_mins = np.zeros(len(idx))
            lam_maxs = np.zeros(len(idx))
            lowers = np.zeros(len(idx))
            uppers = np.zeros(len(idx))
            deficient = False
            for i in range(len(idx)):
                jac = netcore.jacobian(spec, theta, bx[i])
                lam_lo, lam_hi = diagnostics.sym_eigs_extreme(
                    diagnostics.structure_matrix(jac))
                lam_mins[i], lam_maxs[i] = lam_lo, lam_hi
                if deficient:
                    continue
                try:
                    lowers[i], uppers[i] = diagnostics.sample_bounds(
                        per_sample[i], lam_lo, lam_hi, rank_tol=cfg.rank_tol)
                except RankDeficiencyError:
                    # bounds are missing, not clamped, on rank deficiency
                    deficient = True
            row.lambda_min = float(lam_mins.mean())
            row.lambda_max = float(lam_maxs.mean())
            if not deficient:
                row.lower_bound = float(lowers.mean())
                row.upper_bound = float(uppers.mean())
        rows.append(row)

        if cfg.mode == "fixedAlpha":
            theta = sgd_step(theta, mean_grad, cfg.alpha)
        else:
            alpha = optimal_step(mean_grad, cfg.xi)
            if alpha is not None:
                loss_before = batch_loss(spec, theta, gen, bx, by)
                new_theta = sgd_step(theta, mean_grad, alpha)
                loss_after = batch_loss(spec, new_theta, gen, bx, by)
                decrement = descent_decrement(mean_grad, cfg.xi)
                if loss_after > loss_before - decrement + 1e-9:
                    violations += 1
                if measure_beta and loss_after < loss_before:
                    full_before = batch_loss(spec, theta, gen, feats, labs)
                    full_after = batch_loss(spec, new_theta, gen, feats, labs)
                    betas.append((full_after - full_before)
                                 / (loss_after - loss_before))
                theta = new_theta

    return TrainTrace(rows=rows, final_params=theta,
                      descent_violations=violations, beta_samples=betas)
