"""Convex generators, their conjugates, and Fenchel-Young loss geometry.

A *generator* is a strictly convex function Phi together with its
Legendre-Fenchel conjugate Phi*(nu) = sup_mu <mu, nu> - Phi(mu) and both
gradient maps.  Three families are implemented:

* ``SquaredL2``          Phi(mu) = ||mu||^2 / 2.  Self-conjugate, identity
                         gradient links.
* ``NegEntropySimplex``  Phi(mu) = sum_i mu_i log mu_i restricted to the
                         probability simplex.  The conjugate is
                         log-sum-exp and the conjugate gradient is the
                         softmax map, so the induced loss with a one-hot
                         first argument is softmax cross-entropy.
* ``NormPowerGenerator`` Phi(mu) = ||mu * a||_2^r / r with order r > 1 and
                         scale a > 0.  Closed under conjugation with
                         1/r + 1/r* = 1 and a * a* = 1.

The loss induced by a generator is

    fy_loss(mu, nu) = Phi(mu) + Phi*(nu) - <mu, nu>  >=  0,

with equality exactly when nu is a gradient of Phi at mu.  The Bregman
gap S(mu, nu) = Phi(mu) - Phi(nu) - <grad Phi(nu), mu - nu> measures the
same geometry anchored at a primal point; for the entropy generator it
is the KL divergence.

Conventions (fixed here, relied on throughout the package):

* 0 * log 0 = 0, and probabilities are floored at 1e-300 inside logs, so
  one-hot vectors are valid arguments of ``phi`` while ``grad_phi``
  rejects boundary points.
* The entropy gradient on the simplex is defined only up to an additive
  constant along the all-ones direction; the representative (log mu_i)_i
  is used.  ``fy_loss`` and ``bregman_gap`` are invariant to this choice
  because simplex vectors sum to one.
* log-sum-exp and softmax subtract the max entry first; logits up to
  +-1e3 are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# Absolute tolerance on the entry sum for simplex membership; covers the
# rounding accumulated by softmax outputs.
SIMPLEX_SUM_TOL = 1e-9
# Entries in [-SIMPLEX_NEG_TOL, 0) are treated as exact zeros.
SIMPLEX_NEG_TOL = 1e-12
# Floor applied inside logarithms so that boundary evaluation stays finite.
LOG_FLOOR = 1e-300


def _as_vector(x, name="vector"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise InputError(f"{name} must be at least 1-dimensional")
    return arr


def check_simplex(mu, tol=SIMPLEX_SUM_TOL):
    """Validate that ``mu`` lies on the probability simplex.

    Accepts a single vector or a batch with vectors along the last axis.
    Entries below -1e-12 or sums off by more than ``tol`` are rejected.
    Returns the validated array with tiny negative entries clamped to 0.
    """
    arr = _as_vector(mu, "simplex vector")
    if np.any(arr < -SIMPLEX_NEG_TOL):
        raise InputError("simplex vector has a negative entry")
    arr = np.maximum(arr, 0.0)
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise InputError(
            f"simplex vector entries sum to {np.max(np.abs(sums - 1.0)):.3e} "
            f"away from 1 (tolerance {tol:.1e})"
        )
    return arr


def one_hot(y, dim):
    """Indicator vector for label ``y`` among ``dim`` classes."""
    y = int(y)
    dim = int(dim)
    if dim < 1:
        raise InputError("one_hot dim must be positive")
    if not 0 <= y < dim:
        raise InputError(f"label {y} out of range for {dim} classes")
    v = np.zeros(dim)
    v[y] = 1.0
    return v


def logsumexp(nu):
    """Numerically stable log(sum(exp(nu))) along the last axis."""
    arr = _as_vector(nu, "logits")
    m = np.max(arr, axis=-1, keepdims=True)
    out = np.log(np.sum(np.exp(arr - m), axis=-1)) + np.squeeze(m, axis=-1)
    return float(out) if arr.ndim == 1 else out


def softmax(nu):
    """Stable softmax along the last axis."""
    arr = _as_vector(nu, "logits")
    shifted = arr - np.max(arr, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class NormPowerFn:
    """L2-norm power function  psi(mu) = ||mu * scale||_2^order / order.

    Requires order > 1 and scale > 0.  The function is nonnegative, zero
    only at the origin, and positively homogeneous of degree ``order``.
    """

    order: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.order > 1.0:
            raise InputError(f"norm power order must be > 1, got {self.order}")
        if not self.scale > 0.0:
            raise InputError(f"norm power scale must be > 0, got {self.scale}")

    def __call__(self, mu):
        n = float(np.linalg.norm(np.asarray(mu, dtype=float)))
        return (self.scale * n) ** self.order / self.order

    def grad(self, mu):
        """Gradient scale**order * ||mu||^(order-2) * mu, with grad(0) = 0."""
        arr = np.asarray(mu, dtype=float)
        n = float(np.linalg.norm(arr))
        if n == 0.0:
            return np.zeros_like(arr)
        return (self.scale ** self.order) * n ** (self.order - 2.0) * arr

    def conjugate(self) -> "NormPowerFn":
        """Conjugate norm power: order r* = r/(r-1), scale a* = 1/a."""
        r = self.order
        return NormPowerFn(order=r / (r - 1.0), scale=1.0 / self.scale)


def conjugate_norm_power(np_fn: NormPowerFn) -> NormPowerFn:
    """Functional form of :meth:`NormPowerFn.conjugate`."""
    return np_fn.conjugate()


def euler_residual(np_fn: NormPowerFn, mu) -> float:
    """|<mu, grad psi(mu)> - order * psi(mu)|.

    Zero in exact arithmetic because a norm power function is
    positively homogeneous of degree ``order``.
    """
    arr = np.asarray(mu, dtype=float)
    return abs(float(np.dot(arr, np_fn.grad(arr))) - np_fn.order * np_fn(arr))


class Generator:
    """A strictly convex generator with evaluable conjugate and links.

    Subclasses implement ``phi``, ``grad_phi``, ``conjugate`` and
    ``grad_conjugate``.  ``phi``/``conjugate`` return a scalar for a
    single vector and an array for a batch (vectors along the last
    axis); the gradient maps preserve the input shape.
    """

    variant = "abstract"

    def __init__(self, dim):
        dim = int(dim)
        if dim < 1:
            raise InputError("generator dim must be positive")
        self.dim = dim

    def _check_dim(self, v, name):
        arr = _as_vector(v, name)
        if arr.shape[-1] != self.dim:
            raise InputError(
                f"{name} has dimension {arr.shape[-1]}, generator expects {self.dim}"
            )
        return arr

    def phi(self, mu):
        raise NotImplementedError

    def grad_phi(self, mu):
        raise NotImplementedError

    def conjugate(self, nu):
        raise NotImplementedError

    def grad_conjugate(self, nu):
        raise NotImplementedError


class SquaredL2(Generator):
    """phi(mu) = ||mu||^2 / 2 on all of R^d; self-conjugate, identity links."""

    variant = "SquaredL2"

    def phi(self, mu):
        arr = self._check_dim(mu, "mu")
        out = 0.5 * np.sum(arr * arr, axis=-1)
        return float(out) if arr.ndim == 1 else out

    def grad_phi(self, mu):
        return self._check_dim(mu, "mu").copy()

    def conjugate(self, nu):
        arr = self._check_dim(nu, "nu")
        out = 0.5 * np.sum(arr * arr, axis=-1)
        return float(out) if arr.ndim == 1 else out

    def grad_conjugate(self, nu):
        return self._check_dim(nu, "nu").copy()


class NegEntropySimplex(Generator):
    """Negative Shannon entropy restricted to the probability simplex.

    phi(mu) = sum_i mu_i log mu_i with 0 log 0 = 0; domain is the
    simplex, so membership is validated on every primal evaluation.
    The conjugate is log-sum-exp (finite everywhere) and the conjugate
    gradient is softmax, which always lands back on the simplex.
    """

    variant = "NegEntropySimplex"

    def phi(self, mu):
        arr = check_simplex(self._check_dim(mu, "mu"))
        terms = np.where(arr > 0.0, arr * np.log(np.maximum(arr, LOG_FLOOR)), 0.0)
        out = terms.sum(axis=-1)
        return float(out) if arr.ndim == 1 else out

    def grad_phi(self, mu):
        arr = check_simplex(self._check_dim(mu, "mu"))
        if np.any(arr <= 0.0):
            raise InputError(
                "entropy gradient undefined at the simplex boundary "
                "(zero probability entry)"
            )
        return np.log(arr)

    def conjugate(self, nu):
        return logsumexp(self._check_dim(nu, "nu"))

    def grad_conjugate(self, nu):
        return softmax(self._check_dim(nu, "nu"))


class NormPowerGenerator(Generator):
    """Generator built from a norm power function and its conjugate."""

    variant = "NormPower"

    def __init__(self, dim, order, scale=1.0):
        super().__init__(dim)
        self.fn = NormPowerFn(order=float(order), scale=float(scale))
        self.conj_fn = self.fn.conjugate()

    def phi(self, mu):
        arr = self._check_dim(mu, "mu")
        if arr.ndim == 1:
            return self.fn(arr)
        norms = np.linalg.norm(arr, axis=-1)
        return (self.fn.scale * norms) ** self.fn.order / self.fn.order

    def grad_phi(self, mu):
        return self.fn.grad(self._check_dim(mu, "mu"))

    def conjugate(self, nu):
        arr = self._check_dim(nu, "nu")
        if arr.ndim == 1:
            return self.conj_fn(arr)
        norms = np.linalg.norm(arr, axis=-1)
        return (self.conj_fn.scale * norms) ** self.conj_fn.order / self.conj_fn.order

    def grad_conjugate(self, nu):
        return self.conj_fn.grad(self._check_dim(nu, "nu"))


GENERATOR_VARIANTS = ("SquaredL2", "NegEntropySimplex", "NormPower")


def make_generator(variant, dim, order=None, scale=None) -> Generator:
    """Factory keyed by variant name (the config-file surface)."""
    if variant == "SquaredL2":
        return SquaredL2(dim)
    if variant == "NegEntropySimplex":
        return NegEntropySimplex(dim)
    if variant == "NormPower":
        if order is None:
            raise InputError("NormPower generator requires an order > 1")
        return NormPowerGenerator(dim, order=order, scale=1.0 if scale is None else scale)
    raise InputError(f"unknown generator variant {variant!r}; "
                     f"expected one of {GENERATOR_VARIANTS}")


def fy_loss(gen: Generator, mu, nu) -> float:
    """Fenchel-Young loss  phi(mu) + phi*(nu) - <mu, nu>.

    Nonnegative, and zero exactly when nu is a gradient of phi at mu.
    With the entropy generator and mu = one_hot(y) this is
    logsumexp(nu) - nu_y, i.e. softmax cross-entropy.
    """
    m = np.asarray(mu, dtype=float)
    n = np.asarray(nu, dtype=float)
    if m.ndim != 1 or n.ndim != 1:
        raise InputError("fy_loss expects single vectors")
    return float(gen.phi(m) + gen.conjugate(n) - np.dot(m, n))


def bregman_gap(gen: Generator, mu, nu_point) -> float:
    """Bregman gap  phi(mu) - phi(nu) - <grad phi(nu), mu - nu>  >= 0.

    ``nu_point`` must be interior.  For the entropy generator this is
    the KL divergence KL(mu || nu) in nats.
    """
    m = np.asarray(mu, dtype=float)
    n = np.asarray(nu_point, dtype=float)
    g = gen.grad_phi(n)
    return float(gen.phi(m) - gen.phi(n) - np.dot(g, m - n))


def generalized_entropy_terms(gen: Generator, joint):
    """Conditional-entropy and mutual-information analogues of ``gen``.

    ``joint`` is an |X| x |Y| probability table (rows may be extracted
    from a finite joint distribution).  Returns ``(cond_ent, mut_info)``
    where

        cond_ent = E_X[ E_{Y|x} phi(1_Y) - phi(q_{Y|x}) ]
        mut_info = E_X phi(q_{Y|X}) - phi(q_Y)

    Both are nonnegative for convex phi.  With the entropy generator
    they equal the Shannon quantities H(Y|X) and I(X;Y) in nats.
    """
    table = np.asarray(joint, dtype=float)
    if table.ndim != 2:
        raise InputError("joint table must be 2-dimensional")
    if table.shape[1] != gen.dim:
        raise InputError(
            f"joint table has {table.shape[1]} labels, generator expects {gen.dim}"
        )
    q_x = table.sum(axis=1)
    q_y = table.sum(axis=0)
    phi_onehot = np.array([gen.phi(one_hot(y, gen.dim)) for y in range(gen.dim)])

    cond_ent = 0.0
    mean_phi_cond = 0.0
    for x in range(table.shape[0]):
        if q_x[x] <= 0.0:
            continue
        row = table[x] / q_x[x]
        phi_row = gen.phi(row)
        cond_ent += q_x[x] * (float(np.dot(row, phi_onehot)) - phi_row)
        mean_phi_cond += q_x[x] * phi_row
    mut_info = mean_phi_cond - gen.phi(q_y)
    return float(cond_ent), float(mut_info)
