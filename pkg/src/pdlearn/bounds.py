"""Finite joint distributions and the risk / generalization calculators.

Everything in this module works on an exactly enumerable support: a
joint probability table over |X| feature indices and |Y| labels, with
each feature index carrying a fixed embedding vector that the model
consumes.  All expectations are exact summations over the table; only
the concentration checks draw samples.

Quantities provided:

* exact expected risk and its decomposition into the generalized
  conditional entropy plus the expected distribution fitting error;
* lower/upper risk bounds (conditional entropy, plus mutual
  information), which reduce to the Shannon quantities in nats for the
  entropy generator;
* gamma (the maximum per-pair loss over the support), the model-induced
  information loss zeta, and the concentration bound
  3 * exp(-4 n eps^2 / (25 gamma^2)) with its validity threshold
  eps >= gamma * sqrt(5 (|X| - zeta) |Y| / n);
* a Monte Carlo harness that verifies the concentration bound against
  empirical exceedance frequencies;
* the parameter-norm probe estimating envelope constants a, b with
  a ||theta||^2 <= Phi*(f(x)) - Phi*(0) <= b ||theta||^2 near zero.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import netcore
from .errors import InputError
from .generators import Generator, fy_loss, generalized_entropy_terms, one_hot
from .netcore import NetworkSpec, ParamVector

#: L-infinity tolerance under which two model outputs count as the same
#: point when measuring information loss.
OUTPUT_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class FinitePD:
    """Joint distribution over feature indices x labels, plus embeddings.

    ``joint`` is an |X| x |Y| table of probabilities summing to one;
    ``feature_embedding`` maps each feature index to the real vector fed
    to the model.
    """

    joint: np.ndarray
    feature_embedding: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.joint, dtype=float)
        emb = np.asarray(self.feature_embedding, dtype=float)
        if table.ndim != 2:
            raise InputError("joint must be an |X| x |Y| table")
        if np.any(table < 0.0):
            raise InputError("joint table has a negative entry")
        if abs(float(table.sum()) - 1.0) > 1e-12:
            raise InputError(
                f"joint table sums to {table.sum():.15f}, expected 1 within 1e-12"
            )
        if emb.ndim != 2 or emb.shape[0] != table.shape[0]:
            raise InputError("feature_embedding must have one row per feature")
        table = table.copy()
        table.setflags(write=False)
        emb = emb.copy()
        emb.setflags(write=False)
        object.__setattr__(self, "joint", table)
        object.__setattr__(self, "feature_embedding", emb)

    @property
    def card_x(self) -> int:
        return self.joint.shape[0]

    @property
    def card_y(self) -> int:
        return self.joint.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.feature_embedding.shape[1]

    def x_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def y_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def conditional(self, x: int) -> np.ndarray:
        """Label distribution given feature index x (requires q_X(x) > 0)."""
        if not 0 <= int(x) < self.card_x:
            raise InputError(f"feature index {x} out of range")
        mass = float(self.joint[int(x)].sum())
        if mass <= 0.0:
            raise InputError(f"feature {x} has zero marginal probability")
        return self.joint[int(x)] / mass

    def sample(self, n: int, seed: int):
        """n i.i.d. (x, y) pairs via inverse-CDF over the flattened table."""
        if int(n) < 1:
            raise InputError("sample size must be >= 1")
        rng = np.random.default_rng(int(seed))
        cdf = np.cumsum(self.joint.ravel())
        cdf[-1] = 1.0
        flat = np.searchsorted(cdf, rng.random(int(n)), side="right")
        xs, ys = np.unravel_index(flat, self.joint.shape)
        return list(zip(xs.tolist(), ys.tolist()))


@dataclass(frozen=True)
class EmpiricalPD:
    """Count table from n observed (x, y) pairs."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or np.any(counts < 0):
            raise InputError("counts must be a nonnegative 2-d table")
        if int(counts.sum()) != int(self.n):
            raise InputError(
                f"counts sum to {counts.sum()}, expected n={self.n}"
            )
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def joint(self) -> np.ndarray:
        return self.counts / float(self.n)

    def to_pd(self, feature_embedding) -> FinitePD:
        return FinitePD(joint=self.joint, feature_embedding=feature_embedding)


def empirical_from_samples(samples, card_x=None, card_y=None) -> EmpiricalPD:
    """Count table from (x, y) pairs; table shape from the cards or the data."""
    pairs = list(samples)
    if not pairs:
        raise InputError("cannot build an empirical distribution from no samples")
    xs = np.array([p[0] for p in pairs], dtype=np.int64)
    ys = np.array([p[1] for p in pairs], dtype=np.int64)
    if np.any(xs < 0) or np.any(ys < 0):
        raise InputError("sample indices must be nonnegative")
    cx = int(card_x) if card_x is not None else int(xs.max()) + 1
    cy = int(card_y) if card_y is not None else int(ys.max()) + 1
    if np.any(xs >= cx) or np.any(ys >= cy):
        raise InputError("sample index exceeds the stated cardinality")
    counts = np.zeros((cx, cy), dtype=np.int64)
    np.add.at(counts, (xs, ys), 1)
    return EmpiricalPD(counts=counts, n=len(pairs))


def loss_table(gen: Generator, spec: NetworkSpec, theta: ParamVector,
               q: FinitePD) -> np.ndarray:
    """|X| x |Y| table of per-pair losses fy(one_hot(y), f(embedding(x)))."""
    logits = netcore.forward(spec, theta, q.feature_embedding)
    table = np.zeros((q.card_x, q.card_y))
    for x in range(q.card_x):
        for y in range(q.card_y):
            table[x, y] = fy_loss(gen, one_hot(y, q.card_y), logits[x])
    return table


def _coerce_pd(q, feature_embedding=None) -> FinitePD:
    if isinstance(q, FinitePD):
        return q
    if isinstance(q, EmpiricalPD):
        if feature_embedding is None:
            raise InputError(
                "an EmpiricalPD needs feature embeddings to evaluate a model"
            )
        return q.to_pd(feature_embedding)
    raise InputError(f"expected FinitePD or EmpiricalPD, got {type(q).__name__}")


def risk(gen: Generator, q, spec: NetworkSpec, theta: ParamVector,
         feature_embedding=None) -> float:
    """Exact expected loss E_{(X,Y)~q} fy(one_hot(Y), f(X)) by summation."""
    pd = _coerce_pd(q, feature_embedding)
    return float(np.sum(pd.joint * loss_table(gen, spec, theta, pd)))


def expected_fitting_gap(gen: Generator, q: FinitePD, spec: NetworkSpec,
                         theta: ParamVector) -> float:
    """E_X fy(q_{Y|X}, f(X)): the model-dependent part of the risk."""
    logits = netcore.forward(spec, theta, q.feature_embedding)
    q_x = q.x_marginal()
    total = 0.0
    for x in range(q.card_x):
        if q_x[x] <= 0.0:
            continue
        total += q_x[x] * fy_loss(gen, q.conditional(x), logits[x])
    return float(total)


def risk_decomposition_residual(gen: Generator, q: FinitePD, spec: NetworkSpec,
                                theta: ParamVector) -> float:
    """|risk - cond_entropy - expected fitting gap|; zero in exact arithmetic."""
    cond_ent, _ = generalized_entropy_terms(gen, q.joint)
    return abs(risk(gen, q, spec, theta) - cond_ent
               - expected_fitting_gap(gen, q, spec, theta))


def risk_bounds(gen: Generator, q: FinitePD):
    """(lower, upper) bounds on the best achievable risk.

    lower is the generalized conditional entropy; upper adds the
    generalized mutual information.  For the entropy generator these
    are H(Y|X) and H(Y|X) + I(X;Y) in nats.
    """
    cond_ent, mut_info = generalized_entropy_terms(gen, q.joint)
    return float(cond_ent), float(cond_ent + mut_info)


def gamma_max_loss(gen: Generator, spec: NetworkSpec, theta: ParamVector,
                   q: FinitePD) -> float:
    """Maximum per-pair loss over the full support grid."""
    return float(loss_table(gen, spec, theta, q).max())


def gamma_via_pmin(gen: Generator, spec: NetworkSpec, theta: ParamVector,
                   q: FinitePD) -> float:
    """-log of the smallest predicted probability over the support.

    Equals gamma_max_loss for the entropy generator, where the per-pair
    loss is -log p_y(x).
    """
    logits = netcore.forward(spec, theta, q.feature_embedding)
    p_min = min(float(gen.grad_conjugate(logits[x]).min())
                for x in range(q.card_x))
    return float(-np.log(p_min))


def information_loss(spec: NetworkSpec, theta: ParamVector, q: FinitePD,
                     match_tol: float = OUTPUT_MATCH_TOL) -> int:
    """zeta = |X| minus the number of distinct model outputs.

    Outputs within L-infinity distance ``match_tol`` are identified
    (union-find over pairwise collisions), so float noise does not
    inflate the distinct count.
    """
    if match_tol < 0.0:
        raise InputError("match_tol must be >= 0")
    outputs = netcore.forward(spec, theta, q.feature_embedding)
    n = outputs.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if float(np.max(np.abs(outputs[i] - outputs[j]))) <= match_tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    distinct = len({find(i) for i in range(n)})
    return int(n - distinct)


def gen_bound(gamma: float, zeta: int, card_x: int, card_y: int, n: int,
              eps: float):
    """(probability bound, validity flag) of the concentration inequality.

    prob = 3 exp(-4 n eps^2 / (25 gamma^2)); the bound is only claimed
    for eps >= gamma sqrt(5 (|X| - zeta) |Y| / n).
    """
    if not gamma > 0.0:
        raise InputError("gamma must be > 0")
    if int(n) < 1:
        raise InputError("n must be >= 1")
    prob = 3.0 * float(np.exp(-4.0 * n * eps * eps / (25.0 * gamma * gamma)))
    threshold = gamma * float(np.sqrt(5.0 * (card_x - zeta) * card_y / n))
    return prob, bool(eps >= threshold)


@dataclass
class GenBoundReport:
    """Concentration-bound report for one (model, distribution, n)."""

    gamma: float
    zeta: int
    n: int
    trials: int
    eps_grid: list
    bound_values: list
    empirical_exceedance: list
    valid_from: float
    true_risk: float
    gaps: list = field(default_factory=list)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "zeta": self.zeta,
            "n": self.n,
            "trials": self.trials,
            "epsGrid": list(self.eps_grid),
            "boundValues": list(self.bound_values),
            "empiricalExceedance": list(self.empirical_exceedance),
            "validFrom": self.valid_from,
            "trueRisk": self.true_risk,
        }


def _thread_count() -> int:
    raw = os.environ.get("PDLEARN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def mc_generalization_check(gen: Generator, spec: NetworkSpec,
                            theta: ParamVector, q: FinitePD, n: int,
                            trials: int, eps_grid, seed: int) -> GenBoundReport:
    """Empirical exceedance of |risk(q) - risk(q_hat_n)| against the bound.

    Each trial draws an independent size-n sample with its own child
    seed (base seed + trial index) and measures the risk gap; results
    merge in trial order so the report is reproducible regardless of
    the thread count (PDLEARN_THREADS).
    """
    if int(trials) < 100:
        raise InputError("need at least 100 trials for a meaningful frequency")
    table = loss_table(gen, spec, theta, q)
    true_risk = float(np.sum(q.joint * table))
    gamma = float(table.max())
    zeta = information_loss(spec, theta, q)

    def one_trial(t):
        pairs = q.sample(n, seed=int(seed) + t)
        emp = empirical_from_samples(pairs, card_x=q.card_x, card_y=q.card_y)
        return abs(true_risk - float(np.sum(emp.joint * table)))

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            gaps = list(pool.map(one_trial, range(int(trials))))
    else:
        gaps = [one_trial(t) for t in range(int(trials))]

    gaps_arr = np.array(gaps)
    eps_values = [float(e) for e in eps_grid]
    bound_vals = []
    exceed = []
    for eps in eps_values:
        prob, _valid = gen_bound(gamma, zeta, q.card_x, q.card_y, n, eps)
        bound_vals.append(prob)
        exceed.append(float(np.mean(gaps_arr >= eps)))
    valid_from = gamma * float(np.sqrt(5.0 * (q.card_x - zeta) * q.card_y / n))
    return GenBoundReport(gamma=gamma, zeta=zeta, n=int(n), trials=int(trials),
                          eps_grid=eps_values, bound_values=bound_vals,
                          empirical_exceedance=exceed, valid_from=valid_from,
                          true_risk=true_risk, gaps=gaps)


def reg_equivalence_probe(gen: Generator, spec: NetworkSpec, x, radii,
                          samples_per_radius: int, seed: int):
    """Envelope constants of R(theta) = Phi*(f_theta(x)) - Phi*(0).

    Samples parameters uniformly on spheres of each radius and returns
    (a_hat, b_hat) = (min, max) of R(theta) / ||theta||^2.  R(0) is zero
    by construction because a zero parameter vector yields zero logits.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0.0 for r in radii):
        raise InputError("probe radii must be positive")
    if int(samples_per_radius) < 1:
        raise InputError("need at least one sample per radius")
    rng = np.random.default_rng(int(seed))
    layout = netcore.param_layout(spec)
    zero_logits = np.zeros(spec.output_dim)
    base_value = gen.conjugate(zero_logits)
    arr = np.asarray(x, dtype=float)

    ratios = []
    for r in radii:
        for _ in range(int(samples_per_radius)):
            direction = rng.standard_normal(layout.size)
            direction /= np.linalg.norm(direction)
            theta = ParamVector(values=r * direction, layout=layout)
            value = gen.conjugate(netcore.forward(spec, theta, arr)) - base_value
            ratios.append(value / (r * r))
    return float(min(ratios)), float(max(ratios))


def full_support_grad(spec: NetworkSpec, theta: ParamVector, gen: Generator,
                      q: FinitePD):
    """Exact gradient of the risk: sum_x q_X(x) J(x)^T (p_x - q_{Y|x})."""
    logits = netcore.forward(spec, theta, q.feature_embedding)
    q_x = q.x_marginal()
    grad = np.zeros(theta.size)
    for x in range(q.card_x):
        if q_x[x] <= 0.0:
            continue
        err = gen.grad_conjugate(logits[x]) - q.conditional(x)
        jac = netcore.jacobian(spec, theta, q.feature_embedding[x])
        grad += q_x[x] * (jac.T @ err)
    return grad
