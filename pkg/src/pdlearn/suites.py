"""Property-verification suites behind the ``verify`` command.

Each suite draws seeded random instances, checks an identity or an
inequality at a fixed tolerance, and reports counts.  The suites are the
machine-checkable form of the package's contracts:

    conjugate   duality residuals, norm-power reciprocity, Euler identity
    softmax_ce  cross-entropy-minus-self-entropy equals the induced loss
    gradients   reverse-mode vs central finite differences, J^T e identity
    prop2       risk = conditional entropy + expected fitting gap
    prop3       quadratic sandwich between conjugate norm-power envelopes
    prop4       per-step descent inequality and iteration-count trend
    prop5       eigenvalue sandwich on the fitting error, rank rejection
    prop6       full-support descent lands between the entropy bounds
    prop7       Monte Carlo concentration vs the closed-form bound
    probes      parameter-norm envelopes and the gamma endpoint identity

``fault="conjugate"`` swaps in a deliberately wrong conjugate so the
suite (and therefore ``verify``) fails: a negative control proving the
checks can fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds, dataio, diagnostics, netcore, optim
from .errors import RankDeficiencyError
from .generators import (Generator, NegEntropySimplex, NormPowerFn,
                         NormPowerGenerator, SquaredL2, euler_residual,
                         fy_loss, softmax)
from .netcore import BlockSpec, NetworkSpec


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)
    duration: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(Check(name=name, passed=bool(passed), detail=detail))

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "duration_s": round(self.duration, 3),
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


class _FaultyConjugate(Generator):
    """Wraps a generator with a perturbed conjugate (negative control)."""

    def __init__(self, inner: Generator):
        super().__init__(inner.dim)
        self.inner = inner
        self.variant = f"faulty({inner.variant})"

    def phi(self, mu):
        return self.inner.phi(mu)

    def grad_phi(self, mu):
        return self.inner.grad_phi(mu)

    def conjugate(self, nu):
        arr = np.asarray(nu, dtype=float)
        return self.inner.conjugate(arr) + 1e-3 * (1.0 + float(np.sum(arr * arr)))

    def grad_conjugate(self, nu):
        return self.inner.grad_conjugate(nu)


def _interior_simplex(rng, dim):
    draws = rng.gamma(shape=1.0, scale=1.0, size=dim) + 1e-3
    return draws / draws.sum()


def _random_net(rng, activations=("tanh", "softplus"), out_range=(2, 4)):
    input_dim = int(rng.integers(3, 7))
    output_dim = int(rng.integers(out_range[0], out_range[1] + 1))
    width = int(rng.integers(4, 9))
    blocks = [BlockSpec(width, str(rng.choice(activations)))]
    if rng.random() < 0.5:
        blocks.append(BlockSpec(width, str(rng.choice(activations)),
                                skip=True))
    spec = NetworkSpec(input_dim=input_dim, output_dim=output_dim,
                       blocks=tuple(blocks), repeat=int(rng.integers(1, 3)))
    theta = netcore.init_params(spec, seed=int(rng.integers(0, 2 ** 31)), scale=1.0)
    x = rng.standard_normal(input_dim)
    y = int(rng.integers(0, output_dim))
    return spec, theta, x, y


def suite_conjugate(fault=None, instances=1000, seed=20240601) -> SuiteResult:
    """Duality residuals, reciprocity, Euler identity, link consistency."""
    t0 = time.perf_counter()
    res = SuiteResult("conjugate")
    rng = np.random.default_rng(seed)

    def wrap(gen):
        return _FaultyConjugate(gen) if fault == "conjugate" else gen

    max_resid = {"SquaredL2": 0.0, "NegEntropySimplex": 0.0, "NormPower": 0.0}
    for _ in range(instances):
        dim = int(rng.integers(2, 9))
        cases = [
            (wrap(SquaredL2(dim)), rng.standard_normal(dim)),
            (wrap(NegEntropySimplex(dim)), _interior_simplex(rng, dim)),
            (wrap(NormPowerGenerator(dim, order=rng.uniform(1.1, 4.0),
                                     scale=rng.uniform(0.5, 2.0))),
             rng.standard_normal(dim) + 1e-9),
        ]
        for gen, mu in cases:
            g = gen.grad_phi(mu)
            resid = abs(gen.phi(mu) + gen.conjugate(g) - float(np.dot(mu, g)))
            key = gen.variant.replace("faulty(", "").rstrip(")")
            max_resid[key] = max(max_resid[key], resid)
    for key, val in max_resid.items():
        res.add(f"duality_residual[{key}]", val <= 1e-9,
                f"max |phi + phi*(grad phi) - <mu, grad phi>| = {val:.3e} over "
                f"{instances} draws (tol 1e-9)")

    worst_recip = 0.0
    worst_euler = 0.0
    for _ in range(instances):
        dim = int(rng.integers(2, 9))
        fn = NormPowerFn(order=float(rng.uniform(1.1, 4.0)),
                         scale=float(rng.uniform(0.5, 2.0)))
        mu = rng.standard_normal(dim)
        grad = fn.grad(mu)
        pairing = float(np.dot(mu, grad))
        ref = max(abs(pairing), 1e-30)
        conj = fn.conjugate()
        worst_recip = max(
            worst_recip,
            abs(fn.order * fn(mu) - pairing) / ref,
            abs(conj.order * conj(grad) - pairing) / ref,
        )
        worst_euler = max(
            worst_euler,
            euler_residual(fn, mu) / max(abs(fn.order * fn(mu)), 1e-30),
        )
        back = conj.conjugate()
        if abs(back.order - fn.order) > 1e-12 or abs(back.scale - fn.scale) > 1e-12:
            worst_recip = np.inf
    res.add("norm_power_reciprocity", worst_recip <= 1e-9,
            f"max relative residual {worst_recip:.3e} over {instances} draws "
            "(tol 1e-9)")
    res.add("euler_residual", worst_euler <= 1e-9,
            f"max relative residual {worst_euler:.3e} over {instances} draws "
            "(tol 1e-9)")

    # gradient of the conjugate against a central finite difference
    worst_fd = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        for gen in (wrap(SquaredL2(dim)), wrap(NegEntropySimplex(dim)),
                    wrap(NormPowerGenerator(dim, order=rng.uniform(1.5, 3.0)))):
            nu = rng.standard_normal(dim)
            analytic = gen.grad_conjugate(nu)
            h = 1e-6
            fd = np.zeros(dim)
            for i in range(dim):
                up, down = nu.copy(), nu.copy()
                up[i] += h
                down[i] -= h
                fd[i] = (gen.conjugate(up) - gen.conjugate(down)) / (2 * h)
            err = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
            worst_fd = max(worst_fd, err)
    res.add("conjugate_link_fd", worst_fd <= 1e-6,
            f"max relative error {worst_fd:.3e} over 300 draws (tol 1e-6)")

    # loss nonnegativity and the zero at the gradient
    worst_neg = 0.0
    worst_zero = 0.0
    for _ in range(instances):
        dim = int(rng.integers(2, 7))
        gen = wrap(NegEntropySimplex(dim))
        mu = _interior_simplex(rng, dim)
        nu = rng.standard_normal(dim) * 3.0
        worst_neg = min(worst_neg, fy_loss(gen, mu, nu))
        worst_zero = max(worst_zero, abs(fy_loss(gen, mu, gen.grad_phi(mu))))
    res.add("fy_nonnegative", worst_neg >= -1e-12,
            f"min loss {worst_neg:.3e} over {instances} draws (floor -1e-12)")
    res.add("fy_zero_at_gradient", worst_zero <= 1e-9,
            f"max |loss at the gradient| {worst_zero:.3e} (tol 1e-9)")

    res.duration = time.perf_counter() - t0
    return res


def suite_softmax_ce(instances=1000, seed=20240602) -> SuiteResult:
    """CE(q, softmax(z)) - CE(q, q) equals the entropy-generator loss."""
    t0 = time.perf_counter()
    res = SuiteResult("softmax_ce")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        dim = int(rng.integers(2, 11))
        gen = NegEntropySimplex(dim)
        q = _interior_simplex(rng, dim)
        z = rng.standard_normal(dim) * 3.0
        ce_pred = -float(np.dot(q, np.log(softmax(z))))
        ce_self = -float(np.dot(q, np.log(q)))
        worst = max(worst, abs(ce_pred - ce_self - fy_loss(gen, q, z)))
    res.add("cross_entropy_equivalence", worst <= 1e-8,
            f"max |CE gap - loss| = {worst:.3e} over {instances} draws (tol 1e-8)")
    res.duration = time.perf_counter() - t0
    return res


def suite_gradients(instances=200, seed=20240603) -> SuiteResult:
    """Reverse-mode gradients against finite differences and J^T e."""
    t0 = time.perf_counter()
    res = SuiteResult("gradients")
    rng = np.random.default_rng(seed)
    worst_fd = 0.0
    for _ in range(instances):
        spec, theta, x, y = _random_net(rng)
        gen = NegEntropySimplex(spec.output_dim)
        g = netcore.loss_grad(spec, theta, gen, x, y)
        fd = netcore.fd_grad_oracle(spec, theta, gen, x, y, step=1e-6)
        err = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        worst_fd = max(worst_fd, err)
    res.add("reverse_mode_vs_fd", worst_fd <= 1e-5,
            f"max relative L2 error {worst_fd:.3e} over {instances} nets (tol 1e-5)")

    worst_jte = 0.0
    for _ in range(100):
        spec, theta, x, y = _random_net(rng, activations=("tanh", "softplus", "relu"))
        gen = NegEntropySimplex(spec.output_dim)
        g = netcore.loss_grad(spec, theta, gen, x, y)
        jac = netcore.jacobian(spec, theta, x)
        e = netcore.link_error(gen, netcore.forward(spec, theta, x), y)
        worst_jte = max(worst_jte, float(np.linalg.norm(g - jac.T @ e)))
    res.add("jacobian_transpose_e", worst_jte <= 1e-10,
            f"max absolute L2 gap {worst_jte:.3e} over 100 nets (tol 1e-10)")

    worst_zero = 0.0
    for name in netcore.MODEL_PRESETS:
        spec = netcore.model_preset(name, input_dim=6, output_dim=3, k=2)
        theta = netcore.zero_params(spec)
        for _ in range(20):
            out = netcore.forward(spec, theta, rng.standard_normal(6))
            worst_zero = max(worst_zero, float(np.abs(out).max()))
    res.add("zero_params_zero_logits", worst_zero == 0.0,
            f"max |logit| at theta=0 over presets {worst_zero:.3e} (must be 0)")

    res.duration = time.perf_counter() - t0
    return res


def suite_prop2(instances=200, seed=20240604) -> SuiteResult:
    """Risk decomposition residual per generator family."""
    t0 = time.perf_counter()
    res = SuiteResult("prop2")
    rng = np.random.default_rng(seed)
    gens = {
        "SquaredL2": lambda d: SquaredL2(d),
        "NegEntropySimplex": lambda d: NegEntropySimplex(d),
        "NormPower": lambda d: NormPowerGenerator(d, order=2.5, scale=1.3),
    }
    for name, factory in gens.items():
        worst = 0.0
        for _ in range(instances):
            card_y = int(rng.integers(2, 6))
            task = dataio.SyntheticTaskSpec(
                card_x=int(rng.integers(3, 9)), card_y=card_y,
                embed_dim=int(rng.integers(3, 7)),
                conditional_sharpness=float(rng.uniform(0.3, 3.0)),
                seed=int(rng.integers(0, 2 ** 31)))
            q = dataio.make_synthetic(task)
            spec = NetworkSpec(input_dim=task.embed_dim, output_dim=card_y,
                               blocks=(BlockSpec(6, "tanh"),))
            theta = netcore.init_params(spec, seed=int(rng.integers(0, 2 ** 31)),
                                        scale=1.0)
            worst = max(worst, bounds.risk_decomposition_residual(
                factory(card_y), q, spec, theta))
        res.add(f"decomposition_residual[{name}]", worst <= 1e-9,
                f"max residual {worst:.3e} over {instances} instances (tol 1e-9)")
    res.duration = time.perf_counter() - t0
    return res


def suite_prop3(instances=500, seed=20240605) -> SuiteResult:
    """Quadratic sandwich between conjugate norm-power envelopes."""
    t0 = time.perf_counter()
    res = SuiteResult("prop3")
    rng = np.random.default_rng(seed)
    failures = 0
    worst_slack = 0.0
    for _ in range(instances):
        dim = int(rng.integers(2, 9))
        b = rng.standard_normal((dim, dim))
        h = b.T @ b + 0.1 * np.eye(dim)
        mu = rng.standard_normal(dim) * 2.0
        lower, mid, upper, ok = optim.h_sandwich_check(h, mu, tol=1e-9)
        if not ok:
            failures += 1
        worst_slack = max(worst_slack, lower - mid, mid - upper)
    res.add("quadratic_sandwich", failures == 0,
            f"{failures} failures over {instances} random PD quadratics "
            f"(worst slack {worst_slack:.3e}, tol 1e-9)")

    lower, mid, upper, ok = optim.h_sandwich_check(np.eye(3), np.array([1.0, 2.0, -1.0]))
    res.add("isotropic_equality", ok and abs(lower - mid) < 1e-12
            and abs(upper - mid) < 1e-12,
            f"identity hessian gives lower=mid=upper ({lower:.6f})")
    lower, mid, upper, ok = optim.h_sandwich_check(np.diag([1.0, 4.0]),
                                                   np.array([1.0, 0.0]))
    res.add("analytic_2x2", ok and abs(lower - 0.125) < 1e-12
            and abs(mid - 0.5) < 1e-12 and abs(upper - 0.5) < 1e-12,
            "diag(1,4) at (1,0) gives (1/8, 1/2, 1/2)")
    res.duration = time.perf_counter() - t0
    return res


def suite_prop4(seed=20240606) -> SuiteResult:
    """Descent inequality and iteration-count trend on quadratics."""
    t0 = time.perf_counter()
    res = SuiteResult("prop4")
    rng = np.random.default_rng(seed)
    eps_targets = (1e-1, 1e-2, 1e-3)
    violations = 0
    trend_ok = True
    trend_detail = []
    for _q in range(20):
        dim = int(rng.integers(2, 11))
        b = rng.standard_normal((dim, dim)) / np.sqrt(dim)
        h = b.T @ b + 0.5 * np.eye(dim)
        lam_min, lam_max = diagnostics.sym_eigs_extreme(h)
        xi = NormPowerFn(order=2.0, scale=float(np.sqrt(lam_max)))
        theta = rng.standard_normal(dim)
        theta *= 2.0 / np.linalg.norm(h @ theta)  # ||g0|| = 2
        g0_val = 0.5 * float(theta @ h @ theta)
        counts = {}
        for k in range(200000):
            g = h @ theta
            gn = float(np.linalg.norm(g))
            for eps in eps_targets:
                if gn <= eps and eps not in counts:
                    counts[eps] = k
            if len(counts) == len(eps_targets):
                break
            alpha = optim.optimal_step(g, xi)
            if alpha is None:
                break
            val = 0.5 * float(theta @ h @ theta)
            theta = theta - alpha * g
            new_val = 0.5 * float(theta @ h @ theta)
            if new_val > val - optim.descent_decrement(g, xi) + 1e-9:
                violations += 1
        for eps in eps_targets:
            theory = 2.0 * lam_max * g0_val / (eps * eps)
            observed = counts.get(eps)
            if observed is None or observed > 4.0 * max(theory, 1.0):
                trend_ok = False
            trend_detail.append((eps, observed, theory))
    res.add("descent_violations", violations == 0,
            f"{violations} violations of the per-step decrement over 20 "
            "quadratics (tol 1e-9)")
    worst_ratio = max((obs / max(4.0 * max(th, 1.0), 1.0))
                      for _eps, obs, th in trend_detail if obs is not None)
    res.add("iteration_trend", trend_ok,
            "steps to reach ||g|| <= eps stay within 4x of the eps^-2 "
            f"theory count for eps in {eps_targets} "
            f"(worst observed/allowed = {worst_ratio:.3e})")

    # exact-decrement equality on the isotropic quadratic
    g = np.array([3.0, 4.0])
    drop = optim.descent_decrement(g, NormPowerFn(order=2.0, scale=1.0))
    res.add("isotropic_decrement", abs(drop - 0.5 * 25.0) < 1e-12,
            f"decrement {drop} equals ||g||^2/2 for the unit quadratic")

    # quadratic-equivalent training task: linear model + squared loss
    rng2 = np.random.default_rng(seed + 1)
    feats = rng2.standard_normal((64, 5))
    labels = rng2.integers(0, 3, size=64)
    spec = NetworkSpec(input_dim=5, output_dim=3, blocks=())
    theta0 = netcore.init_params(spec, seed=9, scale=1.0)
    a_scale = float(np.max(np.linalg.norm(feats, axis=1)))
    cfg = optim.SgdConfig(mode="optimalFromXi", batch_size=16, steps=60, seed=3,
                          eigen_every=30, xi=NormPowerFn(order=2.0, scale=a_scale))
    trace = optim.train(spec, SquaredL2(3), feats, labels, cfg, theta0)
    res.add("train_descent_violations", trace.descent_violations == 0,
            f"{trace.descent_violations} violations across 60 optimal-step "
            "minibatch updates on the linear squared-loss task")
    res.duration = time.perf_counter() - t0
    return res


def suite_prop5(instances=500, seed=20240607) -> SuiteResult:
    """Eigenvalue sandwich on the fitting error, plus rank rejection."""
    t0 = time.perf_counter()
    res = SuiteResult("prop5")
    rng = np.random.default_rng(seed)
    worst_low = 0.0   # how far the lower bound pokes above the error
    worst_high = 0.0  # how far the error pokes above the upper bound
    checked = 0
    for _ in range(instances):
        out_dim = int(rng.integers(2, 9))
        in_dim = int(rng.integers(3, 7))
        width = max(2 * out_dim, 6)
        spec = NetworkSpec(input_dim=in_dim, output_dim=out_dim,
                           blocks=(BlockSpec(width, "tanh"),))
        assert netcore.param_layout(spec).size >= 4 * out_dim
        theta = netcore.init_params(spec, seed=int(rng.integers(0, 2 ** 31)),
                                    scale=1.0)
        x = rng.standard_normal(in_dim)
        y = int(rng.integers(0, out_dim))
        gen = NegEntropySimplex(out_dim)
        jac = netcore.jacobian(spec, theta, x)
        lam_min, lam_max = diagnostics.sym_eigs_extreme(
            diagnostics.structure_matrix(jac))
        g = netcore.loss_grad(spec, theta, gen, x, y)
        lower, upper = diagnostics.sample_bounds(g, lam_min, lam_max)
        fit = diagnostics.fitting_error_l2(gen, y, netcore.forward(spec, theta, x))
        worst_low = max(worst_low, lower - fit)
        worst_high = max(worst_high, (fit - upper) / max(1.0, upper))
        checked += 1
    res.add("sample_sandwich", worst_low <= 1e-9 and worst_high <= 1e-9,
            f"{checked} overparameterized instances; worst lower overshoot "
            f"{worst_low:.3e}, worst scaled upper overshoot {worst_high:.3e} "
            "(tol 1e-9)")

    # rank-deficient structure matrices must be rejected, not clamped
    spec = NetworkSpec(input_dim=4, output_dim=3, blocks=(BlockSpec(6, "tanh"),))
    theta = netcore.zero_params(spec)
    jac = netcore.jacobian(spec, theta, np.ones(4))
    lam_min, lam_max = diagnostics.sym_eigs_extreme(
        diagnostics.structure_matrix(jac))
    try:
        diagnostics.sample_bounds(np.zeros(theta.size), lam_min, lam_max)
        rejected = False
    except RankDeficiencyError:
        rejected = True
    res.add("rank_deficiency_rejected", rejected,
            "zero-parameter tanh net yields a zero structure matrix and is "
            "rejected")

    # dataset-level bound: batch-mean error <= batch mean of per-sample uppers
    rng3 = np.random.default_rng(seed + 2)
    batch_fail = 0
    for _ in range(100):
        out_dim = int(rng3.integers(2, 5))
        spec = NetworkSpec(input_dim=4, output_dim=out_dim,
                           blocks=(BlockSpec(max(2 * out_dim, 6), "tanh"),))
        theta = netcore.init_params(spec, seed=int(rng3.integers(0, 2 ** 31)),
                                    scale=1.0)
        gen = NegEntropySimplex(out_dim)
        fits, uppers = [], []
        for _i in range(8):
            x = rng3.standard_normal(4)
            y = int(rng3.integers(0, out_dim))
            jac = netcore.jacobian(spec, theta, x)
            lam_min, lam_max = diagnostics.sym_eigs_extreme(
                diagnostics.structure_matrix(jac))
            g = netcore.loss_grad(spec, theta, gen, x, y)
            _lo, up = diagnostics.sample_bounds(g, lam_min, lam_max)
            fits.append(diagnostics.fitting_error_l2(
                gen, y, netcore.forward(spec, theta, x)))
            uppers.append(up)
        if np.mean(fits) > np.mean(uppers) + 1e-9:
            batch_fail += 1
    res.add("dataset_bound", batch_fail == 0,
            f"{batch_fail} violations of the batch-mean bound over 100 batches")
    res.duration = time.perf_counter() - t0
    return res


def suite_prop6(seed=20240608) -> SuiteResult:
    """Full-support descent lands between the entropy bounds."""
    t0 = time.perf_counter()
    res = SuiteResult("prop6")
    task = dataio.SyntheticTaskSpec(card_x=12, card_y=3, embed_dim=8,
                                    conditional_sharpness=1.2, seed=5)
    q = dataio.make_synthetic(task)
    gen = NegEntropySimplex(3)
    lower, upper = bounds.risk_bounds(gen, q)
    spec = netcore.model_preset("dense_tanh", input_dim=8, output_dim=3, k=1)
    theta = netcore.init_params(spec, seed=seed, scale=0.5)
    steps = 1500
    min_gap = np.inf
    risk_now = bounds.risk(gen, q, spec, theta)
    for _step in range(steps):
        min_gap = min(min_gap, risk_now - lower)
        grad = bounds.full_support_grad(spec, theta, gen, q)
        theta = optim.sgd_step(theta, grad, 0.5)
        risk_now = bounds.risk(gen, q, spec, theta)
    min_gap = min(min_gap, risk_now - lower)
    inside = (risk_now >= lower - 1e-6) and (risk_now <= upper + 1e-6)
    res.add("reaches_bound_window", inside,
            f"final risk {risk_now:.6f} vs bounds [{lower:.6f}, {upper:.6f}] "
            f"after {steps} exact gradient steps (tol 1e-6)")
    res.add("never_below_lower", min_gap >= -1e-6,
            f"min(risk - lower) over the trajectory = {min_gap:.3e} "
            "(floor -1e-6)")
    res.duration = time.perf_counter() - t0
    return res


def suite_prop7(seed=20240609) -> SuiteResult:
    """Monte Carlo concentration against the closed-form bound."""
    t0 = time.perf_counter()
    res = SuiteResult("prop7")

    prob, valid = bounds.gen_bound(gamma=1.0, zeta=0, card_x=4, card_y=2,
                                   n=10000, eps=0.1)
    ref = 3.0 * np.exp(-16.0)
    res.add("closed_form_arithmetic", abs(prob - ref) <= 1e-12 * ref,
            f"bound at (gamma=1, n=1e4, eps=0.1) = {prob:.6e} vs 3e^-16 "
            f"= {ref:.6e} (tol 1e-12 relative)")

    task = dataio.SyntheticTaskSpec(card_x=3, card_y=2, embed_dim=4,
                                    conditional_sharpness=1.0, seed=21)
    q = dataio.make_synthetic(task)
    gen = NegEntropySimplex(2)
    spec = netcore.model_preset("dense_tanh", input_dim=4, output_dim=2, k=1)
    theta = netcore.init_params(spec, seed=seed, scale=1.0)
    n, trials = 500, 1000
    gamma = bounds.gamma_max_loss(gen, spec, theta, q)
    zeta = bounds.information_loss(spec, theta, q)
    valid_from = gamma * np.sqrt(5.0 * (q.card_x - zeta) * q.card_y / n)
    eps_grid = [0.5 * valid_from, valid_from, 1.2 * valid_from,
                1.5 * valid_from, 2.0 * valid_from]
    report = bounds.mc_generalization_check(gen, spec, theta, q, n=n,
                                            trials=trials, eps_grid=eps_grid,
                                            seed=seed)
    ok = True
    details = []
    for eps, bound_val, freq in zip(report.eps_grid, report.bound_values,
                                    report.empirical_exceedance):
        if eps < report.valid_from:
            continue
        slack = 3.0 * np.sqrt(bound_val * (1.0 - bound_val) / trials)
        if freq > bound_val + slack:
            ok = False
        details.append(f"eps={eps:.4f}: freq={freq:.4f} <= "
                       f"bound={bound_val:.4f}+3sigma={slack:.4f}")
    res.add("mc_exceedance", ok, "; ".join(details))
    res.add("gamma_pmin_agreement",
            abs(gamma - bounds.gamma_via_pmin(gen, spec, theta, q)) <= 1e-10,
            f"max-scan gamma {gamma:.9f} matches -log p_min (tol 1e-10)")
    res.duration = time.perf_counter() - t0
    return res


def suite_probes(seed=20240610) -> SuiteResult:
    """Parameter-norm envelopes and the gamma endpoint identity."""
    t0 = time.perf_counter()
    res = SuiteResult("probes")
    rng = np.random.default_rng(seed)

    task = dataio.SyntheticTaskSpec(card_x=10, card_y=4, embed_dim=6,
                                    conditional_sharpness=1.0, seed=33)
    q = dataio.make_synthetic(task)
    gen = NegEntropySimplex(4)
    spec = netcore.model_preset("dense_tanh", input_dim=6, output_dim=4, k=1)

    zero_theta = netcore.zero_params(spec)
    x = q.feature_embedding[0]
    r_zero = gen.conjugate(netcore.forward(spec, zero_theta, x)) \
        - gen.conjugate(np.zeros(4))
    res.add("zero_params_zero_regularizer", r_zero == 0.0,
            f"R(0) = {r_zero!r} (must be exactly 0.0)")

    ok_env = True
    for radius_set in ((1e-3, 1e-2, 1e-1),):
        a_hat, b_hat = bounds.reg_equivalence_probe(
            gen, spec, x, radii=radius_set, samples_per_radius=200, seed=seed)
        if not a_hat <= b_hat:
            ok_env = False
    res.add("envelope_order", ok_env,
            f"a_hat={a_hat:.6e} <= b_hat={b_hat:.6e} over radii {radius_set}")

    gamma0 = bounds.gamma_max_loss(gen, spec, zero_theta, q)
    res.add("gamma_zero_endpoint", abs(gamma0 - np.log(4)) <= 1e-12,
            f"gamma at theta=0 is {gamma0:.15f} vs log|Y|={np.log(4):.15f} "
            "(tol 1e-12)")
    floor_ok = True
    for _ in range(20):
        theta = netcore.init_params(spec, seed=int(rng.integers(0, 2 ** 31)),
                                    scale=1.0)
        if bounds.gamma_max_loss(gen, spec, theta, q) < np.log(4) - 1e-12:
            floor_ok = False
    res.add("gamma_floor", floor_ok,
            "gamma >= log|Y| for 20 random parameter draws (p_min <= 1/|Y|)")

    # squared-loss linear model: the ratio R/||theta||^2 is an exact
    # nonnegative quadratic form
    lin = NetworkSpec(input_dim=5, output_dim=3, blocks=())
    sq = SquaredL2(3)
    xx = rng.standard_normal(5)
    xx /= np.linalg.norm(xx)
    a_lin, b_lin = bounds.reg_equivalence_probe(sq, lin, xx,
                                                radii=(1e-2, 1e-1),
                                                samples_per_radius=200,
                                                seed=seed + 1)
    res.add("linear_quadratic_probe", a_lin >= -1e-15 and b_lin <= 0.5 + 1e-12,
            f"ratios in [{a_lin:.3e}, {b_lin:.3e}] within [0, lambda_max=1/2]")
    res.duration = time.perf_counter() - t0
    return res


SUITES = {
    "conjugate": suite_conjugate,
    "softmax_ce": suite_softmax_ce,
    "gradients": suite_gradients,
    "prop2": suite_prop2,
    "prop3": suite_prop3,
    "prop4": suite_prop4,
    "prop5": suite_prop5,
    "prop6": suite_prop6,
    "prop7": suite_prop7,
    "probes": suite_probes,
}


def run_suites(names=None, fault=None):
    """Run the selected suites (all by default) and return their results."""
    selected = list(SUITES) if not names else list(names)
    results = []
    for name in selected:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        fn = SUITES[name]
        if name == "conjugate":
            results.append(fn(fault=fault))
        else:
            results.append(fn())
    return results
