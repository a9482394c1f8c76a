"""Numerical checks of the reconstruction lower bounds and the Jacobian-penalty
pathologies on hand-picked two-dimensional surfaces.

Both bounds are asymptotic (they assume the reconstruction is already close
to the input), so every audit also tags each sample as inside or outside a
near-convergence gate and reports the two populations separately.
"""

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import SIGMOID, penalty_rows, corrupt, decode, encode
from .errors import DomainError, ParameterError, UnsupportedConfigError
from .numerics import as_matrix, squared_loss

DEFAULT_GUARD = 1e-9
DEFAULT_GATE = 1e-2


def fd_jacobian_frob(p, x, step=1e-6):
    """Central-difference estimate of sum_ij (dh_j/dx_i)^2."""
    if step <= 0:
        raise ParameterError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        col = (encode(p, x + e) - encode(p, x - e)) / (2.0 * step)
        total += float(col @ col)
    return total


@dataclass
class BoundAudit:
    left: np.ndarray
    right: np.ndarray
    numerator: np.ndarray
    jacobian: np.ndarray
    holds: np.ndarray
    in_gate: np.ndarray
    degenerate: np.ndarray
    excluded: np.ndarray
    eps: float
    guard: float
    gate: float
    slack: np.ndarray = None
    left_se: np.ndarray = None
    numerator_se: np.ndarray = None
    jacobian_se: np.ndarray = None
    draws: int = 1
    notes: list = field(default_factory=list)

    @property
    def n(self):
        return self.left.shape[0]

    @property
    def n_gated(self):
        return int(np.sum(self.in_gate & ~self.excluded))

    @property
    def n_excluded(self):
        return int(np.sum(self.excluded))

    @staticmethod
    def _fraction(mask, holds):
        return float(np.mean(holds[mask])) if np.any(mask) else float("nan")

    @property
    def fraction_holding(self):
        return self._fraction(~self.excluded, self.holds)

    @property
    def fraction_holding_gated(self):
        return self._fraction(self.in_gate & ~self.excluded, self.holds)

    def product_bound_fraction(self, tol=1e-9):
        """Share of gated samples with  numerator <= left * ||J||^2 + tol."""
        ok = self.numerator <= self.left * self.jacobian + tol
        return self._fraction(self.in_gate & ~self.excluded, ok)


def _require_sigmoid(p):
    if p.enc_act != SIGMOID:
        raise UnsupportedConfigError("bound audits need a sigmoid encoder")


def _bound_terms(p, x_tilde, hidden_corrupt):
    """Squared-error terms for one draw: input error, hidden error, ||J||^2."""
    h = encode(p, x_tilde)
    xbar = decode(p, hidden_corrupt(h))
    left = squared_loss(x_tilde, xbar)
    numerator = squared_loss(h, encode(p, xbar))
    return left, numerator, penalty_rows(p, h)


def _assemble(left, numerator, jacobian, slack_extra, eps, guard, gate, **extra):
    degenerate = jacobian < guard
    safe = np.where(degenerate, 1.0, jacobian)
    right = np.where(degenerate, np.where(numerator == 0.0, 0.0, np.nan), numerator / safe)
    # a constant encoder has a zero numerator, so the bound is trivially 0
    excluded = degenerate & (numerator != 0.0)
    slack = eps * (1.0 + np.nan_to_num(right)) + slack_extra
    holds = np.where(excluded, False, left >= np.nan_to_num(right) - slack)
    return BoundAudit(
        left=left,
        right=right,
        numerator=numerator,
        jacobian=jacobian,
        holds=holds,
        in_gate=left < gate,
        degenerate=degenerate,
        excluded=excluded,
        eps=eps,
        guard=guard,
        gate=gate,
        slack=slack,
        **extra,
    )


def audit_theorem1(p, data, eps=1e-6, guard=DEFAULT_GUARD, gate=DEFAULT_GATE):
    """Per-sample check of  ||x - g(f(x))||^2 >= ||h - f(g(h))||^2 / ||J_f(x)||_F^2.

    A sample holds when ``left >= right - eps * (1 + right)``. Samples whose
    ``||J||^2`` falls below ``guard`` are flagged degenerate and, unless the
    numerator is exactly zero, excluded from the fractions.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    _require_sigmoid(p)
    X = as_matrix(data, "data")
    left, numerator, jac = _bound_terms(p, X, lambda h: h)
    zeros = np.zeros_like(left)
    return _assemble(
        left, numerator, jac, 0.0, eps, guard, gate,
        left_se=zeros, numerator_se=zeros, jacobian_se=zeros, draws=1,
    )


def _mean_se(samples):
    d = samples.shape[0]
    mean = samples.mean(axis=0)
    if d == 1:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(d)


def audit_theorem2(
    rng, p, data, noise, draws, eps=1e-6, guard=DEFAULT_GUARD, gate=DEFAULT_GATE,
    se_slack=3.0, hidden_noise=None,
):
    """Monte-Carlo check of  E||x~ - g(h~)||^2 >= E||h - f(g(h~))||^2 / E||J_f(x~)||^2.

    Each expectation is averaged over ``draws`` corruptions per sample. The
    ratio's standard error comes from the delta method, and a sample holds
    when ``left >= right - eps*(1+right) - se_slack*sqrt(se_left^2 + se_right^2)``.
    Hidden units are corrupted with ``hidden_noise`` (default: ``noise``).
    """
    if draws < 1:
        raise ParameterError("draws must be >= 1")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    _require_sigmoid(p)
    X = as_matrix(data, "data")
    hidden_noise = noise if hidden_noise is None else hidden_noise
    lefts, nums, jacs = [], [], []
    for _ in range(draws):
        xt = corrupt(rng, X, noise)
        left, num, jac = _bound_terms(p, xt, lambda h: corrupt(rng, h, hidden_noise))
        lefts.append(left)
        nums.append(num)
        jacs.append(jac)
    left, left_se = _mean_se(np.array(lefts))
    num, num_se = _mean_se(np.array(nums))
    jac, jac_se = _mean_se(np.array(jacs))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(jac > 0, num / jac, 0.0)
        rel = np.where(
            (num > 0) & (jac > 0),
            np.sqrt((num_se / np.where(num > 0, num, 1.0)) ** 2 + (jac_se / np.where(jac > 0, jac, 1.0)) ** 2),
            0.0,
        )
    right_se = np.abs(ratio) * rel
    slack_extra = se_slack * np.sqrt(left_se**2 + right_se**2)
    return _assemble(
        left, num, jac, slack_extra, eps, guard, gate,
        left_se=left_se, numerator_se=num_se, jacobian_se=jac_se, draws=draws,
    )


SURFACES = ("plane", "exp_slope", "cone")


@dataclass(frozen=True)
class AnalyticSurface:
    """A scalar code h(x1, x2) with closed-form gradient and penalty.

    plane:      h = 2 x1 + 2 x2   (x1, x2 >= 0)
    exp_slope:  h = 40 x1 + exp(-x2)
    cone:       h = sqrt(x1^2 + x2^2)   (apex excluded)

    ``penalty`` is ||grad h||^2, the squared Frobenius norm of the 1x2
    Jacobian, and ``penalty_gradient`` its derivative in x.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in SURFACES:
            raise ParameterError(f"unknown surface {self.kind!r}; choose from {SURFACES}")

    def in_domain(self, x):
        x1, x2 = x
        if self.kind == "plane":
            return x1 >= 0 and x2 >= 0
        if self.kind == "cone":
            return x1 != 0 or x2 != 0
        return True

    def value(self, x):
        x1, x2 = x
        if self.kind == "plane":
            return 2.0 * x1 + 2.0 * x2
        if self.kind == "exp_slope":
            return 40.0 * x1 + np.exp(-x2)
        return float(np.hypot(x1, x2))

    def gradient(self, x):
        x1, x2 = x
        if self.kind == "plane":
            return np.array([2.0, 2.0])
        if self.kind == "exp_slope":
            return np.array([40.0, -np.exp(-x2)])
        r = np.hypot(x1, x2)
        if r == 0:
            return np.zeros(2)
        return np.array([x1 / r, x2 / r])

    def penalty(self, x):
        if self.kind == "plane":
            return 8.0
        if self.kind == "exp_slope":
            return 1600.0 + float(np.exp(-2.0 * x[1]))
        return 1.0

    def penalty_gradient(self, x):
        if self.kind == "exp_slope":
            return np.array([0.0, -2.0 * np.exp(-2.0 * x[1])])
        # plane and cone have a constant penalty field
        return np.zeros(2)


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    x1: float
    x2: float
    h: float
    penalty: float
    loss: float
    distance: float


def _surface(surface):
    return surface if isinstance(surface, AnalyticSurface) else AnalyticSurface(surface)


def _start_point(s, x0):
    x = np.array(x0, dtype=np.float64)
    if x.shape != (2,):
        raise ParameterError("x0 must be a 2-D point")
    if not s.in_domain(x):
        raise DomainError(f"start point {tuple(x)} is outside the {s.kind} domain")
    return x


def _point(s, step, x, loss, target):
    return TrajectoryPoint(
        step, float(x[0]), float(x[1]), float(s.value(x)), float(s.penalty(x)),
        float(loss), float(np.hypot(*(x - target))),
    )


def penalty_descent_demo(surface, x0, eta, steps, target=(0.0, 0.0)):
    """Gradient descent on ||grad h(x)||^2 over x; ``distance`` is to ``target``."""
    s = _surface(surface)
    x = _start_point(s, x0)
    target = np.asarray(target, dtype=np.float64)
    out = [_point(s, 0, x, s.penalty(x), target)]
    for t in range(1, steps + 1):
        x = x - eta * s.penalty_gradient(x)
        out.append(_point(s, t, x, s.penalty(x), target))
    return out


def rehr_descent_demo(surface, target, x0, eta, steps):
    """Gradient descent on (h(x) - h(target))^2 over x."""
    s = _surface(surface)
    x = _start_point(s, x0)
    target = np.asarray(target, dtype=np.float64)
    h_target = s.value(target)

    def loss(z):
        return (s.value(z) - h_target) ** 2

    out = [_point(s, 0, x, loss(x), target)]
    for t in range(1, steps + 1):
        x = x - eta * 2.0 * (s.value(x) - h_target) * s.gradient(x)
        out.append(_point(s, t, x, loss(x), target))
    return out
