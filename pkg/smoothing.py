"""Exact checks of the Kolmogorov-distance perturbation inequalities on discrete pairs (X, Y).

For β = ‖E(|Y|^k | X)‖_r and any λ > 0, t:

    μ(X+Y <= t) >= μ(X <= t-λ) - β λ^{-k}
    μ(X+Y <= t) <= μ(X <= t+λ) + β λ^{-k}

and with λ = (β√(2π))^{1/(k+1)} the one-sided bounds
δ(X+Y) <= δ(X) + c' β^{1/(k+1)} and δ(X) <= δ(X+Y) + c' β^{1/(k+1)}
with c' = 2 (2π)^{-k/(2(k+1))}.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from op.distributions import DiscreteDist, PROB_TOL, std_normal_cdf
from op.errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
EDGE_OFFSET = 1e-9
BOUND_GUARD = 1e-12
FLOAT_GUARD = 1e-12


@dataclass(eq=False)
class DiscreteJoint:
    xs: np.ndarray
    ys: np.ndarray
    probs: np.ndarray
    weights: np.ndarray = None
    total: int = None

    @classmethod
    def from_atoms(cls, atoms):
        """:param atoms: iterable of (x, y, prob)"""
        atoms = list(atoms)
        if not atoms:
            raise DomainError("a joint law needs at least one atom")
        arr = np.asarray(atoms, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or np.any(arr[:, 2] < 0):
            raise DomainError("atoms must be finite with nonnegative mass")
        if abs(math.fsum(arr[:, 2]) - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {math.fsum(arr[:, 2])!r}, not 1")
        keep = arr[:, 2] > 0
        return cls(xs=arr[keep, 0], ys=arr[keep, 1], probs=arr[keep, 2])

    @classmethod
    def from_weights(cls, xs, ys, weights):
        weights = np.asarray(weights, dtype=np.int64)
        if np.any(weights < 0) or weights.sum() <= 0:
            raise DomainError("weights must be nonnegative and not all zero")
        keep = weights > 0
        total = int(weights.sum())
        return cls(xs=np.asarray(xs, dtype=np.float64)[keep], ys=np.asarray(ys, dtype=np.float64)[keep],
                   probs=weights[keep] / total, weights=weights[keep], total=total)

    @property
    def exact(self):
        return self.weights is not None

    def _law(self, values):
        if self.exact:
            return DiscreteDist.from_weights(values, self.weights)
        return DiscreteDist.from_atoms(zip(values.tolist(), self.probs.tolist()))

    def marginal_x(self):
        return self._law(self.xs)

    def marginal_y(self):
        return self._law(self.ys)

    def sum_law(self):
        return self._law(self.xs + self.ys)


def delta_of(dist):
    """δ(Z) = sup_t |μ(Z <= t) - Φ(t)| for a finite-support law."""
    if len(dist) == 0:
        raise DomainError("empty support")
    phi = np.atleast_1d(std_normal_cdf(dist.values))
    right = np.cumsum(dist.probs)
    left = right - dist.probs
    return float(max(np.abs(right - phi).max(), np.abs(left - phi).max()))


def _parse_r(r):
    if isinstance(r, str):
        r = math.inf if r.lower() in ("inf", "infinity") else float(r)
    if not (r >= 1):
        raise DomainError(f"r must be >= 1 or inf, got {r!r}")
    return r


def conditional_moment_norm(joint, k, r):
    """‖E(|Y|^k | X)‖_r under the X-marginal (max over atoms for r = inf)."""
    if not k > 0:
        raise DomainError("k must be positive")
    r = _parse_r(r)
    ux, inverse = np.unique(joint.xs, return_inverse=True)
    px = np.zeros(len(ux))
    mk = np.zeros(len(ux))
    np.add.at(px, inverse, joint.probs)
    np.add.at(mk, inverse, joint.probs * np.abs(joint.ys) ** k)
    h = mk / px
    if math.isinf(r):
        return float(h.max())
    return math.fsum(px * h ** r) ** (1.0 / r)


def explicit_constant(k):
    """c' = 2 (2π)^{-k/(2(k+1))}; the k -> inf limit is 2/√(2π)."""
    if not k > 0:
        raise DomainError("k must be positive")
    if math.isinf(k):
        return 2.0 / SQRT_2PI
    return 2.0 * (2.0 * math.pi) ** (-k / (2.0 * (k + 1.0)))


def lambda_star(beta, k):
    return (beta * SQRT_2PI) ** (1.0 / (k + 1.0))


def default_lambda_grid(points=50, lo=1e-3, hi=1e2):
    return np.geomspace(lo, hi, points)


@dataclass
class Violation:
    side: str
    t: float
    lam: float
    lhs: float
    rhs: float


def _cum_counts(law, exact):
    if exact:
        return np.concatenate(([0], np.cumsum(law.weights)))
    return np.concatenate(([0.0], np.cumsum(law.probs)))


def _t_grid(x_values, s_values, lam):
    base = np.concatenate([s_values, x_values, x_values + lam, x_values - lam])
    return np.unique(np.concatenate([base, base - EDGE_OFFSET, base + EDGE_OFFSET]))


def intermediate_inequality_check(joint, k, r, lambdas=None, t_grid=None):
    """Both shifted-CDF inequalities over a (t, λ) grid; returns the list of violations.

    Probabilities are compared in integer weight arithmetic for exact joints;
    only the irrational term βλ^{-k} carries a 1e-12 relative guard.
    """
    beta = conditional_moment_norm(joint, k, r)
    lambdas = default_lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    if np.any(lambdas <= 0):
        raise DomainError("λ must be positive")
    law_x, law_s = joint.marginal_x(), joint.sum_law()
    exact = joint.exact
    cx, cs = _cum_counts(law_x, exact), _cum_counts(law_s, exact)
    scale = joint.total if exact else 1.0

    violations = []
    for lam in lambdas:
        ts = _t_grid(law_x.values, law_s.values, lam) if t_grid is None else np.asarray(t_grid, dtype=np.float64)
        slack = scale * beta * lam ** (-k)
        guard = slack * BOUND_GUARD if exact else slack * BOUND_GUARD + FLOAT_GUARD
        p_s = cs[np.searchsorted(law_s.values, ts, side="right")]
        p_below = cx[np.searchsorted(law_x.values, ts - lam, side="right")]
        p_above = cx[np.searchsorted(law_x.values, ts + lam, side="right")]
        for side, gap in (("lower", p_below - p_s), ("upper", p_s - p_above)):
            bad = np.nonzero(gap > slack + guard)[0]
            for i in bad:
                lhs, rhs = (p_s[i], p_below[i] - slack) if side == "lower" else (p_s[i], p_above[i] + slack)
                violations.append(Violation(side=side, t=float(ts[i]), lam=float(lam),
                                            lhs=float(lhs / scale), rhs=float(rhs / scale)))
    return violations


@dataclass
class SmoothingReport:
    beta: float
    k: float
    r: float
    lambda_star: float
    c_prime: float
    delta_x: float
    delta_xy: float
    bound: float
    slack: float
    reverse_slack: float
    variance_branch: float
    c1_required: float
    c2_required: float
    violations: list = field(default_factory=list)


def _required_constant(excess, denominator):
    if excess <= 0:
        return 0.0
    return excess / denominator if denominator > 0 else math.inf


def lemma2_bound_check(joint, k, r):
    """Certify the sharp one-sided bounds; report the constants the stated two-sided forms would need."""
    r = _parse_r(r)
    beta = conditional_moment_norm(joint, k, r)
    c_prime = explicit_constant(k)
    term = c_prime * beta ** (1.0 / (k + 1.0))
    delta_x = delta_of(joint.marginal_x())
    delta_xy = delta_of(joint.sum_law())
    variance_branch = math.sqrt(conditional_moment_norm(joint, 2, math.inf))

    violations = []
    if delta_xy > delta_x + term + FLOAT_GUARD:
        violations.append("delta(X+Y) above delta(X) + c' beta^(1/(k+1))")
    if delta_x > delta_xy + term + FLOAT_GUARD:
        violations.append("delta(X) above delta(X+Y) + c' beta^(1/(k+1))")

    smoothing = min(beta ** (1.0 / (k + 1.0)), variance_branch)
    return SmoothingReport(
        beta=beta, k=k, r=r, lambda_star=lambda_star(beta, k), c_prime=c_prime,
        delta_x=delta_x, delta_xy=delta_xy, bound=delta_x + term,
        slack=delta_x + term - delta_xy, reverse_slack=delta_xy + term - delta_x,
        variance_branch=variance_branch,
        c1_required=_required_constant(delta_xy - 2.0 * delta_x, smoothing),
        c2_required=_required_constant(delta_x - 2.0 * delta_xy, smoothing),
        violations=violations)


def fit_stated_constants(reports):
    """Smallest (c_1, c_2) consistent with every report in the batch."""
    return (max((rep.c1_required for rep in reports), default=0.0),
            max((rep.c2_required for rep in reports), default=0.0))


def random_joint(rng, max_support=8, step=0.25, half_range=12, max_weight=9):
    """Random joint on a quarter grid with integer weights (exact probabilities)."""
    size = int(rng.integers(1, max_support + 1))
    xs = rng.integers(-half_range, half_range + 1, size=size) * step
    ys = rng.integers(-half_range, half_range + 1, size=size) * step
    weights = rng.integers(1, max_weight + 1, size=size)
    return DiscreteJoint.from_weights(xs, ys, weights)
