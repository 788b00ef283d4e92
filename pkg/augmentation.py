"""Variance-normalising augmentation of a martingale difference sequence.

Given X = (X_1..X_n) in the class with bound u = u_n, append
X_{n+1}..X_{n+[2d/u²]+1} so that the augmented predictable quadratic
variation equals v² + d on every path:

    residual = v² + d - Σ σ_k²,   k = [residual / u²]
    X_{n+j} = ±u                             for j <= k
            = ±(residual - k u²)^{1/2}       for j = k + 1
            = 0                              otherwise

each sign with probability 1/2 given the past. d is either
d_1 = E|Σσ² - v²| or d_∞ = ess sup |Σσ² - v²|.
"""
import math
from dataclasses import dataclass

import numpy as np

from empirics.rate import bolthausen_term, class_rate_term
from models.mds_models import Path, quadratic_variation_law, theoretical_v2
from models.membership import gamma_sequence, verify_class_membership
from op.errors import AugmentationError, DomainError, PlanInconsistencyError
from op.streams import STEP_TAIL, make_generator

L1 = "L1"
LINF = "Linf"
MODES = (L1, LINF)

# total length convention: n_hat + 1 = n + [2d/u²] + 1
LENGTH_CONVENTION = "n_hat+1"
RESIDUAL_TOL = 1e-12


@dataclass
class AugmentationPlan:
    u: float
    d: float
    mode: str
    n: int
    v2: float
    n_hat: int
    v_hat2: float

    def __post_init__(self):
        assert self.u > 0, "u must be positive"
        assert self.n_hat >= self.n, "n_hat must be at least n"
        assert self.v_hat2 >= self.v2, "v_hat2 must be at least v2"

    @property
    def tail_length(self):
        return self.n_hat + 1 - self.n

    @property
    def total_length(self):
        return self.n_hat + 1


def d_from_law(qv_law, v2, mode):
    """d_1 or d_∞ from the exact law of Σ σ_k² and v²."""
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    gaps = np.abs(qv_law.values - v2)
    if mode == L1:
        return math.fsum(qv_law.probs * gaps)
    return float(gaps.max())


def compute_d(model, n, mode=LINF):
    return d_from_law(quadratic_variation_law(model, n), theoretical_v2(model, n), mode)


def plan_from(n, v2, d, u, mode):
    if u <= 0:
        raise DomainError("u must be positive")
    if d < 0:
        raise DomainError("d must be nonnegative")
    n_hat = n + int(math.floor(2.0 * d / (u * u)))
    return AugmentationPlan(u=float(u), d=float(d), mode=mode, n=n, v2=float(v2),
                            n_hat=n_hat, v_hat2=float(v2 + d))


def make_plan(model, n, mode=LINF):
    return plan_from(n, theoretical_v2(model, n), compute_d(model, n, mode),
                     gamma_sequence(model, n).u_n, mode)


def tail_values(residual, u, length):
    """Magnitudes a_1..a_length of the appended symmetric two-point increments."""
    u2 = u * u
    k = int(math.floor(residual / u2))
    if k + 1 > length:
        raise PlanInconsistencyError(
            f"residual {residual!r} needs {k + 1} tail steps but the plan allows {length}")
    rem = max(0.0, residual - k * u2)
    mags = np.zeros(length)
    mags[:k] = u
    mags[k] = math.sqrt(rem)
    return k, mags


def augment_path(path, plan, key, path_id=None):
    """Append the normalising tail; returns (augmented path, k).

    The tail signs come from the STEP_TAIL slot of `key`, so the base path and
    its tail are independent streams of the same replication.
    """
    if path.n != plan.n:
        raise DomainError(f"path has length {path.n}, plan expects {plan.n}")
    qv = math.fsum(path.cond_vars)
    residual = plan.v2 + plan.d - qv
    if residual < 0:
        if residual < -RESIDUAL_TOL * max(1.0, plan.v_hat2):
            raise AugmentationError(
                f"negative residual variance {residual!r} on path {path_id} "
                f"(sum sigma^2 = {qv!r}, v^2 + d = {plan.v_hat2!r})",
                path_id=path_id, residual=residual)
        residual = 0.0
    k, mags = tail_values(residual, plan.u, plan.tail_length)
    signs = 2.0 * make_generator(key.at_step(STEP_TAIL)).integers(0, 2, size=plan.tail_length) - 1.0
    tail = mags * signs
    values = np.concatenate([path.values, tail])
    cond_vars = np.concatenate([path.cond_vars, mags * mags])
    base = path.base_values if path.base_values is not None else path.values
    augmented = Path.build(values, cond_vars, plan.v_hat2,
                           base_values=np.concatenate([base, tail]), key=key)
    return augmented, k


def tail_class_excess(augmented, plan):
    """max over appended steps of E(|X|³|F) - u E(X²|F) = a²(a - u) for the ±a tail laws."""
    mags = np.sqrt(augmented.cond_vars[plan.n:])
    return float(np.max(mags ** 3 - plan.u * mags * mags))


def tail_conditional_means(augmented, plan):
    """Exact conditional means of the symmetric two-point tail steps."""
    mags = np.sqrt(augmented.cond_vars[plan.n:])
    return 0.5 * mags + 0.5 * (-mags)


def verify_augmented_class(model, plan, augmented=None):
    """The head passes the class check with the single bound u; the tail never exceeds it."""
    head = verify_class_membership(model, plan.n, gamma=plan.u)
    tail = tail_class_excess(augmented, plan) if augmented is not None else 0.0
    return head.passed and tail <= RESIDUAL_TOL, max(head.max_excess, tail)


@dataclass
class Theorem2Terms:
    n: int
    class_term: float
    bolthausen_term: float
    sup_term: float
    l1_term: float
    min_term: float
    delta_hat: float
    ratio: float


def bound_terms_from_norms(norm_inf, norm_1):
    """(‖V²-1‖_∞^{1/2}, ‖V²-1‖_1^{1/3}, their minimum)."""
    sup_term = math.sqrt(norm_inf)
    l1_term = norm_1 ** (1.0 / 3.0)
    return sup_term, l1_term, min(sup_term, l1_term)


def theorem2_bound_terms(model, n_values, estimates):
    """Per grid point terms of the relaxed bound, with the empirical constant Δ̂ / (rate + min-term).

    :param n_values: grid sizes, aligned with `estimates`
    :param estimates: DeltaEstimate per grid point
    """
    records = []
    for n, est in zip(n_values, estimates):
        v2 = theoretical_v2(model, n)
        v_n = math.sqrt(v2)
        u_n = gamma_sequence(model, n).u_n
        law = quadratic_variation_law(model, n)
        sup_term, l1_term, min_term = bound_terms_from_norms(
            d_from_law(law, v2, LINF) / v2, d_from_law(law, v2, L1) / v2)
        class_term = class_rate_term(n, u_n, v_n)
        records.append(Theorem2Terms(n=n, class_term=class_term, bolthausen_term=bolthausen_term(n, v_n),
                                     sup_term=sup_term, l1_term=l1_term, min_term=min_term,
                                     delta_hat=est.ks, ratio=est.ks / (class_term + min_term)))
    return records


def fitted_constant(records):
    """(C, spread): C = max ratio, spread = max/min ratio over the grid."""
    ratios = [r.ratio for r in records]
    positive = [r for r in ratios if r > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    return max(ratios), spread
