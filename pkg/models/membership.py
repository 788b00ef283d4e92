"""Class bounds γ_k, the conditional-moment membership check and exact enumeration oracles."""
import math
from dataclasses import dataclass

from op.errors import DomainError, UnsupportedError

EXCESS_TOL = 1e-12


@dataclass
class GammaSequence:
    gammas: list
    u_n: float


@dataclass
class MembershipReport:
    """max over k and reachable states of E(|X_k|³|F) - γ_k E(X_k²|F)."""
    max_excess: float
    k: int
    state: float
    passed: bool
    checked: int
    reason: str = ""


def gamma_sequence(model, n):
    """Per-index γ_k and u_n = max_k γ_k."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gammas = [float(model.gamma(k)) for k in range(1, n + 1)]
    for g in gammas:
        if not (g > 0 and math.isfinite(g)):
            raise DomainError(f"class bound must be positive and finite, got {g!r}")
    return GammaSequence(gammas=gammas, u_n=max(gammas))


def verify_class_membership(model, n, gamma=None):
    """Check E(|X_k|³|F_{k-1}) <= γ_k E(X_k²|F_{k-1}) on every reachable state.

    :param gamma: constant bound to test instead of the model's own γ_k
    A non-finite moment ratio is reported as a failure, not raised.
    """
    gammas = [gamma] * n if gamma is not None else gamma_sequence(model, n).gammas
    worst = MembershipReport(max_excess=-math.inf, k=0, state=math.nan, passed=True, checked=0)
    seen = {}
    for k in range(1, n + 1):
        for s, _ in model.state_law(k):
            cache_key = (s, gammas[k - 1])
            if cache_key not in seen:
                m3 = model.cond_abs_moment(s, 3)
                m2 = model.cond_abs_moment(s, 2)
                seen[cache_key] = m3 - gammas[k - 1] * m2
            excess = seen[cache_key]
            worst.checked += 1
            if not math.isfinite(excess):
                return MembershipReport(max_excess=math.inf, k=k, state=s, passed=False,
                                        checked=worst.checked, reason="unbounded conditional moment ratio")
            if excess > worst.max_excess:
                worst.max_excess, worst.k, worst.state = excess, k, s
    worst.passed = worst.max_excess <= EXCESS_TOL
    if not worst.passed:
        worst.reason = f"condition violated at k={worst.k}, scale={worst.state}"
    return worst


def martingale_defect(model, n):
    """max |E(X_k | F_{k-1})| over reachable states, computed exactly from the conditional laws."""
    worst = 0.0
    for k in range(1, n + 1):
        for s, _ in model.state_law(k):
            law = model.cond_law(s)
            if law is None:
                # continuous noise: conditional mean is the (checked) noise mean
                continue
            worst = max(worst, abs(law.mean()))
    return worst


@dataclass
class EnumeratedPath:
    values: tuple
    base_values: tuple
    cond_vars: tuple
    prob: float


def enumerate_paths(model, n, limit=2 ** 16):
    """All paths of length n with exact probabilities (discrete noise only)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    paths = [EnumeratedPath((), (), (), 1.0)]
    for _ in range(n):
        grown = []
        for path in paths:
            prev = path.base_values[-1] if path.base_values else None
            s = model.next_scale(prev)
            joint = model.cond_joint(s)
            if joint is None:
                raise UnsupportedError("enumeration needs discrete noise")
            for base, value, p in joint:
                grown.append(EnumeratedPath(path.values + (value,), path.base_values + (base,),
                                            path.cond_vars + (model.cond_var(s),), path.prob * p))
        if len(grown) > limit:
            raise UnsupportedError(f"more than {limit} paths to enumerate")
        paths = grown
    return paths


def merge_last_two(model, n):
    """Excess of the merged increment X_{n-1} + X_n against the widened bound 4 u_n.

    Merging the last two increments keeps the martingale property and lands in
    the class with bound 4u; checked exactly on discrete-noise models.
    """
    if n < 2:
        raise DomainError("merging needs n >= 2")
    u_n = gamma_sequence(model, n).u_n
    worst = -math.inf
    for s, _ in model.state_law(n - 1):
        joint = model.cond_joint(s)
        if joint is None:
            raise UnsupportedError("merging check needs discrete noise")
        m3 = 0.0
        m2 = 0.0
        for base, value, p in joint:
            follow = model.cond_joint(model.next_scale(base))
            for _, nxt, q in follow:
                total = value + nxt
                m3 += p * q * abs(total) ** 3
                m2 += p * q * total * total
        worst = max(worst, m3 - 4.0 * u_n * m2)
    return worst
