"""Linear processes over martingale innovations and their martingale-coboundary split.

    X_k = Σ_j α_{k-j} ε_j = Σ_l α_l ε_{k-l}

With A = Σ α_j and m = A ε_0, the function g = Σ_i c_i ε_i with

    c_i = Σ_{j >= -i} α_j          (i < 0)
    c_i = -Σ_{j <= -(i+1)} α_j     (i >= 0)

satisfies X_0 = m + g - g∘T, where g∘T shifts every innovation index by +1.
Summing the shifted identity gives S_n(X) = A S_n(ε) + g∘T - g∘T^{n+1}.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np
from scipy import special

from distributed import all_gather, get_world_size, reduce_concat, split_range
from empirics.delta import MIN_REPS, estimate_from_sums
from models.mds_models import theoretical_v2
from op.errors import DegenerateModelError, DomainError, UnsupportedError
from op.streams import StreamKey

FINITE = "finite"
GEOMETRIC = "geometric"
POLYNOMIAL = "polynomial"
FAMILIES = (FINITE, GEOMETRIC, POLYNOMIAL)

CONVERGES = "CONVERGES"
DIVERGES = "DIVERGES"

TAIL_TOL = 1e-10
MAX_SUPPORT = 10 ** 6
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class CoeffSeq:
    """α_j: a finite table {j: α_j} or a named one-sided infinite family.

    geometric(ρ): α_j = ρ^j for j >= 0, |ρ| < 1
    polynomial(s): α_j = j^{-s} for j >= 1, s > 1
    """
    family: str
    coeffs: tuple = ()
    rho: float = None
    s: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedError(f"unknown coefficient family {self.family!r}")
        if self.family == FINITE:
            if not self.coeffs:
                raise DomainError("a finite coefficient sequence needs at least one entry")
            for _, v in self.coeffs:
                if not math.isfinite(float(v)):
                    raise DomainError("coefficients must be finite")
        elif self.family == GEOMETRIC and not (self.rho is not None and abs(self.rho) < 1):
            raise DomainError(f"geometric family needs |rho| < 1, got {self.rho!r}")
        elif self.family == POLYNOMIAL and not (self.s is not None and self.s > 1):
            raise DomainError(f"polynomial family needs s > 1, got {self.s!r}")

    @classmethod
    def finite(cls, mapping):
        """:param mapping: dict or iterable of (j, α_j); zero entries are dropped"""
        items = mapping.items() if isinstance(mapping, dict) else mapping
        table = {}
        for j, v in items:
            table[int(j)] = table.get(int(j), 0) + v
        return cls(family=FINITE, coeffs=tuple(sorted((j, v) for j, v in table.items() if v != 0)) or ((0, 0),))

    @classmethod
    def geometric(cls, rho):
        return cls(family=GEOMETRIC, rho=float(rho))

    @classmethod
    def polynomial(cls, s):
        return cls(family=POLYNOMIAL, s=float(s))

    @classmethod
    def named(cls, family, **params):
        if family == GEOMETRIC:
            return cls.geometric(**params)
        if family == POLYNOMIAL:
            return cls.polynomial(**params)
        raise UnsupportedError(f"unknown coefficient family {family!r}")

    @property
    def is_finite(self):
        return self.family == FINITE

    @property
    def lo(self):
        if self.is_finite:
            return self.coeffs[0][0]
        return 0 if self.family == GEOMETRIC else 1

    @property
    def hi(self):
        if self.is_finite:
            return self.coeffs[-1][0]
        return math.inf

    def as_dict(self):
        if not self.is_finite:
            raise UnsupportedError("infinite support; truncate first")
        return dict(self.coeffs)

    def dense(self):
        """α_lo..α_hi as a float array."""
        table = self.as_dict()
        return np.array([float(table.get(j, 0.0)) for j in range(self.lo, self.hi + 1)])

    @property
    def A(self):
        if self.family == GEOMETRIC:
            return 1.0 / (1.0 - self.rho)
        if self.family == POLYNOMIAL:
            return float(special.zeta(self.s))
        return math.fsum(float(v) for _, v in self.coeffs)

    @property
    def sum_sq(self):
        if self.family == GEOMETRIC:
            return 1.0 / (1.0 - self.rho ** 2)
        if self.family == POLYNOMIAL:
            return float(special.zeta(2.0 * self.s))
        return math.fsum(float(v) ** 2 for _, v in self.coeffs)

    def right_tails(self, ks):
        """Σ_{j >= k} α_j for each k."""
        ks = np.asarray(ks, dtype=np.float64)
        if self.family == GEOMETRIC:
            return np.where(ks <= 0, self.A, self.rho ** np.maximum(ks, 0) / (1.0 - self.rho))
        if self.family == POLYNOMIAL:
            return special.zeta(self.s, np.maximum(ks, 1.0))
        idx, vals = self._arrays()
        return np.array([math.fsum(vals[idx >= k]) for k in ks])

    def left_tails(self, ks):
        """Σ_{j <= -k} α_j for each k."""
        ks = np.asarray(ks, dtype=np.float64)
        if not self.is_finite:
            if np.any(ks < 1):
                raise DomainError("left tails of named families are defined for k >= 1")
            # both named families live on j >= 0
            return np.zeros(len(ks))
        idx, vals = self._arrays()
        return np.array([math.fsum(vals[idx <= -k]) for k in ks])

    def _arrays(self):
        return (np.array([j for j, _ in self.coeffs]),
                np.array([float(v) for _, v in self.coeffs]))

    def l2_tail(self, last):
        """ℓ² mass of the coefficients beyond index `last`."""
        if self.family == GEOMETRIC:
            return self.rho ** (2 * (last + 1)) / (1.0 - self.rho ** 2)
        if self.family == POLYNOMIAL:
            return float(special.zeta(2.0 * self.s, last + 1))
        return 0.0

    def truncate(self, tol=TAIL_TOL, max_support=MAX_SUPPORT):
        """(finite copy, ℓ² tail mass dropped)."""
        if self.is_finite:
            return self, 0.0
        if self.family == GEOMETRIC:
            if self.rho == 0:
                last = 0
            else:
                last = int(math.ceil(math.log(tol * (1.0 - self.rho ** 2)) / (2.0 * math.log(abs(self.rho)))))
        else:
            last = int(math.ceil((tol * (2.0 * self.s - 1.0)) ** (1.0 / (1.0 - 2.0 * self.s))))
            while last > 1 and self.l2_tail(last - 1) <= tol:
                last -= 1
            while self.l2_tail(last) > tol and last < max_support:
                last += 1
        last = max(self.lo, min(last, self.lo + max_support - 1))
        js = np.arange(self.lo, last + 1)
        vals = self.rho ** js if self.family == GEOMETRIC else js.astype(np.float64) ** -self.s
        return CoeffSeq.finite(zip(js.tolist(), vals.tolist())), self.l2_tail(last)

    def descriptor(self):
        if self.family == GEOMETRIC:
            return f"geometric(rho={self.rho!r})"
        if self.family == POLYNOMIAL:
            return f"polynomial(s={self.s!r})"
        return ",".join(f"{j}:{v}" for j, v in self.coeffs)


@dataclass
class Condition3Report:
    p: float
    K: int
    partial_sums: np.ndarray
    value: float
    verdict: str
    printed_form: str
    note: str = ""


def condition3_check(coeffs, p, K=10 ** 4):
    """Σ_{k>=1} |Σ_{j>=k} α_j|^p + |Σ_{j<=-k} α_j|^p, with partial sums up to K.

    The variant with Σ_{j<=k} in the second term tends to |A|^p termwise and is
    reported in `printed_form` only.
    """
    if not isinstance(coeffs, CoeffSeq):
        raise UnsupportedError(f"unsupported coefficient object {type(coeffs).__name__}")
    if not p >= 3:
        raise DomainError(f"moment order p must be >= 3, got {p!r}")
    if K < 1:
        raise DomainError("K must be positive")
    A = coeffs.A
    printed_form = DIVERGES if abs(A) > 0 else CONVERGES
    note = ""

    if coeffs.is_finite:
        needed = max(coeffs.hi, -coeffs.lo, 1)
        ks = np.arange(1, max(K, needed) + 1)
        terms = np.abs(coeffs.right_tails(ks)) ** p + np.abs(coeffs.left_tails(ks)) ** p
        partial = np.cumsum(terms)
        return Condition3Report(p=p, K=K, partial_sums=partial[:K], value=math.fsum(terms[:needed]),
                                verdict=CONVERGES, printed_form=printed_form)

    ks = np.arange(1, K + 1)
    terms = np.abs(coeffs.right_tails(ks)) ** p + np.abs(coeffs.left_tails(ks)) ** p
    partial = np.cumsum(terms)
    if coeffs.family == GEOMETRIC:
        r = abs(coeffs.rho) ** p
        value = (abs(coeffs.rho) / abs(1.0 - coeffs.rho)) ** p / (1.0 - r) if r < 1 else math.inf
        verdict = CONVERGES
    else:
        # Σ_{j>=k} j^{-s} ~ k^{1-s}/(s-1)
        decay = p * (coeffs.s - 1.0)
        if decay > 1:
            verdict = CONVERGES
            tail = K ** (1.0 - decay) / ((coeffs.s - 1.0) ** p * (decay - 1.0))
            value = float(partial[-1]) + tail
            note = f"value includes an integral tail estimate {tail:.3e} beyond K"
        else:
            verdict, value = DIVERGES, math.inf
    return Condition3Report(p=p, K=K, partial_sums=partial, value=value, verdict=verdict,
                            printed_form=printed_form, note=note)


@dataclass
class CoboundaryDecomposition:
    A: float
    g_coeffs: dict
    p: float = math.inf
    g_norm_p: float = None
    truncation_tail: float = 0.0

    @property
    def is_martingale(self):
        return not self.g_coeffs

    @property
    def g_support(self):
        if not self.g_coeffs:
            return 0, -1
        return min(self.g_coeffs), max(self.g_coeffs)


def _exact(values):
    return all(isinstance(v, (int, Fraction)) for v in values)


def coboundary_decompose(coeffs, p=math.inf, innovation=None):
    """Solve f - m - g + g∘T = 0 coefficientwise for finite support.

    Coefficient of ε_i in f is α_{-i}; the recursion c_i = c_{i-1} + α_{-i} - A[i = 0]
    runs in rational arithmetic and ends at zero past the support.
    """
    if not coeffs.is_finite:
        raise UnsupportedError("coboundary_decompose needs finite support; decompose coeffs.truncate()[0]")
    table = coeffs.as_dict()
    exact = _exact(table.values())
    alpha = {j: Fraction(v) for j, v in table.items()}
    A = sum(alpha.values(), Fraction(0))

    g = {}
    c = Fraction(0)
    for i in range(min(-coeffs.hi, 0), max(-coeffs.lo, 0) + 1):
        c = c + alpha.get(-i, Fraction(0)) - (A if i == 0 else 0)
        if c != 0:
            g[i] = c
    assert c == 0, "coboundary recursion did not close"

    if not exact:
        g = {i: float(v) for i, v in g.items()}
    decomposition = CoboundaryDecomposition(A=A if exact else float(A), g_coeffs=g, p=p)
    if innovation is not None and (math.isinf(p) or p == 2):
        decomposition.g_norm_p = g_norm(decomposition, innovation, p).value
    return decomposition


def telescoping_residual(coeffs, decomposition):
    """Coefficients of f - m - g + g∘T per innovation index (all zero for a valid split)."""
    table = coeffs.as_dict()
    g = {i: Fraction(v) for i, v in decomposition.g_coeffs.items()}
    A = Fraction(decomposition.A)
    lo = min([-coeffs.hi, 0] + list(g))
    hi = max([-coeffs.lo, 0] + [i + 1 for i in g])
    out = {}
    for i in range(lo, hi + 1):
        f_i = Fraction(table.get(-i, 0))
        out[i] = f_i - (A if i == 0 else 0) - g.get(i, 0) + g.get(i - 1, 0)
    return out


def max_telescoping_residual(coeffs, decomposition):
    return float(max(abs(v) for v in telescoping_residual(coeffs, decomposition).values()))


def check_innovation(innovation):
    if not innovation.normalized:
        raise DomainError(f"innovations must be stationary with V^2 = 1, got {innovation.descriptor()}")


def innovation_window(coeffs, n):
    """First and last innovation index needed for X_1..X_n and g∘T^1..g∘T^{n+1}."""
    return 1 + min(-coeffs.hi, 0), n + 1 + max(-coeffs.lo, 0)


@dataclass(eq=False)
class LinearPath:
    values: np.ndarray
    innovations: np.ndarray
    first_index: int
    coeffs: CoeffSeq
    truncation_tail: float = 0.0
    warning: str = None
    key: object = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.values)

    def eps(self, indices):
        return self.innovations[np.asarray(indices) - self.first_index]


def _finite_copy(coeffs, tail_tol):
    finite, tail = coeffs.truncate(tail_tol)
    warning = None
    if tail > tail_tol:
        warning = f"truncated {coeffs.descriptor()} keeps an l2 tail mass of {tail:.3e} > {tail_tol:.1e}"
    return finite, tail, warning


def simulate_linear_process(coeffs, innovation, n, key, tail_tol=TAIL_TOL):
    """X_1..X_n from one innovation stream covering every index the path and g∘T^k need."""
    if n < 1:
        raise DomainError("n must be at least 1")
    check_innovation(innovation)
    finite, tail, warning = _finite_copy(coeffs, tail_tol)
    first, last = innovation_window(finite, n)
    eps, _, _ = innovation.draw(last - first + 1, key)
    out = np.convolve(eps, finite.dense(), mode="valid")
    start = 1 - finite.hi - first
    return LinearPath(values=out[start:start + n], innovations=eps, first_index=first, coeffs=finite,
                      truncation_tail=tail, warning=warning, key=key)


def coboundary_path_terms(decomposition, path):
    """g∘T^k = Σ_i c_i ε_{i+k} for k = 1..n+1 on a simulated path."""
    ks = np.arange(1, path.n + 2)
    out = np.zeros(len(ks))
    for i, c in decomposition.g_coeffs.items():
        out += float(c) * path.eps(ks + i)
    return out


def pathwise_residual(decomposition, path):
    """max_k |X_k - A ε_k - (g∘T^k - g∘T^{k+1})|."""
    G = coboundary_path_terms(decomposition, path)
    ks = np.arange(1, path.n + 1)
    resid = path.values - float(decomposition.A) * path.eps(ks) - (G[:-1] - G[1:])
    return float(np.max(np.abs(resid)))


@dataclass
class GNorm:
    p: float
    value: float
    stderr: float = 0.0
    exact: bool = True


def g_norm(decomposition, innovation, p, reps=10 ** 4, key=None):
    """‖g‖_p: sup bound for p = inf, orthogonality for p = 2, Monte Carlo otherwise."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p!r}")
    c = np.array([float(v) for v in decomposition.g_coeffs.values()])
    if len(c) == 0:
        return GNorm(p=p, value=0.0)
    if math.isinf(p):
        return GNorm(p=p, value=float(np.sum(np.abs(c))) * innovation.bound())
    if p == 2:
        return GNorm(p=p, value=math.sqrt(math.fsum(c * c) * innovation.tau2(2)))

    key = key or StreamKey(0)
    draws = np.empty(reps)
    for r in range(reps):
        eps, _, _ = innovation.draw(len(c), key.substream(r))
        draws[r] = abs(float(np.dot(c, eps))) ** p
    mean = float(draws.mean())
    value = mean ** (1.0 / p)
    # delta method on x -> x^{1/p}
    se = float(draws.std(ddof=1) / math.sqrt(reps)) * value / (p * mean) if mean > 0 else 0.0
    return GNorm(p=p, value=value, stderr=se, exact=False)


def sum_weights(coeffs, n, first, last):
    """w with S_n(X) = Σ_j w_j ε_j, aligned to innovation indices first..last."""
    conv = np.convolve(coeffs.dense()[::-1], np.ones(n))
    w = np.zeros(last - first + 1)
    offset = 1 - coeffs.hi - first
    w[offset:offset + len(conv)] = conv
    return w


def _chunk_linear_sums(innovation, weights, n, m_offset, A, key, bounds):
    start, stop = bounds
    out = np.empty((stop - start, 2))
    for i, r in enumerate(range(start, stop)):
        eps, _, _ = innovation.draw(len(weights), key.substream(r))
        out[i, 0] = np.dot(weights, eps)
        out[i, 1] = A * eps[m_offset:m_offset + n].sum()
    return out


@dataclass
class LinearDeltaEstimate:
    n: int
    f: object
    m: object
    A: float
    v_n: float
    truncation_tail: float = 0.0
    warning: str = None


def estimate_linear_deltas(coeffs, innovation, n, reps, key, delta_conf=0.01, workers=1,
                           progress=False, tail_tol=TAIL_TOL):
    """Paired Δ̂_n(f), Δ̂_n(m) from shared innovation substreams, both normalised by v_n(m) = |A| v_n(ε)."""
    if reps < MIN_REPS:
        raise DomainError(f"reps={reps} is below the minimum of {MIN_REPS}")
    check_innovation(innovation)
    finite, tail, warning = _finite_copy(coeffs, tail_tol)
    A = finite.A
    if A == 0:
        raise DegenerateModelError("A = Σ α_j is zero; the martingale part vanishes")
    v_n = abs(A) * math.sqrt(theoretical_v2(innovation, n))

    first, last = innovation_window(finite, n)
    weights = sum_weights(finite, n, first, last)
    chunks = split_range(reps, get_world_size(workers))
    fn = partial(_chunk_linear_sums, innovation, weights, n, 1 - first, A, key)
    sums = reduce_concat(all_gather(fn, chunks, workers=workers, desc=f"n={n}", progress=progress))
    return LinearDeltaEstimate(
        n=n, f=estimate_from_sums(sums[:, 0], v_n, n, key, delta_conf),
        m=estimate_from_sums(sums[:, 1], v_n, n, key, delta_conf),
        A=A, v_n=v_n, truncation_tail=tail, warning=warning)


@dataclass
class Theorem3Row:
    n: int
    ks_f: float
    ks_m: float
    correction: float
    ratio: float
    allowance: float


@dataclass
class Theorem3Report:
    p: float
    g_norm: float
    rows: list
    C: float
    bounded: bool
    verdict: str


def _rate_exponents(p):
    """(exponent of n, exponent of ‖g‖_p) in the correction term."""
    if math.isinf(p):
        return 0.5, 1.0
    return p / (2.0 * (p + 1.0)), p / (p + 1.0)


def correction_term(n, g_norm_value, p, c=1.0):
    """2c ‖g‖_p^{p/(p+1)} / n^{p/(2(p+1))} (2c‖g‖_∞/√n for p = inf)."""
    e_n, e_g = _rate_exponents(p)
    return 2.0 * c * g_norm_value ** e_g / n ** e_n


def theorem3_rate_check(f_estimates, m_estimates, g_norm_value, p):
    """Empirical constant (Δ̂_f - 2Δ̂_m) n^{p/(2(p+1))} / (2‖g‖^{p/(p+1)}) per grid point.

    Bounded when the later half of the grid never exceeds twice the earlier
    half's maximum or the DKW noise allowance. With g = 0 the check is
    Δ̂_f <= 2Δ̂_m + 2(r_f + r_m) at every point.
    """
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p!r}")
    if len(f_estimates) != len(m_estimates) or any(f.n != m.n for f, m in zip(f_estimates, m_estimates)):
        raise DomainError("f and m grids must be aligned on the same n values")
    if g_norm_value < 0:
        raise DomainError("‖g‖_p must be nonnegative")

    rows = []
    for f, m in zip(f_estimates, m_estimates):
        excess = f.ks - 2.0 * m.ks
        noise = 2.0 * (f.dkw_radius + m.dkw_radius)
        if g_norm_value == 0:
            rows.append(Theorem3Row(n=f.n, ks_f=f.ks, ks_m=m.ks, correction=0.0,
                                    ratio=math.nan, allowance=noise))
            continue
        unit = correction_term(f.n, g_norm_value, p)
        rows.append(Theorem3Row(n=f.n, ks_f=f.ks, ks_m=m.ks, correction=unit,
                                ratio=excess / unit, allowance=noise / unit))

    if g_norm_value == 0:
        bounded = all(r.ks_f <= 2.0 * r.ks_m + r.allowance for r in rows)
        C = 0.0
    else:
        ratios = [r.ratio for r in rows]
        half = max(1, len(rows) // 2)
        early = max(max(ratios[:half]), 0.0)
        late = rows[half:]
        bounded = all(r.ratio <= max(2.0 * early, r.allowance) for r in late)
        C = max(max(ratios), 0.0)
    return Theorem3Report(p=p, g_norm=g_norm_value, rows=rows, C=C, bounded=bounded,
                          verdict="BOUNDED" if bounded else "UNBOUNDED")
