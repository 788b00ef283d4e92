"""Normal CDF / quantile, finite discrete laws and the named continuous noises.

Φ is evaluated through the complementary error function,
Φ(x) = erfc(-x/√2)/2, which keeps full relative accuracy in both tails.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from op.errors import DomainError, UnsupportedError

SQRT1_2 = 1.0 / math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
PROB_TOL = 1e-12


def _check_finite(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def std_normal_cdf(x):
    """Φ(x) for a scalar or an array of finite reals."""
    arr = _check_finite(x)
    out = 0.5 * special.erfc(-arr * SQRT1_2)
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(x):
    arr = np.asarray(x, dtype=np.float64)
    out = INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(p):
    """Φ^{-1}(p) for p in (0, 1), polished by one Newton step on the erfc CDF."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("p must lie in the open interval (0, 1)")
    x = special.ndtri(arr)
    dens = std_normal_pdf(x)
    # Newton step; ndtri is already close, this removes its last few ulps of CDF residual
    x = x - (0.5 * special.erfc(-x * SQRT1_2) - arr) / dens
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Finite-support law, atoms sorted strictly increasing, all probabilities positive.

    When built from integer weights the weights are kept (`weights`, `total`) so
    that enumeration oracles can compare probabilities in exact integer arithmetic.
    """
    values: np.ndarray
    probs: np.ndarray
    weights: np.ndarray = field(default=None, compare=False)
    total: int = field(default=None, compare=False)

    @classmethod
    def from_atoms(cls, atoms):
        """:param atoms: iterable of (value, prob); duplicates are merged, zero masses dropped."""
        atoms = list(atoms)
        if not atoms:
            raise DomainError("a discrete distribution needs at least one atom")
        values = _check_finite([a[0] for a in atoms], "values")
        probs = np.asarray([a[1] for a in atoms], dtype=np.float64)
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be finite and nonnegative")
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.zeros(len(uniq))
        np.add.at(merged, inverse, probs)
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        if abs(math.fsum(merged) - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {math.fsum(merged)!r}, not 1")
        return cls(values=uniq, probs=merged)

    @classmethod
    def from_weights(cls, values, weights):
        """Exact law from small nonnegative integer weights."""
        values = _check_finite(values, "values")
        weights = np.asarray(weights, dtype=np.int64)
        if len(values) != len(weights) or len(values) == 0:
            raise DomainError("values and weights must be nonempty and aligned")
        if np.any(weights < 0):
            raise DomainError("weights must be nonnegative")
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(merged, inverse, weights)
        keep = merged > 0
        uniq, merged = uniq[keep], merged[keep]
        total = int(merged.sum())
        if total <= 0:
            raise DomainError("weights must not all vanish")
        return cls(values=uniq, probs=merged / total, weights=merged, total=total)

    @classmethod
    def point_mass(cls, v=0.0):
        return cls.from_weights([v], [1])

    @classmethod
    def rademacher(cls, scale=1.0):
        return cls.from_weights([-scale, scale], [1, 1])

    @property
    def exact(self):
        return self.weights is not None

    def __len__(self):
        return len(self.values)

    @property
    def atoms(self):
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def cdf(self, t):
        """μ(Z ≤ t)."""
        idx = np.searchsorted(self.values, np.asarray(t, dtype=np.float64), side="right")
        cum = np.concatenate(([0.0], np.cumsum(self.probs)))
        out = np.minimum(cum[idx], 1.0)
        return float(out) if out.ndim == 0 else out

    def cdf_left(self, t):
        """μ(Z < t)."""
        idx = np.searchsorted(self.values, np.asarray(t, dtype=np.float64), side="left")
        cum = np.concatenate(([0.0], np.cumsum(self.probs)))
        out = np.minimum(cum[idx], 1.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return math.fsum(self.values * self.probs)

    def abs_moment(self, k):
        return math.fsum(self.probs * np.abs(self.values) ** k)

    def shifted_abs_moment(self, mu, k):
        return math.fsum(self.probs * np.abs(mu + self.values) ** k)

    def bound(self):
        return float(np.max(np.abs(self.values)))

    def sample(self, rng, size):
        return rng.choice(self.values, size=size, p=self.probs)

    def descriptor(self):
        vals = ", ".join(repr(float(v)) for v in self.values)
        probs = ", ".join(repr(float(p)) for p in self.probs)
        return f"discrete(values=[{vals}], probs=[{probs}])"


@dataclass(frozen=True)
class UniformNoise:
    """Uniform(-a, a)."""
    a: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError("uniform half-width must be positive and finite")

    def mean(self):
        return 0.0

    def abs_moment(self, k):
        return self.a ** k / (k + 1.0)

    def shifted_abs_moment(self, mu, k):
        if k == 2:
            return mu * mu + self.a * self.a / 3.0
        if k == 3:
            # (1/2a) ∫_{mu-a}^{mu+a} |y|^3 dy with antiderivative sign(y) y^4 / 4
            def anti(y):
                return math.copysign(y ** 4, y) / 4.0
            return (anti(mu + self.a) - anti(mu - self.a)) / (2.0 * self.a)
        raise UnsupportedError(f"shifted absolute moment of order {k} for uniform noise")

    def bound(self):
        return self.a

    def sample(self, rng, size):
        return rng.uniform(-self.a, self.a, size=size)

    def descriptor(self):
        return f"uniform(a={self.a!r})"


@dataclass(frozen=True)
class NormalNoise:
    """Centered normal with standard deviation s."""
    s: float

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise DomainError("normal scale must be positive and finite")

    def mean(self):
        return 0.0

    def abs_moment(self, k):
        return self.s ** k * 2.0 ** (k / 2.0) * special.gamma((k + 1.0) / 2.0) / math.sqrt(math.pi)

    def shifted_abs_moment(self, mu, k):
        s = self.s
        if k == 2:
            return mu * mu + s * s
        if k == 3:
            z = mu / s
            return ((mu ** 3 + 3.0 * mu * s * s) * (std_normal_cdf(z) - std_normal_cdf(-z))
                    + 2.0 * s * (mu * mu + 2.0 * s * s) * std_normal_pdf(z))
        raise UnsupportedError(f"shifted absolute moment of order {k} for normal noise")

    def bound(self):
        return math.inf

    def sample(self, rng, size):
        return rng.normal(0.0, self.s, size=size)

    def descriptor(self):
        return f"normal(s={self.s!r})"


NOISE_FAMILIES = (DiscreteDist, UniformNoise, NormalNoise)


def abs_moment(dist, k):
    """E|Z|^k: exact finite sum for discrete laws, closed form for the named families."""
    if not (k > 0 and math.isfinite(k)):
        raise DomainError("moment order must be a positive real")
    if not isinstance(dist, NOISE_FAMILIES):
        raise UnsupportedError(f"no moment formula for {type(dist).__name__}")
    return float(dist.abs_moment(k))
