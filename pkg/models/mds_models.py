"""Martingale difference sequence models with closed-form conditional moments.

Every model is driven by a Rademacher-type base X_k = s_k e_k, where e_k are
independent signs and the scale s_k is predictable (a function of the previous
base value only). The composite kinds perturb the base with independent,
stationary noise: Y_k = X_k + ε_k or Y_k = X_k ε_k.

The conditional law of the k-th increment given the past depends on the past
only through the current scale s_k, so "reachable prefixes" collapse to the
finite set of reachable scales returned by `state_law(k)`.
"""
import abc
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from op.distributions import DiscreteDist, NOISE_FAMILIES
from op.errors import DegenerateModelError, DomainError, UnsupportedError
from op.streams import STEP_NOISE, STEP_SIGNS, make_generator

MEAN_TOL = 1e-12


class MdsModel(abc.ABC):
    kind = None

    # ---- hooks ----

    @abc.abstractmethod
    def state_law(self, k):
        """Reachable scales at index k (1-based) with their probabilities."""

    @abc.abstractmethod
    def next_scale(self, prev_base):
        """Scale s_k as a function of the previous base value (None for k = 1)."""

    @abc.abstractmethod
    def cond_var(self, s):
        """σ_k² given the scale s_k = s."""

    @abc.abstractmethod
    def cond_abs_moment(self, s, p):
        """E(|X_k|^p | F_{k-1}) given s_k = s, for p in {2, 3}."""

    @abc.abstractmethod
    def cond_joint(self, s):
        """Discrete conditional law of (base value, value) given s, or None for continuous noise."""

    @abc.abstractmethod
    def gamma(self, k):
        """Class bound γ_k of condition E(|X_k|³|F) <= γ_k E(X_k²|F)."""

    @abc.abstractmethod
    def bound(self):
        """sup |X_k| (inf if unbounded)."""

    @abc.abstractmethod
    def draw(self, n, key):
        """Return (values, base_values, cond_vars) for one path driven by `key`."""

    @abc.abstractmethod
    def descriptor(self):
        pass

    # ---- derived ----

    @property
    def normalized(self):
        """True when V_n² = 1 almost surely."""
        return False

    def cond_law(self, s):
        joint = self.cond_joint(s)
        if joint is None:
            return None
        return DiscreteDist.from_atoms([(y, p) for _, y, p in joint])

    def tau2(self, k):
        return math.fsum(p * self.cond_var(s) for s, p in self.state_law(k))

    def scales_from_history(self, base_values):
        """Predictable scales s_1..s_n recomputed from the base history alone."""
        scales = np.empty(len(base_values))
        prev = None
        for i, x in enumerate(base_values):
            scales[i] = self.next_scale(prev)
            prev = x
        return scales

    def cond_vars_from_history(self, base_values):
        return np.array([self.cond_var(s) for s in self.scales_from_history(base_values)])

    def __repr__(self):
        return self.descriptor()


class _RademacherBase(MdsModel):

    def cond_var(self, s):
        return s * s

    def cond_abs_moment(self, s, p):
        return abs(s) ** p

    def cond_joint(self, s):
        return [(-s, -s, 0.5), (s, s, 0.5)]

    def bound(self):
        return self.s_max

    def draw_base(self, n, key):
        rng = make_generator(key.at_step(STEP_SIGNS))
        signs = 2.0 * rng.integers(0, 2, size=n) - 1.0
        scales = self.scales_from_signs(signs)
        return scales * signs, scales

    def draw(self, n, key):
        base, scales = self.draw_base(n, key)
        return base, base, scales * scales


@dataclass(frozen=True, repr=False)
class ScaledRademacher(_RademacherBase):
    """X_k = ±c with probability 1/2, independent."""
    c: float
    kind = "scaled"

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError("ScaledRademacher needs c > 0")

    @property
    def s_max(self):
        return self.c

    @property
    def normalized(self):
        return True

    def state_law(self, k):
        return [(self.c, 1.0)]

    def next_scale(self, prev_base):
        return self.c

    def scales_from_signs(self, signs):
        return np.full(len(signs), float(self.c))

    def gamma(self, k):
        # E(|X|³|F) = c³ = c · c²
        return self.c

    def descriptor(self):
        return f"scaled(c={self.c!r})"


@dataclass(frozen=True, repr=False)
class PredictableScaleRademacher(_RademacherBase):
    """X_k = s_k e_k with s_1 = start and s_k = pos / neg after a positive / negative X_{k-1}."""
    neg: float
    pos: float
    start: float = None
    kind = "predictable"

    def __post_init__(self):
        if self.start is None:
            object.__setattr__(self, "start", 0.5 * (self.neg + self.pos))
        for name in ("neg", "pos", "start"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"PredictableScaleRademacher needs {name} > 0")

    @property
    def s_min(self):
        return min(self.neg, self.pos, self.start)

    @property
    def s_max(self):
        return max(self.neg, self.pos, self.start)

    def state_law(self, k):
        if k == 1:
            return [(self.start, 1.0)]
        if self.neg == self.pos:
            return [(self.neg, 1.0)]
        return [(self.neg, 0.5), (self.pos, 0.5)]

    def next_scale(self, prev_base):
        if prev_base is None or prev_base == 0:
            return self.start
        return self.pos if prev_base > 0 else self.neg

    def scales_from_signs(self, signs):
        scales = np.empty(len(signs))
        if len(signs):
            scales[0] = self.start
            scales[1:] = np.where(signs[:-1] > 0, self.pos, self.neg)
        return scales

    def gamma(self, k):
        # E(|X|³|F) = s_k · σ_k² <= s_max σ_k²
        return self.s_max

    @property
    def normalized(self):
        return self.neg == self.pos == self.start

    def descriptor(self):
        return f"predictable(neg={self.neg!r}, pos={self.pos!r}, start={self.start!r})"


def _check_noise(noise):
    if not isinstance(noise, NOISE_FAMILIES):
        raise UnsupportedError(f"unsupported noise family {type(noise).__name__}")
    if abs(noise.mean()) > MEAN_TOL:
        raise DomainError(f"noise must be centered, mean is {noise.mean()!r}")


class _NoiseComposite(MdsModel):

    def _check(self):
        if not isinstance(self.base, _RademacherBase):
            raise UnsupportedError("composite models need a Rademacher-type base")
        _check_noise(self.noise)
        if self.M is None:
            object.__setattr__(self, "M", self.base.bound())
        if self.M < self.base.bound():
            raise DomainError(f"declared bound M={self.M} is below the base bound {self.base.bound()}")

    def noise_second_moment(self):
        m2 = self.noise.abs_moment(2)
        if m2 <= 0:
            raise DegenerateModelError("noise has zero second moment")
        return m2

    def noise_ratio(self):
        return self.noise.abs_moment(3) / self.noise_second_moment()

    def state_law(self, k):
        return self.base.state_law(k)

    def next_scale(self, prev_base):
        return self.base.next_scale(prev_base)

    @property
    def normalized(self):
        return self.base.normalized

    def draw(self, n, key):
        base, scales = self.base.draw_base(n, key)
        eps = self.noise.sample(make_generator(key.at_step(STEP_NOISE)), n)
        values = self.combine(base, eps)
        cond_vars = np.array([self.cond_var(s) for s in scales]) if n else np.empty(0)
        return values, base, cond_vars


@dataclass(frozen=True, repr=False)
class AdditiveNoise(_NoiseComposite):
    """Y_k = X_k + ε_k."""
    base: MdsModel
    noise: object
    M: float = None
    kind = "additive"

    def __post_init__(self):
        self._check()

    def combine(self, base, eps):
        return base + eps

    def cond_var(self, s):
        return self.base.cond_var(s) + self.noise.abs_moment(2)

    def cond_abs_moment(self, s, p):
        return 0.5 * (self.noise.shifted_abs_moment(s, p) + self.noise.shifted_abs_moment(-s, p))

    def cond_joint(self, s):
        if not isinstance(self.noise, DiscreteDist):
            return None
        return [(x, x + v, 0.5 * q) for x in (-s, s) for v, q in self.noise.atoms]

    def gamma(self, k):
        return 4.0 * max(self.M, self.noise_ratio())

    def bound(self):
        return self.base.bound() + self.noise.bound()

    def descriptor(self):
        return f"additive(base={self.base.descriptor()}, noise={self.noise.descriptor()}, M={self.M!r})"


@dataclass(frozen=True, repr=False)
class MultiplicativeNoise(_NoiseComposite):
    """Y_k = X_k ε_k."""
    base: MdsModel
    noise: object
    M: float = None
    kind = "multiplicative"

    def __post_init__(self):
        self._check()

    def combine(self, base, eps):
        return base * eps

    def cond_var(self, s):
        return self.base.cond_var(s) * self.noise.abs_moment(2)

    def cond_abs_moment(self, s, p):
        return abs(s) ** p * self.noise.abs_moment(p)

    def cond_joint(self, s):
        if not isinstance(self.noise, DiscreteDist):
            return None
        return [(x, x * v, 0.5 * q) for x in (-s, s) for v, q in self.noise.atoms]

    def gamma(self, k):
        return self.M * self.noise_ratio()

    def bound(self):
        return self.base.bound() * self.noise.bound()

    def descriptor(self):
        return f"multiplicative(base={self.base.descriptor()}, noise={self.noise.descriptor()}, M={self.M!r})"


@dataclass(eq=False)
class Path:
    """One realised trajectory with its predictable conditional variances.

    `base_values` is the latent Rademacher-type sequence that drives the
    filtration; for the base kinds it equals `values`.
    """
    values: np.ndarray
    cond_vars: np.ndarray
    partial_sums: np.ndarray
    v2: float
    V2: float
    base_values: np.ndarray = None
    key: object = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.values)

    @property
    def S_n(self):
        return float(self.partial_sums[-1]) if len(self.partial_sums) else 0.0

    @classmethod
    def build(cls, values, cond_vars, v2, base_values=None, key=None):
        values = np.asarray(values, dtype=np.float64)
        cond_vars = np.asarray(cond_vars, dtype=np.float64)
        if v2 <= 0:
            raise DegenerateModelError("v_n^2 must be positive")
        return cls(values=values, cond_vars=cond_vars, partial_sums=np.cumsum(values),
                   v2=float(v2), V2=math.fsum(cond_vars) / v2,
                   base_values=base_values, key=key)


def theoretical_v2(model, n):
    """v_n² = Σ τ_k² in closed form."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if n >= 2:
        # τ_k² is the same for every k >= 2 in all shipped kinds
        return math.fsum([model.tau2(1)] + [model.tau2(2)] * (n - 1))
    return model.tau2(1)


def sample_path(model, n, key):
    if n < 1:
        raise DomainError("n must be at least 1")
    values, base, cond_vars = model.draw(n, key)
    return Path.build(values, cond_vars, theoretical_v2(model, n), base_values=base, key=key)


def quadratic_variation_law(model, n):
    """Exact law of Σ_k σ_k² over the first n steps."""
    if n < 1:
        raise DomainError("n must be at least 1")
    base = model.base if isinstance(model, _NoiseComposite) else model
    later = base.state_law(2)
    if len(later) == 1:
        # same summation order as theoretical_v2, so normalised kinds give d = 0 exactly
        first = model.cond_var(base.state_law(1)[0][0])
        return DiscreteDist.point_mass(math.fsum([first] + [model.cond_var(later[0][0])] * (n - 1)))
    if isinstance(base, PredictableScaleRademacher):
        counts = np.arange(n)
        first = model.cond_var(base.start)
        totals = first + counts * model.cond_var(base.pos) + (n - 1 - counts) * model.cond_var(base.neg)
        probs = stats.binom.pmf(counts, n - 1, 0.5)
        return DiscreteDist.from_atoms(zip(totals.tolist(), probs.tolist()))
    raise UnsupportedError(f"no quadratic variation law for {model.descriptor()}")
