from .errors import (
    DomainError,
    UnsupportedError,
    DegenerateModelError,
    AugmentationError,
    PlanInconsistencyError,
    ConfigError,
)
from .streams import StreamKey, make_generator
from .distributions import (
    std_normal_cdf,
    std_normal_quantile,
    std_normal_pdf,
    abs_moment,
    DiscreteDist,
    UniformNoise,
    NormalNoise,
)
