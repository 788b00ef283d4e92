from .mds_models import (
    MdsModel,
    ScaledRademacher,
    PredictableScaleRademacher,
    AdditiveNoise,
    MultiplicativeNoise,
    Path,
    sample_path,
    theoretical_v2,
    quadratic_variation_law,
)
from .membership import (
    gamma_sequence,
    verify_class_membership,
    martingale_defect,
    enumerate_paths,
    merge_last_two,
)
