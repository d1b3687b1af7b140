"""Exact lattice point counting in SL_2(Z) (and small SL_3(Z)) with predicted error rates."""

__version__ = "0.1.0"

from .cartan import DomainSpec, Region, cartan_decompose, classify, hyperbolic_distance  # noqa: E402
from .enumeration import (  # noqa: E402
    CountRecord,
    EnumerationTask,
    count_norm_ball,
    enumerate_domain,
    enumerate_norm_ball,
    enumerate_sl3_ball,
)
from .exact import CongruenceSpec, IntMat, group_order_mod  # noqa: E402
from .haar import COVOLUME_SL2Z, NORMALIZATION_ID, volume  # noqa: E402

__all__ = [
    "COVOLUME_SL2Z",
    "CongruenceSpec",
    "CountRecord",
    "DomainSpec",
    "EnumerationTask",
    "IntMat",
    "NORMALIZATION_ID",
    "Region",
    "cartan_decompose",
    "classify",
    "count_norm_ball",
    "enumerate_domain",
    "enumerate_norm_ball",
    "enumerate_sl3_ball",
    "group_order_mod",
    "hyperbolic_distance",
    "volume",
]
