"""Desk-scale causality theory for continuous Lorentzian metrics."""
from .chart import (Box, ChartDomain, MetricField, Modulus, cone_precedes, constant_field, convex_combine,
                    metric_delta, minkowski, narrow, widen)
from .curves import (CausalCurve, canonicalize, hausdorff_distance, is_causal, lorentz_length,
                     sup_distance)
from .grid import CausalGraph, Grid
from .ladder import (CauchySurfaceSpec, build_stable_widening, check_causal_simplicity, check_causality,
                     check_cauchy_surface, check_global_hyperbolicity, check_strong_causality_at, diagnose)
from .limits import extract_limit_curve, verify_usc, zigzag
from .maximal import dag_time_separation, maximality_certificate, time_separation
from .reach import (ReachSet, causal_diamond, cauchy_development, future_reach, imprisonment_bound,
                    open_past_future, past_reach)

__all__ = [
    "Box", "ChartDomain", "MetricField", "Modulus", "cone_precedes", "constant_field", "convex_combine",
    "metric_delta", "minkowski", "narrow", "widen",
    "CausalCurve", "canonicalize", "hausdorff_distance", "is_causal", "lorentz_length", "sup_distance",
    "CausalGraph", "Grid",
    "CauchySurfaceSpec", "build_stable_widening", "check_causal_simplicity", "check_causality",
    "check_cauchy_surface", "check_global_hyperbolicity", "check_strong_causality_at", "diagnose",
    "extract_limit_curve", "verify_usc", "zigzag",
    "dag_time_separation", "maximality_certificate", "time_separation",
    "ReachSet", "causal_diamond", "cauchy_development", "future_reach", "imprisonment_bound",
    "open_past_future", "past_reach",
]
