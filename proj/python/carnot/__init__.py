"""Python interface to the carnot numerical library."""

from ._core import (
    CarnotError,
    ConfigError,
    Cone,
    Frame,
    GuardNotVanishing,
    LeftDomain,
    NoContraction,
    NoConvergence,
    build_cone,
    builtin_names,
    cc_connect,
    cc_distance_upper,
    coarea_verify,
    d_inf,
    d_riem,
    exp_combination,
    experiment_ids,
    frame,
    list_experiments,
    normal_coords,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
