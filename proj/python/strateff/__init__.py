"""Treatment-effect estimation from samples stratified on treatment status."""

from ._core import (
    EffectEstimate,
    ObservationSet,
    PiStarMode,
    StrateffError,
    StratificationInfo,
    WaldResult,
    DgpSpec,
    ate_ipw,
    ate_pscond,
    ate_regadjust,
    att_ipw,
    att_pscond,
    att_regadjust,
    draw_population,
    ingest_csv,
    late_inference,
    make_dgp,
    oracle_limits,
    population_propensity,
    run_montecarlo,
    sample_propensity,
    strat_weights,
    stratify,
    summarize,
    wald_naive,
    wald_reweighted,
)
from ._core import __version__

__all__ = [
    "EffectEstimate",
    "ObservationSet",
    "PiStarMode",
    "StrateffError",
    "StratificationInfo",
    "WaldResult",
    "DgpSpec",
    "ate_ipw",
    "ate_pscond",
    "ate_regadjust",
    "att_ipw",
    "att_pscond",
    "att_regadjust",
    "draw_population",
    "ingest_csv",
    "late_inference",
    "make_dgp",
    "oracle_limits",
    "population_propensity",
    "run_montecarlo",
    "sample_propensity",
    "strat_weights",
    "stratify",
    "summarize",
    "wald_naive",
    "wald_reweighted",
    "__version__",
]
