"""recurlab: numerical recurrence classification for trajectories.

Classifies sampled trajectories as almost periodic / asymptotically almost
periodic / remotely almost periodic / remotely tau-periodic or stationary,
and checks the matching structure results (omega-limit fiber counts,
contraction bounds, root-branch recurrence for time-varying polynomials)
at desk scale.
"""

from ._kernels import USING_NUMBA, backend_name
from .signal import (
    SampledSignal,
    Window,
    translate,
    sup_distance,
    tail_sup_distance,
    d_infinity_estimate,
    read_signal_csv,
    write_signal_csv,
)
from .recurrence import (
    TauSpec,
    Thresholds,
    TranslationSet,
    HullSample,
    RecurrenceReport,
    translation_set_global,
    translation_set_remote,
    remotely_tau_periodic_test,
    remotely_stationary_test,
    thap4_equivalence_check,
    omega_limit_sample,
    equi_ap_test,
    minimality_test,
    aap_test,
    classify,
)

__version__ = "0.1.0"

__all__ = [
    "SampledSignal",
    "Window",
    "translate",
    "sup_distance",
    "tail_sup_distance",
    "d_infinity_estimate",
    "read_signal_csv",
    "write_signal_csv",
    "TauSpec",
    "Thresholds",
    "TranslationSet",
    "HullSample",
    "RecurrenceReport",
    "translation_set_global",
    "translation_set_remote",
    "remotely_tau_periodic_test",
    "remotely_stationary_test",
    "thap4_equivalence_check",
    "omega_limit_sample",
    "equi_ap_test",
    "minimality_test",
    "aap_test",
    "classify",
    "USING_NUMBA",
    "backend_name",
    "__version__",
]
