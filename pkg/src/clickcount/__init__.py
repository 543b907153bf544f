"""Photon-counting statistics of detectors built from N on/off detectors."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    ClickCountError,
    DomainError,
    InsufficientSupportError,
    KernelOverflowError,
    StabilityError,
    ValidationError,
)
from .kernel import (
    ClickDistribution,
    DetectorConfig,
    Diagnostics,
    PovmDiagonal,
    click_distribution,
    coherent_click_distribution,
    coherent_click_nonuniform,
    coherent_click_q_closed,
    exact_ideal_click_prob,
    fock_click_prob,
    ideal_povm_stirling,
    limit_compare,
    mandel_distribution,
    mandel_q,
    moments,
    povm_fock_matrix,
    stirling2,
    total_variation,
)
from .montecarlo import SimOptions, SimResult, compare_distributions, exact_dp_oracle, simulate_clicks
from .states import (
    PhotonNumberDistribution,
    coherent_pnd,
    fock_pnd,
    load_pnd,
    odd_coherent_pnd,
    squeezed_vacuum_pnd,
)
