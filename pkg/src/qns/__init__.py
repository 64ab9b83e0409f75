"""Frequency-space simulator for incompressible flow on quantum Euclidean space."""

from .backend import COMPILED, set_summation_mode, summation, summation_mode
from .qspace import (
    FrequencyGrid,
    QElement,
    SymbolField,
    ThetaMatrix,
    adjoint,
    adjoint_defect,
    coeff_lp_norm,
    dilation,
    edge_mass,
    fourier_multiplier,
    from_symbol,
    identity_element,
    l2_inner,
    laplacian,
    opnorm_estimate,
    partial_derivative,
    schatten_norm,
    single_mode,
    to_symbol,
    trace,
    trace_product,
    twisted_convolution,
)
from .flow import (
    ProfileTable,
    VelocityField,
    duhamel,
    duhamel_field,
    heat,
    heat_decay_profile,
    heat_field,
    leray_project,
)
from .harmonic import (
    BatteryReport,
    BesovSpec,
    DyadicPartition,
    besov_norm,
    inequality_battery,
    lp_block,
    partition_for,
    sobolev_norm,
)
from .ns import (
    EnergyReport,
    InitialCondition,
    PicardReport,
    SolverConfig,
    Trajectory,
    energy_report,
    energy_residual_scaling,
    gaussian_vortex_pair,
    nonlinear,
    picard_iterate,
    pressure,
    random_bandlimited,
    solve,
    step_etdrk2,
    taylor_green,
)
from .semiclassic import (
    ConvergenceTable,
    SweepRow,
    moyal_product,
    symmetric_moyal_product,
    theta_sweep,
)

__version__ = "0.1.0"
