"""Numerical library for sub-Riemannian wave-equation machinery on 2-step Carnot groups.

Modules
-------
groups      group structure, J_mu algebra, classification
flow        Hamiltonian geodesic flow, closed forms and RK4 oracle
phase       complex phase, mixed Hessian, density
transport   transport coefficients and parametrix amplitude iteration
decompose   dyadic / angular / mu-sector decompositions
fio         oscillatory-kernel evaluation and verification studies
kernels     compiled + fallback hot loops
cli         command-line interface
"""

__version__ = "0.1.0"

from .errors import (
    CarnotWaveError,
    NearCharacteristic,
    OutsideOmega,
    RankDrop,
    RefineFailure,
    ZeroFrequency,
    ZeroTime,
)
from .groups import (
    BUILTIN_GROUPS,
    Covector,
    Group2Step,
    GroupClassification,
    Point,
    abs_j_mu,
    classify,
    cotangent_translate,
    cotangent_translate_inv,
    dilate,
    group_inverse,
    group_multiply,
    heisenberg,
    heisenberg_nonisotropic,
    htype_quaternion,
    free_two_step_3,
    j_mu,
    kernel_projector,
    load_group,
)
from .flow import (
    FlowPoint,
    flow_base,
    flow_ode_oracle,
    flow_origin,
    geodesic_sphere_sample,
    hamiltonian,
)
from .kernels import backend_name
from .phase import mixed_hessian, phase_value, stationarity_check
from .transport import (
    CoeffBundle,
    SupportRegion,
    Symbol,
    amplitude_iterates,
    apply_lambda,
    apply_lambda_i,
    apply_mho,
    apply_r_numeric,
    f_coeffs,
    k_value,
    lambda_coeffs,
)
from .decompose import make_cutoffs, make_directions, make_mu_sectors, mu_shear, sheared_symbol
from .fio import (
    KernelSample,
    QuadratureSpec,
    dec_periodic_check,
    eval_kernel,
    l1_growth_study,
    parametrix_residual_study,
    wave_identity_residual,
)
