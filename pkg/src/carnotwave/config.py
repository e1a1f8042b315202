"""Run configuration and the default tolerance ladder.

Every tolerance consulted by the verification suites lives in DEFAULT_TOLS
and can be overridden per run (CLI --tol NAME=VALUE).
"""

from dataclasses import dataclass, field

DEFAULT_TOLS = {
    "carnot.defining_identity": 1e-12,
    "carnot.abs_homogeneity": 1e-12,
    "carnot.abs_square": 1e-10,
    "carnot.projector": 1e-8,
    "carnot.associativity": 1e-14,
    "carnot.dilation": 1e-13,
    "flow.oracle": 1e-6,
    "flow.energy": 1e-9,
    "flow.homogeneity": 1e-11,
    "flow.mu_ut": 1e-9,
    "flow.htype_form": 1e-10,
    "flow.base_covariance": 1e-6,
    "flow.symplectic": 1e-6,
    "phase.underline": 1e-8,
    "phase.hessian_fd": 1e-6,
    "phase.det_formula": 1e-9,
    "phase.det_htype": 1e-10,
    "phase.homogeneity": 1e-11,
    "phase.block": 1e-7,
    "transport.f_definition": 1e-5,
    "transport.k_oracle": 1e-4,
    "transport.lambda_oracle": 1e-4,
    "transport.crucial_f20": 1e-8,
    "transport.crucial_f11": 1e-8,
    "transport.crucial_k": 1e-6,
    "transport.htype_coeffs": 1e-10,
    "decompose.partition": 1e-10,
    "decompose.direction_slope": 0.3,
    "decompose.sector_factor": 2.0,
    "fio.wave_residual": 5e-3,
    "fio.dec_discrepancy": 1e-3,
    "fio.bound": 1e-12,
    "fio.l1_slope": 0.4,
}


@dataclass
class RunConfig:
    group_source: str = "heisenberg"
    seed: int = 1
    tol_overrides: dict = field(default_factory=dict)
    output_dir: str = "."
    jobs: int = 1

    def tol(self, name: str) -> float:
        if name in self.tol_overrides:
            return float(self.tol_overrides[name])
        return DEFAULT_TOLS[name]
