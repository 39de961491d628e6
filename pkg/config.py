from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np


@dataclass
class Config:
    # geometry / special functions
    angular_tol: float = 1e-12
    overflow_guard: float = 700.0

    # Volterra solvers
    neumann_tol: float = 1e-12
    neumann_max_terms: int = 60
    gl_order: int = 12
    panel_length: float = 0.25
    envelope_floor: float = 1e-14
    tail_margin: float = 0.5
    ode_fallback: bool = True
    ode_rtol: float = 1e-12
    ode_atol: float = 1e-14

    # scattering
    zero_tol: float = 1e-9
    bound_state_samples: int = 200

    # ray meshes and damping
    tau_nodes: int = 128
    tau_max: float = 8.0
    tau_order: int = 8
    tau_grading: float = 2e-3
    q_floor: float = 0.25
    # below this tau, (s - s_step) / lam^3 is extrapolated from the nodes above
    quotient_floor: float = 0.05

    # reconstruction
    x_nodes: int = 60
    lambda_sweep: Tuple[float, ...] = (0.04, 0.06, 0.08, 0.1)
    route_b_lambda: float = 0.2

    # parallelism
    n_workers: int = 1
    use_pool: bool = False

    # output
    schema_version: int = 1
    csv_digits: int = 17
    log_level: str = 'INFO'


config = Config()

RealFunction = Callable[[float], float]
ComplexArray = np.ndarray
