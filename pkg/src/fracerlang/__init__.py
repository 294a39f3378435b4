"""Fractional M/E_k/1 queue: transient state probabilities, metrics and simulation."""
from .errors import DomainError, InversionRefused, QuadratureError, RangeError, SeriesConvergenceError
from .metrics import (WaitContext, busy_period_cdf, busy_period_laplace, mean_queue_length,
                      mean_queue_length_laplace, waiting_density_conditional,
                      waiting_laplace_conditional)
from .mlfun import SeriesControl, ml, ml_three, ml_two
from .randvar import MLParams, RMLParams, RngStream
from .sim import SamplePath, SimConfig, simulate_gillespie, simulate_subordinated
from .transient import (QueueParams, StatePhase, frac_p0, frac_pns, laplace_pi0, laplace_pins,
                        m_of_state, queue_length_prob, state_of_m, state_probabilities)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InversionRefused",
    "QuadratureError",
    "RangeError",
    "SeriesConvergenceError",
    "WaitContext",
    "busy_period_cdf",
    "busy_period_laplace",
    "mean_queue_length",
    "mean_queue_length_laplace",
    "waiting_density_conditional",
    "waiting_laplace_conditional",
    "SeriesControl",
    "ml",
    "ml_two",
    "ml_three",
    "MLParams",
    "RMLParams",
    "RngStream",
    "SamplePath",
    "SimConfig",
    "simulate_gillespie",
    "simulate_subordinated",
    "QueueParams",
    "StatePhase",
    "frac_p0",
    "frac_pns",
    "laplace_pi0",
    "laplace_pins",
    "m_of_state",
    "queue_length_prob",
    "state_of_m",
    "state_probabilities",
]
