"""Oracles, statistics and the consistency-check registry."""
from .oracles import caputo_l1, caputo_l1_grid, ode_oracle_classical, riemann_liouville, talbot_invert
from .stats import (EmpiricalSummary, chi_square_gof, ks_critical, ks_statistic, ks_two_sample,
                    ks_two_sample_critical, summarize_mean, summarize_proportion)

__all__ = [
    "caputo_l1",
    "caputo_l1_grid",
    "ode_oracle_classical",
    "riemann_liouville",
    "talbot_invert",
    "EmpiricalSummary",
    "chi_square_gof",
    "ks_critical",
    "ks_statistic",
    "ks_two_sample",
    "ks_two_sample_critical",
    "summarize_mean",
    "summarize_proportion",
]
