"""Closed-form quantities: q, moments, cycle rates and overlap exponents."""

from regsat.analytic.core import (
    ModelParams, solve_q, log_first_moment, log_normalizer, first_moment_rate,
    event_probabilities, log_event_probabilities, log_first_moment_bayes, exact_log_first_moment,
    log_first_moment_llt, truncated_binomial_variance, bar_mu, bar_mu_vector,
    pattern_code, pattern_from_code, kl_divergence, nu_sq, threshold_info,
    max_admissible_degree, cycle_growth, cycle_series_sum, cycle_series_partial,
    second_moment_limit,
)
from regsat.analytic.rates import (
    RateTable, rate_table, transfer_matrices, delta_trace, delta_closed,
    lambda_pattern, lambda_agg_closed, theorem_lambda_lt, flip_count,
    pattern_to_code, code_to_pattern, code_to_string, string_to_code,
)
from regsat.analytic.overlap import (
    OverlapPoint, overlap_solve, overlap_exponents, g_exponent,
    g_stationary_points, bar_nu, bar_nu_matrix, entropy,
)
