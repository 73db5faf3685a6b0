"""Adaptive density estimation under Bernoulli-contaminated additive
noise: deconvolution kernel construction, a data-driven pointwise
bandwidth selector, an exact rate calculus, and a Monte-Carlo harness.
"""
from .model import (BandwidthVec, ClassParams, GridSpec, NoiseSpec, Sample,
                    bandwidth_join, default_grid, enumerate_grid,
                    load_sample, probe_assumption4, save_sample_binary)
from .kernels import (Assumption5Error, KernelSpec, attested,
                      base_kernel, default_kernel_spec, kcheck1, kcheck_l1,
                      order_ell_kernel, product_kernel_fourier,
                      verify_assumption5)
from .operator import (DeconvKernelTable, builtin_noise, clear_table_cache,
                       eval_M, eval_M_batch, eval_M_line, get_table,
                       load_table, save_table, solve_deconv_kernel,
                       verify_operator_equation)
from .estimator import (EnvelopeParams, envelope_U, envelope_U_from_sigma,
                        estimate_at, lambda_n, m_infinity, variance_scale_F)
from .selector import SelectionTrace, estimate_curve, r_hat, select, u_star, write_traces
from .rates import (RateInputs, RateReport, ThresholdScales, aggregates,
                    bias_envelope, classify_and_rate, gamma_q, kappa_tau,
                    lemma_identities, special_bandwidths, threshold_scales,
                    universal_constant)
from .densities import TestDensity, test_density
from .simulate import (ExperimentPlan, RiskResult, SlopeVerdict,
                       empirical_risk, replication_rng, sample_model,
                       slope_vs_theory)
from .xreal import INF, NEG_INF, XR, xr

__version__ = "0.1.0"
