//! Null-distribution machinery: Monte Carlo critical values, p-values and
//! rejection rates, plus the spectral description of the limit law.

mod montecarlo;
mod spectral;

pub use montecarlo::{
    mc_critical_value, mc_critical_values, mc_pvalue, mc_pvalues, rejection_rates, simulate, SimulationConfig,
    StatKind, MAX_SINGULAR_RETRIES, MIN_QUANTILE_REPS,
};
pub use spectral::{
    cumulant_grid, cumulants_numeric, kernel_k, mean_limit, nystrom_eigenvalues, nystrom_grid, trace_kernel,
    CumulantSet,
};
