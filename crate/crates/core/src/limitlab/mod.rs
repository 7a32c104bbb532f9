//! Verification of the limit theorems: KS tests against exact limit laws,
//! transform-level tables and generator diagnostics.

mod generator;
mod ks;
mod laws;
mod report;
mod table;
mod testfn;
mod verify;

pub use generator::{
    drift_term_table, fastjump_check, generator_convergence_table, generator_limit, generator_prelimit, GeneratorTerms,
};
pub use ks::{kolmogorov_quantile, ks_one_sample, ks_statistic, ks_two_sample, KsKind, KsReport, DEFAULT_LEVEL};
pub use laws::{esn_marginal_cdf, esn_marginal_cdf_total, fdd_extremal_cdf};
pub use report::Report;
pub use table::{ConvergenceTable, TableRow};
pub use testfn::TestFunction;
pub use verify::{
    joint_cell_check, verify_cbi_esn_limit, verify_prop1_transforms, verify_subordinator_limit, MonteCarloConfig,
};
