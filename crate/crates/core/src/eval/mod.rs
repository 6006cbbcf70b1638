//! Distribution tables and the comparison metrics: SRMSE over marginal and
//! partial joint distributions, R², Pearson correlation and the zero-sample
//! rate.

mod metrics;
mod report;
mod table;

pub use metrics::{
    distinct_output_tuples, marginal_vector, pearson, pearson_values, pooled_marginal_srmse,
    r_squared, r_squared_values, srmse, srmse_values, zero_sample_pct,
};
pub use report::{
    evaluate, joint_scatter_csv, marginal_bars_csv, srmse_suite, EvalReport, FeatureSrmse,
    FoldStats, SuiteReport, BIVARIATE, TRIVARIATE_1, TRIVARIATE_2,
};
pub use table::{build_table, build_table_named, DistributionTable, MAX_TABLE_ORDER};
