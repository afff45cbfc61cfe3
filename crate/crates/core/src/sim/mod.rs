//! Data generators and the replicated-experiment driver.

pub mod experiment;
pub mod metrics;
pub mod model1;
pub mod model2;

pub use experiment::{
    run_experiment, write_report, Estimator, EstimatorSummary, ExperimentOptions, ExperimentReport, ModelConfig,
    RepRecord,
};
pub use metrics::{additive_metrics, coef_zero_tol, cone_diagnostic, linear_metrics, ConeCheck, RepMetrics};
pub use model1::{gen_model1, Case, Model1Config, Model1Data};
pub use model2::{g_true, gen_model2, sample_z, sigma, Model2Config, Model2Data};
