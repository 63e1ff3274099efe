//! Segmentation metrics and the experiment harnesses built on them.

pub mod experiments;
pub mod metrics;

pub use experiments::{
    bench_pipeline, robustness_experiment, stage_agreement_experiment, BenchReport, ExperimentReport, RobustnessRow,
    StageAgreementReport, Summary, ViewAgreement,
};
pub use metrics::{compute_metrics, Matching, SegMetrics};
