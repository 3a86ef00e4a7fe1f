//! Optimizer, training loops, metrics and the experiment matrix.

mod metrics;
mod optim;
mod pipeline;
mod pretrain;
mod report;
mod train;

pub use metrics::{ClassMetrics, Metrics};
pub use optim::{clip_grad_norm, AdamW, AdamWConfig};
pub use pipeline::{
    compare_verbalizers, pretrain_base, run_ablation, run_injection, run_pipeline, setup_prompting,
    sweep_temperature, AblationSpec, Base, ExperimentConfig, Mode, ModelRecord, RunRecord, Runner,
    Setup, StudentKind,
};
pub use pretrain::{mask_tokens, mlm_loss, mlm_sequence, pretrain_mlm, PretrainConfig};
pub use report::{
    aggregate, read_summary, write_aggregate, write_summary, AggregateRow, SummaryRow,
    SUMMARY_COLUMNS,
};
pub use train::{
    evaluate, evaluate_examples, fused_metrics, make_examples, metrics_from_logits, predict_logits,
    predict_top, train_model, EpochRecord, Example, Knowledge, TrainConfig, Trained,
};
