//! Metrics, evaluation protocols and analysis exports.

mod analysis;
mod eval;
mod export;
mod metrics;

pub use analysis::{average_image, color_density, composition_summary, segmentation_embedding, CompositionSummary};
pub use eval::{
    cross_domain, evaluate, evaluate_embeddings, fit_attributor, manifest_id, model_id, post_edit_eval,
    record_edit_ratio, sweep, SweepAxis, SweepSetup,
};
pub use export::{
    confusion_to_csv, density_to_csv, edit_bins_to_csv, export_composition, export_report, grid_to_csv,
    load_report, report_from_json, report_to_csv, report_to_json, sweep_to_csv, ExportFormat,
};
pub use metrics::{ClassMetrics, ConfusionMatrix, EvalReport, ReportMeta, SampleFailure, REPORT_VERSION};
