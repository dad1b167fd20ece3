//! Experiment grids: expansion, resumable parallel runs, and reports.

mod grid;
mod report;
mod run;
mod store;

pub use grid::{expand_grid, resource_count_for_arena, Cell, GridSpec, GridTrial, TrialKey};
pub use report::{
    emit_boxplot_data, summarize, summary_csv, summary_markdown, verify_summary, write_report,
    CellStats, DistributionSummary, Summary, SummaryRow,
};
pub use run::{run_grid, GridReport, RunOptions};
pub use store::{load_failures, load_rows, FailureRow, Store, TrialRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid grid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] forage_core::Error),
    #[error(transparent)]
    Gateway(#[from] forage_gateway::GatewayError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
