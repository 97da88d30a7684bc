//! Rate-distortion sweeps, operating-point matching and the suite driver.

mod config;
mod operating;
mod psnr;
mod record;
mod suite;

pub use config::{
    CodecConfig, ConstraintConfig, ConstraintKind, CorruptionConfig, DatasetConfig, HeatmapConfig, SuiteConfig, TheoryConfig,
    ENV_PREFIX,
};
pub use operating::{match_operating_points, Constraint, OperatingPointBin, DEFAULT_TOLERANCE};
pub use psnr::{psnr, psnr_capped, psnr_from_mse, PSNR_CAP};
pub use record::{
    evaluate_point, evaluate_with_outputs, rd_sweep, records_csv, EvalRecord, PointFailure, SweepInput,
    RECORD_COLUMNS,
};
pub use config::CodecTemplates;
pub use suite::{
    build_family, evaluate_suite, tool_id, AuditEntry, BandTable, BinReport, DriftRow, HeatmapSummary, IdentityCheck,
    SuiteOutcome, SuiteReport, TheorySummary,
};
