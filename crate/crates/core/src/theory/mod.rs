//! Power-law image ensembles and the low-pass predictions for a linear codec
//! trained on them.

mod ensemble;
mod mask;
mod predict;
mod report;

pub use ensemble::{generate_powerlaw, PowerLawEnsemble};
pub use mask::{lemma1_mask, lemma1_mask_with, FrequencyMask, MaskMode};
pub use predict::{
    cross_term_stats, predict_d, predict_g, predict_g_of, predict_r, predict_r_of, predict_reconstruction,
    CrossTermStats,
};
pub use report::{
    mask_agreement, off_diagonality, relative_errors, theory_report, CorruptionTheory, ErrorStats, MaskSummary,
    ModeErrors, OffDiagonality, TheoryOptions, TheoryOutput, TheoryReport, KEPT_FRACTION, REL_TOLERANCE,
    THEORY_DELTA,
};
