use serde::{Deserialize, Serialize};

use super::fft::centered_to_offset;
use super::Spectrum;
use crate::error::{Error, Result};

/// Outcome of the elementwise check `|D_c - G| <= R <= D_c + G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Largest amount by which `R` leaves the band (0 when inside).
    pub max_violation: f64,
    /// Coordinates exceeding the band by more than the tolerance.
    pub count: usize,
    /// Up to ten violating frequency offsets `(i, j)`.
    pub coords: Vec<(isize, isize)>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.count == 0
    }
}

/// Checks `D_corr - G <= R <= D_corr + G` at every frequency, with tolerance
/// `1e-9 * (1 + |R|)`.
pub fn triangle_audit(d_corr: &Spectrum, g: &Spectrum, r: &Spectrum) -> Result<AuditReport> {
    if !d_corr.same_grid(g) || !d_corr.same_grid(r) {
        return Err(Error::Dimension(format!(
            "audit grids differ: {}x{}, {}x{}, {}x{}",
            d_corr.height(),
            d_corr.width(),
            g.height(),
            g.width(),
            r.height(),
            r.width()
        )));
    }
    let (h, w) = (r.height(), r.width());
    let mut report = AuditReport {
        max_violation: 0.0,
        count: 0,
        coords: Vec::new(),
    };
    for row in 0..h {
        for col in 0..w {
            let (dc, gv, rv) = (d_corr.at(row, col), g.at(row, col), r.at(row, col));
            let excess = (dc - gv - rv).max(rv - dc - gv).max(0.0);
            report.max_violation = report.max_violation.max(excess);
            if excess > 1e-9 * (1.0 + rv.abs()) {
                report.count += 1;
                if report.coords.len() < 10 {
                    report
                        .coords
                        .push((centered_to_offset(row, h), centered_to_offset(col, w)));
                }
            }
        }
    }
    Ok(report)
}
