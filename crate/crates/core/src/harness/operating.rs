use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::EvalRecord;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum Constraint {
    FixedBpp(f64),
    FixedPsnr(f64),
}

impl Constraint {
    pub fn target(self) -> f64 {
        match self {
            Constraint::FixedBpp(t) | Constraint::FixedPsnr(t) => t,
        }
    }

    pub fn metric(self, record: &EvalRecord) -> f64 {
        match self {
            Constraint::FixedBpp(_) => record.bpp_exact,
            Constraint::FixedPsnr(_) => record.psnr_vs_clean,
        }
    }

    /// `|metric - target| / target`.
    pub fn deviation(self, record: &EvalRecord) -> f64 {
        let t = self.target();
        (self.metric(record) - t).abs() / t.abs()
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Constraint::FixedBpp(t) => write!(f, "fixed_bpp={t}"),
            Constraint::FixedPsnr(t) => write!(f, "fixed_psnr={t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointBin {
    pub constraint: Constraint,
    pub tolerance: f64,
    /// At most one record per codec id, in first-seen codec order.
    pub members: Vec<EvalRecord>,
    /// Codec ids with no clean record inside the tolerance.
    pub unmatched: Vec<String>,
}

/// Picks, per codec id, the clean record closest to the target. Codecs whose
/// best record is outside `tolerance` are listed as unmatched.
pub fn match_operating_points(
    records: &[EvalRecord],
    constraint: Constraint,
    tolerance: f64,
) -> Result<OperatingPointBin> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to match".into()));
    }
    if !(constraint.target() > 0.0) || !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "constraint target and tolerance must be positive, got {constraint} and {tolerance}"
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut best: BTreeMap<&str, &EvalRecord> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.is_clean()) {
        let slot = best.entry(rec.codec.as_str()).or_insert_with(|| {
            order.push(&rec.codec);
            rec
        });
        if constraint.deviation(rec) < constraint.deviation(slot) {
            *slot = rec;
        }
    }
    let mut members = Vec::new();
    let mut unmatched = Vec::new();
    for id in order {
        let rec = best[id];
        if constraint.deviation(rec) <= tolerance {
            members.push(rec.clone());
        } else {
            unmatched.push(id.to_string());
        }
    }
    Ok(OperatingPointBin {
        constraint,
        tolerance,
        members,
        unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::RateParam;

    fn rec(codec: &str, bpp: f64, psnr: f64) -> EvalRecord {
        EvalRecord {
            codec: codec.into(),
            rate_param: RateParam::None,
            dataset: "d".into(),
            corruption: None,
            bpp_exact: bpp,
            bpp_entropy: bpp,
            psnr_vs_input: psnr,
            psnr_vs_clean: psnr,
            clamp_frac: 0.0,
            wall_ms: 0,
            tool: None,
            config_hash: String::new(),
            spectra: Vec::new(),
        }
    }

    #[test]
    fn bpp_bins() {
        let recs = [rec("a", 0.5, 20.0), rec("a", 1.0, 25.0), rec("a", 2.0, 30.0)];
        let miss = match_operating_points(&recs, Constraint::FixedBpp(1.1), DEFAULT_TOLERANCE).unwrap();
        assert!(miss.members.is_empty());
        assert_eq!(miss.unmatched, vec!["a".to_string()]);
        let hit = match_operating_points(&recs, Constraint::FixedBpp(1.0), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(hit.members.len(), 1);
        assert_eq!(hit.members[0].bpp_exact, 1.0);
    }

    #[test]
    fn one_member_per_codec() {
        let recs = [
            rec("lin", 0.3, 35.9),
            rec("lin", 0.6, 36.9),
            rec("dct", 0.4, 36.5),
            rec("dct", 0.9, 38.9),
            rec("ext", 1.2, 37.2),
        ];
        let bin = match_operating_points(&recs, Constraint::FixedPsnr(36.8), DEFAULT_TOLERANCE).unwrap();
        let ids: Vec<_> = bin.members.iter().map(|r| r.codec.as_str()).collect();
        assert_eq!(ids, ["lin", "dct", "ext"]);
        assert!(bin.members.iter().all(|r| (r.psnr_vs_clean - 36.8).abs() / 36.8 <= 0.05));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(match_operating_points(&[], Constraint::FixedBpp(1.0), 0.05).is_err());
    }
}
