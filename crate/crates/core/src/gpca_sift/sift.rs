//! Per-class kinematic sifting of candidate signatures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinrules::{evaluate, RuleConfig, RuleOutcome, RuleVerdict};
use crate::kinsim::ActivityClass;
use crate::pipeline::load_images;
use crate::sigcore::{io, Manifest, Record, Spectrogram};

use super::gpca::{fit_gpca, project_features, GpcaModel, GpcaParams};
use super::hull::{build_hull, hull_contains};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    pub gpca: GpcaParams,
    /// Homothety factor of the acceptance hull about its centroid.
    pub tolerance: f64,
    /// Gate walking and falling candidates on the kinematic rules.
    pub apply_rules: bool,
    pub rules: RuleConfig,
}

impl Default for SiftConfig {
    fn default() -> Self {
        SiftConfig {
            gpca: GpcaParams::default(),
            tolerance: 1.0,
            apply_rules: true,
            rules: RuleConfig::default(),
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        self.rules.validate()
    }
}

/// Named tolerance presets.
pub const TOLERANCE_PRESETS: [(&str, f64); 2] = [("tol-1.0", 1.0), ("tol-0.5", 0.5)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftRow {
    pub class: String,
    pub n_input: usize,
    pub n_accepted: usize,
    pub n_rejected_hull: usize,
    pub n_rejected_rules: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftReport {
    pub tolerance: f64,
    /// Sorted by class name.
    pub rows: Vec<SiftRow>,
}

pub const SIFT_REPORT_HEADER: &str = "class,n_input,n_accepted,n_rejected_hull,n_rejected_rules,tolerance";

impl SiftReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SIFT_REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.class, r.n_input, r.n_accepted, r.n_rejected_hull, r.n_rejected_rules, self.tolerance
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, self.to_csv().as_bytes())
    }

    pub fn total_accepted(&self) -> usize {
        self.rows.iter().map(|r| r.n_accepted).sum()
    }
}

/// Why a candidate was turned away, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accepted,
    RejectedRules,
    RejectedHull,
}

#[derive(Debug, Clone)]
pub struct SiftOutcome {
    /// Accepted candidates, absolute paths, with rule verdicts attached.
    pub accepted: Manifest,
    pub report: SiftReport,
    /// One decision per candidate record, in input order.
    pub decisions: Vec<Decision>,
}

/// Fit one hull-equipped GPCA model per class of `images`.
pub fn fit_class_models(
    images: &[(String, Spectrogram)],
    params: &GpcaParams,
) -> Result<BTreeMap<String, GpcaModel>> {
    let mut by_class: BTreeMap<String, Vec<Spectrogram>> = BTreeMap::new();
    for (c, s) in images {
        by_class.entry(c.clone()).or_default().push(s.clone());
    }
    by_class
        .into_par_iter()
        .map(|(class, imgs)| {
            let model = fit_gpca(&imgs, params, &class)?;
            let feats = imgs
                .iter()
                .map(|s| project_features(&model, s))
                .collect::<Result<Vec<_>>>()?;
            Ok((class, build_hull(model, feats)?))
        })
        .collect()
}

/// Rule verdict for a candidate of a known activity class; classes outside
/// the built-in taxonomy are not gated.
fn verdict_for(class: &str, image: &Spectrogram, cfg: &RuleConfig) -> RuleVerdict {
    match class.parse::<ActivityClass>() {
        Ok(c) => evaluate(image, c, cfg),
        Err(_) => RuleVerdict::compose(
            RuleOutcome::NotApplicable,
            RuleOutcome::NotApplicable,
            RuleOutcome::NotApplicable,
        ),
    }
}

/// Sift already-loaded images. `real` trains the per-class hulls.
pub fn sift_images(
    real: &[(String, Spectrogram)],
    candidates: &[(Record, Spectrogram)],
    cfg: &SiftConfig,
) -> Result<(Vec<Decision>, Vec<RuleVerdict>, SiftReport, BTreeMap<String, GpcaModel>)> {
    cfg.validate()?;
    let models = fit_class_models(real, &cfg.gpca)?;
    let missing: Vec<String> = candidates
        .iter()
        .filter(|(r, _)| !models.contains_key(&r.class))
        .map(|(r, _)| format!("{} ({})", r.path, r.class))
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnmatchedCandidates(missing.join(", ")));
    }
    let judged: Vec<(Decision, RuleVerdict)> = candidates
        .par_iter()
        .map(|(rec, img)| {
            let verdict = verdict_for(&rec.class, img, &cfg.rules);
            if cfg.apply_rules && verdict.overall == RuleOutcome::Fail {
                return Ok((Decision::RejectedRules, verdict));
            }
            let model = &models[&rec.class];
            let f = project_features(model, img)?;
            let d = if hull_contains(model, &f, cfg.tolerance) {
                Decision::Accepted
            } else {
                Decision::RejectedHull
            };
            Ok((d, verdict))
        })
        .collect::<Result<_>>()?;
    let mut rows: BTreeMap<String, SiftRow> = BTreeMap::new();
    for ((rec, _), (d, _)) in candidates.iter().zip(&judged) {
        let row = rows.entry(rec.class.clone()).or_insert_with(|| SiftRow {
            class: rec.class.clone(),
            n_input: 0,
            n_accepted: 0,
            n_rejected_hull: 0,
            n_rejected_rules: 0,
        });
        row.n_input += 1;
        match d {
            Decision::Accepted => row.n_accepted += 1,
            Decision::RejectedHull => row.n_rejected_hull += 1,
            Decision::RejectedRules => row.n_rejected_rules += 1,
        }
    }
    let report = SiftReport {
        tolerance: cfg.tolerance,
        rows: rows.into_values().collect(),
    };
    let (decisions, verdicts) = judged.into_iter().unzip();
    Ok((decisions, verdicts, report, models))
}

/// Sift the candidates of one manifest against the real samples of another.
pub fn sift(real: &Manifest, candidates: &Manifest, cfg: &SiftConfig) -> Result<SiftOutcome> {
    let real_imgs = load_images(real)?;
    let real_set: Vec<(String, Spectrogram)> = real
        .records
        .iter()
        .map(|r| r.class.clone())
        .zip(real_imgs)
        .collect();
    let cand = candidates.absolutized();
    let cand_imgs = load_images(&cand)?;
    let cand_set: Vec<(Record, Spectrogram)> = cand.records.iter().cloned().zip(cand_imgs).collect();
    let (decisions, verdicts, report, _) = sift_images(&real_set, &cand_set, cfg)?;
    let records = cand
        .records
        .iter()
        .zip(decisions.iter().zip(&verdicts))
        .filter(|(_, (d, _))| **d == Decision::Accepted)
        .map(|(r, (_, v))| {
            let mut r = r.clone();
            r.set_verdict(v);
            r
        })
        .collect();
    Ok(SiftOutcome {
        accepted: Manifest::new(cand.base_dir.clone(), records),
        report,
        decisions,
    })
}
