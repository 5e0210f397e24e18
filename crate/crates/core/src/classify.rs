//! Minimum-distance classification over pooled GPCA features.
//!
//! One bilinear subspace pair is fit on all training images regardless of
//! class; each class is summarized by its mean feature vector and a sample
//! goes to the nearest mean in Euclidean distance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpca_sift::{fit_gpca, project_features, GpcaModel, GpcaParams};
use crate::pipeline::load_images;
use crate::plot::{blues, Canvas, BLACK, WHITE};
use crate::sigcore::{io, Manifest, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdcParams {
    pub p1: usize,
    pub p2: usize,
}

impl Default for MdcParams {
    fn default() -> Self {
        MdcParams { p1: 4, p2: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct MdcModel {
    pub gpca: GpcaModel,
    /// Sorted labels; `means[i]` belongs to `classes[i]`.
    pub classes: Vec<String>,
    pub means: Vec<DVector<f64>>,
}

/// Fit on labelled images.
pub fn train_mdc_images(samples: &[(String, Spectrogram)], p: &MdcParams) -> Result<MdcModel> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (c, _)) in samples.iter().enumerate() {
        by_class.entry(c.as_str()).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(Error::param(format!(
            "training needs at least 2 classes, got {}",
            by_class.len()
        )));
    }
    let images: Vec<Spectrogram> = samples.iter().map(|(_, s)| s.clone()).collect();
    let params = GpcaParams {
        p1: p.p1,
        p2: p.p2,
        centered: true,
    };
    let gpca = fit_gpca(&images, &params, "pooled")?;
    let feats = images
        .iter()
        .map(|s| project_features(&gpca, s))
        .collect::<Result<Vec<_>>>()?;
    let mut classes = Vec::new();
    let mut means = Vec::new();
    for (c, idx) in by_class {
        let sum = idx
            .iter()
            .fold(DVector::zeros(gpca.feature_dim()), |a, i| a + &feats[*i]);
        classes.push(c.to_string());
        means.push(sum / idx.len() as f64);
    }
    Ok(MdcModel {
        gpca,
        classes,
        means,
    })
}

pub fn train_mdc(m: &Manifest, p: &MdcParams) -> Result<MdcModel> {
    let imgs = load_images(m)?;
    let samples: Vec<(String, Spectrogram)> = m.records.iter().map(|r| r.class.clone()).zip(imgs).collect();
    train_mdc_images(&samples, p)
}

impl MdcModel {
    /// Index of the nearest class mean; the first (lexicographically
    /// smallest) label wins ties.
    pub fn predict_index(&self, image: &Spectrogram) -> Result<usize> {
        let f = project_features(&self.gpca, image)?;
        let mut best = (0, f64::INFINITY);
        for (i, mu) in self.means.iter().enumerate() {
            let d = (&f - mu).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn predict(&self, image: &Spectrogram) -> Result<&str> {
        Ok(&self.classes[self.predict_index(image)?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    /// Row labels: classes present in the evaluated set, sorted.
    pub truth: Vec<String>,
    /// Column labels: every model class, sorted.
    pub predicted: Vec<String>,
    /// Raw counts, rows = truth.
    pub counts: Vec<Vec<usize>>,
}

pub const EVAL_HEADER_PREFIX: &str = "truth,n,correct,recall";

impl EvalResult {
    /// Build from (truth label, predicted label) pairs; `model_classes`
    /// gives the column set.
    pub fn from_pairs(pairs: &[(String, String)], model_classes: &[String]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::param("nothing to evaluate"));
        }
        let mut predicted = model_classes.to_vec();
        predicted.sort();
        predicted.dedup();
        let truth: Vec<String> = {
            let mut t: Vec<String> = pairs.iter().map(|(t, _)| t.clone()).collect();
            t.sort();
            t.dedup();
            t
        };
        let mut counts = vec![vec![0usize; predicted.len()]; truth.len()];
        for (t, p) in pairs {
            let r = truth.binary_search(t).unwrap();
            let c = predicted
                .binary_search(p)
                .map_err(|_| Error::UnknownClass(p.clone()))?;
            counts[r][c] += 1;
        }
        let correct: usize = pairs.iter().filter(|(t, p)| t == p).count();
        Ok(EvalResult {
            accuracy: correct as f64 / pairs.len() as f64,
            truth,
            predicted,
            counts,
        })
    }

    pub fn n_in(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    pub fn correct_in(&self, row: usize) -> usize {
        self.predicted
            .binary_search(&self.truth[row])
            .map(|c| self.counts[row][c])
            .unwrap_or(0)
    }

    pub fn recall(&self) -> Vec<f64> {
        (0..self.truth.len())
            .map(|r| self.correct_in(r) as f64 / self.n_in(r) as f64)
            .collect()
    }

    /// Row-normalized confusion in percent.
    pub fn confusion_percent(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter().map(|c| 100.0 * *c as f64 / n as f64).collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(EVAL_HEADER_PREFIX);
        for p in &self.predicted {
            out.push(',');
            out.push_str(p);
        }
        out.push('\n');
        let pct = self.confusion_percent();
        let recall = self.recall();
        for (r, t) in self.truth.iter().enumerate() {
            let _ = write!(out, "{t},{},{},{:.6}", self.n_in(r), self.correct_in(r), recall[r]);
            for v in &pct[r] {
                let _ = write!(out, ",{v:.4}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, self.to_csv().as_bytes())
    }

    /// Parse an evaluation CSV. Counts are recovered from the row totals
    /// and percentages.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::param(format!("evaluation CSV: {msg}"));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
        let fixed: Vec<&str> = EVAL_HEADER_PREFIX.split(',').collect();
        if header.len() < fixed.len() || header.iter().take(fixed.len()).ne(fixed.iter().copied()) {
            return Err(bad(format!("header must start with `{EVAL_HEADER_PREFIX}`")));
        }
        let predicted: Vec<String> = header.iter().skip(fixed.len()).map(String::from).collect();
        let (mut truth, mut counts) = (Vec::new(), Vec::new());
        let (mut total, mut correct) = (0usize, 0usize);
        for rec in rd.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| bad(format!("bad number in column {}", i + 1)))
            };
            let n = num(1)? as usize;
            total += n;
            correct += num(2)? as usize;
            truth.push(rec.get(0).unwrap_or_default().to_string());
            counts.push(
                (0..predicted.len())
                    .map(|k| Ok((num(fixed.len() + k)? * n as f64 / 100.0).round() as usize))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if total == 0 {
            return Err(bad("no rows".into()));
        }
        Ok(EvalResult {
            accuracy: correct as f64 / total as f64,
            truth,
            predicted,
            counts,
        })
    }

    /// Heatmap of the percent confusion matrix, rows = truth (top to bottom
    /// in label order), with each cell's rounded percentage drawn in.
    pub fn render_png(&self, path: &Path) -> Result<()> {
        const CELL: usize = 44;
        const MARGIN: usize = 12;
        let pct = self.confusion_percent();
        let (rows, cols) = (self.truth.len(), self.predicted.len());
        let mut c = Canvas::new(2 * MARGIN + cols * CELL, 2 * MARGIN + rows * CELL, WHITE);
        for (r, row) in pct.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let (x, y) = (MARGIN + k * CELL, MARGIN + r * CELL);
                c.fill_rect(x, y, CELL, CELL, blues(v / 100.0));
                let label = format!("{}", v.round() as i64);
                let ink = if *v > 50.0 { WHITE } else { BLACK };
                let w = Canvas::text_width(&label, 2);
                c.text(x + (CELL - w) / 2 + 1, y + CELL / 2 - 5, &label, 2, ink);
            }
        }
        c.rect_outline(MARGIN - 1, MARGIN - 1, cols * CELL + 2, rows * CELL + 2, BLACK);
        c.save(path)
    }
}

/// Evaluate loaded labelled images; prediction runs in parallel.
pub fn evaluate_images(model: &MdcModel, samples: &[(String, Spectrogram)]) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(Error::param("nothing to evaluate"));
    }
    if let Some((c, _)) = samples.iter().find(|(c, _)| model.classes.binary_search(c).is_err()) {
        return Err(Error::UnknownClass(c.clone()));
    }
    let pairs = samples
        .par_iter()
        .map(|(c, s)| Ok((c.clone(), model.predict(s)?.to_string())))
        .collect::<Result<Vec<_>>>()?;
    EvalResult::from_pairs(&pairs, &model.classes)
}

pub fn evaluate(model: &MdcModel, m: &Manifest) -> Result<EvalResult> {
    if m.is_empty() {
        return Err(Error::param("nothing to evaluate: manifest is empty"));
    }
    let imgs = load_images(m)?;
    let samples: Vec<(String, Spectrogram)> = m.records.iter().map(|r| r.class.clone()).zip(imgs).collect();
    evaluate_images(model, &samples)
}
