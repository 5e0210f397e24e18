//! MS-SSIM similarity and per-class diversity statistics.
//!
//! Each scale filters with an 11×11 Gaussian over the valid region only,
//! then halves the image by 2×2 averaging. Contrast and structure are
//! combined into one term per scale (the usual C3 = C2/2 convention) and
//! clamped at zero before the fractional exponent; luminance enters only at
//! the coarsest scale.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plot::{blues, Canvas, BLACK, WHITE};
use crate::sigcore::{io, resize, Interpolation, Manifest, Spectrogram};

/// Standard five-scale exponents as published; they sum to 1.0001 and are
/// divided by that sum for use.
pub const DEFAULT_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsssimParams {
    pub scales: usize,
    pub weights: Vec<f64>,
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for MsssimParams {
    fn default() -> Self {
        MsssimParams {
            scales: 5,
            weights: {
                let sum: f64 = DEFAULT_WEIGHTS.iter().sum();
                DEFAULT_WEIGHTS.iter().map(|w| w / sum).collect()
            },
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl MsssimParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 {
            return Err(Error::param("MS-SSIM needs at least one scale"));
        }
        if self.weights.len() != self.scales {
            return Err(Error::param(format!(
                "{} weights given for {} scales",
                self.weights.len(),
                self.scales
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::param(format!(
                "weights must be non-negative and sum to 1, got sum {sum}"
            )));
        }
        if self.window == 0 || self.window % 2 == 0 || !(self.sigma > 0.0) {
            return Err(Error::param("window must be odd and sigma positive"));
        }
        if !(self.dynamic_range > 0.0 && self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::param("K1, K2 and the dynamic range must be positive"));
        }
        Ok(())
    }

    /// Smallest image side the pyramid accepts.
    pub fn min_side(&self) -> usize {
        (1usize << (self.scales - 1)) * self.window
    }
}

fn gaussian(window: usize, sigma: f64) -> Vec<f64> {
    let c = (window / 2) as f64;
    let w: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable valid-region filtering of a row-major grid.
fn filter_valid(v: &[f64], rows: usize, cols: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (or, oc) = (rows + 1 - k, cols + 1 - k);
    let mut h = vec![0.0; rows * oc];
    for r in 0..rows {
        let src = &v[r * cols..(r + 1) * cols];
        for c in 0..oc {
            h[r * oc + c] = g.iter().zip(&src[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for (i, gi) in g.iter().enumerate() {
            let src = &h[(r + i) * oc..(r + i + 1) * oc];
            out[r * oc..(r + 1) * oc]
                .iter_mut()
                .zip(src)
                .for_each(|(d, s)| *d += gi * s);
        }
    }
    out
}

/// Mean luminance and contrast-structure terms at one scale.
fn ssim_terms(x: &[f64], y: &[f64], rows: usize, cols: usize, g: &[f64], c1: f64, c2: f64) -> (f64, f64) {
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = y.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [mx, my, exx, eyy, exy] = [x, y, &xx[..], &yy[..], &xy[..]].map(|v| filter_valid(v, rows, cols, g));
    let n = mx.len() as f64;
    let (mut l, mut cs) = (0.0, 0.0);
    for i in 0..mx.len() {
        let (a, b) = (mx[i], my[i]);
        let sxx = exx[i] - a * a;
        let syy = eyy[i] - b * b;
        let sxy = exy[i] - a * b;
        l += (2.0 * a * b + c1) / (a * a + b * b + c1);
        cs += (2.0 * sxy + c2) / (sxx + syy + c2);
    }
    (l / n, cs / n)
}

fn halve(v: &[f64], rows: usize, cols: usize) -> (Vec<f64>, usize, usize) {
    let (or, oc) = (rows / 2, cols / 2);
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            let i = 2 * r * cols + 2 * c;
            out[r * oc + c] = 0.25 * (v[i] + v[i + 1] + v[i + cols] + v[i + cols + 1]);
        }
    }
    (out, or, oc)
}

/// Multi-scale structural similarity of two images in `[0, 1]`.
pub fn ms_ssim(x: &Spectrogram, y: &Spectrogram, p: &MsssimParams) -> Result<f64> {
    p.validate()?;
    if x.shape() != y.shape() {
        return Err(Error::param(format!(
            "shape mismatch: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let (rows, cols) = x.shape();
    if rows.min(cols) < p.min_side() {
        return Err(Error::param(format!(
            "images must be at least {0}×{0} for {1} scales, got {rows}×{cols}",
            p.min_side(),
            p.scales
        )));
    }
    if x.values().iter().chain(y.values()).any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
        return Err(Error::param("MS-SSIM expects values in [0, 1]"));
    }
    let g = gaussian(p.window, p.sigma);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let (mut a, mut b, mut r, mut c) = (x.values().to_vec(), y.values().to_vec(), rows, cols);
    let mut score = 1.0;
    for (j, w) in p.weights.iter().enumerate() {
        let (l, cs) = ssim_terms(&a, &b, r, c, &g, c1, c2);
        score *= cs.max(0.0).powf(*w);
        if j + 1 == p.scales {
            score *= l.max(0.0).powf(*w);
        } else {
            (a, _, _) = halve(&a, r, c);
            let (hb, hr, hc) = halve(&b, r, c);
            (b, r, c) = (hb, hr, hc);
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Bicubically enlarge an image whose short side is below the pyramid
/// minimum so every side reaches it; larger images are returned unchanged.
pub fn fit_to_pyramid(s: &Spectrogram, p: &MsssimParams) -> Spectrogram {
    let need = p.min_side();
    if s.rows().min(s.cols()) >= need {
        return s.clone();
    }
    let up = resize(s, s.rows().max(need), s.cols().max(need), Interpolation::Bicubic);
    let v = up.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Spectrogram::new(up.rows(), up.cols(), v).expect("shape preserved")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDiversity {
    pub class: String,
    pub n_pairs: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Scores in pair-draw order; empty when read back from CSV.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl ClassDiversity {
    pub fn from_values(class: impl Into<String>, values: Vec<f64>) -> Self {
        let mut s = values.clone();
        s.sort_by(f64::total_cmp);
        ClassDiversity {
            class: class.into(),
            n_pairs: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: quantile(&s, 0.5),
            q1: quantile(&s, 0.25),
            q3: quantile(&s, 0.75),
            min: s[0],
            max: s[s.len() - 1],
            values,
        }
    }
}

/// Linear-interpolated quantile of sorted, non-empty data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiversityReport {
    /// Sorted by class name.
    pub classes: Vec<ClassDiversity>,
    /// Classes left out for having fewer than two samples.
    pub skipped: Vec<String>,
}

pub const DIVERSITY_HEADER: &str = "class,n_pairs,mean,median,q1,q3,min,max";

impl DiversityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DIVERSITY_HEADER);
        out.push('\n');
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.class, c.n_pairs, c.mean, c.median, c.q1, c.q3, c.min, c.max
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, self.to_csv().as_bytes())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let mut classes = Vec::new();
        for row in rd.deserialize() {
            let c: ClassDiversity = row.map_err(|e| Error::param(format!("diversity CSV: {e}")))?;
            classes.push(c);
        }
        Ok(DiversityReport {
            classes,
            skipped: Vec::new(),
        })
    }

    pub fn get(&self, class: &str) -> Option<&ClassDiversity> {
        self.classes.iter().find(|c| c.class == class)
    }

    /// One box per class on a shared 0–1 axis: whiskers at min/max, box at
    /// the quartiles, a dark bar at the median. Gridlines every 0.1.
    pub fn render_boxplot_png(&self, path: &Path) -> Result<()> {
        const SLOT: usize = 48;
        const PLOT_H: usize = 300;
        const LEFT: usize = 36;
        const PAD: usize = 12;
        let n = self.classes.len().max(1);
        let mut c = Canvas::new(LEFT + n * SLOT + PAD, PLOT_H + 2 * PAD, WHITE);
        let y_of = |v: f64| PAD + ((1.0 - v.clamp(0.0, 1.0)) * (PLOT_H - 1) as f64).round() as usize;
        for k in 0..=10 {
            let y = y_of(k as f64 / 10.0);
            c.hline(LEFT, LEFT + n * SLOT - 1, y, [225, 225, 225]);
            if k % 5 == 0 {
                let label = format!("{:.1}", k as f64 / 10.0);
                c.text(4, y.saturating_sub(2), &label, 1, BLACK);
            }
        }
        for (i, d) in self.classes.iter().enumerate() {
            let x0 = LEFT + i * SLOT + SLOT / 4;
            let w = SLOT / 2;
            let mid = x0 + w / 2;
            c.vline(mid, y_of(d.max), y_of(d.q3), BLACK);
            c.vline(mid, y_of(d.q1), y_of(d.min), BLACK);
            c.hline(x0 + w / 4, x0 + 3 * w / 4, y_of(d.max), BLACK);
            c.hline(x0 + w / 4, x0 + 3 * w / 4, y_of(d.min), BLACK);
            let (top, bot) = (y_of(d.q3), y_of(d.q1));
            c.fill_rect(x0, top, w, bot - top + 1, blues(0.45));
            c.rect_outline(x0, top, w, bot - top + 1, BLACK);
            let ym = y_of(d.median);
            c.fill_rect(x0, ym.saturating_sub(1), w, 3, [8, 48, 107]);
        }
        c.vline(LEFT, PAD, PAD + PLOT_H - 1, BLACK);
        c.save(path)
    }
}

/// Stable per-class seed mix (FNV-1a over the label).
fn class_seed(seed: u64, class: &str) -> u64 {
    class
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64 ^ seed, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Map a linear index over unordered pairs of `n` items to `(i, j)`, i < j.
fn pair_at(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

/// Draw up to `n_pairs` distinct unordered index pairs out of `n` items.
pub fn draw_pairs(n: usize, n_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    let total = n * (n - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, total, n_pairs.min(total))
        .into_iter()
        .map(|k| pair_at(k, n))
        .collect()
}

/// Diversity statistics of already-loaded class image sets. Within a class
/// the order given is the pair-indexing order.
pub fn diversity_of(
    classes: &BTreeMap<String, Vec<Spectrogram>>,
    n_pairs: usize,
    seed: u64,
    p: &MsssimParams,
) -> Result<DiversityReport> {
    p.validate()?;
    let mut report = DiversityReport::default();
    for (class, imgs) in classes {
        if imgs.len() < 2 {
            log::warn!("class `{class}` has {} sample(s); skipped", imgs.len());
            report.skipped.push(class.clone());
            continue;
        }
        let pairs = draw_pairs(imgs.len(), n_pairs, class_seed(seed, class));
        if pairs.is_empty() {
            report.skipped.push(class.clone());
            continue;
        }
        let prepared: Vec<Spectrogram> = imgs.par_iter().map(|s| fit_to_pyramid(s, p)).collect();
        let values = pairs
            .par_iter()
            .map(|(i, j)| ms_ssim(&prepared[*i], &prepared[*j], p))
            .collect::<Result<Vec<_>>>()?;
        report.classes.push(ClassDiversity::from_values(class.clone(), values));
    }
    Ok(report)
}

/// Per-class diversity of a manifest; samples are ordered by path first so
/// the report does not depend on record order.
pub fn diversity_report(m: &Manifest, n_pairs: usize, seed: u64, p: &MsssimParams) -> Result<DiversityReport> {
    let mut by_class: BTreeMap<String, Vec<&crate::sigcore::Record>> = BTreeMap::new();
    for r in &m.records {
        by_class.entry(r.class.clone()).or_default().push(r);
    }
    let mut loaded = BTreeMap::new();
    for (class, mut recs) in by_class {
        recs.sort_by(|a, b| a.path.cmp(&b.path));
        let imgs = recs
            .par_iter()
            .map(|r| io::read_any(&m.path_of(r)))
            .collect::<Result<Vec<_>>>()?;
        loaded.insert(class, imgs);
    }
    diversity_of(&loaded, n_pairs, seed, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn noise(rows: usize, cols: usize, seed: u64) -> Spectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Spectrogram::new(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn defaults_and_validation() {
        let p = MsssimParams::default();
        assert_eq!(p.min_side(), 176);
        assert!(p.validate().is_ok());
        let bad = MsssimParams { weights: vec![0.5; 5], ..p.clone() };
        assert!(bad.validate().is_err());
        let bad = MsssimParams { scales: 4, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_and_symmetry() {
        let p = MsssimParams::default();
        let (x, y) = (noise(176, 180, 1), noise(176, 180, 2));
        assert!((ms_ssim(&x, &x, &p).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(ms_ssim(&x, &y, &p).unwrap(), ms_ssim(&y, &x, &p).unwrap());
        assert!(ms_ssim(&x, &y, &p).unwrap() < 0.1);
    }

    #[test]
    fn rejects_small_or_mismatched() {
        let p = MsssimParams::default();
        assert!(ms_ssim(&noise(100, 100, 1), &noise(100, 100, 2), &p).is_err());
        assert!(ms_ssim(&noise(176, 176, 1), &noise(176, 177, 2), &p).is_err());
    }

    #[test]
    fn pair_indexing_covers_all_pairs() {
        let n = 7;
        let mut seen: Vec<(usize, usize)> = (0..n * (n - 1) / 2).map(|k| pair_at(k, n)).collect();
        seen.sort();
        let mut expect = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                expect.push((i, j));
            }
        }
        assert_eq!(seen, expect);
        assert_eq!(draw_pairs(4, 100, 3).len(), 6);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&s, 1.0), 4.0);
    }

    #[test]
    fn identical_class_scores_one_and_singletons_skip() {
        let x = noise(100, 100, 9);
        let mut classes = BTreeMap::new();
        classes.insert("a".to_string(), vec![x.clone(), x.clone(), x.clone()]);
        classes.insert("b".to_string(), vec![x]);
        let r = diversity_of(&classes, 100, 0, &MsssimParams::default()).unwrap();
        assert_eq!(r.skipped, vec!["b".to_string()]);
        let a = r.get("a").unwrap();
        assert_eq!(a.n_pairs, 3);
        for v in [a.mean, a.median, a.q1, a.q3, a.min, a.max] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        let back = DiversityReport::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back.classes[0].n_pairs, 3);
    }
}
