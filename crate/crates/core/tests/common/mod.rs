//! Independent oracles and fixtures shared by the integration suites.
//!
//! Nothing here calls the code it checks: the STFT oracle is a direct DFT,
//! MS-SSIM is recomputed with a dense 2-D kernel, hull membership uses the
//! separating-hyperplane LP, and eCLEAN is scored against the simulator's
//! own velocity tracks. The GPCA oracle is a plain multi-start power-style
//! ascent on rank-one subspaces.

#![allow(dead_code)]

use std::f64::consts::PI;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use udsift::kinsim::{derive_seed, draw_sample, front_end, inject_defect, simulate_sample, ActivityClass, DefectKind, RadarConfig};
use udsift::pipeline::Preprocess;
use udsift::sigcore::{Origin, Record, Spectrogram};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Power spectrogram by a direct per-frame DFT, DC-centred, row-major.
pub fn direct_stft(x: &[Complex64], window_len: usize, overlap: usize, nfft: usize) -> (usize, usize, Vec<f64>) {
    let hop = window_len - overlap;
    let frames = (x.len() - window_len) / hop + 1;
    let w: Vec<f64> = (0..window_len)
        .map(|m| 0.5 * (1.0 - (2.0 * PI * m as f64 / window_len as f64).cos()))
        .collect();
    let mut out = vec![0.0; nfft * frames];
    for f in 0..frames {
        for k in 0..nfft {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..window_len {
                // Reduce the phase index first to keep the twiddle exact.
                let ph = -2.0 * PI * ((k * m) % nfft) as f64 / nfft as f64;
                acc += x[f * hop + m] * w[m] * Complex64::from_polar(1.0, ph);
            }
            let row = (k + nfft / 2) % nfft;
            out[row * frames + f] = acc.norm_sqr();
        }
    }
    (nfft, frames, out)
}

/// Single-bin DFT magnitude of `x` at frequency `f` for sample rate `fs`.
pub fn dft_mag(x: &[Complex64], f: f64, fs: f64) -> f64 {
    x.iter()
        .enumerate()
        .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * f * n as f64 / fs))
        .sum::<Complex64>()
        .norm()
}

/// Standard five-scale exponents, normalized to sum to one.
pub fn msssim_weights() -> Vec<f64> {
    let w = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// MS-SSIM with a dense 11×11 Gaussian kernel and explicit local moments.
pub fn reference_ms_ssim(x: &[f64], y: &[f64], rows: usize, cols: usize) -> f64 {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut kernel = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let d2 = (i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2);
            *v = (-d2 / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (mut a, mut b, mut r, mut c) = (x.to_vec(), y.to_vec(), rows, cols);
    let weights = msssim_weights();
    let mut score = 1.0;
    for (scale, w) in weights.iter().enumerate() {
        let (mut l_sum, mut cs_sum, mut n) = (0.0, 0.0, 0.0);
        for i in 0..=r - 11 {
            for j in 0..=c - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for (di, krow) in kernel.iter().enumerate() {
                    for (dj, k) in krow.iter().enumerate() {
                        let idx = (i + di) * c + j + dj;
                        mx += k / total * a[idx];
                        my += k / total * b[idx];
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for (di, krow) in kernel.iter().enumerate() {
                    for (dj, k) in krow.iter().enumerate() {
                        let idx = (i + di) * c + j + dj;
                        let (dx, dy) = (a[idx] - mx, b[idx] - my);
                        vx += k / total * dx * dx;
                        vy += k / total * dy * dy;
                        cxy += k / total * dx * dy;
                    }
                }
                l_sum += (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                cs_sum += (2.0 * cxy + c2) / (vx + vy + c2);
                n += 1.0;
            }
        }
        score *= (cs_sum / n).max(0.0).powf(*w);
        if scale + 1 == weights.len() {
            score *= (l_sum / n).max(0.0).powf(*w);
        } else {
            let box2 = |v: &[f64]| -> Vec<f64> {
                let mut out = Vec::with_capacity((r / 2) * (c / 2));
                for i in 0..r / 2 {
                    for j in 0..c / 2 {
                        let s = v[2 * i * c + 2 * j] + v[2 * i * c + 2 * j + 1] + v[(2 * i + 1) * c + 2 * j] + v[(2 * i + 1) * c + 2 * j + 1];
                        out.push(s / 4.0);
                    }
                }
                out
            };
            a = box2(&a);
            b = box2(&b);
            r /= 2;
            c /= 2;
        }
    }
    score.clamp(0.0, 1.0)
}

/// Largest separation margin of `x` from conv(points): max a·x − b subject
/// to a·pᵢ ≤ b for every generator and |aₖ| ≤ 1. Zero when x is inside.
pub fn separation_margin(points: &[DVector<f64>], x: &DVector<f64>) -> f64 {
    let d = x.len();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let a: Vec<_> = (0..d).map(|k| lp.add_var(x[k], (-1.0, 1.0))).collect();
    let b = lp.add_var(-1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for p in points {
        let mut row: Vec<_> = a.iter().enumerate().map(|(k, v)| (*v, p[k])).collect();
        row.push((b, -1.0));
        lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
    }
    lp.solve().expect("separation LP is bounded and feasible").objective()
}

/// Oracle membership at a centroid-anchored tolerance.
pub fn oracle_contains(points: &[DVector<f64>], x: &DVector<f64>, tolerance: f64) -> bool {
    let c = points.iter().fold(DVector::zeros(x.len()), |acc, p| acc + p) / points.len() as f64;
    let target = &c + (x - &c) / tolerance;
    let spread = points.iter().map(|p| (p - &c).amax()).fold(0.0f64, f64::max).max(1e-300);
    separation_margin(points, &target) <= 1e-9 * spread
}

/// Counter-clockwise hull of 2-D points (monotone chain).
pub fn hull_2d(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], *q) <= 0.0 {
            lower.pop();
        }
        lower.push(*q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], *q) <= 0.0 {
            upper.pop();
        }
        upper.push(*q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance-like test: every CCW edge keeps the point on its left.
pub fn inside_polygon(poly: &[(f64, f64)], x: (f64, f64)) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b.0 - a.0) * (x.1 - a.1) - (b.1 - a.1) * (x.0 - a.0) >= -1e-12
    })
}

/// Ground-truth support of a simulated sample on its processed image grid:
/// each scatterer's Doppler track (and zero-Doppler clutter) rasterized over
/// each column's time span.
pub fn support_mask(class: ActivityClass, seed: u64, radar: &RadarConfig, img: &Spectrogram) -> Vec<bool> {
    let (aspect, script) = draw_sample(class, seed);
    let r_cfg = RadarConfig { aspect_deg: aspect, ..*radar };
    let ax = img.axes().expect("processed images carry axes");
    let (rows, cols) = img.shape();
    let df = ax.freq_hz[1] - ax.freq_hz[0];
    let dt = ax.time_s[1] - ax.time_s[0];
    let row_of = |f: f64| ((f - ax.freq_hz[0]) / df).round().clamp(0.0, rows as f64 - 1.0) as usize;
    let mut sup = vec![false; rows * cols];
    for c in 0..cols {
        let mut tracks: Vec<Box<dyn Fn(f64) -> f64>> = script
            .scatterers
            .iter()
            .map(|s| {
                let v = s.velocity.clone();
                Box::new(move |t: f64| v(t)) as Box<dyn Fn(f64) -> f64>
            })
            .collect();
        tracks.push(Box::new(|_| 0.0));
        for v in &tracks {
            let rs: Vec<usize> = (0..=8)
                .map(|k| ax.time_s[c] - dt / 2.0 + dt * k as f64 / 8.0)
                .map(|t| row_of(r_cfg.doppler_hz(v(t))))
                .collect();
            let (lo, hi) = (*rs.iter().min().unwrap(), *rs.iter().max().unwrap());
            for r in lo..=hi {
                sup[r * cols + c] = true;
            }
        }
    }
    sup
}

/// Rows from `(r, c)` to the nearest support pixel in column `c`.
pub fn support_distance(sup: &[bool], rows: usize, cols: usize, r: usize, c: usize) -> usize {
    (0..rows)
        .filter(|q| sup[q * cols + c])
        .map(|q| q.abs_diff(r))
        .min()
        .unwrap_or(usize::MAX)
}

/// Recall of support pixels (hit within ±`tol` rows) and rejection of
/// pixels more than `halo` rows from any track (zeroed fraction).
pub fn support_scores(sup: &[bool], kept: &dyn Fn(usize, usize) -> bool, rows: usize, cols: usize, tol: usize, halo: usize) -> (f64, f64) {
    let (mut hit, mut n_sup, mut zeroed, mut n_out) = (0usize, 0usize, 0usize, 0usize);
    for c in 0..cols {
        for r in 0..rows {
            if sup[r * cols + c] {
                n_sup += 1;
                let lo = r.saturating_sub(tol);
                let hi = (r + tol).min(rows - 1);
                if (lo..=hi).any(|q| kept(q, c)) {
                    hit += 1;
                }
            }
            if support_distance(sup, rows, cols, r, c) > halo {
                n_out += 1;
                if !kept(r, c) {
                    zeroed += 1;
                }
            }
        }
    }
    (hit as f64 / n_sup as f64, zeroed as f64 / n_out.max(1) as f64)
}

/// Support F1: recall as above, precision = kept pixels within `halo`
/// rows of a track.
pub fn support_f1(sup: &[bool], kept: &dyn Fn(usize, usize) -> bool, rows: usize, cols: usize, tol: usize, halo: usize) -> f64 {
    let (recall, _) = support_scores(sup, kept, rows, cols, tol, halo);
    let (mut near, mut n_kept) = (0usize, 0usize);
    for c in 0..cols {
        for r in 0..rows {
            if kept(r, c) {
                n_kept += 1;
                if support_distance(sup, rows, cols, r, c) <= halo {
                    near += 1;
                }
            }
        }
    }
    if n_kept == 0 {
        return 0.0;
    }
    let precision = near as f64 / n_kept as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Labelled images for all eight classes: `n` per class, the last
/// `round(defect_frac·n)` of each class replaced by kinematic defects.
///
/// Sample `g` (class-major) uses seed `derive_seed(derive_seed(base, tag), g)`.
pub fn labelled_set(base: u64, tag: u64, n: usize, defect_frac: f64) -> Vec<(Record, Spectrogram)> {
    let pre = Preprocess::default();
    let radar = RadarConfig::default();
    let n_def = (defect_frac * n as f64).round() as usize;
    let jobs: Vec<(ActivityClass, usize)> = ActivityClass::ALL
        .iter()
        .flat_map(|c| (0..n).map(move |i| (*c, i)))
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(g, (class, i))| {
            let seed = derive_seed(derive_seed(base, tag), g as u64);
            let s = simulate_sample(&radar, *class, seed).unwrap();
            let power = front_end(&s.raw, pre.operating_rate_hz, &pre.stft).unwrap();
            let defect = (*i >= n - n_def).then(|| DefectKind::KINEMATIC[(i - (n - n_def)) % 4]);
            let img = match defect {
                Some(k) => {
                    let norm = power.scaled(1.0 / power.max());
                    pre.image_from_power(&inject_defect(&norm, k, derive_seed(seed, 0xDEFEC7))).unwrap()
                }
                None => pre.image_from_power(&power).unwrap(),
            };
            let origin = if defect.is_some() { Origin::Defect } else { Origin::Synthetic };
            let mut r = Record::new(format!("{class}_{g}"), class.as_str(), s.aspect_deg, origin);
            r.defect = defect.map(|k| k.as_str().to_string());
            (r, img)
        })
        .collect()
}

pub fn labels(v: &[(Record, Spectrogram)]) -> Vec<(String, Spectrogram)> {
    v.iter().map(|(r, s)| (r.class.clone(), s.clone())).collect()
}

pub fn random_mats(r: &mut ChaCha8Rng, n: usize, rows: usize, cols: usize) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|_| DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0)))
        .collect()
}

fn top_vec(m: &DMatrix<f64>) -> DVector<f64> {
    let e = SymmetricEigen::new(m.clone());
    let i = e.eigenvalues.imax();
    e.eigenvectors.column(i).into_owned()
}

/// Best rank-(1,1) scatter from 16 random starts of plain alternating
/// eigen-steps on the centred samples.
pub fn oracle_objective(samples: &[DMatrix<f64>], r: &mut ChaCha8Rng) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().fold(DMatrix::zeros(samples[0].nrows(), samples[0].ncols()), |a, s| a + s) / n;
    let d: Vec<DMatrix<f64>> = samples.iter().map(|s| s - &mean).collect();
    let score = |u: &DVector<f64>, v: &DVector<f64>| d.iter().map(|m| (u.transpose() * m * v)[(0, 0)].powi(2)).sum::<f64>();
    let mut best = 0.0f64;
    for _ in 0..16 {
        let mut v = DVector::from_fn(d[0].ncols(), |_, _| r.random_range(-1.0..1.0)).normalize();
        let mut u = DVector::zeros(d[0].nrows());
        let mut last = -1.0;
        for _ in 0..500 {
            let a = d.iter().fold(DMatrix::zeros(u.len(), u.len()), |acc, m| {
                let b = m * &v;
                acc + &b * b.transpose()
            });
            u = top_vec(&a);
            let b = d.iter().fold(DMatrix::zeros(v.len(), v.len()), |acc, m| {
                let c = m.transpose() * &u;
                acc + &c * c.transpose()
            });
            v = top_vec(&b);
            let s = score(&u, &v);
            if (s - last).abs() <= 1e-15 * s {
                break;
            }
            last = s;
        }
        best = best.max(score(&u, &v));
    }
    best
}
