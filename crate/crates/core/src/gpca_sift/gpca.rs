//! Two-sided (bilinear) PCA.
//!
//! Each image Sₘ is reduced to the P₁×P₂ core Yₘ = U₁ᵀ Sₘ U₂. The subspaces
//! maximize the scatter Σₘ ‖Yₘ − Ȳ‖²_F, found by alternating eigen-steps:
//! with U₂ fixed, U₁ spans the top-P₁ eigenvectors of Σₘ DₘU₂U₂ᵀDₘᵀ (Dₘ the
//! centred image), and symmetrically for U₂. The ascent is run from several
//! starts because it can stall in a local maximum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigcore::Spectrogram;

use super::hull::Hull;

pub const MAX_ITERATIONS: usize = 100;
pub const REL_TOLERANCE: f64 = 1e-9;
/// Random starts tried after the two eigen starts.
pub const RANDOM_RESTARTS: usize = 16;
const RESTART_SEED: u64 = 0x6C9A;
/// Full steps every start receives before the field is cut.
const SCREEN_ITERATIONS: usize = 4;
/// Starts carried on to convergence.
const FINALISTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpcaParams {
    pub p1: usize,
    pub p2: usize,
    /// Subtract the mean image before projecting.
    pub centered: bool,
}

impl Default for GpcaParams {
    fn default() -> Self {
        GpcaParams {
            p1: 2,
            p2: 2,
            centered: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpcaModel {
    pub class_label: String,
    /// I₁×P₁, orthonormal columns.
    pub u1: DMatrix<f64>,
    /// I₂×P₂, orthonormal columns.
    pub u2: DMatrix<f64>,
    pub mean_image: DMatrix<f64>,
    pub centered: bool,
    /// Final scatter Σₘ ‖Yₘ − Ȳ‖²_F.
    pub objective: f64,
    /// Scatter after the initial step and after every half-iteration.
    pub history: Vec<f64>,
    pub hull: Option<Hull>,
}

impl GpcaModel {
    pub fn p1(&self) -> usize {
        self.u1.ncols()
    }

    pub fn p2(&self) -> usize {
        self.u2.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.p1() * self.p2()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean_image.shape()
    }
}

/// Row-major spectrogram values as an I₁×I₂ matrix.
pub fn to_matrix(s: &Spectrogram) -> DMatrix<f64> {
    DMatrix::from_row_slice(s.rows(), s.cols(), s.values())
}

/// Top-`k` eigenvectors of a symmetric matrix, by descending eigenvalue.
///
/// Ties keep the solver's order; each vector's sign is fixed so its largest
/// entry is positive, which keeps results reproducible.
pub(crate) fn top_eigenvectors(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let mut out = DMatrix::zeros(m.nrows(), k);
    for (j, &i) in idx.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let big = v.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        if big < 0.0 {
            v.neg_mut();
        }
        out.set_column(j, &v);
    }
    out
}

fn scatter(d: &[DMatrix<f64>], u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> f64 {
    d.iter()
        .map(|dm| (u1.transpose() * dm * u2).norm_squared())
        .sum()
}

fn mode1_scatter(d: &[DMatrix<f64>], u2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d[0].nrows();
    d.iter().fold(DMatrix::zeros(n, n), |acc, dm| {
        let b = dm * u2;
        acc + &b * b.transpose()
    })
}

fn mode2_scatter(d: &[DMatrix<f64>], u1: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d[0].ncols();
    d.iter().fold(DMatrix::zeros(n, n), |acc, dm| {
        let b = u1.transpose() * dm;
        acc + b.transpose() * b
    })
}

type Run = (DMatrix<f64>, DMatrix<f64>, Vec<f64>);

fn start(d: &[DMatrix<f64>], u2: DMatrix<f64>, p1: usize) -> Run {
    let u1 = top_eigenvectors(&mode1_scatter(d, &u2), p1);
    let obj = scatter(d, &u1, &u2);
    (u1, u2, vec![obj])
}

/// Up to `iterations` more full alternating steps; stops early once the
/// relative gain of a step falls below the tolerance.
fn ascend(d: &[DMatrix<f64>], run: Run, p2: usize, iterations: usize) -> Run {
    let (mut u1, mut u2, mut history) = run;
    let p1 = u1.ncols();
    let mut obj = *history.last().unwrap();
    for _ in 0..iterations {
        let prev = obj;
        // Each half-step is an exact maximization given the other factor;
        // an update that loses ground to rounding is not taken.
        let cand2 = top_eigenvectors(&mode2_scatter(d, &u1), p2);
        let o2 = scatter(d, &u1, &cand2);
        if o2 >= obj {
            u2 = cand2;
            obj = o2;
        }
        history.push(obj);
        let cand1 = top_eigenvectors(&mode1_scatter(d, &u2), p1);
        let o1 = scatter(d, &cand1, &u2);
        if o1 >= obj {
            u1 = cand1;
            obj = o1;
        }
        history.push(obj);
        if (obj - prev).abs() <= REL_TOLERANCE * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    (u1, u2, history)
}

/// Fit subspaces on same-shape images (no hull yet).
pub fn fit_gpca(samples: &[Spectrogram], params: &GpcaParams, class_label: &str) -> Result<GpcaModel> {
    let mats: Vec<DMatrix<f64>> = samples.iter().map(to_matrix).collect();
    fit_gpca_matrices(&mats, params, class_label)
}

pub fn fit_gpca_matrices(samples: &[DMatrix<f64>], params: &GpcaParams, class_label: &str) -> Result<GpcaModel> {
    if samples.len() < 2 {
        return Err(Error::param(format!(
            "GPCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let (i1, i2) = samples[0].shape();
    if let Some(s) = samples.iter().find(|s| s.shape() != (i1, i2)) {
        return Err(Error::param(format!(
            "sample shapes differ: {:?} vs {:?}",
            s.shape(),
            (i1, i2)
        )));
    }
    let (p1, p2) = (params.p1, params.p2);
    if !(1..=i1).contains(&p1) || !(1..=i2).contains(&p2) {
        return Err(Error::param(format!(
            "subspace sizes {p1}x{p2} must lie within 1..={i1} x 1..={i2}"
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().fold(DMatrix::zeros(i1, i2), |a, s| a + s) / n;
    let d: Vec<DMatrix<f64>> = samples.iter().map(|s| s - &mean).collect();
    let total: f64 = d.iter().map(|x| x.norm_squared()).sum();

    let (u1, u2, history) = if total == 0.0 {
        // No scatter to explain: fall back to the mean image's own row and
        // column covariance.
        let u1 = top_eigenvectors(&(&mean * mean.transpose()), p1);
        let u2 = top_eigenvectors(&(mean.transpose() * &mean), p2);
        (u1, u2, vec![0.0])
    } else {
        // The alternating ascent only finds a local maximum, so it runs from
        // several starts and keeps the best: the mode-2 eigen start, its
        // mode-1 mirror, then seeded random orthonormal U₂.
        let u2_first = top_eigenvectors(&mode2_scatter(&d, &DMatrix::identity(i1, i1)), p2);
        let u1_mirror = top_eigenvectors(&mode1_scatter(&d, &DMatrix::identity(i2, i2)), p1);
        let u2_mirror = top_eigenvectors(&mode2_scatter(&d, &u1_mirror), p2);
        let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
        let random = (0..RANDOM_RESTARTS).map(|_| {
            let g = DMatrix::from_fn(i2, p2, |_, _| rng.random_range(-1.0..1.0));
            g.qr().q()
        });
        // Every start gets a short screening ascent; only the most promising
        // ones run on to convergence.
        let mut runs: Vec<Run> = [u2_first, u2_mirror]
            .into_iter()
            .chain(random)
            .map(|u2| ascend(&d, start(&d, u2, p1), p2, SCREEN_ITERATIONS))
            .collect();
        let last = |r: &Run| *r.2.last().unwrap();
        // Stable sort keeps the earlier start on ties.
        runs.sort_by(|a, b| last(b).total_cmp(&last(a)));
        runs.truncate(FINALISTS);
        runs.into_iter()
            .map(|r| ascend(&d, r, p2, MAX_ITERATIONS - SCREEN_ITERATIONS))
            .reduce(|best, r| if last(&r) > last(&best) { r } else { best })
            .unwrap()
    };
    let objective = *history.last().unwrap();
    Ok(GpcaModel {
        class_label: class_label.to_string(),
        u1,
        u2,
        mean_image: mean,
        centered: params.centered,
        objective,
        history,
        hull: None,
    })
}

/// Core matrix of `image`, vectorized column by column (length P₁·P₂).
pub fn project_features(model: &GpcaModel, image: &Spectrogram) -> Result<DVector<f64>> {
    project_matrix(model, &to_matrix(image))
}

pub fn project_matrix(model: &GpcaModel, image: &DMatrix<f64>) -> Result<DVector<f64>> {
    if image.shape() != model.shape() {
        return Err(Error::param(format!(
            "image shape {:?} does not match the model's {:?}",
            image.shape(),
            model.shape()
        )));
    }
    let y = if model.centered {
        model.u1.transpose() * (image - &model.mean_image) * &model.u2
    } else {
        model.u1.transpose() * image * &model.u2
    };
    // nalgebra storage is column-major, which is the column-wise vectorization.
    Ok(DVector::from_column_slice(y.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, r: usize, c: usize, seed: u64) -> Vec<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DMatrix::from_fn(r, c, |_, _| rng.random::<f64>()))
            .collect()
    }

    fn orthonormality_residual(u: &DMatrix<f64>) -> f64 {
        (u.transpose() * u - DMatrix::identity(u.ncols(), u.ncols())).abs().max()
    }

    #[test]
    fn subspaces_are_orthonormal_and_objective_monotone() {
        let d = random_set(12, 9, 7, 1);
        let m = fit_gpca_matrices(&d, &GpcaParams { p1: 3, p2: 2, centered: true }, "x").unwrap();
        assert!(orthonormality_residual(&m.u1) < 1e-8);
        assert!(orthonormality_residual(&m.u2) < 1e-8);
        assert!(m.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(m.feature_dim(), 6);
    }

    #[test]
    fn full_rank_projection_preserves_scatter() {
        let d = random_set(6, 5, 4, 2);
        let m = fit_gpca_matrices(&d, &GpcaParams { p1: 5, p2: 4, centered: true }, "x").unwrap();
        let mean = d.iter().fold(DMatrix::zeros(5, 4), |a, s| a + s) / 6.0;
        let total: f64 = d.iter().map(|s| (s - &mean).norm_squared()).sum();
        assert!((m.objective - total).abs() < 1e-9 * total);
    }

    #[test]
    fn identical_samples_have_zero_scatter() {
        let one = DMatrix::from_fn(6, 6, |i, j| (i * 6 + j) as f64 / 36.0);
        let m = fit_gpca_matrices(&[one.clone(), one.clone(), one.clone()], &GpcaParams::default(), "x").unwrap();
        assert!(m.objective.abs() < 1e-20);
        assert!(orthonormality_residual(&m.u1) < 1e-8);
        let f = project_matrix(&m, &one).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mean_image_projects_to_zero_and_shape_is_checked() {
        let d = random_set(5, 6, 6, 3);
        let m = fit_gpca_matrices(&d, &GpcaParams::default(), "x").unwrap();
        assert!(project_matrix(&m, &m.mean_image).unwrap().norm() < 1e-14);
        assert!(project_matrix(&m, &DMatrix::zeros(5, 6)).is_err());
    }

    #[test]
    fn projection_is_affine_in_the_centred_image() {
        let d = random_set(5, 6, 5, 4);
        let m = fit_gpca_matrices(&d, &GpcaParams::default(), "x").unwrap();
        let (x, y) = (&d[0], &d[1]);
        let (a, b) = (0.7, -1.3);
        let lhs = project_matrix(&m, &(x * a + y * b + &m.mean_image)).unwrap();
        let rhs = project_matrix(&m, &(x + &m.mean_image)).unwrap() * a
            + project_matrix(&m, &(y + &m.mean_image)).unwrap() * b;
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn features_are_vectorized_column_wise() {
        let d = random_set(4, 4, 4, 5);
        let m = fit_gpca_matrices(&d, &GpcaParams::default(), "x").unwrap();
        let y = m.u1.transpose() * (&d[0] - &m.mean_image) * &m.u2;
        let f = project_matrix(&m, &d[0]).unwrap();
        assert_eq!(f[1], y[(1, 0)]);
        assert_eq!(f[2], y[(0, 1)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = random_set(3, 4, 4, 6);
        assert!(fit_gpca_matrices(&d[..1], &GpcaParams::default(), "x").is_err());
        assert!(fit_gpca_matrices(&d, &GpcaParams { p1: 5, p2: 1, centered: true }, "x").is_err());
        let mixed = vec![d[0].clone(), DMatrix::zeros(4, 5)];
        assert!(fit_gpca_matrices(&mixed, &GpcaParams::default(), "x").is_err());
    }
}
