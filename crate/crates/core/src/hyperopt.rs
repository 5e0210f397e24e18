//! Genetic search over sampling rate and STFT parameters.
//!
//! Single-objective, elitist, tournament selection with uniform crossover.
//! Infeasible genotypes are repaired rather than rejected, so every
//! evaluated individual satisfies the bounds (up to the overlap clamp) and
//! window > overlap.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate_images, train_mdc_images, MdcParams};
use crate::eclean::EcleanParams;
use crate::error::{Error, Result};
use crate::pipeline::Preprocess;
use crate::sigcore::{io, rational_ratio, Manifest, StftParams, TimeSeries};

/// Rate every raw return is recorded at.
pub const SOURCE_RATE_HZ: f64 = 12_800.0;
/// Largest numerator/denominator allowed in the resampling ratio.
pub const MAX_RATE_TERM: u32 = 512;
/// Half-width of a mutation step as a fraction of the gene's range.
pub const MUTATION_STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Genes {
    pub fs_hz: u32,
    pub window_len: u32,
    pub overlap_len: u32,
    pub nfft: u32,
}

impl Genes {
    pub fn as_array(&self) -> [u32; 4] {
        [self.fs_hz, self.window_len, self.overlap_len, self.nfft]
    }

    pub fn from_array(a: [u32; 4]) -> Self {
        Genes {
            fs_hz: a[0],
            window_len: a[1],
            overlap_len: a[2],
            nfft: a[3],
        }
    }

    pub fn stft(&self) -> StftParams {
        StftParams {
            window_len: self.window_len as usize,
            overlap_len: self.overlap_len as usize,
            nfft: self.nfft as usize,
            ..StftParams::default()
        }
    }
}

/// `fs;window;overlap;nfft`
impl fmt::Display for Genes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{};{};{}", self.fs_hz, self.window_len, self.overlap_len, self.nfft)
    }
}

impl FromStr for Genes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<u32> = s
            .split(';')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::param(format!("genes must be `fs;window;overlap;nfft`, got `{s}`")))?;
        let a: [u32; 4] = v
            .try_into()
            .map_err(|_| Error::param(format!("genes must have 4 fields, got `{s}`")))?;
        Ok(Genes::from_array(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperBounds {
    pub fs_hz: (u32, u32),
    pub window_len: (u32, u32),
    pub overlap_len: (u32, u32),
    pub nfft: (u32, u32),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            fs_hz: (200, 12_000),
            window_len: (64, 1024),
            overlap_len: (64, 1024),
            nfft: (128, 4096),
        }
    }
}

impl HyperBounds {
    pub fn ranges(&self) -> [(u32, u32); 4] {
        [self.fs_hz, self.window_len, self.overlap_len, self.nfft]
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.ranges() {
            if lo == 0 || lo > hi {
                return Err(Error::param(format!("bad gene range [{lo}, {hi}]")));
            }
        }
        if self.window_len.1 < 2 {
            return Err(Error::param("window range must allow a length of at least 2"));
        }
        if self.nfft.1 < self.window_len.0 {
            return Err(Error::param("nfft range cannot hold the shortest window"));
        }
        if snap_rate(self.fs_hz.0, *self).is_none() {
            return Err(Error::param("no resampling-feasible rate inside the fs range"));
        }
        Ok(())
    }

    /// Bounds-respecting, feasible version of `g`: every gene is clamped,
    /// fs is snapped to the nearest rate reachable from the source rate by a
    /// ratio with terms ≤ 512, overlap is cut to window − 1 and nfft raised
    /// to the window length.
    pub fn repair(&self, g: Genes) -> Genes {
        let a = g.as_array();
        let r = self.ranges();
        let c: Vec<u32> = (0..4).map(|i| a[i].clamp(r[i].0, r[i].1)).collect();
        let window = c[1].max(2);
        Genes {
            fs_hz: snap_rate(c[0], *self).unwrap_or(c[0]),
            window_len: window,
            overlap_len: c[2].min(window - 1),
            nfft: c[3].max(window),
        }
    }

    pub fn is_feasible(&self, g: &Genes) -> bool {
        let r = self.ranges();
        let a = g.as_array();
        [0, 1, 3].iter().all(|i| (r[*i].0..=r[*i].1).contains(&a[*i]))
            && g.overlap_len <= r[2].1
            && g.window_len > g.overlap_len
            && g.nfft >= g.window_len
            && rate_is_feasible(g.fs_hz)
    }
}

fn rate_is_feasible(fs: u32) -> bool {
    rational_ratio(fs as f64 / SOURCE_RATE_HZ, MAX_RATE_TERM).is_some()
}

/// Nearest feasible integer rate inside the bounds; ties go to the lower.
fn snap_rate(fs: u32, b: HyperBounds) -> Option<u32> {
    let (lo, hi) = b.fs_hz;
    let fs = fs.clamp(lo, hi);
    (0..=hi - lo).find_map(|d| {
        [fs.checked_sub(d), fs.checked_add(d)]
            .into_iter()
            .flatten()
            .find(|f| (lo..=hi).contains(f) && rate_is_feasible(*f))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 15,
            tournament_k: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.15,
            elitism: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::param(format!(
                "population must be at least 4, got {}",
                self.population
            )));
        }
        if self.elitism >= self.population {
            return Err(Error::param("elitism must be smaller than the population"));
        }
        if self.generations == 0 || self.tournament_k == 0 {
            return Err(Error::param("generations and tournament_k must be positive"));
        }
        for (name, v) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness seen so far.
    pub best_fitness: f64,
    /// Mean fitness of this generation's population.
    pub mean_fitness: f64,
    pub best_genes: Genes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: Genes,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Every distinct genotype evaluated, in first-evaluation order.
    pub evaluated: Vec<Genes>,
}

pub const HISTORY_HEADER: &str = "generation,best_fitness,mean_fitness,best_genes";

impl GaResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for h in &self.history {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{}",
                h.generation, h.best_fitness, h.mean_fitness, h.best_genes
            );
        }
        out
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, self.history_csv().as_bytes())
    }
}

fn random_genes(b: &HyperBounds, rng: &mut ChaCha8Rng) -> Genes {
    let r = b.ranges();
    Genes::from_array(std::array::from_fn(|i| rng.random_range(r[i].0..=r[i].1)))
}

fn mutate(g: Genes, b: &HyperBounds, rate: f64, rng: &mut ChaCha8Rng) -> Genes {
    let r = b.ranges();
    let mut a = g.as_array();
    for i in 0..4 {
        if rate > 0.0 && rng.random::<f64>() < rate {
            let step = (((r[i].1 - r[i].0) as f64 * MUTATION_STEP_FRACTION).round() as i64).max(1);
            let v = a[i] as i64 + rng.random_range(-step..=step);
            a[i] = v.clamp(r[i].0 as i64, r[i].1 as i64) as u32;
        }
    }
    Genes::from_array(a)
}

/// Run the GA. `fitness` receives repaired genes and the run seed and must
/// be deterministic in both; each distinct genotype is evaluated once.
/// `initial` replaces the random first population when given.
pub fn optimize<F>(bounds: &HyperBounds, cfg: &GaConfig, initial: Option<Vec<Genes>>, fitness: F) -> Result<GaResult>
where
    F: Fn(&Genes, u64) -> f64 + Sync,
{
    bounds.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Genes> = match initial {
        Some(v) if v.len() == cfg.population => v.into_iter().map(|g| bounds.repair(g)).collect(),
        Some(v) => {
            return Err(Error::param(format!(
                "initial population has {} individuals, expected {}",
                v.len(),
                cfg.population
            )))
        }
        None => (0..cfg.population)
            .map(|_| bounds.repair(random_genes(bounds, &mut rng)))
            .collect(),
    };
    let mut cache: HashMap<Genes, f64> = HashMap::new();
    let mut evaluated = Vec::new();
    let mut history = Vec::with_capacity(cfg.generations);
    let mut best: Option<(Genes, f64)> = None;

    for generation in 1..=cfg.generations {
        let mut fresh: Vec<Genes> = pop.iter().copied().filter(|g| !cache.contains_key(g)).collect();
        fresh.sort();
        fresh.dedup();
        // Preserve first-seen order in the log.
        let mut seen_order: Vec<Genes> = Vec::new();
        for g in &pop {
            if fresh.binary_search(g).is_ok() && !seen_order.contains(g) {
                seen_order.push(*g);
            }
        }
        let scores: Vec<f64> = seen_order.par_iter().map(|g| fitness(g, cfg.seed)).collect();
        for (g, s) in seen_order.iter().zip(scores) {
            cache.insert(*g, if s.is_finite() { s } else { f64::NEG_INFINITY });
            evaluated.push(*g);
        }
        let fit: Vec<f64> = pop.iter().map(|g| cache[g]).collect();
        for (g, f) in pop.iter().zip(&fit) {
            if best.is_none_or(|(_, bf)| *f > bf) {
                best = Some((*g, *f));
            }
        }
        let (bg, bf) = best.unwrap();
        history.push(GenerationStats {
            generation,
            best_fitness: bf,
            mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
            best_genes: bg,
        });
        if generation == cfg.generations {
            break;
        }

        // Rank by fitness, ties by genotype for determinism.
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|a, b| fit[*b].total_cmp(&fit[*a]).then(pop[*a].cmp(&pop[*b])));
        let mut next: Vec<Genes> = order.iter().take(cfg.elitism).map(|i| pop[*i]).collect();
        let tournament = |rng: &mut ChaCha8Rng| -> Genes {
            let mut w = rng.random_range(0..pop.len());
            for _ in 1..cfg.tournament_k {
                let c = rng.random_range(0..pop.len());
                if fit[c] > fit[w] {
                    w = c;
                }
            }
            pop[w]
        };
        while next.len() < cfg.population {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let (mut c1, mut c2) = (a.as_array(), b.as_array());
            if rng.random::<f64>() < cfg.crossover_rate {
                for i in 0..4 {
                    if rng.random::<bool>() {
                        std::mem::swap(&mut c1[i], &mut c2[i]);
                    }
                }
            }
            for c in [c1, c2] {
                if next.len() < cfg.population {
                    let m = mutate(Genes::from_array(c), bounds, cfg.mutation_rate, &mut rng);
                    next.push(bounds.repair(m));
                }
            }
        }
        pop = next;
    }
    let (best, best_fitness) = best.unwrap();
    Ok(GaResult {
        best,
        best_fitness,
        history,
        evaluated,
    })
}

/// Labelled raw returns for fitness evaluation.
#[derive(Debug, Clone)]
pub struct FitnessData {
    pub train: Vec<(String, TimeSeries)>,
    pub val: Vec<(String, TimeSeries)>,
    pub mdc: MdcParams,
    pub image_rows: usize,
    pub image_cols: usize,
    pub eclean: Option<EcleanParams>,
}

impl FitnessData {
    pub fn new(train: Vec<(String, TimeSeries)>, val: Vec<(String, TimeSeries)>) -> Self {
        let pre = Preprocess::default();
        FitnessData {
            train,
            val,
            mdc: MdcParams::default(),
            image_rows: pre.image_rows,
            image_cols: pre.image_cols,
            eclean: pre.eclean,
        }
    }

    /// Raw returns of every record carrying one; others are skipped.
    pub fn load_raw(m: &Manifest) -> Result<Vec<(String, TimeSeries)>> {
        let with_raw: Vec<_> = m.records.iter().filter(|r| r.raw.is_some()).collect();
        if with_raw.len() < m.records.len() {
            log::warn!(
                "{} record(s) without a raw return skipped",
                m.records.len() - with_raw.len()
            );
        }
        if with_raw.is_empty() {
            return Err(Error::param("manifest has no records with raw returns"));
        }
        with_raw
            .par_iter()
            .map(|r| Ok((r.class.clone(), io::read_series(&m.resolve(r.raw.as_ref().unwrap()))?)))
            .collect()
    }

    pub fn preprocess_for(&self, g: &Genes) -> Preprocess {
        Preprocess {
            operating_rate_hz: g.fs_hz as f64,
            stft: g.stft(),
            image_rows: self.image_rows,
            image_cols: self.image_cols,
            eclean: self.eclean,
            ..Preprocess::default()
        }
    }

    /// Validation accuracy of an MDC trained under `g`; 0 when the genes
    /// cannot produce a spectrogram (e.g. the window is longer than the
    /// resampled record).
    pub fn fitness(&self, g: &Genes) -> f64 {
        self.try_fitness(g).unwrap_or_else(|e| {
            log::debug!("genes {g}: {e}");
            0.0
        })
    }

    pub fn try_fitness(&self, g: &Genes) -> Result<f64> {
        let pre = self.preprocess_for(g);
        let run = |set: &[(String, TimeSeries)]| {
            set.par_iter()
                .map(|(c, ts)| Ok((c.clone(), pre.image_from_raw(ts)?)))
                .collect::<Result<Vec<_>>>()
        };
        let model = train_mdc_images(&run(&self.train)?, &self.mdc)?;
        Ok(evaluate_images(&model, &run(&self.val)?)?.accuracy)
    }
}
