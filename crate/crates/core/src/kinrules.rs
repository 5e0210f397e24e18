//! Envelope extraction and the three kinematic fidelity rules.
//!
//! 1. periodicity of the outer envelope (walking only);
//! 2. the torso never reaches the legs' extreme Doppler (walking, falling);
//! 3. one Doppler sign dominates outside the clutter band (walking, falling).
//!
//! Every threshold is relative, so verdicts do not depend on image scale,
//! and every rule is symmetric under a flip of the Doppler axis.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinsim::ActivityClass;
use crate::sigcore::{Axes, Scale, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleOutcome {
    Pass,
    Minor,
    Fail,
    NotApplicable,
}

impl RuleOutcome {
    fn grade(value: f64, pass: f64, minor: f64) -> Self {
        if value <= pass {
            RuleOutcome::Pass
        } else if value <= minor {
            RuleOutcome::Minor
        } else {
            RuleOutcome::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub rule1_periodic: RuleOutcome,
    pub rule2_torso_below_legs: RuleOutcome,
    pub rule3_sign_consistency: RuleOutcome,
    pub overall: RuleOutcome,
}

impl RuleVerdict {
    /// Overall is Fail when every applicable rule fails, Pass when every
    /// applicable rule passes (vacuously so when none applies), else Minor.
    pub fn compose(r1: RuleOutcome, r2: RuleOutcome, r3: RuleOutcome) -> Self {
        let applicable: Vec<RuleOutcome> = [r1, r2, r3]
            .into_iter()
            .filter(|r| *r != RuleOutcome::NotApplicable)
            .collect();
        let overall = if applicable.iter().all(|r| *r == RuleOutcome::Pass) {
            RuleOutcome::Pass
        } else if applicable.iter().all(|r| *r == RuleOutcome::Fail) {
            RuleOutcome::Fail
        } else {
            RuleOutcome::Minor
        };
        RuleVerdict {
            rule1_periodic: r1,
            rule2_torso_below_legs: r2,
            rule3_sign_consistency: r3,
            overall,
        }
    }

    pub fn any_fail(&self) -> bool {
        [
            self.rule1_periodic,
            self.rule2_torso_below_legs,
            self.rule3_sign_consistency,
        ]
        .contains(&RuleOutcome::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Fraction of the column's peak power that counts as signal for the
    /// envelopes.
    pub energy_frac: f64,
    /// Display range used to turn grayscale intensities back into relative
    /// power before the energy fraction is applied, dB.
    pub display_range_db: f64,
    /// Moving-average length applied to all three envelopes, in columns.
    pub smooth_len: usize,
    pub acf_pass: f64,
    pub acf_minor: f64,
    pub lag_min_s: f64,
    pub lag_max_s: f64,
    /// Envelope variance must exceed this fraction of the squared maximum.
    pub min_variance_frac: f64,
    pub torso_ratio_pass: f64,
    pub torso_ratio_minor: f64,
    pub sign_leak_pass: f64,
    pub sign_leak_minor: f64,
    /// Half-width of the zero-Doppler clutter band, Hz.
    pub guard_band_hz: f64,
    /// Frequency span assumed for images without axes, Hz.
    pub default_sample_rate_hz: f64,
    /// Time span assumed for images without axes, s.
    pub default_duration_s: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            energy_frac: 0.05,
            display_range_db: crate::sigcore::DEFAULT_DYN_RANGE_DB,
            smooth_len: 11,
            acf_pass: 0.4,
            acf_minor: 0.25,
            lag_min_s: 0.25,
            lag_max_s: 1.5,
            min_variance_frac: 1e-6,
            torso_ratio_pass: 0.8,
            torso_ratio_minor: 0.95,
            sign_leak_pass: 0.15,
            sign_leak_minor: 0.35,
            guard_band_hz: 25.0,
            default_sample_rate_hz: 1200.0,
            default_duration_s: 4.0,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        let frac_ok = self.energy_frac > 0.0 && self.energy_frac <= 1.0;
        let ordered = self.acf_minor <= self.acf_pass
            && self.torso_ratio_pass <= self.torso_ratio_minor
            && self.sign_leak_pass <= self.sign_leak_minor
            && self.lag_min_s < self.lag_max_s;
        if !frac_ok || !(self.display_range_db > 0.0) || self.smooth_len == 0 || !ordered || !(self.guard_band_hz >= 0.0) {
            return Err(Error::Config(format!("inconsistent rule thresholds: {self:?}")));
        }
        if !(self.default_sample_rate_hz > 0.0 && self.default_duration_s > 0.0) {
            return Err(Error::Config("default axes must span a positive range".into()));
        }
        Ok(())
    }

    fn fallback_axes(&self, rows: usize, cols: usize) -> Axes {
        Axes::centered(rows, cols, self.default_sample_rate_hz, self.default_duration_s)
    }
}

/// Which rules gate a class.
pub fn applicable_rules(class: ActivityClass) -> [bool; 3] {
    match class {
        ActivityClass::Walking => [true, true, true],
        ActivityClass::Falling => [false, true, true],
        _ => [false, false, false],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSet {
    pub upper_hz: Vec<f64>,
    pub lower_hz: Vec<f64>,
    pub torso_hz: Vec<f64>,
    /// Column centre times, s.
    pub time_s: Vec<f64>,
    /// Set when the input held no energy at all.
    pub empty: bool,
}

impl EnvelopeSet {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    /// Largest excursion of the envelopes from DC, Hz.
    pub fn max_extent_hz(&self) -> f64 {
        self.upper_hz
            .iter()
            .chain(&self.lower_hz)
            .fold(0.0, |m, f| m.max(f.abs()))
    }
}

/// Centred moving average; the window shrinks at the ends.
fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let n = x.len();
    let half_lo = (len - 1) / 2;
    let half_hi = len / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi).min(n - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Envelopes with the default configuration but a custom energy fraction.
pub fn extract_envelopes(s: &Spectrogram, energy_frac: f64) -> EnvelopeSet {
    extract_envelopes_with(
        s,
        &RuleConfig {
            energy_frac,
            ..RuleConfig::default()
        },
    )
}

/// Per-pixel relative power: grayscale intensities are log-compressed, so
/// they are mapped back through the display range (relative to the image
/// maximum, which keeps the result scale-free); power values pass through.
fn relative_power(s: &Spectrogram, display_range_db: f64) -> Spectrogram {
    let mut p = s.clone();
    let m = s.max();
    if s.scale() == Scale::Grayscale && m > 0.0 {
        p.map_values(|v| {
            if v > 0.0 {
                10f64.powf((v / m - 1.0) * display_range_db / 10.0)
            } else {
                0.0
            }
        });
    }
    p
}

pub fn extract_envelopes_with(s: &Spectrogram, cfg: &RuleConfig) -> EnvelopeSet {
    let s = &relative_power(s, cfg.display_range_db);
    let fallback = cfg.fallback_axes(s.rows(), s.cols());
    let freq = s.freq_axis_or(&fallback);
    let time_s = s.time_axis_or(&fallback);
    let n = s.cols();
    let (mut up, mut lo, mut torso) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut last = (0.0, 0.0, 0.0);
    let mut any = false;
    for c in 0..n {
        let col = s.column(c);
        let peak = col.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            any = true;
            let thr = cfg.energy_frac * peak;
            let first = col.iter().position(|v| *v >= thr).unwrap();
            let lastr = col.iter().rposition(|v| *v >= thr).unwrap();
            // Argmax; among equal maxima the one nearest DC, then the lower row.
            let t = (0..col.len())
                .filter(|r| col[*r] == peak)
                .min_by(|a, b| freq[*a].abs().total_cmp(&freq[*b].abs()))
                .unwrap();
            last = (freq[lastr], freq[first], freq[t]);
        }
        up[c] = last.0;
        lo[c] = last.1;
        torso[c] = last.2;
    }
    let k = cfg.smooth_len.min(n.max(1));
    EnvelopeSet {
        upper_hz: moving_average(&up, k),
        lower_hz: moving_average(&lo, k),
        torso_hz: moving_average(&torso, k),
        time_s,
        empty: !any,
    }
}

/// Excursion energies beyond the guard band on the positive and negative side.
pub fn sign_energies(e: &EnvelopeSet, guard_hz: f64) -> (f64, f64) {
    let pos = e.upper_hz.iter().map(|f| (f - guard_hz).max(0.0).powi(2)).sum();
    let neg = e.lower_hz.iter().map(|f| (-f - guard_hz).max(0.0).powi(2)).sum();
    (pos, neg)
}

/// The envelope on the dominant Doppler side, oriented away from DC.
fn outer_envelope(e: &EnvelopeSet, guard_hz: f64) -> Vec<f64> {
    let (pos, neg) = sign_energies(e, guard_hz);
    if pos > neg {
        e.upper_hz.clone()
    } else if neg > pos {
        e.lower_hz.iter().map(|f| -f).collect()
    } else {
        e.upper_hz.iter().zip(&e.lower_hz).map(|(u, l)| 0.5 * (u - l)).collect()
    }
}

/// Biased, mean-removed autocorrelation normalized to 1 at lag 0.
pub fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let r0: f64 = d.iter().map(|v| v * v).sum();
    (0..n)
        .map(|k| {
            if r0 == 0.0 {
                0.0
            } else {
                d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / r0
            }
        })
        .collect()
}

/// Highest autocorrelation local maximum with lag in `[lag_min, lag_max]`.
pub fn periodicity_peak(x: &[f64], dt: f64, lag_min_s: f64, lag_max_s: f64) -> Option<(f64, f64)> {
    let r = autocorrelation(x);
    (1..r.len().saturating_sub(1))
        .filter(|k| {
            let lag = *k as f64 * dt;
            lag >= lag_min_s - 1e-12 && lag <= lag_max_s + 1e-12
        })
        .filter(|k| r[*k] > r[k - 1] && r[*k] >= r[k + 1])
        .map(|k| (k as f64 * dt, r[k]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn rule1(e: &EnvelopeSet, cfg: &RuleConfig) -> RuleOutcome {
    let x = outer_envelope(e, cfg.guard_band_hz);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !(var > cfg.min_variance_frac * max * max) || x.len() < 3 {
        return RuleOutcome::Fail;
    }
    let dt = if e.time_s.len() > 1 {
        (e.time_s[e.time_s.len() - 1] - e.time_s[0]) / (e.time_s.len() - 1) as f64
    } else {
        return RuleOutcome::Fail;
    };
    match periodicity_peak(&x, dt, cfg.lag_min_s, cfg.lag_max_s) {
        Some((_, p)) if p >= cfg.acf_pass => RuleOutcome::Pass,
        Some((_, p)) if p >= cfg.acf_minor => RuleOutcome::Minor,
        _ => RuleOutcome::Fail,
    }
}

fn rule2(e: &EnvelopeSet, cfg: &RuleConfig) -> RuleOutcome {
    let torso = e.torso_hz.iter().fold(0.0, |m: f64, f| m.max(f.abs()));
    let legs = e.max_extent_hz();
    if legs <= 0.0 {
        return RuleOutcome::Fail;
    }
    RuleOutcome::grade(torso / legs, cfg.torso_ratio_pass, cfg.torso_ratio_minor)
}

fn rule3(e: &EnvelopeSet, cfg: &RuleConfig) -> RuleOutcome {
    let (pos, neg) = sign_energies(e, cfg.guard_band_hz);
    let hi = pos.max(neg);
    if hi <= 0.0 {
        return RuleOutcome::Fail;
    }
    RuleOutcome::grade(pos.min(neg) / hi, cfg.sign_leak_pass, cfg.sign_leak_minor)
}

/// Evaluate the rules that apply to `class`.
///
/// Envelopes that never leave the clutter guard band (including fully empty
/// ones) mean no target is present: every applicable rule fails.
pub fn check_rules(e: &EnvelopeSet, class: ActivityClass, cfg: &RuleConfig) -> RuleVerdict {
    let [a1, a2, a3] = applicable_rules(class);
    let absent = e.empty || e.max_extent_hz() <= cfg.guard_band_hz;
    let eval = |applies: bool, f: &dyn Fn() -> RuleOutcome| {
        if !applies {
            RuleOutcome::NotApplicable
        } else if absent {
            RuleOutcome::Fail
        } else {
            f()
        }
    };
    RuleVerdict::compose(
        eval(a1, &|| rule1(e, cfg)),
        eval(a2, &|| rule2(e, cfg)),
        eval(a3, &|| rule3(e, cfg)),
    )
}

/// Envelopes and verdict in one step.
pub fn evaluate(s: &Spectrogram, class: ActivityClass, cfg: &RuleConfig) -> RuleVerdict {
    check_rules(&extract_envelopes_with(s, cfg), class, cfg)
}
