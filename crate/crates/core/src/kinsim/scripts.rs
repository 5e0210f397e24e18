//! Activity classes and their minimal harmonic motion models.
//!
//! Positive radial velocity means motion toward the radar. Every script is a
//! handful of point scatterers (torso, limbs, head) whose velocity is an
//! analytic function of time.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityClass {
    Bending,
    Falling,
    Gesture,
    Kneeling,
    Reaching,
    Sitting,
    Standing,
    Walking,
}

impl ActivityClass {
    pub const ALL: [ActivityClass; 8] = [
        ActivityClass::Bending,
        ActivityClass::Falling,
        ActivityClass::Gesture,
        ActivityClass::Kneeling,
        ActivityClass::Reaching,
        ActivityClass::Sitting,
        ActivityClass::Standing,
        ActivityClass::Walking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityClass::Bending => "bending",
            ActivityClass::Falling => "falling",
            ActivityClass::Gesture => "gesture",
            ActivityClass::Kneeling => "kneeling",
            ActivityClass::Reaching => "reaching",
            ActivityClass::Sitting => "sitting",
            ActivityClass::Standing => "standing",
            ActivityClass::Walking => "walking",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

pub type VelocityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Scatterer {
    pub amplitude: f64,
    /// Radial velocity in m/s (before aspect projection) as a function of time in s.
    pub velocity: VelocityFn,
}

impl Scatterer {
    pub fn new(amplitude: f64, velocity: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Scatterer {
            amplitude,
            velocity: Arc::new(velocity),
        }
    }
}

impl fmt::Debug for Scatterer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scatterer")
            .field("amplitude", &self.amplitude)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct MotionScript {
    pub class_label: ActivityClass,
    pub scatterers: Vec<Scatterer>,
    pub seed: u64,
}

impl MotionScript {
    pub fn new(class_label: ActivityClass, scatterers: Vec<Scatterer>, seed: u64) -> Result<Self> {
        if scatterers.is_empty() {
            return Err(Error::param("a motion script needs at least one scatterer"));
        }
        if let Some(s) = scatterers.iter().find(|s| !(s.amplitude > 0.0)) {
            return Err(Error::param(format!(
                "scatterer amplitude must be positive, got {}",
                s.amplitude
            )));
        }
        Ok(MotionScript {
            class_label,
            scatterers,
            seed,
        })
    }

    /// A single scatterer at constant radial velocity.
    pub fn constant(class_label: ActivityClass, velocity_mps: f64, seed: u64) -> Self {
        Self::new(
            class_label,
            vec![Scatterer::new(1.0, move |_| velocity_mps)],
            seed,
        )
        .unwrap()
    }

    /// Fastest radial speed reached by any scatterer over `[0, duration]`.
    pub fn peak_speed(&self, duration_s: f64) -> f64 {
        let n = 4000;
        self.scatterers
            .iter()
            .flat_map(|s| (0..=n).map(move |i| (s.velocity)(duration_s * i as f64 / n as f64).abs()))
            .fold(0.0, f64::max)
    }
}

/// Smooth one-shot velocity hump: raised cosine of width `dur` starting at `t0`.
pub fn pulse(t: f64, t0: f64, dur: f64, peak: f64) -> f64 {
    if t < t0 || t > t0 + dur {
        0.0
    } else {
        peak * 0.5 * (1.0 - (2.0 * PI * (t - t0) / dur).cos())
    }
}

/// Torso oscillation amplitude while walking, m/s.
pub const TORSO_SWING_MPS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkingParams {
    pub mean_speed_mps: f64,
    /// Repetition rate of the leg envelope (one peak per step), Hz.
    pub stride_rate_hz: f64,
    /// Leg swing amplitude as a multiple of the torso swing.
    pub leg_swing_ratio: f64,
    pub phase: f64,
}

impl Default for WalkingParams {
    fn default() -> Self {
        WalkingParams {
            mean_speed_mps: 0.65,
            stride_rate_hz: 0.85,
            leg_swing_ratio: 3.5,
            phase: 0.0,
        }
    }
}

/// Torso sinusoid around the mean speed, two antiphase legs with 3–4× the
/// torso swing, and two arms at mid-band.
pub fn walking(p: WalkingParams, seed: u64) -> MotionScript {
    let v0 = p.mean_speed_mps;
    let f = p.stride_rate_hz;
    let leg = p.leg_swing_ratio * TORSO_SWING_MPS;
    let arm = 0.5 * leg;
    let ph = p.phase;
    let torso = move |t: f64| v0 + TORSO_SWING_MPS * (2.0 * PI * f * t + 2.0 * ph).sin();
    let limb = move |t: f64| (PI * f * t + ph).sin();
    let scatterers = vec![
        Scatterer::new(1.0, torso),
        Scatterer::new(0.45, move |t| v0 + leg * limb(t)),
        Scatterer::new(0.45, move |t| v0 - leg * limb(t)),
        Scatterer::new(0.2, move |t| v0 - arm * limb(t)),
        Scatterer::new(0.2, move |t| v0 + arm * limb(t)),
    ];
    MotionScript::new(ActivityClass::Walking, scatterers, seed).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallingParams {
    /// Peak speed of the fastest (head) scatterer, m/s.
    pub peak_speed_mps: f64,
    pub onset_s: f64,
    pub duration_s: f64,
}

/// Head reaches the peak; torso peaks at 1/1.35 of it.
pub const FALL_HEAD_TO_TORSO: f64 = 1.35;

pub fn falling(p: FallingParams, seed: u64) -> MotionScript {
    let FallingParams {
        peak_speed_mps: vp,
        onset_s: t0,
        duration_s: d,
    } = p;
    let torso = vp / FALL_HEAD_TO_TORSO;
    let scatterers = vec![
        Scatterer::new(1.0, move |t| pulse(t, t0, d, torso)),
        Scatterer::new(0.4, move |t| pulse(t, t0 + 0.05 * d, 0.95 * d, vp)),
        Scatterer::new(0.3, move |t| pulse(t, t0, 0.8 * d, 0.35 * vp)),
        Scatterer::new(0.2, move |t| pulse(t, t0 + 0.1 * d, 0.9 * d, 0.6 * vp)),
    ];
    MotionScript::new(ActivityClass::Falling, scatterers, seed).unwrap()
}

/// Walking that ends in a slow, knee-first collapse. Kept as a named script
/// only; it is not used for any class in generated datasets.
pub fn progressive_fall(walk: WalkingParams, fall_onset_s: f64, seed: u64) -> MotionScript {
    let base = walking(walk, seed);
    let scatterers = base
        .scatterers
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let v = s.velocity.clone();
            let peak = if i == 0 { 1.2 } else { 0.6 };
            Scatterer::new(s.amplitude, move |t| {
                if t < fall_onset_s {
                    v(t)
                } else {
                    pulse(t, fall_onset_s, 1.6, peak)
                }
            })
        })
        .collect();
    MotionScript::new(ActivityClass::Falling, scatterers, seed).unwrap()
}

fn jitter<R: Rng>(rng: &mut R, amp: f64) -> f64 {
    amp * rng.random_range(0.85..1.15)
}

/// Draw a class script with seeded intra-class variation.
pub fn sample_script<R: Rng>(class: ActivityClass, rng: &mut R, seed: u64) -> MotionScript {
    use ActivityClass::*;
    match class {
        Walking => walking(
            WalkingParams {
                mean_speed_mps: rng.random_range(0.5..0.8),
                stride_rate_hz: rng.random_range(0.7..1.0),
                leg_swing_ratio: rng.random_range(3.0..4.0),
                phase: rng.random_range(0.0..2.0 * PI),
            },
            seed,
        ),
        Falling => falling(
            FallingParams {
                peak_speed_mps: rng.random_range(3.0..3.4),
                onset_s: rng.random_range(1.2..1.8),
                duration_s: rng.random_range(0.8..1.2),
            },
            seed,
        ),
        Bending => {
            let t0 = rng.random_range(0.6..1.0);
            let v = rng.random_range(0.8..1.1);
            let bend = move |t: f64| pulse(t, t0, 1.2, v) - pulse(t, t0 + 1.6, 1.2, v);
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), bend),
                Scatterer::new(jitter(rng, 0.5), move |t| -0.45 * bend(t)),
                Scatterer::new(jitter(rng, 0.3), move |t| 1.3 * bend(t)),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
        Gesture => {
            let t0 = rng.random_range(0.8..1.4);
            let fg = rng.random_range(1.2..1.8);
            let a = rng.random_range(0.8..1.2);
            let hand = move |t: f64| {
                if (t0..t0 + 1.8).contains(&t) {
                    a * (2.0 * PI * fg * (t - t0)).sin()
                } else {
                    0.0
                }
            };
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), |_| 0.0),
                Scatterer::new(jitter(rng, 0.3), hand),
                Scatterer::new(jitter(rng, 0.2), move |t| 0.6 * hand(t)),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
        Kneeling => {
            let t0 = rng.random_range(0.8..1.4);
            let v = rng.random_range(0.5..0.7);
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), move |t| -pulse(t, t0, 1.6, v)),
                Scatterer::new(jitter(rng, 0.4), move |t| pulse(t, t0 + 0.2, 0.8, 1.5 * v)),
                Scatterer::new(jitter(rng, 0.3), move |t| -pulse(t, t0, 1.6, 1.2 * v)),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
        Reaching => {
            let t0 = rng.random_range(0.8..1.4);
            let v = rng.random_range(1.2..1.6);
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), move |t| pulse(t, t0, 1.0, 0.25)),
                Scatterer::new(jitter(rng, 0.4), move |t| {
                    pulse(t, t0, 0.7, v) - pulse(t, t0 + 1.1, 0.7, 0.8 * v)
                }),
                Scatterer::new(jitter(rng, 0.25), move |t| {
                    0.6 * (pulse(t, t0, 0.7, v) - pulse(t, t0 + 1.1, 0.7, 0.8 * v))
                }),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
        Sitting => {
            let t0 = rng.random_range(0.8..1.4);
            let v = rng.random_range(0.7..1.0);
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), move |t| -pulse(t, t0, 1.2, v)),
                Scatterer::new(jitter(rng, 0.4), move |t| pulse(t, t0 + 0.2, 0.8, 0.4 * v)),
                Scatterer::new(jitter(rng, 0.3), move |t| -pulse(t, t0, 1.2, 1.2 * v)),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
        Standing => {
            let t0 = rng.random_range(0.8..1.4);
            let v = rng.random_range(0.7..1.0);
            let s = vec![
                Scatterer::new(jitter(rng, 1.0), move |t| pulse(t, t0, 1.0, v)),
                Scatterer::new(jitter(rng, 0.4), move |t| -pulse(t, t0, 0.6, 0.4 * v)),
                Scatterer::new(jitter(rng, 0.3), move |t| pulse(t, t0, 1.0, 1.2 * v)),
            ];
            MotionScript::new(class, s, seed).unwrap()
        }
    }
}
