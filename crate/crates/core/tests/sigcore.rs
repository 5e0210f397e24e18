mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

use common::{dft_mag, direct_stft, random_series, rng};
use udsift::sigcore::io::{decode_png, decode_sgrm, encode_png, encode_sgrm};
use udsift::sigcore::{resample, stft_spectrogram, to_grayscale_image, Axes, Spectrogram, StftParams, TimeSeries};
use udsift::Error;

fn tone(freq: f64, fs: f64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * freq * n as f64 / fs))
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap()
}

#[test]
fn tone_lands_on_nearest_bin_and_matches_oracle() {
    let x = tone(100.0, 1200.0, 2400);
    let ts = TimeSeries::new(x.clone(), 1200.0).unwrap();
    let s = stft_spectrogram(&ts, &StftParams::new(512, 256, 1024).unwrap()).unwrap();
    let (rows, cols, oracle) = direct_stft(&x, 512, 256, 1024);
    assert_eq!(s.shape(), (rows, cols));
    let diff = s.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-9, "max abs diff {diff}");
    for c in 0..cols {
        assert_eq!(argmax(&s.column(c)), 512 + 85);
    }
}

#[test]
fn zero_input_gives_zero_spectrogram() {
    let ts = TimeSeries::new(vec![Complex64::new(0.0, 0.0); 700], 1200.0).unwrap();
    let s = stft_spectrogram(&ts, &StftParams::reference()).unwrap();
    assert!(s.is_all_zero());
}

#[test]
fn short_series_is_a_parameter_error() {
    let ts = TimeSeries::new(vec![Complex64::new(1.0, 0.0); 100], 1200.0).unwrap();
    assert!(matches!(stft_spectrogram(&ts, &StftParams::reference()), Err(Error::Param(_))));
}

#[test]
fn paper_rate_conversion_length() {
    let mut r = rng(3);
    let ts = TimeSeries::new(random_series(&mut r, 51_200), 12_800.0).unwrap();
    let out = resample(&ts, 1200.0).unwrap();
    assert_eq!(out.len(), 4800);
    assert_eq!(out.sample_rate_hz(), 1200.0);
    let same = resample(&ts, 12_800.0).unwrap();
    assert_eq!(same.samples(), ts.samples());
}

#[test]
fn resampled_tone_keeps_its_frequency() {
    let ts = TimeSeries::new(tone(50.0, 12_800.0, 51_200), 12_800.0).unwrap();
    let out = resample(&ts, 1200.0).unwrap();
    // DFT bins of the output series, one per 1200/4800 = 0.25 Hz.
    let n = out.len();
    let bin_hz = 1200.0 / n as f64;
    let peak = (0..n)
        .map(|k| (k, dft_mag(out.samples(), k as f64 * bin_hz, 1200.0)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    assert!((peak as f64 * bin_hz - 50.0).abs() <= bin_hz, "peak at bin {peak}");
}

#[test]
fn irrational_rate_ratio_is_rejected() {
    let ts = TimeSeries::new(vec![Complex64::new(1.0, 0.0); 1000], 12_800.0).unwrap();
    assert!(matches!(resample(&ts, 1234.567), Err(Error::Param(_))));
}

#[test]
fn constant_grid_maps_to_ones() {
    let s = Spectrogram::new(20, 30, vec![3.5; 600]).unwrap();
    let g = to_grayscale_image(&s, 100, 100, 45.0).unwrap();
    assert!(g.values().iter().all(|v| *v == 1.0));
    let z = to_grayscale_image(&Spectrogram::zeros(20, 30), 16, 16, 45.0).unwrap();
    assert!(z.is_all_zero());
}

#[test]
fn sgrm_size_and_png_channel_check() {
    let s = Spectrogram::new(100, 100, vec![0.25; 10_000]).unwrap();
    assert_eq!(encode_sgrm(&s).len(), 16 + 100 * 100 * 4);
    // A 2×2 RGB PNG is refused.
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, 2, 2);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[0u8; 12]).unwrap();
    }
    assert!(matches!(decode_png(&bytes), Err(Error::Format { .. })));
}

#[test]
fn bad_magic_reports_offset_zero() {
    let s = Spectrogram::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let mut b = encode_sgrm(&s);
    b[0] = b'X';
    assert!(matches!(decode_sgrm(&b), Err(Error::Format { offset: 0, .. })));
}

fn stft_case() -> impl Strategy<Value = (u64, usize, usize, usize, usize)> {
    (4usize..=48).prop_flat_map(|w| {
        (any::<u64>(), Just(w), 0..w, w..=96, w..=300)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stft_matches_direct_dft((seed, w, o, nfft, len) in stft_case()) {
        let x = random_series(&mut rng(seed), len);
        let ts = TimeSeries::new(x.clone(), 1000.0).unwrap();
        let s = stft_spectrogram(&ts, &StftParams::new(w, o, nfft).unwrap()).unwrap();
        let (rows, cols, oracle) = direct_stft(&x, w, o, nfft);
        prop_assert_eq!(s.shape(), (rows, cols));
        prop_assert_eq!(cols, (len - w) / (w - o) + 1);
        for (a, b) in s.values().iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn column_energy_is_nfft_times_windowed_energy((seed, w, o, nfft, len) in stft_case()) {
        let x = random_series(&mut rng(seed), len);
        let p = StftParams::new(w, o, nfft).unwrap();
        let s = stft_spectrogram(&TimeSeries::new(x.clone(), 1000.0).unwrap(), &p).unwrap();
        let win = p.window();
        for c in 0..s.cols() {
            let frame: f64 = (0..w).map(|m| (x[c * p.hop() + m] * win[m]).norm_sqr()).sum();
            let col: f64 = s.column(c).iter().sum();
            prop_assert!((col - nfft as f64 * frame).abs() <= 1e-9 * col.max(1e-30));
        }
    }

    #[test]
    fn frequency_shift_rotates_rows(seed in any::<u64>(), k0 in 1usize..127) {
        let (w, o, nfft, fs) = (64, 32, 128, 1280.0);
        let x = random_series(&mut rng(seed), 400);
        let f0 = k0 as f64 * fs / nfft as f64;
        let shifted: Vec<Complex64> = x
            .iter()
            .enumerate()
            .map(|(n, v)| v * Complex64::from_polar(1.0, 2.0 * PI * f0 * n as f64 / fs))
            .collect();
        let p = StftParams::new(w, o, nfft).unwrap();
        let a = stft_spectrogram(&TimeSeries::new(x, fs).unwrap(), &p).unwrap();
        let b = stft_spectrogram(&TimeSeries::new(shifted, fs).unwrap(), &p).unwrap();
        let shift = (f0 / fs * nfft as f64).round() as usize;
        for c in 0..a.cols() {
            let (ca, cb) = (a.column(c), b.column(c));
            prop_assert_eq!((argmax(&ca) + shift) % nfft, argmax(&cb));
            for r in 0..nfft {
                prop_assert!((ca[r] - cb[(r + shift) % nfft]).abs() <= 1e-9 * ca[r].max(1.0));
            }
        }
    }

    #[test]
    fn grayscale_is_normalized_and_idempotent(
        seed in any::<u64>(),
        rows in 8usize..40,
        cols in 8usize..40,
        out in 8usize..64,
    ) {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..rows * cols).map(|_| rand::Rng::random_range(&mut r, 0.0..10.0)).collect();
        let s = Spectrogram::new(rows, cols, v).unwrap()
            .with_axes(Axes::centered(rows, cols, 1200.0, 4.0)).unwrap();
        let g = to_grayscale_image(&s, out, out, 45.0).unwrap();
        prop_assert!(g.values().iter().all(|v| *v >= 0.0));
        prop_assert_eq!(g.max(), 1.0);
        let gg = to_grayscale_image(&g, out, out, 45.0).unwrap();
        for (a, b) in g.values().iter().zip(gg.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sgrm_roundtrip_is_exact(seed in any::<u64>(), rows in 1usize..20, cols in 1usize..20, axes in any::<bool>()) {
        let mut r = rng(seed);
        // f32-representable values survive exactly.
        let v: Vec<f64> = (0..rows * cols).map(|_| rand::Rng::random_range(&mut r, 0.0f32..5.0) as f64).collect();
        let mut s = Spectrogram::new(rows, cols, v).unwrap();
        if axes && rows > 1 && cols > 1 {
            let ax = Axes::centered(rows, cols, 1200.0, 4.0);
            let f32ify = |v: Vec<f64>| v.into_iter().map(|x| x as f32 as f64).collect();
            let ax = Axes { freq_hz: f32ify(ax.freq_hz), time_s: f32ify(ax.time_s) };
            s = s.with_axes(ax).unwrap();
        }
        prop_assert_eq!(decode_sgrm(&encode_sgrm(&s)).unwrap(), s);
    }

    #[test]
    fn png_roundtrip_within_one_level(seed in any::<u64>(), rows in 1usize..20, cols in 1usize..20) {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..rows * cols).map(|_| rand::Rng::random_range(&mut r, 0.0..=1.0)).collect();
        let s = Spectrogram::new(rows, cols, v).unwrap();
        let back = decode_png(&encode_png(&s).unwrap()).unwrap();
        prop_assert_eq!(back.shape(), s.shape());
        for (a, b) in s.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}
