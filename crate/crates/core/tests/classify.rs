mod common;

use std::time::Instant;

use proptest::prelude::*;

use common::{labelled_set, labels};
use udsift::classify::{evaluate_images, train_mdc_images, EvalResult, MdcParams};
use udsift::kinsim::ActivityClass;
use udsift::sigcore::Spectrogram;

fn shifted(v: &[(String, Spectrogram)], c: f64) -> Vec<(String, Spectrogram)> {
    v.iter()
        .map(|(k, s)| (k.clone(), Spectrogram::new(s.rows(), s.cols(), s.values().iter().map(|x| x + c).collect()).unwrap()))
        .collect()
}

fn class_names() -> Vec<String> {
    ActivityClass::ALL.iter().map(|c| c.as_str().to_string()).collect()
}

/// 40 clean training and 20 clean test samples per class, seed 7.
#[test]
fn reference_dataset_trains_fast_and_generalizes() {
    let train = labels(&labelled_set(7, 1, 40, 0.0));
    let test = labels(&labelled_set(7, 3, 20, 0.0));
    let t = Instant::now();
    let model = train_mdc_images(&train, &MdcParams::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    println!("training on {} images took {secs:.2} s", train.len());
    assert!(secs < 10.0, "training took {secs:.2} s");

    let on_train = evaluate_images(&model, &train).unwrap();
    // Balanced classes: the best constant guess gets 1/8.
    let baseline = 1.0 / ActivityClass::ALL.len() as f64;
    assert!(on_train.accuracy >= baseline, "training accuracy {}", on_train.accuracy);

    let held_out = evaluate_images(&model, &test).unwrap();
    println!("held-out accuracy {:.4}", held_out.accuracy);
    for row in held_out.confusion_percent() {
        assert!((row.iter().sum::<f64>() - 100.0).abs() <= 1e-9);
    }
    assert!(held_out.accuracy >= 0.80, "held-out accuracy {}", held_out.accuracy);

    // Adding the same constant image to every training and test sample is
    // absorbed by the mean and leaves each prediction unchanged.
    for c in [0.25, 3.0] {
        let m2 = train_mdc_images(&shifted(&train, c), &MdcParams::default()).unwrap();
        for ((_, a), (_, b)) in test.iter().zip(&shifted(&test, c)) {
            assert_eq!(model.predict(a).unwrap(), m2.predict(b).unwrap());
        }
    }
}

#[test]
fn perfect_and_constant_predictors() {
    let classes = class_names();
    let truth: Vec<String> = classes.iter().flat_map(|c| std::iter::repeat_n(c.clone(), 5)).collect();
    let perfect: Vec<(String, String)> = truth.iter().map(|t| (t.clone(), t.clone())).collect();
    let r = EvalResult::from_pairs(&perfect, &classes).unwrap();
    assert_eq!(r.accuracy, 1.0);
    for (i, row) in r.confusion_percent().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, if i == j { 100.0 } else { 0.0 });
        }
    }
    let constant: Vec<(String, String)> = truth.iter().map(|t| (t.clone(), classes[2].clone())).collect();
    assert_eq!(EvalResult::from_pairs(&constant, &classes).unwrap().accuracy, 0.125);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confusion_rows_sum_to_one_hundred(pairs in prop::collection::vec((0usize..8, 0usize..8), 1..200)) {
        let classes = class_names();
        let pairs: Vec<(String, String)> = pairs.iter().map(|(t, p)| (classes[*t].clone(), classes[*p].clone())).collect();
        let r = EvalResult::from_pairs(&pairs, &classes).unwrap();
        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        prop_assert_eq!(r.accuracy, correct as f64 / pairs.len() as f64);
        for (i, row) in r.confusion_percent().iter().enumerate() {
            prop_assert!((row.iter().sum::<f64>() - 100.0).abs() <= 1e-9);
            prop_assert!(r.n_in(i) > 0);
        }
        prop_assert_eq!(EvalResult::from_csv(&r.to_csv()).unwrap(), r);
    }
}
