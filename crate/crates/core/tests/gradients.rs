mod common;

use common::*;
use lutfuse::grad::{backward_apply, finite_diff_check};
use lutfuse::gradcheck::{run_gradcheck, GradcheckConfig, GROUPS};
use lutfuse::losses::LossWeights;
use lutfuse::model::{Model, ModelConfig, PredictorKind};
use lutfuse::predictor::{ConvArch, ConvPredictor, HeadInit, Predictor};
use lutfuse::train::loss_and_gradients;
use rand::Rng;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn every_group_passes_and_injected_faults_are_caught() {
    let clean = run_gradcheck(&GradcheckConfig::default()).unwrap();
    assert_eq!(clean.len(), GROUPS.len());
    for g in &clean {
        assert!(g.passed(), "{} failed: {:.2e} / {:.2e}", g.name, g.err32, g.err64);
    }

    for target in ["alpha", "conv"] {
        let cfg = GradcheckConfig {
            seed: 0,
            inject_fault: Some(target.to_string()),
        };
        for g in run_gradcheck(&cfg).unwrap() {
            assert_eq!(g.passed(), g.name != target, "fault in {target}, group {}", g.name);
        }
    }

    let bad = GradcheckConfig {
        seed: 0,
        inject_fault: Some("nonexistent".into()),
    };
    assert!(run_gradcheck(&bad).is_err());
}

#[test]
fn apply_gradients_match_differences_on_a_small_instance() {
    let mut r = rng(5);
    let bank = random_bank(&mut r, 2, 2, 3);
    let weights = random_weights(&mut r, 2, 2, 4, 4);
    let image = random_image(&mut r, 4, 4);
    let dy: Vec<f64> = (0..48).map(|_| r.gen_range(-1.0..1.0)).collect();
    let g = backward_apply(&bank, &weights, &image, &dy).unwrap();
    let flat = bank.flat_values();
    let analytic: Vec<f64> = g.d_luts.concat();
    let err = finite_diff_check(
        |x| {
            let mut b = bank.clone();
            b.set_flat_values(x).unwrap();
            let y = lutfuse::apply::apply_spatial_aware(&b, &weights, &image).unwrap();
            y.data().iter().zip(&dy).map(|(a, b)| a * b).sum()
        },
        &flat,
        &analytic,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn apply_backward_does_not_depend_on_thread_count() {
    let mut r = rng(6);
    let bank = random_bank(&mut r, 3, 4, 9).cast::<f32>();
    let weights = random_weights(&mut r, 3, 4, 37, 23).cast::<f32>();
    let image = random_image(&mut r, 37, 23).cast::<f32>();
    let dy: Vec<f32> = (0..37 * 23 * 3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let reference = in_pool(1, || backward_apply(&bank, &weights, &image, &dy).unwrap());
    for threads in [2, 3, 8] {
        let g = in_pool(threads, || backward_apply(&bank, &weights, &image, &dy).unwrap());
        assert_eq!(g, reference, "{threads} threads");
    }
}

#[test]
fn full_step_does_not_depend_on_thread_count() {
    let mut r = rng(7);
    let config = ModelConfig {
        scenarios: 2,
        categories: 3,
        n_bins: 9,
        conv_arch: Some(ConvArch::miniature(32, 8, 2, 3)),
        ..ModelConfig::default()
    };
    let mut model = Model::<f32>::fresh(&config).unwrap();
    model.predictor = Predictor::Conv(ConvPredictor::new(ConvArch::miniature(32, 8, 2, 3), 3, HeadInit::Random).unwrap());
    let input = random_image(&mut r, 29, 41).cast::<f32>();
    let target = random_image(&mut r, 29, 41).cast::<f32>();
    let run = || {
        let g = loss_and_gradients(&model, &input, &target, &LossWeights::default(), None).unwrap();
        (g.value, g.output, g.d_luts, g.d_params)
    };
    let reference = in_pool(1, run);
    for threads in [2, 5] {
        assert!(in_pool(threads, run) == reference, "{threads} threads");
    }
}

#[test]
fn grid_predictor_step_gradients_are_finite() {
    let mut r = rng(8);
    let config = ModelConfig {
        scenarios: 2,
        categories: 2,
        n_bins: 5,
        predictor: PredictorKind::Grid,
        grid_size: 4,
        ..ModelConfig::default()
    };
    let model = Model::<f32>::fresh(&config).unwrap();
    let input = random_image(&mut r, 12, 12).cast::<f32>();
    let target = random_image(&mut r, 12, 12).cast::<f32>();
    let g = loss_and_gradients(&model, &input, &target, &LossWeights::default(), None).unwrap();
    assert!(g.d_params.iter().all(|v| v.is_finite()));
    assert!(g.d_params.iter().any(|&v| v != 0.0));
}
