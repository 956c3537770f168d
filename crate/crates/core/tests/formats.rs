mod common;

use common::*;
use lutfuse::apply::flatten_bank;
use lutfuse::formats::{decode_bundle, encode_bundle, load_bundle, parse_cube, read_cube, save_bundle, to_cube_string, write_cube};
use lutfuse::model::{Model, ModelConfig, PredictorKind};
use lutfuse::predictor::{ConvArch, ConvPredictor, HeadInit, Predictor};
use lutfuse::Error;
use rand::Rng;

fn models() -> Vec<Model<f32>> {
    let mut r = rng(40);
    let conv = Model::new(
        random_bank(&mut r, 2, 3, 5).cast(),
        Predictor::Conv(ConvPredictor::new(ConvArch::standard(2, 3), 1, HeadInit::Random).unwrap()),
    )
    .unwrap();
    let mut grid = Model::<f32>::fresh(&ModelConfig {
        scenarios: 3,
        categories: 2,
        n_bins: 4,
        predictor: PredictorKind::Grid,
        grid_size: 6,
        ..ModelConfig::default()
    })
    .unwrap();
    grid.predictor.params_mut().iter_mut().for_each(|p| *p = r.gen_range(-2.0..2.0));
    vec![conv, grid]
}

#[test]
fn bundles_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    for (i, model) in models().into_iter().enumerate() {
        let path = dir.path().join(format!("m{i}.slut"));
        save_bundle(&model, &path).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(encode_bundle(&loaded).unwrap(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn any_flipped_bit_is_rejected() {
    let bytes = encode_bundle(&models()[1]).unwrap();
    let mut r = rng(41);
    for _ in 0..200 {
        let mut bad = bytes.clone();
        let i = r.gen_range(0..bad.len());
        bad[i] ^= 1 << r.gen_range(0..8);
        assert!(matches!(decode_bundle(&bad), Err(Error::Checksum { .. }) | Err(Error::Format(_))));
    }
}

#[test]
fn cube_round_trip_and_ordering() {
    let mut r = rng(42);
    let bank = random_bank(&mut r, 2, 2, 5).cast::<f32>();
    let mut lut = flatten_bank(&bank, &[0.25, 0.75], &[0.5, 0.5]).unwrap();
    lut.values_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.cube");
    write_cube(&lut, "t", &path).unwrap();
    let back = read_cube(&path).unwrap();
    let worst = back.values().iter().zip(lut.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert!(worst <= 1e-5 + f32::EPSILON, "{worst}");

    // red varies fastest in the file
    let text = to_cube_string(&lut, "t");
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 125);
    let c = lut.cell(1, 0, 0);
    assert_eq!(rows[1], format!("{:.6} {:.6} {:.6}", c[0], c[1], c[2]));
    let c = lut.cell(0, 0, 1);
    assert_eq!(rows[25], format!("{:.6} {:.6} {:.6}", c[0], c[1], c[2]));

    // one-hot weights export the selected LUT itself
    let one_hot = flatten_bank(&bank, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
    assert_eq!(to_cube_string(&one_hot, "t"), to_cube_string(bank.lut(0, 0), "t"));
    assert!(parse_cube(&to_cube_string(&one_hot, "t")).is_ok());
}
