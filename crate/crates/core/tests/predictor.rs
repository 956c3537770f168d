mod common;

use common::*;
use lutfuse::imageio::{quantized, save_png, load_png};
use lutfuse::model::{Model, ModelConfig};
use lutfuse::predictor::{ConvArch, ConvPredictor, HeadInit, Predictor};
use lutfuse::ImagePlane;
use rand::Rng;

type Planes = Vec<Vec<Vec<f64>>>;

/// `(start, out, in, kernel, stride)` for each conv layer, then the fc block start.
fn layout(arch: &ConvArch) -> (Vec<(usize, usize, usize, usize, usize)>, usize) {
    let w = arch.widths;
    let shapes = [
        (w[0], 3, 3, 1),
        (w[1], w[0], 3, 2),
        (w[2], w[1], 3, 2),
        (w[3], w[2], 3, 2),
        (w[4], w[2], 3, 1),
        (w[5], w[4], 3, 1),
        (arch.categories, w[5], 1, 1),
    ];
    let mut start = 0;
    let mut out = Vec::new();
    for (o, i, k, s) in shapes {
        out.push((start, o, i, k, s));
        start += o * i * k * k + o;
    }
    (out, start)
}

fn conv(p: &[f64], layer: (usize, usize, usize, usize, usize), x: &Planes) -> Planes {
    let (start, out_c, in_c, k, stride) = layer;
    let d = x[0].len();
    let pad = k / 2;
    let od = (d + 2 * pad - k) / stride + 1;
    let bias = start + out_c * in_c * k * k;
    let mut y = vec![vec![vec![0.0; od]; od]; out_c];
    for o in 0..out_c {
        for oy in 0..od {
            for ox in 0..od {
                let mut acc = p[bias + o];
                for i in 0..in_c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= d as isize || ix >= d as isize {
                                continue;
                            }
                            acc += p[start + ((o * in_c + i) * k + ky) * k + kx] * x[i][iy as usize][ix as usize];
                        }
                    }
                }
                y[o][oy][ox] = acc;
            }
        }
    }
    y
}

fn leaky(x: Planes, slope: f64) -> Planes {
    x.into_iter()
        .map(|c| c.into_iter().map(|r| r.into_iter().map(|v| if v > 0.0 { v } else { slope * v }).collect()).collect())
        .collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let mx = v.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// `(ω, α)` with α channel-fastest over the low-resolution grid.
fn reference_forward(arch: &ConvArch, p: &[f64], image: &ImagePlane<f64>) -> (Vec<f64>, Vec<f64>) {
    let (layers, fc) = layout(arch);
    let d = arch.input_size;
    let x: Planes = (0..3)
        .map(|c| (0..d).map(|y| (0..d).map(|xx| image.pixel(y, xx)[c]).collect()).collect())
        .collect();
    let e1 = leaky(conv(p, layers[0], &x), arch.slope);
    let e2 = leaky(conv(p, layers[1], &e1), arch.slope);
    let e3 = leaky(conv(p, layers[2], &e2), arch.slope);
    let e4 = leaky(conv(p, layers[3], &e3), arch.slope);

    let w3 = arch.widths[3];
    let pooled: Vec<f64> = e4
        .iter()
        .map(|c| c.iter().flatten().sum::<f64>() / (c.len() * c.len()) as f64)
        .collect();
    let logits: Vec<f64> = (0..arch.scenarios)
        .map(|t| p[fc + arch.scenarios * w3 + t] + (0..w3).map(|i| p[fc + t * w3 + i] * pooled[i]).sum::<f64>())
        .collect();
    let omega = softmax(&logits);

    let d3 = e3[0].len();
    let skip: Planes = (0..e3.len())
        .map(|c| (0..d3).map(|y| (0..d3).map(|xx| e3[c][y][xx] + e4[c][y / 2][xx / 2]).collect()).collect())
        .collect();
    let d1 = leaky(conv(p, layers[4], &skip), arch.slope);
    let d2 = leaky(conv(p, layers[5], &d1), arch.slope);
    let head = conv(p, layers[6], &d2);
    let mut alpha = Vec::new();
    for y in 0..d3 {
        for xx in 0..d3 {
            let px: Vec<f64> = head.iter().map(|c| c[y][xx]).collect();
            alpha.extend(softmax(&px));
        }
    }
    (omega, alpha)
}

#[test]
fn miniature_forward_matches_straight_line_reference() {
    for (width, seed) in [(1, 0u64), (1, 1), (3, 2)] {
        let arch = ConvArch::miniature(8, width, 2, 2);
        let net = ConvPredictor::<f64>::new(arch, seed, HeadInit::Random).unwrap();
        let mut r = rng(seed + 100);
        let image = random_image(&mut r, 8, 8);
        let (out, _) = net.forward(&image).unwrap();
        let (omega, alpha) = reference_forward(&arch, net.params(), &image);
        assert_eq!(out.alpha_size, 2);
        for (a, b) in out.omega.iter().zip(&omega) {
            assert!((a - b).abs() < 1e-13, "omega {a} vs {b}");
        }
        assert_eq!(out.alpha.len(), alpha.len());
        for (a, b) in out.alpha.iter().zip(&alpha) {
            assert!((a - b).abs() < 1e-13, "alpha {a} vs {b}");
        }
    }
}

#[test]
fn larger_miniature_matches_reference() {
    let arch = ConvArch {
        widths: [4, 5, 6, 6, 3, 2],
        ..ConvArch::miniature(16, 1, 3, 4)
    };
    let net = ConvPredictor::<f64>::new(arch, 9, HeadInit::Random).unwrap();
    let image = random_image(&mut rng(9), 16, 16);
    let (out, _) = net.forward(&image).unwrap();
    let (omega, alpha) = reference_forward(&arch, net.params(), &image);
    assert!(out.omega.iter().zip(&omega).all(|(a, b)| (a - b).abs() < 1e-13));
    assert!(out.alpha.iter().zip(&alpha).all(|(a, b)| (a - b).abs() < 1e-13));
}

#[test]
fn dead_relu_layer_passes_no_gradient() {
    let arch = ConvArch {
        slope: 0.0,
        ..ConvArch::miniature(8, 3, 2, 2)
    };
    let mut net = ConvPredictor::<f64>::new(arch, 4, HeadInit::Random).unwrap();
    let (layers, _) = layout(&arch);
    let (start, out_c, in_c, k, _) = layers[5];
    let bias = start + out_c * in_c * k * k;
    net.params_mut()[bias..bias + out_c].iter_mut().for_each(|b| *b = -1e3);

    let mut r = rng(4);
    let image = random_image(&mut r, 8, 8);
    let (out, tape) = net.forward(&image).unwrap();
    let d_omega: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let d_alpha: Vec<f64> = (0..out.alpha.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let g = net.backward(&tape, &d_omega, &d_alpha).unwrap();

    // the blocked layer and everything feeding only into it
    for layer in [4, 5] {
        let (s, o, i, k, _) = layers[layer];
        assert!(g[s..s + o * i * k * k + o].iter().all(|&v| v == 0.0), "layer {layer}");
    }
    let (s, o, i, k, _) = layers[6];
    assert!(g[s..s + o * i * k * k].iter().all(|&v| v == 0.0));
    assert!(g[s + o * i * k * k..s + o * i * k * k + o].iter().any(|&v| v != 0.0));
}

#[test]
fn permuting_categories_with_head_channels_keeps_the_output() {
    let m = 4;
    let arch = ConvArch::miniature(16, 4, 2, m);
    let mut r = rng(21);
    let bank = random_bank(&mut r, 2, m, 5).cast::<f32>();
    let net = ConvPredictor::<f32>::new(arch, 21, HeadInit::Random).unwrap();
    let model = Model::new(bank.clone(), Predictor::Conv(net.clone())).unwrap();
    let image = random_image(&mut r, 23, 19).cast::<f32>();
    let base = model.enhance(&image).unwrap().output;

    let perm = [2usize, 0, 3, 1];
    let luts = (0..2)
        .flat_map(|t| perm.iter().map(move |&m| (t, m)))
        .map(|(t, src)| bank.lut(t, src).clone())
        .collect();
    let bank_p = lutfuse::LutBank::from_luts(2, m, luts).unwrap();
    let (layers, _) = layout(&arch);
    let (s, _, in_c, _, _) = layers[6];
    let mut params = net.params().to_vec();
    for (dst, &src) in perm.iter().enumerate() {
        for i in 0..in_c {
            params[s + dst * in_c + i] = net.params()[s + src * in_c + i];
        }
        params[s + m * in_c + dst] = net.params()[s + m * in_c + src];
    }
    let net_p = ConvPredictor::from_params(arch, params).unwrap();
    let permuted = Model::new(bank_p, Predictor::Conv(net_p)).unwrap().enhance(&image).unwrap().output;
    for (a, b) in base.data().iter().zip(permuted.data()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn fresh_model_is_the_identity_and_survives_png() {
    let model = Model::<f32>::fresh(&ModelConfig::default()).unwrap();
    let mut r = rng(30);
    let image = quantized(&random_image(&mut r, 45, 61).cast::<f32>());
    let out = model.enhance(&image).unwrap().output;
    let worst = out.data().iter().zip(image.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert!(worst <= 1e-6, "{worst}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.png");
    save_png(&out, &path).unwrap();
    assert_eq!(load_png(&path).unwrap(), image);
}

#[test]
fn predictor_cost_ignores_image_resolution() {
    let model = Model::<f32>::fresh(&ModelConfig {
        scenarios: 2,
        categories: 3,
        n_bins: 9,
        ..ModelConfig::default()
    })
    .unwrap();
    let mut r = rng(31);
    let small = random_image(&mut r, 40, 30).cast::<f32>();
    let large = random_image(&mut r, 300, 500).cast::<f32>();
    assert_eq!(
        model.predictor_input(&small).unwrap().data().len(),
        model.predictor_input(&large).unwrap().data().len()
    );
    let out = model.predict_weights(&large).unwrap();
    assert_eq!(out.alpha_size, 64);
}
