//! Finite-difference verification of every analytic gradient on miniature
//! instances.
//!
//! Central differences are taken in double-double arithmetic ([`Wide`]) so
//! their rounding noise sits far below the smallest gradients being checked.
//! Each group's analytic gradient is computed twice, in `f32` (tolerance
//! [`TOLERANCE_32`]) and in `f64` (tolerance [`TOLERANCE_64`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apply::apply_spatial_aware;
use crate::error::{invalid_arg, Error, Result};
use crate::grad::{backward_apply, relative_error, upsample_bilinear, upsample_bilinear_backward};
use crate::image::ImagePlane;
use crate::losses::{cie94_loss, monotonicity_loss, mse_loss, smooth_loss, LossWeights};
use crate::lut::{Lut3d, LutBank};
use crate::model::Model;
use crate::predictor::{ConvArch, ConvPredictor, HeadInit, Predictor};
use crate::scalar::{Real, Scalar, Wide};
use crate::train::{loss_and_gradients, objective};
use crate::weights::WeightMap;

pub const TOLERANCE_32: f64 = 1e-3;
pub const TOLERANCE_64: f64 = 1e-6;

pub const GROUPS: [&str; 10] = [
    "cells",
    "alpha",
    "omega",
    "upsample",
    "mse",
    "smooth",
    "mono",
    "cie94",
    "conv",
    "end-to-end",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub name: &'static str,
    pub params: usize,
    pub err32: f64,
    pub err64: f64,
}

impl GroupReport {
    pub fn passed(&self) -> bool {
        self.err32 <= TOLERANCE_32 && self.err64 <= TOLERANCE_64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Flips the sign of one group's analytic gradient, to show that the
    /// checker notices.
    pub inject_fault: Option<String>,
}

fn lift<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::lit(x)).collect()
}

fn lower<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|&x| x.to_f64_lossy()).collect()
}

/// Random values exactly representable in `f32`, so every precision
/// evaluates the same point.
fn draw(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi) as f32 as f64).collect()
}

fn bank_from<S: Scalar>(t: usize, m: usize, n: usize, cells: &[S]) -> LutBank<S> {
    let luts = cells
        .chunks_exact(n * n * n * 3)
        .map(|c| Lut3d::from_values(n, c.to_vec()).expect("sized"))
        .collect();
    LutBank::from_luts(t, m, luts).expect("sized")
}

fn image_from<S: Scalar>(h: usize, w: usize, data: &[f64]) -> ImagePlane<S> {
    ImagePlane::new(h, w, lift(data)).expect("sized")
}

fn dot<S: Scalar>(a: &[S], b: &[f64]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * S::lit(y))
}

/// Central differences of `f` at `x`, evaluated in [`Wide`].
fn wide_differences<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[Wide]) -> Wide,
{
    let mut xw: Vec<Wide> = lift(x);
    let h = Wide::from(step);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = xw[i];
        xw[i] = orig + h;
        let plus = f(&xw);
        xw[i] = orig - h;
        let minus = f(&xw);
        xw[i] = orig;
        let d = ((plus - minus) / (h + h)).to_f64_lossy();
        if !d.is_finite() {
            return Err(Error::NonFinite(format!("finite difference {i} is not finite")));
        }
        out.push(d);
    }
    Ok(out)
}

fn max_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

fn report<G>(name: &'static str, numeric: &[f64], analytic: G, fault: bool) -> Result<GroupReport>
where
    G: Fn(bool) -> Result<Vec<f64>>,
{
    let mut a32 = analytic(false)?;
    let mut a64 = analytic(true)?;
    if fault {
        a32.iter_mut().for_each(|v| *v = -*v);
        a64.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(GroupReport {
        name,
        params: numeric.len(),
        err32: max_error(&a32, numeric),
        err64: max_error(&a64, numeric),
    })
}

/// Calls a generic gradient function in `f64` or `f32`.
macro_rules! at_precision {
    ($wide:expr, $f:ident ( $($arg:expr),* )) => {
        if $wide {
            $f::<f64>($($arg),*)
        } else {
            $f::<f32>($($arg),*)
        }
    };
}

// shared miniature shape: T=2, M=2, N=3
const T: usize = 2;
const M: usize = 2;
const N: usize = 3;
const CELLS: usize = T * M * N * N * N * 3;
// apply instance image
const AH: usize = 4;
const AW: usize = 4;

struct ApplyInstance {
    cells: Vec<f64>,
    omega: Vec<f64>,
    alpha: Vec<f64>,
    image: Vec<f64>,
    d_out: Vec<f64>,
}

impl ApplyInstance {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        Self {
            cells: draw(rng, CELLS, 0.0, 1.0),
            omega: draw(rng, T, 0.1, 1.0),
            alpha: draw(rng, AH * AW * M, 0.1, 1.0),
            // colors stay off the lattice planes
            image: draw(rng, AH * AW * 3, 0.02, 0.98),
            d_out: draw(rng, AH * AW * 3, -1.0, 1.0),
        }
    }

    fn value<S: Real>(&self, cells: &[S], omega: &[S], alpha: &[S]) -> S {
        let bank = bank_from(T, M, N, cells);
        let weights = WeightMap::new(omega.to_vec(), AH, AW, M, alpha.to_vec()).expect("sized");
        let y = apply_spatial_aware(&bank, &weights, &image_from(AH, AW, &self.image)).expect("valid");
        dot(y.data(), &self.d_out)
    }

    /// Gradients for cells, α and ω.
    fn grads<S: Real>(&self) -> Result<[Vec<f64>; 3]> {
        let bank = bank_from(T, M, N, &lift::<S>(&self.cells));
        let weights = WeightMap::new(lift(&self.omega), AH, AW, M, lift(&self.alpha))?;
        let g = backward_apply(&bank, &weights, &image_from(AH, AW, &self.image), &lift::<S>(&self.d_out))?;
        Ok([lower(&g.d_luts.concat()), lower(&g.d_alpha), lower(&g.d_omega)])
    }
}

fn upsample_grad<S: Real>(g: &[f64], shape: [usize; 5]) -> Result<Vec<f64>> {
    let [sh, sw, ch, oh, ow] = shape;
    upsample_bilinear_backward(&lift::<S>(g), oh, ow, ch, sh, sw).map(|v| lower(&v))
}

fn mse_grad<S: Real>(x: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    Ok(lower(&mse_loss(&image_from::<S>(2, 2, x), &image_from(2, 2, target))?.grad))
}

fn cie94_grad<S: Real>(x: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    Ok(lower(&cie94_loss(&image_from::<S>(2, 2, x), &image_from(2, 2, target))?.grad))
}

// smoothness parameters: cells, then ω, then a 2×2 α map
fn smooth_parts<S: Real>(x: &[S]) -> (LutBank<S>, WeightMap<S>) {
    let bank = bank_from(T, M, N, &x[..CELLS]);
    let w = WeightMap::new(x[CELLS..CELLS + T].to_vec(), 2, 2, M, x[CELLS + T..].to_vec()).expect("sized");
    (bank, w)
}

fn smooth_grad<S: Real>(x: &[f64]) -> Result<Vec<f64>> {
    let (bank, w) = smooth_parts(&lift::<S>(x));
    let s = smooth_loss(&bank, &w, true)?;
    Ok([lower(&s.d_luts.concat()), lower(&s.d_omega), lower(&s.d_alpha)].concat())
}

fn mono_grad<S: Real>(x: &[f64]) -> Result<Vec<f64>> {
    Ok(lower(&monotonicity_loss(&bank_from(T, M, N, &lift::<S>(x))).grad))
}

fn conv_arch() -> ConvArch {
    ConvArch::miniature(8, 2, T, M)
}

struct ConvInstance {
    input: Vec<f64>,
    r_omega: Vec<f64>,
    r_alpha: Vec<f64>,
}

impl ConvInstance {
    /// `<ω, r_ω> + <α, r_α>` for the network with `params`.
    fn value<S: Real>(&self, params: &[S]) -> S {
        let net = ConvPredictor::from_params(conv_arch(), params.to_vec()).expect("sized");
        let (out, _) = net.forward(&image_from(8, 8, &self.input)).expect("valid");
        dot(&out.omega, &self.r_omega) + dot(&out.alpha, &self.r_alpha)
    }

    fn grad<S: Real>(&self, params: &[f64]) -> Result<Vec<f64>> {
        let net = ConvPredictor::<S>::from_params(conv_arch(), lift(params))?;
        let (_, tape) = net.forward(&image_from(8, 8, &self.input))?;
        Ok(lower(&net.backward(&tape, &lift(&self.r_omega), &lift(&self.r_alpha))?))
    }
}

// end-to-end: 16×16 pair, 8×8 predictor input; parameters are cells then the network
struct EndToEnd {
    input: Vec<f64>,
    target: Vec<f64>,
    weights: LossWeights,
}

impl EndToEnd {
    fn model<S: Real>(x: &[S]) -> Result<Model<S>> {
        let net = ConvPredictor::from_params(conv_arch(), x[CELLS..].to_vec())?;
        Model::new(bank_from(T, M, N, &x[..CELLS]), Predictor::Conv(net))
    }

    fn value<S: Real>(&self, x: &[S]) -> S {
        let model = Self::model(x).expect("sized");
        let (input, target) = (image_from(16, 16, &self.input), image_from(16, 16, &self.target));
        objective(&model, &input, &target, &self.weights, None).expect("valid")
    }

    fn grad<S: Real>(&self, x: &[f64]) -> Result<Vec<f64>> {
        let model = Self::model(&lift::<S>(x))?;
        let (input, target) = (image_from(16, 16, &self.input), image_from(16, 16, &self.target));
        let g = loss_and_gradients(&model, &input, &target, &self.weights, None)?;
        Ok([lower(&g.d_luts.concat()), lower(&g.d_params)].concat())
    }
}

// multilinear groups are exact up to rounding at any step; smooth ones use a
// step small enough that the truncation error is negligible
const LINEAR_STEP: f64 = 1e-4;
const SMOOTH_STEP: f64 = 1e-8;

/// Runs every group and returns one report per group, in [`GROUPS`] order.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<Vec<GroupReport>> {
    if let Some(f) = &config.inject_fault {
        if !GROUPS.contains(&f.as_str()) {
            return Err(invalid_arg!("unknown gradient group {f:?}; expected one of {GROUPS:?}"));
        }
    }
    let fault = |name: &str| config.inject_fault.as_deref() == Some(name);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reports = Vec::new();

    let inst = ApplyInstance::new(&mut rng);
    let (g32, g64) = (inst.grads::<f32>()?, inst.grads::<f64>()?);
    let pick = |i: usize, wide: bool| Ok(if wide { g64[i].clone() } else { g32[i].clone() });
    let fd = wide_differences(|x| inst.value(x, &lift(&inst.omega), &lift(&inst.alpha)), &inst.cells, LINEAR_STEP)?;
    reports.push(report("cells", &fd, |w| pick(0, w), fault("cells"))?);
    let fd = wide_differences(|x| inst.value(&lift(&inst.cells), &lift(&inst.omega), x), &inst.alpha, LINEAR_STEP)?;
    reports.push(report("alpha", &fd, |w| pick(1, w), fault("alpha"))?);
    let fd = wide_differences(|x| inst.value(&lift(&inst.cells), x, &lift(&inst.alpha)), &inst.omega, LINEAR_STEP)?;
    reports.push(report("omega", &fd, |w| pick(2, w), fault("omega"))?);

    // f(A) = <up(A), G>
    let shape = [3, 3, 2, 7, 5];
    let [sh, sw, ch, oh, ow] = shape;
    let g_up = draw(&mut rng, oh * ow * ch, -1.0, 1.0);
    let a_up = draw(&mut rng, sh * sw * ch, -1.0, 1.0);
    let fd = wide_differences(
        |x| dot(&upsample_bilinear(x, sh, sw, ch, oh, ow).expect("sized"), &g_up),
        &a_up,
        LINEAR_STEP,
    )?;
    reports.push(report("upsample", &fd, |w| at_precision!(w, upsample_grad(&g_up, shape)), fault("upsample"))?);

    let target = draw(&mut rng, 12, 0.05, 0.95);
    let pred = draw(&mut rng, 12, 0.05, 0.95);
    let fd = wide_differences(
        |x| mse_loss(&ImagePlane::new(2, 2, x.to_vec()).expect("sized"), &image_from(2, 2, &target)).expect("sized").value,
        &pred,
        SMOOTH_STEP,
    )?;
    reports.push(report("mse", &fd, |w| at_precision!(w, mse_grad(&pred, &target)), fault("mse"))?);

    let s_x = [draw(&mut rng, CELLS, 0.0, 1.0), draw(&mut rng, T, 0.0, 1.0), draw(&mut rng, 2 * 2 * M, 0.0, 1.0)].concat();
    let fd = wide_differences(
        |x| {
            let (bank, w) = smooth_parts(x);
            smooth_loss(&bank, &w, true).expect("sized").value
        },
        &s_x,
        SMOOTH_STEP,
    )?;
    reports.push(report("smooth", &fd, |w| at_precision!(w, smooth_grad(&s_x)), fault("smooth"))?);

    // random cells violate monotonicity almost everywhere
    let m_x = draw(&mut rng, CELLS, 0.0, 1.0);
    let fd = wide_differences(|x| monotonicity_loss(&bank_from(T, M, N, x)).value, &m_x, SMOOTH_STEP)?;
    reports.push(report("mono", &fd, |w| at_precision!(w, mono_grad(&m_x)), fault("mono"))?);

    let fd = wide_differences(
        |x| cie94_loss(&ImagePlane::new(2, 2, x.to_vec()).expect("sized"), &image_from(2, 2, &target)).expect("sized").value,
        &pred,
        SMOOTH_STEP,
    )?;
    reports.push(report("cie94", &fd, |w| at_precision!(w, cie94_grad(&pred, &target)), fault("cie94"))?);

    let arch = conv_arch();
    let net = ConvPredictor::<f64>::new(arch, rng.gen(), HeadInit::Random)?;
    let params: Vec<f64> = net.params().iter().map(|&v| v as f32 as f64).collect();
    let conv = ConvInstance {
        input: draw(&mut rng, 8 * 8 * 3, 0.0, 1.0),
        r_omega: draw(&mut rng, T, -1.0, 1.0),
        r_alpha: draw(&mut rng, arch.alpha_size().pow(2) * M, -1.0, 1.0),
    };
    let fd = wide_differences(|x| conv.value(x), &params, SMOOTH_STEP)?;
    reports.push(report(
        "conv",
        &fd,
        |w| if w { conv.grad::<f64>(&params) } else { conv.grad::<f32>(&params) },
        fault("conv"),
    )?);

    let e2e = EndToEnd {
        input: draw(&mut rng, 16 * 16 * 3, 0.02, 0.98),
        target: draw(&mut rng, 16 * 16 * 3, 0.02, 0.98),
        weights: LossWeights::default(),
    };
    let e_x = [draw(&mut rng, CELLS, 0.0, 1.0), params].concat();
    let fd = wide_differences(|x| e2e.value(x), &e_x, SMOOTH_STEP)?;
    reports.push(report(
        "end-to-end",
        &fd,
        |w| if w { e2e.grad::<f64>(&e_x) } else { e2e.grad::<f32>(&e_x) },
        fault("end-to-end"),
    )?);

    Ok(reports)
}
