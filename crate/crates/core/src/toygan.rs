//! 8-Gaussians GAN testbed.
//!
//! Generator and discriminator are 2-hidden-layer ReLU perceptrons with
//! hand-written reverse-mode gradients. [`GanGame`] freezes one minibatch and
//! exposes the pair as a [`DifferentiableGame`], θ = generator parameters
//! (cost L_G) and φ = discriminator parameters (cost L_D), so every optimizer
//! in [`crate::optimizers`] can drive it.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use thiserror::Error;

use crate::games::{DifferentiableGame, GameError, JointState};
use crate::linalg::Vector;
use crate::optimizers::{Method, Optimizer, OptimizerConfig, OptimizerError, ReasoningTrace};
use crate::rng::{self, StreamRng};

pub const NUM_MODES: usize = 8;
pub const MODE_STD: f64 = 0.05;
pub const LATENT_DIM: usize = 64;
pub const HIDDEN_WIDTH: usize = 128;
pub const BATCH_SIZE: usize = 128;
pub const LOGIT_CLAMP: f64 = 30.0;
pub const BLOWUP_LOSS: f64 = 1e6;
/// Samples farther than 3σ from every mode count as background.
pub const COVERAGE_RADIUS: f64 = 3.0 * MODE_STD;
/// Minimum share of samples for a mode to count as covered.
pub const COVERED_FRACTION: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyGanError {
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("input has {got} columns, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reasoning level {k} requested from a trace of depth {depth}")]
    IndexOutOfRange { k: usize, depth: usize },
    #[error("loss reached {loss} at step {step}")]
    NumericalBlowup { step: usize, loss: f64 },
    #[error("{0} cannot train a GAN (needs exact Hessian blocks)")]
    UnsupportedMethod(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

impl From<ToyGanError> for GameError {
    fn from(e: ToyGanError) -> Self {
        GameError::Oracle(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpShape {
    pub fn generator(latent: usize, hidden: usize) -> Self {
        Self {
            input: latent,
            hidden,
            output: 2,
        }
    }

    pub fn discriminator(hidden: usize) -> Self {
        Self {
            input: 2,
            hidden,
            output: 1,
        }
    }

    pub fn num_params(&self) -> usize {
        let (i, h, o) = (self.input, self.hidden, self.output);
        h * i + h + h * h + h + o * h + o
    }
}

/// Weights are stored (fan_out × fan_in), so a layer computes x·Wᵀ + b.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

/// Activations kept from a forward pass for the backward pass.
struct Tape {
    input: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

fn relu_mask(dh: Array2<f64>, z: &Array2<f64>) -> Array2<f64> {
    let mut d = dh;
    d.zip_mut_with(z, |g, &zv| {
        if zv <= 0.0 {
            *g = 0.0;
        }
    });
    d
}

impl MlpParams {
    pub fn zeros(shape: MlpShape) -> Self {
        let MlpShape {
            input,
            hidden,
            output,
        } = shape;
        Self {
            w1: Array2::zeros((hidden, input)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, hidden)),
            b2: Array1::zeros(hidden),
            w3: Array2::zeros((output, hidden)),
            b3: Array1::zeros(output),
        }
    }

    /// Xavier-uniform weights in ±√(6/(fan_in + fan_out)), zero biases.
    pub fn xavier(shape: MlpShape, rng: &mut StreamRng) -> Self {
        let mut p = Self::zeros(shape);
        for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
            let (fan_out, fan_in) = w.dim();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        p
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            input: self.w1.ncols(),
            hidden: self.w1.nrows(),
            output: self.w3.nrows(),
        }
    }

    /// w1, b1, w2, b2, w3, b3, each row-major.
    pub fn flatten(&self) -> Vector {
        let mut out = Vec::with_capacity(self.shape().num_params());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out.extend(self.w3.iter());
        out.extend(self.b3.iter());
        Vector::from_vec_unchecked(out)
    }

    pub fn unflatten(shape: MlpShape, flat: &[f64]) -> Result<Self, ToyGanError> {
        if flat.len() != shape.num_params() {
            return Err(ToyGanError::ParamLength {
                expected: shape.num_params(),
                got: flat.len(),
            });
        }
        let MlpShape {
            input: i,
            hidden: h,
            output: o,
        } = shape;
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let mat = |r, c, v| Array2::from_shape_vec((r, c), v).expect("length checked");
        Ok(Self {
            w1: mat(h, i, take(h * i)),
            b1: Array1::from(take(h)),
            w2: mat(h, h, take(h * h)),
            b2: Array1::from(take(h)),
            w3: mat(o, h, take(o * h)),
            b3: Array1::from(take(o)),
        })
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<(), ToyGanError> {
        if x.ncols() != self.w1.ncols() {
            return Err(ToyGanError::DimensionMismatch {
                expected: self.w1.ncols(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Row-wise forward pass: affine, ReLU, affine, ReLU, affine.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, ToyGanError> {
        self.check_input(x)?;
        let h1 = relu(&(x.dot(&self.w1.t()) + &self.b1));
        let h2 = relu(&(h1.dot(&self.w2.t()) + &self.b2));
        Ok(h2.dot(&self.w3.t()) + &self.b3)
    }

    fn forward_tape(&self, x: &Array2<f64>) -> (Array2<f64>, Tape) {
        let z1 = x.dot(&self.w1.t()) + &self.b1;
        let h1 = relu(&z1);
        let z2 = h1.dot(&self.w2.t()) + &self.b2;
        let h2 = relu(&z2);
        let out = h2.dot(&self.w3.t()) + &self.b3;
        (
            out,
            Tape {
                input: x.clone(),
                z1,
                h1,
                z2,
                h2,
            },
        )
    }

    /// Pulls `d_out` back through the network; returns parameter gradients
    /// (when asked) and the input gradient (when asked).
    fn backward(
        &self,
        tape: &Tape,
        d_out: &Array2<f64>,
        want_params: bool,
        want_input: bool,
    ) -> (Option<MlpParams>, Option<Array2<f64>>) {
        let dh2 = d_out.dot(&self.w3);
        let dz2 = relu_mask(dh2, &tape.z2);
        let dh1 = dz2.dot(&self.w2);
        let dz1 = relu_mask(dh1, &tape.z1);
        let params = want_params.then(|| MlpParams {
            w3: d_out.t().dot(&tape.h2),
            b3: d_out.sum_axis(Axis(0)),
            w2: dz2.t().dot(&tape.h1),
            b2: dz2.sum_axis(Axis(0)),
            w1: dz1.t().dot(&tape.input),
            b1: dz1.sum_axis(Axis(0)),
        });
        let input = want_input.then(|| dz1.dot(&self.w1));
        (params, input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GanLossKind {
    NonSaturating,
    Hinge,
    SaturatingZeroSum,
}

impl fmt::Display for GanLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GanLossKind::NonSaturating => "non-saturating",
            GanLossKind::Hinge => "hinge",
            GanLossKind::SaturatingZeroSum => "saturating",
        })
    }
}

impl FromStr for GanLossKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "non-saturating" | "nonsaturating" | "ns" => Ok(GanLossKind::NonSaturating),
            "hinge" => Ok(GanLossKind::Hinge),
            "saturating" | "zero-sum" => Ok(GanLossKind::SaturatingZeroSum),
            _ => Err(()),
        }
    }
}

/// One minibatch: real points (n × 2) and latent codes (n × latent).
#[derive(Debug, Clone, PartialEq)]
pub struct GanBatch {
    pub real: Array2<f64>,
    pub latents: Array2<f64>,
}

impl GanBatch {
    pub fn sample(
        n: usize,
        latent: usize,
        data_rng: &mut StreamRng,
        latent_rng: &mut StreamRng,
    ) -> Self {
        let real = sample_real(n, data_rng);
        let mut z = vec![0.0; n * latent];
        rng::fill_standard_normal(latent_rng, &mut z);
        Self {
            real,
            latents: Array2::from_shape_vec((n, latent), z).expect("n × latent"),
        }
    }

    pub fn len(&self) -> usize {
        self.real.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn mode_center(j: usize) -> (f64, f64) {
    let a = 2.0 * PI * j as f64 / NUM_MODES as f64;
    (a.cos(), a.sin())
}

pub fn sample_real_with_std(n: usize, std: f64, rng: &mut StreamRng) -> Array2<f64> {
    let mut out = Array2::zeros((n, 2));
    for mut row in out.rows_mut() {
        let (cx, cy) = mode_center(rng.gen_range(0..NUM_MODES));
        row[0] = cx + std * rng::standard_normal(rng);
        row[1] = cy + std * rng::standard_normal(rng);
    }
    out
}

/// n points from the mixture of 8 Gaussians (σ = 0.05) on the unit circle.
pub fn sample_real(n: usize, rng: &mut StreamRng) -> Array2<f64> {
    sample_real_with_std(n, MODE_STD, rng)
}

fn clamp_logit(l: f64) -> (f64, f64) {
    if l > LOGIT_CLAMP {
        (LOGIT_CLAMP, 0.0)
    } else if l < -LOGIT_CLAMP {
        (-LOGIT_CLAMP, 0.0)
    } else {
        (l, 1.0)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + eˣ)
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// L_D and its derivative with respect to each real and fake logit.
fn disc_loss(
    kind: GanLossKind,
    real: &Array2<f64>,
    fake: &Array2<f64>,
) -> (f64, Array2<f64>, Array2<f64>) {
    let (nr, nf) = (real.nrows() as f64, fake.nrows() as f64);
    let mut loss = 0.0;
    let mut dr = Array2::zeros(real.raw_dim());
    let mut df = Array2::zeros(fake.raw_dim());
    for (d, &l) in dr.iter_mut().zip(real.iter()) {
        let (l, dl) = clamp_logit(l);
        match kind {
            GanLossKind::Hinge => {
                if 1.0 - l > 0.0 {
                    loss += (1.0 - l) / nr;
                    *d = -dl / nr;
                }
            }
            _ => {
                // −log σ(l)
                loss += softplus(-l) / nr;
                *d = -sigmoid(-l) * dl / nr;
            }
        }
    }
    for (d, &l) in df.iter_mut().zip(fake.iter()) {
        let (l, dl) = clamp_logit(l);
        match kind {
            GanLossKind::Hinge => {
                if 1.0 + l > 0.0 {
                    loss += (1.0 + l) / nf;
                    *d = dl / nf;
                }
            }
            _ => {
                // −log(1 − σ(l))
                loss += softplus(l) / nf;
                *d = sigmoid(l) * dl / nf;
            }
        }
    }
    (loss, dr, df)
}

/// L_G and its derivative with respect to each fake logit.
fn gen_loss(kind: GanLossKind, fake: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = fake.nrows() as f64;
    let mut loss = 0.0;
    let mut df = Array2::zeros(fake.raw_dim());
    for (d, &l) in df.iter_mut().zip(fake.iter()) {
        let (l, dl) = clamp_logit(l);
        match kind {
            GanLossKind::NonSaturating => {
                loss += softplus(-l) / n;
                *d = -sigmoid(-l) * dl / n;
            }
            GanLossKind::Hinge => {
                loss -= l / n;
                *d = -dl / n;
            }
            GanLossKind::SaturatingZeroSum => {
                // only the fake half of −L_D depends on the generator
                loss -= softplus(l) / n;
                *d = -sigmoid(l) * dl / n;
            }
        }
    }
    (loss, df)
}

/// The real-data part of L_D, needed to report the zero-sum L_G in full.
fn real_part(kind: GanLossKind, disc: &MlpParams, batch: &GanBatch) -> f64 {
    let real = disc.forward(&batch.real).expect("2-d points");
    let (l, _, _) = disc_loss(kind, &real, &Array2::zeros((0, 1)));
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads {
    pub loss_g: f64,
    pub loss_d: f64,
    pub grad_gen: MlpParams,
    pub grad_disc: MlpParams,
}

fn check_batch(gen: &MlpParams, disc: &MlpParams, batch: &GanBatch) -> Result<(), ToyGanError> {
    gen.check_input(&batch.latents)?;
    disc.check_input(&batch.real)?;
    if gen.shape().output != disc.shape().input {
        return Err(ToyGanError::DimensionMismatch {
            expected: disc.shape().input,
            got: gen.shape().output,
        });
    }
    if batch.is_empty() || batch.latents.nrows() == 0 {
        return Err(ToyGanError::InvalidConfig("empty batch"));
    }
    Ok(())
}

/// (L_G, L_D) without gradients.
pub fn losses(
    kind: GanLossKind,
    gen: &MlpParams,
    disc: &MlpParams,
    batch: &GanBatch,
) -> Result<(f64, f64), ToyGanError> {
    check_batch(gen, disc, batch)?;
    let fake = gen.forward(&batch.latents)?;
    let lf = disc.forward(&fake)?;
    let lr = disc.forward(&batch.real)?;
    let (ld, _, _) = disc_loss(kind, &lr, &lf);
    let (mut lg, _) = gen_loss(kind, &lf);
    if kind == GanLossKind::SaturatingZeroSum {
        lg -= real_part(kind, disc, batch);
    }
    Ok((lg, ld))
}

/// ∇ of L_G with respect to the generator parameters, plus L_G.
pub fn generator_grad(
    kind: GanLossKind,
    gen: &MlpParams,
    disc: &MlpParams,
    batch: &GanBatch,
) -> Result<(f64, MlpParams), ToyGanError> {
    check_batch(gen, disc, batch)?;
    let (fake, gtape) = gen.forward_tape(&batch.latents);
    let (lf, dtape) = disc.forward_tape(&fake);
    let (mut lg, dlf) = gen_loss(kind, &lf);
    if kind == GanLossKind::SaturatingZeroSum {
        lg -= real_part(kind, disc, batch);
    }
    let (_, dfake) = disc.backward(&dtape, &dlf, false, true);
    let (grad, _) = gen.backward(&gtape, &dfake.expect("asked"), true, false);
    Ok((lg, grad.expect("asked")))
}

/// ∇ of L_D with respect to the discriminator parameters, plus L_D.
pub fn discriminator_grad(
    kind: GanLossKind,
    gen: &MlpParams,
    disc: &MlpParams,
    batch: &GanBatch,
) -> Result<(f64, MlpParams), ToyGanError> {
    check_batch(gen, disc, batch)?;
    let fake = gen.forward(&batch.latents)?;
    let n = batch.real.nrows();
    // one pass over [real; fake]
    let joint =
        ndarray::concatenate(Axis(0), &[batch.real.view(), fake.view()]).expect("both n × 2");
    let (logits, tape) = disc.forward_tape(&joint);
    let (ld, dr, df) = disc_loss(
        kind,
        &logits.slice(ndarray::s![..n, ..]).to_owned(),
        &logits.slice(ndarray::s![n.., ..]).to_owned(),
    );
    let dlogits = ndarray::concatenate(Axis(0), &[dr.view(), df.view()]).expect("same columns");
    let (grad, _) = disc.backward(&tape, &dlogits, true, false);
    Ok((ld, grad.expect("asked")))
}

pub fn loss_and_grads(
    kind: GanLossKind,
    gen: &MlpParams,
    disc: &MlpParams,
    batch: &GanBatch,
) -> Result<LossGrads, ToyGanError> {
    let (loss_g, grad_gen) = generator_grad(kind, gen, disc, batch)?;
    let (loss_d, grad_disc) = discriminator_grad(kind, gen, disc, batch)?;
    Ok(LossGrads {
        loss_g,
        loss_d,
        grad_gen,
        grad_disc,
    })
}

/// A GAN on a frozen minibatch as a two-player game over flattened
/// parameters.
#[derive(Debug, Clone)]
pub struct GanGame {
    pub kind: GanLossKind,
    pub gen_shape: MlpShape,
    pub disc_shape: MlpShape,
    pub batch: GanBatch,
}

impl GanGame {
    pub fn params(&self, s: &JointState) -> Result<(MlpParams, MlpParams), ToyGanError> {
        Ok((
            MlpParams::unflatten(self.gen_shape, s.theta.as_slice())?,
            MlpParams::unflatten(self.disc_shape, s.phi.as_slice())?,
        ))
    }

    pub fn losses(&self, s: &JointState) -> Result<(f64, f64), ToyGanError> {
        let (g, d) = self.params(s)?;
        losses(self.kind, &g, &d, &self.batch)
    }
}

impl DifferentiableGame for GanGame {
    fn dims(&self) -> (usize, usize) {
        (self.gen_shape.num_params(), self.disc_shape.num_params())
    }

    fn grad_theta_cost(&self, s: &JointState) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        let (g, d) = self.params(s)?;
        Ok(generator_grad(self.kind, &g, &d, &self.batch)?.1.flatten())
    }

    fn grad_phi_cost(&self, s: &JointState) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        let (g, d) = self.params(s)?;
        Ok(discriminator_grad(self.kind, &g, &d, &self.batch)?
            .1
            .flatten())
    }
}

/// r⁽ᵏ⁾ = ‖θ⁽ᵏ⁾ − θ⁽ᵏ⁻¹⁾‖² + ‖φ⁽ᵏ⁾ − φ⁽ᵏ⁻¹⁾‖²
pub fn reasoning_gap(trace: &ReasoningTrace, k: usize) -> Result<f64, ToyGanError> {
    if k == 0 || k > trace.depth() {
        return Err(ToyGanError::IndexOutOfRange {
            k,
            depth: trace.depth(),
        });
    }
    Ok(trace.states[k].gap_sq(&trace.states[k - 1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub fractions: [f64; NUM_MODES],
    pub background: f64,
    pub covered: usize,
}

/// Assigns every sample to its nearest mode if within [`COVERAGE_RADIUS`].
pub fn mode_coverage(samples: &Array2<f64>) -> Coverage {
    let n = samples.nrows().max(1) as f64;
    let centers: Vec<(f64, f64)> = (0..NUM_MODES).map(mode_center).collect();
    let mut counts = [0usize; NUM_MODES];
    let mut background = 0usize;
    for row in samples.rows() {
        let (x, y) = (row[0], row[1]);
        let (best, d2) = centers
            .iter()
            .enumerate()
            .map(|(j, &(cx, cy))| (j, (x - cx).powi(2) + (y - cy).powi(2)))
            .fold(
                (0, f64::INFINITY),
                |acc, c| if c.1 < acc.1 { c } else { acc },
            );
        if d2 <= COVERAGE_RADIUS * COVERAGE_RADIUS {
            counts[best] += 1;
        } else {
            background += 1;
        }
    }
    let mut fractions = [0.0; NUM_MODES];
    for (f, c) in fractions.iter_mut().zip(counts) {
        *f = c as f64 / n;
    }
    Coverage {
        fractions,
        background: background as f64 / n,
        covered: fractions.iter().filter(|&&f| f >= COVERED_FRACTION).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanTrainConfig {
    pub method: Method,
    pub opt: OptimizerConfig,
    pub loss: GanLossKind,
    pub steps: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub latent: usize,
    pub seed: u64,
    /// reasoning levels whose gaps are logged every step
    pub gap_ks: Vec<usize>,
    /// coverage is measured every this many steps and after the last one; 0
    /// measures only after the last
    pub coverage_every: usize,
    pub coverage_samples: usize,
}

impl GanTrainConfig {
    pub fn new(
        method: Method,
        opt: OptimizerConfig,
        loss: GanLossKind,
        steps: usize,
        seed: u64,
    ) -> Self {
        Self {
            method,
            opt,
            loss,
            steps,
            batch_size: BATCH_SIZE,
            hidden: HIDDEN_WIDTH,
            latent: LATENT_DIM,
            seed,
            gap_ks: Vec::new(),
            coverage_every: 0,
            coverage_samples: 8000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanLogRow {
    pub step: usize,
    pub loss_g: f64,
    pub loss_d: f64,
    pub gaps: Vec<f64>,
    pub coverage: Option<Coverage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanTrainLog {
    pub gap_ks: Vec<usize>,
    pub rows: Vec<GanLogRow>,
    pub final_gen: MlpParams,
    pub final_disc: MlpParams,
}

impl GanTrainLog {
    /// r̄⁽ᵏ⁾ over all logged steps, one entry per requested k.
    pub fn mean_gaps(&self) -> Vec<f64> {
        let n = self.rows.len().max(1) as f64;
        (0..self.gap_ks.len())
            .map(|i| self.rows.iter().map(|r| r.gaps[i]).sum::<f64>() / n)
            .collect()
    }

    pub fn last_coverage(&self) -> Option<&Coverage> {
        self.rows.iter().rev().find_map(|r| r.coverage.as_ref())
    }

    /// `step,loss_g,loss_d,gap_k…,covered_modes`; the last column is empty on
    /// steps without a coverage measurement.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss_g,loss_d");
        for k in &self.gap_ks {
            let _ = write!(out, ",gap_k{k}");
        }
        out.push_str(",covered_modes\n");
        for r in &self.rows {
            let _ = write!(out, "{},{:?},{:?}", r.step, r.loss_g, r.loss_d);
            for g in &r.gaps {
                let _ = write!(out, ",{g:?}");
            }
            match &r.coverage {
                Some(c) => {
                    let _ = writeln!(out, ",{}", c.covered);
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

/// Latent samples pushed through the generator.
pub fn generate(gen: &MlpParams, n: usize, rng: &mut StreamRng) -> Array2<f64> {
    let latent = gen.shape().input;
    let mut z = vec![0.0; n * latent];
    rng::fill_standard_normal(rng, &mut z);
    let z = Array2::from_shape_vec((n, latent), z).expect("n × latent");
    gen.forward(&z).expect("latent width matches")
}

fn check_losses(step: usize, loss_g: f64, loss_d: f64) -> Result<(), ToyGanError> {
    for loss in [loss_g, loss_d] {
        if !(loss.abs() <= BLOWUP_LOSS) {
            return Err(ToyGanError::NumericalBlowup { step, loss });
        }
    }
    Ok(())
}

/// Trains from Xavier initialization with a fresh minibatch every step.
/// Row t logs the losses at the state before update t and the reasoning
/// gaps of that update.
pub fn train_gan(cfg: &GanTrainConfig) -> Result<GanTrainLog, ToyGanError> {
    if cfg.method.needs_blocks() || matches!(cfg.method, Method::SppmFixedPoint { .. }) {
        return Err(ToyGanError::UnsupportedMethod(cfg.method.to_string()));
    }
    if cfg.batch_size == 0 {
        return Err(ToyGanError::InvalidConfig("batch_size"));
    }
    if cfg.hidden == 0 || cfg.latent == 0 {
        return Err(ToyGanError::InvalidConfig("hidden/latent"));
    }
    let has_trace = cfg.method.uses_depth();
    for &k in &cfg.gap_ks {
        if !has_trace || k == 0 || k > cfg.opt.k {
            return Err(ToyGanError::IndexOutOfRange {
                k,
                depth: cfg.opt.k,
            });
        }
    }
    let gen_shape = MlpShape::generator(cfg.latent, cfg.hidden);
    let disc_shape = MlpShape::discriminator(cfg.hidden);
    let gen0 = MlpParams::xavier(gen_shape, &mut rng::stream(cfg.seed, "gen-init"));
    let disc0 = MlpParams::xavier(disc_shape, &mut rng::stream(cfg.seed, "disc-init"));
    let mut data_rng = rng::stream(cfg.seed, "data");
    let mut latent_rng = rng::stream(cfg.seed, "latent");
    let mut eval_rng = rng::stream(cfg.seed, "eval");

    let mut opt = Optimizer::new(cfg.method, cfg.opt.clone())?;
    let mut s = JointState::new(gen0.flatten(), disc0.flatten());
    let mut rows = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let game = GanGame {
            kind: cfg.loss,
            gen_shape,
            disc_shape,
            batch: GanBatch::sample(cfg.batch_size, cfg.latent, &mut data_rng, &mut latent_rng),
        };
        let (loss_g, loss_d) = game.losses(&s)?;
        check_losses(step, loss_g, loss_d)?;
        let out = opt.step(&game, &s)?;
        let gaps = match &out.trace {
            Some(trace) => cfg
                .gap_ks
                .iter()
                .map(|&k| reasoning_gap(trace, k))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        s = out.state;
        let last = step + 1 == cfg.steps;
        let due = cfg.coverage_every > 0 && (step + 1) % cfg.coverage_every == 0;
        let coverage = if last || due {
            let gen = MlpParams::unflatten(gen_shape, s.theta.as_slice())?;
            Some(mode_coverage(&generate(
                &gen,
                cfg.coverage_samples,
                &mut eval_rng,
            )))
        } else {
            None
        };
        rows.push(GanLogRow {
            step,
            loss_g,
            loss_d,
            gaps,
            coverage,
        });
    }
    Ok(GanTrainLog {
        gap_ks: cfg.gap_ks.clone(),
        rows,
        final_gen: MlpParams::unflatten(gen_shape, s.theta.as_slice())?,
        final_disc: MlpParams::unflatten(disc_shape, s.phi.as_slice())?,
    })
}

/// Largest norm-wise relative error between backprop and central
/// differences over `draws` random small networks and batches.
///
/// Draws where a ReLU pre-activation or hinge margin lies within 1e−3 of its
/// kink are redrawn, since central differences are meaningless there.
pub fn gradient_check(kind: GanLossKind, draws: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, "gradcheck");
    let gen_shape = MlpShape::generator(3, 8);
    let disc_shape = MlpShape::discriminator(8);
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut accepted = 0;
    while accepted < draws {
        let mut gen = MlpParams::xavier(gen_shape, &mut rng);
        let mut disc = MlpParams::xavier(disc_shape, &mut rng);
        for b in [
            &mut gen.b1,
            &mut gen.b2,
            &mut gen.b3,
            &mut disc.b1,
            &mut disc.b2,
            &mut disc.b3,
        ] {
            b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        }
        let mut latent_rng = rng::stream(rng.gen(), "z");
        let batch = GanBatch::sample(6, 3, &mut rng, &mut latent_rng);
        if near_kink(kind, &gen, &disc, &batch) {
            continue;
        }
        accepted += 1;
        let grads = loss_and_grads(kind, &gen, &disc, &batch).expect("shapes agree");
        let theta = gen.flatten();
        let phi = disc.flatten();
        let fd_gen = central_diff(&theta, h, |t| {
            let g = MlpParams::unflatten(gen_shape, t).expect("same shape");
            losses(kind, &g, &disc, &batch).expect("shapes agree").0
        });
        let fd_disc = central_diff(&phi, h, |p| {
            let d = MlpParams::unflatten(disc_shape, p).expect("same shape");
            losses(kind, &gen, &d, &batch).expect("shapes agree").1
        });
        worst = worst
            .max(relative_error(&grads.grad_gen.flatten(), &fd_gen))
            .max(relative_error(&grads.grad_disc.flatten(), &fd_disc));
    }
    worst
}

fn central_diff(x: &Vector, h: f64, f: impl Fn(&[f64]) -> f64) -> Vector {
    let mut probe = x.as_slice().to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &Vector, b: &Vector) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn near_kink(kind: GanLossKind, gen: &MlpParams, disc: &MlpParams, batch: &GanBatch) -> bool {
    const MARGIN: f64 = 1e-3;
    let close = |a: &Array2<f64>| a.iter().any(|v| v.abs() < MARGIN);
    let (fake, gt) = gen.forward_tape(&batch.latents);
    let (lf, ft) = disc.forward_tape(&fake);
    let (lr, rt) = disc.forward_tape(&batch.real);
    let mut hit = [&gt, &ft, &rt].iter().any(|t| close(&t.z1) || close(&t.z2));
    if kind == GanLossKind::Hinge {
        hit |= lr.iter().any(|l| (1.0 - l).abs() < MARGIN)
            || lf.iter().any(|l| (1.0 + l).abs() < MARGIN);
    }
    hit
}
