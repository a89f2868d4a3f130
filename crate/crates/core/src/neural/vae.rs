//! Sequence VAE: LSTM encoder to a diagonal Gaussian, LSTM decoder fed the
//! latent sample at every step, weighted binary cross-entropy plus KL loss,
//! and the exact gradients of that loss.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lstm::{self, StepCache};
use super::tensor::{add_into, sigmoid, Tensor};
use crate::data::MultiHot;
use crate::error::{Error, Result};

/// Lower/upper clamp on reconstruction probabilities.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub w_kl_start: f64,
    pub w_kl_end: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 300,
            latent_dim: 16,
            batch_size: 80,
            w_kl_start: 0.1,
            w_kl_end: 0.5,
            epochs: 50,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.latent_dim == 0 || self.batch_size == 0 || self.epochs == 0
        {
            return Err(Error::Parameter(
                "hidden_size, latent_dim, batch_size and epochs must all be >= 1".into(),
            ));
        }
        if !(0.0 <= self.w_kl_start && self.w_kl_start <= self.w_kl_end) {
            return Err(Error::Parameter(format!(
                "require 0 <= w_kl_start ({}) <= w_kl_end ({})",
                self.w_kl_start, self.w_kl_end
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// KL weight for `epoch` (0-based): linear from start to end over the run.
    pub fn w_kl_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.w_kl_start;
        }
        let frac = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
        self.w_kl_start + (self.w_kl_end - self.w_kl_start) * frac
    }
}

/// All trainable arrays. Also used as the gradient container and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `4H × (|E| + H)`
    pub enc_w: Tensor,
    pub enc_b: Tensor,
    /// `4H × (M_z + H)`
    pub dec_w: Tensor,
    pub dec_b: Tensor,
    /// `M_z × H`
    pub mu_w: Tensor,
    pub mu_b: Tensor,
    /// `M_z × H`, projects to log σ².
    pub logvar_w: Tensor,
    pub logvar_b: Tensor,
    /// `|E| × H`
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub const BLOCK_NAMES: [&str; 10] = [
    "enc_w", "enc_b", "dec_w", "dec_b", "mu_w", "mu_b", "logvar_w", "logvar_b", "out_w", "out_b",
];

impl Weights {
    pub fn zeros(n_events: usize, hidden: usize, latent: usize) -> Self {
        Weights {
            enc_w: Tensor::zeros(&[4 * hidden, n_events + hidden]),
            enc_b: Tensor::zeros(&[4 * hidden]),
            dec_w: Tensor::zeros(&[4 * hidden, latent + hidden]),
            dec_b: Tensor::zeros(&[4 * hidden]),
            mu_w: Tensor::zeros(&[latent, hidden]),
            mu_b: Tensor::zeros(&[latent]),
            logvar_w: Tensor::zeros(&[latent, hidden]),
            logvar_b: Tensor::zeros(&[latent]),
            out_w: Tensor::zeros(&[n_events, hidden]),
            out_b: Tensor::zeros(&[n_events]),
        }
    }

    /// Uniform `±1/√H` initialisation of every array.
    pub fn init<R: Rng>(n_events: usize, hidden: usize, latent: usize, rng: &mut R) -> Self {
        let mut w = Weights::zeros(n_events, hidden, latent);
        let bound = 1.0 / (hidden as f64).sqrt();
        for (_, t) in w.blocks_mut() {
            for v in &mut t.data {
                *v = rng.random_range(-bound..bound);
            }
        }
        w
    }

    pub fn zeros_like(&self) -> Self {
        Weights::zeros(self.n_events(), self.hidden(), self.latent())
    }

    pub fn n_events(&self) -> usize {
        self.out_w.rows()
    }

    pub fn hidden(&self) -> usize {
        self.out_w.cols()
    }

    pub fn latent(&self) -> usize {
        self.mu_w.rows()
    }

    pub fn blocks(&self) -> [(&'static str, &Tensor); 10] {
        [
            ("enc_w", &self.enc_w),
            ("enc_b", &self.enc_b),
            ("dec_w", &self.dec_w),
            ("dec_b", &self.dec_b),
            ("mu_w", &self.mu_w),
            ("mu_b", &self.mu_b),
            ("logvar_w", &self.logvar_w),
            ("logvar_b", &self.logvar_b),
            ("out_w", &self.out_w),
            ("out_b", &self.out_b),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut Tensor); 10] {
        [
            ("enc_w", &mut self.enc_w),
            ("enc_b", &mut self.enc_b),
            ("dec_w", &mut self.dec_w),
            ("dec_b", &mut self.dec_b),
            ("mu_w", &mut self.mu_w),
            ("mu_b", &mut self.mu_b),
            ("logvar_w", &mut self.logvar_w),
            ("logvar_b", &mut self.logvar_b),
            ("out_w", &mut self.out_w),
            ("out_b", &mut self.out_b),
        ]
    }

    pub fn add_assign(&mut self, other: &Weights) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.blocks_mut() {
            t.scale(s);
        }
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.blocks()
            .into_iter()
            .find(|(_, t)| !t.all_finite())
            .map(|(n, _)| n)
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Event weight `1/ln(n)` for an event occurring `n` times; counts of 2 or
/// fewer use `1/ln 2`.
pub fn event_weight(count: u64) -> f64 {
    1.0 / (count.max(2) as f64).ln()
}

/// A trained (or freshly initialised) model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub weights: Weights,
    /// Per-column weights of the positive term in the reconstruction loss.
    pub event_weights: Vec<f64>,
    /// Fingerprint of the vocabulary the model was trained against.
    pub fingerprint: String,
}

impl ModelParams {
    pub fn new(config: ModelConfig, counts: &[u64], fingerprint: impl Into<String>) -> Result<Self> {
        config.validate()?;
        if counts.is_empty() {
            return Err(Error::Parameter("vocabulary must not be empty".into()));
        }
        let mut rng = super::seeded_rng(config.seed);
        let weights = Weights::init(counts.len(), config.hidden_size, config.latent_dim, &mut rng);
        Ok(ModelParams {
            event_weights: counts.iter().map(|&c| event_weight(c)).collect(),
            weights,
            config,
            fingerprint: fingerprint.into(),
        })
    }

    pub fn n_events(&self) -> usize {
        self.weights.n_events()
    }

    pub fn latent_dim(&self) -> usize {
        self.weights.latent()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LatentStats {
    pub fn from_log_var(mu: Vec<f64>, log_var: Vec<f64>) -> Self {
        let sigma = log_var.iter().map(|lv| (0.5 * lv).exp()).collect();
        LatentStats { mu, log_var, sigma }
    }

    pub fn from_mu_sigma(mu: Vec<f64>, sigma: Vec<f64>) -> Self {
        let log_var = sigma.iter().map(|s| (s * s).ln()).collect();
        LatentStats { mu, log_var, sigma }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Decoder output: per-slot, per-event occurrence probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ReconstructionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub w_kl: f64,
}

fn check_input(params: &ModelParams, x: &MultiHot) -> Result<()> {
    if x.cols() != params.n_events() {
        return Err(Error::Shape(format!(
            "input has {} event columns, model expects {}",
            x.cols(),
            params.n_events()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Shape("input sequence has no slots".into()));
    }
    Ok(())
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

struct EncoderTrace {
    steps: Vec<StepCache>,
    h_enc: Vec<f64>,
}

fn run_encoder(w: &Weights, x: &MultiHot, len: usize) -> Result<EncoderTrace> {
    let hidden = w.hidden();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(len);
    for t in 0..len {
        let (h2, c2, cache) = lstm::step(&w.enc_w, &w.enc_b.data, x.row(t), &h, &c);
        h = h2;
        c = c2;
        steps.push(cache);
    }
    ensure_finite(&h, "encoder hidden state")?;
    Ok(EncoderTrace { steps, h_enc: h })
}

fn project_latent(w: &Weights, h_enc: &[f64]) -> Result<LatentStats> {
    let m = w.latent();
    let mut mu = vec![0.0; m];
    let mut log_var = vec![0.0; m];
    w.mu_w.matvec_bias(h_enc, &w.mu_b.data, &mut mu);
    w.logvar_w.matvec_bias(h_enc, &w.logvar_b.data, &mut log_var);
    let stats = LatentStats::from_log_var(mu, log_var);
    ensure_finite(&stats.mu, "latent mean")?;
    ensure_finite(&stats.sigma, "latent sigma")?;
    Ok(stats)
}

/// Runs the encoder over every slot of `x` and returns the Gaussian
/// parameters of the latent code.
pub fn encode(params: &ModelParams, x: &MultiHot) -> Result<LatentStats> {
    check_input(params, x)?;
    let trace = run_encoder(&params.weights, x, x.rows())?;
    project_latent(&params.weights, &trace.h_enc)
}

/// `z = μ + σ ⊙ η` with `η` drawn from `rng`.
pub fn reparameterize<R: Rng>(stats: &LatentStats, rng: &mut R) -> Vec<f64> {
    let eta: Vec<f64> = (0..stats.dim()).map(|_| rng.sample(StandardNormal)).collect();
    reparameterize_with(stats, &eta)
}

pub fn reparameterize_with(stats: &LatentStats, eta: &[f64]) -> Vec<f64> {
    stats
        .mu
        .iter()
        .zip(&stats.sigma)
        .zip(eta)
        .map(|((m, s), e)| m + s * e)
        .collect()
}

struct DecoderTrace {
    steps: Vec<StepCache>,
    hidden: Vec<Vec<f64>>,
    probs: Vec<f64>,
    clamped: Vec<bool>,
}

fn run_decoder(w: &Weights, z: &[f64], n: usize) -> Result<DecoderTrace> {
    let hidden = w.hidden();
    let cols = w.n_events();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    let mut probs = vec![0.0; n * cols];
    let mut clamped = vec![false; n * cols];
    let mut logits = vec![0.0; cols];
    for t in 0..n {
        let (h2, c2, cache) = lstm::step(&w.dec_w, &w.dec_b.data, z, &h, &c);
        h = h2;
        c = c2;
        w.out_w.matvec_bias(&h, &w.out_b.data, &mut logits);
        for j in 0..cols {
            let p = sigmoid(logits[j]);
            let idx = t * cols + j;
            if p < PROB_EPS {
                probs[idx] = PROB_EPS;
                clamped[idx] = true;
            } else if p > 1.0 - PROB_EPS {
                probs[idx] = 1.0 - PROB_EPS;
                clamped[idx] = true;
            } else {
                probs[idx] = p;
            }
        }
        steps.push(cache);
        hs.push(h.clone());
    }
    ensure_finite(&probs, "decoder output")?;
    Ok(DecoderTrace {
        steps,
        hidden: hs,
        probs,
        clamped,
    })
}

/// Decodes `n` slots from latent code `z`. The decoder sees `z` as its input
/// at every step.
pub fn decode(params: &ModelParams, z: &[f64], n: usize) -> Result<ReconstructionMatrix> {
    if n == 0 {
        return Err(Error::Parameter("decode length must be >= 1".into()));
    }
    if z.len() != params.latent_dim() {
        return Err(Error::Shape(format!(
            "latent vector has length {}, model expects {}",
            z.len(),
            params.latent_dim()
        )));
    }
    let trace = run_decoder(&params.weights, z, n)?;
    Ok(ReconstructionMatrix {
        rows: n,
        cols: params.n_events(),
        data: trace.probs,
    })
}

/// Deterministic reconstruction from the latent mean.
pub fn reconstruct(params: &ModelParams, x: &MultiHot) -> Result<ReconstructionMatrix> {
    let stats = encode(params, x)?;
    decode(params, &stats.mu, x.rows())
}

fn reconstruction_loss(
    x: &MultiHot,
    len: usize,
    probs: &[f64],
    cols: usize,
    event_weights: &[f64],
) -> f64 {
    let mut sum = 0.0;
    for i in 0..len {
        let row = x.row(i);
        for j in 0..cols {
            let p = probs[i * cols + j];
            let xv = row[j];
            sum += event_weights[j] * xv * p.ln() + (1.0 - xv) * (1.0 - p).ln();
        }
    }
    -sum / len as f64
}

fn kl_loss(stats: &LatentStats) -> f64 {
    let m = stats.dim() as f64;
    let s: f64 = stats
        .mu
        .iter()
        .zip(&stats.log_var)
        .zip(&stats.sigma)
        .map(|((mu, lv), sigma)| 1.0 + lv - mu * mu - sigma * sigma)
        .sum();
    -s / m
}

/// Weighted cross-entropy reconstruction loss plus weighted KL divergence.
pub fn loss(
    x: &MultiHot,
    recon: &ReconstructionMatrix,
    stats: &LatentStats,
    event_weights: &[f64],
    w_kl: f64,
) -> Result<LossBreakdown> {
    if x.rows() != recon.rows || x.cols() != recon.cols || event_weights.len() != x.cols() {
        return Err(Error::Shape(format!(
            "loss inputs disagree: x {}x{}, x' {}x{}, {} event weights",
            x.rows(),
            x.cols(),
            recon.rows,
            recon.cols,
            event_weights.len()
        )));
    }
    ensure_finite(&recon.data, "reconstruction")?;
    ensure_finite(&stats.mu, "mu")?;
    ensure_finite(&stats.sigma, "sigma")?;
    ensure_finite(event_weights, "event weights")?;
    if !w_kl.is_finite() {
        return Err(Error::Numeric("w_kl is not finite".into()));
    }
    let reconstruction =
        reconstruction_loss(x, x.rows(), &recon.data, recon.cols, event_weights);
    let kl = kl_loss(stats);
    let total = reconstruction + w_kl * kl;
    if !total.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    Ok(LossBreakdown {
        total,
        reconstruction,
        kl,
        w_kl,
    })
}

/// Loss for a sequence occupying the first `len` rows of `x`, with fixed
/// reparameterization noise `eta`. Rows past `len` are padding and are
/// ignored entirely.
pub fn forward_loss(
    params: &ModelParams,
    x: &MultiHot,
    len: usize,
    eta: &[f64],
    w_kl: f64,
) -> Result<LossBreakdown> {
    check_input(params, x)?;
    check_len(x, len)?;
    let w = &params.weights;
    let enc = run_encoder(w, x, len)?;
    let stats = project_latent(w, &enc.h_enc)?;
    let z = reparameterize_with(&stats, eta);
    let dec = run_decoder(w, &z, len)?;
    let reconstruction = reconstruction_loss(x, len, &dec.probs, w.n_events(), &params.event_weights);
    let kl = kl_loss(&stats);
    finish_loss(reconstruction, kl, w_kl)
}

fn finish_loss(reconstruction: f64, kl: f64, w_kl: f64) -> Result<LossBreakdown> {
    let total = reconstruction + w_kl * kl;
    if !total.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    Ok(LossBreakdown {
        total,
        reconstruction,
        kl,
        w_kl,
    })
}

fn check_len(x: &MultiHot, len: usize) -> Result<()> {
    if len == 0 || len > x.rows() {
        return Err(Error::Shape(format!(
            "sequence length {len} outside 1..={}",
            x.rows()
        )));
    }
    Ok(())
}

/// Draws reparameterization noise from `rng` and returns the loss and the
/// gradient of the loss w.r.t. every weight.
pub fn backward<R: Rng>(
    params: &ModelParams,
    x: &MultiHot,
    rng: &mut R,
    w_kl: f64,
) -> Result<(LossBreakdown, Weights)> {
    let eta: Vec<f64> = (0..params.latent_dim())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    backward_with_noise(params, x, x.rows(), &eta, w_kl)
}

/// Exact gradient of [`forward_loss`] by backpropagation through time.
pub fn backward_with_noise(
    params: &ModelParams,
    x: &MultiHot,
    len: usize,
    eta: &[f64],
    w_kl: f64,
) -> Result<(LossBreakdown, Weights)> {
    check_input(params, x)?;
    check_len(x, len)?;
    let w = &params.weights;
    let cols = w.n_events();
    let hidden = w.hidden();
    let m = w.latent();

    let enc = run_encoder(w, x, len)?;
    let stats = project_latent(w, &enc.h_enc)?;
    let z = reparameterize_with(&stats, eta);
    let dec = run_decoder(w, &z, len)?;
    let reconstruction = reconstruction_loss(x, len, &dec.probs, cols, &params.event_weights);
    let kl = kl_loss(&stats);
    let breakdown = finish_loss(reconstruction, kl, w_kl)?;

    let mut grad = w.zeros_like();
    let inv_n = 1.0 / len as f64;

    // Decoder, from the last step back.
    let mut dz = vec![0.0; m];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut d_logit = vec![0.0; cols];
    for t in (0..len).rev() {
        let row = x.row(t);
        for j in 0..cols {
            let idx = t * cols + j;
            d_logit[j] = if dec.clamped[idx] {
                0.0
            } else {
                let p = dec.probs[idx];
                -inv_n * (params.event_weights[j] * row[j] * (1.0 - p) - (1.0 - row[j]) * p)
            };
        }
        grad.out_w.outer_acc(&d_logit, &dec.hidden[t]);
        add_into(&mut grad.out_b.data, &d_logit);
        let mut dh = dh_next.clone();
        w.out_w.matvec_t_acc(&d_logit, &mut dh);
        let (dx, dh_prev, dc_prev) = lstm::step_backward(
            &w.dec_w,
            &dec.steps[t],
            &dh,
            &dc_next,
            &mut grad.dec_w,
            &mut grad.dec_b.data,
        );
        add_into(&mut dz, &dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    // Latent: z = μ + exp(½ logσ²)·η, plus the KL term.
    let inv_m = 1.0 / m as f64;
    let d_mu: Vec<f64> = (0..m)
        .map(|k| dz[k] + w_kl * 2.0 * stats.mu[k] * inv_m)
        .collect();
    let d_logvar: Vec<f64> = (0..m)
        .map(|k| {
            let var = stats.sigma[k] * stats.sigma[k];
            dz[k] * 0.5 * stats.sigma[k] * eta[k] - w_kl * inv_m * (1.0 - var)
        })
        .collect();
    grad.mu_w.outer_acc(&d_mu, &enc.h_enc);
    add_into(&mut grad.mu_b.data, &d_mu);
    grad.logvar_w.outer_acc(&d_logvar, &enc.h_enc);
    add_into(&mut grad.logvar_b.data, &d_logvar);
    let mut dh = vec![0.0; hidden];
    w.mu_w.matvec_t_acc(&d_mu, &mut dh);
    w.logvar_w.matvec_t_acc(&d_logvar, &mut dh);

    // Encoder: only the final hidden state feeds the loss.
    let mut dc = vec![0.0; hidden];
    for t in (0..len).rev() {
        let (_, dh_prev, dc_prev) = lstm::step_backward(
            &w.enc_w,
            &enc.steps[t],
            &dh,
            &dc,
            &mut grad.enc_w,
            &mut grad.enc_b.data,
        );
        dh = dh_prev;
        dc = dc_prev;
    }

    if let Some(block) = grad.first_non_finite() {
        return Err(Error::Numeric(format!("non-finite gradient in block {block}")));
    }
    Ok((breakdown, grad))
}
