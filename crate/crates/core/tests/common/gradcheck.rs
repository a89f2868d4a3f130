//! Central finite-difference oracle. Only calls the forward loss; never the
//! backward pass it is checking.

use seqlens::data::MultiHot;
use rand::Rng;
use seqlens::neural::{backward_with_noise, forward_loss, seeded_rng, ModelConfig, ModelParams};

pub const FD_STEP: f64 = 1e-4;

/// Gradients smaller than this are compared absolutely rather than
/// relatively: the denominator of the relative error never drops below it.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub worst: f64,
    pub block: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn max_relative_error(model: &ModelParams, x: &MultiHot, eta: &[f64], w_kl: f64) -> GradCheck {
    let len = x.rows();
    let (_, grads) = backward_with_noise(model, x, len, eta, w_kl).unwrap();
    let mut probe = model.clone();
    let mut out = GradCheck {
        worst: 0.0,
        block: "",
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let names: Vec<&'static str> = grads.blocks().iter().map(|(n, _)| *n).collect();
    for (b, name) in names.iter().enumerate() {
        let size = grads.blocks()[b].1.data.len();
        for k in 0..size {
            let orig = probe.weights.blocks()[b].1.data[k];
            probe.weights.blocks_mut()[b].1.data[k] = orig + FD_STEP;
            let up = forward_loss(&probe, x, len, eta, w_kl).unwrap().total;
            probe.weights.blocks_mut()[b].1.data[k] = orig - FD_STEP;
            let down = forward_loss(&probe, x, len, eta, w_kl).unwrap().total;
            probe.weights.blocks_mut()[b].1.data[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.blocks()[b].1.data[k];
            let err = relative_error(analytic, numeric);
            out.checked += 1;
            if err > out.worst {
                out = GradCheck {
                    worst: err,
                    block: name,
                    index: k,
                    analytic,
                    numeric,
                    checked: out.checked,
                };
            }
        }
    }
    out
}

/// Random model, input, noise and KL weight for a gradient check.
pub fn random_case(seed: u64, n_events: usize, hidden: usize, latent: usize, n: usize) -> (ModelParams, MultiHot, Vec<f64>, f64) {
    let mut rng = seeded_rng(seed);
    let counts: Vec<u64> = (0..n_events).map(|_| rng.random_range(1..20)).collect();
    let cfg = ModelConfig {
        hidden_size: hidden,
        latent_dim: latent,
        seed,
        ..ModelConfig::default()
    };
    let model = ModelParams::new(cfg, &counts, "fp").unwrap();
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut s: Vec<usize> = (0..n_events).filter(|_| rng.random_bool(0.3)).collect();
            if s.is_empty() {
                s.push(rng.random_range(0..n_events));
            }
            s
        })
        .collect();
    let x = MultiHot::from_sets(&sets, n_events).unwrap();
    let eta: Vec<f64> = (0..latent).map(|_| rng.random_range(-1.5..1.5)).collect();
    let w_kl = rng.random_range(0.1..0.5);
    (model, x, eta, w_kl)
}
