//! Check backpropagation through the LSTM VAE against central finite
//! differences on a few random small models.
//!
//!     cargo run --example gradient_check -- [configs]

use rand::Rng;
use seqlens::data::MultiHot;
use seqlens::neural::{backward_with_noise, forward_loss, seeded_rng, ModelConfig, ModelParams};

const STEP: f64 = 1e-4;

fn main() -> seqlens::Result<()> {
    let configs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for seed in 0..configs {
        let mut rng = seeded_rng(seed);
        let (e, h, m, n) = (
            rng.random_range(2..=8),
            rng.random_range(1..=16),
            rng.random_range(1..=4),
            rng.random_range(1..=6),
        );
        let counts: Vec<u64> = (0..e).map(|_| rng.random_range(1..30)).collect();
        let cfg = ModelConfig {
            hidden_size: h,
            latent_dim: m,
            seed,
            ..ModelConfig::default()
        };
        let model = ModelParams::new(cfg, &counts, "example")?;
        let sets: Vec<Vec<usize>> = (0..n).map(|_| vec![rng.random_range(0..e)]).collect();
        let x = MultiHot::from_sets(&sets, e)?;
        let eta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w_kl = 0.3;

        let (_, grads) = backward_with_noise(&model, &x, n, &eta, w_kl)?;
        let mut probe = model.clone();
        let mut worst: f64 = 0.0;
        for (b, (_, g)) in grads.blocks().iter().enumerate() {
            for k in 0..g.data.len() {
                let orig = probe.weights.blocks()[b].1.data[k];
                probe.weights.blocks_mut()[b].1.data[k] = orig + STEP;
                let up = forward_loss(&probe, &x, n, &eta, w_kl)?.total;
                probe.weights.blocks_mut()[b].1.data[k] = orig - STEP;
                let down = forward_loss(&probe, &x, n, &eta, w_kl)?.total;
                probe.weights.blocks_mut()[b].1.data[k] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let analytic = g.data[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        println!(
            "|E|={e:<2} H={h:<2} M={m} n={n}  {} params  max relative error {worst:.2e}",
            model.weights.num_params()
        );
    }
    Ok(())
}
