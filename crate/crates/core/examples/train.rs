//! Train the sequence VAE on synthetic data and save a checkpoint.
//!
//!     cargo run --release --example train -- [epochs] [checkpoint.json]

use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::neural::{train_with, Checkpoint, ModelConfig};

fn main() -> seqlens::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = args
        .next()
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("seqlens-checkpoint.json"));

    let data = generate_synthetic(&SyntheticConfig {
        n_sequences: 400,
        ..SyntheticConfig::default()
    })?;
    let config = ModelConfig {
        hidden_size: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    let (model, log) = train_with(&data.dataset, &config, |e| {
        println!(
            "epoch {:>3}  loss {:.4}  L_r {:.4}  L_kl {:.4}  w_kl {:.3}",
            e.epoch, e.loss, e.reconstruction, e.kl, e.w_kl
        );
    })?;
    let ckpt = Checkpoint::new(&model, &data.dataset.vocabulary, &log)?;
    ckpt.save(&out)?;
    // the saved file restores the same parameters
    let restored = Checkpoint::load(&out)?.to_model()?;
    assert_eq!(restored.weights, model.weights);
    println!("saved {}", out.display());
    Ok(())
}
