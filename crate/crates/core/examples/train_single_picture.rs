//! Trains a one-feature SimResNet on a single synthetic V micrograph and
//! reports the per-measurement error after training.
//!
//! cargo run --release --example train_single_picture [seed]

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::trainer::{
    mean_measurement_error, normalize, select_all, train, FeatureKind, TrainConfig,
};

fn main() -> simresnet::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let raw = gen_synthetic(&GroupSpec::v(), 70, 150, seed)?;
    let (pictures, transform) = normalize(&select_all(&raw, &[FeatureKind::Feret])?)?;
    let picture = &pictures[0];
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let report = train(picture, &cfg)?;
    let history = &report.loss_history;
    for epoch in [1, 10, 100, 1000, history.len()] {
        if epoch <= history.len() {
            println!("epoch {epoch:>5}: mean loss {:.4e}", history[epoch - 1]);
        }
    }
    println!(
        "{} epochs ({:?}); target {:.1} MPa ({:.4} normalized); mean |x(T) - h| = {:.4}",
        report.iterations,
        report.stop_reason,
        raw[0].target,
        transform.normalize_target(raw[0].target),
        mean_measurement_error(&report.network, picture)?
    );
    Ok(())
}
