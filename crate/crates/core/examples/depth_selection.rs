//! Depth chosen on a validation split of the pictures.
//!
//! cargo run --release --example depth_selection

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::trainer::{
    normalize, select_all, select_depth, split_train_validation, FeatureKind, TrainConfig,
};

fn main() -> simresnet::Result<()> {
    let raw = select_all(
        &gen_synthetic(&GroupSpec::v(), 15, 150, 9)?,
        &[FeatureKind::Feret, FeatureKind::Area],
    )?;
    let (pictures, _) = normalize(&raw)?;
    let cfg = TrainConfig {
        max_iterations: 1500,
        seed: 9,
        ..TrainConfig::default()
    };
    let (train, validation) = split_train_validation(&pictures, cfg.validation_fraction, cfg.seed)?;
    let choice = select_depth(&train, &validation, &[1, 2, 4, 8], &cfg)?;
    println!(
        "{} training / {} validation pictures",
        train.len(),
        validation.len()
    );
    for (depth, score) in &choice.scores {
        println!("  L = {depth}: validation eta_bar {score:.3}");
    }
    println!("selected L = {}", choice.depth);
    Ok(())
}
