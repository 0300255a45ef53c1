//! Predicted fatigue limits of a corpus compared with the true limits
//! through log-normal fits and histograms.
//!
//! cargo run --release --example predict_distribution [pictures]

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::metrics::{fit_lognormal, histogram};
use simresnet::trainer::{
    normalize, predict_limit, select_all, train_pooled, FeatureKind, TrainConfig,
};

fn main() -> simresnet::Result<()> {
    let p: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(30);
    let raw = select_all(
        &gen_synthetic(&GroupSpec::v(), p, 150, 5)?,
        &[FeatureKind::Feret],
    )?;
    let (pictures, transform) = normalize(&raw)?;
    let model = train_pooled(&pictures, &TrainConfig::default())?.network;
    let predicted: Vec<f64> = pictures
        .iter()
        .map(|pic| predict_limit(&model, pic, &transform))
        .collect::<simresnet::Result<_>>()?;
    let truth: Vec<f64> = raw.iter().map(|pic| pic.target).collect();

    let (fp, ft) = (fit_lognormal(&predicted)?, fit_lognormal(&truth)?);
    println!(
        "true      : mu {:.4}  s {:.4}  median {:.1} MPa",
        ft.mu,
        ft.s,
        ft.median()
    );
    println!(
        "predicted : mu {:.4}  s {:.4}  median {:.1} MPa",
        fp.mu,
        fp.s,
        fp.median()
    );
    println!("\npredicted limits:");
    for (l, r, c) in histogram(&predicted, 8)?.bins() {
        println!("  [{l:6.1}, {r:6.1}) {}", "#".repeat(c));
    }
    Ok(())
}
