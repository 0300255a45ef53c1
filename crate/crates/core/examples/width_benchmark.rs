//! Training time of the same data and seed when the network is widened by
//! replicating the input features.
//!
//! cargo run --release --example width_benchmark

use std::time::Instant;

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::trainer::{make_wide, normalize, select_all, train_from, FeatureKind, TrainConfig};

fn main() -> simresnet::Result<()> {
    let raw = select_all(
        &gen_synthetic(&GroupSpec::v(), 10, 150, 3)?,
        &[FeatureKind::Feret],
    )?;
    let (pictures, _) = normalize(&raw)?;
    let picture = &pictures[0];
    println!("multiplier     N   seconds   final loss");
    for m in [1, 2, 4, 8, 16] {
        let cfg = TrainConfig {
            max_iterations: 300,
            plateau_window: 0,
            width_multiplier: m,
            ..TrainConfig::default()
        };
        let net = make_wide(1, m, &cfg)?;
        let start = Instant::now();
        let report = train_from(net, picture, &cfg)?;
        println!(
            "{m:>10} {:>5} {:>9.4}   {:.3e}",
            report.network.width(),
            start.elapsed().as_secs_f64(),
            report.loss_history.last().unwrap()
        );
    }
    Ok(())
}
