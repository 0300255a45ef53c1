//! Networks fitted to one nodule group and evaluated on the other fit much
//! worse than on their own group.
//!
//! cargo run --release --example transfer_mismatch [pictures]

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::trainer::{evaluate, normalize, select_all, train_pooled, FeatureKind, TrainConfig};

fn main() -> simresnet::Result<()> {
    let p: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let feret = [FeatureKind::Feret];
    let v = select_all(&gen_synthetic(&GroupSpec::v(), p, 150, 1)?, &feret)?;
    let rn = select_all(&gen_synthetic(&GroupSpec::rn(), p, 150, 2)?, &feret)?;
    let (v_norm, v_tf) = normalize(&v)?;
    let (rn_norm, rn_tf) = normalize(&rn)?;
    let cfg = TrainConfig::default();
    let (v_model, rn_model) = rayon::join(
        || train_pooled(&v_norm, &cfg),
        || train_pooled(&rn_norm, &cfg),
    );
    let (v_model, rn_model) = (v_model?.network, rn_model?.network);

    let same_v = evaluate(&v_model, &v_norm)?;
    let cross_v = evaluate(&v_model, &v_tf.apply(&rn)?)?;
    let same_rn = evaluate(&rn_model, &rn_norm)?;
    let cross_rn = evaluate(&rn_model, &rn_tf.apply(&v)?)?;
    println!("P = {p} per group");
    println!(
        "V model : eta_bar on V {:.3} (theta {:.3}), on RN {:.3}; ratio {:.1}",
        same_v.eta_bar,
        same_v.theta,
        cross_v.eta_bar,
        cross_v.eta_bar / same_v.eta_bar
    );
    println!(
        "RN model: eta_bar on RN {:.3} (theta {:.3}), on V {:.3}; ratio {:.1}",
        same_rn.eta_bar,
        same_rn.theta,
        cross_rn.eta_bar,
        cross_rn.eta_bar / same_rn.eta_bar
    );
    Ok(())
}
