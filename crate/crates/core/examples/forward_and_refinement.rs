//! Forward pass of a seeded SimResNet and the first-order convergence of its
//! Euler steps when every layer is split into finer time steps.
//!
//! cargo run --example forward_and_refinement

use simresnet::{forward_trajectory, ActivationKind, Network};

fn main() -> simresnet::Result<()> {
    let net = Network::random(2, 1, 4, ActivationKind::Sigmoid, 3)?;
    let x0 = [0.3, 0.7];
    let traj = forward_trajectory(&x0, &net)?;
    println!(
        "N = {}, L = {}, dt = {}",
        net.width(),
        net.depth(),
        net.dt()
    );
    for (k, x) in traj.states.iter().enumerate() {
        println!("  t = {:.2}: {:?}", k as f64 * net.dt(), x);
    }

    let outputs: Vec<Vec<f64>> = [1, 2, 4, 8, 16]
        .iter()
        .map(|&f| {
            Ok(forward_trajectory(&x0, &net.refine_layers(f)?)?
                .output()
                .to_vec())
        })
        .collect::<simresnet::Result<_>>()?;
    println!("\nfactor  x(T)[0]             |x_f - x_2f|   order");
    for w in 0..outputs.len() - 1 {
        let diff = dist(&outputs[w], &outputs[w + 1]);
        let order = if w + 2 < outputs.len() {
            format!(
                "{:.3}",
                (diff / dist(&outputs[w + 1], &outputs[w + 2])).log2()
            )
        } else {
            "-".into()
        };
        println!(
            "{:>6}  {:<18}  {diff:.3e}      {order}",
            1 << w,
            outputs[w][0]
        );
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
