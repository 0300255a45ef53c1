//! Reverse-mode gradients of the squared output error against central
//! finite differences.
//!
//! cargo run --example gradient_check

use simresnet::{
    backprop_gradients, finite_diff_gradients, forward_trajectory, loss, ActivationKind, Network,
};

fn main() -> simresnet::Result<()> {
    for (d, depth, act) in [
        (1, 4, ActivationKind::Sigmoid),
        (3, 8, ActivationKind::Sigmoid),
        (2, 4, ActivationKind::ReLU),
    ] {
        let net = Network::random(d, 1, depth, act, 42)?;
        let x0: Vec<f64> = (0..d).map(|i| 0.2 + 0.25 * i as f64).collect();
        let target = vec![0.8; d];
        let out = forward_trajectory(&x0, &net)?;
        let exact = backprop_gradients(&net, &x0, &target)?.flatten();
        let approx = finite_diff_gradients(&net, &x0, &target, 1e-6)?.flatten();
        let worst = exact
            .iter()
            .zip(&approx)
            .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6))
            .fold(0.0, f64::max);
        println!(
            "d = {d}, L = {depth}, {act}: loss {:.4e}, {} parameters, max relative error {worst:.2e}",
            loss(out.output(), &target)?,
            exact.len()
        );
    }
    Ok(())
}
