//! Static shakedown factors of small instances: elastic limit when residual
//! stresses are forbidden, twice that under pulsating load with free
//! residuals, and a two-point instance checked against the brute-force
//! reference.
//!
//! cargo run --release --example shakedown_pulsating

use simresnet::shakedown::{
    brute_force_factor, check_certificate, shakedown_factor, EquilibriumOperator, GaussPointData,
    ShakedownInstance, SolverSettings, StressVec,
};

fn solve(name: &str, inst: &ShakedownInstance) -> simresnet::Result<()> {
    let settings = SolverSettings::for_instance(inst);
    let sol = shakedown_factor(inst, &settings)?;
    let cert = check_certificate(inst, sol.alpha, &sol.residual, settings.tol_feas);
    println!(
        "{name:<10} alpha = {:.5}  elastic limit {:.5}  residual {:?}  certificate {}",
        sol.alpha,
        sol.elastic_limit,
        sol.residual
            .iter()
            .map(|r| r.0.map(|v| (v * 10.0).round() / 10.0))
            .collect::<Vec<_>>(),
        if cert.passed { "ok" } else { "FAILED" }
    );
    if let Ok(reference) = brute_force_factor(inst, 0.01) {
        println!("{:<10} brute force {reference:.5}", "");
    }
    Ok(())
}

fn main() -> simresnet::Result<()> {
    let uniaxial = StressVec::new(100.0, 0.0, 0.0);
    let point = |vertices: Vec<StressVec>, sy: f64| GaussPointData {
        elastic_stress_per_vertex: vertices,
        yield_strength: sy,
    };
    let pinned = ShakedownInstance::new(
        vec![point(vec![uniaxial], 250.0)],
        EquilibriumOperator::pin_points(1, &[0]),
    )?;
    solve("pinned", &pinned)?;
    let pulsating = ShakedownInstance::new(
        vec![point(vec![StressVec::ZERO, uniaxial], 250.0)],
        EquilibriumOperator::unconstrained(),
    )?;
    solve("pulsating", &pulsating)?;
    let mixed = ShakedownInstance::new(
        vec![
            point(
                vec![
                    StressVec::new(20.0, -10.0, 5.0),
                    StressVec::new(120.0, 30.0, -20.0),
                ],
                240.0,
            ),
            point(
                vec![
                    StressVec::new(-50.0, 15.0, 0.0),
                    StressVec::new(30.0, 80.0, 25.0),
                ],
                260.0,
            ),
        ],
        EquilibriumOperator::pin_points(2, &[1]),
    )?;
    solve("two-point", &mixed)?;
    Ok(())
}
