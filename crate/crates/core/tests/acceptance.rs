//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero when any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simresnet::data::{gen_synthetic, GroupSpec};
use simresnet::metrics::{aggregate_errors, fit_lognormal, picture_error};
use simresnet::shakedown::{
    brute_force_factor, check_certificate, shakedown_factor, EquilibriumOperator, GaussPointData,
    ShakedownInstance, ShakedownSolution, SolverSettings, StressVec,
};
use simresnet::trainer::{
    evaluate, mean_measurement_error, normalize, predict_limit, select_all, train, train_pooled,
    FeatureKind, NormalizationTransform, PictureSample, TrainConfig,
};
use simresnet::{
    backprop_gradients, finite_diff_gradients, forward_trajectory, ActivationKind, Network,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    check(
        took < limit,
        format!(
            "{detail}; {:.1} s of {} s",
            took.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut cases) = (0.0f64, 0);
    for d in 1..=3 {
        for depth in [2, 4, 8] {
            for _ in 0..12 {
                let net = Network::random(d, 1, depth, ActivationKind::Sigmoid, rng.random())
                    .map_err(|e| e.to_string())?;
                let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                let target = vec![rng.random_range(0.0..1.0); d];
                let exact = backprop_gradients(&net, &x0, &target)
                    .map_err(|e| e.to_string())?
                    .flatten();
                let fd = finite_diff_gradients(&net, &x0, &target, 1e-6)
                    .map_err(|e| e.to_string())?
                    .flatten();
                for (a, f) in exact.iter().zip(&fd) {
                    worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1e-6));
                }
                cases += 1;
            }
        }
    }
    if worst >= 1e-5 {
        return Err(format!(
            "{cases} configurations, max relative error {worst:.2e} >= 1e-5"
        ));
    }
    within(
        Duration::from_secs(10),
        start,
        format!("{cases} configurations, max relative error {worst:.2e}"),
    )
}

fn euler_order() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cases = 50;
    let mut good = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..cases {
        let d = rng.random_range(1..=3);
        let net = Network::random(d, 1, 4, ActivationKind::Sigmoid, rng.random())
            .map_err(|e| e.to_string())?;
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let out = |f: usize| -> Vec<f64> {
            forward_trajectory(&x0, &net.refine_layers(f).unwrap())
                .unwrap()
                .output()
                .to_vec()
        };
        let (a, b, c) = (out(1), out(2), out(4));
        let dist = |u: &[f64], v: &[f64]| {
            u.iter()
                .zip(v)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let p = (dist(&a, &b) / dist(&b, &c)).log2();
        lo = lo.min(p);
        hi = hi.max(p);
        if (0.8..=1.2).contains(&p) {
            good += 1;
        }
    }
    if good * 10 < cases * 9 {
        return Err(format!(
            "{good}/{cases} orders in [0.8, 1.2] (range {lo:.3}..{hi:.3})"
        ));
    }
    within(
        Duration::from_secs(5),
        start,
        format!("{good}/{cases} orders in [0.8, 1.2] (range {lo:.3}..{hi:.3})"),
    )
}

fn corpus(spec: GroupSpec, seed: u64) -> Vec<PictureSample> {
    select_all(
        &gen_synthetic(&spec, 70, 150, seed).unwrap(),
        &[FeatureKind::Feret],
    )
    .unwrap()
}

fn single_picture_training() -> Outcome {
    let start = Instant::now();
    let (pictures, _) = normalize(&corpus(GroupSpec::v(), 7)).map_err(|e| e.to_string())?;
    let report = train(&pictures[0], &TrainConfig::default()).map_err(|e| e.to_string())?;
    let err = mean_measurement_error(&report.network, &pictures[0]).map_err(|e| e.to_string())?;
    if err > 0.05 {
        return Err(format!("per-measurement error {err:.4} > 0.05"));
    }
    within(
        Duration::from_secs(60),
        start,
        format!(
            "per-measurement error {err:.4} after {} epochs",
            report.iterations
        ),
    )
}

struct GroupModel {
    raw: Vec<PictureSample>,
    normalized: Vec<PictureSample>,
    transform: NormalizationTransform,
    network: Network,
}

fn group_model(spec: GroupSpec, seed: u64) -> GroupModel {
    let raw = corpus(spec, seed);
    let (normalized, transform) = normalize(&raw).unwrap();
    let network = train_pooled(&normalized, &TrainConfig::default())
        .unwrap()
        .network;
    GroupModel {
        raw,
        normalized,
        transform,
        network,
    }
}

fn transfer_mismatch(v: &GroupModel, rn: &GroupModel, start: Instant) -> Outcome {
    let eta = |m: &GroupModel, pics: &[PictureSample]| evaluate(&m.network, pics).unwrap().eta_bar;
    let vv = eta(v, &v.normalized);
    let vr = eta(v, &v.transform.apply(&rn.raw).map_err(|e| e.to_string())?);
    let rr = eta(rn, &rn.normalized);
    let rv = eta(rn, &rn.transform.apply(&v.raw).map_err(|e| e.to_string())?);
    let detail = format!(
        "V model {vv:.2} -> {vr:.2} on RN (x{:.1}), RN model {rr:.2} -> {rv:.2} on V (x{:.1})",
        vr / vv,
        rv / rr
    );
    if vr < 2.0 * vv || rv < 2.0 * rr {
        return Err(detail);
    }
    within(Duration::from_secs(300), start, detail)
}

fn error_statistics() -> Outcome {
    let eta = picture_error(&[vec![0.4], vec![0.6]], 0.5).map_err(|e| e.to_string())?;
    let (mean, theta) = aggregate_errors(&[0.2, 0.4]).map_err(|e| e.to_string())?;
    check(
        (eta - 0.2).abs() <= 1e-12 && (mean - 0.3).abs() <= 1e-12 && (theta - 0.01).abs() <= 1e-12,
        format!("eta {eta}, (eta_bar, theta) = ({mean}, {theta})"),
    )
}

fn speed_claim(dir: &Path) -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_simresnet"))
        .current_dir(dir)
        .args([
            "bench",
            "--multipliers",
            "1,2,4",
            "--epochs",
            "1000",
            "--repeats",
            "3",
            "--seed",
            "5",
            "-o",
            "bench.csv",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let mut reader = csv::Reader::from_path(dir.join("bench.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<(usize, f64, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
            )
        })
        .collect();
    let seconds: Vec<String> = rows
        .iter()
        .map(|(n, s, _)| format!("N={n}: {s:.3} s"))
        .collect();
    let increasing = rows.len() == 3 && rows.windows(2).all(|w| w[0].1 < w[1].1);
    let finite = rows.iter().all(|r| r.2.is_finite());
    if !(increasing && finite && rows[0].0 == 1) {
        return Err(seconds.join(", "));
    }
    within(Duration::from_secs(600), start, seconds.join(", "))
}

fn von_mises(s: [f64; 3]) -> f64 {
    (s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3.0 * s[2] * s[2]).sqrt()
}

/// Constraint re-check written from the definitions, independent of the
/// library's own certificate code.
fn audit(inst: &ShakedownInstance, sol: &ShakedownSolution, tol: f64) -> Result<(), String> {
    let rho: Vec<f64> = sol.residual.iter().flat_map(|r| r.0).collect();
    for (r, row) in inst.equilibrium.rows.iter().enumerate() {
        let v: f64 = row.iter().zip(&rho).map(|(c, x)| c * x).sum();
        if v.abs() > tol {
            return Err(format!("equilibrium row {r}: {v:e}"));
        }
    }
    for (i, p) in inst.points.iter().enumerate() {
        for (k, s) in p.elastic_stress_per_vertex.iter().enumerate() {
            let total: [f64; 3] =
                std::array::from_fn(|c| sol.alpha * s.0[c] + sol.residual[i].0[c]);
            let vm = von_mises(total);
            if vm > p.yield_strength + tol {
                return Err(format!("point {i} vertex {k}: {vm} > {}", p.yield_strength));
            }
        }
    }
    Ok(())
}

fn random_stress(rng: &mut ChaCha8Rng) -> StressVec {
    StressVec::new(
        rng.random_range(-150.0..150.0),
        rng.random_range(-150.0..150.0),
        rng.random_range(-80.0..80.0),
    )
}

fn random_points(rng: &mut ChaCha8Rng, ng: usize, nv: usize) -> Vec<GaussPointData> {
    (0..ng)
        .map(|_| GaussPointData {
            elastic_stress_per_vertex: (0..nv).map(|_| random_stress(rng)).collect(),
            yield_strength: rng.random_range(200.0..300.0),
        })
        .collect()
}

struct Audited {
    count: usize,
    failures: Vec<String>,
}

fn shakedown_analytics(audited: &mut Audited) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let solve =
        |inst: &ShakedownInstance, audited: &mut Audited| -> Result<ShakedownSolution, String> {
            let settings = SolverSettings::for_instance(inst);
            let sol = shakedown_factor(inst, &settings).map_err(|e| e.to_string())?;
            audited.count += 1;
            let report = check_certificate(inst, sol.alpha, &sol.residual, settings.tol_feas);
            if let Err(e) = audit(inst, &sol, settings.tol_feas).and_then(|_| {
                report
                    .passed
                    .then_some(())
                    .ok_or_else(|| format!("{report:?}"))
            }) {
                audited.failures.push(e);
            }
            Ok(sol)
        };

    let mut worst_elastic = 0.0f64;
    for case in 0..12 {
        let ng = 1 + case % 2;
        let nv = 1 + (case / 2) % 2;
        let points = random_points(&mut rng, ng, nv);
        let pins: Vec<usize> = (0..ng).collect();
        let inst =
            ShakedownInstance::new(points, EquilibriumOperator::pin_points(ng, &pins)).unwrap();
        let expected = inst
            .points
            .iter()
            .flat_map(|p| {
                p.elastic_stress_per_vertex
                    .iter()
                    .map(move |s| p.yield_strength / von_mises(s.0))
            })
            .fold(f64::INFINITY, f64::min);
        let sol = solve(&inst, audited)?;
        worst_elastic = worst_elastic.max((sol.alpha - expected).abs() / expected);
    }

    let mut worst_pulsating = 0.0f64;
    for (sigma, sy) in [(100.0, 250.0), (80.0, 300.0), (150.0, 200.0)] {
        let inst = ShakedownInstance::new(
            vec![GaussPointData {
                elastic_stress_per_vertex: vec![StressVec::ZERO, StressVec::new(sigma, 0.0, 0.0)],
                yield_strength: sy,
            }],
            EquilibriumOperator::unconstrained(),
        )
        .unwrap();
        let sol = solve(&inst, audited)?;
        worst_pulsating = worst_pulsating.max((sol.alpha - 2.0 * sy / sigma).abs());
    }

    let grid_step = 0.01;
    let (mut compared, mut worst_gap) = (0, 0.0f64);
    let mut disagreements = Vec::new();
    for case in 0..40 {
        let ng = rng.random_range(1..=2);
        let nv = rng.random_range(1..=2);
        let points = random_points(&mut rng, ng, nv);
        let mut rows = Vec::new();
        for j in 0..3 * ng {
            if rng.random_bool(0.4) {
                let mut row = vec![0.0; 3 * ng];
                row[j] = rng.random_range(0.5..2.0);
                rows.push(row);
            }
        }
        let inst = ShakedownInstance::new(points, EquilibriumOperator::new(rows)).unwrap();
        if inst.is_unbounded() {
            continue;
        }
        let sol = solve(&inst, audited)?;
        let reference = brute_force_factor(&inst, grid_step).map_err(|e| e.to_string())?;
        let tol_bisect = SolverSettings::for_instance(&inst).tol_bisect;
        let gap = (sol.alpha - reference).abs() / sol.alpha;
        worst_gap = worst_gap.max(gap);
        if gap > grid_step + tol_bisect {
            disagreements.push(format!("case {case}: {} vs {reference}", sol.alpha));
        }
        compared += 1;
    }

    let detail = format!(
        "elastic-limit rel err {worst_elastic:.1e}, pulsating abs err {worst_pulsating:.1e}, \
         {compared} oracle comparisons with max rel gap {worst_gap:.1e}"
    );
    if worst_elastic > 1e-3 || worst_pulsating > 1e-2 || compared < 20 || !disagreements.is_empty()
    {
        return Err(format!("{detail}; {}", disagreements.join("; ")));
    }
    within(Duration::from_secs(120), start, detail)
}

fn certificate_audit(audited: &Audited) -> Outcome {
    check(
        audited.failures.is_empty() && audited.count > 0,
        format!(
            "{} solutions audited, {} failures {:?}",
            audited.count,
            audited.failures.len(),
            audited.failures
        ),
    )
}

const MANIFESTS: [&str; 5] = ["v.csv", "m.json", "pred.csv", "sol.json", "bench.csv"];

fn determinism(dir: &Path) -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "gen",
            "--group",
            "V",
            "--pictures",
            "6",
            "--measurements",
            "30",
            "--seed",
            "3",
            "-o",
            "v.csv",
        ],
        vec![
            "gen",
            "--group",
            "RN",
            "--pictures",
            "6",
            "--measurements",
            "30",
            "--seed",
            "4",
            "-o",
            "rn.csv",
        ],
        vec![
            "train",
            "--corpus",
            "v.csv",
            "--iterations",
            "100",
            "--seed",
            "9",
            "-o",
            "m.json",
            "--history",
            "h.csv",
        ],
        vec![
            "train",
            "--corpus",
            "v.csv",
            "--avg",
            "5",
            "--iterations",
            "30",
            "--seed",
            "9",
            "-o",
            "avg.json",
        ],
        vec![
            "train",
            "--corpus",
            "v.csv",
            "--pool",
            "0",
            "--features",
            "feret,area,ar",
            "--iterations",
            "30",
            "-o",
            "pool.json",
        ],
        vec![
            "eval", "--model", "m.json", "--corpus", "rn.csv", "-o", "ev",
        ],
        vec![
            "predict",
            "--model",
            "m.json",
            "--corpus",
            "v.csv",
            "-o",
            "pred.csv",
            "--fits",
            "fits.json",
        ],
        vec![
            "shakedown",
            "--instance",
            "inst.json",
            "-o",
            "sol.json",
            "--oracle",
        ],
        vec![
            "bench",
            "--multipliers",
            "1,2",
            "--epochs",
            "20",
            "--repeats",
            "1",
            "-o",
            "bench.csv",
        ],
    ];
    std::fs::write(
        dir.join("inst.json"),
        r#"{"points":[{"sigma_e":[[10,0,5],[100,20,0]],"sigma_y":250},{"sigma_e":[[0,40,0],[-30,10,20]],"sigma_y":220}],
            "equilibrium":{"rows":[[0,0,1,0,0,0]],"count":1}}"#,
    )
    .map_err(|e| e.to_string())?;
    let artifacts = [
        "v.csv",
        "rn.csv",
        "m.json",
        "h.csv",
        "avg.json",
        "pool.json",
        "ev/eta.csv",
        "ev/summary.json",
        "ev/hist_input_feret.csv",
        "ev/hist_output.csv",
        "pred.csv",
        "fits.json",
        "sol.json",
    ];
    let run_all = || -> Result<Vec<Vec<u8>>, String> {
        for args in &commands {
            let out = Command::new(env!("CARGO_BIN_EXE_simresnet"))
                .current_dir(dir)
                .env_remove("SIMRESNET_SEED")
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "{args:?}: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
        let mut blobs: Vec<Vec<u8>> = artifacts
            .iter()
            .map(|a| std::fs::read(dir.join(a)).map_err(|e| format!("{a}: {e}")))
            .collect::<Result<_, _>>()?;
        let bench = std::fs::read_to_string(dir.join("bench.csv")).map_err(|e| e.to_string())?;
        let untimed: String = bench
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{}\n", f[0], f[1], f[3])
            })
            .collect();
        blobs.push(untimed.into_bytes());
        for m in MANIFESTS {
            let text = std::fs::read_to_string(dir.join(format!("{m}.manifest.json")))
                .map_err(|e| e.to_string())?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| e.to_string())?;
            value.as_object_mut().unwrap().remove("timings");
            if m == "bench.csv" {
                // the bench CSV checksum digests its seconds column
                for out in value["outputs"].as_array_mut().unwrap() {
                    out.as_object_mut().unwrap().remove("sha256");
                }
            }
            blobs.push(value.to_string().into_bytes());
        }
        Ok(blobs)
    };
    let first = run_all()?;
    let second = run_all()?;
    let names: Vec<String> = artifacts
        .iter()
        .map(|a| a.to_string())
        .chain(std::iter::once("bench.csv without seconds".to_string()))
        .chain(
            MANIFESTS
                .iter()
                .map(|m| format!("{m}.manifest.json without timings")),
        )
        .collect();
    let differing: Vec<&String> = names
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (a, b))| a != b)
        .map(|(name, _)| name)
        .collect();
    check(
        differing.is_empty() && first.len() == second.len(),
        format!(
            "{} commands, {} artifacts compared; differing: {differing:?}",
            commands.len(),
            first.len()
        ),
    )
}

fn distribution_comparison(v: &GroupModel) -> Outcome {
    let predicted: Vec<f64> = v
        .normalized
        .iter()
        .map(|p| predict_limit(&v.network, p, &v.transform).unwrap())
        .collect();
    let truth: Vec<f64> = v.raw.iter().map(|p| p.target).collect();
    let fp = fit_lognormal(&predicted).map_err(|e| e.to_string())?;
    let ft = fit_lognormal(&truth).map_err(|e| e.to_string())?;
    let (dmu, ds) = (
        (fp.mu - ft.mu).abs() / ft.mu.abs(),
        (fp.s - ft.s).abs() / ft.s,
    );
    check(
        dmu <= 0.10 && ds <= 0.30,
        format!(
            "P = {}: mu {:.4} vs {:.4} ({:.2}%), s {:.4} vs {:.4} ({:.1}%)",
            predicted.len(),
            fp.mu,
            ft.mu,
            100.0 * dmu,
            fp.s,
            ft.s,
            100.0 * ds
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("[PASS] criterion {n:>2} {name}: {d}"),
            Err(d) => println!("[FAIL] criterion {n:>2} {name}: {d}"),
        }
        results.push((n, name, outcome));
    };

    report(1, "gradient correctness", gradient_correctness());
    report(2, "Euler order", euler_order());
    report(3, "single-picture training", single_picture_training());
    let start = Instant::now();
    let v = group_model(GroupSpec::v(), 21);
    let rn = group_model(GroupSpec::rn(), 22);
    report(4, "transfer mismatch", transfer_mismatch(&v, &rn, start));
    report(5, "error statistics", error_statistics());
    let bench_dir = scratch.path().join("bench");
    std::fs::create_dir_all(&bench_dir).unwrap();
    report(6, "speed claim", speed_claim(&bench_dir));
    let mut audited = Audited {
        count: 0,
        failures: Vec::new(),
    };
    report(7, "shakedown analytics", shakedown_analytics(&mut audited));
    report(8, "certificate audit", certificate_audit(&audited));
    let det_dir = scratch.path().join("determinism");
    std::fs::create_dir_all(&det_dir).unwrap();
    report(9, "determinism", determinism(&det_dir));
    report(10, "distribution comparison", distribution_comparison(&v));

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
