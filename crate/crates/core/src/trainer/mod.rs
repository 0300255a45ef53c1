//! Training protocol: normalization, online gradient descent over the
//! measurements of a picture, weight averaging across pictures, depth
//! selection on a validation split, and per-picture limit prediction.
//!
//! All randomness flows from `TrainConfig::seed`: parameter initialization
//! uses the seed's ChaCha8 stream 0, the measurement visiting order stream 1,
//! picture selection stream 2.

mod normalize;
mod sample;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use normalize::{normalize, NormalizationTransform};
pub use sample::{parse_feature_list, select_all, FeatureKind, Group, PictureSample};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::forward::forward_output;
use crate::gradient::{ParamGradients, Workspace};
use crate::metrics::{picture_error, ErrorReport};
use crate::network::{lift_features, Network};

const ORDER_STREAM: u64 = 1;
const SELECTION_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size xi.
    pub learning_rate: f64,
    /// Cap on epochs (full passes over the measurements).
    pub max_iterations: usize,
    pub depth: usize,
    pub activation: ActivationKind,
    pub validation_fraction: f64,
    pub seed: u64,
    pub averaging_count: usize,
    /// `N / d`; 1 is the plain SimResNet.
    pub width_multiplier: usize,
    /// Early stop when the epoch mean loss improved by less than
    /// `plateau_tol` over the last `plateau_window` epochs. 0 disables.
    pub plateau_window: usize,
    pub plateau_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            max_iterations: 10_000,
            depth: 4,
            activation: ActivationKind::Sigmoid,
            validation_fraction: 0.2,
            seed: 0,
            averaging_count: 1,
            width_multiplier: 1,
            plateau_window: 50,
            plateau_tol: 1e-10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(format!("train config: {m}")));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and >= 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if self.depth == 0 {
            return bad("depth must be >= 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if self.averaging_count == 0 {
            return bad("averaging_count must be >= 1");
        }
        if self.width_multiplier == 0 {
            return bad("width_multiplier must be >= 1");
        }
        Ok(())
    }

    pub fn with_depth(&self, depth: usize) -> Self {
        TrainConfig {
            depth,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Plateau,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub network: Network,
    /// Mean per-measurement loss of every epoch, accumulated during the pass.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

/// Lifted input and broadcast target of one measurement.
#[derive(Debug, Clone)]
struct Example {
    input: Vec<f64>,
    target: Vec<f64>,
}

fn examples_for(net: &Network, pictures: &[&PictureSample]) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for p in pictures {
        if p.feature_dim() != net.feature_dim() {
            return Err(Error::Dimension(format!(
                "picture {} has {} features, network expects {}",
                p.picture_id,
                p.feature_dim(),
                net.feature_dim()
            )));
        }
        let target = net.broadcast_target(p.target);
        for row in &p.features {
            out.push(Example {
                input: lift_features(row, net.width_multiplier()),
                target: target.clone(),
            });
        }
    }
    Ok(out)
}

/// Fixed visiting order for `count` measurements.
pub fn measurement_order(count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ORDER_STREAM);
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng);
    order
}

struct EpochRunner {
    ws: Workspace,
    grads: ParamGradients,
}

impl EpochRunner {
    fn new(net: &Network) -> Self {
        EpochRunner {
            ws: Workspace::new(net),
            grads: ParamGradients::zeros_like(net),
        }
    }

    /// One pass of per-measurement updates. Returns the mean pre-update loss,
    /// or `None` once anything becomes non-finite.
    fn run(
        &mut self,
        net: &mut Network,
        examples: &[Example],
        order: &[usize],
        xi: f64,
    ) -> Option<f64> {
        let mut total = 0.0;
        for &i in order {
            let ex = &examples[i];
            let value = self
                .ws
                .gradients(net, &ex.input, &ex.target, &mut self.grads)
                .ok()?;
            total += value;
            if xi != 0.0 {
                for (k, layer) in net.layers_mut().iter_mut().enumerate() {
                    for (w, g) in layer.weight_mut().iter_mut().zip(&self.grads.weights[k]) {
                        *w -= xi * g;
                    }
                    for (b, g) in layer.bias_mut().iter_mut().zip(&self.grads.biases[k]) {
                        *b -= xi * g;
                    }
                }
            }
        }
        let mean = total / order.len().max(1) as f64;
        (mean.is_finite() && net.all_finite()).then_some(mean)
    }
}

/// One epoch of online gradient descent over the measurements of a
/// normalized picture, in the given order.
pub fn sgd_epoch(
    net: &mut Network,
    picture: &PictureSample,
    xi: f64,
    order: &[usize],
) -> Result<f64> {
    let examples = examples_for(net, &[picture])?;
    if let Some(&bad) = order.iter().find(|&&i| i >= examples.len()) {
        return Err(Error::Dimension(format!("order index {bad} out of range")));
    }
    EpochRunner::new(net)
        .run(net, &examples, order, xi)
        .ok_or(Error::Diverged { iteration: 1 })
}

fn train_examples(
    mut net: Network,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let order = measurement_order(examples.len(), cfg.seed);
    let mut runner = EpochRunner::new(&net);
    let mut history = Vec::with_capacity(cfg.max_iterations.min(4096));
    let mut stop_reason = StopReason::MaxIterations;
    for epoch in 0..cfg.max_iterations {
        let mean = runner
            .run(&mut net, examples, &order, cfg.learning_rate)
            .ok_or(Error::Diverged {
                iteration: epoch + 1,
            })?;
        history.push(mean);
        let w = cfg.plateau_window;
        if w > 0 && history.len() > w && history[history.len() - 1 - w] - mean < cfg.plateau_tol {
            stop_reason = StopReason::Plateau;
            break;
        }
    }
    Ok(TrainReport {
        network: net,
        iterations: history.len(),
        loss_history: history,
        stop_reason,
    })
}

/// Seeded initial network for `d` features under `cfg`.
pub fn initial_network(feature_dim: usize, cfg: &TrainConfig) -> Result<Network> {
    Network::random(
        feature_dim,
        cfg.width_multiplier,
        cfg.depth,
        cfg.activation,
        cfg.seed,
    )
}

/// Network of width `d * width_multiplier`, initialized from the config seed.
/// Inputs are lifted by block replication and targets broadcast, so the same
/// training loop applies with `1/N` pre-activation scaling.
pub fn make_wide(
    feature_dim: usize,
    width_multiplier: usize,
    cfg: &TrainConfig,
) -> Result<Network> {
    if width_multiplier == 0 {
        return Err(Error::Domain("width multiplier must be >= 1".into()));
    }
    initial_network(
        feature_dim,
        &TrainConfig {
            width_multiplier,
            ..cfg.clone()
        },
    )
}

/// Trains from the seeded initialization on one normalized picture.
pub fn train(picture: &PictureSample, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let net = initial_network(picture.feature_dim(), cfg)?;
    train_from(net, picture, cfg)
}

/// Like [`train`] but starting from a given network.
pub fn train_from(net: Network, picture: &PictureSample, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let examples = examples_for(&net, &[picture])?;
    train_examples(net, &examples, cfg)
}

/// One network fitted jointly to the measurements of several pictures, each
/// measurement paired with its own picture's target.
pub fn train_pooled(pictures: &[PictureSample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let Some(first) = pictures.first() else {
        return Err(Error::Dimension("no pictures to train on".into()));
    };
    let net = initial_network(first.feature_dim(), cfg)?;
    let refs: Vec<&PictureSample> = pictures.iter().collect();
    let examples = examples_for(&net, &refs)?;
    train_examples(net, &examples, cfg)
}

/// Trains one network per picture from the same initialization and returns
/// the entrywise mean of their parameters.
pub fn train_averaged(pictures: &[PictureSample], cfg: &TrainConfig) -> Result<Network> {
    Ok(train_averaged_reports(pictures, cfg)?.0)
}

/// [`train_averaged`] plus the individual reports.
pub fn train_averaged_reports(
    pictures: &[PictureSample],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<TrainReport>)> {
    cfg.validate()?;
    if pictures.is_empty() {
        return Err(Error::Dimension("no pictures to average over".into()));
    }
    if pictures.len() != cfg.averaging_count {
        return Err(Error::Dimension(format!(
            "{} pictures supplied for averaging_count {}",
            pictures.len(),
            cfg.averaging_count
        )));
    }
    let reports: Vec<TrainReport> = pictures
        .par_iter()
        .map(|p| train(p, cfg))
        .collect::<Result<_>>()?;
    let nets: Vec<Network> = reports.iter().map(|r| r.network.clone()).collect();
    Ok((Network::average(&nets)?, reports))
}

/// Outputs `x_i(T)` for every measurement of a normalized picture.
pub fn picture_outputs(net: &Network, picture: &PictureSample) -> Result<Vec<Vec<f64>>> {
    picture
        .features
        .iter()
        .map(|row| forward_output(&net.lift(row)?, net))
        .collect()
}

/// Per-picture error sums and their aggregate over normalized pictures.
pub fn evaluate(net: &Network, pictures: &[PictureSample]) -> Result<ErrorReport> {
    let per_picture = pictures
        .par_iter()
        .map(|p| {
            let outputs = picture_outputs(net, p)?;
            Ok((p.picture_id.clone(), picture_error(&outputs, p.target)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorReport::new(per_picture)
}

/// Mean absolute per-component deviation from the target, averaged over
/// measurements: `eta_j / (M * N)`.
pub fn mean_measurement_error(net: &Network, picture: &PictureSample) -> Result<f64> {
    let outputs = picture_outputs(net, picture)?;
    let eta = picture_error(&outputs, picture.target)?;
    Ok(eta / (outputs.len() * net.width()) as f64)
}

/// Single limit (MPa) for a micrograph: the mean of all output components
/// over all measurements, mapped back through the target scaling.
pub fn predict_limit(
    net: &Network,
    picture: &PictureSample,
    transform: &NormalizationTransform,
) -> Result<f64> {
    let outputs = picture_outputs(net, picture)?;
    let count = (outputs.len() * net.width()) as f64;
    let mean = outputs.iter().flatten().sum::<f64>() / count;
    Ok(transform.denormalize_target(mean))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthSelection {
    pub depth: usize,
    /// `(depth, validation eta_bar)` per candidate, in candidate order.
    pub scores: Vec<(usize, f64)>,
}

/// Structural stabilization: trains one network per candidate depth on the
/// training pictures and keeps the depth with the smallest mean validation
/// error. Ties go to the smaller depth.
pub fn select_depth(
    train_pictures: &[PictureSample],
    validation_pictures: &[PictureSample],
    candidate_depths: &[usize],
    cfg: &TrainConfig,
) -> Result<DepthSelection> {
    if candidate_depths.is_empty() {
        return Err(Error::Domain("no candidate depths".into()));
    }
    if validation_pictures.is_empty() {
        return Err(Error::Domain("empty validation set".into()));
    }
    if let Some(p) = validation_pictures
        .iter()
        .find(|v| train_pictures.iter().any(|t| t.picture_id == v.picture_id))
    {
        return Err(Error::Domain(format!(
            "picture {} appears in both training and validation sets",
            p.picture_id
        )));
    }
    let scores = candidate_depths
        .par_iter()
        .map(|&depth| {
            let report = train_pooled(train_pictures, &cfg.with_depth(depth))?;
            Ok((
                depth,
                evaluate(&report.network, validation_pictures)?.eta_bar,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthSelection {
        depth: pick_depth(&scores),
        scores,
    })
}

fn pick_depth(scores: &[(usize, f64)]) -> usize {
    scores
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(d, _)| d)
        .expect("non-empty scores")
}

/// Seeded choice of `count` distinct picture indices out of `total`.
pub fn choose_pictures(total: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 || count > total {
        return Err(Error::Domain(format!(
            "cannot choose {count} pictures out of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SELECTION_STREAM);
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut rng);
    idx.truncate(count);
    Ok(idx)
}

/// Seeded split into `(train, validation)` with `round(fraction * P)`
/// validation pictures (at least one when `fraction > 0` and `P >= 2`).
pub fn split_train_validation(
    pictures: &[PictureSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<PictureSample>, Vec<PictureSample>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Domain(format!(
            "validation fraction {fraction} not in [0, 1)"
        )));
    }
    let total = pictures.len();
    let mut n_val = (fraction * total as f64).round() as usize;
    if fraction > 0.0 && total >= 2 {
        n_val = n_val.clamp(1, total - 1);
    }
    if n_val == 0 {
        return Ok((pictures.to_vec(), Vec::new()));
    }
    let val_idx = choose_pictures(total, n_val, seed)?;
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, p) in pictures.iter().enumerate() {
        if val_idx.contains(&i) {
            val.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_trajectory;
    use crate::network::LayerParams;

    fn normalized_picture(id: &str, xs: &[f64], target: f64) -> PictureSample {
        PictureSample {
            picture_id: id.into(),
            group: Group::V,
            channels: vec![FeatureKind::Feret],
            features: xs.iter().map(|&x| vec![x]).collect(),
            target,
        }
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_iterations: 300,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_is_a_fixed_point() {
        let p = normalized_picture("a", &[0.1, 0.2, 0.3], 0.8);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..quick_cfg()
        };
        let report = train(&p, &cfg).unwrap();
        assert_eq!(report.network, initial_network(1, &cfg).unwrap());

        let mut net = initial_network(1, &cfg).unwrap();
        let before = net.clone();
        sgd_epoch(&mut net, &p, 0.0, &[2, 0, 1]).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn single_measurement_epoch_is_one_gradient_step() {
        let net0 =
            Network::new(vec![LayerParams::zeros(1)], 1.0, ActivationKind::Sigmoid, 1).unwrap();
        let p = normalized_picture("a", &[0.0], 0.0);
        let mut net = net0.clone();
        sgd_epoch(&mut net, &p, 0.1, &[0]).unwrap();
        assert!((net.layers()[0].bias()[0] - (-0.025)).abs() < 1e-15);
        assert_eq!(net.layers()[0].weight()[0], 0.0);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let p = normalized_picture("a", &[0.10, 0.15, 0.2, 0.12, 0.18], 0.7);
        let a = train(&p, &quick_cfg()).unwrap();
        let b = train(&p, &quick_cfg()).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_history.last().unwrap() < &a.loss_history[0]);
        assert!(a.iterations <= 300);
        assert_eq!(a.loss_history.len(), a.iterations);
    }

    #[test]
    fn already_fitted_target_plateaus() {
        let cfg = quick_cfg();
        let net = initial_network(1, &cfg).unwrap();
        let out = forward_trajectory(&[0.4], &net).unwrap().output()[0];
        let p = normalized_picture("a", &[0.4], out);
        let report = train(&p, &cfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::Plateau);
        assert_eq!(report.iterations, cfg.plateau_window + 1);
        assert_eq!(report.network, net);
    }

    #[test]
    fn divergence_is_reported() {
        let p = normalized_picture("a", &[0.5, 0.9], 1e200);
        let err = train(&p, &quick_cfg()).unwrap_err();
        assert!(matches!(err, Error::Diverged { iteration: 1 }));
    }

    #[test]
    fn averaging_edge_cases() {
        let p = normalized_picture("a", &[0.1, 0.2], 0.6);
        let cfg = quick_cfg();
        let single = train(&p, &cfg).unwrap().network;
        assert_eq!(
            train_averaged(std::slice::from_ref(&p), &cfg).unwrap(),
            single
        );
        let five = TrainConfig {
            averaging_count: 5,
            ..cfg.clone()
        };
        let copies = vec![p.clone(); 5];
        let avg = train_averaged(&copies, &five).unwrap();
        for (a, b) in avg.layers().iter().zip(single.layers()) {
            for (x, y) in a
                .weight()
                .iter()
                .chain(a.bias())
                .zip(b.weight().iter().chain(b.bias()))
            {
                assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
            }
        }
        assert!(train_averaged(&[], &cfg).is_err());
        assert!(train_averaged(&copies[..2], &five).is_err());
    }

    #[test]
    fn predict_limit_hand_case() {
        // Zero parameters and ReLU give the identity map.
        let net = Network::zeros(1, 1, 2, ActivationKind::ReLU).unwrap();
        let transform = NormalizationTransform {
            channels: vec![FeatureKind::Feret],
            feature_min: vec![0.0],
            feature_max: vec![1.0],
            target_min: 200.0,
            target_max: 400.0,
        };
        let p = normalized_picture("a", &[0.4, 0.6], 0.5);
        assert!((predict_limit(&net, &p, &transform).unwrap() - 300.0).abs() < 1e-12);
        let eta = evaluate(&net, &[p]).unwrap();
        assert!((eta.eta_bar - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wide_networks() {
        let cfg = quick_cfg();
        let plain = make_wide(2, 1, &cfg).unwrap();
        assert_eq!(plain, initial_network(2, &cfg).unwrap());
        let wide = make_wide(2, 3, &cfg).unwrap();
        assert_eq!(wide.width(), 6);
        assert_eq!(
            wide.lift(&[0.1, 0.2]).unwrap(),
            vec![0.1, 0.1, 0.1, 0.2, 0.2, 0.2]
        );
        assert!(make_wide(2, 0, &cfg).is_err());

        let p = PictureSample {
            picture_id: "w".into(),
            group: Group::V,
            channels: vec![FeatureKind::Feret, FeatureKind::Area],
            features: vec![vec![0.1, 0.3], vec![0.2, 0.25]],
            target: 0.6,
        };
        let cfg_wide = TrainConfig {
            width_multiplier: 2,
            ..cfg
        };
        let report = train(&p, &cfg_wide).unwrap();
        assert_eq!(report.network.width(), 4);
        assert!(report.loss_history.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn depth_selection_ties_and_singletons() {
        assert_eq!(pick_depth(&[(8, 0.3), (2, 0.3), (4, 0.5)]), 2);
        assert_eq!(pick_depth(&[(4, 0.1)]), 4);

        let train_set = vec![normalized_picture("t", &[0.1, 0.2, 0.15], 0.5)];
        let val = vec![normalized_picture("v", &[0.12, 0.18], 0.55)];
        let cfg = quick_cfg();
        let sel = select_depth(&train_set, &val, &[3], &cfg).unwrap();
        assert_eq!(sel.depth, 3);
        let sel = select_depth(&train_set, &val, &[2, 4, 8], &cfg).unwrap();
        let best = sel.scores.iter().find(|s| s.0 == sel.depth).unwrap().1;
        assert!(sel.scores.iter().all(|s| best <= s.1));
        assert!(select_depth(&train_set, &train_set, &[2], &cfg).is_err());
        assert!(select_depth(&train_set, &val, &[], &cfg).is_err());
    }

    #[test]
    fn splits_and_choices_are_seeded() {
        let pics: Vec<_> = (0..10)
            .map(|i| normalized_picture(&format!("p{i}"), &[0.1], 0.5))
            .collect();
        let (t, v) = split_train_validation(&pics, 0.2, 3).unwrap();
        assert_eq!((t.len(), v.len()), (8, 2));
        assert_eq!(split_train_validation(&pics, 0.2, 3).unwrap().1, v);
        assert_eq!(
            choose_pictures(10, 5, 1).unwrap(),
            choose_pictures(10, 5, 1).unwrap()
        );
        assert!(choose_pictures(3, 5, 1).is_err());
    }
}
