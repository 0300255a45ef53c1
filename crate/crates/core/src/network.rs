//! Parameter containers for Euler-stepped residual networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// Weight (row-major `N x N`) and bias (`N`) of one layer, i.e. one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerParams {
    pub fn new(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let n = bias.len();
        if n == 0 {
            return Err(Error::Dimension("layer with zero width".into()));
        }
        if weight.len() != n || weight.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!(
                "weight must be {n}x{n} to match bias of length {n}"
            )));
        }
        let flat: Vec<f64> = weight.into_iter().flatten().collect();
        Self::from_flat(flat, bias)
    }

    pub fn from_flat(weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let n = bias.len();
        if n == 0 || weight.len() != n * n {
            return Err(Error::Dimension(format!(
                "flat weight of length {} does not match bias of length {n}",
                weight.len()
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Domain("layer parameters must be finite".into()));
        }
        Ok(LayerParams { weight, bias })
    }

    pub fn zeros(n: usize) -> Self {
        LayerParams {
            weight: vec![0.0; n * n],
            bias: vec![0.0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    /// Row-major weight entries.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    pub fn weight_at(&self, row: usize, col: usize) -> f64 {
        self.weight[row * self.width() + col]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weight
            .chunks(self.width())
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// A residual network of `L` layers of common width `N = d * multiplier`.
///
/// `dt` is kept separate from the depth so tests can decouple them; the
/// constructors default to `dt = 1 / L`, i.e. output time `T = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerParams>,
    dt: f64,
    activation: ActivationKind,
    feature_dim: usize,
}

impl Network {
    pub fn new(
        layers: Vec<LayerParams>,
        dt: f64,
        activation: ActivationKind,
        feature_dim: usize,
    ) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Dimension("network needs at least one layer".into()));
        };
        let width = first.width();
        if layers.iter().any(|l| l.width() != width) {
            return Err(Error::Dimension("all layers must share one width".into()));
        }
        if feature_dim == 0 || width % feature_dim != 0 {
            return Err(Error::Dimension(format!(
                "width {width} is not a positive multiple of feature_dim {feature_dim}"
            )));
        }
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::Domain(format!(
                "time step {dt} must be finite and >= 0"
            )));
        }
        Ok(Network {
            layers,
            dt,
            activation,
            feature_dim,
        })
    }

    /// All-zero network with `dt = 1 / depth`.
    pub fn zeros(
        feature_dim: usize,
        width_multiplier: usize,
        depth: usize,
        activation: ActivationKind,
    ) -> Result<Self> {
        let n = feature_dim * width_multiplier;
        let layers = (0..depth).map(|_| LayerParams::zeros(n)).collect();
        Network::new(layers, 1.0 / depth.max(1) as f64, activation, feature_dim)
    }

    /// Parameters drawn uniformly from `[-0.5, 0.5]`, weights then bias, layer
    /// by layer, from a ChaCha8 stream seeded with `seed`.
    pub fn random(
        feature_dim: usize,
        width_multiplier: usize,
        depth: usize,
        activation: ActivationKind,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(
            feature_dim,
            width_multiplier,
            depth,
            activation,
            0.5,
            &mut rng,
        )
    }

    pub fn random_with<R: Rng + ?Sized>(
        feature_dim: usize,
        width_multiplier: usize,
        depth: usize,
        activation: ActivationKind,
        half_range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Network::zeros(feature_dim, width_multiplier, depth, activation)?;
        for layer in &mut net.layers {
            for w in layer.weight.iter_mut() {
                *w = rng.random_range(-half_range..=half_range);
            }
            for b in layer.bias.iter_mut() {
                *b = rng.random_range(-half_range..=half_range);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
    }

    /// Output time `T = L * dt`.
    pub fn final_time(&self) -> f64 {
        self.dt * self.layers.len() as f64
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn width(&self) -> usize {
        self.layers[0].width()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn width_multiplier(&self) -> usize {
        self.width() / self.feature_dim
    }

    pub fn parameter_count(&self) -> usize {
        let n = self.width();
        self.layers.len() * (n * n + n)
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.layers.iter().all(LayerParams::all_finite)
    }

    /// Lifts a `d`-dimensional feature vector to the network width by block
    /// replication: `[a, b]` with multiplier 2 becomes `[a, a, b, b]`.
    pub fn lift(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim {
            return Err(Error::Dimension(format!(
                "expected {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        Ok(lift_features(features, self.width_multiplier()))
    }

    /// Scalar target broadcast to all `N` output components.
    pub fn broadcast_target(&self, target: f64) -> Vec<f64> {
        vec![target; self.width()]
    }

    /// Each layer repeated `factor` times with `dt / factor`: the same
    /// piecewise-constant parameter path on a finer time grid.
    pub fn refine_layers(&self, factor: usize) -> Result<Network> {
        if factor == 0 {
            return Err(Error::Domain("refinement factor must be >= 1".into()));
        }
        let layers = self
            .layers
            .iter()
            .flat_map(|l| std::iter::repeat_n(l.clone(), factor))
            .collect();
        Ok(Network {
            layers,
            dt: self.dt / factor as f64,
            activation: self.activation,
            feature_dim: self.feature_dim,
        })
    }

    /// Entrywise mean of structurally identical networks.
    pub fn average(nets: &[Network]) -> Result<Network> {
        let Some(first) = nets.first() else {
            return Err(Error::Dimension(
                "cannot average an empty set of networks".into(),
            ));
        };
        if nets.iter().any(|n| {
            n.depth() != first.depth()
                || n.width() != first.width()
                || n.feature_dim != first.feature_dim
                || n.activation != first.activation
                || n.dt != first.dt
        }) {
            return Err(Error::Dimension("networks differ in structure".into()));
        }
        if nets.len() == 1 {
            return Ok(first.clone());
        }
        let count = nets.len() as f64;
        let mut out = first.clone();
        for (k, layer) in out.layers.iter_mut().enumerate() {
            for (j, w) in layer.weight.iter_mut().enumerate() {
                *w = nets.iter().map(|n| n.layers[k].weight[j]).sum::<f64>() / count;
            }
            for (j, b) in layer.bias.iter_mut().enumerate() {
                *b = nets.iter().map(|n| n.layers[k].bias[j]).sum::<f64>() / count;
            }
        }
        Ok(out)
    }
}

pub(crate) fn lift_features(features: &[f64], multiplier: usize) -> Vec<f64> {
    features
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, multiplier))
        .collect()
}
