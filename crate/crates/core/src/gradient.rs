//! Squared-error loss and its exact parameter gradients.
//!
//! The gradient is the discrete adjoint of the Euler recursion. With
//! `a_k = (1/N) w_k x_k + b_k`, `D_k = diag(sigma'(a_k))` and
//! `lambda_L = 2 (x_L - h)`:
//!
//! ```text
//! g_k          = dt * D_k lambda_{k+1}
//! dloss/db_k   = g_k
//! dloss/dw_k   = (1/N) g_k x_k^T
//! lambda_k     = lambda_{k+1} + (1/N) w_k^T g_k
//! ```
//!
//! [`finite_diff_gradients`] is the independent central-difference oracle.

use crate::error::{Error, Result};
use crate::forward::{forward_output, step_into};
use crate::network::Network;

/// Gradients aligned with `Network::layers`; weights row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGradients {
    pub fn zeros_like(net: &Network) -> Self {
        let n = net.width();
        ParamGradients {
            weights: vec![vec![0.0; n * n]; net.depth()],
            biases: vec![vec![0.0; n]; net.depth()],
        }
    }

    /// All entries in layer order, weights before bias per layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sum of squared component differences.
pub fn loss(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::Dimension(format!(
            "output length {} vs target length {}",
            output.len(),
            target.len()
        )));
    }
    Ok(output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum())
}

pub fn backprop_gradients(net: &Network, x0: &[f64], target: &[f64]) -> Result<ParamGradients> {
    check_dims(net, x0, target)?;
    let mut ws = Workspace::new(net);
    let mut grads = ParamGradients::zeros_like(net);
    ws.gradients(net, x0, target, &mut grads)?;
    Ok(grads)
}

pub fn finite_diff_gradients(
    net: &Network,
    x0: &[f64],
    target: &[f64],
    eps: f64,
) -> Result<ParamGradients> {
    check_dims(net, x0, target)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!(
            "finite-difference step {eps} must be > 0"
        )));
    }
    let eval = |probe: &Network| -> Result<f64> { loss(&forward_output(x0, probe)?, target) };
    let mut probe = net.clone();
    let mut grads = ParamGradients::zeros_like(net);
    for k in 0..net.depth() {
        for j in 0..net.layers()[k].weight().len() {
            let orig = probe.layers()[k].weight()[j];
            probe.layers_mut()[k].weight_mut()[j] = orig + eps;
            let up = eval(&probe)?;
            probe.layers_mut()[k].weight_mut()[j] = orig - eps;
            let down = eval(&probe)?;
            probe.layers_mut()[k].weight_mut()[j] = orig;
            grads.weights[k][j] = (up - down) / (2.0 * eps);
        }
        for j in 0..net.layers()[k].bias().len() {
            let orig = probe.layers()[k].bias()[j];
            probe.layers_mut()[k].bias_mut()[j] = orig + eps;
            let up = eval(&probe)?;
            probe.layers_mut()[k].bias_mut()[j] = orig - eps;
            let down = eval(&probe)?;
            probe.layers_mut()[k].bias_mut()[j] = orig;
            grads.biases[k][j] = (up - down) / (2.0 * eps);
        }
    }
    Ok(grads)
}

fn check_dims(net: &Network, x0: &[f64], target: &[f64]) -> Result<()> {
    let n = net.width();
    if x0.len() != n || target.len() != n {
        return Err(Error::Dimension(format!(
            "input {} / target {} for network width {n}",
            x0.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Reusable buffers for repeated forward/adjoint passes on one network shape.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    n: usize,
    states: Vec<f64>,
    derivs: Vec<f64>,
    lambda: Vec<f64>,
    lambda_next: Vec<f64>,
    g: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(net: &Network) -> Self {
        let n = net.width();
        let depth = net.depth();
        Workspace {
            n,
            states: vec![0.0; (depth + 1) * n],
            derivs: vec![0.0; depth * n],
            lambda: vec![0.0; n],
            lambda_next: vec![0.0; n],
            g: vec![0.0; n],
        }
    }

    /// Forward pass storing states and `sigma'` values. Returns the loss.
    fn forward(&mut self, net: &Network, x0: &[f64], target: &[f64]) -> Result<f64> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        self.states[..n].copy_from_slice(x0);
        for (k, layer) in net.layers().iter().enumerate() {
            let (head, tail) = self.states.split_at_mut((k + 1) * n);
            step_into(
                &head[k * n..],
                layer,
                net.dt(),
                net.activation(),
                inv_n,
                &mut tail[..n],
                Some(&mut self.derivs[k * n..(k + 1) * n]),
            );
        }
        let out = &self.states[net.depth() * n..];
        let value = loss(out, target)?;
        if !value.is_finite() {
            return Err(Error::Numeric("forward pass".into()));
        }
        Ok(value)
    }

    /// Writes the exact gradient into `grads`; returns the loss.
    pub(crate) fn gradients(
        &mut self,
        net: &Network,
        x0: &[f64],
        target: &[f64],
        grads: &mut ParamGradients,
    ) -> Result<f64> {
        let value = self.forward(net, x0, target)?;
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let dt = net.dt();
        let depth = net.depth();
        for r in 0..n {
            self.lambda_next[r] = 2.0 * (self.states[depth * n + r] - target[r]);
        }
        for k in (0..depth).rev() {
            let w = net.layers()[k].weight();
            let x = &self.states[k * n..(k + 1) * n];
            let d = &self.derivs[k * n..(k + 1) * n];
            for r in 0..n {
                self.g[r] = dt * d[r] * self.lambda_next[r];
            }
            let gw = &mut grads.weights[k];
            for r in 0..n {
                let gr = self.g[r] * inv_n;
                for c in 0..n {
                    gw[r * n + c] = gr * x[c];
                }
            }
            grads.biases[k].copy_from_slice(&self.g);
            for c in 0..n {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += w[r * n + c] * self.g[r];
                }
                self.lambda[c] = self.lambda_next[c] + inv_n * acc;
            }
            std::mem::swap(&mut self.lambda, &mut self.lambda_next);
        }
        if grads
            .weights
            .iter()
            .chain(&grads.biases)
            .any(|v| v.iter().any(|g| !g.is_finite()))
        {
            return Err(Error::Numeric("backpropagation".into()));
        }
        Ok(value)
    }
}
