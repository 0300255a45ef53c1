//! Explicit Euler forward map.

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{LayerParams, Network};

/// States `x(t_0) .. x(t_L)`; `states[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn output(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn input(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// `state + dt * sigma((1/width) * weight * state + bias)`.
pub fn forward_step(
    state: &[f64],
    layer: &LayerParams,
    dt: f64,
    kind: ActivationKind,
    width: usize,
) -> Result<Vec<f64>> {
    let n = layer.width();
    if state.len() != n {
        return Err(Error::Dimension(format!(
            "state of length {} fed to layer of width {n}",
            state.len()
        )));
    }
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("time step {dt} must be >= 0")));
    }
    if width == 0 {
        return Err(Error::Domain("scaling width must be positive".into()));
    }
    let mut out = vec![0.0; n];
    step_into(state, layer, dt, kind, 1.0 / width as f64, &mut out, None);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forward step".into()));
    }
    Ok(out)
}

pub fn forward_trajectory(x0: &[f64], net: &Network) -> Result<Trajectory> {
    if x0.len() != net.width() {
        return Err(Error::Dimension(format!(
            "input of length {} for network of width {}",
            x0.len(),
            net.width()
        )));
    }
    let mut states = Vec::with_capacity(net.depth() + 1);
    states.push(x0.to_vec());
    for layer in net.layers() {
        let prev = states.last().unwrap();
        let next = forward_step(prev, layer, net.dt(), net.activation(), net.width())?;
        states.push(next);
    }
    Ok(Trajectory { states })
}

/// Network output `x(T)` without recording intermediate states.
pub fn forward_output(x0: &[f64], net: &Network) -> Result<Vec<f64>> {
    if x0.len() != net.width() {
        return Err(Error::Dimension(format!(
            "input of length {} for network of width {}",
            x0.len(),
            net.width()
        )));
    }
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; cur.len()];
    let inv_n = 1.0 / net.width() as f64;
    for layer in net.layers() {
        step_into(
            &cur,
            layer,
            net.dt(),
            net.activation(),
            inv_n,
            &mut next,
            None,
        );
        std::mem::swap(&mut cur, &mut next);
    }
    if cur.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forward pass".into()));
    }
    Ok(cur)
}

/// One Euler step into `out`. When `deriv` is given it receives
/// `sigma'(pre-activation)` per component.
#[inline]
pub(crate) fn step_into(
    state: &[f64],
    layer: &LayerParams,
    dt: f64,
    kind: ActivationKind,
    inv_n: f64,
    out: &mut [f64],
    mut deriv: Option<&mut [f64]>,
) {
    let n = state.len();
    let w = layer.weight();
    let b = layer.bias();
    for r in 0..n {
        let row = &w[r * n..(r + 1) * n];
        let dot: f64 = row.iter().zip(state).map(|(a, x)| a * x).sum();
        let pre = inv_n * dot + b[r];
        out[r] = state[r] + dt * kind.apply(pre);
        if let Some(d) = deriv.as_deref_mut() {
            d[r] = kind.derivative(pre);
        }
    }
}
