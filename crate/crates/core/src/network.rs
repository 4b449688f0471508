//! Fully-connected network mapping a boundary point to the unknown
//! boundary fields, with exact input Jacobians and exact parameter
//! gradients.
//!
//! Every evaluation propagates the values together with their two input
//! tangents (forward mode in `x`). The reverse pass runs through that
//! tangent-augmented graph, so a loss that depends on the input Jacobian
//! (tractions derived from displacement gradients) gets its exact
//! second-order parameter gradient at the cost of a few forward passes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{stress_from_gradient, traction, Block2, Material};
use crate::mesh::CollocationNode;
use crate::{BinnError, Result, Vec2};

/// Points per chunk in parallel gradient reduction. Fixed so that the
/// summation tree, and hence the result, is independent of thread count.
const REDUCE_CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Swish,
    #[serde(alias = "sin")]
    Sinusoid,
    Sigmoid,
    Softplus,
    Arctan,
    Relu,
}

impl Activation {
    /// `(sigma(z), sigma'(z), sigma''(z))`
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Activation::Swish => {
                let s = sigmoid(z);
                let ds = s * (1.0 - s);
                (z * s, s + z * ds, ds * (2.0 + z * (1.0 - 2.0 * s)))
            }
            Activation::Sinusoid => (z.sin(), z.cos(), -z.sin()),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                let ds = s * (1.0 - s);
                (s, ds, ds * (1.0 - 2.0 * s))
            }
            Activation::Softplus => {
                let s = sigmoid(z);
                (z.max(0.0) + (-z.abs()).exp().ln_1p(), s, s * (1.0 - s))
            }
            Activation::Arctan => {
                let q = 1.0 / (1.0 + z * z);
                (z.atan(), q, -2.0 * z * q * q)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }

    /// Twice differentiable everywhere.
    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// What the output layer represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// `(u1, u2)`; tractions come from the input Jacobian and Hooke's law.
    #[default]
    Displacement,
    /// `(u1, u2, t1, t2)` read directly.
    Traction,
}

impl OutputMode {
    pub fn n_outputs(self) -> usize {
        match self {
            OutputMode::Displacement => 2,
            OutputMode::Traction => 4,
        }
    }
}

/// Affine map of physical coordinates onto `[-1, 1]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputMap {
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
}

impl Default for InputMap {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            half_extent: [1.0, 1.0],
        }
    }
}

impl InputMap {
    pub fn from_box(lo: Vec2, hi: Vec2) -> Self {
        let c = (lo + hi) * 0.5;
        let h = (hi - lo) * 0.5;
        Self {
            center: [c.x, c.y],
            half_extent: [h.x.max(f64::MIN_POSITIVE), h.y.max(f64::MIN_POSITIVE)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    widths: Vec<usize>,
    activation: Activation,
    output_mode: OutputMode,
    input_map: InputMap,
    /// Physical output = scale * raw network output.
    output_scale: Vec<f64>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Values and input Jacobian at one point, with the intermediate state the
/// reverse pass needs.
#[derive(Clone, Debug)]
pub struct Evaluation {
    /// Physical outputs.
    pub outputs: Vec<f64>,
    /// `jacobian[k] = [d out_k / d x1, d out_k / d x2]` in physical coordinates.
    pub jacobian: Vec<[f64; 2]>,
    /// Input to every layer, with its two tangents.
    layer_in: Vec<Vec<f64>>,
    layer_in_dot: Vec<[Vec<f64>; 2]>,
    /// Pre-activation tangents of hidden layers, and activation derivatives.
    z_dot: Vec<[Vec<f64>; 2]>,
    act_d1: Vec<Vec<f64>>,
    act_d2: Vec<Vec<f64>>,
}

/// Adjoint of a scalar loss with respect to one [`Evaluation`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Seed {
    pub outputs: Vec<f64>,
    pub jacobian: Vec<[f64; 2]>,
}

impl Seed {
    pub fn zeros(n_outputs: usize) -> Self {
        Self {
            outputs: vec![0.0; n_outputs],
            jacobian: vec![[0.0; 2]; n_outputs],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.outputs.iter().all(|v| *v == 0.0) && self.jacobian.iter().all(|j| j[0] == 0.0 && j[1] == 0.0)
    }
}

impl Network {
    /// Network with all parameters zero.
    pub fn zeros(widths: &[usize], activation: Activation, output_mode: OutputMode) -> Result<Self> {
        if widths.len() < 2 || widths[0] != 2 || widths.contains(&0) {
            return Err(BinnError::Config(format!(
                "layer widths must start with 2 inputs and be non-zero, got {widths:?}"
            )));
        }
        if *widths.last().unwrap() != output_mode.n_outputs() {
            return Err(BinnError::Config(format!(
                "{output_mode:?} mode needs {} outputs, widths end in {}",
                output_mode.n_outputs(),
                widths.last().unwrap()
            )));
        }
        if output_mode == OutputMode::Displacement && !activation.is_smooth() {
            return Err(BinnError::Config(format!(
                "{activation:?} is not twice differentiable; tractions derived by differentiation need a smooth activation"
            )));
        }
        let mut offsets = vec![0];
        for l in 0..widths.len() - 1 {
            let last = *offsets.last().unwrap();
            offsets.push(last + widths[l + 1] * widths[l] + widths[l + 1]);
        }
        let n = *offsets.last().unwrap();
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            output_mode,
            input_map: InputMap::default(),
            output_scale: vec![1.0; output_mode.n_outputs()],
            params: vec![0.0; n],
            offsets,
        })
    }

    /// Glorot-uniform weights and zero biases drawn from ChaCha8 seeded with `seed`.
    pub fn init(widths: &[usize], activation: Activation, output_mode: OutputMode, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(widths, activation, output_mode)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.widths[l], net.widths[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let start = net.offsets[l];
            for w in &mut net.params[start..start + fan_in * fan_out] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn with_input_map(mut self, map: InputMap) -> Self {
        self.input_map = map;
        self
    }

    pub fn with_output_scale(mut self, scale: &[f64]) -> Self {
        assert_eq!(scale.len(), self.output_mode.n_outputs());
        self.output_scale = scale.to_vec();
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    pub fn input_map(&self) -> &InputMap {
        &self.input_map
    }

    pub fn output_scale(&self) -> &[f64] {
        &self.output_scale
    }

    /// Number of weight layers.
    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Flat parameters: per layer, weights row-major (out x in), then biases.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) {
        self.params.copy_from_slice(p);
    }

    /// Structured copy of layer `l`: `(weights, biases)`.
    pub fn layer(&self, l: usize) -> (DMatrix<f64>, DVector<f64>) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let s = self.offsets[l];
        let w = DMatrix::from_row_slice(n_out, n_in, &self.params[s..s + n_in * n_out]);
        let b = DVector::from_column_slice(&self.params[s + n_in * n_out..s + n_in * n_out + n_out]);
        (w, b)
    }

    pub fn set_layer(&mut self, l: usize, weights: &DMatrix<f64>, biases: &DVector<f64>) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        assert_eq!(weights.shape(), (n_out, n_in));
        assert_eq!(biases.len(), n_out);
        let s = self.offsets[l];
        for r in 0..n_out {
            for c in 0..n_in {
                self.params[s + r * n_in + c] = weights[(r, c)];
            }
            self.params[s + n_in * n_out + r] = biases[r];
        }
    }

    pub fn forward(&self, x: Vec2) -> Vec<f64> {
        self.evaluate(x).outputs
    }

    pub fn input_jacobian(&self, x: Vec2) -> Vec<[f64; 2]> {
        self.evaluate(x).jacobian
    }

    /// Outputs and exact input Jacobian at `x`.
    pub fn evaluate(&self, x: Vec2) -> Evaluation {
        let map = &self.input_map;
        let mut a = vec![
            (x.x - map.center[0]) / map.half_extent[0],
            (x.y - map.center[1]) / map.half_extent[1],
        ];
        let mut a_dot = [
            vec![1.0 / map.half_extent[0], 0.0],
            vec![0.0, 1.0 / map.half_extent[1]],
        ];
        let nl = self.n_layers();
        let mut ev = Evaluation {
            outputs: Vec::new(),
            jacobian: Vec::new(),
            layer_in: Vec::with_capacity(nl),
            layer_in_dot: Vec::with_capacity(nl),
            z_dot: Vec::with_capacity(nl - 1),
            act_d1: Vec::with_capacity(nl - 1),
            act_d2: Vec::with_capacity(nl - 1),
        };
        for l in 0..nl {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let s = self.offsets[l];
            let w = &self.params[s..s + n_in * n_out];
            let b = &self.params[s + n_in * n_out..s + n_in * n_out + n_out];
            let mut z = b.to_vec();
            let mut z_dot = [vec![0.0; n_out], vec![0.0; n_out]];
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let (mut acc, mut d0, mut d1) = (0.0, 0.0, 0.0);
                for c in 0..n_in {
                    acc += row[c] * a[c];
                    d0 += row[c] * a_dot[0][c];
                    d1 += row[c] * a_dot[1][c];
                }
                z[r] += acc;
                z_dot[0][r] = d0;
                z_dot[1][r] = d1;
            }
            ev.layer_in.push(std::mem::take(&mut a));
            ev.layer_in_dot.push(std::mem::take(&mut a_dot));
            if l + 1 == nl {
                ev.outputs = z.iter().zip(&self.output_scale).map(|(v, s)| v * s).collect();
                ev.jacobian = (0..n_out)
                    .map(|k| {
                        let s = self.output_scale[k];
                        [s * z_dot[0][k], s * z_dot[1][k]]
                    })
                    .collect();
            } else {
                let mut d1 = vec![0.0; n_out];
                let mut d2 = vec![0.0; n_out];
                a = vec![0.0; n_out];
                a_dot = [vec![0.0; n_out], vec![0.0; n_out]];
                for r in 0..n_out {
                    let (f, f1, f2) = self.activation.eval(z[r]);
                    a[r] = f;
                    d1[r] = f1;
                    d2[r] = f2;
                    a_dot[0][r] = f1 * z_dot[0][r];
                    a_dot[1][r] = f1 * z_dot[1][r];
                }
                ev.z_dot.push(z_dot);
                ev.act_d1.push(d1);
                ev.act_d2.push(d2);
            }
        }
        ev
    }

    /// Add the parameter gradient of a loss with adjoint `seed` at `ev` into `grad`.
    pub fn backward(&self, ev: &Evaluation, seed: &Seed, grad: &mut [f64]) {
        let nl = self.n_layers();
        // Adjoints of the current layer's pre-activation and its tangents.
        let mut z_bar: Vec<f64> = seed
            .outputs
            .iter()
            .zip(&self.output_scale)
            .map(|(v, s)| v * s)
            .collect();
        let mut z_dot_bar = [
            seed.jacobian.iter().zip(&self.output_scale).map(|(j, s)| j[0] * s).collect::<Vec<_>>(),
            seed.jacobian.iter().zip(&self.output_scale).map(|(j, s)| j[1] * s).collect::<Vec<_>>(),
        ];
        for l in (0..nl).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let s = self.offsets[l];
            let a = &ev.layer_in[l];
            let a_dot = &ev.layer_in_dot[l];
            {
                let (gw, gb) = grad[s..s + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for r in 0..n_out {
                    let (zb, zd0, zd1) = (z_bar[r], z_dot_bar[0][r], z_dot_bar[1][r]);
                    let row = &mut gw[r * n_in..(r + 1) * n_in];
                    for c in 0..n_in {
                        row[c] += zb * a[c] + zd0 * a_dot[0][c] + zd1 * a_dot[1][c];
                    }
                    gb[r] += zb;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[s..s + n_in * n_out];
            let mut a_bar = vec![0.0; n_in];
            let mut a_dot_bar = [vec![0.0; n_in], vec![0.0; n_in]];
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let (zb, zd0, zd1) = (z_bar[r], z_dot_bar[0][r], z_dot_bar[1][r]);
                for c in 0..n_in {
                    a_bar[c] += row[c] * zb;
                    a_dot_bar[0][c] += row[c] * zd0;
                    a_dot_bar[1][c] += row[c] * zd1;
                }
            }
            // Through a = sigma(z), a_dot = sigma'(z) z_dot of hidden layer l - 1.
            let (d1, d2, zd) = (&ev.act_d1[l - 1], &ev.act_d2[l - 1], &ev.z_dot[l - 1]);
            z_bar = (0..n_in)
                .map(|c| a_bar[c] * d1[c] + d2[c] * (a_dot_bar[0][c] * zd[0][c] + a_dot_bar[1][c] * zd[1][c]))
                .collect();
            z_dot_bar = [
                (0..n_in).map(|c| a_dot_bar[0][c] * d1[c]).collect(),
                (0..n_in).map(|c| a_dot_bar[1][c] * d1[c]).collect(),
            ];
        }
    }

    /// Loss value and exact parameter gradient for a loss of the network
    /// evaluated at `points`. `loss` receives every evaluation and returns
    /// the value plus one adjoint seed per point.
    pub fn loss_gradient<F>(&self, points: &[Vec2], loss: F) -> (f64, Vec<f64>)
    where
        F: FnOnce(&[Evaluation]) -> (f64, Vec<Seed>),
    {
        let evals: Vec<Evaluation> = points.par_iter().map(|&x| self.evaluate(x)).collect();
        let (value, seeds) = loss(&evals);
        let grad = self.reduce_gradients(&evals, &seeds);
        (value, grad)
    }

    /// Sum of `backward` over all points with a fixed reduction tree.
    pub fn reduce_gradients(&self, evals: &[Evaluation], seeds: &[Seed]) -> Vec<f64> {
        assert_eq!(evals.len(), seeds.len());
        let n = self.n_params();
        let partial: Vec<Vec<f64>> = evals
            .par_chunks(REDUCE_CHUNK)
            .zip(seeds.par_chunks(REDUCE_CHUNK))
            .map(|(ec, sc)| {
                let mut g = vec![0.0; n];
                for (e, s) in ec.iter().zip(sc) {
                    if !s.is_zero() {
                        self.backward(e, s, &mut g);
                    }
                }
                g
            })
            .collect();
        let mut grad = vec![0.0; n];
        for g in &partial {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        grad
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, &Checkpoint::from(self))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Checkpoint = serde_json::from_reader(file)?;
        ck.into_network()
    }
}

/// Displacement gradient `grad[(a, b)] = du_a / dx_b` from the first two
/// rows of an input Jacobian.
pub fn displacement_gradient(jacobian: &[[f64; 2]]) -> Block2 {
    Block2::new(jacobian[0][0], jacobian[0][1], jacobian[1][0], jacobian[1][1])
}

/// Traction at a boundary point from the network's displacement gradient.
pub fn traction_from_jacobian(jacobian: &[[f64; 2]], n: Vec2, material: &Material) -> Vec2 {
    traction(&stress_from_gradient(&displacement_gradient(jacobian), material), n)
}

/// Adjoint of [`traction_from_jacobian`]: the gradient seed on
/// `du_a / dx_b` for a traction adjoint `t_bar`.
pub fn traction_adjoint(t_bar: Vec2, n: Vec2, material: &Material) -> [[f64; 2]; 2] {
    let (lambda, mu) = (material.lambda(), material.mu());
    let tn = t_bar.dot(&n);
    let mut g = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { lambda * tn } else { 0.0 };
            g[a][b] = delta + mu * (t_bar[a] * n[b] + t_bar[b] * n[a]);
        }
    }
    g
}

/// Traction the network assigns to a collocation node.
pub fn boundary_traction(net: &Network, node: &CollocationNode, material: &Material) -> Vec2 {
    let ev = net.evaluate(node.position);
    match net.output_mode() {
        OutputMode::Displacement => traction_from_jacobian(&ev.jacobian, node.normal, material),
        OutputMode::Traction => Vec2::new(ev.outputs[2], ev.outputs[3]),
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    widths: Vec<usize>,
    activation: Activation,
    output_mode: OutputMode,
    input_map: InputMap,
    output_scale: Vec<f64>,
    params: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "binn-network";

impl From<&Network> for Checkpoint {
    fn from(net: &Network) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            widths: net.widths.clone(),
            activation: net.activation,
            output_mode: net.output_mode,
            input_map: net.input_map,
            output_scale: net.output_scale.clone(),
            params: net.params.clone(),
        }
    }
}

impl Checkpoint {
    fn into_network(self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT || self.version != 1 {
            return Err(BinnError::Format(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut net = Network::zeros(&self.widths, self.activation, self.output_mode)?
            .with_input_map(self.input_map);
        if self.output_scale.len() != net.output_scale.len() || self.params.len() != net.n_params() {
            return Err(BinnError::Format("checkpoint sizes do not match its widths".into()));
        }
        net.output_scale = self.output_scale;
        net.params = self.params;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_net(seed: u64, act: Activation) -> Network {
        let mut net = Network::init(&[2, 7, 5, 6, 2], act, OutputMode::Displacement, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for p in net.params_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        net.with_input_map(InputMap::from_box(Vec2::new(-0.5, 0.0), Vec2::new(1.5, 0.2)))
            .with_output_scale(&[0.7, 1.3])
    }

    #[test]
    fn parameter_count() {
        let net = Network::init(&[2, 20, 20, 20, 2], Activation::Tanh, OutputMode::Displacement, 0).unwrap();
        assert_eq!(net.n_params(), 942);
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Network::init(&[2, 20, 20, 2], Activation::Swish, OutputMode::Displacement, 42).unwrap();
        let b = Network::init(&[2, 20, 20, 2], Activation::Swish, OutputMode::Displacement, 42).unwrap();
        let c = Network::init(&[2, 20, 20, 2], Activation::Swish, OutputMode::Displacement, 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(&[2, 4, 4, 2], Activation::Tanh, OutputMode::Displacement).unwrap();
        assert_eq!(net.forward(Vec2::new(0.3, -7.0)), vec![0.0, 0.0]);
        let m = Material::plane_strain(10.0, 0.2).unwrap();
        let node = CollocationNode {
            index: 0,
            element: 0,
            local: 0,
            xi: 0.0,
            position: Vec2::new(1.0, 2.0),
            normal: Vec2::new(0.0, 1.0),
            jacobian: 1.0,
        };
        assert_eq!(boundary_traction(&net, &node, &m), Vec2::zeros());
    }

    /// One hidden tanh neuron fed by x1: u1 = tanh(x1), u2 = 0.
    fn single_neuron() -> Network {
        let mut net = Network::zeros(&[2, 1, 2], Activation::Tanh, OutputMode::Displacement).unwrap();
        net.set_layer(0, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), &DVector::zeros(1));
        net.set_layer(1, &DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), &DVector::zeros(2));
        net
    }

    #[test]
    fn single_neuron_forward_and_jacobian() {
        let net = single_neuron();
        for x1 in [-1.3, 0.0, 0.4, 2.0] {
            let ev = net.evaluate(Vec2::new(x1, 0.7));
            assert_abs_diff_eq!(ev.outputs[0], f64::tanh(x1), epsilon = 1e-15);
            assert_eq!(ev.outputs[1], 0.0);
            assert_abs_diff_eq!(ev.jacobian[0][0], 1.0 - x1.tanh().powi(2), epsilon = 1e-15);
            assert_eq!(ev.jacobian[0][1], 0.0);
        }
    }

    #[test]
    fn forward_is_pure() {
        let net = random_net(1, Activation::Swish);
        let x = Vec2::new(0.3, 0.1);
        assert_eq!(net.forward(x), net.forward(x));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for act in [
            Activation::Tanh,
            Activation::Swish,
            Activation::Sinusoid,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Arctan,
        ] {
            let net = random_net(7, act);
            let x = Vec2::new(0.37, 0.12);
            let jac = net.input_jacobian(x);
            let h = 1e-6;
            for d in 0..2 {
                let mut e = Vec2::zeros();
                e[d] = h;
                let (fp, fm) = (net.forward(x + e), net.forward(x - e));
                for k in 0..2 {
                    let fd = (fp[k] - fm[k]) / (2.0 * h);
                    let scale = jac[k][d].abs().max(1e-3);
                    assert!((fd - jac[k][d]).abs() < 1e-6 * scale.max(1.0), "{act:?} k={k} d={d}");
                }
            }
        }
    }

    #[test]
    fn small_sinusoid_net_is_nearly_linear() {
        let mut net = Network::init(&[2, 3, 2], Activation::Sinusoid, OutputMode::Displacement, 9).unwrap();
        let eps = 1e-3;
        for p in net.params_mut() {
            *p *= eps;
        }
        let (w0, _) = net.layer(0);
        let (w1, _) = net.layer(1);
        let product = &w1 * &w0;
        let jac = net.input_jacobian(Vec2::new(0.2, -0.4));
        for k in 0..2 {
            for d in 0..2 {
                assert!((jac[k][d] - product[(k, d)]).abs() < 10.0 * eps.powi(4));
            }
        }
    }

    #[test]
    fn layer_round_trip_is_bit_exact() {
        let net = random_net(3, Activation::Tanh);
        let mut copy = Network::zeros(net.widths(), net.activation(), net.output_mode()).unwrap();
        for l in 0..net.n_layers() {
            let (w, b) = net.layer(l);
            copy.set_layer(l, &w, &b);
        }
        assert_eq!(copy.params(), net.params());
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = random_net(5, Activation::Arctan);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        net.save(&path).unwrap();
        let back = Network::load(&path).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn relu_rejected_for_derived_tractions() {
        assert!(Network::init(&[2, 4, 2], Activation::Relu, OutputMode::Displacement, 0).is_err());
        assert!(Network::init(&[2, 4, 4], Activation::Relu, OutputMode::Traction, 0).is_ok());
        assert!(Network::init(&[2, 4, 3], Activation::Tanh, OutputMode::Displacement, 0).is_err());
        assert!(Network::init(&[3, 4, 2], Activation::Tanh, OutputMode::Displacement, 0).is_err());
    }

    #[test]
    fn activation_derivatives() {
        for act in [
            Activation::Tanh,
            Activation::Swish,
            Activation::Sinusoid,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Arctan,
        ] {
            for z in [-3.0, -0.4, 0.0, 0.9, 4.0] {
                let h = 1e-5;
                let (_, d1, d2) = act.eval(z);
                let fd1 = (act.eval(z + h).0 - act.eval(z - h).0) / (2.0 * h);
                let fd2 = (act.eval(z + h).1 - act.eval(z - h).1) / (2.0 * h);
                assert_abs_diff_eq!(d1, fd1, epsilon = 1e-8);
                assert_abs_diff_eq!(d2, fd2, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn traction_adjoint_is_transpose() {
        let m = Material::plane_strain(7.0, 0.27).unwrap();
        let n = Vec2::new(0.6, -0.8);
        let tb = Vec2::new(0.3, 1.7);
        let g = traction_adjoint(tb, n, &m);
        for a in 0..2 {
            for b in 0..2 {
                let mut jac = vec![[0.0; 2]; 2];
                jac[a][b] = 1.0;
                let t = traction_from_jacobian(&jac, n, &m);
                assert_abs_diff_eq!(g[a][b], t.dot(&tb), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn traction_linear_field() {
        // u = (a x1, 0): t on n = (1, 0) is ((lambda + 2 mu) a, 0).
        let m = Material::plane_strain(2000.0, 0.3).unwrap();
        let a = 1e-3;
        let mut net = Network::zeros(&[2, 1, 2], Activation::Sinusoid, OutputMode::Displacement).unwrap();
        let eps = 1e-4;
        net.set_layer(0, &DMatrix::from_row_slice(1, 2, &[eps, 0.0]), &DVector::zeros(1));
        net.set_layer(1, &DMatrix::from_row_slice(2, 1, &[a / eps, 0.0]), &DVector::zeros(2));
        let node = CollocationNode {
            index: 0,
            element: 0,
            local: 0,
            xi: 0.0,
            position: Vec2::new(0.0, 0.3),
            normal: Vec2::new(1.0, 0.0),
            jacobian: 1.0,
        };
        let t = boundary_traction(&net, &node, &m);
        assert_abs_diff_eq!(t.x, (m.lambda() + 2.0 * m.mu()) * a, epsilon = 1e-12);
        assert_abs_diff_eq!(t.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn traction_linear_in_output_weights() {
        let m = Material::plane_strain(5.0, 0.3).unwrap();
        let node = CollocationNode {
            index: 0,
            element: 0,
            local: 0,
            xi: 0.0,
            position: Vec2::new(0.2, 0.1),
            normal: Vec2::new(0.0, 1.0),
            jacobian: 1.0,
        };
        let base = random_net(2, Activation::Tanh);
        let last = base.n_layers() - 1;
        let (w, b) = base.layer(last);
        let t = |w: &DMatrix<f64>| {
            let mut n = base.clone();
            n.set_layer(last, w, &b);
            boundary_traction(&n, &node, &m)
        };
        let w2 = w.map(|v| 0.3 * v + 0.1);
        let combo = &w * 2.0 - &w2 * 0.5;
        assert_abs_diff_eq!(t(&combo), t(&w) * 2.0 - t(&w2) * 0.5, epsilon = 1e-12);
    }

    /// Central finite-difference gradient of `f` over all parameters.
    fn fd_grad(net: &Network, f: impl Fn(&Network) -> f64) -> Vec<f64> {
        let h = 1e-6;
        (0..net.n_params())
            .map(|i| {
                let mut p = net.clone();
                p.params_mut()[i] += h;
                let mut m = net.clone();
                m.params_mut()[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_grad_close(auto: &[f64], fd: &[f64], rel: f64) {
        let scale = fd.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (a, f) in auto.iter().zip(fd) {
            assert!((a - f).abs() <= rel * scale, "{a} vs {f} (scale {scale})");
        }
    }

    #[test]
    fn gradient_of_squared_output() {
        let net = random_net(11, Activation::Tanh);
        let x = Vec2::new(0.8, 0.05);
        let (_, g) = net.loss_gradient(&[x], |ev| {
            let u = ev[0].outputs[0];
            let mut s = Seed::zeros(2);
            s.outputs[0] = 2.0 * u;
            (u * u, vec![s])
        });
        let fd = fd_grad(&net, |n| n.forward(x)[0].powi(2));
        assert_grad_close(&g, &fd, 1e-6);
    }

    #[test]
    fn gradient_of_squared_traction() {
        let m = Material::plane_strain(3.0, 0.3).unwrap();
        let node = CollocationNode {
            index: 0,
            element: 0,
            local: 0,
            xi: 0.0,
            position: Vec2::new(1.1, 0.15),
            normal: Vec2::new(0.6, 0.8),
            jacobian: 1.0,
        };
        for act in [Activation::Tanh, Activation::Swish] {
            let net = random_net(13, act);
            let (_, g) = net.loss_gradient(&[node.position], |ev| {
                let t = traction_from_jacobian(&ev[0].jacobian, node.normal, &m);
                let adj = traction_adjoint(Vec2::new(2.0 * t.x, 0.0), node.normal, &m);
                let mut s = Seed::zeros(2);
                s.jacobian = vec![adj[0], adj[1]];
                (t.x * t.x, vec![s])
            });
            let fd = fd_grad(&net, |n| boundary_traction(n, &node, &m).x.powi(2));
            assert_grad_close(&g, &fd, 1e-5);
        }
    }

    #[test]
    fn zero_net_symmetric_loss_has_zero_bias_gradient() {
        // L = u1^2 + u2^2 is even under output sign flip; at the zero net its
        // output-bias gradient vanishes.
        let net = Network::zeros(&[2, 5, 2], Activation::Tanh, OutputMode::Displacement).unwrap();
        let pts = [Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.9)];
        let (_, g) = net.loss_gradient(&pts, |ev| {
            let mut v = 0.0;
            let seeds = ev
                .iter()
                .map(|e| {
                    v += e.outputs[0].powi(2) + e.outputs[1].powi(2);
                    let mut s = Seed::zeros(2);
                    s.outputs = vec![2.0 * e.outputs[0], 2.0 * e.outputs[1]];
                    s
                })
                .collect();
            (v, seeds)
        });
        let n = g.len();
        assert_eq!(&g[n - 2..], &[0.0, 0.0]);
    }
}
