//! BINN residual loss and its minimization.

use std::ops::Range;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BcKind, BoundaryConditions, BoundaryState, LinearSystem};
use crate::influence::InfluenceMatrices;
use crate::kernels::Material;
use crate::mesh::{BoundaryMesh, CollocationNode};
use crate::network::{traction_adjoint, traction_from_jacobian, Evaluation, Network, OutputMode, Seed};
use crate::{BinnError, Result, Vec2};

/// A loss above this multiple of the first loss aborts training.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// If set, the step size decays geometrically from `learning_rate` to
    /// this value over the run. Unset means a constant step.
    pub final_learning_rate: Option<f64>,
    pub seed: u64,
    /// Loss history is recorded every `log_every` iterations and at the end.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            final_learning_rate: None,
            seed: 0,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BinnError::Config(m.into()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if let Some(f) = self.final_learning_rate {
            if !(f > 0.0 && f.is_finite()) {
                return bad("final learning rate must be positive");
            }
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        Ok(())
    }
}

/// Everything the loss needs that does not change during training.
#[derive(Clone, Debug)]
pub struct BinnProblem {
    pub system: LinearSystem,
    pub bcs: BoundaryConditions,
    pub nodes: Vec<CollocationNode>,
    pub material: Material,
}

impl BinnProblem {
    pub fn new(
        matrices: &InfluenceMatrices,
        bcs: &BoundaryConditions,
        nodes: &[CollocationNode],
        material: &Material,
    ) -> Result<Self> {
        if nodes.len() != bcs.n_nodes() {
            return Err(BinnError::Config("node list does not match the boundary conditions".into()));
        }
        Ok(Self {
            system: LinearSystem::new(matrices, bcs)?,
            bcs: bcs.clone(),
            nodes: nodes.to_vec(),
            material: *material,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// One or more networks, each responsible for a subset of the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnModel {
    pub nets: Vec<Network>,
    assignment: Vec<usize>,
    /// Nodes sorted by network (stable), and each network's range in it.
    order: Vec<usize>,
    groups: Vec<Range<usize>>,
}

impl BinnModel {
    /// One network for the whole boundary.
    pub fn single(net: Network, n_nodes: usize) -> Self {
        Self::with_assignment(vec![net], vec![0; n_nodes]).expect("single network")
    }

    /// One network per mesh segment, in segment order.
    pub fn per_segment(nets: Vec<Network>, mesh: &BoundaryMesh) -> Result<Self> {
        if nets.len() != mesh.segment_ids.len() {
            return Err(BinnError::Config(format!(
                "{} networks for {} segments",
                nets.len(),
                mesh.segment_ids.len()
            )));
        }
        let assignment = (0..mesh.n_nodes()).map(|m| mesh.node_segment(m)).collect();
        Self::with_assignment(nets, assignment)
    }

    /// `assignment[m]` is the network that represents node `m`.
    pub fn with_assignment(nets: Vec<Network>, assignment: Vec<usize>) -> Result<Self> {
        if nets.is_empty() || assignment.iter().any(|&k| k >= nets.len()) {
            return Err(BinnError::Config("node assigned to a missing network".into()));
        }
        let mode = nets[0].output_mode();
        if nets.iter().any(|n| n.output_mode() != mode) {
            return Err(BinnError::Config("all networks must share one output mode".into()));
        }
        let mut order: Vec<usize> = (0..assignment.len()).collect();
        order.sort_by_key(|&m| assignment[m]);
        let mut groups = Vec::with_capacity(nets.len());
        let mut start = 0;
        for k in 0..nets.len() {
            let len = assignment.iter().filter(|&&a| a == k).count();
            groups.push(start..start + len);
            start += len;
        }
        Ok(Self {
            nets,
            assignment,
            order,
            groups,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn output_mode(&self) -> OutputMode {
        self.nets[0].output_mode()
    }

    pub fn n_params(&self) -> usize {
        self.nets.iter().map(|n| n.n_params()).sum()
    }

    /// All parameters, network by network.
    pub fn params(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.params().iter().copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut s = 0;
        for net in &mut self.nets {
            let k = net.n_params();
            net.set_params(&p[s..s + k]);
            s += k;
        }
    }

    /// Largest displacement output scale over the networks.
    pub fn reference_scale(&self) -> f64 {
        self.nets
            .iter()
            .flat_map(|n| n.output_scale()[..2].iter().map(|s| s.abs()))
            .fold(0.0, f64::max)
    }

    /// Evaluations in `order`, i.e. grouped by network.
    fn evaluate(&self, nodes: &[CollocationNode]) -> Vec<Evaluation> {
        self.order
            .par_iter()
            .map(|&m| self.nets[self.assignment[m]].evaluate(nodes[m].position))
            .collect()
    }

    /// Displacement and traction the model assigns to every node.
    pub fn boundary_values(&self, problem: &BinnProblem) -> Vec<(Vec2, Vec2)> {
        let evals = self.evaluate(&problem.nodes);
        let mut out = vec![(Vec2::zeros(), Vec2::zeros()); problem.n_nodes()];
        for (ev, &m) in evals.iter().zip(&self.order) {
            out[m] = node_values(self.output_mode(), ev, &problem.nodes[m], &problem.material);
        }
        out
    }
}

fn node_values(mode: OutputMode, ev: &Evaluation, node: &CollocationNode, material: &Material) -> (Vec2, Vec2) {
    let u = Vec2::new(ev.outputs[0], ev.outputs[1]);
    let t = match mode {
        OutputMode::Displacement => traction_from_jacobian(&ev.jacobian, node.normal, material),
        OutputMode::Traction => Vec2::new(ev.outputs[2], ev.outputs[3]),
    };
    (u, t)
}

/// Unknown vector of the rearranged system filled from network values.
fn unknowns(bcs: &BoundaryConditions, values: &[(Vec2, Vec2)]) -> DVector<f64> {
    DVector::from_fn(bcs.n_dof(), |c, _| {
        let (u, t) = values[c / 2];
        match bcs.kinds[c] {
            BcKind::Dirichlet => t[c % 2],
            BcKind::Neumann => u[c % 2],
        }
    })
}

/// Mean squared residual over all nodes. `residual` is `Hhat u - G t` with
/// prescribed entries substituted from the boundary conditions.
pub fn binn_loss(problem: &BinnProblem, model: &BinnModel) -> (f64, DVector<f64>) {
    let x = unknowns(&problem.bcs, &model.boundary_values(problem));
    let r = &problem.system.a * x - &problem.system.b;
    (r.norm_squared() / problem.n_nodes() as f64, r)
}

/// The same loss for an explicit boundary state.
pub fn state_loss(matrices: &InfluenceMatrices, state: &BoundaryState) -> (f64, DVector<f64>) {
    let u = DVector::from_column_slice(&state.u);
    let t = DVector::from_column_slice(&state.t);
    let r = &matrices.hhat * u - &matrices.g * t;
    (r.norm_squared() / state.n_nodes() as f64, r)
}

/// Loss and its exact gradient over [`BinnModel::params`].
pub fn loss_gradient(problem: &BinnProblem, model: &BinnModel) -> (f64, Vec<f64>) {
    let evals = model.evaluate(&problem.nodes);
    let mode = model.output_mode();
    let mut values = vec![(Vec2::zeros(), Vec2::zeros()); problem.n_nodes()];
    for (ev, &m) in evals.iter().zip(&model.order) {
        values[m] = node_values(mode, ev, &problem.nodes[m], &problem.material);
    }
    let x = unknowns(&problem.bcs, &values);
    let r = &problem.system.a * x - &problem.system.b;
    let n = problem.n_nodes() as f64;
    let loss = r.norm_squared() / n;
    let x_bar = problem.system.a.tr_mul(&r) * (2.0 / n);

    let n_out = mode.n_outputs();
    let seeds: Vec<Seed> = model
        .order
        .iter()
        .map(|&m| {
            let mut seed = Seed::zeros(n_out);
            let mut t_bar = Vec2::zeros();
            for d in 0..2 {
                let c = 2 * m + d;
                match problem.bcs.kinds[c] {
                    BcKind::Neumann => seed.outputs[d] += x_bar[c],
                    BcKind::Dirichlet => t_bar[d] = x_bar[c],
                }
            }
            if t_bar != Vec2::zeros() {
                match mode {
                    OutputMode::Displacement => {
                        let g = traction_adjoint(t_bar, problem.nodes[m].normal, &problem.material);
                        seed.jacobian[0] = g[0];
                        seed.jacobian[1] = g[1];
                    }
                    OutputMode::Traction => {
                        seed.outputs[2] += t_bar.x;
                        seed.outputs[3] += t_bar.y;
                    }
                }
            }
            seed
        })
        .collect();

    let mut grad = Vec::with_capacity(model.n_params());
    for (net, range) in model.nets.iter().zip(&model.groups) {
        grad.extend(net.reduce_gradients(&evals[range.clone()], &seeds[range.clone()]));
    }
    (loss, grad)
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(config: &TrainConfig, n_params: usize) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub loss: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: BinnModel,
    pub history: Vec<HistoryEntry>,
    pub state: BoundaryState,
    pub final_loss: f64,
}

/// Minimize [`binn_loss`] with full-batch Adam.
///
/// Adam sees the loss divided by the square of the model's displacement
/// scale, so that its `epsilon` is measured against gradients of order one
/// whatever the physical units. The reported loss is unscaled.
pub fn train(problem: &BinnProblem, mut model: BinnModel, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let s = model.reference_scale();
    let objective_scale = if s > 0.0 { 1.0 / (s * s) } else { 1.0 };
    let mut params = model.params();
    let mut adam = Adam::new(config, params.len());
    let start = Instant::now();
    let mut history = Vec::new();
    let mut initial = f64::NAN;
    for it in 0..config.iterations {
        let (loss, mut grad) = loss_gradient(problem, &model);
        if it == 0 {
            initial = loss;
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !loss.is_finite() || !grad_norm.is_finite() || (initial > 0.0 && loss > DIVERGENCE_FACTOR * initial) {
            return Err(BinnError::Diverged {
                iteration: it,
                loss,
                param_norm: params.iter().map(|p| p * p).sum::<f64>().sqrt(),
                grad_norm,
            });
        }
        if it % config.log_every == 0 {
            history.push(HistoryEntry {
                iteration: it,
                loss,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        for g in &mut grad {
            *g *= objective_scale;
        }
        if let Some(lr_end) = config.final_learning_rate {
            let frac = it as f64 / config.iterations.max(2).saturating_sub(1) as f64;
            adam.learning_rate = config.learning_rate * (lr_end / config.learning_rate).powf(frac);
        }
        adam.update(&mut params, &grad);
        model.set_params(&params);
    }
    let (final_loss, _) = binn_loss(problem, &model);
    history.push(HistoryEntry {
        iteration: config.iterations,
        loss: final_loss,
        wall_time: start.elapsed().as_secs_f64(),
    });
    let state = model_state(problem, &model);
    Ok(TrainOutcome {
        model,
        history,
        state,
        final_loss,
    })
}

/// Boundary state with unknowns taken from the model.
pub fn model_state(problem: &BinnProblem, model: &BinnModel) -> BoundaryState {
    let x = unknowns(&problem.bcs, &model.boundary_values(problem));
    BoundaryState::from_unknowns(&problem.bcs, x.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::assemble;
    use crate::kernels::{stress_from_gradient, traction, Block2};
    use crate::mesh::{build_mesh, circle_loop};
    use crate::network::{Activation, InputMap};
    use crate::quadrature::QuadratureConfig;
    use crate::solver::bem_solve;
    use crate::solver::tests::{patch_bcs, patch_mesh};
    use nalgebra::DMatrix;

    fn material() -> Material {
        Material::plane_strain(2000.0, 0.3).unwrap()
    }

    fn patch_problem() -> (BoundaryMesh, InfluenceMatrices, BinnProblem) {
        let mesh = patch_mesh();
        let mats = assemble(&mesh, &material(), &QuadratureConfig::default()).unwrap();
        let bcs = patch_bcs(&mesh);
        let problem = BinnProblem::new(&mats, &bcs, &mesh.nodes, &material()).unwrap();
        (mesh, mats, problem)
    }

    fn net(mode: OutputMode, seed: u64) -> Network {
        let out = mode.n_outputs();
        Network::init(&[2, 6, 6, out], Activation::Tanh, mode, seed)
            .unwrap()
            .with_input_map(InputMap::from_box(Vec2::zeros(), Vec2::new(1.0, 1.0)))
            .with_output_scale(&vec![1e-3; out])
    }

    #[test]
    fn exact_state_has_negligible_loss() {
        let (mesh, mats, _) = patch_problem();
        let grad = Block2::new(-1.95e-4, 0.0, 0.0, 4.55e-4);
        let sigma = stress_from_gradient(&grad, &material());
        let n = mesh.n_nodes();
        let mut state = BoundaryState {
            u: vec![0.0; 2 * n],
            t: vec![0.0; 2 * n],
            kinds: patch_bcs(&mesh).kinds,
        };
        for node in &mesh.nodes {
            let u = grad * node.position;
            let t = traction(&sigma, node.normal);
            state.u[2 * node.index..2 * node.index + 2].copy_from_slice(u.as_slice());
            state.t[2 * node.index..2 * node.index + 2].copy_from_slice(t.as_slice());
        }
        let (loss, _) = state_loss(&mats, &state);
        assert!(loss <= 1e-12 * 4.55e-4f64.powi(2), "{loss}");
    }

    #[test]
    fn bem_solution_has_zero_loss() {
        let (_, mats, problem) = patch_problem();
        let state = bem_solve(&mats, &problem.bcs).unwrap();
        let (loss, _) = state_loss(&mats, &state);
        assert!(loss <= 1e-20 * 4.55e-4f64.powi(2), "{loss}");
    }

    #[test]
    fn zero_model_zero_data() {
        let (mesh, mats, _) = patch_problem();
        let mut bcs = patch_bcs(&mesh);
        bcs.values.fill(0.0);
        let problem = BinnProblem::new(&mats, &bcs, &mesh.nodes, &material()).unwrap();
        let zero = Network::zeros(&[2, 4, 2], Activation::Tanh, OutputMode::Displacement).unwrap();
        let (loss, _) = binn_loss(&problem, &BinnModel::single(zero, mesh.n_nodes()));
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn matrix_loss_equals_state_loss() {
        let (_, mats, problem) = patch_problem();
        let model = BinnModel::single(net(OutputMode::Displacement, 3), problem.n_nodes());
        let (a, _) = binn_loss(&problem, &model);
        let (b, _) = state_loss(&mats, &model_state(&problem, &model));
        assert!((a - b).abs() <= 1e-12 * b, "{a} {b}");
    }

    #[test]
    fn loss_invariant_under_node_permutation() {
        let (mesh, mats, problem) = patch_problem();
        let model = BinnModel::single(net(OutputMode::Displacement, 4), problem.n_nodes());
        let (loss, _) = binn_loss(&problem, &model);

        let n = mesh.n_nodes();
        let perm: Vec<usize> = (0..n).map(|i| (7 * i + 3) % n).collect();
        let dof = |m: usize, d: usize| 2 * perm[m] + d;
        let permute = |a: &DMatrix<f64>| DMatrix::from_fn(2 * n, 2 * n, |r, c| a[(dof(r / 2, r % 2), dof(c / 2, c % 2))]);
        let pm = InfluenceMatrices {
            hhat: permute(&mats.hhat),
            g: permute(&mats.g),
        };
        let mut nodes: Vec<CollocationNode> = (0..n).map(|m| mesh.nodes[perm[m]].clone()).collect();
        for (i, node) in nodes.iter_mut().enumerate() {
            node.index = i;
        }
        let mut pbcs = problem.bcs.clone();
        for m in 0..n {
            for d in 0..2 {
                pbcs.kinds[2 * m + d] = problem.bcs.kinds[dof(m, d)];
                pbcs.values[2 * m + d] = problem.bcs.values[dof(m, d)];
            }
        }
        let pp = BinnProblem::new(&pm, &pbcs, &nodes, &material()).unwrap();
        let (ploss, _) = binn_loss(&pp, &BinnModel::single(model.nets[0].clone(), n));
        assert!((loss - ploss).abs() <= 1e-13 * loss, "{loss} {ploss}");
    }

    fn fd_check(problem: &BinnProblem, model: &BinnModel) {
        let (_, grad) = loss_gradient(problem, model);
        let p0 = model.params();
        let h = 1e-6;
        let fd: Vec<f64> = (0..p0.len())
            .map(|i| {
                let mut m = model.clone();
                let mut p = p0.clone();
                p[i] += h;
                m.set_params(&p);
                let lp = binn_loss(problem, &m).0;
                p[i] -= 2.0 * h;
                m.set_params(&p);
                let lm = binn_loss(problem, &m).0;
                (lp - lm) / (2.0 * h)
            })
            .collect();
        let scale = fd.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (a, f) in grad.iter().zip(&fd) {
            assert!((a - f).abs() <= 1e-5 * scale, "{a} vs {f} (scale {scale})");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (_, _, problem) = patch_problem();
        fd_check(&problem, &BinnModel::single(net(OutputMode::Displacement, 5), problem.n_nodes()));
        fd_check(&problem, &BinnModel::single(net(OutputMode::Traction, 6), problem.n_nodes()));
    }

    #[test]
    fn per_segment_gradient_matches_finite_differences() {
        let (mesh, _, problem) = patch_problem();
        let nets = (0..4).map(|k| net(OutputMode::Displacement, 10 + k)).collect();
        let model = BinnModel::per_segment(nets, &mesh).unwrap();
        fd_check(&problem, &model);
    }

    /// Three nodes on one straight element with a diagonal synthetic system.
    fn synthetic() -> BinnProblem {
        let nodes: Vec<CollocationNode> = [-0.8, 0.0, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &xi)| CollocationNode {
                index: i,
                element: 0,
                local: i,
                xi,
                position: Vec2::new(xi, 0.0),
                normal: Vec2::new(0.0, -1.0),
                jacobian: 1.0,
            })
            .collect();
        let mats = InfluenceMatrices {
            hhat: DMatrix::identity(6, 6),
            g: DMatrix::identity(6, 6) * 0.5,
        };
        let mut bcs = BoundaryConditions {
            kinds: vec![BcKind::Neumann; 6],
            values: vec![0.0; 6],
            positions: nodes.iter().map(|n| n.position).collect(),
        };
        for c in 0..6 {
            bcs.values[c] = 0.3 + 0.1 * c as f64;
        }
        BinnProblem::new(&mats, &bcs, &nodes, &material()).unwrap()
    }

    #[test]
    fn single_neuron_training_decreases_monotonically() {
        let problem = synthetic();
        let n = Network::init(&[2, 1, 2], Activation::Tanh, OutputMode::Displacement, 1).unwrap();
        let config = TrainConfig {
            iterations: 400,
            log_every: 1,
            ..Default::default()
        };
        let out = train(&problem, BinnModel::single(n, 3), &config).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|h| h.loss).collect();
        for w in losses[50..].windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
        assert!(out.final_loss < losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let (_, _, problem) = patch_problem();
        let config = TrainConfig {
            iterations: 30,
            ..Default::default()
        };
        let a = train(&problem, BinnModel::single(net(OutputMode::Displacement, 8), problem.n_nodes()), &config).unwrap();
        let b = train(&problem, BinnModel::single(net(OutputMode::Displacement, 8), problem.n_nodes()), &config).unwrap();
        assert_eq!(a.model, b.model);
        let la: Vec<f64> = a.history.iter().map(|h| h.loss).collect();
        let lb: Vec<f64> = b.history.iter().map(|h| h.loss).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn divergence_is_reported() {
        let (_, _, problem) = patch_problem();
        let config = TrainConfig {
            iterations: 200,
            learning_rate: 1e3,
            ..Default::default()
        };
        let unbounded = Network::init(&[2, 6, 6, 2], Activation::Softplus, OutputMode::Displacement, 9)
            .unwrap()
            .with_output_scale(&[1e-3; 2]);
        let model = BinnModel::single(unbounded.clone(), problem.n_nodes());
        match train(&problem, model, &config) {
            Err(BinnError::Diverged { iteration, loss, .. }) => {
                assert!(iteration > 0);
                assert!(!(loss <= 1e6 * binn_loss(&problem, &BinnModel::single(unbounded.clone(), problem.n_nodes())).0));
            }
            other => panic!("expected divergence, got {:?}", other.map(|o| o.final_loss)),
        }
        let mut poisoned = unbounded;
        poisoned.params_mut()[0] = f64::NAN;
        match train(&problem, BinnModel::single(poisoned, problem.n_nodes()), &config) {
            Err(BinnError::Diverged { iteration, .. }) => assert_eq!(iteration, 0),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.final_loss)),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { iterations: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { beta2: 1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn trained_model_approaches_bem_on_small_problem() {
        // Dirichlet circle: the network only has to produce tractions.
        let mesh = build_mesh(&[circle_loop("c", Vec2::zeros(), 1.0, 8, false)], -0.8, 0.8).unwrap();
        let m = Material::plane_strain(1.0, 0.3).unwrap();
        let mats = assemble(&mesh, &m, &QuadratureConfig::default()).unwrap();
        let mut bcs = BoundaryConditions::traction_free(&mesh);
        for node in &mesh.nodes {
            bcs.set(node.index, 0, BcKind::Dirichlet, 0.01 * node.position.x);
            bcs.set(node.index, 1, BcKind::Dirichlet, 0.0);
        }
        let reference = bem_solve(&mats, &bcs).unwrap();
        let problem = BinnProblem::new(&mats, &bcs, &mesh.nodes, &m).unwrap();
        let n = Network::init(&[2, 10, 10, 4], Activation::Tanh, OutputMode::Traction, 2)
            .unwrap()
            .with_output_scale(&[0.01; 4]);
        let config = TrainConfig {
            iterations: 3000,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let out = train(&problem, BinnModel::single(n, mesh.n_nodes()), &config).unwrap();
        let tmax = reference.t.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let err = out
            .state
            .t
            .iter()
            .zip(&reference.t)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 2e-2 * tmax, "{err} vs {tmax}, loss {}", out.final_loss);
    }
}
