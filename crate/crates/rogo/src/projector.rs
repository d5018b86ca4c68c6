//! Gradient-modification rules and the per-task training loop: orthogonal
//! projection off the frozen space, the restricted variant that re-admits the
//! relaxing space under scale-matrix control, scale regularization, scale
//! expansion across search rounds, end-of-task consolidation, frozen-space
//! update, and the expansion-style per-task parameter store.

use crate::bench::TaskData;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, ToleranceConfig};
use crate::network::Mlp;
use crate::relax::{gradient_rep_space, search_relaxing_space, RelaxConfig, SearchReport};
use crate::rng::substream;
use crate::subspace::{complement, extend, extract_representation_space, Subspace};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Unconstrained SGD.
    Plain,
    /// Gradients projected off the frozen space.
    Gpm,
    /// Restricted projection with an in-place consolidated relaxing space.
    Rogo,
    /// Restricted projection with per-task storage of the relaxing space and
    /// scale matrix for inference-time substitution.
    RogoExp,
}

impl Method {
    pub fn uses_relaxing(self) -> bool {
        matches!(self, Method::Rogo | Method::RogoExp)
    }

    pub fn uses_frozen(self) -> bool {
        self != Method::Plain
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Method::Plain),
            "gpm" => Ok(Method::Gpm),
            "rogo" => Ok(Method::Rogo),
            "rogo_exp" => Ok(Method::RogoExp),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected plain|gpm|rogo|rogo_exp)"
            ))),
        }
    }
}

/// Per-layer continual-learning memory: frozen space `U`, relaxing space
/// `V ⊆ U`, the cached complement `U \ V`, and the scale matrix `S`
/// (side = dim V, initialized to identity on expansion).
#[derive(Debug, Clone)]
pub struct LayerTaskState {
    pub frozen: Subspace,
    pub relaxing: Subspace,
    pub complement: Subspace,
    pub scale: Matrix,
    pub beta: f64,
}

impl LayerTaskState {
    pub fn new(ambient: usize, beta: f64) -> Self {
        LayerTaskState {
            frozen: Subspace::empty(ambient),
            relaxing: Subspace::empty(ambient),
            complement: Subspace::empty(ambient),
            scale: Matrix::zeros(0, 0),
            beta,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frozen.ambient_dim()
    }

    /// Install a grown relaxing space coming out of a search: expands the
    /// scale matrix by the added dimensions and refreshes the complement.
    pub fn install_relaxing(&mut self, v: Subspace, tol: &ToleranceConfig) -> Result<()> {
        if v.dim() < self.relaxing.dim() {
            return Err(Error::InvalidInput(
                "relaxing space cannot shrink within a task".into(),
            ));
        }
        let added = v.dim() - self.relaxing.dim();
        self.relaxing = v;
        expand_scale(self, added);
        self.complement = complement(&self.frozen, &self.relaxing, tol)?;
        Ok(())
    }

    /// Drop the per-task relaxing machinery, keeping only the frozen space.
    pub fn reset_for_next_task(&mut self) {
        self.relaxing = Subspace::empty(self.ambient_dim());
        self.scale = Matrix::zeros(0, 0);
        self.complement = self.frozen.clone();
    }

    /// Checks the state's structural invariants; used by tests and the
    /// verification suites.
    pub fn validate_invariants(&self, tol: &ToleranceConfig) -> Result<()> {
        let contain = self.frozen.containment_residual(&self.relaxing)?;
        if contain > tol.orthonorm_tol {
            return Err(Error::InvalidInput(format!(
                "relaxing space leaves the frozen space (residual {contain:.3e})"
            )));
        }
        if self.relaxing.dim() > 0 && self.complement.dim() > 0 {
            let cross = self.complement.basis().mul_at_b(self.relaxing.basis());
            if cross.max_abs() >= 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "complement is not orthogonal to the relaxing space ({:.3e})",
                    cross.max_abs()
                )));
            }
        }
        if self.scale.rows() != self.relaxing.dim() || self.scale.cols() != self.relaxing.dim() {
            return Err(Error::ShapeMismatch(format!(
                "scale matrix {}x{} for a {}-dimensional relaxing space",
                self.scale.rows(),
                self.scale.cols(),
                self.relaxing.dim()
            )));
        }
        Ok(())
    }
}

/// Fresh per-layer states for a network (empty frozen spaces).
pub fn init_states(net: &Mlp, beta: f64, beta_per_layer: Option<&[f64]>) -> Result<Vec<LayerTaskState>> {
    if let Some(per) = beta_per_layer {
        if per.len() != net.n_layers() {
            return Err(Error::Config(format!(
                "{} per-layer beta values for {} layers",
                per.len(),
                net.n_layers()
            )));
        }
    }
    Ok((0..net.n_layers())
        .map(|l| {
            let beta = beta_per_layer.map_or(beta, |per| per[l]);
            LayerTaskState::new(net.layer_dims()[l], beta)
        })
        .collect())
}

/// Per-task storage of (relaxing space, scale matrix) pairs per layer, for
/// inference-time weight substitution.
#[derive(Debug, Clone, Default)]
pub struct ExpStore {
    tasks: Vec<Vec<(Subspace, Matrix)>>,
}

impl ExpStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn store(&mut self, pairs: Vec<(Subspace, Matrix)>) -> Result<usize> {
        for (l, (v, s)) in pairs.iter().enumerate() {
            if s.rows() != v.dim() || s.cols() != v.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: scale {}x{} for relaxing dimension {}",
                    s.rows(),
                    s.cols(),
                    v.dim()
                )));
            }
        }
        self.tasks.push(pairs);
        Ok(self.tasks.len() - 1)
    }

    pub fn get(&self, task: usize) -> Result<&[(Subspace, Matrix)]> {
        self.tasks
            .get(task)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("no stored parameters for task {task}")))
    }

    /// Extra scalars held for one task: `dim(V)·ambient + dim(V)²` per layer.
    pub fn task_param_count(&self, task: usize) -> Result<usize> {
        Ok(self
            .get(task)?
            .iter()
            .map(|(v, _)| v.dim() * v.ambient_dim() + v.dim() * v.dim())
            .sum())
    }

    /// Cumulative extra-parameter count across all stored tasks.
    pub fn extra_param_count(&self) -> usize {
        (0..self.tasks.len())
            .map(|t| self.task_param_count(t).unwrap())
            .sum()
    }
}

/// Full method configuration for one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    /// Energy threshold for representation (and gradient) spaces.
    pub epsilon: f64,
    pub relax: RelaxConfig,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global scale-regularization weight; per-layer override wins.
    pub beta: f64,
    pub beta_per_layer: Option<Vec<f64>>,
    /// Sample budget for end-of-task representation extraction.
    pub rep_probe: usize,
    /// Record worst-case projection leakage per task (costly; diagnostics).
    pub track_projection_leak: bool,
    pub tol: ToleranceConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            method: Method::Rogo,
            epsilon: 0.95,
            relax: RelaxConfig::default(),
            lr: 0.01,
            epochs: 5,
            batch_size: 32,
            seed: 1,
            beta: 1.0,
            beta_per_layer: None,
            rep_probe: 384,
            track_projection_leak: false,
            tol: ToleranceConfig::default(),
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if self.epochs < 1 || self.batch_size < 1 || self.rep_probe < 1 {
            return Err(Error::Config(
                "epochs, batch_size and rep_probe must be at least 1".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.beta < 0.0 {
            return Err(Error::Config(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        self.relax.validate()?;
        self.tol.validate()?;
        Ok(())
    }
}

// ──────────────────────────────────────────────────────────────────────
// Gradient-modification rules
// ──────────────────────────────────────────────────────────────────────

/// Orthogonal rule: `g − g·B_U·B_Uᵀ`, projecting every row of the weight
/// gradient off the frozen space. The empty frozen space passes `g` through
/// unchanged.
pub fn gpm_project(g: &Matrix, u: &Subspace) -> Result<Matrix> {
    if u.is_empty() {
        return Ok(g.clone());
    }
    if g.cols() != u.ambient_dim() {
        return Err(Error::ShapeMismatch(format!(
            "gradient columns {} vs ambient dimension {}",
            g.cols(),
            u.ambient_dim()
        )));
    }
    let gb = g.mul(u.basis());
    Ok(g.sub(&gb.mul_abt(u.basis())))
}

/// Scaled projection `g·B_V·S·B_Vᵀ`.
pub fn scaled_project(g: &Matrix, v: &Subspace, s: &Matrix) -> Result<Matrix> {
    if s.rows() != v.dim() || s.cols() != v.dim() {
        return Err(Error::ShapeMismatch(format!(
            "scale {}x{} for relaxing dimension {}",
            s.rows(),
            s.cols(),
            v.dim()
        )));
    }
    if v.is_empty() {
        return Ok(Matrix::zeros(g.rows(), g.cols()));
    }
    if g.cols() != v.ambient_dim() {
        return Err(Error::ShapeMismatch(format!(
            "gradient columns {} vs ambient dimension {}",
            g.cols(),
            v.ambient_dim()
        )));
    }
    Ok(g.mul(v.basis()).mul(s).mul_abt(v.basis()))
}

/// Restricted rule: `g − g·B_U·B_Uᵀ + g·B_V·S·B_Vᵀ`. With an empty relaxing
/// space this is exactly the orthogonal rule; with `S = I` it equals the
/// projection off the complement `U \ V`.
pub fn rogo_modify(g: &Matrix, state: &LayerTaskState) -> Result<Matrix> {
    let base = gpm_project(g, &state.frozen)?;
    if state.relaxing.dim() == 0 {
        return Ok(base);
    }
    Ok(base.add(&scaled_project(g, &state.relaxing, &state.scale)?))
}

/// Gradient of the task objective with respect to the scale matrix:
/// `(W·B_V)ᵀ·G·B_V + 2β(S − I)`, where `G` is the loss gradient evaluated at
/// the effective (scale-rewritten) weights and `W` is the live weight matrix.
/// Matches central finite differences of the loss re-evaluated with the
/// consolidation formula applied at the perturbed scale.
pub fn scale_grad(g: &Matrix, w: &Matrix, state: &LayerTaskState) -> Result<Matrix> {
    if state.relaxing.dim() == 0 {
        return Err(Error::InvalidInput(
            "scale gradient undefined for an empty relaxing space".into(),
        ));
    }
    let b = state.relaxing.basis();
    let wb = w.mul(b);
    let gb = g.mul(b);
    let mut out = wb.mul_at_b(&gb);
    let k = state.relaxing.dim();
    for i in 0..k {
        for j in 0..k {
            let reg = 2.0 * state.beta * (state.scale.get(i, j) - f64::from(u8::from(i == j)));
            out.set(i, j, out.get(i, j) + reg);
        }
    }
    Ok(out)
}

/// Scale-regularization part of the task objective: `Σ_l β_l ‖S_l − I‖²_F`
/// over layers with a nonempty relaxing space.
pub fn reg_loss(states: &[LayerTaskState]) -> f64 {
    states
        .iter()
        .filter(|s| s.relaxing.dim() > 0)
        .map(|s| {
            let d = s.scale.sub(&Matrix::identity(s.scale.rows()));
            s.beta * d.frobenius_norm().powi(2)
        })
        .sum()
}

/// Grow the scale matrix block-diagonally by an identity block of size
/// `added` (the relaxing basis gains the matching columns from the search).
pub fn expand_scale(state: &mut LayerTaskState, added: usize) {
    if added == 0 {
        return;
    }
    let old = state.scale.rows();
    let mut s = Matrix::identity(old + added);
    for i in 0..old {
        for j in 0..old {
            s.set(i, j, state.scale.get(i, j));
        }
    }
    state.scale = s;
}

/// In-place weight rewrite used both for the training-time effective weights
/// and for end-of-task consolidation:
/// `W − W·B_V·B_Vᵀ + W·B_V·S·B_Vᵀ`.
fn scaled_rewrite(w: &Matrix, v: &Subspace, s: &Matrix) -> Matrix {
    let wb = w.mul(v.basis());
    let first = wb.mul_abt(v.basis());
    let second = wb.mul(s).mul_abt(v.basis());
    w.sub(&first).add(&second)
}

/// Weights the forward pass sees while a relaxing space is active. Layers
/// with an empty relaxing space use the live weights verbatim.
pub fn effective_weights(net: &Mlp, states: &[LayerTaskState]) -> Vec<Matrix> {
    net.weights()
        .iter()
        .zip(states.iter())
        .map(|(w, st)| {
            if st.relaxing.dim() == 0 {
                w.clone()
            } else {
                scaled_rewrite(w, &st.relaxing, &st.scale)
            }
        })
        .collect()
}

/// End-of-task consolidation: rewrites the live weights inside each layer's
/// relaxing space with its scale matrix; the scale is then discarded, so no
/// per-task memory survives beyond the frozen spaces.
pub fn consolidate(net: &mut Mlp, states: &[LayerTaskState]) -> Result<()> {
    let new_weights = effective_weights(net, states);
    net.set_weights(new_weights)
}

/// Inference weights for a stored task under the expansion variant:
/// `W − Proj_{V_t}(W) + Proj^{S_t}_{V_t}(W)` per layer, computed without
/// mutating the live network. Deliberately grouped differently from
/// [`consolidate`] so the two code paths cross-check each other.
pub fn exp_inference_weights(net: &Mlp, pairs: &[(Subspace, Matrix)]) -> Result<Vec<Matrix>> {
    if pairs.len() != net.n_layers() {
        return Err(Error::ShapeMismatch(format!(
            "{} stored layer pairs for {} layers",
            pairs.len(),
            net.n_layers()
        )));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (w, (v, s)) in net.weights().iter().zip(pairs.iter()) {
        if v.dim() == 0 {
            out.push(w.clone());
            continue;
        }
        let p = v.basis().mul_abt(v.basis());
        let ps = v.basis().mul(s).mul_abt(v.basis());
        let m = Matrix::identity(p.rows()).sub(&p).add(&ps);
        out.push(w.mul(&m));
    }
    Ok(out)
}

// ──────────────────────────────────────────────────────────────────────
// Per-task training loop
// ──────────────────────────────────────────────────────────────────────

/// One search invocation's outcome, for the run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchRecord {
    pub layer: usize,
    pub round: usize,
    pub report: SearchReport,
}

/// Per-task diagnostics emitted by [`train_task`].
#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub task_index: usize,
    pub method: Method,
    pub epochs_run: usize,
    pub search_rounds_run: usize,
    /// Relaxing-space dimension per layer at the end of the task.
    pub relax_dims: Vec<usize>,
    pub frozen_dims_start: Vec<usize>,
    pub frozen_dims_end: Vec<usize>,
    /// dim(V) / dim(U) per layer against the task-start frozen space
    /// (zero when the frozen space was empty).
    pub relax_ratio: Vec<f64>,
    pub searches: Vec<SearchRecord>,
    pub final_epoch_loss: f64,
    pub final_reg_loss: f64,
    /// Worst `|g'·B_U|` entry seen across projected steps (orthogonal rule).
    pub max_frozen_leak: f64,
    /// Worst `|g'·B_comp|` entry seen across projected steps (restricted rule).
    pub max_complement_leak: f64,
    /// Cumulative stored-parameter count (expansion variant only).
    pub extra_params_cumulative: Option<usize>,
    pub wall_secs: f64,
}

/// Trains one task: projected fine-tuning interleaved with relaxing-space
/// searches, then consolidation (or per-task storage), then the frozen-space
/// update from post-training activations.
pub fn train_task(
    net: &mut Mlp,
    task: &TaskData,
    states: &mut [LayerTaskState],
    mut exp: Option<&mut ExpStore>,
    cfg: &MethodConfig,
    task_index: usize,
) -> Result<TaskReport> {
    cfg.validate()?;
    if states.len() != net.n_layers() {
        return Err(Error::ShapeMismatch(format!(
            "{} states for {} layers",
            states.len(),
            net.n_layers()
        )));
    }
    let started = Instant::now();
    let n = task.train.len();
    if n == 0 {
        return Err(Error::InvalidInput(format!("task {task_index}: empty training set")));
    }
    for st in states.iter_mut() {
        st.reset_for_next_task();
    }

    let mut report = TaskReport {
        task_index,
        method: cfg.method,
        epochs_run: 0,
        search_rounds_run: 0,
        relax_dims: vec![0; states.len()],
        frozen_dims_start: states.iter().map(|s| s.frozen.dim()).collect(),
        frozen_dims_end: vec![],
        relax_ratio: vec![0.0; states.len()],
        searches: vec![],
        final_epoch_loss: f64::NAN,
        final_reg_loss: 0.0,
        max_frozen_leak: 0.0,
        max_complement_leak: 0.0,
        extra_params_cumulative: None,
        wall_secs: 0.0,
    };

    let any_frozen = states.iter().any(|s| s.frozen.dim() > 0);
    let search_active = cfg.method.uses_relaxing() && any_frozen;

    // (b) alternate fine-tuning and relaxing-space searches.
    if search_active {
        for round in 1..=cfg.relax.max_search_rounds {
            if report.epochs_run >= cfg.epochs {
                break;
            }
            let chunk = cfg.relax.e_t.min(cfg.epochs - report.epochs_run);
            for _ in 0..chunk {
                run_epoch(net, task, states, cfg, task_index, report.epochs_run, &mut report)?;
                report.epochs_run += 1;
            }
            if report.epochs_run >= cfg.epochs {
                break;
            }
            let added = run_search_round(net, task, states, cfg, task_index, round, &mut report)?;
            report.search_rounds_run = round;
            if added == 0 {
                break;
            }
        }
    }

    // (c) remaining epochs.
    while report.epochs_run < cfg.epochs {
        run_epoch(net, task, states, cfg, task_index, report.epochs_run, &mut report)?;
        report.epochs_run += 1;
    }

    for (l, st) in states.iter().enumerate() {
        report.relax_dims[l] = st.relaxing.dim();
        report.relax_ratio[l] = if st.frozen.dim() > 0 {
            st.relaxing.dim() as f64 / st.frozen.dim() as f64
        } else {
            0.0
        };
    }
    report.final_reg_loss = reg_loss(states);

    // (d) consolidate in place, or store the per-task pairs.
    match cfg.method {
        Method::Rogo => consolidate(net, states)?,
        Method::RogoExp => {
            let exp = exp
                .as_deref_mut()
                .ok_or_else(|| Error::InvalidInput("rogo_exp needs a parameter store".into()))?;
            let pairs: Vec<(Subspace, Matrix)> = states
                .iter()
                .map(|s| (s.relaxing.clone(), s.scale.clone()))
                .collect();
            exp.store(pairs)?;
            report.extra_params_cumulative = Some(exp.extra_param_count());
        }
        Method::Plain | Method::Gpm => {}
    }

    // (e) extend the frozen spaces from post-training activations.
    if cfg.method.uses_frozen() {
        let probe = probe_indices(cfg.seed, "rep-probe", &[task_index as u64], n, cfg.rep_probe);
        let probe_set = task.train.select(&probe);
        let (_, activations) = net.forward(&probe_set.inputs, task.class_range)?;
        for (l, acts) in activations.iter().enumerate() {
            if acts.max_abs() == 0.0 {
                continue;
            }
            let rep = extract_representation_space(acts, cfg.epsilon, &cfg.tol)?;
            states[l].frozen = extend(&states[l].frozen, &rep, &cfg.tol)?;
        }
    }
    for st in states.iter_mut() {
        st.reset_for_next_task();
    }
    report.frozen_dims_end = states.iter().map(|s| s.frozen.dim()).collect();
    report.wall_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

fn probe_indices(seed: u64, stream: &str, indices: &[u64], n: usize, want: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, stream, indices));
    idx.truncate(want.min(n));
    idx
}

fn run_epoch(
    net: &mut Mlp,
    task: &TaskData,
    states: &mut [LayerTaskState],
    cfg: &MethodConfig,
    task_index: usize,
    epoch: usize,
    report: &mut TaskReport,
) -> Result<()> {
    let n = task.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(
        cfg.seed,
        "batch-order",
        &[task_index as u64, epoch as u64],
    ));
    let mut epoch_loss = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        let batch = task.train.inputs.select_cols(chunk);
        let labels: Vec<usize> = chunk.iter().map(|&i| task.train.labels[i]).collect();

        let scaled_active = states.iter().any(|s| s.relaxing.dim() > 0);
        let eff = scaled_active.then(|| effective_weights(net, states));
        let trace = match &eff {
            Some(w) => net.backward_with(w, &batch, &labels, task.class_range)?,
            None => net.backward(&batch, &labels, task.class_range)?,
        };
        epoch_loss += trace.loss;
        batches += 1;

        let mut grads = Vec::with_capacity(net.n_layers());
        for (l, st) in states.iter().enumerate() {
            let g = &trace.mean_grad[l];
            let modified = match cfg.method {
                Method::Plain => g.clone(),
                Method::Gpm => gpm_project(g, &st.frozen)?,
                Method::Rogo | Method::RogoExp => rogo_modify(g, st)?,
            };
            if cfg.track_projection_leak && st.frozen.dim() > 0 {
                match cfg.method {
                    Method::Gpm => {
                        let leak = modified.mul(st.frozen.basis()).max_abs();
                        report.max_frozen_leak = report.max_frozen_leak.max(leak);
                    }
                    Method::Rogo | Method::RogoExp => {
                        if st.complement.dim() > 0 {
                            let leak = modified.mul(st.complement.basis()).max_abs();
                            report.max_complement_leak = report.max_complement_leak.max(leak);
                        }
                    }
                    Method::Plain => {}
                }
            }
            grads.push(modified);
        }

        // Scale gradients are taken against the live (pre-step) weights.
        let mut scale_steps: Vec<Option<Matrix>> = vec![None; net.n_layers()];
        if cfg.method.uses_relaxing() {
            for (l, st) in states.iter().enumerate() {
                if st.relaxing.dim() > 0 {
                    scale_steps[l] = Some(scale_grad(&trace.mean_grad[l], &net.weights()[l], st)?);
                }
            }
        }

        net.sgd_step(&grads, &trace.bias_grad, cfg.lr)?;
        for (st, step) in states.iter_mut().zip(scale_steps.into_iter()) {
            if let Some(sg) = step {
                if !sg.is_finite() {
                    return Err(Error::Numerical {
                        what: format!("non-finite scale gradient in task {task_index}"),
                        iterations: 0,
                    });
                }
                st.scale.add_scaled(-cfg.lr, &sg);
            }
        }
    }
    report.final_epoch_loss = epoch_loss / batches.max(1) as f64 + reg_loss(states);
    Ok(())
}

fn run_search_round(
    net: &Mlp,
    task: &TaskData,
    states: &mut [LayerTaskState],
    cfg: &MethodConfig,
    task_index: usize,
    round: usize,
    report: &mut TaskReport,
) -> Result<usize> {
    let n = task.train.len();
    let probe = probe_indices(
        cfg.seed,
        "grad-probe",
        &[task_index as u64, round as u64],
        n,
        cfg.relax.probe_batch,
    );
    let probe_set = task.train.select(&probe);
    let labels = probe_set.labels.clone();

    let scaled_active = states.iter().any(|s| s.relaxing.dim() > 0);
    let eff = scaled_active.then(|| effective_weights(net, states));
    let trace = match &eff {
        Some(w) => net.backward_with(w, &probe_set.inputs, &labels, task.class_range)?,
        None => net.backward(&probe_set.inputs, &labels, task.class_range)?,
    };

    let n_layers = net.n_layers();
    let mut added_total = 0usize;
    for (l, st) in states.iter_mut().enumerate() {
        if st.frozen.dim() == 0 {
            continue;
        }
        let rg = gradient_rep_space(&trace.per_sample[l], cfg.relax.k_g, cfg.epsilon, &cfg.tol)?;
        if rg.is_empty() {
            continue;
        }
        let zeta = cfg.relax.zeta_for_layer(l, n_layers);
        let (v_new, search_report) =
            search_relaxing_space(&st.frozen, &rg, zeta, &st.relaxing, &cfg.tol)?;
        let added = v_new.dim() - st.relaxing.dim();
        if added > 0 {
            st.install_relaxing(v_new, &cfg.tol)?;
        }
        report.searches.push(SearchRecord {
            layer: l,
            round,
            report: search_report,
        });
        added_total += added;
    }
    Ok(added_total)
}
