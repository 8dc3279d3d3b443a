//! Full-batch Adam training on the weighted loss, and a random-search
//! harness for hyperparameters.
//!
//! The data term compares normalized network outputs with normalized
//! observations. Grid penalties are evaluated on de-normalized J over a
//! collocation grid spanning the dataset's angle and separation ranges.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{audit_surface, AuditTolerances};
use crate::autodiff::Tape;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::{cell_penalties, grid_terms, mse_var, weighted_sum, GridConstants, LossBreakdown, LossWeights};
use crate::mlp::{init_params, Architecture, Domain, ModelParams, Normalization};
use crate::tsr::{CollocationGrid, JSurface, PathToughness, SeparationState, ToughnessMode};

pub const REPORT_VERSION: &str = "tcnn-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of fixed-angle paths.
    pub paths: usize,
    /// Stations per path.
    pub stations: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            paths: 32,
            stations: 64,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 || self.stations < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 paths and 2 stations, got {}x{}",
                self.paths, self.stations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub weights: LossWeights,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Signed so that a negative value is reported as such.
    pub epochs: i64,
    pub grid: GridSpec,
    pub seed: u64,
    pub toughness_mode: ToughnessMode,
    /// Stop once the mean total loss over a window of this many epochs has
    /// improved by less than `min_improvement` on the previous window.
    pub patience: usize,
    pub min_improvement: f64,
    /// Record every k-th epoch in the history.
    pub history_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            architecture: Architecture::default(),
            weights: LossWeights::default(),
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            epochs: 20000,
            grid: GridSpec::default(),
            seed: 0,
            toughness_mode: ToughnessMode::PerPath,
            patience: 500,
            min_improvement: 1e-10,
            history_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.weights.validate()?;
        self.grid.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config(format!("epochs must be >= 1, got {}", self.epochs)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config(format!("adam_eps must be > 0, got {}", self.adam_eps)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if !(self.min_improvement >= 0.0) {
            return Err(Error::Config(format!(
                "min_improvement must be >= 0, got {}",
                self.min_improvement
            )));
        }
        if self.history_every == 0 {
            return Err(Error::Config("history_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One Adam update with bias correction at step `t >= 1`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, t: u64, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Usage(format!(
            "adam shapes differ: {} params, {} grads, {}/{} moments",
            params.len(),
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    if t == 0 {
        return Err(Error::Usage("adam step index starts at 1".into()));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training {
            epoch: t as usize - 1,
            reason: format!("non-finite gradient at parameter {k}"),
        });
    }
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for k in 0..params.len() {
        let g = grads[k];
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub version: String,
    pub seed: u64,
    /// Epochs actually run (early stopping may end before the budget).
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch whose parameters were kept: the lowest total loss seen.
    pub best_epoch: usize,
    pub wall_clock_seconds: f64,
    pub data_points: usize,
    pub final_loss: LossBreakdown,
    pub history: Vec<HistoryEntry>,
    pub config: TrainConfig,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("train report serializes")
    }
}

/// The training loss as a function of model parameters: data, grid and
/// weights fixed, parameters varying.
///
/// Path toughness is re-estimated from the current surface on every
/// evaluation unless frozen, and never receives gradient. Freezing it gives
/// the exact function the gradient belongs to.
#[derive(Debug, Clone)]
pub struct Objective {
    frozen: Option<PathToughness>,
    weights: LossWeights,
    mode: ToughnessMode,
    inputs: Array2<f64>,
    targets: Array2<f64>,
    grid: CollocationGrid,
    grid_inputs: Array2<f64>,
    constants: GridConstants,
    output_scale: [f64; 2],
    output_shift: [f64; 2],
}

impl Objective {
    pub fn new(config: &TrainConfig, data: &Dataset, norm: &Normalization, grid: CollocationGrid) -> Self {
        let points: Vec<SeparationState> = data
            .observations()
            .map(|(phi, s)| SeparationState {
                delta_norm: s.delta_norm,
                phi,
            })
            .collect();
        let targets: Vec<f64> = data
            .observations()
            .flat_map(|(_, s)| {
                norm.normalize_output(crate::tsr::JPair {
                    j_n: s.j_n,
                    j_t: s.j_t,
                })
            })
            .collect();
        let grid_points: Vec<SeparationState> = grid.points().collect();
        Self {
            frozen: None,
            weights: config.weights,
            mode: config.toughness_mode,
            inputs: norm.input_matrix(&points),
            targets: Array2::from_shape_vec((points.len(), 2), targets).expect("two columns"),
            grid_inputs: norm.input_matrix(&grid_points),
            constants: GridConstants::new(&grid),
            grid,
            output_scale: norm.output_scale,
            output_shift: norm.output_shift,
        }
    }

    fn denormalize(&self, y: &Array2<f64>) -> Result<JSurface> {
        let (m, z) = (self.grid.m(), self.grid.z());
        let col = |k: usize| {
            y.column(k)
                .mapv(|v| v * self.output_scale[k] + self.output_shift[k])
                .into_shape_with_order((m, z))
                .expect("grid shape")
        };
        JSurface::new(&self.grid, col(0), col(1))
    }

    /// Loss breakdown and, when `gradient` is set, the gradient of the
    /// weighted total in flatten order. Grid terms with zero weight are
    /// evaluated without the tape.
    fn evaluate(&self, params: &ModelParams, gradient: bool) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
        let tape = Tape::new();
        let layers = params.leaves(&tape);
        let w = self.weights;
        let pred = params.forward_tape(&layers, tape.leaf(self.inputs.clone()));
        let mse = mse_var(pred, &self.targets);
        let mut total = mse.scale(w.mse);
        let raw_grid: [f64; 3];
        if w.uses_grid() {
            let y = params.forward_tape(&layers, tape.leaf(self.grid_inputs.clone()));
            let (m, z) = (self.grid.m(), self.grid.z());
            let j_n = y.column(0).reshape(m, z).scale(self.output_scale[0]).shift(self.output_shift[0]);
            let j_t = y.column(1).reshape(m, z).scale(self.output_scale[1]).shift(self.output_shift[1]);
            let toughness = self.toughness_of(JSurface::new(&self.grid, j_n.value(), j_t.value())?)?;
            let terms = grid_terms(&self.constants, j_n, j_t, &toughness)?;
            let lambdas = [w.tc1, w.tc2, w.tc3];
            for (term, lambda) in terms.iter().zip(lambdas) {
                if lambda > 0.0 {
                    total = total + term.scale(lambda);
                }
            }
            raw_grid = [terms[0].scalar(), terms[1].scalar(), terms[2].scalar()];
        } else if gradient {
            raw_grid = [f64::NAN; 3];
        } else {
            raw_grid = self.grid_values(params)?;
        }
        tape.check()?;
        let raw = [mse.scalar(), raw_grid[0], raw_grid[1], raw_grid[2]];
        let breakdown = LossBreakdown {
            mse: raw[0],
            tc1: raw[1],
            tc2: raw[2],
            tc3: raw[3],
            total: if w.uses_grid() {
                total.scalar()
            } else {
                weighted_sum([raw[0], 0.0, 0.0, 0.0], &w)
            },
        };
        if !gradient {
            return Ok((breakdown, None));
        }
        let grads = tape.backward(total)?;
        let mut flat = Vec::with_capacity(params.param_count());
        for l in &layers {
            flat.extend(grads.wrt(l.weights).iter());
            flat.extend(grads.wrt(l.bias).iter());
        }
        Ok((breakdown, Some(flat)))
    }

    fn toughness_of(&self, surface: JSurface) -> Result<PathToughness> {
        match &self.frozen {
            Some(t) => Ok(t.clone()),
            None => PathToughness::from_surface(&surface, self.mode),
        }
    }

    /// Toughness estimated from the surface of `params` on the grid.
    pub fn toughness(&self, params: &ModelParams) -> Result<PathToughness> {
        let surface = self.denormalize(&params.forward_normalized(&self.grid_inputs))?;
        PathToughness::from_surface(&surface, self.mode)
    }

    /// Use `toughness` for every later evaluation; `None` re-estimates.
    pub fn freeze_toughness(&mut self, toughness: Option<PathToughness>) {
        self.frozen = toughness;
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.grid
    }

    pub fn loss(&self, params: &ModelParams) -> Result<LossBreakdown> {
        Ok(self.evaluate(params, false)?.0)
    }

    /// Loss and gradient of its weighted total, in
    /// [`ModelParams::flatten`] order.
    pub fn loss_and_gradient(&self, params: &ModelParams) -> Result<(LossBreakdown, Vec<f64>)> {
        let (loss, grad) = self.evaluate(params, true)?;
        Ok((loss, grad.expect("gradient requested")))
    }

    /// Unweighted grid penalties without building a tape for the network.
    fn grid_values(&self, params: &ModelParams) -> Result<[f64; 3]> {
        let surface = self.denormalize(&params.forward_normalized(&self.grid_inputs))?;
        let toughness = self.toughness_of(surface.clone())?;
        let cells = cell_penalties(&self.grid, &surface, &toughness)?;
        let mean = |a: &Array2<f64>| if a.is_empty() { 0.0 } else { a.sum() / a.len() as f64 };
        Ok([mean(&cells.tc1), mean(&cells.tc2), mean(&cells.tc3)])
    }
}

/// Model with normalization and domain taken from `data`, weights
/// initialized from `seed`.
pub fn initial_model(arch: &Architecture, data: &Dataset, seed: u64) -> Result<ModelParams> {
    let mut params = init_params(arch, seed)?;
    params.normalization = Normalization::from_dataset(data);
    params.domain = Some(Domain::from_dataset(data));
    Ok(params)
}

/// Collocation grid a run with `spec` trains on.
pub fn training_grid(data: &Dataset, spec: GridSpec) -> Result<CollocationGrid> {
    Domain::from_dataset(data).grid(spec.paths, spec.stations)
}

/// Loss breakdown of `params` on `data` under `config`, without training.
pub fn evaluate_loss(config: &TrainConfig, params: &ModelParams, data: &Dataset) -> Result<LossBreakdown> {
    config.validate()?;
    let grid = training_grid(data, config.grid)?;
    let objective = Objective::new(config, data, &params.normalization, grid);
    Ok(objective.evaluate(params, false)?.0)
}

fn divergence(epoch: usize, last_good: Option<usize>, what: &str) -> Error {
    let reason = match last_good {
        Some(e) => format!("{what}; last good epoch {e}"),
        None => format!("{what} before any step"),
    };
    Error::Training { epoch, reason }
}

pub fn train(config: &TrainConfig, data: &Dataset) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Usage("training needs a non-empty dataset".into()));
    }
    let start = Instant::now();
    let mut params = initial_model(&config.architecture, data, config.seed)?;
    let grid = training_grid(data, config.grid)?;
    let objective = Objective::new(config, data, &params.normalization, grid);
    let adam = config.adam();

    let mut flat = params.flatten();
    let mut state = AdamState::new(flat.len());
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut window = 0.0;
    let mut previous_window: Option<f64> = None;
    let mut last_good = None;
    let mut epochs_run = 0;
    let mut stopped_early = false;
    let budget = config.epochs as usize;

    for epoch in 0..budget {
        let (loss, grads) = objective.evaluate(&params, true).map_err(|e| match e {
            Error::DegeneratePath(msg) => divergence(epoch, last_good, &format!("degenerate surface: {msg}")),
            Error::Domain(msg) => divergence(epoch, last_good, &msg),
            Error::Autodiff(err) => divergence(epoch, last_good, &err.to_string()),
            other => other,
        })?;
        if !loss.total.is_finite() {
            return Err(divergence(epoch, last_good, "loss became non-finite"));
        }
        if epoch % config.history_every == 0 {
            let logged = if config.weights.uses_grid() {
                loss
            } else {
                objective.evaluate(&params, false)?.0
            };
            history.push(HistoryEntry { epoch, loss: logged });
        }
        if loss.total < best.0 {
            best = (loss.total, params.clone(), epoch);
        }
        // The penalties are non-smooth and the loss oscillates, so the
        // plateau test compares window means rather than single epochs.
        window += loss.total;
        if (epoch + 1) % config.patience == 0 {
            let mean = window / config.patience as f64;
            window = 0.0;
            let stalled = previous_window.is_some_and(|prev| prev - mean < config.min_improvement);
            previous_window = Some(mean);
            if stalled {
                stopped_early = true;
                break;
            }
        }
        let grads = grads.expect("gradient requested");
        adam_step(&mut flat, &grads, &mut state, epoch as u64 + 1, &adam).map_err(|e| match e {
            Error::Training { reason, .. } => divergence(epoch, last_good, &reason),
            other => other,
        })?;
        params.set_flat(&flat);
        last_good = Some(epoch);
        epochs_run = epoch + 1;
    }

    // the parameters after the last step have not been evaluated yet
    let (last_loss, _) = objective.evaluate(&params, false)?;
    let (params, best_epoch) = if last_loss.total.is_finite() && last_loss.total < best.0 {
        (params, epochs_run)
    } else {
        (best.1, best.2)
    };
    let (final_loss, _) = objective.evaluate(&params, false)?;
    history.push(HistoryEntry {
        epoch: epochs_run,
        loss: final_loss,
    });
    let report = TrainReport {
        version: REPORT_VERSION.to_string(),
        seed: config.seed,
        epochs_run,
        stopped_early,
        best_epoch,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        data_points: data.len(),
        final_loss,
        history,
        config: config.clone(),
    };
    Ok((params, report))
}

/// Mean squared error on normalized targets, using the model's own
/// normalization.
pub fn dataset_mse(params: &ModelParams, data: &Dataset) -> Result<f64> {
    let points: Vec<SeparationState> = data
        .observations()
        .map(|(phi, s)| SeparationState {
            delta_norm: s.delta_norm,
            phi,
        })
        .collect();
    let pred = params.forward_batch(&points)?;
    let norm = &params.normalization;
    let sum: f64 = pred
        .iter()
        .zip(data.observations())
        .map(|(p, (_, s))| {
            let a = norm.normalize_output(*p);
            let b = norm.normalize_output(crate::tsr::JPair { j_n: s.j_n, j_t: s.j_t });
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        })
        .sum();
    Ok(sum / points.len() as f64)
}

/// Indices of the two paths held out for validation: one a third of the
/// way through the angle range, one two thirds, so both are interior.
pub fn validation_paths(n_paths: usize) -> Result<[usize; 2]> {
    if n_paths < 4 {
        return Err(Error::Usage(format!(
            "leave-2-paths-out validation needs at least 4 paths, got {n_paths}"
        )));
    }
    Ok([n_paths / 3, 2 * n_paths / 3])
}

/// Ranges sampled by [`random_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    /// Log-uniform range.
    pub learning_rate: [f64; 2],
    /// Candidate hidden-layer widths, picked uniformly.
    pub hidden: Vec<Vec<usize>>,
    /// Uniform range for each constraint weight; the data weight takes the
    /// remainder.
    pub constraint_weight: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: [3e-4, 3e-3],
            hidden: vec![vec![30, 30], vec![60, 60], vec![40, 40, 40]],
            constraint_weight: [0.02, 0.15],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.learning_rate;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("search learning_rate range invalid: [{lo}, {hi}]")));
        }
        if self.hidden.is_empty() {
            return Err(Error::Config("search needs at least one hidden layout".into()));
        }
        for h in &self.hidden {
            Architecture::new(h.clone())?;
        }
        let [lo, hi] = self.constraint_weight;
        if !(lo >= 0.0 && hi >= lo && 3.0 * hi < 1.0) {
            return Err(Error::Config(format!(
                "search constraint_weight range must satisfy 0 <= lo <= hi < 1/3, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, base: &TrainConfig) -> TrainConfig {
        let [lo, hi] = self.learning_rate;
        let lr = if hi > lo {
            (rng.random_range(lo.ln()..hi.ln())).exp()
        } else {
            lo
        };
        let hidden = self.hidden[rng.random_range(0..self.hidden.len())].clone();
        let [wl, wh] = self.constraint_weight;
        let mut tc = [0.0; 3];
        for t in &mut tc {
            *t = if wh > wl { rng.random_range(wl..wh) } else { wl };
        }
        TrainConfig {
            architecture: Architecture { hidden },
            learning_rate: lr,
            weights: LossWeights {
                mse: 1.0 - tc.iter().sum::<f64>(),
                tc1: tc[0],
                tc2: tc[1],
                tc3: tc[2],
            },
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub weights: LossWeights,
    /// `None` when training failed.
    pub validation_mse: Option<f64>,
    pub violation_fraction: Option<f64>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub seed: u64,
    pub budget: usize,
    pub held_out_paths: Vec<String>,
    pub best: TrainConfig,
    /// Trials ordered best first; failed trials last.
    pub leaderboard: Vec<Trial>,
}

impl SearchResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("search result serializes")
    }
}

/// Train `budget` sampled configurations on all but two paths and rank
/// them by held-out MSE plus the audit's overall violation fraction.
pub fn random_search(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    data: &Dataset,
    base: &TrainConfig,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::Config("search budget must be >= 1".into()));
    }
    space.validate()?;
    base.validate()?;
    let held = validation_paths(data.paths.len())?;
    let (train_set, val_set) = data.split_paths(&held)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<TrainConfig> = (0..budget)
        .map(|k| TrainConfig {
            seed: seed.wrapping_add(k as u64),
            ..space.sample(&mut rng, base)
        })
        .collect();

    let mut trials = Vec::with_capacity(budget);
    for (k, cfg) in configs.iter().enumerate() {
        let outcome = train(cfg, &train_set).and_then(|(model, _)| {
            let val = dataset_mse(&model, &val_set)?;
            let grid = training_grid(&train_set, cfg.grid)?;
            let audit = audit_surface(&model, &grid, AuditTolerances::default(), cfg.toughness_mode)?;
            Ok((val, audit.report.fractions.overall))
        });
        let mut trial = Trial {
            trial: k,
            learning_rate: cfg.learning_rate,
            hidden: cfg.architecture.hidden.clone(),
            weights: cfg.weights,
            validation_mse: None,
            violation_fraction: None,
            score: None,
            error: None,
        };
        match outcome {
            Ok((val, viol)) if val.is_finite() => {
                trial.validation_mse = Some(val);
                trial.violation_fraction = Some(viol);
                trial.score = Some(val + viol);
            }
            Ok((val, _)) => trial.error = Some(format!("validation mse is {val}")),
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => trial.error = Some(e.to_string()),
        }
        trials.push(trial);
    }
    if trials.iter().all(|t| t.score.is_none()) {
        return Err(Error::Search(format!("all {budget} trials failed")));
    }
    trials.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.trial.cmp(&b.trial)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.trial.cmp(&b.trial),
    });
    let best = configs[trials[0].trial].clone();
    Ok(SearchResult {
        seed,
        budget,
        held_out_paths: val_set.paths.iter().map(|p| p.path_id.clone()).collect(),
        best,
        leaderboard: trials,
    })
}
