//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Two operations are exposed: [`oracle_view`] evaluates and audits the
//! closed-form oracle for user-chosen parameters, and [`Session`] trains a
//! small network in the page a few epochs at a time. Results cross the
//! boundary as JSON strings so the page needs no generated typings.

use serde::Serialize;
use tcnn_core::audit::{audit_surface, AuditTolerances, SurfaceSource, ViolationFractions};
use tcnn_core::dataset::Dataset;
use tcnn_core::losses::{LossBreakdown, LossWeights};
use tcnn_core::mlp::{Architecture, ModelParams};
use tcnn_core::oracle::{reproduction_dataset, OracleParams};
use tcnn_core::trainer::{adam_step, initial_model, training_grid, AdamState, GridSpec, Objective, TrainConfig};
use tcnn_core::tsr::{CollocationGrid, ToughnessMode};
use wasm_bindgen::prelude::*;

/// Grid the demo draws and audits on.
const VIEW_GRID: GridSpec = GridSpec {
    paths: 24,
    stations: 48,
};

/// Collocation grid for in-page training; small enough for interactive rates.
const TRAIN_GRID: GridSpec = GridSpec {
    paths: 8,
    stations: 16,
};

/// A surface and its audit, row-major with one row per loading path.
#[derive(Debug, Serialize)]
pub struct View {
    pub phi_deg: Vec<f64>,
    pub delta_norm: Vec<f64>,
    pub j_n: Vec<f64>,
    pub j_t: Vec<f64>,
    /// Bit 0, 1, 2 set when the point is flagged by TC1, TC2, TC3.
    pub flags: Vec<u8>,
    pub fractions: ViolationFractions,
}

fn view_of<S: SurfaceSource + ?Sized>(source: &S, grid: &CollocationGrid, tolerance: f64) -> tcnn_core::Result<View> {
    let tol = AuditTolerances::uniform(tolerance);
    tol.validate()?;
    let audit = audit_surface(source, grid, tol, ToughnessMode::PerPath)?;
    let (m, z) = (grid.m(), grid.z());
    let mut flags = Vec::with_capacity(m * z);
    for j in 0..m {
        for i in 0..z {
            let f = audit.point_flags(j, i);
            flags.push(f.iter().enumerate().map(|(k, &v)| (v as u8) << k).sum());
        }
    }
    Ok(View {
        phi_deg: grid.phis().iter().map(|p| p.to_degrees()).collect(),
        delta_norm: grid.stations().to_vec(),
        j_n: audit.surface.j_n.iter().copied().collect(),
        j_t: audit.surface.j_t.iter().copied().collect(),
        flags,
        fractions: audit.report.fractions,
    })
}

fn to_js<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("view serializes")
}

/// Oracle surface and audit for the given toughnesses and length scales.
/// Returns the [`View`] as JSON, or an error message.
#[wasm_bindgen]
pub fn oracle_view(
    gamma_n: f64,
    gamma_t: f64,
    delta0_n: f64,
    delta0_t: f64,
    tolerance: f64,
) -> Result<String, String> {
    let oracle = OracleParams {
        gamma_n,
        gamma_t,
        delta0_n,
        delta0_t,
        ..OracleParams::consistent()
    };
    oracle.validate().map_err(|e| e.to_string())?;
    let domain = oracle.domain().ok_or("oracle has no domain")?;
    let grid = domain
        .grid(VIEW_GRID.paths, VIEW_GRID.stations)
        .map_err(|e| e.to_string())?;
    view_of(&oracle, &grid, tolerance).map(|v| to_js(&v)).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct Progress {
    epoch: u64,
    loss: LossBreakdown,
}

/// A training run on noisy oracle data, advanced from the page.
#[wasm_bindgen]
pub struct Session {
    config: TrainConfig,
    data: Dataset,
    params: ModelParams,
    objective: Objective,
    adam: AdamState,
    epoch: u64,
}

#[wasm_bindgen]
impl Session {
    /// `constrained` selects the default consistency-penalized weights;
    /// otherwise the loss is plain MSE.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, noise: f64, constrained: bool, width: usize) -> Result<Session, String> {
        let weights = if constrained {
            LossWeights::default()
        } else {
            LossWeights::unconstrained()
        };
        let config = TrainConfig {
            architecture: Architecture::new(vec![width, width]).map_err(|e| e.to_string())?,
            weights,
            learning_rate: 3e-3,
            grid: TRAIN_GRID,
            seed,
            ..TrainConfig::default()
        };
        let oracle = OracleParams::consistent().with_noise(noise, seed);
        oracle.validate().map_err(|e| e.to_string())?;
        let data = reproduction_dataset(&oracle).map_err(|e| e.to_string())?;
        let params = initial_model(&config.architecture, &data, seed).map_err(|e| e.to_string())?;
        let grid = training_grid(&data, config.grid).map_err(|e| e.to_string())?;
        let objective = Objective::new(&config, &data, &params.normalization, grid);
        let adam = AdamState::new(params.param_count());
        Ok(Session {
            config,
            data,
            params,
            objective,
            adam,
            epoch: 0,
        })
    }

    /// Run `epochs` Adam steps; returns `{epoch, loss}` JSON for the last one.
    pub fn step(&mut self, epochs: u32) -> Result<String, String> {
        let cfg = self.config.adam();
        let mut last = None;
        for _ in 0..epochs {
            let (loss, grad) = self
                .objective
                .loss_and_gradient(&self.params)
                .map_err(|e| e.to_string())?;
            let mut x = self.params.flatten();
            self.epoch += 1;
            adam_step(&mut x, &grad, &mut self.adam, self.epoch, &cfg).map_err(|e| e.to_string())?;
            self.params.set_flat(&x);
            last = Some(loss);
        }
        let loss = match last {
            Some(l) => l,
            None => self.objective.loss(&self.params).map_err(|e| e.to_string())?,
        };
        Ok(to_js(&Progress {
            epoch: self.epoch,
            loss,
        }))
    }

    /// Current network surface and audit as [`View`] JSON.
    pub fn view(&self, tolerance: f64) -> Result<String, String> {
        let grid = training_grid(&self.data, VIEW_GRID).map_err(|e| e.to_string())?;
        view_of(&self.params, &grid, tolerance).map(|v| to_js(&v)).map_err(|e| e.to_string())
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}
