//! Data misfit and thermodynamic-consistency penalties.
//!
//! All grid penalties work on `m x z` J matrices (one row per fixed-angle
//! path) and are built from forward differences, so they stay first order
//! in the network parameters. Each penalty has a cell-level form, used by
//! the audit to flag individual grid cells, and a mean over cells, used as
//! a loss term.
//!
//! * `tc1`: `max(-ΔJ_n/Δδ_n, 0) + max(-Δ|J_t|/Δ|δ_t|, 0)` per station pair,
//!   divided by the path toughness `Γ_n + Γ_t`. Zero iff J never decreases
//!   along a path.
//! * `tc2`: with the dissipated fraction `D = (|J_n| + |J_t|) / (Γ_n + Γ_t)`,
//!   `max(|∂D/∂φ| / |δ| - ∂D/∂|δ|, 0)` at interior cells. Zero iff damage
//!   grows at least as fast along the path as it varies across paths.
//! * `tc3`: `|σ_t cos φ - σ_n sin φ| / (|σ| + ε)`, the sine of the angle
//!   between traction and separation. Zero iff they are aligned.
//!
//! Path toughness enters as a constant: no gradient flows through the
//! maximum used to estimate it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tsr::{CollocationGrid, JPair, JSurface, PathToughness, TractionSurface};

/// Regularizes the traction-alignment ratio where `|σ| = 0`, traction units.
pub const TRACTION_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub mse: f64,
    pub tc1: f64,
    pub tc2: f64,
    pub tc3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mse: 0.7,
            tc1: 0.1,
            tc2: 0.1,
            tc3: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(mse: f64, tc1: f64, tc2: f64, tc3: f64) -> Result<Self> {
        let w = Self { mse, tc1, tc2, tc3 };
        w.validate()?;
        Ok(w)
    }

    /// Data term only.
    pub fn unconstrained() -> Self {
        Self {
            mse: 1.0,
            tc1: 0.0,
            tc2: 0.0,
            tc3: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mse, self.tc1, self.tc2, self.tc3]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "loss weights must be finite and >= 0, got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("loss weights must sum to 1 (sum is {sum})")));
        }
        Ok(())
    }

    /// Whether any grid penalty is active.
    pub fn uses_grid(&self) -> bool {
        self.tc1 > 0.0 || self.tc2 > 0.0 || self.tc3 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse: f64,
    pub tc1: f64,
    pub tc2: f64,
    pub tc3: f64,
    pub total: f64,
}

/// Weighted total of raw `[mse, tc1, tc2, tc3]`.
pub fn loss_total(raw: [f64; 4], w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    Ok(LossBreakdown {
        mse: raw[0],
        tc1: raw[1],
        tc2: raw[2],
        tc3: raw[3],
        total: weighted_sum(raw, w),
    })
}

pub(crate) fn weighted_sum(raw: [f64; 4], w: &LossWeights) -> f64 {
    w.mse * raw[0] + w.tc1 * raw[1] + w.tc2 * raw[2] + w.tc3 * raw[3]
}

/// Mean squared Euclidean distance between paired J values.
pub fn loss_mse(predictions: &[JPair], observations: &[JPair]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != observations.len() {
        return Err(Error::Usage(format!(
            "mse needs equal, non-zero counts ({} predictions, {} observations)",
            predictions.len(),
            observations.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p.j_n - o.j_n).powi(2) + (p.j_t - o.j_t).powi(2))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Tape form of [`loss_mse`] for `n x 2` predictions against constant targets.
pub fn mse_var<'t>(predictions: Var<'t>, targets: &Array2<f64>) -> Var<'t> {
    let diff = predictions - predictions.tape().leaf(targets.clone());
    diff.square().sum().scale(2.0 / targets.len() as f64)
}

/// Grid geometry reused by every penalty evaluation on one grid.
#[derive(Debug, Clone)]
pub struct GridConstants {
    m: usize,
    z: usize,
    inv_dn: Array2<f64>,
    inv_dt: Array2<f64>,
    inv_abs_dt: Array2<f64>,
    cos: Array2<f64>,
    sin: Array2<f64>,
    /// `1/Δ|δ|` at interior cells, `(m-1) x (z-2)`.
    inv_dr: Array2<f64>,
    /// `1/(Δφ |δ|)` at interior cells, `(m-1) x (z-2)`.
    inv_arc: Array2<f64>,
}

impl GridConstants {
    pub fn new(grid: &CollocationGrid) -> Self {
        let (m, z) = (grid.m(), grid.z());
        let (phis, st) = (grid.phis(), grid.stations());
        let pairs = (m, z - 1);
        let interior = (m - 1, z.saturating_sub(2));
        Self {
            m,
            z,
            inv_dn: grid.inv_delta_n_steps(),
            inv_dt: grid.inv_delta_t_steps(),
            inv_abs_dt: grid.inv_abs_delta_t_steps(),
            cos: Array2::from_shape_fn(pairs, |(j, _)| phis[j].cos()),
            sin: Array2::from_shape_fn(pairs, |(j, _)| phis[j].sin()),
            inv_dr: Array2::from_shape_fn(interior, |(_, i)| 1.0 / (st[i + 2] - st[i + 1])),
            inv_arc: Array2::from_shape_fn(interior, |(j, i)| {
                1.0 / ((phis[j + 1] - phis[j]) * st[i + 1])
            }),
        }
    }

    /// Whether the steepest-gradient penalty has any cells (`z >= 3`).
    pub fn has_interior(&self) -> bool {
        self.z >= 3
    }

    fn per_path(&self, values: &[f64], cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((values.len(), cols), |(j, _)| values[j])
    }
}

fn station_diff<'t>(a: Var<'t>, m: usize, z: usize) -> Var<'t> {
    a.slice(0..m, 1..z) - a.slice(0..m, 0..z - 1)
}

/// `1 / (Γ_n + Γ_t)` per path, `m x cols`.
fn inv_path_toughness(c: &GridConstants, t: &PathToughness, cols: usize) -> Result<Array2<f64>> {
    let totals = t.totals();
    if totals.len() != c.m {
        return Err(Error::Usage(format!(
            "{} toughness entries for {} paths",
            totals.len(),
            c.m
        )));
    }
    if let Some(j) = totals.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::DegeneratePath(format!("path {j} has non-positive toughness")));
    }
    let inv: Vec<f64> = totals.iter().map(|g| 1.0 / g).collect();
    Ok(c.per_path(&inv, cols))
}

/// Energy-release penalty per station pair, `m x (z-1)`.
pub fn tc1_cells<'t>(
    c: &GridConstants,
    j_n: Var<'t>,
    j_t: Var<'t>,
    toughness: &PathToughness,
) -> Result<Var<'t>> {
    let inv_g = inv_path_toughness(c, toughness, c.z - 1)?;
    let rate_n = station_diff(j_n, c.m, c.z).mul_const(&c.inv_dn * &inv_g);
    let rate_t = station_diff(j_t.abs(), c.m, c.z).mul_const(&c.inv_abs_dt * &inv_g);
    Ok((-rate_n).relu() + (-rate_t).relu())
}

/// Steepest-gradient penalty per interior cell, `(m-1) x (z-2)`; `None`
/// when the grid has fewer than three stations.
pub fn tc2_cells<'t>(
    c: &GridConstants,
    j_n: Var<'t>,
    j_t: Var<'t>,
    toughness: &PathToughness,
) -> Result<Option<Var<'t>>> {
    let inv_g = inv_path_toughness(c, toughness, c.z)?;
    if !c.has_interior() {
        return Ok(None);
    }
    let (m, z) = (c.m, c.z);
    let dissipated = (j_n.abs() + j_t.abs()).mul_const(inv_g);
    let along = (dissipated.slice(0..m - 1, 2..z) - dissipated.slice(0..m - 1, 1..z - 1))
        .mul_const(c.inv_dr.clone());
    let across = (dissipated.slice(1..m, 1..z - 1) - dissipated.slice(0..m - 1, 1..z - 1))
        .mul_const(c.inv_arc.clone());
    Ok(Some((across.abs() - along).relu()))
}

/// Forward-difference tractions on the tape, `m x (z-1)` each.
pub fn traction_vars<'t>(c: &GridConstants, j_n: Var<'t>, j_t: Var<'t>) -> (Var<'t>, Var<'t>) {
    (
        station_diff(j_n, c.m, c.z).mul_const(c.inv_dn.clone()),
        station_diff(j_t, c.m, c.z).mul_const(c.inv_dt.clone()),
    )
}

/// Traction misalignment per station pair, `m x (z-1)`, in `[0, 1]`.
pub fn tc3_cells<'t>(c: &GridConstants, sigma_n: Var<'t>, sigma_t: Var<'t>) -> Var<'t> {
    let cross = sigma_t.mul_const(c.cos.clone()) - sigma_n.mul_const(c.sin.clone());
    cross.abs() / (sigma_n.hypot(sigma_t) + TRACTION_EPS)
}

/// Mean penalties `[tc1, tc2, tc3]` on the tape; `tc2` is a zero constant
/// when the grid has no interior cells.
pub fn grid_terms<'t>(
    c: &GridConstants,
    j_n: Var<'t>,
    j_t: Var<'t>,
    toughness: &PathToughness,
) -> Result<[Var<'t>; 3]> {
    let tape = j_n.tape();
    let tc1 = tc1_cells(c, j_n, j_t, toughness)?.mean();
    let tc2 = match tc2_cells(c, j_n, j_t, toughness)? {
        Some(cells) => cells.mean(),
        None => tape.scalar(0.0),
    };
    let (sn, st) = traction_vars(c, j_n, j_t);
    let tc3 = tc3_cells(c, sn, st).mean();
    Ok([tc1, tc2, tc3])
}

/// Cell-level penalties of a fixed surface.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPenalties {
    /// `m x (z-1)`.
    pub tc1: Array2<f64>,
    /// `(m-1) x (z-2)`, empty when `z < 3`.
    pub tc2: Array2<f64>,
    /// `m x (z-1)`.
    pub tc3: Array2<f64>,
}

pub fn cell_penalties(
    grid: &CollocationGrid,
    surface: &JSurface,
    toughness: &PathToughness,
) -> Result<CellPenalties> {
    JSurface::new(grid, surface.j_n.clone(), surface.j_t.clone())?;
    let c = GridConstants::new(grid);
    let tape = Tape::new();
    let (jn, jt) = (tape.leaf(surface.j_n.clone()), tape.leaf(surface.j_t.clone()));
    let tc1 = tc1_cells(&c, jn, jt, toughness)?.value();
    let tc2 = match tc2_cells(&c, jn, jt, toughness)? {
        Some(v) => v.value(),
        None => Array2::zeros((grid.m() - 1, 0)),
    };
    let (sn, st) = traction_vars(&c, jn, jt);
    let tc3 = tc3_cells(&c, sn, st).value();
    tape.check()?;
    Ok(CellPenalties { tc1, tc2, tc3 })
}

fn mean_or_zero(a: &Array2<f64>) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.sum() / a.len() as f64
    }
}

pub fn loss_tc1(grid: &CollocationGrid, surface: &JSurface, toughness: &PathToughness) -> Result<f64> {
    Ok(mean_or_zero(&cell_penalties(grid, surface, toughness)?.tc1))
}

pub fn loss_tc2(grid: &CollocationGrid, surface: &JSurface, toughness: &PathToughness) -> Result<f64> {
    Ok(mean_or_zero(&cell_penalties(grid, surface, toughness)?.tc2))
}

/// Mean traction misalignment of precomputed tractions.
pub fn loss_tc3(grid: &CollocationGrid, tractions: &TractionSurface) -> Result<f64> {
    let shape = (grid.m(), grid.z() - 1);
    if tractions.sigma_n.dim() != shape || tractions.sigma_t.dim() != shape {
        return Err(Error::Usage("traction shape does not match grid".into()));
    }
    let c = GridConstants::new(grid);
    let tape = Tape::new();
    let cells = tc3_cells(
        &c,
        tape.leaf(tractions.sigma_n.clone()),
        tape.leaf(tractions.sigma_t.clone()),
    );
    tape.check()?;
    Ok(mean_or_zero(&cells.value()))
}
