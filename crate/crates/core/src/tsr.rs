//! Traction-separation kinematics and energetics.
//!
//! A loading point is a separation magnitude `|δ|` and a phase angle `φ`
//! measured from the normal direction, so `δ_n = |δ| cos φ` and
//! `δ_t = |δ| sin φ`. Angles live in the open interval `(-π/2, π/2)`, which
//! keeps `δ_n` strictly increasing along every fixed-angle path.
//!
//! Damage follows `d = 1 - J/Γ`: an untouched interface has `d = 1` and a
//! fully separated one `d = 0`. Monotonicity checks elsewhere in the crate
//! are phrased on `J` directly, which is unambiguous under either sign
//! convention.

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `true` when `phi` is a usable phase angle.
pub fn phi_in_range(phi: f64) -> bool {
    phi.is_finite() && phi > -FRAC_PI_2 && phi < FRAC_PI_2
}

fn check_phi(phi: f64) -> Result<()> {
    if phi_in_range(phi) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "phase angle out of range: {phi} rad is not inside (-pi/2, pi/2)"
        )))
    }
}

fn check_norm(delta_norm: f64) -> Result<()> {
    if delta_norm.is_finite() && delta_norm >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "separation norm must be finite and >= 0, got {delta_norm}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationState {
    pub delta_norm: f64,
    pub phi: f64,
}

impl SeparationState {
    pub fn new(delta_norm: f64, phi: f64) -> Result<Self> {
        check_norm(delta_norm)?;
        check_phi(phi)?;
        Ok(Self { delta_norm, phi })
    }

    pub fn delta_n(&self) -> f64 {
        self.delta_norm * self.phi.cos()
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_norm * self.phi.sin()
    }
}

/// Normal and tangential J-integrals, energy per unit area.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JPair {
    pub j_n: f64,
    pub j_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TractionPair {
    pub sigma_n: f64,
    pub sigma_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageState {
    pub d_n: f64,
    pub d_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Toughness {
    pub gamma_n: f64,
    pub gamma_t: f64,
}

impl Toughness {
    pub fn new(gamma_n: f64, gamma_t: f64) -> Result<Self> {
        if !(gamma_n > 0.0 && gamma_t > 0.0) {
            return Err(Error::Domain(format!(
                "toughness must be positive, got ({gamma_n}, {gamma_t})"
            )));
        }
        Ok(Self { gamma_n, gamma_t })
    }
}

/// `(|δ| cos φ, |δ| sin φ)`.
pub fn polar_to_components(delta_norm: f64, phi: f64) -> Result<(f64, f64)> {
    let s = SeparationState::new(delta_norm, phi)?;
    Ok((s.delta_n(), s.delta_t()))
}

/// Inverse of [`polar_to_components`] for `δ_n > 0`.
pub fn components_to_polar(delta_n: f64, delta_t: f64) -> (f64, f64) {
    (delta_n.hypot(delta_t), delta_t.atan2(delta_n))
}

/// Cumulative trapezoidal integral of `tractions` over `stations`.
pub fn cumulative_j(stations: &[f64], tractions: &[f64]) -> Result<Vec<f64>> {
    if stations.len() != tractions.len() {
        return Err(Error::Usage(format!(
            "{} stations but {} traction samples",
            stations.len(),
            tractions.len()
        )));
    }
    if stations.is_empty() || stations[0] != 0.0 {
        return Err(Error::Usage("stations must start at 0".into()));
    }
    if let Some(i) = stations.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Usage(format!(
            "stations must be strictly increasing (station {} -> {})",
            i,
            i + 1
        )));
    }
    let mut out = Vec::with_capacity(stations.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..stations.len() {
        acc += 0.5 * (tractions[i] + tractions[i - 1]) * (stations[i] - stations[i - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// `d = 1 - j / gamma`, unclamped.
pub fn damage_from_j(j: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("toughness must be > 0, got {gamma}")));
    }
    Ok(1.0 - j / gamma)
}

/// Toughness of a path: the largest J sample.
pub fn toughness_from_path(j_samples: &[f64]) -> Result<f64> {
    let max = j_samples
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if j_samples.is_empty() {
        return Err(Error::DegeneratePath("no samples".into()));
    }
    if !(max > 0.0) {
        return Err(Error::DegeneratePath(format!(
            "maximum J is {max}, toughness must be positive"
        )));
    }
    Ok(max)
}

/// `Γ = (1 - d_n) Γ_n + (1 - d_t) Γ_t`.
pub fn total_toughness(d: DamageState, gamma_n: f64, gamma_t: f64) -> Result<f64> {
    Toughness::new(gamma_n, gamma_t)?;
    Ok((1.0 - d.d_n) * gamma_n + (1.0 - d.d_t) * gamma_t)
}

/// `D = Γ_n ḋ_n + Γ_t ḋ_t`; the sign is left to the caller.
pub fn dissipation_rate(gamma_n: f64, gamma_t: f64, d_dot_n: f64, d_dot_t: f64) -> Result<f64> {
    Toughness::new(gamma_n, gamma_t)?;
    Ok(gamma_n * d_dot_n + gamma_t * d_dot_t)
}

/// `m` fixed-angle loading paths sampled at the same `z` separation stations.
///
/// Matrices over the grid are `m x z`, one row per path (angle-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationGrid {
    phis: Vec<f64>,
    stations: Vec<f64>,
}

impl CollocationGrid {
    pub fn new(phis: Vec<f64>, stations: Vec<f64>) -> Result<Self> {
        if phis.len() < 2 || stations.len() < 2 {
            return Err(Error::Usage(format!(
                "grid needs at least 2 angles and 2 stations, got {}x{}",
                phis.len(),
                stations.len()
            )));
        }
        for &phi in &phis {
            check_phi(phi)?;
        }
        if !phis.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Usage("grid angles must be strictly increasing".into()));
        }
        if stations[0] != 0.0 {
            return Err(Error::Usage("grid stations must start at 0".into()));
        }
        if !stations.iter().all(|s| s.is_finite()) || !stations.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Usage("grid stations must be strictly increasing".into()));
        }
        Ok(Self { phis, stations })
    }

    /// Uniform `m x z` grid over `[phi_min, phi_max] x [0, max_separation]`.
    pub fn uniform(m: usize, z: usize, phi_min: f64, phi_max: f64, max_separation: f64) -> Result<Self> {
        if m < 2 || z < 2 {
            return Err(Error::Usage(format!("grid needs m, z >= 2, got {m}x{z}")));
        }
        if !(max_separation > 0.0 && max_separation.is_finite()) {
            return Err(Error::Usage(format!(
                "grid separation range must be positive, got {max_separation}"
            )));
        }
        Self::new(linspace(phi_min, phi_max, m), linspace(0.0, max_separation, z))
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    /// Number of paths.
    pub fn m(&self) -> usize {
        self.phis.len()
    }

    /// Stations per path.
    pub fn z(&self) -> usize {
        self.stations.len()
    }

    pub fn len(&self) -> usize {
        self.m() * self.z()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Points in angle-major order.
    pub fn points(&self) -> impl Iterator<Item = SeparationState> + '_ {
        self.phis.iter().flat_map(move |&phi| {
            self.stations
                .iter()
                .map(move |&delta_norm| SeparationState { delta_norm, phi })
        })
    }

    pub fn point(&self, path: usize, station: usize) -> SeparationState {
        SeparationState {
            delta_norm: self.stations[station],
            phi: self.phis[path],
        }
    }

    /// `m x z` matrix of `f(point)`.
    pub fn map<F: Fn(SeparationState) -> f64>(&self, f: F) -> Array2<f64> {
        Array2::from_shape_fn((self.m(), self.z()), |(j, i)| f(self.point(j, i)))
    }

    /// `1 / Δδ_n` for each station pair, `m x (z-1)`.
    pub fn inv_delta_n_steps(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.m(), self.z() - 1), |(j, i)| {
            1.0 / ((self.stations[i + 1] - self.stations[i]) * self.phis[j].cos())
        })
    }

    /// `1 / Δδ_t` for each station pair, zero on a path with `φ = 0`.
    pub fn inv_delta_t_steps(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.m(), self.z() - 1), |(j, i)| {
            let step = (self.stations[i + 1] - self.stations[i]) * self.phis[j].sin();
            if step == 0.0 {
                0.0
            } else {
                1.0 / step
            }
        })
    }

    /// `1 / Δ|δ_t|`, zero on a path with `φ = 0`.
    pub fn inv_abs_delta_t_steps(&self) -> Array2<f64> {
        self.inv_delta_t_steps().mapv(f64::abs)
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { b } else { a + step * k as f64 })
        .collect()
}

/// J values over a collocation grid, `m x z` each.
#[derive(Debug, Clone, PartialEq)]
pub struct JSurface {
    pub j_n: Array2<f64>,
    pub j_t: Array2<f64>,
}

impl JSurface {
    pub fn new(grid: &CollocationGrid, j_n: Array2<f64>, j_t: Array2<f64>) -> Result<Self> {
        let shape = (grid.m(), grid.z());
        if j_n.dim() != shape || j_t.dim() != shape {
            return Err(Error::Usage(format!(
                "surface shape {:?}/{:?} does not match grid {:?}",
                j_n.dim(),
                j_t.dim(),
                shape
            )));
        }
        if j_n.iter().chain(j_t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("surface contains non-finite J".into()));
        }
        Ok(Self { j_n, j_t })
    }

    /// Evaluate `f` at every grid point.
    pub fn from_fn<F: Fn(SeparationState) -> JPair>(grid: &CollocationGrid, f: F) -> Result<Self> {
        let pairs: Vec<JPair> = grid.points().map(f).collect();
        let shape = (grid.m(), grid.z());
        let j_n = Array2::from_shape_vec(shape, pairs.iter().map(|p| p.j_n).collect())
            .expect("grid shape");
        let j_t = Array2::from_shape_vec(shape, pairs.iter().map(|p| p.j_t).collect())
            .expect("grid shape");
        Self::new(grid, j_n, j_t)
    }
}

/// Forward-difference tractions, `m x (z-1)` each, defined at stations
/// `0..z-1` of every path.
#[derive(Debug, Clone, PartialEq)]
pub struct TractionSurface {
    pub sigma_n: Array2<f64>,
    pub sigma_t: Array2<f64>,
}

pub(crate) fn forward_diff(a: &Array2<f64>) -> Array2<f64> {
    let z = a.ncols();
    &a.slice(ndarray::s![.., 1..z]) - &a.slice(ndarray::s![.., 0..z - 1])
}

/// `σ = ΔJ / Δδ` along each fixed-angle path. `σ_t` is zero on a `φ = 0`
/// path, where `δ_t` does not move.
pub fn tractions_from_grid(grid: &CollocationGrid, surface: &JSurface) -> Result<TractionSurface> {
    JSurface::new(grid, surface.j_n.clone(), surface.j_t.clone())?;
    let inv_n = grid.inv_delta_n_steps();
    if inv_n.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage("zero normal separation increment".into()));
    }
    Ok(TractionSurface {
        sigma_n: forward_diff(&surface.j_n) * &inv_n,
        sigma_t: forward_diff(&surface.j_t) * &grid.inv_delta_t_steps(),
    })
}

/// Where the toughness used to normalize damage comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToughnessMode {
    /// Maximum `|J|` along each path.
    #[default]
    PerPath,
    /// Maximum `|J|` over the whole surface.
    Global,
}

/// Per-path toughness estimates `Γ_n`, `Γ_t`. A component may be zero on a
/// path that never opens in that mode; their sum may not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathToughness {
    pub gamma_n: Vec<f64>,
    pub gamma_t: Vec<f64>,
}

impl PathToughness {
    pub fn from_surface(surface: &JSurface, mode: ToughnessMode) -> Result<Self> {
        let row_max = |a: &Array2<f64>| -> Vec<f64> {
            a.rows()
                .into_iter()
                .map(|r| r.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
                .collect()
        };
        let (mut gamma_n, mut gamma_t) = (row_max(&surface.j_n), row_max(&surface.j_t));
        if mode == ToughnessMode::Global {
            let gn = gamma_n.iter().copied().fold(0.0, f64::max);
            let gt = gamma_t.iter().copied().fold(0.0, f64::max);
            gamma_n.iter_mut().for_each(|g| *g = gn);
            gamma_t.iter_mut().for_each(|g| *g = gt);
        }
        let out = Self { gamma_n, gamma_t };
        if let Some(j) = out.totals().iter().position(|&g| !(g > 0.0)) {
            return Err(Error::DegeneratePath(format!(
                "path {j} has zero toughness in both modes"
            )));
        }
        Ok(out)
    }

    /// `Γ_n + Γ_t` per path.
    pub fn totals(&self) -> Vec<f64> {
        self.gamma_n
            .iter()
            .zip(&self.gamma_t)
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Damage `d = 1 - J/Γ`; a component with zero
    /// toughness on a path carries no energy and reads as intact (`d = 1`).
    pub fn damage(&self, path: usize, j: JPair) -> DamageState {
        let d = |j: f64, g: f64| if g > 0.0 { 1.0 - j / g } else { 1.0 };
        DamageState {
            d_n: d(j.j_n, self.gamma_n[path]),
            d_t: d(j.j_t, self.gamma_t[path]),
        }
    }

    /// `(1 - d_n) Γ_n + (1 - d_t) Γ_t` at one point.
    pub fn total(&self, path: usize, d: DamageState) -> f64 {
        (1.0 - d.d_n) * self.gamma_n[path] + (1.0 - d.d_t) * self.gamma_t[path]
    }
}
