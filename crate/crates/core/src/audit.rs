//! Cell-by-cell consistency audit and plot-ready surface export.
//!
//! The audit evaluates the same cell penalties as the training losses and
//! flags a cell when its penalty exceeds a tolerance: `rate` for the
//! energy-release and steepest-gradient checks, `alignment` for traction
//! alignment. Fractions are taken over the cells each check can evaluate,
//! and the overall fraction is their unweighted mean.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{cell_penalties, CellPenalties};
use crate::mlp::{Domain, ModelParams};
use crate::oracle::{oracle_j, reproduction_layout, OracleParams};
use crate::tsr::{
    tractions_from_grid, CollocationGrid, JPair, JSurface, PathToughness, ToughnessMode,
    TractionSurface,
};

pub const AUDIT_VERSION: &str = "tcnn-audit/1";

pub const SURFACE_HEADER: [&str; 14] = [
    "phi_deg",
    "delta_norm",
    "delta_n",
    "delta_t",
    "j_n",
    "j_t",
    "sigma_n",
    "sigma_t",
    "d_n",
    "d_t",
    "gamma_total",
    "viol_tc1",
    "viol_tc2",
    "viol_tc3",
];

/// Anything that can produce a J surface on a grid.
pub trait SurfaceSource {
    /// Short label for reports.
    fn kind(&self) -> &'static str;
    fn j_surface(&self, grid: &CollocationGrid) -> Result<JSurface>;
    /// Region the source is meant to be audited on, if it has one.
    fn domain(&self) -> Option<Domain>;
}

impl SurfaceSource for ModelParams {
    fn kind(&self) -> &'static str {
        "model"
    }

    fn j_surface(&self, grid: &CollocationGrid) -> Result<JSurface> {
        self.surface(grid)
    }

    fn domain(&self) -> Option<Domain> {
        self.domain
    }
}

impl SurfaceSource for OracleParams {
    fn kind(&self) -> &'static str {
        "oracle"
    }

    fn j_surface(&self, grid: &CollocationGrid) -> Result<JSurface> {
        self.validate()?;
        let j_n = grid.map(|p| oracle_j(p.delta_n(), p.delta_t(), self).map_or(f64::NAN, |j| j.j_n));
        let j_t = grid.map(|p| oracle_j(p.delta_n(), p.delta_t(), self).map_or(f64::NAN, |j| j.j_t));
        JSurface::new(grid, j_n, j_t)
    }

    /// The reproduction angle range over the synthesized separation range.
    fn domain(&self) -> Option<Domain> {
        let (angles, _) = reproduction_layout();
        Some(Domain {
            phi_min: angles[0].to_radians(),
            phi_max: angles[angles.len() - 1].to_radians(),
            max_separation: self.max_separation(),
        })
    }
}

impl SurfaceSource for JSurface {
    fn kind(&self) -> &'static str {
        "surface"
    }

    fn j_surface(&self, grid: &CollocationGrid) -> Result<JSurface> {
        JSurface::new(grid, self.j_n.clone(), self.j_t.clone())
    }

    fn domain(&self) -> Option<Domain> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditTolerances {
    /// Threshold on the normalized rate penalties.
    pub rate: f64,
    /// Threshold on the traction misalignment (sine of the angle).
    pub alignment: f64,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        Self {
            rate: 1e-6,
            alignment: 0.05,
        }
    }
}

impl AuditTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            rate: tol,
            alignment: tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rate", self.rate), ("alignment", self.alignment)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("audit {name} tolerance must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationFractions {
    pub tc1: f64,
    pub tc2: f64,
    pub tc3: f64,
    /// Mean of the three fractions.
    pub overall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub violating: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub tc1: CellCount,
    pub tc2: CellCount,
    pub tc3: CellCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub paths: usize,
    pub stations: usize,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
    pub max_separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathToughnessEntry {
    pub phi_deg: f64,
    pub gamma_n: f64,
    pub gamma_t: f64,
}

/// Grid means of the damage variables. `d` follows `d = 1 - J/Γ`; the
/// dissipated fraction is `1 - d`, the reading where damage grows from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSummary {
    pub mean_d_n: f64,
    pub mean_d_t: f64,
    pub mean_dissipated_n: f64,
    pub mean_dissipated_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditReport {
    pub version: String,
    pub source: String,
    pub grid: GridSummary,
    pub tolerances: AuditTolerances,
    pub toughness_mode: ToughnessMode,
    pub fractions: ViolationFractions,
    pub counts: CellCounts,
    /// Largest cell penalty of each check.
    pub max_penalty: [f64; 3],
    pub path_toughness: Vec<PathToughnessEntry>,
    pub damage: DamageSummary,
    /// Largest `|Γ - (J_n + J_t)| / max(|J_n + J_t|, Γ_n + Γ_t)` over the grid,
    /// with `Γ` rebuilt from the damage variables.
    pub toughness_identity_error: f64,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &(self.to_json() + "\n"))
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Full audit result: the report plus the per-cell data behind it.
#[derive(Debug, Clone)]
pub struct Audit {
    pub grid: CollocationGrid,
    pub surface: JSurface,
    pub tractions: TractionSurface,
    pub toughness: PathToughness,
    pub penalties: CellPenalties,
    pub tc1: Array2<bool>,
    pub tc2: Array2<bool>,
    pub tc3: Array2<bool>,
    pub report: AuditReport,
}

fn count(mask: &Array2<bool>) -> CellCount {
    CellCount {
        violating: mask.iter().filter(|&&v| v).count(),
        cells: mask.len(),
    }
}

fn fraction(c: CellCount) -> f64 {
    if c.cells == 0 {
        0.0
    } else {
        c.violating as f64 / c.cells as f64
    }
}

fn max_of(a: &Array2<f64>) -> f64 {
    a.iter().copied().fold(0.0, f64::max)
}

pub fn audit_surface<S: SurfaceSource + ?Sized>(
    source: &S,
    grid: &CollocationGrid,
    tol: AuditTolerances,
    mode: ToughnessMode,
) -> Result<Audit> {
    tol.validate()?;
    let surface = source.j_surface(grid)?;
    let degenerate = |e: Error| match e {
        Error::DegeneratePath(msg) => Error::Audit(format!("degenerate toughness: {msg}")),
        other => other,
    };
    let toughness = PathToughness::from_surface(&surface, mode).map_err(degenerate)?;
    let penalties = cell_penalties(grid, &surface, &toughness).map_err(degenerate)?;
    let tractions = tractions_from_grid(grid, &surface)?;

    let tc1 = penalties.tc1.mapv(|v| v > tol.rate);
    let tc2 = penalties.tc2.mapv(|v| v > tol.rate);
    let tc3 = penalties.tc3.mapv(|v| v > tol.alignment);
    let counts = CellCounts {
        tc1: count(&tc1),
        tc2: count(&tc2),
        tc3: count(&tc3),
    };
    let f = [fraction(counts.tc1), fraction(counts.tc2), fraction(counts.tc3)];

    let (m, z) = (grid.m(), grid.z());
    let (mut dn_sum, mut dt_sum, mut identity) = (0.0, 0.0, 0.0_f64);
    for j in 0..m {
        for i in 0..z {
            let jp = JPair {
                j_n: surface.j_n[[j, i]],
                j_t: surface.j_t[[j, i]],
            };
            let d = toughness.damage(j, jp);
            dn_sum += d.d_n;
            dt_sum += d.d_t;
            let total = jp.j_n + jp.j_t;
            let scale = total.abs().max(toughness.gamma_n[j] + toughness.gamma_t[j]);
            identity = identity.max((toughness.total(j, d) - total).abs() / scale);
        }
    }
    let n = (m * z) as f64;
    let report = AuditReport {
        version: AUDIT_VERSION.to_string(),
        source: source.kind().to_string(),
        grid: GridSummary {
            paths: m,
            stations: z,
            phi_min_deg: grid.phis()[0].to_degrees(),
            phi_max_deg: grid.phis()[m - 1].to_degrees(),
            max_separation: grid.stations()[z - 1],
        },
        tolerances: tol,
        toughness_mode: mode,
        fractions: ViolationFractions {
            tc1: f[0],
            tc2: f[1],
            tc3: f[2],
            overall: (f[0] + f[1] + f[2]) / 3.0,
        },
        counts,
        max_penalty: [
            max_of(&penalties.tc1),
            max_of(&penalties.tc2),
            max_of(&penalties.tc3),
        ],
        path_toughness: grid
            .phis()
            .iter()
            .enumerate()
            .map(|(j, phi)| PathToughnessEntry {
                phi_deg: phi.to_degrees(),
                gamma_n: toughness.gamma_n[j],
                gamma_t: toughness.gamma_t[j],
            })
            .collect(),
        damage: DamageSummary {
            mean_d_n: dn_sum / n,
            mean_d_t: dt_sum / n,
            mean_dissipated_n: 1.0 - dn_sum / n,
            mean_dissipated_t: 1.0 - dt_sum / n,
        },
        toughness_identity_error: identity,
    };
    Ok(Audit {
        grid: grid.clone(),
        surface,
        tractions,
        toughness,
        penalties,
        tc1,
        tc2,
        tc3,
        report,
    })
}

/// One exported grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub phi_deg: f64,
    pub delta_norm: f64,
    pub delta_n: f64,
    pub delta_t: f64,
    pub j_n: f64,
    pub j_t: f64,
    pub sigma_n: f64,
    pub sigma_t: f64,
    pub d_n: f64,
    pub d_t: f64,
    pub gamma_total: f64,
    pub viol: [bool; 3],
}

impl Audit {
    /// Flags attributed to grid point `(path, station)`. Station-pair cells
    /// belong to the point they start from, so the last station repeats the
    /// last pair; steepest-gradient cells sit on interior points.
    pub fn point_flags(&self, path: usize, station: usize) -> [bool; 3] {
        let pair = station.min(self.grid.z() - 2);
        let tc2 = station >= 1
            && path < self.tc2.nrows()
            && station - 1 < self.tc2.ncols()
            && self.tc2[[path, station - 1]];
        [self.tc1[[path, pair]], tc2, self.tc3[[path, pair]]]
    }

    /// One row per grid point, angle-major.
    pub fn surface_rows(&self) -> Vec<SurfaceRow> {
        let (m, z) = (self.grid.m(), self.grid.z());
        let mut rows = Vec::with_capacity(m * z);
        for j in 0..m {
            for i in 0..z {
                let p = self.grid.point(j, i);
                let jp = JPair {
                    j_n: self.surface.j_n[[j, i]],
                    j_t: self.surface.j_t[[j, i]],
                };
                let d = self.toughness.damage(j, jp);
                let pair = i.min(z - 2);
                rows.push(SurfaceRow {
                    phi_deg: p.phi.to_degrees(),
                    delta_norm: p.delta_norm,
                    delta_n: p.delta_n(),
                    delta_t: p.delta_t(),
                    j_n: jp.j_n,
                    j_t: jp.j_t,
                    sigma_n: self.tractions.sigma_n[[j, pair]],
                    sigma_t: self.tractions.sigma_t[[j, pair]],
                    d_n: d.d_n,
                    d_t: d.d_t,
                    gamma_total: self.toughness.total(j, d),
                    viol: self.point_flags(j, i),
                });
            }
        }
        rows
    }
}

/// Surface rows with default tolerances and per-path toughness.
pub fn export_surface<S: SurfaceSource + ?Sized>(source: &S, grid: &CollocationGrid) -> Result<Vec<SurfaceRow>> {
    Ok(audit_surface(source, grid, AuditTolerances::default(), ToughnessMode::PerPath)?.surface_rows())
}

pub fn write_surface_csv<W: Write>(rows: &[SurfaceRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(SURFACE_HEADER)?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in rows {
        let mut rec: Vec<String> = [
            r.phi_deg,
            r.delta_norm,
            r.delta_n,
            r.delta_t,
            r.j_n,
            r.j_t,
            r.sigma_n,
            r.sigma_t,
            r.d_n,
            r.d_t,
            r.gamma_total,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        rec.extend(r.viol.map(flag));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn save_surface_csv(rows: &[SurfaceRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    write_surface_csv(rows, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_params, Architecture};

    fn reproduction_grid(m: usize, z: usize) -> CollocationGrid {
        OracleParams::consistent().domain().unwrap().grid(m, z).unwrap()
    }

    #[test]
    fn consistent_oracle_is_clean() {
        let grid = reproduction_grid(32, 64);
        let a = audit_surface(
            &OracleParams::consistent(),
            &grid,
            AuditTolerances::uniform(1e-9),
            ToughnessMode::PerPath,
        )
        .unwrap();
        let f = a.report.fractions;
        assert_eq!((f.tc1, f.tc2, f.tc3), (0.0, 0.0, 0.0), "{:?}", a.report.max_penalty);
        assert_eq!(a.report.counts.tc1.cells, 32 * 63);
        assert_eq!(a.report.counts.tc2.cells, 31 * 62);
        assert!(a.report.toughness_identity_error <= 1e-12);
    }

    #[test]
    fn tc3_violating_preset() {
        let grid = reproduction_grid(32, 64);
        let a = audit_surface(
            &OracleParams::tc3_violating(),
            &grid,
            AuditTolerances::default(),
            ToughnessMode::PerPath,
        )
        .unwrap();
        let f = a.report.fractions;
        assert_eq!(f.tc1, 0.0);
        assert_eq!(f.tc2, 0.0);
        assert!(f.tc3 > 0.5, "{f:?}");
    }

    #[test]
    fn decreasing_surface_violates_tc1_everywhere() {
        let grid = reproduction_grid(4, 8);
        let s = JSurface::from_fn(&grid, |p| JPair {
            j_n: -p.delta_norm,
            j_t: 0.0,
        })
        .unwrap();
        let a = audit_surface(&s, &grid, AuditTolerances::default(), ToughnessMode::PerPath).unwrap();
        assert_eq!(a.report.fractions.tc1, 1.0);
    }

    #[test]
    fn zero_surface_is_an_audit_error() {
        let grid = reproduction_grid(3, 3);
        let s = JSurface::from_fn(&grid, |_| JPair::default()).unwrap();
        let err = audit_surface(&s, &grid, AuditTolerances::default(), ToughnessMode::PerPath).unwrap_err();
        assert!(matches!(err, Error::Audit(_)), "{err}");
    }

    #[test]
    fn fractions_shrink_as_tolerance_grows() {
        let mut model = init_params(&Architecture::new(vec![8, 8]).unwrap(), 3).unwrap();
        model.domain = OracleParams::consistent().domain();
        let grid = reproduction_grid(6, 10);
        let mut last = [f64::INFINITY; 3];
        for tol in [0.0, 1e-6, 1e-3, 1e-2, 0.1, 1.0] {
            let f = audit_surface(&model, &grid, AuditTolerances::uniform(tol), ToughnessMode::PerPath)
                .unwrap()
                .report
                .fractions;
            let now = [f.tc1, f.tc2, f.tc3];
            for k in 0..3 {
                assert!(now[k] <= last[k], "tol {tol}: {now:?} vs {last:?}");
            }
            last = now;
        }
    }

    #[test]
    fn export_rows_and_bytes() {
        let p = OracleParams::consistent();
        let grid = CollocationGrid::new(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        let rows = export_surface(&p, &grid).unwrap();
        assert_eq!(rows.len(), 4);
        // (|δ| = δ0, φ = 0): J_n = Γ_n (1 - 2/e)
        assert!((rows[1].j_n - 0.264_241_117_657_115_4 * p.gamma_n).abs() < 1e-12);
        assert!((rows[1].j_n / p.gamma_n - 0.26424).abs() < 1e-5);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_surface_csv(&rows, &mut a).unwrap();
        write_surface_csv(&export_surface(&p, &grid).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next().unwrap(), SURFACE_HEADER.join(","));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn gamma_column_matches_j_sum() {
        let grid = reproduction_grid(7, 12);
        let a = audit_surface(
            &OracleParams::tc3_violating(),
            &grid,
            AuditTolerances::default(),
            ToughnessMode::Global,
        )
        .unwrap();
        for r in a.surface_rows() {
            let sum = r.j_n + r.j_t;
            assert!((r.gamma_total - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn report_json_round_trips() {
        let grid = reproduction_grid(4, 5);
        let r = audit_surface(
            &OracleParams::consistent(),
            &grid,
            AuditTolerances::default(),
            ToughnessMode::PerPath,
        )
        .unwrap()
        .report;
        let back: AuditReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.version, "tcnn-audit/1");
    }
}
