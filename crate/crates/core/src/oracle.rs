//! Closed-form cohesive law used to synthesize loading-path data.
//!
//! The law derives from a separation potential that depends on the
//! separation magnitude `r = |δ|` only through the shape function
//! `ψ(x) = 1 - (1 + x) e^{-x}`:
//!
//! ```text
//! J_n = Γ_n cos²φ ψ(r / δ0_n)        σ_n = Γ_n δ_n e^{-r/δ0_n} / δ0_n²
//! J_t = Γ_t sin²φ ψ(r / δ0_t)        σ_t = Γ_t δ_t e^{-r/δ0_t} / δ0_t²
//! ```
//!
//! Along a pure-mode path this is the familiar rise-and-decay law with peak
//! traction `Γ e^{-1} / δ0` at `δ = δ0`. J is non-decreasing along every
//! ray, and the dissipated fraction `J / Γ` of a path does not depend on
//! the path's angle, so the energy-rate and steepest-gradient conditions
//! hold on any grid. With `Γ_n = Γ_t` and `δ0_n = δ0_t` the traction
//! vector is parallel to the separation vector everywhere, which makes the
//! law energy-conservative along loading paths as well.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LoadingPath, Sample};
use crate::error::{Error, Result};
use crate::tsr::{self, JPair, TractionPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    pub gamma_n: f64,
    pub gamma_t: f64,
    pub delta0_n: f64,
    pub delta0_t: f64,
    /// Relative (multiplicative) observation noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self::consistent()
    }
}

impl OracleParams {
    /// `Γ_n = Γ_t = 2`, `δ0 = 1`: satisfies all three consistency conditions.
    pub fn consistent() -> Self {
        Self {
            gamma_n: 2.0,
            gamma_t: 2.0,
            delta0_n: 1.0,
            delta0_t: 1.0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    /// Shear toughness doubled: tractions no longer point along the
    /// separation ray.
    pub fn tc3_violating() -> Self {
        Self {
            gamma_t: 4.0,
            ..Self::consistent()
        }
    }

    pub fn with_noise(mut self, noise_std: f64, seed: u64) -> Self {
        self.noise_std = noise_std;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_n", self.gamma_n),
            ("gamma_t", self.gamma_t),
            ("delta0_n", self.delta0_n),
            ("delta0_t", self.delta0_t),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("oracle {name} must be positive, got {v}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!(
                "oracle noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// End of the synthesized separation range, `10 max(δ0_n, δ0_t)`.
    pub fn max_separation(&self) -> f64 {
        10.0 * self.delta0_n.max(self.delta0_t)
    }
}

/// `1 - (1 + x) e^{-x}`, accurate near zero.
pub fn shape(x: f64) -> f64 {
    if x < 0.1 {
        // sum_{k>=2} (-1)^k (k-1) x^k / k!
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for k in 2..20 {
            sum += (k as f64 - 1.0) * term;
            term *= -x / (k as f64 + 1.0);
        }
        sum
    } else {
        1.0 - (1.0 + x) * (-x).exp()
    }
}

fn check_normal(delta_n: f64, delta_t: f64) -> Result<()> {
    if !(delta_n >= 0.0 && delta_n.is_finite() && delta_t.is_finite()) {
        return Err(Error::Domain(format!(
            "oracle needs finite separations with delta_n >= 0, got ({delta_n}, {delta_t})"
        )));
    }
    Ok(())
}

pub fn oracle_j(delta_n: f64, delta_t: f64, p: &OracleParams) -> Result<JPair> {
    check_normal(delta_n, delta_t)?;
    let r = delta_n.hypot(delta_t);
    if r == 0.0 {
        return Ok(JPair::default());
    }
    let (c, s) = (delta_n / r, delta_t / r);
    Ok(JPair {
        j_n: p.gamma_n * c * c * shape(r / p.delta0_n),
        j_t: p.gamma_t * s * s * shape(r / p.delta0_t),
    })
}

pub fn oracle_traction(delta_n: f64, delta_t: f64, p: &OracleParams) -> Result<TractionPair> {
    check_normal(delta_n, delta_t)?;
    let r = delta_n.hypot(delta_t);
    Ok(TractionPair {
        sigma_n: p.gamma_n * delta_n * (-r / p.delta0_n).exp() / (p.delta0_n * p.delta0_n),
        sigma_t: p.gamma_t * delta_t * (-r / p.delta0_t).exp() / (p.delta0_t * p.delta0_t),
    })
}

/// The ten loading paths used for reproduction runs: angles evenly spread
/// over `[-53°, 87.5°]`, 24 stations on the first six paths and 23 on the
/// rest (236 points).
pub fn reproduction_layout() -> (Vec<f64>, Vec<usize>) {
    let angles = tsr::linspace(-53.0, 87.5, 10);
    let stations = (0..10).map(|k| if k < 6 { 24 } else { 23 }).collect();
    (angles, stations)
}

/// One path per angle (degrees), `stations[k]` points uniformly spaced on
/// `[0, p.max_separation()]`. Observations are `J (1 + noise_std ξ)` with
/// `ξ ~ N(0, 1)` drawn from a generator seeded by `p.seed`.
pub fn generate_dataset(angles_deg: &[f64], stations: &[usize], p: &OracleParams) -> Result<Dataset> {
    p.validate()?;
    if angles_deg.len() != stations.len() {
        return Err(Error::Usage(format!(
            "{} angles but {} station counts",
            angles_deg.len(),
            stations.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut paths = Vec::with_capacity(angles_deg.len());
    for (k, (&phi_deg, &z)) in angles_deg.iter().zip(stations).enumerate() {
        if !tsr::phi_in_range(phi_deg.to_radians()) {
            return Err(Error::Domain(format!(
                "phase angle out of range: {phi_deg} deg"
            )));
        }
        if z < 2 {
            return Err(Error::Usage(format!("path {k} needs at least 2 stations, got {z}")));
        }
        let phi = phi_deg.to_radians();
        let mut samples = Vec::with_capacity(z);
        for delta_norm in tsr::linspace(0.0, p.max_separation(), z) {
            let (dn, dt) = (delta_norm * phi.cos(), delta_norm * phi.sin());
            let j = oracle_j(dn, dt, p)?;
            let mut noisy = |v: f64| {
                if p.noise_std > 0.0 {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    v * (1.0 + p.noise_std * xi)
                } else {
                    v
                }
            };
            let j_n = noisy(j.j_n);
            let j_t = noisy(j.j_t);
            samples.push(Sample {
                delta_norm,
                j_n,
                j_t,
            });
        }
        paths.push(LoadingPath {
            path_id: format!("p{k:02}"),
            phi_deg,
            samples,
        });
    }
    Dataset::new(paths)
}

/// [`generate_dataset`] on [`reproduction_layout`].
pub fn reproduction_dataset(p: &OracleParams) -> Result<Dataset> {
    let (angles, stations) = reproduction_layout();
    generate_dataset(&angles, &stations, p)
}
