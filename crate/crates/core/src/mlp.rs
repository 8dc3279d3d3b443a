//! Feed-forward network `(|δ|, φ) -> (J_n, J_t)`.
//!
//! Hidden layers use `tanh`, the output layer is linear. Inputs are
//! normalized as `(x - shift) / scale` before the first layer and outputs
//! are de-normalized as `y * scale + shift` after the last one. Weights are
//! stored `fan_in x fan_out`, so a batch `X (n x fan_in)` maps to
//! `X W + b`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tsr::{CollocationGrid, JPair, JSurface, SeparationState};

pub const MODEL_VERSION: &str = "tcnn-model/1";
pub const INPUT_DIM: usize = 2;
pub const OUTPUT_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { hidden: vec![60, 60] }
    }
}

impl Architecture {
    pub fn new(hidden: Vec<usize>) -> Result<Self> {
        let arch = Self { hidden };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "hidden layer widths must be >= 1, got {:?}",
                self.hidden
            )));
        }
        Ok(())
    }

    /// `[2, h1, ..., hk, 2]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![INPUT_DIM];
        w.extend(&self.hidden);
        w.push(OUTPUT_DIM);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Per-feature affine maps between physical and network units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub input_shift: [f64; 2],
    pub input_scale: [f64; 2],
    pub output_shift: [f64; 2],
    pub output_scale: [f64; 2],
}

impl Default for Normalization {
    fn default() -> Self {
        Self::identity()
    }
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            input_shift: [0.0; 2],
            input_scale: [1.0; 2],
            output_shift: [0.0; 2],
            output_scale: [1.0; 2],
        }
    }

    /// `|δ|` over the largest observed separation, `φ` over `π/2`, each J
    /// component over its largest observed magnitude.
    pub fn from_dataset(data: &Dataset) -> Self {
        let max_sep = data.max_separation();
        let (mut jn, mut jt) = (0.0_f64, 0.0_f64);
        for (_, s) in data.observations() {
            jn = jn.max(s.j_n.abs());
            jt = jt.max(s.j_t.abs());
        }
        let positive = |v: f64| if v > 0.0 { v } else { 1.0 };
        Self {
            input_shift: [0.0; 2],
            input_scale: [positive(max_sep), FRAC_PI_2],
            output_shift: [0.0; 2],
            output_scale: [positive(jn), positive(jt)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .input_shift
            .iter()
            .chain(&self.input_scale)
            .chain(&self.output_shift)
            .chain(&self.output_scale);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config("normalization constants must be finite".into()));
        }
        if self
            .input_scale
            .iter()
            .chain(&self.output_scale)
            .any(|&s| !(s > 0.0))
        {
            return Err(Error::Config("normalization scales must be positive".into()));
        }
        Ok(())
    }

    pub fn normalize_input(&self, point: SeparationState) -> [f64; 2] {
        [
            (point.delta_norm - self.input_shift[0]) / self.input_scale[0],
            (point.phi - self.input_shift[1]) / self.input_scale[1],
        ]
    }

    pub fn denormalize_input(&self, x: [f64; 2]) -> SeparationState {
        SeparationState {
            delta_norm: x[0] * self.input_scale[0] + self.input_shift[0],
            phi: x[1] * self.input_scale[1] + self.input_shift[1],
        }
    }

    pub fn normalize_output(&self, j: JPair) -> [f64; 2] {
        [
            (j.j_n - self.output_shift[0]) / self.output_scale[0],
            (j.j_t - self.output_shift[1]) / self.output_scale[1],
        ]
    }

    pub fn denormalize_output(&self, y: [f64; 2]) -> JPair {
        JPair {
            j_n: y[0] * self.output_scale[0] + self.output_shift[0],
            j_t: y[1] * self.output_scale[1] + self.output_shift[1],
        }
    }

    /// `n x 2` matrix of normalized inputs.
    pub fn input_matrix<'a>(&self, points: impl IntoIterator<Item = &'a SeparationState>) -> Array2<f64> {
        let rows: Vec<f64> = points
            .into_iter()
            .flat_map(|p| self.normalize_input(*p))
            .collect();
        let n = rows.len() / 2;
        Array2::from_shape_vec((n, 2), rows).expect("two columns")
    }
}

/// Region of `(φ, |δ|)` the model was fitted on; audits default to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub phi_min: f64,
    pub phi_max: f64,
    pub max_separation: f64,
}

impl Domain {
    pub fn from_dataset(data: &Dataset) -> Self {
        let (phi_min, phi_max) = data.phi_range();
        Self {
            phi_min,
            phi_max,
            max_separation: data.max_separation(),
        }
    }

    /// A `paths x stations` grid over the domain. A single-angle domain is
    /// widened by one degree each side.
    pub fn grid(&self, paths: usize, stations: usize) -> Result<CollocationGrid> {
        let (mut lo, mut hi) = (self.phi_min, self.phi_max);
        if hi <= lo {
            let pad = 1f64.to_radians();
            lo = (lo - pad).max(-FRAC_PI_2 + 1e-9);
            hi = (hi + pad).min(FRAC_PI_2 - 1e-9);
        }
        CollocationGrid::uniform(paths, stations, lo, hi, self.max_separation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub layers: Vec<Layer>,
    pub normalization: Normalization,
    pub domain: Option<Domain>,
}

/// Glorot-uniform weights, zero biases, identity normalization.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .widths()
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(ModelParams {
        architecture: arch.clone(),
        layers,
        normalization: Normalization::identity(),
        domain: None,
    })
}

/// Tape leaves for one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars<'t> {
    pub weights: Var<'t>,
    pub bias: Var<'t>,
}

impl ModelParams {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Overwrite parameters from a [`flatten`](Self::flatten)-ordered slice.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[k];
                k += 1;
            }
        }
    }

    /// One leaf per weight matrix and bias row.
    pub fn leaves<'t>(&self, tape: &'t Tape) -> Vec<LayerVars<'t>> {
        self.layers
            .iter()
            .map(|l| LayerVars {
                weights: tape.leaf(l.weights.clone()),
                bias: tape.leaf(l.bias.clone().insert_axis(ndarray::Axis(0))),
            })
            .collect()
    }

    /// Layer views into a `1 x param_count` leaf in flatten order.
    pub fn layers_from_flat<'t>(&self, flat: Var<'t>) -> Vec<LayerVars<'t>> {
        assert_eq!(flat.shape(), (1, self.param_count()));
        let mut k = 0;
        self.layers
            .iter()
            .map(|l| {
                let (r, c) = l.weights.dim();
                let weights = flat.slice(0..1, k..k + r * c).reshape(r, c);
                k += r * c;
                let bias = flat.slice(0..1, k..k + c);
                k += c;
                LayerVars { weights, bias }
            })
            .collect()
    }

    /// Normalized outputs `n x 2` for normalized inputs `n x 2`.
    pub fn forward_tape<'t>(&self, layers: &[LayerVars<'t>], inputs: Var<'t>) -> Var<'t> {
        let last = layers.len() - 1;
        let mut h = inputs;
        for (k, l) in layers.iter().enumerate() {
            h = h.matmul(l.weights).add_row(l.bias);
            if k != last {
                h = h.tanh();
            }
        }
        h
    }

    /// Normalized outputs without a tape.
    pub fn forward_normalized(&self, inputs: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = inputs.clone();
        for (k, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.weights) + &l.bias;
            if k != last {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    fn check_point(p: &SeparationState) -> Result<()> {
        if !(p.delta_norm.is_finite() && p.phi.is_finite()) {
            return Err(Error::Domain(format!("non-finite network input {p:?}")));
        }
        Ok(())
    }

    pub fn forward(&self, point: SeparationState) -> Result<JPair> {
        Ok(self.forward_batch(&[point])?[0])
    }

    pub fn forward_batch(&self, points: &[SeparationState]) -> Result<Vec<JPair>> {
        points.iter().try_for_each(Self::check_point)?;
        let out = self.forward_normalized(&self.normalization.input_matrix(points));
        Ok(out
            .rows()
            .into_iter()
            .map(|r| self.normalization.denormalize_output([r[0], r[1]]))
            .collect())
    }

    /// J over every point of `grid`.
    pub fn surface(&self, grid: &CollocationGrid) -> Result<JSurface> {
        let points: Vec<SeparationState> = grid.points().collect();
        let pairs = self.forward_batch(&points)?;
        let shape = (grid.m(), grid.z());
        JSurface::new(
            grid,
            Array2::from_shape_vec(shape, pairs.iter().map(|p| p.j_n).collect()).expect("grid"),
            Array2::from_shape_vec(shape, pairs.iter().map(|p| p.j_t).collect()).expect("grid"),
        )
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            version: MODEL_VERSION.to_string(),
            architecture: self.architecture.clone(),
            normalization: self.normalization.clone(),
            domain: self.domain,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    shape: [l.weights.nrows(), l.weights.ncols()],
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model version `{}`, expected `{MODEL_VERSION}`",
                doc.version
            )));
        }
        doc.architecture.validate()?;
        doc.normalization.validate()?;
        let widths = doc.architecture.widths();
        if doc.layers.len() != widths.len() - 1 {
            return Err(Error::Config(format!(
                "model has {} layers, architecture needs {}",
                doc.layers.len(),
                widths.len() - 1
            )));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (k, (l, w)) in doc.layers.into_iter().zip(widths.windows(2)).enumerate() {
            if l.shape != [w[0], w[1]] || l.weights.len() != w[0] * w[1] || l.bias.len() != w[1] {
                return Err(Error::Config(format!("layer {k} shape does not match architecture")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("layer {k} has non-finite parameters")));
            }
            layers.push(Layer {
                weights: Array2::from_shape_vec((w[0], w[1]), l.weights).expect("checked"),
                bias: Array1::from_vec(l.bias),
            });
        }
        Ok(Self {
            architecture: doc.architecture,
            layers,
            normalization: doc.normalization,
            domain: doc.domain,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<model>".into(),
            source,
        })?;
        Self::from_document(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let doc: ModelDocument = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        Self::from_document(doc)
    }
}

/// On-disk model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: String,
    pub architecture: Architecture,
    pub normalization: Normalization,
    #[serde(default)]
    pub domain: Option<Domain>,
    pub layers: Vec<LayerDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    /// `[fan_in, fan_out]`.
    pub shape: [usize; 2],
    /// Row-major `fan_in x fan_out`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}
