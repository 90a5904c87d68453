//! Observation models, dataset generation, target scalings and mismatch
//! parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{psi_norm_estimate, sample_inputs, DistributionSpec, InputSampler, DEFAULT_Q_GRID};
use crate::error::{Error, Result};
use crate::geometry::{cone_directions, sphere_slice_directions, HypothesisSet};
use crate::mc::{self, McEstimate, Moments};
use crate::seed::{self, Rng};

/// Minimum Monte-Carlo budget for mismatch estimates.
pub const MIN_MISMATCH_BUDGET: usize = 1000;

/// Closed catalog of scalar output functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Sign,
    Tanh,
    Relu,
    Square,
    Cube,
    Abs,
}

impl Link {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Link::Identity => z,
            // sign(0) = 0
            Link::Sign => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Link::Tanh => z.tanh(),
            Link::Relu => z.max(0.0),
            Link::Square => z * z,
            Link::Cube => z * z * z,
            Link::Abs => z.abs(),
        }
    }

    pub fn is_even(self) -> bool {
        matches!(self, Link::Square | Link::Abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    #[default]
    None,
    Gaussian { std: f64 },
    Laplace { scale: f64 },
}

impl Noise {
    /// Laplace noise with the given standard deviation.
    pub fn laplace_with_std(std: f64) -> Self {
        Noise::Laplace { scale: std / std::f64::consts::SQRT_2 }
    }

    pub fn std(&self) -> f64 {
        match self {
            Noise::None => 0.0,
            Noise::Gaussian { std } => *std,
            Noise::Laplace { scale } => scale * std::f64::consts::SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match self {
            Noise::None => 0.0,
            Noise::Gaussian { std } => *std,
            Noise::Laplace { scale } => *scale,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("noise parameter must be finite and nonnegative, got {v}")))
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            Noise::None => 0.0,
            Noise::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            Noise::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `y = ⟨x, β₀⟩ + ν`
    Linear,
    /// `y = f(⟨x, β₀⟩) + ν`
    SingleIndex,
    /// `y = (⟨x, β₀⟩ + ν)²`
    Quadratic,
}

/// Second-moment matrix subtracted from lifted inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Centering {
    /// Closed-form `E[x xᵀ]` of the input law.
    #[default]
    Analytic,
    /// Mean of `x xᵀ` over an independent calibration sample.
    Calibration { samples: usize },
    /// Mean of `x xᵀ` over the dataset itself.
    InSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub kind: ModelKind,
    pub beta0: Vec<f64>,
    #[serde(default)]
    pub link: Link,
    #[serde(default)]
    pub noise: Noise,
    /// Generate centered rank-one lifts `x xᵀ − E[x xᵀ]` instead of `x`.
    #[serde(default)]
    pub lifted: bool,
    #[serde(default)]
    pub centering: Centering,
}

impl ObservationModel {
    pub fn linear(beta0: Vec<f64>, noise: Noise) -> Self {
        Self {
            kind: ModelKind::Linear,
            beta0,
            link: Link::Identity,
            noise,
            lifted: false,
            centering: Centering::Analytic,
        }
    }

    pub fn single_index(beta0: Vec<f64>, link: Link, noise: Noise) -> Self {
        Self { kind: ModelKind::SingleIndex, link, ..Self::linear(beta0, noise) }
    }

    pub fn quadratic(beta0: Vec<f64>, noise: Noise) -> Self {
        Self { kind: ModelKind::Quadratic, ..Self::linear(beta0, noise) }
    }

    pub fn lifted(mut self) -> Self {
        self.lifted = true;
        self
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn dim(&self) -> usize {
        self.beta0.len()
    }

    /// Dimension of the regression features (`p²` when lifted).
    pub fn feature_dim(&self) -> usize {
        if self.lifted {
            self.dim() * self.dim()
        } else {
            self.dim()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta0.is_empty() {
            return Err(Error::config("beta0 must have at least one coordinate"));
        }
        if self.beta0.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("beta0"));
        }
        if self.kind != ModelKind::Linear && self.beta0.iter().all(|b| *b == 0.0) {
            return Err(Error::config("beta0 must be non-zero for single-index and quadratic models"));
        }
        if let Centering::Calibration { samples: 0 } = self.centering {
            return Err(Error::config("calibration sample must be non-empty"));
        }
        self.noise.validate()
    }

    /// Output for one input row and one noise draw.
    pub fn respond(&self, x: &[f64], nu: f64) -> f64 {
        let index: f64 = x.iter().zip(&self.beta0).map(|(a, b)| a * b).sum();
        match self.kind {
            ModelKind::Linear => index + nu,
            ModelKind::SingleIndex => self.link.apply(index) + nu,
            ModelKind::Quadratic => (index + nu) * (index + nu),
        }
    }

    fn check_spec(&self, spec: &DistributionSpec) -> Result<()> {
        self.validate()?;
        spec.validate()?;
        if spec.dim != self.dim() {
            return Err(Error::config(format!(
                "model dimension {} does not match input dimension {}",
                self.dim(),
                spec.dim
            )));
        }
        Ok(())
    }

    /// Centering matrix for lifted inputs, `None` for in-sample centering.
    fn lift_center(&self, spec: &DistributionSpec, seed: u64) -> Result<Option<DMatrix<f64>>> {
        match self.centering {
            Centering::Analytic => Ok(Some(spec.second_moment())),
            Centering::Calibration { samples } => {
                let calib = spec.clone().with_seed_domain("lift_calibration");
                let x = sample_inputs(&calib, samples, seed)?;
                Ok(Some(x.transpose() * &x / samples as f64))
            }
            Centering::InSample => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: DistributionSpec,
    pub model: ObservationModel,
    pub seed: u64,
}

/// Inputs and outputs of one sample. Lifted datasets store row-major
/// flattened `p × p` lifts, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DMatrix<f64>,
    pub outputs: DVector<f64>,
    pub provenance: Option<Provenance>,
    /// Side length `p` of the lifted matrices, if lifted.
    pub lifted_side: Option<usize>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(Error::Dimension { expected: inputs.nrows(), actual: outputs.len() });
        }
        if inputs.nrows() == 0 {
            return Err(Error::Empty("dataset"));
        }
        Ok(Self { inputs, outputs, provenance: None, lifted_side: None })
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn p(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.inputs.iter().chain(self.outputs.iter()).all(|v| v.is_finite())
    }
}

/// Row-major flattening of `x xᵀ − center`.
pub fn lift(x: &[f64], center: &DMatrix<f64>) -> Vec<f64> {
    let p = x.len();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            out.push(x[i] * x[j] - center[(i, j)]);
        }
    }
    out
}

fn lift_rows(x: &DMatrix<f64>, center: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut out = DMatrix::zeros(n, p * p);
    for r in 0..n {
        for i in 0..p {
            for j in 0..p {
                out[(r, i * p + j)] = x[(r, i)] * x[(r, j)] - center[(i, j)];
            }
        }
    }
    out
}

/// Draws `n` input/output pairs. Inputs and noise use separate seed domains,
/// so the same inputs are reused across noise levels at a fixed seed.
pub fn generate_dataset(model: &ObservationModel, spec: &DistributionSpec, n: usize, seed: u64) -> Result<Dataset> {
    model.check_spec(spec)?;
    let x = sample_inputs(spec, n, seed)?;
    let mut noise_rng = seed::child_rng(seed, "noise", 0);
    let y = DVector::from_fn(n, |i, _| {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let nu = model.noise.draw(&mut noise_rng);
        model.respond(&row, nu)
    });
    let (inputs, lifted_side) = if model.lifted {
        let center = match model.lift_center(spec, seed)? {
            Some(c) => c,
            None => x.transpose() * &x / n as f64,
        };
        (lift_rows(&x, &center), Some(spec.dim))
    } else {
        (x, None)
    };
    Ok(Dataset {
        inputs,
        outputs: y,
        provenance: Some(Provenance { spec: spec.clone(), model: model.clone(), seed }),
        lifted_side,
    })
}

fn support(beta: &[f64]) -> Vec<(usize, f64)> {
    beta.iter().copied().enumerate().filter(|(_, b)| *b != 0.0).collect()
}

/// Monte-Carlo draw of `⟨x, β⟩`, sampling only the support coordinates when
/// the coordinates are independent.
fn index_sampler(spec: &DistributionSpec, beta: &[f64]) -> Result<impl Fn(&mut Rng) -> f64 + Sync> {
    let sampler = InputSampler::new(spec)?;
    let independent = spec.mixing.is_none();
    let supp = support(beta);
    let base = spec.base_kind();
    let scale = spec.scale;
    let beta = beta.to_vec();
    Ok(move |rng: &mut Rng| {
        if independent {
            supp.iter().map(|(_, b)| b * scale * base.draw(rng)).sum()
        } else {
            sampler.draw(rng).iter().zip(&beta).map(|(a, b)| a * b).sum()
        }
    })
}

/// `μ = ‖β₀‖⁻² E[f(⟨x, β₀⟩)⟨x, β₀⟩]` for a single-index model (noise is
/// independent and centered, so it drops out).
pub fn target_scale_mu(model: &ObservationModel, spec: &DistributionSpec, mc_budget: usize, seed: u64) -> Result<McEstimate> {
    if model.kind != ModelKind::SingleIndex {
        return Err(Error::config("target scale is defined for single-index models"));
    }
    model.check_spec(spec)?;
    if mc_budget < 2 {
        return Err(Error::config("Monte-Carlo budget must be at least 2"));
    }
    let norm_sq: f64 = model.beta0.iter().map(|b| b * b).sum();
    let index = index_sampler(spec, &model.beta0)?;
    let link = model.link;
    let est = mc::mean_of(mc_budget, seed, "target_scale_mu", |rng| {
        let z = index(rng);
        link.apply(z) * z
    });
    Ok(McEstimate { value: est.value / norm_sq, std_error: est.std_error / norm_sq, budget: est.budget })
}

/// `μ = ½ E[f(Z)(Z² − 1)]` with `Z` standard normal.
pub fn lifted_target_scale(link: Link, mc_budget: usize, seed: u64) -> Result<McEstimate> {
    if mc_budget < 2 {
        return Err(Error::config("Monte-Carlo budget must be at least 2"));
    }
    Ok(mc::mean_of(mc_budget, seed, "lifted_target_scale", |rng| {
        let z: f64 = rng.sample(StandardNormal);
        0.5 * link.apply(z) * (z * z - 1.0)
    }))
}

/// `E[y x]` by Monte Carlo, with per-coordinate standard errors. For
/// isotropic inputs this is the expected-risk minimizer.
pub fn expected_correlation(
    model: &ObservationModel,
    spec: &DistributionSpec,
    mc_budget: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    model.check_spec(spec)?;
    if model.lifted {
        return Err(Error::config("expected correlation is computed on unlifted inputs"));
    }
    let sampler = InputSampler::new(spec)?;
    let p = spec.dim;
    let parts = mc::chunked(mc_budget, seed, "expected_correlation", |rng, count| {
        let mut m = vec![Moments::default(); p];
        for _ in 0..count {
            let x = sampler.draw(rng);
            let y = model.respond(&x, model.noise.draw(rng));
            for (mj, xj) in m.iter_mut().zip(&x) {
                mj.push(y * xj);
            }
        }
        m
    });
    let total = merge_columns(parts, p);
    Ok((
        total.iter().map(Moments::mean).collect(),
        total.iter().map(|m| m.estimate().std_error).collect(),
    ))
}

fn merge_columns(parts: Vec<Vec<Moments>>, width: usize) -> Vec<Moments> {
    parts.into_iter().fold(vec![Moments::default(); width], |acc, part| {
        acc.into_iter().zip(part).map(|(a, b)| a.merge(b)).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    /// ψ₁ proxy of `y − ⟨x, β♮⟩`.
    pub sigma: f64,
    /// `‖m̂‖₂` with `m̂` the Monte-Carlo mean of `(y − ⟨x, β♮⟩) x`.
    pub rho_global: f64,
    /// `max ⟨m̂, v⟩` over the sampled direction set; `None` when no set or
    /// scale was given or the slice was empty.
    pub rho_local: Option<f64>,
    pub directions: usize,
    /// Largest per-coordinate standard error of `m̂`.
    pub mc_std_error: f64,
    pub mean_vector: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MismatchReport {
    /// Allowance `3·se·√p` used when comparing mismatch estimates to zero.
    pub fn allowance(&self) -> f64 {
        3.0 * self.mc_std_error * (self.mean_vector.len() as f64).sqrt()
    }
}

/// Options for [`mismatch_report`].
#[derive(Debug, Clone)]
pub struct MismatchQuery<'a> {
    pub beta_nat: &'a [f64],
    pub set: Option<&'a HypothesisSet>,
    /// Slice scale; `Some(0.0)` uses the tangent cone.
    pub t: Option<f64>,
    pub mc_budget: usize,
    pub n_dirs: usize,
    pub seed: u64,
}

/// Monte-Carlo estimates of `σ(β♮)`, `ρ(β♮)` and `ρ_t(β♮)`. For lifted
/// models `beta_nat` is a flattened `p × p` matrix.
pub fn mismatch_report(model: &ObservationModel, spec: &DistributionSpec, q: &MismatchQuery<'_>) -> Result<MismatchReport> {
    model.check_spec(spec)?;
    if q.mc_budget < MIN_MISMATCH_BUDGET {
        return Err(Error::config(format!(
            "mismatch budget {} below the minimum of {MIN_MISMATCH_BUDGET}",
            q.mc_budget
        )));
    }
    let width = model.feature_dim();
    Error::check_dim(width, q.beta_nat.len())?;
    let sampler = InputSampler::new(spec)?;
    let center = if model.lifted {
        Some(model.lift_center(spec, q.seed)?.ok_or_else(|| {
            Error::config("in-sample centering has no population counterpart for mismatch estimates")
        })?)
    } else {
        None
    };

    let parts = mc::chunked(q.mc_budget, q.seed, "mismatch", |rng, count| {
        let mut xi = Vec::with_capacity(count);
        let mut m = vec![Moments::default(); width];
        for _ in 0..count {
            let x = sampler.draw(rng);
            let y = model.respond(&x, model.noise.draw(rng));
            let features = match &center {
                Some(c) => lift(&x, c),
                None => x,
            };
            let r = y - features.iter().zip(q.beta_nat).map(|(a, b)| a * b).sum::<f64>();
            xi.push(r);
            for (mj, fj) in m.iter_mut().zip(&features) {
                mj.push(r * fj);
            }
        }
        (xi, m)
    });
    let mut residuals = Vec::with_capacity(q.mc_budget);
    let mut column_parts = Vec::with_capacity(parts.len());
    for (xi, m) in parts {
        residuals.extend(xi);
        column_parts.push(m);
    }
    let columns = merge_columns(column_parts, width);
    let mean_vector: Vec<f64> = columns.iter().map(Moments::mean).collect();
    let std_errors: Vec<f64> = columns.iter().map(|m| m.estimate().std_error).collect();
    let sigma = psi_norm_estimate(&residuals, 1, &DEFAULT_Q_GRID)?.value;
    let rho_global = mean_vector.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut rho_local = None;
    let mut directions = 0;
    let mut note = None;
    if let (Some(set), Some(t)) = (q.set, q.t) {
        Error::check_dim(width, set.ambient_dim())?;
        let dirs = if t > 0.0 {
            sphere_slice_directions(set, q.beta_nat, t, q.n_dirs, q.seed)?.directions
        } else if t == 0.0 {
            cone_directions(set, q.beta_nat, q.n_dirs, q.seed)?.directions
        } else {
            return Err(Error::config(format!("scale must be nonnegative, got {t}")));
        };
        directions = dirs.len();
        if dirs.is_empty() {
            note = Some(if t > 0.0 {
                "scale exceeds diameter".to_string()
            } else {
                "hypothesis set is a single point".to_string()
            });
        } else {
            rho_local = Some(
                dirs.iter()
                    .map(|v| v.iter().zip(&mean_vector).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
    }

    Ok(MismatchReport {
        sigma,
        rho_global,
        rho_local,
        directions,
        mc_std_error: std_errors.iter().copied().fold(0.0, f64::max),
        mean_vector,
        std_errors,
        budget: q.mc_budget,
        note,
    })
}
