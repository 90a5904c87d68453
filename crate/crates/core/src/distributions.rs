//! Input laws, their concentration profiles, and sample-based tail diagnostics.
//!
//! Every law is a coordinate-wise product of a scaled base variable
//! (Gaussian, Rademacher, Laplace or sign-times-exponential), optionally
//! mixed through a fixed matrix `x = M z`.
//!
//! Profile scales are the sharp Chernoff parameters of the base laws, so the
//! mixed-tail bound `2 exp(-min(t²/‖v‖_g², t/‖v‖_e))` holds with all
//! multipliers at 1:
//!
//! | base law (scale `s`)       | `‖v‖_g`          | `‖v‖_e`          |
//! |----------------------------|------------------|------------------|
//! | Gaussian `N(0, s²)`        | `√2 s ‖v‖₂`      | 0                |
//! | Rademacher `±s`            | `√2 s ‖v‖₂`      | 0                |
//! | Laplace / sym. exponential | `2√2 s ‖v‖₂`     | `2√2 s ‖v‖_∞`    |

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const DEFAULT_Q_GRID: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    Rademacher,
    Laplace,
    SymmetricExponential,
    Mixed,
}

impl DistributionKind {
    /// Variance of the base variable at scale 1.
    fn unit_variance(self) -> f64 {
        match self {
            DistributionKind::Gaussian | DistributionKind::Rademacher => 1.0,
            DistributionKind::Laplace | DistributionKind::SymmetricExponential => 2.0,
            DistributionKind::Mixed => f64::NAN,
        }
    }

    pub fn is_sub_gaussian(self) -> bool {
        matches!(self, DistributionKind::Gaussian | DistributionKind::Rademacher)
    }

    /// Scale that gives the base variable unit variance.
    pub fn unit_variance_scale(self) -> f64 {
        1.0 / self.unit_variance().sqrt()
    }

    pub(crate) fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            DistributionKind::Gaussian => rng.sample(StandardNormal),
            DistributionKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DistributionKind::Laplace => {
                // inverse CDF of the standard Laplace law
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            DistributionKind::SymmetricExponential => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            DistributionKind::Mixed => unreachable!("mixed law has no scalar base draw"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixing {
    /// `p × d` matrix, row-major.
    pub matrix: Vec<Vec<f64>>,
    pub base: DistributionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub dim: usize,
    /// Per-coordinate scale applied to the base variable (to `z` for mixed laws).
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<Mixing>,
    #[serde(default = "default_seed_domain")]
    pub seed_domain: String,
}

fn default_seed_domain() -> String {
    "inputs".to_string()
}

impl DistributionSpec {
    /// Centered isotropic law of the given kind (unit-variance coordinates).
    pub fn isotropic(kind: DistributionKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            scale: kind.unit_variance_scale(),
            mixing: None,
            seed_domain: default_seed_domain(),
        }
    }

    /// `x = M z` with `z` drawn coordinate-wise from `base` at `scale`.
    pub fn mixed(matrix: Vec<Vec<f64>>, base: DistributionKind, scale: f64) -> Self {
        Self {
            kind: DistributionKind::Mixed,
            dim: matrix.len(),
            scale,
            mixing: Some(Mixing { matrix, base }),
            seed_domain: default_seed_domain(),
        }
    }

    pub fn with_seed_domain(mut self, domain: impl Into<String>) -> Self {
        self.seed_domain = domain.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("distribution dimension must be at least 1"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::config(format!("scale must be positive, got {}", self.scale)));
        }
        match (&self.kind, &self.mixing) {
            (DistributionKind::Mixed, Some(mixing)) => {
                if mixing.base == DistributionKind::Mixed {
                    return Err(Error::config("mixing base law cannot itself be mixed"));
                }
                if mixing.matrix.len() != self.dim {
                    return Err(Error::config(format!(
                        "mixing matrix has {} rows, dimension is {}",
                        mixing.matrix.len(),
                        self.dim
                    )));
                }
                let cols = mixing.matrix[0].len();
                if cols == 0 || mixing.matrix.iter().any(|row| row.len() != cols) {
                    return Err(Error::config("mixing matrix rows must share a positive length"));
                }
                if mixing.matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("mixing matrix"));
                }
                Ok(())
            }
            (DistributionKind::Mixed, None) => Err(Error::config("mixed law requires a mixing matrix")),
            (_, Some(_)) => Err(Error::config("mixing matrix given for a non-mixed law")),
            (_, None) => Ok(()),
        }
    }

    /// Base law of the independent coordinates (of `z` for mixed laws).
    pub fn base_kind(&self) -> DistributionKind {
        match &self.mixing {
            Some(m) => m.base,
            None => self.kind,
        }
    }

    pub fn mixing_matrix(&self) -> Option<DMatrix<f64>> {
        self.mixing.as_ref().map(|m| rows_to_matrix(&m.matrix))
    }

    /// `E[x xᵀ]`, known in closed form for every supported law.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let var = self.base_kind().unit_variance() * self.scale * self.scale;
        match self.mixing_matrix() {
            Some(m) => &m * m.transpose() * var,
            None => DMatrix::identity(self.dim, self.dim) * var,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.mixing.is_none()
            && (self.kind.unit_variance() * self.scale * self.scale - 1.0).abs() < 1e-12
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Row sampler prepared from a validated spec.
#[derive(Debug, Clone)]
pub struct InputSampler {
    base: DistributionKind,
    scale: f64,
    dim: usize,
    mixing: Option<DMatrix<f64>>,
}

impl InputSampler {
    pub fn new(spec: &DistributionSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            base: spec.base_kind(),
            scale: spec.scale,
            dim: spec.dim,
            mixing: spec.mixing_matrix(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Draws one input vector into `out` (length `dim`).
    pub fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.mixing {
            None => {
                for o in out.iter_mut() {
                    *o = self.scale * self.base.draw(rng);
                }
            }
            Some(m) => {
                let z = DVector::from_fn(m.ncols(), |_, _| self.scale * self.base.draw(rng));
                let x = m * z;
                out.copy_from_slice(x.as_slice());
            }
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.draw_into(rng, &mut out);
        out
    }
}

/// `n × p` matrix of independent draws, fully determined by `(spec, n, seed)`.
pub fn sample_inputs(spec: &DistributionSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::config("sample count must be at least 1"));
    }
    let sampler = InputSampler::new(spec)?;
    let mut rng = seed::child_rng(seed, &spec.seed_domain, 0);
    let p = spec.dim;
    let mut data = vec![0.0; n * p];
    for row in data.chunks_exact_mut(p) {
        sampler.draw_into(&mut rng, row);
    }
    Ok(DMatrix::from_row_slice(n, p, &data))
}

/// Semi-norm descriptor used by concentration profiles.
///
/// Matrix-valued arguments (Frobenius, operator) are passed as row-major
/// flattened square matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SemiNorm {
    Zero,
    EuclideanScaled { c: f64 },
    InfinityScaled { c: f64 },
    MtEuclidean { m: Vec<Vec<f64>>, c: f64 },
    MtInfinity { m: Vec<Vec<f64>>, c: f64 },
    FrobeniusScaled { c: f64 },
    OperatorScaled { c: f64 },
}

impl SemiNorm {
    pub fn is_zero(&self) -> bool {
        match self {
            SemiNorm::Zero => true,
            SemiNorm::EuclideanScaled { c }
            | SemiNorm::InfinityScaled { c }
            | SemiNorm::MtEuclidean { c, .. }
            | SemiNorm::MtInfinity { c, .. }
            | SemiNorm::FrobeniusScaled { c }
            | SemiNorm::OperatorScaled { c } => *c == 0.0,
        }
    }
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn infinity(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn mt_apply(m: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim(m.len(), v.len())?;
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, vi) in m.iter().zip(v) {
        for (o, mij) in out.iter_mut().zip(row) {
            *o += mij * vi;
        }
    }
    Ok(out)
}

pub(crate) fn square_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side == len {
        Ok(side)
    } else {
        Err(Error::config(format!("length {len} is not a square matrix size")))
    }
}

/// Largest singular value of a row-major square matrix.
pub(crate) fn operator_norm(v: &[f64]) -> Result<f64> {
    let side = square_side(v.len())?;
    if side == 0 {
        return Ok(0.0);
    }
    let m = DMatrix::from_row_slice(side, side, v);
    Ok(m.singular_values().max())
}

/// Evaluates a semi-norm descriptor on a vector (or flattened matrix).
pub fn seminorm_eval(norm: &SemiNorm, v: &[f64]) -> Result<f64> {
    Ok(match norm {
        SemiNorm::Zero => 0.0,
        SemiNorm::EuclideanScaled { c } => c * euclidean(v),
        SemiNorm::InfinityScaled { c } => c * infinity(v),
        SemiNorm::MtEuclidean { m, c } => c * euclidean(&mt_apply(m, v)?),
        SemiNorm::MtInfinity { m, c } => c * infinity(&mt_apply(m, v)?),
        SemiNorm::FrobeniusScaled { c } => {
            square_side(v.len())?;
            c * euclidean(v)
        }
        SemiNorm::OperatorScaled { c } => c * operator_norm(v)?,
    })
}

/// Multipliers standing in for the unspecified universal constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    pub g: f64,
    pub e: f64,
}

impl Default for ProfileConstants {
    fn default() -> Self {
        Self { g: 1.0, e: 1.0 }
    }
}

/// The `(‖·‖_g, ‖·‖_e)` pair of a mixed-tail concentration inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub g_norm: SemiNorm,
    pub e_norm: SemiNorm,
    #[serde(default)]
    pub constants: ProfileConstants,
}

impl ConcentrationProfile {
    pub fn new(g_norm: SemiNorm, e_norm: SemiNorm) -> Result<Self> {
        if g_norm.is_zero() && e_norm.is_zero() {
            return Err(Error::config("a concentration profile needs a non-zero semi-norm"));
        }
        Ok(Self { g_norm, e_norm, constants: ProfileConstants::default() })
    }

    pub fn with_constants(mut self, constants: ProfileConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn g(&self, v: &[f64]) -> Result<f64> {
        Ok(self.constants.g * seminorm_eval(&self.g_norm, v)?)
    }

    pub fn e(&self, v: &[f64]) -> Result<f64> {
        Ok(self.constants.e * seminorm_eval(&self.e_norm, v)?)
    }

    /// `2 exp(-min(t²/g², t/e))` with `t/0 = ∞` for `t > 0` and `0` for `t = 0`.
    pub fn tail_bound(&self, g: f64, e: f64, t: f64) -> f64 {
        let ratio = |num: f64, den: f64| {
            if den > 0.0 {
                num / den
            } else if num > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        let exponent = ratio(t * t, g * g).min(ratio(t, e));
        2.0 * (-exponent).exp()
    }
}

/// Sub-Gaussian (Chernoff) parameter of one coordinate.
fn sub_gaussian_scale(base: DistributionKind, scale: f64) -> f64 {
    match base {
        DistributionKind::Gaussian | DistributionKind::Rademacher => std::f64::consts::SQRT_2 * scale,
        _ => 2.0 * std::f64::consts::SQRT_2 * scale,
    }
}

/// Profile under which `spec` satisfies the mixed-tail bound with unit constants.
pub fn profile_for(spec: &DistributionSpec) -> ConcentrationProfile {
    let base = spec.base_kind();
    let c = sub_gaussian_scale(base, spec.scale);
    let (g_norm, e_norm) = match (&spec.mixing, base.is_sub_gaussian()) {
        (None, true) => (SemiNorm::EuclideanScaled { c }, SemiNorm::Zero),
        (None, false) => (SemiNorm::EuclideanScaled { c }, SemiNorm::InfinityScaled { c }),
        (Some(mix), true) => (SemiNorm::MtEuclidean { m: mix.matrix.clone(), c }, SemiNorm::Zero),
        (Some(mix), false) => (
            SemiNorm::MtEuclidean { m: mix.matrix.clone(), c },
            SemiNorm::MtInfinity { m: mix.matrix.clone(), c },
        ),
    };
    ConcentrationProfile { g_norm, e_norm, constants: ProfileConstants::default() }
}

/// Purely exponential profile `(0, c‖·‖₂)` for uniformly sub-exponential inputs.
///
/// `c = max(e₀, g₀/√ln 2)` turns a valid `(g₀‖·‖₂, e₀‖·‖_∞)` bound into a
/// valid single-regime bound.
pub fn uniform_subexponential_profile(spec: &DistributionSpec) -> ConcentrationProfile {
    let base = spec.base_kind();
    let g0 = sub_gaussian_scale(base, spec.scale);
    let e0 = if base.is_sub_gaussian() { 0.0 } else { g0 };
    let c = e0.max(g0 / std::f64::consts::LN_2.sqrt());
    let e_norm = match &spec.mixing {
        None => SemiNorm::EuclideanScaled { c },
        Some(mix) => SemiNorm::MtEuclidean { m: mix.matrix.clone(), c },
    };
    ConcentrationProfile { g_norm: SemiNorm::Zero, e_norm, constants: ProfileConstants::default() }
}

/// Hanson-Wright profile `(R²‖·‖_F, R²‖·‖_op)` of the centered lift `x xᵀ − E[x xᵀ]`.
///
/// `R` is the coordinate sub-Gaussian scale. The multiplier 2 on both parts
/// comes from the chi-square deviation bound for Gaussian quadratic forms.
pub fn lifted_profile(spec: &DistributionSpec) -> Result<ConcentrationProfile> {
    if spec.mixing.is_some() || !spec.kind.is_sub_gaussian() {
        return Err(Error::config(
            "lifted profile requires independent sub-Gaussian coordinates",
        ));
    }
    let r = sub_gaussian_scale(spec.kind, spec.scale);
    Ok(ConcentrationProfile {
        g_norm: SemiNorm::FrobeniusScaled { c: r * r },
        e_norm: SemiNorm::OperatorScaled { c: r * r },
        constants: ProfileConstants { g: 2.0, e: 2.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrliczEstimate {
    pub alpha: u8,
    pub value: f64,
    pub q_grid: Vec<f64>,
    pub sample_count: usize,
}

/// Moment proxy `max_q (mean |Z|^q)^{1/q} / q^{1/alpha}` of the ψ_alpha norm.
pub fn psi_norm_estimate(samples: &[f64], alpha: u8, q_grid: &[f64]) -> Result<OrliczEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if q_grid.is_empty() {
        return Err(Error::Empty("q_grid"));
    }
    if alpha != 1 && alpha != 2 {
        return Err(Error::config(format!("alpha must be 1 or 2, got {alpha}")));
    }
    if let Some(q) = q_grid.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
        return Err(Error::config(format!("moment order {q} outside [1, ∞)")));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    // normalize by the largest magnitude to keep high moments finite
    let peak = infinity(samples);
    let value = if peak == 0.0 {
        0.0
    } else {
        let n = samples.len() as f64;
        q_grid
            .iter()
            .map(|&q| {
                let moment = samples.iter().map(|s| (s.abs() / peak).powf(q)).sum::<f64>() / n;
                peak * moment.powf(1.0 / q) / q.powf(1.0 / f64::from(alpha))
            })
            .fold(0.0, f64::max)
    };
    Ok(OrliczEstimate { alpha, value, q_grid: q_grid.to_vec(), sample_count: samples.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub bound: Vec<f64>,
    /// Binomial allowance (3 standard errors) added to each bound.
    pub allowance: Vec<f64>,
    pub violations: usize,
    /// Smallest common multiplier on both semi-norms that makes every
    /// empirical tail value fit under the bound.
    pub min_constant: f64,
    /// Both semi-norms vanish on `v` while `⟨x, v⟩` does not.
    pub profile_failure: bool,
    pub trials: usize,
}

pub const MIN_TAIL_TRIALS: usize = 1000;

/// Monte-Carlo check of `P(|⟨x,v⟩| ≥ t) ≤ 2 exp(-min(t²/‖v‖_g², t/‖v‖_e))`.
pub fn verify_bernstein_tail(
    spec: &DistributionSpec,
    profile: &ConcentrationProfile,
    v: &[f64],
    thresholds: &[f64],
    mc_trials: usize,
    seed: u64,
) -> Result<TailReport> {
    if mc_trials < MIN_TAIL_TRIALS {
        return Err(Error::config(format!(
            "tail verification needs at least {MIN_TAIL_TRIALS} trials, got {mc_trials}"
        )));
    }
    Error::check_dim(spec.dim, v.len())?;
    if thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::config("thresholds must be finite and nonnegative"));
    }
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);

    let sampler = InputSampler::new(spec)?;
    let mut rng = seed::child_rng(seed, "bernstein_tail", 0);
    let mut x = vec![0.0; spec.dim];
    let mut magnitudes: Vec<f64> = (0..mc_trials)
        .map(|_| {
            sampler.draw_into(&mut rng, &mut x);
            x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs()
        })
        .collect();
    magnitudes.sort_by(f64::total_cmp);

    let g = profile.g(v)?;
    let e = profile.e(v)?;
    let trials = mc_trials as f64;
    let mut empirical_tail = Vec::with_capacity(thresholds.len());
    let mut bound = Vec::with_capacity(thresholds.len());
    let mut allowance = Vec::with_capacity(thresholds.len());
    let mut violations = 0;
    let mut min_constant: f64 = 0.0;
    for &t in &thresholds {
        let below = magnitudes.partition_point(|m| *m < t);
        let tail = (mc_trials - below) as f64 / trials;
        let b = profile.tail_bound(g, e, t);
        let slack = 3.0 * (tail * (1.0 - tail) / trials).sqrt();
        if tail > b + slack {
            violations += 1;
        }
        min_constant = min_constant.max(required_constant(g, e, t, tail));
        empirical_tail.push(tail);
        bound.push(b);
        allowance.push(slack);
    }
    let profile_failure = g == 0.0 && e == 0.0 && magnitudes.last().is_some_and(|m| *m > 0.0);
    Ok(TailReport {
        thresholds,
        empirical_tail,
        bound,
        allowance,
        violations,
        min_constant,
        profile_failure,
        trials: mc_trials,
    })
}

/// Smallest `c` with `tail ≤ 2 exp(-min(t²/(c g)², t/(c e)))`.
fn required_constant(g: f64, e: f64, t: f64, tail: f64) -> f64 {
    if tail <= 0.0 || t == 0.0 {
        return 0.0;
    }
    let h = (2.0 / tail).ln();
    let from_g = if g > 0.0 { t / (g * h.sqrt()) } else { f64::INFINITY };
    let from_e = if e > 0.0 { t / (e * h) } else { f64::INFINITY };
    from_g.min(from_e)
}

/// `‖(ξ_i)‖₂ / (√n · ψ₁-proxy(ξ))`, with `0/0 := 0`.
pub fn xi_norm_concentration_check(samples: &[f64]) -> Result<f64> {
    let proxy = psi_norm_estimate(samples, 1, &DEFAULT_Q_GRID)?.value;
    if proxy == 0.0 {
        return Ok(0.0);
    }
    Ok(euclidean(samples) / ((samples.len() as f64).sqrt() * proxy))
}
