//! Widths, small-ball estimates and closed-form complexity bounds, and their
//! assembly into sample-size conditions and predicted errors.
//!
//! Every hidden universal constant is 1 and all logarithms are natural.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{ConcentrationProfile, DistributionKind, DistributionSpec, InputSampler, SemiNorm};
use crate::error::{Error, Result};
use crate::geometry::{seminorm_diameter, HypothesisSet, Skeleton};
use crate::mc::{self, Moments};

pub const MIN_WIDTH_TRIALS: usize = 100;
/// Constant in the exponential-versus-Gaussian width comparison.
pub const EXP_WIDTH_FACTOR: f64 = 3.0;
pub const CONSTANTS_CONVENTION: &str = "all hidden constants = 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthKind {
    Gaussian,
    Exponential,
    Empirical { n: usize },
}

impl fmt::Display for WidthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WidthKind::Gaussian => write!(f, "gaussian"),
            WidthKind::Exponential => write!(f, "exponential"),
            WidthKind::Empirical { n } => write!(f, "empirical(n={n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub width_kind: WidthKind,
    pub target: String,
}

/// Set or finite point list whose supremum process is measured.
#[derive(Debug, Clone, Copy)]
pub enum WidthTarget<'a> {
    Set(&'a HypothesisSet),
    Skeleton(&'a Skeleton),
}

impl<'a> From<&'a HypothesisSet> for WidthTarget<'a> {
    fn from(s: &'a HypothesisSet) -> Self {
        WidthTarget::Set(s)
    }
}

impl<'a> From<&'a Skeleton> for WidthTarget<'a> {
    fn from(s: &'a Skeleton) -> Self {
        WidthTarget::Skeleton(s)
    }
}

impl WidthTarget<'_> {
    pub fn dim(&self) -> usize {
        match self {
            WidthTarget::Set(s) => s.ambient_dim(),
            WidthTarget::Skeleton(s) => s.dim(),
        }
    }

    fn sup(&self, z: &[f64]) -> Result<f64> {
        match self {
            WidthTarget::Set(s) => s.support_function(z),
            WidthTarget::Skeleton(s) => s.support_function(z),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            WidthTarget::Set(s) => s.validate(),
            WidthTarget::Skeleton(s) => {
                if s.points.is_empty() {
                    Err(Error::Empty("skeleton points"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WidthTarget::Set(s) => serde_json::to_string(s).unwrap_or_else(|_| "set".into()),
            WidthTarget::Skeleton(s) => format!("skeleton of {} points: {}", s.points.len(), s.covered_set),
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_WIDTH_TRIALS {
        return Err(Error::config(format!("at least {MIN_WIDTH_TRIALS} trials required, got {trials}")));
    }
    Ok(())
}

fn width_with<F>(target: WidthTarget<'_>, trials: usize, seed: u64, kind: WidthKind, label: &str, fill: F) -> Result<WidthEstimate>
where
    F: Fn(&mut crate::seed::Rng, &mut [f64]) + Sync,
{
    check_trials(trials)?;
    target.validate()?;
    let dim = target.dim();
    let parts = mc::chunked(trials, seed, label, |rng, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut z = vec![0.0; dim];
        for _ in 0..count {
            fill(rng, &mut z);
            m.push(target.sup(&z)?);
        }
        Ok(m)
    });
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    let est = total.estimate();
    Ok(WidthEstimate { mean: est.value, std_error: est.std_error, trials, width_kind: kind, target: target.describe() })
}

/// `E sup_{v ∈ L} ⟨g, v⟩` with `g` standard normal.
pub fn gaussian_width<'a>(target: impl Into<WidthTarget<'a>>, trials: usize, seed: u64) -> Result<WidthEstimate> {
    width_with(target.into(), trials, seed, WidthKind::Gaussian, "gaussian_width", |rng, z| {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    })
}

/// `E sup_{v ∈ L} ⟨Y, v⟩` with independent `P(|Yⱼ| ≥ t) = e^{−t}` coordinates.
pub fn exponential_width<'a>(target: impl Into<WidthTarget<'a>>, trials: usize, seed: u64) -> Result<WidthEstimate> {
    width_with(target.into(), trials, seed, WidthKind::Exponential, "exponential_width", |rng, z| {
        z.iter_mut().for_each(|v| *v = DistributionKind::Laplace.draw(rng));
    })
}

/// `E sup_{v ∈ L} ⟨n^{-1/2} Σ εᵢ xᵢ, v⟩` with fresh signs and inputs per trial.
pub fn empirical_width<'a>(
    target: impl Into<WidthTarget<'a>>,
    spec: &DistributionSpec,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    if n == 0 {
        return Err(Error::config("empirical width needs n ≥ 1"));
    }
    let target = target.into();
    Error::check_dim(target.dim(), spec.dim)?;
    let sampler = InputSampler::new(spec)?;
    let norm = 1.0 / (n as f64).sqrt();
    width_with(target, trials, seed, WidthKind::Empirical { n }, "empirical_width", |rng, z| {
        z.iter_mut().for_each(|v| *v = 0.0);
        let mut x = vec![0.0; z.len()];
        for _ in 0..n {
            sampler.draw_into(rng, &mut x);
            let eps = if rng.random::<bool>() { norm } else { -norm };
            z.iter_mut().zip(&x).for_each(|(a, b)| *a += eps * b);
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaRule {
    Fixed { theta: f64 },
    /// `θ = τ = α̂/4`.
    PaleyZygmund,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub theta: f64,
    /// `min_v P(|⟨x, v⟩| ≥ 2θ)` over the supplied directions.
    pub q_hat: f64,
    /// `min_v E|⟨x, v⟩|`.
    pub alpha_hat: f64,
    /// `max_v E⟨x, v⟩²`.
    pub delta_hat: f64,
    /// `α̂³ / (16 δ̂)`.
    pub pz_bound: f64,
    /// `α̂/4`, present when `α̂ > 0`.
    pub tau: Option<f64>,
    pub alpha_std_error: f64,
    pub delta_std_error: f64,
    pub q_std_error: f64,
    /// Three standard errors of `τ q̂ − pz_bound` (delta method).
    pub mc_allowance: f64,
    /// `τ q̂ ≥ pz_bound − mc_allowance`.
    pub pz_holds: bool,
    /// `α̂` is not distinguishable from 0.
    pub degenerate: bool,
    pub direction_count: usize,
    pub trials: usize,
}

/// Monte-Carlo small-ball quantities over a finite direction list, using the
/// same input draws for every direction.
pub fn small_ball_report(
    spec: &DistributionSpec,
    directions: &[Vec<f64>],
    theta_rule: ThetaRule,
    trials: usize,
    seed: u64,
) -> Result<SmallBallEstimate> {
    if directions.is_empty() {
        return Err(Error::Empty("directions"));
    }
    if trials < 2 {
        return Err(Error::config("small-ball estimates need at least 2 trials"));
    }
    for d in directions {
        Error::check_dim(spec.dim, d.len())?;
    }
    if let ThetaRule::Fixed { theta } = theta_rule {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::config(format!("theta must be nonnegative, got {theta}")));
        }
    }
    let sampler = InputSampler::new(spec)?;
    let k = directions.len();
    let project = |x: &[f64], v: &[f64]| -> f64 { x.iter().zip(v).map(|(a, b)| a * b).sum() };

    let first = mc::chunked(trials, seed, "small_ball", |rng, count| {
        let mut abs = vec![Moments::default(); k];
        let mut sq = vec![Moments::default(); k];
        let mut x = vec![0.0; spec.dim];
        for _ in 0..count {
            sampler.draw_into(rng, &mut x);
            for (j, v) in directions.iter().enumerate() {
                let z = project(&x, v);
                abs[j].push(z.abs());
                sq[j].push(z * z);
            }
        }
        (abs, sq)
    });
    let mut abs = vec![Moments::default(); k];
    let mut sq = vec![Moments::default(); k];
    for (a, s) in first {
        for j in 0..k {
            abs[j] = abs[j].merge(a[j]);
            sq[j] = sq[j].merge(s[j]);
        }
    }
    let (ia, alpha) = argmin(abs.iter().map(Moments::mean));
    let (id, delta) = argmin(sq.iter().map(|m| -m.mean()));
    let delta = -delta;
    let alpha_se = abs[ia].estimate().std_error;
    let delta_se = sq[id].estimate().std_error;

    let theta = match theta_rule {
        ThetaRule::Fixed { theta } => theta,
        ThetaRule::PaleyZygmund => alpha / 4.0,
    };
    // second pass over the same draws
    let hits = mc::chunked(trials, seed, "small_ball", |rng, count| {
        let mut hits = vec![0usize; k];
        let mut x = vec![0.0; spec.dim];
        for _ in 0..count {
            sampler.draw_into(rng, &mut x);
            for (j, v) in directions.iter().enumerate() {
                if project(&x, v).abs() >= 2.0 * theta {
                    hits[j] += 1;
                }
            }
        }
        hits
    });
    let mut total_hits = vec![0usize; k];
    for h in hits {
        total_hits.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let n = trials as f64;
    let (_, q_hat) = argmin(total_hits.iter().map(|h| *h as f64 / n));
    let q_se = (q_hat * (1.0 - q_hat) / n).sqrt();

    let pz_bound = if delta > 0.0 { alpha.powi(3) / (16.0 * delta) } else { 0.0 };
    let tau = (alpha > 0.0).then_some(alpha / 4.0);
    let tq = theta * q_hat;
    let tq_se = ((q_hat * alpha_se / 4.0).powi(2) + (theta * q_se).powi(2)).sqrt();
    let pz_se = if alpha > 0.0 && delta > 0.0 {
        pz_bound * ((3.0 * alpha_se / alpha).powi(2) + (delta_se / delta).powi(2)).sqrt()
    } else {
        0.0
    };
    let mc_allowance = 3.0 * (tq_se * tq_se + pz_se * pz_se).sqrt();
    Ok(SmallBallEstimate {
        theta,
        q_hat,
        alpha_hat: alpha,
        delta_hat: delta,
        pz_bound,
        tau,
        alpha_std_error: alpha_se,
        delta_std_error: delta_se,
        q_std_error: q_se,
        mc_allowance,
        pz_holds: tq >= pz_bound - mc_allowance,
        degenerate: alpha <= 3.0 * alpha_se,
        direction_count: k,
        trials,
    })
}

fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
}

/// A complexity value together with the formula that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProxy {
    pub value: f64,
    pub provenance: String,
}

impl ComplexityProxy {
    pub fn new(value: f64, provenance: impl Into<String>) -> Self {
        Self { value, provenance: provenance.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeComplexity {
    pub q_bound: f64,
    pub m_bound: f64,
    pub delta_g: f64,
    pub delta_e: f64,
    pub vertices: usize,
}

impl PolytopeComplexity {
    pub fn q_proxy(&self) -> ComplexityProxy {
        ComplexityProxy::new(self.q_bound, format!("polytope bound, D = {}", self.vertices))
    }

    pub fn m_proxy(&self) -> ComplexityProxy {
        ComplexityProxy::new(self.m_bound, format!("polytope bound, D = {}", self.vertices))
    }
}

/// `q = Δ_e log D/√n + (Δ_g + Δ_e)√(log D)` and `m = Δ_e log D + Δ_g √(log D)`
/// with profile diameters taken pairwise over the vertices.
pub fn polytope_complexity(set: &HypothesisSet, profile: &ConcentrationProfile, n: usize) -> Result<PolytopeComplexity> {
    set.validate()?;
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let vertices = set
        .vertices()
        .ok_or_else(|| Error::config("polytope complexity needs a vertex representation"))?;
    let scaled = |norm: &SemiNorm, c: f64| -> Result<f64> { Ok(c * seminorm_diameter(&vertices, norm)?) };
    let delta_g = scaled(&profile.g_norm, profile.constants.g)?;
    let delta_e = scaled(&profile.e_norm, profile.constants.e)?;
    let log_d = (vertices.len() as f64).ln();
    Ok(PolytopeComplexity {
        q_bound: delta_e * log_d / (n as f64).sqrt() + (delta_g + delta_e) * log_d.sqrt(),
        m_bound: delta_e * log_d + delta_g * log_d.sqrt(),
        delta_g,
        delta_e,
        vertices: vertices.len(),
    })
}

/// Regimes of the sparse descent-cone bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SparseRegime {
    /// Sub-Gaussian, `(g, e) = (‖·‖₂, 0)`.
    #[serde(rename = "(2,0)")]
    TwoZero,
    /// `(‖·‖₂, ‖·‖_∞)`.
    #[serde(rename = "(2,inf)")]
    TwoInf,
    /// `(0, ‖·‖₂)`, m-complexity.
    #[serde(rename = "(0,2)-m")]
    ZeroTwoM,
    /// `(0, ‖·‖₂)`, q-complexity.
    #[serde(rename = "(0,2)-q")]
    ZeroTwoQ,
}

impl SparseRegime {
    pub const ALL: [SparseRegime; 4] = [
        SparseRegime::TwoZero,
        SparseRegime::TwoInf,
        SparseRegime::ZeroTwoM,
        SparseRegime::ZeroTwoQ,
    ];
}

impl fmt::Display for SparseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SparseRegime::TwoZero => "(2,0)",
            SparseRegime::TwoInf => "(2,inf)",
            SparseRegime::ZeroTwoM => "(0,2)-m",
            SparseRegime::ZeroTwoQ => "(0,2)-q",
        })
    }
}

impl FromStr for SparseRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace() && *c != '(' && *c != ')').collect();
        match key.to_ascii_lowercase().as_str() {
            "2,0" => Ok(SparseRegime::TwoZero),
            "2,inf" => Ok(SparseRegime::TwoInf),
            "0,2-m" => Ok(SparseRegime::ZeroTwoM),
            "0,2-q" => Ok(SparseRegime::ZeroTwoQ),
            _ => Err(Error::Parse(format!("unknown sparse regime {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseBound {
    pub value: f64,
    /// `k ≤ p/2`; outside this range the bound is computed but not meaningful.
    pub in_regime: bool,
}

/// Closed-form complexity of the ℓ1 descent cone at a `k`-sparse point.
pub fn sparse_cone_bound(k: usize, p: usize, n: usize, regime: SparseRegime) -> Result<SparseBound> {
    if k == 0 || k > p {
        return Err(Error::config(format!("sparsity {k} must lie in 1..={p}")));
    }
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let kf = k as f64;
    let log_pk = (p as f64 / kf).ln();
    let value = match regime {
        SparseRegime::TwoZero => (kf * log_pk).sqrt(),
        SparseRegime::TwoInf => (kf * log_pk * (p as f64).ln()).sqrt(),
        SparseRegime::ZeroTwoM => kf * log_pk,
        SparseRegime::ZeroTwoQ => kf / (n as f64).sqrt() * log_pk + (kf * log_pk).sqrt(),
    };
    Ok(SparseBound { value, in_regime: 2 * k <= p })
}

/// `Δ(points) · (log |points|)^{1/α}`.
pub fn finite_gamma_bound(points: &Skeleton, alpha: u8, metric: &SemiNorm) -> Result<f64> {
    if alpha != 1 && alpha != 2 {
        return Err(Error::config(format!("alpha must be 1 or 2, got {alpha}")));
    }
    if points.points.is_empty() {
        return Err(Error::Empty("skeleton points"));
    }
    if points.points.len() == 1 {
        return Ok(0.0);
    }
    let diameter = seminorm_diameter(&points.points, metric)?;
    Ok(diameter * (points.points.len() as f64).ln().powf(1.0 / f64::from(alpha)))
}

/// `3 ∫₀¹ [k (log(p/k) + log(9/ε))]^{1/α} dε`, integrated after the
/// substitution `ε = e^{−s}`.
pub fn dudley_sparse_bound(k: usize, p: usize, alpha: u8) -> Result<f64> {
    if k == 0 || k > p {
        return Err(Error::config(format!("sparsity {k} must lie in 1..={p}")));
    }
    if alpha != 1 && alpha != 2 {
        return Err(Error::config(format!("alpha must be 1 or 2, got {alpha}")));
    }
    let kf = k as f64;
    let a = (p as f64 / kf).ln() + 9f64.ln();
    let power = 1.0 / f64::from(alpha);
    let integrand = |s: f64| (kf * (a + s)).powf(power) * (-s).exp();
    // the tail beyond s = 60 is below 1e-24 relative
    let value = adaptive_simpson(&integrand, 0.0, 60.0, 1e-10, 50);
    Ok(3.0 * value)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVersion {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundAssembly {
    pub version: BoundVersion,
    pub q_proxy: ComplexityProxy,
    pub m_proxy: ComplexityProxy,
    pub tau: f64,
    pub q_smallball: f64,
    pub u: f64,
    pub n: usize,
    pub sigma: f64,
    pub rho: f64,
    /// Right side of the sample-size condition.
    pub n_required: f64,
    pub sample_size_met: bool,
    /// Error threshold `t` (local) or error bound (global).
    pub predicted_error: f64,
    pub constants_convention: String,
}

/// Inputs of [`assemble_bound`] besides the small-ball estimate.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub q_proxy: ComplexityProxy,
    pub m_proxy: ComplexityProxy,
    pub u: f64,
    pub n: usize,
    pub sigma: f64,
    /// `ρ_t` for the local version, `ρ₀` for the global one.
    pub rho: f64,
    pub version: BoundVersion,
}

/// Evaluates the sample-size condition and the error bound with unit constants.
///
/// Local: `n ≥ ((q + τu)/(τQ))²`, `t = [ρ_t + u²σm/√n]₊/(τQ)²`.
/// Global: same condition, error `max{1,(τQ)⁻²}·[ρ₀ + max{1,u²σ}√m/n^{1/4}]₊`.
pub fn assemble_bound(inputs: &BoundInputs, smallball: &SmallBallEstimate) -> Result<BoundAssembly> {
    let BoundInputs { q_proxy, m_proxy, u, n, sigma, rho, version } = inputs.clone();
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    if !(u >= 8.0) {
        return Err(Error::OutOfRange(format!("confidence parameter u = {u} must be at least 8")));
    }
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    if smallball.degenerate {
        return Err(Error::Degenerate("small-ball estimate is degenerate".into()));
    }
    for (name, v) in [("q_proxy", q_proxy.value), ("m_proxy", m_proxy.value), ("sigma", sigma)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    if !rho.is_finite() {
        return Err(Error::NonFinite("rho"));
    }
    let tau = smallball.tau.unwrap_or(0.0);
    let tq = tau * smallball.q_hat;
    if tq <= 0.0 {
        return Err(Error::Degenerate("τ·Q vanishes".into()));
    }
    let nf = n as f64;
    let n_required = ((q_proxy.value + tau * u) / tq).powi(2);
    let predicted_error = match version {
        BoundVersion::Local => (rho + u * u * sigma * m_proxy.value / nf.sqrt()).max(0.0) / (tq * tq),
        BoundVersion::Global => {
            (1f64).max(tq.powi(-2)) * (rho + (1f64).max(u * u * sigma) * m_proxy.value.sqrt() / nf.powf(0.25)).max(0.0)
        }
    };
    Ok(BoundAssembly {
        version,
        q_proxy,
        m_proxy,
        tau,
        q_smallball: smallball.q_hat,
        u,
        n,
        sigma,
        rho,
        n_required,
        sample_size_met: nf >= n_required,
        predicted_error,
        constants_convention: CONSTANTS_CONVENTION.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{profile_for, uniform_subexponential_profile};
    use crate::geometry::sparse_skeleton_sampler;

    fn origin(p: usize) -> Skeleton {
        Skeleton::new(vec![vec![0.0; p]], "origin").unwrap()
    }

    #[test]
    fn widths_of_origin_are_zero() {
        let o = origin(3);
        assert_eq!(gaussian_width(&o, 100, 1).unwrap().mean, 0.0);
        assert_eq!(exponential_width(&o, 100, 1).unwrap().mean, 0.0);
        let spec = DistributionSpec::isotropic(DistributionKind::Laplace, 3);
        assert_eq!(empirical_width(&o, &spec, 5, 100, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(gaussian_width(&origin(1), 99, 0).is_err());
    }

    #[test]
    fn gaussian_width_of_interval() {
        let w = gaussian_width(&HypothesisSet::l2_ball(1.0, vec![0.0]), 200_000, 2).unwrap();
        let oracle = (2.0 / std::f64::consts::PI).sqrt();
        assert!((w.mean - oracle).abs() < 3.0 * w.std_error, "{w:?}");
    }

    #[test]
    fn exponential_width_of_interval() {
        let w = exponential_width(&HypothesisSet::l2_ball(1.0, vec![0.0]), 200_000, 3).unwrap();
        assert!((w.mean - 1.0).abs() < 3.0 * w.std_error, "{w:?}");
    }

    #[test]
    fn l1_width_matches_max_of_gaussians() {
        let set = HypothesisSet::l1_ball(1.0, 16);
        let w = gaussian_width(&set, 50_000, 4).unwrap();
        let oracle = mc::mean_of(50_000, 99, "oracle", |rng| {
            (0..16).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).fold(0.0, f64::max)
        });
        let se = (w.std_error.powi(2) + oracle.std_error.powi(2)).sqrt();
        assert!((w.mean - oracle.value).abs() < 3.0 * se);
        let e = exponential_width(&set, 50_000, 4).unwrap();
        let oracle = mc::mean_of(50_000, 98, "oracle", |rng| {
            (0..16).map(|_| -> f64 { rand_distr::Distribution::sample(&rand_distr::Exp1, rng) }).fold(0.0, f64::max)
        });
        let se = (e.std_error.powi(2) + oracle.std_error.powi(2)).sqrt();
        assert!((e.mean - oracle.value).abs() < 3.0 * se);
    }

    #[test]
    fn small_ball_two_point_law() {
        let spec = DistributionSpec::isotropic(DistributionKind::Rademacher, 3);
        let dirs: Vec<Vec<f64>> = (0..3).map(|j| (0..3).map(|i| f64::from(u8::from(i == j))).collect()).collect();
        let r = small_ball_report(&spec, &dirs, ThetaRule::Fixed { theta: 0.4 }, 1000, 1).unwrap();
        assert_eq!(r.q_hat, 1.0);
        assert_eq!(r.alpha_hat, 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn small_ball_degenerate_on_hyperplane() {
        let spec = DistributionSpec::mixed(vec![vec![1.0, 0.0], vec![0.0, 0.0]], DistributionKind::Gaussian, 1.0);
        let normal = [vec![0.0, 1.0]];
        let r = small_ball_report(&spec, &normal, ThetaRule::Fixed { theta: 0.1 }, 1000, 1).unwrap();
        assert_eq!(r.q_hat, 0.0);
        assert!(r.degenerate);
        assert!(r.tau.is_none());
        let pz = small_ball_report(&spec, &normal, ThetaRule::PaleyZygmund, 1000, 1).unwrap();
        assert!(pz.degenerate);
        assert_eq!(pz.pz_bound, 0.0);
    }

    #[test]
    fn paley_zygmund_gaussian() {
        let spec = DistributionSpec::isotropic(DistributionKind::Gaussian, 4);
        let sk = sparse_skeleton_sampler(4, 4, 30, 5).unwrap();
        let dirs: Vec<Vec<f64>> = sk.points.iter().map(|p| p.iter().map(|x| x / 3.0).collect()).collect();
        let r = small_ball_report(&spec, &dirs, ThetaRule::PaleyZygmund, 100_000, 2).unwrap();
        assert!(r.pz_holds);
        assert!((r.alpha_hat - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.02);
        assert!((r.pz_bound - (2.0 / std::f64::consts::PI).powf(1.5) / 16.0).abs() < 0.003);
    }

    #[test]
    fn polytope_complexity_examples() {
        let spec = DistributionSpec::isotropic(DistributionKind::Gaussian, 5);
        let set = HypothesisSet::l1_ball(2.0, 5);
        let prof = profile_for(&spec);
        let c = std::f64::consts::SQRT_2;
        let pc = polytope_complexity(&set, &prof, 100).unwrap();
        let log_d = 10f64.ln();
        assert!((pc.m_bound - 2.0 * 2.0 * c * log_d.sqrt()).abs() < 1e-12);
        assert_eq!(pc.delta_e, 0.0);
        let laplace = DistributionSpec::isotropic(DistributionKind::Laplace, 5);
        let ue = uniform_subexponential_profile(&laplace);
        let pe = polytope_complexity(&set, &ue, 100).unwrap();
        let ce = match ue.e_norm {
            SemiNorm::EuclideanScaled { c } => c,
            _ => unreachable!(),
        };
        assert!((pe.m_bound - 2.0 * 2.0 * ce * log_d).abs() < 1e-12);
        let single = HypothesisSet::polytope(vec![vec![1.0, 1.0, 1.0, 1.0, 1.0]]);
        let ps = polytope_complexity(&single, &prof, 100).unwrap();
        assert_eq!((ps.q_bound, ps.m_bound), (0.0, 0.0));
        assert!(polytope_complexity(&HypothesisSet::l2_ball(1.0, vec![0.0; 5]), &prof, 10).is_err());
    }

    #[test]
    fn sparse_bound_examples() {
        let b = sparse_cone_bound(4, 8, 100, SparseRegime::TwoZero).unwrap();
        assert!((b.value - (4.0 * 2f64.ln()).sqrt()).abs() < 1e-12);
        assert!(b.in_regime);
        assert!(!sparse_cone_bound(5, 8, 100, SparseRegime::TwoZero).unwrap().in_regime);
        let q = sparse_cone_bound(4, 256, 10_000, SparseRegime::ZeroTwoQ).unwrap().value;
        let hand = 0.04 * 64f64.ln() + (4.0 * 64f64.ln()).sqrt();
        assert!((q - hand).abs() < 1e-12);
        assert!((q - 4.246).abs() / 4.246 < 1e-3);
        let m1 = sparse_cone_bound(3, 30, 1, SparseRegime::ZeroTwoM).unwrap().value;
        let m2 = sparse_cone_bound(6, 60, 1, SparseRegime::ZeroTwoM).unwrap().value;
        assert!((m2 - 2.0 * m1).abs() < 1e-12);
        assert!(sparse_cone_bound(0, 5, 1, SparseRegime::TwoInf).is_err());
    }

    #[test]
    fn regime_parsing() {
        for r in SparseRegime::ALL {
            assert_eq!(r.to_string().parse::<SparseRegime>().unwrap(), r);
        }
        assert_eq!("2, inf".parse::<SparseRegime>().unwrap(), SparseRegime::TwoInf);
        assert!("3,1".parse::<SparseRegime>().is_err());
    }

    #[test]
    fn finite_gamma_examples() {
        let eu = SemiNorm::EuclideanScaled { c: 1.0 };
        assert_eq!(finite_gamma_bound(&origin(2), 2, &eu).unwrap(), 0.0);
        let two = Skeleton::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], "pair").unwrap();
        assert!((finite_gamma_bound(&two, 2, &eu).unwrap() - 2.0 * 2f64.ln().sqrt()).abs() < 1e-12);
        let axes = HypothesisSet::l1_ball(1.5, 4).vertices().unwrap();
        let sk = Skeleton::new(axes, "axes").unwrap();
        assert!((finite_gamma_bound(&sk, 1, &eu).unwrap() - 3.0 * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dudley_closed_forms() {
        // α = 1: 3k(log(p/k) + log 9 + 1)
        for (k, p) in [(1, 1), (1, 3), (4, 100)] {
            let closed = 3.0 * k as f64 * ((p as f64 / k as f64).ln() + 9f64.ln() + 1.0);
            let v = dudley_sparse_bound(k, p, 1).unwrap();
            assert!((v - closed).abs() < 1e-6 * closed, "{v} vs {closed}");
        }
        // α = 2: 3√k e^a Γ(3/2, a)
        use statrs::function::gamma::{gamma, gamma_ur};
        for (k, p) in [(1, 16), (3, 200)] {
            let a = (p as f64 / k as f64).ln() + 9f64.ln();
            let closed = 3.0 * (k as f64).sqrt() * a.exp() * gamma_ur(1.5, a) * gamma(1.5);
            let v = dudley_sparse_bound(k, p, 2).unwrap();
            assert!((v - closed).abs() < 1e-6 * closed, "{v} vs {closed}");
        }
    }

    #[test]
    fn dudley_monotone_in_p() {
        let mut last = 0.0;
        for p in [8, 16, 64, 256, 1024] {
            let v = dudley_sparse_bound(4, p, 2).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    fn smallball(q: f64, alpha: f64) -> SmallBallEstimate {
        SmallBallEstimate {
            theta: alpha / 4.0,
            q_hat: q,
            alpha_hat: alpha,
            delta_hat: 1.0,
            pz_bound: alpha.powi(3) / 16.0,
            tau: Some(alpha / 4.0),
            alpha_std_error: 0.0,
            delta_std_error: 0.0,
            q_std_error: 0.0,
            mc_allowance: 0.0,
            pz_holds: true,
            degenerate: false,
            direction_count: 1,
            trials: 1,
        }
    }

    fn inputs(version: BoundVersion, n: usize, sigma: f64, rho: f64) -> BoundInputs {
        BoundInputs {
            q_proxy: ComplexityProxy::new(2.0, "test"),
            m_proxy: ComplexityProxy::new(3.0, "test"),
            u: 8.0,
            n,
            sigma,
            rho,
            version,
        }
    }

    #[test]
    fn assembly_formulas() {
        let sb = smallball(0.5, 0.8);
        let a = assemble_bound(&inputs(BoundVersion::Local, 100, 0.0, 0.0), &sb).unwrap();
        assert_eq!(a.predicted_error, 0.0);
        let tq: f64 = 0.2 * 0.5;
        assert!((a.n_required - ((2.0 + 0.2 * 8.0) / tq).powi(2)).abs() < 1e-9);
        let a1 = assemble_bound(&inputs(BoundVersion::Local, 100, 0.5, 0.0), &sb).unwrap();
        let a2 = assemble_bound(&inputs(BoundVersion::Local, 200, 0.5, 0.0), &sb).unwrap();
        assert!((a1.predicted_error / a2.predicted_error - 2f64.sqrt()).abs() < 1e-12);
        let g1 = assemble_bound(&inputs(BoundVersion::Global, 100, 0.5, 0.0), &sb).unwrap();
        let g4 = assemble_bound(&inputs(BoundVersion::Global, 400, 0.5, 0.0), &sb).unwrap();
        let g16 = assemble_bound(&inputs(BoundVersion::Global, 1600, 0.5, 0.0), &sb).unwrap();
        // n^{1/4}: four times the samples divide the width term by √2, sixteen halve it
        assert!((g1.predicted_error / g4.predicted_error - 2f64.sqrt()).abs() < 1e-12);
        assert!((g1.predicted_error / g16.predicted_error - 2.0).abs() < 1e-12);
        // negative ρ is cut off by the positive part
        let neg = assemble_bound(&inputs(BoundVersion::Local, 100, 0.0, -1.0), &sb).unwrap();
        assert_eq!(neg.predicted_error, 0.0);
    }

    #[test]
    fn assembly_rejections() {
        let sb = smallball(0.5, 0.8);
        let mut bad = inputs(BoundVersion::Local, 100, 0.0, 0.0);
        bad.u = 7.9;
        assert!(matches!(assemble_bound(&bad, &sb), Err(Error::OutOfRange(_))));
        let zero_q = smallball(0.0, 0.8);
        assert!(matches!(
            assemble_bound(&inputs(BoundVersion::Local, 100, 0.0, 0.0), &zero_q),
            Err(Error::Degenerate(_))
        ));
    }
}
