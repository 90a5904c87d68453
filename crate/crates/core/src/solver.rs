//! Projected gradient descent for constrained least squares over a
//! hypothesis set, plus the lifted matrix variant and risk diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HypothesisSet;
use crate::models::Dataset;
use crate::seed;

/// Safety factor applied to the power-iteration Lipschitz estimate.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;
const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    #[default]
    FixedInverseLipschitz,
    /// Armijo-type backtracking: shrink the step by `shrink` until the
    /// objective drops by at least `c/step · ‖Δβ‖²`.
    Backtracking { shrink: f64, c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative objective-decrease threshold.
    pub tol: f64,
    pub step_rule: StepRule,
    /// Number of starts; the first is `project(0)`, the rest are random
    /// feasible points.
    pub restart_count: usize,
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-10,
            step_rule: StepRule::FixedInverseLipschitz,
            restart_count: 1,
            seed: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.restart_count == 0 {
            return Err(Error::config("restart_count must be at least 1"));
        }
        if let StepRule::Backtracking { shrink, c } = self.step_rule {
            if !(shrink > 0.0 && shrink < 1.0) || !(c > 0.0 && c < 1.0) {
                return Err(Error::config("backtracking needs shrink and c in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Minimizer (row-major flattened matrix for lifted problems).
    pub estimate: Vec<f64>,
    pub iterations: usize,
    /// Empirical risk at `estimate`.
    pub objective: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
    /// Lipschitz constant of the gradient used for the step and residual.
    pub lipschitz: f64,
    /// `‖β̂ − project(β̂ − ∇L̄(β̂)/L)‖₂`.
    pub fixed_point_residual: f64,
}

impl SolveResult {
    pub fn estimate_matrix(&self, side: usize) -> Result<DMatrix<f64>> {
        Error::check_dim(side * side, self.estimate.len())?;
        Ok(DMatrix::from_row_slice(side, side, &self.estimate))
    }
}

/// `(1/n) Σ (yᵢ − ⟨xᵢ, β⟩)²`.
pub fn empirical_risk(data: &Dataset, beta: &[f64]) -> Result<f64> {
    Error::check_dim(data.p(), beta.len())?;
    let b = DVector::from_column_slice(beta);
    let r = &data.outputs - &data.inputs * b;
    Ok(r.norm_squared() / data.n() as f64)
}

/// Quadratic process `Q` and multiplier process `M` with `Q + M` equal to the
/// excess empirical risk of `beta` over `beta_nat`.
pub fn excess_decomposition(data: &Dataset, beta: &[f64], beta_nat: &[f64]) -> Result<(f64, f64)> {
    Error::check_dim(data.p(), beta.len())?;
    Error::check_dim(data.p(), beta_nat.len())?;
    let d = DVector::from_iterator(beta.len(), beta.iter().zip(beta_nat).map(|(a, b)| a - b));
    let xd = &data.inputs * d;
    let xi = &data.inputs * DVector::from_column_slice(beta_nat) - &data.outputs;
    let n = data.n() as f64;
    Ok((xd.norm_squared() / n, 2.0 * xi.dot(&xd) / n))
}

/// `min{‖a − b‖₂, ‖a + b‖₂}`.
pub fn sign_invariant_error(a: &[f64], b: &[f64]) -> Result<f64> {
    Error::check_dim(a.len(), b.len())?;
    let minus: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let plus: f64 = a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum();
    Ok(minus.min(plus).sqrt())
}

/// Smooth part of the objective, in Gram form when `n > p`.
enum Objective<'a> {
    Gram { g: DMatrix<f64>, b: DVector<f64> },
    Direct { x: &'a DMatrix<f64>, y: &'a DVector<f64>, n: f64 },
}

impl<'a> Objective<'a> {
    fn new(data: &'a Dataset) -> Self {
        let n = data.n() as f64;
        if data.n() > data.p() {
            let xt = data.inputs.transpose();
            Objective::Gram { g: &xt * &data.inputs / n, b: xt * &data.outputs / n }
        } else {
            Objective::Direct { x: &data.inputs, y: &data.outputs, n }
        }
    }

    /// `Gβ` in Gram form, `Xβ` otherwise.
    fn aux(&self, beta: &DVector<f64>) -> DVector<f64> {
        match self {
            Objective::Gram { g, .. } => g * beta,
            Objective::Direct { x, .. } => *x * beta,
        }
    }

    fn gradient(&self, aux: &DVector<f64>) -> DVector<f64> {
        match self {
            Objective::Gram { b, .. } => (aux - b) * 2.0,
            Objective::Direct { x, y, n } => x.tr_mul(&(aux - *y)) * (2.0 / n),
        }
    }

    /// `f(β) − f(β⁺)`, evaluated without forming either objective.
    fn decrease(&self, beta: &DVector<f64>, aux: &DVector<f64>, next: &DVector<f64>, aux_next: &DVector<f64>) -> f64 {
        match self {
            Objective::Gram { b, .. } => {
                let d = next - beta;
                d.dot(&(b * 2.0 - aux - aux_next))
            }
            Objective::Direct { y, n, .. } => {
                let u = aux_next - aux;
                let r = *y - aux;
                u.dot(&(r * 2.0 - &u)) / n
            }
        }
    }

    /// Largest eigenvalue of `(2/n) XᵀX` by power iteration.
    fn lipschitz(&self) -> f64 {
        let p = match self {
            Objective::Gram { g, .. } => g.nrows(),
            Objective::Direct { x, .. } => x.ncols(),
        };
        let apply = |v: &DVector<f64>| -> DVector<f64> {
            match self {
                Objective::Gram { g, .. } => g * v,
                Objective::Direct { x, n, .. } => x.tr_mul(&(*x * v)) / *n,
            }
        };
        let mut v = DVector::from_fn(p, |j, _| 1.0 + 0.5 * ((j + 1) as f64).sin());
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..POWER_ITERS {
            let w = apply(&v);
            let next = v.dot(&w);
            let len = w.norm();
            if len == 0.0 {
                return 0.0;
            }
            v = w / len;
            let done = (next - lambda).abs() <= POWER_TOL * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        2.0 * lambda
    }
}

fn project_vec(set: &HypothesisSet, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(set.project(v.as_slice())?))
}

struct Run {
    beta: DVector<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn descend(
    obj: &Objective<'_>,
    data: &Dataset,
    set: &HypothesisSet,
    config: &SolverConfig,
    start: DVector<f64>,
    lipschitz: f64,
) -> Result<Run> {
    let mut beta = start;
    let mut aux = obj.aux(&beta);
    let f0 = empirical_risk(data, beta.as_slice())?;
    let floor = 1e-16 * f0.max(f64::MIN_POSITIVE);
    let mut f = f0;
    let mut trace = vec![f0];
    let mut best = (beta.clone(), f0);
    let mut big_l = lipschitz.max(f64::MIN_POSITIVE);
    let mut step = match config.step_rule {
        StepRule::FixedInverseLipschitz => 1.0 / big_l,
        StepRule::Backtracking { .. } => 4.0 / big_l,
    };
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        let grad = obj.gradient(&aux);
        let (next, aux_next, dec) = loop {
            let next = project_vec(set, &(&beta - &grad * step))?;
            let aux_next = obj.aux(&next);
            let dec = obj.decrease(&beta, &aux, &next, &aux_next);
            let accept = match config.step_rule {
                // an increase means the estimate undershot the true constant
                StepRule::FixedInverseLipschitz => dec >= -floor,
                StepRule::Backtracking { c, .. } => dec >= c / step * (&next - &beta).norm_squared() - floor,
            };
            if accept || step < 1e-300 {
                break (next, aux_next, dec);
            }
            match config.step_rule {
                StepRule::FixedInverseLipschitz => {
                    big_l *= 2.0;
                    step = 1.0 / big_l;
                }
                StepRule::Backtracking { shrink, .. } => step *= shrink,
            }
        };
        if dec < 0.0 {
            // stationary up to rounding: no representable progress left
            converged = true;
            break;
        }
        let residual = (&next - &beta).norm();
        let scale = 1.0 + next.norm();
        f -= dec;
        beta = next;
        aux = aux_next;
        if config.record_trace {
            trace.push(f);
        }
        if f < best.1 {
            best = (beta.clone(), f);
        }
        // residual measured at step 1/L: only meaningful for the fixed rule
        let residual_ok = match config.step_rule {
            StepRule::FixedInverseLipschitz => residual * big_l / lipschitz.max(f64::MIN_POSITIVE) <= 10.0 * config.tol * scale,
            StepRule::Backtracking { .. } => true,
        };
        if dec <= config.tol * f.max(floor) && residual_ok {
            converged = true;
            break;
        }
        if let StepRule::Backtracking { shrink, .. } = config.step_rule {
            step /= shrink;
        }
    }
    let beta = best.0;
    let objective = empirical_risk(data, beta.as_slice())?;
    Ok(Run { beta, objective, iterations, converged, trace })
}

fn fixed_point_residual(obj: &Objective<'_>, set: &HypothesisSet, beta: &DVector<f64>, lipschitz: f64) -> Result<f64> {
    if lipschitz <= 0.0 {
        return Ok(0.0);
    }
    let grad = obj.gradient(&obj.aux(beta));
    let next = project_vec(set, &(beta - grad / lipschitz))?;
    Ok((next - beta).norm())
}

/// Minimizes the empirical risk over `set` by projected gradient descent.
pub fn solve_lasso(data: &Dataset, set: &HypothesisSet, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    set.validate()?;
    if !data.is_finite() {
        return Err(Error::NonFinite("dataset"));
    }
    Error::check_dim(data.p(), set.ambient_dim())?;
    let obj = Objective::new(data);
    let lipschitz = LIPSCHITZ_SAFETY * obj.lipschitz();
    let p = data.p();

    let mut best: Option<Run> = None;
    for r in 0..config.restart_count {
        let start = if r == 0 {
            project_vec(set, &DVector::zeros(p))?
        } else {
            let mut rng = seed::child_rng(config.seed, "restart", r as u64);
            let g = DVector::from_fn(p, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            project_vec(set, &(g * set.diameter_bound()))?
        };
        let run = descend(&obj, data, set, config, start, lipschitz)?;
        let better = best.as_ref().is_none_or(|b| run.objective < b.objective);
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    let fixed_point_residual = fixed_point_residual(&obj, set, &run.beta, lipschitz)?;
    Ok(SolveResult {
        estimate: run.beta.iter().copied().collect(),
        iterations: run.iterations,
        objective: run.objective,
        converged: run.converged,
        objective_trace: config.record_trace.then_some(run.trace),
        lipschitz,
        fixed_point_residual,
    })
}

/// Lifted variant: least squares against centered rank-one lifts over a
/// PSD Frobenius ball.
pub fn solve_lifted(data: &Dataset, set: &HypothesisSet, config: &SolverConfig) -> Result<SolveResult> {
    let side = data
        .lifted_side
        .ok_or_else(|| Error::config("dataset does not hold lifted inputs"))?;
    match set {
        HypothesisSet::LiftedPsdFro { side: s, .. } if *s == side => solve_lasso(data, set, config),
        HypothesisSet::LiftedPsdFro { side: s, .. } => Err(Error::Dimension { expected: side, actual: *s }),
        _ => Err(Error::config("lifted problems need a lifted_psd_fro hypothesis set")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOne {
    pub lambda1: f64,
    pub beta_unit: Vec<f64>,
    /// Input was numerically zero; `beta_unit` is `e₁`.
    pub degenerate: bool,
}

/// Top eigenpair of a symmetric PSD matrix by power iteration, with the
/// largest-magnitude coordinate of the eigenvector made positive.
pub fn rank1_extract(b: &DMatrix<f64>) -> Result<RankOne> {
    if !b.is_square() {
        return Err(Error::Dimension { expected: b.nrows(), actual: b.ncols() });
    }
    let p = b.nrows();
    if p == 0 {
        return Err(Error::Empty("matrix"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let sym = if (b - b.transpose()).amax() > 1e-10 { (b + b.transpose()) * 0.5 } else { b.clone() };
    let scale = sym.norm();
    let mut e1 = vec![0.0; p];
    e1[0] = 1.0;
    if scale <= 1e-12 {
        return Ok(RankOne { lambda1: 0.0, beta_unit: e1, degenerate: true });
    }

    let start_col = (0..p).max_by(|&i, &j| sym[(i, i)].total_cmp(&sym[(j, j)])).unwrap_or(0);
    let mut v = DVector::from_fn(p, |i, _| sym[(i, start_col)] + 1e-3 * scale * (1.0 + i as f64).cos());
    v /= v.norm();
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..100_000 {
        let w = &sym * &v;
        lambda = v.dot(&w);
        let residual = (&w - &v * lambda).norm();
        if residual <= 1e-12 * scale {
            converged = true;
            break;
        }
        let len = w.norm();
        if len == 0.0 {
            break;
        }
        v = w / len;
    }
    if !converged {
        // near-degenerate top eigenvalues: fall back to a dense solver
        let eig = SymmetricEigen::new(sym.clone());
        let k = eig.eigenvalues.imax();
        lambda = eig.eigenvalues[k];
        v = eig.eigenvectors.column(k).into_owned();
    }
    if lambda < -1e-10 * scale {
        return Err(Error::OutOfRange(format!(
            "dominant eigenvalue {lambda} is negative; matrix is not positive semidefinite"
        )));
    }
    let lead = v.iamax();
    if v[lead] < 0.0 {
        v = -v;
    }
    Ok(RankOne { lambda1: lambda.max(0.0), beta_unit: v.iter().copied().collect(), degenerate: false })
}
