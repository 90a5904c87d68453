//! Error curves, decay-rate fits, excess-risk certificates and phase
//! transitions.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Beta0Rule, ExperimentConfig, LiftedScaling, Resolved};
use crate::error::{Error, Result};
use crate::geometry::{sphere_slice_directions, HypothesisSet};
use crate::models::{generate_dataset, Dataset, Noise};
use crate::seed;
use crate::solver::{excess_decomposition, rank1_extract, sign_invariant_error, solve_lasso, solve_lifted, SolverConfig};

/// One solve within an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub n: usize,
    pub trial: usize,
    pub error: f64,
    pub runtime_ms: f64,
    pub converged: bool,
    pub seed: u64,
}

impl Record {
    /// Equality of everything but wall-clock time.
    pub fn same_outcome(&self, other: &Record) -> bool {
        self.experiment == other.experiment
            && self.n == other.n
            && self.trial == other.trial
            && self.error.to_bits() == other.error.to_bits()
            && self.converged == other.converged
            && self.seed == other.seed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub trials: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
    pub points: usize,
}

impl DecayFit {
    /// `slope ± 2·std_error`.
    pub fn interval(&self) -> (f64, f64) {
        (self.slope - 2.0 * self.std_error, self.slope + 2.0 * self.std_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub decay: Option<DecayFit>,
}

impl ExperimentResult {
    /// Aggregates recomputed from the records match the stored ones exactly.
    pub fn aggregates_consistent(&self) -> bool {
        aggregate(&self.records) == self.aggregates
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-`n` median and quartiles, in increasing `n`.
pub fn aggregate(records: &[Record]) -> Vec<Aggregate> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rows: Vec<&Record> = records.iter().filter(|r| r.n == n).collect();
            let mut errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
            errors.sort_by(f64::total_cmp);
            Aggregate {
                n,
                median: quantile_sorted(&errors, 0.5),
                q25: quantile_sorted(&errors, 0.25),
                q75: quantile_sorted(&errors, 0.75),
                trials: rows.len(),
                converged: rows.iter().filter(|r| r.converged).count(),
            }
        })
        .collect()
}

/// OLS fit of `log y` on `log x`, ignoring nonpositive or non-finite `y`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!("need 3 positive points for a decay fit, have {}", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("decay fit needs distinct n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let std_error = (sse / (m - 2.0) / sxx).sqrt();
    Ok(DecayFit { slope, std_error, intercept, points: pts.len() })
}

/// Slope of log(median error) against log(n).
pub fn fit_decay_rate(result: &ExperimentResult) -> Result<DecayFit> {
    let xs: Vec<f64> = result.aggregates.iter().map(|a| a.n as f64).collect();
    let ys: Vec<f64> = result.aggregates.iter().map(|a| a.median).collect();
    fit_log_log(&xs, &ys)
}

/// Estimation error of one solve against the resolved target.
fn solve_error(resolved: &Resolved, data: &Dataset, solver: &SolverConfig, scaling: LiftedScaling) -> Result<(f64, bool)> {
    if resolved.model.lifted {
        let res = solve_lifted(data, &resolved.set, solver)?;
        let side = resolved.spec.dim;
        let r1 = rank1_extract(&res.estimate_matrix(side)?)?;
        let factor = match scaling {
            LiftedScaling::Lambda => r1.lambda1,
            LiftedScaling::SqrtLambda => r1.lambda1.sqrt(),
        };
        let est: Vec<f64> = r1.beta_unit.iter().map(|v| factor * v).collect();
        Ok((sign_invariant_error(&est, &resolved.beta_nat_vector)?, res.converged))
    } else {
        let res = solve_lasso(data, &resolved.set, solver)?;
        let err = res.estimate.iter().zip(&resolved.beta_nat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok((err, res.converged))
    }
}

pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    seed::derive_seed(master, &format!("trial/n={n}"), trial as u64)
}

fn run_resolved(config: &ExperimentConfig, resolved: &Resolved) -> Result<Vec<Record>> {
    let units: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.trials_per_n).map(move |t| (n, t)))
        .collect();
    units
        .par_iter()
        .map(|&(n, trial)| {
            let seed = trial_seed(config.master_seed, n, trial);
            let start = Instant::now();
            let data = generate_dataset(&resolved.model, &resolved.spec, n, seed)?;
            let solver = SolverConfig { seed, ..config.solver.clone() };
            let (error, converged) = solve_error(resolved, &data, &solver, config.lifted_scaling)?;
            Ok(Record {
                experiment: config.name.clone(),
                n,
                trial,
                error,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                converged,
                seed,
            })
        })
        .collect()
}

/// Runs every `(n, trial)` pair of the grid. Records come back in `(n, trial)`
/// order whatever the scheduling.
pub fn run_error_curve(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let resolved = config.resolve()?;
    let records = run_resolved(config, &resolved)?;
    let aggregates = aggregate(&records);
    let mut result = ExperimentResult {
        name: config.name.clone(),
        config_hash: config.config_hash(),
        master_seed: config.master_seed,
        records,
        aggregates,
        decay: None,
    };
    result.decay = fit_decay_rate(&result).ok();
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub t: f64,
    pub sampled_directions: usize,
    /// `min E(β, β♮)` over the sampled slice; `None` if the slice was empty.
    pub min_excess: Option<f64>,
    pub positive: bool,
    pub empty_slice: bool,
    /// `‖β̂ − β♮‖₂`, computed when the certificate is positive.
    pub solver_error: Option<f64>,
    /// Positive certificate agrees with `solver_error < t`.
    pub coherent: Option<bool>,
}

/// Samples `β = β♮ + t·v` on the slice of the set and reports the smallest
/// excess empirical risk. A positive minimum certifies `‖β̂ − β♮‖₂ < t`,
/// which is checked against an actual solve.
pub fn excess_certificate(
    data: &Dataset,
    set: &HypothesisSet,
    beta_nat: &[f64],
    t: f64,
    n_dirs: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CertificateReport> {
    let slice = sphere_slice_directions(set, beta_nat, t, n_dirs, seed)?;
    if slice.directions.is_empty() {
        return Ok(CertificateReport {
            t,
            sampled_directions: 0,
            min_excess: None,
            positive: false,
            empty_slice: true,
            solver_error: None,
            coherent: None,
        });
    }
    let mut min_excess = f64::INFINITY;
    for v in &slice.directions {
        let beta: Vec<f64> = beta_nat.iter().zip(v).map(|(b, d)| b + t * d).collect();
        let (q, m) = excess_decomposition(data, &beta, beta_nat)?;
        min_excess = min_excess.min(q + m);
    }
    let positive = min_excess > 0.0;
    let (solver_error, coherent) = if positive {
        let res = solve_lasso(data, set, solver)?;
        let err = res.estimate.iter().zip(beta_nat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        (Some(err), Some(err < t))
    } else {
        (None, None)
    };
    Ok(CertificateReport {
        t,
        sampled_directions: slice.directions.len(),
        min_excess: Some(min_excess),
        positive,
        empty_slice: false,
        solver_error,
        coherent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub k_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    /// `success[i][j]`: fraction of trials at `(k_grid[i], n_grid[j])` with
    /// error below the row threshold.
    pub success: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub trials_per_cell: usize,
}

/// Success fractions over a `(k, n)` grid. The base config must draw `β₀`
/// with the sparse rule. Without an explicit threshold, noiseless rows use
/// `10⁻³·‖β♮‖₂` and noisy rows twice the median error at the largest `n`.
pub fn run_phase_transition(
    base: &ExperimentConfig,
    k_grid: &[usize],
    n_grid: &[usize],
    threshold: Option<f64>,
) -> Result<PhaseTransition> {
    if let Some(th) = threshold {
        if !(th.is_finite() && th > 0.0) {
            return Err(Error::config(format!("success threshold must be positive, got {th}")));
        }
    }
    let Beta0Rule::Sparse { norm, .. } = base.model.beta0 else {
        return Err(Error::config("phase transitions need a sparse beta0 rule"));
    };
    let mut success = Vec::with_capacity(k_grid.len());
    let mut thresholds = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let mut cfg = base.clone();
        cfg.model.beta0 = Beta0Rule::Sparse { k, norm };
        cfg.n_grid = n_grid.to_vec();
        cfg.name = format!("{}/k={k}", base.name);
        let result = run_error_curve(&cfg)?;
        let resolved = cfg.resolve()?;
        let th = match threshold {
            Some(th) => th,
            None if cfg.model.noise == Noise::None => {
                1e-3 * resolved.beta_nat_vector.iter().map(|b| b * b).sum::<f64>().sqrt()
            }
            None => 2.0 * result.aggregates.last().map_or(0.0, |a| a.median),
        };
        let row = n_grid
            .iter()
            .map(|&n| {
                let rows: Vec<&Record> = result.records.iter().filter(|r| r.n == n).collect();
                rows.iter().filter(|r| r.error < th).count() as f64 / rows.len() as f64
            })
            .collect();
        success.push(row);
        thresholds.push(th);
    }
    Ok(PhaseTransition {
        k_grid: k_grid.to_vec(),
        n_grid: n_grid.to_vec(),
        success,
        thresholds,
        trials_per_cell: base.trials_per_n,
    })
}
