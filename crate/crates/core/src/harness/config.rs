//! Declarative experiment configuration (TOML) and its resolution into
//! concrete models, targets and hypothesis sets.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::{DistributionKind, DistributionSpec, Mixing};
use crate::error::{Error, Result};
use crate::geometry::HypothesisSet;
use crate::models::{
    expected_correlation, lifted_target_scale, target_scale_mu, Centering, Dataset, Link, ModelKind, Noise,
    ObservationModel,
};
use crate::seed;
use crate::solver::{solve_lasso, SolverConfig};

/// Largest dimension accepted by the `erm_mc` target rule.
pub const ERM_MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub kind: DistributionKind,
    /// Required unless a mixing matrix is given.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Defaults to the unit-variance scale of the base law.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub mixing: Option<Mixing>,
}

impl SpecConfig {
    pub fn to_spec(&self) -> Result<DistributionSpec> {
        let spec = match &self.mixing {
            Some(mix) => {
                let scale = self.scale.unwrap_or_else(|| mix.base.unit_variance_scale());
                let spec = DistributionSpec::mixed(mix.matrix.clone(), mix.base, scale);
                if let Some(d) = self.dim {
                    Error::check_dim(d, spec.dim)?;
                }
                spec
            }
            None => {
                let dim = self.dim.ok_or_else(|| Error::config("spec.dim is required"))?;
                let mut spec = DistributionSpec::isotropic(self.kind, dim);
                if let Some(s) = self.scale {
                    spec.scale = s;
                }
                spec
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Beta0Rule {
    Explicit { values: Vec<f64> },
    /// Seeded support of size `k`, Gaussian values rescaled to Euclidean norm `norm`.
    Sparse {
        k: usize,
        #[serde(default = "one")]
        norm: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub beta0: Beta0Rule,
    #[serde(default)]
    pub link: Link,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub lifted: bool,
    #[serde(default)]
    pub centering: Centering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetRule {
    Fixed { set: HypothesisSet },
    /// `l1_ball(scale · ‖β♮‖₁)`.
    TunedL1 {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Euclidean ball of the given radius centered at `β♮`.
    TargetBall { radius: f64 },
    /// `lifted_psd_fro(scale · ‖B♮‖_F)`.
    TunedLifted {
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetRule {
    Beta0,
    /// `μβ₀` (or `μβ₀β₀ᵀ` when lifted) with `μ` estimated by Monte Carlo.
    MuBeta0 { mc_budget: usize },
    /// Minimizer of the expected risk over the hypothesis set.
    ErmMc { mc_budget: usize },
    Explicit { values: Vec<f64> },
}

/// How the rank-one vector is read off a lifted estimate `B̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LiftedScaling {
    /// `λ̂₁ β̂`.
    #[default]
    Lambda,
    /// `√λ̂₁ β̂`.
    SqrtLambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub results: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub spec: SpecConfig,
    pub model: ModelConfig,
    pub set: SetRule,
    pub target: TargetRule,
    #[serde(default)]
    pub solver: SolverConfig,
    pub n_grid: Vec<usize>,
    pub trials_per_n: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub lifted_scaling: LiftedScaling,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Concrete objects an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub spec: DistributionSpec,
    pub model: ObservationModel,
    /// Target in feature space (flattened `p × p` when lifted).
    pub beta_nat: Vec<f64>,
    /// Target vector in `R^p`; for lifted models `B♮ = v vᵀ`.
    pub beta_nat_vector: Vec<f64>,
    pub set: HypothesisSet,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid must not be empty"));
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_grid must be positive and strictly increasing"));
        }
        if self.trials_per_n == 0 {
            return Err(Error::config("trials_per_n must be at least 1"));
        }
        self.solver.validate()?;
        let spec = self.spec.to_spec()?;
        if let Beta0Rule::Sparse { k, norm } = self.model.beta0 {
            if k == 0 || k > spec.dim {
                return Err(Error::config(format!("sparsity {k} must lie in 1..={}", spec.dim)));
            }
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::config("beta0 norm must be positive"));
            }
        }
        if let TargetRule::ErmMc { .. } = self.target {
            if spec.dim > ERM_MAX_DIM {
                return Err(Error::config(format!("erm_mc target needs p ≤ {ERM_MAX_DIM}, got {}", spec.dim)));
            }
            if self.model.lifted {
                return Err(Error::config("erm_mc target is not available for lifted models"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn beta0(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.model.beta0 {
            Beta0Rule::Explicit { values } => {
                Error::check_dim(dim, values.len())?;
                Ok(values.clone())
            }
            Beta0Rule::Sparse { k, norm } => Ok(sparse_vector(*k, dim, *norm, self.master_seed)),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let spec = self.spec.to_spec()?;
        let p = spec.dim;
        let beta0 = self.beta0(p)?;
        let model = ObservationModel {
            kind: self.model.kind,
            beta0: beta0.clone(),
            link: self.model.link,
            noise: self.model.noise,
            lifted: self.model.lifted,
            centering: self.model.centering,
        };
        model.validate()?;
        let target_seed = seed::derive_seed(self.master_seed, "target", 0);
        let set_from = |beta_nat: &[f64]| self.resolve_set(p, beta_nat);

        let (beta_nat, beta_nat_vector, set) = if model.lifted {
            let mu = match self.target {
                TargetRule::Beta0 => 1.0,
                TargetRule::MuBeta0 { mc_budget } => lifted_target_scale(model.link, mc_budget, target_seed)?.value,
                TargetRule::Explicit { ref values } => {
                    Error::check_dim(p, values.len())?;
                    let outer = outer(values);
                    let set = set_from(&outer)?;
                    return Ok(Resolved { spec, model, beta_nat: outer, beta_nat_vector: values.clone(), set });
                }
                TargetRule::ErmMc { .. } => unreachable!("rejected by validate"),
            };
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
            if !(mu > 0.0) {
                return Err(Error::Degenerate(format!("lifted scale μ = {mu} is not positive")));
            }
            let vector: Vec<f64> = beta0.iter().map(|b| mu.sqrt() * b).collect();
            let flat = outer(&vector);
            let set = set_from(&flat)?;
            (flat, vector, set)
        } else {
            let target = match &self.target {
                TargetRule::Beta0 => beta0.clone(),
                TargetRule::MuBeta0 { mc_budget } => {
                    let mu = target_scale_mu(&model, &spec, *mc_budget, target_seed)?.value;
                    beta0.iter().map(|b| mu * b).collect()
                }
                TargetRule::Explicit { values } => {
                    Error::check_dim(p, values.len())?;
                    values.clone()
                }
                TargetRule::ErmMc { mc_budget } => {
                    // the set rule may depend on the target; only fixed sets qualify
                    let SetRule::Fixed { set } = &self.set else {
                        return Err(Error::config("erm_mc target needs a fixed hypothesis set"));
                    };
                    expected_risk_minimizer(&model, &spec, set, *mc_budget, target_seed, &self.solver)?
                }
            };
            let set = set_from(&target)?;
            (target.clone(), target, set)
        };
        Ok(Resolved { spec, model, beta_nat, beta_nat_vector, set })
    }

    fn resolve_set(&self, p: usize, beta_nat: &[f64]) -> Result<HypothesisSet> {
        let set = match &self.set {
            SetRule::Fixed { set } => set.clone(),
            SetRule::TunedL1 { scale } => {
                HypothesisSet::l1_ball(scale * beta_nat.iter().map(|b| b.abs()).sum::<f64>(), p)
            }
            SetRule::TargetBall { radius } => HypothesisSet::l2_ball(*radius, beta_nat.to_vec()),
            SetRule::TunedLifted { scale } => {
                let fro = beta_nat.iter().map(|b| b * b).sum::<f64>().sqrt();
                HypothesisSet::lifted_psd_fro(scale * fro, p)
            }
        };
        set.validate()?;
        let width = if self.model.lifted { p * p } else { p };
        Error::check_dim(width, set.ambient_dim())?;
        Ok(set)
    }
}

fn outer(v: &[f64]) -> Vec<f64> {
    v.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect()
}

/// Seeded `k`-sparse vector with Gaussian entries rescaled to the given norm.
pub fn sparse_vector(k: usize, p: usize, norm: f64, master_seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seed::child_rng(master_seed, "beta0", 0);
    let support = rand::seq::index::sample(&mut rng, p, k);
    let mut v = vec![0.0; p];
    for idx in support.iter() {
        v[idx] = StandardNormal.sample(&mut rng);
    }
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x *= norm / len);
    v
}

/// `argmin_{β ∈ K} E(y − ⟨x, β⟩)²` using the exact second moment and a
/// Monte-Carlo `E[yx]`. The objective is a convex quadratic, solved through a
/// `p`-row surrogate dataset with the same Gram matrix and correlation.
pub fn expected_risk_minimizer(
    model: &ObservationModel,
    spec: &DistributionSpec,
    set: &HypothesisSet,
    mc_budget: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    let p = spec.dim;
    if p > ERM_MAX_DIM {
        return Err(Error::config(format!("expected-risk minimizer needs p ≤ {ERM_MAX_DIM}")));
    }
    let (corr, _) = expected_correlation(model, spec, mc_budget, seed)?;
    let sigma = spec.second_moment();
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Degenerate("second moment is not positive definite".into()))?;
    let l = chol.l();
    let root_p = (p as f64).sqrt();
    let x: DMatrix<f64> = l.transpose() * root_p;
    let rhs = l
        .solve_lower_triangular(&DVector::from_vec(corr))
        .ok_or_else(|| Error::Degenerate("triangular solve failed".into()))?;
    let y = rhs * root_p;
    let surrogate = Dataset::new(x, y)?;
    let cfg = SolverConfig { restart_count: solver.restart_count.max(4), record_trace: false, ..solver.clone() };
    Ok(solve_lasso(&surrogate, set, &cfg)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::empirical_risk;

    pub(crate) const SAMPLE: &str = r#"
name = "tuned"
n_grid = [50, 100]
trials_per_n = 2
master_seed = 7

[spec]
kind = "laplace"
dim = 10

[model]
kind = "linear"
noise = { kind = "gaussian", std = 0.1 }
beta0 = { rule = "sparse", k = 3 }

[set]
rule = "tuned_l1"

[target]
rule = "beta0"
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.spec.dim, 10);
        assert!((r.spec.scale - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(r.beta_nat.iter().filter(|b| **b != 0.0).count(), 3);
        let norm: f64 = r.beta_nat.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let l1: f64 = r.beta_nat.iter().map(|b| b.abs()).sum();
        assert_eq!(r.set, HypothesisSet::l1_ball(l1, 10));
        assert_eq!(cfg.solver, SolverConfig::default());
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.config_hash(), back.config_hash());
        let mut other = cfg.clone();
        other.master_seed = 8;
        assert_ne!(cfg.config_hash(), other.config_hash());
        assert_eq!(cfg.config_hash().len(), 64);
    }

    #[test]
    fn invalid_configs() {
        let bad_grid = SAMPLE.replace("n_grid = [50, 100]", "n_grid = [100, 50]");
        assert!(ExperimentConfig::from_toml_str(&bad_grid).is_err());
        let no_trials = SAMPLE.replace("trials_per_n = 2", "trials_per_n = 0");
        assert!(ExperimentConfig::from_toml_str(&no_trials).is_err());
        let unknown = SAMPLE.replace("master_seed = 7", "master_seed = 7\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
        let erm_big = SAMPLE.replace("rule = \"beta0\"", "rule = \"erm_mc\"\nmc_budget = 1000").replace("dim = 10", "dim = 13");
        assert!(ExperimentConfig::from_toml_str(&erm_big).is_err());
    }

    #[test]
    fn lifted_target_is_outer_product() {
        let text = SAMPLE
            .replace("kind = \"laplace\"", "kind = \"gaussian\"")
            .replace("kind = \"linear\"", "kind = \"quadratic\"\nlifted = true")
            .replace("rule = \"tuned_l1\"", "rule = \"tuned_lifted\"");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.beta_nat.len(), 100);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(r.beta_nat[i * 10 + j], r.beta_nat_vector[i] * r.beta_nat_vector[j]);
            }
        }
        assert!(matches!(r.set, HypothesisSet::LiftedPsdFro { side: 10, .. }));
    }

    #[test]
    fn erm_target_beats_nearby_points() {
        let spec = DistributionSpec::isotropic(DistributionKind::Gaussian, 3);
        let model = ObservationModel::single_index(vec![1.0, 0.5, 0.0], Link::Tanh, Noise::None);
        let set = HypothesisSet::l1_ball(0.5, 3);
        let beta = expected_risk_minimizer(&model, &spec, &set, 200_000, 1, &SolverConfig::default()).unwrap();
        assert!(set.contains(&beta, 1e-9).unwrap());
        // compare expected risk on a large fresh sample against perturbations
        let big = crate::models::generate_dataset(&model, &spec, 200_000, 5).unwrap();
        let base = empirical_risk(&big, &beta).unwrap();
        for d in [[0.05, -0.05, 0.0], [-0.05, 0.05, 0.0], [0.0, -0.05, 0.05]] {
            let cand: Vec<f64> = beta.iter().zip(d).map(|(a, b)| a + b).collect();
            let cand = set.project(&cand).unwrap();
            assert!(empirical_risk(&big, &cand).unwrap() >= base - 1e-3);
        }
    }
}
