//! Convex hypothesis sets, Euclidean projections, support functions and
//! direction samplers.
//!
//! Matrix-valued sets (`LiftedPsdFro`) act on row-major flattened `p × p`
//! matrices so that every solver and width routine can treat them as vectors
//! in `R^{p²}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{seminorm_eval, SemiNorm};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Membership slack used when checking sampled points.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Angular resolution below which two directions count as the same.
pub const ANGULAR_DEDUP_TOL: f64 = 1e-6;
/// Relative singular-value cut-off for the span of `K − K`.
pub const SPAN_RANK_TOL: f64 = 1e-8;
/// Hypercubes are enumerated vertex-wise only up to this dimension.
pub const MAX_CUBE_VERTEX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HypothesisSet {
    L1Ball { radius: f64, dim: usize },
    L2Ball { radius: f64, center: Vec<f64> },
    Hypercube { halfwidth: f64, dim: usize },
    Polytope { vertices: Vec<Vec<f64>> },
    /// `{B ⪰ 0 : ‖B‖_F ≤ radius}` in `R^{side × side}`.
    LiftedPsdFro { radius: f64, side: usize },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl HypothesisSet {
    pub fn l1_ball(radius: f64, dim: usize) -> Self {
        HypothesisSet::L1Ball { radius, dim }
    }

    pub fn l2_ball(radius: f64, center: Vec<f64>) -> Self {
        HypothesisSet::L2Ball { radius, center }
    }

    pub fn hypercube(halfwidth: f64, dim: usize) -> Self {
        HypothesisSet::Hypercube { halfwidth, dim }
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Self {
        HypothesisSet::Polytope { vertices }
    }

    pub fn lifted_psd_fro(radius: f64, side: usize) -> Self {
        HypothesisSet::LiftedPsdFro { radius, side }
    }

    /// Parses a vertex-list file: one vector per line, whitespace-separated
    /// decimals. Blank lines and lines starting with `#` are skipped.
    pub fn polytope_from_vertex_text(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            vertices.push(row);
        }
        let set = HypothesisSet::Polytope { vertices };
        set.validate()?;
        Ok(set)
    }

    /// Length of the vectors the set acts on (`side²` for lifted sets).
    pub fn ambient_dim(&self) -> usize {
        match self {
            HypothesisSet::L1Ball { dim, .. } | HypothesisSet::Hypercube { dim, .. } => *dim,
            HypothesisSet::L2Ball { center, .. } => center.len(),
            HypothesisSet::Polytope { vertices } => vertices.first().map_or(0, Vec::len),
            HypothesisSet::LiftedPsdFro { side, .. } => side * side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            HypothesisSet::L1Ball { radius, .. } => positive("radius", *radius)?,
            HypothesisSet::L2Ball { radius, center } => {
                positive("radius", *radius)?;
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("ball center"));
                }
            }
            HypothesisSet::Hypercube { halfwidth, .. } => positive("halfwidth", *halfwidth)?,
            HypothesisSet::LiftedPsdFro { radius, .. } => positive("radius", *radius)?,
            HypothesisSet::Polytope { vertices } => {
                let first = vertices.first().ok_or(Error::Empty("polytope vertices"))?;
                if vertices.iter().any(|v| v.len() != first.len()) {
                    return Err(Error::config("polytope vertices must share a dimension"));
                }
                if vertices.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("polytope vertices"));
                }
            }
        }
        if self.ambient_dim() == 0 {
            return Err(Error::config("hypothesis set has zero dimension"));
        }
        Ok(())
    }

    fn check_input(&self, v: &[f64]) -> Result<()> {
        Error::check_dim(self.ambient_dim(), v.len())
    }

    /// Euclidean nearest point of the set.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_input(v)?;
        Ok(match self {
            HypothesisSet::L1Ball { radius, .. } => project_l1(v, *radius),
            HypothesisSet::L2Ball { radius, center } => {
                let d = sub(v, center);
                let len = norm2(&d);
                if len <= *radius {
                    v.to_vec()
                } else {
                    center.iter().zip(&d).map(|(c, x)| c + x * radius / len).collect()
                }
            }
            HypothesisSet::Hypercube { halfwidth, .. } => {
                v.iter().map(|x| x.clamp(-halfwidth, *halfwidth)).collect()
            }
            HypothesisSet::Polytope { vertices } => {
                let shifted: Vec<Vec<f64>> = vertices.iter().map(|w| sub(w, v)).collect();
                let nearest = min_norm_point(&shifted).point;
                nearest.iter().zip(v).map(|(a, b)| a + b).collect()
            }
            HypothesisSet::LiftedPsdFro { radius, side } => project_psd_fro(v, *side, *radius),
        })
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> Result<bool> {
        self.check_input(v)?;
        Ok(match self {
            HypothesisSet::L1Ball { radius, .. } => v.iter().map(|x| x.abs()).sum::<f64>() <= radius + tol,
            HypothesisSet::L2Ball { radius, center } => dist2(v, center) <= radius + tol,
            HypothesisSet::Hypercube { halfwidth, .. } => v.iter().all(|x| x.abs() <= halfwidth + tol),
            HypothesisSet::Polytope { vertices } => hull_distance(vertices, v)? <= tol,
            HypothesisSet::LiftedPsdFro { radius, side } => {
                let m = DMatrix::from_row_slice(*side, *side, v);
                let asym = (&m - m.transpose()).norm();
                let sym = (&m + m.transpose()) * 0.5;
                let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
                asym <= tol && min_eig >= -tol && norm2(v) <= radius + tol
            }
        })
    }

    /// `sup_{w ∈ K} ⟨z, w⟩`.
    pub fn support_function(&self, z: &[f64]) -> Result<f64> {
        self.check_input(z)?;
        Ok(match self {
            HypothesisSet::L1Ball { radius, .. } => radius * z.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            HypothesisSet::L2Ball { radius, center } => radius * norm2(z) + dot(z, center),
            HypothesisSet::Hypercube { halfwidth, .. } => halfwidth * z.iter().map(|x| x.abs()).sum::<f64>(),
            HypothesisSet::Polytope { vertices } => {
                vertices.iter().map(|w| dot(w, z)).fold(f64::NEG_INFINITY, f64::max)
            }
            HypothesisSet::LiftedPsdFro { radius, side } => {
                let m = DMatrix::from_row_slice(*side, *side, z);
                let sym = (&m + m.transpose()) * 0.5;
                let pos: f64 = SymmetricEigen::new(sym)
                    .eigenvalues
                    .iter()
                    .map(|l| l.max(0.0).powi(2))
                    .sum();
                radius * pos.sqrt()
            }
        })
    }

    /// Vertex list for polytopal sets (hypercubes only up to
    /// [`MAX_CUBE_VERTEX_DIM`]).
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            HypothesisSet::L1Ball { radius, dim } => Some(
                (0..2 * dim)
                    .map(|i| {
                        let mut v = vec![0.0; *dim];
                        v[i / 2] = if i % 2 == 0 { *radius } else { -radius };
                        v
                    })
                    .collect(),
            ),
            HypothesisSet::Hypercube { halfwidth, dim } if *dim <= MAX_CUBE_VERTEX_DIM => Some(
                (0..1usize << dim)
                    .map(|mask| {
                        (0..*dim)
                            .map(|j| if mask >> j & 1 == 1 { *halfwidth } else { -halfwidth })
                            .collect()
                    })
                    .collect(),
            ),
            HypothesisSet::Polytope { vertices } => Some(vertices.clone()),
            _ => None,
        }
    }

    /// Upper bound on the Euclidean diameter.
    pub fn diameter_bound(&self) -> f64 {
        match self {
            HypothesisSet::L1Ball { radius, .. } | HypothesisSet::L2Ball { radius, .. } => 2.0 * radius,
            HypothesisSet::LiftedPsdFro { radius, .. } => 2.0 * radius,
            HypothesisSet::Hypercube { halfwidth, dim } => 2.0 * halfwidth * (*dim as f64).sqrt(),
            HypothesisSet::Polytope { vertices } => pairwise_diameter(vertices, |a, b| Ok(dist2(a, b)))
                .unwrap_or(0.0),
        }
    }

    /// Orthonormal basis (columns) of `span(K − K)`.
    pub fn span_basis(&self) -> DMatrix<f64> {
        let dim = self.ambient_dim();
        match self {
            HypothesisSet::Polytope { vertices } => {
                if vertices.len() < 2 {
                    return DMatrix::zeros(dim, 0);
                }
                let diffs = DMatrix::from_fn(dim, vertices.len() - 1, |i, j| vertices[j + 1][i] - vertices[0][i]);
                let svd = diffs.svd(true, false);
                let u = svd.u.expect("left singular vectors requested");
                let top = svd.singular_values.max();
                let cols: Vec<usize> = (0..svd.singular_values.len())
                    .filter(|&k| top > 0.0 && svd.singular_values[k] > SPAN_RANK_TOL * top)
                    .collect();
                DMatrix::from_fn(dim, cols.len(), |i, j| u[(i, cols[j])])
            }
            HypothesisSet::LiftedPsdFro { side, .. } => {
                // symmetric matrices: e_ii and (e_ij + e_ji)/√2
                let side = *side;
                let mut cols = Vec::with_capacity(side * (side + 1) / 2);
                for i in 0..side {
                    for j in i..side {
                        let mut c = vec![0.0; dim];
                        if i == j {
                            c[i * side + i] = 1.0;
                        } else {
                            c[i * side + j] = std::f64::consts::FRAC_1_SQRT_2;
                            c[j * side + i] = std::f64::consts::FRAC_1_SQRT_2;
                        }
                        cols.push(c);
                    }
                }
                DMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i])
            }
            _ => DMatrix::identity(dim, dim),
        }
    }
}

/// Sort-and-threshold projection onto `{‖w‖₁ ≤ r}`.
fn project_l1(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, m) in mags.iter().enumerate() {
        cumsum += m;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if m - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

/// Projection onto PSD matrices of Frobenius norm at most `radius`.
///
/// Alternates between eigenvalue clipping and radial shrinking until the
/// iterate moves less than `1e-10`.
fn project_psd_fro(v: &[f64], side: usize, radius: f64) -> Vec<f64> {
    let mut current = DMatrix::from_row_slice(side, side, v);
    for _ in 0..100 {
        let sym = (&current + current.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let mut psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        psd = (&psd + psd.transpose()) * 0.5;
        let fro = psd.norm();
        if fro > radius {
            psd *= radius / fro;
        }
        let moved = (&psd - &current).norm();
        current = psd;
        if moved < 1e-10 {
            break;
        }
    }
    // row-major flattening
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            out.push(current[(i, j)]);
        }
    }
    out
}

/// Result of the minimum-norm-point search over a convex hull.
#[derive(Debug, Clone)]
pub struct MinNormPoint {
    pub point: Vec<f64>,
    /// Convex weights over the input points (sparse: most are zero).
    pub weights: Vec<f64>,
}

/// Wolfe's active-set algorithm for the point of smallest norm in `conv(points)`.
pub fn min_norm_point(points: &[Vec<f64>]) -> MinNormPoint {
    const Z1: f64 = 1e-14;
    const Z2: f64 = 1e-12;
    let count = points.len();
    let dim = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let start = (0..count)
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .expect("at least one point");
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let combine = |active: &[usize], weights: &[f64]| {
        let mut x = vec![0.0; dim];
        for (&i, &w) in active.iter().zip(weights) {
            for (xk, pk) in x.iter_mut().zip(&points[i]) {
                *xk += w * pk;
            }
        }
        x
    };
    let mut x = points[start].clone();

    for _ in 0..(50 * (count + dim) + 100) {
        let xx = dot(&x, &x);
        let (j, xp) = (0..count)
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one point");
        if xx - xp <= Z1 * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);

        loop {
            let mu = affine_min_norm(points, &active);
            if mu.iter().all(|m| *m > Z2) {
                weights = mu;
                break;
            }
            let theta = active
                .iter()
                .enumerate()
                .filter(|(k, _)| mu[*k] <= Z2)
                .map(|(k, _)| {
                    let denom = weights[k] - mu[k];
                    if denom > 0.0 {
                        weights[k] / denom
                    } else {
                        1.0
                    }
                })
                .fold(1.0f64, f64::min)
                .clamp(0.0, 1.0);
            for (w, m) in weights.iter_mut().zip(&mu) {
                *w = (1.0 - theta) * *w + theta * m;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= Z2 {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if active.len() <= 1 {
                break;
            }
        }
        x = combine(&active, &weights);
    }

    let mut full = vec![0.0; count];
    for (&i, &w) in active.iter().zip(&weights) {
        full[i] = w;
    }
    MinNormPoint { point: x, weights: full }
}

/// Affine weights (summing to one) of the min-norm point of `aff(points[active])`.
fn affine_min_norm(points: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let m = active.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    for a in 0..m {
        for b in a..m {
            let g = dot(&points[active[a]], &points[active[b]]);
            kkt[(a, b)] = g;
            kkt[(b, a)] = g;
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let solved = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| {
            kkt.svd(true, true)
                .solve(&rhs, 1e-14)
                .unwrap_or_else(|_| DVector::from_element(m + 1, 1.0 / m as f64))
        });
    let mut mu: Vec<f64> = solved.iter().take(m).copied().collect();
    let total: f64 = mu.iter().sum();
    if total.abs() > 1e-300 {
        mu.iter_mut().for_each(|v| *v /= total);
    }
    mu
}

/// Euclidean distance from `v` to `conv(points)`.
pub fn hull_distance(points: &[Vec<f64>], v: &[f64]) -> Result<f64> {
    let first = points.first().ok_or(Error::Empty("hull points"))?;
    Error::check_dim(first.len(), v.len())?;
    let shifted: Vec<Vec<f64>> = points.iter().map(|w| sub(w, v)).collect();
    Ok(norm2(&min_norm_point(&shifted).point))
}

fn pairwise_diameter(points: &[Vec<f64>], metric: impl Fn(&[f64], &[f64]) -> Result<f64>) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(metric(a, b)?);
        }
    }
    Ok(best)
}

/// Diameter of a point list under a semi-norm descriptor.
pub fn seminorm_diameter(points: &[Vec<f64>], norm: &SemiNorm) -> Result<f64> {
    pairwise_diameter(points, |a, b| seminorm_eval(norm, &sub(a, b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diameters {
    pub euclidean: f64,
    pub infinity: f64,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub e: Option<f64>,
}

/// A finite point set standing in for a (possibly infinite) set through its
/// convex hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub points: Vec<Vec<f64>>,
    pub covered_set: String,
    pub diameters: Diameters,
}

impl Skeleton {
    pub fn new(points: Vec<Vec<f64>>, covered_set: impl Into<String>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("skeleton points"))?;
        if points.iter().any(|p| p.len() != first.len()) {
            return Err(Error::config("skeleton points must share a dimension"));
        }
        let euclidean = pairwise_diameter(&points, |a, b| Ok(dist2(a, b)))?;
        let infinity = pairwise_diameter(&points, |a, b| {
            Ok(a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        })?;
        Ok(Self {
            points,
            covered_set: covered_set.into(),
            diameters: Diameters { euclidean, infinity, g: None, e: None },
        })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Fills the `(g, e)` diameters for a concentration profile.
    pub fn with_profile_diameters(mut self, g_norm: &SemiNorm, e_norm: &SemiNorm) -> Result<Self> {
        self.diameters.g = Some(seminorm_diameter(&self.points, g_norm)?);
        self.diameters.e = Some(seminorm_diameter(&self.points, e_norm)?);
        Ok(self)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p.iter().map(|x| c * x).collect()).collect(),
            covered_set: format!("{} scaled by {c}", self.covered_set),
            diameters: Diameters {
                euclidean: c.abs() * self.diameters.euclidean,
                infinity: c.abs() * self.diameters.infinity,
                g: self.diameters.g.map(|d| c.abs() * d),
                e: self.diameters.e.map(|d| c.abs() * d),
            },
        }
    }

    /// `max_{s ∈ points} ⟨z, s⟩`.
    pub fn support_function(&self, z: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), z.len())?;
        Ok(self.points.iter().map(|s| dot(s, z)).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Uniform direction on the unit sphere of the column span of `basis`.
fn random_direction(basis: &DMatrix<f64>, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g = DVector::from_fn(basis.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = basis * g;
        let len = v.norm();
        if len > 1e-12 {
            return (v / len).iter().copied().collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDirections {
    pub directions: Vec<Vec<f64>>,
    pub candidates: usize,
    pub acceptance_rate: f64,
}

/// Unit directions `v` with `center + t·v ∈ K`, by rejection sampling on the
/// sphere of `span(K − K)` plus vertex directions for polytopal sets.
///
/// An empty result means `t` exceeds the reach of `K` from `center` in every
/// sampled direction.
pub fn sphere_slice_directions(
    set: &HypothesisSet,
    center: &[f64],
    t: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<SliceDirections> {
    set.validate()?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::config(format!("slice scale must be positive, got {t}")));
    }
    if !set.contains(center, 1e-9)? {
        return Err(Error::config("slice center lies outside the hypothesis set"));
    }
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(n_dirs);
    if let Some(vertices) = set.vertices() {
        for w in vertices {
            let d = sub(&w, center);
            let len = norm2(&d);
            if len > 1e-12 {
                candidates.push(d.iter().map(|x| x / len).collect());
            }
        }
    }
    let basis = set.span_basis();
    if basis.ncols() > 0 {
        let mut rng = seed::child_rng(seed, "sphere_slice", 0);
        candidates.extend((0..n_dirs).map(|_| random_direction(&basis, &mut rng)));
    }
    let total = candidates.len();
    let mut directions = Vec::new();
    for v in candidates {
        let point: Vec<f64> = center.iter().zip(&v).map(|(c, d)| c + t * d).collect();
        if set.contains(&point, MEMBERSHIP_TOL)? {
            directions.push(v);
        }
    }
    let acceptance_rate = if total == 0 { 0.0 } else { directions.len() as f64 / total as f64 };
    Ok(SliceDirections { directions, candidates: total, acceptance_rate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeDirections {
    pub directions: Vec<Vec<f64>>,
    /// The set is `{apex}`, so the cone is trivial.
    pub degenerate: bool,
}

/// Unit directions in `cone(K − apex)`: normalized differences to vertices
/// and to projected points sampled at geometrically spread radii around the
/// apex, deduplicated at [`ANGULAR_DEDUP_TOL`].
pub fn cone_directions(set: &HypothesisSet, apex: &[f64], n_dirs: usize, seed: u64) -> Result<ConeDirections> {
    set.validate()?;
    if !set.contains(apex, 1e-9)? {
        return Err(Error::config("cone apex lies outside the hypothesis set"));
    }
    let scale = set.diameter_bound().max(1e-12);
    let mut points: Vec<Vec<f64>> = set.vertices().unwrap_or_default();
    let basis = set.span_basis();
    if basis.ncols() > 0 {
        let mut rng = seed::child_rng(seed, "cone_directions", 0);
        for _ in 0..n_dirs {
            let u = random_direction(&basis, &mut rng);
            let radius = scale * 0.5f64.powi(rng.random_range(0..24));
            let probe: Vec<f64> = apex.iter().zip(&u).map(|(a, d)| a + radius * d).collect();
            points.push(set.project(&probe)?);
        }
    }
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for w in points {
        let d = sub(&w, apex);
        let len = norm2(&d);
        if len <= 1e-12 * (1.0 + scale) {
            continue;
        }
        let unit: Vec<f64> = d.iter().map(|x| x / len).collect();
        if directions.iter().all(|e| dist2(e, &unit) >= ANGULAR_DEDUP_TOL) {
            directions.push(unit);
        }
    }
    let degenerate = directions.is_empty();
    Ok(ConeDirections { directions, degenerate })
}

/// Random points of `S = {v : ‖v‖₀ ≤ k, ‖v‖₂ ≤ 3}`: uniform support of size
/// `k`, uniform direction on that coordinate sphere, scaled to radius 3.
pub fn sparse_skeleton_sampler(k: usize, p: usize, n_points: usize, seed: u64) -> Result<Skeleton> {
    if k == 0 || k > p {
        return Err(Error::config(format!("sparsity {k} must lie in 1..={p}")));
    }
    if n_points == 0 {
        return Err(Error::Empty("skeleton points"));
    }
    let mut rng = seed::child_rng(seed, "sparse_skeleton", 0);
    let points = (0..n_points)
        .map(|_| {
            let support = rand::seq::index::sample(&mut rng, p, k);
            let mut g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = norm2(&g).max(f64::MIN_POSITIVE);
            g.iter_mut().for_each(|x| *x *= 3.0 / len);
            let mut v = vec![0.0; p];
            for (idx, val) in support.iter().zip(g) {
                v[idx] = val;
            }
            v
        })
        .collect();
    Ok(Skeleton {
        points,
        covered_set: format!(
            "descent cone ∩ unit sphere of the l1-ball at a {k}-sparse boundary point (p = {p})"
        ),
        diameters: Diameters { euclidean: 6.0, infinity: 6.0, g: None, e: None },
    })
}

/// `v` lies in the descent cone of `‖·‖₁` at `beta`.
pub fn in_l1_descent_cone(beta: &[f64], v: &[f64], tol: f64) -> bool {
    let mut on_support = 0.0;
    let mut off_support = 0.0;
    for (b, x) in beta.iter().zip(v) {
        if *b != 0.0 {
            on_support += b.signum() * x;
        } else {
            off_support += x.abs();
        }
    }
    off_support + on_support <= tol
}
