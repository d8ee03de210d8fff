//! Global search and Morse classification of the finite critical points.
//!
//! Seeds on a uniform grid over the search region, refined by damped
//! Newton on `grad phi` with the analytic Hessian, deduplicated, verified
//! by independent re-evaluation at doubled quadrature nodes, and
//! classified by the sign pattern of the Hessian eigenvalues.
//!
//! A grid search cannot certify completeness; the identity `m1 - m2 = 1`
//! (Euler characteristic of the knot complement with the point at
//! infinity counted separately) is used as the completeness witness, and
//! its failure triggers one automatic refinement pass.

use crate::eig3::sym_eigen;
use crate::field::{field_sample, FieldError, QuadratureConfig};
use crate::knot::{KnotCurve, TubeSpec};
use crate::quadrature::BASE_NODES;
use crate::{Mat3, Vec3};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error("critical point is numerically degenerate: margin {margin:.3e} <= {tol:.3e}; a density perturbation may separate it")]
    DegenerateCritical { margin: f64, tol: f64 },
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

/// Why a Newton refinement gave up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NewtonFailure {
    MaxIterations,
    LeftRegion,
    EnteredTube,
    SingularHessian,
    LineSearchStalled,
    VerificationFailed,
    Quadrature(String),
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Grid resolution per axis.
    pub n_grid: usize,
    pub newton_max_iters: usize,
    pub max_backtracks: usize,
    /// Residual tolerance; defaults to the scale-normalized
    /// `1e-8 * L / diameter^2` so behavior is invariant under rescaling.
    pub tol_res: Option<f64>,
    /// Nondegeneracy margin `min|eig| / ||H||_F` below which a point is
    /// reported as degenerate instead of classified.
    pub tol_deg: f64,
    /// Deduplication radius; defaults to `1e-5 * diameter`.
    pub r_dup: Option<f64>,
    pub quad: QuadratureConfig,
    /// Retry once with a 1.5x denser grid when `m1 - m2 = 1` fails.
    pub auto_refine: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_grid: 24,
            newton_max_iters: 60,
            max_backtracks: 30,
            tol_res: None,
            tol_deg: 1e-6,
            r_dup: None,
            quad: QuadratureConfig::default(),
            auto_refine: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), CriticalError> {
        if self.n_grid < 8 {
            return Err(CriticalError::InvalidConfig(format!("n_grid = {} < 8", self.n_grid)));
        }
        if !(self.tol_deg > 0.0) {
            return Err(CriticalError::InvalidConfig("tol_deg must be positive".into()));
        }
        if let Some(t) = self.tol_res {
            if !(t > 0.0) {
                return Err(CriticalError::InvalidConfig("tol_res must be positive".into()));
            }
        }
        if let Some(r) = self.r_dup {
            if !(r > 0.0) {
                return Err(CriticalError::InvalidConfig("r_dup must be positive".into()));
            }
        }
        self.quad.validate().map_err(|e| CriticalError::InvalidConfig(e.to_string()))
    }

    pub fn resolved_tol_res(&self, curve: &KnotCurve) -> f64 {
        self.tol_res
            .unwrap_or(1e-8 * curve.arc_length() / curve.diameter().powi(2))
    }

    pub fn resolved_r_dup(&self, curve: &KnotCurve) -> f64 {
        self.r_dup.unwrap_or(1e-5 * curve.diameter())
    }
}

/// A converged, verified zero of the gradient with its Hessian eigendata.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub x: Vec3,
    pub phi: f64,
    /// `|grad phi|` from the verification re-evaluation.
    pub residual: f64,
    /// Ascending.
    pub eigvals: [f64; 3],
    pub eigvecs: [Vec3; 3],
    /// Number of negative eigenvalues; 1 or 2 for finite points of a
    /// harmonic potential.
    pub index: u8,
    /// `min|eig| / ||H||_F`.
    pub nondeg_margin: f64,
    /// True when any quadrature along the refinement hit the node budget.
    pub quad_flag: bool,
}

/// A converged zero whose Hessian failed the nondegeneracy margin.
#[derive(Debug, Clone)]
pub struct DegenerateCandidate {
    pub x: Vec3,
    pub phi: f64,
    pub residual: f64,
    pub eigvals: [f64; 3],
    pub nondeg_margin: f64,
}

/// Raw refined point before classification.
#[derive(Debug, Clone)]
pub struct RefinedZero {
    pub x: Vec3,
    pub phi: f64,
    pub residual: f64,
    pub hess: Mat3,
    pub quad_flag: bool,
}

#[derive(Debug)]
pub struct ScanOutcome {
    /// Classified nondegenerate points, sorted by potential value.
    pub points: Vec<CriticalPoint>,
    pub degenerate: Vec<DegenerateCandidate>,
    pub seeds: usize,
    pub converged_seeds: usize,
    /// Completeness witness `m1 - m2 = 1`.
    pub lemma22_ok: bool,
    /// True when the automatic grid refinement pass ran.
    pub refined_pass: bool,
    pub n_grid_used: usize,
}

impl ScanOutcome {
    pub fn m1(&self) -> usize {
        self.points.iter().filter(|p| p.index == 1).count()
    }

    pub fn m2(&self) -> usize {
        self.points.iter().filter(|p| p.index == 2).count()
    }
}

/// Uniform grid of cell centers over the search region, excluding the tube.
pub fn seed_grid(curve: &KnotCurve, cfg: &SearchConfig, tube: &TubeSpec) -> Vec<Vec3> {
    let region = curve.search_region();
    let n = cfg.n_grid;
    let extent = region.max - region.min;
    let mut seeds = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = Vec3::new(
                    region.min.x + (i as f64 + 0.5) * extent.x / n as f64,
                    region.min.y + (j as f64 + 0.5) * extent.y / n as f64,
                    region.min.z + (k as f64 + 0.5) * extent.z / n as f64,
                );
                if curve.distance_above(&p, tube.rho) {
                    seeds.push(p);
                }
            }
        }
    }
    seeds
}

/// Damped Newton iteration on `grad phi = 0` from `x0`.
///
/// On success the zero has been re-verified at doubled quadrature nodes.
pub fn newton_refine(
    curve: &KnotCurve,
    x0: Vec3,
    cfg: &SearchConfig,
    tube: &TubeSpec,
) -> Result<RefinedZero, NewtonFailure> {
    // Iterates may roam a little outside the search region (planar curves
    // have a flat one); the converged point itself must lie inside it.
    let region = curve.search_region().pad(0.02 * curve.diameter());
    let tol_res = cfg.resolved_tol_res(curve);
    let max_step = 0.5 * curve.diameter();

    let mut x = x0;
    let mut quad_flag = false;
    let mut sample = match field_sample(curve, &x, &cfg.quad) {
        Ok(s) => s,
        Err(FieldError::TooCloseToKnot { .. }) => return Err(NewtonFailure::EnteredTube),
        Err(e) => return Err(NewtonFailure::Quadrature(e.to_string())),
    };

    for _ in 0..cfg.newton_max_iters {
        quad_flag |= !sample.converged;
        let g = sample.grad.expect("full sample");
        let gnorm = g.norm();
        if gnorm < tol_res {
            return verify_zero(curve, x, cfg, tube, quad_flag);
        }
        let h = sample.hess.expect("full sample");
        let mut step = match h.full_piv_lu().solve(&(-g)) {
            Some(s) => s,
            None => return Err(NewtonFailure::SingularHessian),
        };
        if !step.iter().all(|c| c.is_finite()) {
            return Err(NewtonFailure::SingularHessian);
        }
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }

        // Backtracking on |grad phi|, halving until decrease.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial = x + step * alpha;
            if !region.contains(&trial) {
                alpha *= 0.5;
                continue;
            }
            if !curve.distance_above(&trial, tube.rho) {
                alpha *= 0.5;
                continue;
            }
            match field_sample(curve, &trial, &cfg.quad) {
                Ok(s) => {
                    if s.grad.expect("full sample").norm() < gnorm {
                        accepted = Some((trial, s));
                        break;
                    }
                    alpha *= 0.5;
                }
                Err(FieldError::TooCloseToKnot { .. }) => {
                    alpha *= 0.5;
                }
                Err(e) => return Err(NewtonFailure::Quadrature(e.to_string())),
            }
        }
        match accepted {
            Some((trial, s)) => {
                // A full-length step that left the region for good means the
                // seed is flowing out of the search box.
                x = trial;
                sample = s;
            }
            None => {
                let full = x + step;
                if !region.contains(&full) {
                    return Err(NewtonFailure::LeftRegion);
                }
                if !curve.distance_above(&full, tube.rho) {
                    return Err(NewtonFailure::EnteredTube);
                }
                return Err(NewtonFailure::LineSearchStalled);
            }
        }
    }
    Err(NewtonFailure::MaxIterations)
}

/// Independent re-evaluation at doubled nodes; accepts only if the
/// residual still meets the tolerance and the point satisfies the
/// region/tube postconditions.
fn verify_zero(
    curve: &KnotCurve,
    x: Vec3,
    cfg: &SearchConfig,
    tube: &TubeSpec,
    quad_flag: bool,
) -> Result<RefinedZero, NewtonFailure> {
    if !curve.search_region().contains(&x) {
        return Err(NewtonFailure::LeftRegion);
    }
    if !curve.distance_above(&x, tube.rho) {
        return Err(NewtonFailure::EnteredTube);
    }
    let first = field_sample(curve, &x, &cfg.quad)
        .map_err(|e| NewtonFailure::Quadrature(e.to_string()))?;
    let doubled = QuadratureConfig {
        n0: (first.nodes_used * 2).max(BASE_NODES).min(cfg.quad.n_max),
        ..cfg.quad
    };
    let check = field_sample(curve, &x, &doubled)
        .map_err(|e| NewtonFailure::Quadrature(e.to_string()))?;
    let tol_res = cfg.resolved_tol_res(curve);
    let residual = check.grad.expect("full sample").norm();
    if residual >= tol_res {
        return Err(NewtonFailure::VerificationFailed);
    }
    Ok(RefinedZero {
        x,
        phi: check.phi,
        residual,
        hess: check.hess.expect("full sample"),
        quad_flag: quad_flag || !check.converged,
    })
}

/// Morse index from the eigenvalues: the number of negative ones.
/// Errors when the smallest `|eig|` is within the degeneracy margin.
pub fn classify(eigvals: &[f64; 3], tol_deg: f64) -> Result<u8, CriticalError> {
    let frob = (eigvals.iter().map(|e| e * e).sum::<f64>()).sqrt();
    let margin = eigvals.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
        / frob.max(f64::MIN_POSITIVE);
    if margin <= tol_deg {
        return Err(CriticalError::DegenerateCritical { margin, tol: tol_deg });
    }
    Ok(eigvals.iter().filter(|&&e| e < 0.0).count() as u8)
}

fn sort_key(p: &RefinedZero) -> (f64, f64, f64, f64) {
    (p.phi, p.x.x, p.x.y, p.x.z)
}

/// Collapse zeros within `r_dup` of each other, keeping the lowest
/// residual; iterates to a fixpoint so the result is idempotent.
pub fn dedup_zeros(mut zeros: Vec<RefinedZero>, r_dup: f64) -> Vec<RefinedZero> {
    zeros.sort_by(|a, b| {
        let (ka, kb) = (sort_key(a), sort_key(b));
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    loop {
        let mut kept: Vec<RefinedZero> = Vec::new();
        let mut merged = false;
        'outer: for z in zeros.drain(..) {
            for k in kept.iter_mut() {
                if (k.x - z.x).norm() < r_dup {
                    merged = true;
                    if z.residual < k.residual {
                        *k = z;
                    }
                    continue 'outer;
                }
            }
            kept.push(z);
        }
        zeros = kept;
        if !merged {
            return zeros;
        }
    }
}

fn scan_pass(
    curve: &KnotCurve,
    cfg: &SearchConfig,
    tube: &TubeSpec,
    n_grid: usize,
) -> (Vec<RefinedZero>, usize, usize) {
    let pass_cfg = SearchConfig { n_grid, ..cfg.clone() };
    let seeds = seed_grid(curve, &pass_cfg, tube);
    let refined: Vec<RefinedZero> = seeds
        .par_iter()
        .filter_map(|s| newton_refine(curve, *s, &pass_cfg, tube).ok())
        .collect();
    let converged = refined.len();
    (refined, seeds.len(), converged)
}

/// Full search: seed, refine in parallel, dedup, classify, sort by
/// potential value. When the `m1 - m2 = 1` witness fails and
/// `auto_refine` is set, one denser pass is merged in.
pub fn find_critical_points(
    curve: &KnotCurve,
    cfg: &SearchConfig,
    tube: &TubeSpec,
) -> Result<ScanOutcome, CriticalError> {
    cfg.validate()?;
    let r_dup = cfg.resolved_r_dup(curve);

    let (mut zeros, mut seeds, mut converged) = scan_pass(curve, cfg, tube, cfg.n_grid);
    let mut outcome = classify_all(cfg, zeros.clone(), r_dup);
    let mut refined_pass = false;
    let mut n_grid_used = cfg.n_grid;

    if !outcome.0 && cfg.auto_refine {
        refined_pass = true;
        n_grid_used = cfg.n_grid + cfg.n_grid / 2;
        let (more, s2, c2) = scan_pass(curve, cfg, tube, n_grid_used);
        seeds += s2;
        converged += c2;
        zeros.extend(more);
        outcome = classify_all(cfg, zeros, r_dup);
    }

    let (lemma22_ok, points, degenerate) = outcome;
    Ok(ScanOutcome {
        points,
        degenerate,
        seeds,
        converged_seeds: converged,
        lemma22_ok,
        refined_pass,
        n_grid_used,
    })
}

fn classify_all(
    cfg: &SearchConfig,
    zeros: Vec<RefinedZero>,
    r_dup: f64,
) -> (bool, Vec<CriticalPoint>, Vec<DegenerateCandidate>) {
    let deduped = dedup_zeros(zeros, r_dup);
    let mut points = Vec::new();
    let mut degenerate = Vec::new();
    for z in deduped {
        let eig = sym_eigen(&z.hess);
        let frob = z.hess.norm();
        let margin = eig.values.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
            / frob.max(f64::MIN_POSITIVE);
        match classify(&eig.values, cfg.tol_deg) {
            Ok(index) => points.push(CriticalPoint {
                x: z.x,
                phi: z.phi,
                residual: z.residual,
                eigvals: eig.values,
                eigvecs: eig.vectors,
                index,
                nondeg_margin: margin,
                quad_flag: z.quad_flag,
            }),
            Err(_) => degenerate.push(DegenerateCandidate {
                x: z.x,
                phi: z.phi,
                residual: z.residual,
                eigvals: eig.values,
                nondeg_margin: margin,
            }),
        }
    }
    points.sort_by(|a, b| {
        (a.phi, a.x.x, a.x.y, a.x.z)
            .partial_cmp(&(b.phi, b.x.x, b.x.y, b.x.z))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let m1 = points.iter().filter(|p| p.index == 1).count();
    let m2 = points.iter().filter(|p| p.index == 2).count();
    let lemma22_ok = degenerate.is_empty() && m1 == m2 + 1;
    (lemma22_ok, points, degenerate)
}
