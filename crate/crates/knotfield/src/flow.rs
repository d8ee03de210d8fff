//! Gradient-flow integration and separatrix tracing.
//!
//! Forward time follows `xdot = grad phi` (potential strictly increasing
//! along trajectories), backward time the negation. The vector field is
//! normalized to unit speed so steps measure arc length and the flow does
//! not stall near critical points; an embedded Dormand-Prince 5(4) pair
//! with PI step control handles accuracy.
//!
//! Index-2 critical points have one-dimensional unstable manifolds: the
//! two branches launched along the positive eigenvector are the tunnel
//! arcs, and both must reach the knot tube. Index-1 points have
//! one-dimensional stable manifolds: the two branches launched backward
//! along the negative eigenvector are the loops through the point at
//! infinity, and both must reach the far field where `phi` approaches its
//! zero value at infinity.

use crate::critical::CriticalPoint;
use crate::field::{gradient, potential, FieldError, QuadratureConfig};
use crate::knot::{KnotCurve, TubeSpec};
use crate::Vec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    /// `xdot = +grad phi`: ascent.
    Forward,
    /// `xdot = -grad phi`: descent.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Entered the tubular neighborhood of the knot.
    KnotTube,
    /// Left the far-field sphere `|x| > R_far`.
    FarField,
    /// Passed within the dedup radius of a known critical point with a
    /// vanishing gradient.
    NearCritical { crit: usize },
    /// Step budget exhausted (a reported outcome, not an error).
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// Unstable-manifold branch of an index-2 point (tunnel arc).
    TunnelGamma,
    /// Stable-manifold branch of an index-1 point (loop at infinity).
    ThetaLoop,
    /// Bare trajectory fragment (census and direct integrations).
    Fragment,
}

#[derive(Debug, Clone)]
pub struct FlowArc {
    pub kind: ArcKind,
    /// Index into the critical list this arc was launched from.
    pub seed: Option<usize>,
    /// +1 / -1 along the launching eigenvector.
    pub branch: i8,
    pub direction: TimeDirection,
    /// Accepted integration points with the potential value at each.
    pub polyline: Vec<(Vec3, f64)>,
    pub termination: Termination,
    /// True when any quadrature along the arc hit the node budget.
    pub quad_flag: bool,
}

impl FlowArc {
    pub fn terminal(&self) -> Vec3 {
        self.polyline.last().expect("nonempty polyline").0
    }

    pub fn terminal_phi(&self) -> f64 {
        self.polyline.last().expect("nonempty polyline").1
    }

    /// Largest per-step violation of the expected phi monotonicity
    /// (ascending for forward arcs, descending for backward); 0 if clean.
    pub fn max_phi_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.polyline.windows(2) {
            let d = match self.direction {
                TimeDirection::Forward => w[0].1 - w[1].1,
                TimeDirection::Backward => w[1].1 - w[0].1,
            };
            worst = worst.max(d);
        }
        worst
    }
}

/// Both branches of a one-dimensional invariant manifold.
#[derive(Debug, Clone)]
pub struct SeparatrixPair {
    pub seed: usize,
    pub plus: FlowArc,
    pub minus: FlowArc,
}

impl SeparatrixPair {
    pub fn both_terminate(&self, t: Termination) -> bool {
        self.plus.termination == t && self.minus.termination == t
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("critical point has index {got}, expected {expected}")]
    WrongIndex { expected: u8, got: u8 },
    #[error("separatrix branch missed its expected terminus (seed {})", .0.seed)]
    TerminationMismatch(Box<SeparatrixPair>),
    #[error("empty critical list: every knot potential has an index-1 critical point")]
    EmptyCriticalSet,
    #[error("bad flow start: {0}")]
    BadStart(String),
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Launch offset along the eigenvector, as a fraction of the diameter.
    pub delta_factor: f64,
    /// Relative / absolute integrator tolerances.
    pub rtol: f64,
    pub atol: f64,
    /// Far-field radius as a multiple of the diameter.
    pub r_far_factor: f64,
    pub max_steps: usize,
    /// Quadrature for the flow field; tighter than the field default so
    /// evaluation noise stays far below the monotonicity slack.
    pub quad: QuadratureConfig,
    /// NearCritical fires within `r_dup` of a known critical point when
    /// `|grad phi| < near_crit_grad_factor * tol_res`.
    pub near_crit_grad_factor: f64,
    /// Residual scale; defaults to the search module's formula.
    pub tol_res: Option<f64>,
    /// Dedup radius; defaults to `1e-5 * diameter`.
    pub r_dup: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            delta_factor: 1e-4,
            rtol: 1e-9,
            atol: 1e-12,
            r_far_factor: 50.0,
            max_steps: 100_000,
            quad: QuadratureConfig { tol_q: 1e-12, ..Default::default() },
            near_crit_grad_factor: 10.0,
            tol_res: None,
            r_dup: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.delta_factor > 0.0 && self.delta_factor < 0.01) {
            return Err(FlowError::InvalidConfig(format!(
                "delta_factor {} outside (0, 0.01)",
                self.delta_factor
            )));
        }
        if !(self.r_far_factor > 10.0) {
            return Err(FlowError::InvalidConfig(format!(
                "r_far_factor {} must exceed 10 diameters",
                self.r_far_factor
            )));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(FlowError::InvalidConfig("tolerances must be positive".into()));
        }
        self.quad.validate().map_err(FlowError::Field)
    }

    pub fn resolved_tol_res(&self, curve: &KnotCurve) -> f64 {
        self.tol_res
            .unwrap_or(1e-8 * curve.arc_length() / curve.diameter().powi(2))
    }

    pub fn resolved_r_dup(&self, curve: &KnotCurve) -> f64 {
        self.r_dup.unwrap_or(1e-5 * curve.diameter())
    }

    pub fn r_far(&self, curve: &KnotCurve) -> f64 {
        self.r_far_factor * curve.diameter()
    }

    /// Threshold consistent with phi(inf) = 0: the monopole far field
    /// makes phi ~ L / R_far at the far-field sphere.
    pub fn far_field_phi_threshold(&self, curve: &KnotCurve) -> f64 {
        1.2 * curve.arc_length() / self.r_far(curve)
    }
}

struct RhsEval {
    dir: Vec3,
    phi: f64,
    gnorm: f64,
    converged: bool,
}

fn eval_rhs(
    curve: &KnotCurve,
    x: &Vec3,
    quad: &QuadratureConfig,
    sign: f64,
) -> Result<RhsEval, FieldError> {
    let s = gradient(curve, x, quad)?;
    let g = s.grad.expect("gradient part");
    let gnorm = g.norm();
    let dir = if gnorm > 1e-300 { g * (sign / gnorm) } else { Vec3::zeros() };
    Ok(RhsEval { dir, phi: s.phi, gnorm, converged: s.converged })
}

// Dormand-Prince 5(4) coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate the normalized gradient flow from `x0` until a termination
/// predicate fires: tube entry, far-field exit, a near-critical pass, or
/// the step budget.
pub fn integrate_flow(
    curve: &KnotCurve,
    x0: Vec3,
    direction: TimeDirection,
    cfg: &FlowConfig,
    crits: &[CriticalPoint],
    tube: &TubeSpec,
) -> Result<FlowArc, FlowError> {
    cfg.validate()?;
    let d = curve.diameter();
    let r_far = cfg.r_far(curve);
    let rho = tube.rho;
    let near_grad = cfg.near_crit_grad_factor * cfg.resolved_tol_res(curve);
    let r_dup = cfg.resolved_r_dup(curve);
    let sign = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Backward => -1.0,
    };

    let (dist0, _) = curve.distance_to(&x0);
    if dist0 <= rho {
        return Err(FlowError::BadStart(format!(
            "start is {dist0:.3e} from the knot, inside the tube radius {rho:.3e}"
        )));
    }
    if x0.norm() >= r_far {
        return Err(FlowError::BadStart(format!(
            "start |x| = {:.3e} beyond the far-field radius {r_far:.3e}",
            x0.norm()
        )));
    }

    let mut quad_flag = false;
    let mut x = x0;
    let mut dist_x = dist0;
    let mut k1 = eval_rhs(curve, &x, &cfg.quad, sign)?;
    quad_flag |= !k1.converged;
    let mut polyline = vec![(x, k1.phi)];

    let mut h = 1e-3 * d;
    let mut err_old = 1e-4f64;
    let mut steps = 0usize;
    let mut rejects_in_row = 0usize;
    let mut just_rejected = false;

    let termination = loop {
        if steps >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        // Step cap: generous in the far field, shrinking toward the tube so
        // the crossing cannot be jumped.
        let mut h_max = (0.1 * d).max(0.1 * x.norm());
        if dist_x < 2.0 * rho {
            h_max = h_max.min((0.5 * (dist_x - 0.8 * rho)).max(0.02 * rho));
        }
        h = h.min(h_max).max(1e-14 * d);

        let stages = (|| -> Result<(Vec3, f64, RhsEval), FieldError> {
            let f = |p: &Vec3| eval_rhs(curve, p, &cfg.quad, sign);
            let k2 = f(&(x + k1.dir * (A21 * h)))?;
            let k3 = f(&(x + (k1.dir * A31 + k2.dir * A32) * h))?;
            let k4 = f(&(x + (k1.dir * A41 + k2.dir * A42 + k3.dir * A43) * h))?;
            let k5 = f(&(x + (k1.dir * A51 + k2.dir * A52 + k3.dir * A53 + k4.dir * A54) * h))?;
            let k6 = f(&(x
                + (k1.dir * A61 + k2.dir * A62 + k3.dir * A63 + k4.dir * A64 + k5.dir * A65)
                    * h))?;
            let y1 = x
                + (k1.dir * B1 + k3.dir * B3 + k4.dir * B4 + k5.dir * B5 + k6.dir * B6) * h;
            let k7 = f(&y1)?;
            let e = (k1.dir * E1 + k3.dir * E3 + k4.dir * E4 + k5.dir * E5 + k6.dir * E6
                + k7.dir * E7)
                * h;
            let mut err = 0.0;
            for i in 0..3 {
                let sc = cfg.atol + cfg.rtol * x[i].abs().max(y1[i].abs());
                err += (e[i] / sc).powi(2);
            }
            let err = (err / 3.0).sqrt();
            quad_flag |= !k2.converged || !k3.converged || !k4.converged || !k5.converged
                || !k6.converged || !k7.converged;
            Ok((y1, err, k7))
        })();

        let (y1, err, k7) = match stages {
            Ok(v) => v,
            Err(FieldError::TooCloseToKnot { .. }) => {
                // A stage fell inside the evaluation floor; retry shorter.
                h *= 0.25;
                rejects_in_row += 1;
                if rejects_in_row > 60 {
                    break Termination::MaxSteps;
                }
                continue;
            }
            Err(e) => return Err(FlowError::Field(e)),
        };

        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.7);
            rejects_in_row += 1;
            just_rejected = true;
            if rejects_in_row > 60 {
                break Termination::MaxSteps;
            }
            continue;
        }
        rejects_in_row = 0;
        steps += 1;

        let (dist1, _) = curve.distance_to(&y1);
        if dist1 < rho {
            // Bisect the chord onto the tube boundary for a stable
            // terminal contact point.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                let p = x + (y1 - x) * mid;
                if curve.distance_to(&p).0 < rho {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let terminal = x + (y1 - x) * hi;
            let phi = match potential(curve, &terminal, &cfg.quad) {
                Ok(s) => {
                    quad_flag |= !s.converged;
                    s.phi
                }
                // Terminal contact can sit under the evaluation floor for
                // fat tubes; reuse the last stage value then.
                Err(FieldError::TooCloseToKnot { .. }) => k7.phi,
                Err(e) => return Err(FlowError::Field(e)),
            };
            polyline.push((terminal, phi));
            break Termination::KnotTube;
        }
        if y1.norm() > r_far {
            polyline.push((y1, k7.phi));
            break Termination::FarField;
        }
        let near = crits.iter().enumerate().find(|(_, c)| {
            (y1 - c.x).norm() < r_dup && k7.gnorm < near_grad
        });
        polyline.push((y1, k7.phi));
        if let Some((ci, _)) = near {
            break Termination::NearCritical { crit: ci };
        }

        x = y1;
        dist_x = dist1;
        k1 = k7;
        let facmax = if just_rejected { 1.0 } else { 5.0 };
        just_rejected = false;
        let fac = (0.9 * err.max(1e-10).powf(-0.14) * err_old.powf(0.08)).clamp(0.2, facmax);
        h *= fac;
        err_old = err.max(1e-10);
    };

    Ok(FlowArc {
        kind: ArcKind::Fragment,
        seed: None,
        branch: 0,
        direction,
        polyline,
        termination,
        quad_flag,
    })
}

/// Trace both unstable-manifold branches of an index-2 point; both must
/// terminate on the knot tube.
pub fn trace_unstable(
    curve: &KnotCurve,
    crits: &[CriticalPoint],
    seed: usize,
    cfg: &FlowConfig,
    tube: &TubeSpec,
) -> Result<SeparatrixPair, FlowError> {
    let p = &crits[seed];
    if p.index != 2 {
        return Err(FlowError::WrongIndex { expected: 2, got: p.index });
    }
    let v = p.eigvecs[2];
    let delta = cfg.delta_factor * curve.diameter();
    let launch = |sgn: f64| -> Result<FlowArc, FlowError> {
        let mut arc = integrate_flow(
            curve,
            p.x + v * (delta * sgn),
            TimeDirection::Forward,
            cfg,
            crits,
            tube,
        )?;
        arc.kind = ArcKind::TunnelGamma;
        arc.seed = Some(seed);
        arc.branch = sgn as i8;
        arc.polyline.insert(0, (p.x, p.phi));
        Ok(arc)
    };
    let pair = SeparatrixPair { seed, plus: launch(1.0)?, minus: launch(-1.0)? };
    if !pair.both_terminate(Termination::KnotTube) {
        return Err(FlowError::TerminationMismatch(Box::new(pair)));
    }
    Ok(pair)
}

/// Trace both stable-manifold branches of an index-1 point backward; both
/// must reach the far field, descending toward phi(inf) = 0.
pub fn trace_stable(
    curve: &KnotCurve,
    crits: &[CriticalPoint],
    seed: usize,
    cfg: &FlowConfig,
    tube: &TubeSpec,
) -> Result<SeparatrixPair, FlowError> {
    let p = &crits[seed];
    if p.index != 1 {
        return Err(FlowError::WrongIndex { expected: 1, got: p.index });
    }
    let v = p.eigvecs[0];
    let delta = cfg.delta_factor * curve.diameter();
    let launch = |sgn: f64| -> Result<FlowArc, FlowError> {
        let mut arc = integrate_flow(
            curve,
            p.x + v * (delta * sgn),
            TimeDirection::Backward,
            cfg,
            crits,
            tube,
        )?;
        arc.kind = ArcKind::ThetaLoop;
        arc.seed = Some(seed);
        arc.branch = sgn as i8;
        arc.polyline.insert(0, (p.x, p.phi));
        Ok(arc)
    };
    let pair = SeparatrixPair { seed, plus: launch(1.0)?, minus: launch(-1.0)? };
    if !pair.both_terminate(Termination::FarField) {
        return Err(FlowError::TerminationMismatch(Box::new(pair)));
    }
    Ok(pair)
}

/// Separatrices for a whole classified critical list: one tunnel arc per
/// index-2 point, one loop per index-1 point. Termination mismatches are
/// kept with a warning so the arcs remain available for diagnosis.
#[derive(Debug)]
pub struct TunnelingBundle {
    pub gammas: Vec<SeparatrixPair>,
    pub thetas: Vec<SeparatrixPair>,
    pub warnings: Vec<String>,
}

impl TunnelingBundle {
    pub fn arcs(&self) -> impl Iterator<Item = &FlowArc> {
        self.gammas
            .iter()
            .chain(self.thetas.iter())
            .flat_map(|p| [&p.plus, &p.minus])
    }

    pub fn all_gamma_tube(&self) -> bool {
        self.gammas.iter().all(|p| p.both_terminate(Termination::KnotTube))
    }

    pub fn all_theta_far(&self) -> bool {
        self.thetas.iter().all(|p| p.both_terminate(Termination::FarField))
    }
}

pub fn build_tunneling(
    curve: &KnotCurve,
    crits: &[CriticalPoint],
    cfg: &FlowConfig,
    tube: &TubeSpec,
) -> Result<TunnelingBundle, FlowError> {
    if crits.is_empty() {
        return Err(FlowError::EmptyCriticalSet);
    }
    let jobs: Vec<usize> = (0..crits.len()).collect();
    let traced: Vec<(usize, Result<SeparatrixPair, FlowError>)> = jobs
        .par_iter()
        .map(|&i| {
            let r = match crits[i].index {
                2 => trace_unstable(curve, crits, i, cfg, tube),
                1 => trace_stable(curve, crits, i, cfg, tube),
                other => Err(FlowError::WrongIndex { expected: 1, got: other }),
            };
            (i, r)
        })
        .collect();

    let mut bundle = TunnelingBundle { gammas: Vec::new(), thetas: Vec::new(), warnings: Vec::new() };
    for (i, result) in traced {
        let index = crits[i].index;
        match result {
            Ok(pair) => {
                if index == 2 {
                    bundle.gammas.push(pair);
                } else {
                    bundle.thetas.push(pair);
                }
            }
            Err(FlowError::TerminationMismatch(pair)) => {
                bundle.warnings.push(format!(
                    "separatrix of critical point {i} (index {index}) missed its terminus: \
                     +{:?} / -{:?}",
                    pair.plus.termination, pair.minus.termination
                ));
                if index == 2 {
                    bundle.gammas.push(*pair);
                } else {
                    bundle.thetas.push(*pair);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(bundle)
}

/// Outcome counts for random backward flows.
#[derive(Debug, Clone, Copy, Default)]
pub struct CensusStats {
    pub requested: usize,
    pub sampled: usize,
    pub far_field: usize,
    pub near_critical: usize,
    pub max_steps: usize,
    pub knot_tube: usize,
    pub quad_flags: usize,
}

impl CensusStats {
    pub fn far_field_fraction(&self) -> f64 {
        if self.sampled == 0 {
            return f64::NAN;
        }
        self.far_field as f64 / self.sampled as f64
    }
}

/// Sample `n` points in the search region (off the knot tube and off the
/// tunnel-arc tubes) and flow each backward; almost every point must reach
/// the far field, because the stable sets of the finite critical points
/// have measure zero.
pub fn descending_flow_census(
    curve: &KnotCurve,
    n: usize,
    rng_seed: u64,
    cfg: &FlowConfig,
    crits: &[CriticalPoint],
    tube: &TubeSpec,
    gamma_arcs: &[&FlowArc],
) -> Result<CensusStats, FlowError> {
    let mut stats = CensusStats { requested: n, ..Default::default() };
    if n == 0 {
        return Ok(stats);
    }
    let region = curve.search_region();
    let extent = region.max - region.min;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut samples = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while samples.len() < n && attempts < 1000 * n {
        attempts += 1;
        let p = Vec3::new(
            region.min.x + extent.x * rng.random::<f64>(),
            region.min.y + extent.y * rng.random::<f64>(),
            region.min.z + extent.z * rng.random::<f64>(),
        );
        if !curve.distance_above(&p, tube.rho) {
            continue;
        }
        let near_gamma = gamma_arcs.iter().any(|arc| {
            arc.polyline.iter().any(|(v, _)| (p - v).norm() < tube.rho)
        });
        if near_gamma {
            continue;
        }
        samples.push(p);
    }
    if samples.len() < n {
        return Err(FlowError::BadStart(format!(
            "could only place {} of {n} census samples off the tubes",
            samples.len()
        )));
    }

    let arcs: Vec<FlowArc> = samples
        .par_iter()
        .map(|p| integrate_flow(curve, *p, TimeDirection::Backward, cfg, crits, tube))
        .collect::<Result<Vec<_>, _>>()?;
    for arc in &arcs {
        stats.sampled += 1;
        stats.quad_flags += arc.quad_flag as usize;
        match arc.termination {
            Termination::FarField => stats.far_field += 1,
            Termination::NearCritical { .. } => stats.near_critical += 1,
            Termination::MaxSteps => stats.max_steps += 1,
            Termination::KnotTube => stats.knot_tube += 1,
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{find_critical_points, SearchConfig};

    fn unknot() -> KnotCurve {
        KnotCurve::torus(1, 0, 1.0, 1.0).unwrap()
    }

    fn unknot_scan() -> (KnotCurve, TubeSpec, Vec<CriticalPoint>) {
        let k = unknot();
        let tube = TubeSpec::for_curve(&k);
        let scan = find_critical_points(
            &k,
            &SearchConfig { n_grid: 12, ..Default::default() },
            &tube,
        )
        .unwrap();
        (k, tube, scan.points)
    }

    #[test]
    fn ascent_from_ring_plane_hits_tube() {
        let k = unknot();
        let tube = TubeSpec::for_curve(&k);
        let arc = integrate_flow(
            &k,
            Vec3::new(0.5, 0.0, 0.0),
            TimeDirection::Forward,
            &FlowConfig::default(),
            &[],
            &tube,
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::KnotTube);
        let (d, _) = k.distance_to(&arc.terminal());
        assert!((d - tube.rho).abs() < 0.05 * tube.rho, "terminal distance {d}");
        assert!(arc.max_phi_violation() <= 1e-9);
    }

    #[test]
    fn descent_from_axis_reaches_far_field() {
        let k = unknot();
        let tube = TubeSpec::for_curve(&k);
        let cfg = FlowConfig::default();
        let arc = integrate_flow(
            &k,
            Vec3::new(0.0, 0.0, 0.5),
            TimeDirection::Backward,
            &cfg,
            &[],
            &tube,
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::FarField);
        assert!(arc.max_phi_violation() <= 1e-9);
        assert!(arc.terminal_phi() < cfg.far_field_phi_threshold(&k));
    }

    #[test]
    fn wrong_index_is_rejected() {
        let (k, tube, crits) = unknot_scan();
        assert_eq!(crits.len(), 1);
        assert!(matches!(
            trace_unstable(&k, &crits, 0, &FlowConfig::default(), &tube),
            Err(FlowError::WrongIndex { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn unknot_bundle_has_one_theta_loop_along_axis() {
        let (k, tube, crits) = unknot_scan();
        let bundle = build_tunneling(&k, &crits, &FlowConfig::default(), &tube).unwrap();
        assert_eq!(bundle.gammas.len(), 0);
        assert_eq!(bundle.thetas.len(), 1);
        assert!(bundle.all_theta_far());
        let pair = &bundle.thetas[0];
        // The stable direction is the circle's axis: branches leave along +-z.
        let zp = pair.plus.terminal().z;
        let zm = pair.minus.terminal().z;
        assert!(zp * zm < 0.0, "branches run to opposite axis ends");
        assert!(zp.abs() > 0.9 * FlowConfig::default().r_far(&k) * 0.99);
    }

    #[test]
    fn empty_critical_list_is_an_error() {
        let k = unknot();
        let tube = TubeSpec::for_curve(&k);
        assert!(matches!(
            build_tunneling(&k, &[], &FlowConfig::default(), &tube),
            Err(FlowError::EmptyCriticalSet)
        ));
    }

    #[test]
    fn census_on_unknot_is_all_far_field() {
        let (k, tube, crits) = unknot_scan();
        let stats =
            descending_flow_census(&k, 40, 7, &FlowConfig::default(), &crits, &tube, &[]).unwrap();
        assert_eq!(stats.sampled, 40);
        assert_eq!(stats.far_field, 40, "stats: {stats:?}");
    }

    #[test]
    fn empty_census_is_empty() {
        let (k, tube, crits) = unknot_scan();
        let stats =
            descending_flow_census(&k, 0, 7, &FlowConfig::default(), &crits, &tube, &[]).unwrap();
        assert_eq!(stats.sampled, 0);
        assert!(stats.far_field_fraction().is_nan());
    }

    #[test]
    fn bad_starts_are_rejected() {
        let k = unknot();
        let tube = TubeSpec::for_curve(&k);
        let cfg = FlowConfig::default();
        assert!(matches!(
            integrate_flow(&k, Vec3::new(1.0, 0.0, 0.1), TimeDirection::Forward, &cfg, &[], &tube),
            Err(FlowError::BadStart(_))
        ));
        let far = Vec3::new(0.0, 0.0, 2.0 * cfg.r_far(&k));
        assert!(matches!(
            integrate_flow(&k, far, TimeDirection::Forward, &cfg, &[], &tube),
            Err(FlowError::BadStart(_))
        ));
    }
}
