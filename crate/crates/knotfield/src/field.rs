//! Potential, gradient, and Hessian of the charged curve.
//!
//! With unit line charge density the potential at `x` off the curve is
//! `phi(x) = int |r'(t)| / |x - r(t)| dt` over one period. Differentiating
//! under the integral sign:
//!
//! ```text
//! grad phi = -int |r'| (x - r) / |x - r|^3 dt          (E = -grad phi)
//! H_ij     =  int |r'| (3 d_i d_j / |d|^5 - delta_ij / |d|^3) dt
//! ```
//!
//! The integrands are analytic and periodic for `x` off the curve, so the
//! uniform trapezoid rule converges geometrically; nodes are doubled until
//! two successive levels agree to the requested relative tolerance. The
//! Hessian integrand is exactly trace-free, so harmonicity of the computed
//! values is a genuine accuracy check, not an enforced identity.

use crate::knot::KnotCurve;
use crate::quadrature::{level_for, BASE_NODES};
use crate::{Mat3, Vec3};
use thiserror::Error;

/// Evaluation floor as a fraction of the curve's minimum self-distance.
/// Closer than this the integrand peak exceeds the default node budget.
pub const RHO_EVAL_FLOOR_FACTOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("point is {dist:.3e} from the knot, below the evaluation floor {floor:.3e}")]
    TooCloseToKnot { dist: f64, floor: f64 },
    #[error("invalid quadrature config: {0}")]
    InvalidConfig(String),
}

/// Deterministic charge-density perturbation: scales the uniform density
/// by `1 + delta * ((r(t) - center) . direction)`. Off by default. The
/// perturbed potential is still a superposition of `1/|x - r|` kernels,
/// hence harmonic; turning it on separates degenerate critical points
/// without changing any of the counting machinery.
#[derive(Debug, Clone, Copy)]
pub struct DensityBump {
    pub delta: f64,
    pub direction: Vec3,
    pub center: Vec3,
}

impl DensityBump {
    fn weight(&self, pos: &Vec3) -> f64 {
        1.0 + self.delta * (pos - self.center).dot(&self.direction)
    }
}

/// Adaptive periodic-trapezoid parameters.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Starting node count.
    pub n0: usize,
    /// Node budget; reaching it without convergence flags the sample.
    pub n_max: usize,
    /// Relative tolerance on successive node-doubling estimates.
    pub tol_q: f64,
    /// Optional density perturbation (see [`DensityBump`]).
    pub bump: Option<DensityBump>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { n0: 64, n_max: 1 << 20, tol_q: 1e-10, bump: None }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.n0 < BASE_NODES {
            return Err(FieldError::InvalidConfig(format!("n0 = {} < {}", self.n0, BASE_NODES)));
        }
        if self.n_max < self.n0 {
            return Err(FieldError::InvalidConfig(format!(
                "n_max = {} < n0 = {}",
                self.n_max, self.n0
            )));
        }
        if !(self.tol_q > 0.0) {
            return Err(FieldError::InvalidConfig(format!("tol_q = {}", self.tol_q)));
        }
        Ok(())
    }
}

/// Which integrals to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd)]
enum Parts {
    Phi,
    PhiGrad,
    Full,
}

/// One field evaluation: potential, optional derivatives, and the
/// quadrature bookkeeping that produced them.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub x: Vec3,
    pub phi: f64,
    pub grad: Option<Vec3>,
    pub hess: Option<Mat3>,
    pub nodes_used: usize,
    /// Relative error estimate (difference of the last two node levels,
    /// scaled by the positive magnitude integral of each integrand).
    pub est_error: f64,
    /// False when the node budget was reached before the tolerance.
    pub converged: bool,
}

impl FieldSample {
    /// E = -grad phi.
    pub fn electric_field(&self) -> Option<Vec3> {
        self.grad.map(|g| -g)
    }
}

/// Raw trapezoid sums of all integrands at one node level.
/// Layout: [phi, gx, gy, gz, hxx, hxy, hxz, hyy, hyz, hzz, m_grad, m_hess].
type Acc = [f64; 12];

fn sum_level(
    pos: &[Vec3],
    speed: &[f64],
    odd_only: bool,
    x: &Vec3,
    parts: Parts,
    bump: Option<&DensityBump>,
) -> Acc {
    let mut acc = [0.0; 12];
    let (start, step) = if odd_only { (1, 2) } else { (0, 1) };
    let mut i = start;
    while i < pos.len() {
        let d = x - pos[i];
        let w = match bump {
            None => speed[i],
            Some(b) => speed[i] * b.weight(&pos[i]),
        };
        let n2 = d.norm_squared();
        let inv = 1.0 / n2.sqrt();
        acc[0] += w * inv;
        if parts >= Parts::PhiGrad {
            let inv2 = inv * inv;
            let inv3 = inv * inv2;
            acc[1] -= w * inv3 * d.x;
            acc[2] -= w * inv3 * d.y;
            acc[3] -= w * inv3 * d.z;
            acc[10] += w * inv2;
            if parts == Parts::Full {
                let inv5 = inv3 * inv2;
                acc[4] += w * (3.0 * inv5 * d.x * d.x - inv3);
                acc[5] += w * 3.0 * inv5 * d.x * d.y;
                acc[6] += w * 3.0 * inv5 * d.x * d.z;
                acc[7] += w * (3.0 * inv5 * d.y * d.y - inv3);
                acc[8] += w * 3.0 * inv5 * d.y * d.z;
                acc[9] += w * (3.0 * inv5 * d.z * d.z - inv3);
                acc[11] += w * 4.0 * inv3;
            }
        }
        i += step;
    }
    acc
}

fn combine(prev: &Acc, odd: &Acc, h_new: f64) -> Acc {
    let mut out = [0.0; 12];
    for k in 0..12 {
        out[k] = prev[k] / 2.0 + odd[k] * h_new;
    }
    out
}

/// Relative difference between two levels, per requested part.
fn level_error(a: &Acc, b: &Acc, parts: Parts) -> f64 {
    let tiny = f64::MIN_POSITIVE;
    let e_phi = (b[0] - a[0]).abs() / b[0].abs().max(tiny);
    let mut err = e_phi;
    if parts >= Parts::PhiGrad {
        let dg = ((b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2) + (b[3] - a[3]).powi(2)).sqrt();
        err = err.max(dg / b[10].abs().max(tiny));
    }
    if parts == Parts::Full {
        let mut dh = 0.0;
        for k in 4..10 {
            let m = if k == 4 || k == 7 || k == 9 { 1.0 } else { 2.0 };
            dh += m * (b[k] - a[k]).powi(2);
        }
        err = err.max(dh.sqrt() / b[11].abs().max(tiny));
    }
    err
}

fn evaluate(
    curve: &KnotCurve,
    x: &Vec3,
    cfg: &QuadratureConfig,
    parts: Parts,
) -> Result<FieldSample, FieldError> {
    cfg.validate()?;
    let floor = RHO_EVAL_FLOOR_FACTOR * curve.min_self_distance();
    if !curve.distance_above(x, floor) {
        let (dist, _) = curve.distance_to(x);
        return Err(FieldError::TooCloseToKnot { dist, floor });
    }
    if let Some(b) = &cfg.bump {
        // The perturbed density must stay positive along the curve.
        let reach = curve.diameter();
        if b.delta.abs() * (reach + (b.center.norm())) * b.direction.norm() >= 1.0 {
            return Err(FieldError::InvalidConfig(
                "density bump too large: perturbed density may go negative".into(),
            ));
        }
    }
    let bump = cfg.bump.as_ref();

    let mut level = level_for(cfg.n0);
    let nodes = curve.node_level(level);
    let h = nodes.weight();
    let raw = sum_level(&nodes.pos, &nodes.speed, false, x, parts, bump);
    let mut acc: Acc = std::array::from_fn(|k| raw[k] * h);
    let mut n = nodes.n;
    let mut est_error = f64::INFINITY;
    let mut converged = false;

    while n * 2 <= cfg.n_max {
        level += 1;
        let nodes = curve.node_level(level);
        let odd = sum_level(&nodes.pos, &nodes.speed, true, x, parts, bump);
        let next = combine(&acc, &odd, nodes.weight());
        est_error = level_error(&acc, &next, parts);
        acc = next;
        n = nodes.n;
        if est_error <= cfg.tol_q {
            converged = true;
            break;
        }
    }

    let grad = (parts >= Parts::PhiGrad).then(|| Vec3::new(acc[1], acc[2], acc[3]));
    let hess = (parts == Parts::Full).then(|| {
        Mat3::new(
            acc[4], acc[5], acc[6],
            acc[5], acc[7], acc[8],
            acc[6], acc[8], acc[9],
        )
    });
    Ok(FieldSample {
        x: *x,
        phi: acc[0],
        grad,
        hess,
        nodes_used: n,
        est_error,
        converged,
    })
}

/// Potential only.
pub fn potential(curve: &KnotCurve, x: &Vec3, cfg: &QuadratureConfig) -> Result<FieldSample, FieldError> {
    evaluate(curve, x, cfg, Parts::Phi)
}

/// Potential and gradient from a shared node set.
pub fn gradient(curve: &KnotCurve, x: &Vec3, cfg: &QuadratureConfig) -> Result<FieldSample, FieldError> {
    evaluate(curve, x, cfg, Parts::PhiGrad)
}

/// Potential, gradient, and Hessian from a shared node set.
pub fn hessian(curve: &KnotCurve, x: &Vec3, cfg: &QuadratureConfig) -> Result<FieldSample, FieldError> {
    evaluate(curve, x, cfg, Parts::Full)
}

/// Fused evaluation of everything; identical to [`hessian`].
pub fn field_sample(curve: &KnotCurve, x: &Vec3, cfg: &QuadratureConfig) -> Result<FieldSample, FieldError> {
    evaluate(curve, x, cfg, Parts::Full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unknot() -> KnotCurve {
        KnotCurve::torus(1, 0, 1.0, 1.0).unwrap()
    }

    fn trefoil() -> KnotCurve {
        KnotCurve::torus(2, 3, 2.0, 1.0).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn circle_center_potential_is_two_pi() {
        let k = unknot();
        let s = potential(&k, &Vec3::zeros(), &cfg()).unwrap();
        assert!(s.converged);
        assert!((s.phi - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn circle_axis_closed_form() {
        let k = unknot();
        for z in [0.5, 1.0, 2.0, 5.0] {
            let s = potential(&k, &Vec3::new(0.0, 0.0, z), &cfg()).unwrap();
            let exact = 2.0 * PI / (1.0 + z * z).sqrt();
            assert!(
                (s.phi - exact).abs() < 1e-10 * exact,
                "z={z}: {} vs {exact}",
                s.phi
            );
        }
    }

    #[test]
    fn circle_axis_gradient_matches_derivative() {
        let k = unknot();
        for z in [0.5, 1.0, 2.0] {
            let s = gradient(&k, &Vec3::new(0.0, 0.0, z), &cfg()).unwrap();
            let g = s.grad.unwrap();
            let exact = -2.0 * PI * z * (1.0 + z * z).powf(-1.5);
            assert!((g.z - exact).abs() < 1e-9 * exact.abs());
            assert!(g.x.abs() < 1e-12 && g.y.abs() < 1e-12);
        }
    }

    #[test]
    fn circle_center_gradient_vanishes() {
        let k = unknot();
        let s = gradient(&k, &Vec3::zeros(), &cfg()).unwrap();
        assert!(s.grad.unwrap().norm() < 1e-12);
    }

    #[test]
    fn circle_center_hessian_closed_form() {
        // Along the axis phi(z) = 2*pi / sqrt(1 + z^2), so phi_zz(0) = -2*pi;
        // rotational symmetry and zero trace force diag(pi, pi, -2*pi).
        let k = unknot();
        let s = hessian(&k, &Vec3::zeros(), &cfg()).unwrap();
        let h = s.hess.unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(PI, PI, -2.0 * PI));
        assert!((h - expected).norm() < 1e-9 * expected.norm());
        assert!(h.trace().abs() <= 1e-7 * h.norm());
    }

    #[test]
    fn harmonic_and_positive_on_random_points() {
        let k = trefoil();
        let mut state = 0x2545f4914f6cdd1du64;
        let mut unit = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let region = k.search_region();
        let mut checked = 0;
        while checked < 40 {
            let p = Vec3::new(
                region.min.x + (region.max.x - region.min.x) * unit(),
                region.min.y + (region.max.y - region.min.y) * unit(),
                region.min.z + (region.max.z - region.min.z) * unit(),
            );
            if k.distance_to(&p).0 < 0.25 * k.min_self_distance() {
                continue;
            }
            let s = field_sample(&k, &p, &cfg()).unwrap();
            assert!(s.phi > 0.0);
            let h = s.hess.unwrap();
            assert!(
                h.trace().abs() <= 1e-7 * h.norm(),
                "trace {} vs norm {}",
                h.trace(),
                h.norm()
            );
            checked += 1;
        }
    }

    #[test]
    fn far_field_is_monopole() {
        for k in [unknot(), trefoil()] {
            let r = 1e4 * k.diameter();
            for dir in [Vec3::x(), Vec3::new(0.4, -0.5, 0.77)] {
                let x = dir.normalize() * r;
                let s = potential(&k, &x, &cfg()).unwrap();
                let rel = (s.phi * r - k.arc_length()).abs() / k.arc_length();
                assert!(rel < 1e-3, "rel {rel}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference_of_potential() {
        let k = trefoil();
        let h = 1e-5 * k.diameter();
        for p in [Vec3::new(0.3, 0.2, 0.4), Vec3::new(-1.0, 2.2, 0.6), Vec3::new(0.0, 0.1, 1.9)] {
            let g = gradient(&k, &p, &cfg()).unwrap().grad.unwrap();
            let mut fd = Vec3::zeros();
            for i in 0..3 {
                let mut e = Vec3::zeros();
                e[i] = h;
                let plus = potential(&k, &(p + e), &cfg()).unwrap().phi;
                let minus = potential(&k, &(p - e), &cfg()).unwrap().phi;
                fd[i] = (plus - minus) / (2.0 * h);
            }
            assert!((g - fd).norm() < 1e-5 * g.norm(), "{:?} vs {:?}", g, fd);
        }
    }

    #[test]
    fn fused_sample_matches_individual_calls() {
        let k = trefoil();
        let p = Vec3::new(0.4, -0.3, 0.8);
        let full = field_sample(&k, &p, &cfg()).unwrap();
        let phi_only = potential(&k, &p, &cfg()).unwrap();
        let grad_only = gradient(&k, &p, &cfg()).unwrap();
        assert!((full.phi - phi_only.phi).abs() <= 10.0 * cfg().tol_q * full.phi);
        assert!((full.grad.unwrap() - grad_only.grad.unwrap()).norm() <= 10.0 * cfg().tol_q * (full.grad.unwrap().norm() + 1.0));
    }

    #[test]
    fn too_close_is_rejected() {
        let k = unknot();
        let on_wire = Vec3::new(1.0 + 1e-5, 0.0, 0.0);
        assert!(matches!(
            potential(&k, &on_wire, &cfg()),
            Err(FieldError::TooCloseToKnot { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = QuadratureConfig { n0: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureConfig { n_max: 32, n0: 64, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn density_bump_stays_harmonic_and_shifts_the_field() {
        let k = trefoil();
        let bumped = QuadratureConfig {
            bump: Some(DensityBump {
                delta: 0.02,
                direction: Vec3::new(1.0, 0.0, 0.0),
                center: Vec3::zeros(),
            }),
            ..Default::default()
        };
        let p = Vec3::new(0.7, -0.4, 0.5);
        let plain = field_sample(&k, &p, &cfg()).unwrap();
        let pert = field_sample(&k, &p, &bumped).unwrap();
        assert!(pert.phi > 0.0);
        let shift = (pert.phi - plain.phi).abs() / plain.phi;
        assert!(shift > 1e-6 && shift < 0.1, "relative shift {shift}");
        let h = pert.hess.unwrap();
        assert!(h.trace().abs() <= 1e-7 * h.norm());
        // Perturbed gradient still matches finite differences of the
        // perturbed potential.
        let step = 1e-5 * k.diameter();
        let mut fd = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = step;
            fd[i] = (potential(&k, &(p + e), &bumped).unwrap().phi
                - potential(&k, &(p - e), &bumped).unwrap().phi)
                / (2.0 * step);
        }
        assert!((pert.grad.unwrap() - fd).norm() < 1e-5 * fd.norm());
    }
}
