//! Parametrized knots and their geometry.
//!
//! A [`KnotCurve`] is a smooth closed curve `r(t)`, `t in [0, 2*pi]`, given
//! by an exact torus-knot formula, a finite Fourier series, or a closed
//! periodic cubic spline through sample points. Construction validates
//! closure, regularity (`|r'| > 0`) and embeddedness (positive minimum
//! self-distance), and caches the geometric quantities every other module
//! consumes: arc length, self-distance, bounding box, dense samples.

use crate::quadrature::{level_for, NodeCache, NodeLevel};
use crate::Vec3;
use std::f64::consts::TAU;
use std::sync::Arc;
use thiserror::Error;

/// Dense sample count for geometry caches and distance queries.
const DENSE_SAMPLES: usize = 2048;
/// Angular separation below which parameter pairs are "trivially near"
/// neighbors along the curve and excluded from self-distance.
const THETA_CUT: f64 = 0.5;
/// Bounding-box padding as a fraction of the diameter.
const EPS_BOX_FACTOR: f64 = 1e-6;
/// Polygonalization density for crossing counting.
const CROSSING_SEGMENTS: usize = 2048;
/// Relative arc-length quadrature tolerance.
const ARC_LENGTH_TOL: f64 = 1e-12;
/// Embeddedness floor: self-distances below this fraction of the diameter
/// flag the curve as (numerically) self-intersecting.
const EMBED_FLOOR_FACTOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum KnotError {
    #[error("torus parameters p={p}, q={q} have gcd {gcd}: this is a link, not a knot")]
    NotCoprime { p: i64, q: i64, gcd: i64 },
    #[error("torus radii R={major}, r={minor} invalid: need R > r > 0")]
    InvalidRadii { major: f64, minor: f64 },
    #[error("invalid curve parameters: {0}")]
    InvalidParams(String),
    #[error("curve is not regular: min |r'(t)| = {min_speed:.3e}")]
    NotRegular { min_speed: f64 },
    #[error("curve is numerically self-intersecting: min self-distance = {min_self_distance:.3e}")]
    SelfIntersecting { min_self_distance: f64 },
    #[error("projection direction stayed degenerate after {attempts} jittered retries")]
    DegenerateProjection { attempts: usize },
}

/// Closed periodic cubic spline with uniform parameter spacing.
///
/// C2 continuity keeps the Hessian of the induced potential well defined.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    points: Vec<Vec3>,
    second: Vec<Vec3>,
    h: f64,
}

impl PeriodicSpline {
    fn new(points: Vec<Vec3>) -> Self {
        let m = points.len();
        let h = TAU / m as f64;
        // Cyclic tridiagonal system (1, 4, 1) M = 6 * d2 / h^2, solved by
        // the Thomas algorithm plus a Sherman-Morrison correction.
        let rhs: Vec<Vec3> = (0..m)
            .map(|k| {
                let prev = points[(k + m - 1) % m];
                let next = points[(k + 1) % m];
                (prev - 2.0 * points[k] + next) * (6.0 / (h * h))
            })
            .collect();
        let second = solve_cyclic_141(&rhs);
        PeriodicSpline { points, second, h }
    }

    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let m = self.points.len();
        let mut u = (t / self.h).rem_euclid(m as f64);
        if u >= m as f64 {
            u = 0.0;
        }
        let k = u.floor() as usize % m;
        (k, (k + 1) % m, u - (u.floor()))
    }

    fn position(&self, t: f64) -> Vec3 {
        let (k, k1, tau) = self.locate(t);
        let a = 1.0 - tau;
        self.points[k] * a
            + self.points[k1] * tau
            + (self.second[k] * (a * a * a - a) + self.second[k1] * (tau * tau * tau - tau))
                * (self.h * self.h / 6.0)
    }

    fn velocity(&self, t: f64) -> Vec3 {
        let (k, k1, tau) = self.locate(t);
        let a = 1.0 - tau;
        (self.points[k1] - self.points[k]) / self.h
            + (self.second[k] * (1.0 - 3.0 * a * a) + self.second[k1] * (3.0 * tau * tau - 1.0))
                * (self.h / 6.0)
    }

    fn acceleration(&self, t: f64) -> Vec3 {
        let (k, k1, tau) = self.locate(t);
        self.second[k] * (1.0 - tau) + self.second[k1] * tau
    }
}

/// Solve the cyclic tridiagonal system with stencil (1, 4, 1).
fn solve_cyclic_141(rhs: &[Vec3]) -> Vec<Vec3> {
    let m = rhs.len();
    assert!(m >= 3);
    // Sherman-Morrison: A = T + gamma * u v^T with u = v = e0 + e_{m-1}
    // after adjusting the corner entries of T.
    let gamma = 1.0;
    let mut diag = vec![4.0; m];
    diag[0] -= gamma;
    diag[m - 1] -= 1.0 / gamma;

    let solve_tri = |b: &[Vec3], diag: &[f64]| -> Vec<Vec3> {
        let mut c = vec![0.0; m];
        let mut x = b.to_vec();
        c[0] = 1.0 / diag[0];
        x[0] /= diag[0];
        for i in 1..m {
            let denom = diag[i] - c[i - 1];
            c[i] = 1.0 / denom;
            x[i] = (x[i] - x[i - 1]) / denom;
        }
        for i in (0..m - 1).rev() {
            let next = x[i + 1];
            x[i] -= next * c[i];
        }
        x
    };

    let y = solve_tri(rhs, &diag);
    let mut u = vec![Vec3::zeros(); m];
    u[0] = Vec3::new(gamma, gamma, gamma);
    u[m - 1] = Vec3::new(1.0, 1.0, 1.0);
    let u_scalar: Vec<Vec3> = u;
    let z = solve_tri(&u_scalar, &diag);

    // v^T y and v^T z, componentwise (the system is solved per component).
    let vy = y[0] + y[m - 1];
    let vz = z[0] + z[m - 1];
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let factor = Vec3::new(
            vy.x * z[i].x / (1.0 + vz.x),
            vy.y * z[i].y / (1.0 + vz.y),
            vy.z * z[i].z / (1.0 + vz.z),
        );
        out.push(y[i] - factor);
    }
    out
}

/// The analytic kinds a knot curve can take.
#[derive(Debug, Clone)]
pub enum KnotKind {
    /// `r(t) = ((R + r cos(qt)) cos(pt), (R + r cos(qt)) sin(pt), r sin(qt))`.
    /// `q = 0` degenerates to the round circle of radius `R` in the xy-plane.
    Torus { p: i64, q: i64, major: f64, minor: f64 },
    /// Finite Fourier series; `harmonics[k] = [ax, bx, ay, by, az, bz]` are
    /// the cosine/sine coefficients of harmonic `k + 1` per component.
    Fourier { harmonics: Vec<[f64; 6]> },
    /// Closed periodic cubic spline through control points.
    Sampled { spline: PeriodicSpline },
}

impl KnotKind {
    /// Position and exact analytic velocity at parameter `t`.
    pub fn eval(&self, t: f64) -> (Vec3, Vec3) {
        match self {
            KnotKind::Torus { p, q, major, minor } => {
                let (p, q) = (*p as f64, *q as f64);
                if q == 0.0 {
                    let (s, c) = (p * t).sin_cos();
                    return (
                        Vec3::new(major * c, major * s, 0.0),
                        Vec3::new(-major * p * s, major * p * c, 0.0),
                    );
                }
                let (sq, cq) = (q * t).sin_cos();
                let (sp, cp) = (p * t).sin_cos();
                let w = major + minor * cq;
                let pos = Vec3::new(w * cp, w * sp, minor * sq);
                let dw = -q * minor * sq;
                let vel = Vec3::new(dw * cp - p * w * sp, dw * sp + p * w * cp, q * minor * cq);
                (pos, vel)
            }
            KnotKind::Fourier { harmonics } => {
                let mut pos = Vec3::zeros();
                let mut vel = Vec3::zeros();
                for (k, h) in harmonics.iter().enumerate() {
                    let n = (k + 1) as f64;
                    let (s, c) = (n * t).sin_cos();
                    let a = Vec3::new(h[0], h[2], h[4]);
                    let b = Vec3::new(h[1], h[3], h[5]);
                    pos += a * c + b * s;
                    vel += (b * c - a * s) * n;
                }
                (pos, vel)
            }
            KnotKind::Sampled { spline } => (spline.position(t), spline.velocity(t)),
        }
    }

    /// Second parameter derivative, used by the self-distance chord solver.
    pub fn acceleration(&self, t: f64) -> Vec3 {
        match self {
            KnotKind::Torus { p, q, major, minor } => {
                let (p, q) = (*p as f64, *q as f64);
                if q == 0.0 {
                    let (s, c) = (p * t).sin_cos();
                    return Vec3::new(-major * p * p * c, -major * p * p * s, 0.0);
                }
                let (sq, cq) = (q * t).sin_cos();
                let (sp, cp) = (p * t).sin_cos();
                let w = major + minor * cq;
                Vec3::new(
                    -q * q * minor * cq * cp + 2.0 * p * q * minor * sq * sp - p * p * w * cp,
                    -q * q * minor * cq * sp - 2.0 * p * q * minor * sq * cp - p * p * w * sp,
                    -q * q * minor * sq,
                )
            }
            KnotKind::Fourier { harmonics } => {
                let mut acc = Vec3::zeros();
                for (k, h) in harmonics.iter().enumerate() {
                    let n = (k + 1) as f64;
                    let (s, c) = (n * t).sin_cos();
                    let a = Vec3::new(h[0], h[2], h[4]);
                    let b = Vec3::new(h[1], h[3], h[5]);
                    acc -= (a * c + b * s) * (n * n);
                }
                acc
            }
            KnotKind::Sampled { spline } => spline.acceleration(t),
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn pad(&self, eps: f64) -> Aabb {
        let e = Vec3::new(eps, eps, eps);
        Aabb { min: self.min - e, max: self.max + e }
    }
}

/// Tubular neighborhood radius around the knot.
///
/// Field evaluation refuses points deep inside it and gradient-flow arcs
/// terminate on its boundary.
#[derive(Debug, Clone, Copy)]
pub struct TubeSpec {
    pub rho: f64,
}

impl TubeSpec {
    /// Default radius 0.25 * d_min, clamped under the local reach estimate
    /// (minimum radius of curvature) when that is smaller.
    pub fn for_curve(curve: &KnotCurve) -> TubeSpec {
        let rho = (0.25 * curve.min_self_distance()).min(0.9 * curve.reach_estimate());
        TubeSpec { rho }
    }

    pub fn with_radius(curve: &KnotCurve, rho: f64) -> Result<TubeSpec, KnotError> {
        let d = curve.min_self_distance();
        let reach = curve.reach_estimate();
        if rho <= 0.0 || rho >= d / 2.0 || rho >= reach {
            return Err(KnotError::InvalidParams(format!(
                "tube radius {rho} outside (0, min(d_min/2, reach)) = (0, {})",
                (d / 2.0).min(reach)
            )));
        }
        Ok(TubeSpec { rho })
    }
}

struct CurveGeometry {
    dense_pos: Vec<Vec3>,
    max_speed: f64,
    min_speed: f64,
    arc_length: f64,
    min_self_distance: f64,
    min_curvature_radius: f64,
    embedded: bool,
    bbox: Aabb,
    diameter: f64,
}

/// A smooth closed embedded curve carrying unit line charge.
///
/// Immutable after construction; all operations are pure functions of the
/// curve and safe to call from many threads.
pub struct KnotCurve {
    kind: KnotKind,
    label: String,
    geom: CurveGeometry,
    nodes: NodeCache,
}

impl std::fmt::Debug for KnotCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnotCurve")
            .field("label", &self.label)
            .field("arc_length", &self.geom.arc_length)
            .field("min_self_distance", &self.geom.min_self_distance)
            .finish()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl KnotCurve {
    /// Torus knot `(p, q)` on the torus with radii `R > r > 0`.
    ///
    /// `(1, 0)` is accepted as the round unknot of radius `R` (the minor
    /// radius is ignored in that case). Rejects `gcd(p, q) > 1` (a link,
    /// not a knot) and `R <= r` (self-intersection risk).
    pub fn torus(p: i64, q: i64, major: f64, minor: f64) -> Result<Self, KnotError> {
        Self::torus_impl(p, q, major, minor, true)
    }

    /// Same as [`KnotCurve::torus`] but skips the embeddedness and radii
    /// rejections; the geometry flags are still computed. Intended for
    /// tests that need deliberately bad curves.
    pub fn torus_unchecked(p: i64, q: i64, major: f64, minor: f64) -> Result<Self, KnotError> {
        Self::torus_impl(p, q, major, minor, false)
    }

    fn torus_impl(p: i64, q: i64, major: f64, minor: f64, check: bool) -> Result<Self, KnotError> {
        if p < 1 || q < 0 {
            return Err(KnotError::InvalidParams(format!(
                "need p >= 1 and q >= 0, got ({p}, {q})"
            )));
        }
        let g = gcd(p, q);
        if g != 1 {
            return Err(KnotError::NotCoprime { p, q, gcd: g });
        }
        if check && q > 0 && (major <= 0.0 || minor <= 0.0 || major <= minor) {
            return Err(KnotError::InvalidRadii { major, minor });
        }
        if q == 0 && major <= 0.0 {
            return Err(KnotError::InvalidRadii { major, minor });
        }
        let label = if q == 0 { "unknot".to_string() } else { format!("torus({p},{q})") };
        Self::finalize(KnotKind::Torus { p, q, major, minor }, label, check)
    }

    /// Curve from a finite Fourier series (see [`KnotKind::Fourier`]).
    pub fn fourier(harmonics: Vec<[f64; 6]>) -> Result<Self, KnotError> {
        if harmonics.is_empty() {
            return Err(KnotError::InvalidParams("empty harmonic list".into()));
        }
        if harmonics.iter().flatten().any(|c| !c.is_finite()) {
            return Err(KnotError::InvalidParams("non-finite Fourier coefficient".into()));
        }
        let label = format!("fourier({})", harmonics.len());
        Self::finalize(KnotKind::Fourier { harmonics }, label, true)
    }

    /// Closed periodic cubic spline through the given points.
    pub fn from_samples(points: Vec<[f64; 3]>) -> Result<Self, KnotError> {
        if points.len() < 4 {
            return Err(KnotError::InvalidParams(format!(
                "need at least 4 sample points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(KnotError::InvalidParams("non-finite sample point".into()));
        }
        let label = format!("samples({})", points.len());
        let pts: Vec<Vec3> = points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        let spline = PeriodicSpline::new(pts);
        Self::finalize(KnotKind::Sampled { spline }, label, true)
    }

    fn finalize(kind: KnotKind, label: String, check: bool) -> Result<Self, KnotError> {
        let n = DENSE_SAMPLES;
        let mut dense_pos = Vec::with_capacity(n);
        let mut dense_speed = Vec::with_capacity(n);
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let (p, v) = kind.eval(t);
            dense_pos.push(p);
            dense_speed.push(v.norm());
        }
        let min_speed = dense_speed.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_speed = dense_speed.iter().cloned().fold(0.0, f64::max);

        let mut bbox = Aabb { min: dense_pos[0], max: dense_pos[0] };
        for p in &dense_pos {
            for i in 0..3 {
                bbox.min[i] = bbox.min[i].min(p[i]);
                bbox.max[i] = bbox.max[i].max(p[i]);
            }
        }
        let diameter = bbox.diagonal();

        let rough_length: f64 = dense_speed.iter().sum::<f64>() * TAU / n as f64;
        if check && !(min_speed > 1e-9 * rough_length / TAU) {
            return Err(KnotError::NotRegular { min_speed });
        }

        // Minimum radius of curvature: |r'|^3 / |r' x r''| over the grid.
        let mut min_curvature_radius = f64::INFINITY;
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let (_, v) = kind.eval(t);
            let a = kind.acceleration(t);
            let cross = v.cross(&a).norm();
            if cross > 1e-300 {
                min_curvature_radius = min_curvature_radius.min(v.norm().powi(3) / cross);
            }
        }

        let (min_self_distance, _chords_found) = min_self_distance_impl(&kind, diameter, rough_length);
        let embedded = min_self_distance > EMBED_FLOOR_FACTOR * diameter;
        if check && !embedded {
            return Err(KnotError::SelfIntersecting { min_self_distance });
        }

        let mut curve = KnotCurve {
            kind,
            label,
            geom: CurveGeometry {
                dense_pos,
                max_speed,
                min_speed,
                arc_length: rough_length,
                min_self_distance,
                min_curvature_radius,
                embedded,
                bbox,
                diameter,
            },
            nodes: NodeCache::new(),
        };
        curve.geom.arc_length = curve.arc_length_adaptive();
        Ok(curve)
    }

    pub fn kind(&self) -> &KnotKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Position and velocity at parameter `t` (any real, reduced mod 2*pi).
    pub fn eval_curve(&self, t: f64) -> (Vec3, Vec3) {
        self.kind.eval(t)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.kind.eval(t).0
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        self.kind.eval(t).1
    }

    /// Total arc length, from the adaptive periodic trapezoid rule.
    pub fn arc_length(&self) -> f64 {
        self.geom.arc_length
    }

    /// Minimum distance between points of the curve whose parameter
    /// separation exceeds the near-neighbor cutoff; realized on chords
    /// perpendicular to the curve at both ends.
    pub fn min_self_distance(&self) -> f64 {
        self.geom.min_self_distance
    }

    /// False when construction (or an unchecked constructor) detected a
    /// numerically vanishing self-distance.
    pub fn is_embedded(&self) -> bool {
        self.geom.embedded
    }

    /// Local reach estimate: the minimum radius of curvature. A tube of
    /// smaller radius cannot self-overlap around bends.
    pub fn reach_estimate(&self) -> f64 {
        self.geom.min_curvature_radius
    }

    pub fn min_speed(&self) -> f64 {
        self.geom.min_speed
    }

    pub fn max_speed(&self) -> f64 {
        self.geom.max_speed
    }

    /// Bounding-box diagonal; the length scale for tolerances.
    pub fn diameter(&self) -> f64 {
        self.geom.diameter
    }

    pub fn bounding_box(&self) -> Aabb {
        self.geom.bbox
    }

    /// Axis-aligned search region guaranteed to contain every finite
    /// critical point of the potential: outside the convex hull of a
    /// positive charge distribution a separating plane gives the field a
    /// strictly positive outward component, so no zero lies there. Padded
    /// slightly for numerical safety.
    pub fn search_region(&self) -> Aabb {
        self.geom.bbox.pad(EPS_BOX_FACTOR * self.geom.diameter)
    }

    pub(crate) fn node_level(&self, level: usize) -> Arc<NodeLevel> {
        self.nodes.level(&self.kind, level)
    }

    fn arc_length_adaptive(&self) -> f64 {
        let mut level = level_for(64);
        let nodes = self.node_level(level);
        let mut sum: f64 = nodes.speed.iter().sum::<f64>() * nodes.weight();
        loop {
            level += 1;
            let nodes = self.node_level(level);
            let odd: f64 = nodes.speed.iter().skip(1).step_by(2).sum();
            let next = sum / 2.0 + odd * nodes.weight();
            let err = (next - sum).abs();
            sum = next;
            if err <= ARC_LENGTH_TOL * sum.abs() || nodes.n >= (1 << 22) {
                return sum;
            }
        }
    }

    /// Distance from `x` to the curve and the parameter of the nearest point.
    pub fn distance_to(&self, x: &Vec3) -> (f64, f64) {
        let n = self.geom.dense_pos.len();
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, p) in self.geom.dense_pos.iter().enumerate() {
            let d2 = (x - p).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let h = TAU / n as f64;
        let t0 = best as f64 * h;
        let (d2, t) = golden_min(
            |t| (x - self.position(t)).norm_squared(),
            t0 - h,
            t0 + h,
            1e-12 * h,
        );
        (d2.sqrt().min(best_d2.sqrt()), t)
    }

    /// Cheap conservative test that `x` is farther than `floor` from the
    /// curve. Falls back to the refined distance only near the boundary.
    pub fn distance_above(&self, x: &Vec3, floor: f64) -> bool {
        let margin = self.geom.max_speed * std::f64::consts::PI / self.geom.dense_pos.len() as f64;
        let mut best_d2 = f64::INFINITY;
        for p in &self.geom.dense_pos {
            let d2 = (x - p).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
            }
        }
        let lower = best_d2.sqrt() - margin;
        if lower > floor {
            return true;
        }
        self.distance_to(x).0 > floor
    }

    /// Transverse self-intersection count of the planar projection of the
    /// curve along `direction`; an upper bound on the crossing number for
    /// this diagram. Degenerate projections (tangencies, vertex grazes,
    /// triple points) are retried with deterministically jittered
    /// directions and doubled polygon density.
    pub fn crossing_upper_bound(&self, direction: &Vec3) -> Result<usize, KnotError> {
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(KnotError::InvalidParams("zero projection direction".into()));
        }
        let base = direction / norm;
        const MAX_ATTEMPTS: usize = 8;
        for attempt in 0..MAX_ATTEMPTS {
            let dir = jitter_direction(&base, attempt);
            let segments = CROSSING_SEGMENTS << (attempt.min(2));
            if let Some(count) = self.count_crossings(&dir, segments) {
                return Ok(count);
            }
        }
        Err(KnotError::DegenerateProjection { attempts: MAX_ATTEMPTS })
    }

    fn count_crossings(&self, dir: &Vec3, segments: usize) -> Option<usize> {
        let u = any_orthonormal(dir);
        let v = dir.cross(&u);
        let pts: Vec<[f64; 2]> = (0..segments)
            .map(|i| {
                let p = self.position(TAU * i as f64 / segments as f64);
                [u.dot(&p), v.dot(&p)]
            })
            .collect();
        let scale = self.geom.diameter;
        // Tangency of the projected curve: a projected segment much shorter
        // than expected means the direction is nearly tangent there.
        let min_len = 1e-4 * scale / segments as f64;
        for i in 0..segments {
            let j = (i + 1) % segments;
            let dx = pts[j][0] - pts[i][0];
            let dy = pts[j][1] - pts[i][1];
            if (dx * dx + dy * dy).sqrt() < min_len {
                return None;
            }
        }

        let eps_param = 1e-7;
        let mut hits: Vec<[f64; 2]> = Vec::new();
        for i in 0..segments {
            let i1 = (i + 1) % segments;
            for j in (i + 2)..segments {
                if i == 0 && j == segments - 1 {
                    continue; // wrap-adjacent
                }
                let j1 = (j + 1) % segments;
                let (a, b, c, d) = (pts[i], pts[i1], pts[j], pts[j1]);
                let r = [b[0] - a[0], b[1] - a[1]];
                let s = [d[0] - c[0], d[1] - c[1]];
                let denom = r[0] * s[1] - r[1] * s[0];
                let qp = [c[0] - a[0], c[1] - a[1]];
                let num_t = qp[0] * s[1] - qp[1] * s[0];
                let num_u = qp[0] * r[1] - qp[1] * r[0];
                if denom.abs() < 1e-14 * scale * scale {
                    // Parallel. Overlapping collinear segments are degenerate.
                    let cross_qp = qp[0] * r[1] - qp[1] * r[0];
                    if cross_qp.abs() < 1e-12 * scale * scale {
                        return None;
                    }
                    continue;
                }
                let t = num_t / denom;
                let w = num_u / denom;
                let in_open = |x: f64| x > eps_param && x < 1.0 - eps_param;
                let near_end = |x: f64| (x > -eps_param && x < eps_param)
                    || (x > 1.0 - eps_param && x < 1.0 + eps_param);
                if in_open(t) && in_open(w) {
                    hits.push([a[0] + t * r[0], a[1] + t * r[1]]);
                } else if (near_end(t) && w > -eps_param && w < 1.0 + eps_param)
                    || (near_end(w) && t > -eps_param && t < 1.0 + eps_param)
                {
                    return None; // vertex graze: jitter and retry
                }
            }
        }
        // Triple-point proxy: two intersection points nearly coincide.
        let tol2 = (1e-7 * scale).powi(2);
        for i in 0..hits.len() {
            for j in (i + 1)..hits.len() {
                let dx = hits[i][0] - hits[j][0];
                let dy = hits[i][1] - hits[j][1];
                if dx * dx + dy * dy < tol2 {
                    return None;
                }
            }
        }
        Some(hits.len())
    }
}

fn any_orthonormal(v: &Vec3) -> Vec3 {
    let trial = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&trial).normalize()
}

fn jitter_direction(base: &Vec3, attempt: usize) -> Vec3 {
    if attempt == 0 {
        return *base;
    }
    let u = any_orthonormal(base);
    let v = base.cross(&u);
    // Fixed quasi-random angles; deterministic across runs.
    let phi = 2.399963229728653 * attempt as f64; // golden angle
    let mag = 1e-3 * attempt as f64;
    (base + (u * phi.cos() + v * phi.sin()) * mag).normalize()
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.6180339887498949;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (f(t), t)
}

fn angular_separation(s: f64, t: f64) -> f64 {
    let d = (s - t).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Minimum length over chords perpendicular to the curve at both endpoints
/// (critical chords of the pairwise distance), excluding near-neighbor
/// parameter pairs. For the round circle this is the diameter, realized by
/// the antipodal chords.
fn min_self_distance_impl(kind: &KnotKind, diameter: f64, rough_length: f64) -> (f64, bool) {
    min_self_distance_seeded(kind, diameter, rough_length, 64)
}

pub(crate) fn min_self_distance_seeded(
    kind: &KnotKind,
    diameter: f64,
    rough_length: f64,
    seed_grid: usize,
) -> (f64, bool) {
    let speed_scale = rough_length / TAU;
    let g_scale = 1e-11;

    let chord_system = |s: f64, t: f64| -> ([f64; 2], [[f64; 2]; 2]) {
        let (ps, vs) = kind.eval(s);
        let (pt, vt) = kind.eval(t);
        let acc_s = kind.acceleration(s);
        let acc_t = kind.acceleration(t);
        let c = ps - pt;
        let g = [c.dot(&vs), c.dot(&vt)];
        let j = [
            [vs.dot(&vs) + c.dot(&acc_s), -vt.dot(&vs)],
            [vs.dot(&vt), -vt.dot(&vt) + c.dot(&acc_t)],
        ];
        (g, j)
    };

    let mut best = f64::INFINITY;
    let mut found = false;
    for i in 0..seed_grid {
        for j in (i + 1)..seed_grid {
            let mut s = TAU * i as f64 / seed_grid as f64;
            let mut t = TAU * j as f64 / seed_grid as f64;
            if angular_separation(s, t) <= THETA_CUT {
                continue;
            }
            // Damped Gauss-Newton on the perpendicularity system. A chord
            // collapsing toward zero length is a self-intersection witness
            // and counts as converged outright.
            let mut lambda = 1e-3;
            let mut converged = false;
            let (mut g, mut jac) = chord_system(s, t);
            for _ in 0..60 {
                let chord = (kind.eval(s).0 - kind.eval(t).0).norm();
                if chord < 1e-7 * diameter {
                    converged = true;
                    break;
                }
                let scale = (chord + 1e-6 * diameter) * speed_scale;
                if g[0].abs() < g_scale * scale && g[1].abs() < g_scale * scale {
                    converged = true;
                    break;
                }
                // Solve (J^T J + lambda diag) delta = -J^T g.
                let jtj = [
                    [
                        jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0],
                        jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1],
                    ],
                    [
                        jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1],
                        jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1],
                    ],
                ];
                let jtg = [
                    jac[0][0] * g[0] + jac[1][0] * g[1],
                    jac[0][1] * g[0] + jac[1][1] * g[1],
                ];
                let a00 = jtj[0][0] * (1.0 + lambda);
                let a11 = jtj[1][1] * (1.0 + lambda);
                let a01 = jtj[0][1];
                let det = a00 * a11 - a01 * a01;
                if det.abs() < 1e-300 {
                    break;
                }
                let ds = (-jtg[0] * a11 + jtg[1] * a01) / det;
                let dt = (jtg[0] * a01 - jtg[1] * a00) / det;
                let (ns, nt) = (s + ds, t + dt);
                let (ng, njac) = chord_system(ns, nt);
                if ng[0] * ng[0] + ng[1] * ng[1] <= g[0] * g[0] + g[1] * g[1] {
                    s = ns;
                    t = nt;
                    g = ng;
                    jac = njac;
                    lambda = (lambda * 0.3).max(1e-12);
                    if ds.abs() + dt.abs() < 1e-14 {
                        let chord = (kind.eval(s).0 - kind.eval(t).0).norm();
                        let scale = (chord + 1e-6 * diameter) * speed_scale;
                        converged = chord < 1e-7 * diameter
                            || (g[0].abs() < g_scale * scale && g[1].abs() < g_scale * scale);
                        break;
                    }
                } else {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        break;
                    }
                }
            }
            if converged && angular_separation(s, t) > THETA_CUT {
                let d = (kind.eval(s).0 - kind.eval(t).0).norm();
                if d < best {
                    best = d;
                    found = true;
                }
            }
        }
    }
    if !found {
        // No perpendicular chord converged (should not happen for closed
        // curves); fall back to the raw dense-pair minimum.
        let n = 512;
        let pts: Vec<Vec3> = (0..n).map(|i| kind.eval(TAU * i as f64 / n as f64).0).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let si = TAU * i as f64 / n as f64;
                let sj = TAU * j as f64 / n as f64;
                if angular_separation(si, sj) > THETA_CUT {
                    best = best.min((pts[i] - pts[j]).norm());
                }
            }
        }
    }
    (best, found)
}
