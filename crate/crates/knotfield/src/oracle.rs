//! Slow independent reference implementations used to validate the main
//! pipeline.
//!
//! Nothing here shares quadrature or search code with [`crate::field`] or
//! [`crate::critical`]; only the curve type is common. Everything is plain
//! fixed-node summation and finite differences, single-threaded on purpose.

use crate::knot::KnotCurve;
use crate::Vec3;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Fixed node count for reference quadrature (potential / FD checks).
    pub ref_nodes: usize,
    /// Cheaper fixed node count for dense grid scans.
    pub scan_nodes: usize,
    /// Central-difference step for gradients, as a fraction of the diameter.
    pub grad_step_factor: f64,
    /// Central-difference step for Hessians, as a fraction of the diameter.
    pub hess_step_factor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            ref_nodes: 100_000,
            scan_nodes: 1024,
            grad_step_factor: 1e-5,
            hess_step_factor: 1e-4,
        }
    }
}

/// Closed-form potential of the unit circle on its axis: `2*pi / sqrt(1 + z^2)`.
pub fn circle_axis_potential(z: f64) -> f64 {
    TAU / (1.0 + z * z).sqrt()
}

/// Fixed-node trapezoid sum of the potential integrand. Neumaier
/// summation keeps rounding noise at the epsilon level even at 10^5
/// nodes, which matters when callers take second differences.
pub fn reference_potential(curve: &KnotCurve, x: &Vec3, nodes: usize) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..nodes {
        let t = TAU * i as f64 / nodes as f64;
        let (p, v) = curve.eval_curve(t);
        let term = v.norm() / (x - p).norm();
        let fresh = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - fresh) + term;
        } else {
            comp += (term - fresh) + sum;
        }
        sum = fresh;
    }
    (sum + comp) * TAU / nodes as f64
}

/// Fixed-node trapezoid sum of the gradient integrand.
pub fn reference_gradient(curve: &KnotCurve, x: &Vec3, nodes: usize) -> Vec3 {
    let mut sum = Vec3::zeros();
    for i in 0..nodes {
        let t = TAU * i as f64 / nodes as f64;
        let (p, v) = curve.eval_curve(t);
        let d = x - p;
        let r2 = d.norm_squared();
        sum -= d * (v.norm() / (r2 * r2.sqrt()));
    }
    sum * (TAU / nodes as f64)
}

/// Central-difference gradient of the reference potential.
pub fn fd_gradient(curve: &KnotCurve, x: &Vec3, cfg: &OracleConfig) -> Vec3 {
    let h = cfg.grad_step_factor * curve.diameter();
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        let plus = reference_potential(curve, &(x + e), cfg.ref_nodes);
        let minus = reference_potential(curve, &(x - e), cfg.ref_nodes);
        g[i] = (plus - minus) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian of the reference potential.
pub fn fd_hessian(curve: &KnotCurve, x: &Vec3, cfg: &OracleConfig) -> nalgebra::Matrix3<f64> {
    let h = cfg.hess_step_factor * curve.diameter();
    let f0 = reference_potential(curve, x, cfg.ref_nodes);
    let mut m = nalgebra::Matrix3::zeros();
    let unit = |i: usize| {
        let mut e = Vec3::zeros();
        e[i] = h;
        e
    };
    for i in 0..3 {
        let e = unit(i);
        let fp = reference_potential(curve, &(x + e), cfg.ref_nodes);
        let fm = reference_potential(curve, &(x - e), cfg.ref_nodes);
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let (ei, ej) = (unit(i), unit(j));
            let fpp = reference_potential(curve, &(x + ei + ej), cfg.ref_nodes);
            let fpm = reference_potential(curve, &(x + ei - ej), cfg.ref_nodes);
            let fmp = reference_potential(curve, &(x - ei + ej), cfg.ref_nodes);
            let fmm = reference_potential(curve, &(x - ei - ej), cfg.ref_nodes);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// A connected block of grid cells whose gradient magnitude is a local
/// minimum; candidate critical-point basin.
#[derive(Debug, Clone)]
pub struct Basin {
    /// Cell center with the smallest gradient norm in the block.
    pub center: Vec3,
    pub grad_norm: f64,
    pub cells: usize,
}

impl Basin {
    /// True when `x` lies within `radius` of the basin's best cell.
    pub fn contains_within(&self, x: &Vec3, radius: f64) -> bool {
        (x - self.center).norm() <= radius
    }
}

/// Dense-grid local minima of `|grad phi|` over the search region, off the
/// tube. Axes thinner than 1e-3 of the diameter collapse to a single layer
/// (planar curves produce a flat search region). Cells tied to machine
/// precision merge into one basin.
pub fn brute_scan(curve: &KnotCurve, n: usize, tube_radius: f64, cfg: &OracleConfig) -> Vec<Basin> {
    if n < 3 {
        return Vec::new();
    }
    let region = curve.search_region();
    let extent = region.max - region.min;
    let thin = 1e-3 * curve.diameter();
    let dims = [
        if extent.x < thin { 1 } else { n },
        if extent.y < thin { 1 } else { n },
        if extent.z < thin { 1 } else { n },
    ];
    let center = |i: usize, axis: usize| -> f64 {
        let lo = region.min[axis];
        let w = extent[axis] / dims[axis] as f64;
        lo + (i as f64 + 0.5) * w
    };

    let total = dims[0] * dims[1] * dims[2];
    let mut values = vec![f64::INFINITY; total];
    let idx = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let p = Vec3::new(center(i, 0), center(j, 1), center(k, 2));
                if curve.distance_to(&p).0 <= tube_radius {
                    continue;
                }
                values[idx(i, j, k)] = reference_gradient(curve, &p, cfg.scan_nodes).norm();
            }
        }
    }

    // Local minima with a tolerance for exact symmetric ties, then merge
    // adjacent minima into connected basins. Cells on the grid boundary of
    // a non-degenerate axis are skipped: their neighborhood is one-sided,
    // and |grad phi| decays outward, which would fake corner minima.
    let interior = |i: usize, axis: usize| dims[axis] == 1 || (i > 0 && i + 1 < dims[axis]);
    let mut is_min = vec![false; total];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                if !(interior(i, 0) && interior(j, 1) && interior(k, 2)) {
                    continue;
                }
                let v = values[idx(i, j, k)];
                if !v.is_finite() {
                    continue;
                }
                let tie = 1e-12 * v.max(1e-300);
                let mut ok = true;
                'nb: for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for dk in -1i64..=1 {
                            if di == 0 && dj == 0 && dk == 0 {
                                continue;
                            }
                            let (ni, nj, nk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                            if ni < 0 || nj < 0 || nk < 0
                                || ni >= dims[0] as i64 || nj >= dims[1] as i64 || nk >= dims[2] as i64
                            {
                                continue;
                            }
                            let w = values[idx(ni as usize, nj as usize, nk as usize)];
                            if w < v - tie {
                                ok = false;
                                break 'nb;
                            }
                        }
                    }
                }
                is_min[idx(i, j, k)] = ok;
            }
        }
    }

    // Flood-fill adjacent minima.
    let mut seen = vec![false; total];
    let mut basins = Vec::new();
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let start = idx(i, j, k);
                if !is_min[start] || seen[start] {
                    continue;
                }
                let mut stack = vec![(i, j, k)];
                seen[start] = true;
                let mut best = (values[start], Vec3::new(center(i, 0), center(j, 1), center(k, 2)));
                let mut cells = 0usize;
                while let Some((ci, cj, ck)) = stack.pop() {
                    cells += 1;
                    let v = values[idx(ci, cj, ck)];
                    let p = Vec3::new(center(ci, 0), center(cj, 1), center(ck, 2));
                    if v < best.0 {
                        best = (v, p);
                    }
                    for di in -1i64..=1 {
                        for dj in -1i64..=1 {
                            for dk in -1i64..=1 {
                                let (ni, nj, nk) = (ci as i64 + di, cj as i64 + dj, ck as i64 + dk);
                                if ni < 0 || nj < 0 || nk < 0
                                    || ni >= dims[0] as i64 || nj >= dims[1] as i64 || nk >= dims[2] as i64
                                {
                                    continue;
                                }
                                let nidx = idx(ni as usize, nj as usize, nk as usize);
                                if is_min[nidx] && !seen[nidx] {
                                    seen[nidx] = true;
                                    stack.push((ni as usize, nj as usize, nk as usize));
                                }
                            }
                        }
                    }
                }
                basins.push(Basin { center: best.1, grad_norm: best.0, cells });
            }
        }
    }
    basins.sort_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm));
    basins
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unknot() -> KnotCurve {
        KnotCurve::torus(1, 0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn circle_axis_values() {
        assert!((circle_axis_potential(0.0) - 2.0 * PI).abs() < 1e-15);
        assert!((circle_axis_potential(1.0) - 2.0 * PI / 2f64.sqrt()).abs() < 1e-15);
        assert!(circle_axis_potential(1e9) < 1e-8); // decays to  phi(inf) = 0
    }

    #[test]
    fn reference_matches_circle_closed_form() {
        let k = unknot();
        for z in [0.0, 0.5, 2.0] {
            let phi = reference_potential(&k, &Vec3::new(0.0, 0.0, z), 100_000);
            assert!((phi - circle_axis_potential(z)).abs() < 1e-12 * phi);
        }
    }

    #[test]
    fn fd_gradient_vanishes_at_circle_center() {
        let k = unknot();
        let g = fd_gradient(&k, &Vec3::zeros(), &OracleConfig::default());
        assert!(g.norm() < 1e-7, "|g| = {}", g.norm());
    }

    #[test]
    fn fd_hessian_is_nearly_trace_free() {
        let k = KnotCurve::torus(2, 3, 2.0, 1.0).unwrap();
        let h = fd_hessian(&k, &Vec3::new(0.3, 0.4, 0.2), &OracleConfig::default());
        assert!(h.trace().abs() < 1e-6 * h.norm());
    }

    #[test]
    fn unknot_brute_scan_has_single_origin_basin() {
        let k = unknot();
        let basins = brute_scan(&k, 64, 0.25 * k.min_self_distance(), &OracleConfig::default());
        assert_eq!(basins.len(), 1, "basins: {basins:?}");
        assert!(basins[0].center.norm() < 0.1);
    }

    #[test]
    fn tiny_grid_does_not_crash() {
        let k = unknot();
        let basins = brute_scan(&k, 2, 0.5, &OracleConfig::default());
        assert!(basins.is_empty());
    }
}
