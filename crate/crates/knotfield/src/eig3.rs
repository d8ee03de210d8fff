//! Analytic eigensolver for symmetric 3x3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic
//! cubic; eigenvectors from cross products of the shifted matrix columns,
//! with fallbacks for repeated eigenvalues. Branchless in iteration count,
//! so results are bit-deterministic for a given input.

use crate::{Mat3, Vec3};
use std::f64::consts::PI;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub fn sym_eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Mat3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}

fn largest_of(cols: [Vec3; 3]) -> Vec3 {
    let mut best = cols[0];
    let mut best_n = best.norm_squared();
    for c in &cols[1..] {
        let n = c.norm_squared();
        if n > best_n {
            best = *c;
            best_n = n;
        }
    }
    best
}

/// Null-space direction of `m` (assumed rank <= 2), via cross products of
/// its columns. Returns None when the columns are too close to rank 1 for
/// the cross products to resolve a unique direction.
fn null_direction(m: &Mat3, scale: f64) -> Option<Vec3> {
    let c0: Vec3 = m.column(0).into();
    let c1: Vec3 = m.column(1).into();
    let c2: Vec3 = m.column(2).into();
    let q = largest_of([c0.cross(&c1), c1.cross(&c2), c2.cross(&c0)]);
    let n = q.norm();
    if n > 1e-14 * scale * scale {
        Some(q / n)
    } else {
        None
    }
}

fn any_unit_orthogonal(v: &Vec3) -> Vec3 {
    let trial = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&trial).normalize()
}

/// Full eigendecomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues ascending; vectors orthonormal and sign-fixed so the
/// largest-magnitude component of each vector is positive.
pub fn sym_eigen(a: &Mat3) -> SymEigen3 {
    let values = sym_eigenvalues(a);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    // Resolve the most isolated eigenvalue first: its null direction is the
    // best conditioned. gap(i) = distance to the nearest other eigenvalue.
    let gaps = [values[1] - values[0], (values[1] - values[0]).min(values[2] - values[1]), values[2] - values[1]];
    let first = if gaps[0] >= gaps[2] { 0 } else { 2 };
    let other = 2 - first;

    let id = Mat3::identity();
    let v_first = null_direction(&(a - id * values[first]), scale)
        .unwrap_or_else(|| any_unit_orthogonal(&Vec3::z()));
    let v_other = match null_direction(&(a - id * values[other]), scale) {
        Some(mut v) => {
            v -= v_first * v.dot(&v_first);
            let n = v.norm();
            if n > 1e-8 {
                v / n
            } else {
                any_unit_orthogonal(&v_first)
            }
        }
        // Repeated eigenvalue: any direction orthogonal to v_first works.
        None => any_unit_orthogonal(&v_first),
    };
    let v_mid = v_first.cross(&v_other);

    let mut vectors = [Vec3::zeros(); 3];
    vectors[first] = v_first;
    vectors[other] = v_other;
    vectors[1] = v_mid;

    for v in &mut vectors {
        let mut dominant = 0;
        for i in 1..3 {
            if v[i].abs() > v[dominant].abs() {
                dominant = i;
            }
        }
        if v[dominant] < 0.0 {
            *v = -*v;
        }
    }
    SymEigen3 { values, vectors }
}
