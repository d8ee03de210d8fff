//! Shared periodic-trapezoid node machinery.
//!
//! The field integrands are analytic and 2*pi-periodic in the curve
//! parameter, so the uniform trapezoid rule converges geometrically and
//! node doubling gives a cheap error estimate. Curve samples at dyadic
//! node counts are cached per curve; levels are immutable once built, so
//! concurrent readers always see identical values.

use crate::knot::KnotKind;
use crate::Vec3;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

/// Node count at level 0; level `l` has `BASE_NODES << l` nodes.
pub const BASE_NODES: usize = 16;

/// Curve samples at the uniform parameters of one dyadic level.
pub struct NodeLevel {
    pub n: usize,
    pub pos: Vec<Vec3>,
    pub speed: Vec<f64>,
}

impl NodeLevel {
    fn build(kind: &KnotKind, level: usize) -> Self {
        let n = BASE_NODES << level;
        let mut pos = Vec::with_capacity(n);
        let mut speed = Vec::with_capacity(n);
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let (p, v) = kind.eval(t);
            pos.push(p);
            speed.push(v.norm());
        }
        NodeLevel { n, pos, speed }
    }

    /// Uniform trapezoid weight (periodic: all nodes weighted equally).
    pub fn weight(&self) -> f64 {
        TAU / self.n as f64
    }
}

#[derive(Default)]
pub struct NodeCache {
    levels: RwLock<Vec<Arc<NodeLevel>>>,
}

impl NodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn level(&self, kind: &KnotKind, level: usize) -> Arc<NodeLevel> {
        {
            let levels = self.levels.read().unwrap();
            if let Some(l) = levels.get(level) {
                return Arc::clone(l);
            }
        }
        let mut levels = self.levels.write().unwrap();
        while levels.len() <= level {
            let next = levels.len();
            levels.push(Arc::new(NodeLevel::build(kind, next)));
        }
        Arc::clone(&levels[level])
    }
}

/// Smallest level whose node count is >= `n`.
pub fn level_for(n: usize) -> usize {
    let mut level = 0;
    while (BASE_NODES << level) < n {
        level += 1;
    }
    level
}
