//! File schemas: knot definition JSON, scan/flow/report exports, and the
//! internal scan cache.
//!
//! Export schemas are stable: knot files use the exact keys
//! `{"kind","p","q","R","r"}` / `{"kind","harmonics"}` / `{"kind","points"}`,
//! field samples serialize as `{"x","phi","grad","hess","nodes_used",
//! "est_error"}`, critical points as `{"x","phi","residual","eigvals",
//! "eigvecs","index","nondeg_margin"}`. Serialization is deterministic:
//! fixed field order, shortest round-trip floats, no timestamps.

use crate::critical::{CriticalPoint, ScanOutcome, SearchConfig};
use crate::field::FieldSample;
use crate::flow::{ArcKind, FlowArc, FlowConfig, Termination, TunnelingBundle};
use crate::knot::{KnotCurve, KnotError};
use crate::morse::MorseReport;
use crate::pipeline::ReportBundle;
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Knot(#[from] KnotError),
}

/// Knot definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KnotFileDef {
    Torus {
        p: i64,
        q: i64,
        #[serde(rename = "R")]
        major: f64,
        #[serde(rename = "r")]
        minor: f64,
    },
    Fourier {
        harmonics: Vec<[f64; 6]>,
    },
    Samples {
        points: Vec<[f64; 3]>,
    },
}

pub fn knot_from_def(def: &KnotFileDef) -> Result<KnotCurve, KnotError> {
    match def {
        KnotFileDef::Torus { p, q, major, minor } => KnotCurve::torus(*p, *q, *major, *minor),
        KnotFileDef::Fourier { harmonics } => KnotCurve::fourier(harmonics.clone()),
        KnotFileDef::Samples { points } => KnotCurve::from_samples(points.clone()),
    }
}

pub fn parse_knot_json(text: &str) -> Result<KnotCurve, FormatError> {
    let def: KnotFileDef =
        serde_json::from_str(text).map_err(|e| FormatError::Parse(e.to_string()))?;
    Ok(knot_from_def(&def)?)
}

pub fn load_knot(path: &Path) -> Result<KnotCurve, FormatError> {
    let text = std::fs::read_to_string(path)?;
    parse_knot_json(&text)
}

fn v3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// `eval` output schema.
#[derive(Debug, Serialize)]
pub struct FieldSampleJson {
    pub x: [f64; 3],
    pub phi: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub nodes_used: usize,
    pub est_error: f64,
}

impl From<&FieldSample> for FieldSampleJson {
    fn from(s: &FieldSample) -> Self {
        let g = s.grad.unwrap_or_else(Vec3::zeros);
        let h = s.hess.unwrap_or_else(nalgebra::Matrix3::zeros);
        FieldSampleJson {
            x: v3(&s.x),
            phi: s.phi,
            grad: v3(&g),
            hess: [
                [h[(0, 0)], h[(0, 1)], h[(0, 2)]],
                [h[(1, 0)], h[(1, 1)], h[(1, 2)]],
                [h[(2, 0)], h[(2, 1)], h[(2, 2)]],
            ],
            nodes_used: s.nodes_used,
            est_error: s.est_error,
        }
    }
}

pub fn field_sample_json(s: &FieldSample) -> String {
    serde_json::to_string_pretty(&FieldSampleJson::from(s)).expect("serialize")
}

/// Scan export record; rows of the JSON array and the CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct CriticalPointJson {
    pub x: [f64; 3],
    pub phi: f64,
    pub residual: f64,
    pub eigvals: [f64; 3],
    pub eigvecs: [[f64; 3]; 3],
    pub index: u8,
    pub nondeg_margin: f64,
}

impl From<&CriticalPoint> for CriticalPointJson {
    fn from(p: &CriticalPoint) -> Self {
        CriticalPointJson {
            x: v3(&p.x),
            phi: p.phi,
            residual: p.residual,
            eigvals: p.eigvals,
            eigvecs: [v3(&p.eigvecs[0]), v3(&p.eigvecs[1]), v3(&p.eigvecs[2])],
            index: p.index,
            nondeg_margin: p.nondeg_margin,
        }
    }
}

/// Spec-stable scan export: a JSON array of critical point records.
pub fn scan_export_json(points: &[CriticalPoint]) -> String {
    let rows: Vec<CriticalPointJson> = points.iter().map(Into::into).collect();
    serde_json::to_string_pretty(&rows).expect("serialize")
}

pub fn scan_export_csv(points: &[CriticalPoint], meta: &RunMeta) -> String {
    let mut out = String::new();
    for line in meta.comment_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(
        "x0,x1,x2,phi,residual,eigval0,eigval1,eigval2,\
         eigvec0_0,eigvec0_1,eigvec0_2,eigvec1_0,eigvec1_1,eigvec1_2,\
         eigvec2_0,eigvec2_1,eigvec2_2,index,nondeg_margin\n",
    );
    for p in points {
        let e = &p.eigvecs;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.x.x, p.x.y, p.x.z, p.phi, p.residual,
            p.eigvals[0], p.eigvals[1], p.eigvals[2],
            e[0].x, e[0].y, e[0].z, e[1].x, e[1].y, e[1].z, e[2].x, e[2].y, e[2].z,
            p.index, p.nondeg_margin,
        ));
    }
    out
}

fn arc_name(arc: &FlowArc, pair_idx: usize) -> String {
    let kind = match arc.kind {
        ArcKind::TunnelGamma => "gamma",
        ArcKind::ThetaLoop => "theta",
        ArcKind::Fragment => "arc",
    };
    let sign = if arc.branch >= 0 { "+" } else { "-" };
    format!("{kind}_{pair_idx}_{sign}")
}

fn bundle_arcs(bundle: &TunnelingBundle) -> Vec<(String, &FlowArc)> {
    let mut named = Vec::new();
    for (i, pair) in bundle.gammas.iter().enumerate() {
        named.push((arc_name(&pair.plus, i), &pair.plus));
        named.push((arc_name(&pair.minus, i), &pair.minus));
    }
    for (j, pair) in bundle.thetas.iter().enumerate() {
        named.push((arc_name(&pair.plus, j), &pair.plus));
        named.push((arc_name(&pair.minus, j), &pair.minus));
    }
    named
}

/// OBJ export: one line object per arc, named `gamma_<i>_<+/->` or
/// `theta_<j>_<+/->`.
pub fn arcs_obj(bundle: &TunnelingBundle, meta: &RunMeta) -> String {
    let mut out = String::new();
    for line in meta.comment_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    let mut next_vertex = 1usize;
    for (name, arc) in bundle_arcs(bundle) {
        out.push_str(&format!("o {name}\n"));
        let first = next_vertex;
        for (p, _) in &arc.polyline {
            out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
            next_vertex += 1;
        }
        out.push('l');
        for i in first..next_vertex {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
    }
    out
}

/// CSV export of arc polylines: `arc,step,x,y,z,phi`.
pub fn arcs_csv(bundle: &TunnelingBundle, meta: &RunMeta) -> String {
    let mut out = String::new();
    for line in meta.comment_lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("arc,step,x,y,z,phi\n");
    for (name, arc) in bundle_arcs(bundle) {
        for (step, (p, phi)) in arc.polyline.iter().enumerate() {
            out.push_str(&format!("{name},{step},{},{},{},{}\n", p.x, p.y, p.z, phi));
        }
    }
    out
}

/// Self-description block embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    /// Physical conventions.
    pub units: String,
    pub knot: String,
    pub tol_q: f64,
    pub tol_res: f64,
    pub r_dup: f64,
    pub tube_radius: f64,
    pub n_grid: usize,
    /// Flow integrator tolerances and far-field radius (diameters).
    pub flow_rtol: f64,
    pub flow_atol: f64,
    pub r_far_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunMeta {
    pub fn new(
        curve: &KnotCurve,
        search: &SearchConfig,
        flow: &FlowConfig,
        tube_radius: f64,
        seed: Option<u64>,
    ) -> Self {
        RunMeta {
            units: "unit line charge density; potential = integral |r'(t)|/|x - r(t)| dt; \
                    lengths in curve units"
                .into(),
            knot: curve.label().to_string(),
            tol_q: search.quad.tol_q,
            tol_res: search.resolved_tol_res(curve),
            r_dup: search.resolved_r_dup(curve),
            tube_radius,
            n_grid: search.n_grid,
            flow_rtol: flow.rtol,
            flow_atol: flow.atol,
            r_far_factor: flow.r_far_factor,
            seed,
        }
    }

    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# knot: {}", self.knot),
            format!("# units: {}", self.units),
            format!(
                "# tol_q: {} tol_res: {} r_dup: {} tube_radius: {} n_grid: {}",
                self.tol_q, self.tol_res, self.r_dup, self.tube_radius, self.n_grid
            ),
            format!(
                "# flow_rtol: {} flow_atol: {} r_far_factor: {}",
                self.flow_rtol, self.flow_atol, self.r_far_factor
            ),
        ];
        if let Some(s) = self.seed {
            lines.push(format!("# seed: {s}"));
        }
        lines
    }
}

#[derive(Debug, Serialize)]
pub struct ArcSummaryJson {
    pub gamma: usize,
    pub theta: usize,
    pub gamma_tube_ok: bool,
    pub theta_far_ok: bool,
    pub terminations: Vec<String>,
}

/// Full report schema: the identity/bound verdicts plus arc counts and
/// the meta block.
#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub knot: String,
    pub m: [usize; 4],
    pub cp_found: usize,
    pub betti: [usize; 4],
    pub euler_ok: bool,
    pub lemma22_ok: bool,
    pub t_known: Option<u32>,
    pub bound_ok: Option<bool>,
    pub margin: Option<i64>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arcs: Option<ArcSummaryJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_upper_bound: Option<usize>,
    pub meta: RunMeta,
}

fn term_str(t: Termination) -> String {
    match t {
        Termination::KnotTube => "KnotTube".into(),
        Termination::FarField => "FarField".into(),
        Termination::NearCritical { crit } => format!("NearCritical({crit})"),
        Termination::MaxSteps => "MaxSteps".into(),
    }
}

pub fn report_json(bundle: &ReportBundle, meta: RunMeta) -> String {
    let r: &MorseReport = &bundle.report;
    let arcs = bundle.arcs.as_ref().map(|b| ArcSummaryJson {
        gamma: b.gammas.len(),
        theta: b.thetas.len(),
        gamma_tube_ok: b.all_gamma_tube(),
        theta_far_ok: b.all_theta_far(),
        terminations: bundle_arcs(b)
            .iter()
            .map(|(name, arc)| format!("{name}: {}", term_str(arc.termination)))
            .collect(),
    });
    let json = ReportJson {
        knot: r.knot.clone(),
        m: r.m,
        cp_found: r.cp_found,
        betti: r.betti,
        euler_ok: r.euler_ok,
        lemma22_ok: r.lemma22_ok,
        t_known: r.t_known,
        bound_ok: r.bound_ok,
        margin: r.margin,
        notes: r.notes.clone(),
        arcs,
        crossing_upper_bound: bundle.crossing_upper_bound,
        meta,
    };
    serde_json::to_string_pretty(&json).expect("serialize")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DegenerateJson {
    pub x: [f64; 3],
    pub phi: f64,
    pub residual: f64,
    pub eigvals: [f64; 3],
    pub nondeg_margin: f64,
}

/// Internal scan cache with full fidelity (includes flags and degenerate
/// candidates the export schema omits), so a cached pipeline continues
/// bit-identically.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScanCacheJson {
    pub points: Vec<CriticalPointJson>,
    pub quad_flags: Vec<bool>,
    #[serde(default)]
    pub degenerate: Vec<DegenerateJson>,
    pub lemma22_ok: bool,
    pub refined_pass: bool,
    pub n_grid_used: usize,
    pub seeds: usize,
    pub converged_seeds: usize,
}

impl ScanCacheJson {
    pub fn from_outcome(scan: &ScanOutcome) -> Self {
        ScanCacheJson {
            points: scan.points.iter().map(Into::into).collect(),
            quad_flags: scan.points.iter().map(|p| p.quad_flag).collect(),
            degenerate: scan
                .degenerate
                .iter()
                .map(|d| DegenerateJson {
                    x: v3(&d.x),
                    phi: d.phi,
                    residual: d.residual,
                    eigvals: d.eigvals,
                    nondeg_margin: d.nondeg_margin,
                })
                .collect(),
            lemma22_ok: scan.lemma22_ok,
            refined_pass: scan.refined_pass,
            n_grid_used: scan.n_grid_used,
            seeds: scan.seeds,
            converged_seeds: scan.converged_seeds,
        }
    }

    pub fn into_outcome(self) -> ScanOutcome {
        let points: Vec<CriticalPoint> = self
            .points
            .iter()
            .zip(self.quad_flags.iter().chain(std::iter::repeat(&false)))
            .map(|(p, &flag)| CriticalPoint {
                x: Vec3::new(p.x[0], p.x[1], p.x[2]),
                phi: p.phi,
                residual: p.residual,
                eigvals: p.eigvals,
                eigvecs: [
                    Vec3::new(p.eigvecs[0][0], p.eigvecs[0][1], p.eigvecs[0][2]),
                    Vec3::new(p.eigvecs[1][0], p.eigvecs[1][1], p.eigvecs[1][2]),
                    Vec3::new(p.eigvecs[2][0], p.eigvecs[2][1], p.eigvecs[2][2]),
                ],
                index: p.index,
                nondeg_margin: p.nondeg_margin,
                quad_flag: flag,
            })
            .collect();
        let degenerate = self
            .degenerate
            .into_iter()
            .map(|d| crate::critical::DegenerateCandidate {
                x: Vec3::new(d.x[0], d.x[1], d.x[2]),
                phi: d.phi,
                residual: d.residual,
                eigvals: d.eigvals,
                nondeg_margin: d.nondeg_margin,
            })
            .collect();
        ScanOutcome {
            points,
            degenerate,
            seeds: self.seeds,
            converged_seeds: self.converged_seeds,
            lemma22_ok: self.lemma22_ok,
            refined_pass: self.refined_pass,
            n_grid_used: self.n_grid_used,
        }
    }
}
