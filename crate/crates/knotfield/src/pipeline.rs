//! Scan -> flow -> report orchestration shared by the CLI, the Python
//! bindings, and the acceptance suite.

use crate::critical::{find_critical_points, CriticalError, ScanOutcome, SearchConfig};
use crate::flow::{build_tunneling, FlowConfig, FlowError, TunnelingBundle};
use crate::knot::{KnotCurve, KnotError, TubeSpec};
use crate::morse::{assemble_report, attach_bound, MorseError, MorseReport};
use crate::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Knot(#[from] KnotError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Morse(#[from] MorseError),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub search: SearchConfig,
    pub flow: FlowConfig,
    /// Projection direction for the crossing-count diagnostic.
    pub crossing_direction: Vec3,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            search: SearchConfig::default(),
            flow: FlowConfig::default(),
            // Fixed generic direction; jittered automatically on degeneracy.
            crossing_direction: Vec3::new(0.28, -0.19, 0.94),
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct ReportBundle {
    pub tube: TubeSpec,
    pub scan: ScanOutcome,
    pub arcs: Option<TunnelingBundle>,
    pub crossing_upper_bound: Option<usize>,
    pub report: MorseReport,
}

/// Run the full pipeline on one curve: critical search, separatrix
/// tracing, report assembly, catalog bound, crossing diagnostic.
pub fn run_report(curve: &KnotCurve, cfg: &PipelineConfig) -> Result<ReportBundle, PipelineError> {
    let tube = TubeSpec::for_curve(curve);
    let scan = find_critical_points(curve, &cfg.search, &tube)?;
    report_from_scan(curve, cfg, tube, scan)
}

/// Same as [`run_report`] but reusing an existing scan (cache path).
pub fn report_from_scan(
    curve: &KnotCurve,
    cfg: &PipelineConfig,
    tube: TubeSpec,
    scan: ScanOutcome,
) -> Result<ReportBundle, PipelineError> {
    // Assemble counts first: an index-0/3 finite point is an internal
    // inconsistency and must surface as such, not as a flow error.
    let mut report = attach_bound(assemble_report(curve.label(), &scan.points)?);

    let arcs = match build_tunneling(curve, &scan.points, &cfg.flow, &tube) {
        Ok(b) => Some(b),
        Err(FlowError::EmptyCriticalSet) => None,
        Err(e) => return Err(e.into()),
    };
    if scan.refined_pass {
        report.notes.push(format!(
            "search auto-refined to n_grid = {} after a failed completeness witness",
            scan.n_grid_used
        ));
    }
    if !scan.degenerate.is_empty() {
        report.notes.push(format!(
            "{} degenerate candidate(s) reported but not classified; a density \
             perturbation may separate them",
            scan.degenerate.len()
        ));
    }
    if let Some(bundle) = &arcs {
        for w in &bundle.warnings {
            report.notes.push(format!("flow: {w}"));
        }
    } else {
        report.notes.push("no critical points found: flow tracing skipped".into());
    }

    let crossing_upper_bound = curve.crossing_upper_bound(&cfg.crossing_direction).ok();
    if report.t_known.is_none() {
        if let Some(c) = crossing_upper_bound {
            report.notes.push(format!(
                "projection crossing count {c} bounds the tunnel number from above"
            ));
        }
    }

    Ok(ReportBundle { tube, scan, arcs, crossing_upper_bound, report })
}
