//! Command-line driver: eval / scan / flow / report / oracle.
//!
//! Exit codes: 0 ok, 2 evaluation precondition violated, 3 parse error,
//! 4 incomplete search (the m1 - m2 = 1 witness failed), 5 internal
//! inconsistency (a finite critical point with index 0 or 3).

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use knotfield::critical::{find_critical_points, ScanOutcome, SearchConfig};
use knotfield::field::{field_sample, FieldError, QuadratureConfig};
use knotfield::flow::FlowConfig;
use knotfield::formats::{
    arcs_csv, arcs_obj, field_sample_json, load_knot, report_json, scan_export_csv,
    scan_export_json, RunMeta, ScanCacheJson,
};
use knotfield::knot::{KnotCurve, TubeSpec};
use knotfield::morse::MorseError;
use knotfield::oracle::{fd_gradient, fd_hessian, reference_potential, OracleConfig};
use knotfield::pipeline::{report_from_scan, PipelineConfig, PipelineError};
use knotfield::Vec3;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

const EXIT_OK: i32 = 0;
const EXIT_GENERIC: i32 = 1;
const EXIT_PRECONDITION: i32 = 2;
const EXIT_PARSE: i32 = 3;
const EXIT_INCOMPLETE: i32 = 4;
const EXIT_INTERNAL: i32 = 5;

#[derive(Parser)]
#[command(
    name = "knotfield",
    about = "Electrostatics of charged knots: potential evaluation, critical points, \
             gradient-flow separatrices, and Morse reports"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonOpts {
    /// Knot definition file (JSON: torus / fourier / samples)
    #[arg(long)]
    knot: PathBuf,
    /// Quadrature relative tolerance
    #[arg(long = "tol-q")]
    tol_q: Option<f64>,
}

#[derive(Args)]
struct SearchOpts {
    /// Search grid resolution per axis
    #[arg(long)]
    grid: Option<usize>,
    /// Residual tolerance for critical points
    #[arg(long = "tol-res")]
    tol_res: Option<f64>,
}

#[derive(Args)]
struct OutOpts {
    /// Output directory; results print to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, comma separated
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
}

#[derive(Args)]
struct FlowOpts {
    /// Far-field radius in diameters
    #[arg(long = "far-field")]
    far_field: Option<f64>,
    /// Seed for randomized sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Run a descending-flow census with this many random starts
    #[arg(long)]
    census: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate potential, gradient, and Hessian at a point
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        /// Evaluation point "x,y,z"
        #[arg(long)]
        point: String,
    },
    /// Locate and classify the finite critical points
    Scan {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        search: SearchOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Trace separatrix arcs (runs or reuses a scan)
    Flow {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        search: SearchOpts,
        #[command(flatten)]
        out: OutOpts,
        #[command(flatten)]
        flow: FlowOpts,
    },
    /// Full pipeline: scan, flow, invariants, tunnel-number bound
    Report {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        search: SearchOpts,
        #[command(flatten)]
        out: OutOpts,
        #[command(flatten)]
        flow: FlowOpts,
    },
    /// Reference-implementation values at a point (debugging aid)
    Oracle {
        #[command(flatten)]
        common: CommonOpts,
        /// Evaluation point "x,y,z"
        #[arg(long)]
        point: String,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn parse_point(text: &str) -> Result<Vec3> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(anyhow!("point must be \"x,y,z\", got {text:?}"));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse::<f64>()
            .map_err(|e| anyhow!("bad coordinate {p:?} in point: {e}"))?;
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn load_curve(path: &Path) -> Result<KnotCurve, i32> {
    load_knot(path).map_err(|e| {
        eprintln!("error: cannot load knot file {}: {e}", path.display());
        EXIT_PARSE
    })
}

fn quad_config(tol_q: Option<f64>) -> QuadratureConfig {
    let mut q = QuadratureConfig::default();
    if let Some(t) = tol_q {
        q.tol_q = t;
    }
    q
}

fn search_config(common: &CommonOpts, search: &SearchOpts) -> SearchConfig {
    let mut cfg = SearchConfig { quad: quad_config(common.tol_q), ..Default::default() };
    if let Some(g) = search.grid {
        cfg.n_grid = g;
    }
    if let Some(t) = search.tol_res {
        cfg.tol_res = Some(t);
    }
    cfg
}

fn flow_config(opts: &FlowOpts) -> FlowConfig {
    let mut cfg = FlowConfig::default();
    if let Some(f) = opts.far_field {
        cfg.r_far_factor = f;
    }
    cfg
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Scan cache key: content hash of the knot file bytes and the configs.
fn scan_cache_path(out: &Path, knot_path: &Path, cfg: &SearchConfig) -> Option<PathBuf> {
    let bytes = std::fs::read(knot_path).ok()?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(format!(
        "n_grid={};tol_res={:?};tol_deg={};r_dup={:?};n0={};n_max={};tol_q={}",
        cfg.n_grid, cfg.tol_res, cfg.tol_deg, cfg.r_dup, cfg.quad.n0, cfg.quad.n_max, cfg.quad.tol_q
    ));
    let digest = hasher.finalize();
    let hex: String = digest.iter().take(16).map(|b| format!("{b:02x}")).collect();
    Some(out.join(".cache").join(format!("scan-{hex}.json")))
}

fn scan_with_cache(
    curve: &KnotCurve,
    cfg: &SearchConfig,
    tube: &TubeSpec,
    cache_path: Option<&Path>,
) -> Result<ScanOutcome, i32> {
    if let Some(path) = cache_path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(cache) = serde_json::from_str::<ScanCacheJson>(&text) {
                return Ok(cache.into_outcome());
            }
        }
    }
    let scan = find_critical_points(curve, cfg, tube).map_err(|e| {
        eprintln!("error: critical search failed: {e}");
        EXIT_GENERIC
    })?;
    if let Some(path) = cache_path {
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        if let Ok(text) = serde_json::to_string_pretty(&ScanCacheJson::from_outcome(&scan)) {
            let _ = std::fs::write(path, text);
        }
    }
    Ok(scan)
}

fn run(cli: Cli) -> i32 {
    match cli.cmd {
        Cmd::Eval { common, point } => {
            let x = match parse_point(&point) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_PARSE;
                }
            };
            let curve = match load_curve(&common.knot) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let quad = quad_config(common.tol_q);
            match field_sample(&curve, &x, &quad) {
                Ok(s) => {
                    println!("{}", field_sample_json(&s));
                    if !s.converged {
                        eprintln!(
                            "warning: quadrature hit the node budget; est_error = {:.3e}",
                            s.est_error
                        );
                    }
                    EXIT_OK
                }
                Err(e @ FieldError::TooCloseToKnot { .. }) => {
                    eprintln!("error: {e}");
                    EXIT_PRECONDITION
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_PARSE
                }
            }
        }

        Cmd::Scan { common, search, out } => {
            let curve = match load_curve(&common.knot) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let cfg = search_config(&common, &search);
            let tube = TubeSpec::for_curve(&curve);
            let cache = out
                .out
                .as_deref()
                .and_then(|d| scan_cache_path(d, &common.knot, &cfg));
            let scan = match scan_with_cache(&curve, &cfg, &tube, cache.as_deref()) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let meta = RunMeta::new(&curve, &cfg, &FlowConfig::default(), tube.rho, None);
            let json = scan_export_json(&scan.points);
            let formats: Vec<String> = if out.format.is_empty() {
                vec!["json".into(), "csv".into()]
            } else {
                out.format.clone()
            };
            if let Some(dir) = &out.out {
                for f in &formats {
                    let res = match f.as_str() {
                        "json" => write_file(dir, "critical_points.json", &json),
                        "csv" => {
                            write_file(dir, "critical_points.csv", &scan_export_csv(&scan.points, &meta))
                        }
                        other => {
                            eprintln!("warning: scan does not support format {other:?}");
                            Ok(())
                        }
                    };
                    if let Err(e) = res {
                        eprintln!("error: {e}");
                        return EXIT_GENERIC;
                    }
                }
                if let Err(e) = write_file(
                    dir,
                    "run_meta.json",
                    &serde_json::to_string_pretty(&meta).expect("serialize"),
                ) {
                    eprintln!("error: {e}");
                    return EXIT_GENERIC;
                }
            } else {
                println!("{json}");
            }
            eprintln!(
                "scan: {} critical point(s), {} degenerate, lemma m1-m2=1 {}",
                scan.points.len(),
                scan.degenerate.len(),
                if scan.lemma22_ok { "ok" } else { "FAILED" }
            );
            if scan.lemma22_ok {
                EXIT_OK
            } else {
                EXIT_INCOMPLETE
            }
        }

        Cmd::Flow { common, search, out, flow } => {
            let curve = match load_curve(&common.knot) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let cfg = search_config(&common, &search);
            let fcfg = flow_config(&flow);
            let tube = TubeSpec::for_curve(&curve);
            let cache = out
                .out
                .as_deref()
                .and_then(|d| scan_cache_path(d, &common.knot, &cfg));
            let scan = match scan_with_cache(&curve, &cfg, &tube, cache.as_deref()) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let bundle = match knotfield::flow::build_tunneling(&curve, &scan.points, &fcfg, &tube) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: flow tracing failed: {e}");
                    return EXIT_GENERIC;
                }
            };
            for w in &bundle.warnings {
                eprintln!("warning: {w}");
            }
            let meta = RunMeta::new(&curve, &cfg, &fcfg, tube.rho, flow.seed);
            let formats: Vec<String> = if out.format.is_empty() {
                vec!["obj".into(), "csv".into()]
            } else {
                out.format.clone()
            };
            if let Some(dir) = &out.out {
                for f in &formats {
                    let res = match f.as_str() {
                        "obj" => write_file(dir, "arcs.obj", &arcs_obj(&bundle, &meta)),
                        "csv" => write_file(dir, "arcs.csv", &arcs_csv(&bundle, &meta)),
                        other => {
                            eprintln!("warning: flow does not support format {other:?}");
                            Ok(())
                        }
                    };
                    if let Err(e) = res {
                        eprintln!("error: {e}");
                        return EXIT_GENERIC;
                    }
                }
            } else {
                print!("{}", arcs_csv(&bundle, &meta));
            }
            eprintln!(
                "flow: {} tunnel arc pair(s), {} loop pair(s); gamma->tube {}, theta->far {}",
                bundle.gammas.len(),
                bundle.thetas.len(),
                bundle.all_gamma_tube(),
                bundle.all_theta_far()
            );
            if let Some(n) = flow.census {
                let gamma_arcs: Vec<&knotfield::flow::FlowArc> = bundle
                    .gammas
                    .iter()
                    .flat_map(|p| [&p.plus, &p.minus])
                    .collect();
                match knotfield::flow::descending_flow_census(
                    &curve,
                    n,
                    flow.seed.unwrap_or(0),
                    &fcfg,
                    &scan.points,
                    &tube,
                    &gamma_arcs,
                ) {
                    Ok(stats) => println!(
                        "census: {} sampled, {} far-field ({:.1}%), {} near-critical, {} max-steps",
                        stats.sampled,
                        stats.far_field,
                        100.0 * stats.far_field_fraction(),
                        stats.near_critical,
                        stats.max_steps
                    ),
                    Err(e) => {
                        eprintln!("error: census failed: {e}");
                        return EXIT_GENERIC;
                    }
                }
            }
            EXIT_OK
        }

        Cmd::Report { common, search, out, flow } => {
            let curve = match load_curve(&common.knot) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let cfg = search_config(&common, &search);
            let fcfg = flow_config(&flow);
            let tube = TubeSpec::for_curve(&curve);
            let cache = out
                .out
                .as_deref()
                .and_then(|d| scan_cache_path(d, &common.knot, &cfg));
            let scan = match scan_with_cache(&curve, &cfg, &tube, cache.as_deref()) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let pipeline_cfg = PipelineConfig {
                search: cfg.clone(),
                flow: fcfg.clone(),
                seed: flow.seed.unwrap_or(0),
                ..Default::default()
            };
            let bundle = match report_from_scan(&curve, &pipeline_cfg, tube, scan) {
                Ok(b) => b,
                Err(PipelineError::Morse(e @ MorseError::IndexOutOfRange { .. })) => {
                    eprintln!("error: {e}");
                    return EXIT_INTERNAL;
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_GENERIC;
                }
            };
            let meta = RunMeta::new(&curve, &cfg, &fcfg, bundle.tube.rho, flow.seed);
            let text = report_json(&bundle, meta);
            println!("{text}");
            if let Some(dir) = &out.out {
                if let Err(e) = write_file(dir, "report.json", &text) {
                    eprintln!("error: {e}");
                    return EXIT_GENERIC;
                }
            }
            if bundle.report.lemma22_ok {
                EXIT_OK
            } else {
                eprintln!("error: index counts fail m1 - m2 = 1: search incomplete");
                EXIT_INCOMPLETE
            }
        }

        Cmd::Oracle { common, point } => {
            let x = match parse_point(&point) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_PARSE;
                }
            };
            let curve = match load_curve(&common.knot) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let ocfg = OracleConfig::default();
            let phi_ref = reference_potential(&curve, &x, ocfg.ref_nodes);
            let g = fd_gradient(&curve, &x, &ocfg);
            let h = fd_hessian(&curve, &x, &ocfg);
            let adaptive = field_sample(&curve, &x, &quad_config(common.tol_q)).ok();
            let out = serde_json::json!({
                "x": [x.x, x.y, x.z],
                "phi_reference": phi_ref,
                "fd_gradient": [g.x, g.y, g.z],
                "fd_hessian_trace": h.trace(),
                "phi_adaptive": adaptive.as_ref().map(|s| s.phi),
                "phi_rel_difference": adaptive.as_ref().map(|s| (s.phi - phi_ref).abs() / phi_ref),
                "ref_nodes": ocfg.ref_nodes,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serialize"));
            EXIT_OK
        }
    }
}
