//! Command-line front end: configuration merging, sweeps, Monte Carlo
//! validation runs and the files they write.
//!
//! Output is assembled in memory in a fixed order and only then written, so
//! repeated runs produce byte-identical files whatever the worker count.
//!
//! Exit status: 0 success, 1 configuration error, 2 runtime error, 3 Monte
//! Carlo disagreement, 4 Monte Carlo run without enough data to decide.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, ParsedConfig, ProtocolSelection};
use crate::error::{Error, Result};
use crate::montecarlo::{compare_to_analytic, simulate_model, AgreementStatus, AnalyticReference, TrialStats};
use crate::params::ProtocolConfig;
use crate::protocols::{
    self, apply_multiplexing, crossover_distance, distance_grid, label_regions, Protocol, RateCurve,
    RegionReport, REGION_TOLERANCE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_MC_FAIL: i32 = 3;
pub const EXIT_MC_INSUFFICIENT: i32 = 4;

pub const CSV_HEADER: &str =
    "distance_km,skr_bits_per_s,yield_per_round,qber_x,qber_z,cycle_time_s,region";

#[derive(Debug, Parser)]
#[command(name = "memqkd", version, about = "Secure key rates for BB84, MDI-QKD and memory-assisted MDI-QKD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute rate-versus-distance curves and write one CSV per curve.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write a quick-look SVG line chart per curve.
        #[arg(long)]
        svg: bool,
    },
    /// Compare the discrete-event simulation with the analytic node model.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print region boundaries of the memory-assisted curves.
    Regions {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print crossover distances of the memory-assisted curves against BB84 and MDI-QKD.
    Crossover {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the default configuration file.
    PrintDefaults,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// bb84, mdi, ma_mdi or all.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Smallest total distance in km.
    #[arg(long)]
    pub dmin: Option<f64>,
    /// Largest total distance in km.
    #[arg(long)]
    pub dmax: Option<f64>,
    /// Distance step in km.
    #[arg(long)]
    pub dstep: Option<f64>,
    /// Comma-separated π-pulse durations, e.g. "10ns,25ns,50ns,100ns".
    #[arg(long = "tau-pi")]
    pub tau_pi: Option<String>,
    /// Comma-separated dephasing times, e.g. "10ms,100ms,1s,10s".
    #[arg(long)]
    pub t2: Option<String>,
    /// Multiplexing as <wavelengths>x<polarizations>, e.g. 88x2.
    #[arg(long)]
    pub mux: Option<String>,
    /// Rounds per Monte Carlo seed.
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Seeds, e.g. "1..10" or "3,5,8".
    #[arg(long)]
    pub seeds: Option<String>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        key: key.to_string(),
        message: message.into(),
    }
}

/// Loads the configuration file (if any) and applies command-line overrides.
pub fn resolve_config(args: &CommonArgs) -> Result<ParsedConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                config_error("--config", format!("cannot read {}: {e}", path.display()))
            })?;
            config::parse_config(&text)?
        }
        None => ParsedConfig::default(),
    };
    let run = &mut cfg.run;
    if let Some(p) = &args.protocol {
        run.protocol = ProtocolSelection::parse(p).map_err(|e| config_error("--protocol", e.to_string()))?;
    }
    if let Some(v) = args.dmin {
        run.d_min = v;
    }
    if let Some(v) = args.dmax {
        run.d_max = v;
    }
    if let Some(v) = args.dstep {
        run.d_step = v;
    }
    if let Some(v) = &args.tau_pi {
        run.tau_pi_list = config::parse_time_list(v).map_err(|e| config_error("--tau-pi", e))?;
    }
    if let Some(v) = &args.t2 {
        run.t2_list = config::parse_time_list(v).map_err(|e| config_error("--t2", e))?;
    }
    if let Some(v) = &args.mux {
        run.mux = config::parse_mux(v).map_err(|e| config_error("--mux", e))?;
    }
    if let Some(v) = args.rounds {
        run.rounds = v;
    }
    if let Some(v) = &args.seeds {
        run.seeds = config::parse_seeds(v).map_err(|e| config_error("--seeds", e))?;
    }
    if let Some(v) = args.workers {
        run.workers = Some(v);
    }
    run.validate().map_err(|e| config_error("<command line>", e.to_string()))?;
    Ok(cfg)
}

/// One curve of a sweep together with the parameters that distinguish it.
#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub file_stem: String,
    pub config: ProtocolConfig,
    pub mux: (u32, u32),
    pub curve: RateCurve,
    pub regions: Option<RegionReport>,
}

fn fmt_ns(seconds: f64) -> String {
    let ns = (seconds * 1e9 * 1e3).round() / 1e3;
    format!("{ns}ns")
}

fn fmt_ms(seconds: f64) -> String {
    let ms = (seconds * 1e3 * 1e6).round() / 1e6;
    format!("{ms}ms")
}

/// Memory-assisted parameter combinations of a run, in sweep order.
fn ma_mdi_variants(cfg: &ParsedConfig) -> Vec<ProtocolConfig> {
    let base = cfg.protocol;
    let taus = if cfg.run.tau_pi_list.is_empty() {
        vec![base.device.tau_pi]
    } else {
        cfg.run.tau_pi_list.clone()
    };
    let t2s = if cfg.run.t2_list.is_empty() {
        vec![base.device.t2]
    } else {
        cfg.run.t2_list.clone()
    };
    let mut out = Vec::new();
    for &tau_pi in &taus {
        for &t2 in &t2s {
            let mut c = base;
            c.device.tau_pi = tau_pi;
            c.device.t2 = t2;
            out.push(c);
        }
    }
    out
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates every curve of a run. Direct-transmission protocols use the base
/// configuration; the memory-assisted protocol is evaluated for every
/// combination of the π-pulse and dephasing-time lists.
pub fn build_curves(cfg: &ParsedConfig, selection: &[Protocol]) -> Result<Vec<SweepCurve>> {
    cfg.protocol.validate()?;
    let grid = distance_grid(cfg.run.d_min, cfg.run.d_max, cfg.run.d_step)?;
    with_pool(cfg.run.workers, || -> Result<Vec<SweepCurve>> {
        let mut out = Vec::new();
        for &protocol in selection {
            match protocol {
                Protocol::Bb84 | Protocol::Mdi => {
                    let curve = protocols::rate_curve(protocol, &cfg.protocol, &grid)?;
                    out.push(SweepCurve {
                        file_stem: protocol.name().to_string(),
                        config: cfg.protocol,
                        mux: (1, 1),
                        curve,
                        regions: None,
                    });
                }
                Protocol::MaMdi => {
                    for variant in ma_mdi_variants(cfg) {
                        let mut curve = protocols::rate_curve(protocol, &variant, &grid)?;
                        let (nw, np) = cfg.run.mux;
                        for p in curve.points.iter_mut() {
                            *p = apply_multiplexing(p, nw, np)?;
                        }
                        let regions = if curve.points.len() >= 10 {
                            Some(label_regions(&mut curve, variant.link.alpha)?)
                        } else {
                            None
                        };
                        let mut stem = format!(
                            "ma_mdi_taupi{}_t2{}",
                            fmt_ns(variant.device.tau_pi),
                            fmt_ms(variant.device.t2)
                        );
                        if (nw, np) != (1, 1) {
                            let _ = write!(stem, "_mux{nw}x{np}");
                        }
                        out.push(SweepCurve {
                            file_stem: stem,
                            config: variant,
                            mux: (nw, np),
                            curve,
                            regions,
                        });
                    }
                }
            }
        }
        Ok(out)
    })?
}

fn fmt_sci(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_km(v: Option<f64>) -> String {
    v.map(|d| format!("{d}")).unwrap_or_else(|| "none".into())
}

/// CSV rendering of one curve with nine significant digits.
pub fn render_csv(curve: &RateCurve) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in &curve.points {
        let region = p.region.map(|r| r.label()).unwrap_or("NA");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sci(p.distance_km),
            fmt_sci(p.skr),
            fmt_sci(p.yield_per_round),
            fmt_sci(p.qber_x),
            fmt_sci(p.qber_z),
            fmt_sci(p.cycle_time),
            region
        );
    }
    out
}

/// Region boundaries of every memory-assisted curve.
pub fn render_regions(curves: &[SweepCurve]) -> String {
    let mut out = format!(
        "# slope bands: I = alpha/20 +-{pct}%, II = alpha/10 +-{pct}%, III = steeper than 2*alpha/10\n",
        pct = (REGION_TOLERANCE * 100.0).round()
    );
    out.push_str("curve,boundary_i_ii_km,boundary_ii_iii_km,zero_rate_km\n");
    for c in curves.iter().filter(|c| c.curve.protocol == Protocol::MaMdi) {
        let (b1, b2) = c
            .regions
            .as_ref()
            .map(|r| (r.boundary_i_ii, r.boundary_ii_iii))
            .unwrap_or((None, None));
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.file_stem,
            fmt_km(b1),
            fmt_km(b2),
            fmt_km(c.curve.zero_rate_distance())
        );
    }
    out
}

/// Crossover distances of every memory-assisted curve against BB84 and MDI-QKD.
pub fn render_crossover(curves: &[SweepCurve]) -> Result<String> {
    let mut out = String::from("curve,reference,crossover_km\n");
    let refs: Vec<&SweepCurve> = curves
        .iter()
        .filter(|c| c.curve.protocol != Protocol::MaMdi)
        .collect();
    for c in curves.iter().filter(|c| c.curve.protocol == Protocol::MaMdi) {
        for r in &refs {
            let x = crossover_distance(&c.curve, &r.curve)?;
            let _ = writeln!(out, "{},{},{}", c.file_stem, r.file_stem, fmt_km(x));
        }
    }
    Ok(out)
}

/// Manifest listing the effective configuration and every curve.
pub fn render_manifest(cfg: &ParsedConfig, curves: &[SweepCurve], command: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# memqkd {} {command}", env!("CARGO_PKG_VERSION"));
    out.push_str("# effective configuration\n");
    out.push_str(&config::render(cfg));
    let _ = writeln!(out, "region_tolerance = {REGION_TOLERANCE}");
    for w in cfg.protocol.warnings() {
        let _ = writeln!(out, "# warning: {w}");
    }
    out.push_str("# curves\n");
    for c in curves {
        let rate = c
            .config
            .source_rate()
            .map(|r| format!("{r:?}"))
            .unwrap_or_else(|_| "invalid".into());
        let _ = writeln!(
            out,
            "curve = {}.csv protocol={} tau_pi={:?} t2={:?} mux={}x{} pipelining={} source_rate_hz={} digest={}",
            c.file_stem,
            c.curve.protocol,
            c.config.device.tau_pi,
            c.config.device.t2,
            c.mux.0,
            c.mux.1,
            c.config.pipelining,
            rate,
            c.curve.config_digest
        );
        for w in c.config.warnings() {
            let _ = writeln!(out, "# warning for {}: {w}", c.file_stem);
        }
    }
    out
}

/// Minimal SVG chart of log10(rate) against distance.
pub fn render_svg(curve: &RateCurve, title: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.skr > 0.0)
        .map(|p| (p.distance_km, p.skr.log10()))
        .collect();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<text x=\"{m}\" y=\"20\">{title} (quick look, log10 SKR vs km)</text>\n"
    );
    if pts.len() >= 2 {
        let xmin = pts.first().map(|p| p.0).unwrap_or(0.0);
        let xmax = pts.last().map(|p| p.0).unwrap_or(1.0).max(xmin + 1e-9);
        let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).max(ymin + 1e-9);
        let sx = |x: f64| m + (x - xmin) / (xmax - xmin) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - ymin) / (ymax - ymin) * (h - 2.0 * m);
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{m}\" y=\"{}\">{xmin} km</text><text x=\"{}\" y=\"{}\">{xmax} km</text>",
            h - 15.0,
            w - m - 40.0,
            h - 15.0
        );
        let _ = writeln!(
            out,
            "<text x=\"5\" y=\"{}\">{ymax:.2}</text><text x=\"5\" y=\"{}\">{ymin:.2}</text>",
            m,
            h - m
        );
    }
    out.push_str("</svg>\n");
    out
}

/// All files of a sweep as (file name, contents), in a fixed order.
pub fn sweep_files(cfg: &ParsedConfig, svg: bool) -> Result<Vec<(String, String)>> {
    let selection = cfg.run.protocol.protocols();
    let curves = build_curves(cfg, &selection)?;
    let mut files = Vec::new();
    for c in &curves {
        files.push((format!("{}.csv", c.file_stem), render_csv(&c.curve)));
        if svg {
            files.push((format!("{}.svg", c.file_stem), render_svg(&c.curve, &c.file_stem)));
        }
    }
    files.push(("regions.csv".into(), render_regions(&curves)));
    files.push(("crossover.csv".into(), render_crossover(&curves)?));
    files.push(("manifest.txt".into(), render_manifest(cfg, &curves, "sweep")));
    Ok(files)
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    let file_error = |path: &Path, source| Error::File {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| file_error(&path, e))?;
    }
    Ok(())
}

/// Outcome of a Monte Carlo validation run.
#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub report: String,
    pub status: AgreementStatus,
}

/// Runs every seed at every distance, compares each against the analytic
/// model and decides by majority over seeds.
pub fn run_montecarlo(cfg: &ParsedConfig, distances: &[f64]) -> Result<MonteCarloRun> {
    let seeds = cfg.run.seeds.clone();
    let rounds = cfg.run.rounds;
    let mut report = String::new();
    let _ = writeln!(report, "# memqkd {} montecarlo", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(report, "rounds_per_seed = {rounds}");
    let _ = writeln!(report, "pipelining = {}", cfg.protocol.pipelining);
    let mut any_fail = false;
    let mut any_insufficient = false;
    for &d in distances {
        let model = protocols::NodeModel::from_config(&cfg.protocol, d)?;
        let reference = AnalyticReference::from_model(&model)?;
        let per_seed = with_pool(cfg.run.workers, || {
            use rayon::prelude::*;
            seeds
                .par_iter()
                .map(|&s| simulate_model(&model, rounds, s))
                .collect::<Result<Vec<TrialStats>>>()
        })??;
        let mut merged = TrialStats::default();
        let mut fails = 0usize;
        let mut insufficient = 0usize;
        let _ = writeln!(report, "\n[distance_km = {d}]");
        for stats in &per_seed {
            let r = compare_to_analytic(stats, &reference)?;
            match r.status {
                AgreementStatus::Fail => fails += 1,
                AgreementStatus::InsufficientData => insufficient += 1,
                AgreementStatus::Pass => {}
            }
            let _ = writeln!(report, "seed {} = {}", stats.seeds[0], r.status.label());
            merged.merge(stats)?;
        }
        let merged_report = compare_to_analytic(&merged, &reference)?;
        report.push_str("# merged over all seeds\n");
        report.push_str(&merged.render());
        report.push_str(&merged_report.render());
        let n = per_seed.len();
        let verdict = if 2 * fails > n {
            any_fail = true;
            "fail"
        } else if 2 * insufficient >= n && n > 0 && fails == 0 || n == 0 {
            any_insufficient = true;
            "insufficient data"
        } else {
            "pass"
        };
        let _ = writeln!(
            report,
            "seed_majority = {verdict} ({fails} of {n} seeds failed, {insufficient} without enough data)"
        );
    }
    let status = if any_fail {
        AgreementStatus::Fail
    } else if any_insufficient {
        AgreementStatus::InsufficientData
    } else {
        AgreementStatus::Pass
    };
    Ok(MonteCarloRun { report, status })
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn emit(out_dir: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    match out_dir {
        Some(dir) => write_files(dir, &[(name.to_string(), contents.to_string())]),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::PrintDefaults => {
            print!("{}", config::render(&ParsedConfig::default()));
            Ok(EXIT_OK)
        }
        Command::Sweep { common, svg } => {
            let cfg = resolve_config(&common)?;
            for w in cfg.protocol.warnings() {
                eprintln!("warning: {w}");
            }
            let files = sweep_files(&cfg, svg)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("memqkd-out"));
            write_files(&dir, &files)?;
            eprintln!("wrote {} files to {}", files.len(), dir.display());
            Ok(EXIT_OK)
        }
        Command::Regions { common } => {
            let mut cfg = resolve_config(&common)?;
            cfg.run.protocol = ProtocolSelection::One(Protocol::MaMdi);
            let curves = build_curves(&cfg, &[Protocol::MaMdi])?;
            emit(common.out.as_deref(), "regions.csv", &render_regions(&curves))?;
            Ok(EXIT_OK)
        }
        Command::Crossover { common } => {
            let cfg = resolve_config(&common)?;
            let curves = build_curves(&cfg, &Protocol::ALL)?;
            emit(common.out.as_deref(), "crossover.csv", &render_crossover(&curves)?)?;
            Ok(EXIT_OK)
        }
        Command::Montecarlo { common } => {
            let cfg = resolve_config(&common)?;
            let distances = if common.dmin.is_some() || common.dmax.is_some() {
                distance_grid(cfg.run.d_min, cfg.run.d_max, cfg.run.d_step)?
            } else {
                vec![100.0]
            };
            let run = run_montecarlo(&cfg, &distances)?;
            emit(common.out.as_deref(), "montecarlo.txt", &run.report)?;
            Ok(match run.status {
                AgreementStatus::Pass => EXIT_OK,
                AgreementStatus::Fail => EXIT_MC_FAIL,
                AgreementStatus::InsufficientData => EXIT_MC_INSUFFICIENT,
            })
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_nine_significant_digits() {
        let cfg = ParsedConfig {
            run: crate::config::RunConfig {
                d_max: 20.0,
                d_step: 10.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let curves = build_curves(&cfg, &[Protocol::Bb84]).unwrap();
        let csv = render_csv(&curves[0].curve);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.00000000e0,"));
        assert!(first.ends_with(",NA"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn variants_cover_both_lists() {
        let mut cfg = ParsedConfig::default();
        cfg.run.tau_pi_list = vec![10e-9, 100e-9];
        cfg.run.t2_list = vec![10e-3, 1.0, 10.0];
        assert_eq!(ma_mdi_variants(&cfg).len(), 6);
        assert_eq!(fmt_ns(10e-9), "10ns");
        assert_eq!(fmt_ms(10.0), "10000ms");
    }

    #[test]
    fn command_line_overrides() {
        let args = CommonArgs {
            protocol: Some("ma_mdi".into()),
            tau_pi: Some("10ns, 25ns".into()),
            mux: Some("88x2".into()),
            dmax: Some(50.0),
            ..Default::default()
        };
        let cfg = resolve_config(&args).unwrap();
        assert_eq!(cfg.run.tau_pi_list, vec![10e-9, 25e-9]);
        assert_eq!(cfg.run.mux, (88, 2));
        let bad = CommonArgs {
            mux: Some("88".into()),
            ..Default::default()
        };
        assert!(matches!(resolve_config(&bad), Err(Error::Parse { .. })));
    }
}
