//! Line-oriented `key = value` configuration files.
//!
//! Values may carry a unit suffix matching the key's dimension: `s`, `ms`,
//! `us`, `ns`, `ps` for times, `Hz`, `kHz`, `MHz`, `GHz` for rates, `dB` for
//! insertion losses, `dB/km` for attenuation and `km` for distances. Bare
//! numbers are read in the base unit (seconds, Hz, dB, dB/km, km). Lines
//! starting with `#` are comments. Keys that are not set keep their default
//! value and unknown keys are rejected.
//!
//! Besides the physical parameters, a file may hold run settings (`protocol`,
//! `d_min`, `d_max`, `d_step`, `sweep_tau_pi`, `sweep_t2`, `mux`, `rounds`,
//! `seeds`, `workers`).

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ProtocolConfig;
use crate::protocols::Protocol;

/// Which protocols a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolSelection {
    All,
    One(Protocol),
}

impl ProtocolSelection {
    pub fn protocols(&self) -> Vec<Protocol> {
        match self {
            ProtocolSelection::All => Protocol::ALL.to_vec(),
            ProtocolSelection::One(p) => vec![*p],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(ProtocolSelection::All)
        } else {
            Ok(ProtocolSelection::One(s.parse()?))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSelection::All => "all",
            ProtocolSelection::One(p) => p.name(),
        }
    }
}

/// Sweep and Monte Carlo settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: ProtocolSelection,
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
    /// π-pulse durations to sweep, in seconds. Empty means the configured value.
    pub tau_pi_list: Vec<f64>,
    /// Dephasing times to sweep, in seconds. Empty means the configured value.
    pub t2_list: Vec<f64>,
    /// Wavelength and polarization channel counts.
    pub mux: (u32, u32),
    pub rounds: u64,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: ProtocolSelection::All,
            d_min: 0.0,
            d_max: 700.0,
            d_step: 1.0,
            tau_pi_list: Vec::new(),
            t2_list: Vec::new(),
            mux: (1, 1),
            rounds: 1_000_000,
            seeds: (1..=10).collect(),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_step > 0.0) {
            return Err(Error::domain("d_step must be > 0"));
        }
        if !(self.d_min >= 0.0) || !(self.d_min <= self.d_max) {
            return Err(Error::domain("distance range needs 0 <= d_min <= d_max"));
        }
        if self.tau_pi_list.iter().chain(&self.t2_list).any(|v| !(*v > 0.0)) {
            return Err(Error::domain("sweep values must be > 0"));
        }
        if self.mux.0 == 0 || self.mux.1 == 0 {
            return Err(Error::domain("multiplexing counts must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::domain("seed list must not be empty"));
        }
        if self.workers == Some(0) {
            return Err(Error::domain("workers must be >= 1"));
        }
        Ok(())
    }
}

/// A fully parsed configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedConfig {
    pub protocol: ProtocolConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Time,
    Rate,
    Loss,
    Attenuation,
    Length,
    Probability,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Positive,
    NonNegative,
    AtLeastOne,
}

const PHYSICAL_KEYS: &[&str] = &[
    "t1",
    "t2",
    "t1n",
    "t2n",
    "t_en",
    "tau_r",
    "tau_pi",
    "tau_init",
    "eta_up",
    "eta_down",
    "gamma_linewidth",
    "tau_p",
    "eta_w",
    "eta_r0",
    "eta_spd",
    "t_spd",
    "gamma_dc",
    "gamma_bg",
    "alpha_ob",
    "e_a",
    "e_b",
    "f",
    "eta_oc",
    "eta_os",
    "t_os",
    "dt_os",
    "source_rate",
    "memory_cutoff",
    "pipelining",
];

const RUN_KEYS: &[&str] = &[
    "protocol",
    "d_min",
    "d_max",
    "d_step",
    "sweep_tau_pi",
    "sweep_t2",
    "mux",
    "rounds",
    "seeds",
    "workers",
];

fn key_spec(key: &str) -> Option<(Kind, Bound)> {
    use Bound::*;
    use Kind::*;
    Some(match key {
        "t1" | "t2" | "t1n" | "t2n" | "t_en" | "tau_r" | "tau_pi" | "tau_p" | "memory_cutoff" => {
            (Time, Positive)
        }
        "tau_init" | "t_spd" | "t_os" | "dt_os" => (Time, NonNegative),
        "eta_up" | "eta_down" | "eta_w" | "eta_r0" | "eta_spd" | "e_a" | "e_b" => {
            (Probability, NonNegative)
        }
        "gamma_linewidth" | "gamma_dc" | "gamma_bg" => (Rate, NonNegative),
        "source_rate" => (Rate, Positive),
        "alpha_ob" => (Attenuation, NonNegative),
        "eta_oc" | "eta_os" => (Loss, NonNegative),
        "f" => (Number, AtLeastOne),
        "d_min" | "d_max" => (Length, NonNegative),
        "d_step" => (Length, Positive),
        "sweep_tau_pi" | "sweep_t2" => (Time, Positive),
        _ => return None,
    })
}

fn unit_factor(kind: Kind, unit: &str) -> Option<(f64, bool)> {
    // (factor, divide): dividing by powers of ten keeps decimal inputs exact
    let u = unit.trim();
    match kind {
        Kind::Time => match u {
            "" | "s" => Some((1.0, false)),
            "ms" => Some((1e3, true)),
            "us" | "µs" | "μs" => Some((1e6, true)),
            "ns" => Some((1e9, true)),
            "ps" => Some((1e12, true)),
            _ => None,
        },
        Kind::Rate => match u {
            "" | "Hz" => Some((1.0, false)),
            "kHz" => Some((1e3, false)),
            "MHz" => Some((1e6, false)),
            "GHz" => Some((1e9, false)),
            _ => None,
        },
        Kind::Loss => matches!(u, "" | "dB").then_some((1.0, false)),
        Kind::Attenuation => matches!(u, "" | "dB/km").then_some((1.0, false)),
        Kind::Length => matches!(u, "" | "km").then_some((1.0, false)),
        Kind::Probability | Kind::Number => (u.is_empty()).then_some((1.0, false)),
    }
}

/// Splits `"10 ns"` or `"1e-8s"` into the number and the unit suffix.
fn split_number(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    let mut cut = t.len();
    while cut > 0 {
        if t.is_char_boundary(cut) {
            if let Ok(v) = t[..cut].trim().parse::<f64>() {
                return Some((v, &t[cut..]));
            }
        }
        cut -= 1;
    }
    None
}

fn parse_quantity(text: &str, kind: Kind, bound: Bound) -> std::result::Result<f64, String> {
    let (number, unit) =
        split_number(text).ok_or_else(|| format!("cannot read a number from '{}'", text.trim()))?;
    if !number.is_finite() {
        return Err("value must be finite".into());
    }
    let (factor, divide) = unit_factor(kind, unit)
        .ok_or_else(|| format!("unit '{}' is not valid for this key", unit.trim()))?;
    let v = if divide { number / factor } else { number * factor };
    match bound {
        Bound::Positive if !(v > 0.0) => return Err("value must be > 0".into()),
        Bound::NonNegative if !(v >= 0.0) => return Err("value must be >= 0".into()),
        Bound::AtLeastOne if !(v >= 1.0) => return Err("value must be >= 1".into()),
        _ => {}
    }
    if kind == Kind::Probability && v > 1.0 {
        return Err("probability must be <= 1".into());
    }
    Ok(v)
}

fn parse_bool(text: &str) -> std::result::Result<bool, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

/// Parses `"88x2"` into wavelength and polarization channel counts.
pub fn parse_mux(text: &str) -> std::result::Result<(u32, u32), String> {
    let lower = text.trim().to_ascii_lowercase();
    let (a, b) = lower
        .split_once('x')
        .ok_or_else(|| format!("expected <n_wavelength>x<n_polarization>, got '{text}'"))?;
    let a: u32 = a.trim().parse().map_err(|_| format!("bad channel count '{a}'"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad channel count '{b}'"))?;
    if a == 0 || b == 0 {
        return Err("channel counts must be >= 1".into());
    }
    Ok((a, b))
}

/// Parses a comma-separated seed list; `a..b` denotes an inclusive range.
pub fn parse_seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed '{a}'"))?;
            let b: u64 = b.trim().parse().map_err(|_| format!("bad seed '{b}'"))?;
            if b < a {
                return Err(format!("empty seed range '{part}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| format!("bad seed '{part}'"))?);
        }
    }
    if out.is_empty() {
        return Err("seed list must not be empty".into());
    }
    Ok(out)
}

/// Parses a comma-separated list of times such as `"10 ns, 25 ns"`.
pub fn parse_time_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_quantity(s, Kind::Time, Bound::Positive))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("list must not be empty".into());
    }
    Ok(values)
}

fn is_auto(text: &str) -> bool {
    text.trim().eq_ignore_ascii_case("auto")
}

fn apply(cfg: &mut ParsedConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let p = &mut cfg.protocol;
    let run = &mut cfg.run;
    let q = |v: &str| {
        let (kind, bound) = key_spec(key).expect("key has a spec");
        parse_quantity(v, kind, bound)
    };
    match key {
        "t1" => p.device.t1 = q(value)?,
        "t2" => p.device.t2 = q(value)?,
        "t1n" => p.device.t1_nuclear = q(value)?,
        "t2n" => p.device.t2_nuclear = q(value)?,
        "t_en" => p.device.t_en = q(value)?,
        "tau_r" => p.device.tau_r = q(value)?,
        "tau_pi" => p.device.tau_pi = q(value)?,
        "tau_init" => p.device.tau_init = if is_auto(value) { None } else { Some(q(value)?) },
        "eta_up" => p.device.eta_up = q(value)?,
        "eta_down" => p.device.eta_down = q(value)?,
        "gamma_linewidth" => p.device.gamma_linewidth = q(value)?,
        "tau_p" => p.device.tau_p = q(value)?,
        "eta_w" => p.device.eta_w = q(value)?,
        "eta_r0" => p.device.eta_r0 = q(value)?,
        "eta_spd" => p.link.detector.efficiency = q(value)?,
        "t_spd" => p.link.detector.timing_jitter = q(value)?,
        "gamma_dc" => p.link.detector.dark_rate = q(value)?,
        "gamma_bg" => p.link.detector.background_rate = q(value)?,
        "alpha_ob" => p.link.alpha = q(value)?,
        "e_a" => p.e_a = q(value)?,
        "e_b" => p.e_b = q(value)?,
        "f" => p.f = q(value)?,
        "eta_oc" => p.link.optics.circulator_loss = q(value)?,
        "eta_os" => p.link.optics.switch_loss = q(value)?,
        "t_os" => p.link.optics.switch_rise_fall = q(value)?,
        "dt_os" => p.link.optics.switch_min_pulse = q(value)?,
        "source_rate" => p.source_rate = if is_auto(value) { None } else { Some(q(value)?) },
        "memory_cutoff" => {
            p.memory_cutoff = if is_auto(value) { None } else { Some(q(value)?) }
        }
        "pipelining" => p.pipelining = parse_bool(value)?,
        "protocol" => run.protocol = ProtocolSelection::parse(value).map_err(|e| e.to_string())?,
        "d_min" => run.d_min = q(value)?,
        "d_max" => run.d_max = q(value)?,
        "d_step" => run.d_step = q(value)?,
        "sweep_tau_pi" => run.tau_pi_list = parse_time_list(value)?,
        "sweep_t2" => run.t2_list = parse_time_list(value)?,
        "mux" => run.mux = parse_mux(value)?,
        "rounds" => {
            run.rounds = value
                .trim()
                .parse()
                .map_err(|_| format!("bad round count '{}'", value.trim()))?
        }
        "seeds" => run.seeds = parse_seeds(value)?,
        "workers" => {
            let w: usize = value
                .trim()
                .parse()
                .map_err(|_| format!("bad worker count '{}'", value.trim()))?;
            if w == 0 {
                return Err("workers must be >= 1".into());
            }
            run.workers = Some(w);
        }
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

/// Parses a configuration text on top of the default parameter set.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut cfg = ParsedConfig::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            key: line.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let err = |message: String| Error::Parse {
            line: line_no,
            key: key.clone(),
            message,
        };
        if !PHYSICAL_KEYS.contains(&key.as_str()) && !RUN_KEYS.contains(&key.as_str()) {
            return Err(err("unknown key".into()));
        }
        if let Some(prev) = seen.insert(key.clone(), line_no) {
            return Err(err(format!("duplicate key, first set on line {prev}")));
        }
        apply(&mut cfg, &key, value).map_err(err)?;
    }
    let line_of = |k: &str| seen.get(k).copied().unwrap_or(0);
    cfg.protocol.validate().map_err(|e| Error::Parse {
        line: line_of("t2"),
        key: "<parameters>".into(),
        message: e.to_string(),
    })?;
    cfg.run.validate().map_err(|e| Error::Parse {
        line: line_of("d_max"),
        key: "<run>".into(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    match v {
        Some(x) => format!("{} {unit}", fmt_f(x)),
        None => "auto".into(),
    }
}

/// Renders the physical parameters, one `key = value unit` line each, in
/// base units with round-trip precision.
pub fn render_protocol(cfg: &ProtocolConfig) -> String {
    let d = &cfg.device;
    let l = &cfg.link;
    let rows: Vec<(&str, String)> = vec![
        ("t1", format!("{} s", fmt_f(d.t1))),
        ("t2", format!("{} s", fmt_f(d.t2))),
        ("t1n", format!("{} s", fmt_f(d.t1_nuclear))),
        ("t2n", format!("{} s", fmt_f(d.t2_nuclear))),
        ("t_en", format!("{} s", fmt_f(d.t_en))),
        ("tau_r", format!("{} s", fmt_f(d.tau_r))),
        ("tau_pi", format!("{} s", fmt_f(d.tau_pi))),
        ("tau_init", fmt_opt(d.tau_init, "s")),
        ("eta_up", fmt_f(d.eta_up)),
        ("eta_down", fmt_f(d.eta_down)),
        ("gamma_linewidth", format!("{} Hz", fmt_f(d.gamma_linewidth))),
        ("tau_p", format!("{} s", fmt_f(d.tau_p))),
        ("eta_w", fmt_f(d.eta_w)),
        ("eta_r0", fmt_f(d.eta_r0)),
        ("eta_spd", fmt_f(l.detector.efficiency)),
        ("t_spd", format!("{} s", fmt_f(l.detector.timing_jitter))),
        ("gamma_dc", format!("{} Hz", fmt_f(l.detector.dark_rate))),
        ("gamma_bg", format!("{} Hz", fmt_f(l.detector.background_rate))),
        ("alpha_ob", format!("{} dB/km", fmt_f(l.alpha))),
        ("e_a", fmt_f(cfg.e_a)),
        ("e_b", fmt_f(cfg.e_b)),
        ("f", fmt_f(cfg.f)),
        ("eta_oc", format!("{} dB", fmt_f(l.optics.circulator_loss))),
        ("eta_os", format!("{} dB", fmt_f(l.optics.switch_loss))),
        ("t_os", format!("{} s", fmt_f(l.optics.switch_rise_fall))),
        ("dt_os", format!("{} s", fmt_f(l.optics.switch_min_pulse))),
        ("source_rate", fmt_opt(cfg.source_rate, "Hz")),
        ("memory_cutoff", fmt_opt(cfg.memory_cutoff, "s")),
        ("pipelining", cfg.pipelining.to_string()),
    ];
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn fmt_time_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{} s", fmt_f(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a full configuration, physical parameters first.
pub fn render(cfg: &ParsedConfig) -> String {
    let mut out = render_protocol(&cfg.protocol);
    let r = &cfg.run;
    let _ = writeln!(out, "protocol = {}", r.protocol.name());
    let _ = writeln!(out, "d_min = {} km", fmt_f(r.d_min));
    let _ = writeln!(out, "d_max = {} km", fmt_f(r.d_max));
    let _ = writeln!(out, "d_step = {} km", fmt_f(r.d_step));
    if !r.tau_pi_list.is_empty() {
        let _ = writeln!(out, "sweep_tau_pi = {}", fmt_time_list(&r.tau_pi_list));
    }
    if !r.t2_list.is_empty() {
        let _ = writeln!(out, "sweep_t2 = {}", fmt_time_list(&r.t2_list));
    }
    let _ = writeln!(out, "mux = {}x{}", r.mux.0, r.mux.1);
    let _ = writeln!(out, "rounds = {}", r.rounds);
    let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(out, "seeds = {}", seeds.join(","));
    if let Some(w) = r.workers {
        let _ = writeln!(out, "workers = {w}");
    }
    out
}

/// Short hexadecimal digest of the physical parameter set.
pub fn digest(cfg: &ProtocolConfig) -> String {
    let hash = Sha256::digest(render_protocol(cfg).as_bytes());
    hash.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
