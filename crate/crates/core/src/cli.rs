//! Command-line front end.
//!
//! Configuration is a flat `key = value` file; `--set key=value` flags
//! override it. Every subcommand writes CSV with a `#` header block that
//! echoes the tool version, the seed and the full effective configuration,
//! so any output can be regenerated from its own header.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write;
use std::str::FromStr;

use crate::basins::{compute_basin, BasinConfig, LABEL_DIVERGED};
use crate::continuation::{continue_branch, detect_codim1, ContinuationOptions, DetectOptions};
use crate::error::Error;
use crate::fixed_points::{classify, find_fixed_points, ResidualForm, SearchOptions};
use crate::lyapunov::lyapunov_spectrum;
use crate::map::{MapParams, Param, PlanarParams, State, State2};
use crate::network::{classify_seeds, recurrence_matrix, simulate_network, xk_scan, NetworkParams, Thresholds};
use crate::noninvertibility::{
    extract_lc2, extract_lc3, lc_image2, lc_image3, preimages2, preimages3, PreimageOptions, Window,
};
use crate::orbit::{iterate_with_threshold, OrbitOptions};
use crate::par::Exec;
use crate::sweep::{bifurcation_sweep, lyapunov_sweep, sweep2d, Direction, IcPolicy, Sweep2dOptions, SweepSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

pub const SUBCOMMANDS: [&str; 12] = [
    "fixed-points",
    "orbit",
    "lyapunov",
    "lyapunov-sweep",
    "bifurcation",
    "sweep2d",
    "continue",
    "critical-set",
    "preimages",
    "basin",
    "network",
    "xk-scan",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Bool,
    Param,
    Choice(&'static [&'static str]),
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> Key {
    Key { name, kind, default: Some(default) }
}

const fn required(name: &'static str, kind: Kind) -> Key {
    Key { name, kind, default: None }
}

use Kind::*;

const KEYS: &[Key] = &[
    key("a", Float, "0.5"),
    key("b", Float, "0.4"),
    key("c", Float, "0.89"),
    key("k0", Float, "-0.44"),
    key("k", Float, "0"),
    key("alpha", Float, "0.1"),
    key("beta", Float, "0.1"),
    key("k1", Float, "0.1"),
    key("k2", Float, "0.2"),
    key("x0", Float, "0.1"),
    key("y0", Float, "0.1"),
    key("phi0", Float, "0"),
    key("seed", Int, "0"),
    key("workers", Int, "0"),
    key("n_transient", Int, "10000"),
    key("n_keep", Int, "1000"),
    key("tol", Float, "0.000001"),
    key("max_period", Int, "64"),
    key("divergence_threshold", Float, "1000000"),
    key("lyapunov_iters", Int, "100000"),
    key("fp_param", Param, "k"),
    key("fp_x_min", Float, "-5"),
    key("fp_x_max", Float, "15"),
    key("fp_grid_n", Int, "20001"),
    key("fp_tol", Float, "0.0000000001"),
    key("fp_form", Choice(&["consistent", "printed"]), "consistent"),
    key("sweep_param", Param, "k"),
    required("sweep_start", Float),
    required("sweep_stop", Float),
    key("sweep_n", Int, "101"),
    key("sweep_direction", Choice(&["forward", "backward"]), "forward"),
    key("sweep_ic", Choice(&["inherit", "fixed"]), "inherit"),
    key("cluster_tol", Float, "0.0001"),
    key("sweep2_param", Param, "a"),
    required("sweep2_start", Float),
    required("sweep2_stop", Float),
    key("sweep2_n", Int, "51"),
    key("cont_free", Param, "a"),
    key("cont_root", Int, "0"),
    key("cont_step0", Float, "0.001"),
    key("cont_step_min", Float, "0.00000001"),
    key("cont_step_max", Float, "0.1"),
    key("cont_n_max", Int, "2000"),
    key("cont_direction", Float, "1"),
    key("cont_min", Float, "-inf"),
    key("cont_max", Float, "inf"),
    key("cont_tol", Float, "0.0000000001"),
    key("ns_band", Float, "0.05"),
    key("planar", Bool, "false"),
    key("window_x_min", Float, "-3"),
    key("window_x_max", Float, "5"),
    key("window_y_min", Float, "-10"),
    key("window_y_max", Float, "25"),
    key("phi_min", Float, "-1"),
    key("phi_max", Float, "1"),
    key("grid_n", Int, "201"),
    key("critical_image", Bool, "false"),
    key("target_x_min", Float, "-1"),
    key("target_x_max", Float, "3"),
    key("target_y", Float, "0"),
    key("target_phi", Float, "0"),
    key("target_n", Int, "41"),
    key("pre_x_min", Float, "-10"),
    key("pre_x_max", Float, "20"),
    key("pre_grid_n", Int, "40001"),
    key("basin_nx", Int, "200"),
    key("basin_ny", Int, "200"),
    key("max_iter", Int, "50000"),
    key("check_every", Int, "500"),
    key("match_tol", Float, "0.0001"),
    key("basin_lyapunov_iters", Int, "2000"),
    key("n", Int, "100"),
    key("r", Int, "10"),
    key("sigma", Float, "0"),
    key("mu", Float, "0"),
    key("hub_in_ring", Bool, "true"),
    key("net_transient", Int, "20000"),
    key("net_record", Int, "100"),
    key("net_stride", Int, "1"),
    key("net_output", Choice(&["classify", "field", "end", "recurrence"]), "classify"),
    key("net_seeds", Int, "10"),
    key("eps", Float, "0.01"),
    key("sync_threshold", Float, "0.164"),
    key("coherence", Float, "0.05"),
    key("min_run", Int, "5"),
    key("max_clusters", Int, "10"),
    key("window", Int, "5"),
    key("xk_min", Float, "-3"),
    key("xk_max", Float, "2"),
    key("xk_n", Int, "101"),
];

/// Typed configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    Word(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Word(v) => f.write_str(v),
        }
    }
}

/// Config parse failure. `line` is 1-based; `None` for flags and keys that
/// are missing altogether.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn config_err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// Effective run configuration: one slot per known key, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: Vec<Option<Value>>,
}

/// Output of [`parse_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    /// Keys that took their default value.
    pub defaults: Vec<&'static str>,
}

fn key_index(name: &str) -> Option<usize> {
    KEYS.iter().position(|k| k.name == name)
}

fn parse_value(kind: Kind, text: &str) -> Result<Value, String> {
    let bad = || format!("malformed value `{text}`");
    match kind {
        Float => f64::from_str(text).map(Value::Float).map_err(|_| bad()),
        Int => u64::from_str(text).map(Value::Int).map_err(|_| bad()),
        Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad()),
        },
        Param => Param::from_str(text).map(|_| Value::Word(text.to_string())).map_err(|_| bad()),
        Choice(options) => {
            if options.contains(&text) {
                Ok(Value::Word(text.to_string()))
            } else {
                Err(format!("malformed value `{text}`, expected one of {}", options.join(", ")))
            }
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = KEYS.iter().map(|k| k.default.map(|d| parse_value(k.kind, d).expect("valid default"))).collect();
        RunConfig { values }
    }
}

impl RunConfig {
    /// Assign `name = text`, reporting problems against `line`.
    pub fn set(&mut self, name: &str, text: &str, line: Option<usize>) -> Result<(), ConfigError> {
        let i = key_index(name).ok_or_else(|| config_err(line, format!("unknown key `{name}`")))?;
        let v = parse_value(KEYS[i].kind, text).map_err(|m| config_err(line, format!("{name}: {m}")))?;
        self.values[i] = Some(v);
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| config_err(None, format!("--set expects key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim(), None).map_err(|e| config_err(None, format!("--set {}", e.message)))
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        key_index(name).and_then(|i| self.values[i].as_ref())
    }

    fn need(&self, name: &str) -> Result<&Value, ConfigError> {
        self.get(name).ok_or_else(|| config_err(None, format!("missing required key `{name}`")))
    }

    pub fn f64(&self, name: &str) -> Result<f64, ConfigError> {
        match self.need(name)? {
            Value::Float(v) => Ok(*v),
            _ => Err(config_err(None, format!("`{name}` is not a real number"))),
        }
    }

    pub fn usize(&self, name: &str) -> Result<usize, ConfigError> {
        match self.need(name)? {
            Value::Int(v) => usize::try_from(*v).map_err(|_| config_err(None, format!("`{name}` is too large"))),
            _ => Err(config_err(None, format!("`{name}` is not an integer"))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64, ConfigError> {
        match self.need(name)? {
            Value::Int(v) => Ok(*v),
            _ => Err(config_err(None, format!("`{name}` is not an integer"))),
        }
    }

    pub fn bool(&self, name: &str) -> Result<bool, ConfigError> {
        match self.need(name)? {
            Value::Bool(v) => Ok(*v),
            _ => Err(config_err(None, format!("`{name}` is not a boolean"))),
        }
    }

    pub fn word(&self, name: &str) -> Result<&str, ConfigError> {
        match self.need(name)? {
            Value::Word(v) => Ok(v),
            _ => Err(config_err(None, format!("`{name}` is not a word"))),
        }
    }

    pub fn param(&self, name: &str) -> Result<Param, ConfigError> {
        Param::from_str(self.word(name)?).map_err(|e| config_err(None, e.to_string()))
    }

    /// Single-neuron parameters.
    pub fn map_params(&self) -> Result<MapParams, ConfigError> {
        Ok(MapParams {
            a: self.f64("a")?,
            b: self.f64("b")?,
            c: self.f64("c")?,
            k0: self.f64("k0")?,
            k: self.f64("k")?,
            alpha: self.f64("alpha")?,
            beta: self.f64("beta")?,
            k1: self.f64("k1")?,
            k2: self.f64("k2")?,
        })
    }

    pub fn initial_state(&self) -> Result<State, ConfigError> {
        Ok(State::new(self.f64("x0")?, self.f64("y0")?, self.f64("phi0")?))
    }

    /// `key = value` lines for every assigned key, in table order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(&self.values) {
            if let Some(v) = v {
                let _ = writeln!(out, "{} = {}", k.name, v);
            }
        }
        out
    }
}

/// Parse `key = value` lines. `#` starts a comment. Keys left out take
/// their defaults; keys without a default stay unset until a subcommand
/// asks for them.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut seen = vec![false; KEYS.len()];
    for (n, raw) in text.lines().enumerate() {
        let line = Some(n + 1);
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| config_err(line, format!("expected `key = value`, got `{body}`")))?;
        let (k, v) = (k.trim(), v.trim());
        config.set(k, v, line)?;
        let i = key_index(k).expect("checked by set");
        if seen[i] {
            return Err(config_err(line, format!("duplicate key `{k}`")));
        }
        seen[i] = true;
    }
    let defaults = KEYS.iter().zip(&seen).filter(|(k, s)| !**s && k.default.is_some()).map(|(k, _)| k.name).collect();
    Ok(ParsedConfig { config, defaults })
}

/// Recover the configuration echoed in an output header.
pub fn config_from_header(output: &str) -> Result<ParsedConfig, ConfigError> {
    let mut body = String::new();
    let mut inside = false;
    for line in output.lines() {
        match line {
            "# begin config" => inside = true,
            "# end config" => break,
            l if inside => {
                body.push_str(l.strip_prefix("# ").unwrap_or(l));
                body.push('\n');
            }
            _ => {}
        }
    }
    parse_config(&body)
}

/// Lines of `output` that are not `#` comments.
pub fn data_section(output: &str) -> String {
    output.lines().filter(|l| !l.starts_with('#')).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    })
}

pub fn usage() -> String {
    format!(
        "usage: chialvo <subcommand> [--config FILE] [--set key=value]... [--workers N] [--seed N] [--require-bounded] [--out FILE]\nsubcommands: {}",
        SUBCOMMANDS.join(", ")
    )
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::NotAMapParameter(_) | Error::UnitRecoveryRate => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// What a subcommand produced.
struct Output {
    /// Main CSV: column header line then rows.
    data: String,
    /// Trailing `#` notes (tangencies and the like).
    notes: Vec<String>,
    /// Secondary table written next to the main file, or appended after it.
    sidecar: Option<(&'static str, String)>,
    /// True when every orbit in the result escaped.
    only_diverged: bool,
}

impl Output {
    fn new(header: &str) -> Self {
        Output { data: format!("{header}\n"), notes: Vec::new(), sidecar: None, only_diverged: false }
    }

    fn row(&mut self, fields: &[String]) {
        self.data.push_str(&fields.join(","));
        self.data.push('\n');
    }
}

macro_rules! row {
    ($out:expr, $($f:expr),+ $(,)?) => {
        $out.row(&[$(format!("{}", $f)),+])
    };
}

fn exec_of(cfg: &RunConfig) -> Result<Exec, ConfigError> {
    Ok(match cfg.usize("workers")? {
        0 => Exec::from_env(),
        n => Exec::from_workers(n),
    })
}

fn orbit_options(cfg: &RunConfig) -> Result<OrbitOptions, ConfigError> {
    Ok(OrbitOptions {
        n_transient: cfg.usize("n_transient")?,
        n_keep: cfg.usize("n_keep")?,
        tol: cfg.f64("tol")?,
        max_period: cfg.usize("max_period")?,
        divergence_threshold: cfg.f64("divergence_threshold")?,
        lyapunov_iters: cfg.usize("lyapunov_iters")?,
    })
}

fn sweep_spec(cfg: &RunConfig, prefix: &str) -> Result<SweepSpec, ConfigError> {
    let mut s = SweepSpec::new(
        cfg.param(&format!("{prefix}_param"))?,
        cfg.f64(&format!("{prefix}_start"))?,
        cfg.f64(&format!("{prefix}_stop"))?,
        cfg.usize(&format!("{prefix}_n"))?,
    );
    s.direction = if cfg.word("sweep_direction")? == "backward" { Direction::Backward } else { Direction::Forward };
    s.ic_policy = if cfg.word("sweep_ic")? == "fixed" { IcPolicy::FixedIc } else { IcPolicy::InheritFinal };
    s.n_transient = cfg.usize("n_transient")?;
    s.n_keep = cfg.usize("n_keep")?;
    s.ic = cfg.initial_state()?;
    s.cluster_tol = cfg.f64("cluster_tol")?;
    s.divergence_threshold = cfg.f64("divergence_threshold")?;
    Ok(s)
}

fn window(cfg: &RunConfig) -> Result<Window, ConfigError> {
    Ok(Window::new((cfg.f64("window_x_min")?, cfg.f64("window_x_max")?), (cfg.f64("window_y_min")?, cfg.f64("window_y_max")?)))
}

fn network_params(cfg: &RunConfig) -> Result<NetworkParams, ConfigError> {
    let mut np = NetworkParams::new(cfg.map_params()?, cfg.usize("n")?, cfg.usize("r")?, cfg.f64("sigma")?, cfg.f64("mu")?);
    np.hub_in_ring = cfg.bool("hub_in_ring")?;
    Ok(np)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

fn bit(b: bool) -> u8 {
    u8::from(b)
}

fn cmd_fixed_points(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let label = cfg.param("fp_param")?;
    let form = if cfg.word("fp_form")? == "printed" { ResidualForm::Printed } else { ResidualForm::Consistent };
    let opts = SearchOptions { x_min: cfg.f64("fp_x_min")?, x_max: cfg.f64("fp_x_max")?, grid_n: cfg.usize("fp_grid_n")?, tol: cfg.f64("fp_tol")?, form };
    let set = find_fixed_points(&p, &opts)?;
    let pv = p.get(label)?;
    let mut out = Output::new(&format!("{label},x,y,phi,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,type"));
    for fp in &set.roots {
        let r = classify(&p, fp);
        let l = r.eigenvalues;
        row!(out, pv, fp.x, fp.y, fp.phi, l[0].re, l[0].im, l[1].re, l[1].im, l[2].re, l[2].im, r.classification.as_str());
    }
    for t in &set.tangencies {
        out.notes.push(format!("possible tangency at x = {}, y = {}, phi = {}, residual = {}", t.x, t.y, t.phi, t.residual));
    }
    Ok(out)
}

fn cmd_orbit(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let n_transient = cfg.usize("n_transient")?;
    let traj = iterate_with_threshold(&p, cfg.initial_state()?, n_transient, cfg.usize("n_keep")?, cfg.f64("divergence_threshold")?);
    let mut out = Output::new("n,x,y,phi");
    for (i, s) in traj.states.iter().enumerate() {
        row!(out, n_transient + i + 1, s.x, s.y, s.phi);
    }
    if let Some(step) = traj.divergence_step {
        out.notes.push(format!("diverged at step {step}"));
    }
    out.only_diverged = traj.diverged;
    Ok(out)
}

fn cmd_lyapunov(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let label = cfg.param("sweep_param")?;
    let sp = lyapunov_spectrum(&p, cfg.initial_state()?, cfg.usize("n_transient")?, cfg.usize("lyapunov_iters")?)?;
    let mut out = Output::new("param,l1,l2,l3");
    row!(out, p.get(label)?, sp.exponents[0], sp.exponents[1], sp.exponents[2]);
    Ok(out)
}

fn cmd_lyapunov_sweep(cfg: &RunConfig) -> Result<Output, Failure> {
    let rows = lyapunov_sweep(&cfg.map_params()?, &sweep_spec(cfg, "sweep")?, cfg.usize("lyapunov_iters")?, exec_of(cfg)?)?;
    let mut out = Output::new("param,l1,l2,l3");
    for r in &rows {
        let e = r.exponents.unwrap_or([f64::NAN; 3]);
        row!(out, r.param, e[0], e[1], e[2]);
    }
    out.only_diverged = !rows.is_empty() && rows.iter().all(|r| r.exponents.is_none());
    Ok(out)
}

fn cmd_bifurcation(cfg: &RunConfig) -> Result<Output, Failure> {
    let data = bifurcation_sweep(&cfg.map_params()?, &sweep_spec(cfg, "sweep")?, 0, exec_of(cfg)?)?;
    let mut out = Output::new("param,iterate_index,x,diverged");
    for r in &data.rows {
        for (i, x) in r.xs.iter().enumerate() {
            row!(out, r.param, i, x, bit(r.diverged));
        }
    }
    out.only_diverged = !data.rows.is_empty() && data.rows.iter().all(|r| r.diverged);
    Ok(out)
}

fn cmd_sweep2d(cfg: &RunConfig) -> Result<Output, Failure> {
    let opts = Sweep2dOptions { tol: cfg.f64("tol")?, max_period: cfg.usize("max_period")?, lyapunov_iters: cfg.usize("basin_lyapunov_iters")? };
    let grid = sweep2d(&cfg.map_params()?, &sweep_spec(cfg, "sweep")?, &sweep_spec(cfg, "sweep2")?, &opts, exec_of(cfg)?)?;
    let mut out = Output::new("u,v,lmax,period_class");
    for c in &grid.cells {
        row!(out, c.u, c.v, c.lmax, c.period_class);
    }
    out.only_diverged = !grid.cells.is_empty() && grid.cells.iter().all(|c| c.period_class == crate::sweep::CLASS_DIVERGED);
    Ok(out)
}

fn cmd_continue(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let free = cfg.param("cont_free")?;
    let form = if cfg.word("fp_form")? == "printed" { ResidualForm::Printed } else { ResidualForm::Consistent };
    let search = SearchOptions { x_min: cfg.f64("fp_x_min")?, x_max: cfg.f64("fp_x_max")?, grid_n: cfg.usize("fp_grid_n")?, tol: cfg.f64("fp_tol")?, form };
    let roots = find_fixed_points(&p, &search)?.roots;
    let which = cfg.usize("cont_root")?;
    let start = roots
        .get(which)
        .ok_or_else(|| Failure::Numeric(format!("cont_root = {which} but only {} fixed points were found", roots.len())))?
        .state();
    let (lo, hi) = (cfg.f64("cont_min")?, cfg.f64("cont_max")?);
    let opts = ContinuationOptions {
        tol: cfg.f64("cont_tol")?,
        step0: cfg.f64("cont_step0")?,
        step_min: cfg.f64("cont_step_min")?,
        step_max: cfg.f64("cont_step_max")?,
        n_max: cfg.usize("cont_n_max")?,
        direction: cfg.f64("cont_direction")?,
        param_range: if lo.is_finite() || hi.is_finite() { Some((lo, hi)) } else { None },
        ..ContinuationOptions::default()
    };
    let branch = continue_branch(&p, free, start, &opts)?;
    let detect = DetectOptions { ns_band: cfg.f64("ns_band")?, tol: cfg.f64("cont_tol")?, ..DetectOptions::default() };
    let events = detect_codim1(&p, &branch, &detect)?;
    let mut out = Output::new("arclength_index,param,x,y,phi,stable,test_lp,test_pd,test_ns");
    for (i, b) in branch.points.iter().enumerate() {
        row!(out, i, b.param, b.state.x, b.state.y, b.state.phi, bit(b.stable), b.test_lp, b.test_pd, b.test_ns);
    }
    out.notes.push(format!("termination: {:?}", branch.termination));
    let mut ev = String::from("kind,param,x,y,phi\n");
    for e in &events {
        let _ = writeln!(ev, "{},{},{},{},{}", e.kind.as_str(), e.param, e.state.x, e.state.y, e.state.phi);
    }
    out.sidecar = Some(("events", ev));
    Ok(out)
}

fn cmd_critical_set(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let w = window(cfg)?;
    let n = cfg.usize("grid_n")?;
    let image = cfg.bool("critical_image")?;
    if cfg.bool("planar")? {
        let curve = extract_lc2(p.a, p.b, w, n)?;
        let pts = if image { lc_image2(&PlanarParams { a: p.a, b: p.b, c: p.c, k0: p.k0 }, &curve) } else { curve.points };
        let mut out = Output::new("x,y");
        for s in pts {
            row!(out, s.x, s.y);
        }
        Ok(out)
    } else {
        let surf = extract_lc3(&p, w, (cfg.f64("phi_min")?, cfg.f64("phi_max")?), n)?;
        let pts = if image { lc_image3(&p, &surf) } else { surf.points };
        let mut out = Output::new("x,y,phi");
        for s in pts {
            row!(out, s.x, s.y, s.phi);
        }
        Ok(out)
    }
}

fn cmd_preimages(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let opts = PreimageOptions { x_range: (cfg.f64("pre_x_min")?, cfg.f64("pre_x_max")?), grid_n: cfg.usize("pre_grid_n")? };
    let targets = linspace(cfg.f64("target_x_min")?, cfg.f64("target_x_max")?, cfg.usize("target_n")?);
    let (ty, tphi) = (cfg.f64("target_y")?, cfg.f64("target_phi")?);
    if cfg.bool("planar")? {
        let pp = PlanarParams { a: p.a, b: p.b, c: p.c, k0: p.k0 };
        let mut out = Output::new("tx,ty,count");
        for tx in targets {
            row!(out, tx, ty, preimages2(&pp, State2::new(tx, ty), &opts)?.len());
        }
        Ok(out)
    } else {
        let mut out = Output::new("tx,ty,tphi,count");
        for tx in targets {
            row!(out, tx, ty, tphi, preimages3(&p, State::new(tx, ty, tphi), &opts)?.len());
        }
        Ok(out)
    }
}

fn cmd_basin(cfg: &RunConfig) -> Result<Output, Failure> {
    let p = cfg.map_params()?;
    let mut orbit = orbit_options(cfg)?;
    orbit.lyapunov_iters = cfg.usize("basin_lyapunov_iters")?;
    let bc = BasinConfig {
        max_iter: cfg.usize("max_iter")?,
        check_every: cfg.usize("check_every")?,
        orbit,
        match_tol: cfg.f64("match_tol")?,
        ..BasinConfig::default()
    };
    let (nx, ny) = (cfg.usize("basin_nx")?, cfg.usize("basin_ny")?);
    let grid = compute_basin(&p, window(cfg)?, nx, ny, cfg.f64("phi0")?, &bc, exec_of(cfg)?)?;
    let mut out = Output::new("ix,iy,x0,y0,label");
    for iy in 0..ny {
        for ix in 0..nx {
            let s = grid.cell_center(ix, iy);
            row!(out, ix, iy, s.x, s.y, grid.label(ix, iy));
        }
    }
    let mut cat = String::from("label,kind,period,points\n");
    for (i, r) in grid.catalog.iter().enumerate() {
        let desc = if r.is_periodic() {
            r.points.iter().map(|s| format!("{} {} {}", s.x, s.y, s.phi)).collect::<Vec<_>>().join(";")
        } else if let Some(b) = r.bounding_box {
            format!("{} {} {};{} {} {}", b.min.x, b.min.y, b.min.phi, b.max.x, b.max.y, b.max.phi)
        } else {
            String::new()
        };
        let _ = writeln!(cat, "{i},{},{},{desc}", r.kind.as_str(), r.period);
    }
    out.sidecar = Some(("catalog", cat));
    out.only_diverged = grid.labels.iter().all(|&l| l == LABEL_DIVERGED);
    Ok(out)
}

fn cmd_network(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = network_params(cfg)?;
    let seed = cfg.u64("seed")?;
    let (nt, nr, stride) = (cfg.usize("net_transient")?, cfg.usize("net_record")?, cfg.usize("net_stride")?);
    let eps = cfg.f64("eps")?;
    match cfg.word("net_output")? {
        "classify" => {
            let th = Thresholds {
                sync: cfg.f64("sync_threshold")?,
                coherence: cfg.f64("coherence")?,
                eps,
                min_run: cfg.usize("min_run")?,
                max_clusters: cfg.usize("max_clusters")?,
                window: cfg.usize("window")?,
            };
            let seeds: Vec<u64> = (0..cfg.u64("net_seeds")?).map(|i| seed.wrapping_add(i)).collect();
            let diags = classify_seeds(&np, &seeds, nt, nr, &th, exec_of(cfg)?)?;
            let mut out = Output::new("seed,sync_error,cluster_count,state");
            for (s, d) in seeds.iter().zip(&diags) {
                row!(out, s, d.sync_error, d.cluster_count, d.state_class.as_str());
            }
            Ok(out)
        }
        kind => {
            let field = simulate_network(&np, seed, nt, nr, stride)?;
            let mut out;
            match kind {
                "field" => {
                    out = Output::new("t,node,x");
                    for t in 0..field.n_records() {
                        for (node, x) in field.record(t).iter().enumerate() {
                            row!(out, field.steps[t], node, x);
                        }
                    }
                }
                "end" => {
                    out = Output::new("node,x_end,y_end,phi_end");
                    for (node, s) in field.final_states.iter().enumerate() {
                        row!(out, node, s.x, s.y, s.phi);
                    }
                }
                _ => {
                    out = Output::new("i,j,bit");
                    let n = field.n;
                    for (ij, b) in recurrence_matrix(&field.final_x(), eps).iter().enumerate() {
                        row!(out, ij / n, ij % n, bit(*b));
                    }
                }
            }
            if let Some(step) = field.diverged_at {
                out.notes.push(format!("diverged at step {step}"));
            }
            out.only_diverged = field.diverged();
            Ok(out)
        }
    }
}

fn cmd_xk_scan(cfg: &RunConfig) -> Result<Output, Failure> {
    let np = network_params(cfg)?;
    let rows = xk_scan(&np, (cfg.f64("xk_min")?, cfg.f64("xk_max")?), cfg.usize("xk_n")?, cfg.u64("seed")?, cfg.usize("net_transient")?, exec_of(cfg)?)?;
    let mut out = Output::new("k,node,x_end");
    for r in &rows {
        for (node, x) in r.x_end.iter().enumerate() {
            row!(out, r.k, node, x);
        }
    }
    out.only_diverged = !rows.is_empty() && rows.iter().all(|r| r.diverged);
    Ok(out)
}

struct Invocation {
    command: String,
    config: ParsedConfig,
    require_bounded: bool,
    out: Option<String>,
}

fn parse_args(argv: &[String]) -> Result<Invocation, String> {
    let mut it = argv.iter();
    let command = it.next().ok_or_else(|| "missing subcommand".to_string())?.clone();
    if !SUBCOMMANDS.contains(&command.as_str()) {
        return Err(format!("unknown subcommand `{command}`"));
    }
    let mut config_file = None;
    let mut sets = Vec::new();
    let mut require_bounded = false;
    let mut out = None;
    while let Some(flag) = it.next() {
        let mut value = |name: &str| it.next().cloned().ok_or_else(|| format!("{name} needs a value"));
        match flag.as_str() {
            "--config" => config_file = Some(value("--config")?),
            "--set" => sets.push(value("--set")?),
            "--workers" => sets.push(format!("workers={}", value("--workers")?)),
            "--seed" => sets.push(format!("seed={}", value("--seed")?)),
            "--out" => out = Some(value("--out")?),
            "--require-bounded" => require_bounded = true,
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    let mut config = match &config_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
            parse_config(&text).map_err(|e| format!("{path}: {e}"))?
        }
        None => parse_config("").expect("empty config parses"),
    };
    for s in &sets {
        config.config.set_pair(s).map_err(|e| e.to_string())?;
        if let Some(k) = s.split_once('=').map(|(k, _)| k.trim()) {
            config.defaults.retain(|d| *d != k);
        }
    }
    Ok(Invocation { command, config, require_bounded, out })
}

fn header(inv: &Invocation) -> Result<String, ConfigError> {
    let cfg = &inv.config.config;
    let mut h = format!("# chialvo {VERSION}\n# command {}\n# seed {}\n", inv.command, cfg.u64("seed")?);
    if !inv.config.defaults.is_empty() {
        let _ = writeln!(h, "# defaults {}", inv.config.defaults.join(" "));
    }
    h.push_str("# begin config\n");
    for line in cfg.emit().lines() {
        let _ = writeln!(h, "# {line}");
    }
    h.push_str("# end config\n");
    Ok(h)
}

fn dispatch(command: &str, cfg: &RunConfig) -> Result<Output, Failure> {
    match command {
        "fixed-points" => cmd_fixed_points(cfg),
        "orbit" => cmd_orbit(cfg),
        "lyapunov" => cmd_lyapunov(cfg),
        "lyapunov-sweep" => cmd_lyapunov_sweep(cfg),
        "bifurcation" => cmd_bifurcation(cfg),
        "sweep2d" => cmd_sweep2d(cfg),
        "continue" => cmd_continue(cfg),
        "critical-set" => cmd_critical_set(cfg),
        "preimages" => cmd_preimages(cfg),
        "basin" => cmd_basin(cfg),
        "network" => cmd_network(cfg),
        "xk-scan" => cmd_xk_scan(cfg),
        other => Err(Failure::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn execute(inv: &Invocation, stdout: &mut dyn Write) -> Result<bool, Failure> {
    let head = header(inv)?;
    let out = dispatch(&inv.command, &inv.config.config)?;
    let mut text = head.clone();
    text.push_str(&out.data);
    for n in &out.notes {
        let _ = writeln!(text, "# {n}");
    }
    match (&inv.out, &out.sidecar) {
        (Some(path), side) => {
            fs::write(path, &text)?;
            if let Some((name, table)) = side {
                let stem = path.strip_suffix(".csv").unwrap_or(path);
                fs::write(format!("{stem}.{name}.csv"), format!("{head}# table {name}\n{table}"))?;
            }
        }
        (None, side) => {
            stdout.write_all(text.as_bytes())?;
            if let Some((name, table)) = side {
                write!(stdout, "# table {name}\n{table}")?;
            }
        }
    }
    Ok(out.only_diverged)
}

/// Run one invocation; `argv` excludes the program name. Diagnostics go to
/// `stderr` as a single line.
pub fn run_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let inv = match parse_args(argv) {
        Ok(inv) => inv,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}\n{}", usage());
            return EXIT_CONFIG;
        }
    };
    match execute(&inv, stdout) {
        Ok(true) if inv.require_bounded => {
            let _ = writeln!(stderr, "error: every orbit diverged and --require-bounded is set");
            EXIT_DIVERGED
        }
        Ok(_) => EXIT_OK,
        Err(Failure::Config(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Numeric(m)) | Err(Failure::Io(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_NUMERIC
        }
    }
}

/// Run with the process streams.
pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = RunConfig::default();
        assert_eq!(c.f64("k0").unwrap(), -0.44);
        assert!(c.get("sweep_start").is_none());
    }

    #[test]
    fn comment_and_blank_lines() {
        let p = parse_config("# header\n\na = 0.6 # trailing\n").unwrap();
        assert_eq!(p.config.f64("a").unwrap(), 0.6);
        assert!(!p.defaults.contains(&"a"));
        assert!(p.defaults.contains(&"b"));
    }

    #[test]
    fn duplicate_key_names_its_line() {
        let e = parse_config("a = 1\na = 2").unwrap_err();
        assert_eq!(e.line, Some(2));
    }
}
