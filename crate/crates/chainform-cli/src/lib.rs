//! Command-line surface over the chainform library: single-instance
//! analyses, network verification, Monte Carlo validation, and parameter
//! sweeps. Every successful command prints a JSON envelope carrying the
//! resolved configuration and its content hash, so outputs are reproducible
//! from their own provenance. Sweeps default to CSV.

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use chainform::equilibrium::{
    greedy_equilibrium, selection_filter, verify_retailer_nash, LinkMode, VerifyMode,
};
use chainform::montecarlo::{
    validate_closed_form, validate_mean_shift_consumer_delta, validate_variance_gap_deltas,
    Family, StatReport, SupplyDistribution, ValidationTarget,
};
use chainform::planner::{planner_optimum, price_of_stability};
use chainform::pricing::{
    hetero_mean_prices, hetero_variance_prices, homogeneous_price_equilibrium,
    supplier_price_deviation_check,
};
use chainform::{
    expected_welfare, validate_params, Error, GameParams, Network, PriceVector, Result,
};

#[derive(Debug, Parser)]
#[command(
    name = "chainform",
    version,
    about = "Supply network formation: equilibria, planner optimum, price equilibria, simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

/// Instance settings, each available as a flag on every subcommand.
/// Precedence: built-in defaults, then the config file, then flags.
#[derive(Debug, Args)]
struct Flags {
    /// JSON config file with any of the instance keys; flags override it
    #[arg(long, global = true)]
    config: Option<String>,
    /// Number of retailers [default: 1024]
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Number of suppliers [default: longest moment/price list, else 16]
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Capacity of each supplier [default: 2 max(mu)]
    #[arg(long, global = true)]
    s_max: Option<f64>,
    /// Demand intercept [default: m s_max]
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Mean supply, scalar or comma-separated per supplier [default: 2]
    #[arg(long, global = true)]
    mu: Option<String>,
    /// Supply variance, scalar or comma-separated per supplier [default: 1]
    #[arg(long, global = true)]
    sigma2: Option<String>,
    /// Link cost [default: 0.5]
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Wholesale prices, scalar or comma-separated per supplier [default: 0]
    #[arg(long, global = true)]
    w: Option<String>,
    /// Substream seed for simulation [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo draws [default: 100000]
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Yield distribution: scaled_beta | uniform | two_point
    #[arg(long, global = true)]
    family: Option<String>,
    /// Verifier: exhaustive | characterized [default: exhaustive]
    #[arg(long, global = true)]
    oracle: Option<String>,
    /// Link placement for constructed networks: fresh | packed
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Price grid step for deviation certification, in (0, 1] [default: 0.001]
    #[arg(long, global = true)]
    resolution: Option<f64>,
    /// Output format: json | csv (csv applies to sweep only)
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Construct the retailer equilibrium network at the configured prices
    Equilibrium,
    /// Planner-optimal network, welfare, and the stability ratio
    Planner,
    /// Stage-one price equilibrium for the instance shape
    Prices {
        /// Grid-check every supplier's unilateral price deviations
        #[arg(long)]
        certify: bool,
    },
    /// Check a network file for retailer optimality and selection
    Verify {
        /// Network JSON file: {"n": .., "m": .., "links": [[i, j], ..]}
        #[arg(long)]
        network: String,
    },
    /// Validate closed forms against simulation
    Montecarlo {
        /// welfare | retailer:I | supplier:J | moments:J | variance-deltas | mean-consumer-delta
        #[arg(long, default_value = "welfare")]
        target: String,
    },
    /// Evaluate equilibrium and planner metrics over a parameter grid
    Sweep {
        /// Swept parameter: mu | sigma2 | m | c | delta
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Write output to this file instead of stdout
        #[arg(long)]
        out: Option<String>,
    },
}

/// Fully resolved instance configuration; embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub n: usize,
    pub m: usize,
    pub s_max: f64,
    pub delta: f64,
    /// False when delta came from the m s_max coupling, which sweeps over m
    /// then re-apply per grid point.
    pub delta_explicit: bool,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub c: f64,
    pub w: Vec<f64>,
    pub seed: u64,
    pub draws: usize,
    pub family: String,
    pub oracle: String,
    pub mode: String,
    pub resolution: f64,
}

impl Config {
    pub fn params(&self) -> GameParams {
        GameParams::new(
            self.n,
            self.m,
            self.s_max,
            self.delta,
            self.mu.clone(),
            self.sigma2.clone(),
            self.c,
        )
    }

    pub fn prices(&self) -> Result<PriceVector> {
        PriceVector::new(self.w.clone())
    }

    fn family(&self) -> Family {
        match self.family.as_str() {
            "uniform" => Family::Uniform,
            "two_point" => Family::TwoPoint,
            _ => Family::ScaledBeta,
        }
    }

    fn oracle(&self) -> VerifyMode {
        if self.oracle == "characterized" {
            VerifyMode::Characterized
        } else {
            VerifyMode::Exhaustive
        }
    }

    fn link_mode(&self) -> LinkMode {
        if self.mode == "packed" {
            LinkMode::Packed
        } else {
            LinkMode::Fresh
        }
    }

    /// Content hash of the resolved configuration.
    pub fn hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(body.as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Pre-resolution settings: every field optional, later sources win.
#[derive(Debug, Clone, Default)]
struct Settings {
    n: Option<usize>,
    m: Option<usize>,
    s_max: Option<f64>,
    delta: Option<f64>,
    mu: Option<Vec<f64>>,
    sigma2: Option<Vec<f64>>,
    c: Option<f64>,
    w: Option<Vec<f64>>,
    seed: Option<u64>,
    draws: Option<usize>,
    family: Option<String>,
    oracle: Option<String>,
    mode: Option<String>,
    resolution: Option<f64>,
}

impl Settings {
    fn merge(self, over: Settings) -> Settings {
        Settings {
            n: over.n.or(self.n),
            m: over.m.or(self.m),
            s_max: over.s_max.or(self.s_max),
            delta: over.delta.or(self.delta),
            mu: over.mu.or(self.mu),
            sigma2: over.sigma2.or(self.sigma2),
            c: over.c.or(self.c),
            w: over.w.or(self.w),
            seed: over.seed.or(self.seed),
            draws: over.draws.or(self.draws),
            family: over.family.or(self.family),
            oracle: over.oracle.or(self.oracle),
            mode: over.mode.or(self.mode),
            resolution: over.resolution.or(self.resolution),
        }
    }
}

fn invalid(detail: impl Into<String>) -> Error {
    Error::InvalidParams {
        detail: detail.into(),
    }
}

fn parse_list(name: &str, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        let x: f64 = piece
            .parse()
            .map_err(|_| invalid(format!("{name}: cannot parse '{piece}' as a number")))?;
        out.push(x);
    }
    if out.is_empty() {
        return Err(invalid(format!("{name}: empty list")));
    }
    Ok(out)
}

fn settings_from_flags(f: &Flags) -> Result<Settings> {
    Ok(Settings {
        n: f.n,
        m: f.m,
        s_max: f.s_max,
        delta: f.delta,
        mu: f.mu.as_deref().map(|t| parse_list("mu", t)).transpose()?,
        sigma2: f
            .sigma2
            .as_deref()
            .map(|t| parse_list("sigma2", t))
            .transpose()?,
        c: f.c,
        w: f.w.as_deref().map(|t| parse_list("w", t)).transpose()?,
        seed: f.seed,
        draws: f.draws,
        family: f.family.clone(),
        oracle: f.oracle.clone(),
        mode: f.mode.clone(),
        resolution: f.resolution,
    })
}

fn json_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| invalid(format!("config key '{key}' must be a non-negative integer")))
}

fn json_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| invalid(format!("config key '{key}' must be a number")))
}

fn json_numbers(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Number(_) => Ok(vec![json_f64(key, v)?]),
        Value::Array(items) => {
            if items.is_empty() {
                return Err(invalid(format!("config key '{key}' must not be empty")));
            }
            items.iter().map(|x| json_f64(key, x)).collect()
        }
        _ => Err(invalid(format!(
            "config key '{key}' must be a number or an array of numbers"
        ))),
    }
}

fn json_string(key: &str, v: &Value) -> Result<String> {
    v.as_str()
        .map(str::to_owned)
        .ok_or_else(|| invalid(format!("config key '{key}' must be a string")))
}

fn settings_from_file(path: &str) -> Result<Settings> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config file {path}: {e}")))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("config file {path} is not valid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| invalid(format!("config file {path} must hold a JSON object")))?;
    let mut s = Settings::default();
    for (key, value) in obj {
        match key.as_str() {
            "n" => s.n = Some(json_usize(key, value)?),
            "m" => s.m = Some(json_usize(key, value)?),
            "s_max" => s.s_max = Some(json_f64(key, value)?),
            "delta" => s.delta = Some(json_f64(key, value)?),
            "mu" => s.mu = Some(json_numbers(key, value)?),
            "sigma2" => s.sigma2 = Some(json_numbers(key, value)?),
            "c" => s.c = Some(json_f64(key, value)?),
            "w" => s.w = Some(json_numbers(key, value)?),
            "seed" => s.seed = Some(json_usize(key, value)? as u64),
            "draws" => s.draws = Some(json_usize(key, value)?),
            "family" => s.family = Some(json_string(key, value)?),
            "oracle" => s.oracle = Some(json_string(key, value)?),
            "mode" => s.mode = Some(json_string(key, value)?),
            "resolution" => s.resolution = Some(json_f64(key, value)?),
            other => return Err(invalid(format!("unknown config key '{other}'"))),
        }
    }
    Ok(s)
}

fn broadcast(name: &str, v: Vec<f64>, m: usize) -> Result<Vec<f64>> {
    if v.len() == m {
        Ok(v)
    } else if v.len() == 1 {
        Ok(vec![v[0]; m])
    } else {
        Err(Error::ShapeMismatch {
            detail: format!("{name} has {} entries but m = {m}", v.len()),
        })
    }
}

fn check_choice(name: &str, value: &str, allowed: &[&str]) -> Result<()> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be one of {}, got '{value}'",
            allowed.join(" | ")
        )))
    }
}

/// Resolve settings into a full configuration. `dims` pins (n, m) when the
/// instance size comes from a network file.
fn resolve(s: &Settings, dims: Option<(usize, usize)>) -> Result<Config> {
    let mu = s.mu.clone().unwrap_or_else(|| vec![2.0]);
    let sigma2 = s.sigma2.clone().unwrap_or_else(|| vec![1.0]);
    let w_raw = s.w.clone();
    if let (Some((_, fm)), Some(em)) = (dims, s.m) {
        if fm != em {
            return Err(Error::ShapeMismatch {
                detail: format!("--m {em} conflicts with the network file's m = {fm}"),
            });
        }
    }
    if let (Some((fnn, _)), Some(en)) = (dims, s.n) {
        if fnn != en {
            return Err(Error::ShapeMismatch {
                detail: format!("--n {en} conflicts with the network file's n = {fnn}"),
            });
        }
    }
    let m = dims.map(|d| d.1).or(s.m).unwrap_or_else(|| {
        let longest = mu
            .len()
            .max(sigma2.len())
            .max(w_raw.as_ref().map_or(0, Vec::len));
        if longest > 1 {
            longest
        } else {
            16
        }
    });
    let n = dims.map(|d| d.0).or(s.n).unwrap_or(1024);
    let mu = broadcast("mu", mu, m)?;
    let sigma2 = broadcast("sigma2", sigma2, m)?;
    let w = broadcast("w", w_raw.unwrap_or_else(|| vec![0.0]), m)?;
    let max_mu = mu.iter().copied().fold(0.0f64, f64::max);
    let s_max = s.s_max.unwrap_or(2.0 * max_mu);
    let delta_explicit = s.delta.is_some();
    let delta = s.delta.unwrap_or(m as f64 * s_max);
    let family = s.family.clone().unwrap_or_else(|| "scaled_beta".into());
    check_choice("family", &family, &["scaled_beta", "uniform", "two_point"])?;
    let oracle = s.oracle.clone().unwrap_or_else(|| "exhaustive".into());
    check_choice("oracle", &oracle, &["exhaustive", "characterized"])?;
    let mode = s.mode.clone().unwrap_or_else(|| "fresh".into());
    check_choice("mode", &mode, &["fresh", "packed"])?;
    let resolution = s.resolution.unwrap_or(1e-3);
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(invalid(format!(
            "resolution must lie in (0, 1], got {resolution}"
        )));
    }
    Ok(Config {
        n,
        m,
        s_max,
        delta,
        delta_explicit,
        mu,
        sigma2,
        c: s.c.unwrap_or(0.5),
        w,
        seed: s.seed.unwrap_or(42),
        draws: s.draws.unwrap_or(100_000),
        family,
        oracle,
        mode,
        resolution,
    })
}

fn validated_params(cfg: &Config) -> Result<GameParams> {
    let p = cfg.params();
    let report = validate_params(&p);
    if !report.ok() {
        let detail = serde_json::to_string(&report.violations).expect("report serializes");
        return Err(invalid(detail));
    }
    Ok(p)
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn envelope(cfg: &Config, result: Value) -> String {
    let doc = json!({
        "config_hash": cfg.hash(),
        "config": cfg,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("envelope serializes");
    text.push('\n');
    text
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::IndexOutOfRange { .. } => "index_out_of_range",
        Error::DuplicateLink { .. } => "duplicate_link",
        Error::MissingLink { .. } => "missing_link",
        Error::NegativePrice { .. } => "negative_price",
        Error::InsufficientRetailers { .. } => "insufficient_retailers",
        Error::InsufficientSuppliers { .. } => "insufficient_suppliers",
        Error::SizeLimit { .. } => "size_limit",
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::BoundaryOptimum { .. } => "boundary_optimum",
        Error::InfeasibleMoments { .. } => "infeasible_moments",
        Error::InvalidParams { .. } => "invalid_params",
    }
}

fn error_doc(kind: &str, detail: &str) -> String {
    let doc = json!({ "error": { "kind": kind, "detail": detail } });
    let mut text = serde_json::to_string_pretty(&doc).expect("error serializes");
    text.push('\n');
    text
}

/// Everything a command run produces; `main` forwards the streams verbatim.
#[derive(Debug)]
pub struct RunOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_args(args: &[String]) -> RunOutcome {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => RunOutcome {
                    code: 0,
                    stdout: e.to_string(),
                    stderr: String::new(),
                },
                _ => RunOutcome {
                    code: 1,
                    stdout: String::new(),
                    stderr: error_doc("usage", &e.to_string()),
                },
            };
        }
    };
    match execute(&cli) {
        Ok(stdout) => RunOutcome {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => RunOutcome {
            code: if e.is_size_limit() { 2 } else { 1 },
            stdout: String::new(),
            stderr: error_doc(error_kind(&e), &e.to_string()),
        },
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let mut settings = Settings::default();
    if let Some(path) = &cli.flags.config {
        settings = settings.merge(settings_from_file(path)?);
    }
    settings = settings.merge(settings_from_flags(&cli.flags)?);

    let format = cli.flags.format.as_deref().unwrap_or(match cli.command {
        Command::Sweep { .. } => "csv",
        _ => "json",
    });
    check_choice("format", format, &["json", "csv"])?;
    if format == "csv" && !matches!(cli.command, Command::Sweep { .. }) {
        return Err(invalid("csv output is only available for sweep"));
    }

    match &cli.command {
        Command::Equilibrium => {
            let cfg = resolve(&settings, None)?;
            let result = cmd_equilibrium(&cfg)?;
            Ok(envelope(&cfg, result))
        }
        Command::Planner => {
            let cfg = resolve(&settings, None)?;
            let result = cmd_planner(&cfg)?;
            Ok(envelope(&cfg, result))
        }
        Command::Prices { certify } => {
            let cfg = resolve(&settings, None)?;
            let result = cmd_prices(&cfg, *certify)?;
            Ok(envelope(&cfg, result))
        }
        Command::Verify { network } => {
            let g = load_network(network)?;
            let cfg = resolve(&settings, Some((g.n, g.m)))?;
            let result = cmd_verify(&cfg, &g)?;
            Ok(envelope(&cfg, result))
        }
        Command::Montecarlo { target } => {
            let cfg = resolve(&settings, None)?;
            let result = cmd_montecarlo(&cfg, target)?;
            Ok(envelope(&cfg, result))
        }
        Command::Sweep {
            param,
            from,
            to,
            step,
            out,
        } => {
            let text = cmd_sweep(&settings, param, *from, *to, *step, format)?;
            match out {
                Some(path) => {
                    std::fs::write(path, &text)
                        .map_err(|e| invalid(format!("cannot write {path}: {e}")))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
    }
}

fn cmd_equilibrium(cfg: &Config) -> Result<Value> {
    let p = validated_params(cfg)?;
    let w = cfg.prices()?;
    let built = greedy_equilibrium(&p, &w, cfg.link_mode())?;
    let verdict = verify_retailer_nash(&p, &built.network, &w, cfg.oracle())?;
    let welfare = expected_welfare(&p, &built.network, &w);
    Ok(json!({
        "k": built.k,
        "degrees": built.degrees,
        "links": built.network.link_count(),
        "likelihoods": built.likelihoods,
        "selected": built.selected,
        "steps": built.steps,
        "certified": verdict.certified,
        "violations": verdict.violations,
        "welfare": welfare,
        "network": built.network,
    }))
}

fn cmd_planner(cfg: &Config) -> Result<Value> {
    let p = validated_params(cfg)?;
    let sol = planner_optimum(&p)?;
    let pos = price_of_stability(&p).ok();
    Ok(json!({
        "y": sol.y,
        "k_opt": sol.k_opt,
        "welfare_opt": sol.welfare,
        "pos": pos,
        "network": sol.network,
    }))
}

fn cmd_prices(cfg: &Config, certify: bool) -> Result<Value> {
    let p = validated_params(cfg)?;
    let (case, value, w_star) = if p.means_equal() && p.variances_equal() {
        let eq = homogeneous_price_equilibrium(&p)?;
        let w = eq.w_star.clone();
        ("homogeneous", to_value(&eq), w)
    } else if p.means_equal() {
        let eq = hetero_variance_prices(&p)?;
        let w = eq.w_star.clone();
        ("hetero_variance", to_value(&eq), w)
    } else if p.variances_equal() {
        let eq = hetero_mean_prices(&p)?;
        let w = eq.w_star.clone();
        ("hetero_mean", to_value(&eq), w)
    } else {
        return Err(Error::ShapeMismatch {
            detail: "price equilibria cover symmetric instances and instances \
                     with a single improved supplier"
                .into(),
        });
    };
    let mut result = json!({ "case": case, "equilibrium": value });
    if certify {
        let report = supplier_price_deviation_check(&p, &w_star, cfg.resolution)?;
        result["certification"] = to_value(&report);
    }
    Ok(result)
}

/// Raw network file shape; rebuilt through the validating constructor.
#[derive(serde::Deserialize)]
struct NetworkFile {
    n: usize,
    m: usize,
    links: Vec<(usize, usize)>,
}

fn load_network(path: &str) -> Result<Network> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read network file {path}: {e}")))?;
    let file: NetworkFile = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("network file {path} is not valid: {e}")))?;
    Network::new(file.n, file.m, &file.links)
}

fn cmd_verify(cfg: &Config, g: &Network) -> Result<Value> {
    let p = validated_params(cfg)?;
    let w = cfg.prices()?;
    let report = verify_retailer_nash(&p, g, &w, cfg.oracle())?;
    let selected = selection_filter(&p, g, &w);
    Ok(json!({
        "certified": report.certified,
        "selected": selected,
        "mode": report.mode,
        "violations": report.violations,
        "k": g.active_count(),
        "degrees": g.degrees(),
    }))
}

fn parse_target(text: &str) -> Result<Option<ValidationTarget>> {
    if text == "welfare" {
        return Ok(Some(ValidationTarget::Welfare));
    }
    if text == "variance-deltas" || text == "mean-consumer-delta" {
        return Ok(None);
    }
    if let Some((head, tail)) = text.split_once(':') {
        let idx: usize = tail
            .parse()
            .map_err(|_| invalid(format!("target index '{tail}' is not an integer")))?;
        return match head {
            "retailer" => Ok(Some(ValidationTarget::RetailerPayoff { retailer: idx })),
            "supplier" => Ok(Some(ValidationTarget::SupplierRevenue { supplier: idx })),
            "moments" => Ok(Some(ValidationTarget::Moments { supplier: idx })),
            _ => Err(invalid(format!("unknown target '{text}'"))),
        };
    }
    Err(invalid(format!(
        "unknown target '{text}'; use welfare, retailer:I, supplier:J, moments:J, \
         variance-deltas, or mean-consumer-delta"
    )))
}

fn cmd_montecarlo(cfg: &Config, target: &str) -> Result<Value> {
    let p = validated_params(cfg)?;
    let reports: Vec<StatReport> = match parse_target(target)? {
        Some(t) => {
            let w = cfg.prices()?;
            let g = greedy_equilibrium(&p, &w, cfg.link_mode())?.network;
            let dist = SupplyDistribution::new(cfg.family(), &p, cfg.seed)?;
            validate_closed_form(&p, &g, &w, &dist, cfg.draws, t)?
        }
        None if target == "variance-deltas" => {
            validate_variance_gap_deltas(&p, cfg.family(), cfg.seed, cfg.draws)?
        }
        None => vec![validate_mean_shift_consumer_delta(
            &p,
            cfg.family(),
            cfg.seed,
            cfg.draws,
        )?],
    };
    let all_pass = reports.iter().all(|r| r.pass);
    Ok(json!({
        "target": target,
        "reports": reports,
        "all_pass": all_pass,
    }))
}

// === sweep ===

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    links: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    welfare_eq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_opt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    welfare_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified: Option<bool>,
    note: String,
}

const SWEEP_PARAMS: [&str; 5] = ["mu", "sigma2", "m", "c", "delta"];

fn uniform_scalar(name: &str, v: &Option<Vec<f64>>) -> Result<Option<f64>> {
    match v {
        None => Ok(None),
        Some(list) => {
            let first = list[0];
            if list.iter().all(|&x| x == first) {
                Ok(Some(first))
            } else {
                Err(invalid(format!(
                    "sweep needs a symmetric base instance; {name} is not uniform"
                )))
            }
        }
    }
}

fn sweep_point(base: &Settings, param: &str, value: f64) -> Result<SweepRow> {
    let mut s = base.clone();
    match param {
        "mu" => s.mu = Some(vec![value]),
        "sigma2" => s.sigma2 = Some(vec![value]),
        "c" => s.c = Some(value),
        "delta" => s.delta = Some(value),
        "m" => {
            if (value - value.round()).abs() > 1e-9 || value < 1.0 {
                return Err(invalid(format!("m grid value {value} is not a positive integer")));
            }
            s.m = Some(value.round() as usize);
        }
        _ => unreachable!("param checked by caller"),
    }
    let cfg = resolve(&s, None)?;
    let p = validated_params(&cfg)?;
    let eq = homogeneous_price_equilibrium(&p)?;
    let opt = planner_optimum(&p)?;
    let pos = price_of_stability(&p)?;
    let built = greedy_equilibrium(&p, &eq.w_star, LinkMode::Fresh)?;
    let verdict = verify_retailer_nash(&p, &built.network, &eq.w_star, VerifyMode::Characterized)?;
    Ok(SweepRow {
        value,
        z: Some(eq.z),
        k_star: Some(eq.k_star),
        boundary: Some(eq.boundary),
        degree: Some(eq.degree),
        links: Some(eq.links),
        welfare_eq: Some(eq.welfare),
        y: Some(opt.y),
        k_opt: Some(opt.k_opt),
        welfare_opt: Some(opt.welfare),
        pos: Some(pos),
        certified: Some(verdict.certified),
        note: String::new(),
    })
}

fn skip_row(value: f64, reason: &str) -> SweepRow {
    SweepRow {
        value,
        z: None,
        k_star: None,
        boundary: None,
        degree: None,
        links: None,
        welfare_eq: None,
        y: None,
        k_opt: None,
        welfare_opt: None,
        pos: None,
        certified: None,
        note: format!("skipped: {}", reason.replace(',', ";")),
    }
}

fn opt_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn sweep_csv(hash: &str, cfg_json: &str, spec: &str, rows: &[SweepRow], param: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str(&format!("# config={cfg_json}\n"));
    out.push_str(&format!("# {spec}\n"));
    out.push_str(
        "param,value,z,k_star,boundary,degree,links,welfare_eq,y,k_opt,welfare_opt,pos,certified,note\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{param},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.value,
            opt_cell(&r.z),
            opt_cell(&r.k_star),
            opt_cell(&r.boundary),
            opt_cell(&r.degree),
            opt_cell(&r.links),
            opt_cell(&r.welfare_eq),
            opt_cell(&r.y),
            opt_cell(&r.k_opt),
            opt_cell(&r.welfare_opt),
            opt_cell(&r.pos),
            opt_cell(&r.certified),
            r.note,
        ));
    }
    out
}

fn cmd_sweep(
    settings: &Settings,
    param: &str,
    from: f64,
    to: f64,
    step: f64,
    format: &str,
) -> Result<String> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(invalid(format!(
            "sweep param must be one of {}, got '{param}'",
            SWEEP_PARAMS.join(" | ")
        )));
    }
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() {
        return Err(invalid("sweep needs finite bounds and a positive step"));
    }
    let count = ((to - from) / step + 1e-9).floor();
    if count < 0.0 {
        return Err(invalid("sweep range is empty: to < from"));
    }

    // collapse the base to scalars so every grid point re-broadcasts cleanly
    let mut base = settings.clone();
    base.mu = uniform_scalar("mu", &base.mu)?.map(|x| vec![x]);
    base.sigma2 = uniform_scalar("sigma2", &base.sigma2)?.map(|x| vec![x]);
    base.w = uniform_scalar("w", &base.w)?.map(|x| vec![x]);

    let base_cfg = resolve(&base, None)?;
    let hash = base_cfg.hash();
    let cfg_json = serde_json::to_string(&base_cfg).expect("config serializes");

    let values: Vec<f64> = (0..=count as usize)
        .map(|i| from + i as f64 * step)
        .collect();
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&v| sweep_point(&base, param, v).unwrap_or_else(|e| skip_row(v, &e.to_string())))
        .collect();

    if format == "json" {
        let doc = json!({
            "config_hash": hash,
            "config": base_cfg,
            "result": {
                "param": param,
                "from": from,
                "to": to,
                "step": step,
                "rows": rows,
            },
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("sweep serializes");
        text.push('\n');
        Ok(text)
    } else {
        let spec = format!("param={param} from={from} to={to} step={step}");
        Ok(sweep_csv(&hash, &cfg_json, &spec, &rows, param))
    }
}
