//! Run configuration: `key=value` files overridden by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Symbol, e.g. `dilation:0.5`, `lens:0.5`, `cusp`, `prod(lens:0.5,lens:0.5)`.
    #[arg(long, global = true)]
    pub symbol: Option<String>,
    /// Basis size of the finest one-variable truncation.
    #[arg(long = "K", global = true)]
    pub k: Option<usize>,
    /// Total degree of the graded basis for multi-variable symbols.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    #[arg(long = "n-max", global = true)]
    pub n_max: Option<usize>,
    /// Exponent for `ln F(n)` against `n^p`.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// What goes to standard output.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub suite: Option<String>,
    /// Fit window `start:end` (1-based, inclusive).
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// `monomial` or `rational`; chosen from the boundary contact when absent.
    #[arg(long, global = true)]
    pub route: Option<String>,
    /// Input CSV; repeat for two tensor factors.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Dimension used for the candidate rate families.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Comma-separated diagonal for the covering oracle.
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// Radius for a single covering count.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Also solve at half the grid and report the change.
    #[arg(long, global = true)]
    pub refine: bool,
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Effective settings after merging the file and the flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub symbol: Option<String>,
    pub k: usize,
    pub degree: Option<usize>,
    pub n_max: Option<usize>,
    pub p: Option<f64>,
    pub grid: usize,
    pub out: PathBuf,
    pub format: Format,
    pub suite: Option<String>,
    pub window: Option<(usize, usize)>,
    pub route: Option<String>,
    pub input: Vec<PathBuf>,
    pub dim: Option<usize>,
    pub sigma: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub refine: bool,
}

pub const MAX_K: usize = 4096;
pub const MAX_DEGREE: usize = 90;
pub const MAX_N: usize = 1 << 22;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::usage(msg.into())
}

fn read_file(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.parse().map_err(|_| usage(format!("config key {key}: cannot parse {v:?}")))
}

fn parse_window(s: &str) -> Result<(usize, usize), Failure> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("window {s:?} must look like start:end")))?;
    let a: usize = num("window", a.trim())?;
    let b: usize = num("window", b.trim())?;
    if a == 0 || b < a {
        return Err(usage(format!("window {s:?} must satisfy 1 <= start <= end")));
    }
    Ok((a, b))
}

fn parse_sigma(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(|x| num("sigma", x.trim())).collect()
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<RunConfig, Failure> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => BTreeMap::new(),
        };
        const KEYS: &[&str] = &[
            "symbol", "K", "degree", "n-max", "p", "grid", "out", "format", "suite", "window", "route", "input",
            "dim", "sigma", "eps", "refine",
        ];
        if let Some(k) = file.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(usage(format!("unknown config key {k:?}")));
        }
        let get = |k: &str| file.get(k).map(String::as_str);
        let opt_num = |k: &str| -> Result<Option<usize>, Failure> { get(k).map(|v| num(k, v)).transpose() };

        let cfg = RunConfig {
            symbol: flags.symbol.clone().or_else(|| get("symbol").map(str::to_string)),
            k: match flags.k {
                Some(k) => k,
                None => opt_num("K")?.unwrap_or(256),
            },
            degree: flags.degree.or(opt_num("degree")?),
            n_max: flags.n_max.or(opt_num("n-max")?),
            p: match flags.p {
                Some(p) => Some(p),
                None => get("p").map(|v| num("p", v)).transpose()?,
            },
            grid: match flags.grid {
                Some(g) => g,
                None => opt_num("grid")?.unwrap_or(512),
            },
            out: flags
                .out
                .clone()
                .or_else(|| get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out")),
            format: match flags.format {
                Some(f) => f,
                None => match get("format") {
                    Some(v) => Format::parse(v).ok_or_else(|| usage(format!("format {v:?} must be csv or json")))?,
                    None => Format::Json,
                },
            },
            suite: flags.suite.clone().or_else(|| get("suite").map(str::to_string)),
            window: match flags.window.as_deref().or(get("window")) {
                Some(w) => Some(parse_window(w)?),
                None => None,
            },
            route: flags.route.clone().or_else(|| get("route").map(str::to_string)),
            input: if flags.input.is_empty() {
                get("input")
                    .map(|v| v.split(',').map(|s| PathBuf::from(s.trim())).collect())
                    .unwrap_or_default()
            } else {
                flags.input.clone()
            },
            dim: flags.dim.or(opt_num("dim")?),
            sigma: match flags.sigma.as_deref().or(get("sigma")) {
                Some(s) => Some(parse_sigma(s)?),
                None => None,
            },
            eps: match flags.eps {
                Some(e) => Some(e),
                None => get("eps").map(|v| num("eps", v)).transpose()?,
            },
            refine: flags.refine || get("refine").is_some_and(|v| v == "true" || v == "1"),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Failure> {
        if !(2..=MAX_K).contains(&self.k) {
            return Err(usage(format!("K must lie in 2..={MAX_K}")));
        }
        if let Some(d) = self.degree {
            if !(2..=MAX_DEGREE).contains(&d) {
                return Err(usage(format!("degree must lie in 2..={MAX_DEGREE}")));
            }
        }
        if let Some(n) = self.n_max {
            if !(1..=MAX_N).contains(&n) {
                return Err(usage(format!("n-max must lie in 1..={MAX_N}")));
            }
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(usage("p must lie in (0, 1]"));
            }
        }
        if !(hardy_entropy::capacity::MIN_GRID..=hardy_entropy::capacity::MAX_GRID).contains(&self.grid) {
            return Err(usage(format!(
                "grid must lie in {}..={}",
                hardy_entropy::capacity::MIN_GRID,
                hardy_entropy::capacity::MAX_GRID
            )));
        }
        if let Some(r) = &self.route {
            if r != "monomial" && r != "rational" {
                return Err(usage("route must be monomial or rational"));
            }
        }
        if self.dim == Some(0) {
            return Err(usage("dim must be at least 1"));
        }
        Ok(())
    }

    /// The settings as they were applied, for embedding in reports.
    pub fn echo(&self) -> Value {
        json!({
            "symbol": self.symbol,
            "K": self.k,
            "degree": self.degree,
            "n-max": self.n_max,
            "p": self.p,
            "grid": self.grid,
            "out": self.out.display().to_string(),
            "format": self.format.name(),
            "suite": self.suite,
            "window": self.window.map(|(a, b)| format!("{a}:{b}")),
            "route": self.route,
            "input": self.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "dim": self.dim,
            "sigma": self.sigma,
            "eps": self.eps,
            "refine": self.refine,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments() {
        let m = parse_pairs("# run\nsymbol = lens:0.5\n\nK=512 # finest\n").unwrap();
        assert_eq!(m["symbol"], "lens:0.5");
        assert_eq!(m["K"], "512");
        assert!(parse_pairs("oops").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "symbol=lens:0.5\nK=128\ngrid=256\nwindow=3:40\n").unwrap();
        let flags = Flags {
            config: Some(path),
            k: Some(64),
            ..Flags::default()
        };
        let c = RunConfig::resolve(&flags).unwrap();
        assert_eq!(c.k, 64);
        assert_eq!(c.grid, 256);
        assert_eq!(c.symbol.as_deref(), Some("lens:0.5"));
        assert_eq!(c.window, Some((3, 40)));
    }

    #[test]
    fn envelopes_are_enforced() {
        let bad = |f: Flags| RunConfig::resolve(&f).is_err();
        assert!(bad(Flags { k: Some(1 << 20), ..Flags::default() }));
        assert!(bad(Flags { grid: Some(16), ..Flags::default() }));
        assert!(bad(Flags { p: Some(1.5), ..Flags::default() }));
        assert!(bad(Flags { window: Some("9:3".into()), ..Flags::default() }));
        assert!(bad(Flags { route: Some("fourier".into()), ..Flags::default() }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "colour=blue\n").unwrap();
        assert!(RunConfig::resolve(&Flags { config: Some(path), ..Flags::default() }).is_err());
    }
}
