//! `hentropy`: approximation and entropy numbers of composition operators
//! from the command line.
//!
//! Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 verification failure.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use hardy_entropy::asymptotics::{
    capacity_laws, extract_beta, extract_gamma_window, fit_entropy_profile, fit_log_rate_model,
    fit_rate_model, fit_singular_profile, line_fit, FitWindow, RateFit, MIN_BETA_WINDOW,
};
use hardy_entropy::capacity::{rasterize_image, symbol_capacity};
use hardy_entropy::carl::{carl_profile, carl_profile_auto, covering_oracle, entropy_bracket, EntropyProfile};
use hardy_entropy::hardy_matrix::build_matrix_nd;
use hardy_entropy::spectrum::{
    agreeing_prefix, convergence_study, singular_values, tensor_spectrum, Route, SingularProfile,
};
use hardy_entropy::symbols::{MultiSymbol, SymbolSpec};
use hardy_entropy::verify::{run_suite, Context};
use hardy_entropy::VERSION;

use config::{Flags, Format, RunConfig};
use plot::{line_plot, Series};

#[derive(Parser)]
#[command(name = "hentropy", version, about = "Approximation and entropy numbers of composition operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Singular values of a truncated composition operator.
    Spectrum,
    /// Carl transform of a singular-value profile.
    Entropy,
    /// Decay-family selection for a_n and F(n).
    Fit,
    /// Green capacity of the image of the disk.
    Capacity,
    /// Singular values of a product of two one-variable operators.
    Tensor,
    /// Run a named verification suite.
    Verify {
        /// Suite name; `--suite` works too.
        name: Option<String>,
    },
    /// Covering-number bracket of entropy numbers of a small diagonal.
    Oracle,
}

/// A message with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    pub fn usage(msg: String) -> Failure {
        Failure { code: 2, msg }
    }
}

impl From<hardy_entropy::Error> for Failure {
    fn from(e: hardy_entropy::Error) -> Failure {
        Failure {
            code: if e.is_usage() { 2 } else { 3 },
            msg: e.to_string(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = RunConfig::resolve(&cli.flags).and_then(|cfg| run(&cli.command, &cfg));
    match result {
        Ok(code) => {
            eprintln!("done in {:.2}s", started.elapsed().as_secs_f64());
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("hentropy: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: &Command, cfg: &RunConfig) -> Outcome<u8> {
    match cmd {
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Entropy => cmd_entropy(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Capacity => cmd_capacity(cfg),
        Command::Tensor => cmd_tensor(cfg),
        Command::Verify { name } => cmd_verify(cfg, name.as_deref()),
        Command::Oracle => cmd_oracle(cfg),
    }
}

fn write_out(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
    fs::create_dir_all(&cfg.out).map_err(|e| Failure::usage(format!("cannot create {}: {e}", cfg.out.display())))?;
    let path = cfg.out.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn report(command: &str, cfg: &RunConfig, body: Value) -> Value {
    let mut v = json!({
        "command": command,
        "version": VERSION,
        "config": cfg.echo(),
    });
    if let (Some(m), Value::Object(b)) = (v.as_object_mut(), body) {
        m.extend(b);
    }
    v
}

/// Writes `<stem>.json` and `<stem>.csv`, then prints the one selected by `--format`.
fn finish(cfg: &RunConfig, stem: &str, rep: &Value, csv: &[u8]) -> Outcome<()> {
    let text = serde_json::to_string_pretty(rep).expect("reports serialize") + "\n";
    write_out(cfg, &format!("{stem}.json"), text.as_bytes())?;
    write_out(cfg, &format!("{stem}.csv"), csv)?;
    match cfg.format {
        Format::Json => print!("{text}"),
        Format::Csv => print!("{}", String::from_utf8_lossy(csv)),
    }
    Ok(())
}

fn need_symbol(cfg: &RunConfig) -> Outcome<&str> {
    cfg.symbol
        .as_deref()
        .ok_or_else(|| Failure::usage("this command needs --symbol (or --input)".into()))
}

fn is_product(s: &str) -> bool {
    s.trim_start().starts_with("prod(")
}

fn route_for(cfg: &RunConfig, spec: &SymbolSpec) -> Outcome<Route> {
    Ok(match cfg.route.as_deref() {
        Some("monomial") => Route::Monomial,
        Some("rational") => Route::Rational,
        _ => Route::auto(spec)?,
    })
}

/// Profile of a symbol string plus a description of how it was computed.
fn symbol_spectrum(cfg: &RunConfig, symbol: &str) -> Outcome<(SingularProfile, Value)> {
    if is_product(symbol) {
        let m: MultiSymbol = symbol.parse()?;
        let d = cfg.degree.unwrap_or(16);
        let coarse = singular_values(&build_matrix_nd(&m, d / 2)?)?;
        let mut fine = singular_values(&build_matrix_nd(&m, d)?)?;
        let window = agreeing_prefix(&coarse, &fine);
        fine.converged_upto = window;
        let meta = json!({
            "symbol": m.to_string(),
            "route": "graded-monomial",
            "degrees": [d / 2, d],
            "converged_upto": window,
            "noise_floor": fine.noise_floor,
        });
        return Ok((fine, meta));
    }
    let spec: SymbolSpec = symbol.parse()?;
    let route = route_for(cfg, &spec)?;
    let ks = [cfg.k / 2, cfg.k];
    let r = convergence_study(&spec, &ks, route)?;
    let meta = json!({
        "symbol": r.symbol,
        "route": route.to_string(),
        "K": ks,
        "windows": r.windows,
        "converged_upto": r.converged_upto,
        "noise_floor": r.profile.noise_floor,
    });
    Ok((r.profile, meta))
}

fn read_input(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

enum Loaded {
    Singular(SingularProfile),
    Entropy(EntropyProfile),
}

fn load_csv(path: &Path) -> Outcome<Loaded> {
    let text = read_input(path)?;
    if text.trim_start().starts_with("n,F") {
        Ok(Loaded::Entropy(EntropyProfile::read_csv(&text)?))
    } else {
        Ok(Loaded::Singular(SingularProfile::read_csv(&text)?))
    }
}

/// Profile from `--input` or `--symbol`.
fn source_profile(cfg: &RunConfig) -> Outcome<(SingularProfile, Value)> {
    if let Some(path) = cfg.input.first() {
        return match load_csv(path)? {
            Loaded::Singular(p) => {
                let meta = json!({ "input": path.display().to_string(), "converged_upto": p.converged_upto });
                Ok((p, meta))
            }
            Loaded::Entropy(_) => Err(Failure::usage(format!("{} holds an entropy profile", path.display()))),
        };
    }
    symbol_spectrum(cfg, need_symbol(cfg)?)
}

fn csv_of<F: FnOnce(&mut Vec<u8>) -> hardy_entropy::Result<()>>(f: F) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn window_for(cfg: &RunConfig, trusted: usize) -> FitWindow {
    match cfg.window {
        Some((start, end)) => FitWindow { start, end },
        None => FitWindow::default_for(trusted),
    }
}

fn decay_plot(title: &str, p: &SingularProfile) -> String {
    let pts = |range: std::ops::Range<usize>| -> Vec<(f64, f64)> {
        range
            .filter(|&i| p.values[i] > 0.0)
            .map(|i| ((i + 1) as f64, p.values[i].ln()))
            .collect()
    };
    let t = p.converged_upto;
    line_plot(
        title,
        "n",
        "ln a_n",
        &[
            Series { label: "trusted", points: pts(0..t), color: "black", dashed: false },
            Series { label: "untrusted", points: pts(t.saturating_sub(1)..p.values.len()), color: "gray", dashed: true },
        ],
    )
}

fn cmd_spectrum(cfg: &RunConfig) -> Outcome<u8> {
    let symbol = need_symbol(cfg)?;
    let (p, meta) = symbol_spectrum(cfg, symbol)?;
    let csv = csv_of(|b| p.write_csv(b))?;
    let beta = extract_beta(&p).ok();
    let rep = report(
        "spectrum",
        cfg,
        json!({
            "spectrum": meta,
            "trusted": p.converged_upto,
            "values": p.values.len(),
            "beta1": beta,
        }),
    );
    write_out(cfg, "spectrum.svg", decay_plot(symbol, &p).as_bytes())?;
    finish(cfg, "spectrum", &rep, &csv)?;
    Ok(0)
}

fn entropy_from(cfg: &RunConfig, p: &SingularProfile) -> Outcome<EntropyProfile> {
    Ok(match cfg.n_max {
        Some(n) => carl_profile(p, n)?,
        None => carl_profile_auto(p, 64, 1 << 18)?,
    })
}

fn cmd_entropy(cfg: &RunConfig) -> Outcome<u8> {
    let (p, meta) = source_profile(cfg)?;
    let e = entropy_from(cfg, &p)?;
    let csv = csv_of(|b| e.write_csv(b))?;
    let pw = cfg.p.unwrap_or(0.5);
    let data: Vec<(f64, f64)> = e
        .ln_f
        .iter()
        .enumerate()
        .map(|(i, v)| (((i + 1) as f64).powf(pw), *v))
        .collect();
    let mut series = vec![Series { label: "ln F(n)", points: data, color: "black", dashed: false }];
    let mut gamma = Value::Null;
    if cfg.p.is_some() && e.trusted_upto >= MIN_BETA_WINDOW {
        let w = window_for(cfg, e.trusted_upto);
        let g = extract_gamma_window(&e.ln_f[..e.trusted_upto], pw, w)?;
        let xs: Vec<f64> = (w.start..=w.end).map(|n| (n as f64).powf(pw)).collect();
        let lf = line_fit(&xs, &e.ln_f[w.start - 1..w.end])?;
        let line = xs.iter().map(|x| (*x, lf.intercept + lf.slope * x)).collect();
        series.push(Series { label: "regression", points: line, color: "#c0392b", dashed: true });
        gamma = json!({ "p": pw, "gamma": g, "r2": lf.r2, "window": [w.start, w.end] });
    }
    let svg = line_plot("Carl transform", &format!("n^{pw}"), "ln F(n)", &series);
    write_out(cfg, "entropy.svg", svg.as_bytes())?;
    let rep = report(
        "entropy",
        cfg,
        json!({
            "source": meta,
            "n_max": e.len(),
            "trusted_upto": e.trusted_upto,
            "source_len": e.source_len,
            "gamma": gamma,
        }),
    );
    finish(cfg, "entropy", &rep, &csv)?;
    Ok(0)
}

fn fit_table(fits: &[(&str, &RateFit)]) -> Vec<u8> {
    let mut s = String::from("series,model,r2,b,c,selected\n");
    for (name, f) in fits {
        for c in &f.candidates {
            s.push_str(&format!("{name},{},{},{},{},{}\n", c.model, c.r2, c.b, c.c, u8::from(c.model == f.model)));
        }
    }
    s.into_bytes()
}

fn symbol_dim(cfg: &RunConfig) -> usize {
    if let Some(d) = cfg.dim {
        return d;
    }
    match cfg.symbol.as_deref() {
        Some(s) if is_product(s) => s.parse::<MultiSymbol>().map_or(1, |m| m.dim()),
        _ => 1,
    }
}

fn cmd_fit(cfg: &RunConfig) -> Outcome<u8> {
    let dim = symbol_dim(cfg);
    let (a, e, meta) = match cfg.input.first() {
        Some(path) => match load_csv(path)? {
            Loaded::Singular(p) => (Some(p), None, json!({ "input": path.display().to_string() })),
            Loaded::Entropy(e) => (None, Some(e), json!({ "input": path.display().to_string() })),
        },
        None => {
            let (p, meta) = symbol_spectrum(cfg, need_symbol(cfg)?)?;
            let e = entropy_from(cfg, &p)?;
            (Some(p), Some(e), meta)
        }
    };
    let fa = match &a {
        Some(p) => Some(match cfg.window {
            Some(_) => fit_rate_model(&p.values, window_for(cfg, p.converged_upto), dim)?,
            None => fit_singular_profile(p, dim)?,
        }),
        None => None,
    };
    let fe = match &e {
        Some(e) => Some(match cfg.window {
            Some(_) => fit_log_rate_model(&e.ln_f, window_for(cfg, e.trusted_upto), dim)?,
            None => fit_entropy_profile(e, dim)?,
        }),
        None => None,
    };
    let mut table = Vec::new();
    if let Some(f) = &fa {
        table.push(("a_n", f));
    }
    if let Some(f) = &fe {
        table.push(("F", f));
    }
    let rep = report(
        "fit",
        cfg,
        json!({
            "source": meta,
            "dim": dim,
            "a_n": fa,
            "F": fe,
            "beta1": a.as_ref().and_then(|p| extract_beta(p).ok()),
        }),
    );
    finish(cfg, "fit", &rep, &fit_table(&table))?;
    Ok(0)
}

fn cmd_capacity(cfg: &RunConfig) -> Outcome<u8> {
    let symbol = need_symbol(cfg)?;
    let spec: SymbolSpec = symbol.parse()?;
    let mask = rasterize_image(&spec, cfg.grid)?;
    let mut pbm = Vec::new();
    mask.write_pbm(&mut pbm)?;
    write_out(cfg, "mask.pbm", &pbm)?;
    let est = symbol_capacity(&spec, cfg.grid, cfg.refine)?;
    let laws = capacity_laws(est.cap).ok().map(|(b, g)| json!({ "beta1": b, "gamma1": g }));
    let csv = format!(
        "grid,cap,energy,area,touches_boundary\n{},{},{},{},{}\n",
        est.grid_size,
        est.cap,
        est.energy,
        est.rasterized_area,
        u8::from(est.touches_boundary)
    );
    let rep = report(
        "capacity",
        cfg,
        json!({ "symbol": spec.to_string(), "estimate": est, "predicted": laws }),
    );
    finish(cfg, "capacity", &rep, csv.as_bytes())?;
    Ok(0)
}

fn cmd_tensor(cfg: &RunConfig) -> Outcome<u8> {
    let (p, q, meta) = if cfg.input.len() == 2 {
        let get = |path: &Path| match load_csv(path)? {
            Loaded::Singular(p) => Ok(p),
            Loaded::Entropy(_) => Err(Failure::usage(format!("{} holds an entropy profile", path.display()))),
        };
        let meta = json!({ "inputs": cfg.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() });
        (get(&cfg.input[0])?, get(&cfg.input[1])?, meta)
    } else if cfg.input.is_empty() {
        let m: MultiSymbol = need_symbol(cfg)?.parse()?;
        if m.dim() != 2 {
            return Err(Failure::usage("tensor needs a product of exactly two symbols".into()));
        }
        let (p, mp) = symbol_spectrum(cfg, &m.components[0].to_string())?;
        let (q, mq) = symbol_spectrum(cfg, &m.components[1].to_string())?;
        (p, q, json!({ "factors": [mp, mq] }))
    } else {
        return Err(Failure::usage("tensor takes two --input files or a prod(...) symbol".into()));
    };
    let available = p.trusted().len() * q.trusted().len();
    let count = cfg.n_max.unwrap_or(available.min(2000));
    let t = tensor_spectrum(&p, &q, count)?;
    let e = entropy_from(&RunConfig { n_max: None, ..cfg.clone() }, &t)?;
    let rep = report(
        "tensor",
        cfg,
        json!({
            "source": meta,
            "count": count,
            "trusted": t.converged_upto,
            "a_n": fit_singular_profile(&t, 2).ok(),
            "F": fit_entropy_profile(&e, 2).ok(),
        }),
    );
    write_out(cfg, "tensor.svg", decay_plot("tensor spectrum", &t).as_bytes())?;
    finish(cfg, "tensor", &rep, &csv_of(|b| t.write_csv(b))?)?;
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, name: Option<&str>) -> Outcome<u8> {
    let suite = name
        .or(cfg.suite.as_deref())
        .ok_or_else(|| Failure::usage("verify needs a suite name".into()))?;
    let r = run_suite(suite, &Context::default())?;
    let mut csv = String::from("criterion,name,passed\n");
    for c in &r.checks {
        csv.push_str(&format!("{},\"{}\",{}\n", c.criterion, c.name.replace('"', "'"), u8::from(c.passed)));
    }
    let passed = r.passed;
    let rep = report("verify", cfg, json!({ "report": r }));
    finish(cfg, "verify", &rep, csv.as_bytes())?;
    Ok(if passed { 0 } else { 4 })
}

fn cmd_oracle(cfg: &RunConfig) -> Outcome<u8> {
    let sigma = cfg
        .sigma
        .clone()
        .ok_or_else(|| Failure::usage("oracle needs --sigma".into()))?;
    let mut csv = String::from("n,lower,upper,F,within_window\n");
    let mut rows = Vec::new();
    if let Some(eps) = cfg.eps {
        let (lo, up) = covering_oracle(&sigma, eps)?;
        rows.push(json!({ "eps": eps, "lower": lo, "upper": up }));
        csv = format!("eps,lower,upper\n{eps},{lo},{up}\n");
    } else {
        for n in 1..=cfg.n_max.unwrap_or(12) {
            let b = entropy_bracket(&sigma, n)?;
            csv.push_str(&format!("{},{},{},{},{}\n", n, b.lower, b.upper, b.carl, u8::from(b.within_window)));
            rows.push(serde_json::to_value(&b).expect("brackets serialize"));
        }
    }
    let rep = report("oracle", cfg, json!({ "sigma": sigma, "rows": rows }));
    finish(cfg, "oracle", &rep, csv.as_bytes())?;
    Ok(0)
}
