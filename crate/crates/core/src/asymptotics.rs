//! Limit parameters, decay-model selection and the capacity formulas.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::carl::EntropyProfile;
use crate::error::{Error, Result};
use crate::spectrum::SingularProfile;

/// Candidates whose `r2` is within this of the best count as tied.
pub const TIE_TOLERANCE: f64 = 1e-4;

/// Share of the trusted window dropped at its start.
pub const TRANSIENT_SHARE: f64 = 0.15;

pub const MIN_BETA_WINDOW: usize = 10;
pub const MIN_MODEL_WINDOW: usize = 20;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Decay scale `m(n) = n^{p} (ln n)^{-q}` with rational `p > 0`, `q >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RateModel {
    pub power: (u32, u32),
    pub log_power: (u32, u32),
}

impl RateModel {
    pub fn new(power: (u32, u32), log_power: (u32, u32)) -> Self {
        let red = |(a, b): (u32, u32)| {
            if a == 0 {
                (0, 1)
            } else {
                let g = gcd(a, b);
                (a / g, b / g)
            }
        };
        RateModel {
            power: red(power),
            log_power: red(log_power),
        }
    }

    /// `n^{1/d}`.
    pub fn root(d: u32) -> Self {
        RateModel::new((1, d), (0, 1))
    }

    pub fn power_f64(&self) -> f64 {
        self.power.0 as f64 / self.power.1 as f64
    }

    pub fn log_power_f64(&self) -> f64 {
        self.log_power.0 as f64 / self.log_power.1 as f64
    }

    pub fn has_log(&self) -> bool {
        self.log_power.0 != 0
    }

    pub fn eval(&self, n: f64) -> f64 {
        let mut v = n.powf(self.power_f64());
        if self.has_log() {
            v *= n.ln().powf(-self.log_power_f64());
        }
        v
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.power {
            (1, 1) => write!(f, "n")?,
            (a, 1) => write!(f, "n^{a}")?,
            (a, b) => write!(f, "n^({a}/{b})")?,
        }
        match self.log_power {
            (0, _) => Ok(()),
            (1, 1) => write!(f, "/ln n"),
            (a, 1) => write!(f, "/(ln n)^{a}"),
            (a, b) => write!(f, "*(ln n)^(-{a}/{b})"),
        }
    }
}

/// The candidate families for dimension `n_dim`, duplicates removed, fixed
/// families first.
pub fn candidate_models(n_dim: usize) -> Vec<RateModel> {
    let n = n_dim.max(1) as u32;
    let all = [
        RateModel::root(1),
        RateModel::root(2),
        RateModel::root(3),
        RateModel::root(4),
        RateModel::root(5),
        RateModel::new((1, 1), (1, 1)),
        RateModel::new((1, 2), (1, 2)),
        RateModel::new((1, 2), (1, 1)),
        RateModel::new((1, 3), (2, 3)),
        RateModel::root(n),
        RateModel::root(n + 1),
        RateModel::root(2 * n),
        RateModel::root(2 * n + 1),
        RateModel::new((1, n + 1), (n, n + 1)),
    ];
    let mut out: Vec<RateModel> = Vec::new();
    for m in all {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::input("line fit needs two or more paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - intercept - slope * a;
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LineFit { slope, intercept, r2 })
}

/// Inclusive range of indices `n` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FitWindow {
    pub start: usize,
    pub end: usize,
}

impl FitWindow {
    pub fn len(&self) -> usize {
        (self.end + 1).saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops the transient share of `1..=trusted`, never starting before `n = 3`.
    pub fn default_for(trusted: usize) -> FitWindow {
        let start = ((TRANSIENT_SHARE * trusted as f64).ceil() as usize + 1).max(3);
        FitWindow { start, end: trusted }
    }
}

fn window_xy(ln_values: &[f64], window: FitWindow, min: usize, scale: impl Fn(f64) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if window.start == 0 || window.end > ln_values.len() {
        return Err(Error::input(format!(
            "window {}..={} outside 1..={}",
            window.start,
            window.end,
            ln_values.len()
        )));
    }
    if window.len() < min {
        return Err(Error::WindowTooShort { len: window.len(), min });
    }
    let mut x = Vec::with_capacity(window.len());
    let mut y = Vec::with_capacity(window.len());
    for n in window.start..=window.end {
        let v = ln_values[n - 1];
        if !v.is_finite() {
            return Err(Error::input(format!("value at n = {n} is not positive")));
        }
        x.push(scale(n as f64));
        y.push(v);
    }
    Ok((x, y))
}

fn logs(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// `exp` of the slope of `ln a_n` against `n` over `window`.
pub fn extract_beta_window(values: &[f64], window: FitWindow) -> Result<f64> {
    let (x, y) = window_xy(&logs(values), window, 2, |n| n)?;
    Ok(line_fit(&x, &y)?.slope.exp())
}

/// Estimate of `lim a_n^{1/n}` over the default window of the trusted values.
pub fn extract_beta(a: &SingularProfile) -> Result<f64> {
    let t = a.trusted();
    if t.len() < MIN_BETA_WINDOW {
        return Err(Error::WindowTooShort { len: t.len(), min: MIN_BETA_WINDOW });
    }
    extract_beta_window(t, FitWindow::default_for(t.len()))
}

/// `exp` of the slope of `ln e_n` against `n^p` over `window`.
pub fn extract_gamma_window(ln_values: &[f64], p: f64, window: FitWindow) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::input("exponent p must lie in (0, 1]"));
    }
    let (x, y) = window_xy(ln_values, window, 2, |n| n.powf(p))?;
    Ok(line_fit(&x, &y)?.slope.exp())
}

/// Estimate of `lim e_n^{1/n^p}` over the default window of the trusted range.
pub fn extract_gamma(e: &EntropyProfile, p: f64) -> Result<f64> {
    let len = e.trusted_upto;
    if len < MIN_BETA_WINDOW {
        return Err(Error::WindowTooShort { len, min: MIN_BETA_WINDOW });
    }
    extract_gamma_window(&e.ln_f[..len], p, FitWindow::default_for(len))
}

/// One candidate's least-squares fit `ln v_n = c - b m(n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub model: String,
    #[serde(skip)]
    pub rate: RateModel,
    pub b: f64,
    pub c: f64,
    pub r2: f64,
}

/// Selected decay model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub model: String,
    pub exponent: f64,
    pub log_exponent: f64,
    #[serde(skip)]
    pub rate: RateModel,
    pub b: f64,
    pub c: f64,
    pub r2: f64,
    pub window: FitWindow,
    /// `r2` of the winner minus the best `r2` among the other candidates.
    pub margin: f64,
    pub runner_up: String,
    pub candidates: Vec<CandidateFit>,
}

/// Model selection on log-values `ln v_n` (index `n - 1`).
pub fn fit_log_rate_model(ln_values: &[f64], window: FitWindow, n_dim: usize) -> Result<RateFit> {
    let (n, y) = window_xy(ln_values, window, MIN_MODEL_WINDOW, |n| n)?;
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::DegenerateFit("flat input".into()));
    }
    let mut fits = Vec::new();
    for rate in candidate_models(n_dim) {
        let x: Vec<f64> = n.iter().map(|&k| rate.eval(k)).collect();
        let f = line_fit(&x, &y)?;
        fits.push(CandidateFit {
            model: rate.name(),
            rate,
            b: -f.slope,
            c: f.intercept,
            r2: f.r2,
        });
    }
    let best_r2 = fits.iter().map(|f| f.r2).fold(f64::NEG_INFINITY, f64::max);
    let win = fits
        .iter()
        .enumerate()
        .filter(|(_, f)| f.r2 >= best_r2 - TIE_TOLERANCE)
        .min_by(|(_, a), (_, b)| {
            a.rate
                .has_log()
                .cmp(&b.rate.has_log())
                .then(b.r2.total_cmp(&a.r2))
        })
        .map(|(i, _)| i)
        .expect("at least one candidate");
    let chosen = fits[win].clone();
    let (runner_up, other_r2) = fits
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != win)
        .max_by(|(_, a), (_, b)| a.r2.total_cmp(&b.r2))
        .map(|(_, f)| (f.model.clone(), f.r2))
        .unwrap_or_default();
    Ok(RateFit {
        model: chosen.model,
        exponent: chosen.rate.power_f64(),
        log_exponent: -chosen.rate.log_power_f64(),
        rate: chosen.rate,
        b: chosen.b,
        c: chosen.c,
        r2: chosen.r2,
        window,
        margin: chosen.r2 - other_r2,
        runner_up,
        candidates: fits,
    })
}

/// Model selection on positive values `v_n` (index `n - 1`).
pub fn fit_rate_model(values: &[f64], window: FitWindow, n_dim: usize) -> Result<RateFit> {
    fit_log_rate_model(&logs(values), window, n_dim)
}

/// Model selection over the default window of a singular profile.
pub fn fit_singular_profile(a: &SingularProfile, n_dim: usize) -> Result<RateFit> {
    let t = a.trusted();
    fit_rate_model(t, FitWindow::default_for(t.len()), n_dim)
}

/// Model selection over the default window of an entropy profile.
pub fn fit_entropy_profile(e: &EntropyProfile, n_dim: usize) -> Result<RateFit> {
    let len = e.trusted_upto;
    fit_log_rate_model(&e.ln_f[..len], FitWindow::default_for(len), n_dim)
}

/// Predicted `(beta_1, gamma_1) = (e^{-1/cap}, e^{-sqrt(2/cap)})`.
pub fn capacity_laws(cap: f64) -> Result<(f64, f64)> {
    if cap.is_nan() || cap <= 0.0 {
        return Err(Error::input("capacity must be positive"));
    }
    if cap.is_infinite() {
        return Ok((1.0, 1.0));
    }
    Ok(((-1.0 / cap).exp(), (-(2.0 / cap).sqrt()).exp()))
}

/// `(ln gamma_1)^2 / (-2 ln beta_1)`, which is 1 when both laws share one capacity.
pub fn gamma_beta_cross_check(beta1: f64, gamma1: f64) -> Result<f64> {
    let inside = |v: f64| v > 0.0 && v < 1.0;
    if !(inside(beta1) && inside(gamma1)) {
        return Err(Error::input("beta1 and gamma1 must lie strictly between 0 and 1"));
    }
    let lg = gamma1.ln();
    Ok(lg * lg / (-2.0 * beta1.ln()))
}

/// Quantities derived from a (pluri)capacity of the closure of the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityParams {
    pub cap: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "tau_N")]
    pub tau: f64,
    pub rho: f64,
    #[serde(rename = "Gamma_N")]
    pub gamma: f64,
    #[serde(rename = "beta_N")]
    pub beta: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `(N/(N+1))^{N/(N+1)} (N^{-N/(N+1)} + N^{1/(N+1)})`.
pub fn beta_coefficient(n: usize) -> f64 {
    let nf = n as f64;
    let e = nf / (nf + 1.0);
    (nf / (nf + 1.0)).powf(e) * (nf.powf(-e) + nf.powf(1.0 / (nf + 1.0)))
}

/// `e^{-1/(N+1)} N^{1/(N+1)}`, a lower bound for [`beta_coefficient`].
pub fn beta_coefficient_lower(n: usize) -> f64 {
    let nf = n as f64;
    (-1.0 / (nf + 1.0)).exp() * nf.powf(1.0 / (nf + 1.0))
}

/// Parameters from the normalized capacity `tau_N`.
pub fn params_from_tau(tau: f64, n: usize) -> Result<CapacityParams> {
    if n == 0 {
        return Err(Error::input("dimension must be at least 1"));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::input("capacity must be positive"));
    }
    let rho = if tau.is_infinite() {
        0.0
    } else {
        (factorial(n) / tau).powf(1.0 / n as f64)
    };
    let beta = beta_coefficient(n);
    if beta < beta_coefficient_lower(n) * (1.0 - 1e-14) {
        return Err(Error::NonConvergence {
            what: "beta_N inequality",
            detail: format!("beta_{n} = {beta} below its lower bound"),
        });
    }
    Ok(CapacityParams {
        cap: tau * (2.0 * PI).powi(n as i32),
        n,
        tau,
        rho,
        gamma: (-rho).exp(),
        beta,
    })
}

/// Parameters from the pluricapacity `cap_N`, with `tau_N = cap_N / (2 pi)^N`.
pub fn pluricap_params(cap_n: f64, n: usize) -> Result<CapacityParams> {
    if n == 0 {
        return Err(Error::input("dimension must be at least 1"));
    }
    if cap_n.is_nan() || cap_n <= 0.0 {
        return Err(Error::input("capacity must be positive"));
    }
    let mut p = params_from_tau(cap_n / (2.0 * PI).powi(n as i32), n)?;
    p.cap = cap_n;
    Ok(p)
}

/// One-variable parameters from a Green capacity, so that `Gamma_1 = e^{-1/cap}`.
pub fn params_from_green_capacity(cap: f64) -> Result<CapacityParams> {
    let mut p = pluricap_params(2.0 * PI * cap, 1)?;
    p.cap = 2.0 * PI * cap;
    Ok(p)
}

/// Upper bound `Gamma_N` for `limsup a_n^{1/n^{1/N}}`.
pub fn theorem51_bound(p: &CapacityParams) -> f64 {
    p.gamma
}

/// Upper bound `exp(-beta_N rho^{N/(N+1)})` for `limsup e_n^{1/n^{1/(N+1)}}`.
pub fn theorem52_bound(p: &CapacityParams) -> f64 {
    let nf = p.n as f64;
    (-p.beta * p.rho.powf(nf / (nf + 1.0))).exp()
}

/// Running maximum of `a_n^{1/n^{1/N}}`.
pub fn running_max_root(values: &[f64], n_dim: usize) -> Vec<f64> {
    let e = 1.0 / n_dim.max(1) as f64;
    let mut best = f64::NEG_INFINITY;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = v.powf(1.0 / ((i + 1) as f64).powf(e));
            best = best.max(r);
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carl::carl_transform;
    use proptest::prelude::*;

    fn seq(f: impl Fn(f64) -> f64, len: usize) -> Vec<f64> {
        (1..=len).map(|n| f(n as f64)).collect()
    }

    #[test]
    fn beta_of_geometric() {
        let a = SingularProfile::exact(seq(|n| 0.5f64.powf(n - 1.0), 40)).unwrap();
        assert!((extract_beta(&a).unwrap() - 0.5).abs() < 1e-14);
        let short = SingularProfile::exact(seq(|n| 0.5f64.powf(n - 1.0), 9)).unwrap();
        assert!(matches!(extract_beta(&short), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn beta_tends_to_one_for_subexponential_decay() {
        let v = seq(|n| (-n.sqrt()).exp(), 4000);
        let b1 = extract_beta_window(&v, FitWindow { start: 10, end: 100 }).unwrap();
        let b2 = extract_beta_window(&v, FitWindow { start: 10, end: 4000 }).unwrap();
        assert!(b1 < b2 && b2 < 1.0 && b2 > 0.98, "{b1} {b2}");
    }

    #[test]
    fn beta_of_polynomially_modulated_geometric() {
        // the n^3 factor biases the slope upward; value from an independent least-squares fit
        let v = seq(|n| n.powi(3) * 0.4f64.powf(n), 120);
        let b = extract_beta_window(&v, FitWindow { start: 20, end: 120 }).unwrap();
        assert!((b - 0.419_983_314_325_413_25).abs() < 1e-12, "{b}");
        assert!((b - 0.4).abs() / 0.4 < 0.06);
    }

    #[test]
    fn gamma_examples() {
        let ln_e = seq(|n| -2.0 * n.sqrt(), 200);
        let g = extract_gamma_window(&ln_e, 0.5, FitWindow { start: 1, end: 200 }).unwrap();
        assert!((g - (-2f64).exp()).abs() < 1e-13);
        let flat = vec![-1.0; 50];
        let g = extract_gamma_window(&flat, 0.5, FitWindow { start: 1, end: 50 }).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn gamma_from_exact_dilation() {
        let rho: f64 = 2.0;
        let r = (-rho).exp();
        let a = SingularProfile::exact(seq(|n| r.powf(n - 1.0), 340)).unwrap();
        let e = carl_transform(a.trusted(), 20000).unwrap();
        let g = extract_gamma(&e, 0.5).unwrap();
        assert!((g - r).abs() / r < 0.03, "{g}");
    }

    #[test]
    fn candidates_are_deduplicated() {
        assert_eq!(candidate_models(1).len(), 9);
        assert_eq!(candidate_models(2).len(), 9);
        let c3 = candidate_models(3);
        assert!(c3.contains(&RateModel::root(6)));
        assert!(c3.contains(&RateModel::new((1, 4), (3, 4))));
        assert_eq!(RateModel::new((1, 2), (1, 1)).to_string(), "n^(1/2)/ln n");
        assert_eq!(RateModel::new((1, 3), (2, 3)).to_string(), "n^(1/3)*(ln n)^(-2/3)");
        assert_eq!(RateModel::root(1).to_string(), "n");
    }

    #[test]
    fn exact_members_are_recovered() {
        for n_dim in [1, 2, 3] {
            for rate in candidate_models(n_dim) {
                let ln_v: Vec<f64> = (1..=300).map(|n| 0.7 - 1.3 * rate.eval(n as f64)).collect();
                let fit = fit_log_rate_model(&ln_v, FitWindow { start: 3, end: 300 }, n_dim).unwrap();
                let cand = fit.candidates.iter().find(|c| c.rate == rate).unwrap();
                assert!((cand.r2 - 1.0).abs() < 1e-12);
                assert!((cand.b - 1.3).abs() < 1e-8, "{rate}: {}", cand.b);
                assert_eq!(fit.rate, rate, "selected {} for {rate}", fit.model);
            }
        }
    }

    #[test]
    fn synthetic_selections() {
        let v = seq(|n| (-2.0 * n.sqrt()).exp(), 200);
        let f = fit_rate_model(&v, FitWindow { start: 3, end: 200 }, 1).unwrap();
        assert_eq!(f.model, "n^(1/2)");
        assert!((f.b - 2.0).abs() < 1e-10);

        let v = seq(|n| (-n / n.ln()).exp(), 200);
        let f = fit_rate_model(&v, FitWindow { start: 3, end: 200 }, 1).unwrap();
        assert_eq!(f.model, "n/ln n");
        let score = |name: &str| f.candidates.iter().find(|c| c.model == name).unwrap().r2;
        assert!(score("n/ln n") > score("n") && score("n/ln n") > score("n^(1/2)"));

        let v = seq(|n| (-n.cbrt()).exp(), 200);
        let f = fit_rate_model(&v, FitWindow { start: 3, end: 200 }, 1).unwrap();
        assert_eq!(f.model, "n^(1/3)");

        assert!(matches!(
            fit_rate_model(&[0.5; 40], FitWindow { start: 3, end: 40 }, 1),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_rate_model(&[0.5; 40], FitWindow { start: 3, end: 15 }, 1),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn capacity_law_values() {
        let (b, g) = capacity_laws(1.0 / 2f64.ln()).unwrap();
        assert!((b - 0.5).abs() < 1e-15);
        assert!((g - (-(2.0 * 2f64.ln()).sqrt()).exp()).abs() < 1e-15);
        assert!((g - 0.3081).abs() < 1e-4);
        assert_eq!(capacity_laws(f64::INFINITY).unwrap(), (1.0, 1.0));
        let (b, g) = capacity_laws(1.0).unwrap();
        assert!((b - (-1f64).exp()).abs() < 1e-16 && (g - (-(2f64.sqrt())).exp()).abs() < 1e-16);
        assert!(capacity_laws(0.0).is_err());
    }

    #[test]
    fn cross_check_values() {
        let e2 = (-2f64).exp();
        assert!((gamma_beta_cross_check(e2, e2).unwrap() - 1.0).abs() < 1e-15);
        let v = gamma_beta_cross_check((-1f64).exp(), (-(2f64.sqrt())).exp()).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = gamma_beta_cross_check(0.5, 0.5).unwrap();
        assert!((v - 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((v - 0.3466).abs() < 1e-4);
        assert!(gamma_beta_cross_check(1.0, 0.5).is_err());
    }

    #[test]
    fn pluricapacity_formulas() {
        for n in 1..=6 {
            let p = params_from_tau(factorial(n), n).unwrap();
            assert!((p.gamma - (-1f64).exp()).abs() < 1e-12);
            assert!((p.rho - 1.0).abs() < 1e-12);
            assert!((theorem51_bound(&p) - (-1f64).exp()).abs() < 1e-12);
        }
        assert!((beta_coefficient(1) - 2f64.sqrt()).abs() < 1e-15);
        let b2 = (2.0f64 / 3.0).powf(2.0 / 3.0) * (2f64.powf(-2.0 / 3.0) + 2f64.cbrt());
        assert!((beta_coefficient(2) - b2).abs() < 1e-15);
        assert!((beta_coefficient(2) - 1.4423).abs() < 1e-4);
        for n in 1..=10 {
            assert!(beta_coefficient(n) >= beta_coefficient_lower(n));
        }
        let p = pluricap_params(3.0, 2).unwrap();
        assert!((p.rho - 2.0 * PI * (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(pluricap_params(-1.0, 2).is_err());
    }

    #[test]
    fn reductions_in_one_variable() {
        for rho in [0.5, 1.0, 2.0, 5.0] {
            let p = params_from_tau(1.0 / rho, 1).unwrap();
            assert!((theorem52_bound(&p) - (-(2.0 * rho).sqrt()).exp()).abs() < 1e-12);
        }
        let p = params_from_tau(0.5, 1).unwrap();
        assert!((theorem52_bound(&p) - (-2f64).exp()).abs() < 1e-15);
        let p = params_from_tau(2.0, 2).unwrap();
        assert!((theorem52_bound(&p) - (-beta_coefficient(2)).exp()).abs() < 1e-15);

        let cap = 1.0 / 2f64.ln();
        let g = params_from_green_capacity(cap).unwrap();
        assert!((theorem51_bound(&g) - 0.5).abs() < 1e-15);
        assert!((theorem52_bound(&g) - capacity_laws(cap).unwrap().1).abs() < 1e-15);
        let big = pluricap_params(1e300, 2).unwrap();
        assert!(theorem51_bound(&big) > 0.999);
        let inf = pluricap_params(f64::INFINITY, 2).unwrap();
        assert_eq!(theorem51_bound(&inf), 1.0);
    }

    #[test]
    fn running_max() {
        let r = running_max_root(&[1.0, 0.25, 0.5], 1);
        assert_eq!(r[0], 1.0);
        assert_eq!(r, vec![1.0, 1.0, 1.0]);
        let r = running_max_root(&[0.5, 0.5], 1);
        assert!((r[1] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn report_serializes() {
        let p = pluricap_params(3.0, 2).unwrap();
        let v = serde_json::to_value(p).unwrap();
        for key in ["cap", "N", "tau_N", "rho", "Gamma_N", "beta_N"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn fits_ignore_scaling(c in 0.01f64..100.0, r in 0.1f64..0.9) {
            let v = seq(|n| (1.0 + 0.3 * (n * 1.7).sin()) * r.powf(n), 60);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let w = FitWindow { start: 5, end: 60 };
            let a = extract_beta_window(&v, w).unwrap();
            let b = extract_beta_window(&scaled, w).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let la: Vec<f64> = v.iter().map(|x| x.ln()).collect();
            let lb: Vec<f64> = scaled.iter().map(|x| x.ln()).collect();
            let ga = extract_gamma_window(&la, 0.5, w).unwrap();
            let gb = extract_gamma_window(&lb, 0.5, w).unwrap();
            prop_assert!((ga - gb).abs() < 1e-12);
        }

        #[test]
        fn common_rho_cross_check(rho in 0.05f64..20.0) {
            let (b, g) = capacity_laws(1.0 / rho).unwrap();
            prop_assert!((gamma_beta_cross_check(b, g).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
