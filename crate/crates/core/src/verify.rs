//! Named verification suites with deterministic JSON verdicts.

use std::cell::OnceCell;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{
    beta_coefficient, beta_coefficient_lower, extract_beta, extract_gamma, fit_entropy_profile,
    fit_singular_profile, params_from_tau, theorem52_bound, RateFit,
};
use crate::capacity::{capacity_from_beta, green_capacity, rasterize_image, Mask};
use crate::carl::{carl_profile, carl_profile_auto, entropy_bracket};
use crate::error::{Error, Result};
use crate::hardy_matrix::build_matrix_nd;
use crate::spectrum::{
    agreeing_prefix, convergence_study, singular_values, symbol_profile, tensor_spectrum, Route,
    SingularProfile,
};
use crate::symbols::{MultiSymbol, SymbolSpec};

pub const SUITES: &[&str] = &[
    "diagonal",
    "carl-bracket",
    "beta1",
    "capacity",
    "gamma1",
    "lens-1d",
    "cusp-1d",
    "interior-2d",
    "multilens-2d",
    "multicusp-2d",
    "formulas",
    "thm52-consistency",
    "all",
];

/// Sizes and grids used by the suites.
#[derive(Debug, Clone, Serialize)]
pub struct VerifySettings {
    pub diagonal_k: usize,
    /// Basis sizes of the convergence study for boundary-touching symbols.
    pub boundary_k: Vec<usize>,
    pub tensor_count: usize,
    pub interior_count: usize,
    /// Graded degrees compared against the tensor route.
    pub nd_degrees: (usize, usize),
    pub capacity_grid: usize,
    pub beta_grid: usize,
    pub gamma_len: usize,
    pub gamma_n_max: usize,
    pub entropy_n_cap: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            diagonal_k: 64,
            boundary_k: vec![256, 512],
            tensor_count: 2000,
            interior_count: 1000,
            nd_degrees: (20, 40),
            capacity_grid: 512,
            beta_grid: 1024,
            gamma_len: 300,
            gamma_n_max: 20000,
            entropy_n_cap: 1 << 18,
        }
    }
}

/// One verdict line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u32,
    pub name: String,
    pub passed: bool,
    pub measured: Value,
    pub expected: Value,
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(criterion: u32, name: impl Into<String>, passed: bool, measured: Value, expected: Value) -> Check {
        Check {
            criterion,
            name: name.into(),
            passed,
            measured,
            expected,
            tolerance: None,
            detail: None,
        }
    }

    fn tol(mut self, t: f64) -> Check {
        self.tolerance = Some(t);
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Check {
        self.detail = Some(d.into());
        self
    }

    fn failed(criterion: u32, name: &str, err: &Error) -> Check {
        Check::new(criterion, name, false, Value::Null, Value::Null).detail(err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Shared inputs, computed on first use.
pub struct Context {
    pub settings: VerifySettings,
    lens: OnceCell<SingularProfile>,
    cusp: OnceCell<SingularProfile>,
}

impl Default for Context {
    fn default() -> Self {
        Context::new(VerifySettings::default())
    }
}

impl Context {
    pub fn new(settings: VerifySettings) -> Context {
        Context {
            settings,
            lens: OnceCell::new(),
            cusp: OnceCell::new(),
        }
    }

    fn boundary_profile(&self, cell: &OnceCell<SingularProfile>, spec: &SymbolSpec) -> Result<SingularProfile> {
        if let Some(p) = cell.get() {
            return Ok(p.clone());
        }
        let r = convergence_study(spec, &self.settings.boundary_k, Route::auto(spec)?)?;
        Ok(cell.get_or_init(|| r.profile).clone())
    }

    pub fn lens_profile(&self) -> Result<SingularProfile> {
        self.boundary_profile(&self.lens, &SymbolSpec::lens(0.5)?)
    }

    pub fn cusp_profile(&self) -> Result<SingularProfile> {
        self.boundary_profile(&self.cusp, &SymbolSpec::Cusp)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fit_json(f: &RateFit) -> Value {
    json!({
        "model": f.model,
        "exponent": f.exponent,
        "log_exponent": f.log_exponent,
        "b": f.b,
        "r2": f.r2,
        "margin": f.margin,
        "runner_up": f.runner_up,
        "window": [f.window.start, f.window.end],
    })
}

/// Model check: the selected family, plus optional `r2` and margin floors.
fn model_check(
    criterion: u32,
    name: &str,
    fit: Result<RateFit>,
    want: &str,
    min_r2: Option<f64>,
    min_margin: Option<f64>,
) -> Check {
    match fit {
        Err(e) => Check::failed(criterion, name, &e),
        Ok(f) => {
            let mut ok = f.model == want;
            if let Some(r) = min_r2 {
                ok &= f.r2 >= r;
            }
            if let Some(m) = min_margin {
                ok &= f.margin >= m;
            }
            let expected = json!({ "model": want, "min_r2": min_r2, "min_margin": min_margin });
            Check::new(criterion, name, ok, fit_json(&f), expected)
        }
    }
}

fn guard(criterion: u32, name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::failed(criterion, name, &e)])
}

fn diagonal(ctx: &Context) -> Vec<Check> {
    guard(1, "dilation calibration", || {
        let p = symbol_profile(&SymbolSpec::dilation(0.5)?, ctx.settings.diagonal_k, Route::Monomial)?;
        let err = p
            .values
            .iter()
            .take(40)
            .enumerate()
            .map(|(i, v)| (v - 0.5f64.powi(i as i32)).abs())
            .fold(0.0, f64::max);
        Ok(vec![Check::new(
            1,
            "max |a_n - 0.5^(n-1)|, n <= 40",
            err <= 1e-10,
            json!(err),
            json!(0.0),
        )
        .tol(1e-10)])
    })
}

fn carl_bracket(_: &Context) -> Vec<Check> {
    let sets: [&[f64]; 4] = [&[1.0], &[1.0, 0.5], &[1.0, 1.0, 1.0], &[1.0, 0.5, 0.25]];
    sets.iter()
        .flat_map(|s| {
            let name = format!("F(n) within factor 8 of the covering bracket, sigma = {s:?}");
            guard(2, &name, || {
                let mut worst = 1.0f64;
                let mut first_miss = None;
                for n in 1..=12 {
                    let b = entropy_bracket(s, n)?;
                    let ratio = (b.lower / b.carl).max(b.carl / b.upper).max(1.0);
                    worst = worst.max(ratio);
                    if !b.within_window && first_miss.is_none() {
                        first_miss = Some(n);
                    }
                }
                let mut c = Check::new(2, name.clone(), first_miss.is_none(), json!(worst), json!(1.0)).tol(8.0);
                if let Some(n) = first_miss {
                    c = c.detail(format!("first n outside the window: {n}"));
                }
                Ok(vec![c])
            })
        })
        .collect()
}

fn beta1(ctx: &Context) -> Vec<Check> {
    let mut out = Vec::new();
    for r in [0.3, 0.5, 0.7] {
        out.extend(guard(3, &format!("beta1 law, r = {r}"), || {
            let spec = SymbolSpec::dilation(r)?;
            let p = symbol_profile(&spec, ctx.settings.diagonal_k, Route::Monomial)?;
            let b = extract_beta(&p)?;
            let cap_beta = capacity_from_beta(b)?;
            let est = green_capacity(&rasterize_image(&spec, ctx.settings.beta_grid)?)?;
            Ok(vec![
                Check::new(3, format!("extract_beta, r = {r}"), rel(b, r) <= 0.02, json!(b), json!(r)).tol(0.02),
                Check::new(
                    3,
                    format!("capacity_from_beta vs grid capacity, r = {r}"),
                    rel(cap_beta, est.cap) <= 0.03,
                    json!(cap_beta),
                    json!(est.cap),
                )
                .tol(0.03)
                .detail(format!("grid {}", est.grid_size)),
            ])
        }));
    }
    out
}

fn capacity(ctx: &Context) -> Vec<Check> {
    guard(4, "capacity solver", || {
        let g = ctx.settings.capacity_grid;
        let want = 1.0 / 2f64.ln();
        let disk = green_capacity(&Mask::disk(g, Complex64::new(0.0, 0.0), 0.5))?;
        let moved = SymbolSpec::compose(
            SymbolSpec::moebius(Complex64::new(0.3, 0.2), 1.0)?,
            SymbolSpec::dilation(0.5)?,
        )?;
        let image = green_capacity(&rasterize_image(&moved, g)?)?;
        Ok(vec![
            Check::new(4, "cap(0.5 disk)", rel(disk.cap, want) <= 0.02, json!(disk.cap), json!(want))
                .tol(0.02)
                .detail(format!("grid {g}")),
            Check::new(
                4,
                "cap of an automorphism image of 0.5 disk",
                rel(image.cap, want) <= 0.03,
                json!(image.cap),
                json!(want),
            )
            .tol(0.03)
            .detail(format!("automorphism a = 0.3+0.2i, grid {g}")),
        ])
    })
}

fn gamma1(ctx: &Context) -> Vec<Check> {
    let mut out = Vec::new();
    for rho in [1.0f64, 2.0] {
        out.extend(guard(5, &format!("gamma1 law, rho = {rho}"), || {
            let r = (-rho).exp();
            let a: Vec<f64> = (0..ctx.settings.gamma_len).map(|i| r.powi(i as i32)).collect();
            let e = carl_profile(&SingularProfile::exact(a)?, ctx.settings.gamma_n_max)?;
            let g = extract_gamma(&e, 0.5)?;
            let ratio = g.ln().powi(2) / (2.0 * rho);
            Ok(vec![Check::new(
                5,
                format!("(ln gamma1)^2 / (2 ln(1/r)), r = e^-{rho}"),
                (ratio - 1.0).abs() <= 0.1,
                json!(ratio),
                json!(1.0),
            )
            .tol(0.1)
            .detail(format!("gamma1 = {g}"))])
        }));
    }
    out
}

fn entropy_of(p: &SingularProfile, ctx: &Context) -> Result<crate::carl::EntropyProfile> {
    carl_profile_auto(p, 64, ctx.settings.entropy_n_cap)
}

fn lens_1d(ctx: &Context) -> Vec<Check> {
    guard(6, "lens rates", || {
        let p = ctx.lens_profile()?;
        let e = entropy_of(&p, ctx)?;
        Ok(vec![
            model_check(6, "lens a_n family", fit_singular_profile(&p, 1), "n^(1/2)", Some(0.995), None),
            model_check(6, "lens F(n) family", fit_entropy_profile(&e, 1), "n^(1/3)", Some(0.99), None),
        ])
    })
}

fn cusp_1d(ctx: &Context) -> Vec<Check> {
    guard(7, "cusp rates", || {
        let p = ctx.cusp_profile()?;
        let e = entropy_of(&p, ctx)?;
        Ok(vec![
            model_check(7, "cusp a_n family", fit_singular_profile(&p, 1), "n/ln n", None, Some(1e-3)),
            model_check(
                7,
                "cusp F(n) family",
                fit_entropy_profile(&e, 1),
                "n^(1/2)*(ln n)^(-1/2)",
                None,
                Some(1e-3),
            ),
        ])
    })
}

fn interior_2d(ctx: &Context) -> Vec<Check> {
    guard(8, "interior N = 2", || {
        let p = symbol_profile(&SymbolSpec::dilation(0.5)?, ctx.settings.diagonal_k, Route::Monomial)?;
        let t = tensor_spectrum(&p, &p, ctx.settings.interior_count)?;
        let e = entropy_of(&t, ctx)?;
        Ok(vec![model_check(
            8,
            "dilation pair F(n) family",
            fit_entropy_profile(&e, 2),
            "n^(1/3)",
            None,
            None,
        )])
    })
}

fn multilens_2d(ctx: &Context) -> Vec<Check> {
    guard(9, "multi-lens N = 2", || {
        let p = ctx.lens_profile()?;
        let t = tensor_spectrum(&p, &p, ctx.settings.tensor_count)?;
        let e = entropy_of(&t, ctx)?;
        let mut out = vec![
            model_check(9, "lens pair a_n family", fit_singular_profile(&t, 2), "n^(1/4)", None, None),
            model_check(9, "lens pair F(n) family", fit_entropy_profile(&e, 2), "n^(1/5)", None, None),
        ];
        out.push(match cross_validate(&t, ctx) {
            Ok((dev, overlap)) => Check::new(
                9,
                "tensor route vs graded matrix route",
                overlap > 0 && dev <= 0.01,
                json!(dev),
                json!(0.0),
            )
            .tol(0.01)
            .detail(format!("overlap of {overlap} values")),
            Err(e) => Check::failed(9, "tensor route vs graded matrix route", &e),
        });
        Ok(out)
    })
}

/// Largest relative gap between the tensor values and the converged prefix of
/// the graded monomial truncations.
fn cross_validate(t: &SingularProfile, ctx: &Context) -> Result<(f64, usize)> {
    let lens = SymbolSpec::lens(0.5)?;
    let m = MultiSymbol::new(vec![lens.clone(), lens])?;
    let (d1, d2) = ctx.settings.nd_degrees;
    let coarse = singular_values(&build_matrix_nd(&m, d1)?)?;
    let fine = singular_values(&build_matrix_nd(&m, d2)?)?;
    let overlap = agreeing_prefix(&coarse, &fine).min(t.trusted().len());
    let dev = (0..overlap).map(|i| rel(t.values[i], fine.values[i])).fold(0.0, f64::max);
    Ok((dev, overlap))
}

fn multicusp_2d(ctx: &Context) -> Vec<Check> {
    guard(10, "multi-cusp N = 2", || {
        let p = ctx.cusp_profile()?;
        let t = tensor_spectrum(&p, &p, ctx.settings.tensor_count)?;
        let e = entropy_of(&t, ctx)?;
        Ok(vec![
            model_check(10, "cusp pair a_n family", fit_singular_profile(&t, 2), "n^(1/2)/ln n", None, None),
            model_check(
                10,
                "cusp pair F(n) family",
                fit_entropy_profile(&e, 2),
                "n^(1/3)*(ln n)^(-2/3)",
                None,
                None,
            ),
        ])
    })
}

const RHO_GRID: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

fn reduction_gap() -> Result<f64> {
    let mut worst = 0.0f64;
    for rho in RHO_GRID {
        let p = params_from_tau(1.0 / rho, 1)?;
        worst = worst.max((theorem52_bound(&p) - (-(2.0 * rho).sqrt()).exp()).abs());
    }
    Ok(worst)
}

fn formulas(_: &Context) -> Vec<Check> {
    guard(11, "closed formulas", || {
        let slack = (1..=10)
            .map(|n| beta_coefficient(n) - beta_coefficient_lower(n))
            .fold(f64::INFINITY, f64::min);
        let gap = reduction_gap()?;
        let mut gamma_err = 0.0f64;
        for n in 1..=10 {
            let tau: f64 = (1..=n).map(|k| k as f64).product();
            gamma_err = gamma_err.max((params_from_tau(tau, n)?.gamma - (-1f64).exp()).abs());
        }
        Ok(vec![
            Check::new(11, "beta_N >= e^(-1/(N+1)) N^(1/(N+1)), N = 1..10", slack >= 0.0, json!(slack), json!(0.0))
                .detail("measured: smallest beta_N minus its lower bound"),
            Check::new(
                11,
                "N = 1 reduction of the entropy bound, rho in {0.5, 1, 2, 5}",
                gap <= 1e-12,
                json!(gap),
                json!(0.0),
            )
            .tol(1e-12),
            Check::new(11, "tau_N = N! gives Gamma_N = 1/e, N = 1..10", gamma_err <= 1e-12, json!(gamma_err), json!(0.0))
                .tol(1e-12),
        ])
    })
}

fn thm52_consistency(_: &Context) -> Vec<Check> {
    guard(11, "entropy bound consistency", || {
        let beta1 = beta_coefficient(1);
        let grid: Vec<f64> = (1..=100).map(|k| 0.1 * k as f64).chain(RHO_GRID).collect();
        let dev = grid
            .iter()
            .map(|rho| ((-beta1 * rho.sqrt()).exp() * (2.0 * rho).sqrt().exp() - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(vec![Check::new(
            11,
            "max |exp(-beta_1 sqrt(rho)) exp(sqrt(2 rho)) - 1| over rho in [0.1, 10]",
            dev <= 1e-12,
            json!(dev),
            json!(0.0),
        )
        .tol(1e-12)])
    })
}

fn run_one(name: &str, ctx: &Context) -> Result<Vec<Check>> {
    Ok(match name {
        "diagonal" => diagonal(ctx),
        "carl-bracket" => carl_bracket(ctx),
        "beta1" => beta1(ctx),
        "capacity" => capacity(ctx),
        "gamma1" => gamma1(ctx),
        "lens-1d" => lens_1d(ctx),
        "cusp-1d" => cusp_1d(ctx),
        "interior-2d" => interior_2d(ctx),
        "multilens-2d" => multilens_2d(ctx),
        "multicusp-2d" => multicusp_2d(ctx),
        "formulas" => formulas(ctx),
        "thm52-consistency" => thm52_consistency(ctx),
        "all" => {
            let mut all = Vec::new();
            for s in SUITES.iter().filter(|s| **s != "all") {
                all.extend(run_one(s, ctx)?);
            }
            all
        }
        other => {
            return Err(Error::input(format!(
                "unknown suite `{other}`; expected one of {}",
                SUITES.join(", ")
            )))
        }
    })
}

/// Runs a named suite. Unknown names are usage errors; numerical failures
/// inside a suite become failed checks.
pub fn run_suite(name: &str, ctx: &Context) -> Result<SuiteReport> {
    let checks = run_one(name, ctx)?;
    Ok(SuiteReport {
        suite: name.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        let ctx = Context::default();
        for s in ["diagonal", "formulas", "thm52-consistency", "gamma1"] {
            let r = run_suite(s, &ctx).unwrap();
            assert!(r.passed, "{}", serde_json::to_string_pretty(&r).unwrap());
        }
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let e = run_suite("nosuch", &Context::default()).unwrap_err();
        assert!(e.is_usage());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = serde_json::to_string(&run_suite("formulas", &Context::default()).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite("formulas", &Context::default()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn carl_bracket_reports_a_ratio_per_set() {
        let r = run_suite("carl-bracket", &Context::default()).unwrap();
        assert_eq!(r.checks.len(), 4);
        assert!(r.checks.iter().all(|c| c.measured.as_f64().is_some_and(|v| v >= 1.0)));
    }
}
