//! Approximation numbers of truncated operators and their tensor products.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hardy_matrix::{build_matrix_1d, build_matrix_rational, OperatorMatrix};
use crate::jacobi;
use crate::symbols::{ContactSet, SymbolSpec};

/// Multiple of `eps * s_1` below which singular values are not trusted.
pub const NOISE_FACTOR: f64 = 1e3;

/// Relative drift tolerated between consecutive truncations.
pub const CONVERGENCE_TOL: f64 = 0.01;

/// Non-increasing singular values with trust metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularProfile {
    pub values: Vec<f64>,
    pub noise_floor: f64,
    /// Basis size of the truncation the values came from.
    pub truncation_k: usize,
    /// Number of leading values that are trusted.
    pub converged_upto: usize,
}

impl SingularProfile {
    /// Wraps an exactly known sequence; every positive value is trusted.
    pub fn exact(values: Vec<f64>) -> Result<Self> {
        check_sorted(&values)?;
        let s1 = values.first().copied().unwrap_or(0.0);
        let noise_floor = NOISE_FACTOR * f64::EPSILON * s1;
        let converged_upto = values.iter().take_while(|&&v| v > 0.0).count();
        Ok(SingularProfile {
            truncation_k: values.len(),
            values,
            noise_floor,
            converged_upto,
        })
    }

    fn from_computed(values: Vec<f64>, truncation_k: usize) -> Self {
        let s1 = values.first().copied().unwrap_or(0.0);
        let noise_floor = NOISE_FACTOR * f64::EPSILON * s1;
        let converged_upto = values.iter().take_while(|&&v| v > noise_floor).count();
        SingularProfile {
            values,
            noise_floor,
            truncation_k,
            converged_upto,
        }
    }

    /// The trusted prefix.
    pub fn trusted(&self) -> &[f64] {
        &self.values[..self.converged_upto]
    }

    /// Writes `n,a_n,trusted` with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,a_n,trusted")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, v, u8::from(i < self.converged_upto))?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv).
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim().starts_with("n,a_n") => {}
            _ => return Err(Error::input("profile CSV needs the header n,a_n,trusted")),
        }
        let mut values = Vec::new();
        let mut trusted = 0;
        let mut trusted_ended = false;
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(Error::input(format!("profile CSV row {} is malformed", row + 2)));
            }
            let v: f64 = fields[1]
                .parse()
                .map_err(|_| Error::input(format!("profile CSV row {}: bad value", row + 2)))?;
            let t = fields.get(2).is_none_or(|f| *f == "1");
            if t && !trusted_ended {
                trusted += 1;
            } else {
                trusted_ended = true;
            }
            values.push(v);
        }
        check_sorted(&values)?;
        let s1 = values.first().copied().unwrap_or(0.0);
        Ok(SingularProfile {
            truncation_k: values.len(),
            noise_floor: NOISE_FACTOR * f64::EPSILON * s1,
            converged_upto: trusted,
            values,
        })
    }
}

fn check_sorted(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::input("empty singular value sequence"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input("singular values must be finite and non-negative"));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::input("singular values must be non-increasing"));
    }
    Ok(())
}

/// All singular values of `a`, decreasing, by one-sided Jacobi.
pub fn singular_values(a: &OperatorMatrix) -> Result<SingularProfile> {
    let (m, n) = (a.nrows(), a.ncols());
    let values = if a.is_real() {
        let re: Vec<f64> = a.data().iter().map(|c| c.re).collect();
        jacobi::singular_values(re, m, n)?
    } else {
        jacobi::singular_values(a.data().to_vec(), m, n)?
    };
    Ok(SingularProfile::from_computed(values, n))
}

/// How a scalar symbol is turned into a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Square truncation in the monomial basis.
    Monomial,
    /// Rational basis adapted to boundary contact, sampled by quadrature.
    Rational,
}

impl Route {
    /// Monomials for images inside the disk (or automorphism-like maps),
    /// the rational route when the image touches the circle at isolated points.
    pub fn auto(spec: &SymbolSpec) -> Result<Route> {
        Ok(match spec.contact_set()? {
            ContactSet::Points(_) => Route::Rational,
            ContactSet::Interior | ContactSet::Arc => Route::Monomial,
        })
    }

    pub fn build(self, spec: &SymbolSpec, k: usize) -> Result<OperatorMatrix> {
        match self {
            Route::Monomial => build_matrix_1d(spec, k),
            Route::Rational => build_matrix_rational(spec, k),
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::Monomial => "monomial",
            Route::Rational => "rational",
        })
    }
}

/// Singular values of `C_phi` truncated to a basis of size `k`.
pub fn symbol_profile(spec: &SymbolSpec, k: usize, route: Route) -> Result<SingularProfile> {
    singular_values(&route.build(spec, k)?)
}

/// Singular values as a function of the basis size.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub symbol: String,
    pub route: Route,
    pub k_list: Vec<usize>,
    /// `table[i]` holds the profile values for `k_list[i]`.
    pub table: Vec<Vec<f64>>,
    /// `windows[i]`: length of the agreeing prefix between `k_list[i]` and `k_list[i + 1]`.
    pub windows: Vec<usize>,
    pub converged_upto: usize,
    /// Profile at the largest size, with `converged_upto` from the last doubling.
    pub profile: SingularProfile,
}

/// Length of the prefix where `fine` is above its floor and within
/// [`CONVERGENCE_TOL`] of `coarse`.
pub fn agreeing_prefix(coarse: &SingularProfile, fine: &SingularProfile) -> usize {
    let n = coarse.values.len().min(fine.converged_upto);
    (0..n)
        .take_while(|&i| {
            let (a, b) = (coarse.values[i], fine.values[i]);
            b > fine.noise_floor && (a - b).abs() <= CONVERGENCE_TOL * b
        })
        .count()
}

/// Computes profiles for each size in `k_list` (increasing) and trusts the
/// prefix that moved by at most 1% across the last step.
pub fn convergence_study(spec: &SymbolSpec, k_list: &[usize], route: Route) -> Result<ConvergenceReport> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("K list must be non-empty and increasing"));
    }
    let profiles = k_list
        .iter()
        .map(|&k| symbol_profile(spec, k, route))
        .collect::<Result<Vec<_>>>()?;
    let windows: Vec<usize> = profiles.windows(2).map(|p| agreeing_prefix(&p[0], &p[1])).collect();
    let mut profile = profiles.last().cloned().expect("non-empty");
    let converged_upto = windows.last().copied().unwrap_or(profile.converged_upto);
    profile.converged_upto = converged_upto;
    Ok(ConvergenceReport {
        symbol: spec.to_string(),
        route,
        k_list: k_list.to_vec(),
        table: profiles.into_iter().map(|p| p.values).collect(),
        windows,
        converged_upto,
        profile,
    })
}

#[derive(PartialEq)]
struct Cell(f64, usize, usize);

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
            .then_with(|| other.2.cmp(&self.2))
    }
}

/// The `count` largest products `p_i q_j` over the trusted parts, in
/// non-increasing order.
///
/// The result trusts only products above every product that involves an
/// untrusted factor, and above its own noise floor.
pub fn tensor_spectrum(p: &SingularProfile, q: &SingularProfile, count: usize) -> Result<SingularProfile> {
    let (pt, qt) = (p.trusted(), q.trusted());
    if pt.is_empty() || qt.is_empty() {
        return Err(Error::input("tensor_spectrum needs trusted values in both factors"));
    }
    let limit = pt.len().saturating_mul(qt.len());
    if count > limit {
        return Err(Error::input(format!(
            "{count} products requested, only {limit} are reliable"
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut heap = BinaryHeap::new();
    heap.push(Cell(pt[0] * qt[0], 0, 0));
    while out.len() < count {
        let Some(Cell(v, i, j)) = heap.pop() else { break };
        out.push(v);
        if j + 1 < qt.len() {
            heap.push(Cell(pt[i] * qt[j + 1], i, j + 1));
        }
        if j == 0 && i + 1 < pt.len() {
            heap.push(Cell(pt[i + 1] * qt[0], i + 1, 0));
        }
    }
    let noise_floor = NOISE_FACTOR * f64::EPSILON * pt[0] * qt[0];
    // any product with an untrusted factor is at most this
    let mut bound: f64 = 0.0;
    if p.converged_upto < p.values.len() {
        bound = bound.max(p.values[p.converged_upto] * qt[0]);
    }
    if q.converged_upto < q.values.len() {
        bound = bound.max(q.values[q.converged_upto] * pt[0]);
    }
    let cut = bound.max(noise_floor);
    let converged_upto = out.iter().take_while(|&&v| v > cut).count();
    Ok(SingularProfile {
        values: out,
        noise_floor,
        truncation_k: p.truncation_k.saturating_mul(q.truncation_k),
        converged_upto,
    })
}

/// Scales every value, as if the operator were multiplied by `c > 0`.
pub fn scale_profile(p: &SingularProfile, c: f64) -> SingularProfile {
    SingularProfile {
        values: p.values.iter().map(|v| v * c).collect(),
        noise_floor: p.noise_floor * c,
        truncation_k: p.truncation_k,
        converged_upto: p.converged_upto,
    }
}

/// Convenience for building a matrix from explicit rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<OperatorMatrix> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    OperatorMatrix::from_rows(&rows)
}
