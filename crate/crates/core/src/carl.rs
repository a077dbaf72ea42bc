//! The diagonal Carl transform and a covering oracle for small ellipsoids.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::SingularProfile;

/// Multiplicative window allowed between `F(n)` and the covering bracket of `e_n`.
pub const BRACKET_WINDOW: f64 = 8.0;

/// Largest number of grid cells the covering oracle will enumerate.
pub const MAX_GRID_CELLS: u64 = 400_000_000;

/// `F(n) = sup_k exp(-n/k) (sigma_1 ... sigma_k)^{1/k}` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    pub f: Vec<f64>,
    /// `ln F(n)`; finite even where `F(n)` underflows.
    pub ln_f: Vec<f64>,
    pub argmax_k: Vec<usize>,
    /// Number of singular values the transform ranged over.
    pub source_len: usize,
    /// Largest `n` such that every maximizer up to `n` stays strictly inside
    /// the available values, so the result is insensitive to more of them.
    pub trusted_upto: usize,
}

impl EntropyProfile {
    /// Writes `n,F,argmax_k` with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,F,argmax_k")?;
        for (i, (f, k)) in self.f.iter().zip(&self.argmax_k).enumerate() {
            writeln!(w, "{},{},{}", i + 1, f, k)?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv). The source length
    /// is not recorded there, so every row counts as trusted.
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim().starts_with("n,F") => {}
            _ => return Err(Error::input("entropy CSV needs the header n,F,argmax_k")),
        }
        let (mut f, mut argmax_k) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::input(format!("entropy CSV row {} is malformed", row + 2));
            if fields.len() < 3 {
                return Err(bad());
            }
            let v: f64 = fields[1].parse().map_err(|_| bad())?;
            let k: usize = fields[2].parse().map_err(|_| bad())?;
            if v.is_nan() || v <= 0.0 {
                return Err(Error::input(format!("entropy CSV row {}: F must be positive", row + 2)));
            }
            f.push(v);
            argmax_k.push(k);
        }
        Ok(EntropyProfile {
            ln_f: f.iter().map(|v| v.ln()).collect(),
            source_len: argmax_k.iter().max().map_or(0, |k| k + 1),
            trusted_upto: f.len(),
            f,
            argmax_k,
        })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }
}

/// Carl transform of an arbitrary non-increasing sequence.
pub fn carl_transform(sigma: &[f64], n_max: usize) -> Result<EntropyProfile> {
    if sigma.is_empty() {
        return Err(Error::input("empty sequence"));
    }
    if sigma.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input("sequence must be finite and non-negative"));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::input("sequence must be non-increasing"));
    }
    if sigma[0] <= 0.0 {
        return Err(Error::input("largest value must be positive"));
    }
    // beyond the rank the geometric mean vanishes
    let rank = sigma.iter().take_while(|&&v| v > 0.0).count();
    let mut mean_log = Vec::with_capacity(rank);
    let mut s = 0.0;
    for (k, v) in sigma[..rank].iter().enumerate() {
        s += v.ln();
        mean_log.push(s / (k + 1) as f64);
    }
    let mut f = Vec::with_capacity(n_max);
    let mut ln_f = Vec::with_capacity(n_max);
    let mut argmax_k = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let nf = n as f64;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 1;
        for (k, m) in mean_log.iter().enumerate() {
            let v = m - nf / (k + 1) as f64;
            if v > best {
                best = v;
                arg = k + 1;
            }
        }
        ln_f.push(best);
        f.push(best.exp());
        argmax_k.push(arg);
    }
    let trusted_upto = argmax_k.iter().take_while(|&&k| k < sigma.len()).count();
    Ok(EntropyProfile {
        f,
        ln_f,
        argmax_k,
        source_len: sigma.len(),
        trusted_upto,
    })
}

/// Carl transform over the trusted part of a singular profile.
pub fn carl_profile(sigma: &SingularProfile, n_max: usize) -> Result<EntropyProfile> {
    carl_transform(sigma.trusted(), n_max)
}

/// Doubles `n` from `n_start` until the trusted window ends before `n` or
/// `n_cap` is reached.
pub fn carl_profile_auto(sigma: &SingularProfile, n_start: usize, n_cap: usize) -> Result<EntropyProfile> {
    let mut n = n_start.max(1);
    loop {
        let e = carl_profile(sigma, n)?;
        if e.trusted_upto < n || n >= n_cap {
            return Ok(e);
        }
        n = (2 * n).min(n_cap);
    }
}

/// Comparison of recorded maximizers with `floor(sqrt(2 n / rho))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxReport {
    pub rho: f64,
    /// The `n` range examined.
    pub window: (usize, usize),
    pub predicted: Vec<usize>,
    pub max_abs_deviation: usize,
    pub max_rel_deviation: f64,
}

pub fn argmax_diagnostic(profile: &EntropyProfile, rho: f64) -> Result<ArgmaxReport> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::input("rho must be positive"));
    }
    let end = if profile.trusted_upto > 0 {
        profile.trusted_upto
    } else {
        profile.len()
    };
    let mut predicted = Vec::with_capacity(end);
    let mut max_abs = 0;
    let mut max_rel: f64 = 0.0;
    for n in 1..=end {
        let p = ((2.0 * n as f64 / rho).sqrt().floor() as usize).max(1);
        let got = profile.argmax_k[n - 1];
        let dev = got.abs_diff(p);
        max_abs = max_abs.max(dev);
        max_rel = max_rel.max(dev as f64 / p as f64);
        predicted.push(p);
    }
    Ok(ArgmaxReport {
        rho,
        window: (1, end),
        predicted,
        max_abs_deviation: max_abs,
        max_rel_deviation: max_rel,
    })
}

fn check_axes(sigma: &[f64]) -> Result<()> {
    if sigma.is_empty() || sigma.len() > 3 {
        return Err(Error::input("covering oracle supports 1 to 3 axes"));
    }
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::input("semi-axes must be positive"));
    }
    Ok(())
}

/// Volume lower bound `ceil(prod sigma_j / eps^d)`.
fn volume_bound(sigma: &[f64], eps: f64) -> u64 {
    let ratio: f64 = sigma.iter().map(|s| s / eps).product();
    // the small slack absorbs rounding in exact ratios such as 4.000000000000001
    (ratio * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

/// Cells of side `2 eps / sqrt(d)` (diameter `2 eps`) meeting the ellipsoid.
fn grid_bound(sigma: &[f64], eps: f64) -> Result<u64> {
    let d = sigma.len();
    let h = 2.0 * eps / (d as f64).sqrt();
    let per_axis: Vec<u64> = sigma.iter().map(|s| (s / h).ceil() as u64).collect();
    let total: u64 = per_axis.iter().map(|m| 2 * m).product();
    if total > MAX_GRID_CELLS {
        return Err(Error::input(format!(
            "covering grid of {total} cells exceeds the limit {MAX_GRID_CELLS}"
        )));
    }
    // by symmetry count the positive orthant, where a cell [ih, (i+1)h] is
    // closest to the origin at its corner ih
    let mut count = 0u64;
    let mut idx = vec![0u64; d];
    loop {
        let q: f64 = idx
            .iter()
            .zip(sigma)
            .map(|(&i, s)| {
                let x = i as f64 * h / s;
                x * x
            })
            .sum();
        if q <= 1.0 {
            count += 1;
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(count << d);
            }
            idx[axis] += 1;
            if idx[axis] < per_axis[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Brackets the covering number `N(E, eps B)` of the real ellipsoid with semi-axes `sigma`.
pub fn covering_oracle(sigma: &[f64], eps: f64) -> Result<(u64, u64)> {
    check_axes(sigma)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::input("eps must be positive"));
    }
    let lower = volume_bound(sigma, eps);
    let largest = sigma.iter().copied().fold(0.0, f64::max);
    if eps >= largest {
        return Ok((1, 1));
    }
    let upper = grid_bound(sigma, eps)?;
    Ok((lower, upper.max(lower)))
}

/// Bracket of the entropy number `e_n` and its comparison with `F(n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBracket {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub carl: f64,
    pub within_window: bool,
}

/// Bisects `eps` against the covering bounds at threshold `2^{n-1}`.
pub fn entropy_bracket(sigma: &[f64], n: usize) -> Result<EntropyBracket> {
    check_axes(sigma)?;
    if n == 0 || n > 12 {
        return Err(Error::input("entropy_bracket supports 1 <= n <= 12"));
    }
    let mut sorted = sigma.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = 1u64 << (n - 1);
    let s1 = sorted[0];

    // volume count > threshold at lo, <= threshold at hi
    let (mut lo, mut hi) = (0.0, s1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if volume_bound(&sorted, mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lower = lo;

    // the grid count dominates the volume count, so it exceeds the threshold at `lower`
    let (mut glo, mut ghi) = (lower, s1);
    for _ in 0..200 {
        let mid = 0.5 * (glo + ghi);
        if mid <= glo || mid >= ghi {
            break;
        }
        if covering_oracle(&sorted, mid)?.1 > threshold {
            glo = mid;
        } else {
            ghi = mid;
        }
    }
    let upper = ghi;
    let carl = carl_transform(&sorted, n)?.f[n - 1];
    let within_window = carl >= lower / BRACKET_WINDOW && carl <= upper * BRACKET_WINDOW;
    Ok(EntropyBracket {
        n,
        lower,
        upper,
        carl,
        within_window,
    })
}

/// True when `F(n)` lies within the factor-8 window of the covering bracket of `e_n`.
pub fn entropy_bracket_check(sigma: &[f64], n: usize) -> bool {
    entropy_bracket(sigma, n).is_ok_and(|b| b.within_window)
}
