//! Analytic self-maps of the disk and coordinatewise maps of the polydisk.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Points this far outside the closed disk are still accepted as boundary points.
const BOUNDARY_SLACK: f64 = 1e-12;

/// A one-dimensional analytic self-map of the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSpec {
    /// `z -> r z`.
    Dilation { r: f64 },
    /// `z -> s (a - z) / (1 - conj(a) z)`.
    Moebius { a: Complex64, s: f64 },
    /// The lens map of parameter `theta`, touching the circle at `+1` and `-1`.
    Lens { theta: f64 },
    /// A map onto a zero-angle cusp domain with its tip at `1`.
    Cusp,
    /// `z -> sum c_m z^m`.
    Polynomial { coeffs: Vec<Complex64> },
    /// `z -> outer(inner(z))`.
    Composite { outer: Box<SymbolSpec>, inner: Box<SymbolSpec> },
}

/// Where the closure of the image meets the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub enum ContactSet {
    /// The image is relatively compact in the disk.
    Interior,
    /// Isolated contact; boundary angles `t` in `[-pi, pi)` with `|phi(e^{it})| = 1`.
    Points(Vec<f64>),
    /// The boundary is mapped onto a full arc, as for automorphisms.
    Arc,
}

/// Truncated Taylor coefficients with their sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSeries {
    pub coeffs: Vec<Complex64>,
    /// Radius of the sampling circle; `0` when the coefficients are exact.
    pub radius: f64,
    /// Number of boundary samples used; `0` when the coefficients are exact.
    pub samples: usize,
}

/// Controls for the sampled coefficient extraction.
#[derive(Debug, Clone, Copy)]
pub struct CoeffOptions {
    /// Largest admissible change of any retained coefficient under sample doubling.
    pub tol: f64,
    /// Give up once the sample count exceeds this.
    pub max_samples: usize,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions {
            tol: 1e-12,
            max_samples: 1 << 24,
        }
    }
}

impl SymbolSpec {
    pub fn dilation(r: f64) -> Result<Self> {
        let s = SymbolSpec::Dilation { r };
        s.check_params()?;
        Ok(s)
    }

    pub fn moebius(a: Complex64, s: f64) -> Result<Self> {
        let m = SymbolSpec::Moebius { a, s };
        m.check_params()?;
        Ok(m)
    }

    pub fn lens(theta: f64) -> Result<Self> {
        let s = SymbolSpec::Lens { theta };
        s.check_params()?;
        Ok(s)
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        let s = SymbolSpec::Polynomial { coeffs };
        s.validate()?;
        Ok(s)
    }

    pub fn compose(outer: SymbolSpec, inner: SymbolSpec) -> Result<Self> {
        let s = SymbolSpec::Composite {
            outer: Box::new(outer),
            inner: Box::new(inner),
        };
        s.check_params()?;
        Ok(s)
    }

    fn check_params(&self) -> Result<()> {
        match self {
            SymbolSpec::Dilation { r } => {
                if !(r.is_finite() && *r > 0.0 && *r < 1.0) {
                    return Err(Error::InvalidSymbol(format!("dilation needs 0 < r < 1, got {r}")));
                }
            }
            SymbolSpec::Moebius { a, s } => {
                if !(a.re.is_finite() && a.im.is_finite() && a.norm() < 1.0) {
                    return Err(Error::InvalidSymbol(format!("moebius needs |a| < 1, got {a}")));
                }
                if !(s.is_finite() && *s > 0.0 && *s <= 1.0) {
                    return Err(Error::InvalidSymbol(format!("moebius needs 0 < s <= 1, got {s}")));
                }
            }
            SymbolSpec::Lens { theta } => {
                if !(theta.is_finite() && *theta > 0.0 && *theta < 1.0) {
                    return Err(Error::InvalidSymbol(format!("lens needs 0 < theta < 1, got {theta}")));
                }
            }
            SymbolSpec::Cusp => {}
            SymbolSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidSymbol("polynomial without coefficients".into()));
                }
                if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                    return Err(Error::InvalidSymbol("non-finite polynomial coefficient".into()));
                }
            }
            SymbolSpec::Composite { outer, inner } => {
                outer.check_params()?;
                inner.check_params()?;
            }
        }
        Ok(())
    }

    /// Checks parameters and that polynomial parts map the disk into its closure.
    pub fn validate(&self) -> Result<()> {
        self.check_params()?;
        match self {
            SymbolSpec::Polynomial { .. } => {
                let sup = self.sup_norm(1e-10)?;
                if sup > 1.0 + 1e-9 {
                    return Err(Error::InvalidSymbol(format!(
                        "polynomial leaves the disk: sup norm {sup}"
                    )));
                }
            }
            SymbolSpec::Composite { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `phi(z)` for `|z| <= 1`.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1.0 + BOUNDARY_SLACK {
            return Err(Error::Domain(z));
        }
        self.check_params()?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            SymbolSpec::Dilation { r } => z * *r,
            SymbolSpec::Moebius { a, s } => (*a - z) / (ONE - a.conj() * z) * *s,
            SymbolSpec::Lens { theta } => lens(*theta, z),
            SymbolSpec::Cusp => cusp(z),
            SymbolSpec::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
            }
            SymbolSpec::Composite { outer, inner } => {
                let mut w = inner.eval_unchecked(z);
                let m = w.norm();
                if m > 1.0 {
                    w /= m;
                }
                outer.eval_unchecked(w)
            }
        }
    }

    /// Central-difference derivative with step `1e-6`, for interior points.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        const H: f64 = 1e-6;
        if z.norm() > 1.0 - 2.0 * H {
            return Err(Error::Domain(z));
        }
        self.check_params()?;
        let h = Complex64::new(H, 0.0);
        Ok((self.eval_unchecked(z + h) - self.eval_unchecked(z - h)) / (2.0 * H))
    }

    /// Taylor coefficients `c_0 .. c_{k-1}` with default options.
    pub fn taylor_coeffs(&self, k: usize) -> Result<CoeffSeries> {
        self.taylor_coeffs_with(k, CoeffOptions::default())
    }

    /// Taylor coefficients `c_0 .. c_{k-1}`.
    ///
    /// Dilations and polynomials are exact. Everything else is sampled on the
    /// circle of radius `exp(-2/k)` and transformed, doubling the sample count
    /// until two consecutive passes agree to `opts.tol`.
    pub fn taylor_coeffs_with(&self, k: usize, opts: CoeffOptions) -> Result<CoeffSeries> {
        if k == 0 {
            return Err(Error::input("taylor_coeffs needs k >= 1"));
        }
        self.validate()?;
        let exact = |coeffs: Vec<Complex64>| CoeffSeries {
            coeffs,
            radius: 0.0,
            samples: 0,
        };
        match self {
            SymbolSpec::Dilation { r } => {
                let mut c = vec![ZERO; k];
                if k > 1 {
                    c[1] = Complex64::new(*r, 0.0);
                }
                return Ok(exact(c));
            }
            SymbolSpec::Polynomial { coeffs } => {
                let mut c = vec![ZERO; k];
                for (dst, src) in c.iter_mut().zip(coeffs) {
                    *dst = *src;
                }
                return Ok(exact(c));
            }
            _ => {}
        }
        let radius = (-2.0 / k as f64).exp();
        let mut m = (16 * k).next_power_of_two().max(64);
        let mut prev = sampled_coeffs(self, k, radius, m);
        loop {
            m *= 2;
            if m > opts.max_samples {
                return Err(Error::NonConvergence {
                    what: "taylor_coeffs",
                    detail: format!("no agreement to {} within {} samples", opts.tol, opts.max_samples),
                });
            }
            let next = sampled_coeffs(self, k, radius, m);
            let change = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if change <= opts.tol {
                let energy: f64 = next.iter().map(|c| c.norm_sqr()).sum();
                let sup = self.sup_norm(1e-10)?;
                if energy > sup * sup * (1.0 + 1e-8) + 1e-12 {
                    return Err(Error::NonConvergence {
                        what: "taylor_coeffs",
                        detail: format!("coefficient energy {energy} exceeds sup-norm budget {}", sup * sup),
                    });
                }
                return Ok(CoeffSeries {
                    coeffs: next,
                    radius,
                    samples: m,
                });
            }
            prev = next;
        }
    }

    /// `sup |phi|` over the disk, located on the boundary by mesh refinement.
    pub fn sup_norm(&self, tol: f64) -> Result<f64> {
        self.check_params()?;
        match self {
            SymbolSpec::Dilation { r } => return Ok(*r),
            SymbolSpec::Moebius { s, .. } => return Ok(*s),
            SymbolSpec::Lens { .. } | SymbolSpec::Cusp => return Ok(1.0),
            _ => {}
        }
        let tol = tol.max(1e-15);
        let mut m = 1024usize;
        let mut best = self.boundary_max(m).0;
        let at = loop {
            m *= 2;
            let (b, t) = self.boundary_max(m);
            let done = (b - best).abs() <= tol || m >= 1 << 20;
            best = b;
            if done {
                break t;
            }
        };
        let step = 2.0 * PI / m as f64;
        let refined = self.golden_max(at - step, at + step);
        Ok(best.max(refined))
    }

    fn boundary_abs(&self, t: f64) -> f64 {
        self.eval_unchecked(Complex64::from_polar(1.0, t)).norm()
    }

    fn boundary_max(&self, m: usize) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..m {
            let t = -PI + 2.0 * PI * i as f64 / m as f64;
            let v = self.boundary_abs(t);
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    }

    fn golden_max(&self, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (self.boundary_abs(x1), self.boundary_abs(x2));
        for _ in 0..80 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.boundary_abs(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.boundary_abs(x1);
            }
        }
        f1.max(f2)
    }

    /// Boundary contact of the image closure.
    pub fn contact_set(&self) -> Result<ContactSet> {
        self.check_params()?;
        Ok(match self {
            SymbolSpec::Dilation { .. } => ContactSet::Interior,
            SymbolSpec::Moebius { s, .. } if *s < 1.0 => ContactSet::Interior,
            SymbolSpec::Moebius { .. } => ContactSet::Arc,
            SymbolSpec::Lens { .. } => ContactSet::Points(vec![-PI, 0.0]),
            SymbolSpec::Cusp => ContactSet::Points(vec![0.0]),
            _ => self.search_contacts()?,
        })
    }

    fn search_contacts(&self) -> Result<ContactSet> {
        if self.sup_norm(1e-12)? < 1.0 - 1e-9 {
            return Ok(ContactSet::Interior);
        }
        let m = 4096;
        let vals: Vec<f64> = (0..m)
            .map(|i| self.boundary_abs(-PI + 2.0 * PI * i as f64 / m as f64))
            .collect();
        let step = 2.0 * PI / m as f64;
        let mut pts = Vec::new();
        for i in 0..m {
            let (l, c, r) = (vals[(i + m - 1) % m], vals[i], vals[(i + 1) % m]);
            if c >= l && c > r && c > 1.0 - 1e-6 {
                let t0 = -PI + step * i as f64;
                let t = self.golden_arg(t0 - step, t0 + step);
                if self.boundary_abs(t) > 1.0 - 1e-9 {
                    pts.push(wrap_angle(t));
                }
            }
        }
        if pts.len() > 16 || vals.iter().filter(|&&v| v > 1.0 - 1e-9).count() > m / 8 {
            return Ok(ContactSet::Arc);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        Ok(if pts.is_empty() {
            ContactSet::Interior
        } else {
            ContactSet::Points(pts)
        })
    }

    fn golden_arg(&self, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if self.boundary_abs(x1) < self.boundary_abs(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        0.5 * (lo + hi)
    }
}

fn wrap_angle(t: f64) -> f64 {
    let mut t = (t + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t -= 2.0 * PI;
    }
    t
}

fn cpow(w: Complex64, p: f64) -> Complex64 {
    if w.re == 0.0 && w.im == 0.0 {
        ZERO
    } else {
        w.powf(p)
    }
}

fn lens(theta: f64, z: Complex64) -> Complex64 {
    let u = cpow(ONE + z, theta);
    let v = cpow(ONE - z, theta);
    let den = u + v;
    if den.norm() == 0.0 {
        return ZERO;
    }
    (u - v) / den
}

/// Branch of `asinh` that is continuous on the closed right half-plane.
fn asinh_right(p: Complex64) -> Complex64 {
    let s = (p * p + ONE).sqrt();
    let a = p + s;
    let b = p - s;
    if a.norm() >= b.norm() {
        a.ln()
    } else {
        (-b).ln()
    }
}

fn cusp(z: Complex64) -> Complex64 {
    let d = ONE - z;
    if d.norm() < 1e-300 {
        return ONE;
    }
    let mut p = (ONE + z) / d;
    if !(p.re.is_finite() && p.im.is_finite()) {
        return ONE;
    }
    if p.re < 0.0 {
        p = Complex64::new(0.0, p.im);
    }
    ONE - ONE / (ONE + asinh_right(p))
}

fn sampled_coeffs(spec: &SymbolSpec, k: usize, radius: f64, m: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            spec.eval_unchecked(Complex64::from_polar(radius, t))
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let mut out = Vec::with_capacity(k);
    let mut rm = 1.0;
    for c in buf.iter().take(k) {
        out.push(c * (scale / rm));
        rm *= radius;
    }
    out
}

/// A coordinatewise map `(z_1, ..., z_N) -> (phi_1(z_1), ..., phi_N(z_N))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSymbol {
    pub components: Vec<SymbolSpec>,
}

impl MultiSymbol {
    pub fn new(components: Vec<SymbolSpec>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidSymbol("product map without components".into()));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(MultiSymbol { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn evaluate(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.len() != self.dim() {
            return Err(Error::input(format!(
                "point has {} coordinates, map has {}",
                z.len(),
                self.dim()
            )));
        }
        self.components.iter().zip(z).map(|(c, &w)| c.evaluate(w)).collect()
    }

    /// Jacobian determinant `prod phi_i'(z_i)`.
    pub fn jacobian_det(&self, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.dim() {
            return Err(Error::input("dimension mismatch in jacobian_det"));
        }
        let mut det = ONE;
        for (c, &w) in self.components.iter().zip(z) {
            det *= c.derivative(w)?;
        }
        Ok(det)
    }
}

/// True when `|det phi'(z)| > 1e-12` at the origin or at one of `samples`
/// quasi-random points of the polydisk.
pub fn non_degenerate(m: &MultiSymbol, samples: usize) -> bool {
    let n = m.dim();
    let alphas = r_sequence_alphas(2 * n);
    let point = |k: usize| -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let u = (0.5 + alphas[2 * i] * k as f64).fract();
                let v = (0.5 + alphas[2 * i + 1] * k as f64).fract();
                Complex64::from_polar(0.9 * u.sqrt(), 2.0 * PI * v)
            })
            .collect()
    };
    let origin = vec![ZERO; n];
    std::iter::once(origin)
        .chain((1..=samples).map(point))
        .any(|z| matches!(m.jacobian_det(&z), Ok(d) if d.norm() > 1e-12))
}

/// Additive-recurrence constants from the generalized golden ratio.
fn r_sequence_alphas(d: usize) -> Vec<f64> {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|j| g.powi(-(j as i32)).fract()).collect()
}

fn fmt_complex(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(f, "{}", c.re)
    } else if c.re == 0.0 {
        write!(f, "{}i", c.im)
    } else if c.im < 0.0 {
        write!(f, "{}{}i", c.re, c.im)
    } else {
        write!(f, "{}+{}i", c.re, c.im)
    }
}

impl fmt::Display for SymbolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolSpec::Dilation { r } => write!(f, "dilation:{r}"),
            SymbolSpec::Moebius { a, s } => {
                write!(f, "moebius:")?;
                fmt_complex(*a, f)?;
                write!(f, ",{s}")
            }
            SymbolSpec::Lens { theta } => write!(f, "lens:{theta}"),
            SymbolSpec::Cusp => write!(f, "cusp"),
            SymbolSpec::Polynomial { coeffs } => {
                write!(f, "poly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    fmt_complex(*c, f)?;
                }
                Ok(())
            }
            SymbolSpec::Composite { outer, inner } => write!(f, "comp({outer},{inner})"),
        }
    }
}

impl fmt::Display for MultiSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.len() == 1 {
            return write!(f, "{}", self.components[0]);
        }
        write!(f, "prod(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Parses `re`, `re+imi`, `re-imi` or `imi`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (body[..i].parse::<f64>().ok()?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().ok()?,
    };
    Some(Complex64::new(re, im))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            input: self.src.to_string(),
            reason: reason.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}' at offset {}", self.pos)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err(format!("expected a symbol name at offset {}", self.pos)));
        }
        let id = self.rest()[..len].to_ascii_lowercase();
        self.pos += len;
        Ok(id)
    }

    fn token(&self) -> &'a str {
        let rest = self.rest();
        let end = rest.find([',', ')', '(']).unwrap_or(rest.len());
        &rest[..end]
    }

    fn numbers(&mut self) -> Result<Vec<Complex64>> {
        let mut out = Vec::new();
        loop {
            let before_comma = self.pos;
            if !out.is_empty() && !self.eat(',') {
                break;
            }
            self.skip_ws();
            let tok = self.token();
            match parse_complex(tok) {
                Some(c) => {
                    out.push(c);
                    self.pos += tok.len();
                }
                None if out.is_empty() => {
                    return Err(self.err(format!("expected a number, found {tok:?}")));
                }
                None => {
                    // the comma belongs to the enclosing list
                    self.pos = before_comma;
                    break;
                }
            }
        }
        Ok(out)
    }

    fn real(&self, c: Complex64, what: &str) -> Result<f64> {
        if c.im != 0.0 {
            return Err(self.err(format!("{what} must be real")));
        }
        Ok(c.re)
    }

    fn spec(&mut self) -> Result<SymbolSpec> {
        let name = self.ident()?;
        let spec = match name.as_str() {
            "comp" | "compose" => {
                self.expect('(')?;
                let outer = self.spec()?;
                self.expect(',')?;
                let inner = self.spec()?;
                self.expect(')')?;
                SymbolSpec::Composite {
                    outer: Box::new(outer),
                    inner: Box::new(inner),
                }
            }
            "cusp" => SymbolSpec::Cusp,
            "dilation" | "dil" | "lens" | "moebius" | "mobius" | "poly" | "polynomial" => {
                self.expect(':')?;
                let args = self.numbers()?;
                match name.as_str() {
                    "dilation" | "dil" => {
                        if args.len() != 1 {
                            return Err(self.err("dilation takes one parameter"));
                        }
                        SymbolSpec::Dilation {
                            r: self.real(args[0], "dilation radius")?,
                        }
                    }
                    "lens" => {
                        if args.len() != 1 {
                            return Err(self.err("lens takes one parameter"));
                        }
                        SymbolSpec::Lens {
                            theta: self.real(args[0], "lens parameter")?,
                        }
                    }
                    "moebius" | "mobius" => {
                        let s = match args.len() {
                            1 => 1.0,
                            2 => self.real(args[1], "moebius scale")?,
                            _ => return Err(self.err("moebius takes a and an optional scale")),
                        };
                        SymbolSpec::Moebius { a: args[0], s }
                    }
                    _ => SymbolSpec::Polynomial { coeffs: args },
                }
            }
            other => return Err(self.err(format!("unknown symbol kind {other:?}"))),
        };
        spec.check_params()?;
        Ok(spec)
    }

    fn finish(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err(format!("trailing input at offset {}", self.pos)));
        }
        Ok(())
    }
}

impl FromStr for SymbolSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        let spec = p.spec()?;
        p.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

impl FromStr for MultiSymbol {
    type Err = Error;

    /// Accepts `prod(spec, spec, ...)` or a single spec.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { src: s, pos: 0 };
        p.skip_ws();
        let lower = p.rest().to_ascii_lowercase();
        if !(lower.starts_with("prod(") || lower.starts_with("prod (")) {
            return MultiSymbol::new(vec![s.parse()?]);
        }
        p.ident()?;
        p.expect('(')?;
        let mut comps = vec![p.spec()?];
        while p.eat(',') {
            comps.push(p.spec()?);
        }
        p.expect(')')?;
        p.finish()?;
        MultiSymbol::new(comps)
    }
}
