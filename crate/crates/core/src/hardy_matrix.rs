//! Matrices of composition operators on H^2 of the disk and polydisk.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{circle_rule, CircleRuleOptions};
use crate::series;
use crate::symbols::{ContactSet, MultiSymbol, SymbolSpec};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Default cap on the side of an N-dimensional matrix.
pub const DEFAULT_MAX_BASIS: usize = 4096;

const BINARY_MAGIC: [u8; 4] = *b"HCOP";
const FLAG_REAL: u32 = 1;

/// Orthonormal system indexing the columns (and, for monomials, the rows).
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// `1, z, ..., z^{K-1}`.
    Monomial1D { k: usize },
    /// Multi-indices of total degree at most `degree`, graded then lexicographically descending.
    GradedMonomialNd { n: usize, degree: usize },
    /// Malmquist-Takenaka rational functions with the given poles; rows are
    /// weighted boundary quadrature nodes rather than coefficients.
    Rational { poles: Vec<Complex64>, nodes: usize },
}

/// The symbol a matrix was built from.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSymbol {
    Scalar(SymbolSpec),
    Multi(MultiSymbol),
}

/// Dense complex matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    pub basis: Basis,
    pub symbol: Option<MatrixSymbol>,
}

impl OperatorMatrix {
    /// Wraps column-major data.
    pub fn from_columns(rows: usize, cols: usize, data: Vec<Complex64>, basis: Basis) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        Ok(OperatorMatrix {
            rows,
            cols,
            data,
            basis,
            symbol: None,
        })
    }

    /// Square matrix from row-major nested rows, mainly for tests and imports.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::input("ragged rows"));
        }
        let mut data = vec![ZERO; r * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                data[j * r + i] = *v;
            }
        }
        OperatorMatrix::from_columns(r, c, data, Basis::Monomial1D { k: c })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    /// Column-major entries.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|c| c.im == 0.0)
    }

    pub fn scaled(&self, c: f64) -> OperatorMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    /// Writes `row,col,re,im` lines with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                writeln!(w, "{i},{j},{},{}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Binary dump: magic `HCOP`, rows and cols as little-endian `u32`, a flags
    /// word, then row-major entries (`re` only when flag bit 0 marks a real
    /// matrix, else `re, im` pairs) as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::input("matrix too large to dump"))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::input("matrix too large to dump"))?;
        let real = self.is_real();
        w.write_all(&BINARY_MAGIC)?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        w.write_all(&(if real { FLAG_REAL } else { 0 }).to_le_bytes())?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                w.write_all(&v.re.to_le_bytes())?;
                if !real {
                    w.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`write_binary`](Self::write_binary); the basis
    /// is recorded as monomial.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[..4] != BINARY_MAGIC {
            return Err(Error::input("not an operator matrix dump"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let (rows, cols, flags) = (word(4), word(8), word(12) as u32);
        let real = flags & FLAG_REAL != 0;
        let mut data = vec![ZERO; rows * cols];
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        for i in 0..rows {
            for j in 0..cols {
                let re = next(&mut r)?;
                let im = if real { 0.0 } else { next(&mut r)? };
                data[j * rows + i] = Complex64::new(re, im);
            }
        }
        OperatorMatrix::from_columns(rows, cols, data, Basis::Monomial1D { k: cols })
    }
}

/// `K x K` matrix whose column `j` holds the first `K` Taylor coefficients of `phi^j`.
pub fn build_matrix_1d(spec: &SymbolSpec, k: usize) -> Result<OperatorMatrix> {
    if k < 2 {
        return Err(Error::input("build_matrix_1d needs K >= 2"));
    }
    let sup = spec.sup_norm(1e-10)?;
    if sup > 1.0 + 1e-9 {
        return Err(Error::InvalidSymbol(format!("{spec} is not a self-map: sup norm {sup}")));
    }
    let c = spec.taylor_coeffs(k)?;
    let mut data = Vec::with_capacity(k * k);
    for col in series::powers(&c.coeffs, k, k) {
        data.extend(col);
    }
    let mut m = OperatorMatrix::from_columns(k, k, data, Basis::Monomial1D { k })?;
    m.symbol = Some(MatrixSymbol::Scalar(spec.clone()));
    Ok(m)
}

/// Multi-indices of `n` variables with total degree at most `degree`, graded,
/// each degree block in lexicographically descending order.
pub fn graded_multi_indices(n: usize, degree: usize) -> Vec<Vec<usize>> {
    fn block(n: usize, deg: usize, out: &mut Vec<Vec<usize>>, prefix: &mut Vec<usize>) {
        if n == 1 {
            prefix.push(deg);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=deg).rev() {
            prefix.push(first);
            block(n - 1, deg - first, out, prefix);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for deg in 0..=degree {
        block(n, deg, &mut out, &mut Vec::with_capacity(n));
    }
    out
}

/// `C(d + n, n)`, saturating.
pub fn graded_basis_size(n: usize, degree: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = acc * (degree as u128 + i) / i;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Matrix of a coordinatewise map on the graded monomial basis of total degree `<= d`.
pub fn build_matrix_nd(m: &MultiSymbol, d: usize) -> Result<OperatorMatrix> {
    build_matrix_nd_with_limit(m, d, DEFAULT_MAX_BASIS)
}

pub fn build_matrix_nd_with_limit(m: &MultiSymbol, d: usize, max_basis: usize) -> Result<OperatorMatrix> {
    let n = m.dim();
    if n < 2 {
        return Err(Error::input("build_matrix_nd needs at least two coordinates"));
    }
    if d < 1 {
        return Err(Error::input("build_matrix_nd needs degree cap d >= 1"));
    }
    let size = graded_basis_size(n, d);
    if size > max_basis {
        return Err(Error::BasisOverflow { size, limit: max_basis });
    }
    let factors = m
        .components
        .iter()
        .map(|c| build_matrix_1d(c, d + 1))
        .collect::<Result<Vec<_>>>()?;
    let idx = graded_multi_indices(n, d);
    let mut data = vec![ZERO; size * size];
    for (col, alpha) in idx.iter().enumerate() {
        let out = &mut data[col * size..(col + 1) * size];
        for (row, beta) in idx.iter().enumerate() {
            let mut v = ONE;
            for (f, (&b, &a)) in factors.iter().zip(beta.iter().zip(alpha)) {
                v *= f.get(b, a);
                if v.re == 0.0 && v.im == 0.0 {
                    break;
                }
            }
            out[row] = v;
        }
    }
    series::flush(&mut data);
    let mut mat = OperatorMatrix::from_columns(size, size, data, Basis::GradedMonomialNd { n, degree: d })?;
    mat.symbol = Some(MatrixSymbol::Multi(m.clone()));
    Ok(mat)
}

/// Layout of the rational route.
#[derive(Debug, Clone, Copy)]
pub struct RationalOptions {
    /// Fraction of the basis spent on the pole at the origin (monomials).
    pub monomial_share: f64,
    /// Largest and smallest distance `delta` of the contact poles `phi(xi (1 - delta))` from the tip.
    pub delta_max: f64,
    pub delta_min: f64,
    pub rule: CircleRuleOptions,
}

impl Default for RationalOptions {
    fn default() -> Self {
        RationalOptions {
            monomial_share: 0.25,
            delta_max: 0.5,
            delta_min: 1e-14,
            rule: CircleRuleOptions::default(),
        }
    }
}

/// Poles for a basis of size `k`: the origin, then poles clustered toward each
/// contact point of the image along the image of the radius ending there.
pub fn rational_poles(spec: &SymbolSpec, k: usize, contacts: &[f64], opts: &RationalOptions) -> Vec<Complex64> {
    if contacts.is_empty() {
        return vec![ZERO; k];
    }
    let nc = contacts.len();
    let base = ((k as f64 * opts.monomial_share).round() as usize).clamp(1, k);
    let per = (k - base) / nc;
    let p = k - per * nc;
    let mut poles = vec![ZERO; p];
    for &t0 in contacts {
        let xi = Complex64::from_polar(1.0, t0);
        for j in 0..per {
            let frac = if per > 1 { j as f64 / (per - 1) as f64 } else { 0.0 };
            let delta = opts.delta_max * (opts.delta_min / opts.delta_max).powf(frac);
            poles.push(spec.eval_unchecked(xi * (1.0 - delta)));
        }
    }
    poles
}

/// Values of the Malmquist-Takenaka functions for `poles` at `w`, written into `out`.
pub fn mt_basis_row(poles: &[Complex64], w: Complex64, out: &mut [Complex64]) {
    let mut acc = ONE;
    for (slot, &a) in out.iter_mut().zip(poles) {
        let d = ONE - a.conj() * w;
        *slot = acc * ((1.0 - a.norm_sqr()).sqrt() / d);
        acc *= (w - a) / d;
    }
}

/// Rational route for symbols whose image touches the circle.
///
/// Column `k` samples `C_phi B_k = B_k o phi` at the nodes of a boundary rule
/// graded toward the contact preimages, weighted by the square roots of the
/// rule weights, so that `A^* A` is the Gram matrix of `{C_phi B_k}` in `H^2`.
pub fn build_matrix_rational(spec: &SymbolSpec, k: usize) -> Result<OperatorMatrix> {
    build_matrix_rational_with(spec, k, &RationalOptions::default())
}

pub fn build_matrix_rational_with(spec: &SymbolSpec, k: usize, opts: &RationalOptions) -> Result<OperatorMatrix> {
    if k < 2 {
        return Err(Error::input("build_matrix_rational needs K >= 2"));
    }
    spec.validate()?;
    let contacts = match spec.contact_set()? {
        ContactSet::Interior => Vec::new(),
        ContactSet::Points(p) => p,
        ContactSet::Arc => {
            return Err(Error::InvalidSymbol(format!(
                "{spec} maps an arc of the circle onto the circle; use the monomial route"
            )))
        }
    };
    let poles = rational_poles(spec, k, &contacts, opts);
    let rule = circle_rule(&contacts, opts.rule);
    let m = rule.nodes.len();
    let mut data = vec![ZERO; m * k];
    let mut row = vec![ZERO; k];
    for (i, (&t, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let img = spec.eval_unchecked(Complex64::from_polar(1.0, t));
        mt_basis_row(&poles, img, &mut row);
        let sw = w.sqrt();
        for (j, v) in row.iter().enumerate() {
            data[j * m + i] = v * sw;
        }
    }
    series::flush(&mut data);
    let mut mat = OperatorMatrix::from_columns(m, k, data, Basis::Rational { poles, nodes: m })?;
    mat.symbol = Some(MatrixSymbol::Scalar(spec.clone()));
    Ok(mat)
}

/// Largest deviation of the quadrature Gram matrix of the basis itself from the identity.
pub fn rational_orthonormality_defect(spec: &SymbolSpec, k: usize, opts: &RationalOptions) -> Result<f64> {
    let contacts = match spec.contact_set()? {
        ContactSet::Points(p) => p,
        _ => Vec::new(),
    };
    let poles = rational_poles(spec, k, &contacts, opts);
    let rule = circle_rule(&contacts, opts.rule);
    let mut gram = vec![ZERO; k * k];
    let mut row = vec![ZERO; k];
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        mt_basis_row(&poles, Complex64::from_polar(1.0, t), &mut row);
        for i in 0..k {
            let ci = row[i].conj() * w;
            for j in 0..k {
                gram[i * k + j] += ci * row[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[i * k + j] - target).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn dilation_is_diagonal() {
        let m = build_matrix_1d(&SymbolSpec::dilation(0.5).unwrap(), 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.5f64.powi(i as i32) } else { 0.0 };
                assert_eq!(m.get(i, j), c(want));
            }
        }
    }

    #[test]
    fn square_map_is_a_permutation_pattern() {
        let m = build_matrix_1d(&"poly:0,0,1".parse().unwrap(), 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.get(i, j), c(if i == 2 * j { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn hand_expansion_of_half_z_plus_z_squared() {
        let m = build_matrix_1d(&"poly:0,0.5,0.5".parse().unwrap(), 4).unwrap();
        assert_eq!(m.column(0), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(m.column(1), &[c(0.0), c(0.5), c(0.5), c(0.0)]);
        assert_eq!(m.column(2), &[c(0.0), c(0.0), c(0.25), c(0.5)]);
    }

    #[test]
    fn nested_truncations_agree() {
        let exact: SymbolSpec = "poly:0.1,0.4,0.3".parse().unwrap();
        let small = build_matrix_1d(&exact, 8).unwrap();
        let big = build_matrix_1d(&exact, 16).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(small.get(i, j), big.get(i, j));
            }
        }
        let lens = SymbolSpec::lens(0.5).unwrap();
        let small = build_matrix_1d(&lens, 32).unwrap();
        let big = build_matrix_1d(&lens, 64).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                assert!((small.get(i, j) - big.get(i, j)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn column_norms_within_budget() {
        for s in ["lens:0.5", "cusp", "moebius:0.3+0.2i,0.9", "poly:0,0.5,0.5"] {
            let m = build_matrix_1d(&s.parse().unwrap(), 48).unwrap();
            for j in 0..48 {
                let n2: f64 = m.column(j).iter().map(|v| v.norm_sqr()).sum();
                assert!(n2 <= 1.0 + 1e-10, "{s} column {j}: {n2}");
            }
        }
    }

    #[test]
    fn graded_order() {
        let idx = graded_multi_indices(2, 2);
        let want: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(idx, want);
        assert_eq!(graded_multi_indices(3, 4).len(), graded_basis_size(3, 4));
        assert_eq!(graded_basis_size(2, 60), 1891);
    }

    #[test]
    fn nd_dilations_are_diagonal() {
        let m: MultiSymbol = "prod(dilation:0.5,dilation:0.3)".parse().unwrap();
        let a = build_matrix_nd(&m, 2).unwrap();
        let idx = graded_multi_indices(2, 2);
        for (i, beta) in idx.iter().enumerate() {
            for (j, alpha) in idx.iter().enumerate() {
                let want = if i == j {
                    0.5f64.powi(alpha[0] as i32) * 0.3f64.powi(alpha[1] as i32)
                } else {
                    0.0
                };
                assert!((a.get(i, j) - c(want)).norm() < 1e-16, "{beta:?} {alpha:?}");
            }
        }
    }

    #[test]
    fn nd_square_map_entry() {
        let m: MultiSymbol = "prod(poly:0,0,1,dilation:0.5)".parse().unwrap();
        let a = build_matrix_nd(&m, 2).unwrap();
        let idx = graded_multi_indices(2, 2);
        let col = idx.iter().position(|a| a == &vec![1, 0]).unwrap();
        let row = idx.iter().position(|a| a == &vec![2, 0]).unwrap();
        assert_eq!(a.get(row, col), c(1.0));
        let nonzero = (0..idx.len()).filter(|&r| a.get(r, col).norm() > 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn nd_limits() {
        let m: MultiSymbol = "prod(dilation:0.5,dilation:0.5)".parse().unwrap();
        assert!(matches!(
            build_matrix_nd_with_limit(&m, 10, 50),
            Err(Error::BasisOverflow { size: 66, limit: 50 })
        ));
        let single: MultiSymbol = "dilation:0.5".parse().unwrap();
        assert!(build_matrix_nd(&single, 3).is_err());
    }

    #[test]
    fn rational_basis_is_orthonormal_under_the_rule() {
        let lens = SymbolSpec::lens(0.5).unwrap();
        let defect = rational_orthonormality_defect(&lens, 128, &RationalOptions::default()).unwrap();
        assert!(defect < 1e-9, "{defect}");
    }

    #[test]
    fn rational_route_reduces_to_monomials_for_interior_maps() {
        // all poles at 0: columns sample phi^j on the circle
        let d = SymbolSpec::dilation(0.5).unwrap();
        let a = build_matrix_rational(&d, 6).unwrap();
        for j in 0..6 {
            let n2: f64 = a.column(j).iter().map(|v| v.norm_sqr()).sum();
            assert!((n2 - 0.25f64.powi(j as i32)).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let m = build_matrix_1d(&"moebius:0.3+0.1i,0.8".parse().unwrap(), 5).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 25 * 16);
        let back = OperatorMatrix::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.data(), m.data());

        let real = build_matrix_1d(&SymbolSpec::dilation(0.5).unwrap(), 4).unwrap();
        let mut buf = Vec::new();
        real.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 8);
        assert_eq!(&buf[..4], b"HCOP");

        let mut csv = Vec::new();
        real.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next(), Some("row,col,re,im"));
        assert_eq!(text.lines().count(), 17);
        assert!(text.contains("\n1,1,0.5,0\n"));
    }
}
