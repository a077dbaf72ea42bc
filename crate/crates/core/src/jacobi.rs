//! One-sided Jacobi singular values with de Rijk pivoting.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 60;

pub(crate) trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn abs2(self) -> f64;
    fn abs(self) -> f64;
    fn conj(self) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// `x^H y`.
fn dot<T: Field>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a.conj() * b)
}

/// Euclidean norm, scaled against underflow.
fn norm<T: Field>(x: &[T]) -> f64 {
    let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 || !big.is_finite() {
        return big;
    }
    let inv = 1.0 / big;
    big * x.iter().map(|v| v.scale(inv).abs2()).sum::<f64>().sqrt()
}

/// Squared norm, with the scaled path only near under- or overflow.
fn norm2<T: Field>(x: &[T]) -> f64 {
    let s: f64 = x.iter().map(|v| v.abs2()).sum();
    if s.is_finite() && s > 1e-280 {
        s
    } else {
        norm(x).powi(2)
    }
}

/// Householder QR of the column-major `m x n` matrix (`m >= n`); returns `R`
/// column-major `n x n`.
pub(crate) fn qr_r<T: Field>(a: &mut [T], m: usize, n: usize) -> Vec<T> {
    debug_assert!(m >= n);
    let mut v = vec![T::zero(); m];
    for j in 0..n {
        let (left, right) = a.split_at_mut((j + 1) * m);
        let col = &mut left[j * m..];
        let xn = norm(&col[j..]);
        if xn == 0.0 {
            continue;
        }
        let x0 = col[j];
        let x0a = x0.abs();
        let phase = if x0a == 0.0 { T::one() } else { x0.scale(1.0 / x0a) };
        let alpha = phase.scale(-xn);
        let vs = &mut v[j..m];
        vs.copy_from_slice(&col[j..]);
        vs[0] = vs[0] - alpha;
        let vn = norm(vs);
        if vn == 0.0 {
            continue;
        }
        for e in vs.iter_mut() {
            *e = e.scale(1.0 / vn);
        }
        col[j] = alpha;
        for e in &mut col[j + 1..] {
            *e = T::zero();
        }
        for k in 0..(n - j - 1) {
            let ck = &mut right[k * m + j..(k + 1) * m];
            let p = dot(vs, ck).scale(2.0);
            for (c, &vv) in ck.iter_mut().zip(vs.iter()) {
                *c = *c - vv * p;
            }
        }
    }
    let mut r = vec![T::zero(); n * n];
    for j in 0..n {
        r[j * n..j * n + j + 1].copy_from_slice(&a[j * m..j * m + j + 1]);
    }
    r
}

/// Conjugate transpose of a column-major `m x n` matrix.
pub(crate) fn adjoint<T: Field>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for j in 0..n {
        for i in 0..m {
            out[i * n + j] = a[j * m + i].conj();
        }
    }
    out
}

/// Orthogonalizes the columns of the column-major `m x n` matrix in place and
/// returns the column norms in decreasing order.
pub(crate) fn jacobi_sweeps<T: Field>(a: &mut [T], m: usize, n: usize) -> Result<Vec<f64>> {
    let tol = f64::EPSILON * (m as f64).sqrt();
    let mut norms2: Vec<f64> = (0..n).map(|j| norm2(&a[j * m..(j + 1) * m])).collect();
    for sweep in 0..MAX_SWEEPS {
        let mut rotations = 0usize;
        for i in 0..n.saturating_sub(1) {
            // de Rijk: bring the heaviest remaining column forward
            let piv = (i..n).fold(i, |b, k| if norms2[k] > norms2[b] { k } else { b });
            if piv != i {
                let (lo, hi) = a.split_at_mut(piv * m);
                lo[i * m..(i + 1) * m].swap_with_slice(&mut hi[..m]);
                norms2.swap(i, piv);
            }
            for j in (i + 1)..n {
                let (lo, hi) = a.split_at_mut(j * m);
                let x = &mut lo[i * m..(i + 1) * m];
                let y = &mut hi[..m];
                let (alpha, beta) = (norms2[i], norms2[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let g = dot(x, y);
                let ga = g.abs();
                if ga <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotations += 1;
                let u = g.scale(1.0 / ga);
                let zeta = (beta - alpha) / (2.0 * ga);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let su = u.scale(s);
                let suc = su.conj();
                for (xe, ye) in x.iter_mut().zip(y.iter_mut()) {
                    let (xv, yv) = (*xe, *ye);
                    *xe = xv.scale(c) - suc * yv;
                    *ye = su * xv + yv.scale(c);
                }
                norms2[i] = norm2(x);
                norms2[j] = norm2(y);
            }
        }
        if rotations == 0 {
            let mut s: Vec<f64> = (0..n).map(|j| norm(&a[j * m..(j + 1) * m])).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            return Ok(s);
        }
        if sweep + 1 == MAX_SWEEPS {
            return Err(Error::NonConvergence {
                what: "one-sided Jacobi",
                detail: format!("{rotations} rotations still active after {MAX_SWEEPS} sweeps"),
            });
        }
    }
    unreachable!()
}

/// Singular values of a column-major `m x n` matrix, decreasing.
///
/// Tall inputs are reduced by QR first; the Jacobi iteration then runs on the
/// adjoint of the triangular factor, which needs fewer sweeps.
pub(crate) fn singular_values<T: Field>(mut a: Vec<T>, m: usize, n: usize) -> Result<Vec<f64>> {
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    if m < n {
        return singular_values(adjoint(&a, m, n), n, m);
    }
    if m > n {
        let r = qr_r(&mut a, m, n);
        let mut b = adjoint(&r, n, n);
        return jacobi_sweeps(&mut b, n, n);
    }
    jacobi_sweeps(&mut a, m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_real() {
        // [[3, 0], [4, 5]] has singular values sqrt(45) and sqrt(5)
        let s = singular_values(vec![3.0, 4.0, 0.0, 5.0], 2, 2).unwrap();
        assert!((s[0] - 45f64.sqrt()).abs() < 1e-14);
        assert!((s[1] - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn complex_rank_one() {
        let u = [Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0), Complex64::new(-1.0, 0.0)];
        let v = [Complex64::new(0.5, 0.0), Complex64::new(0.0, -1.0)];
        let mut a = Vec::new();
        for vj in v {
            for ui in u {
                a.push(ui * vj);
            }
        }
        let s = singular_values(a, 3, 2).unwrap();
        let nu: f64 = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!((s[0] - nu * nv).abs() < 1e-14);
        assert!(s[1] < 1e-15);
    }

    #[test]
    fn qr_preserves_singular_values() {
        let (m, n) = (7, 3);
        let a: Vec<Complex64> = (0..m * n)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.91).cos()))
            .collect();
        let direct = jacobi_sweeps(&mut a.clone(), m, n).unwrap();
        let via_qr = singular_values(a, m, n).unwrap();
        for (x, y) in direct.iter().zip(&via_qr) {
            assert!((x - y).abs() < 1e-13 * direct[0]);
        }
    }

    #[test]
    fn graded_diagonal_keeps_relative_accuracy() {
        // a strongly graded upper-bidiagonal matrix: tiny values are recovered to full relative accuracy
        let n = 30;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 10f64.powi(-(i as i32));
            if i + 1 < n {
                a[(i + 1) * n + i] = 1e-3 * 10f64.powi(-(i as i32));
            }
        }
        let s = singular_values(a, n, n).unwrap();
        // A = D (I + 1e-3 S) with S the shift, so s_i(A) = 10^{-i} (1 + O(1e-3))
        // even at 1e-29, far below what an absolute-accuracy method resolves
        for (i, v) in s.iter().enumerate() {
            let want = 10f64.powi(-(i as i32));
            assert!(((v - want) / want).abs() <= 1.001e-3, "{i}: {v}");
        }
    }
}
