//! Truncated power-series arithmetic.

use num_complex::Complex64;

/// Magnitudes below this are flushed to zero so that deep products of
/// decaying series never wander into subnormal arithmetic.
pub const FLUSH_BELOW: f64 = 1e-280;

/// Cauchy product of `a` and `b`, keeping the first `len` coefficients.
pub fn mul_truncated(a: &[Complex64], b: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai.re == 0.0 && ai.im == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
    flush(&mut out);
    out
}

/// Zero every component whose magnitude is below [`FLUSH_BELOW`].
pub fn flush(v: &mut [Complex64]) {
    for c in v {
        if c.re.abs() < FLUSH_BELOW {
            c.re = 0.0;
        }
        if c.im.abs() < FLUSH_BELOW {
            c.im = 0.0;
        }
    }
}

/// Successive truncated powers `f^0, f^1, ..., f^(count-1)`, each of length `len`.
pub fn powers(f: &[Complex64], count: usize, len: usize) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![Complex64::new(0.0, 0.0); len];
    if len > 0 {
        cur[0] = Complex64::new(1.0, 0.0);
    }
    for _ in 0..count {
        let next = mul_truncated(&cur, f, len);
        out.push(cur);
        cur = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn geometric_square() {
        // (1 + z + z^2 + ...)^2 = sum (m+1) z^m
        let g = vec![c(1.0); 8];
        let sq = mul_truncated(&g, &g, 8);
        for (m, v) in sq.iter().enumerate() {
            assert_eq!(v.re, (m + 1) as f64);
        }
    }

    #[test]
    fn powers_of_monomial() {
        let z = vec![c(0.0), c(1.0)];
        let p = powers(&z, 4, 5);
        for (j, row) in p.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                assert_eq!(v.re, if m == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn tiny_values_flush() {
        let a = vec![c(1e-200)];
        let out = mul_truncated(&a, &a, 1);
        assert_eq!(out[0].re, 0.0);
    }
}
