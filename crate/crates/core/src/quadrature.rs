//! Composite Gauss-Legendre rules on the circle, graded toward chosen angles.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A quadrature rule for `(1/2pi) int_{-pi}^{pi} f(t) dt`.
#[derive(Debug, Clone)]
pub struct CircleRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Layout of a [`CircleRule`].
#[derive(Debug, Clone, Copy)]
pub struct CircleRuleOptions {
    pub points_per_panel: usize,
    pub uniform_panels: usize,
    /// Half-width of the first graded panel around a refinement angle.
    pub graded_start: f64,
    /// Ratio between consecutive graded panel widths.
    pub graded_ratio: f64,
    /// Grading stops below this width.
    pub graded_min: f64,
}

impl Default for CircleRuleOptions {
    fn default() -> Self {
        CircleRuleOptions {
            points_per_panel: 20,
            uniform_panels: 64,
            graded_start: 0.5,
            graded_ratio: 0.5,
            graded_min: 1e-15,
        }
    }
}

/// Composite rule with geometric grading toward each angle in `refine`.
pub fn circle_rule(refine: &[f64], opts: CircleRuleOptions) -> CircleRule {
    let mut breaks: Vec<f64> = (0..opts.uniform_panels)
        .map(|i| -PI + 2.0 * PI * i as f64 / opts.uniform_panels as f64)
        .collect();
    for &t0 in refine {
        breaks.push(t0);
        let mut d = opts.graded_start;
        while d >= opts.graded_min {
            breaks.push(t0 + d);
            breaks.push(t0 - d);
            d *= opts.graded_ratio;
        }
    }
    for b in &mut breaks {
        *b = (*b + PI).rem_euclid(2.0 * PI) - PI;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-300);
    breaks.push(breaks[0] + 2.0 * PI);

    let (gx, gw) = gauss_legendre(opts.points_per_panel);
    let mut nodes = Vec::with_capacity(breaks.len() * gx.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        if half <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w / (2.0 * PI));
        }
    }
    CircleRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact through degree 39
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((int - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(1);
        assert_eq!(x[0], 0.0);
        assert!((w[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn circle_rule_is_normalized_and_resolves_singular_weights() {
        let rule = circle_rule(&[0.0, -PI], CircleRuleOptions::default());
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        // (1/2pi) int |t|^(-1/2) dt over [-pi, pi] = 2 sqrt(pi) / pi
        let v: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| w * t.abs().powf(-0.5))
            .sum();
        assert!((v - 2.0 / PI.sqrt()).abs() < 1e-7);
    }
}
