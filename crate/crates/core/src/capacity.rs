//! Green capacity of `phi(D)` inside the unit disk by a finite-difference
//! condenser solve.
//!
//! Cells of `[-1, 1]^2` are marked by the argument principle: a cell center
//! `c` lies in `phi(D)` exactly when the boundary curve `phi(e^{it})` winds
//! around `c`. The potential is `1` on marked cells and `0` on cells whose
//! center is outside the disk; the 5-point Laplacian on the remaining cells is
//! solved by conjugate gradients with an aggregation multigrid preconditioner.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbols::SymbolSpec;

pub const MIN_GRID: usize = 128;
pub const MAX_GRID: usize = 8192;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 2000;
/// Marked cells closer than this many cells to the circle count as contact.
pub const CONTACT_CELLS: f64 = 2.0;

const COARSEST: usize = 400;

/// Cell mask on a `grid x grid` partition of `[-1, 1]^2`, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    grid: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(grid: usize) -> Mask {
        Mask {
            grid,
            bits: vec![false; grid * grid],
        }
    }

    /// Cells whose centers lie in the closed disk of radius `r` about `center`.
    pub fn disk(grid: usize, center: Complex64, r: f64) -> Mask {
        let mut m = Mask::new(grid);
        for row in 0..grid {
            for col in 0..grid {
                let c = m.center(row, col);
                if (c - center).norm() <= r && c.norm() < 1.0 {
                    m.set(row, col, true);
                }
            }
        }
        m
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn cell(&self) -> f64 {
        2.0 / self.grid as f64
    }

    pub fn center(&self, row: usize, col: usize) -> Complex64 {
        let h = self.cell();
        Complex64::new(-1.0 + (col as f64 + 0.5) * h, 1.0 - (row as f64 + 0.5) * h)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.grid + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.grid + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.cell() * self.cell()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Whether a marked cell comes within [`CONTACT_CELLS`] cells of the circle.
    pub fn touches_boundary(&self) -> bool {
        let lim = 1.0 - CONTACT_CELLS * self.cell();
        (0..self.grid).any(|r| (0..self.grid).any(|c| self.get(r, c) && self.center(r, c).norm() > lim))
    }

    /// Binary portable bitmap (P4), marked cells black.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P4\n{} {}\n", self.grid, self.grid)?;
        let stride = self.grid.div_ceil(8);
        let mut row_bytes = vec![0u8; stride];
        for r in 0..self.grid {
            row_bytes.fill(0);
            for c in 0..self.grid {
                if self.get(r, c) {
                    row_bytes[c / 8] |= 0x80 >> (c % 8);
                }
            }
            w.write_all(&row_bytes)?;
        }
        Ok(())
    }
}

/// Boundary curve `phi(e^{it})`, refined until consecutive points are closer
/// than `step`.
fn boundary_curve(spec: &SymbolSpec, base: usize, step: f64) -> Vec<Complex64> {
    let at = |t: f64| spec.eval_unchecked(Complex64::from_polar(1.0, t));
    let mut out = Vec::with_capacity(base * 2);
    let mut stack = Vec::new();
    for k in 0..base {
        let t0 = -PI + 2.0 * PI * k as f64 / base as f64;
        let t1 = -PI + 2.0 * PI * (k + 1) as f64 / base as f64;
        stack.push((t1, at(t1), 0u32));
        let (mut ta, mut wa) = (t0, at(t0));
        out.push(wa);
        while let Some(&(tb, wb, depth)) = stack.last() {
            if (wb - wa).norm() > step && depth < 24 && wb.is_finite() && wa.is_finite() {
                let tm = 0.5 * (ta + tb);
                stack.push((tm, at(tm), depth + 1));
            } else {
                stack.pop();
                if stack.is_empty() {
                    break;
                }
                out.push(wb);
                ta = tb;
                wa = wb;
            }
        }
    }
    out.retain(|w| w.is_finite());
    out
}

/// Marks the cells whose centers lie in `phi(D)`.
pub fn rasterize_image(spec: &SymbolSpec, grid: usize) -> Result<Mask> {
    if !(MIN_GRID..=MAX_GRID).contains(&grid) {
        return Err(Error::input(format!("grid must lie in {MIN_GRID}..={MAX_GRID}")));
    }
    spec.validate()?;
    let mut mask = Mask::new(grid);
    let h = mask.cell();
    let curve = boundary_curve(spec, 16 * grid, h / 4.0);
    // signed crossings of each row's center line, for a ray towards +x
    let mut crossings: Vec<Vec<(f64, i32)>> = vec![Vec::new(); grid];
    let n = curve.len();
    for k in 0..n {
        let (a, b) = (curve[k], curve[(k + 1) % n]);
        if a.im == b.im {
            continue;
        }
        let (lo, hi) = if a.im < b.im { (a.im, b.im) } else { (b.im, a.im) };
        let dir = if a.im < b.im { 1 } else { -1 };
        // rows with lo <= y < hi, where y = 1 - (row + 0.5) h
        let first = ((1.0 - hi) / h - 0.5).ceil().max(0.0) as usize;
        let mut row = first;
        while row < grid {
            let y = 1.0 - (row as f64 + 0.5) * h;
            if y < lo {
                break;
            }
            if y < hi {
                let x = a.re + (y - a.im) * (b.re - a.re) / (b.im - a.im);
                crossings[row].push((x, dir));
            }
            row += 1;
        }
    }
    for (row, list) in crossings.iter_mut().enumerate() {
        list.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut winding = 0;
        let mut next = list.len();
        for col in (0..grid).rev() {
            let c = mask.center(row, col);
            while next > 0 && list[next - 1].0 > c.re {
                next -= 1;
                winding += list[next].1;
            }
            if winding != 0 && c.norm() < 1.0 {
                mask.set(row, col, true);
            }
        }
    }
    if mask.count() == 0 {
        return Err(Error::InvalidSymbol(format!(
            "image of {spec} covers no cell center at grid {grid}"
        )));
    }
    Ok(mask)
}

/// Result of a condenser solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate {
    /// `+inf` (serialized as `null`) when the image reaches the circle.
    pub cap: f64,
    pub grid_size: usize,
    /// Dirichlet energy of the potential, `2 pi cap`.
    pub energy: f64,
    pub rasterized_area: f64,
    /// Set when the iteration met [`RESIDUAL_TOL`].
    pub convergence_flag: bool,
    pub touches_boundary: bool,
    pub iterations: usize,
    pub residual: f64,
    /// `|cap(G) - cap(G/2)| / cap(G)` when a refinement check ran.
    pub refinement_change: Option<f64>,
}

struct Csr {
    n: usize,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = (self.ptr[i]..self.ptr[i + 1]).map(|k| self.val[k] * x[self.col[k]]).sum();
        }
    }

    fn gauss_seidel(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let mut step = |i: usize| {
            let mut s = b[i];
            for k in self.ptr[i]..self.ptr[i + 1] {
                let j = self.col[k];
                if j != i {
                    s -= self.val[k] * x[j];
                }
            }
            x[i] = s / self.diag[i];
        };
        if forward {
            (0..self.n).for_each(&mut step);
        } else {
            (0..self.n).rev().for_each(&mut step);
        }
    }

    /// Galerkin product `P^T A P` for piecewise-constant `P`.
    fn coarsen(&self, agg: &[usize], n_coarse: usize) -> Csr {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_coarse];
        for (i, &a) in agg.iter().enumerate() {
            members[a].push(i);
        }
        let mut marker = vec![usize::MAX; n_coarse];
        let mut ptr = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        let mut diag = vec![0.0; n_coarse];
        for (a, rows) in members.iter().enumerate() {
            let start = col.len();
            for &i in rows {
                for k in self.ptr[i]..self.ptr[i + 1] {
                    let b = agg[self.col[k]];
                    if marker[b] == usize::MAX || marker[b] < start {
                        marker[b] = col.len();
                        col.push(b);
                        val.push(self.val[k]);
                    } else {
                        val[marker[b]] += self.val[k];
                    }
                }
            }
            for k in start..col.len() {
                if col[k] == a {
                    diag[a] = val[k];
                }
            }
            ptr.push(col.len());
        }
        Csr {
            n: n_coarse,
            ptr,
            col,
            val,
            diag,
        }
    }

    fn dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for k in self.ptr[i]..self.ptr[i + 1] {
                d[i * self.n + self.col[k]] += self.val[k];
            }
        }
        d
    }
}

/// Lower Cholesky factor, row-major.
fn cholesky(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::NonConvergence {
                what: "coarse Cholesky",
                detail: format!("non-positive pivot at {j}"),
            });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(a)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

struct Level {
    a: Csr,
    /// Aggregate of each node on the next coarser level.
    agg: Vec<usize>,
}

struct Multigrid {
    levels: Vec<Level>,
    coarse: Csr,
    factor: Vec<f64>,
}

impl Multigrid {
    fn new(a: Csr, coords: Vec<(usize, usize)>) -> Result<Multigrid> {
        let mut levels = Vec::new();
        let mut a = a;
        let mut coords = coords;
        while a.n > COARSEST {
            let w = coords.iter().map(|c| c.1).max().unwrap_or(0) / 2 + 1;
            let mut index = std::collections::HashMap::new();
            let mut agg = Vec::with_capacity(a.n);
            let mut next = Vec::new();
            for &(r, c) in &coords {
                let key = (r / 2) * w + c / 2;
                let id = *index.entry(key).or_insert_with(|| {
                    next.push((r / 2, c / 2));
                    next.len() - 1
                });
                agg.push(id);
            }
            let coarse = a.coarsen(&agg, next.len());
            levels.push(Level { a, agg });
            a = coarse;
            coords = next;
        }
        let factor = cholesky(a.dense(), a.n)?;
        Ok(Multigrid {
            levels,
            coarse: a,
            factor,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == self.levels.len() {
            x.copy_from_slice(b);
            cholesky_solve(&self.factor, self.coarse.n, x);
            return;
        }
        let lev = &self.levels[l];
        let n = lev.a.n;
        x.fill(0.0);
        lev.a.gauss_seidel(b, x, true);
        let mut res = vec![0.0; n];
        lev.a.mul(x, &mut res);
        let nc = if l + 1 == self.levels.len() {
            self.coarse.n
        } else {
            self.levels[l + 1].a.n
        };
        let mut bc = vec![0.0; nc];
        for i in 0..n {
            bc[lev.agg[i]] += b[i] - res[i];
        }
        let mut xc = vec![0.0; nc];
        self.cycle(l + 1, &bc, &mut xc);
        for i in 0..n {
            x[i] += xc[lev.agg[i]];
        }
        lev.a.gauss_seidel(b, x, false);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the condenser problem for a mask and returns `energy / (2 pi)`.
pub fn green_capacity(mask: &Mask) -> Result<CapacityEstimate> {
    let g = mask.grid();
    if mask.count() == 0 {
        return Err(Error::input("empty mask"));
    }
    for r in 0..g {
        for c in 0..g {
            if mask.get(r, c) && mask.center(r, c).norm() >= 1.0 {
                return Err(Error::input("mask leaves the unit disk"));
            }
        }
    }
    let touches = mask.touches_boundary();
    let area = mask.area();
    if touches {
        return Ok(CapacityEstimate {
            cap: f64::INFINITY,
            grid_size: g,
            energy: f64::INFINITY,
            rasterized_area: area,
            convergence_flag: false,
            touches_boundary: true,
            iterations: 0,
            residual: 0.0,
            refinement_change: None,
        });
    }

    // node kinds: unknown index, or fixed at 0 (outside) / 1 (marked)
    const OUTSIDE: usize = usize::MAX;
    const MARKED: usize = usize::MAX - 1;
    let mut id = vec![OUTSIDE; g * g];
    let mut coords = Vec::new();
    for r in 0..g {
        for c in 0..g {
            if mask.get(r, c) {
                id[r * g + c] = MARKED;
            } else if mask.center(r, c).norm() < 1.0 {
                id[r * g + c] = coords.len();
                coords.push((r, c));
            }
        }
    }
    let n = coords.len();
    let mut ptr = vec![0];
    let mut col = Vec::with_capacity(5 * n);
    let mut val = Vec::with_capacity(5 * n);
    let mut rhs = vec![0.0; n];
    for (i, &(r, c)) in coords.iter().enumerate() {
        let mut nbrs = [OUTSIDE; 4];
        if r > 0 {
            nbrs[0] = id[(r - 1) * g + c];
        }
        if r + 1 < g {
            nbrs[1] = id[(r + 1) * g + c];
        }
        if c > 0 {
            nbrs[2] = id[r * g + c - 1];
        }
        if c + 1 < g {
            nbrs[3] = id[r * g + c + 1];
        }
        let mut row: Vec<(usize, f64)> = vec![(i, 4.0)];
        for j in nbrs {
            match j {
                OUTSIDE => {}
                MARKED => rhs[i] += 1.0,
                j => row.push((j, -1.0)),
            }
        }
        row.sort_by_key(|e| e.0);
        for (j, v) in row {
            col.push(j);
            val.push(v);
        }
        ptr.push(col.len());
    }
    let a = Csr {
        n,
        ptr,
        col,
        val,
        diag: vec![4.0; n],
    };
    let mg = Multigrid::new(a, coords.clone())?;
    let a = &mg.levels.first().map(|l| &l.a).unwrap_or(&mg.coarse);

    // preconditioned conjugate gradients from zero
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut z = vec![0.0; n];
    mg.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = if bnorm > 0.0 { 1.0 } else { 0.0 };
    while rel > RESIDUAL_TOL && iterations < MAX_ITERATIONS {
        a.mul(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= RESIDUAL_TOL {
            break;
        }
        mg.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let converged = rel <= RESIDUAL_TOL;
    if !converged {
        return Err(Error::NonConvergence {
            what: "condenser solve",
            detail: format!("relative residual {rel:e} after {iterations} iterations"),
        });
    }

    // Dirichlet energy over all cell edges
    let value = |k: usize| match id[k] {
        OUTSIDE => 0.0,
        MARKED => 1.0,
        j => x[j],
    };
    let mut energy = 0.0;
    for r in 0..g {
        for c in 0..g {
            let k = r * g + c;
            let u = value(k);
            if c + 1 < g {
                let d = u - value(k + 1);
                energy += d * d;
            }
            if r + 1 < g {
                let d = u - value(k + g);
                energy += d * d;
            }
        }
    }
    Ok(CapacityEstimate {
        cap: energy / (2.0 * PI),
        grid_size: g,
        energy,
        rasterized_area: area,
        convergence_flag: converged,
        touches_boundary: false,
        iterations,
        residual: rel,
        refinement_change: None,
    })
}

/// Rasterizes and solves at `grid`, and also at `grid / 2` when `refine` is set.
pub fn symbol_capacity(spec: &SymbolSpec, grid: usize, refine: bool) -> Result<CapacityEstimate> {
    let mut est = green_capacity(&rasterize_image(spec, grid)?)?;
    if refine && est.cap.is_finite() && grid / 2 >= MIN_GRID {
        let coarse = green_capacity(&rasterize_image(spec, grid / 2)?)?;
        est.refinement_change = Some((est.cap - coarse.cap).abs() / est.cap);
    }
    Ok(est)
}

/// Capacity implied by a measured `beta_1`, the inverse of `beta_1 = e^{-1/cap}`.
pub fn capacity_from_beta(beta1: f64) -> Result<f64> {
    if beta1.is_nan() || beta1 <= 0.0 {
        return Err(Error::input("beta1 must be positive"));
    }
    if beta1 >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / beta1.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b
    }

    #[test]
    fn dilation_area() {
        let m = rasterize_image(&SymbolSpec::dilation(0.5).unwrap(), 256).unwrap();
        assert!(rel(m.area(), PI / 4.0) < 0.02, "{}", m.area());
        assert!(!m.touches_boundary());
    }

    #[test]
    fn moebius_image_area() {
        let s = SymbolSpec::moebius(Complex64::new(0.4, 0.0), 0.5).unwrap();
        let m = rasterize_image(&s, 256).unwrap();
        assert!(rel(m.area(), PI * 0.25) < 0.02, "{}", m.area());
        // an automorphism image of a disk is a disk with the same hyperbolic radius
        let s = SymbolSpec::compose(
            SymbolSpec::moebius(Complex64::new(0.4, 0.0), 1.0).unwrap(),
            SymbolSpec::dilation(0.5).unwrap(),
        )
        .unwrap();
        let m = rasterize_image(&s, 256).unwrap();
        // image disk: center a(1 - r^2)/(1 - a^2 r^2), radius r(1 - a^2)/(1 - a^2 r^2)
        let (a, r) = (0.4f64, 0.5f64);
        let radius = r * (1.0 - a * a) / (1.0 - a * a * r * r);
        assert!(rel(m.area(), PI * radius * radius) < 0.02, "{}", m.area());
    }

    #[test]
    fn lens_image_touches_the_circle() {
        let m = rasterize_image(&SymbolSpec::lens(0.5).unwrap(), 256).unwrap();
        assert!(m.touches_boundary());
        for r in 0..256 {
            for c in 0..256 {
                assert!(!m.get(r, c) || m.center(r, c).norm() < 1.0);
            }
        }
        let est = green_capacity(&m).unwrap();
        assert!(est.cap.is_infinite() && est.touches_boundary);
    }

    #[test]
    fn disk_capacities() {
        for (r, grid) in [((-1f64).exp(), 512), (0.5, 512)] {
            let est = green_capacity(&Mask::disk(grid, Complex64::new(0.0, 0.0), r)).unwrap();
            let want = 1.0 / (1.0 / r).ln();
            assert!(rel(est.cap, want) < 0.02, "r = {r}: {} vs {want}", est.cap);
            assert!(est.convergence_flag && est.residual <= RESIDUAL_TOL);
            assert!((est.energy - 2.0 * PI * est.cap).abs() < 1e-12 * est.energy);
        }
    }

    #[test]
    fn capacity_is_monotone() {
        let o = Complex64::new(0.0, 0.0);
        let small = Mask::disk(256, o, 0.3);
        let big = Mask::disk(256, o, 0.5);
        assert!(small.is_subset_of(&big));
        assert!(green_capacity(&small).unwrap().cap < green_capacity(&big).unwrap().cap);
    }

    #[test]
    fn capacity_is_moebius_invariant() {
        let r = 0.5;
        let s = SymbolSpec::compose(
            SymbolSpec::moebius(Complex64::new(0.3, 0.2), 1.0).unwrap(),
            SymbolSpec::dilation(r).unwrap(),
        )
        .unwrap();
        let est = symbol_capacity(&s, 512, false).unwrap();
        assert!(rel(est.cap, 1.0 / 2f64.ln()) < 0.03, "{}", est.cap);
    }

    #[test]
    fn inversion() {
        assert!((capacity_from_beta(0.5).unwrap() - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((capacity_from_beta((-1f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!(capacity_from_beta(1.0).unwrap().is_infinite());
        assert!(capacity_from_beta(0.0).is_err());
    }

    #[test]
    fn pbm_layout() {
        let mut m = Mask::new(128);
        m.set(0, 0, true);
        m.set(1, 9, true);
        let mut out = Vec::new();
        m.write_pbm(&mut out).unwrap();
        let header = b"P4\n128 128\n";
        assert_eq!(&out[..header.len()], header);
        let body = &out[header.len()..];
        assert_eq!(body.len(), 128 * 16);
        assert_eq!(body[0], 0x80);
        assert_eq!(body[16 + 1], 0x40);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rasterize_image(&SymbolSpec::dilation(0.5).unwrap(), 64).is_err());
        assert!(green_capacity(&Mask::new(128)).is_err());
    }
}
