//! Finite-difference model of the operator on `[−L, L]` with Dirichlet ends,
//! used as an independent check on everything computed from Jost solutions.
//!
//! Nodes are `x_k = −L + k h`; the unknowns live on the `2L/h − 1` interior
//! nodes. The delta at site `j` becomes a diagonal bump `α_j / h` at the node
//! `x = j`, so integer sites must be nodes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::CouplingSequence;
use crate::resolvent::{ResolventKernel, Sign};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub step: f64,
    /// `1/h`.
    per_unit: usize,
    /// `2L/h`.
    cells: usize,
}

fn as_integer(v: f64, what: &str) -> Result<usize> {
    let r = v.round();
    if r >= 1.0 && (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        Ok(r as usize)
    } else {
        Err(Error::Grid(format!("{what} must be a positive integer, got {v}")))
    }
}

impl GridSpec {
    pub fn new(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0 && step > 0.0 && half_width.is_finite()) {
            return Err(Error::Grid(format!("need L > 0 and h > 0, got L = {half_width}, h = {step}")));
        }
        let per_unit = as_integer(1.0 / step, "1/h")?;
        let cells = as_integer(2.0 * half_width / step, "2L/h")?;
        if cells < 4 {
            return Err(Error::Grid("grid has fewer than three interior nodes".into()));
        }
        Ok(Self { half_width, step: 1.0 / per_unit as f64, per_unit, cells })
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.cells - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of interior node `i` (0-based), i.e. `x_{i+1}`.
    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.step
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.x(i))
    }

    /// Interior index of the node at `x`, if `x` is a node.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = (x + self.half_width) / self.step;
        let r = k.round();
        if (k - r).abs() > 1e-7 || r < 1.0 || r as usize >= self.cells {
            return None;
        }
        Some(r as usize - 1)
    }

    pub fn nodes_per_unit(&self) -> usize {
        self.per_unit
    }
}

/// Symmetric tridiagonal `H_h`: diagonal `2/h² + α_j/h` at site nodes, off-diagonal `−1/h²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    pub grid: GridSpec,
    pub diag: Vec<f64>,
    pub off: f64,
}

pub fn grid_hamiltonian(seq: &CouplingSequence, grid: GridSpec) -> Result<GridOperator> {
    let h = grid.step;
    let mut diag = vec![2.0 / (h * h); grid.len()];
    for c in seq.iter() {
        let x = c.j as f64;
        if !(x > -grid.half_width + 2.0 * h && x < grid.half_width - 2.0 * h) {
            return Err(Error::Grid(format!("site {} is not strictly inside (−L + 2h, L − 2h)", c.j)));
        }
        let i = grid.index_of(x).ok_or_else(|| Error::Grid(format!("site {} is not a grid node", c.j)))?;
        diag[i] += c.value / h;
    }
    Ok(GridOperator { grid, diag, off: -1.0 / (h * h) })
}

impl GridOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Entry `(i, k)` of the dense matrix.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        if i == k {
            self.diag[i]
        } else if i.abs_diff(k) == 1 {
            self.off
        } else {
            0.0
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.spectral_bounds();
        lo.abs().max(hi.abs())
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn apply_complex(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via `LDLᵀ`).
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th eigenvalue (0-based, ascending) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.spectral_bounds();
        let tol = 4.0 * f64::EPSILON * self.norm_bound();
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalues below `x`, ascending.
    pub fn eigenvalues_below(&self, x: f64) -> Vec<f64> {
        (0..self.count_below(x)).map(|k| self.eigenvalue(k)).collect()
    }
}

/// All eigenvalues, ascending, by implicit QL with Wilkinson shifts.
pub fn oracle_spectrum(op: &GridOperator) -> Vec<f64> {
    let n = op.len();
    let mut d = op.diag.clone();
    let mut e = vec![op.off; n];
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Solves `(T − μ) x = b` by Gaussian elimination with partial pivoting.
fn shifted_solve(op: &GridOperator, mu: f64, b: &[f64]) -> Vec<f64> {
    let n = op.len();
    let e = op.off;
    let tiny = f64::EPSILON * op.norm_bound();
    // U has up to two superdiagonals after pivoting
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut rhs = b.to_vec();
    let mut cur = (op.diag[0] - mu, if n > 1 { e } else { 0.0 }, 0.0);
    for i in 0..n {
        if i + 1 < n {
            let below = (e, op.diag[i + 1] - mu, if i + 2 < n { e } else { 0.0 });
            if below.0.abs() > cur.0.abs() {
                rhs.swap(i, i + 1);
                let m = cur.0 / below.0;
                u0[i] = below.0;
                u1[i] = below.1;
                u2[i] = below.2;
                cur = (cur.1 - m * below.1, cur.2 - m * below.2, 0.0);
                rhs[i + 1] -= m * rhs[i];
            } else {
                let piv = if cur.0 == 0.0 { tiny } else { cur.0 };
                let m = below.0 / piv;
                u0[i] = piv;
                u1[i] = cur.1;
                u2[i] = cur.2;
                cur = (below.1 - m * cur.1, below.2 - m * cur.2, 0.0);
                rhs[i + 1] -= m * rhs[i];
            }
        } else {
            u0[i] = if cur.0 == 0.0 { tiny } else { cur.0 };
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        if i + 1 < n {
            acc -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= u2[i] * x[i + 2];
        }
        x[i] = acc / u0[i];
    }
    x
}

/// Normalized so that `h Σ v_i² = 1`, largest entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn grid_dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Eigenpairs `k ∈ range` by bisection and inverse iteration, orthogonalized
/// within clusters closer than `1e-3 ‖T‖`.
pub fn oracle_eigenpairs(op: &GridOperator, range: std::ops::Range<usize>) -> Vec<Eigenpair> {
    let h = op.grid.step;
    let norm = op.norm_bound();
    let mut pairs: Vec<Eigenpair> = Vec::with_capacity(range.len());
    for k in range {
        let value = op.eigenvalue(k);
        // deterministic, generic start vector
        let mut v: Vec<f64> = (0..op.len()).map(|i| 1.0 + ((i * 7919 + k * 104729) % 1000) as f64 * 1e-3).collect();
        for _ in 0..4 {
            v = shifted_solve(op, value, &v);
            for p in pairs.iter().filter(|p| (p.value - value).abs() < 1e-3 * norm) {
                let c = grid_dot(h, &v, &p.vector);
                v.iter_mut().zip(&p.vector).for_each(|(a, b)| *a -= c * b);
            }
            let s = grid_dot(h, &v, &v).sqrt();
            v.iter_mut().for_each(|a| *a /= s);
        }
        let peak = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if peak < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        pairs.push(Eigenpair { value, vector: v });
    }
    pairs
}

/// `I − Σ h ⟨v_k, ·⟩ v_k` over the negative-energy eigenvectors of the grid operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProjection {
    pub step: f64,
    pub bound: Vec<Eigenpair>,
}

impl GridProjection {
    pub fn new(op: &GridOperator) -> Self {
        let count = op.count_below(0.0);
        Self { step: op.grid.step, bound: oracle_eigenpairs(op, 0..count) }
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut out = f.to_vec();
        for p in &self.bound {
            let c: Complex64 = self.step * p.vector.iter().zip(f).map(|(v, x)| v * x).sum::<Complex64>();
            out.iter_mut().zip(&p.vector).for_each(|(o, v)| *o -= c * v);
        }
        out
    }
}

/// `J_0(z), …, J_K(z)` for `z ≥ 0` by Miller's downward recurrence.
fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    if z == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(z.ceil() as usize) + 30 + (4.0 * z.cbrt()) as usize;
    let start = start + start % 2;
    let mut out = vec![0.0; kmax + 1];
    let (mut above, mut cur) = (0.0f64, 1e-280f64);
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / z * cur - above;
        above = cur;
        cur = below;
        // cur now holds J_{k−1}
        if k - 1 <= kmax {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            even_sum += cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            above *= s;
            even_sum *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    let norm = cur + 2.0 * even_sum;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Largest argument `‖H‖τ/2` handled in one Chebyshev step.
const MAX_CHEB_ARG: f64 = 2000.0;

/// `e^{iτH} v` for real `v`, returned as (real, imaginary) parts.
fn chebyshev_step(op: &GridOperator, v: &[f64], tau: f64) -> Vec<Complex64> {
    let (lo, hi) = op.spectral_bounds();
    let (center, radius) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let z = radius * tau.abs();
    let kmax = (z + 10.0 * z.cbrt() + 40.0).ceil() as usize;
    let j = bessel_j_sequence(z, kmax);
    // e^{iσz x} = J_0(z) + 2 Σ (iσ)^k J_k(z) T_k(x) with σ = sign τ
    let unit = if tau >= 0.0 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
    let n = v.len();
    let mut acc: Vec<Complex64> = v.iter().map(|&a| Complex64::new(j[0] * a, 0.0)).collect();
    let mut prev = v.to_vec();
    let mut cur = vec![0.0; n];
    op.apply(&prev, &mut cur);
    cur.iter_mut().zip(&prev).for_each(|(c, p)| *c = (*c - center * p) / radius);
    let mut phase = unit;
    let mut next = vec![0.0; n];
    let mut tail = 0usize;
    for k in 1..=kmax {
        let coef = 2.0 * phase * j[k];
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += coef * c);
        if j[k].abs() < 1e-18 && (k as f64) > z {
            tail += 1;
            if tail > 3 {
                break;
            }
        }
        if k == kmax {
            break;
        }
        op.apply(&cur, &mut next);
        for i in 0..n {
            next[i] = 2.0 * (next[i] - center * cur[i]) / radius - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        phase *= unit;
    }
    let global = Complex64::from_polar(1.0, center * tau);
    acc.iter_mut().for_each(|a| *a *= global);
    acc
}

/// `e^{iτH} f` on the grid.
fn propagate(op: &GridOperator, f: &[Complex64], tau: f64) -> Vec<Complex64> {
    if tau == 0.0 {
        return f.to_vec();
    }
    let (lo, hi) = op.spectral_bounds();
    let steps = ((0.5 * (hi - lo) * tau.abs()) / MAX_CHEB_ARG).ceil().max(1.0) as usize;
    let dt = tau / steps as f64;
    let mut u = f.to_vec();
    for _ in 0..steps {
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        let im: Vec<f64> = u.iter().map(|z| z.im).collect();
        let mut out = chebyshev_step(op, &re, dt);
        if im.iter().any(|&x| x != 0.0) {
            let imag = chebyshev_step(op, &im, dt);
            out.iter_mut().zip(imag).for_each(|(o, b)| *o += Complex64::new(0.0, 1.0) * b);
        }
        u = out;
    }
    u
}

/// `u = e^{itH_h} f = Σ_k e^{itE_k} h⟨v_k, f⟩ v_k` on the interior nodes.
///
/// The spectral sum is evaluated through the Chebyshev–Bessel expansion of
/// `e^{itH_h}`, which reproduces it to rounding without forming eigenvectors.
pub fn oracle_evolve(op: &GridOperator, f: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    if f.len() != op.len() {
        return Err(Error::Grid(format!("expected {} samples, got {}", op.len(), f.len())));
    }
    if !t.is_finite() {
        return Err(Error::Input(format!("time must be finite, got {t}")));
    }
    Ok(propagate(op, f, t))
}

/// Sequential evolution through increasing times, reusing the previous state.
#[derive(Debug, Clone)]
pub struct OracleEvolver<'a> {
    op: &'a GridOperator,
    t: f64,
    state: Vec<Complex64>,
}

impl<'a> OracleEvolver<'a> {
    pub fn new(op: &'a GridOperator, f: Vec<Complex64>) -> Result<Self> {
        if f.len() != op.len() {
            return Err(Error::Grid(format!("expected {} samples, got {}", op.len(), f.len())));
        }
        Ok(Self { op, t: 0.0, state: f })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn advance_to(&mut self, t: f64) -> &[Complex64] {
        self.state = propagate(self.op, &self.state, t - self.t);
        self.t = t;
        &self.state
    }
}

/// `(H_h − λ²) g − e_y / h` at every interior node, the strong residual.
///
/// It is `O(h²)` at regular nodes but `O(h)` at the source node and at
/// every site, where the kernel has a derivative kink.
pub fn weak_residual_profile(op: &GridOperator, lambda: f64, y_index: usize, column: &[Complex64]) -> Vec<Complex64> {
    let h = op.grid.step;
    let mut r = op.apply_complex(column);
    r.iter_mut().zip(column).for_each(|(a, g)| *a -= lambda * lambda * g);
    r[y_index] -= 1.0 / h;
    r
}

/// `sup |Σ h r_i φ(x_i)|` over test functions `|φ| ≤ 1` vanishing within `2h`
/// of `y` and of `±L`, which is `h Σ |r_i|` over the remaining nodes.
///
/// Pairing with test functions turns the `O(h)` kink residuals into `O(h²)`
/// contributions, so this converges at second order.
pub fn weak_residual(seq: &CouplingSequence, grid: GridSpec, lambda: f64, y: f64, column: &[Complex64]) -> Result<f64> {
    let op = grid_hamiltonian(seq, grid)?;
    let yi = grid.index_of(y).ok_or_else(|| Error::Grid(format!("y = {y} is not a grid node")))?;
    if column.len() != op.len() {
        return Err(Error::Grid(format!("expected {} kernel samples, got {}", op.len(), column.len())));
    }
    let h = grid.step;
    let r = weak_residual_profile(&op, lambda, yi, column);
    Ok(h * r
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let x = grid.x(i);
            (x - y).abs() > 2.0 * h + 1e-12 && grid.half_width - x.abs() > 2.0 * h + 1e-12
        })
        .map(|(_, v)| v.norm())
        .sum::<f64>())
}

/// The resolvent kernel column `x ↦ G(λ² ± i0)(x, y)` on the interior nodes.
pub fn kernel_column(seq: &CouplingSequence, grid: GridSpec, lambda: f64, sign: Sign, y: f64) -> Result<Vec<Complex64>> {
    let k = ResolventKernel::new(seq, lambda, sign)?;
    Ok(grid.xs().map(|x| k.eval(x, y)).collect())
}
