//! Jost solutions `f_±(λ, ·)` as piecewise exponentials (or piecewise linear
//! functions at `λ = 0`) on the intervals cut out by the coupling sites.
//!
//! The plus solution is seeded with `(A, B) = (1, 0)` on the rightmost interval
//! and swept leftward with inverse crossing matrices. The minus solution is
//! seeded on the leftmost interval with `(0, 1)` for `λ ≠ 0`, or `(1, 0)` at
//! `λ = 0`, and swept rightward. A point exactly on a site belongs to the
//! interval to its right.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::CouplingSequence;
use crate::transfer::{crossing_for, Branch};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// Coefficients of `f_±(λ, ·)` on each interval between consecutive sites.
///
/// With sites `s_0 < … < s_{n−1}`, interval `k` is `[s_{k−1}, s_k)` with
/// `s_{−1} = −∞` and `s_n = +∞`, so there are `n + 1` coefficient pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JostSolution {
    lambda: Complex64,
    branch: Branch,
    side: Side,
    sites: Vec<i64>,
    coeffs: Vec<(Complex64, Complex64)>,
    /// Entrywise bounds on the coefficients obtained by sweeping with `|T|`;
    /// rounding error in `coeffs[k]` is a small multiple of `ε · bounds[k]`.
    bounds: Vec<(f64, f64)>,
}

/// Applies `|I| + |T − I|` entrywise, which bounds every partial sum formed by `T v`.
fn abs_apply(t: &crate::transfer::TransferMatrix, v: (f64, f64)) -> (f64, f64) {
    (
        (1.0 + (t.m11 - 1.0).norm()) * v.0 + t.m12.norm() * v.1,
        t.m21.norm() * v.0 + (1.0 + (t.m22 - 1.0).norm()) * v.1,
    )
}

pub fn jost_solution(seq: &CouplingSequence, lambda: Complex64, side: Side) -> Result<JostSolution> {
    let branch = Branch::of(lambda)?;
    let n = seq.len();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut coeffs = vec![(zero, zero); n + 1];
    let mut bounds = vec![(0.0, 0.0); n + 1];
    match side {
        Side::Plus => {
            coeffs[n] = (one, zero);
            bounds[n] = (1.0, 0.0);
            for (k, c) in seq.iter().enumerate().rev() {
                let t = crossing_for(c.j, -c.value, branch);
                coeffs[k] = t.apply(coeffs[k + 1]);
                bounds[k] = abs_apply(&t, bounds[k + 1]);
            }
        }
        Side::Minus => {
            (coeffs[0], bounds[0]) = match branch {
                Branch::Oscillatory(_) => ((zero, one), (0.0, 1.0)),
                Branch::ZeroEnergy => ((one, zero), (1.0, 0.0)),
            };
            for (k, c) in seq.iter().enumerate() {
                let t = crossing_for(c.j, c.value, branch);
                coeffs[k + 1] = t.apply(coeffs[k]);
                bounds[k + 1] = abs_apply(&t, bounds[k]);
            }
        }
    }
    Ok(JostSolution {
        lambda: branch.lambda(),
        branch,
        side,
        sites: seq.sites().collect(),
        coeffs,
        bounds,
    })
}

impl JostSolution {
    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn coefficients(&self) -> &[(Complex64, Complex64)] {
        &self.coeffs
    }

    pub fn coefficient_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Mutable access, for deliberately corrupting a solution in diagnostics.
    pub fn coefficients_mut(&mut self) -> &mut [(Complex64, Complex64)] {
        &mut self.coeffs
    }

    /// Interval index containing `x`; a site belongs to the interval on its right.
    pub fn interval_of(&self, x: f64) -> usize {
        self.sites.partition_point(|&s| (s as f64) <= x)
    }

    /// `f` on interval `k`, extended analytically to any `x`.
    pub fn value_on(&self, k: usize, x: f64) -> Complex64 {
        let (a, b) = self.coeffs[k];
        match self.branch {
            Branch::Oscillatory(l) => {
                let e = (I * l * x).exp();
                a * e + b / e
            }
            Branch::ZeroEnergy => a + b * x,
        }
    }

    /// `∂_x f` on interval `k`, extended analytically to any `x`.
    pub fn slope_on(&self, k: usize, x: f64) -> Complex64 {
        let (a, b) = self.coeffs[k];
        match self.branch {
            Branch::Oscillatory(l) => {
                let e = (I * l * x).exp();
                I * l * (a * e - b / e)
            }
            Branch::ZeroEnergy => b,
        }
    }

    /// Largest single term of `f` on interval `k` at `x`.
    fn term_magnitude(&self, k: usize, x: f64) -> f64 {
        let (a, b) = self.coeffs[k];
        match self.branch {
            Branch::Oscillatory(l) => {
                let e = (I * l * x).exp();
                (a * e).norm().max((b / e).norm())
            }
            Branch::ZeroEnergy => a.norm().max((b * x).norm()).max(b.norm()),
        }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        self.value_on(self.interval_of(x), x)
    }

    pub fn slope(&self, x: f64) -> Complex64 {
        self.slope_on(self.interval_of(x), x)
    }

    /// `m_±(λ, x) = e^{∓iλx} f_±(λ, x)`, evaluated without forming the exponential twice.
    pub fn modulated(&self, x: f64) -> Complex64 {
        let k = self.interval_of(x);
        let (a, b) = self.coeffs[k];
        match (self.branch, self.side) {
            (Branch::ZeroEnergy, _) => a + b * x,
            (Branch::Oscillatory(l), Side::Plus) => a + b * (-2.0 * I * l * x).exp(),
            (Branch::Oscillatory(l), Side::Minus) => a * (2.0 * I * l * x).exp() + b,
        }
    }
}

pub fn evaluate_f(sol: &JostSolution, x: f64) -> Complex64 {
    sol.value(x)
}

pub fn evaluate_m(sol: &JostSolution, x: f64) -> Complex64 {
    sol.modulated(x)
}

/// `(e^{2iλd} − 1) / 2iλ`, stable for small `λd`.
pub(crate) fn phase_quotient(lambda: Complex64, d: f64) -> Complex64 {
    let z = 2.0 * I * lambda * d;
    if z.norm() < 1e-3 {
        let series = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
        series * d
    } else {
        (z.exp() - 1.0) / (2.0 * I * lambda)
    }
}

/// `m_+(λ, x)` from the iterated Volterra multi-sum
/// `1 + Σ_n Σ_{x < j_1 < … < j_n} Π_l α_{j_l} (e^{2iλ(j_l − j_{l−1})} − 1) / 2iλ`, `j_0 = x`.
///
/// The chains are summed by grouping on their first site, right to left, which
/// evaluates the finite sum exactly without touching the transfer matrices.
pub fn m_series(seq: &CouplingSequence, lambda: Complex64, x: f64) -> Result<Complex64> {
    match Branch::of(lambda)? {
        Branch::ZeroEnergy => Err(Error::Branch),
        Branch::Oscillatory(l) => {
            let above: Vec<_> = seq.iter().filter(|c| (c.j as f64) > x).collect();
            // tail[k] = sum over chains starting at above[k] of the chain product (excluding the entry factor)
            let mut tail = vec![Complex64::new(0.0, 0.0); above.len()];
            for k in (0..above.len()).rev() {
                let mut acc = Complex64::new(1.0, 0.0);
                for m in k + 1..above.len() {
                    let d = (above[m].j - above[k].j) as f64;
                    acc += above[m].value * phase_quotient(l, d) * tail[m];
                }
                tail[k] = acc;
            }
            let mut m = Complex64::new(1.0, 0.0);
            for (c, t) in above.iter().zip(&tail) {
                m += c.value * phase_quotient(l, c.j as f64 - x) * t;
            }
            Ok(m)
        }
    }
}

/// Largest violation of continuity and of the derivative jump over all sites.
///
/// Residuals are measured relative to `max(1, |term|)` over the individual
/// exponential (or affine) terms at the site, so exponentially large
/// coefficients away from the real axis do not read as failures. For
/// solutions of moderate size this is the absolute residual.
pub fn verify_jump(seq: &CouplingSequence, sol: &JostSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for c in seq.iter() {
        let x = c.j as f64;
        let right = sol.interval_of(x);
        if right == 0 {
            // the solution has no site here
            continue;
        }
        let left = right - 1;
        let f_left = sol.value_on(left, x);
        let f_right = sol.value_on(right, x);
        let d_left = sol.slope_on(left, x);
        let d_right = sol.slope_on(right, x);
        let scale = [left, right]
            .iter()
            .map(|&k| sol.term_magnitude(k, x))
            .fold(1.0, f64::max);
        let rate = 1f64.max(sol.lambda.norm()).max(c.value.abs());
        let continuity = (f_right - f_left).norm() / scale;
        let jump = (d_right - d_left - c.value * f_right).norm() / (scale * rate);
        worst = worst.max(continuity).max(jump);
    }
    worst
}

/// Sup of `|m_+|/(1 + max(−x, 0))` and `|m_−|/(1 + max(x, 0))` over samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub sup_plus: f64,
    pub sup_minus: f64,
}

impl BoundReport {
    pub fn ratio(&self) -> f64 {
        self.sup_plus.max(self.sup_minus)
    }
}

pub fn bound_check(seq: &CouplingSequence, lambdas: &[Complex64], xs: &[f64]) -> Result<BoundReport> {
    let mut report = BoundReport { sup_plus: 0.0, sup_minus: 0.0 };
    for &lambda in lambdas {
        let plus = jost_solution(seq, lambda, Side::Plus)?;
        let minus = jost_solution(seq, lambda, Side::Minus)?;
        for &x in xs {
            report.sup_plus = report.sup_plus.max(plus.modulated(x).norm() / (1.0 + (-x).max(0.0)));
            report.sup_minus = report.sup_minus.max(minus.modulated(x).norm() / (1.0 + x.max(0.0)));
        }
    }
    Ok(report)
}

/// Fraction of the discrete Fourier mass of `λ ↦ m_+(λ, x) − 1` that sits on
/// negative frequencies, sampling `n` points of `[−Λ, Λ)`.
///
/// A function in the Hardy space of the upper half-plane has its spectrum on
/// the positive half-line, so the ratio should shrink as `Λ` and `n` grow;
/// what remains comes from truncating the window.
pub fn hardy_support_diagnostic(seq: &CouplingSequence, x: f64, cutoff: f64, n: usize) -> Result<f64> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::Input(format!("window half-width must be positive, got {cutoff}")));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Input(format!("sample count must be a power of two, got {n}")));
    }
    let step = 2.0 * cutoff / n as f64;
    let mut samples = (0..n)
        .map(|k| {
            let lambda = -cutoff + k as f64 * step;
            // the real axis is the boundary of the upper half-plane; negative λ is allowed
            let sol = jost_solution(seq, Complex64::new(lambda, 0.0), Side::Plus)?;
            Ok(sol.modulated(x) - 1.0)
        })
        .collect::<Result<Vec<_>>>()?;

    let total_in: f64 = samples.iter().map(|z| z.norm()).sum();
    if total_in == 0.0 {
        return Ok(0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut samples);
    let total: f64 = samples.iter().map(|z| z.norm()).sum();
    // bins n/2..n hold negative frequencies (Nyquist counted with them)
    let negative: f64 = samples[n / 2..].iter().map(|z| z.norm()).sum();
    Ok(negative / total)
}
