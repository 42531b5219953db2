//! Boundary values `G(λ² ± i0)` of the resolvent kernel on the essential
//! spectrum, and the Born series around the free kernel.
//!
//! `kernel(x, y) = f₋(μ, min(x, y)) f₊(μ, max(x, y)) / W(μ)` with `μ = λ` for
//! `+i0` and `μ = −λ` for `−i0`. The kernel is symmetric in `(x, y)`, so the
//! ordering convention is immaterial.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jost::{jost_solution, JostSolution, Side};
use crate::lattice::CouplingSequence;
use crate::scattering::wronskian_of;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest `|W|` accepted as a denominator.
pub const SINGULAR_W: f64 = 1e-12;

/// Which limiting ray `λ² ± i0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSample {
    pub lambda: f64,
    pub sign: Sign,
    pub x: f64,
    pub y: f64,
    pub value: Complex64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("resolvent kernels need finite λ > 0, got {lambda}")))
    }
}

/// `±(i/2λ) e^{±iλ|x−y|}`.
pub fn free_kernel(lambda: f64, sign: Sign, x: f64, y: f64) -> Result<Complex64> {
    check_lambda(lambda)?;
    let mu = sign.factor() * lambda;
    Ok(I / (2.0 * mu) * (I * mu * (x - y).abs()).exp())
}

/// Jost solutions and Wronskian at one `μ = ±λ`, for evaluating many `(x, y)`.
#[derive(Debug, Clone)]
pub struct ResolventKernel {
    plus: JostSolution,
    minus: JostSolution,
    wronskian: Complex64,
}

impl ResolventKernel {
    /// Kernel at `μ`, any nonzero real; `μ < 0` gives the `−i0` boundary value at `|μ|`.
    pub fn at(seq: &CouplingSequence, mu: f64) -> Result<Self> {
        if !(mu != 0.0 && mu.is_finite()) {
            return Err(Error::Input(format!("resolvent kernels need finite nonzero μ, got {mu}")));
        }
        let m = Complex64::new(mu, 0.0);
        let plus = jost_solution(seq, m, Side::Plus)?;
        let minus = jost_solution(seq, m, Side::Minus)?;
        let wronskian = wronskian_of(&plus, &minus)?;
        if wronskian.norm() < SINGULAR_W {
            return Err(Error::Singular(format!("|W({mu})| = {:.3e}", wronskian.norm())));
        }
        Ok(Self { plus, minus, wronskian })
    }

    pub fn new(seq: &CouplingSequence, lambda: f64, sign: Sign) -> Result<Self> {
        check_lambda(lambda)?;
        Self::at(seq, sign.factor() * lambda)
    }

    pub fn wronskian(&self) -> Complex64 {
        self.wronskian
    }

    pub fn plus(&self) -> &JostSolution {
        &self.plus
    }

    pub fn minus(&self) -> &JostSolution {
        &self.minus
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        self.minus.value(lo) * self.plus.value(hi) / self.wronskian
    }
}

pub fn kernel(seq: &CouplingSequence, lambda: f64, sign: Sign, x: f64, y: f64) -> Result<Complex64> {
    Ok(ResolventKernel::new(seq, lambda, sign)?.eval(x, y))
}

pub fn kernel_sample(seq: &CouplingSequence, lambda: f64, sign: Sign, x: f64, y: f64) -> Result<KernelSample> {
    Ok(KernelSample { lambda, sign, x, y, value: kernel(seq, lambda, sign, x, y)? })
}

/// Term `n` of `G = Σ_n (−1)^n G₀ (V G₀)^n` at `(x, y)`, with `G₀ = (i/2λ) e^{iλ|·|}`:
///
/// `(−1)^n (i/2λ)^{n+1} Σ_{j₁…jₙ} α_{j₁} e^{iλ|j₁−y|} Π_{k≥2} α_{j_k} e^{iλ|j_{k−1}−j_k|} e^{iλ|x−jₙ|}`.
///
/// Negative `λ` gives the `−i0` series at `|λ|`. Evaluated as a chain of
/// matrix-vector products over the support, `O(n · sites²)`.
pub fn born_term(seq: &CouplingSequence, n: usize, lambda: f64, x: f64, y: f64) -> Result<Complex64> {
    if !(lambda != 0.0 && lambda.is_finite()) {
        return Err(Error::Input(format!("Born terms need finite nonzero λ, got {lambda}")));
    }
    Ok(BornChain::new(seq, lambda, x, y).term(n))
}

struct BornChain {
    prefactor: Complex64,
    strengths: Vec<f64>,
    /// `e^{iλ|j − k|}` over support pairs.
    hops: Vec<Vec<Complex64>>,
    to_x: Vec<Complex64>,
    from_y: Vec<Complex64>,
    direct: Complex64,
}

impl BornChain {
    fn new(seq: &CouplingSequence, lambda: f64, x: f64, y: f64) -> Self {
        let phase = |d: f64| (I * lambda * d.abs()).exp();
        let sites: Vec<f64> = seq.sites().map(|j| j as f64).collect();
        Self {
            prefactor: I / (2.0 * lambda),
            strengths: seq.iter().map(|c| c.value).collect(),
            hops: sites.iter().map(|&a| sites.iter().map(|&b| phase(a - b)).collect()).collect(),
            to_x: sites.iter().map(|&j| phase(x - j)).collect(),
            from_y: sites.iter().map(|&j| phase(j - y)).collect(),
            direct: phase(x - y),
        }
    }

    /// Iterates `w ← D E w` from `w = D v_y`, yielding every term in turn.
    fn terms(&self) -> impl Iterator<Item = Complex64> + '_ {
        let mut w: Vec<Complex64> = self.strengths.iter().zip(&self.from_y).map(|(a, v)| a * v).collect();
        let mut scale = self.prefactor;
        let mut n = 0usize;
        std::iter::from_fn(move || {
            let value = if n == 0 {
                scale * self.direct
            } else {
                if n > 1 {
                    w = self
                        .hops
                        .iter()
                        .zip(&self.strengths)
                        .map(|(row, a)| a * row.iter().zip(&w).map(|(e, v)| e * v).sum::<Complex64>())
                        .collect();
                }
                let dot: Complex64 = self.to_x.iter().zip(&w).map(|(e, v)| e * v).sum();
                scale * dot
            };
            scale *= -self.prefactor;
            n += 1;
            Some(value)
        })
    }

    fn term(&self, n: usize) -> Complex64 {
        self.terms().nth(n).expect("unbounded iterator")
    }
}

/// A certified partial sum of the Born series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BornSum {
    pub value: Complex64,
    pub terms_used: usize,
    /// Geometric bound on the omitted tail.
    pub tail_bound: f64,
    /// `‖α‖₁ / 2|λ|`.
    pub ratio: f64,
}

/// Safety cap on the number of Born terms.
pub const MAX_BORN_TERMS: usize = 10_000;

/// Sums Born terms until `(1/2|λ|) rᴺ / (1 − r) ≤ rel_tol · |partial sum|`,
/// `r = ‖α‖₁/2|λ|`, which bounds the omitted tail because `|term_n| ≤ rⁿ/2|λ|`.
pub fn born_sum(seq: &CouplingSequence, lambda: f64, x: f64, y: f64, rel_tol: f64) -> Result<BornSum> {
    born_sum_capped(seq, lambda, x, y, rel_tol, MAX_BORN_TERMS)
}

/// [`born_sum`] with at most `max_terms` terms; failing to certify within them is a regime error.
pub fn born_sum_capped(seq: &CouplingSequence, lambda: f64, x: f64, y: f64, rel_tol: f64, max_terms: usize) -> Result<BornSum> {
    let norm = seq.l1_norm();
    if !(lambda.abs() > norm && lambda.is_finite()) {
        return Err(Error::Regime(format!("Born series needs |λ| > ‖α‖₁ = {norm}, got λ = {lambda}")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Input(format!("relative tolerance must be positive, got {rel_tol}")));
    }
    let ratio = norm / (2.0 * lambda.abs());
    let lead = 1.0 / (2.0 * lambda.abs());
    let chain = BornChain::new(seq, lambda, x, y);
    let mut value = Complex64::new(0.0, 0.0);
    for (k, term) in chain.terms().enumerate().take(max_terms) {
        value += term;
        let used = k + 1;
        let tail_bound = lead * ratio.powi(used as i32) / (1.0 - ratio);
        if tail_bound <= rel_tol * value.norm() {
            return Ok(BornSum { value, terms_used: used, tail_bound, ratio });
        }
    }
    Err(Error::Regime(format!("Born series not certified after {max_terms} terms")))
}
