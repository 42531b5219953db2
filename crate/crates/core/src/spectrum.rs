//! Discrete spectrum: the zeros `κ > 0` of `W(iκ)`, normalized eigenfunctions
//! built from `f₊(iκ, ·)`, and the projection `P` onto the essential subspace.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jost::{jost_solution, JostSolution, Side};
use crate::lattice::CouplingSequence;
use crate::scattering::wronskian;

/// Number of cells in the sign scan over `(0, κ_max]`.
pub const SCAN_CELLS: usize = 1000;
/// Bisection stops once the bracket is this narrow.
pub const KAPPA_TOL: f64 = 1e-12;
/// `|dW/dκ|` below this at a root marks it as a possible double root.
pub const DOUBLE_ROOT_SLOPE: f64 = 1e-8;
/// Largest admissible `|A|` on the leftmost interval, relative to the size of the terms summed into it.
pub const TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundState {
    pub kappa: f64,
    pub energy: f64,
    /// `ψ = norm_const · f₊(iκ, ·)` has unit `L²` norm.
    pub norm_const: f64,
    /// `f₊(iκ, ·)` with the growing left-tail term set to zero.
    #[serde(skip)]
    pub eigenfunction: JostSolution,
    /// `|W(iκ)|` at the located root.
    pub wronskian_residual: f64,
}

impl BoundState {
    /// The normalized eigenfunction `ψ(x)`, which is real.
    pub fn psi(&self, x: f64) -> f64 {
        self.norm_const * self.eigenfunction.value(x).re
    }
}

/// What the root search noticed beyond the roots themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchDiagnostics {
    pub kappa_max: f64,
    /// Roots where `|dW/dκ| < DOUBLE_ROOT_SLOPE`; reported, not resolved.
    pub double_roots: Vec<f64>,
    /// Set if the scan window had to be enlarged because a root sat at its edge.
    pub widened: bool,
    /// More bound states than sites; never observed, kept as a tripwire.
    pub exceeds_site_count: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStateSearch {
    pub states: Vec<BoundState>,
    pub diagnostics: SearchDiagnostics,
}

fn w_imag(seq: &CouplingSequence, kappa: f64) -> Result<f64> {
    // W(iκ) is real for real couplings; κ = 0 falls on the zero-energy branch
    Ok(wronskian(seq, Complex64::new(0.0, kappa))?.re)
}

fn bisect(seq: &CouplingSequence, mut lo: f64, mut flo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > KAPPA_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = w_imag(seq, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn scan(seq: &CouplingSequence, kappa_max: f64) -> Result<Vec<f64>> {
    let step = kappa_max / SCAN_CELLS as f64;
    let mut roots = Vec::new();
    let mut prev = (0.0, w_imag(seq, 0.0)?);
    for k in 1..=SCAN_CELLS {
        let kappa = if k == SCAN_CELLS { kappa_max } else { k as f64 * step };
        let cur = (kappa, w_imag(seq, kappa)?);
        if cur.1 == 0.0 {
            roots.push(kappa);
        } else if prev.1 != 0.0 && prev.1.signum() != cur.1.signum() {
            roots.push(bisect(seq, prev.0, prev.1, cur.0)?);
        }
        prev = cur;
    }
    Ok(roots)
}

/// All bound states with diagnostics, normalized.
pub fn bound_state_search(seq: &CouplingSequence) -> Result<BoundStateSearch> {
    let mut diagnostics = SearchDiagnostics::default();
    if seq.is_empty() {
        return Ok(BoundStateSearch { states: Vec::new(), diagnostics });
    }
    let mut kappa_max = seq.l1_norm();
    let mut roots = scan(seq, kappa_max)?;
    let edge = kappa_max * (1.0 - 1.0 / SCAN_CELLS as f64);
    while roots.last().is_some_and(|&r| r >= edge) {
        diagnostics.warnings.push(format!("root at the edge of (0, {kappa_max}], widening"));
        diagnostics.widened = true;
        kappa_max *= 2.0;
        roots = scan(seq, kappa_max)?;
        if kappa_max > 64.0 * seq.l1_norm() {
            return Err(Error::Consistency("bound-state search window keeps growing".into()));
        }
    }
    diagnostics.kappa_max = kappa_max;

    let mut states = Vec::with_capacity(roots.len());
    for kappa in roots {
        let h = 1e-6 * kappa.max(1.0);
        let slope = (w_imag(seq, kappa + h)? - w_imag(seq, (kappa - h).max(0.0))?) / (2.0 * h);
        if slope.abs() < DOUBLE_ROOT_SLOPE {
            diagnostics.double_roots.push(kappa);
            diagnostics.warnings.push(format!("possible double root at κ = {kappa}"));
        }
        let eigenfunction = jost_solution(seq, Complex64::new(0.0, kappa), Side::Plus)?;
        let raw = BoundState {
            kappa,
            energy: -kappa * kappa,
            norm_const: 1.0,
            wronskian_residual: w_imag(seq, kappa)?.abs(),
            eigenfunction,
        };
        states.push(normalize(raw)?);
    }
    states.sort_by(|a, b| b.kappa.total_cmp(&a.kappa));
    if states.len() > seq.len() {
        diagnostics.exceeds_site_count = true;
        diagnostics
            .warnings
            .push(format!("{} bound states for {} sites", states.len(), seq.len()));
    }
    Ok(BoundStateSearch { states, diagnostics })
}

/// Bound states ordered from the deepest (largest κ) up.
pub fn bound_states(seq: &CouplingSequence) -> Result<Vec<BoundState>> {
    Ok(bound_state_search(seq)?.states)
}

/// `∫_l^r e^{rate·x} dx` with either end possibly infinite; `None` if it diverges.
fn exp_integral(rate: f64, l: f64, r: f64) -> Option<f64> {
    if rate == 0.0 {
        return if l.is_finite() && r.is_finite() { Some(r - l) } else { None };
    }
    match (l.is_finite(), r.is_finite()) {
        (true, true) => Some((rate * l).exp() * (rate * (r - l)).exp_m1() / rate),
        (false, true) if rate > 0.0 => Some((rate * r).exp() / rate),
        (true, false) if rate < 0.0 => Some(-(rate * l).exp() / rate),
        _ => None,
    }
}

/// `∫ f g` for two plus solutions on the imaginary axis, sharing their sites.
fn overlap(f: &JostSolution, g: &JostSolution) -> Result<f64> {
    let (kf, kg) = (f.lambda().im, g.lambda().im);
    let sites = f.sites();
    let n = sites.len();
    let mut total = 0.0;
    for k in 0..=n {
        let l = if k == 0 { f64::NEG_INFINITY } else { sites[k - 1] as f64 };
        let r = if k == n { f64::INFINITY } else { sites[k] as f64 };
        let (a, b) = f.coefficients()[k];
        let (c, d) = g.coefficients()[k];
        // (a e^{−κ_f x} + b e^{κ_f x})(c e^{−κ_g x} + d e^{κ_g x}), all real
        let terms = [
            (a.re * c.re, -(kf + kg)),
            (a.re * d.re, kg - kf),
            (b.re * c.re, kf - kg),
            (b.re * d.re, kf + kg),
        ];
        for (coef, rate) in terms {
            if coef == 0.0 {
                continue;
            }
            total += coef
                * exp_integral(rate, l, r).ok_or_else(|| {
                    Error::Consistency(format!("divergent overlap term on interval {k} at rate {rate}"))
                })?;
        }
    }
    Ok(total)
}

/// Sets the normalization constant from exact piecewise integrals of `f₊(iκ, ·)²`.
///
/// A root is genuine only if `f₊` decays to the left as well, so the
/// coefficient `A` of `e^{−κx}` on the leftmost interval must vanish up to the
/// cancellation that produced it; it is then dropped.
pub fn normalize(state: BoundState) -> Result<BoundState> {
    let kappa = state.kappa;
    if !(kappa > 0.0) {
        return Err(Error::Input(format!("bound-state decay rate must be positive, got {kappa}")));
    }
    let mut f = state.eigenfunction;
    if !f.sites().is_empty() {
        // A₀ is the sum of terms bounded by `bounds[0].0`; at a true root they cancel
        let a = f.coefficients()[0].0.norm();
        let scale = f.coefficient_bounds()[0].0;
        let tail = a / scale.max(f64::MIN_POSITIVE);
        if !(tail <= TAIL_TOL) {
            return Err(Error::NonNormalizable { kappa, tail });
        }
        f.coefficients_mut()[0].0 = Complex64::new(0.0, 0.0);
    }
    let mass = overlap(&f, &f)?;
    Ok(BoundState { norm_const: 1.0 / mass.sqrt(), eigenfunction: f, ..state })
}

/// `⟨ψ_m, ψ_n⟩` in closed form.
pub fn bound_state_overlap(m: &BoundState, n: &BoundState) -> Result<f64> {
    Ok(m.norm_const * n.norm_const * overlap(&m.eigenfunction, &n.eigenfunction)?)
}

/// `P = I − Σ_m |ψ_m⟩⟨ψ_m|`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EssentialProjection {
    pub states: Vec<BoundState>,
}

/// Self-consistency threshold for the projection on a sample grid.
pub const PROJECTION_TOL: f64 = 1e-4;

impl EssentialProjection {
    pub fn new(states: Vec<BoundState>) -> Self {
        Self { states }
    }

    pub fn for_sequence(seq: &CouplingSequence) -> Result<Self> {
        Ok(Self::new(bound_states(seq)?))
    }

    /// Largest closed-form `|⟨ψ_m, ψ_n⟩|`, `m ≠ n`.
    pub fn max_cross_overlap(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.states.iter().enumerate() {
            for b in &self.states[i + 1..] {
                worst = worst.max(bound_state_overlap(a, b)?.abs());
            }
        }
        Ok(worst)
    }
}

/// A function sampled at `x_k = x0 + k·h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn from_fn(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self { x0, h, values: (0..n).map(|k| f(x0 + k as f64 * h)).collect() }
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.h
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.x(k))
    }

    /// Composite trapezoid `∫ conj(g) f` against a real function `g`.
    pub fn trapezoid_against(&self, g: impl Fn(f64) -> f64) -> Complex64 {
        let n = self.values.len();
        let mut sum = Complex64::new(0.0, 0.0);
        for (k, &v) in self.values.iter().enumerate() {
            let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            sum += w * g(self.x(k)) * v;
        }
        sum * self.h
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `Pf = f − Σ_m ⟨f, ψ_m⟩ ψ_m` with inner products by the trapezoid rule on
/// the sample grid; `f` is taken to vanish outside the grid.
///
/// Fails if the grid cannot reproduce the bound states themselves, measured
/// by `max_m sup |ψ_m − Σ_n ⟨ψ_m, ψ_n⟩ ψ_n|` on the grid.
pub fn project_essential(f: &SampledFunction, proj: &EssentialProjection) -> Result<SampledFunction> {
    if f.values.len() < 2 || !(f.h > 0.0) {
        return Err(Error::Input("projection needs at least two samples and a positive spacing".into()));
    }
    let psi: Vec<SampledFunction> = proj
        .states
        .iter()
        .map(|s| SampledFunction::from_fn(f.x0, f.h, f.values.len(), |x| Complex64::new(s.psi(x), 0.0)))
        .collect();

    let mut worst: f64 = 0.0;
    for m in &psi {
        let mut residual = m.values.clone();
        for (n, state) in psi.iter().zip(&proj.states) {
            let c = m.trapezoid_against(|x| state.psi(x));
            for (r, v) in residual.iter_mut().zip(&n.values) {
                *r -= c * v;
            }
        }
        worst = worst.max(residual.iter().map(|r| r.norm()).fold(0.0, f64::max));
    }
    if worst > PROJECTION_TOL {
        return Err(Error::Accuracy(format!(
            "sample grid does not resolve the bound states: self-consistency residual {worst:.3e}"
        )));
    }

    let mut out = f.clone();
    for (n, state) in psi.iter().zip(&proj.states) {
        let c = f.trapezoid_against(|x| state.psi(x));
        for (o, v) in out.values.iter_mut().zip(&n.values) {
            *o -= c * v;
        }
    }
    Ok(out)
}
