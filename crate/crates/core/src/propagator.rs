//! The group `e^{itH}` restricted to the essential subspace, through the
//! Stone formula
//!
//! `K_t(x, y) = (1/πi) ∫_ℝ λ e^{itλ²} G(λ² + i0)(x, y) dλ = (2/π) ∫_0^∞ λ e^{itλ²} Im G(λ)(x, y) dλ`,
//!
//! using `G(−λ) = conj G(λ)` on the real axis. Bound states sit off the real
//! axis, so `K_t` is already the kernel of `e^{itH} P`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jost::{jost_solution, JostSolution, Side};
use crate::lattice::CouplingSequence;
use crate::oracle::{grid_hamiltonian, GridOperator, GridProjection, GridSpec, OracleEvolver};
use crate::quadrature::{adaptive_breaks, panel_rule};
use crate::resolvent::ResolventKernel;
use crate::spectrum::SampledFunction;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Rungs `ε₀, ε₀/2, …` of the regularization ladder.
const RUNGS: usize = 4;

/// Quintic smoothstep `6u⁵ − 15u⁴ + 10u³` clamped to `[0, 1]`; `C²` at both ends.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

/// `σ₀ = ‖α‖₁²`, or `1` for the free operator.
fn cutoff_scale(seq: &CouplingSequence) -> f64 {
    let a = seq.l1_norm();
    if a > 0.0 {
        a * a
    } else {
        1.0
    }
}

/// `χ(λ)`: `0` for `λ² ≤ σ₀`, `1` for `λ² ≥ 2σ₀`.
pub fn high_energy_cutoff(seq: &CouplingSequence, lambda: f64) -> f64 {
    let s = cutoff_scale(seq);
    smoothstep((lambda * lambda - s) / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadParams {
    /// Upper limit `Λ` of the `λ` integral; chosen from the other parameters when absent.
    pub cutoff: Option<f64>,
    /// Minimum number of quadrature nodes in `λ`.
    pub min_nodes: usize,
    /// Largest regularization `ε₀` of the Richardson ladder `ε₀, ε₀/2, ε₀/4, ε₀/8`.
    pub epsilon: Option<f64>,
    /// Spacing used to sample analytic initial profiles.
    pub input_step: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self { cutoff: None, min_nodes: 256, epsilon: None, input_step: 1.0 / 128.0 }
    }
}

impl QuadParams {
    pub fn validate(&self, seq: &CouplingSequence) -> Result<()> {
        if let Some(c) = self.cutoff {
            if !(c > seq.l1_norm() && c.is_finite()) {
                return Err(Error::Input(format!("cutoff Λ = {c} must exceed ‖α‖₁ = {}", seq.l1_norm())));
            }
        }
        if self.min_nodes < 256 {
            return Err(Error::Input(format!("need at least 256 quadrature nodes, got {}", self.min_nodes)));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Input(format!("regularization ε must be ≥ 0, got {e}")));
            }
        }
        let per_unit = 1.0 / self.input_step;
        if !(self.input_step > 0.0 && (per_unit - per_unit.round()).abs() < 1e-9) {
            return Err(Error::Input(format!("input step must be 1/n for an integer n, got {}", self.input_step)));
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t != 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("time must be finite and nonzero, got {t}")))
    }
}

/// Splits every panel into `k` equal pieces.
fn refine(breaks: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for p in breaks.windows(2) {
        for i in 1..=k {
            out.push(p[0] + (p[1] - p[0]) * i as f64 / k as f64);
        }
    }
    out
}

/// Panel breaks on `[a, b]` resolving the phase `tλ² + Dλ`, with at least `min_nodes` nodes overall.
fn oscillatory_breaks(a: f64, b: f64, forced: &[f64], t: f64, path: f64, cap: f64, min_nodes: usize) -> Vec<f64> {
    let breaks = adaptive_breaks(a, b, forced, |l| (8.0 / (2.0 * t.abs() * l + path + 1.0)).min(cap));
    let panels = breaks.len() - 1;
    let needed = min_nodes.div_ceil(32);
    if panels < needed {
        refine(&breaks, needed.div_ceil(panels))
    } else {
        breaks
    }
}

/// Longest path `x → sites → y` a wave picks up with a few reflections inside the support.
fn kernel_path_length(seq: &CouplingSequence, x: f64, y: f64) -> f64 {
    match seq.support_span() {
        None => (x - y).abs(),
        Some((lo, hi)) => {
            let c = 0.5 * (lo + hi) as f64;
            let span = (hi - lo) as f64;
            ((x - c).abs() + (y - c).abs() + 3.0 * span).max((x - y).abs())
        }
    }
}

/// The free kernel of `e^{itH₀}`: `e^{i sgn(t) π/4} e^{−i(x−y)²/4t} / √(4π|t|)`.
pub fn free_propagator_kernel(t: f64, x: f64, y: f64) -> Complex64 {
    let a = x - y;
    let phase = t.signum() * std::f64::consts::FRAC_PI_4 - a * a / (4.0 * t);
    Complex64::from_polar(1.0 / (4.0 * std::f64::consts::PI * t.abs()).sqrt(), phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub value: Complex64,
    /// Richardson remainder plus the analytic tail beyond `Λ` plus rounding.
    pub error_bar: f64,
    pub cutoff: f64,
    pub epsilon: f64,
    pub nodes: usize,
}

/// `K_t(x, y)` by the split `∫ (1 − χ) + ∫ χ`.
///
/// The compact low-energy piece is summed directly. The high-energy piece is
/// damped by `e^{−ελ²}` for `ε = ε₀ 2^{−k}`, `k < 4`, truncated where the
/// smallest damping reaches `e^{−35}`, and extrapolated to `ε = 0` with a
/// full Richardson table. `ε₀ = min(0.05 |t| / (1/2 + D²/4|t|), 0.05 / 2σ₀)`
/// keeps `ε` well inside the analyticity radius of `ε ↦ ∫ e^{i(t + iε)λ² + iλD}`
/// and keeps `e^{−ελ²}` close to one across the transition `σ₀ ≤ λ² ≤ 2σ₀`.
pub fn stone_kernel(seq: &CouplingSequence, t: f64, x: f64, y: f64, quad: &QuadParams) -> Result<KernelEstimate> {
    check_time(t)?;
    quad.validate(seq)?;
    let sigma = cutoff_scale(seq);
    let (low_end, split) = (sigma.sqrt(), (2.0 * sigma).sqrt());
    let path = kernel_path_length(seq, x, y);
    let eps = quad.epsilon.unwrap_or((0.05 * t.abs() / (0.5 + path * path / (4.0 * t.abs()))).min(0.025 / sigma));
    if eps <= 0.0 {
        return Err(Error::Input("the Stone kernel needs a positive regularization ε".into()));
    }
    let smallest = eps / (1 << (RUNGS - 1)) as f64;
    let cutoff = quad.cutoff.unwrap_or((35.0 / smallest).sqrt()).max(split);

    let low = panel_rule(&oscillatory_breaks(0.0, split, &[low_end], t, path, 0.25, quad.min_nodes / 2));
    let high = panel_rule(&oscillatory_breaks(low_end, cutoff, &[split], t, path, 1.0, quad.min_nodes / 2));

    // λ Im G(λ)(x, y) at every node
    let sample = |rule: &[(f64, f64)]| -> Result<Vec<f64>> {
        rule.par_iter()
            .map(|&(l, _)| Ok(l * ResolventKernel::at(seq, l)?.eval(x, y).im))
            .collect()
    };
    let g_low = sample(&low)?;
    let g_high = sample(&high)?;

    let scale = 2.0 / std::f64::consts::PI;
    let mut low_sum = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for (&(l, w), g) in low.iter().zip(&g_low) {
        let c = (1.0 - high_energy_cutoff(seq, l)) * w * g;
        low_sum += c * Complex64::from_polar(1.0, t * l * l);
        magnitude += c.abs();
    }
    let mut damped = [Complex64::new(0.0, 0.0); RUNGS];
    let mut sup_g: f64 = 0.0;
    for (&(l, w), g) in high.iter().zip(&g_high) {
        let c = high_energy_cutoff(seq, l) * w * g;
        let osc = Complex64::from_polar(c, t * l * l);
        for (k, d) in damped.iter_mut().enumerate() {
            *d += osc * (-eps / (1 << k) as f64 * l * l).exp();
        }
        magnitude += c.abs();
        sup_g = sup_g.max(g.abs());
    }

    let floor = 64.0 * f64::EPSILON * magnitude;
    for k in 1..RUNGS - 1 {
        let (d1, d2) = ((damped[k] - damped[k - 1]).norm(), (damped[k + 1] - damped[k]).norm());
        if d2 > 0.75 * d1 && d2 > floor {
            return Err(Error::Quadrature(format!(
                "ε-extrapolation does not contract at t = {t}, x = {x}, y = {y}: successive differences {d1:.3e}, {d2:.3e}"
            )));
        }
    }
    // Richardson table in ε with halving ratio; row k cancels ε¹…ε^k
    let mut table = vec![damped.to_vec()];
    for k in 1..RUNGS {
        let factor = (1u32 << k) as f64;
        let row = table[k - 1].windows(2).map(|p| (factor * p[1] - p[0]) / (factor - 1.0)).collect();
        table.push(row);
    }
    let extrapolated = table[RUNGS - 1][0];
    let previous = table[RUNGS - 2][1];
    let tail = sup_g * (-smallest * cutoff * cutoff).exp() / (2.0 * smallest * cutoff);
    let error_bar = scale * ((extrapolated - previous).norm() + tail + floor);
    Ok(KernelEstimate {
        value: scale * (low_sum + extrapolated),
        error_bar,
        cutoff,
        epsilon: eps,
        nodes: low.len() + high.len(),
    })
}

/// Initial data `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialProfile {
    /// `exp(−(x − center)² / 2 width²)`.
    Gaussian { center: f64, width: f64 },
    /// Indicator of `[left, right]`.
    Box { left: f64, right: f64 },
    /// Piecewise-linear interpolation of samples, zero outside them.
    Samples(SampledFunction),
}

/// Piecewise-linear function on sorted knots, zero outside `[y_0, y_last]`.
#[derive(Debug, Clone)]
struct Knots {
    y: Vec<f64>,
    v: Vec<Complex64>,
}

/// Number of widths beyond which a Gaussian profile is treated as zero (`e^{−50}`).
const GAUSSIAN_REACH: f64 = 10.0;

impl InitialProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialProfile::Gaussian { center, width } if center.is_finite() && *width > 0.0 && width.is_finite() => Ok(()),
            InitialProfile::Box { left, right } if left.is_finite() && right.is_finite() && left < right => Ok(()),
            InitialProfile::Samples(s) if s.values.len() >= 2 && s.h > 0.0 && s.x0.is_finite() => Ok(()),
            other => Err(Error::Input(format!("invalid initial profile {other:?}"))),
        }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        match self {
            InitialProfile::Gaussian { center, width } => {
                let u = (x - center) / width;
                Complex64::new((-0.5 * u * u).exp(), 0.0)
            }
            InitialProfile::Box { left, right } => {
                if x > *left && x < *right {
                    Complex64::new(1.0, 0.0)
                } else if x == *left || x == *right {
                    Complex64::new(0.5, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            InitialProfile::Samples(s) => {
                let k = (x - s.x0) / s.h;
                if k < 0.0 || k > (s.values.len() - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let i = (k.floor() as usize).min(s.values.len() - 2);
                let frac = k - i as f64;
                s.values[i] * (1.0 - frac) + s.values[i + 1] * frac
            }
        }
    }

    /// `[a, b]` outside which `f` vanishes (to `e^{−50}` for a Gaussian).
    pub fn support(&self) -> (f64, f64) {
        match self {
            InitialProfile::Gaussian { center, width } => (center - GAUSSIAN_REACH * width, center + GAUSSIAN_REACH * width),
            InitialProfile::Box { left, right } => (*left, *right),
            InitialProfile::Samples(s) => (s.x0, s.x(s.values.len() - 1)),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            InitialProfile::Gaussian { width, .. } => width * (2.0 * std::f64::consts::PI).sqrt(),
            InitialProfile::Box { left, right } => right - left,
            InitialProfile::Samples(s) => {
                let n = s.values.len();
                s.h * s.values.iter().enumerate().map(|(k, v)| if k == 0 || k + 1 == n { 0.5 * v.norm() } else { v.norm() }).sum::<f64>()
            }
        }
    }

    /// Wavenumber beyond which the spectrum of `f` is negligible, when known.
    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            InitialProfile::Gaussian { width, .. } => Some(6.0 / width),
            _ => None,
        }
    }

    fn knots(&self, step: f64, sites: &[i64]) -> Knots {
        let (mut y, mut v): (Vec<f64>, Vec<Complex64>) = match self {
            InitialProfile::Gaussian { .. } => {
                let (a, b) = self.support();
                let (k0, k1) = ((a / step).floor() as i64, (b / step).ceil() as i64);
                (k0..=k1).map(|k| (k as f64 * step, self.value(k as f64 * step))).unzip()
            }
            InitialProfile::Box { left, right } => {
                let (k0, k1) = ((left / step).floor() as i64 + 1, (right / step).ceil() as i64 - 1);
                let mut y = vec![*left];
                y.extend((k0..=k1).map(|k| k as f64 * step).filter(|p| p > left && p < right));
                y.push(*right);
                let v = vec![Complex64::new(1.0, 0.0); y.len()];
                (y, v)
            }
            InitialProfile::Samples(s) => (s.xs().collect(), s.values.clone()),
        };
        // every site inside the support becomes a knot, so each segment sits in one interval
        for &j in sites {
            let p = j as f64;
            let at = y.partition_point(|&q| q < p);
            if at > 0 && at < y.len() && y[at] != p {
                let frac = (p - y[at - 1]) / (y[at] - y[at - 1]);
                let val = v[at - 1] * (1.0 - frac) + v[at] * frac;
                y.insert(at, p);
                v.insert(at, val);
            }
        }
        Knots { y, v }
    }
}

/// `(e^z − 1 − z)/z²` and `(e^z(z − 1) + 1)/z²`: the moments `∫₀¹ (1 − u) e^{zu}` and `∫₀¹ u e^{zu}`.
fn hat_moments(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-2 {
        let z2 = z * z;
        let first = 0.5 + z / 6.0 + z2 / 24.0 + z2 * z / 120.0 + z2 * z2 / 720.0;
        let second = 0.5 + z / 3.0 + z2 / 8.0 + z2 * z / 30.0 + z2 * z2 / 144.0;
        (first, second)
    } else {
        let e = z.exp();
        let z2 = z * z;
        ((e - 1.0 - z) / z2, (e * (z - 1.0) + 1.0) / z2)
    }
}

/// `(∫ f₊ f, ∫ conj(f₊) f)` for the piecewise-linear `f`, exactly (Filon with linear elements).
fn jost_moments(plus: &JostSolution, lambda: f64, knots: &Knots) -> (Complex64, Complex64) {
    let mut fp = Complex64::new(0.0, 0.0);
    let mut fm = Complex64::new(0.0, 0.0);
    let mut cached: Option<(f64, (Complex64, Complex64))> = None;
    let coeffs = plus.coefficients();
    for m in 0..knots.y.len() - 1 {
        let (y0, y1) = (knots.y[m], knots.y[m + 1]);
        let h = y1 - y0;
        let (p1, p2) = match cached {
            Some((hc, p)) if hc == h => p,
            _ => {
                let p = hat_moments(I * lambda * h);
                cached = Some((h, p));
                p
            }
        };
        let e = Complex64::from_polar(1.0, lambda * y0);
        let (v0, v1) = (knots.v[m], knots.v[m + 1]);
        let up = e * h * (v0 * p1 + v1 * p2);
        let down = e.conj() * h * (v0 * p1.conj() + v1 * p2.conj());
        let (a, b) = coeffs[plus.interval_of(0.5 * (y0 + y1))];
        fp += a * up + b * down;
        fm += a.conj() * down + b.conj() * up;
    }
    (fp, fm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stone,
    Oracle,
}

/// Uniform output nodes `start + k·step`, `k < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl OutputGrid {
    pub fn xs(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRequest {
    pub seq: CouplingSequence,
    pub initial: InitialProfile,
    pub t: f64,
    pub method: Method,
    pub quad: QuadParams,
    /// Finite-difference grid for the oracle method.
    pub grid: GridSpec,
    /// Where to report `u`; the oracle method defaults to its own nodes.
    pub output: Option<OutputGrid>,
    /// Apply `P`; turning it off only affects the oracle method.
    pub project: bool,
}

impl EvolutionRequest {
    pub fn new(seq: CouplingSequence, initial: InitialProfile, t: f64, method: Method, grid: GridSpec) -> Self {
        Self { seq, initial, t, method, quad: QuadParams::default(), grid, output: None, project: true }
    }

    fn validate(&self) -> Result<()> {
        check_time(self.t)?;
        self.initial.validate()?;
        self.quad.validate(&self.seq)
    }

    /// Output nodes for the Stone method: the support padded by 10 on each side, step 1/32.
    fn stone_output(&self) -> Vec<f64> {
        if let Some(g) = self.output {
            return g.xs();
        }
        let (a, b) = self.initial.support();
        let (lo, hi) = ((a - 10.0).floor(), (b + 10.0).ceil());
        let step = 1.0 / 32.0;
        OutputGrid { start: lo, step, count: ((hi - lo) / step).round() as usize + 1 }.xs()
    }

    /// Distance the fastest significant component reaches by time `t`, if the profile has a bandwidth.
    fn front(&self, t: f64) -> Option<f64> {
        let (a, b) = self.initial.support();
        self.initial.bandwidth().map(|k| a.abs().max(b.abs()) + 2.0 * k * t.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    pub t: f64,
    pub xs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub warnings: Vec<String>,
}

impl Evolution {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `u(t, ·) = e^{itH} P f`.
///
/// The Stone method integrates against `f` itself: `K_t` only sees the
/// continuous spectrum, so `∫ K_t f = ∫ K_t P f`. Writing
/// `Im G(λ)(x, y) = Re[(r f₊(x) + conj f₊(x)) f₊(y)] / 2λ` with `r = a₋/b`
/// separates the `y` integral into the moments `∫ f₊ f` and `∫ conj(f₊) f`.
pub fn evolve(req: &EvolutionRequest) -> Result<Evolution> {
    req.validate()?;
    match req.method {
        Method::Stone => evolve_stone(req),
        Method::Oracle => {
            let op = grid_hamiltonian(&req.seq, req.grid)?;
            let f = oracle_initial(req, &op);
            let mut ev = OracleEvolver::new(&op, f)?;
            let u = ev.advance_to(req.t).to_vec();
            Ok(oracle_output(req, &op, req.t, u))
        }
    }
}

fn oracle_initial(req: &EvolutionRequest, op: &GridOperator) -> Vec<Complex64> {
    let f: Vec<Complex64> = op.grid.xs().map(|x| req.initial.value(x)).collect();
    if req.project {
        GridProjection::new(op).apply(&f)
    } else {
        f
    }
}

fn wavefront_warnings(req: &EvolutionRequest, t: f64) -> Vec<String> {
    match (req.method, req.front(t)) {
        (Method::Oracle, Some(front)) if front > req.grid.half_width => vec![format!(
            "wavefront estimate {front:.1} at t = {t} exceeds the grid half-width {}; Dirichlet reflections may pollute the result",
            req.grid.half_width
        )],
        _ => Vec::new(),
    }
}

fn oracle_output(req: &EvolutionRequest, op: &GridOperator, t: f64, u: Vec<Complex64>) -> Evolution {
    let warnings = wavefront_warnings(req, t);
    let grid = op.grid;
    match req.output {
        None => Evolution { t, xs: grid.xs().collect(), values: u, warnings },
        Some(out) => {
            let xs = out.xs();
            let values = xs
                .iter()
                .map(|&x| {
                    // linear interpolation, zero at the Dirichlet ends
                    let k = (x + grid.half_width) / grid.step;
                    if k <= 0.0 || k >= (grid.len() + 1) as f64 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let i = k.floor() as usize;
                    let frac = k - i as f64;
                    let node = |n: usize| if n == 0 || n > grid.len() { Complex64::new(0.0, 0.0) } else { u[n - 1] };
                    node(i) * (1.0 - frac) + node(i + 1) * frac
                })
                .collect();
            Evolution { t, xs, values, warnings }
        }
    }
}

struct SpectralNode {
    plus: JostSolution,
    /// `a₋ / b`.
    ratio: Complex64,
    /// Quadrature weight times `e^{itλ²}/2π`, then times the moments.
    up: Complex64,
    down: Complex64,
}

fn evolve_stone(req: &EvolutionRequest) -> Result<Evolution> {
    let seq = &req.seq;
    let t = req.t;
    let sites: Vec<i64> = seq.sites().collect();
    let knots = req.initial.knots(req.quad.input_step, &sites);
    let xs = req.stone_output();

    let reach_in = knots.y.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let reach_out = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let span = seq.support_span().map_or(0.0, |(lo, hi)| (hi - lo) as f64);
    let path = reach_in + reach_out + 2.0 * span;
    // 10/width for a Gaussian, where its transform is down to e^{−50}
    let band = req.initial.bandwidth().map_or(40.0, |k| k * GAUSSIAN_REACH / 6.0);
    let cutoff = req.quad.cutoff.unwrap_or((4.0 * seq.l1_norm()).max(8.0 / t.abs().sqrt()).max(band));
    let rule = panel_rule(&oscillatory_breaks(0.0, cutoff, &[], t, path, 0.25, req.quad.min_nodes));

    let nodes: Vec<SpectralNode> = rule
        .par_iter()
        .map(|&(l, w)| {
            let m = Complex64::new(l, 0.0);
            let plus = jost_solution(seq, m, Side::Plus)?;
            let minus = jost_solution(seq, m, Side::Minus)?;
            let (a_minus, b) = *minus.coefficients().last().expect("at least one interval");
            let (fp, fm) = jost_moments(&plus, l, &knots);
            let c = w / (2.0 * std::f64::consts::PI) * Complex64::from_polar(1.0, t * l * l);
            Ok(SpectralNode { plus, ratio: a_minus / b, up: c * fp, down: c * fm })
        })
        .collect::<Result<_>>()?;

    let values: Vec<Complex64> = xs
        .par_iter()
        .map(|&x| {
            nodes.iter().fold(Complex64::new(0.0, 0.0), |acc, n| {
                let f = n.plus.value(x);
                acc + (n.ratio * f + f.conj()) * n.up + (n.ratio.conj() * f.conj() + f) * n.down
            })
        })
        .collect();
    Ok(Evolution { t, xs, values, warnings: Vec::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScanResult {
    pub times: Vec<f64>,
    pub sup_norms: Vec<f64>,
    /// Where each sup-norm is attained, and the value there.
    pub peak_positions: Vec<f64>,
    pub peak_values: Vec<Complex64>,
    /// `p` in `‖u(t)‖_∞ ≈ C t^p`.
    pub exponent: f64,
    pub constant: f64,
    /// RMS deviation of the log-log fit.
    pub residual: f64,
    pub l1_norm: f64,
    /// `√t ‖u(t)‖_∞ / ‖f‖₁`.
    pub dispersive_constants: Vec<f64>,
    pub dispersive_sup: f64,
    /// Largest dispersive constant with `t ≤ 10 t_first`.
    pub first_decade_max: f64,
    /// Largest dispersive constant with `t ≥ t_last / 10`.
    pub last_decade_max: f64,
    pub warnings: Vec<String>,
}

/// Least squares `ln y = ln C + p ln t`; returns `(p, C, rms residual)`.
pub fn log_log_fit(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let p = sxy / sxx;
    let c = my - p * mx;
    let rms = (lx.iter().zip(&ly).map(|(a, b)| (b - c - p * a).powi(2)).sum::<f64>() / n).sqrt();
    (p, c.exp(), rms)
}

/// First sample of largest modulus.
fn peak(samples: impl Iterator<Item = (f64, Complex64)>) -> (f64, Complex64) {
    samples.fold((f64::NAN, Complex64::new(0.0, 0.0)), |best, s| if s.1.norm() > best.1.norm() || best.0.is_nan() { s } else { best })
}

/// Sup-norms of `u(t)` over `times` (the request's own `t` is ignored).
///
/// The oracle method advances one state through the increasing times and
/// takes sup-norms over all grid nodes; the Stone method evaluates each time
/// independently on the output grid.
pub fn decay_scan(req: &EvolutionRequest, times: &[f64]) -> Result<DecayScanResult> {
    req.initial.validate()?;
    req.quad.validate(&req.seq)?;
    if times.len() < 8 {
        return Err(Error::Input(format!("a decay scan needs at least 8 times, got {}", times.len())));
    }
    if !(times[0] > 0.0 && times.windows(2).all(|w| w[1] > w[0]) && times.iter().all(|t| t.is_finite())) {
        return Err(Error::Input("decay-scan times must be positive and increasing".into()));
    }
    let (first, last) = (times[0], times[times.len() - 1]);
    if last < 10.0 * first * (1.0 - 1e-12) {
        return Err(Error::Input(format!("decay-scan times must span a decade, got [{first}, {last}]")));
    }

    let mut warnings = Vec::new();
    let peaks: Vec<(f64, Complex64)> = match req.method {
        Method::Oracle => {
            let op = grid_hamiltonian(&req.seq, req.grid)?;
            let mut ev = OracleEvolver::new(&op, oracle_initial(req, &op))?;
            warnings.extend(wavefront_warnings(req, last));
            times.iter().map(|&t| peak(op.grid.xs().zip(ev.advance_to(t).iter().copied()))).collect()
        }
        Method::Stone => times
            .iter()
            .map(|&t| {
                let r = EvolutionRequest { t, ..req.clone() };
                evolve(&r).map(|e| peak(e.xs.iter().copied().zip(e.values.iter().copied())))
            })
            .collect::<Result<_>>()?,
    };
    let sup_norms: Vec<f64> = peaks.iter().map(|p| p.1.norm()).collect();
    if let Some(&bad) = sup_norms.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Accuracy(format!("sup-norm {bad} is not positive; the fit is undefined")));
    }

    let (exponent, constant, residual) = log_log_fit(times, &sup_norms);
    let l1 = req.initial.l1_norm();
    let dispersive: Vec<f64> = times.iter().zip(&sup_norms).map(|(t, s)| t.sqrt() * s / l1).collect();
    let max_where = |keep: &dyn Fn(f64) -> bool| {
        times.iter().zip(&dispersive).filter(|(t, _)| keep(**t)).map(|(_, d)| *d).fold(0.0, f64::max)
    };
    Ok(DecayScanResult {
        times: times.to_vec(),
        exponent,
        constant,
        residual,
        l1_norm: l1,
        dispersive_sup: dispersive.iter().copied().fold(0.0, f64::max),
        first_decade_max: max_where(&|t| t <= 10.0 * first),
        last_decade_max: max_where(&|t| t >= last / 10.0),
        dispersive_constants: dispersive,
        sup_norms,
        peak_positions: peaks.iter().map(|p| p.0).collect(),
        peak_values: peaks.iter().map(|p| p.1).collect(),
        warnings,
    })
}
