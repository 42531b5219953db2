//! Wronskian of the Jost solutions, the scattering coefficients `a₋`, `b`, and
//! detection of a zero-energy resonance.

use num_complex::Complex64;
use serde::Serialize;

use crate::ddouble::{Cdd, Dd};
use crate::error::{Error, Result};
use crate::jost::{jost_solution, JostSolution, Side};
use crate::lattice::CouplingSequence;
use crate::transfer::{crossing_matrix, Branch};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance for the Wronskian to agree across intervals.
pub const CONSTANCY_TOL: f64 = 1e-10;

/// Default threshold on `|W(0)|` below which zero energy counts as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringData {
    pub lambda: Complex64,
    pub wronskian: Complex64,
    pub b: Complex64,
    pub a_minus: Complex64,
    /// `| |b|² − |a₋|² − 1 |`; zero for the λ = 0 record.
    pub unitarity_residual: f64,
    /// Set only on the λ = 0 record.
    pub resonant_at_zero: Option<bool>,
}

/// `W(f, g) = f g′ − f′ g` on every interval shared by two solutions, which
/// must be expressed in the same basis and cut at the same sites.
///
/// Returns the value on the rightmost interval after checking that every
/// other interval agrees to [`CONSTANCY_TOL`] relative to `|W|`, plus a
/// rounding allowance proportional to the sweep's coefficient bounds.
pub(crate) fn wronskian_of(f: &JostSolution, g: &JostSolution) -> Result<Complex64> {
    debug_assert_eq!(f.sites(), g.sites());
    let prefactor = match f.branch() {
        Branch::Oscillatory(l) => -2.0 * I * l,
        Branch::ZeroEnergy => Complex64::new(1.0, 0.0),
    };
    let mut values = Vec::with_capacity(f.coefficients().len());
    for k in 0..f.coefficients().len() {
        let ((af, bf), (ag, bg)) = (f.coefficients()[k], g.coefficients()[k]);
        let ((mf, nf), (mg, ng)) = (f.coefficient_bounds()[k], g.coefficient_bounds()[k]);
        let rounding = prefactor.norm() * (mf * ng + nf * mg);
        values.push((prefactor * (af * bg - bf * ag), rounding));
    }
    let (reference, reference_rounding) = *values.last().expect("at least one interval");
    for (k, &(w, rounding)) in values.iter().enumerate() {
        let allowed = CONSTANCY_TOL * reference.norm() + 64.0 * f64::EPSILON * (rounding + reference_rounding);
        if (w - reference).norm() > allowed {
            return Err(Error::Consistency(format!(
                "Wronskian not constant: interval {k} gives {w}, rightmost gives {reference}"
            )));
        }
    }
    Ok(reference)
}

/// `W(λ) = W(f₊(λ, ·), f₋(λ, ·))`.
pub fn wronskian(seq: &CouplingSequence, lambda: Complex64) -> Result<Complex64> {
    let plus = jost_solution(seq, lambda, Side::Plus)?;
    let minus = jost_solution(seq, lambda, Side::Minus)?;
    wronskian_of(&plus, &minus)
}

/// `f₊(−λ, ·)` rewritten in the `(e^{iλx}, e^{−iλx})` basis of `λ`.
fn reflected_plus(seq: &CouplingSequence, lambda: f64) -> Result<JostSolution> {
    let mut sol = jost_solution(seq, Complex64::new(-lambda, 0.0), Side::Plus)?;
    for pair in sol.coefficients_mut() {
        *pair = (pair.1, pair.0);
    }
    Ok(sol)
}

pub fn scattering_coefficients(seq: &CouplingSequence, lambda: f64) -> Result<ScatteringData> {
    if !lambda.is_finite() {
        return Err(Error::Input(format!("spectral parameter must be finite, got {lambda}")));
    }
    let l = Complex64::new(lambda, 0.0);
    if let Branch::ZeroEnergy = Branch::of(l)? {
        return Err(Error::Branch);
    }
    let plus = jost_solution(seq, l, Side::Plus)?;
    let minus = jost_solution(seq, l, Side::Minus)?;
    let w = wronskian_of(&plus, &minus)?;
    let reflected = reflected_plus(seq, lambda)?;
    let w_reflected = wronskian_of(&minus, &reflected)?;

    let b = -w / (2.0 * I * l);
    let a_minus = -w_reflected / (2.0 * I * l);
    Ok(ScatteringData {
        lambda: l,
        wronskian: w,
        b,
        a_minus,
        unitarity_residual: unitarity_defect(seq, lambda)?,
        resonant_at_zero: None,
    })
}

/// `| |b|² − |a₋|² − 1 |` from a second, double-double sweep of the minus solution.
///
/// For real `λ` every crossing matrix has the form `[[u, v], [v̄, ū]]`, so it is
/// rebuilt from its first row to keep that form exactly in the rounded
/// entries. An f64 evaluation of the identity cannot resolve better than
/// `ε |b|²`, which exceeds any useful absolute tolerance once `|b|` is large.
fn unitarity_defect(seq: &CouplingSequence, lambda: f64) -> Result<f64> {
    let l = Complex64::new(lambda, 0.0);
    let mut v = (Cdd::ZERO, Cdd::ONE);
    for c in seq.iter() {
        let t = crossing_matrix(c.j, c.value, l)?;
        let (u, w) = (Cdd::from_c64(t.m11), Cdd::from_c64(t.m12));
        v = (u * v.0 + w * v.1, w.conj() * v.0 + u.conj() * v.1);
    }
    let (a, b) = v;
    Ok((b.norm_sqr() - a.norm_sqr() - Dd::from_f64(1.0)).to_f64().abs())
}

/// `b(λ) = 1 − (1/2iλ) Σ_j α_j m₊(λ, j)`, independent of the Wronskian.
pub fn b_sum_formula(seq: &CouplingSequence, lambda: Complex64) -> Result<Complex64> {
    let l = match Branch::of(lambda)? {
        Branch::ZeroEnergy => return Err(Error::Branch),
        Branch::Oscillatory(l) => l,
    };
    let plus = jost_solution(seq, l, Side::Plus)?;
    let sum: Complex64 = seq.iter().map(|c| c.value * plus.modulated(c.j as f64)).sum();
    Ok(1.0 - sum / (2.0 * I * l))
}

/// `W(0)` on the zero-energy branch and whether `|W(0)| ≤ tol`.
pub fn resonance_check(seq: &CouplingSequence, tol: f64) -> Result<(Complex64, bool)> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("resonance tolerance must be positive, got {tol}")));
    }
    let w0 = wronskian(seq, Complex64::new(0.0, 0.0))?;
    Ok((w0, w0.norm() <= tol))
}

/// The λ = 0 record: `b` and `a₋` are undefined there and reported as NaN.
pub fn zero_energy_record(seq: &CouplingSequence, tol: f64) -> Result<ScatteringData> {
    let (w0, resonant) = resonance_check(seq, tol)?;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    Ok(ScatteringData {
        lambda: Complex64::new(0.0, 0.0),
        wronskian: w0,
        b: nan,
        a_minus: nan,
        unitarity_residual: 0.0,
        resonant_at_zero: Some(resonant),
    })
}

/// A coupling value at which a one-parameter family becomes resonant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonantCoupling {
    pub c: f64,
    /// `W(0)` at the located coupling.
    pub w0: f64,
}

/// Scans `c ↦ Re W(0; family(c))` on `samples` uniform points of `[lo, hi]`
/// and bisects every strict sign change down to `|Δc| ≤ c_tol`.
///
/// On real couplings `W(0)` is real. Tangential zeros, where `W(0)` touches
/// zero without changing sign, are invisible to this scan.
pub fn scan_resonant_couplings<F>(family: F, lo: f64, hi: f64, samples: usize, c_tol: f64) -> Result<Vec<ResonantCoupling>>
where
    F: Fn(f64) -> Result<CouplingSequence>,
{
    if !(lo < hi) || samples < 2 || !(c_tol > 0.0) {
        return Err(Error::Input(format!(
            "need lo < hi, at least two samples and positive tolerance; got [{lo}, {hi}], {samples}, {c_tol}"
        )));
    }
    let w0 = |c: f64| -> Result<f64> { Ok(wronskian(&family(c)?, Complex64::new(0.0, 0.0))?.re) };
    let step = (hi - lo) / (samples - 1) as f64;
    let mut found = Vec::new();
    let mut prev = (lo, w0(lo)?);
    for k in 1..samples {
        let c = if k == samples - 1 { hi } else { lo + k as f64 * step };
        let cur = (c, w0(c)?);
        if cur.1 == 0.0 {
            found.push(ResonantCoupling { c, w0: 0.0 });
        } else if prev.1 != 0.0 && prev.1.signum() != cur.1.signum() {
            let (mut a, mut fa, mut b) = (prev.0, prev.1, cur.0);
            while b - a > c_tol {
                let mid = 0.5 * (a + b);
                let fm = w0(mid)?;
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            let c = 0.5 * (a + b);
            found.push(ResonantCoupling { c, w0: w0(c)? });
        }
        prev = cur;
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single() -> CouplingSequence {
        CouplingSequence::single(0, -2.0).unwrap()
    }

    #[test]
    fn wronskian_examples() {
        assert!((wronskian(&CouplingSequence::free(), c(3.0, 0.0)).unwrap() - c(0.0, -6.0)).norm() < 1e-15);
        assert!((wronskian(&single(), c(1.0, 0.0)).unwrap() - c(-2.0, -2.0)).norm() < 1e-14);
        assert!((wronskian(&single(), c(0.0, 0.0)).unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn wronskian_detects_corruption() {
        let seq = CouplingSequence::new([(-1, 0.5), (2, -1.0)]).unwrap();
        let plus = jost_solution(&seq, c(0.9, 0.0), Side::Plus).unwrap();
        let mut minus = jost_solution(&seq, c(0.9, 0.0), Side::Minus).unwrap();
        assert!(wronskian_of(&plus, &minus).is_ok());
        minus.coefficients_mut()[1].0 += 1e-6;
        assert!(matches!(wronskian_of(&plus, &minus), Err(Error::Consistency(_))));
    }

    #[test]
    fn scattering_examples() {
        let free = scattering_coefficients(&CouplingSequence::free(), 1.0).unwrap();
        assert_eq!(free.b, c(1.0, 0.0));
        assert_eq!(free.a_minus, c(0.0, 0.0));
        assert_eq!(free.unitarity_residual, 0.0);

        let s = scattering_coefficients(&single(), 1.0).unwrap();
        assert!((s.b - c(1.0, -1.0)).norm() < 1e-14);
        assert!((s.a_minus - c(0.0, 1.0)).norm() < 1e-14);
        assert!((s.b.norm_sqr() - 2.0).abs() < 1e-13);
        assert!((s.a_minus.norm_sqr() - 1.0).abs() < 1e-13);
        assert!(s.unitarity_residual < 1e-13);
        assert!((s.wronskian + 2.0 * I * s.b).norm() < 1e-14);

        assert_eq!(scattering_coefficients(&single(), 0.0), Err(Error::Branch));
    }

    #[test]
    fn a_minus_matches_rightmost_coefficient() {
        let seq = CouplingSequence::new([(-2, 0.3), (0, -1.1), (1, 0.8), (4, 0.5)]).unwrap();
        let s = scattering_coefficients(&seq, 0.7).unwrap();
        let minus = jost_solution(&seq, c(0.7, 0.0), Side::Minus).unwrap();
        let &(a, b) = minus.coefficients().last().unwrap();
        assert!((s.a_minus - a).norm() < 1e-12);
        assert!((s.b - b).norm() < 1e-12);
        assert!(s.unitarity_residual < 1e-10);
    }

    #[test]
    fn b_sum_examples() {
        assert_eq!(b_sum_formula(&CouplingSequence::free(), c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert!((b_sum_formula(&single(), c(1.0, 0.0)).unwrap() - c(1.0, -1.0)).norm() < 1e-15);
        assert_eq!(b_sum_formula(&single(), c(0.0, 0.0)), Err(Error::Branch));
    }

    #[test]
    fn resonance_examples() {
        let (w0, res) = resonance_check(&CouplingSequence::free(), RESONANCE_TOL).unwrap();
        assert_eq!(w0, c(0.0, 0.0));
        assert!(res);
        let (w0, res) = resonance_check(&single(), RESONANCE_TOL).unwrap();
        assert_eq!(w0, c(-2.0, 0.0));
        assert!(!res);
        assert!(resonance_check(&single(), 0.0).is_err());
        let rec = zero_energy_record(&single(), RESONANCE_TOL).unwrap();
        assert_eq!(rec.resonant_at_zero, Some(false));
    }

    #[test]
    fn antisymmetric_pair_is_tangent_at_zero() {
        // W(0) = −2c² for strengths (c, −c) at ∓1: a double zero, no sign change
        for cc in [-1.5, -0.5, 0.25, 2.0] {
            let seq = CouplingSequence::new([(-1, cc), (1, -cc)]).unwrap();
            let w0 = wronskian(&seq, c(0.0, 0.0)).unwrap();
            assert!((w0 - c(-2.0 * cc * cc, 0.0)).norm() < 1e-13);
        }
        let family = |cc: f64| CouplingSequence::new([(-1, cc), (1, -cc)]);
        assert!(scan_resonant_couplings(family, -2.0, 2.0, 101, 1e-12).unwrap().iter().all(|r| r.c == 0.0));
    }

    #[test]
    fn symmetric_pair_resonance_is_located() {
        // W(0) = 2c(1 + c): crossing at c = −1 (and the free point c = 0)
        let family = |cc: f64| CouplingSequence::new([(-1, cc), (1, cc)]);
        for cc in [-2.0, -0.3, 0.7] {
            let w0 = wronskian(&family(cc).unwrap(), c(0.0, 0.0)).unwrap();
            assert!((w0.re - 2.0 * cc * (1.0 + cc)).abs() < 1e-13);
        }
        let roots = scan_resonant_couplings(family, -2.05, -0.45, 40, 1e-12).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].c + 1.0).abs() < 1e-11, "{roots:?}");
        let (_, res) = resonance_check(&family(roots[0].c).unwrap(), RESONANCE_TOL).unwrap();
        assert!(res);
    }

    #[test]
    fn wronskian_continuous_at_zero_energy() {
        let seq = CouplingSequence::new([(-2, 0.4), (0, -1.0), (3, 0.7)]).unwrap();
        let w0 = wronskian(&seq, c(0.0, 0.0)).unwrap();
        assert!(w0.norm() > 1e-3);
        let mut last = f64::INFINITY;
        for k in 2..=6 {
            let d = (wronskian(&seq, c(10f64.powi(-k), 0.0)).unwrap() - w0).norm();
            assert!(d < last && d < 50.0 * 10f64.powi(-k), "k={k}: {d}");
            last = d;
        }
    }

    #[test]
    fn resonant_quotient_has_nonzero_limit() {
        // at the resonant coupling W(0) = 0, so W(λ)/λ stays bounded and nonzero
        let seq = CouplingSequence::new([(-1, -1.0), (1, -1.0)]).unwrap();
        assert_eq!(wronskian(&seq, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let q = |k: i32| {
            let l = 10f64.powi(-k);
            wronskian(&seq, c(l, 0.0)).unwrap() / l
        };
        let mut last = f64::INFINITY;
        for k in 2..6 {
            let d = (q(k + 1) - q(k)).norm();
            assert!(d < last, "k={k}: {d} vs {last}");
            last = d;
        }
        assert!(q(6).norm() > 1e-2 && q(6).norm().is_finite());
    }

    fn seq_strategy(max_sites: usize) -> impl Strategy<Value = CouplingSequence> {
        prop::collection::vec((-6i64..=6, -2.0..2.0f64), 0..=max_sites)
            .prop_map(|pairs| CouplingSequence::new(pairs).unwrap())
    }

    proptest! {
        #[test]
        fn unitarity_on_real_axis(seq in seq_strategy(8), lambda in 0.05..20.0f64, neg in prop::bool::ANY) {
            let lambda = if neg { -lambda } else { lambda };
            let s = scattering_coefficients(&seq, lambda).unwrap();
            prop_assert!(s.unitarity_residual <= 1e-10, "residual {} at |b| = {}", s.unitarity_residual, s.b.norm());
            prop_assert!(s.b.norm() >= 1.0 - 1e-10);
            let l = c(lambda, 0.0);
            prop_assert!((s.wronskian + 2.0 * I * l * s.b).norm() <= 1e-10 * s.wronskian.norm().max(1.0));
        }

        #[test]
        fn b_formulas_agree(seq in seq_strategy(6), re in -5.0..5.0f64, im in 0.0..3.0f64) {
            let l = c(re, im);
            prop_assume!(l.norm() > 0.05);
            let direct = -wronskian(&seq, l).unwrap() / (2.0 * I * l);
            let sum = b_sum_formula(&seq, l).unwrap();
            prop_assert!((direct - sum).norm() <= 1e-10 * direct.norm().max(1.0), "{} vs {}", direct, sum);
        }

        #[test]
        fn wronskian_real_on_imaginary_axis(seq in seq_strategy(8), kappa in 0.01..3.0f64) {
            let w = wronskian(&seq, c(0.0, kappa)).unwrap();
            prop_assert!(w.im.abs() <= 1e-12 * w.norm().max(1.0));
        }
    }

    #[test]
    fn b_at_one_plus_i() {
        let seq = CouplingSequence::new([(-3, 0.4), (-1, -1.2), (0, 0.9), (2, 1.5), (4, -0.6), (5, 0.2)]).unwrap();
        let l = c(1.0, 1.0);
        let direct = -wronskian(&seq, l).unwrap() / (2.0 * I * l);
        assert!((direct - b_sum_formula(&seq, l).unwrap()).norm() < 1e-10 * direct.norm().max(1.0));
    }
}
