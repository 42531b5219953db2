//! Site-crossing matrices for the coefficient recursion of the Jost solutions.
//!
//! On each interval `[j, j+1)` a solution of `−f″ = λ² f` is written as
//! `A e^{iλx} + B e^{−iλx}` (or `A + B x` when `λ = 0`). Continuity of `f` and
//! the derivative jump `f′(j+) − f′(j−) = α_j f(j)` fix a linear map taking the
//! coefficients just left of `j` to those just right of it:
//!
//! ```text
//! T_j(λ) = I + α_j N_j(λ),
//! N_j(λ) = (1 / 2iλ) [[1, e^{−2iλj}], [−e^{2iλj}, −1]]     (λ ≠ 0)
//! N_j(0) = [[−j, −j²], [1, j]]                              (λ = 0)
//! ```
//!
//! `N_j` squares to zero, so `det T_j = 1` and `T_j⁻¹ = I − α_j N_j`. The same
//! matrix is used at every site, including `j = 0`; sweeping leftward uses the
//! inverse.

use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::CouplingSequence;

/// Below this modulus the spectral parameter is dispatched to the `λ = 0` formulas.
pub const ZERO_ENERGY_THRESHOLD: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which coefficient basis a spectral parameter uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    /// Basis `(e^{iλx}, e^{−iλx})`.
    Oscillatory(Complex64),
    /// Basis `(1, x)`.
    ZeroEnergy,
}

impl Branch {
    pub fn of(lambda: Complex64) -> Result<Self> {
        if lambda.im < 0.0 || lambda.im.is_nan() || lambda.re.is_nan() {
            return Err(Error::Domain(lambda.im));
        }
        if lambda.norm() < ZERO_ENERGY_THRESHOLD {
            Ok(Branch::ZeroEnergy)
        } else {
            Ok(Branch::Oscillatory(lambda))
        }
    }

    pub fn lambda(&self) -> Complex64 {
        match *self {
            Branch::Oscillatory(l) => l,
            Branch::ZeroEnergy => Complex64::new(0.0, 0.0),
        }
    }
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        m11: Complex64::new(1.0, 0.0),
        m12: Complex64::new(0.0, 0.0),
        m21: Complex64::new(0.0, 0.0),
        m22: Complex64::new(1.0, 0.0),
    };

    pub fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Self::new(m[0][0].into(), m[0][1].into(), m[1][0].into(), m[1][1].into())
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m11, self.m21, self.m12, self.m22)
    }

    /// Exact inverse through the adjugate.
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn apply(&self, v: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (self.m11 * v.0 + self.m12 * v.1, self.m21 * v.0 + self.m22 * v.1)
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    /// Entrywise max modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, r: TransferMatrix) -> TransferMatrix {
        TransferMatrix::new(
            self.m11 * r.m11 + self.m12 * r.m21,
            self.m11 * r.m12 + self.m12 * r.m22,
            self.m21 * r.m11 + self.m22 * r.m21,
            self.m21 * r.m12 + self.m22 * r.m22,
        )
    }
}

/// The nilpotent part `N_j(λ)`.
pub fn nilpotent(site: i64, branch: Branch) -> TransferMatrix {
    match branch {
        Branch::Oscillatory(lambda) => {
            let j = site as f64;
            let c = 1.0 / (2.0 * I * lambda);
            let e_minus = (-2.0 * I * lambda * j).exp();
            let e_plus = (2.0 * I * lambda * j).exp();
            TransferMatrix::new(c, c * e_minus, -c * e_plus, -c)
        }
        Branch::ZeroEnergy => {
            let j = site as f64;
            TransferMatrix::from_real([[-j, -j * j], [1.0, j]])
        }
    }
}

fn crossing_on_branch(site: i64, strength: f64, branch: Branch) -> TransferMatrix {
    let n = nilpotent(site, branch).scale(strength.into());
    TransferMatrix::new(n.m11 + 1.0, n.m12, n.m21, n.m22 + 1.0)
}

/// `T_j(λ)`: maps `(A, B)` on `[j−1, j)` to `(A, B)` on `[j, j+1)`.
pub fn crossing_matrix(site: i64, strength: f64, lambda: Complex64) -> Result<TransferMatrix> {
    Ok(crossing_on_branch(site, strength, Branch::of(lambda)?))
}

/// `T_j(λ)⁻¹ = I − α_j N_j(λ)`.
pub fn inverse_crossing_matrix(site: i64, strength: f64, lambda: Complex64) -> Result<TransferMatrix> {
    Ok(crossing_on_branch(site, -strength, Branch::of(lambda)?))
}

pub(crate) fn crossing_for(site: i64, strength: f64, branch: Branch) -> TransferMatrix {
    crossing_on_branch(site, strength, branch)
}

/// Ordered products of crossing matrices over the support.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeProduct {
    pub lambda: Complex64,
    pub sites: Vec<i64>,
    /// `T_{s_k}` for each site.
    pub crossings: Vec<TransferMatrix>,
    /// `prefix[k] = T_{s_k} ⋯ T_{s_0}`: maps the leftmost coefficients to those on `[s_k, s_{k+1})`.
    pub prefix: Vec<TransferMatrix>,
    /// Product over every site, leftmost to rightmost. Constant beyond the support.
    pub total: TransferMatrix,
}

impl CumulativeProduct {
    /// Product over sites `j ≥ reference`, applied in increasing order.
    pub fn upper(&self, reference: i64) -> TransferMatrix {
        self.product_where(|j| j >= reference)
    }

    /// Product over sites `j < reference`, applied in increasing order.
    pub fn lower(&self, reference: i64) -> TransferMatrix {
        self.product_where(|j| j < reference)
    }

    fn product_where(&self, keep: impl Fn(i64) -> bool) -> TransferMatrix {
        self.sites
            .iter()
            .zip(&self.crossings)
            .filter(|(&j, _)| keep(j))
            .fold(TransferMatrix::IDENTITY, |acc, (_, t)| *t * acc)
    }
}

pub fn cumulative_products(seq: &CouplingSequence, lambda: Complex64) -> Result<CumulativeProduct> {
    let branch = Branch::of(lambda)?;
    let crossings: Vec<TransferMatrix> = seq.iter().map(|c| crossing_on_branch(c.j, c.value, branch)).collect();
    let mut prefix = Vec::with_capacity(seq.len());
    let mut acc = TransferMatrix::IDENTITY;
    for t in &crossings {
        acc = *t * acc;
        prefix.push(acc);
    }
    Ok(CumulativeProduct {
        lambda,
        sites: seq.sites().collect(),
        crossings,
        prefix,
        total: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_strength_is_identity() {
        for site in [-3, 0, 5] {
            let t = crossing_matrix(site, 0.0, c(1.0, 0.0)).unwrap();
            assert_eq!(t, TransferMatrix::IDENTITY);
        }
    }

    #[test]
    fn single_site_at_origin_on_imaginary_axis() {
        let t = crossing_matrix(0, -2.0, c(0.0, 1.0)).unwrap();
        let expected = TransferMatrix::from_real([[2.0, 1.0], [-1.0, 0.0]]);
        assert!(t.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn zero_energy_crossing() {
        let t = crossing_matrix(1, 1.0, c(0.0, 0.0)).unwrap();
        let expected = TransferMatrix::from_real([[0.0, -1.0], [1.0, 2.0]]);
        assert_eq!(t, expected);
        // the resulting piecewise-linear function is continuous at x = 1
        // and its slope jumps by α f(1)
        let left = (c(0.3, 0.0), c(-0.7, 0.0));
        let right = t.apply(left);
        let f_left = left.0 + left.1 * 1.0;
        let f_right = right.0 + right.1 * 1.0;
        assert!((f_left - f_right).norm() < 1e-15);
        assert!((right.1 - left.1 - f_right).norm() < 1e-15);
    }

    #[test]
    fn lower_half_plane_is_rejected() {
        assert_eq!(crossing_matrix(0, 1.0, c(1.0, -0.1)), Err(Error::Domain(-0.1)));
        assert!(cumulative_products(&CouplingSequence::single(0, 1.0).unwrap(), c(0.0, -1.0)).is_err());
    }

    #[test]
    fn free_products_are_identity() {
        let p = cumulative_products(&CouplingSequence::free(), c(1.3, 0.2)).unwrap();
        assert_eq!(p.total, TransferMatrix::IDENTITY);
        assert!(p.prefix.is_empty());
    }

    #[test]
    fn single_site_products() {
        let seq = CouplingSequence::single(0, -2.0).unwrap();
        let p = cumulative_products(&seq, c(0.0, 1.0)).unwrap();
        let expected = TransferMatrix::from_real([[2.0, 1.0], [-1.0, 0.0]]);
        assert!(p.upper(0).max_abs_diff(&expected) < 1e-15);
        assert_eq!(p.lower(0), TransferMatrix::IDENTITY);
        assert!(p.total.max_abs_diff(&expected) < 1e-15);
    }

    /// Solve the continuity and jump conditions at each site directly as a 2×2
    /// linear system, independently of the closed-form matrices.
    fn jump_solve(left: (Complex64, Complex64), site: i64, alpha: f64, lambda: Complex64) -> (Complex64, Complex64) {
        let x = site as f64;
        let ep = (I * lambda * x).exp();
        let em = (-I * lambda * x).exp();
        let f = left.0 * ep + left.1 * em;
        let df = I * lambda * (left.0 * ep - left.1 * em);
        // unknowns (A, B): A ep + B em = f,  iλ(A ep − B em) = df + α f
        let rhs2 = (df + alpha * f) / (I * lambda);
        let a = (f + rhs2) / (2.0 * ep);
        let b = (f - rhs2) / (2.0 * em);
        (a, b)
    }

    #[test]
    fn two_site_product_matches_direct_jump_solve() {
        let seq = CouplingSequence::new([(0, -2.0), (3, 1.0)]).unwrap();
        let lambda = c(1.0, 0.0);
        let p = cumulative_products(&seq, lambda).unwrap();
        for start in [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0)), (c(0.3, -0.2), c(-1.1, 0.4))] {
            let mut v = start;
            for cpl in seq.iter() {
                v = jump_solve(v, cpl.j, cpl.value, lambda);
            }
            let w = p.total.apply(start);
            assert!((v.0 - w.0).norm() < 1e-13 && (v.1 - w.1).norm() < 1e-13);
        }
        // entry (1,1) of the product is the image of (1, 0) in the first slot
        let e = jump_solve(jump_solve((c(1.0, 0.0), c(0.0, 0.0)), 0, -2.0, lambda), 3, 1.0, lambda);
        assert!((p.total.m11 - e.0).norm() < 1e-13);
    }

    #[test]
    fn upper_times_lower_is_total() {
        let seq = CouplingSequence::new([(-2, 0.7), (0, -1.3), (1, 0.4), (4, 2.0)]).unwrap();
        let p = cumulative_products(&seq, c(0.8, 0.3)).unwrap();
        for reference in [-3, 0, 1, 2, 5] {
            let split = p.upper(reference) * p.lower(reference);
            assert!(split.max_abs_diff(&p.total) < 1e-12 * p.total.max_abs().max(1.0));
        }
    }

    #[test]
    fn continuity_toward_zero_energy() {
        // Conjugate into the basis (cos λx, sin λx / λ), which tends to (1, x).
        // The change of basis costs ~ε/λ² in round-off, so the scan stops at 1e-4.
        let zero = crossing_matrix(2, -1.5, c(0.0, 0.0)).unwrap();
        let errors: Vec<f64> = (2..=4)
            .map(|k| {
                let lambda = 10f64.powi(-k);
                let t = crossing_matrix(2, -1.5, c(lambda, 0.0)).unwrap();
                let q = TransferMatrix::new(c(0.5, 0.0), 1.0 / (2.0 * I * lambda), c(0.5, 0.0), -1.0 / (2.0 * I * lambda));
                let q_inv = TransferMatrix::new(c(1.0, 0.0), c(1.0, 0.0), I * lambda, -I * lambda);
                (q_inv * t * q).max_abs_diff(&zero)
            })
            .collect();
        assert!(errors.windows(2).all(|w| w[1] < 0.1 * w[0]), "{errors:?}");
        assert!(errors[2] < 1e-6, "{errors:?}");
    }

    fn lambda_strategy() -> impl Strategy<Value = Complex64> {
        (-10.0..10.0f64, 0.0..2.0f64)
            .prop_filter("nonzero", |(re, im)| re.hypot(*im) > 0.05)
            .prop_map(|(re, im)| c(re, im))
    }

    proptest! {
        #[test]
        fn crossing_matrix_structure(site in -8i64..=8, alpha in -3.0..3.0f64, lambda in lambda_strategy()) {
            let t = crossing_matrix(site, alpha, lambda).unwrap();
            let n = nilpotent(site, Branch::of(lambda).unwrap());
            let scale = n.max_abs().max(1.0);
            prop_assert!((t.det() - 1.0).norm() <= 1e-12 * scale * scale);
            prop_assert!((n * n).max_abs() <= 1e-12 * scale * scale);
            let inv = inverse_crossing_matrix(site, alpha, lambda).unwrap();
            prop_assert!((inv * t).max_abs_diff(&TransferMatrix::IDENTITY) <= 1e-12 * scale * scale * (1.0 + alpha.abs()).powi(2));
            let j = TransferMatrix::from_real([[0.0, 1.0], [-1.0, 0.0]]);
            let conj = t.transpose() * j * t;
            prop_assert!(conj.max_abs_diff(&j) <= 1e-12 * scale * scale * (1.0 + alpha.abs()).powi(2));
        }

        #[test]
        fn zero_energy_structure(site in -8i64..=8, alpha in -3.0..3.0f64) {
            let t = crossing_matrix(site, alpha, c(0.0, 0.0)).unwrap();
            prop_assert!((t.det() - 1.0).norm() <= 1e-12 * (1.0 + (alpha * (site * site) as f64).abs()).powi(2));
        }

        #[test]
        fn products_have_unit_determinant(
            pairs in prop::collection::vec((-5i64..=5, -2.0..2.0f64), 0..8),
            lambda in lambda_strategy(),
        ) {
            let seq = CouplingSequence::new(pairs).unwrap();
            let p = cumulative_products(&seq, lambda).unwrap();
            let scale = p.prefix.iter().map(|m| m.max_abs()).fold(1.0, f64::max);
            for m in &p.prefix {
                prop_assert!((m.det() - 1.0).norm() <= 1e-11 * scale * scale);
            }
        }
    }
}
