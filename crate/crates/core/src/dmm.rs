//! Dispersion-minimized mass: the `p × p` moment system for the optimal
//! off-diagonal mass entries and the leading dispersion coefficients.

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, power_over_factorial, Rational, Scalar};
use crate::stencils::{ab_moment, stiffness_stencil, IdentityCheck, IdentityReport, Stencil, StencilKind};

/// Exact Gaussian elimination with partial pivoting on the first nonzero
/// entry of each column.
pub fn solve_rational_system(matrix: &[Vec<Rational>], rhs: &[Rational]) -> Result<Vec<Rational>> {
    let n = matrix.len();
    if rhs.len() != n || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "system is {}x{:?} with right-hand side of length {}",
            n,
            matrix.first().map(Vec::len),
            rhs.len()
        )));
    }
    let mut a: Vec<Vec<Rational>> = matrix.to_vec();
    let mut b: Vec<Rational> = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = &a[row][col] * &inv;
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[row][c] -= delta;
            }
            let delta = &factor * &b[col];
            b[row] -= delta;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for c in row + 1..n {
            acc -= &a[row][c] * &x[c];
        }
        x[row] = acc / &a[row][row];
    }
    Ok(x)
}

/// Exact determinant by elimination.
pub fn determinant(matrix: &[Vec<Rational>]) -> Rational {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col].clone();
        let inv = a[col][col].recip();
        for row in col + 1..n {
            let factor = &a[row][col] * &inv;
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[row][c] -= delta;
            }
        }
    }
    det
}

/// The moment matrices of the local problem: `aleph[m][k] = k^{2m}/(2m)!`
/// and `aleph_tilde[m][k] = k^{2m+2}/(2m+2)!` for `m, k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmmSystem {
    pub n: usize,
    pub aleph: Vec<Vec<Rational>>,
    pub aleph_tilde: Vec<Vec<Rational>>,
}

impl DmmSystem {
    pub fn new(n: usize) -> Self {
        let build = |shift: u32| -> Vec<Vec<Rational>> {
            (1..=n as u32)
                .map(|m| {
                    (1..=n as u64)
                        .map(|k| power_over_factorial(k, 2 * m + shift))
                        .collect()
                })
                .collect()
        };
        Self {
            n,
            aleph: build(0),
            aleph_tilde: build(2),
        }
    }
}

/// Dispersion-minimized mass stencil `B_{p,O}^{j+k}`, `k = 0..=p`.
pub fn dmm_stencil(p: usize) -> Result<Stencil> {
    let a = stiffness_stencil(p)?;
    let system = DmmSystem::new(p);
    let rhs: Vec<Rational> = system
        .aleph_tilde
        .iter()
        .map(|row| -row.iter().zip(&a.values[1..]).map(|(c, v)| c * v).sum::<Rational>())
        .collect();
    let half = solve_rational_system(&system.aleph, &rhs)?;
    let center = Rational::one() - int(2) * half.iter().sum::<Rational>();
    let mut values = Vec::with_capacity(p + 1);
    values.push(center);
    values.extend(half);
    Ok(Stencil {
        degree: p,
        kind: StencilKind::Mass,
        values,
    })
}

/// Checks the extended moment identity of the optimal mass for `m = 2..=p+1`.
pub fn verify_dmm_identity(p: usize) -> Result<IdentityReport> {
    let a = stiffness_stencil(p)?.values;
    let b = dmm_stencil(p)?.values;
    let mut report = IdentityReport::default();
    for m in 2..=p + 1 {
        report.checks.push(IdentityCheck::new(
            "optimal-mass moment identity",
            p,
            Some(m),
            ab_moment(&a, &b, m as u32),
        ));
    }
    report.checks.push(IdentityCheck::new(
        "optimal-mass row sum",
        p,
        None,
        dmm_stencil(p)?.full_sum() - Rational::one(),
    ));
    Ok(report)
}

/// Which term of the dispersion expansion a coefficient refers to, counted
/// in the power of `h` of the eigenvalue error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionOrder {
    /// `h^{2p}`: the leading term for exact or generically under-integrated mass.
    Standard,
    /// `h^{2p+2}`: the leading term once the `h^{2p}` term has been cancelled.
    Super,
}

/// Leading coefficient `c` in `ω_h² - μ² = c μ^{2q+2} h^{2q} + …`, i.e. in
/// `ω_h²h² - Λ² = c Λ^{2q+2}`, with `q = p` (standard) or `q = p + 1` (super).
pub fn leading_coefficient<T: Scalar>(p: usize, a: &[T], b: &[T], order: ExpansionOrder) -> T {
    let (q, sign_odd) = match order {
        ExpansionOrder::Standard => (p as u32, (p + 1) % 2 == 1),
        ExpansionOrder::Super => (p as u32 + 1, p % 2 == 1),
    };
    let sum = ab_moment(a, b, q + 1);
    let two = T::one() + T::one();
    if sign_odd {
        -(two * sum)
    } else {
        two * sum
    }
}

/// Exact sign of a rational coefficient.
pub fn sign_of(value: &Rational) -> i32 {
    if value.is_positive() {
        1
    } else if value.is_negative() {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, to_f64};
    use crate::stencils::mass_stencil;

    fn identity(n: usize) -> Vec<Vec<Rational>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { int(1) } else { int(0) }).collect())
            .collect()
    }

    #[test]
    fn solve_identity_system() {
        let b = vec![rat(1, 3), int(-2), rat(7, 5)];
        assert_eq!(solve_rational_system(&identity(3), &b).unwrap(), b);
    }

    #[test]
    fn solve_scalar_system() {
        let x = solve_rational_system(&[vec![rat(1, 2)]], &[rat(1, 24)]).unwrap();
        assert_eq!(x, vec![rat(1, 12)]);
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = vec![vec![int(0), int(1)], vec![int(1), int(0)]];
        let x = solve_rational_system(&a, &[int(3), int(4)]).unwrap();
        assert_eq!(x, vec![int(4), int(3)]);
    }

    #[test]
    fn singular_and_mismatched_systems() {
        let a = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert_eq!(solve_rational_system(&a, &[int(1), int(1)]), Err(Error::Singular));
        assert!(matches!(
            solve_rational_system(&a, &[int(1)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn random_systems_have_zero_residual(
            entries in proptest::collection::vec((-20i64..20, 1i64..9), 25),
            rhs in proptest::collection::vec((-20i64..20, 1i64..9), 5),
        ) {
            let a: Vec<Vec<Rational>> = entries.chunks(5)
                .map(|row| row.iter().map(|&(n, d)| rat(n, d)).collect())
                .collect();
            let b: Vec<Rational> = rhs.iter().map(|&(n, d)| rat(n, d)).collect();
            match solve_rational_system(&a, &b) {
                Ok(x) => {
                    for (row, bi) in a.iter().zip(&b) {
                        let lhs: Rational = row.iter().zip(&x).map(|(c, v)| c * v).sum();
                        proptest::prop_assert_eq!(&lhs, bi);
                    }
                }
                Err(Error::Singular) => proptest::prop_assert!(determinant(&a).is_zero()),
                Err(e) => proptest::prop_assert!(false, "{e}"),
            }
        }
    }

    #[test]
    fn moment_matrices_are_invertible() {
        for n in 1..=12 {
            let s = DmmSystem::new(n);
            assert!(!determinant(&s.aleph).is_zero(), "n={n}");
            assert!(!determinant(&s.aleph_tilde).is_zero(), "n={n}");
        }
        let s = DmmSystem::new(2);
        assert_eq!(s.aleph[1][1], rat(16, 24));
        assert_eq!(s.aleph_tilde[0][1], rat(16, 24));
    }

    #[test]
    fn dmm_stencils_match_reference() {
        assert_eq!(dmm_stencil(1).unwrap().values, vec![rat(5, 6), rat(1, 12)]);
        assert_eq!(
            dmm_stencil(2).unwrap().values,
            vec![rat(67, 120), rat(19, 90), rat(7, 720)]
        );
        assert_eq!(
            dmm_stencil(4).unwrap().values,
            vec![
                rat(156211, 362880),
                rat(220543, 907200),
                rat(36541, 907200),
                rat(1249, 907200),
                rat(13, 3628800)
            ]
        );
    }

    #[test]
    fn dmm_identity_holds_one_order_further() {
        // p = 1, m = 2 by hand: (1/24)(-1) + (1/2)(1/12) = 0
        assert_eq!(rat(1, 24) * int(-1) + rat(1, 2) * rat(1, 12), int(0));
        for p in 1..=8 {
            let r = verify_dmm_identity(p).unwrap();
            assert!(r.passed(), "{}", r.to_table());
            assert_eq!(r.checks.len(), p + 1);
        }
    }

    #[test]
    fn leading_coefficients_linear() {
        let a = stiffness_stencil(1).unwrap().values;
        let b = mass_stencil(1).unwrap().values;
        let o = dmm_stencil(1).unwrap().values;
        assert_eq!(leading_coefficient(1, &a, &b, ExpansionOrder::Standard), rat(1, 12));
        assert_eq!(leading_coefficient(1, &a, &o, ExpansionOrder::Super), rat(-1, 240));
        let af: Vec<f64> = a.iter().map(to_f64).collect();
        let bf: Vec<f64> = b.iter().map(to_f64).collect();
        let c = leading_coefficient(1, &af, &bf, ExpansionOrder::Standard);
        assert!((c - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn standard_term_cancels_only_for_optimal_mass() {
        for p in 1..=10 {
            let a = stiffness_stencil(p).unwrap().values;
            let b = mass_stencil(p).unwrap().values;
            let o = dmm_stencil(p).unwrap().values;
            assert!(!leading_coefficient(p, &a, &b, ExpansionOrder::Standard).is_zero());
            assert!(leading_coefficient(p, &a, &o, ExpansionOrder::Standard).is_zero());
            assert!(!leading_coefficient(p, &a, &o, ExpansionOrder::Super).is_zero());
        }
    }

    #[test]
    fn dmm_rows_sum_to_one() {
        for p in 1..=10 {
            assert_eq!(dmm_stencil(p).unwrap().full_sum(), int(1));
        }
    }
}
