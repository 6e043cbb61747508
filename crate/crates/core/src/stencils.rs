//! Exact interior Gram stencils of maximum-continuity B-splines and the
//! integer/rational identities they satisfy.
//!
//! A stencil stores the half row `v_0, …, v_p` of an interior row; offsets
//! `-k` follow by symmetry and offsets beyond `p` vanish. Stiffness values
//! are scaled by `h`, mass values by `1/h`, so both are mesh independent.

use std::fmt;

use num::bigint::BigInt;
use num::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_fraction, int, power_over_factorial, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilKind {
    Stiffness,
    Mass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil<T = Rational> {
    pub degree: usize,
    pub kind: StencilKind,
    pub values: Vec<T>,
}

impl<T: Scalar> Stencil<T> {
    /// Value at signed offset `k`.
    pub fn at(&self, k: i64) -> T {
        self.values
            .get(k.unsigned_abs() as usize)
            .cloned()
            .unwrap_or_else(T::zero)
    }

    /// Sum over all offsets `-p..=p`.
    pub fn full_sum(&self) -> T {
        let mut total = self.values[0].clone();
        for v in &self.values[1..] {
            total = total + v.clone() + v.clone();
        }
        total
    }

    pub fn to_f64(&self) -> Stencil<f64> {
        Stencil {
            degree: self.degree,
            kind: self.kind,
            values: self.values.iter().map(Scalar::as_f64).collect(),
        }
    }
}

impl fmt::Display for Stencil<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(format_fraction).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn check_degree(p: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidDegree {
            p,
            requirement: "p >= 1",
        });
    }
    Ok(())
}

/// Degree-0 "mass" row: the indicator of one cell.
fn mass_values(p: usize) -> Vec<Rational> {
    let mut prev = vec![Rational::one()];
    for q in 1..=p {
        let get = |k: i64| -> Rational {
            prev.get(k.unsigned_abs() as usize)
                .cloned()
                .unwrap_or_else(Rational::zero)
        };
        let qi = q as i64;
        let denom = int(2 * qi * (2 * qi + 1));
        let next = (0..=qi)
            .map(|k| {
                let a = int((qi + k + 1) * (qi + k + 1)) * get(k + 1);
                let b = int(2 * (k * k - qi - qi * qi)) * get(k);
                let c = int((qi - k + 1) * (qi - k + 1)) * get(k - 1);
                (a - b + c) / denom.clone()
            })
            .collect();
        prev = next;
    }
    prev
}

/// Exact mass stencil `B_p^{j+k}`, `k = 0..=p`, by the degree recursion.
pub fn mass_stencil(p: usize) -> Result<Stencil> {
    check_degree(p)?;
    Ok(Stencil {
        degree: p,
        kind: StencilKind::Mass,
        values: mass_values(p),
    })
}

/// Exact stiffness stencil `A_p^{j+k} = 2B_{p-1}^{k} - B_{p-1}^{k+1} - B_{p-1}^{k-1}`.
pub fn stiffness_stencil(p: usize) -> Result<Stencil> {
    check_degree(p)?;
    let lower = mass_values(p - 1);
    let get = |k: i64| -> Rational {
        lower
            .get(k.unsigned_abs() as usize)
            .cloned()
            .unwrap_or_else(Rational::zero)
    };
    let values = (0..=p as i64)
        .map(|k| int(2) * get(k) - get(k + 1) - get(k - 1))
        .collect();
    Ok(Stencil {
        degree: p,
        kind: StencilKind::Stiffness,
        values,
    })
}

/// `Σ_{k=1}^p k^{2m}/(2m)! A_k + k^{2m-2}/(2m-2)! B_k`, the sum whose
/// vanishing for `m = 2..=p` drives the 2p dispersion order.
pub fn ab_moment<T: Scalar>(a: &[T], b: &[T], m: u32) -> T {
    let mut total = T::zero();
    for k in 1..a.len().max(b.len()) {
        let ka = a.get(k).cloned().unwrap_or_else(T::zero);
        let kb = b.get(k).cloned().unwrap_or_else(T::zero);
        let ca = T::from_rational(&power_over_factorial(k as u64, 2 * m));
        let cb = T::from_rational(&power_over_factorial(k as u64, 2 * m - 2));
        total = total + ca * ka + cb * kb;
    }
    total
}

/// `Σ_{k=1}^p k^{e}/e! v_k`.
pub fn half_moment<T: Scalar>(v: &[T], e: u32) -> T {
    let mut total = T::zero();
    for (k, vk) in v.iter().enumerate().skip(1) {
        total = total + T::from_rational(&power_over_factorial(k as u64, e)) * vk.clone();
    }
    total
}

/// One exact identity evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub p: usize,
    pub m: Option<usize>,
    #[serde(serialize_with = "serialize_fraction")]
    pub residual: Rational,
}

impl IdentityCheck {
    pub fn new(identity: &str, p: usize, m: Option<usize>, residual: Rational) -> Self {
        Self {
            identity: identity.to_string(),
            p,
            m,
            residual,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual.is_zero()
    }
}

fn serialize_fraction<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_fraction(r))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn extend(&mut self, other: IdentityReport) {
        self.checks.extend(other.checks);
    }

    /// Plain-text table: identity, (p, m), pass/fail, residual.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<28} {:>4} {:>4}  {:<6} {}\n", "identity", "p", "m", "status", "residual");
        for c in &self.checks {
            let m = c.m.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            let status = if c.passed() { "pass" } else { "FAIL" };
            out.push_str(&format!(
                "{:<28} {:>4} {:>4}  {:<6} {}\n",
                c.identity,
                c.p,
                m,
                status,
                format_fraction(&c.residual)
            ));
        }
        out
    }
}

/// Partition sums, the `k²` identities for `A` and `B`, and the sign
/// pattern of the stencils.
pub fn verify_base_identities(p: usize) -> Result<IdentityReport> {
    let a = stiffness_stencil(p)?;
    let b = mass_stencil(p)?;
    let mut report = IdentityReport::default();
    report.checks.push(IdentityCheck::new("stiffness row sum", p, None, a.full_sum()));
    report
        .checks
        .push(IdentityCheck::new("mass row sum", p, None, b.full_sum() - Rational::one()));

    let k2 = |v: &[Rational]| -> Rational {
        v.iter()
            .enumerate()
            .skip(1)
            .map(|(k, x)| int((k * k) as i64) * x)
            .sum()
    };
    report
        .checks
        .push(IdentityCheck::new("sum k^2 A + 1", p, None, k2(&a.values) + Rational::one()));
    report.checks.push(IdentityCheck::new(
        "p + 1 - 12 sum k^2 B",
        p,
        None,
        int(p as i64 + 1) - int(12) * k2(&b.values),
    ));

    Ok(report)
}

/// Entries breaking the pattern `B > 0`, `A^j > 0`, `A^{j+k} < 0`; the
/// stiffness pattern holds for `p <= 4` and fails at `k = 1` from `p = 5`.
pub fn sign_pattern_violations(p: usize) -> Result<Vec<(StencilKind, usize)>> {
    let a = stiffness_stencil(p)?.values;
    let b = mass_stencil(p)?.values;
    let mut out: Vec<(StencilKind, usize)> = b
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_positive())
        .map(|(k, _)| (StencilKind::Mass, k))
        .collect();
    for (k, v) in a.iter().enumerate() {
        let ok = if k == 0 { v.is_positive() } else { v.is_negative() };
        if !ok {
            out.push((StencilKind::Stiffness, k));
        }
    }
    Ok(out)
}

/// `Σ k^{2m}/(2m)! A + k^{2m-2}/(2m-2)! B = 0` for `m = 2..=p`, plus the
/// vanishing of the derived coefficients `C_{2m}`.
pub fn verify_ab_identity(p: usize) -> Result<IdentityReport> {
    if p < 2 {
        return Err(Error::InvalidDegree {
            p,
            requirement: "p >= 2",
        });
    }
    let a = stiffness_stencil(p)?.values;
    let b = mass_stencil(p)?.values;
    let mut report = IdentityReport::default();
    for m in 2..=p {
        report.checks.push(IdentityCheck::new(
            "A/B moment identity",
            p,
            Some(m),
            ab_moment(&a, &b, m as u32),
        ));
    }
    for (m, c) in c_coefficients(&a, &b, p).into_iter().enumerate().skip(2) {
        report.checks.push(IdentityCheck::new("C_2m coefficient", p, Some(m), c));
    }
    Ok(report)
}

/// `C_2 = 1`, `C_{2m} = Σ (-1)^m k^{2m}/(2m)! A - Σ_q Σ_k C_{2m-2q} (-1)^q k^{2q}/(2q)! B`
/// for `m = 2..=m_max`; index `m` of the result holds `C_{2m}`.
pub fn c_coefficients(a: &[Rational], b: &[Rational], m_max: usize) -> Vec<Rational> {
    let sign = |e: usize| if e.is_multiple_of(2) { int(1) } else { int(-1) };
    let mut c = vec![Rational::zero(), Rational::one()];
    for m in 2..=m_max {
        let mut value = sign(m) * half_moment(a, 2 * m as u32);
        for q in 1..m {
            value -= c[m - q].clone() * sign(q) * half_moment(b, 2 * q as u32);
        }
        c.push(value);
    }
    c
}

/// Integer sequences `F^q_{p,m}` and `G^q_{p,m,k}` generated level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct FgLedger {
    pub p: usize,
    pub m: usize,
    /// `f[q] = F^q_{p,m}` for `q = 0..=max(p - 2, 0)`.
    pub f: Vec<BigInt>,
    /// `g[q][k] = G^q_{p,m,k}` for `k = 0..=p - 1 - q`.
    pub g: Vec<Vec<BigInt>>,
}

impl FgLedger {
    pub fn build(p: usize, m: usize) -> Self {
        let pb = BigInt::from(p);
        let two_m = 2 * m as u32;
        let big = |x: i64| BigInt::from(x);
        let pw = |base: i64, e: u32| num::pow(BigInt::from(base), e as usize);

        let f0 = -big(2) * &pb * (big(2) * &pb + 1) + big(2 * m as i64 * (2 * m as i64 - 1)) * &pb * &pb;
        let top = p.saturating_sub(1);
        let g0: Vec<BigInt> = (0..=top as i64)
            .map(|k| {
                let pi = p as i64;
                let first = big(2 * pi * (2 * pi + 1))
                    * (big(2) * pw(k, two_m) - pw(k + 1, two_m) - pw(k - 1, two_m));
                let second = big(2 * m as i64 * (2 * m as i64 - 1))
                    * (pw(k - 1, two_m - 2) * big((pi + k) * (pi + k))
                        - big(2) * pw(k, two_m - 2) * big(k * k - pi - pi * pi)
                        + pw(k + 1, two_m - 2) * big((pi - k) * (pi - k)));
                first + second
            })
            .collect();

        let mut f = vec![f0];
        let mut g = vec![g0];
        for q in 1..=p.saturating_sub(2) {
            let prev_g = &g[q - 1];
            let at = |k: i64| -> BigInt { prev_g[k.unsigned_abs() as usize].clone() };
            let pq = (p - q) as i64;
            let fq = big(2 * (pq + 1) * pq) * &f[q - 1] + big(pq * pq) * at(1);
            let gq: Vec<BigInt> = (0..=(p - 1 - q) as i64)
                .map(|k| {
                    big((pq + k) * (pq + k)) * at(k - 1)
                        - big(2 * (k * k - (pq + 1) * pq)) * at(k)
                        + big((pq - k) * (pq - k)) * at(k + 1)
                })
                .collect();
            f.push(fq);
            g.push(gq);
        }
        Self { p, m, f, g }
    }
}

/// Checks the two integer identities on the F/G sequences for every
/// `2 <= m <= p <= p_max` with `m <= m_max`:
/// `2F^q_{p+1,m} - G^q_{p+1,m,0} = 0` for `q = 1..=p-2`, and
/// `4F^{p-2}_{p,m} + G^{p-2}_{p,m,1} = 0`.
pub fn fg_verify(p_max: usize, m_max: usize) -> Result<IdentityReport> {
    if p_max < 2 {
        return Err(Error::InvalidDegree {
            p: p_max,
            requirement: "p_max >= 2",
        });
    }
    let grid: Vec<(usize, usize)> = (2..=p_max)
        .flat_map(|p| (2..=p.min(m_max)).map(move |m| (p, m)))
        .collect();
    let checks: Vec<Vec<IdentityCheck>> = grid
        .par_iter()
        .map(|&(p, m)| {
            let mut out = Vec::new();
            let next = FgLedger::build(p + 1, m);
            for q in 1..=p.saturating_sub(2) {
                let r = BigInt::from(2) * &next.f[q] - &next.g[q][0];
                out.push(IdentityCheck::new(
                    &format!("2F - G(k=0), q={q}"),
                    p,
                    Some(m),
                    Rational::from_integer(r),
                ));
            }
            let own = FgLedger::build(p, m);
            let last = p - 2;
            let r = BigInt::from(4) * &own.f[last] + &own.g[last][1];
            out.push(IdentityCheck::new("4F + G(k=1)", p, Some(m), Rational::from_integer(r)));
            out
        })
        .collect();
    Ok(IdentityReport {
        checks: checks.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::splines::cardinal_value;

    #[test]
    fn mass_stencils_reference_values() {
        assert_eq!(mass_stencil(1).unwrap().values, vec![rat(2, 3), rat(1, 6)]);
        assert_eq!(
            mass_stencil(2).unwrap().values,
            vec![rat(11, 20), rat(13, 60), rat(1, 120)]
        );
        assert_eq!(mass_stencil(4).unwrap().values[4], rat(1, 362880));
    }

    #[test]
    fn stiffness_stencils_reference_values() {
        assert_eq!(stiffness_stencil(1).unwrap().values, vec![int(2), int(-1)]);
        assert_eq!(
            stiffness_stencil(3).unwrap().values,
            vec![rat(2, 3), rat(-1, 8), rat(-1, 5), rat(-1, 120)]
        );
        let a2 = stiffness_stencil(2).unwrap();
        assert_eq!(a2.full_sum(), int(0));
        assert_eq!(a2.at(-2), rat(-1, 6));
        assert_eq!(a2.at(3), int(0));
    }

    #[test]
    fn rejects_degree_zero() {
        assert!(mass_stencil(0).is_err());
        assert!(stiffness_stencil(0).is_err());
        assert!(verify_ab_identity(1).is_err());
        assert!(fg_verify(1, 5).is_err());
    }

    #[test]
    fn mass_recursion_matches_cardinal_values() {
        for p in 1..=10usize {
            let b = mass_stencil(p).unwrap();
            for k in 0..=p {
                let t = int((k + p + 1) as i64);
                assert_eq!(b.values[k], cardinal_value(2 * p + 1, &t), "p={p} k={k}");
            }
        }
    }

    #[test]
    fn partition_sums_exact() {
        for p in 1..=10 {
            assert_eq!(stiffness_stencil(p).unwrap().full_sum(), int(0));
            assert_eq!(mass_stencil(p).unwrap().full_sum(), int(1));
        }
    }

    #[test]
    fn base_identities_small_cases() {
        // p = 1: (-1)(1) + 1 = 0
        let r1 = verify_base_identities(1).unwrap();
        assert!(r1.passed(), "{}", r1.to_table());
        // p = 2: 3 - 12 (13/60 + 4/120) = 0
        let b = mass_stencil(2).unwrap();
        assert_eq!(int(3) - int(12) * (b.values[1].clone() + int(4) * b.values[2].clone()), int(0));
        assert!(verify_base_identities(7).unwrap().passed());
    }

    #[test]
    fn sign_pattern_up_to_ten() {
        for p in 1..=4 {
            assert!(sign_pattern_violations(p).unwrap().is_empty(), "p={p}");
        }
        for p in 5..=10 {
            assert_eq!(
                sign_pattern_violations(p).unwrap(),
                vec![(StencilKind::Stiffness, 1)],
                "p={p}"
            );
        }
    }

    #[test]
    fn ab_identity_p2_m2_by_hand() {
        // 2·(1/24)(-1/3) + 2·(16/24)(-1/6) + (1/2)(13/60) + 2(1/120) with the
        // k = 1, 2 terms of both sums (factor 2 from ±k dropped on both sides)
        let a = [int(1), rat(-1, 3), rat(-1, 6)];
        let b = [rat(11, 20), rat(13, 60), rat(1, 120)];
        let by_hand = rat(1, 24) * a[1].clone()
            + rat(16, 24) * a[2].clone()
            + rat(1, 2) * b[1].clone()
            + rat(4, 2) * b[2].clone();
        assert_eq!(by_hand, int(0));
        assert_eq!(ab_moment(&a, &b, 2), int(0));
    }

    #[test]
    fn ab_identity_up_to_ten() {
        for p in 2..=10 {
            let r = verify_ab_identity(p).unwrap();
            assert!(r.passed(), "{}", r.to_table());
            assert_eq!(r.checks.len(), 2 * (p - 1));
        }
    }

    #[test]
    fn ab_identity_breaks_at_m_equal_p_plus_one() {
        for p in 1..=8usize {
            let a = stiffness_stencil(p).unwrap().values;
            let b = mass_stencil(p).unwrap().values;
            assert!(!ab_moment(&a, &b, p as u32 + 1).is_zero(), "p={p}");
        }
    }

    #[test]
    fn fg_sequences_small_case_by_hand() {
        // p = 2, m = 2: F^0 = -20 + 48 = 28, G^0_1 = 20(2 - 16) + 12(10 + 4) = -112
        let l = FgLedger::build(2, 2);
        assert_eq!(l.f[0], BigInt::from(28));
        assert_eq!(l.g[0][1], BigInt::from(-112));
        // G^0_0 = 2F^0 by construction
        assert_eq!(l.g[0][0], BigInt::from(56));
    }

    #[test]
    fn fg_identities() {
        let r = fg_verify(3, 3).unwrap();
        assert!(r.passed(), "{}", r.to_table());
        let r2 = fg_verify(2, 2).unwrap();
        // empty q-range at p = 2: only the 4F + G identity
        assert_eq!(r2.checks.len(), 1);
        assert!(r2.passed());
        assert!(fg_verify(12, 12).unwrap().passed());
    }

    #[test]
    fn report_table_lists_every_check() {
        let r = verify_base_identities(2).unwrap();
        let table = r.to_table();
        assert_eq!(table.lines().count(), r.checks.len() + 1);
        assert!(table.contains("pass"));
    }
}
