//! Quadrature rules on the reference element [0, 1]: Gauss–Legendre,
//! Gauss–Lobatto, Gauss–Radau (fixed node at 0), the optimal-mass rules for
//! `p <= 3`, and blends of two rules.
//!
//! Two independent routes produce quadrature-approximated stencils: applying
//! the double-precision nodes and weights, and an exact route that evaluates
//! the rule's monomial moments as rationals from the (modified) Jacobi
//! matrix of the shifted Legendre recurrence.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dmm::solve_rational_system;
use crate::error::{Error, Result};
use crate::rational::{int, rat, Rational, Scalar};
use crate::splines::{cardinal_piece, cardinal_piece_derivative};
use crate::stencils::{ab_moment, half_moment, stiffness_stencil, Stencil, StencilKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Gauss,
    Lobatto,
    Radau,
}

impl Family {
    pub fn min_points(self) -> usize {
        match self {
            Family::Lobatto => 2,
            _ => 1,
        }
    }

    /// Highest polynomial degree integrated exactly by the `m`-point rule.
    pub fn exactness(self, m: usize) -> usize {
        match self {
            Family::Gauss => 2 * m - 1,
            Family::Lobatto => 2 * m - 3,
            Family::Radau => 2 * m - 2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Family::Gauss => 'G',
            Family::Lobatto => 'L',
            Family::Radau => 'R',
        }
    }

    fn check_points(self, m: usize) -> Result<()> {
        if m < self.min_points() {
            return Err(Error::InvalidDegree {
                p: m,
                requirement: if self == Family::Lobatto {
                    "at least 2 Lobatto points"
                } else {
                    "at least 1 point"
                },
            });
        }
        Ok(())
    }

    pub fn rule(self, m: usize) -> Result<QuadratureRule> {
        self.check_points(m)?;
        let (nodes, weights) = match self {
            Family::Gauss => gauss_legendre_nodes(m)?,
            Family::Lobatto => gauss_lobatto_nodes(m)?,
            Family::Radau => gauss_radau_nodes(m)?,
        };
        Ok(QuadratureRule {
            nodes,
            weights,
            exactness: self.exactness(m),
            label: RuleLabel::Standard { family: self, points: m },
        })
    }

    /// Exact moments `Σ w_l x_l^j`, `j = 0..=max_degree`, of the `m`-point rule.
    pub fn exact_moments(self, m: usize, max_degree: usize) -> Result<Vec<Rational>> {
        self.check_points(m)?;
        let beta = |k: usize| -> Rational {
            let k = k as i64;
            rat(k * k, 4 * (4 * k * k - 1))
        };
        let half = rat(1, 2);
        let mut diag = vec![half.clone(); m];
        let mut sup: Vec<Rational> = (1..m).map(beta).collect();
        // monic shifted Legendre values π_0..π_{m-1} at a point
        let monic = |x: &Rational| -> Vec<Rational> {
            let mut vals = vec![Rational::one()];
            if m > 1 {
                vals.push(x - &half);
            }
            for k in 1..m.saturating_sub(1) {
                let next = (x - &half) * &vals[k] - beta(k) * &vals[k - 1];
                vals.push(next);
            }
            vals
        };
        match self {
            Family::Gauss => {}
            Family::Radau => {
                let a = Rational::zero();
                let pi = monic(&a);
                diag[m - 1] = if m == 1 {
                    a
                } else {
                    a.clone() - beta(m - 1) * &pi[m - 2] / &pi[m - 1]
                };
            }
            Family::Lobatto => {
                let (a, b) = (Rational::zero(), Rational::one());
                let pa = monic(&a);
                let pb = monic(&b);
                let sys = vec![
                    vec![pa[m - 1].clone(), pa[m - 2].clone()],
                    vec![pb[m - 1].clone(), pb[m - 2].clone()],
                ];
                let rhs = vec![&a * &pa[m - 1], &b * &pb[m - 1]];
                let sol = solve_rational_system(&sys, &rhs)?;
                diag[m - 1] = sol[0].clone();
                sup[m - 2] = sol[1].clone();
            }
        }
        // e0ᵀ T^j e0 with T tridiagonal: diag, super = β, sub = 1
        let mut v = vec![Rational::zero(); m];
        v[0] = Rational::one();
        let mut moments = Vec::with_capacity(max_degree + 1);
        for _ in 0..=max_degree {
            moments.push(v[0].clone());
            let mut next = vec![Rational::zero(); m];
            for i in 0..m {
                let mut acc = &diag[i] * &v[i];
                if i + 1 < m {
                    acc += &sup[i] * &v[i + 1];
                }
                if i > 0 {
                    acc += v[i - 1].clone();
                }
                next[i] = acc;
            }
            v = next;
        }
        Ok(moments)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeSign {
    Plus,
    Minus,
}

impl NodeSign {
    fn factor(self) -> f64 {
        match self {
            NodeSign::Plus => 1.0,
            NodeSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleLabel {
    Standard { family: Family, points: usize },
    Dmm { p: usize, sign: NodeSign },
    Blended { first: Box<RuleLabel>, second: Box<RuleLabel>, tau: f64 },
}

impl fmt::Display for RuleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleLabel::Standard { family, points } => write!(f, "{family}{points}"),
            RuleLabel::Dmm { p, sign } => {
                write!(f, "DMM{p}{}", if *sign == NodeSign::Plus { '+' } else { '-' })
            }
            RuleLabel::Blended { first, second, tau } => write!(f, "blend({first},{second};{tau})"),
        }
    }
}

/// Nodes and weights on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest degree integrated exactly.
    pub exactness: usize,
    pub label: RuleLabel,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn moment(&self, j: usize) -> f64 {
        self.integrate(|x| x.powi(j as i32))
    }

    /// Largest `d` such that monomials up to degree `d` integrate to
    /// `1/(k+1)` within `tol`; `None` if even constants fail.
    pub fn measured_exactness(&self, tol: f64) -> Option<usize> {
        let mut d = None;
        for k in 0..64 {
            if (self.moment(k) - 1.0 / (k as f64 + 1.0)).abs() > tol {
                break;
            }
            d = Some(k);
        }
        d
    }
}

/// A two-rule blend `τ·rule1 + (1 − τ)·rule2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedRule {
    pub rule1: QuadratureRule,
    pub rule2: QuadratureRule,
    pub tau: f64,
    combined: QuadratureRule,
}

impl BlendedRule {
    pub fn as_rule(&self) -> &QuadratureRule {
        &self.combined
    }

    pub fn into_rule(self) -> QuadratureRule {
        self.combined
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.combined.integrate(f)
    }
}

pub fn blend(rule1: &QuadratureRule, rule2: &QuadratureRule, tau: f64) -> BlendedRule {
    let mut nodes = rule1.nodes.clone();
    nodes.extend(&rule2.nodes);
    let mut weights: Vec<f64> = rule1.weights.iter().map(|w| tau * w).collect();
    weights.extend(rule2.weights.iter().map(|w| (1.0 - tau) * w));
    let combined = QuadratureRule {
        nodes,
        weights,
        exactness: rule1.exactness.min(rule2.exactness),
        label: RuleLabel::Blended {
            first: Box::new(rule1.label.clone()),
            second: Box::new(rule2.label.clone()),
            tau,
        },
    };
    BlendedRule {
        rule1: rule1.clone(),
        rule2: rule2.clone(),
        tau,
        combined,
    }
}

pub fn gauss_legendre(m: usize) -> Result<QuadratureRule> {
    Family::Gauss.rule(m)
}

pub fn gauss_lobatto(m: usize) -> Result<QuadratureRule> {
    Family::Lobatto.rule(m)
}

pub fn gauss_radau(m: usize) -> Result<QuadratureRule> {
    Family::Radau.rule(m)
}

/// `(P_n(x), P_n'(x))`; the derivative formula needs `|x| < 1`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const NEWTON_MAX: usize = 100;

/// Newton on `f` from `x0`; converged when the step drops below 1e-15,
/// followed by three polishing steps.
fn newton(mut x: f64, f: impl Fn(f64) -> (f64, f64)) -> Option<f64> {
    for _ in 0..NEWTON_MAX {
        let (v, d) = f(x);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let step = v / d;
        x -= step;
        if step.abs() < 1e-15 {
            for _ in 0..3 {
                let (v, d) = f(x);
                if d != 0.0 && d.is_finite() {
                    x -= v / d;
                }
            }
            return Some(x);
        }
    }
    None
}

fn distinct_sorted(nodes: &mut [f64]) -> bool {
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes.windows(2).all(|w| w[1] - w[0] > 1e-10) && nodes.iter().all(|x| x.abs() <= 1.0)
}

/// Maps a [-1, 1] rule to [0, 1], sorted by node.
fn to_unit(nodes: Vec<f64>, weights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(weights)
        .map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn gauss_legendre_nodes(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fail = Error::NonConvergence {
        family: "Gauss-Legendre",
        points: m,
    };
    let mut roots = Vec::with_capacity(m);
    for i in 0..m {
        let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        roots.push(newton(guess, |x| legendre(m, x)).ok_or(fail.clone())?);
    }
    if !distinct_sorted(&mut roots) {
        return Err(fail);
    }
    let weights = roots
        .iter()
        .map(|&x| {
            let (_, d) = legendre(m, x);
            2.0 / ((1.0 - x * x) * d * d)
        })
        .collect();
    Ok(to_unit(roots, weights))
}

fn gauss_lobatto_nodes(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fail = Error::NonConvergence {
        family: "Gauss-Lobatto",
        points: m,
    };
    let n = m - 1;
    let nf = n as f64;
    let mut roots = vec![-1.0, 1.0];
    for i in 1..n {
        let guess = -(std::f64::consts::PI * i as f64 / nf).cos();
        // roots of P_n'; P_n'' from the Legendre equation
        let root = newton(guess, |x| {
            let (p, d) = legendre(n, x);
            let dd = (2.0 * x * d - nf * (nf + 1.0) * p) / (1.0 - x * x);
            (d, dd)
        })
        .ok_or(fail.clone())?;
        roots.push(root);
    }
    if !distinct_sorted(&mut roots) {
        return Err(fail);
    }
    let weights = roots
        .iter()
        .map(|&x| {
            let p = if x.abs() == 1.0 { 1.0 } else { legendre(n, x).0 };
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    Ok(to_unit(roots, weights))
}

fn gauss_radau_nodes(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let fail = Error::NonConvergence {
        family: "Gauss-Radau",
        points: m,
    };
    let mf = m as f64;
    let mut roots = vec![-1.0];
    for k in 1..m {
        let guess = -(2.0 * std::f64::consts::PI * k as f64 / (2.0 * mf - 1.0)).cos();
        // interior nodes: roots of P_{m-1} + P_m
        let root = newton(guess, |x| {
            let (a, da) = legendre(m - 1, x);
            let (b, db) = legendre(m, x);
            (a + b, da + db)
        })
        .ok_or(fail.clone())?;
        roots.push(root);
    }
    if !distinct_sorted(&mut roots) || roots[0] != -1.0 {
        return Err(fail);
    }
    let weights = roots
        .iter()
        .map(|&x| {
            if x == -1.0 {
                2.0 / (mf * mf)
            } else {
                let p = legendre(m - 1, x).0;
                (1.0 - x) / (mf * mf * p * p)
            }
        })
        .collect();
    Ok(to_unit(roots, weights))
}

/// The unified stiffness/optimal-mass rule for `p = 1, 2, 3`; `sign` picks
/// one of the two mirror-image node choices.
pub fn dmm_rule(p: usize, sign: NodeSign) -> Result<QuadratureRule> {
    let s = sign.factor();
    let (nodes, weights) = match p {
        1 => (vec![0.5 + s * 6f64.sqrt() / 6.0], vec![1.0]),
        2 => (vec![0.0, 0.5 + s * 15f64.sqrt() / 30.0], vec![2.0 / 7.0, 5.0 / 7.0]),
        3 => (
            vec![0.0, 0.5 + s * 14f64.sqrt() / 14.0],
            vec![-17.0 / 375.0, 392.0 / 375.0],
        ),
        _ => {
            return Err(Error::InvalidDegree {
                p,
                requirement: "p in {1, 2, 3} for the optimal-mass rule",
            })
        }
    };
    let mut rule = QuadratureRule {
        nodes,
        weights,
        exactness: 0,
        label: RuleLabel::Dmm { p, sign },
    };
    rule.exactness = rule.measured_exactness(1e-13).unwrap_or(0);
    Ok(rule)
}

/// Stiffness (×h) and mass (÷h) half rows of an interior basis function
/// when every element integral is replaced by `rule`. No exactness check.
pub fn rule_stencils(p: usize, rule: &QuadratureRule) -> (Stencil<f64>, Stencil<f64>) {
    let mut a = vec![0.0; p + 1];
    let mut b = vec![0.0; p + 1];
    for k in 0..=p {
        for s in k..=p {
            let (s0, s1) = (s as i64, (s - k) as i64);
            for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
                // θ^j is piece s at t = s + ξ, θ^{j+k} is piece s - k at t - k
                let t0 = s as f64 + xi;
                let t1 = (s - k) as f64 + xi;
                b[k] += w * cardinal_piece(p, s0, &t0) * cardinal_piece(p, s1, &t1);
                a[k] += w * cardinal_piece_derivative(p, s0, &t0) * cardinal_piece_derivative(p, s1, &t1);
            }
        }
    }
    (
        Stencil {
            degree: p,
            kind: StencilKind::Stiffness,
            values: a,
        },
        Stencil {
            degree: p,
            kind: StencilKind::Mass,
            values: b,
        },
    )
}

fn require_exactness(p: usize, rule: &QuadratureRule) -> Result<()> {
    let required = 2 * p - 2;
    if rule.exactness < required {
        return Err(Error::InsufficientExactness {
            label: rule.label.to_string(),
            exactness: rule.exactness,
            required,
        });
    }
    Ok(())
}

/// `B̃_{p,Q}^{j+k}`, `k = 0..=p`, for a rule that keeps the stiffness exact.
pub fn quadrature_mass_stencil(p: usize, rule: &QuadratureRule) -> Result<Stencil<f64>> {
    if p < 1 {
        return Err(Error::InvalidDegree {
            p,
            requirement: "p >= 1",
        });
    }
    require_exactness(p, rule)?;
    Ok(rule_stencils(p, rule).1)
}

/// Monomial coefficients (in ξ) of cardinal piece `s` and its derivative.
fn piece_polynomials(p: usize, s: i64) -> (Vec<Rational>, Vec<Rational>) {
    let n = p + 1;
    let vander: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| num::pow(int(i as i64), j)).collect())
        .collect();
    let samples: Vec<Rational> = (0..n)
        .map(|i| cardinal_piece(p, s, &int(s + i as i64)))
        .collect();
    let coeffs = solve_rational_system(&vander, &samples).expect("Vandermonde on distinct nodes");
    let deriv = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| int(j as i64) * c)
        .collect();
    (coeffs, deriv)
}

fn apply_moments(f: &[Rational], g: &[Rational], moments: &[Rational]) -> Rational {
    let mut total = Rational::zero();
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            total += fi * gj * &moments[i + j];
        }
    }
    total
}

/// Exact stiffness and mass half rows when each element integral uses the
/// `m`-point rule of `family`.
pub fn exact_rule_stencils(p: usize, family: Family, m: usize) -> Result<(Stencil, Stencil)> {
    let moments = family.exact_moments(m, 2 * p)?;
    let pieces: Vec<_> = (0..=p as i64).map(|s| piece_polynomials(p, s)).collect();
    let mut a = vec![Rational::zero(); p + 1];
    let mut b = vec![Rational::zero(); p + 1];
    for k in 0..=p {
        for s in k..=p {
            let (f, df) = &pieces[s];
            let (g, dg) = &pieces[s - k];
            b[k] += apply_moments(f, g, &moments);
            a[k] += apply_moments(df, dg, &moments);
        }
    }
    Ok((
        Stencil {
            degree: p,
            kind: StencilKind::Stiffness,
            values: a,
        },
        Stencil {
            degree: p,
            kind: StencilKind::Mass,
            values: b,
        },
    ))
}

/// `τ` for the blend `τ·Q1 + (1 − τ)·Q2` that cancels the `h^{2p}` term,
/// given the two rules' mass half rows.
pub fn optimal_tau_pair<T: Scalar>(p: usize, b1: &[T], b2: &[T]) -> Result<T> {
    let a: Vec<T> = stiffness_stencil(p)?.values.iter().map(T::from_rational).collect();
    let numerator = ab_moment(&a, b2, p as u32 + 1);
    let diff: Vec<T> = b2.iter().zip(b1).map(|(x, y)| x.clone() - y.clone()).collect();
    let denominator = half_moment(&diff, 2 * p as u32);
    if denominator.magnitude() < 1e-14 {
        return Err(Error::DegenerateBlend {
            denominator: denominator.as_f64(),
        });
    }
    Ok(numerator.divide(&denominator))
}

/// `τ` for `τ·G_{p+1} + (1 − τ)·Q`.
pub fn optimal_tau<T: Scalar>(p: usize, b_exact: &[T], b_q: &[T]) -> Result<T> {
    optimal_tau_pair(p, b_exact, b_q)
}

/// The six named two-rule blends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendPair {
    Gg,
    Gl,
    Gr,
    Pl,
    Pr,
    Lr,
}

impl BlendPair {
    pub const ALL: [BlendPair; 6] = [
        BlendPair::Gg,
        BlendPair::Gl,
        BlendPair::Gr,
        BlendPair::Pl,
        BlendPair::Pr,
        BlendPair::Lr,
    ];

    /// `(family, points)` of the first and second rule for degree `p`.
    pub fn rules(self, p: usize) -> ((Family, usize), (Family, usize)) {
        let g_full = (Family::Gauss, p + 1);
        let g_under = (Family::Gauss, p);
        let lobatto = (Family::Lobatto, p + 1);
        let radau = (Family::Radau, p);
        match self {
            BlendPair::Gg => (g_full, g_under),
            BlendPair::Gl => (g_full, lobatto),
            BlendPair::Gr => (g_full, radau),
            BlendPair::Pl => (g_under, lobatto),
            BlendPair::Pr => (g_under, radau),
            BlendPair::Lr => (lobatto, radau),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlendPair::Gg => "gg",
            BlendPair::Gl => "gl",
            BlendPair::Gr => "gr",
            BlendPair::Pl => "pl",
            BlendPair::Pr => "pr",
            BlendPair::Lr => "lr",
        }
    }

    /// Double-precision τ from the generated nodes and weights.
    pub fn tau(self, p: usize) -> Result<f64> {
        let ((f1, m1), (f2, m2)) = self.rules(p);
        let b1 = quadrature_mass_stencil(p, &f1.rule(m1)?)?;
        let b2 = quadrature_mass_stencil(p, &f2.rule(m2)?)?;
        optimal_tau_pair(p, &b1.values, &b2.values)
    }

    /// Exact τ from the rules' rational moments.
    pub fn tau_exact(self, p: usize) -> Result<Rational> {
        let ((f1, m1), (f2, m2)) = self.rules(p);
        let b1 = exact_rule_stencils(p, f1, m1)?.1;
        let b2 = exact_rule_stencils(p, f2, m2)?.1;
        if b1.values == b2.values {
            return Err(Error::DegenerateBlend { denominator: 0.0 });
        }
        optimal_tau_pair(p, &b1.values, &b2.values)
    }
}

impl FromStr for BlendPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BlendPair::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown blend pair {s:?} (expected gg|gl|gr|pl|pr|lr)")))
    }
}

impl fmt::Display for BlendPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of trying to cancel both the `h^{2p}` and `h^{2p+2}` terms with
/// a three-rule blend `τ₁Q¹ + τ₂Q² + (1 − τ₁ − τ₂)Q³`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleBlendReport {
    pub p: usize,
    /// Rows `[c₁, c₂, r]` of `c₁τ₁ + c₂τ₂ = r`.
    pub rows: [[f64; 3]; 2],
    pub determinant: f64,
    /// Least-squares residual norm of the 2×2 system.
    pub residual: f64,
    pub consistent: bool,
}

pub fn triple_blend_check(
    p: usize,
    q1: &QuadratureRule,
    q2: &QuadratureRule,
    q3: &QuadratureRule,
) -> Result<TripleBlendReport> {
    let stencils = [q1, q2, q3]
        .iter()
        .map(|q| quadrature_mass_stencil(p, q).map(|s| s.values))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..3 {
        for j in i + 1..3 {
            let gap = stencils[i]
                .iter()
                .zip(&stencils[j])
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if gap < 1e-12 {
                return Err(Error::RulesNotDistinct);
            }
        }
    }
    let a: Vec<f64> = stiffness_stencil(p)?.values.iter().map(Scalar::as_f64).collect();
    let mut rows = [[0.0; 3]; 2];
    for (q, row) in rows.iter_mut().enumerate() {
        let e = (2 * p + 2 * q) as u32;
        let alpha: Vec<f64> = stencils.iter().map(|b| half_moment(b, e)).collect();
        let beta = half_moment(&a, e + 2);
        *row = [alpha[0] - alpha[2], alpha[1] - alpha[2], -(alpha[2] + beta)];
    }
    let c = DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]]);
    let r = DVector::from_column_slice(&[rows[0][2], rows[1][2]]);
    let determinant = c.determinant();
    let scale = c.abs().max().max(f64::MIN_POSITIVE);
    let svd = c.clone().svd(true, true);
    let x = svd
        .solve(&r, 1e-10 * scale)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let residual = (&c * &x - &r).norm();
    let consistent = residual <= 1e-8 * r.norm().max(scale);
    Ok(TripleBlendReport {
        p,
        rows,
        determinant,
        residual,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::to_f64;
    use crate::stencils::mass_stencil;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules() {
        let g1 = gauss_legendre(1).unwrap();
        assert_eq!(g1.nodes, vec![0.5]);
        assert_eq!(g1.weights, vec![1.0]);
        let g2 = gauss_legendre(2).unwrap();
        let r = 1.0 / (2.0 * 3f64.sqrt());
        assert_abs_diff_eq!(g2.nodes[0], 0.5 - r, epsilon = 1e-15);
        assert_abs_diff_eq!(g2.nodes[1], 0.5 + r, epsilon = 1e-15);
        assert_abs_diff_eq!(g2.weights[0], 0.5, epsilon = 1e-15);
        let l2 = gauss_lobatto(2).unwrap();
        assert_eq!(l2.nodes, vec![0.0, 1.0]);
        assert_eq!(l2.weights, vec![0.5, 0.5]);
        let r2 = gauss_radau(2).unwrap();
        assert_eq!(r2.nodes[0], 0.0);
        assert_abs_diff_eq!(r2.nodes[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights[0], 0.25, epsilon = 1e-15);
        let r1 = gauss_radau(1).unwrap();
        assert_eq!((r1.nodes.clone(), r1.weights.clone()), (vec![0.0], vec![1.0]));
    }

    #[test]
    fn declared_exactness_holds_up_to_twenty_points() {
        for m in 1..=20 {
            for family in [Family::Gauss, Family::Lobatto, Family::Radau] {
                if m < family.min_points() {
                    assert!(family.rule(m).is_err());
                    continue;
                }
                let rule = family.rule(m).unwrap();
                assert_eq!(rule.nodes.len(), m);
                assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
                for k in 0..=rule.exactness {
                    assert!(
                        (rule.moment(k) - 1.0 / (k as f64 + 1.0)).abs() < 1e-13,
                        "{family}{m} degree {k}"
                    );
                }
                // one degree further must fail (visible in double precision for small m)
                if m <= 5 {
                    let k = rule.exactness + 1;
                    assert!((rule.moment(k) - 1.0 / (k as f64 + 1.0)).abs() > 1e-13);
                }
            }
        }
    }

    #[test]
    fn exact_moments_agree_with_float_rules() {
        for m in 1..=8 {
            for family in [Family::Gauss, Family::Lobatto, Family::Radau] {
                if m < family.min_points() {
                    continue;
                }
                let rule = family.rule(m).unwrap();
                let exact = family.exact_moments(m, 2 * m + 2).unwrap();
                for (j, mu) in exact.iter().enumerate() {
                    assert_abs_diff_eq!(rule.moment(j), to_f64(mu), epsilon = 1e-13);
                    if j <= family.exactness(m) {
                        assert_eq!(*mu, rat(1, j as i64 + 1), "{family}{m} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn quadrature_mass_stencils_reference_values() {
        let check = |p: usize, rule: QuadratureRule, expect: &[Rational]| {
            let s = quadrature_mass_stencil(p, &rule).unwrap();
            for (got, want) in s.values.iter().zip(expect) {
                let w = to_f64(want);
                assert!((got - w).abs() <= 1e-12 * w.abs(), "{} p={p}: {got} vs {w}", rule.label);
            }
        };
        check(2, gauss_legendre(2).unwrap(), &[rat(13, 24), rat(2, 9), rat(1, 144)]);
        check(
            3,
            gauss_lobatto(4).unwrap(),
            &[rat(259, 540), rat(17, 72), rat(43, 1800), rat(1, 5400)],
        );
        check(2, gauss_radau(2).unwrap(), &[rat(5, 9), rat(23, 108), rat(1, 108)]);
    }

    #[test]
    fn exact_route_reproduces_reference_fractions() {
        let (_, b) = exact_rule_stencils(2, Family::Gauss, 2).unwrap();
        assert_eq!(b.values, vec![rat(13, 24), rat(2, 9), rat(1, 144)]);
        let (a, b) = exact_rule_stencils(4, Family::Radau, 4).unwrap();
        assert_eq!(a, stiffness_stencil(4).unwrap());
        assert_eq!(
            b.values,
            vec![
                rat(91111, 211680),
                rat(514697, 2116800),
                rat(42607, 1058400),
                rat(20497, 14817600),
                rat(41, 14817600)
            ]
        );
        // full Gauss integration is exact
        for p in 1..=6 {
            let (a, b) = exact_rule_stencils(p, Family::Gauss, p + 1).unwrap();
            assert_eq!(a, stiffness_stencil(p).unwrap());
            assert_eq!(b, mass_stencil(p).unwrap());
        }
    }

    #[test]
    fn insufficient_exactness_is_rejected() {
        let g1 = gauss_legendre(1).unwrap();
        assert!(matches!(
            quadrature_mass_stencil(3, &g1),
            Err(Error::InsufficientExactness { required: 4, .. })
        ));
        let dmm = dmm_rule(2, NodeSign::Plus).unwrap();
        assert!(quadrature_mass_stencil(2, &dmm).is_err());
    }

    #[test]
    fn blend_endpoints_and_linearity() {
        let g3 = gauss_legendre(3).unwrap();
        let l3 = gauss_lobatto(3).unwrap();
        let f = |x: f64| (3.0 * x).sin() + x.powi(7);
        assert_abs_diff_eq!(blend(&g3, &l3, 1.0).integrate(f), g3.integrate(f), epsilon = 1e-15);
        assert_abs_diff_eq!(blend(&g3, &l3, 0.0).integrate(f), l3.integrate(f), epsilon = 1e-15);
        let tau = 0.37;
        let mixed = tau * g3.integrate(f) + (1.0 - tau) * l3.integrate(f);
        assert_abs_diff_eq!(blend(&g3, &l3, tau).integrate(f), mixed, epsilon = 1e-15);
    }

    #[test]
    fn blending_gauss_rules_gives_optimal_mass() {
        let g3 = gauss_legendre(3).unwrap();
        let g2 = gauss_legendre(2).unwrap();
        let rule = blend(&g3, &g2, 2.0).into_rule();
        let s = quadrature_mass_stencil(2, &rule).unwrap();
        let want = [67.0 / 120.0, 19.0 / 90.0, 7.0 / 720.0];
        for (g, w) in s.values.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-14);
        }
    }

    #[test]
    fn selected_taus() {
        assert_abs_diff_eq!(BlendPair::Gg.tau(2).unwrap(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(BlendPair::Lr.tau(3).unwrap(), 22.0 / 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(BlendPair::Gg.tau(4).unwrap(), 22.0, epsilon = 1e-8);
        assert_eq!(BlendPair::Gr.tau_exact(4).unwrap(), rat(-145, 2));
        assert!(matches!(BlendPair::Lr.tau(1), Err(Error::DegenerateBlend { .. })));
        assert!(matches!(BlendPair::Lr.tau_exact(1), Err(Error::DegenerateBlend { .. })));
    }

    #[test]
    fn pair_names_parse() {
        for pair in BlendPair::ALL {
            assert_eq!(pair.name().parse::<BlendPair>().unwrap(), pair);
        }
        assert!("xx".parse::<BlendPair>().is_err());
    }

    #[test]
    fn dmm_rules_shape() {
        let r1 = dmm_rule(1, NodeSign::Plus).unwrap();
        assert_abs_diff_eq!(r1.nodes[0], 0.9082482905, epsilon = 1e-10);
        assert_eq!(r1.weights, vec![1.0]);
        let r2 = dmm_rule(2, NodeSign::Minus).unwrap();
        assert_eq!(r2.nodes[0], 0.0);
        assert_abs_diff_eq!(r2.weights[0], 2.0 / 7.0, epsilon = 1e-16);
        let r3 = dmm_rule(3, NodeSign::Plus).unwrap();
        assert!(r3.weights.iter().any(|&w| w < 0.0));
        assert!(dmm_rule(4, NodeSign::Plus).is_err());
        for p in 1..=3 {
            for sign in [NodeSign::Plus, NodeSign::Minus] {
                let r = dmm_rule(p, sign).unwrap();
                assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn triple_blend_rejects_repeated_rules() {
        let g3 = gauss_legendre(3).unwrap();
        let g2 = gauss_legendre(2).unwrap();
        assert_eq!(
            triple_blend_check(2, &g3, &g3, &g2),
            Err(Error::RulesNotDistinct)
        );
    }
}
