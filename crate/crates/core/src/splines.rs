//! Uniform maximum-continuity B-spline spaces on [0, 1] and cardinal
//! B-splines on the integer grid.

use num::{FromPrimitive, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Open uniform knot vector for degree `p` on `n` elements of [0, 1].
pub fn knot_vector(p: usize, n: usize) -> Result<Vec<f64>> {
    if p < 1 {
        return Err(Error::InvalidDegree {
            p,
            requirement: "p >= 1",
        });
    }
    if n < 2 {
        return Err(Error::InvalidMesh(n));
    }
    let mut knots = Vec::with_capacity(n + 2 * p + 1);
    knots.extend(std::iter::repeat_n(0.0, p + 1));
    knots.extend((1..n).map(|k| k as f64 / n as f64));
    knots.extend(std::iter::repeat_n(1.0, p + 1));
    Ok(knots)
}

/// Degree-`p` splines on `N` uniform elements of [0, 1] with simple interior
/// knots. Basis functions are indexed `0..N+p`; the homogeneous Dirichlet
/// subspace drops the first and the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineSpace {
    degree: usize,
    elements: usize,
    knots: Vec<f64>,
}

/// Nonzero basis functions on one element, evaluated at a local point.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBasis {
    /// Global index of `values[0]`; the element touches `first..=first + p`.
    pub first: usize,
    pub values: Vec<f64>,
    /// Derivatives with respect to the physical coordinate x.
    pub derivatives: Vec<f64>,
}

impl BSplineSpace {
    pub fn new(degree: usize, elements: usize) -> Result<Self> {
        let knots = knot_vector(degree, elements)?;
        Ok(Self {
            degree,
            elements,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn dim(&self) -> usize {
        self.elements + self.degree
    }

    pub fn dirichlet_dim(&self) -> usize {
        self.elements + self.degree - 2
    }

    /// Element containing `x`, with `x = 1` assigned to the last element.
    pub fn element_of(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::PointOutOfDomain(x));
        }
        let p = self.degree;
        // interior breakpoints are knots[p+1..p+N]
        let breaks = &self.knots[p + 1..p + self.elements];
        Ok(breaks.partition_point(|&k| k <= x))
    }

    /// All `p + 1` basis functions that live on element `e`, evaluated at
    /// local coordinate `xi` in [0, 1] using that element's polynomial piece.
    pub fn element_basis(&self, e: usize, xi: f64) -> ElementBasis {
        let p = self.degree;
        let span = e + p;
        let x = (e as f64 + xi) * self.h();
        let lower = basis_funs(&self.knots, span, x, p - 1);
        let values = basis_funs(&self.knots, span, x, p);
        // N'_{a,p} = p/(t_{a+p}-t_a) N_{a,p-1} - p/(t_{a+p+1}-t_{a+1}) N_{a+1,p-1}
        let mut derivatives = vec![0.0; p + 1];
        for (r, d) in derivatives.iter_mut().enumerate() {
            let a = e + r;
            let left = if r >= 1 { lower[r - 1] } else { 0.0 };
            let right = if r < p { lower[r] } else { 0.0 };
            let dl = self.knots[a + p] - self.knots[a];
            let dr = self.knots[a + p + 1] - self.knots[a + 1];
            let mut v = 0.0;
            if dl > 0.0 {
                v += p as f64 / dl * left;
            }
            if dr > 0.0 {
                v -= p as f64 / dr * right;
            }
            *d = v;
        }
        ElementBasis {
            first: e,
            values,
            derivatives,
        }
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    fn local(&self, x: f64) -> Result<(usize, f64)> {
        let e = self.element_of(x)?;
        Ok((e, x * self.elements as f64 - e as f64))
    }

    pub fn eval_basis(&self, j: usize, x: f64) -> Result<f64> {
        self.check_index(j)?;
        let (e, xi) = self.local(x)?;
        if j < e || j > e + self.degree {
            return Ok(0.0);
        }
        Ok(self.element_basis(e, xi).values[j - e])
    }

    pub fn eval_basis_derivative(&self, j: usize, x: f64) -> Result<f64> {
        self.check_index(j)?;
        let (e, xi) = self.local(x)?;
        if j < e || j > e + self.degree {
            return Ok(0.0);
        }
        Ok(self.element_basis(e, xi).derivatives[j - e])
    }
}

/// Cox–de Boor triangle for the `d + 1` functions of degree `d` that are
/// nonzero on knot span `span` (knots[span] <= x < knots[span + 1]).
fn basis_funs(knots: &[f64], span: usize, x: f64, d: usize) -> Vec<f64> {
    let mut n = vec![0.0; d + 1];
    let mut left = vec![0.0; d + 1];
    let mut right = vec![0.0; d + 1];
    n[0] = 1.0;
    for j in 1..=d {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Value at `t` of the polynomial piece that the degree-`p` cardinal
/// B-spline (knots `0, 1, …, p + 1`) takes on `[piece, piece + 1]`.
/// Pieces outside `0..=p` are identically zero. `t` need not lie in the
/// piece's interval, which lets element endpoints select a one-sided piece.
pub fn cardinal_piece<T>(p: usize, piece: i64, t: &T) -> T
where
    T: Clone + num::Num + FromPrimitive,
{
    if piece < 0 || piece > p as i64 {
        return T::zero();
    }
    let mut vals: Vec<T> = (0..=p as i64)
        .map(|i| if i == piece { T::one() } else { T::zero() })
        .collect();
    for d in 1..=p {
        let inv_d = T::one() / T::from_usize(d).expect("small integer");
        for i in 0..=(p - d) {
            let ti = T::from_usize(i).expect("small integer");
            let tid = T::from_usize(i + d + 1).expect("small integer");
            let a = (t.clone() - ti) * vals[i].clone();
            let b = (tid - t.clone()) * vals[i + 1].clone();
            vals[i] = (a + b) * inv_d.clone();
        }
    }
    vals.swap_remove(0)
}

/// Derivative of the cardinal piece `piece` at `t`.
pub fn cardinal_piece_derivative<T>(p: usize, piece: i64, t: &T) -> T
where
    T: Clone + num::Num + FromPrimitive,
{
    if p == 0 {
        return T::zero();
    }
    let shifted = t.clone() - T::one();
    cardinal_piece(p - 1, piece, t) - cardinal_piece(p - 1, piece - 1, &shifted)
}

/// Exact value of the degree-`p` cardinal B-spline at a rational point.
pub fn cardinal_value(p: usize, t: &Rational) -> Rational {
    let piece = t.floor().to_integer();
    match piece.to_i64() {
        Some(s) if (0..=p as i64).contains(&s) => cardinal_piece(p, s, t),
        _ => Rational::zero(),
    }
}

/// Double-precision value of the degree-`p` cardinal B-spline.
pub fn cardinal_value_f64(p: usize, t: f64) -> f64 {
    if !(0.0..(p + 1) as f64).contains(&t) {
        return 0.0;
    }
    cardinal_piece(p, t.floor() as i64, &t)
}
