//! Stiffness and mass assembly on uniform meshes of [0, 1] and [0, 1]², with
//! homogeneous Dirichlet conditions imposed by dropping the two end basis
//! functions.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{blend, dmm_rule, BlendPair, Family, NodeSign, QuadratureRule};
use crate::splines::BSplineSpace;

/// Symmetric matrix in upper band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    bandwidth: usize,
    // row i holds entries (i, i..=i+bandwidth)
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j >= self.n || j - i > self.bandwidth {
            None
        } else {
            Some(i * (self.bandwidth + 1) + (j - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `value` to `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let s = self.slot(i, j).ok_or(Error::IndexOutOfRange {
            index: i.max(j),
            dim: self.n,
        })?;
        self.data[s] += value;
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {}x{} matrix",
                x.len(),
                self.n,
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let hi = (i + self.bandwidth).min(self.n - 1);
            for j in i..=hi {
                let v = self.data[i * (self.bandwidth + 1) + (j - i)];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        Ok(y)
    }

    /// Coordinate-format text: a header `n bandwidth`, then one `row col
    /// value` line (0-based, upper triangle) per stored nonzero.
    pub fn to_coordinate(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.bandwidth);
        for i in 0..self.n {
            for j in i..=(i + self.bandwidth).min(self.n.saturating_sub(1)) {
                let v = self.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{i} {j} {v:e}");
                }
            }
        }
        out
    }

    /// Inverse of [`to_coordinate`](Self::to_coordinate). Lines starting
    /// with `%` or `#` are comments; entries may sit in either triangle but a
    /// position may appear only once.
    pub fn from_coordinate(text: &str) -> Result<Self> {
        const MAX_DIM: usize = 1 << 20;
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('%') && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!("header {header:?} must be `n bandwidth`")));
        }
        let n: usize = parse_field(fields[0], "dimension")?;
        let bandwidth: usize = parse_field(fields[1], "bandwidth")?;
        if n > MAX_DIM || bandwidth >= n.max(1) || n.saturating_mul(bandwidth + 1) > MAX_DIM * 8 {
            return Err(Error::Parse(format!("unsupported size n = {n}, bandwidth = {bandwidth}")));
        }
        let mut m = Self::zeros(n, bandwidth);
        let mut seen = vec![false; m.data.len()];
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("entry {line:?} must be `row col value`")));
            }
            let i: usize = parse_field(f[0], "row")?;
            let j: usize = parse_field(f[1], "column")?;
            let v: f64 = parse_field(f[2], "value")?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("non-finite value in {line:?}")));
            }
            let s = m.slot(i, j).ok_or_else(|| {
                Error::Parse(format!("entry ({i}, {j}) lies outside the {n}x{n} band {bandwidth}"))
            })?;
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::Parse(format!("entry ({i}, {j}) given twice")));
            }
            m.data[s] = v;
        }
        Ok(m)
    }

    /// `self ⊗ other` as a band matrix of bandwidth `b₁·n₂ + b₂`.
    pub fn kron(&self, other: &SymBandMatrix) -> SymBandMatrix {
        let n2 = other.n;
        let bw = self.bandwidth * n2 + other.bandwidth;
        let mut out = SymBandMatrix::zeros(self.n * n2, bw.min((self.n * n2).saturating_sub(1)));
        for i1 in 0..self.n {
            for j1 in 0..self.n {
                let a = self.get(i1, j1);
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        let (r, c) = (i1 * n2 + i2, j1 * n2 + j2);
                        let b = other.get(i2, j2);
                        if r <= c && b != 0.0 {
                            let s = out.slot(r, c).expect("within Kronecker band");
                            out.data[s] += a * b;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn plus(&self, other: &SymBandMatrix) -> Result<SymBandMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.n, other.n)));
        }
        let bw = self.bandwidth.max(other.bandwidth);
        let mut out = SymBandMatrix::zeros(self.n, bw);
        for src in [self, other] {
            for i in 0..src.n {
                for j in i..=(i + src.bandwidth).min(src.n - 1) {
                    out.add(i, j, src.get(i, j))?;
                }
            }
        }
        Ok(out)
    }
}

fn parse_field<T: std::str::FromStr>(text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Parse(format!("bad {what} {text:?}")))
}

/// Stiffness and mass over the Dirichlet-reduced space, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPair {
    pub k: SymBandMatrix,
    pub m: SymBandMatrix,
    pub space: BSplineSpace,
    pub stiffness_rule: String,
    pub mass_rule: String,
    /// 1 or 2.
    pub dimension: usize,
}

/// Default cap on the 2D system size `n₁²`.
pub const DEFAULT_2D_CAP: usize = 1 << 14;

fn element_matrix(
    space: &BSplineSpace,
    e: usize,
    rule: &QuadratureRule,
    derivative: bool,
) -> Vec<Vec<f64>> {
    let p = space.degree();
    let h = space.h();
    let mut local = vec![vec![0.0; p + 1]; p + 1];
    for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
        let basis = space.element_basis(e, xi);
        let f = if derivative {
            &basis.derivatives
        } else {
            &basis.values
        };
        for a in 0..=p {
            for b in 0..=p {
                local[a][b] += w * h * f[a] * f[b];
            }
        }
    }
    local
}

fn assemble_form(space: &BSplineSpace, rule: &QuadratureRule, derivative: bool) -> SymBandMatrix {
    let p = space.degree();
    let n = space.dirichlet_dim();
    let last = space.dim() - 1;
    let mut out = SymBandMatrix::zeros(n, p.min(n.saturating_sub(1)));
    for e in 0..space.elements() {
        let local = element_matrix(space, e, rule, derivative);
        for a in 0..=p {
            for b in a..=p {
                let (ga, gb) = (e + a, e + b);
                if ga == 0 || gb == 0 || ga == last || gb == last {
                    continue;
                }
                out.add(ga - 1, gb - 1, local[a][b]).expect("within band");
            }
        }
    }
    out
}

/// Assembles `K` with `stiff_rule` and `M` with `mass_rule` elementwise.
pub fn assemble_1d(
    space: &BSplineSpace,
    stiff_rule: &QuadratureRule,
    mass_rule: &QuadratureRule,
) -> Result<MatrixPair> {
    let p = space.degree();
    let required = 2 * p - 2;
    if stiff_rule.exactness < required {
        return Err(Error::InsufficientExactness {
            label: stiff_rule.label.to_string(),
            exactness: stiff_rule.exactness,
            required,
        });
    }
    Ok(MatrixPair {
        k: assemble_form(space, stiff_rule, true),
        m: assemble_form(space, mass_rule, false),
        space: space.clone(),
        stiffness_rule: stiff_rule.label.to_string(),
        mass_rule: mass_rule.label.to_string(),
        dimension: 1,
    })
}

/// The `τ_gl` blend of `G_{p+1}` and `L_{p+1}`, whose interior mass rows
/// are the optimal mass.
pub fn dmm_mass_rule(p: usize) -> Result<QuadratureRule> {
    let tau = BlendPair::Gl.tau(p)?;
    Ok(blend(&Family::Gauss.rule(p + 1)?, &Family::Lobatto.rule(p + 1)?, tau).into_rule())
}

/// Optimal-mass assembly: exact stiffness (`G_{p+1}`) and the blended mass
/// rule on every element, boundary elements included.
pub fn assemble_1d_dmm(space: &BSplineSpace) -> Result<MatrixPair> {
    let p = space.degree();
    let mut pair = assemble_1d(space, &Family::Gauss.rule(p + 1)?, &dmm_mass_rule(p)?)?;
    pair.mass_rule = "DMM".into();
    Ok(pair)
}

/// Both forms with the two-node optimal rule on every element. Interior rows
/// equal the optimal-mass rows; boundary rows are not exact since the rule
/// does not integrate linear functions.
pub fn assemble_1d_dmm_rule(space: &BSplineSpace, sign: NodeSign) -> Result<MatrixPair> {
    let rule = dmm_rule(space.degree(), sign)?;
    Ok(MatrixPair {
        k: assemble_form(space, &rule, true),
        m: assemble_form(space, &rule, false),
        space: space.clone(),
        stiffness_rule: rule.label.to_string(),
        mass_rule: rule.label.to_string(),
        dimension: 1,
    })
}

/// `K₂ = K⊗M + M⊗K`, `M₂ = M⊗M` from a 1D pair.
pub fn assemble_2d(pair_1d: &MatrixPair, cap: usize) -> Result<MatrixPair> {
    if pair_1d.dimension != 1 {
        return Err(Error::DimensionMismatch("expected a 1D pair".into()));
    }
    let n1 = pair_1d.k.dim();
    let size = n1 * n1;
    if size > cap {
        return Err(Error::SizeCap { size, cap });
    }
    let k = pair_1d
        .k
        .kron(&pair_1d.m)
        .plus(&pair_1d.m.kron(&pair_1d.k))?;
    Ok(MatrixPair {
        k,
        m: pair_1d.m.kron(&pair_1d.m),
        space: pair_1d.space.clone(),
        stiffness_rule: pair_1d.stiffness_rule.clone(),
        mass_rule: pair_1d.mass_rule.clone(),
        dimension: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmm::dmm_stencil;
    use crate::quadrature::{gauss_legendre, quadrature_mass_stencil};
    use crate::rational::to_f64;
    use crate::stencils::{mass_stencil, stiffness_stencil};
    use approx::assert_abs_diff_eq;

    fn interior_row(m: &SymBandMatrix, p: usize) -> Vec<f64> {
        let i = m.dim() / 2;
        (0..=p).map(|k| m.get(i, i + k)).collect()
    }

    fn full(p: usize, n: usize) -> MatrixPair {
        let space = BSplineSpace::new(p, n).unwrap();
        let g = gauss_legendre(p + 1).unwrap();
        assemble_1d(&space, &g, &g).unwrap()
    }

    #[test]
    fn linear_mass_interior_row() {
        let pair = full(1, 4);
        let h = 0.25;
        let row = interior_row(&pair.m, 1);
        assert_abs_diff_eq!(row[0] / h, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(row[1] / h, 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_stiffness_interior_row() {
        let pair = full(2, 8);
        let row = interior_row(&pair.k, 2);
        let h = 1.0 / 8.0;
        for (got, want) in row.iter().zip([1.0, -1.0 / 3.0, -1.0 / 6.0]) {
            assert_abs_diff_eq!(got * h, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn single_interior_hat() {
        let space = BSplineSpace::new(1, 2).unwrap();
        for m in 1..=3 {
            let g = gauss_legendre(m).unwrap();
            let pair = assemble_1d(&space, &g, &g).unwrap();
            assert_eq!(pair.k.dim(), 1);
            assert_abs_diff_eq!(pair.k.get(0, 0), 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn interior_rows_match_stencils() {
        for p in 1..=4 {
            let n = 4 * (p + 1) + 2;
            let h = 1.0 / n as f64;
            let pair = full(p, n);
            let a = stiffness_stencil(p).unwrap().to_f64().values;
            let b = mass_stencil(p).unwrap().to_f64().values;
            let i = n / 2;
            for k in 0..=p {
                assert_abs_diff_eq!(pair.k.get(i, i + k) * h, a[k], epsilon = 1e-13);
                assert_abs_diff_eq!(pair.m.get(i, i + k) / h, b[k], epsilon = 1e-13);
            }
            // constants are in the kernel of interior rows
            let ones = vec![1.0; pair.k.dim()];
            let kv = pair.k.matvec(&ones).unwrap();
            for row in &kv[p..pair.k.dim() - p] {
                assert!(row.abs() < 1e-12 / h, "p={p}");
            }
        }
    }

    #[test]
    fn under_integrated_mass_rows() {
        let space = BSplineSpace::new(3, 20).unwrap();
        let stiff = gauss_legendre(4).unwrap();
        let l4 = Family::Lobatto.rule(4).unwrap();
        let pair = assemble_1d(&space, &stiff, &l4).unwrap();
        let want = quadrature_mass_stencil(3, &l4).unwrap().values;
        let row = interior_row(&pair.m, 3);
        for (g, w) in row.iter().zip(want) {
            assert_abs_diff_eq!(g * 20.0, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn dmm_assembly_interior_rows() {
        for (p, n) in [(1, 12), (2, 16), (3, 8), (3, 20), (4, 24)] {
            let space = BSplineSpace::new(p, n).unwrap();
            let pair = assemble_1d_dmm(&space).unwrap();
            let want = dmm_stencil(p).unwrap().to_f64().values;
            let a = stiffness_stencil(p).unwrap().to_f64().values;
            let h = 1.0 / n as f64;
            let i = pair.m.dim() / 2;
            for k in 0..=p {
                assert_abs_diff_eq!(pair.m.get(i, i + k) / h, want[k], epsilon = 1e-12);
                assert_abs_diff_eq!(pair.k.get(i, i + k) * h, a[k], epsilon = 1e-12);
            }
        }
        let space = BSplineSpace::new(3, 8).unwrap();
        let pair = assemble_1d_dmm(&space).unwrap();
        // global basis 4 and its neighbours up to 7 are all unclipped
        let i = 3;
        assert_abs_diff_eq!(pair.m.get(i, i) * 8.0, 3629.0 / 7560.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.m.get(i, i + 3) * 8.0, 1.0 / 6048.0, epsilon = 1e-12);
    }

    #[test]
    fn two_node_rule_and_blend_agree_on_interior_rows() {
        for p in 1..=3 {
            let space = BSplineSpace::new(p, 16).unwrap();
            let blended = assemble_1d_dmm(&space).unwrap();
            for sign in [NodeSign::Plus, NodeSign::Minus] {
                let rule = assemble_1d_dmm_rule(&space, sign).unwrap();
                let dim = rule.k.dim();
                // rows whose whole band avoids the clipped end functions
                for i in p..dim - p {
                    for j in i..=(i + p).min(dim - p - 1) {
                        assert_abs_diff_eq!(rule.m.get(i, j), blended.m.get(i, j), epsilon = 1e-12);
                        assert_abs_diff_eq!(rule.k.get(i, j), blended.k.get(i, j), epsilon = 1e-12);
                    }
                }
                if p == 1 {
                    let diff = (rule.m.to_dense() - blended.m.to_dense()).abs().max();
                    assert!(diff < 1e-12);
                }
            }
        }
    }

    #[test]
    fn insufficient_stiffness_rule_rejected() {
        let space = BSplineSpace::new(3, 8).unwrap();
        let g1 = gauss_legendre(1).unwrap();
        assert!(matches!(
            assemble_1d(&space, &g1, &g1),
            Err(Error::InsufficientExactness { .. })
        ));
    }

    #[test]
    fn band_matrix_basics() {
        let mut m = SymBandMatrix::zeros(3, 1);
        m.add(0, 0, 2.0).unwrap();
        m.add(1, 0, -1.0).unwrap();
        m.add(1, 1, 2.0).unwrap();
        m.add(2, 1, -1.0).unwrap();
        m.add(2, 2, 2.0).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert!(m.add(0, 2, 1.0).is_err());
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 0.0, 1.0]);
        let dense = m.to_dense();
        assert_eq!(dense, dense.transpose());
        let back = SymBandMatrix::from_coordinate(&m.to_coordinate()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn coordinate_parse_errors() {
        for bad in [
            "",
            "3",
            "3 1\n0 2 1.0",
            "3 1\n0 0 1\n0 0 2",
            "3 1\n0 0 x",
            "3 1\n0 0 NaN",
            "3 3\n",
            "3 1\n1 0 1 4",
        ] {
            assert!(SymBandMatrix::from_coordinate(bad).is_err(), "{bad:?}");
        }
        let m = SymBandMatrix::from_coordinate("% comment\n2 1\n1 0 -0.5\n").unwrap();
        assert_eq!(m.get(0, 1), -0.5);
    }

    #[test]
    fn kronecker_by_hand() {
        let mut a = SymBandMatrix::zeros(2, 1);
        a.add(0, 0, 2.0).unwrap();
        a.add(0, 1, -1.0).unwrap();
        a.add(1, 1, 3.0).unwrap();
        let mut b = SymBandMatrix::zeros(2, 1);
        b.add(0, 0, 4.0).unwrap();
        b.add(0, 1, 1.0).unwrap();
        b.add(1, 1, 5.0).unwrap();
        let pair = MatrixPair {
            k: a.clone(),
            m: b.clone(),
            space: BSplineSpace::new(1, 3).unwrap(),
            stiffness_rule: "x".into(),
            mass_rule: "y".into(),
            dimension: 1,
        };
        let two = assemble_2d(&pair, 16).unwrap();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        let expect = ad.kronecker(&bd) + bd.kronecker(&ad);
        assert_eq!(two.k.dim(), 4);
        assert_eq!(two.k.to_dense(), expect);
        assert_eq!(two.m.to_dense(), bd.kronecker(&bd));
        assert!(matches!(assemble_2d(&pair, 3), Err(Error::SizeCap { size: 4, cap: 3 })));
    }

    #[test]
    fn full_integration_matches_exact_interior() {
        let p = 3;
        let n = 24;
        let pair = full(p, n);
        let b = mass_stencil(p).unwrap();
        let i = n / 2;
        for k in 0..=p {
            assert_abs_diff_eq!(pair.m.get(i, i + k) * n as f64, to_f64(&b.values[k]), epsilon = 1e-13);
        }
    }

    proptest::proptest! {
        #[test]
        fn matvec_matches_dense(
            n in 1usize..9,
            bw in 0usize..4,
            vals in proptest::collection::vec(-5.0f64..5.0, 40),
            x in proptest::collection::vec(-3.0f64..3.0, 9),
        ) {
            let bw = bw.min(n - 1);
            let mut m = SymBandMatrix::zeros(n, bw);
            let mut it = vals.iter();
            for i in 0..n {
                for j in i..=(i + bw).min(n - 1) {
                    m.add(i, j, *it.next().unwrap_or(&1.0)).unwrap();
                }
            }
            let x = &x[..n];
            let y = m.matvec(x).unwrap();
            let dense = m.to_dense() * nalgebra::DVector::from_column_slice(x);
            for i in 0..n {
                proptest::prop_assert!((y[i] - dense[i]).abs() < 1e-12);
            }
            proptest::prop_assert_eq!(SymBandMatrix::from_coordinate(&m.to_coordinate()).unwrap(), m);
        }
    }
}
