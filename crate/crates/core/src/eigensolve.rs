//! Generalized symmetric-definite eigenproblems `K u = λ M u`, exact
//! Laplacian spectra on the unit interval and square, and error tables.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::assembly::MatrixPair;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::splines::BSplineSpace;

/// Ascending eigenvalues with optional `M`-orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

/// Solves `K u = λ M u` by the reduction `L⁻¹ K L⁻ᵀ` with `M = L Lᵀ`,
/// followed by one Rayleigh-quotient pass on the original pencil.
pub fn generalized_eig(pair: &MatrixPair) -> Result<Spectrum> {
    solve_dense(&pair.k.to_dense(), &pair.m.to_dense(), true)
}

/// Eigenvalues only.
pub fn generalized_eigenvalues(pair: &MatrixPair) -> Result<Vec<f64>> {
    Ok(solve_dense(&pair.k.to_dense(), &pair.m.to_dense(), false)?.eigenvalues)
}

pub fn solve_dense(k: &DMatrix<f64>, m: &DMatrix<f64>, keep_vectors: bool) -> Result<Spectrum> {
    let n = k.nrows();
    if k.shape() != m.shape() || k.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "K is {:?}, M is {:?}",
            k.shape(),
            m.shape()
        )));
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::IndefiniteMass)?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let x = l
        .solve_lower_triangular(k)
        .ok_or(Error::IndefiniteMass)?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::IndefiniteMass)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lt = l.transpose();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(idx).into_owned();
        let v = lt.solve_upper_triangular(&y).ok_or(Error::IndefiniteMass)?;
        let kv = k * &v;
        let mv = m * &v;
        let norm = v.dot(&mv);
        if norm <= 0.0 {
            return Err(Error::IndefiniteMass);
        }
        // Rayleigh quotient: second-order accurate in the vector error
        values.push(v.dot(&kv) / norm);
        vectors.set_column(col, &(v / norm.sqrt()));
    }
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: keep_vectors.then_some(vectors),
    })
}

/// An exact eigenpair of `-Δu = λu` with homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactMode {
    pub eigenvalue: f64,
    /// Wave numbers `(j, k)`; `k = 0` in 1D.
    pub indices: (usize, usize),
}

impl ExactMode {
    /// `u(x) = √2 sin(jπx)` (1D) or its tensor product (2D).
    pub fn eval_1d(&self, x: f64) -> f64 {
        2f64.sqrt() * (self.indices.0 as f64 * PI * x).sin()
    }

    pub fn eval_1d_derivative(&self, x: f64) -> f64 {
        let j = self.indices.0 as f64;
        2f64.sqrt() * j * PI * (j * PI * x).cos()
    }
}

/// The first `count` exact eigenvalues, ascending and with multiplicity.
pub fn exact_spectrum(dimension: usize, count: usize) -> Result<Vec<ExactMode>> {
    match dimension {
        1 => Ok((1..=count)
            .map(|j| ExactMode {
                eigenvalue: (j * j) as f64 * PI * PI,
                indices: (j, 0),
            })
            .collect()),
        2 => {
            // j² + k² ≤ r² covers the first `count` values once r² ≥ count
            let r = ((count as f64).sqrt().ceil() as usize + 1).max(1);
            let bound = r * r;
            let mut modes: Vec<ExactMode> = Vec::new();
            let limit = (bound as f64).sqrt() as usize + 1;
            for j in 1..=limit {
                for k in 1..=limit {
                    modes.push(ExactMode {
                        eigenvalue: (j * j + k * k) as f64 * PI * PI,
                        indices: (j, k),
                    });
                }
            }
            modes.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then(a.indices.cmp(&b.indices)));
            modes.truncate(count);
            Ok(modes)
        }
        d => Err(Error::DimensionMismatch(format!("dimension {d} is not 1 or 2"))),
    }
}

/// `(λ_j^h − λ_j)/λ_j` pairing both lists by ascending index.
pub fn relative_ev_errors(discrete: &[f64], exact: &[f64]) -> Result<Vec<f64>> {
    if discrete.len() < exact.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} discrete eigenvalues for {} exact ones",
            discrete.len(),
            exact.len()
        )));
    }
    Ok(exact
        .iter()
        .zip(discrete)
        .map(|(e, d)| (d - e) / e)
        .collect())
}

/// All pairwise sums `λ_j + λ_k`, ascending.
pub fn tensor_spectrum_2d(spec: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = spec
        .iter()
        .flat_map(|a| spec.iter().map(move |b| a + b))
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Energy-norm error `‖u_j − ũ_j‖_E` of a 1D discrete eigenvector (an
/// `M`-normalized column over the Dirichlet-reduced basis), with the sign of
/// `ũ` chosen so that `b(u, ũ) > 0`. The integrals run elementwise with
/// `G_{p+5}`.
pub fn energy_error(space: &BSplineSpace, vector: &[f64], mode: usize) -> Result<f64> {
    if vector.len() != space.dirichlet_dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for {} unknowns",
            vector.len(),
            space.dirichlet_dim()
        )));
    }
    let exact = ExactMode {
        eigenvalue: (mode * mode) as f64 * PI * PI,
        indices: (mode, 0),
    };
    let rule = gauss_legendre(space.degree() + 5)?;
    let p = space.degree();
    let h = space.h();
    let last = space.dim() - 1;
    let coefficient = |g: usize| -> f64 {
        if g == 0 || g == last {
            0.0
        } else {
            vector[g - 1]
        }
    };
    let mut cross = 0.0;
    let mut samples = Vec::with_capacity(space.elements() * rule.nodes.len());
    for e in 0..space.elements() {
        for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
            let basis = space.element_basis(e, xi);
            let x = (e as f64 + xi) * h;
            let (mut uh, mut duh) = (0.0, 0.0);
            for a in 0..=p {
                let c = coefficient(e + a);
                uh += c * basis.values[a];
                duh += c * basis.derivatives[a];
            }
            cross += w * h * exact.eval_1d(x) * uh;
            samples.push((w * h, exact.eval_1d_derivative(x), duh));
        }
    }
    if cross == 0.0 {
        return Err(Error::DegenerateSign(mode));
    }
    let s = cross.signum();
    let sq: f64 = samples
        .iter()
        .map(|(wh, du, duh)| wh * (du - s * duh).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// Per-mode errors for one `(p, N, rule)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub p: usize,
    pub n: usize,
    pub rule: String,
    pub mode: usize,
    pub rel_ev_error: f64,
    pub ef_energy_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

/// Six significant digits in scientific notation.
pub fn sci6(x: f64) -> String {
    format!("{x:.5e}")
}

impl ErrorTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,N,rule,mode,rel_ev_error,ef_energy_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.p,
                r.n,
                r.rule,
                r.mode,
                sci6(r.rel_ev_error),
                r.ef_energy_error.map(sci6).unwrap_or_default()
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Least-squares slope of `log|y|` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && b.abs() > 0.0)
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `M`-orthogonality defect `max_{i≠j} |vᵢᵀ M vⱼ|` and normalization
/// defect `max_i |vᵢᵀ M vᵢ − 1|`.
pub fn orthogonality_defect(m: &DMatrix<f64>, vectors: &DMatrix<f64>) -> (f64, f64) {
    let g = vectors.transpose() * m * vectors;
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i == j {
                diag = diag.max((g[(i, j)] - 1.0).abs());
            } else {
                off = off.max(g[(i, j)].abs());
            }
        }
    }
    (off, diag)
}

pub fn residual_norms(k: &DMatrix<f64>, m: &DMatrix<f64>, spec: &Spectrum) -> Vec<(f64, f64)> {
    let Some(v) = &spec.eigenvectors else {
        return Vec::new();
    };
    spec.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let x: DVector<f64> = v.column(i).into_owned();
            let kv = k * &x;
            ((&kv - m * &x * lam).norm(), kv.norm())
        })
        .collect()
}
