//! Discrete dispersion relation of a stencil pair under Bloch waves
//! `U_j = e^{ijΛ}`, `Λ = μh`: `ω_h²h² = (A₀ + 2ΣA_k cos kΛ)/(B₀ + 2ΣB_k cos kΛ)`.

use num::Zero;
use serde::Serialize;

use crate::dmm::{leading_coefficient, ExpansionOrder};
use crate::eigensolve::log_log_slope;
use crate::error::{Error, Result};
use crate::rational::{power_over_factorial, to_f64, Rational};

/// `B₀ + 2ΣB_k cos kΛ` written as `ΣB − 4ΣB_k sin²(kΛ/2)` so small `Λ`
/// loses nothing to cancellation.
fn cosine_sum(v: &[f64], lambda: f64) -> f64 {
    let full: f64 = v[0] + 2.0 * v[1..].iter().sum::<f64>();
    let wave: f64 = v
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, x)| x * (k as f64 * lambda / 2.0).sin().powi(2))
        .sum();
    full - 4.0 * wave
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= std::f64::consts::PI) {
        return Err(Error::InvalidWaveNumber(lambda));
    }
    Ok(())
}

/// `ω_h²h²` for half stencils `a` (×h) and `b` (÷h).
pub fn rayleigh(a: &[f64], b: &[f64], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let den = cosine_sum(b, lambda);
    if den.abs() < 1e-14 {
        return Err(Error::StoppingBand(den));
    }
    Ok(cosine_sum(a, lambda) / den)
}

/// Taylor coefficients of `N(Λ) − Λ²D(Λ)` in powers of `Λ²`, exact.
pub fn numerator_series(a: &[Rational], b: &[Rational], terms: usize) -> Vec<Rational> {
    let even = |v: &[Rational], q: usize| -> Rational {
        if q == 0 {
            let mut s = v[0].clone();
            for x in &v[1..] {
                s += x * Rational::from_integer(2.into());
            }
            return s;
        }
        let mut s = Rational::zero();
        for (k, x) in v.iter().enumerate().skip(1) {
            s += power_over_factorial(k as u64, 2 * q as u32) * x;
        }
        s *= Rational::from_integer(2.into());
        if q % 2 == 1 {
            -s
        } else {
            s
        }
    };
    (0..terms)
        .map(|q| {
            let n = even(a, q);
            if q == 0 {
                n
            } else {
                n - even(b, q - 1)
            }
        })
        .collect()
}

/// Dispersion error `ω_h²h² − Λ²` from exact stencils. For `pΛ <= 2` the
/// numerator comes from its exact Taylor coefficients, so terms that cancel
/// analytically cancel exactly; otherwise the cosine sums are used directly.
#[derive(Debug, Clone)]
pub struct ExactDispersion {
    a: Vec<f64>,
    b: Vec<f64>,
    series: Vec<f64>,
    reach: f64,
}

impl ExactDispersion {
    const TERMS: usize = 40;

    pub fn new(a: &[Rational], b: &[Rational]) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "stencils of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        let p = a.len() - 1;
        Ok(Self {
            a: a.iter().map(to_f64).collect(),
            b: b.iter().map(to_f64).collect(),
            series: numerator_series(a, b, Self::TERMS).iter().map(to_f64).collect(),
            reach: 2.0 / p.max(1) as f64,
        })
    }

    pub fn error(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let den = cosine_sum(&self.b, lambda);
        if den.abs() < 1e-14 {
            return Err(Error::StoppingBand(den));
        }
        if lambda > self.reach {
            return Ok(cosine_sum(&self.a, lambda) / den - lambda * lambda);
        }
        let x = lambda * lambda;
        // Horner from the highest term
        let num = self.series.iter().rev().fold(0.0, |acc, c| acc * x + c);
        Ok(num / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionSample {
    pub lambda: f64,
    pub ratio: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub samples: Vec<DispersionSample>,
    /// Wave numbers skipped because the mass symbol vanished there.
    pub stopping_band: Vec<f64>,
    /// Relative error `|error|/Λ²` below which a sample is rounding noise for
    /// the evaluation path that produced it.
    pub noise_floor: f64,
}

impl DispersionCurve {
    fn build(lambdas: &[f64], noise_floor: f64, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let mut curve = DispersionCurve {
            noise_floor,
            ..Default::default()
        };
        for &l in lambdas {
            match f(l) {
                Ok(error) => curve.samples.push(DispersionSample {
                    lambda: l,
                    ratio: error + l * l,
                    error,
                }),
                Err(Error::StoppingBand(_)) => curve.stopping_band.push(l),
                Err(e) => return Err(e),
            }
        }
        Ok(curve)
    }

    pub fn sample(a: &[f64], b: &[f64], lambdas: &[f64]) -> Result<Self> {
        Self::build(lambdas, 1e2 * f64::EPSILON, |l| Ok(rayleigh(a, b, l)? - l * l))
    }

    pub fn sample_exact(a: &[Rational], b: &[Rational], lambdas: &[f64]) -> Result<Self> {
        let exact = ExactDispersion::new(a, b)?;
        // cancelled terms are exactly zero, so only underflow limits the floor
        Self::build(lambdas, 1e-250, |l| exact.error(l))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,ratio,error\n");
        for s in &self.samples {
            out.push_str(&format!("{:.6e},{:.6e},{:.6e}\n", s.lambda, s.ratio, s.error));
        }
        out
    }
}

/// `count` log-spaced wave numbers on `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub const DEFAULT_WINDOW: (f64, f64) = (1e-2, 1e-1);

/// Order in `Λ` of the relative dispersion error `(ω_h²h² − Λ²)/Λ²`, i.e.
/// the `h`-order of the eigenvalue error (`2p` or `2p + 2`): least-squares
/// slope over samples in `window` that sit above the rounding floor.
pub fn fit_order(curve: &DispersionCurve, window: (f64, f64)) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .samples
        .iter()
        .filter(|s| s.lambda >= window.0 && s.lambda <= window.1)
        .map(|s| (s.lambda, s.error / (s.lambda * s.lambda)))
        .filter(|(_, r)| r.abs() > curve.noise_floor)
        .unzip();
    if xs.len() < 5 {
        return Err(Error::BelowNoise);
    }
    log_log_slope(&xs, &ys).ok_or(Error::BelowNoise)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    /// Power of `h` in the eigenvalue error (`2p` or `2p + 2`).
    pub order: usize,
    pub predicted: f64,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub p: usize,
    pub standard: CoefficientEstimate,
    /// Present when the standard coefficient vanishes.
    pub superconvergent: Option<CoefficientEstimate>,
    pub passed: bool,
}

const PROBE: f64 = 1e-2;

/// Richardson limit of `error(Λ)/Λ^e` at `Λ → 0`, from `Λ₀` and `Λ₀/2`,
/// after removing a known lower-order term.
fn richardson(
    error: &dyn Fn(f64) -> Result<f64>,
    e: i32,
    known: Option<(f64, i32)>,
) -> Result<f64> {
    let g = |l: f64| -> Result<f64> {
        let mut v = error(l)?;
        if let Some((c, k)) = known {
            v -= c * l.powi(k);
        }
        Ok(v / l.powi(e))
    };
    let (g1, g2) = (g(PROBE)?, g(PROBE / 2.0)?);
    Ok((4.0 * g2 - g1) / 3.0)
}

fn check_with(
    p: usize,
    error: &dyn Fn(f64) -> Result<f64>,
    standard: f64,
    superconvergent: f64,
    standard_vanishes: bool,
) -> Result<CoefficientReport> {
    let e = 2 * p as i32 + 2;
    let measured = richardson(error, e, None)?;
    let standard = CoefficientEstimate {
        order: 2 * p,
        predicted: standard,
        measured,
    };
    let close = |m: f64, c: f64| (m - c).abs() <= 0.01 * c.abs();
    if standard_vanishes {
        let measured_super = richardson(error, e + 2, None)?;
        let sup = CoefficientEstimate {
            order: 2 * p + 2,
            predicted: superconvergent,
            measured: measured_super,
        };
        let passed = standard.measured.abs() < 1e-10 && close(sup.measured, sup.predicted);
        Ok(CoefficientReport {
            p,
            standard,
            superconvergent: Some(sup),
            passed,
        })
    } else {
        let passed = close(standard.measured, standard.predicted);
        Ok(CoefficientReport {
            p,
            standard,
            superconvergent: None,
            passed,
        })
    }
}

/// Compares the measured small-`Λ` limit of the dispersion error with the
/// leading coefficient formula.
pub fn coefficient_check(p: usize, a: &[Rational], b: &[Rational]) -> Result<CoefficientReport> {
    let exact = ExactDispersion::new(a, b)?;
    let std_c = leading_coefficient(p, a, b, ExpansionOrder::Standard);
    let sup_c = leading_coefficient(p, a, b, ExpansionOrder::Super);
    check_with(
        p,
        &|l| exact.error(l),
        to_f64(&std_c),
        to_f64(&sup_c),
        std_c.is_zero(),
    )
}

/// As [`coefficient_check`] for double-precision stencils.
pub fn coefficient_check_f64(p: usize, a: &[f64], b: &[f64]) -> Result<CoefficientReport> {
    let std_c = leading_coefficient(p, a, b, ExpansionOrder::Standard);
    let sup_c = leading_coefficient(p, a, b, ExpansionOrder::Super);
    check_with(
        p,
        &|l| Ok(rayleigh(a, b, l)? - l * l),
        std_c,
        sup_c,
        std_c.abs() < 1e-13,
    )
}
