//! Convergence studies over grids of degrees, meshes and mass rules.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::assembly::{assemble_1d, assemble_1d_dmm, assemble_2d, MatrixPair, DEFAULT_2D_CAP};
use crate::eigensolve::{
    energy_error, exact_spectrum, generalized_eig, generalized_eigenvalues, log_log_slope,
    relative_ev_errors, sci6, tensor_spectrum_2d, ErrorRow, ErrorTable,
};
use crate::error::{Error, Result};
use crate::quadrature::{blend, BlendPair, Family, QuadratureRule};
use crate::dmm::verify_dmm_identity;
use crate::rational::{parse_fraction, to_f64};
use crate::splines::BSplineSpace;
use crate::stencils::{fg_verify, verify_ab_identity, verify_base_identities, IdentityReport};

/// Mass rule of a study column; the stiffness is always integrated exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum MassRule {
    /// `G_{p+1}`.
    Full,
    /// `G_p`.
    Gauss,
    /// `L_{p+1}`.
    Lobatto,
    /// `R_p`.
    Radau,
    Dmm,
    /// Two-rule blend with the optimal `τ` unless overridden.
    Blend { pair: BlendPair, tau: Option<String> },
}

impl MassRule {
    pub fn label(&self, p: usize) -> String {
        match self {
            MassRule::Full => format!("G{}", p + 1),
            MassRule::Gauss => format!("G{p}"),
            MassRule::Lobatto => format!("L{}", p + 1),
            MassRule::Radau => format!("R{p}"),
            MassRule::Dmm => "DMM".into(),
            MassRule::Blend { pair, tau: None } => format!("blend-{pair}"),
            MassRule::Blend { pair, tau: Some(t) } => format!("blend-{pair}-{t}"),
        }
    }

    /// The elementwise rule for degree `p`; `None` for the optimal mass,
    /// which has its own assembly path.
    pub fn rule(&self, p: usize) -> Result<Option<QuadratureRule>> {
        Ok(Some(match self {
            MassRule::Full => Family::Gauss.rule(p + 1)?,
            MassRule::Gauss => Family::Gauss.rule(p)?,
            MassRule::Lobatto => Family::Lobatto.rule(p + 1)?,
            MassRule::Radau => Family::Radau.rule(p)?,
            MassRule::Dmm => return Ok(None),
            MassRule::Blend { pair, tau } => {
                let ((f1, m1), (f2, m2)) = pair.rules(p);
                let t = match tau {
                    Some(text) => to_f64(&parse_fraction(text)?),
                    None => pair.tau(p)?,
                };
                blend(&f1.rule(m1)?, &f2.rule(m2)?, t).into_rule()
            }
        }))
    }
}

impl FromStr for MassRule {
    type Err = Error;

    /// `full`, `gauss`, `lobatto`, `radau`, `dmm`, `blend:<pair>` or
    /// `blend:<pair>:<tau>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "full" => return Ok(MassRule::Full),
            "gauss" => return Ok(MassRule::Gauss),
            "lobatto" => return Ok(MassRule::Lobatto),
            "radau" => return Ok(MassRule::Radau),
            "dmm" => return Ok(MassRule::Dmm),
            _ => {}
        }
        let mut parts = t.splitn(3, ':');
        if parts.next().map(str::to_ascii_lowercase).as_deref() != Some("blend") {
            return Err(Error::Parse(format!(
                "unknown mass rule {t:?} (expected full|gauss|lobatto|radau|dmm|blend:<pair>[:<tau>])"
            )));
        }
        let pair: BlendPair = parts
            .next()
            .ok_or_else(|| Error::Parse("blend needs a pair".into()))?
            .parse()?;
        let tau = match parts.next() {
            Some(text) => {
                parse_fraction(text)?;
                Some(text.trim().to_string())
            }
            None => None,
        };
        Ok(MassRule::Blend { pair, tau })
    }
}

impl fmt::Display for MassRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassRule::Full => f.write_str("full"),
            MassRule::Gauss => f.write_str("gauss"),
            MassRule::Lobatto => f.write_str("lobatto"),
            MassRule::Radau => f.write_str("radau"),
            MassRule::Dmm => f.write_str("dmm"),
            MassRule::Blend { pair, tau: None } => write!(f, "blend:{pair}"),
            MassRule::Blend { pair, tau: Some(t) } => write!(f, "blend:{pair}:{t}"),
        }
    }
}

impl Serialize for MassRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MassRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn default_dimension() -> usize {
    1
}

fn default_modes() -> Vec<usize> {
    vec![1]
}

fn default_cap() -> usize {
    DEFAULT_2D_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub degrees: Vec<usize>,
    pub meshes: Vec<usize>,
    pub rules: Vec<MassRule>,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<usize>,
    /// Energy-norm eigenfunction errors (1D only).
    #[serde(default)]
    pub energy: bool,
    /// In 2D, solve the Kronecker pencil instead of summing 1D spectra.
    #[serde(default)]
    pub full_2d: bool,
    #[serde(default = "default_cap")]
    pub max_2d_size: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub json: Option<String>,
}

pub const MAX_DEGREE: usize = 10;
pub const MAX_ELEMENTS: usize = 4096;

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.degrees.is_empty() {
            return bad("degree list is empty".into());
        }
        if let Some(p) = self.degrees.iter().find(|&&p| p == 0 || p > MAX_DEGREE) {
            return bad(format!("degree {p} outside 1..={MAX_DEGREE}"));
        }
        if self.meshes.is_empty() {
            return bad("mesh list is empty".into());
        }
        if self.meshes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mesh list must be strictly increasing".into());
        }
        if let Some(n) = self.meshes.iter().find(|&&n| !(2..=MAX_ELEMENTS).contains(&n)) {
            return bad(format!("mesh size {n} outside 2..={MAX_ELEMENTS}"));
        }
        if self.rules.is_empty() {
            return bad("rule list is empty".into());
        }
        if self.modes.is_empty() || self.modes.contains(&0) {
            return bad("modes must be a nonempty list of indices >= 1".into());
        }
        if self.dimension != 1 && self.dimension != 2 {
            return bad(format!("dimension {} is not 1 or 2", self.dimension));
        }
        if self.energy && self.dimension != 1 {
            return bad("energy-norm errors are available in 1D only".into());
        }
        for &p in &self.degrees {
            for rule in &self.rules {
                if let MassRule::Blend { pair, tau: None } = rule {
                    pair.tau(p).map_err(|e| Error::Config(format!("{} at p = {p}: {e}", rule)))?;
                }
                if *rule == MassRule::Dmm && p > 3 && BlendPair::Gl.tau(p).is_err() {
                    return bad(format!("optimal mass unavailable at p = {p}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub p: usize,
    pub rule: String,
    pub mode: usize,
    pub ev_rate: Option<f64>,
    pub ef_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub p: usize,
    pub n: usize,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dimension: usize,
    pub table: ErrorTable,
    pub rates: Vec<RateRow>,
    pub failures: Vec<CellFailure>,
}

impl ConvergenceReport {
    /// Error rows followed by one rate row per `(p, rule, mode)` with `N`
    /// set to `rate`.
    pub fn to_csv(&self) -> String {
        let mut out = self.table.to_csv();
        let fmt = |v: Option<f64>| v.map(|r| format!("{r:.4}")).unwrap_or_default();
        for r in &self.rates {
            out.push_str(&format!(
                "{},rate,{},{},{},{}\n",
                r.p,
                r.rule,
                r.mode,
                fmt(r.ev_rate),
                fmt(r.ef_rate)
            ));
        }
        out
    }

    /// Pretty JSON with floats rounded to 6 significant digits.
    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("plain data serializes");
        round_floats(&mut value);
        serde_json::to_string_pretty(&value).expect("plain data serializes")
    }

    pub fn error(&self, p: usize, n: usize, rule: &str, mode: usize) -> Option<&ErrorRow> {
        self.table
            .rows
            .iter()
            .find(|r| r.p == p && r.n == n && r.rule == rule && r.mode == mode)
    }

    pub fn rate(&self, p: usize, rule: &str, mode: usize) -> Option<&RateRow> {
        self.rates
            .iter()
            .find(|r| r.p == p && r.rule == rule && r.mode == mode)
    }
}

fn round_floats(value: &mut serde_json::Value) {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("checked");
            let r: f64 = format!("{x:.5e}").parse().expect("formatted float");
            *value = serde_json::json!(r);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Assembles the 1D pair for a column.
pub fn assemble_for(space: &BSplineSpace, rule: &MassRule) -> Result<MatrixPair> {
    let p = space.degree();
    match rule.rule(p)? {
        None => assemble_1d_dmm(space),
        Some(mass) => {
            let mut pair = assemble_1d(space, &Family::Gauss.rule(p + 1)?, &mass)?;
            pair.mass_rule = rule.label(p);
            Ok(pair)
        }
    }
}

fn run_cell(config: &StudyConfig, p: usize, n: usize, rule: &MassRule) -> Result<Vec<ErrorRow>> {
    let space = BSplineSpace::new(p, n)?;
    let pair = assemble_for(&space, rule)?;
    let label = rule.label(p);
    let max_mode = *config.modes.iter().max().expect("validated");
    let exact: Vec<f64> = exact_spectrum(config.dimension, max_mode)?
        .iter()
        .map(|m| m.eigenvalue)
        .collect();
    let (values, vectors) = if config.dimension == 1 {
        if config.energy {
            let s = generalized_eig(&pair)?;
            (s.eigenvalues, s.eigenvectors)
        } else {
            (generalized_eigenvalues(&pair)?, None)
        }
    } else if config.full_2d {
        (generalized_eigenvalues(&assemble_2d(&pair, config.max_2d_size)?)?, None)
    } else {
        let size = pair.k.dim() * pair.k.dim();
        if size > config.max_2d_size {
            return Err(Error::SizeCap {
                size,
                cap: config.max_2d_size,
            });
        }
        (tensor_spectrum_2d(&generalized_eigenvalues(&pair)?), None)
    };
    if values.len() < max_mode {
        return Err(Error::DimensionMismatch(format!(
            "mode {max_mode} requested but the discrete space has {} eigenvalues",
            values.len()
        )));
    }
    let errors = relative_ev_errors(&values, &exact)?;
    config
        .modes
        .iter()
        .map(|&mode| {
            let ef = match &vectors {
                Some(v) => {
                    let col: Vec<f64> = v.column(mode - 1).iter().copied().collect();
                    Some(energy_error(&space, &col, mode)?)
                }
                None => None,
            };
            Ok(ErrorRow {
                p,
                n,
                rule: label.clone(),
                mode,
                rel_ev_error: errors[mode - 1],
                ef_energy_error: ef,
            })
        })
        .collect()
}

/// Runs every `(p, N, rule)` cell in parallel; output order follows the
/// config. Failing cells are recorded and skipped.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let cells: Vec<(usize, usize, &MassRule)> = config
        .degrees
        .iter()
        .flat_map(|&p| {
            config
                .rules
                .iter()
                .flat_map(move |r| config.meshes.iter().map(move |&n| (p, n, r)))
        })
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(p, n, r)| run_cell(config, p, n, r))
        .collect();
    let mut table = ErrorTable::default();
    let mut failures = Vec::new();
    for (&(p, n, r), res) in cells.iter().zip(results) {
        match res {
            Ok(rows) => table.rows.extend(rows),
            Err(e) => failures.push(CellFailure {
                p,
                n,
                rule: r.label(p),
                message: e.to_string(),
            }),
        }
    }
    let mut rates = Vec::new();
    for &p in &config.degrees {
        for rule in &config.rules {
            let label = rule.label(p);
            for &mode in &config.modes {
                let rows: Vec<&ErrorRow> = table
                    .rows
                    .iter()
                    .filter(|r| r.p == p && r.rule == label && r.mode == mode)
                    .collect();
                let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
                let ev: Vec<f64> = rows.iter().map(|r| r.rel_ev_error).collect();
                let ef: Vec<f64> = rows.iter().filter_map(|r| r.ef_energy_error).collect();
                rates.push(RateRow {
                    p,
                    rule: label.clone(),
                    mode,
                    ev_rate: log_log_slope(&ns, &ev).map(|s| -s),
                    ef_rate: if ef.len() == ns.len() {
                        log_log_slope(&ns, &ef).map(|s| -s)
                    } else {
                        None
                    },
                });
            }
        }
    }
    Ok(ConvergenceReport {
        dimension: config.dimension,
        table,
        rates,
        failures,
    })
}

/// Every exact identity for `1 <= p <= p_max`, with `m <= m_max` where an
/// identity is indexed by `m`.
pub fn verify_suite(p_max: usize, m_max: usize) -> Result<IdentityReport> {
    if p_max == 0 {
        return Err(Error::InvalidDegree {
            p: 0,
            requirement: "p_max >= 1",
        });
    }
    let per_degree: Vec<Result<IdentityReport>> = (1..=p_max)
        .into_par_iter()
        .map(|p| {
            let mut r = verify_base_identities(p)?;
            if p >= 2 {
                r.extend(verify_ab_identity(p)?);
            }
            r.extend(verify_dmm_identity(p)?);
            Ok(r)
        })
        .collect();
    let mut report = IdentityReport::default();
    for r in per_degree {
        report.extend(r?);
    }
    if p_max >= 2 {
        report.extend(fg_verify(p_max, m_max)?);
    }
    Ok(report)
}

/// Six significant digits in exponent form.
pub fn format_error(x: f64) -> String {
    sci6(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
degrees = [2]
meshes = [8, 16]
rules = ["full", "radau", "dmm", "blend:gl", "blend:gg:2"]
modes = [1, 2]
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = StudyConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.dimension, 1);
        assert_eq!(c.rules.len(), 5);
        assert_eq!(
            c.rules[4],
            MassRule::Blend {
                pair: BlendPair::Gg,
                tau: Some("2".into())
            }
        );
        assert_eq!(StudyConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "degrees = [2]\nmeshes = []\nrules = [\"full\"]",
            "degrees = [2]\nmeshes = [16, 8]\nrules = [\"full\"]",
            "degrees = []\nmeshes = [8]\nrules = [\"full\"]",
            "degrees = [0]\nmeshes = [8]\nrules = [\"full\"]",
            "degrees = [2]\nmeshes = [8]\nrules = [\"nope\"]",
            "degrees = [2]\nmeshes = [8]\nrules = [\"full\"]\ndimension = 3",
            "degrees = [1]\nmeshes = [8]\nrules = [\"blend:lr\"]",
            "degrees = [2]\nmeshes = [8]\nrules = [\"blend:gl:1/0\"]",
            "degrees = [2]\nmeshes = [8]\nrules = [\"full\"]\nmodes = [0]",
            "degrees = [2]\nmeshes = [8]\nrules = [\"full\"]\nbogus = 1",
            "degrees = [2]\nmeshes = [8]\nrules = [\"full\"]\ndimension = 2\nenergy = true",
        ] {
            assert!(matches!(StudyConfig::from_toml(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn small_study_runs_and_is_deterministic() {
        let c = StudyConfig::from_toml(SAMPLE).unwrap();
        let a = run_study(&c).unwrap();
        let b = run_study(&c).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert_eq!(a.table.rows.len(), 2 * 5 * 2);
        // the optimal blend and the optimal mass coincide
        let d = a.error(2, 16, "DMM", 1).unwrap().rel_ev_error;
        let g = a.error(2, 16, "blend-gl", 1).unwrap().rel_ev_error;
        assert!((d - g).abs() < 1e-12);
        let gg = a.error(2, 16, "blend-gg-2", 1).unwrap().rel_ev_error;
        assert!((d - gg).abs() < 1e-12);
        assert!(a.to_csv().contains("2,rate,G3,1,"));
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        let x = json["table"]["rows"][0]["rel_ev_error"].as_f64().unwrap();
        assert_eq!(format!("{x:.5e}").parse::<f64>().unwrap(), x);
    }

    #[test]
    fn failing_cells_are_recorded() {
        let c = StudyConfig::from_toml("degrees = [1]\nmeshes = [2, 4]\nrules = [\"full\"]\nmodes = [3]").unwrap();
        let r = run_study(&c).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].n, 2);
        assert_eq!(r.table.rows.len(), 1);
    }

    #[test]
    fn identity_suite_small() {
        let r = verify_suite(4, 4).unwrap();
        assert!(r.passed());
        assert!(r.checks.len() > 10);
        assert!(verify_suite(0, 4).is_err());
        assert!(verify_suite(1, 1).unwrap().passed());
    }

    #[test]
    fn mass_rule_strings() {
        for s in ["full", "gauss", "lobatto", "radau", "dmm", "blend:pr", "blend:lr:22/7"] {
            assert_eq!(s.parse::<MassRule>().unwrap().to_string(), s);
        }
        assert!("blend".parse::<MassRule>().is_err());
        assert!("blend:zz".parse::<MassRule>().is_err());
        assert_eq!(MassRule::Radau.label(3), "R3");
    }
}
