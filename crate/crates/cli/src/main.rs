use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmmass::assembly::SymBandMatrix;
use dmmass::dispersion::{fit_order, log_space, DispersionCurve, DEFAULT_WINDOW};
use dmmass::dmm::dmm_stencil;
use dmmass::quadrature::{dmm_rule, exact_rule_stencils, BlendPair, Family, NodeSign, QuadratureRule};
use dmmass::rational::{format_fraction, to_f64};
use dmmass::splines::BSplineSpace;
use dmmass::stencils::{mass_stencil, sign_pattern_violations, stiffness_stencil, Stencil};
use dmmass::study::{assemble_for, run_study, verify_suite, MassRule, StudyConfig};
use dmmass::{Error, Rational};

#[derive(Parser)]
#[command(name = "dmmass", version, about = "Dispersion-minimized mass and blended quadratures for B-spline eigenproblems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact identity suite.
    Verify {
        #[arg(long, default_value_t = 4)]
        p_max: usize,
        /// Largest `m` for identities indexed by `m`; defaults to `p_max`.
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// 1D eigenvalue convergence study.
    #[command(name = "study-1d")]
    Study1d(StudyArgs),
    /// 2D eigenvalue convergence study on the unit square.
    #[command(name = "study-2d")]
    Study2d(StudyArgs),
    /// Discrete dispersion error as `(lambda, ratio, error)` CSV.
    Dispersion {
        #[arg(short)]
        p: usize,
        #[arg(long, value_enum, default_value_t = MassChoice::Exact)]
        mass: MassChoice,
        #[arg(long, default_value_t = 1e-2)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 41)]
        count: usize,
        /// Print the fitted order over the default window to stderr.
        #[arg(long)]
        fit: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Stiffness and mass stencils as exact fractions and decimals.
    Stencil {
        #[arg(short)]
        p: usize,
        #[arg(long, conflicts_with = "rule")]
        dmm: bool,
        /// Mass stencil of the `G_p`, `L_{p+1}` or `R_p` rule.
        #[arg(long, value_enum)]
        rule: Option<RuleChoice>,
    },
    /// Optimal blending parameter as an exact fraction.
    Tau {
        #[arg(short)]
        p: usize,
        #[arg(long)]
        pair: String,
    },
    /// Nodes and weights of the rules used for degree `p`, as CSV.
    Rules {
        #[arg(short)]
        p: usize,
    },
    /// Assembled stiffness and mass in coordinate format.
    Matrix {
        #[arg(short)]
        p: usize,
        #[arg(short = 'n', long = "elements")]
        n: usize,
        #[arg(long, default_value = "full")]
        rule: String,
        #[arg(long)]
        stiffness: PathBuf,
        #[arg(long)]
        mass: PathBuf,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study file; flags below override its fields.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    #[arg(long)]
    energy: bool,
    #[arg(long)]
    full_2d: bool,
    #[arg(long)]
    max_2d_size: Option<usize>,
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    json: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MassChoice {
    Exact,
    Dmm,
    #[value(name = "G")]
    G,
    #[value(name = "L")]
    L,
    #[value(name = "R")]
    R,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleChoice {
    #[value(name = "G")]
    G,
    #[value(name = "L")]
    L,
    #[value(name = "R")]
    R,
}

enum Failure {
    Verification(String),
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::InvalidDegree { .. } | Error::InvalidWaveNumber(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Verify { p_max, m_max, json } => cmd_verify(p_max, m_max.unwrap_or(p_max), json),
        Command::Study1d(args) => cmd_study(args, 1),
        Command::Study2d(args) => cmd_study(args, 2),
        Command::Dispersion {
            p,
            mass,
            lo,
            hi,
            count,
            fit,
            output,
        } => cmd_dispersion(p, mass, (lo, hi, count), fit, output),
        Command::Stencil { p, dmm, rule } => cmd_stencil(p, dmm, rule),
        Command::Tau { p, pair } => cmd_tau(p, &pair),
        Command::Rules { p } => cmd_rules(p),
        Command::Matrix {
            p,
            n,
            rule,
            stiffness,
            mass,
        } => cmd_matrix(p, n, &rule, stiffness, mass),
    }
}

fn write_file(path: &str, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("writing {path}: {e}")))
}

fn cmd_verify(p_max: usize, m_max: usize, json: bool) -> Outcome {
    if p_max == 0 {
        return Err(Failure::Config("--p-max must be at least 1".into()));
    }
    let report = verify_suite(p_max, m_max)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("plain data serializes"));
    } else {
        print!("{}", report.to_table());
    }
    for p in 1..=p_max {
        for (kind, k) in sign_pattern_violations(p)? {
            eprintln!("note: p = {p}: {kind:?} entry {k} breaks the alternating sign pattern");
        }
    }
    let failed = report.failures().count();
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {} checks", report.checks.len())));
    }
    eprintln!("{} checks passed", report.checks.len());
    Ok(())
}

fn study_config(args: StudyArgs, dimension: usize) -> Result<StudyConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
            let mut value: toml::Table =
                toml::from_str(&text).map_err(|e| Failure::Config(e.message().to_string()))?;
            value.insert("dimension".into(), toml::Value::Integer(dimension as i64));
            for key in ["degrees", "meshes", "rules"] {
                value.entry(key).or_insert_with(|| toml::Value::Array(Vec::new()));
            }
            value
                .try_into::<StudyConfig>()
                .map_err(|e| Failure::Config(e.message().to_string()))?
        }
        None => StudyConfig {
            degrees: Vec::new(),
            meshes: Vec::new(),
            rules: Vec::new(),
            dimension,
            modes: vec![1],
            energy: false,
            full_2d: false,
            max_2d_size: dmmass::assembly::DEFAULT_2D_CAP,
            output: Default::default(),
        },
    };
    if let Some(d) = args.degrees {
        config.degrees = d;
    }
    if let Some(m) = args.meshes {
        config.meshes = m;
    }
    if let Some(r) = args.rules {
        config.rules = r.iter().map(|s| s.parse()).collect::<dmmass::Result<Vec<MassRule>>>()?;
    }
    if let Some(m) = args.modes {
        config.modes = m;
    }
    config.energy |= args.energy;
    config.full_2d |= args.full_2d;
    if let Some(c) = args.max_2d_size {
        config.max_2d_size = c;
    }
    if args.csv.is_some() {
        config.output.csv = args.csv;
    }
    if args.json.is_some() {
        config.output.json = args.json;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_study(args: StudyArgs, dimension: usize) -> Outcome {
    let config = study_config(args, dimension)?;
    let report = run_study(&config)?;
    let csv = report.to_csv();
    match &config.output.csv {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &config.output.json {
        write_file(path, &report.to_json())?;
    }
    for f in &report.failures {
        eprintln!("cell p={} N={} {}: {}", f.p, f.n, f.rule, f.message);
    }
    Ok(())
}

fn mass_for(p: usize, mass: MassChoice) -> dmmass::Result<Vec<Rational>> {
    Ok(match mass {
        MassChoice::Exact => mass_stencil(p)?.values,
        MassChoice::Dmm => dmm_stencil(p)?.values,
        MassChoice::G => exact_rule_stencils(p, Family::Gauss, p)?.1.values,
        MassChoice::L => exact_rule_stencils(p, Family::Lobatto, p + 1)?.1.values,
        MassChoice::R => exact_rule_stencils(p, Family::Radau, p)?.1.values,
    })
}

fn cmd_dispersion(
    p: usize,
    mass: MassChoice,
    (lo, hi, count): (f64, f64, usize),
    fit: bool,
    output: Option<PathBuf>,
) -> Outcome {
    if !(lo > 0.0 && lo <= hi && hi <= std::f64::consts::PI) || count == 0 {
        return Err(Failure::Config("need 0 < lo <= hi <= pi and count >= 1".into()));
    }
    let a = stiffness_stencil(p)?.values;
    let b = mass_for(p, mass)?;
    let curve = DispersionCurve::sample_exact(&a, &b, &log_space(lo, hi, count))?;
    let csv = curve.to_csv();
    match output {
        Some(path) => fs::write(&path, csv).map_err(|e| Failure::Runtime(e.to_string()))?,
        None => print!("{csv}"),
    }
    if !curve.stopping_band.is_empty() {
        eprintln!("stopping band at {} wave numbers", curve.stopping_band.len());
    }
    if fit {
        let window = log_space(DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, 21);
        let fine = DispersionCurve::sample_exact(&a, &b, &window)?;
        eprintln!("order {:.3}", fit_order(&fine, DEFAULT_WINDOW)?);
    }
    Ok(())
}

fn print_stencil(name: &str, s: &Stencil) {
    println!("# {name}");
    println!("k,fraction,decimal");
    for (k, v) in s.values.iter().enumerate() {
        println!("{k},{},{:.16e}", format_fraction(v), to_f64(v));
    }
}

fn cmd_stencil(p: usize, dmm: bool, rule: Option<RuleChoice>) -> Outcome {
    let a = stiffness_stencil(p)?;
    let (name, b) = if dmm {
        ("dmm mass".to_string(), dmm_stencil(p)?)
    } else if let Some(r) = rule {
        let (family, m) = match r {
            RuleChoice::G => (Family::Gauss, p),
            RuleChoice::L => (Family::Lobatto, p + 1),
            RuleChoice::R => (Family::Radau, p),
        };
        (
            format!("{}{m} mass", family.letter()),
            exact_rule_stencils(p, family, m)?.1,
        )
    } else {
        ("mass".to_string(), mass_stencil(p)?)
    };
    print_stencil("stiffness", &a);
    print_stencil(&name, &b);
    Ok(())
}

fn cmd_tau(p: usize, pair: &str) -> Outcome {
    let pair: BlendPair = pair.parse()?;
    println!("{}", format_fraction(&pair.tau_exact(p)?));
    Ok(())
}

fn cmd_rules(p: usize) -> Outcome {
    if p == 0 {
        return Err(Failure::Config("p must be at least 1".into()));
    }
    let mut rules: Vec<QuadratureRule> = vec![
        Family::Gauss.rule(p + 1)?,
        Family::Gauss.rule(p)?,
        Family::Lobatto.rule(p + 1)?,
        Family::Radau.rule(p)?,
    ];
    if p <= 3 {
        rules.push(dmm_rule(p, NodeSign::Plus)?);
        rules.push(dmm_rule(p, NodeSign::Minus)?);
    }
    println!("rule,index,node,weight");
    for r in &rules {
        for (i, (x, w)) in r.nodes.iter().zip(&r.weights).enumerate() {
            println!("{},{i},{x:.16e},{w:.16e}", r.label);
        }
    }
    Ok(())
}

fn cmd_matrix(p: usize, n: usize, rule: &str, stiffness: PathBuf, mass: PathBuf) -> Outcome {
    let rule: MassRule = rule.parse()?;
    let space = BSplineSpace::new(p, n)?;
    let pair = assemble_for(&space, &rule)?;
    let save = |path: &PathBuf, m: &SymBandMatrix| {
        fs::write(path, m.to_coordinate()).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
    };
    save(&stiffness, &pair.k)?;
    save(&mass, &pair.m)?;
    Ok(())
}
