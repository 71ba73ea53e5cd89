use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use antidist::asymptotics::{self, RowMode, ScanMode, ScanReport};
use antidist::classical::{self, ClassicalEnsemble};
use antidist::ensemble_file::{Ensemble, EnsembleFile};
use antidist::quantum::{self, BoundsOptions, QuantumEnsemble};
use antidist::{Error, ExtendedReal, HermitianMatrix};
use clap::{Parser, Subcommand, ValueEnum};

const SIG_DIGITS: usize = 9;
const SANDWICH_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "antidist", version, about = "Antidistinguishability errors and error exponents")]
struct Cli {
    /// Print exponents in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multivariate Chernoff divergence of a classical ensemble.
    ClassicalExponent { file: PathBuf },
    /// Lower and upper bounds on the quantum error exponent.
    QuantumBounds {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimal single-copy exclusion error and measurement.
    OneShot { file: PathBuf },
    /// n-copy errors for n = 1..=N as CSV.
    Scan {
        file: PathBuf,
        #[arg(long)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

enum Failure {
    Lib(Error),
    Input(String),
    Inconsistent(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Inconsistent(_) => 4,
            Failure::Lib(e) => match e {
                Error::ResourceCap { .. } => 3,
                Error::NonConvergence { .. } => 4,
                _ => 2,
            },
        }
    }
}

/// `x` with nine significant digits; fixed notation for moderate magnitudes.
fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = SIG_DIGITS - 1)
    }
}

struct Units {
    bits: bool,
}

impl Units {
    fn rate(&self, v: ExtendedReal) -> String {
        match v {
            ExtendedReal::Infinite => "inf".into(),
            ExtendedReal::Finite(x) if self.bits => num(x / std::f64::consts::LN_2),
            ExtendedReal::Finite(x) => num(x),
        }
    }

    fn name(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }
}

fn load(path: &Path) -> Result<EnsembleFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    EnsembleFile::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn require_classical(file: EnsembleFile, cmd: &str) -> Result<ClassicalEnsemble, Failure> {
    match file.ensemble {
        Ensemble::Classical(e) => Ok(e),
        Ensemble::Quantum(_) => Err(Failure::Input(format!("{cmd} needs a classical ensemble file"))),
    }
}

fn as_quantum(file: EnsembleFile) -> Result<QuantumEnsemble, Failure> {
    match file.ensemble {
        Ensemble::Quantum(e) => Ok(e),
        Ensemble::Classical(e) => Ok(QuantumEnsemble::from_classical(&e)?),
    }
}

fn classical_exponent(path: &Path, u: &Units) -> Result<String, Failure> {
    let e = require_classical(load(path)?, "classical-exponent")?;
    let res = classical::multivariate_chernoff(e.dists())?;
    let pairs = classical::pairwise_matrix(e.dists())?;
    let mut out = String::new();
    writeln!(out, "xi_cl ({}): {}", u.name(), u.rate(res.value)).unwrap();
    let s: Vec<String> = res.minimizer.coords().iter().map(|&x| num(x)).collect();
    writeln!(out, "minimizer: {}", s.join(" ")).unwrap();
    let mass: Vec<String> = res.common_support_mass.iter().map(|&x| num(x)).collect();
    writeln!(out, "common_support_mass: {}", mass.join(" ")).unwrap();
    writeln!(out, "pairwise chernoff ({}):", u.name()).unwrap();
    for row in &pairs {
        let cells: Vec<String> = row.iter().map(|&v| u.rate(v)).collect();
        writeln!(out, "  {}", cells.join(" ")).unwrap();
    }
    Ok(out)
}

fn quantum_bounds(path: &Path, restarts: usize, seed: u64, u: &Units) -> Result<String, Failure> {
    let e = as_quantum(load(path)?)?;
    let b = quantum::quantum_bounds(&e, &BoundsOptions { restarts, seed })?;
    for (name, lower) in [("lower_pairwise", b.lower_pairwise), ("lower_measured", b.lower_measured)] {
        if !lower.le_within(&b.upper_neg_ln_kappa, SANDWICH_TOL) {
            return Err(Failure::Inconsistent(format!(
                "{name} = {lower} exceeds upper bound {}",
                b.upper_neg_ln_kappa
            )));
        }
    }
    let mut out = String::new();
    writeln!(out, "units: {}", u.name()).unwrap();
    writeln!(out, "lower_pairwise: {}", u.rate(b.lower_pairwise)).unwrap();
    writeln!(out, "lower_measured: {}", u.rate(b.lower_measured)).unwrap();
    writeln!(out, "upper_neg_ln_kappa: {}", u.rate(b.upper_neg_ln_kappa)).unwrap();
    match b.log_euclidean {
        Some(v) => writeln!(out, "log_euclidean: {}", u.rate(v.into())).unwrap(),
        None => writeln!(out, "log_euclidean: n/a (rank-deficient state)").unwrap(),
    }
    if let Some(v) = b.commuting_exact {
        writeln!(out, "commuting_exact: {}", u.rate(v)).unwrap();
    }
    writeln!(out, "one_shot_error: {}", num(quantum::one_shot_error(&e)?.error)).unwrap();
    Ok(out)
}

fn dump_matrix(out: &mut String, m: &HermitianMatrix) {
    let a = m.matrix();
    for j in 0..a.nrows() {
        let cells: Vec<String> = (0..a.ncols())
            .map(|k| format!("[{}, {}]", num(a[(j, k)].re), num(a[(j, k)].im)))
            .collect();
        writeln!(out, "    {}", cells.join("  ")).unwrap();
    }
}

fn one_shot(path: &Path) -> Result<String, Failure> {
    let file = load(path)?;
    let labels = file.labels.clone();
    let label = |i: usize| labels.as_ref().map_or_else(|| i.to_string(), |l| l[i].clone());
    let mut out = String::new();
    match file.ensemble {
        Ensemble::Classical(e) => {
            writeln!(out, "error: {}", num(classical::min_likelihood_error(&e))).unwrap();
            writeln!(out, "decision (outcome -> excluded member):").unwrap();
            for w in 0..e.sample_size() {
                writeln!(out, "  {w} -> {}", label(classical::min_likelihood_decision(&e, w))).unwrap();
            }
        }
        Ensemble::Quantum(e) => {
            let r = quantum::one_shot_error(&e)?;
            writeln!(out, "error: {}", num(r.error)).unwrap();
            writeln!(out, "gap: {}", num(r.gap)).unwrap();
            writeln!(out, "povm:").unwrap();
            for (i, m) in r.povm.elements().iter().enumerate() {
                writeln!(out, "  M[{}]:", label(i)).unwrap();
                dump_matrix(&mut out, m);
            }
        }
    }
    Ok(out)
}

fn csv(rep: &ScanReport, u: &Units) -> String {
    let mut out = String::from("n,error,neg_log_rate,mode,std_err\n");
    for r in &rep.rows {
        let mode = match r.mode {
            RowMode::Exact => "exact",
            RowMode::Sdp => "sdp",
            RowMode::MonteCarlo => "monte_carlo",
        };
        let se = r.std_err.map(num).unwrap_or_default();
        writeln!(out, "{},{},{},{mode},{se}", r.n, num(r.error), u.rate(r.neg_log_rate)).unwrap();
    }
    out
}

fn scan(path: &Path, n_max: usize, mode: Mode, trials: u64, seed: u64, u: &Units) -> Result<String, Failure> {
    let rep = match load(path)?.ensemble {
        Ensemble::Classical(e) => {
            let m = match mode {
                Mode::Exact => ScanMode::Exact,
                Mode::Mc => ScanMode::MonteCarlo { trials, seed },
            };
            asymptotics::classical_scan(&e, n_max, m)?
        }
        Ensemble::Quantum(e) => {
            if matches!(mode, Mode::Mc) {
                return Err(Failure::Input("--mode mc applies to classical ensembles only".into()));
            }
            asymptotics::quantum_scan(&e, n_max, &BoundsOptions { seed, ..Default::default() })?
        }
    };
    Ok(csv(&rep, u))
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("ANTIDIST_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Input(format!("ANTIDIST_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<String, Failure> {
    init_threads()?;
    let u = Units { bits: cli.bits };
    match cli.command {
        Command::ClassicalExponent { file } => classical_exponent(&file, &u),
        Command::QuantumBounds { file, restarts, seed } => quantum_bounds(&file, restarts, seed, &u),
        Command::OneShot { file } => one_shot(&file),
        Command::Scan { file, n_max, mode, trials, seed } => scan(&file, n_max, mode, trials, seed, &u),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let is_scan = matches!(cli.command, Command::Scan { .. });
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let code = f.exit_code();
            match &f {
                Failure::Input(m) | Failure::Inconsistent(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            if code == 3 && is_scan {
                eprintln!("hint: lower --n-max or use --mode mc");
            }
            ExitCode::from(code)
        }
    }
}
