#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use estate::bifurcation::{self, BifurcationError, Scenario, TABLE_HEADER};
use estate::continuation::{
    asymptotic_compare, continue_branch, BranchFile, ContinuationConfig, ContinuationError, PointRecord,
};
use estate::format::{csv, to_json_line};
use estate::simulator::{evolve, frame_csv, traveling_error, Filter, SimConfig, SimError};
use estate::spectral::FullState;
use estate::StripParamsF64;

#[derive(Parser)]
#[command(name = "estate", version, about = "Traveling electron-layer states: bifurcation tables, branches, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical values and pitchfork data for a range of modes, as CSV.
    BifPoints {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        m_min: usize,
        #[arg(long, default_value_t = 10)]
        m_max: usize,
    },
    /// Continue a branch from a bifurcation point and write it as JSON lines.
    Branch {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        m: usize,
        /// Velocity scenario only: which critical speed to start from.
        #[arg(long, value_enum)]
        sign: Option<Sign>,
        #[arg(long, default_value_t = 64)]
        modes: usize,
        #[arg(long, default_value_t = 1e-2)]
        ds: f64,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the small-amplitude points of a branch file with the local expansion.
    Asymptotics {
        #[arg(long)]
        branch: PathBuf,
    },
    /// Time-integrate the boundary dynamics and report conservation monitors as JSON.
    Evolve {
        /// Strip bounds; taken from the record when --branch is given.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// Start from a branch record instead of a single-mode perturbation.
        #[arg(long, requires = "index")]
        branch: Option<PathBuf>,
        #[arg(long)]
        index: Option<usize>,
        /// Perturbed Fourier mode of r₊ when no branch is given.
        #[arg(long, default_value_t = 1)]
        mode: usize,
        #[arg(long, default_value_t = 1e-3, allow_hyphen_values = true)]
        amplitude: f64,
        #[arg(long, default_value_t = 64)]
        n_modes: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Report leakage onto modes not divisible by this.
        #[arg(long, default_value_t = 1)]
        symmetry: usize,
        /// Exponential filter strength; off unless given.
        #[arg(long, requires = "filter_order")]
        filter_alpha: Option<f64>,
        #[arg(long)]
        filter_order: Option<u32>,
        /// Write the final frame as CSV samples.
        #[arg(long)]
        frame_csv: Option<PathBuf>,
    },
    /// Evolve a branch record and measure its deviation from rigid translation.
    VerifyTravel {
        #[arg(long)]
        branch: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Fourier modes for the simulation; defaults to the record's resolution.
        #[arg(long)]
        n_modes: Option<usize>,
    },
    /// Analytic norms of every point in a branch file, as CSV.
    Norms {
        #[arg(long)]
        branch: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Velocity,
    UpperB,
    LowerA,
    Symmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sign {
    Plus,
    Minus,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    scenario: Kind,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

fn runtime(msg: impl Into<String>) -> Failure {
    Failure { code: 4, msg: msg.into() }
}

impl From<BifurcationError> for Failure {
    fn from(e: BifurcationError) -> Self {
        invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // a closed downstream pipe (`estate ... | head`) is not a failure
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure { code: 0, msg: String::new() };
        }
        runtime(e.to_string())
    }
}

fn emit(line: &str) -> Outcome {
    writeln!(io::stdout().lock(), "{line}")?;
    Ok(())
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Guard { .. } => runtime(e.to_string()),
            _ => invalid(e.to_string()),
        }
    }
}

impl From<ContinuationError> for Failure {
    fn from(e: ContinuationError) -> Self {
        let code = match e {
            ContinuationError::InvalidConfig(_)
            | ContinuationError::Bifurcation(_)
            | ContinuationError::Model(_)
            | ContinuationError::Format(_) => 2,
            ContinuationError::Init { .. } | ContinuationError::Singular { .. } | ContinuationError::NotConverged { .. } => 3,
            _ => 4,
        };
        Failure { code, msg: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

impl ScenarioArgs {
    fn resolve(&self, sign: Option<Sign>) -> Result<Vec<Scenario<f64>>, Failure> {
        let (need, name): (&[(&str, Option<f64>)], &str) = match self.scenario {
            Kind::Velocity => (&[("a", self.a), ("b", self.b)], "velocity"),
            Kind::UpperB => (&[("a", self.a), ("c", self.c)], "upper-b"),
            Kind::LowerA => (&[("b", self.b), ("c", self.c)], "lower-a"),
            Kind::Symmetric => (&[("c", self.c)], "symmetric"),
        };
        for (flag, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            let wanted = need.iter().any(|(f, _)| *f == flag);
            match (wanted, v) {
                (true, None) => return Err(invalid(format!("--scenario {name} requires --{flag}"))),
                (false, Some(_)) => return Err(invalid(format!("--{flag} is not a fixed parameter of --scenario {name}"))),
                _ => {}
            }
        }
        let (a, b, c) = (self.a.unwrap_or(0.0), self.b.unwrap_or(0.0), self.c.unwrap_or(0.0));
        let scenarios = match self.scenario {
            Kind::Velocity => match sign {
                Some(Sign::Plus) => vec![Scenario::VelocityPlus { a, b }],
                Some(Sign::Minus) => vec![Scenario::VelocityMinus { a, b }],
                None => vec![Scenario::VelocityPlus { a, b }, Scenario::VelocityMinus { a, b }],
            },
            Kind::UpperB => vec![Scenario::UpperBoundaryB { a, c }],
            Kind::LowerA => vec![Scenario::LowerBoundaryA { b, c }],
            Kind::Symmetric => vec![Scenario::SymmetricArea { c }],
        };
        if sign.is_some() && !matches!(self.scenario, Kind::Velocity) {
            return Err(invalid("--sign only applies to --scenario velocity"));
        }
        for s in &scenarios {
            s.validate()?;
        }
        Ok(scenarios)
    }
}

fn empty_reason(s: &Scenario<f64>) -> String {
    match *s {
        Scenario::UpperBoundaryB { a, c } => format!("a - c = {} is at least 1/(2*pi)", csv(a - c)),
        Scenario::LowerBoundaryA { b, c } => format!("c - b = {} is at least 1/(2*pi)", csv(c - b)),
        _ => "the admissible set is empty".into(),
    }
}

fn bif_points(args: &ScenarioArgs, m_min: usize, m_max: usize) -> Outcome {
    if m_min == 0 || m_min > m_max {
        return Err(invalid(format!("need 1 <= --m-min <= --m-max, got {m_min}..{m_max}")));
    }
    let scenarios = args.resolve(None)?;
    let mut rows = Vec::new();
    for s in &scenarios {
        let modes = s.admissible_modes();
        if modes.is_empty() {
            eprintln!("note: no bifurcation point exists for {}: {}", s.kind(), empty_reason(s));
        } else if modes.within(m_min, m_max).is_empty() {
            eprintln!("note: no admissible mode of {} in {m_min}..={m_max} (admissible: {modes})", s.kind());
        }
        rows.extend(bifurcation::table(*s, m_min, m_max)?);
    }
    rows.sort_by_key(|p| p.m);
    let mut out = io::stdout().lock();
    writeln!(out, "{TABLE_HEADER}")?;
    for p in rows {
        writeln!(out, "{}", p.csv_row())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn branch(args: &ScenarioArgs, m: usize, sign: Option<Sign>, modes: usize, ds: f64, steps: usize, out: &PathBuf) -> Outcome {
    if matches!(args.scenario, Kind::Velocity) && sign.is_none() {
        return Err(invalid("--scenario velocity requires --sign plus|minus"));
    }
    let scenario = args.resolve(sign)?[0];
    let point = bifurcation::build_point(scenario, m)?;
    let cfg = ContinuationConfig { n_harmonics: modes, ds0: ds, max_steps: steps, ..Default::default() };
    cfg.validate()?;
    let br = continue_branch(&point, &cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    br.write_jsonl(&mut w)?;
    w.flush()?;
    let also: Vec<String> = br.also_near.iter().map(|t| t.to_string()).collect();
    emit(&format!(
        "termination={} negative={} positive={} also_near=[{}] points={} warnings={}",
        br.termination,
        br.negative,
        br.positive,
        also.join(","),
        br.points.len(),
        br.warnings.len()
    ))
}

fn read_branch(path: &PathBuf) -> Result<BranchFile, Failure> {
    let f = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(BranchFile::read(BufReader::new(f))?)
}

fn record(file: &BranchFile, index: usize) -> Result<&PointRecord, Failure> {
    file.points
        .get(index)
        .ok_or_else(|| invalid(format!("record {index} does not exist ({} points)", file.points.len())))
}

fn asymptotics(path: &PathBuf) -> Outcome {
    let file = read_branch(path)?;
    let cfg = ContinuationConfig::<f64>::default();
    let bif = bifurcation::build_point(file.scenario(), file.m())?;
    let points = file.points.iter().map(|r| r.to_point(&cfg)).collect::<Result<Vec<_>, _>>()?;
    let report = asymptotic_compare(&points, &bif, &cfg.s_grid).map_err(|e| match e {
        ContinuationError::InsufficientPoints { .. } => runtime(e.to_string()),
        other => Failure::from(other),
    })?;
    emit(&to_json_line(&report).map_err(|e| runtime(e.to_string()))?)?;
    Ok(())
}

fn checked_params(rec: &PointRecord) -> Result<StripParamsF64, Failure> {
    StripParamsF64::new(rec.a, rec.b, rec.c).map_err(|e| invalid(format!("corrupted record: {e}")))
}

fn verify_travel(path: &PathBuf, index: usize, t_final: f64, dt: f64, tol: f64, n_modes: Option<usize>) -> Outcome {
    if !(tol > 0.0) {
        return Err(invalid("--tol must be positive"));
    }
    let file = read_branch(path)?;
    let rec = record(&file, index)?;
    let params = checked_params(rec)?;
    let profiles = rec.profiles()?;
    let grid = profiles.grid();
    let cfg = SimConfig::new(n_modes.unwrap_or(grid.n() * grid.m()), dt, t_final);
    let traj = traveling_error(&profiles, &params, &cfg)?;
    let error = traj.report.traveling_error.unwrap_or(f64::NAN);
    let pass = error <= tol;
    let report = serde_json::json!({
        "index": index,
        "s": rec.s,
        "a": params.a,
        "b": params.b,
        "c": params.c,
        "n_modes": cfg.n_modes,
        "dt": dt,
        "t_final": t_final,
        "error": error,
        "tol": tol,
        "pass": pass,
    });
    emit(&to_json_line(&report).map_err(|e| runtime(e.to_string()))?)?;
    if pass {
        Ok(())
    } else {
        Err(runtime(format!("traveling error {error:e} exceeds tolerance {tol:e}")))
    }
}

fn norms(path: &PathBuf, s: f64, sigma: f64) -> Outcome {
    if !s.is_finite() || !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid("--s must be finite and --sigma finite and non-negative"));
    }
    let file = read_branch(path)?;
    let mut out = io::stdout().lock();
    writeln!(out, "index,s,lambda,norm_plus,norm_minus,norm")?;
    for (i, rec) in file.points.iter().enumerate() {
        let p = rec.profiles()?;
        let (np, nm) = (p.plus.norm_s_sigma(s, sigma), p.minus.norm_s_sigma(s, sigma));
        writeln!(out, "{i},{},{},{},{},{}", csv(rec.s), csv(rec.lambda), csv(np), csv(nm), csv(np + nm))?;
    }
    Ok(())
}

struct EvolveArgs {
    a: Option<f64>,
    b: Option<f64>,
    branch: Option<PathBuf>,
    index: Option<usize>,
    mode: usize,
    amplitude: f64,
    cfg: SimConfig<f64>,
    frame_csv: Option<PathBuf>,
}

fn run_evolve(args: EvolveArgs) -> Outcome {
    let cfg = args.cfg;
    let (a, b, initial) = match &args.branch {
        Some(path) => {
            if args.a.is_some() || args.b.is_some() {
                return Err(invalid("--a/--b are taken from the branch record; do not pass them with --branch"));
            }
            let file = read_branch(path)?;
            let rec = record(&file, args.index.unwrap_or(0))?;
            let params = checked_params(rec)?;
            let profiles = rec.profiles()?;
            let grid = profiles.grid();
            if cfg.n_modes < grid.n() * grid.m() {
                return Err(invalid(format!("--n-modes must be at least {}", grid.n() * grid.m())));
            }
            (params.a, params.b, FullState::from_profiles(&profiles, cfg.n_modes))
        }
        None => {
            let (Some(a), Some(b)) = (args.a, args.b) else {
                return Err(invalid("--a and --b are required without --branch"));
            };
            if args.mode == 0 || args.mode > cfg.n_modes {
                return Err(invalid(format!("--mode must lie in 1..={}", cfg.n_modes)));
            }
            let mut s = FullState::zeros(cfg.n_modes);
            s.plus.cos[args.mode - 1] = args.amplitude;
            (a, b, s)
        }
    };
    let traj = evolve(a, b, &initial, &cfg)?;
    if let Some(path) = &args.frame_csv {
        let (_, last) = traj.frames.last().expect("evolve records the final frame");
        std::fs::write(path, frame_csv(last, 4 * cfg.n_modes))?;
    }
    emit(&to_json_line(&traj.report).map_err(|e| runtime(e.to_string()))?)?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::BifPoints { scenario, m_min, m_max } => bif_points(&scenario, m_min, m_max),
        Command::Branch { scenario, m, sign, modes, ds, steps, out } => branch(&scenario, m, sign, modes, ds, steps, &out),
        Command::Asymptotics { branch } => asymptotics(&branch),
        Command::Evolve {
            a,
            b,
            branch,
            index,
            mode,
            amplitude,
            n_modes,
            dt,
            t_final,
            record_every,
            symmetry,
            filter_alpha,
            filter_order,
            frame_csv,
        } => {
            let filter = filter_alpha.zip(filter_order).map(|(alpha, order)| Filter { alpha, order });
            let cfg = SimConfig { record_every, symmetry, filter, ..SimConfig::new(n_modes, dt, t_final) };
            run_evolve(EvolveArgs { a, b, branch, index, mode, amplitude, cfg, frame_csv })
        }
        Command::VerifyTravel { branch, index, t_final, dt, tol, n_modes } => {
            verify_travel(&branch, index, t_final, dt, tol, n_modes)
        }
        Command::Norms { branch, s, sigma } => norms(&branch, s, sigma),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let init = ContinuationError::Init { side: "positive", reason: "stalled".into() };
        assert_eq!(Failure::from(init).code, 3);
        assert_eq!(Failure::from(ContinuationError::NotConverged { iterations: 25, residual: 1.0 }).code, 3);
        assert_eq!(Failure::from(ContinuationError::InvalidConfig("ds".into())).code, 2);
        assert_eq!(Failure::from(ContinuationError::InsufficientPoints { found: 1 }).code, 4);
        assert_eq!(Failure::from(SimError::Guard { t: 0.0, dt: 1.0, limit: 0.5 }).code, 4);
        assert_eq!(Failure::from(SimError::InvalidConfig("dt".into())).code, 2);
    }

    #[test]
    fn command_line_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
