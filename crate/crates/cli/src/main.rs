//! `lancaster-mt`: experiment runner and validation front-end.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lancaster_core::covariance::{
    comparison_constant, kappa, kappa_oracle, lyons_design_sequence, lyons_partial_sums,
    oracle_quad_spec, ParamRange,
};
use lancaster_core::lancaster::{joint_density, FamilyParams, GammaNBParams, LancasterPair, Truncation};
use lancaster_core::mtp::{simulate, slln_sweep, weak_dependence_curves, write_csv, SimulationSpec};
use lancaster_core::orthopoly::{charlier, laguerre, meixner, PolyOrder, PolySequence, PolyValue};
use lancaster_core::special::{GammaParams, NBParams, PoissonParams, Probability};
use lancaster_core::validation::{run_criterion, CRITERIA};

use config::{load, LyonsConfig, SimulateConfig, SweepConfig, WeakDepConfig};

#[derive(Debug, Parser)]
#[command(name = "lancaster-mt", version, about = "Lancaster dependence and SLLN diagnostics for multiple testing")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "LANCASTER_MT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Orthogonal polynomial values.
    Poly {
        #[command(subcommand)]
        action: PolyAction,
    },
    /// Truncated joint densities.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Indicator covariance from the series, cross-checked by the oracle.
    Kappa(KappaArgs),
    /// Covariance over a grid of ρ and the comparison constant.
    KappaScan(KappaScanArgs),
    /// One design, every replication as a CSV row.
    Simulate(ConfigArgs),
    /// Dispersion of normalized counts over a grid of m.
    SllnSweep(ConfigArgs),
    /// Empirical null and alternative rejection curves.
    WeakDep(ConfigArgs),
    /// Partial sums of variance majorants over a design sequence.
    Lyons(ConfigArgs),
    /// Runs the acceptance suite.
    Validate {
        /// Criteria to run; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

#[derive(Debug, Subcommand)]
enum PolyAction {
    Eval(PolyArgs),
}

#[derive(Debug, Subcommand)]
enum KernelAction {
    Eval(KernelArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolyKind {
    /// Unnormalized `L_n^{(alpha)}`.
    Laguerre,
    /// Laguerre orthonormal under Gamma(alpha).
    GammaOrthonormal,
    Charlier,
    Meixner,
}

#[derive(Debug, Args)]
struct PolyArgs {
    #[arg(long, value_enum)]
    family: PolyKind,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyKind {
    Gamma,
    Poisson,
    NegBinomial,
    GammaNb,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyKind,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct TruncArgs {
    #[arg(long, default_value_t = 400)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-12)]
    tail_tol: f64,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    x: f64,
    #[arg(long)]
    y: f64,
    #[command(flatten)]
    trunc: TruncArgs,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    t: f64,
    /// Allow gamma shapes above 1.
    #[arg(long)]
    unrestricted: bool,
    #[command(flatten)]
    trunc: TruncArgs,
}

#[derive(Debug, Args)]
struct KappaScanArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    t: f64,
    /// Grid spacing of ρ.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Largest ρ; defaults to 0.95, or √c for gamma_nb.
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    unrestricted: bool,
    #[command(flatten)]
    trunc: TruncArgs,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides the configuration, defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation) => ExitCode::from(2),
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Poly {
            action: PolyAction::Eval(args),
        } => poly_eval(&args),
        Command::Kernel {
            action: KernelAction::Eval(args),
        } => kernel_eval(&args),
        Command::Kappa(args) => kappa_cmd(&args),
        Command::KappaScan(args) => kappa_scan(&args),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::SllnSweep(args) => slln_cmd(&args),
        Command::WeakDep(args) => weak_dep_cmd(&args),
        Command::Lyons(args) => lyons_cmd(&args),
        Command::Validate { criteria } => validate(&criteria),
    }
}

fn required(v: Option<f64>, name: &str) -> std::result::Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{name} is required for this family")))
}

impl FamilyArgs {
    fn params(&self) -> std::result::Result<FamilyParams, Failure> {
        Ok(match self.family {
            FamilyKind::Gamma => FamilyParams::Gamma(GammaParams::new(required(self.alpha, "alpha")?)?),
            FamilyKind::Poisson => FamilyParams::Poisson(PoissonParams::new(required(self.a, "a")?)?),
            FamilyKind::NegBinomial => FamilyParams::NegBinomial(NBParams::new(
                required(self.beta, "beta")?,
                required(self.c, "c")?,
            )?),
            FamilyKind::GammaNb => FamilyParams::GammaNb(GammaNBParams::new(
                required(self.alpha, "alpha")?,
                required(self.beta, "beta")?,
                required(self.c, "c")?,
            )?),
        })
    }
}

impl TruncArgs {
    fn get(&self) -> std::result::Result<Truncation, Failure> {
        Ok(Truncation::new(self.n_max, self.tail_tol)?)
    }
}

fn range(unrestricted: bool) -> ParamRange {
    if unrestricted {
        ParamRange::Unrestricted
    } else {
        ParamRange::Theorem
    }
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn sink(path: Option<&Path>) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Outcome {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PolyReport {
    family: &'static str,
    n: u32,
    x: f64,
    value: f64,
    /// `ln |value|` and the sign, when the value is only representable in
    /// log form or the degree is large.
    ln_abs: Option<f64>,
    sign: Option<i8>,
}

fn poly_eval(args: &PolyArgs) -> Outcome {
    let n = PolyOrder::new(args.n)?;
    let int_x = || -> std::result::Result<u64, Failure> {
        if args.x >= 0.0 && args.x.fract() == 0.0 {
            Ok(args.x as u64)
        } else {
            Err(Failure::Usage(format!("--x must be a non-negative integer, got {}", args.x)))
        }
    };
    let (family, value): (&'static str, PolyValue) = match args.family {
        PolyKind::Laguerre => ("laguerre", laguerre(n, required(args.alpha, "alpha")?, args.x)?),
        PolyKind::GammaOrthonormal => {
            if args.x < 0.0 {
                return Err(Failure::Usage(format!("--x must be non-negative, got {}", args.x)));
            }
            let sl = PolySequence::gamma_orthonormal(required(args.alpha, "alpha")?, args.x)?
                .nth(args.n as usize)
                .expect("infinite sequence");
            (
                "gamma_orthonormal",
                PolyValue {
                    value: sl.to_f64(),
                    log: None,
                },
            )
        }
        PolyKind::Charlier => ("charlier", charlier(n, required(args.a, "a")?, int_x()?)?),
        PolyKind::Meixner => (
            "meixner",
            meixner(n, required(args.beta, "beta")?, required(args.c, "c")?, int_x()?)?,
        ),
    };
    let log = value.log;
    print_json(&PolyReport {
        family,
        n: args.n,
        x: args.x,
        value: value.value,
        ln_abs: log.map(|l| l.ln_abs),
        sign: log.map(|l| l.sign),
    })
}

fn kernel_eval(args: &KernelArgs) -> Outcome {
    let pair = LancasterPair::new(args.family.params()?, args.rho)?;
    let v = joint_density(&pair, args.x, args.y, args.trunc.get()?)?;
    print_json(&v)
}

#[derive(Serialize)]
struct KappaReport {
    family: &'static str,
    rho: f64,
    t: f64,
    series: f64,
    oracle: f64,
    abs_diff: f64,
    n_used: usize,
}

fn kappa_cmd(args: &KappaArgs) -> Outcome {
    let family = args.family.params()?;
    let pair = LancasterPair::new(family, args.rho)?;
    let t = Probability::new(args.t)?;
    let trunc = args.trunc.get()?;
    let series = kappa(&pair, t, trunc, range(args.unrestricted))?;
    let oracle = kappa_oracle(&pair, t, trunc, oracle_quad_spec())?;
    print_json(&KappaReport {
        family: family.name(),
        rho: args.rho,
        t: args.t,
        series: series.value,
        oracle,
        abs_diff: (series.value - oracle).abs(),
        n_used: series.n_used,
    })
}

#[derive(Serialize)]
struct ScanReport {
    family: &'static str,
    t: f64,
    comparison_constant: f64,
    argmax: f64,
    kappas: Vec<(f64, f64)>,
}

fn kappa_scan(args: &KappaScanArgs) -> Outcome {
    let family = args.family.params()?;
    if !(args.step > 0.0) {
        return Err(Failure::Usage("--step must be positive".into()));
    }
    let rho_max = match (args.rho_max, family) {
        (Some(r), _) => r,
        (None, FamilyParams::GammaNb(p)) => p.nb.c().sqrt().min(0.95),
        (None, _) => 0.95,
    };
    let k = (rho_max / args.step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=k).map(|i| i as f64 * args.step).collect();
    if grid.last().is_none_or(|&r| r < rho_max - 1e-12) {
        grid.push(rho_max);
    }
    let cc = comparison_constant(
        family,
        Probability::new(args.t)?,
        &grid,
        args.trunc.get()?,
        range(args.unrestricted),
    )?;
    print_json(&ScanReport {
        family: family.name(),
        t: args.t,
        comparison_constant: cc.value,
        argmax: cc.argmax,
        kappas: cc.kappas,
    })
}

fn output<'a>(args: &'a ConfigArgs, from_config: &'a Option<PathBuf>) -> Option<&'a Path> {
    args.out.as_deref().or(from_config.as_deref())
}

fn simulate_cmd(args: &ConfigArgs) -> Outcome {
    let cfg: SimulateConfig = load(&args.config)?;
    let spec = SimulationSpec {
        t: cfg.t,
        lambda: cfg.lambda,
        replications: cfg.replications,
    };
    let outcomes = simulate(&cfg.design, spec)?;
    let mut w = sink(output(args, &cfg.output))?;
    write_csv(&mut w, &outcomes)?;
    w.flush()?;
    Ok(())
}

fn slln_cmd(args: &ConfigArgs) -> Outcome {
    let cfg: SweepConfig = load(&args.config)?;
    let trace = slln_sweep(&cfg.template, &cfg.m_grid, cfg.t, cfg.replications)?;
    write_json(output(args, &cfg.output), &trace)
}

fn weak_dep_cmd(args: &ConfigArgs) -> Outcome {
    let cfg: WeakDepConfig = load(&args.config)?;
    let curves = weak_dependence_curves(&cfg.template, &cfg.m_grid, &cfg.t_grid, cfg.replications)?;
    write_json(output(args, &cfg.output), &curves)
}

#[derive(Serialize)]
struct LyonsReport {
    k_max: usize,
    /// `(K, S_K)` at powers of ten and at `k_max`.
    partial_sums: Vec<(usize, f64)>,
    /// `(S_K − S_{K/10}) / S_K` at `K = k_max`.
    last_decade_growth: Option<f64>,
    /// The majorant of `E|Q_K|²` at `K = k_max`.
    last_second_moment: f64,
}

fn lyons_cmd(args: &ConfigArgs) -> Outcome {
    let cfg: LyonsConfig = load(&args.config)?;
    if cfg.k_max == 0 {
        return Err(Failure::Usage("k_max must be at least 1".into()));
    }
    let varseq = lyons_design_sequence(&cfg.template, cfg.t, cfg.k_max, cfg.truncation)?;
    let sums = lyons_partial_sums(&varseq)?;
    let mut checkpoints: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(10))
        .take_while(|&k| k < cfg.k_max)
        .collect();
    checkpoints.push(cfg.k_max);
    let s_k = sums[cfg.k_max - 1];
    let growth = (cfg.k_max >= 10).then(|| (s_k - sums[cfg.k_max / 10 - 1]) / s_k);
    write_json(
        output(args, &cfg.output),
        &LyonsReport {
            k_max: cfg.k_max,
            partial_sums: checkpoints.iter().map(|&k| (k, sums[k - 1])).collect(),
            last_decade_growth: growth,
            last_second_moment: varseq[cfg.k_max - 1],
        },
    )
}

fn validate(criteria: &[u8]) -> Outcome {
    let ids: Vec<u8> = if criteria.is_empty() {
        (1..=CRITERIA).collect()
    } else {
        criteria.to_vec()
    };
    let mut failed = 0;
    for id in ids {
        let report = run_criterion(id)?;
        println!("{report}");
        failed += usize::from(!report.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        Err(Failure::Validation)
    } else {
        println!("all criteria passed");
        Ok(())
    }
}
