use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memkernel::certify::{Certification, CertifyOptions, ChoiMode, Tolerances};
use memkernel::classical::{
    compare_populations, estimate_populations, gme_populations, simulate_ensemble, waiting_time_table,
    write_trajectories_csv, PopulationEstimate, TrajectoryRecord, WaitingTimeTable,
};
use memkernel::kernel::{ClassicalAnnotation, KernelSpec, ProfileSum, TimeGrid, ValidatedSpec};
use memkernel::linalg::{self, CMatrix};
use memkernel::volterra::{check_step_guard, ConvolutionKernel};
use memkernel::{certify, compute_v, validate_spec, zoo, Error};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "memkernel", version, about = "Memory-kernel master equations: evolve, certify, sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a density matrix and write populations, coherences and positivity.
    Evolve(EvolveArgs),
    /// Check complete positivity and write the report plus eigenvalue traces.
    Certify(CertifyArgs),
    /// Simulate classical jump trajectories.
    Sample(SampleArgs),
    /// Overlay Monte Carlo populations on the generalized master equation.
    Compare(SampleArgs),
    /// List the built-in presets, or export one as a spec file.
    Zoo(ZooArgs),
}

#[derive(Args)]
struct Source {
    /// Spec file (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in preset; see `memkernel zoo`.
    #[arg(long)]
    preset: Option<String>,
    /// Grid step.
    #[arg(long)]
    h: Option<f64>,
    /// Number of grid steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    source: Source,
    /// Basis label, basis index, or a JSON matrix of numbers or [re, im] pairs.
    #[arg(long)]
    initial: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChoiFlag {
    Full,
    Sampled,
    Off,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    source: Source,
    /// Relative PSD tolerance.
    #[arg(long, default_value_t = memkernel::tolerances::PSD_REL)]
    tol_psd: f64,
    /// Choi oracle coverage; by default every grid point for small problems, sampled otherwise.
    #[arg(long, value_enum)]
    choi: Option<ChoiFlag>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,
    /// Starting site (label or index).
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    trajectories: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ZooArgs {
    /// Export this preset as `<out>/<preset>.json`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum Failure {
    Engine(Error),
    Usage(String),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Engine(e @ Error::StepGuard { .. }) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
            Failure::Engine(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Failure::Io(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        }
    }
}

type Outcome = Result<ExitCode, Failure>;

/// Extra fields an exported spec file may carry next to the kernel.
#[derive(Default, Serialize, Deserialize)]
struct RunDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<usize>,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct GridFile {
    step: f64,
    steps: usize,
}

const DEFAULT_GRID: GridFile = GridFile {
    step: 1e-3,
    steps: 1000,
};

struct Loaded {
    spec: ValidatedSpec<f64>,
    initial: usize,
}

fn load(source: &Source) -> Result<Loaded, Failure> {
    let (spec, defaults) = match (&source.spec, &source.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let defaults: RunDefaults =
                serde_json::from_str(&text).map_err(|e| Failure::Engine(Error::SpecFile(e.to_string())))?;
            (KernelSpec::<f64>::from_json(&text)?, defaults)
        }
        (None, Some(name)) => {
            let preset = zoo::find_preset(name)?;
            let (model, grid) = zoo::build_preset::<f64>(name)?;
            let defaults = RunDefaults {
                grid: Some(GridFile {
                    step: grid.step,
                    steps: grid.steps,
                }),
                initial: Some(preset.initial),
            };
            (model.spec, defaults)
        }
        (None, None) => return Err(Failure::Usage("one of --spec or --preset is required".into())),
    };
    let base = defaults.grid.unwrap_or(DEFAULT_GRID);
    let grid = TimeGrid::new(source.h.unwrap_or(base.step), source.steps.unwrap_or(base.steps))?;
    let spec = validate_spec(&spec, &grid)?;
    let d = spec.dimension();
    check_step_guard(&ConvolutionKernel::separable(d * d, spec.spec().superop_terms())?, &grid)?;
    Ok(Loaded {
        initial: defaults.initial.unwrap_or(0),
        spec,
    })
}

fn site(spec: &KernelSpec<f64>, text: &str) -> Option<usize> {
    spec.label_index(text)
        .or_else(|| text.parse::<usize>().ok().filter(|&i| i < spec.dimension()))
}

fn parse_entry(v: &serde_json::Value) -> Option<Complex64> {
    match v {
        serde_json::Value::Number(x) => Some(Complex64::new(x.as_f64()?, 0.0)),
        serde_json::Value::Array(pair) if pair.len() == 2 => {
            Some(Complex64::new(pair[0].as_f64()?, pair[1].as_f64()?))
        }
        _ => None,
    }
}

fn initial_state(spec: &KernelSpec<f64>, text: Option<&str>, default: usize) -> Result<CMatrix<f64>, Failure> {
    let d = spec.dimension();
    let Some(text) = text else {
        return Ok(linalg::unit(d, default, default));
    };
    if let Some(n) = site(spec, text) {
        return Ok(linalg::unit(d, n, n));
    }
    let bad = || Failure::Usage(format!("--initial must be a basis label, an index below {d}, or a {d}x{d} JSON matrix"));
    let rows: Vec<Vec<serde_json::Value>> = serde_json::from_str(text).map_err(|_| bad())?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(bad());
    }
    let mut rho = DMatrix::zeros(d, d);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            rho[(r, c)] = parse_entry(v).ok_or_else(bad)?;
        }
    }
    Ok(rho)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

// ---------------------------------------------------------------------------

fn evolve(args: &EvolveArgs) -> Outcome {
    let loaded = load(&args.source)?;
    let spec = &loaded.spec;
    let d = spec.dimension();
    let rho0 = initial_state(spec.spec(), args.initial.as_deref(), loaded.initial)?;
    let v = compute_v(spec)?;
    let states = v.evolve(&rho0)?;

    let mut out = create(&args.source.out, "evolve.csv")?;
    let mut header = String::from("t");
    for n in 0..d {
        write!(header, ",P_{n}").unwrap();
    }
    for n in 0..d {
        for m in n + 1..d {
            write!(header, ",rho_{n}{m}_re,rho_{n}{m}_im").unwrap();
        }
    }
    header.push_str(",trace,min_eig_rho");
    writeln!(out, "{header}")?;
    for (j, rho) in states.iter().enumerate() {
        let mut line = format!("{}", v.grid.time(j));
        for n in 0..d {
            write!(line, ",{}", rho[(n, n)].re).unwrap();
        }
        for n in 0..d {
            for m in n + 1..d {
                write!(line, ",{},{}", rho[(n, m)].re, rho[(n, m)].im).unwrap();
            }
        }
        let (min, _) = linalg::min_eigen_and_norm(rho);
        write!(line, ",{},{}", rho.trace().re, min).unwrap();
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn write_eigenvalues(dir: &Path, c: &Certification<f64>) -> Result<(), Failure> {
    let mut out = create(dir, "eigenvalues.csv")?;
    let mut header = String::from("t,g_min,g_norm");
    if c.g_tilde.is_some() {
        header.push_str(",g_tilde_min,g_tilde_norm");
    }
    if c.choi.is_some() {
        header.push_str(",choi_min,choi_norm");
    }
    writeln!(out, "{header}")?;
    for j in 0..c.g.grid.len() {
        let mut line = format!("{},{},{}", c.g.grid.time(j), c.g.min_eigenvalues[j], c.g.norms[j]);
        if let Some(gt) = &c.g_tilde {
            write!(line, ",{},{}", gt.min_eigenvalues[j], gt.norms[j]).unwrap();
        }
        if let Some(choi) = &c.choi {
            match choi.at(j) {
                Some((min, norm)) => write!(line, ",{min},{norm}").unwrap(),
                None => line.push_str(",,"),
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn certify_cmd(args: &CertifyArgs) -> Outcome {
    let loaded = load(&args.source)?;
    let options = CertifyOptions {
        tolerances: Tolerances {
            psd_rel: args.tol_psd,
            ..Tolerances::default()
        },
        choi: match args.choi {
            None => ChoiMode::Auto,
            Some(ChoiFlag::Full) => ChoiMode::Full,
            Some(ChoiFlag::Sampled) => ChoiMode::Sampled,
            Some(ChoiFlag::Off) => ChoiMode::Off,
        },
    };
    let c = certify(&loaded.spec, &options)?;
    let mut out = create(&args.source.out, "report.json")?;
    serde_json::to_writer_pretty(&mut out, &c.report).map_err(|e| Failure::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    write_eigenvalues(&args.source.out, &c)?;

    let r = &c.report;
    for (name, cond) in [
        ("classical", &r.classical_valid),
        ("cond1", &r.cond1),
        ("cond2", &r.cond2),
        ("choi", &r.choi),
    ] {
        match cond.earliest_violation_time {
            Some(t) => println!("{name}: {:?} (earliest violation t = {t})", cond.verdict),
            None => println!("{name}: {:?}", cond.verdict),
        }
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(if r.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

struct Sampled {
    classical: ClassicalAnnotation<f64>,
    grid: TimeGrid<f64>,
    start: usize,
    ensemble: Vec<TrajectoryRecord<f64>>,
    estimate: PopulationEstimate<f64>,
}

fn run_sampler(args: &SampleArgs) -> Result<Sampled, Failure> {
    let loaded = load(&args.source)?;
    let spec = loaded.spec.spec();
    let classical = spec.classical().ok_or(Error::MissingClassical)?.clone();
    let grid = *loaded.spec.grid();
    let start = match args.initial.as_deref() {
        None => loaded.initial,
        Some(text) => site(spec, text)
            .ok_or_else(|| Failure::Usage(format!("--initial must name a basis state for sampling (got '{text}')")))?,
    };
    let tables = classical
        .rates
        .iter()
        .map(|k| waiting_time_table(&ProfileSum::real(k.clone()), &grid))
        .collect::<Result<Vec<WaitingTimeTable<f64>>, Error>>()?;
    let ensemble = simulate_ensemble(&classical.jump_matrix, &tables, start, args.trajectories, args.seed)?;
    let estimate = estimate_populations(&ensemble, &grid, spec.dimension())?;
    Ok(Sampled {
        classical,
        grid,
        start,
        ensemble,
        estimate,
    })
}

fn sample(args: &SampleArgs) -> Outcome {
    let s = run_sampler(args)?;
    let mut out = create(&args.source.out, "trajectories.csv")?;
    write_trajectories_csv(&mut out, &s.ensemble)?;
    out.flush()?;

    let d = s.estimate.populations.len();
    let mut out = create(&args.source.out, "populations.csv")?;
    let mut header = String::from("t");
    for n in 0..d {
        write!(header, ",P_{n},se_{n}").unwrap();
    }
    writeln!(out, "{header}")?;
    for j in 0..s.grid.len() {
        let mut line = format!("{}", s.grid.time(j));
        for n in 0..d {
            write!(line, ",{},{}", s.estimate.populations[n][j], s.estimate.standard_errors[n][j]).unwrap();
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CompareSummary {
    trajectories: usize,
    seed: u64,
    max_deviation_se: f64,
    fraction_within: f64,
    threshold_se: f64,
    points: usize,
}

fn compare(args: &SampleArgs) -> Outcome {
    let s = run_sampler(args)?;
    let reference = gme_populations(&s.classical.jump_matrix, &s.classical.rates, s.start, &s.grid)?;
    let cmp = compare_populations(&s.estimate, &reference, 3.0)?;

    let d = reference.len();
    let mut out = create(&args.source.out, "compare.csv")?;
    let mut header = String::from("t");
    for n in 0..d {
        write!(header, ",P_{n}_mc,se_{n},P_{n}_gme").unwrap();
    }
    writeln!(out, "{header}")?;
    for j in 0..s.grid.len() {
        let mut line = format!("{}", s.grid.time(j));
        for n in 0..d {
            write!(
                line,
                ",{},{},{}",
                s.estimate.populations[n][j], s.estimate.standard_errors[n][j], reference[n][j]
            )
            .unwrap();
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;

    let summary = CompareSummary {
        trajectories: args.trajectories,
        seed: args.seed,
        max_deviation_se: cmp.max_deviation,
        fraction_within: cmp.fraction_within,
        threshold_se: cmp.threshold,
        points: cmp.points,
    };
    let mut out = create(&args.source.out, "summary.json")?;
    serde_json::to_writer_pretty(&mut out, &summary).map_err(|e| Failure::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    println!(
        "max deviation {:.3} SE; {:.2}% of {} points within {} SE",
        cmp.max_deviation,
        100.0 * cmp.fraction_within,
        cmp.points,
        cmp.threshold
    );
    Ok(ExitCode::SUCCESS)
}

fn zoo_cmd(args: &ZooArgs) -> Outcome {
    let Some(name) = &args.preset else {
        for p in zoo::presets() {
            println!(
                "{:<24} {:<12} h={} steps={}  {}",
                p.name,
                format!("{:?}", p.class),
                p.step,
                p.steps,
                p.description
            );
        }
        return Ok(ExitCode::SUCCESS);
    };
    let preset = zoo::find_preset(name)?;
    let (model, grid) = zoo::build_preset::<f64>(name)?;
    let mut value = serde_json::to_value(model.spec.to_file()).map_err(|e| Failure::Io(e.into()))?;
    let defaults = RunDefaults {
        grid: Some(GridFile {
            step: grid.step,
            steps: grid.steps,
        }),
        initial: Some(preset.initial),
    };
    if let (serde_json::Value::Object(map), serde_json::Value::Object(extra)) =
        (&mut value, serde_json::to_value(defaults).map_err(|e| Failure::Io(e.into()))?)
    {
        map.extend(extra);
    }
    let path = args.out.join(format!("{name}.json"));
    let mut out = create(&args.out, &format!("{name}.json"))?;
    serde_json::to_writer_pretty(&mut out, &value).map_err(|e| Failure::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("MEMKERNEL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("MEMKERNEL_THREADS must be a positive integer (got '{value}')")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Evolve(a) => evolve(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Sample(a) => sample(a),
        Command::Compare(a) => compare(a),
        Command::Zoo(a) => zoo_cmd(a),
    });
    result.unwrap_or_else(|f| f.report())
}
