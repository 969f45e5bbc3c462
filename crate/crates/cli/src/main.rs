//! `punctured`: build punctured states, certify positivity, sweep bounds
//! and g2, export quasi-probability grids and run the QND cascade.

mod output;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use punctured::fockspace::min_eigenvalue;
use punctured::phasespace::{centers_outside, p_grid, w_grid, PhaseSpaceGrid, Quantity, Region};
use punctured::photonstats::antibunching_scan;
use punctured::positivity::{policy_start, positivity_report};
use punctured::qndsim::{simulate_qnd, QndConfig};
use punctured::statemodel::{build_density_with_tolerance, PuncturedStateSpec, TRACE_DEFICIT_TOL};
use punctured::sweep::{bounds_sweep, Param, SweepConfig, SweepFamily};

use output::{companion, emit, json, num, opt, Csv, VERSION};

#[derive(Parser)]
#[command(name = "punctured", version, about = "Punctured P-function states from the command line")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Fock truncation (highest photon number kept)
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Numerical tolerance: bisection tolerance for sweeps, trace deficit
    /// for state build
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// RNG seed for the QND simulation
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Density matrix of a spec
    State {
        #[command(subcommand)]
        action: StateAction,
    },
    /// Positivity verdict for a spec
    Positivity {
        #[command(subcommand)]
        action: PositivityAction,
    },
    /// Closed-form and numerical maximal weights over a grid
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// g2 over a grid, with its g2 = 1 contour
    G2 {
        #[command(subcommand)]
        action: G2Action,
    },
    /// Wigner function on a phase-space grid
    Wigner {
        #[command(subcommand)]
        action: GridAction,
    },
    /// Smooth part of the P function on a phase-space grid
    Pfunc {
        #[command(subcommand)]
        action: GridAction,
    },
    /// QND vacuum removal
    Qnd {
        #[command(subcommand)]
        action: QndAction,
    },
}

#[derive(Subcommand)]
enum StateAction {
    Build { spec: PathBuf },
}

#[derive(Subcommand)]
enum PositivityAction {
    Check { spec: PathBuf },
}

#[derive(Subcommand)]
enum BoundsAction {
    Sweep { config: PathBuf },
}

#[derive(Subcommand)]
enum G2Action {
    Scan { config: PathBuf },
}

#[derive(Subcommand)]
enum GridAction {
    Grid(GridArgs),
}

#[derive(Args)]
struct GridArgs {
    spec: PathBuf,
    /// `re_min,re_max,im_min,im_max`
    #[arg(long, allow_hyphen_values = true, conflicts_with = "half_width")]
    region: Option<String>,
    /// Square region `[-h, h] x [-h, h]`
    #[arg(long)]
    half_width: Option<f64>,
    /// Points per axis, `N` or `NxM` (real by imaginary)
    #[arg(long, default_value = "101")]
    resolution: String,
}

#[derive(Subcommand)]
enum QndAction {
    Run { config: PathBuf },
}

/// Failure with its exit code: 2 for bad input, 1 for everything else.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<punctured::Error> for CliError {
    fn from(e: punctured::Error) -> Self {
        Self {
            code: if e.is_invalid_input() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::State { action: StateAction::Build { spec } } => state_build(g, &spec),
        Command::Positivity { action: PositivityAction::Check { spec } } => positivity_check(g, &spec),
        Command::Bounds { action: BoundsAction::Sweep { config } } => bounds(g, &config),
        Command::G2 { action: G2Action::Scan { config } } => g2_scan(g, &config),
        Command::Wigner { action: GridAction::Grid(args) } => grid(g, &args, Quantity::W),
        Command::Pfunc { action: GridAction::Grid(args) } => grid(g, &args, Quantity::P),
        Command::Qnd { action: QndAction::Run { config } } => qnd(g, &config),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("cannot parse {what} {}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Result<PuncturedStateSpec, CliError> {
    let spec: PuncturedStateSpec = read_json(path, "spec")?;
    spec.validate()?;
    Ok(spec)
}

fn json_only(g: &Global, command: &str) -> Result<(), CliError> {
    match g.format {
        Some(Format::Csv) => Err(CliError::input(format!("{command} writes JSON only"))),
        _ => Ok(()),
    }
}

fn tolerance(g: &Global, default: f64) -> Result<f64, CliError> {
    match g.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::input(format!("--tol must be finite and > 0, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

#[derive(Serialize)]
struct Summary {
    n_max: usize,
    trace: f64,
    min_eigenvalue: f64,
    hermiticity_residual: f64,
}

#[derive(Serialize)]
struct MatrixFile {
    dim: usize,
    /// Row-major `[re, im]` pairs.
    data: Vec<[f64; 2]>,
    summary: Summary,
}

fn state_build(g: &Global, path: &Path) -> Result<(), CliError> {
    json_only(g, "state build")?;
    let spec = read_spec(path)?;
    let n_max = g.n_max.unwrap_or_else(|| policy_start(&spec));
    let rho = build_density_with_tolerance(&spec, n_max, tolerance(g, TRACE_DEFICIT_TOL)?)?;
    let summary = Summary {
        n_max,
        trace: rho.trace(),
        min_eigenvalue: min_eigenvalue(&rho)?,
        hermiticity_residual: rho.hermiticity_residual(),
    };
    let m = rho.matrix();
    let dim = rho.dim();
    let data = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| [m[(i, j)].re, m[(i, j)].im])
        .collect();
    if g.out.is_some() {
        eprintln!(
            "n_max {} trace {} min eigenvalue {} hermiticity residual {}",
            summary.n_max,
            num(summary.trace),
            num(summary.min_eigenvalue),
            num(summary.hermiticity_residual)
        );
    }
    emit(g.out.as_deref(), &json(&MatrixFile { dim, data, summary })?)
}

fn positivity_check(g: &Global, path: &Path) -> Result<(), CliError> {
    json_only(g, "positivity check")?;
    let spec = read_spec(path)?;
    let report = positivity_report(&spec)?;
    emit(g.out.as_deref(), &json(&report)?)
}

/// Parameter columns of a family, plus any swept parameter not among them.
fn param_columns(config: &SweepConfig) -> Vec<Param> {
    let mut cols = match config.family {
        SweepFamily::DeltaThermal => vec![Param::Nbar, Param::Alpha],
        SweepFamily::DeltaSqueezed => vec![Param::NbarR, Param::NbarI, Param::Alpha],
        SweepFamily::Gaussian => vec![Param::Nbar, Param::B, Param::Alpha],
    };
    let phase_used = config.fixed.phase != 0.0 || config.axes.iter().any(|a| a.param == Param::Phase);
    if phase_used {
        cols.push(Param::Phase);
    }
    for a in &config.axes {
        if !cols.contains(&a.param) {
            cols.push(a.param);
        }
    }
    cols
}

#[derive(Serialize)]
struct SweepRun<'a> {
    sweep: &'a SweepConfig,
    n_max: Option<usize>,
    tol: f64,
}

fn bounds(g: &Global, path: &Path) -> Result<(), CliError> {
    let config: SweepConfig = read_json(path, "sweep config")?;
    config.validate()?;
    if config.axes.iter().any(|a| a.param == Param::W) {
        return Err(CliError::input("a bounds sweep cannot sweep the weight"));
    }
    let tol = tolerance(g, 1e-6)?;
    let rows = bounds_sweep(&config, g.n_max, tol)?;
    let run = SweepRun {
        sweep: &config,
        n_max: g.n_max,
        tol,
    };
    if g.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            version: &'static str,
            config: &'a SweepRun<'a>,
            rows: T,
        }
        return emit(g.out.as_deref(), &json(&Doc { version: VERSION, config: &run, rows: &rows })?);
    }

    let params = param_columns(&config);
    let with_sc = config.family == SweepFamily::DeltaThermal;
    let with_converged = g.n_max.is_none();
    let with_error = rows.iter().any(|r| r.error.is_some());
    let mut header = vec!["family"];
    header.extend(params.iter().map(Param::name));
    header.push("bound_nc");
    if with_sc {
        header.push("bound_sc");
    }
    header.extend(["wmax_numeric", "n_max_used"]);
    if with_converged {
        header.push("converged");
    }
    if with_error {
        header.push("error");
    }
    let mut csv = Csv::new(&run, &header)?;
    for r in &rows {
        let mut rec = vec![config.family.name().to_string()];
        rec.extend(params.iter().map(|&p| num(r.params.get(p))));
        rec.push(opt(r.bound_nc));
        if with_sc {
            rec.push(opt(r.bound_sc));
        }
        rec.push(opt(r.wmax_numeric));
        rec.push(r.n_max_used.map(|n| n.to_string()).unwrap_or_default());
        if with_converged {
            rec.push(r.converged.map(|c| c.to_string()).unwrap_or_default());
        }
        if with_error {
            rec.push(r.error.clone().unwrap_or_default());
        }
        csv.row(&rec)?;
    }
    emit(g.out.as_deref(), &csv.finish()?)
}

fn g2_scan(g: &Global, path: &Path) -> Result<(), CliError> {
    let config: SweepConfig = read_json(path, "sweep config")?;
    let scan = antibunching_scan(&config)?;
    if g.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            version: &'static str,
            config: &'a SweepConfig,
            scan: T,
        }
        return emit(g.out.as_deref(), &json(&Doc { version: VERSION, config: &config, scan: &scan })?);
    }
    if config.axes.len() == 2 && g.out.is_none() {
        return Err(CliError::input("g2 scan over two axes writes a contour file and needs --out"));
    }

    let names: Vec<&str> = config.axes.iter().map(|a| a.param.name()).collect();
    let mut header = names.clone();
    header.extend(["w", "g2", "mask_reason"]);
    let mut csv = Csv::new(&config, &header)?;
    for c in &scan.cells {
        let mut rec: Vec<String> = config.axes.iter().map(|a| num(c.params.get(a.param))).collect();
        rec.push(opt(c.w));
        rec.push(opt(c.g2));
        rec.push(c.mask_reason.clone().unwrap_or_default());
        csv.row(&rec)?;
    }
    emit(g.out.as_deref(), &csv.finish()?)?;

    if let (Some(out), true) = (g.out.as_deref(), config.axes.len() == 2) {
        let mut contour = Csv::new(&config, &["line", names[0], names[1]])?;
        for (k, line) in scan.contour.iter().enumerate() {
            for &(x, y) in line {
                contour.row([k.to_string(), num(x), num(y)])?;
            }
        }
        emit(Some(&companion(out, "_contour.csv")), &contour.finish()?)?;
    }
    Ok(())
}

fn parse_region(text: &str) -> Result<Region, CliError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(format!("--region {text:?}: {e}")))?;
    let [re_min, re_max, im_min, im_max] = v[..] else {
        return Err(CliError::input(format!("--region needs four numbers, got {text:?}")));
    };
    Ok(Region {
        re_min,
        re_max,
        im_min,
        im_max,
    })
}

fn parse_resolution(text: &str) -> Result<(usize, usize), CliError> {
    let bad = |e: &dyn Display| CliError::input(format!("--resolution {text:?}: {e}"));
    match text.split_once(['x', 'X']) {
        Some((a, b)) => Ok((a.trim().parse().map_err(|e| bad(&e))?, b.trim().parse().map_err(|e| bad(&e))?)),
        None => {
            let n = text.trim().parse().map_err(|e| bad(&e))?;
            Ok((n, n))
        }
    }
}

/// Square covering three base widths around the origin and every puncture
/// centre with one unit to spare.
fn default_region(spec: &PuncturedStateSpec) -> Region {
    let reach = spec.punctures.iter().map(|p| p.center.norm() + 1.0).fold(0.0, f64::max);
    Region::square((3.0 * (spec.base.nbar() + 0.5).sqrt()).max(reach))
}

#[derive(Serialize, Deserialize)]
struct DeltaComponent {
    alpha: C64,
    weight: f64,
}

#[derive(Serialize)]
struct Sidecar {
    delta_components: Vec<DeltaComponent>,
    region: Region,
    resolution: (usize, usize),
    quantity: &'static str,
}

fn sidecar(grid: &PhaseSpaceGrid) -> Sidecar {
    Sidecar {
        delta_components: grid
            .delta_components
            .iter()
            .map(|&(alpha, weight)| DeltaComponent { alpha, weight })
            .collect(),
        region: grid.region,
        resolution: grid.resolution,
        quantity: match grid.quantity {
            Quantity::P => "P",
            Quantity::W => "W",
        },
    }
}

fn grid(g: &Global, args: &GridArgs, quantity: Quantity) -> Result<(), CliError> {
    let spec = read_spec(&args.spec)?;
    let region = match (&args.region, args.half_width) {
        (Some(r), _) => parse_region(r)?,
        (None, Some(h)) => Region::square(h),
        (None, None) => default_region(&spec),
    };
    let resolution = parse_resolution(&args.resolution)?;
    let outside = centers_outside(&spec, &region);
    if !outside.is_empty() {
        eprintln!("warning: puncture centres outside the region: {outside:?}");
    }
    let grid = match quantity {
        Quantity::P => p_grid(&spec, region, resolution)?,
        Quantity::W => w_grid(&spec, region, resolution)?,
    };
    let side = sidecar(&grid);
    if g.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Doc<'a> {
            version: &'static str,
            spec: &'a PuncturedStateSpec,
            #[serde(flatten)]
            sidecar: &'a Sidecar,
            values: &'a [f64],
        }
        let doc = Doc {
            version: VERSION,
            spec: &spec,
            sidecar: &side,
            values: &grid.values,
        };
        return emit(g.out.as_deref(), &json(&doc)?);
    }
    let Some(out) = g.out.as_deref() else {
        return Err(CliError::input("grid export writes a sidecar file and needs --out"));
    };

    #[derive(Serialize)]
    struct Config<'a> {
        spec: &'a PuncturedStateSpec,
        region: Region,
        resolution: (usize, usize),
        quantity: &'static str,
    }
    let config = Config {
        spec: &spec,
        region,
        resolution,
        quantity: side.quantity,
    };
    let mut csv = Csv::new(&config, &["re", "im", "value"])?;
    for (k, v) in grid.values.iter().enumerate() {
        let z = grid.point(k);
        csv.row([num(z.re), num(z.im), num(*v)])?;
    }
    emit(Some(out), &csv.finish()?)?;
    emit(Some(&companion(out, "_sidecar.json")), &json(&side)?)
}

/// QND config as read from disk; `n_max` and `seed` may come from flags.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QndFile {
    nbar: f64,
    l_max: u32,
    n_max: Option<usize>,
    #[serde(default)]
    shots: u64,
    seed: Option<u64>,
}

fn qnd(g: &Global, path: &Path) -> Result<(), CliError> {
    json_only(g, "qnd run")?;
    let file: QndFile = read_json(path, "QND config")?;
    let n_max = g
        .n_max
        .or(file.n_max)
        .ok_or_else(|| CliError::input("QND run needs n_max, in the config or via --n-max"))?;
    let config = QndConfig {
        nbar: file.nbar,
        l_max: file.l_max,
        n_max,
        shots: file.shots,
        seed: g.seed.or(file.seed).unwrap_or(0),
    };
    let result = simulate_qnd(&config)?;
    emit(g.out.as_deref(), &json(&result.report())?)
}
