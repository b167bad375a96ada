use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use legendre_bundle::bundle::build_fiber;
use legendre_bundle::connections::DuallyFlatManifold;
use legendre_bundle::descriptor::Descriptor;
use legendre_bundle::formal_series::FamilyPotential;
use legendre_bundle::legendre;
use legendre_bundle::linalg::to_rows;
use legendre_bundle::potential::ConvexPotential;
use legendre_bundle::report::{Report, Status};
use legendre_bundle::suite::{self, Tolerances};
use legendre_bundle::Error;

#[derive(Parser)]
#[command(name = "lbundle", version, about = "Legendre duality, dually flat structures and Legendre bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Descriptor file; stdin when absent.
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dual pair at θ (or at the θ solving ∇Ψ(θ) = η).
    Transform {
        #[command(flatten)]
        input: Input,
        /// Comma-separated point; falls back to a "theta" field in the descriptor.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "theta")]
        eta: Option<String>,
    },
    /// Run the verification suite for a potential, family or QFT descriptor.
    Verify {
        #[command(flatten)]
        input: Input,
        /// Random sample count for potentials (seeded by LB_SEED).
        #[arg(long, default_value_t = suite::DEFAULT_SAMPLES)]
        samples: usize,
        /// Explicit points "a,b;c,d" replacing random samples or the validation grid.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Fiber matrices of the Legendre bundle at θ.
    Fiber {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
    },
    /// Metric table over a grid.
    Metric {
        #[command(flatten)]
        input: Input,
        /// Points "a,b;c,d"; alternative to --from/--to/--step in one dimension.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        csv: bool,
    },
    /// Series coefficients of a family at a point.
    Family {
        #[command(flatten)]
        input: Input,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Truncate or zero-extend the family to this order.
        #[arg(long)]
        u_order: Option<usize>,
    },
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, default_value_t = Tolerances::default().fenchel_young)]
    tol_fenchel_young: f64,
    #[arg(long, default_value_t = Tolerances::default().roundtrip)]
    tol_roundtrip: f64,
    #[arg(long, default_value_t = Tolerances::default().duality)]
    tol_duality: f64,
    #[arg(long, default_value_t = Tolerances::default().flatness)]
    tol_flatness: f64,
    #[arg(long, default_value_t = Tolerances::default().fisher)]
    tol_fisher: f64,
    #[arg(long, default_value_t = Tolerances::default().mean)]
    tol_mean: f64,
}

impl From<&TolArgs> for Tolerances {
    fn from(t: &TolArgs) -> Self {
        Tolerances {
            fenchel_young: t.tol_fenchel_young,
            roundtrip: t.tol_roundtrip,
            duality: t.tol_duality,
            flatness: t.tol_flatness,
            fisher: t.tol_fisher,
            mean: t.tol_mean,
        }
    }
}

enum Failure {
    Parse(String),
    Lib(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) | Failure::Io(_) => 2,
            Failure::Lib(e) => match e {
                Error::NonConvergence { .. } => 4,
                Error::Domain { .. }
                | Error::Stencil { .. }
                | Error::Convexity { .. }
                | Error::NonFinite { .. }
                | Error::Normalization { .. } => 3,
                _ => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Parse(m) => format!("parse error: {m}"),
            Failure::Lib(e) => e.to_string(),
            Failure::Io(e) => format!("io error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Every float as `d.dddddddddddddddde±x`, 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

fn emit<T: Serialize>(value: &T) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats);
    value.serialize(&mut ser).map_err(|e| Failure::Parse(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn read_input(input: &Input) -> CliResult<Value> {
    let text = match &input.input {
        Some(path) => fs::read_to_string(path)?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    serde_json::from_str(&text).map_err(|e| Failure::Parse(e.to_string()))
}

fn parse_descriptor(v: &Value) -> CliResult<Descriptor> {
    Descriptor::from_value(v).map_err(|e| Failure::Parse(e.to_string()))
}

fn parse_point(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Failure::Parse(format!("bad number {x:?}: {e}"))))
        .collect()
}

fn parse_grid(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect()
}

fn point_arg(flag: &Option<String>, v: &Value, key: &str) -> CliResult<Vec<f64>> {
    if let Some(s) = flag {
        return parse_point(s);
    }
    match v.get(key) {
        Some(p) => serde_json::from_value(p.clone()).map_err(|e| Failure::Parse(format!("{key}: {e}"))),
        None => Err(Failure::Parse(format!("no point given; pass --{key} or a \"{key}\" field"))),
    }
}

fn seed() -> CliResult<u64> {
    match std::env::var("LB_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Failure::Parse(format!("LB_SEED={s:?} is not an unsigned integer"))),
        Err(_) => Ok(suite::DEFAULT_SEED),
    }
}

/// Potential view of any descriptor: the log-partition of an exponential
/// family, or the order-0 coefficient of a family or QFT.
fn potential_of(d: &Descriptor) -> CliResult<ConvexPotential> {
    Ok(match d {
        Descriptor::Potential(p) => p.build()?,
        Descriptor::ExponentialFamily(f) => f.build()?.as_potential(),
        Descriptor::Family(f) => f.build()?.leading(),
        Descriptor::Qft(q) => q.build()?.free_energy().leading(),
    })
}

#[derive(Serialize)]
struct DualPairOut {
    theta: Vec<f64>,
    eta: Vec<f64>,
    psi: f64,
    psi_star: f64,
    residual: f64,
}

fn cmd_transform(input: &Input, theta: &Option<String>, eta: &Option<String>) -> CliResult<u8> {
    let v = read_input(input)?;
    let p = potential_of(&parse_descriptor(&v)?)?;
    let theta = match eta {
        Some(e) => legendre::from_dual(&p, &parse_point(e)?, &p.default_start())?,
        None => point_arg(theta, &v, "theta")?,
    };
    if theta.len() != p.dim() {
        return Err(Error::Dimension { expected: p.dim(), got: theta.len() }.into());
    }
    let d = legendre::to_dual(&p, &theta)?;
    emit(&DualPairOut { theta: d.theta, eta: d.eta, psi: d.psi, psi_star: d.psi_star, residual: d.residual })?;
    Ok(0)
}

#[derive(Serialize)]
struct ReportOut<'a> {
    subject: &'a str,
    checks: &'a [legendre_bundle::report::Check],
    exit_status: u8,
}

fn cmd_verify(input: &Input, samples: usize, grid: &Option<String>, tol: &Tolerances) -> CliResult<u8> {
    let v = read_input(input)?;
    let d = parse_descriptor(&v)?;
    let grid = grid.as_deref().map(parse_grid).transpose()?;
    let seed = seed()?;
    let report = match &d {
        Descriptor::Potential(pd) => {
            let p = pd.build()?;
            let pts = grid.unwrap_or_else(|| suite::sample_points(p.domain(), samples, seed));
            suite::verify_potential(&p, &pts, tol)?
        }
        Descriptor::ExponentialFamily(fd) => {
            let fam = fd.build()?;
            let pts = grid.unwrap_or_else(|| suite::sample_points(&legendre_bundle::potential::BoxDomain::unbounded(fam.dim()), samples, seed));
            suite::verify_exponential_family(&fam, &pts, tol)?
        }
        Descriptor::Family(fd) => {
            let fam = fd.build()?;
            let pts = grid.unwrap_or_else(|| suite::sample_points(fam.domain(), samples, seed));
            suite::verify_family(fam.name(), &fam, &pts)?
        }
        Descriptor::Qft(qd) => match grid {
            Some(pts) => {
                let mut qd = qd.clone();
                qd.validation_grid = pts;
                verify_qft_descriptor(&qd)?
            }
            None => verify_qft_descriptor(qd)?,
        },
    };
    let exit_status = if report.passed() { 0 } else { 1 };
    for c in &report.checks {
        if c.status != Status::Pass {
            eprintln!("{}: {}", c.name, c.status.as_str());
        }
    }
    eprintln!("{}: {}", report.subject, if exit_status == 0 { "pass" } else { "fail" });
    emit(&ReportOut { subject: &report.subject, checks: &report.checks, exit_status })?;
    Ok(exit_status)
}

/// A QFT whose free energy is not formally convex on its grid is a failed
/// check rather than an input error.
fn verify_qft_descriptor(qd: &legendre_bundle::descriptor::QftDescriptor) -> CliResult<Report> {
    match qd.build() {
        Ok(q) => Ok(suite::verify_qft(&q)?),
        Err(Error::Convexity { .. }) => {
            let fam = qd.free_energy.build()?;
            Ok(suite::verify_family(&qd.name, &fam, &qd.validation_grid)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_fiber(input: &Input, theta: &Option<String>) -> CliResult<u8> {
    let v = read_input(input)?;
    let p = potential_of(&parse_descriptor(&v)?)?;
    let theta = point_arg(theta, &v, "theta")?;
    let fiber = build_fiber(&DuallyFlatManifold::new(p), &theta)?;
    emit(&fiber.dump())?;
    Ok(0)
}

#[derive(Serialize)]
struct MetricRow {
    theta: Vec<f64>,
    metric: Vec<Vec<f64>>,
}

fn cmd_metric(
    input: &Input,
    grid: &Option<String>,
    range: (Option<f64>, Option<f64>, Option<f64>),
    csv: bool,
) -> CliResult<u8> {
    let v = read_input(input)?;
    let p = potential_of(&parse_descriptor(&v)?)?;
    let points = match (grid, range) {
        (Some(g), _) => parse_grid(g)?,
        (None, (Some(a), Some(b), Some(h))) if h > 0.0 && b >= a => {
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|k| vec![a + k as f64 * h]).collect()
        }
        (None, (Some(_), Some(_), Some(_))) => return Err(Failure::Parse("need --step > 0 and --to >= --from".into())),
        _ => match v.get("grid") {
            Some(g) => serde_json::from_value(g.clone()).map_err(|e| Failure::Parse(format!("grid: {e}")))?,
            None => return Err(Failure::Parse("no grid; pass --grid or --from/--to/--step".into())),
        },
    };
    let rows = points
        .into_iter()
        .map(|t| {
            let g = p.hessian(&t)?;
            Ok(MetricRow { theta: t, metric: to_rows(&g) })
        })
        .collect::<legendre_bundle::Result<Vec<_>>>()?;
    if csv {
        let n = p.dim();
        let mut header: Vec<String> = (0..n).map(|i| if n == 1 { "theta".into() } else { format!("theta_{i}") }).collect();
        for i in 0..n {
            for j in 0..n {
                header.push(format!("g_{i}{j}"));
            }
        }
        let stdout = io::stdout();
        let mut out = stdout.lock();
        writeln!(out, "{}", header.join(","))?;
        for r in &rows {
            let cells: Vec<String> = r.theta.iter().chain(r.metric.iter().flatten()).map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
    } else {
        emit(&rows)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct FamilyOut {
    name: String,
    point: Vec<f64>,
    order: usize,
    value: Vec<f64>,
    gradient: Vec<Vec<f64>>,
    hessian: Vec<Vec<Vec<f64>>>,
}

fn cmd_family(input: &Input, point: &Option<String>, u_order: Option<usize>) -> CliResult<u8> {
    let v = read_input(input)?;
    let fam = match parse_descriptor(&v)? {
        Descriptor::Family(f) => f.build()?,
        Descriptor::Qft(q) => q.build()?.free_energy().clone(),
        other => FamilyPotential::classical(&potential_of(&other)?, 0),
    };
    let t = match point_arg(point, &v, "point") {
        Ok(t) => t,
        Err(_) => point_arg(&None, &v, "theta")?,
    };
    let order = u_order.unwrap_or(fam.order());
    let value = fam.family_eval(&t)?.truncate(order).coeffs().to_vec();
    let gradient = fam
        .family_gradient(&t)?
        .into_iter()
        .map(|s| s.truncate(order).coeffs().to_vec())
        .collect();
    let h = fam.family_hessian(&t)?;
    let hessian = (0..=order)
        .map(|k| {
            if k <= h.order() {
                to_rows(h.coeff(k))
            } else {
                vec![vec![0.0; fam.dim()]; fam.dim()]
            }
        })
        .collect();
    emit(&FamilyOut { name: fam.name().to_string(), point: t, order, value, gradient, hessian })?;
    Ok(0)
}

fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Transform { input, theta, eta } => cmd_transform(input, theta, eta),
        Command::Verify { input, samples, grid, tol } => cmd_verify(input, *samples, grid, &tol.into()),
        Command::Fiber { input, theta } => cmd_fiber(input, theta),
        Command::Metric { input, grid, from, to, step, csv } => cmd_metric(input, grid, (*from, *to, *step), *csv),
        Command::Family { input, point, u_order } => cmd_family(input, point, *u_order),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
