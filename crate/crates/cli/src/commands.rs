use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use fiberlab::cech::{classify, cocycle_check, euler_class, Base, Cocycle1};
use fiberlab::circle_diffeo::{retract, CircleDiffeo, DEFAULT_GRID};
use fiberlab::csf::{self, CurveState, FlowParams, TraceRow};
use fiberlab::fields::{FieldGrid, RandomField};
use fiberlab::geometry::{FibrationModel, TotalPoint};
use fiberlab::moduli::{self, CenterMeasure, Fibering};
use fiberlab::selftest;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fiberlab", version, about = "Numerical experiments on circle fiberings")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the heat-flow retraction of a circle diffeomorphism onto rotations.
    Heatflow(HeatflowArgs),
    /// Euler number of a clutching cocycle on the two-cap cover of S2.
    Euler(EulerArgs),
    /// Total space and core of an oriented circle fibering.
    Classify(ClassifyArgs),
    /// Horizontal transport of a total-space point to a base point.
    Transport(TransportArgs),
    /// Split a sampled vector field into fair and projectable parts.
    SplitField(SplitFieldArgs),
    /// Straighten a perturbed fibering onto model fibers.
    Straighten(StraightenArgs),
    /// Primitive homology class of a closed curve in a flat torus.
    Slope(SlopeArgs),
    /// Center of mass of the projection of a fiber shape.
    Karcher(KarcherArgs),
    /// Curve-shortening flow of a perturbed linear fibering of T2.
    Csf(CsfArgs),
    /// Run the invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct HeatflowArgs {
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oscillation of the random displacement.
    #[arg(long, default_value_t = 0.3)]
    amp: f64,
    /// Number of equally spaced times in [0, 1].
    #[arg(long, default_value_t = 11)]
    t_samples: usize,
    /// Diffeomorphism JSON {"n", "disp"}; random when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EulerArgs {
    #[arg(long)]
    cocycle: PathBuf,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    base: String,
    #[arg(long, allow_hyphen_values = true)]
    euler: i64,
}

#[derive(Debug, Args)]
struct TransportArgs {
    #[arg(long)]
    model: FibrationModel,
    /// JSON array with the coordinates of a total-space point.
    #[arg(long)]
    from: PathBuf,
    /// JSON array with the coordinates of the target base point.
    #[arg(long)]
    to: PathBuf,
}

#[derive(Debug, Args)]
struct SplitFieldArgs {
    /// FieldGrid JSON; a random field on the model grid when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value = "flat-t2")]
    model: FibrationModel,
    #[arg(long, default_value_t = 64)]
    nb: usize,
    #[arg(long, default_value_t = 64)]
    nf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the splitting diagnostics.
    #[arg(long)]
    report: bool,
    #[arg(long)]
    fair_out: Option<PathBuf>,
    #[arg(long)]
    projectable_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StraightenArgs {
    /// Expected model; checked against the input.
    #[arg(long)]
    model: Option<FibrationModel>,
    /// Fibering JSON; a perturbed model fibering when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    nb: usize,
    #[arg(long, default_value_t = 64)]
    nf: usize,
    /// Size of the random push applied to the generated fibering.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Refinement passes; 1 is plain straightening.
    #[arg(long, default_value_t = 1)]
    passes: usize,
    #[arg(long, default_value = "fiber-induced")]
    measure: CenterMeasure,
    /// Per-fiber CSV: fiber, residual, center coordinates.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the generated input fibering here.
    #[arg(long)]
    save_input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SlopeArgs {
    /// Fibering JSON, or {"model", "samples"} for a single curve.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: Option<FibrationModel>,
    /// Keep the traversal sign instead of normalizing it.
    #[arg(long)]
    oriented: bool,
}

#[derive(Debug, Args)]
struct KarcherArgs {
    #[arg(long, default_value = "hopf")]
    model: FibrationModel,
    /// Shape JSON {"model", "samples"}; a random shape when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    #[arg(long, default_value_t = 32)]
    points: usize,
    #[arg(long, default_value = "arclength")]
    measure: CenterMeasure,
    /// Resolution of the brute-force check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    brute: usize,
}

#[derive(Debug, Args)]
struct CsfArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2", allow_hyphen_values = true)]
    slope: Vec<i64>,
    #[arg(long, default_value_t = 0.1)]
    amp: f64,
    #[arg(long, default_value_t = 512)]
    points: usize,
    #[arg(long, default_value_t = 1)]
    fibers: usize,
    #[arg(long, default_value_t = csf::DEFAULT_CFL)]
    cfl: f64,
    #[arg(long, default_value_t = 1e-3)]
    kappa_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1000)]
    resample_period: usize,
    #[arg(long, default_value_t = 1000)]
    record_period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flat-t2 fibering JSON to flow instead of a generated one.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Trace CSV: t, length, max_kappa, min_pair_dist.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the terminal fibering here.
    #[arg(long)]
    fibering_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Comma-separated criterion numbers; all when absent.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn csv_writer(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Heatflow(a) => heatflow(a),
        Command::Euler(a) => euler(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Transport(a) => transport(a),
        Command::SplitField(a) => split_field(a),
        Command::Straighten(a) => straighten(a),
        Command::Slope(a) => slope(a),
        Command::Karcher(a) => karcher(a),
        Command::Csf(a) => csf_cmd(a),
        Command::Selftest(a) => return selftest_cmd(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct HeatRow {
    t: f64,
    sup_displacement: f64,
    min_derivative: f64,
}

fn heatflow(a: HeatflowArgs) -> CliResult<()> {
    if a.t_samples < 2 {
        return Err(CliError::Config("--t-samples must be at least 2".into()));
    }
    let f = match &a.input {
        Some(p) => CircleDiffeo::from_json(&read_json(p)?)?,
        None => CircleDiffeo::random(a.grid, a.amp, &mut rng(a.seed))?,
    };
    let mut w = csv_writer(a.out.as_deref())?;
    for k in 0..a.t_samples {
        let t = k as f64 / (a.t_samples - 1) as f64;
        let h = retract(&f, t)?;
        w.serialize(HeatRow {
            t,
            sup_displacement: h.displacement().oscillation(),
            min_derivative: h.min_derivative(),
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn euler(a: EulerArgs) -> CliResult<()> {
    let (tau, cover) = Cocycle1::from_json(&read_json(&a.cocycle)?)?;
    let e = euler_class(&tau, &cover)?;
    print_json(&json!({
        "base": cover.base().to_string(),
        "euler": e,
        "residual": cocycle_check(&tau, &cover)?,
    }));
    Ok(())
}

fn classify_cmd(a: ClassifyArgs) -> CliResult<()> {
    let base: Base = a.base.parse()?;
    let record = classify(base, a.euler)?;
    print_json(&serde_json::to_value(record).expect("plain record"));
    Ok(())
}

fn coords(value: &serde_json::Value, path: &Path) -> CliResult<Vec<f64>> {
    serde_json::from_value(value.clone()).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn transport(a: TransportArgs) -> CliResult<()> {
    let model = a.model;
    let q = model.point_from_slice(&coords(&read_json(&a.from)?, &a.from)?)?;
    let x = model.base_from_slice(&coords(&read_json(&a.to)?, &a.to)?)?;
    let end = model.horizontal_transport(q, x)?;
    print_json(&json!({
        "model": model,
        "point": model.point_to_vec(end),
        "base": model.base_to_vec(model.project(end)),
    }));
    Ok(())
}

fn split_field(a: SplitFieldArgs) -> CliResult<()> {
    let x = match &a.input {
        Some(p) => FieldGrid::from_json(&read_json(p)?)?,
        None => FieldGrid::sample(a.model, a.nb, a.nf, &RandomField::new(a.model, 1.0, &mut rng(a.seed)))?,
    };
    let fair = x.fair_part();
    if let Some(p) = &a.fair_out {
        write_json(p, &fair.to_json())?;
    }
    if let Some(p) = &a.projectable_out {
        write_json(p, &x.horizontal_average().to_json())?;
    }
    if a.report || (a.fair_out.is_none() && a.projectable_out.is_none()) {
        print_json(&serde_json::to_value(x.split_report()).expect("plain record"));
    }
    Ok(())
}

fn straighten(a: StraightenArgs) -> CliResult<()> {
    if a.passes == 0 {
        return Err(CliError::Config("--passes must be at least 1".into()));
    }
    let f = match &a.input {
        Some(p) => Fibering::from_json(&read_json(p)?)?,
        None => {
            let model = a.model.unwrap_or(FibrationModel::Hopf);
            let base = Fibering::model_fibering(model, a.nb, a.nf)?;
            let x = FieldGrid::sample(model, a.nb, a.nf, &RandomField::new(model, 1.0, &mut rng(a.seed)))?;
            moduli::push_by_exp(&base, &x, a.eps)?
        }
    };
    if let Some(m) = a.model {
        if m != f.model {
            return Err(CliError::Config(format!("--model {m} but the input fibering is {}", f.model)));
        }
    }
    if let Some(p) = &a.save_input {
        write_json(p, &f.to_json())?;
    }
    let (straight, report) = moduli::straighten(&f, a.measure)?;
    let (result, refine_residuals) = if a.passes > 1 {
        let r = moduli::refine(&f, a.passes, a.measure)?;
        (r.fibering, Some(r.residuals))
    } else {
        (straight.clone(), None)
    };
    if let Some(p) = &a.report {
        let mut w = csv_writer(Some(p))?;
        let dims = f.model.base_len();
        let mut header = vec!["fiber".to_string(), "residual".to_string()];
        header.extend((0..dims).map(|d| format!("center_{d}")));
        w.write_record(&header)?;
        for (b, (res, c)) in report.residuals.iter().zip(&straight.labels).enumerate() {
            let mut row = vec![b.to_string(), res.to_string()];
            row.extend(f.model.base_to_vec(*c).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    if let Some(p) = &a.out {
        write_json(p, &result.to_json())?;
    }
    print_json(&json!({
        "model": f.model,
        "nb": f.len(),
        "max_residual": report.max_residual,
        "min_label_separation": report.min_label_separation,
        "refine_residuals": refine_residuals,
    }));
    Ok(())
}

#[derive(Deserialize)]
struct ShapeJson {
    model: Option<FibrationModel>,
    samples: Vec<Vec<f64>>,
}

fn read_shape(path: &Path, flag: Option<FibrationModel>) -> CliResult<(FibrationModel, Vec<TotalPoint>)> {
    let raw: ShapeJson = serde_json::from_value(read_json(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let model = match (raw.model, flag) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("--model {b} but the input shape is {a}")));
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(CliError::Config("the shape names no model; pass --model".into())),
    };
    let samples = raw
        .samples
        .iter()
        .map(|c| model.point_from_slice(c))
        .collect::<fiberlab::Result<Vec<_>>>()?;
    Ok((model, samples))
}

fn slope(a: SlopeArgs) -> CliResult<()> {
    let value = read_json(&a.input)?;
    if value.get("fibers").is_some() {
        let f = Fibering::from_json(&value)?;
        let slopes = f
            .fibers
            .iter()
            .map(|fb| moduli::slope(f.model, fb, a.oriented))
            .collect::<fiberlab::Result<Vec<_>>>()?;
        print_json(&json!({ "model": f.model, "slopes": slopes }));
    } else {
        let (model, samples) = read_shape(&a.input, a.model)?;
        print_json(&json!({ "model": model, "slope": moduli::slope(model, &samples, a.oriented)? }));
    }
    Ok(())
}

fn karcher(a: KarcherArgs) -> CliResult<()> {
    let (model, samples) = match &a.input {
        Some(p) => read_shape(p, Some(a.model))?,
        None => (a.model, selftest::random_shape(a.model, a.points, a.radius, &mut rng(a.seed))?),
    };
    let center = moduli::karcher_center(model, &samples, a.measure)?;
    let mut out = json!({
        "model": model,
        "center": model.base_to_vec(center),
    });
    if a.brute > 0 {
        let b = moduli::brute_center(model, &samples, a.measure, a.brute)?;
        out["brute_center"] = json!(model.base_to_vec(b.point));
        out["cell_offset"] = json!(b.cell_offset(model, center));
    }
    print_json(&out);
    Ok(())
}

fn write_trace(path: Option<&Path>, rows: &[TraceRow]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn csf_cmd(a: CsfArgs) -> CliResult<()> {
    let params = FlowParams {
        cfl: a.cfl,
        kappa_tol: a.kappa_tol,
        t_max: a.t_max,
        resample_period: a.resample_period,
        record_period: a.record_period,
    };
    let curves = match &a.input {
        Some(p) => csf::curves_of(&Fibering::from_json(&read_json(p)?)?)?,
        None => {
            let w: [i64; 2] = a
                .slope
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Config("--slope takes two integers, e.g. 1,2".into()))?;
            csf::perturbed_linear_fibering(w, a.fibers, a.points, a.amp, &mut rng(a.seed))?
        }
    };
    let (terminal, summary) = if curves.len() == 1 {
        let (c, trace) = csf::flow_until(&curves[0], &params)?;
        write_trace(a.out.as_deref(), &trace.rows)?;
        let slope = moduli::slope(FibrationModel::FlatT2, &c.wrapped(), true)?;
        let summary = json!({
            "steps": trace.steps,
            "t": trace.t,
            "max_kappa": trace.max_kappa,
            "length": c.length(),
            "slope": slope,
        });
        (csf::fibering_of(&[c]), summary)
    } else {
        let (g, report) = csf::flow_fibering(&csf::fibering_of(&curves), &params)?;
        write_trace(a.out.as_deref(), &report.trace.rows)?;
        let lengths: Vec<f64> = csf::curves_of(&g)?.iter().map(CurveState::length).collect();
        let summary = json!({
            "steps": report.trace.steps,
            "t": report.trace.t,
            "max_kappa": report.trace.max_kappa,
            "min_pair_dist": report.trace.min_pair_dist,
            "max_length": lengths.iter().copied().fold(0.0, f64::max),
            "slope": report.initial_slope,
            "core": report.core,
            "core_tol": report.core_tol,
        });
        (g, summary)
    };
    if let Some(p) = &a.fibering_out {
        write_json(p, &terminal.to_json())?;
    }
    if a.out.is_some() {
        print_json(&summary);
    } else {
        eprintln!("{}", serde_json::to_string(&summary).expect("serializable"));
    }
    Ok(())
}

fn selftest_cmd(a: SelftestArgs) -> CliResult<ExitCode> {
    let ids: Vec<usize> = if a.only.is_empty() { (1..=8).collect() } else { a.only };
    let mut all = true;
    for id in ids {
        let report = selftest::run(id, a.seed)?;
        println!("{}", report.line());
        all &= report.passed;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
