//! Command-line verbs over finsler-core scenarios, with JSON/CSV report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use finsler_core::field::Vector;
use finsler_core::foliation::{check_finsler_partition, check_parallel, orthogonal_cone, Direction, ParallelOptions};
use finsler_core::geodesic::integrate_geodesic;
use finsler_core::metric::Point;
use finsler_core::scenario::{self, describe_example, parse_scenario, Example, Scenario, EXAMPLE_NAMES};
use finsler_core::transnormal::{
    attach_fit_slopes, check_morse_bott, check_transnormal, trace_f_segment, verify_distance_formula, MorseBottOptions,
    SegmentOptions, TransnormalityReport,
};
use finsler_core::FinslerError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const TRANSNORMAL_LEVELS: usize = 160;
const POINTS_PER_LEVEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    CheckTransnormal,
    TraceSegment,
    VerifyDistance,
    CheckParallel,
    CheckPartition,
    CheckMorseBott,
    DumpGeodesic,
    ListExamples,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::CheckTransnormal => "check-transnormal",
            Verb::TraceSegment => "trace-segment",
            Verb::VerifyDistance => "verify-distance",
            Verb::CheckParallel => "check-parallel",
            Verb::CheckPartition => "check-partition",
            Verb::CheckMorseBott => "check-morse-bott",
            Verb::DumpGeodesic => "dump-geodesic",
            Verb::ListExamples => "list-examples",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Backward => Direction::Backward,
        }
    }
}

/// Numerical experiments on transnormal functions of Randers/Finsler metrics.
#[derive(Debug, Clone, Parser)]
#[command(name = "finsler-lab", version)]
pub struct Cli {
    pub verb: Verb,
    /// Built-in example name (see `list-examples`).
    #[arg(long, conflicts_with = "scenario")]
    pub example: Option<String>,
    /// Scenario file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Lower level, or the start level for segments and geodesics.
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Upper level, or the integration length for `dump-geodesic`.
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub probes: Option<usize>,
    /// Integrator step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Verdict tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory for the JSON report, CSV files and run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "forward")]
    pub direction: DirectionArg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] FinslerError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_config_error() => EXIT_CONFIG,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Io { .. } | CliError::Usage(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub verb: String,
    pub verdict: bool,
    pub defects: BTreeMap<String, Option<f64>>,
    pub data: Value,
    pub manifest: Manifest,
}

/// A finished run: the report plus any CSV artifacts, keyed by file name.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub csv: Vec<(String, String)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.verdict {
            EXIT_PASS
        } else {
            EXIT_FAILED_VERDICT
        }
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("reports serialize") + "\n"
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn load(cli: &Cli) -> Result<Example, CliError> {
    match (&cli.example, &cli.scenario) {
        (Some(name), None) => Ok(scenario::example(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            let chart = Scenario::from_config(parse_scenario(&text)?)?;
            Ok(Example { name: "scenario-file", description: "user scenario", charts: vec![chart] })
        }
        _ => Err(CliError::Usage("exactly one of --example or --scenario is required".into())),
    }
}

fn configure(chart: &Scenario, cli: &Cli) -> Scenario {
    let mut chart = chart.clone();
    if let Some(step) = cli.step {
        chart.config.numerics.step = step;
    }
    if let Some(p) = cli.probes {
        chart.config.numerics.probes = p;
    }
    chart
}

fn transnormal(chart: &Scenario) -> Result<TransnormalityReport, CliError> {
    let pts = chart.transnormal_samples(TRANSNORMAL_LEVELS, POINTS_PER_LEVEL)?;
    Ok(check_transnormal(&chart.metric, &chart.f, &pts, &chart.transnormal_options())?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn start_point(chart: &Scenario, level: f64, seed: u64) -> Result<Point, CliError> {
    let sample = chart.sampler.sample(&chart.f, level, 16)?;
    Ok(sample.points[(seed as usize) % sample.points.len()].clone())
}

fn command_line(cli: &Cli) -> Vec<String> {
    let mut v = vec![cli.verb.name().to_string()];
    let mut push = |k: &str, val: Option<String>| {
        if let Some(val) = val {
            v.push(format!("--{k}"));
            v.push(val);
        }
    };
    push("example", cli.example.clone());
    push("scenario", cli.scenario.as_ref().map(|p| p.display().to_string()));
    push("from", cli.from.map(|x| x.to_string()));
    push("to", cli.to.map(|x| x.to_string()));
    push("probes", cli.probes.map(|x| x.to_string()));
    push("step", cli.step.map(|x| x.to_string()));
    push("tol", cli.tol.map(|x| x.to_string()));
    push("seed", Some(cli.seed.to_string()));
    push("direction", Some(format!("{:?}", cli.direction).to_lowercase()));
    v
}

/// Runs one verb and returns the report; nothing is written.
pub fn run_command(cli: &Cli) -> Result<Outcome, CliError> {
    let mut defects: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let mut csv: Vec<(String, String)> = Vec::new();
    let (scenario_name, verdict, data) = if cli.verb == Verb::ListExamples {
        let list: Vec<Value> = EXAMPLE_NAMES
            .iter()
            .map(|n| json!({ "name": n, "description": describe_example(n) }))
            .collect();
        ("registry".to_string(), true, json!({ "examples": list }))
    } else {
        let example = load(cli)?;
        let primary = configure(example.primary(), cli);
        let name = if cli.example.is_some() { example.name.to_string() } else { primary.name().to_string() };
        let (verdict, data) = match cli.verb {
            Verb::CheckTransnormal => {
                let mut charts = Vec::new();
                let mut ok = true;
                let mut table = String::from("chart,level,b,spread,count\n");
                for chart in &example.charts {
                    let chart = configure(chart, cli);
                    let mut opts = chart.transnormal_options();
                    if let Some(t) = cli.tol {
                        opts.tolerance = t;
                    }
                    let pts = chart.transnormal_samples(TRANSNORMAL_LEVELS, POINTS_PER_LEVEL)?;
                    let rep = check_transnormal(&chart.metric, &chart.f, &pts, &opts)?;
                    ok &= rep.verdict;
                    let key = format!("{}.spread_per_level", chart.name());
                    defects.insert(key, finite(rep.spread_per_level));
                    if let Some(b) = &chart.b_oracle {
                        let err = rep.b_table.iter().map(|r| (r.b - b(r.level)).abs()).fold(0.0, f64::max);
                        defects.insert(format!("{}.closed_form_b_error", chart.name()), finite(err));
                    }
                    for r in &rep.b_table {
                        let _ = writeln!(table, "{},{:?},{:?},{:?},{}", chart.name(), r.level, r.b, r.spread, r.values.len());
                    }
                    charts.push(json!({ "chart": chart.name(), "report": to_value(&rep) }));
                }
                csv.push(("b_table.csv".into(), table));
                (ok, json!({ "charts": charts }))
            }
            Verb::TraceSegment => {
                let level = cli.from.unwrap_or(primary.distance_pair.0);
                let start = start_point(&primary, level, cli.seed)?;
                let opts = SegmentOptions {
                    step: primary.config.numerics.step,
                    levels: primary.partition_levels.clone(),
                    until_level: cli.to,
                    domain: primary.domain().clone(),
                    max_length: 10.0,
                    ..SegmentOptions::default()
                };
                let seg = trace_f_segment(&primary.metric, &primary.f, &start, cli.direction.into(), &opts)?;
                let tol = cli.tol.unwrap_or(1e-5);
                defects.insert("geodesic_residual".into(), finite(seg.geodesic_residual));
                defects.insert("reparametrization_residual".into(), finite(seg.reparametrization_residual));
                csv.push(("trajectory.csv".into(), seg.trajectory.to_csv()));
                let ok = seg.geodesic_residual <= tol && seg.strictly_monotone && seg.reparametrization_residual <= 1e-6;
                let mut v = to_value(&seg);
                v["trajectory"] = json!({ "samples": seg.trajectory.samples.len(), "end": seg.trajectory.endpoint().coords });
                v["start"] = to_value(&start);
                (ok, v)
            }
            Verb::VerifyDistance => {
                let c = cli.from.unwrap_or(primary.distance_pair.0);
                let d = cli.to.unwrap_or(primary.distance_pair.1);
                let rep = transnormal(&primary)?;
                let check = verify_distance_formula(
                    &primary.metric,
                    &primary.f,
                    primary.sampler.as_ref(),
                    &rep.b_fit,
                    c,
                    d,
                    primary.config.numerics.probes,
                    &primary.geodesic_options(),
                )?;
                defects.insert("distance_defect".into(), finite(check.defect));
                (check.defect <= cli.tol.unwrap_or(1e-4), to_value(&check))
            }
            Verb::CheckParallel => {
                let c = cli.from.unwrap_or(primary.partition_levels[0]);
                let d = cli.to.unwrap_or(*primary.partition_levels.last().unwrap());
                let mut opts = ParallelOptions::new(primary.geodesic_options());
                opts.tolerance = cli.tol.unwrap_or(primary.config.numerics.parallel_tolerance);
                let rep = check_parallel(
                    &primary.metric,
                    &primary.f,
                    primary.sampler.as_ref(),
                    c,
                    d,
                    cli.direction.into(),
                    primary.config.numerics.probes,
                    &opts,
                )?;
                defects.insert("max_defect".into(), finite(rep.max_defect));
                let mut table = String::from("start_x,start_y,arrived,defect,arc_length\n");
                for p in &rep.probes {
                    let cell = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
                    let _ = writeln!(
                        table,
                        "{},{},{},{},{}",
                        cell(p.start.first().copied()),
                        cell(p.start.get(1).copied()),
                        p.arrived,
                        cell(p.defect),
                        cell(p.arc_length)
                    );
                }
                csv.push(("probes.csv".into(), table));
                (rep.verdict, to_value(&rep))
            }
            Verb::CheckPartition => {
                let explicit = match (cli.from, cli.to) {
                    (Some(a), Some(b)) => Some(vec![a, 0.5 * (a + b), b]),
                    (None, None) => None,
                    _ => return Err(CliError::Usage("--from and --to must be given together".into())),
                };
                let charts: Vec<Scenario> = if explicit.is_some() { vec![primary.clone()] } else { example.charts.clone() };
                let mut ok = true;
                let mut out = Vec::new();
                for chart in charts {
                    let chart = configure(&chart, cli);
                    let mut opts = ParallelOptions::new(chart.geodesic_options());
                    opts.tolerance = cli.tol.unwrap_or(chart.config.numerics.parallel_tolerance);
                    let levels = explicit.clone().unwrap_or_else(|| chart.partition_levels.clone());
                    let rep = check_finsler_partition(
                        &chart.metric,
                        &chart.f,
                        chart.sampler.as_ref(),
                        &levels,
                        chart.config.numerics.probes,
                        &opts,
                    )?;
                    ok &= rep.finsler_partition_verdict;
                    let fw = rep.forward.iter().map(|r| r.max_defect).fold(0.0, f64::max);
                    let bw = rep.backward.iter().map(|r| r.max_defect).fold(0.0, f64::max);
                    let cyl = rep.cylinder_match_defects.iter().cloned().fold(0.0, f64::max);
                    defects.insert(format!("{}.forward_max_defect", chart.name()), finite(fw));
                    defects.insert(format!("{}.backward_max_defect", chart.name()), finite(bw));
                    defects.insert(format!("{}.cylinder_max_defect", chart.name()), finite(cyl));
                    let mut v = to_value(&rep);
                    for key in ["forward", "backward"] {
                        if let Some(list) = v[key].as_array_mut() {
                            for r in list {
                                if let Some(obj) = r.as_object_mut() {
                                    obj.remove("probes");
                                }
                            }
                        }
                    }
                    out.push(json!({ "chart": chart.name(), "report": v }));
                }
                (ok, json!({ "charts": out }))
            }
            Verb::CheckMorseBott => {
                let mut ok = true;
                let mut out = Vec::new();
                for chart in &example.charts {
                    let chart = configure(chart, cli);
                    let opts = MorseBottOptions { domain: chart.domain().clone(), ..MorseBottOptions::default() };
                    match check_morse_bott(&chart.metric, &chart.f, &chart.morse_seeds, &opts) {
                        Ok(mut rep) => {
                            if let Ok(t) = transnormal(&chart) {
                                attach_fit_slopes(&mut rep, &t.b_fit);
                            }
                            ok &= rep.verdict;
                            defects.insert(format!("{}.hessian_identity_defect", chart.name()), finite(rep.max_hessian_defect));
                            ok &= rep.max_hessian_defect <= cli.tol.unwrap_or(1e-3);
                            out.push(json!({ "chart": chart.name(), "report": to_value(&rep) }));
                        }
                        Err(FinslerError::NoCriticalPoint { seeds }) => {
                            ok = false;
                            out.push(json!({ "chart": chart.name(), "error": format!("no critical point found from {seeds} seeds") }));
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                (ok, json!({ "charts": out }))
            }
            Verb::DumpGeodesic => {
                let level = cli.from.unwrap_or(primary.partition_levels[0]);
                let start = start_point(&primary, level, cli.seed)?;
                let cone = orthogonal_cone(&primary.metric, &primary.f, &start)?;
                let v0 = cone.ray(cli.direction.into());
                let length = cli.to.unwrap_or(0.5);
                let step = primary.config.numerics.step;
                let (tr, truncated) = match integrate_geodesic(&primary.metric, &v0, length, step, primary.domain()) {
                    Err(FinslerError::LeftDomain { time, .. }) if time > step => {
                        let cut = ((time / step).floor() - 1.0) * step;
                        (integrate_geodesic(&primary.metric, &v0, cut, step, primary.domain())?, Some(cut))
                    }
                    other => (other?, None),
                };
                let drift = tr.speed_drift(&primary.metric)?;
                defects.insert("speed_drift".into(), finite(drift));
                csv.push(("trajectory.csv".into(), tr.to_csv()));
                let end = tr.endpoint();
                (
                    drift <= cli.tol.unwrap_or(1e-6),
                    json!({
                        "start": start.coords,
                        "initial_velocity": v0.components.as_slice(),
                        "length": length,
                        "truncated_at_domain_boundary": truncated,
                        "samples": tr.samples.len(),
                        "end": end.coords,
                        "end_level": primary.f.eval(&Vector::from_column_slice(&end.coords)),
                        "arc_length": tr.arc_length(),
                    }),
                )
            }
            Verb::ListExamples => unreachable!(),
        };
        (name, verdict, data)
    };
    let mut outputs = Vec::new();
    if cli.out.is_some() {
        if cli.format != Format::Csv {
            outputs.push(format!("{}.json", cli.verb.name()));
        }
        if cli.format != Format::Json {
            outputs.extend(csv.iter().map(|(n, _)| n.clone()));
        }
        outputs.push("run-manifest.json".into());
    }
    let versions = BTreeMap::from([
        ("finsler-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("report-format".to_string(), "1".to_string()),
    ]);
    let report = Report {
        manifest: Manifest { scenario: scenario_name.clone(), command: command_line(cli), seed: cli.seed, versions, outputs },
        scenario: scenario_name,
        verb: cli.verb.name().to_string(),
        verdict,
        defects,
        data,
    };
    Ok(Outcome { report, csv })
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Writes the artifacts of `outcome` into `dir`; the run manifest also carries wall time.
pub fn write_outputs(cli: &Cli, outcome: &Outcome, dir: &Path, wall_time: f64) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    if cli.format != Format::Csv {
        write_file(dir, &format!("{}.json", cli.verb.name()), &outcome.json())?;
    }
    if cli.format != Format::Json {
        for (name, content) in &outcome.csv {
            write_file(dir, name, content)?;
        }
    }
    let manifest = json!({ "manifest": outcome.report.manifest, "wall_time_seconds": wall_time });
    write_file(dir, "run-manifest.json", &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

/// Parses arguments, runs the verb, writes or prints the outputs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let started = Instant::now();
    let outcome = match run_command(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("finsler-lab: {e}");
            return e.exit_code();
        }
    };
    match &cli.out {
        Some(dir) => {
            if let Err(e) = write_outputs(&cli, &outcome, dir, started.elapsed().as_secs_f64()) {
                eprintln!("finsler-lab: {e}");
                return e.exit_code();
            }
            emit(&format!("{} {}: verdict {}\n", outcome.report.verb, outcome.report.scenario, outcome.report.verdict));
        }
        None => {
            let mut text = String::new();
            if cli.format != Format::Csv {
                text.push_str(&outcome.json());
            }
            if cli.format != Format::Json {
                outcome.csv.iter().for_each(|(_, c)| text.push_str(c));
            }
            emit(&text);
        }
    }
    outcome.exit_code()
}
