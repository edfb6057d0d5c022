//! Command-line front end.
//!
//! Every command prints a JSON report on stdout and, with `--out`, writes it
//! to `<out>/<command>.json` next to any CSV output. Reports embed the fully
//! resolved [`RunConfig`]. Exit codes: 0 success, 1 a check failed, 2 usage
//! or data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_field, line_invariance, sign_propagation_check, trace_along_segment, ClassificationReport,
    ClassifyOptions, DetectOptions, SignPropagationReport, Verdict,
};
use crate::averaging::{verify_averaging, AveragingReport};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryAtlas, NormSpec, PlanarNorm, Smoothness, DEFAULT_SAMPLES};
use crate::grid::{FieldGrid, GridGeometry, DEFAULT_FIELD_TOL};
use crate::holder::HolderOptions;
use crate::kinetic::{kinetic_check, KineticOptions, KineticReport};
use crate::modulus::{
    fit_power_type, log_deltas, min_curvature, nordlander_check, omega_curve, sandwich_check, ModulusCurve,
    ModulusOptions, NordlanderReport, PowerTypeFit, RhoProfile, SandwichReport,
};
use crate::vortex::VortexField;
use crate::{to_arr, Vec2};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

pub const DEFAULT_AVERAGING_SAMPLES: usize = 20_000;
pub const DEFAULT_AVERAGING_POINTS: usize = 64;
pub const DEFAULT_SIGN_PAIRS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    NormInspect,
    Modulus,
    FitPowerType,
    AveragingVerify,
    VortexGen,
    KineticCheck,
    FieldAnalyze,
}

impl CommandKind {
    fn report_name(self) -> &'static str {
        match self {
            CommandKind::NormInspect => "norm-inspect",
            CommandKind::Modulus => "modulus",
            CommandKind::FitPowerType => "fit-power-type",
            CommandKind::AveragingVerify => "averaging-verify",
            CommandKind::VortexGen => "vortex-gen",
            CommandKind::KineticCheck => "kinetic-check",
            CommandKind::FieldAnalyze => "field-analyze",
        }
    }
}

/// Everything a run depends on. Loaded from `--config` (unknown keys are
/// rejected) and overridden by explicit flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    /// required by every command except those reading a field whose sidecar
    /// names the norm
    pub norm: Option<NormSpec>,
    /// input field CSV
    pub field: Option<PathBuf>,
    /// output directory; nothing is written without it
    pub out: Option<PathBuf>,
    /// boundary samples; default 4096, or 20000 for `averaging verify`
    pub n_samples: Option<usize>,
    /// default 64
    pub n_directions: usize,
    /// default 0
    pub seed: u64,
    /// default 1e-6
    pub field_tol: f64,
    /// default 0.05
    pub class_tol: f64,
    /// default 0.05
    pub exponent_tol: f64,
    /// default 128
    pub n_lines: usize,
    /// default 64
    pub n_points: usize,
    /// default [1e-3, 1e-1]
    pub fit_range: [f64; 2],
    /// default 24
    pub n_deltas: usize,
    /// default [0, 0]
    pub vortex_center: [f64; 2],
    /// default 1
    pub vortex_sign: i8,
    /// cells per axis; default 256
    pub grid_n: usize,
    /// default [-1, 1]
    pub grid_extent: [f64; 2],
    /// default false
    pub emit_plot_data: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            norm: None,
            field: None,
            out: None,
            n_samples: None,
            n_directions: 64,
            seed: 0,
            field_tol: DEFAULT_FIELD_TOL,
            class_tol: 0.05,
            exponent_tol: 0.05,
            n_lines: 128,
            n_points: DEFAULT_AVERAGING_POINTS,
            fit_range: [1e-3, 1e-1],
            n_deltas: 24,
            vortex_center: [0.0, 0.0],
            vortex_sign: 1,
            grid_n: 256,
            grid_extent: [-1.0, 1.0],
            emit_plot_data: false,
        }
    }
}

impl RunConfig {
    fn samples(&self) -> usize {
        self.n_samples.unwrap_or(match self.command {
            Some(CommandKind::AveragingVerify) => DEFAULT_AVERAGING_SAMPLES,
            _ => DEFAULT_SAMPLES,
        })
    }

    fn norm_spec(&self) -> Result<&NormSpec> {
        self.norm
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--norm is required".into()))
    }

    fn field_path(&self) -> Result<&Path> {
        self.field
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--field is required".into()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "planar-kinetic", version, about = "Planar norm geometry and kinetic field checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norm diagnostics
    Norm {
        #[command(subcommand)]
        action: NormAction,
    },
    /// Moduli of convexity with their comparisons and a power-type fit
    Modulus,
    /// Power-type fit of the modulus of convexity
    FitPowerType,
    /// Averaging formula over the rotated sphere
    Averaging {
        #[command(subcommand)]
        action: AveragingAction,
    },
    /// Vortex field generation
    Vortex {
        #[command(subcommand)]
        action: VortexAction,
    },
    /// Kinetic equation residuals
    Kinetic {
        #[command(subcommand)]
        action: KineticAction,
    },
    /// Singularity detection and classification
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
}

#[derive(Subcommand, Debug)]
enum NormAction {
    Inspect,
}

#[derive(Subcommand, Debug)]
enum AveragingAction {
    Verify,
}

#[derive(Subcommand, Debug)]
enum VortexAction {
    Gen,
}

#[derive(Subcommand, Debug)]
enum KineticAction {
    Check,
}

#[derive(Subcommand, Debug)]
enum FieldAction {
    Analyze,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Norm spec as a JSON file or inline JSON
    #[arg(long, global = true, allow_hyphen_values = true)]
    norm: Option<String>,
    /// Field CSV (with a sidecar JSON of the same stem)
    #[arg(long, global = true)]
    field: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Boundary samples
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Directions sampled on the rotated sphere
    #[arg(long, global = true)]
    directions: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write CSV plot data next to the report
    #[arg(long, global = true)]
    emit_plot_data: bool,
    /// Tolerance on |norm(m) - 1| when reading fields
    #[arg(long, global = true)]
    field_tol: Option<f64>,
    /// Characteristic lines used by singularity detection
    #[arg(long, global = true)]
    lines: Option<usize>,
    /// Vortex center as `x,y`
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_pair)]
    center: Option<[f64; 2]>,
    /// Vortex sign, 1 or -1
    #[arg(long, global = true, allow_hyphen_values = true)]
    sign: Option<i8>,
    /// Grid cells per axis
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Square grid extent as `lo,hi`
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_pair)]
    extent: Option<[f64; 2]>,
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let a = parts[0].parse::<f64>().map_err(|e| format!("{}: {e}", parts[0]))?;
    let b = parts[1].parse::<f64>().map_err(|e| format!("{}: {e}", parts[1]))?;
    Ok([a, b])
}

/// Inline JSON when the argument starts with `{`, a file path otherwise.
pub fn parse_norm_arg(arg: &str) -> Result<NormSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Error::InvalidArgument(format!("cannot read norm file {arg}: {e}")))?
    };
    NormSpec::from_json(&text)
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let kind = match &cli.command {
        Command::Norm { .. } => CommandKind::NormInspect,
        Command::Modulus => CommandKind::Modulus,
        Command::FitPowerType => CommandKind::FitPowerType,
        Command::Averaging { .. } => CommandKind::AveragingVerify,
        Command::Vortex { .. } => CommandKind::VortexGen,
        Command::Kinetic { .. } => CommandKind::KineticCheck,
        Command::Field { .. } => CommandKind::FieldAnalyze,
    };
    if let Some(c) = cfg.command {
        if c != kind {
            return Err(Error::InvalidArgument(format!(
                "config is for {:?} but the command is {:?}",
                c.report_name(),
                kind.report_name()
            )));
        }
    }
    cfg.command = Some(kind);
    let a = &cli.common;
    if let Some(n) = &a.norm {
        cfg.norm = Some(parse_norm_arg(n)?);
    }
    if let Some(norm) = &cfg.norm {
        norm.validate()?;
    }
    if let Some(f) = &a.field {
        cfg.field = Some(f.clone());
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    cfg.n_samples = Some(a.samples.unwrap_or(cfg.samples()));
    if let Some(d) = a.directions {
        cfg.n_directions = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.emit_plot_data |= a.emit_plot_data;
    if let Some(t) = a.field_tol {
        cfg.field_tol = t;
    }
    if let Some(l) = a.lines {
        cfg.n_lines = l;
    }
    if let Some(c) = a.center {
        cfg.vortex_center = c;
    }
    if let Some(s) = a.sign {
        cfg.vortex_sign = s;
    }
    if let Some(n) = a.n {
        cfg.grid_n = n;
    }
    if let Some(e) = a.extent {
        cfg.grid_extent = e;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a RunConfig,
    passed: bool,
    #[serde(flatten)]
    body: T,
}

struct Output<'a> {
    cfg: &'a RunConfig,
    stdout: &'a mut dyn Write,
}

impl Output<'_> {
    fn dir(&self) -> Result<Option<&Path>> {
        match &self.cfg.out {
            Some(d) => {
                fs::create_dir_all(d)?;
                Ok(Some(d.as_path()))
            }
            None => Ok(None),
        }
    }

    fn plot_path(&self, name: &str) -> Result<Option<PathBuf>> {
        if !self.cfg.emit_plot_data {
            return Ok(None);
        }
        Ok(self.dir()?.map(|d| d.join(name)))
    }

    fn report<T: Serialize>(&mut self, passed: bool, body: T) -> Result<i32> {
        let report = Report {
            config: self.cfg,
            passed,
            body,
        };
        let text = serde_json::to_string_pretty(&report)?;
        writeln!(self.stdout, "{text}")?;
        if let Some(d) = self.dir()? {
            let kind = self.cfg.command.expect("resolved config names its command");
            fs::write(d.join(format!("{}.json", kind.report_name())), format!("{text}\n"))?;
        }
        Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let outcome = resolve(&cli).and_then(|cfg| {
        let mut out = Output {
            cfg: &cfg,
            stdout,
        };
        dispatch(&mut out)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

fn dispatch(out: &mut Output) -> Result<i32> {
    match out.cfg.command.expect("resolved config names its command") {
        CommandKind::NormInspect => cmd_norm_inspect(out),
        CommandKind::Modulus => cmd_modulus(out),
        CommandKind::FitPowerType => cmd_fit(out),
        CommandKind::AveragingVerify => cmd_averaging(out),
        CommandKind::VortexGen => cmd_vortex_gen(out),
        CommandKind::KineticCheck => cmd_kinetic(out),
        CommandKind::FieldAnalyze => cmd_field_analyze(out),
    }
}

#[derive(Serialize)]
struct SpotCheck {
    x: [f64; 2],
    gauge: f64,
    dual_norm: f64,
    /// `|x . argmax - ||x||_*|`
    support_gap: f64,
}

#[derive(Serialize)]
struct NormInspection {
    smoothness: Smoothness,
    strictly_convex: bool,
    n_samples: usize,
    perimeter: f64,
    /// polyline perimeter with eight times the samples
    perimeter_quadrature: f64,
    area: f64,
    /// largest `|gauge - 1|` over atlas points
    atlas_defect: f64,
    min_curvature: Option<f64>,
    equivalence: [f64; 2],
    spot_checks: Vec<SpotCheck>,
}

fn cmd_norm_inspect(out: &mut Output) -> Result<i32> {
    let norm = PlanarNorm::new(out.cfg.norm_spec()?)?;
    let n = out.cfg.samples();
    let atlas = BoundaryAtlas::new(&norm, n)?;
    let fine = BoundaryAtlas::new(&norm, 8 * n)?;
    let atlas_defect = atlas
        .points()
        .iter()
        .map(|p| (norm.gauge(*p) - 1.0).abs())
        .fold(0.0, f64::max);
    let spot_checks = (0..8)
        .map(|k| {
            let t = 0.37 + k as f64 * std::f64::consts::TAU / 8.0;
            let x = Vec2::new(t.cos(), t.sin()) * (1.0 + 0.25 * k as f64);
            let dual = norm.dual_norm(x);
            SpotCheck {
                x: to_arr(x),
                gauge: norm.gauge(x),
                dual_norm: dual,
                support_gap: (x.dot(&norm.dual_argmax(x)) - dual).abs(),
            }
        })
        .collect();
    let (lo, hi) = norm.equivalence();
    let body = NormInspection {
        smoothness: norm.smoothness(),
        strictly_convex: norm.is_strictly_convex(),
        n_samples: n,
        perimeter: atlas.perimeter(),
        perimeter_quadrature: fine.perimeter(),
        area: atlas.signed_area(),
        atlas_defect,
        min_curvature: min_curvature(&norm).ok(),
        equivalence: [lo, hi],
        spot_checks,
    };
    if let Some(path) = out.plot_path("boundary.csv")? {
        let mut w = csv::Writer::from_path(path).map_err(crate::modulus::csv_err)?;
        w.write_record(["x", "y", "nx", "ny"]).map_err(crate::modulus::csv_err)?;
        for (p, nrm) in atlas.points().iter().zip(atlas.normals()) {
            w.write_record([p.x, p.y, nrm.x, nrm.y].map(|v| format!("{v:.11e}")))
                .map_err(crate::modulus::csv_err)?;
        }
        w.flush()?;
    }
    out.report(true, body)
}

/// `{0.1, 0.2, ..., 1.9}`
fn comparison_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 10.0).collect()
}

fn fit_or_error(norm: &PlanarNorm, cfg: &RunConfig, opts: &ModulusOptions) -> Result<(ModulusCurve, FitOutcome)> {
    let [lo, hi] = cfg.fit_range;
    if !(lo > 0.0 && hi > lo && hi <= 2.0) {
        return Err(Error::InvalidArgument(format!("fit range [{lo}, {hi}] must lie in (0, 2]")));
    }
    let curve = omega_curve(norm, &log_deltas(lo, hi, cfg.n_deltas.max(2)), opts)?;
    let fit = match fit_power_type(&curve, (lo, hi)) {
        Ok(f) => FitOutcome {
            fit: Some(f),
            fit_error: None,
        },
        Err(e @ Error::DegenerateModulus { .. }) => FitOutcome {
            fit: None,
            fit_error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };
    Ok((curve, fit))
}

#[derive(Serialize)]
struct FitOutcome {
    fit: Option<PowerTypeFit>,
    fit_error: Option<String>,
}

fn write_curve(path: Option<PathBuf>, curve: &ModulusCurve) -> Result<()> {
    if let Some(p) = path {
        curve.write_csv(fs::File::create(p)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModulusBody {
    sandwich: SandwichReport,
    nordlander: NordlanderReport,
    #[serde(flatten)]
    fit: FitOutcome,
}

fn cmd_modulus(out: &mut Output) -> Result<i32> {
    let norm = PlanarNorm::new(out.cfg.norm_spec()?)?;
    let opts = ModulusOptions::default();
    let grid = comparison_grid();
    let sandwich = sandwich_check(&norm, &grid, &opts)?;
    let nordlander = nordlander_check(&norm, &grid, &opts)?;
    let (fit_curve, fit) = fit_or_error(&norm, out.cfg, &opts)?;
    let plot_deltas: Vec<f64> = (1..=199).map(|k| k as f64 / 100.0).collect();
    let omega = omega_curve(&norm, &plot_deltas, &opts)?;
    let rho = RhoProfile::new(&norm, &opts)?.curve(&plot_deltas);
    if let Some(d) = out.dir()? {
        write_curve(Some(d.join("omega.csv")), &omega)?;
        write_curve(Some(d.join("rho.csv")), &rho)?;
        write_curve(out.plot_path("omega_fit.csv")?, &fit_curve)?;
    }
    let passed = sandwich.passed && nordlander.passed;
    out.report(
        passed,
        ModulusBody {
            sandwich,
            nordlander,
            fit,
        },
    )
}

fn cmd_fit(out: &mut Output) -> Result<i32> {
    let norm = PlanarNorm::new(out.cfg.norm_spec()?)?;
    let (curve, fit) = fit_or_error(&norm, out.cfg, &ModulusOptions::default())?;
    write_curve(out.plot_path("omega_fit.csv")?, &curve)?;
    out.report(true, fit)
}

#[derive(Serialize)]
struct AveragingBody {
    averaging: AveragingReport,
}

fn cmd_averaging(out: &mut Output) -> Result<i32> {
    let norm = PlanarNorm::new(out.cfg.norm_spec()?)?;
    let rep = verify_averaging(&norm, out.cfg.samples(), out.cfg.n_points, out.cfg.seed)?;
    if let Some(path) = out.plot_path("reconstruction.csv")? {
        let mut w = csv::Writer::from_path(path).map_err(crate::modulus::csv_err)?;
        w.write_record(["x", "y", "rx", "ry", "error"]).map_err(crate::modulus::csv_err)?;
        for p in &rep.reconstruction.points {
            w.write_record(
                [p.x[0], p.x[1], p.reconstructed[0], p.reconstructed[1], p.error].map(|v| format!("{v:.11e}")),
            )
            .map_err(crate::modulus::csv_err)?;
        }
        w.flush()?;
    }
    let passed = rep.passed;
    out.report(passed, AveragingBody { averaging: rep })
}

#[derive(Serialize)]
struct VortexGenBody {
    field: PathBuf,
    geometry: GridGeometry,
    masked_cells: usize,
}

fn cmd_vortex_gen(out: &mut Output) -> Result<i32> {
    let norm = PlanarNorm::new(out.cfg.norm_spec()?)?;
    let dir = out
        .dir()?
        .ok_or_else(|| Error::InvalidArgument("--out is required for vortex gen".into()))?
        .to_path_buf();
    let vf = VortexField::new(&norm, Vec2::from(out.cfg.vortex_center), out.cfg.vortex_sign)?;
    let [lo, hi] = out.cfg.grid_extent;
    let grid = FieldGrid::vortex(&vf, lo, hi, out.cfg.grid_n)?;
    let path = dir.join("field.csv");
    grid.write(&path)?;
    let body = VortexGenBody {
        field: path,
        geometry: grid.geometry(),
        masked_cells: grid.mask().iter().filter(|m| !**m).count(),
    };
    out.report(true, body)
}

fn read_field(cfg: &RunConfig) -> Result<FieldGrid> {
    let norm = cfg.norm.as_ref().map(PlanarNorm::new).transpose()?;
    FieldGrid::read(cfg.field_path()?, norm.as_ref(), cfg.field_tol)
}

#[derive(Serialize)]
struct KineticBody {
    kinetic: KineticReport,
}

fn cmd_kinetic(out: &mut Output) -> Result<i32> {
    let grid = read_field(out.cfg)?;
    let opts = KineticOptions {
        n_directions: out.cfg.n_directions,
        ..KineticOptions::default()
    };
    let rep = kinetic_check(&grid, &opts)?;
    if let Some(path) = out.plot_path("kinetic_residuals.csv")? {
        let mut w = csv::Writer::from_path(path).map_err(crate::modulus::csv_err)?;
        w.write_record(["index", "sx", "sy", "residual"]).map_err(crate::modulus::csv_err)?;
        for d in &rep.residuals {
            w.write_record([
                d.s_index.to_string(),
                format!("{:.11e}", d.s[0]),
                format!("{:.11e}", d.s[1]),
                format!("{:.11e}", d.residual),
            ])
            .map_err(crate::modulus::csv_err)?;
        }
        w.flush()?;
    }
    let passed = rep.passed;
    out.report(passed, KineticBody { kinetic: rep })
}

#[derive(Serialize)]
struct FieldBody {
    classification: ClassificationReport,
    sign_propagation: SignPropagationReport,
}

fn cmd_field_analyze(out: &mut Output) -> Result<i32> {
    let grid = read_field(out.cfg)?;
    let opts = ModulusOptions::default();
    let (_, outcome) = fit_or_error(grid.norm(), out.cfg, &opts)?;
    let fit = match (outcome.fit, outcome.fit_error) {
        (Some(f), _) => f,
        (None, e) => return Err(Error::InvalidArgument(format!("norm has no power-type fit: {}", e.unwrap_or_default()))),
    };
    let classify = ClassifyOptions {
        detect: DetectOptions {
            n_lines: out.cfg.n_lines,
            class_tol: out.cfg.class_tol,
            seed: out.cfg.seed,
        },
        holder: HolderOptions {
            seed: out.cfg.seed,
            ..HolderOptions::default()
        },
        exponent_tol: out.cfg.exponent_tol,
        ..ClassifyOptions::default()
    };
    let classification = classify_field(&grid, &fit, &classify)?;
    let sign_propagation = sign_propagation_check(&grid, DEFAULT_SIGN_PAIRS, out.cfg.seed)?;
    if let Some(path) = out.plot_path("trace.csv")? {
        // chord through the detected center, or the horizontal midline
        let h = grid.h();
        let center = classification.singularity.center();
        let (lo, hi) = grid.extent();
        let mid = (lo + hi) * 0.5;
        let trace = match line_invariance(&grid, center, grid.norm().radial_point(0.7), 2.0 * h) {
            Ok(li) => {
                let d = Vec2::from(li.direction);
                let reach = 0.5 * (hi - lo).min() - 4.0 * h;
                trace_along_segment(&grid, center - d * reach, center + d * reach, &[2.0 * h, 4.0 * h])
            }
            Err(e) => Err(e),
        }
        .or_else(|_| {
            let margin = 4.0 * h;
            trace_along_segment(
                &grid,
                Vec2::new(lo.x + margin, mid.y),
                Vec2::new(hi.x - margin, mid.y),
                &[2.0 * h, 4.0 * h],
            )
        })?;
        trace.write_csv(&path)?;
    }
    let passed = classification.verdict != Verdict::Inconsistent;
    out.report(
        passed,
        FieldBody {
            classification,
            sign_propagation,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let mut full = vec!["planar-kinetic"];
        full.extend_from_slice(args);
        let code = run(full, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("0.3,-0.2").unwrap(), [0.3, -0.2]);
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("a,b").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 3, "sede": 4}"#).unwrap_err();
        assert!(err.to_string().contains("sede"));
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.n_directions, 64);
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, EXIT_INPUT_ERROR);
        assert!(!err.is_empty());
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("norm"));
    }

    #[test]
    fn invalid_norm_exits_2() {
        let (code, _, err) = run_capture(&["norm", "inspect", "--norm", r#"{"kind":"lp","p":0.5}"#]);
        assert_eq!(code, EXIT_INPUT_ERROR);
        assert!(err.contains("p must be ≥ 1"), "{err}");
        let (code, _, err) = run_capture(&["norm", "inspect", "--norm", "{\"kind\":\n\"lp\",}"]);
        assert_eq!(code, EXIT_INPUT_ERROR);
        assert!(err.contains("line 2"), "{err}");
    }
}
