use serde::Serialize;

use loglab_core::blowup::{estimate_blowup, BlowupRecord, Candidate, Classification};
use loglab_core::decay::{
    blowup_modulus, excess_series, fit_holder, fit_log_decay, singular_modulus, DecayFit, ModulusRate,
    ModulusRecord,
};
use loglab_core::energy::{corrected_excess_table, theta};
use loglab_core::epiperimetric::{gamma as gamma_of, sweep, SweepConfig};
use loglab_core::geometry::{Field, GridField, QuadratureRule, ScalarField};
use loglab_core::solver::{
    anchor_point, default_threshold, dyadic_radii, extract_free_boundary, minimize, Datum, SolveConfig,
    SolveReport,
};
use loglab_core::spherical::QuadraticForm;
use loglab_core::synthetic::MuField;
use loglab_core::{Error, Result};

use crate::config::{ExperimentConfig, FieldSource, RateKind};
use crate::plot::{render, Table};

pub const VERSION: &str = concat!("loglab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Weiss,
    Blowup,
    Epi,
    Decay,
    Classify,
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Weiss => "weiss",
            Command::Blowup => "blowup",
            Command::Epi => "epi",
            Command::Decay => "decay",
            Command::Classify => "classify",
            Command::Plot => "plot",
        }
    }
}

/// Exit status for an error: 2 configuration, 3 numerical, 4 rejection.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::Numerical { .. } | Error::InsufficientData(_) => 3,
        Error::Rejected(_) | Error::Domain(_) => 4,
    }
}

/// Named artifact contents, in a fixed order.
#[derive(Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    command: &'a str,
    config: &'a ExperimentConfig,
    result: &'a T,
}

struct Writer<'a> {
    command: Command,
    config: &'a ExperimentConfig,
    out: Artifacts,
}

impl<'a> Writer<'a> {
    fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<()> {
        let env = Envelope {
            tool: VERSION,
            command: self.command.name(),
            config: self.config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.out.files.push((name.into(), text));
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!(
            "# tool: {VERSION}\n# command: {}\n# config: {}\n{body}",
            self.command.name(),
            serde_json::to_string(self.config)?
        );
        self.out.files.push((name.into(), text));
        Ok(())
    }

    fn raw(&mut self, name: &str, body: String) {
        self.out.files.push((name.into(), body));
    }
}

/// Diagnostic document written next to a failed run.
pub fn diagnostic(command: Command, config: Option<&ExperimentConfig>, err: &Error) -> String {
    #[derive(Serialize)]
    struct Diag<'a> {
        tool: &'static str,
        command: &'a str,
        exit_code: i32,
        error: String,
        config: Option<&'a ExperimentConfig>,
    }
    let d = Diag {
        tool: VERSION,
        command: command.name(),
        exit_code: exit_code(err),
        error: err.to_string(),
        config,
    };
    serde_json::to_string_pretty(&d).unwrap_or_default() + "\n"
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut w = Writer {
        command,
        config: cfg,
        out: Artifacts::default(),
    };
    match command {
        Command::Solve => solve(cfg, &mut w)?,
        Command::Weiss => weiss(cfg, &mut w)?,
        Command::Blowup => blowup(cfg, &mut w)?,
        Command::Epi => epi(cfg, &mut w)?,
        Command::Decay => decay(cfg, &mut w)?,
        Command::Classify => classify(cfg, &mut w)?,
        Command::Plot => plot(cfg, &mut w)?,
    }
    Ok(w.out)
}

fn solver_config(cfg: &ExperimentConfig) -> Result<&SolveConfig> {
    cfg.solver
        .as_ref()
        .ok_or_else(|| Error::Config("missing solver section".into()))
}

#[derive(Serialize)]
struct FreeBoundarySummary {
    threshold: f64,
    count: usize,
    spacing: f64,
    /// Distance of the extracted points from the datum center.
    radius_min: Option<f64>,
    radius_max: Option<f64>,
    radius_mean: Option<f64>,
}

#[derive(Serialize)]
struct SolveResult<'a> {
    report: &'a SolveReport,
    free_boundary: FreeBoundarySummary,
}

fn solve(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let sc = solver_config(cfg)?;
    let (u, report) = minimize(sc)?;
    let thr = default_threshold(&u);
    let fb = extract_free_boundary(&u, thr)?;
    let reference = match &sc.datum {
        Datum::ClassicalRadial { center: Some(c), .. } => c.clone(),
        _ => sc.center.clone(),
    };
    let dists: Vec<f64> = fb
        .iter()
        .map(|p| p.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    let n = dists.len();
    let summary = FreeBoundarySummary {
        threshold: thr,
        count: n,
        spacing: sc.spacing(),
        radius_min: dists.iter().cloned().reduce(f64::min),
        radius_max: dists.iter().cloned().reduce(f64::max),
        radius_mean: (n > 0).then(|| dists.iter().sum::<f64>() / n as f64),
    };
    w.raw("field.fld1", u.to_fld1());
    w.json(
        "solve_report.json",
        &SolveResult {
            report: &report,
            free_boundary: summary,
        },
    )
}

enum Loaded {
    Grid(GridField),
    Synthetic(MuField, Vec<f64>),
}

impl Loaded {
    fn field(&self) -> &dyn Field {
        match self {
            Loaded::Grid(g) => g,
            Loaded::Synthetic(m, _) => m,
        }
    }

    fn grid(&self) -> Option<&ScalarField> {
        match self {
            Loaded::Grid(g) => Some(g.scalar()),
            Loaded::Synthetic(..) => None,
        }
    }
}

fn load_field(cfg: &ExperimentConfig) -> Result<Loaded> {
    let source = match &cfg.field {
        Some(s) => s.clone(),
        None if cfg.solver.is_some() => FieldSource::Solve,
        None => return Err(Error::Config("no field source: give `field` or `solver`".into())),
    };
    match source {
        FieldSource::Solve => {
            let (u, _) = minimize(solver_config(cfg)?)?;
            Ok(Loaded::Grid(GridField::new(u)?))
        }
        FieldSource::Fld1 { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Ok(Loaded::Grid(GridField::new(ScalarField::from_fld1(&text)?)?))
        }
        FieldSource::Synthetic { center, profile, grid } => {
            let m = MuField::new(&center, profile.build()?)?;
            match grid {
                Some(g) => Ok(Loaded::Grid(GridField::new(m.sample(g.half_width, g.n)?)?)),
                None => Ok(Loaded::Synthetic(m, center)),
            }
        }
    }
}

fn box_center(u: &ScalarField) -> Vec<f64> {
    (0..u.dim())
        .map(|k| u.origin()[k] + 0.5 * u.spacing()[k] * (u.extents()[k] - 1) as f64)
        .collect()
}

fn resolve_center(cfg: &ExperimentConfig, f: &Loaded) -> Result<Vec<f64>> {
    if let Some(c) = &cfg.center {
        if c.len() != f.field().dim() {
            return Err(Error::Config("center dimension does not match the field".into()));
        }
        return Ok(c.clone());
    }
    match f {
        Loaded::Synthetic(_, c) => Ok(c.clone()),
        Loaded::Grid(g) => {
            let u = g.scalar();
            let target = cfg.target.clone().unwrap_or_else(|| box_center(u));
            anchor_point(u, default_threshold(u), &target)
                .ok_or_else(|| Error::Rejected("no free-boundary node in the field".into()))
        }
    }
}

/// Increasing radii: the configured spec, or dyadic radii from `8h` to the
/// room left in the box (at most 1/4) on grids, `2⁻¹⁴..2⁻²` otherwise.
fn resolve_radii(cfg: &ExperimentConfig, f: &Loaded, center: &[f64]) -> Result<Vec<f64>> {
    if let Some(spec) = &cfg.radii {
        return Ok(spec.radii());
    }
    let radii = match f.grid() {
        None => dyadic_radii(2f64.powi(-14), 0.25),
        Some(u) => {
            let h = u.max_spacing();
            let room = (0..u.dim())
                .map(|k| {
                    let lo = center[k] - u.origin()[k];
                    let hi = u.origin()[k] + u.spacing()[k] * (u.extents()[k] - 1) as f64 - center[k];
                    lo.min(hi)
                })
                .fold(f64::INFINITY, f64::min)
                - h;
            dyadic_radii(cfg.blowup.min_cells * h, room.min(0.25))
        }
    };
    if radii.len() < 2 {
        return Err(Error::Rejected(format!(
            "fewer than 2 admissible radii at {center:?}"
        )));
    }
    Ok(radii)
}

#[derive(Serialize)]
struct WeissResult<'a> {
    center: &'a [f64],
    worst_monotonicity_violation: f64,
    table: &'a loglab_core::energy::EnergyTable,
}

fn weiss(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let f = load_field(cfg)?;
    let center = resolve_center(cfg, &f)?;
    let radii = resolve_radii(cfg, &f, &center)?;
    let u = f.field();
    let rule = QuadratureRule::default_ball(u.dim())?;
    let limit = cfg.decay.limit.unwrap_or_else(|| theta(u.dim()));
    let table = corrected_excess_table(u, &center, &radii, limit, &rule)?;
    w.csv("energy_table.csv", &table.to_csv())?;
    w.json(
        "weiss.json",
        &WeissResult {
            center: &center,
            worst_monotonicity_violation: table.worst_monotonicity_violation(),
            table: &table,
        },
    )
}

fn blowup(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let f = load_field(cfg)?;
    let center = resolve_center(cfg, &f)?;
    let mut radii = resolve_radii(cfg, &f, &center)?;
    radii.reverse();
    let rec = estimate_blowup(f.field(), &center, &radii, &cfg.blowup)?;
    w.csv("blowup.csv", &rec.to_csv())?;
    w.json("blowup.json", &rec)
}

fn epi(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let sc = cfg.epi.clone().unwrap_or_else(|| SweepConfig::new(2));
    let summary = sweep(&sc)?;
    w.csv("epi_sweep.csv", &summary.to_csv())?;
    w.json("epi_summary.json", &summary)
}

#[derive(Serialize)]
#[serde(untagged)]
enum Outcome<T> {
    Ok(T),
    Failed { error: String },
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Failed { error: e.to_string() },
        }
    }
}

#[derive(Serialize)]
struct SeriesSummary {
    samples: Vec<(f64, f64)>,
    limit: f64,
    classification: Classification,
    flagged: bool,
    note: Option<String>,
}

#[derive(Serialize)]
struct DecayResult {
    gamma: f64,
    center: Option<Vec<f64>>,
    series: Option<SeriesSummary>,
    excess_fit: Outcome<DecayFit>,
    modulus_fit: Option<Outcome<DecayFit>>,
}

fn fit_excess(samples: &[(f64, f64)], gamma: f64) -> Result<DecayFit> {
    if gamma > 0.0 {
        fit_log_decay(samples, gamma, true)
    } else {
        fit_holder(samples)
    }
}

fn decay(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let result = if let Some(samples) = &cfg.decay.samples {
        let gamma = cfg.decay.gamma.unwrap_or(0.0);
        DecayResult {
            gamma,
            center: None,
            series: None,
            excess_fit: fit_excess(samples, gamma).into(),
            modulus_fit: None,
        }
    } else {
        let f = load_field(cfg)?;
        let u = f.field();
        let gamma = cfg.decay.gamma.unwrap_or_else(|| gamma_of(u.dim()));
        let center = resolve_center(cfg, &f)?;
        let radii = resolve_radii(cfg, &f, &center)?;
        let series = excess_series(u, &center, &radii, cfg.decay.limit, &cfg.blowup)?;
        let decreasing: Vec<f64> = radii.iter().rev().cloned().collect();
        let record = estimate_blowup(u, &center, &decreasing, &cfg.blowup)?;
        DecayResult {
            gamma,
            excess_fit: fit_excess(&series.samples, gamma).into(),
            modulus_fit: Some(blowup_modulus(&record, gamma).into()),
            center: Some(center),
            series: Some(SeriesSummary {
                samples: series.samples,
                limit: series.limit,
                classification: series.classification,
                flagged: series.flagged,
                note: series.note,
            }),
        }
    };
    let mut csv = String::from("r,excess\n");
    if let Some(s) = &result.series {
        for (r, e) in &s.samples {
            csv.push_str(&format!("{r:.16e},{e:.16e}\n"));
        }
    }
    w.csv("decay_series.csv", &csv)?;
    w.json("decay.json", &result)
}

#[derive(Serialize)]
struct PointLabel {
    point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w_over_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stratum: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate: Option<Candidate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

#[derive(Serialize)]
struct ClassifyResult {
    candidates: usize,
    regular: usize,
    singular: usize,
    undecided: usize,
    skipped: usize,
    labels: Vec<PointLabel>,
    modulus: Option<Outcome<ModulusRecord>>,
}

fn label_point(cfg: &ExperimentConfig, f: &Loaded, p: &[f64]) -> Result<BlowupRecord> {
    let mut radii = resolve_radii(cfg, f, p)?;
    radii.reverse();
    estimate_blowup(f.field(), p, &radii, &cfg.blowup)
}

fn classify(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let f = load_field(cfg)?;
    let dim = f.field().dim();
    let th = theta(dim);
    let points: Vec<Vec<f64>> = match (&cfg.classify.points, f.grid()) {
        (Some(p), _) => p.clone(),
        (None, Some(u)) => {
            let fb = extract_free_boundary(u, default_threshold(u))?;
            let max = cfg.classify.max_points.max(1);
            let stride = fb.len().div_ceil(max).max(1);
            fb.into_iter().step_by(stride).collect()
        }
        (None, None) => vec![resolve_center(cfg, &f)?],
    };
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Config("classification point of the wrong dimension".into()));
    }
    let mut labels = Vec::with_capacity(points.len());
    let mut singular_forms: Vec<(Vec<f64>, QuadraticForm)> = Vec::new();
    for p in &points {
        labels.push(match label_point(cfg, &f, p) {
            Ok(rec) => {
                if let (Classification::Singular, Candidate::Quadratic { a }) = (&rec.classification, &rec.candidate) {
                    singular_forms.push((p.clone(), a.clone()));
                }
                PointLabel {
                    point: p.clone(),
                    classification: Some(rec.classification),
                    w_over_theta: Some(rec.energy / th),
                    energy_radius: Some(rec.energy_radius),
                    stratum: rec.stratum,
                    candidate: Some(rec.candidate),
                    diagnostics: rec.diagnostics,
                    skipped: None,
                }
            }
            Err(e @ Error::Numerical { .. }) => return Err(e),
            Err(e) => PointLabel {
                point: p.clone(),
                classification: None,
                w_over_theta: None,
                energy_radius: None,
                stratum: None,
                candidate: None,
                diagnostics: Vec::new(),
                skipped: Some(e.to_string()),
            },
        });
    }
    let count = |c: Classification| labels.iter().filter(|l| l.classification == Some(c)).count();
    let rate = match cfg.classify.rate.clone().unwrap_or(if dim == 3 { RateKind::Log } else { RateKind::Holder }) {
        RateKind::Log => ModulusRate::Log { gamma: gamma_of(3) },
        RateKind::Holder => ModulusRate::Holder { beta: cfg.classify.beta },
    };
    let modulus = (singular_forms.len() >= 2).then(|| singular_modulus(&singular_forms, rate).into());
    let result = ClassifyResult {
        candidates: points.len(),
        regular: count(Classification::Regular),
        singular: count(Classification::Singular),
        undecided: count(Classification::Undecided),
        skipped: labels.iter().filter(|l| l.skipped.is_some()).count(),
        labels,
        modulus,
    };
    let mut csv = String::from("point,label,w_over_theta\n");
    for l in &result.labels {
        let coords = l.point.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ");
        let label = match l.classification {
            Some(Classification::Regular) => "regular",
            Some(Classification::Singular) => "singular",
            Some(Classification::Undecided) => "undecided",
            None => "skipped",
        };
        let wt = l.w_over_theta.map(|v| format!("{v:.16e}")).unwrap_or_default();
        csv.push_str(&format!("{coords},{label},{wt}\n"));
    }
    w.csv("classify.csv", &csv)?;
    w.json("labels.json", &result)
}

fn plot(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let spec = cfg
        .plot
        .as_ref()
        .ok_or_else(|| Error::Config("missing plot section".into()))?;
    let text = std::fs::read_to_string(&spec.input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", spec.input.display())))?;
    let table = Table::parse(&text)?;
    let meta = format!("{VERSION} plot config: {}", serde_json::to_string(cfg)?);
    let svg = render(&table, spec, &meta)?;
    let stem = spec
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into());
    w.raw(&format!("{stem}.svg"), svg);
    Ok(())
}
