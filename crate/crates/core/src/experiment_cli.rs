//! Experiment configuration and the end-to-end pipeline behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::correlator_engine::{
    analytic_r, build_report, estimate_g2_from_clicks, estimate_g2_ratio, null_test,
    CorrelatorReport, Estimate, NullTestVerdict, Observable, ReportOptions, DEFAULT_Z_STAR,
    MIN_SAMPLES,
};
use crate::error::{Error, Result};
use crate::field_states::{
    make_coherent, make_fock, make_squeezed, make_thermal, prediction_moments, CutoffPolicy,
    FieldMoments, FieldState,
};
use crate::joint_evolution::{
    evolve, CouplingParams, EvolutionMode, EvolutionPath, JointDetectorState,
};
use crate::measurement_channels::{
    click_pmf, homodyne_pdf, sample_clicks, sample_heterodyne, sample_homodyne, Channel,
    GridMoments, GridPdf, GridSpec, Quadrature, SampleBatch,
};
use crate::physical_params::{
    gamma0_rate, required_occupancy, stimulated_absorption_probability, DetectorSpec,
};
use crate::svg;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "coherence-nulltest";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Coincidence count below which the ratio estimator is flagged as noisy.
pub const LOW_COINCIDENCE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent {
        alpha: C64,
    },
    Fock {
        n: usize,
    },
    Thermal {
        nbar: f64,
    },
    Squeezed {
        r: f64,
        phi: f64,
        #[serde(default)]
        displacement: C64,
    },
}

impl StateSpec {
    pub fn build(&self, policy: CutoffPolicy) -> Result<FieldState> {
        match *self {
            StateSpec::Coherent { alpha } => make_coherent(alpha, policy),
            StateSpec::Fock { n } => make_fock(n, policy),
            StateSpec::Thermal { nbar } => make_thermal(nbar, policy),
            StateSpec::Squeezed {
                r,
                phi,
                displacement,
            } => make_squeezed(r, phi, displacement, policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CouplingSpec {
    Dimensionless { gamma0_dt: f64 },
    Physical { detector: DetectorSpec },
}

impl CouplingSpec {
    pub fn gamma0_dt(&self) -> Result<f64> {
        match self {
            CouplingSpec::Dimensionless { gamma0_dt } => Ok(*gamma0_dt),
            CouplingSpec::Physical { detector } => Ok(gamma0_rate(detector)? * detector.dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

fn default_mode() -> EvolutionMode {
    EvolutionMode::Approximate
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

fn default_z_star() -> f64 {
    DEFAULT_Z_STAR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub coupling: CouplingSpec,
    #[serde(default = "default_mode")]
    pub mode: EvolutionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_split: Option<(f64, f64)>,
    pub channels: Vec<Channel>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_z_star")]
    pub z_star: f64,
    #[serde(default)]
    pub cutoff: CutoffPolicy,
    #[serde(default)]
    pub detector_cutoff: CutoffPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "samples = {} below the minimum {MIN_SAMPLES}",
                self.samples
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::Config("no channels selected".into()));
        }
        if !(self.z_star.is_finite() && self.z_star > 0.0) {
            return Err(Error::Config(format!(
                "z_star = {} must be positive",
                self.z_star
            )));
        }
        self.coupling_params().map(|_| ()).map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            e => e,
        })
    }

    pub fn coupling_params(&self) -> Result<CouplingParams> {
        let g = self.coupling.gamma0_dt()?;
        let mut cp = match (self.mode, self.dt_split) {
            (EvolutionMode::Sequential, Some((a, b))) => CouplingParams::sequential(a, b)?,
            (EvolutionMode::Sequential, None) => CouplingParams::sequential(g, g)?,
            (mode, _) => CouplingParams::new(g, mode)?,
        };
        cp.detector_cutoff = self.detector_cutoff;
        cp.validate()?;
        Ok(cp)
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        ))
    }
}

/// Flat command-line overrides of configuration leaves.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// State kind: coherent, fock, thermal, squeezed.
    #[arg(long = "state")]
    pub state_kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<f64>,
    #[arg(long = "n")]
    pub fock_n: Option<usize>,
    #[arg(long)]
    pub nbar: Option<f64>,
    #[arg(long = "r", allow_hyphen_values = true)]
    pub squeeze_r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub displacement_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub displacement_im: Option<f64>,
    #[arg(long)]
    pub gamma0_dt: Option<f64>,
    /// exact, sequential, approximate
    #[arg(long)]
    pub mode: Option<String>,
    /// Sequential split as `G1,G2`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub dt_split: Option<Vec<f64>>,
    /// Comma-separated subset of click,homodyne,heterodyne.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long = "format", value_delimiter = ',')]
    pub formats: Option<Vec<String>>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub grid_half_width: Option<f64>,
    /// x or p
    #[arg(long)]
    pub quadrature: Option<String>,
    #[arg(long)]
    pub z_star: Option<f64>,
    #[arg(long)]
    pub tail_mass: Option<f64>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub bootstrap_seed: Option<u64>,
}

fn set(root: &mut Value, path: &[&str], val: Value) {
    let mut cur = root;
    for key in &path[..path.len() - 1] {
        if !cur.get(*key).is_some_and(Value::is_object) {
            cur[*key] = Value::Object(Default::default());
        }
        cur = &mut cur[*key];
    }
    cur[path[path.len() - 1]] = val;
}

fn set_complex_part(root: &mut Value, path: &[&str], part: usize, x: f64) {
    let mut cur = root.clone();
    for key in path {
        cur = cur.get(*key).cloned().unwrap_or(Value::Null);
    }
    let mut pair = match cur {
        Value::Array(a) if a.len() == 2 => a,
        _ => vec![Value::from(0.0), Value::from(0.0)],
    };
    pair[part] = Value::from(x);
    set(root, path, Value::Array(pair));
}

impl Overrides {
    /// Applies the flags on top of a JSON configuration document.
    pub fn apply(&self, mut v: Value) -> Value {
        if !v.is_object() {
            v = Value::Object(Default::default());
        }
        if let Some(k) = &self.state_kind {
            let same = v.pointer("/state/kind").and_then(Value::as_str) == Some(k.as_str());
            if !same {
                set(&mut v, &["state"], serde_json::json!({ "kind": k }));
            }
        }
        if let Some(x) = self.alpha_re {
            set_complex_part(&mut v, &["state", "alpha"], 0, x);
        }
        if let Some(x) = self.alpha_im {
            set_complex_part(&mut v, &["state", "alpha"], 1, x);
        }
        if let Some(x) = self.displacement_re {
            set_complex_part(&mut v, &["state", "displacement"], 0, x);
        }
        if let Some(x) = self.displacement_im {
            set_complex_part(&mut v, &["state", "displacement"], 1, x);
        }
        let mut put = |path: &[&str], val: Option<Value>| {
            if let Some(val) = val {
                set(&mut v, path, val);
            }
        };
        put(&["state", "n"], self.fock_n.map(Value::from));
        put(&["state", "nbar"], self.nbar.map(Value::from));
        put(&["state", "r"], self.squeeze_r.map(Value::from));
        put(&["state", "phi"], self.phi.map(Value::from));
        if let Some(g) = self.gamma0_dt {
            put(&["coupling"], Some(serde_json::json!({ "gamma0_dt": g })));
        }
        put(&["mode"], self.mode.clone().map(Value::from));
        put(
            &["dt_split"],
            self.dt_split.clone().map(|s| serde_json::json!(s)),
        );
        put(
            &["channels"],
            self.channels.clone().map(|c| serde_json::json!(c)),
        );
        put(&["samples"], self.samples.map(Value::from));
        put(&["seed"], self.seed.map(Value::from));
        put(
            &["output_dir"],
            self.output_dir
                .clone()
                .map(|p| Value::from(p.to_string_lossy().into_owned())),
        );
        put(
            &["formats"],
            self.formats.clone().map(|f| serde_json::json!(f)),
        );
        put(&["grid", "points"], self.grid_points.map(Value::from));
        put(
            &["grid", "half_width"],
            self.grid_half_width.map(Value::from),
        );
        put(
            &["grid", "quadrature"],
            self.quadrature
                .clone()
                .map(|q| Value::from(q.to_lowercase())),
        );
        put(&["z_star"], self.z_star.map(Value::from));
        put(&["cutoff", "tail_mass"], self.tail_mass.map(Value::from));
        put(&["cutoff", "max_dim"], self.max_dim.map(Value::from));
        put(&["bootstrap_seed"], self.bootstrap_seed.map(Value::from));
        v
    }
}

/// Reads the optional config file and applies the flag overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let base = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    ExperimentConfig::from_value(overrides.apply(base))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub label: String,
    pub fock_dim: usize,
    pub field_tail_mass: f64,
    pub detector_kmax: usize,
    pub detector_tail_mass: f64,
    pub evolution_path: EvolutionPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub points: usize,
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub mass: f64,
    pub moments: GridMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub channel: Channel,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reports: Vec<CorrelatorReport>,
    pub verdicts: Vec<NullTestVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub gamma0_dt: f64,
    pub state: StateSummary,
    pub moments: FieldMoments,
    pub channels: Vec<ChannelResult>,
    pub files: Vec<ManifestEntry>,
    pub status: Status,
}

/// Field state, prediction moments and detector state for a config.
pub fn prepare(
    cfg: &ExperimentConfig,
) -> Result<(FieldState, FieldMoments, JointDetectorState, CouplingParams)> {
    let state = cfg.state.build(cfg.cutoff)?;
    let cp = cfg.coupling_params()?;
    let js = evolve(&state, &cp)?;
    let moments = prediction_moments(&state);
    Ok((state, moments, js, cp))
}

struct Outputs<'a> {
    dir: &'a Path,
    formats: &'a [OutputFormat],
    files: Vec<ManifestEntry>,
}

impl Outputs<'_> {
    fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }

    fn write(&mut self, name: &str, bytes: &[u8], status: Status) -> Result<()> {
        fs::create_dir_all(self.dir)?;
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
            status,
        });
        Ok(())
    }
}

fn sample_channel(
    channel: Channel,
    js: &JointDetectorState,
    cfg: &ExperimentConfig,
) -> Result<(SampleBatch, Option<GridPdf>)> {
    Ok(match channel {
        Channel::Click => (sample_clicks(&click_pmf(js), cfg.samples, cfg.seed)?, None),
        Channel::Homodyne => {
            let pdf = homodyne_pdf(js, &cfg.grid)?;
            (sample_homodyne(&pdf, cfg.samples, cfg.seed)?, Some(pdf))
        }
        Channel::Heterodyne => (sample_heterodyne(js, cfg.samples, cfg.seed)?, None),
    })
}

fn run_channel(
    channel: Channel,
    cfg: &ExperimentConfig,
    moments: &FieldMoments,
    js: &JointDetectorState,
    gamma0_dt: f64,
    out: &mut Outputs,
) -> Result<ChannelResult> {
    let (batch, pdf) = sample_channel(channel, js, cfg)?;
    let name = channel.as_str();
    if out.wants(OutputFormat::Csv) {
        let mut buf = Vec::new();
        batch.write_csv(&mut buf)?;
        out.write(&format!("{name}.csv"), &buf, Status::Ok)?;
    }
    let opts = ReportOptions {
        quadrature: cfg.grid.quadrature,
        bootstrap_seed: cfg.bootstrap_seed,
    };
    let mut reports = Vec::new();
    let mut verdicts = Vec::new();
    for &obs in Observable::for_channel(channel) {
        let r = build_report(&batch, obs, moments, gamma0_dt, Some(js), opts)?;
        verdicts.push(null_test(&r, cfg.z_star));
        reports.push(r);
    }
    if out.wants(OutputFormat::Svg) {
        let (x1, _) = batch.real_columns();
        let (lo, w, counts) = if channel == Channel::Click {
            let kmax = x1.iter().cloned().fold(0.0, f64::max) as usize;
            let mut c = vec![0.0; kmax + 1];
            for x in &x1 {
                c[*x as usize] += 1.0;
            }
            (-0.5, 1.0, c)
        } else {
            svg::bin(&x1, 60)
        };
        let title = match channel {
            Channel::Click => "detector 1 clicks",
            Channel::Homodyne => "detector 1 quadrature samples",
            Channel::Heterodyne => "detector 1 Re beta samples",
        };
        out.write(
            &format!("{name}_marginal.svg"),
            svg::histogram(title, lo, w, &counts).as_bytes(),
            Status::Ok,
        )?;
        if let Some(pdf) = &pdf {
            let map = svg::heatmap(
                "joint quadrature density",
                pdf.x1.points,
                pdf.x2.points,
                &pdf.values,
                (pdf.x1.min, pdf.x1.max()),
                (pdf.x2.min, pdf.x2.max()),
            );
            out.write(&format!("{name}_density.svg"), map.as_bytes(), Status::Ok)?;
        }
    }
    Ok(ChannelResult {
        channel,
        status: Status::Ok,
        error: None,
        reports,
        verdicts,
        acceptance_rate: batch.acceptance_rate,
        grid: pdf.map(|p| GridSummary {
            points: p.x1.points,
            x1_range: (p.x1.min, p.x1.max()),
            x2_range: (p.x2.min, p.x2.max()),
            mass: p.mass,
            moments: p.moments(),
        }),
    })
}

/// Full pipeline. Channel failures are recorded and the run continues; the
/// report status is then `partial`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (state, moments, js, cp) = prepare(cfg)?;
    let mut out = Outputs {
        dir: &cfg.output_dir,
        formats: &cfg.formats,
        files: Vec::new(),
    };
    let mut channels = Vec::new();
    for &ch in &cfg.channels {
        match run_channel(ch, cfg, &moments, &js, cp.gamma0_dt, &mut out) {
            Ok(r) => channels.push(r),
            Err(e) => {
                let msg = format!("{}: {e}", ch.as_str());
                out.write(
                    &format!("{}.error.txt", ch.as_str()),
                    msg.as_bytes(),
                    Status::Failed,
                )?;
                channels.push(ChannelResult {
                    channel: ch,
                    status: Status::Failed,
                    error: Some(msg),
                    reports: Vec::new(),
                    verdicts: Vec::new(),
                    acceptance_rate: None,
                    grid: None,
                });
            }
        }
    }
    let status = if channels.iter().all(|c| c.status == Status::Ok) {
        Status::Ok
    } else {
        Status::Partial
    };
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        gamma0_dt: cp.gamma0_dt,
        state: StateSummary {
            label: state.label().to_string(),
            fock_dim: state.dim(),
            field_tail_mass: state.tail_mass(),
            detector_kmax: js.kmax(),
            detector_tail_mass: js.provenance().detector_tail_mass,
            evolution_path: js.provenance().path,
        },
        moments,
        channels,
        files: out.files.clone(),
        status,
    };
    if out.wants(OutputFormat::Json) {
        let text = serde_json::to_string_pretty(&report)?;
        out.write("report.json", text.as_bytes(), Status::Ok)?;
    }
    if !out.files.is_empty() {
        let manifest = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "config_hash": report.config_hash,
            "files": out.files,
        });
        fs::create_dir_all(out.dir)?;
        fs::write(
            out.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
    }
    report.files = out.files;
    Ok(report)
}

/// The two click-statistics estimates of `g2` and their combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Comparison {
    pub ratio: Estimate,
    pub single_detector: Estimate,
    /// Inverse-variance weighted mean of the two.
    pub combined: Estimate,
    /// `|ratio - single| / sqrt(se1^2 + se2^2)`.
    pub separation_sigma: f64,
    pub coincidences: usize,
    pub low_coincidence: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_r: Option<f64>,
    pub sample_count: usize,
}

fn inverse_variance(a: Estimate, b: Estimate) -> Estimate {
    match (a.standard_error > 0.0, b.standard_error > 0.0) {
        (true, true) => {
            let (wa, wb) = (a.standard_error.powi(-2), b.standard_error.powi(-2));
            Estimate {
                value: (wa * a.value + wb * b.value) / (wa + wb),
                standard_error: (wa + wb).powf(-0.5),
            }
        }
        (false, _) => a,
        (true, false) => b,
    }
}

pub fn compare_g2(cfg: &ExperimentConfig) -> Result<G2Comparison> {
    if !cfg.channels.contains(&Channel::Click) {
        return Err(Error::Config("compare-g2 needs the click channel".into()));
    }
    cfg.validate()?;
    let (_, moments, js, _) = prepare(cfg)?;
    let batch = sample_clicks(&click_pmf(&js), cfg.samples, cfg.seed)?;
    let ratio = estimate_g2_ratio(&batch)?;
    let single = estimate_g2_from_clicks(&batch, 0)?;
    let coincidences = batch
        .clicks()?
        .iter()
        .filter(|o| o[0] > 0 && o[1] > 0)
        .count();
    let comb_se = (ratio.standard_error.powi(2) + single.standard_error.powi(2)).sqrt();
    Ok(G2Comparison {
        ratio,
        single_detector: single,
        combined: inverse_variance(ratio, single),
        separation_sigma: if comb_se > 0.0 {
            (ratio.value - single.value).abs() / comb_se
        } else {
            0.0
        },
        coincidences,
        low_coincidence: coincidences < LOW_COINCIDENCE,
        analytic_r: analytic_r(&moments).ok(),
        sample_count: batch.count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub target: f64,
    pub n_required: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma0Table {
    pub spec: DetectorSpec,
    pub gamma0: f64,
    pub gamma0_dt: f64,
    pub rows: Vec<OccupancyRow>,
}

/// Rate, coupling and the occupancy needed for stimulated-absorption
/// probabilities 0.1, 1 and 10.
pub fn gamma0_table(spec: &DetectorSpec) -> Result<Gamma0Table> {
    let gamma0 = gamma0_rate(spec)?;
    let rows = [0.1, 1.0, 10.0]
        .iter()
        .map(|&t| {
            let n = required_occupancy(gamma0, spec.dt, t);
            let feasible =
                stimulated_absorption_probability(gamma0, spec.dt, n).map(|s| s.feasible)?;
            Ok(OccupancyRow {
                target: t,
                n_required: n,
                feasible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Gamma0Table {
        spec: *spec,
        gamma0,
        gamma0_dt: gamma0 * spec.dt,
        rows,
    })
}

pub fn parse_speed(s: &str) -> Result<f64> {
    if s.eq_ignore_ascii_case("light") || s.eq_ignore_ascii_case("c") {
        return Ok(crate::physical_params::SPEED_OF_LIGHT);
    }
    s.parse()
        .map_err(|_| Error::Config(format!("speed `{s}` is neither a number nor `light`")))
}

/// Quadrature convention in use for homodyne reports.
pub fn quadrature_label(q: Quadrature) -> &'static str {
    match q {
        Quadrature::X => "x",
        Quadrature::P => "p",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "state": {{"kind": "thermal", "nbar": 2.0}},
                "coupling": {{"gamma0_dt": 0.01}},
                "channels": ["click", "homodyne", "heterodyne"],
                "samples": 20000,
                "seed": 7,
                "output_dir": {:?},
                "formats": ["csv", "json", "svg"]
            }}"#,
            dir.to_string_lossy()
        ))
        .unwrap()
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sample_config(dir.path());
        assert_eq!(cfg.mode, EvolutionMode::Approximate);
        assert_eq!(cfg.z_star, 5.0);
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        let phys = r#"{"state":{"kind":"fock","n":2},"coupling":{"detector":{"mass":1400,"length":1.5,"omega":6283.185307179586,"speed":5000,"dt":1e9}},"channels":["click"],"samples":100,"seed":1}"#;
        let c = ExperimentConfig::from_json(phys).unwrap();
        assert!((c.coupling.gamma0_dt().unwrap() - 8.611448832e-3).abs() < 1e-15);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn config_errors() {
        let bad = [
            r#"{"state":{"kind":"fock","n":2},"coupling":{"gamma0_dt":0.01},"channels":["click"],"samples":100}"#,
            r#"{"state":{"kind":"fock","n":2},"coupling":{"gamma0_dt":0.01},"channels":[],"samples":100,"seed":1}"#,
            r#"{"state":{"kind":"fock","n":2},"coupling":{"gamma0_dt":0.01},"channels":["click"],"samples":99,"seed":1}"#,
            r#"{"state":{"kind":"fock","n":2},"coupling":{"gamma0_dt":1.5},"channels":["click"],"samples":100,"seed":1}"#,
            r#"{"state":{"kind":"laser"},"coupling":{"gamma0_dt":0.01},"channels":["click"],"samples":100,"seed":1}"#,
        ];
        for b in bad {
            let e = ExperimentConfig::from_json(b).unwrap_err();
            assert_eq!(e.kind(), crate::error::ErrorKind::Config, "{b}: {e}");
        }
    }

    #[test]
    fn overrides_replace_leaves() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sample_config(dir.path());
        let base: Value = serde_json::from_str(&cfg.to_json()).unwrap();
        let ov = Overrides {
            state_kind: Some("coherent".into()),
            alpha_im: Some(-2.0),
            samples: Some(500),
            channels: Some(vec!["click".into()]),
            quadrature: Some("P".into()),
            ..Default::default()
        };
        let c = ExperimentConfig::from_value(ov.apply(base)).unwrap();
        assert_eq!(
            c.state,
            StateSpec::Coherent {
                alpha: C64::new(0.0, -2.0)
            }
        );
        assert_eq!(c.samples, 500);
        assert_eq!(c.channels, vec![Channel::Click]);
        assert_eq!(c.grid.quadrature, Quadrature::P);
        let flags_only = Overrides {
            state_kind: Some("fock".into()),
            fock_n: Some(3),
            gamma0_dt: Some(0.02),
            channels: Some(vec!["click".into()]),
            samples: Some(100),
            seed: Some(5),
            ..Default::default()
        };
        assert!(load_config(None, &flags_only).is_ok());
    }

    #[test]
    fn run_writes_manifest_and_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_experiment(&sample_config(d1.path())).unwrap();
        let r2 = run_experiment(&sample_config(d2.path())).unwrap();
        assert_eq!(r1.status, Status::Ok);
        assert_eq!(r1.schema_version, 1);
        for f in &r1.files {
            let bytes = fs::read(d1.path().join(&f.path)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256);
        }
        for name in ["click.csv", "homodyne.csv", "heterodyne.csv"] {
            assert_eq!(
                fs::read(d1.path().join(name)).unwrap(),
                fs::read(d2.path().join(name)).unwrap()
            );
        }
        assert_eq!(r1.channels, r2.channels);
        let manifest: Value =
            serde_json::from_slice(&fs::read(d1.path().join("manifest.json")).unwrap()).unwrap();
        let listed: Vec<&str> = manifest["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f["path"].as_str().unwrap())
            .collect();
        assert!(listed.contains(&"report.json") && listed.contains(&"homodyne_density.svg"));
        let report: Value =
            serde_json::from_slice(&fs::read(d1.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["schema_version"], 1);
        assert!(report["channels"][0]["verdicts"][0]["verdict"].is_string());
    }

    #[test]
    fn failed_channel_is_partial() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sample_config(dir.path());
        cfg.grid.half_width = Some(1.0);
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::Partial);
        let hom = r
            .channels
            .iter()
            .find(|c| c.channel == Channel::Homodyne)
            .unwrap();
        assert_eq!(hom.status, Status::Failed);
        assert!(r.files.iter().any(|f| f.status == Status::Failed));
    }

    #[test]
    fn gamma0_table_inverts() {
        let spec = DetectorSpec {
            mass: 1400.0,
            length: 1.5,
            omega: 2.0 * std::f64::consts::PI * 1e3,
            speed: 5e3,
            dt: 100.0,
        };
        let t = gamma0_table(&spec).unwrap();
        assert!((t.gamma0 / 8.611448832e-12 - 1.0).abs() < 1e-14);
        for row in &t.rows {
            assert!((row.n_required * t.gamma0_dt / row.target - 1.0).abs() < 1e-15);
            assert!(row.feasible);
        }
        let slow = gamma0_table(&DetectorSpec { speed: 1e4, ..spec }).unwrap();
        assert!((t.gamma0 / slow.gamma0 - 32.0).abs() < 1e-12);
        assert_eq!(parse_speed("light").unwrap(), 299_792_458.0);
        assert!(parse_speed("fast").is_err());
    }

    #[test]
    fn g2_comparison_flags() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = sample_config(dir.path());
        cfg.samples = 200_000;
        let c = compare_g2(&cfg).unwrap();
        assert!(
            c.combined.standard_error
                <= c.ratio.standard_error.min(c.single_detector.standard_error)
        );
        assert!(c.separation_sigma < 5.0);
        cfg.state = StateSpec::Fock { n: 5 };
        let c = compare_g2(&cfg).unwrap();
        assert!(c.low_coincidence);
    }
}
