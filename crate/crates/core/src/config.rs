//! Run configuration: a sectioned TOML file.
//!
//! ```toml
//! [manifold]
//! preset = "round_sphere"      # circle | round_sphere | perturbed_sphere | flat_torus
//!
//! [initial]
//! profile = "cosine"           # constant | cosine | ellipse | series | random
//! base = 1.0
//! amplitude = 0.2
//!
//! [discretization]
//! nodes = [24, 48]             # per axis; sphere: [n_theta, n_lambda]
//!
//! [stepping]
//! t_end = 3.0                  # flow time
//! ```
//!
//! Unknown keys are rejected. Errors carry the 1-based line of the offending
//! key where one exists.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::base::{MetricPreset, MetricSource};
use crate::error::{FlowError, Result};
use crate::flow::Integrator;
use crate::initial::{InitialProfile, SeriesTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Overwrite one node of φ with NaN after the given step.
    Nan,
    /// Shift φ by a constant after the given step, well beyond the monitor
    /// tolerance; the flow stays valid but the height bounds are breached.
    Breach,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stepping {
    pub t_end: f64,
    pub c_cfl: f64,
    pub integrator: Integrator,
    /// Fixed step size instead of the adaptive stability bound.
    pub dt: Option<f64>,
    pub diag_interval: f64,
    /// Checkpoint every k diagnostics samples; 0 writes only the final one.
    pub checkpoint_every: u32,
    pub max_steps: Option<u64>,
    pub fault: Fault,
    pub fault_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub dir: Option<PathBuf>,
    pub diagnostics: String,
    pub snapshot_fields: Vec<String>,
    /// Snapshot every k samples; 0 writes only the final state.
    pub snapshot_every: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub absolute: f64,
    pub h2_factor: f64,
    pub order_first: f64,
    pub order_simons: f64,
    pub umbilic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { absolute: 1e-6, h2_factor: 10.0, order_first: 1.8, order_simons: 0.9, umbilic: 1e-10 }
    }
}

impl Tolerances {
    /// Monitor tolerance `absolute + h2_factor · h²`.
    pub fn monitor(&self, h: f64) -> f64 {
        self.absolute + self.h2_factor * h * h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: MetricPreset,
    pub metric_source: MetricSource,
    pub initial: InitialProfile,
    pub nodes: Vec<usize>,
    pub stencil_defect: f64,
    pub stepping: Stepping,
    pub output: Output,
    pub tolerances: Tolerances,
}

pub const SUPPORTED_FIELDS: [&str; 4] = ["phi", "u", "u_rescaled", "mean_curvature"];

// ---- file layer ---------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    manifold: ManifoldSection,
    initial: InitialSection,
    discretization: DiscretizationSection,
    stepping: SteppingSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    tolerances: ToleranceSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifoldSection {
    preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<u32>,
    #[serde(default = "default_source")]
    metric_source: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    l: u32,
    m: i32,
    amplitude: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    profile: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    semi_axes: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    terms: Option<Vec<TermEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscretizationSection {
    nodes: Vec<usize>,
    #[serde(default)]
    stencil_defect: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SteppingSection {
    t_end: f64,
    #[serde(default = "default_cfl")]
    c_cfl: f64,
    #[serde(default = "default_integrator")]
    integrator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diag_interval: Option<f64>,
    #[serde(default)]
    checkpoint_every: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<u64>,
    #[serde(default = "default_fault")]
    fault: String,
    #[serde(default)]
    fault_step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    #[serde(default = "default_diag_name")]
    diagnostics: String,
    #[serde(default = "default_fields")]
    snapshot_fields: Vec<String>,
    #[serde(default)]
    snapshot_every: u32,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            diagnostics: default_diag_name(),
            snapshot_fields: default_fields(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSection {
    #[serde(default = "d_abs")]
    absolute: f64,
    #[serde(default = "d_h2")]
    h2_factor: f64,
    #[serde(default = "d_of")]
    order_first: f64,
    #[serde(default = "d_os")]
    order_simons: f64,
    #[serde(default = "d_umb")]
    umbilic: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let t = Tolerances::default();
        ToleranceSection {
            absolute: t.absolute,
            h2_factor: t.h2_factor,
            order_first: t.order_first,
            order_simons: t.order_simons,
            umbilic: t.umbilic,
        }
    }
}

fn default_source() -> String {
    "analytic".into()
}
fn default_cfl() -> f64 {
    0.9
}
fn default_integrator() -> String {
    "rk4".into()
}
fn default_fault() -> String {
    "none".into()
}
fn default_diag_name() -> String {
    "diagnostics.csv".into()
}
fn default_fields() -> Vec<String> {
    vec!["phi".into()]
}
fn d_abs() -> f64 {
    Tolerances::default().absolute
}
fn d_h2() -> f64 {
    Tolerances::default().h2_factor
}
fn d_of() -> f64 {
    Tolerances::default().order_first
}
fn d_os() -> f64 {
    Tolerances::default().order_simons
}
fn d_umb() -> f64 {
    Tolerances::default().umbilic
}

/// Line (1-based) of `key` inside `[section]`, or of the section header.
fn locate(text: &str, section: &str, key: Option<&str>) -> usize {
    let header = format!("[{section}]");
    let mut in_section = false;
    let mut header_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            in_section = line == header;
            if in_section {
                header_line = i + 1;
            }
            continue;
        }
        if in_section {
            if let Some(k) = key {
                let name = line.split('=').next().unwrap_or("").trim();
                if name == k {
                    return i + 1;
                }
            }
        }
    }
    header_line
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> FlowError {
        FlowError::Config { line: locate(self.text, section, Some(key)), message: message.into() }
    }

    fn need<T: Copy>(&self, v: Option<T>, section: &str, key: &str, profile: &str) -> Result<T> {
        v.ok_or_else(|| FlowError::Config {
            line: locate(self.text, section, None),
            message: format!("missing key `{key}` required by {section} profile `{profile}`"),
        })
    }
}

/// Parse and validate configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
        FlowError::Config { line, message: e.message().trim().to_string() }
    })?;
    let cx = Ctx { text };

    let m = &file.manifold;
    let preset = match m.preset.as_str() {
        "circle" => MetricPreset::Circle,
        "round_sphere" => MetricPreset::RoundSphere,
        "flat_torus" => MetricPreset::FlatTorus,
        "perturbed_sphere" => {
            MetricPreset::PerturbedSphere { epsilon: m.epsilon.unwrap_or(0.1), mode: m.mode.unwrap_or(2) }
        }
        other => return Err(cx.err("manifold", "preset", format!("unknown preset `{other}`"))),
    };
    if !matches!(preset, MetricPreset::PerturbedSphere { .. }) && (m.epsilon.is_some() || m.mode.is_some()) {
        let key = if m.epsilon.is_some() { "epsilon" } else { "mode" };
        return Err(cx.err("manifold", key, "`epsilon`/`mode` only apply to perturbed_sphere"));
    }
    if let MetricPreset::PerturbedSphere { epsilon, .. } = preset {
        if !epsilon.is_finite() {
            return Err(cx.err("manifold", "epsilon", "epsilon must be finite"));
        }
    }
    let metric_source = match m.metric_source.as_str() {
        "analytic" => MetricSource::Analytic,
        "stencil" => MetricSource::Stencil,
        other => return Err(cx.err("manifold", "metric_source", format!("unknown metric source `{other}`"))),
    };

    let ini = &file.initial;
    let p = ini.profile.as_str();
    let initial = match p {
        "constant" => InitialProfile::Constant { value: cx.need(ini.value, "initial", "value", p)? },
        "cosine" => InitialProfile::Cosine {
            base: ini.base.unwrap_or(1.0),
            amplitude: cx.need(ini.amplitude, "initial", "amplitude", p)?,
            mode: ini.mode.unwrap_or(1),
        },
        "ellipse" => {
            let [a, b] = cx.need(ini.semi_axes, "initial", "semi_axes", p)?;
            if !(a > 0.0 && b > 0.0) {
                return Err(cx.err("initial", "semi_axes", "semi-axes must be positive"));
            }
            InitialProfile::Ellipse { a, b }
        }
        "series" => InitialProfile::Series {
            base: ini.base.unwrap_or(1.0),
            terms: ini
                .terms
                .as_ref()
                .ok_or_else(|| cx.err("initial", "terms", "series profile needs `terms`"))?
                .iter()
                .map(|t| SeriesTerm { l: t.l, m: t.m, amplitude: t.amplitude })
                .collect(),
        },
        "random" => InitialProfile::Random {
            base: ini.base.unwrap_or(1.0),
            amplitude: cx.need(ini.amplitude, "initial", "amplitude", p)?,
            seed: ini.seed.unwrap_or(7),
        },
        other => return Err(cx.err("initial", "profile", format!("unknown profile `{other}`"))),
    };
    if let InitialProfile::Constant { value } = initial {
        if !(value > 0.0) {
            return Err(cx.err("initial", "value", "initial height must be positive"));
        }
    }
    if let InitialProfile::Series { terms, .. } = &initial {
        if let Some(t) = terms.iter().find(|t| t.m.unsigned_abs() > t.l && preset.has_poles()) {
            return Err(cx.err(
                "initial",
                "terms",
                format!("spherical harmonic needs |m| <= l, got l={} m={}", t.l, t.m),
            ));
        }
    }

    let d = &file.discretization;
    if d.nodes.len() != preset.dim() {
        return Err(cx.err(
            "discretization",
            "nodes",
            format!("preset {} needs {} node counts, got {}", preset.name(), preset.dim(), d.nodes.len()),
        ));
    }
    preset.grid(&d.nodes).map_err(|e| cx.err("discretization", "nodes", e.to_string()))?;
    if !d.stencil_defect.is_finite() {
        return Err(cx.err("discretization", "stencil_defect", "must be finite"));
    }

    let s = &file.stepping;
    if !(s.t_end > 0.0 && s.t_end.is_finite()) {
        return Err(cx.err("stepping", "t_end", format!("t_end must be positive, got {}", s.t_end)));
    }
    if !(s.c_cfl > 0.0 && s.c_cfl <= 1.0) {
        return Err(cx.err("stepping", "c_cfl", format!("c_cfl out of (0,1]: {}", s.c_cfl)));
    }
    let integrator = match s.integrator.as_str() {
        "rk2" => Integrator::Rk2,
        "rk4" => Integrator::Rk4,
        other => return Err(cx.err("stepping", "integrator", format!("unknown integrator `{other}` (rk2 | rk4)"))),
    };
    if let Some(dt) = s.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(cx.err("stepping", "dt", "dt must be positive"));
        }
    }
    let diag_interval = s.diag_interval.unwrap_or(s.t_end / 100.0);
    if !(diag_interval > 0.0 && diag_interval.is_finite()) {
        return Err(cx.err("stepping", "diag_interval", "diag_interval must be positive"));
    }
    let fault = match s.fault.as_str() {
        "none" => Fault::None,
        "nan" => Fault::Nan,
        "breach" => Fault::Breach,
        other => return Err(cx.err("stepping", "fault", format!("unknown fault `{other}`"))),
    };

    let o = &file.output;
    if let Some(bad) = o.snapshot_fields.iter().find(|f| !SUPPORTED_FIELDS.contains(&f.as_str())) {
        return Err(cx.err("output", "snapshot_fields", format!("unknown field `{bad}`")));
    }

    let t = &file.tolerances;
    for (key, val) in [
        ("absolute", t.absolute),
        ("h2_factor", t.h2_factor),
        ("order_first", t.order_first),
        ("order_simons", t.order_simons),
        ("umbilic", t.umbilic),
    ] {
        if !(val >= 0.0 && val.is_finite()) {
            return Err(cx.err("tolerances", key, format!("{key} must be a non-negative number")));
        }
    }

    Ok(RunConfig {
        preset,
        metric_source,
        initial,
        nodes: d.nodes.clone(),
        stencil_defect: d.stencil_defect,
        stepping: Stepping {
            t_end: s.t_end,
            c_cfl: s.c_cfl,
            integrator,
            dt: s.dt,
            diag_interval,
            checkpoint_every: s.checkpoint_every,
            max_steps: s.max_steps,
            fault,
            fault_step: s.fault_step,
        },
        output: Output {
            dir: o.dir.clone(),
            diagnostics: o.diagnostics.clone(),
            snapshot_fields: o.snapshot_fields.clone(),
            snapshot_every: o.snapshot_every,
        },
        tolerances: Tolerances {
            absolute: t.absolute,
            h2_factor: t.h2_factor,
            order_first: t.order_first,
            order_simons: t.order_simons,
            umbilic: t.umbilic,
        },
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FlowError::io(path, e))?;
    parse_config_str(&text).map_err(|e| match e {
        FlowError::Config { line, message } => {
            FlowError::Config { line, message: format!("{}: {message}", path.display()) }
        }
        other => other,
    })
}

/// Serialize a configuration with every default made explicit.
pub fn emit_config(cfg: &RunConfig) -> String {
    let (epsilon, mode) = match cfg.preset {
        MetricPreset::PerturbedSphere { epsilon, mode } => (Some(epsilon), Some(mode)),
        _ => (None, None),
    };
    let mut ini = InitialSection { profile: cfg.initial.name().into(), ..Default::default() };
    match &cfg.initial {
        InitialProfile::Constant { value } => ini.value = Some(*value),
        InitialProfile::Cosine { base, amplitude, mode } => {
            ini.base = Some(*base);
            ini.amplitude = Some(*amplitude);
            ini.mode = Some(*mode);
        }
        InitialProfile::Ellipse { a, b } => ini.semi_axes = Some([*a, *b]),
        InitialProfile::Series { base, terms } => {
            ini.base = Some(*base);
            ini.terms = Some(terms.iter().map(|t| TermEntry { l: t.l, m: t.m, amplitude: t.amplitude }).collect());
        }
        InitialProfile::Random { base, amplitude, seed } => {
            ini.base = Some(*base);
            ini.amplitude = Some(*amplitude);
            ini.seed = Some(*seed);
        }
    }
    let s = &cfg.stepping;
    let file = ConfigFile {
        manifold: ManifoldSection {
            preset: cfg.preset.name().into(),
            epsilon,
            mode,
            metric_source: match cfg.metric_source {
                MetricSource::Analytic => "analytic".into(),
                MetricSource::Stencil => "stencil".into(),
            },
        },
        initial: ini,
        discretization: DiscretizationSection { nodes: cfg.nodes.clone(), stencil_defect: cfg.stencil_defect },
        stepping: SteppingSection {
            t_end: s.t_end,
            c_cfl: s.c_cfl,
            integrator: s.integrator.name().into(),
            dt: s.dt,
            diag_interval: Some(s.diag_interval),
            checkpoint_every: s.checkpoint_every,
            max_steps: s.max_steps,
            fault: match s.fault {
                Fault::None => "none",
                Fault::Nan => "nan",
                Fault::Breach => "breach",
            }
            .into(),
            fault_step: s.fault_step,
        },
        output: OutputSection {
            dir: cfg.output.dir.clone(),
            diagnostics: cfg.output.diagnostics.clone(),
            snapshot_fields: cfg.output.snapshot_fields.clone(),
            snapshot_every: cfg.output.snapshot_every,
        },
        tolerances: ToleranceSection {
            absolute: cfg.tolerances.absolute,
            h2_factor: cfg.tolerances.h2_factor,
            order_first: cfg.tolerances.order_first,
            order_simons: cfg.tolerances.order_simons,
            umbilic: cfg.tolerances.umbilic,
        },
    };
    toml::to_string(&file).expect("config sections always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[manifold]
preset = "round_sphere"

[initial]
profile = "constant"
value = 1.0

[discretization]
nodes = [16, 32]

[stepping]
t_end = 1.0
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.stepping.c_cfl, 0.9);
        assert_eq!(c.stepping.integrator, Integrator::Rk4);
        assert_eq!(c.stepping.diag_interval, 0.01);
        assert_eq!(c.metric_source, MetricSource::Analytic);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.output.dir, None);
    }

    #[test]
    fn cfl_out_of_range_names_line() {
        let text = MINIMAL.replace("t_end = 1.0", "t_end = 1.0\nc_cfl = 1.5");
        match parse_config_str(&text) {
            Err(FlowError::Config { line, message }) => {
                assert_eq!(line, 14);
                assert!(message.contains("c_cfl out of (0,1]"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_duplicate_section_rejected() {
        let text = MINIMAL.replace("value = 1.0", "value = 1.0\nvalu = 2.0");
        match parse_config_str(&text) {
            Err(FlowError::Config { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[stepping]\nt_end = 2.0\n");
        assert!(matches!(parse_config_str(&text), Err(FlowError::Config { .. })));
    }

    #[test]
    fn missing_required_key() {
        let text = MINIMAL.replace("t_end = 1.0", "");
        assert!(matches!(parse_config_str(&text), Err(FlowError::Config { .. })));
        let text = MINIMAL.replace("value = 1.0", "");
        assert!(matches!(parse_config_str(&text), Err(FlowError::Config { line: 5, .. })));
    }

    #[test]
    fn wrong_node_count_for_preset() {
        let text = MINIMAL.replace("[16, 32]", "[16]");
        assert!(parse_config_str(&text).is_err());
        let text = MINIMAL.replace("[16, 32]", "[16, 33]");
        assert!(parse_config_str(&text).is_err());
    }
}
