//! Experiment configuration: the TOML schema and its validation.

use std::path::{Path, PathBuf};

use barypot::{
    BuiltinField, DensitySpec64, ExternalField64, FHConfig, Family64, FieldFamily, NodeRule, Normalization, Pole,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable that overrides `outputs`.
pub const OUTPUT_DIR_ENV: &str = "BARYPOT_OUTPUT_DIR";

/// `n_list` used by the `repro_*` scenarios when none is given.
pub const REPRO_NS: [usize; 5] = [20, 40, 80, 160, 320];
/// Pole recovery is limited to `n <= 64`, so the F-H figure uses these.
pub const REPRO_FIG6_NS: [usize; 3] = [20, 40, 60];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Nodes,
    Weights,
    Lebesgue,
    Sweep,
    Contour,
    Fh,
    ReproFig1,
    ReproFig4,
    ReproFig6,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nodes => "nodes",
            Self::Weights => "weights",
            Self::Lebesgue => "lebesgue",
            Self::Sweep => "sweep",
            Self::Contour => "contour",
            Self::Fh => "fh",
            Self::ReproFig1 => "repro_fig1",
            Self::ReproFig4 => "repro_fig4",
            Self::ReproFig6 => "repro_fig6",
        }
    }

    fn is_repro(self) -> bool {
        matches!(self, Self::ReproFig1 | Self::ReproFig4 | Self::ReproFig6)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: Scenario,
    pub outputs: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub normalization: NormalizationName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fh: Option<FhSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    /// `quantile` (default), `equidistant` or `chebyshev_first_kind`.
    #[serde(default = "default_rule")]
    pub rule: String,
}

fn default_rule() -> String {
    "quantile".into()
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            name: "uniform".into(),
            params: Vec::new(),
            rule: default_rule(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKindName {
    #[default]
    None,
    /// Explicit poles, the same for every `n`.
    Poles,
    /// `n` poles split between `±i/2`.
    HalfImaginaryPoles,
    Functional,
    Equilibrium,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub kind: FieldKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<PoleConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin_name: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    pub re: f64,
    pub im: f64,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_samples")]
    pub samples_per_gap: usize,
    #[serde(default)]
    pub contour: ContourConfig,
}

fn default_samples() -> usize {
    barypot::barycentric::SAMPLES_PER_GAP
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            samples_per_gap: default_samples(),
            contour: ContourConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub re_range: [f64; 2],
    pub im_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            re_range: [-1.5, 1.5],
            im_range: [-1.0, 1.0],
            nx: 121,
            ny: 81,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationName {
    #[default]
    Raw,
    MaxOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FhModeName {
    Fixed,
    Proportional,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhSection {
    pub mode: FhModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_fh: Option<f64>,
}

/// The field as used by the scenarios.
#[derive(Clone, Debug)]
pub enum FieldChoice {
    Family(FieldFamily<f64>),
    /// Explicit poles; only valid where a per-`n` field suffices.
    Fixed(ExternalField64),
}

/// A checked configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub raw: RawConfig,
    pub scenario: Scenario,
    pub n_list: Vec<usize>,
    pub outputs: PathBuf,
    pub density: DensitySpec64,
    pub rule: NodeRule,
    pub field: FieldChoice,
    pub samples_per_gap: usize,
    pub contour: ContourConfig,
    pub normalization: Normalization,
    pub fh: Option<FhSection>,
}

impl Experiment {
    /// The external field at degree `n`.
    pub fn field_at(&self, n: usize) -> ExternalField64 {
        match &self.field {
            FieldChoice::Fixed(f) => f.clone(),
            FieldChoice::Family(ff) => self.family_with(*ff).discrete_field(n),
        }
    }

    fn family_with(&self, ff: FieldFamily<f64>) -> Family64 {
        Family64::new(self.density.clone(), self.rule, ff).expect("rule checked during validation")
    }

    /// The node family without a field (for node placement).
    pub fn node_family(&self) -> Family64 {
        self.family_with(FieldFamily::None)
    }

    /// The configured family; `None` for explicit poles.
    pub fn family(&self) -> Option<Family64> {
        match self.field {
            FieldChoice::Family(ff) => Some(self.family_with(ff)),
            FieldChoice::Fixed(_) => None,
        }
    }

    pub fn fh_config(&self, n: usize) -> barypot::Result<FHConfig> {
        let fh = self.fh.expect("fh section checked during validation");
        match fh.mode {
            FhModeName::Fixed => FHConfig::fixed(n, fh.d.expect("d checked")),
            FhModeName::Proportional => FHConfig::proportional(n, fh.c_fh.expect("c_fh checked")),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

/// Reads and checks a config file.
pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, path)
}

pub fn parse(text: &str, origin: &Path) -> Result<Experiment, CliError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {}", origin.display(), e.to_string().trim_end())))?;
    validate(raw)
}

pub fn validate(raw: RawConfig) -> Result<Experiment, CliError> {
    let scenario = raw.scenario;
    let n_list = match (&raw.n_list, scenario) {
        (Some(ns), _) => ns.clone(),
        (None, Scenario::ReproFig6) => REPRO_FIG6_NS.to_vec(),
        (None, s) if s.is_repro() => REPRO_NS.to_vec(),
        (None, _) => return Err(invalid("n_list", "missing (required for this scenario)")),
    };
    if n_list.is_empty() {
        return Err(invalid("n_list", "must not be empty"));
    }
    if let Some(w) = n_list.windows(2).find(|w| w[1] <= w[0]) {
        return Err(invalid("n_list", format!("must be strictly increasing ({} then {})", w[0], w[1])));
    }
    if n_list[0] == 0 {
        return Err(invalid("n_list", "degrees must be at least 1"));
    }

    let density = DensitySpec64::by_name(&raw.density.name, &raw.density.params)
        .map_err(|e| invalid("density", e))?;
    let rule = NodeRule::by_name(&raw.density.rule).map_err(|e| invalid("density.rule", e))?;
    Family64::new(density.clone(), rule, FieldFamily::None).map_err(|e| invalid("density.rule", e))?;

    let f = &raw.field;
    let stray = |name: &str, present: bool| -> Result<(), CliError> {
        if present {
            Err(invalid(&format!("field.{name}"), format!("not used by field kind {:?}", f.kind)))
        } else {
            Ok(())
        }
    };
    let field = match f.kind {
        FieldKindName::None | FieldKindName::HalfImaginaryPoles => {
            stray("poles", f.poles.is_some())?;
            stray("u_bar", f.u_bar.is_some())?;
            stray("builtin_name", f.builtin_name.is_some())?;
            FieldChoice::Family(if f.kind == FieldKindName::None {
                FieldFamily::None
            } else {
                FieldFamily::HalfImaginaryPoles
            })
        }
        FieldKindName::Poles => {
            stray("u_bar", f.u_bar.is_some())?;
            stray("builtin_name", f.builtin_name.is_some())?;
            let poles = f.poles.as_ref().ok_or_else(|| invalid("field.poles", "required for kind = \"poles\""))?;
            let list = poles.iter().map(|p| Pole::new(p.re, p.im, p.multiplicity)).collect();
            let ext = ExternalField64::poles(list).map_err(|e| invalid("field.poles", e))?;
            if let Some(&n) = n_list.first() {
                ext.check_degree(n).map_err(|e| invalid("field.poles", format!("{e} (smallest n in n_list)")))?;
            }
            FieldChoice::Fixed(ext)
        }
        FieldKindName::Functional => {
            stray("poles", f.poles.is_some())?;
            stray("u_bar", f.u_bar.is_some())?;
            let name = f
                .builtin_name
                .as_deref()
                .ok_or_else(|| invalid("field.builtin_name", "required for kind = \"functional\""))?;
            FieldChoice::Family(FieldFamily::Functional(
                BuiltinField::by_name(name).map_err(|e| invalid("field.builtin_name", e))?,
            ))
        }
        FieldKindName::Equilibrium => {
            stray("poles", f.poles.is_some())?;
            stray("builtin_name", f.builtin_name.is_some())?;
            let u_bar = f.u_bar.unwrap_or(1.0);
            if !u_bar.is_finite() {
                return Err(invalid("field.u_bar", "must be finite"));
            }
            FieldChoice::Family(FieldFamily::Equilibrium { u_bar })
        }
    };

    if raw.grid.samples_per_gap < 10 {
        return Err(invalid("grid.samples_per_gap", format!("must be at least 10, got {}", raw.grid.samples_per_gap)));
    }
    let c = raw.grid.contour;
    for (name, r) in [("re_range", c.re_range), ("im_range", c.im_range)] {
        if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
            return Err(invalid(&format!("grid.contour.{name}"), format!("needs finite lo < hi, got {r:?}")));
        }
    }
    if c.nx < 2 || c.ny < 2 {
        return Err(invalid("grid.contour", format!("nx and ny must be at least 2, got {} x {}", c.nx, c.ny)));
    }

    if scenario == Scenario::Sweep && matches!(field, FieldChoice::Fixed(_)) {
        return Err(invalid(
            "field.kind",
            "sweep needs a field family (none, half_imaginary_poles, functional or equilibrium); a fixed pole set has no limit field",
        ));
    }

    if scenario == Scenario::Fh {
        let fh = raw.fh.ok_or_else(|| invalid("fh", "section required for scenario = \"fh\""))?;
        match fh.mode {
            FhModeName::Fixed => {
                let d = fh.d.ok_or_else(|| invalid("fh.d", "required for mode = \"fixed\""))?;
                if fh.c_fh.is_some() {
                    return Err(invalid("fh.c_fh", "not used in mode = \"fixed\""));
                }
                if let Some(&n) = n_list.iter().find(|&&n| n < d) {
                    return Err(invalid("fh.d", format!("d = {d} exceeds n = {n}")));
                }
            }
            FhModeName::Proportional => {
                let c = fh.c_fh.ok_or_else(|| invalid("fh.c_fh", "required for mode = \"proportional\""))?;
                if fh.d.is_some() {
                    return Err(invalid("fh.d", "not used in mode = \"proportional\""));
                }
                if !(c > 0.0 && c <= 1.0) {
                    return Err(invalid("fh.c_fh", format!("must lie in (0, 1], got {c}")));
                }
            }
        }
    } else if raw.fh.is_some() {
        return Err(invalid("fh", format!("only used by scenario = \"fh\", not {}", scenario.name())));
    }

    let outputs = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => raw.outputs.clone(),
    };
    if outputs.as_os_str().is_empty() {
        return Err(invalid("outputs", "must name a directory"));
    }

    Ok(Experiment {
        scenario,
        n_list,
        outputs,
        density,
        rule,
        field,
        samples_per_gap: raw.grid.samples_per_gap,
        contour: c,
        normalization: match raw.normalization {
            NormalizationName::Raw => Normalization::Raw,
            NormalizationName::MaxOne => Normalization::MaxOne,
        },
        fh: raw.fh,
        raw,
    })
}
