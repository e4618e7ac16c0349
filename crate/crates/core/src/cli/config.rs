//! Scenario configuration: a flat `key = value` file with dotted sections,
//! parsed as TOML. Every key is optional; omitted keys take the values of the
//! preset named by `scenario`.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::ConfigError;
use crate::flow::{FlowConfig, FlowState};
use crate::moduli::{MappingClass, TeichPoint};
use crate::target::{CouplingProfile, CurveKind, ModuliCurve, ProfileKind};

pub const PRESETS: [&str; 3] = ["winding-dehn", "winding-loop", "analytic-converging"];

/// Name of the scenario that starts from library defaults instead of a preset.
pub const CUSTOM: &str = "custom";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveChoice {
    DehnTwist,
    ClosedLoop,
    Constant,
    Spline,
}

/// Curve parameters; only those relevant to `kind` are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub kind: CurveChoice,
    pub shift: f64,
    pub height: f64,
    pub center_a: f64,
    pub center_b: f64,
    pub radius: f64,
    pub points_a: Vec<f64>,
    pub points_b: Vec<f64>,
    pub deck: [[i64; 2]; 2],
}

impl Default for CurveParams {
    fn default() -> Self {
        Self {
            kind: CurveChoice::DehnTwist,
            shift: 0.0,
            height: 1.0,
            center_a: 0.0,
            center_b: 1.0,
            radius: 0.0,
            points_a: vec![],
            points_b: vec![],
            deck: MappingClass::translation(-1).entries(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialParams {
    pub z0: f64,
    /// Initial metric; `None` starts on the curve at `G_{z0}`.
    pub metric: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputParams {
    /// Run directory, relative to the output root.
    pub dir: String,
    pub plots: bool,
    /// Fraction of the trace used by the Łojasiewicz fit.
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub curve: CurveParams,
    pub profile: CouplingProfile,
    pub flow: FlowConfig,
    pub initial: InitialParams,
    pub output: OutputParams,
}

impl ScenarioConfig {
    /// Library defaults: the Dehn-twist curve with the classical coupling.
    pub fn custom() -> Self {
        Self {
            scenario: CUSTOM.into(),
            seed: 0,
            curve: CurveParams::default(),
            profile: CouplingProfile::default(),
            flow: FlowConfig::default(),
            initial: InitialParams { z0: 0.0, metric: None },
            output: OutputParams {
                dir: CUSTOM.into(),
                plots: true,
                tail_fraction: 0.5,
            },
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        let mut c = Self::custom();
        c.scenario = name.into();
        c.output.dir = name.into();
        match name {
            CUSTOM => {}
            "winding-dehn" => {
                c.profile = CouplingProfile::staircase(0.1, 0.3).ok()?;
                c.flow.eta = 2.0;
                c.flow.t_max = 2e4;
            }
            "winding-loop" => {
                c.curve = CurveParams {
                    kind: CurveChoice::ClosedLoop,
                    center_a: 0.0,
                    center_b: 2.0,
                    radius: 0.5,
                    deck: MappingClass::identity().entries(),
                    ..CurveParams::default()
                };
                c.profile = CouplingProfile::staircase(0.1, 0.3).ok()?;
                c.flow.eta = 2.0;
                c.flow.t_max = 2e4;
            }
            "analytic-converging" => {
                c.curve = CurveParams {
                    kind: CurveChoice::Constant,
                    center_a: 0.0,
                    center_b: 1.0,
                    deck: MappingClass::identity().entries(),
                    ..CurveParams::default()
                };
                c.profile = CouplingProfile::converging_well(0.0).ok()?;
                c.flow.eta = 2.0;
                c.flow.t_max = 60.0;
                c.flow.max_step = 1.0;
                c.flow.abs_tol = 1e-14;
                c.initial = InitialParams {
                    z0: 1.0,
                    metric: Some((0.3, 1.4)),
                };
            }
            _ => return None,
        }
        Some(c)
    }

    pub fn curve(&self) -> Result<ModuliCurve, ConfigError> {
        let c = &self.curve;
        let deck = MappingClass::new(c.deck).map_err(|e| invalid("curve.deck", e))?;
        let point = |a, b| TeichPoint::new(a, b).map_err(|e| invalid("curve.center_b", e));
        let curve = match c.kind {
            CurveChoice::DehnTwist => ModuliCurve::new(
                CurveKind::DehnTwist {
                    shift: c.shift,
                    height: c.height,
                },
                deck,
            ),
            CurveChoice::ClosedLoop => ModuliCurve::new(
                CurveKind::ClosedLoop {
                    center: point(c.center_a, c.center_b)?,
                    radius: c.radius,
                },
                deck,
            ),
            CurveChoice::Constant => ModuliCurve::new(
                CurveKind::ClosedLoop {
                    center: point(c.center_a, c.center_b)?,
                    radius: 0.0,
                },
                deck,
            ),
            CurveChoice::Spline => {
                if c.points_a.len() != c.points_b.len() {
                    return Err(invalid(
                        "curve.points_b",
                        format!("{} a-coordinates but {} b-coordinates", c.points_a.len(), c.points_b.len()),
                    ));
                }
                let pts = c
                    .points_a
                    .iter()
                    .zip(&c.points_b)
                    .map(|(&a, &b)| TeichPoint::new(a, b))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| invalid("curve.points_b", e))?;
                ModuliCurve::new(CurveKind::Spline { points: pts }, deck)
            }
        };
        curve.map_err(|e| invalid("curve", e))
    }

    pub fn coupling(&self) -> Result<CouplingProfile, ConfigError> {
        let p = &self.profile;
        CouplingProfile::new(p.kind, p.width, p.rate, p.center).map_err(|e| invalid("profile", e))
    }

    pub fn initial_state(&self) -> Result<FlowState, ConfigError> {
        let curve = self.curve()?;
        let s = match self.initial.metric {
            None => FlowState::on_curve(&curve, self.initial.z0),
            Some((a, b)) => FlowState::new(0.0, self.initial.z0, a, b).map_err(|e| invalid("initial.b0", e))?,
        };
        s.check().map_err(|e| invalid("initial.z0", e))?;
        Ok(s)
    }

    /// Checks every invariant that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario != CUSTOM && !PRESETS.contains(&self.scenario.as_str()) {
            return Err(invalid("scenario", format!("unknown preset `{}`", self.scenario)));
        }
        if i64::try_from(self.seed).is_err() {
            return Err(invalid("seed", format!("must not exceed {}", i64::MAX)));
        }
        self.curve()?;
        self.coupling()?;
        self.flow.validate().map_err(|e| invalid("flow", e))?;
        self.initial_state()?;
        let o = &self.output;
        if o.dir.is_empty() || std::path::Path::new(&o.dir).is_absolute() || o.dir.split(['/', '\\']).any(|c| c == "..") {
            return Err(invalid("output.dir", "must be a non-empty relative path without `..`"));
        }
        if !(o.tail_fraction > 0.0 && o.tail_fraction <= 1.0) {
            return Err(invalid("output.tail_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Serializes every key, so that `parse_config` restores the same config
    /// regardless of preset defaults.
    pub fn to_text(&self) -> String {
        let f = Value::Float;
        let floats = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let mut root = Table::new();
        root.insert("scenario".into(), Value::String(self.scenario.clone()));
        root.insert("seed".into(), Value::Integer(self.seed as i64));

        let c = &self.curve;
        let mut curve = Table::new();
        curve.insert("kind".into(), Value::String(curve_name(c.kind).into()));
        curve.insert("shift".into(), f(c.shift));
        curve.insert("height".into(), f(c.height));
        curve.insert("center_a".into(), f(c.center_a));
        curve.insert("center_b".into(), f(c.center_b));
        curve.insert("radius".into(), f(c.radius));
        curve.insert("points_a".into(), floats(&c.points_a));
        curve.insert("points_b".into(), floats(&c.points_b));
        curve.insert(
            "deck".into(),
            Value::Array(
                c.deck
                    .iter()
                    .map(|row| Value::Array(row.iter().map(|x| Value::Integer(*x)).collect()))
                    .collect(),
            ),
        );
        root.insert("curve".into(), Value::Table(curve));

        let p = &self.profile;
        let mut profile = Table::new();
        profile.insert("kind".into(), Value::String(profile_name(p.kind).into()));
        profile.insert("width".into(), f(p.width));
        profile.insert("rate".into(), f(p.rate));
        profile.insert("center".into(), f(p.center));
        root.insert("profile".into(), Value::Table(profile));

        let fl = &self.flow;
        let mut flow = Table::new();
        flow.insert("eta".into(), f(fl.eta));
        flow.insert("t_max".into(), f(fl.t_max));
        flow.insert("rel_tol".into(), f(fl.rel_tol));
        flow.insert("abs_tol".into(), f(fl.abs_tol));
        flow.insert("min_step".into(), f(fl.min_step));
        flow.insert("max_step".into(), f(fl.max_step));
        flow.insert("level_offsets".into(), floats(&fl.level_offsets));
        flow.insert("velocity_threshold".into(), f(fl.velocity_threshold));
        flow.insert("max_records".into(), Value::Integer(fl.max_records as i64));
        root.insert("flow".into(), Value::Table(flow));

        let mut initial = Table::new();
        initial.insert("z0".into(), f(self.initial.z0));
        match self.initial.metric {
            Some((a, b)) => {
                initial.insert("a0".into(), f(a));
                initial.insert("b0".into(), f(b));
            }
            None => {
                initial.insert("on_curve".into(), Value::Boolean(true));
            }
        }
        root.insert("initial".into(), Value::Table(initial));

        let o = &self.output;
        let mut output = Table::new();
        output.insert("dir".into(), Value::String(o.dir.clone()));
        output.insert("plots".into(), Value::Boolean(o.plots));
        output.insert("tail_fraction".into(), f(o.tail_fraction));
        root.insert("output".into(), Value::Table(output));

        toml::to_string(&root).expect("config tables always serialize")
    }
}

fn invalid(key: &str, e: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: e.to_string(),
    }
}

fn curve_name(k: CurveChoice) -> &'static str {
    match k {
        CurveChoice::DehnTwist => "dehn_twist",
        CurveChoice::ClosedLoop => "closed_loop",
        CurveChoice::Constant => "constant",
        CurveChoice::Spline => "spline",
    }
}

fn profile_name(k: ProfileKind) -> &'static str {
    match k {
        ProfileKind::Staircase => "staircase",
        ProfileKind::AnalyticStrip => "analytic_strip",
        ProfileKind::ConvergingWell => "converging_well",
    }
}

/// 1-based line of the first assignment to `leaf` (a key's last segment).
fn line_of(text: &str, leaf: &str) -> usize {
    text.lines()
        .position(|l| {
            let lhs = l.split('=').next().unwrap_or("").trim();
            l.contains('=') && (lhs == leaf || lhs.ends_with(&format!(".{leaf}")))
        })
        .map_or(0, |i| i + 1)
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) if prefix.is_empty() => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

struct Reader<'a> {
    key: &'a str,
    value: &'a Value,
}

impl Reader<'_> {
    fn fail(&self, expected: &str) -> ConfigError {
        invalid(self.key, format!("expected {expected}, got `{}`", self.value))
    }

    fn float(&self) -> Result<f64, ConfigError> {
        match self.value {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.fail("a number")),
        }
    }

    fn floats(&self) -> Result<Vec<f64>, ConfigError> {
        match self.value {
            Value::Array(items) => items
                .iter()
                .map(|v| Reader { key: self.key, value: v }.float())
                .collect(),
            _ => Err(self.fail("an array of numbers")),
        }
    }

    fn int(&self) -> Result<i64, ConfigError> {
        match self.value {
            Value::Integer(i) => Ok(*i),
            _ => Err(self.fail("an integer")),
        }
    }

    fn unsigned(&self) -> Result<u64, ConfigError> {
        u64::try_from(self.int()?).map_err(|_| self.fail("a non-negative integer"))
    }

    fn string(&self) -> Result<&str, ConfigError> {
        match self.value {
            Value::String(s) => Ok(s),
            _ => Err(self.fail("a string")),
        }
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.value {
            Value::Boolean(b) => Ok(*b),
            _ => Err(self.fail("true or false")),
        }
    }

    fn matrix(&self) -> Result<[[i64; 2]; 2], ConfigError> {
        let rows = match self.value {
            Value::Array(rows) if rows.len() == 2 => rows,
            _ => return Err(self.fail("a 2x2 integer matrix [[p, q], [r, s]]")),
        };
        let mut m = [[0; 2]; 2];
        for (i, row) in rows.iter().enumerate() {
            match row {
                Value::Array(xs) if xs.len() == 2 => {
                    for (j, x) in xs.iter().enumerate() {
                        m[i][j] = Reader { key: self.key, value: x }.int()?;
                    }
                }
                _ => return Err(self.fail("a 2x2 integer matrix [[p, q], [r, s]]")),
            }
        }
        Ok(m)
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        line: e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let mut entries = Vec::new();
    flatten("", &table, &mut entries);

    let scenario = match table.get("scenario") {
        Some(v) => Reader { key: "scenario", value: v }.string()?.to_string(),
        None => CUSTOM.to_string(),
    };
    let mut c = ScenarioConfig::preset(&scenario).ok_or_else(|| {
        invalid(
            "scenario",
            format!("unknown preset `{scenario}`; expected one of {PRESETS:?} or `{CUSTOM}`"),
        )
    })?;
    let (mut a0, mut b0, mut on_curve) = (None, None, None);

    for (key, value) in &entries {
        let r = Reader { key, value };
        match key.as_str() {
            "scenario" => {}
            "seed" => c.seed = r.unsigned()?,
            "curve.kind" => {
                c.curve.kind = match r.string()? {
                    "dehn_twist" => CurveChoice::DehnTwist,
                    "closed_loop" => CurveChoice::ClosedLoop,
                    "constant" => CurveChoice::Constant,
                    "spline" => CurveChoice::Spline,
                    other => return Err(invalid(key, format!("unknown curve kind `{other}`"))),
                }
            }
            "curve.shift" => c.curve.shift = r.float()?,
            "curve.height" => c.curve.height = r.float()?,
            "curve.center_a" => c.curve.center_a = r.float()?,
            "curve.center_b" => c.curve.center_b = r.float()?,
            "curve.radius" => c.curve.radius = r.float()?,
            "curve.points_a" => c.curve.points_a = r.floats()?,
            "curve.points_b" => c.curve.points_b = r.floats()?,
            "curve.deck" => c.curve.deck = r.matrix()?,
            "profile.kind" => {
                c.profile.kind = match r.string()? {
                    "staircase" => ProfileKind::Staircase,
                    "analytic_strip" => ProfileKind::AnalyticStrip,
                    "converging_well" => ProfileKind::ConvergingWell,
                    other => return Err(invalid(key, format!("unknown profile kind `{other}`"))),
                }
            }
            "profile.width" => c.profile.width = r.float()?,
            "profile.rate" => c.profile.rate = r.float()?,
            "profile.center" => c.profile.center = r.float()?,
            "flow.eta" => c.flow.eta = r.float()?,
            "flow.t_max" => c.flow.t_max = r.float()?,
            "flow.rel_tol" => c.flow.rel_tol = r.float()?,
            "flow.abs_tol" => c.flow.abs_tol = r.float()?,
            "flow.min_step" => c.flow.min_step = r.float()?,
            "flow.max_step" => c.flow.max_step = r.float()?,
            "flow.level_offsets" => c.flow.level_offsets = r.floats()?,
            "flow.velocity_threshold" => c.flow.velocity_threshold = r.float()?,
            "flow.max_records" => {
                c.flow.max_records = usize::try_from(r.unsigned()?).map_err(|_| r.fail("a record count"))?
            }
            "initial.z0" => c.initial.z0 = r.float()?,
            "initial.a0" => a0 = Some(r.float()?),
            "initial.b0" => b0 = Some(r.float()?),
            "initial.on_curve" => on_curve = Some(r.boolean()?),
            "output.dir" => c.output.dir = r.string()?.to_string(),
            "output.plots" => c.output.plots = r.boolean()?,
            "output.tail_fraction" => c.output.tail_fraction = r.float()?,
            _ => {
                let leaf = key.rsplit('.').next().unwrap_or(key);
                return Err(ConfigError::UnknownKey {
                    line: line_of(text, leaf),
                    key: key.clone(),
                });
            }
        }
    }
    match (a0, b0, on_curve) {
        (None, None, None | Some(false)) => {}
        (None, None, Some(true)) => c.initial.metric = None,
        (Some(a), Some(b), None | Some(false)) => c.initial.metric = Some((a, b)),
        (Some(_), Some(_), Some(true)) => {
            return Err(invalid("initial.on_curve", "conflicts with a0 and b0"));
        }
        _ => return Err(invalid("initial", "a0 and b0 must be given together")),
    }
    c.validate()?;
    Ok(c)
}
