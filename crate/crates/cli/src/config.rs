//! Config ingestion. Everything is checked up front and every problem is
//! reported with its field path, so a config is either fully typed or
//! rejected with the complete list.

use std::fmt;
use std::path::PathBuf;

use qfeedback_core::fock_master::{InitialState, DEFAULT_N_CAV};
use qfeedback_core::pulses::PulseSpec;
use qfeedback_core::NetworkParams;
use serde_json::{Map, Value};

pub const PARAM_KEYS: [&str; 7] = [
    "delta_omega_1",
    "delta_omega_2",
    "delta_omega_r",
    "gamma_1",
    "gamma_2",
    "kappa",
    "mu",
];

const TOP_KEYS: [&str; 12] = [
    "scenario",
    "description",
    "params",
    "pulse",
    "grid",
    "initial_state",
    "t_terminal",
    "closed_loop",
    "n_cav",
    "sweep",
    "cases",
    "output_dir",
];

const GRID_KEYS: [&str; 7] = ["dt", "t_start", "t_end", "after", "extension_cap", "decay_threshold", "output_stride"];

/// Relative mismatch tolerated between a pulse's `kappa_tilde` and the network's.
const KAPPA_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    PulseResponse,
    Stability,
    Excitation,
    SteadyState,
    Invert,
}

impl Scenario {
    pub fn key(self) -> &'static str {
        match self {
            Scenario::PulseResponse => "pulse_response",
            Scenario::Stability => "stability",
            Scenario::Excitation => "excitation",
            Scenario::SteadyState => "steady_state",
            Scenario::Invert => "invert",
        }
    }

    fn uses_pulse(self) -> bool {
        matches!(self, Scenario::PulseResponse | Scenario::Excitation | Scenario::Invert)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridSettings {
    pub dt: Option<f64>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub after: Option<f64>,
    pub extension_cap: Option<f64>,
    pub decay_threshold: Option<f64>,
    pub output_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

/// One fully resolved simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub params: NetworkParams,
    /// `None` is the vacuum.
    pub pulse: Option<PulseSpec>,
    pub initial: InitialState,
    pub t_terminal: f64,
    /// Value of the sweep key at this point.
    pub sweep_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub raw: Value,
    pub closed_loop: bool,
    pub n_cav: usize,
    pub grid: GridSettings,
    pub sweep: Option<Sweep>,
    pub output_dir: Option<PathBuf>,
    pub points: Vec<Point>,
}

#[derive(Default)]
struct Errors(Vec<ConfigError>);

impl Errors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        let e = ConfigError { path: path.into(), message: message.into() };
        if !self.0.contains(&e) {
            self.0.push(e);
        }
    }
}

struct Case {
    label: String,
    path: String,
    set: Map<String, Value>,
}

/// Typed config for `scenario`, or every validation error found.
pub fn validate_config(raw: &Value, scenario: Scenario) -> Result<ScenarioConfig, Vec<ConfigError>> {
    let mut errs = Errors::default();
    let Some(root) = raw.as_object() else {
        return Err(vec![ConfigError { path: "$".into(), message: "config must be a JSON object".into() }]);
    };
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            errs.push(key.clone(), "unknown field");
        }
    }
    match root.get("scenario") {
        None => {}
        Some(Value::String(s)) if s == scenario.key() => {}
        Some(Value::String(s)) => errs.push("scenario", format!("config is for `{s}` but `{}` was requested", scenario.key())),
        Some(_) => errs.push("scenario", "must be a string"),
    }
    if root.get("description").is_some_and(|v| !v.is_string()) {
        errs.push("description", "must be a string");
    }

    let grid = parse_grid(root.get("grid"), &mut errs);
    let closed_loop = match root.get("closed_loop") {
        None => true,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errs.push("closed_loop", "must be true or false");
            true
        }
    };
    let n_cav = match root.get("n_cav") {
        None => DEFAULT_N_CAV,
        Some(v) => match v.as_u64() {
            Some(n) if (1..=8).contains(&n) => n as usize,
            _ => {
                errs.push("n_cav", "must be an integer in 1..=8");
                DEFAULT_N_CAV
            }
        },
    };
    let output_dir = match root.get("output_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            errs.push("output_dir", "must be a string");
            None
        }
    };
    let sweep = parse_sweep(root.get("sweep"), &mut errs);
    let cases = parse_cases(root.get("cases"), &mut errs);

    let base_params = match root.get("params") {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => {
            errs.push("params", "must be an object");
            Map::new()
        }
        None => {
            errs.push("params", "missing");
            Map::new()
        }
    };
    let base_pulse = root.get("pulse").cloned();
    if base_pulse.is_some() && !scenario.uses_pulse() {
        errs.push("pulse", format!("not used by `{}`", scenario.key()));
    }
    if scenario == Scenario::PulseResponse && base_pulse.is_none() {
        errs.push("pulse", "missing");
    }
    if scenario == Scenario::Excitation && base_pulse.is_none() {
        errs.push("pulse", "missing (use \"vacuum\" for no input)");
    }
    if root.contains_key("initial_state") && scenario != Scenario::Excitation {
        errs.push("initial_state", format!("not used by `{}`", scenario.key()));
    }
    if root.contains_key("closed_loop") && scenario != Scenario::PulseResponse {
        errs.push("closed_loop", format!("not used by `{}`; set mu = 0 for the open loop", scenario.key()));
    }
    if root.contains_key("t_terminal") && scenario != Scenario::Invert {
        errs.push("t_terminal", format!("not used by `{}`", scenario.key()));
    }

    let mut template = Map::new();
    template.insert("params".into(), Value::Object(base_params));
    if let Some(p) = base_pulse {
        template.insert("pulse".into(), p);
    }
    for key in ["initial_state", "t_terminal"] {
        if let Some(v) = root.get(key) {
            template.insert(key.into(), v.clone());
        }
    }

    let case_list: Vec<Option<&Case>> = if cases.is_empty() { vec![None] } else { cases.iter().map(Some).collect() };
    let sweep_list: Vec<Option<f64>> = match &sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for case in &case_list {
        for value in &sweep_list {
            let mut t = template.clone();
            if let Some(c) = case {
                for (k, v) in &c.set {
                    if let Err(msg) = apply_override(&mut t, k, v.clone()) {
                        errs.push(format!("{}.set.{k}", c.path), msg);
                    }
                }
            }
            if let (Some(s), Some(x)) = (&sweep, value) {
                if let Err(msg) = apply_override(&mut t, &s.key, Value::from(*x)) {
                    errs.push("sweep.key", msg);
                }
            }
            let label = point_label(case.map(|c| c.label.as_str()), sweep.as_ref().map(|s| s.key.as_str()), *value);
            if let Some(point) = resolve_point(&t, scenario, label, *value, &mut errs) {
                points.push(point);
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for p in &points {
        if !seen.insert(file_stem(&p.label)) {
            errs.push("cases", format!("label `{}` is used twice", p.label));
        }
    }

    if !errs.0.is_empty() {
        return Err(errs.0);
    }
    Ok(ScenarioConfig {
        scenario,
        raw: raw.clone(),
        closed_loop,
        n_cav,
        grid,
        sweep,
        output_dir,
        points,
    })
}

/// File-name-safe version of a point label.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' })
        .collect()
}

fn point_label(case: Option<&str>, key: Option<&str>, value: Option<f64>) -> String {
    let swept = match (key, value) {
        (Some(k), Some(v)) => Some(format!("{}={}", k.rsplit('.').next().unwrap_or(k), crate::output::num(v))),
        _ => None,
    };
    match (case, swept) {
        (Some(c), Some(s)) => format!("{c}_{s}"),
        (Some(c), None) => c.to_string(),
        (None, Some(s)) => s,
        (None, None) => "run".to_string(),
    }
}

fn parse_grid(v: Option<&Value>, errs: &mut Errors) -> GridSettings {
    let mut g = GridSettings { output_stride: 1, ..GridSettings::default() };
    let Some(v) = v else { return g };
    let Some(m) = v.as_object() else {
        errs.push("grid", "must be an object");
        return g;
    };
    for (k, v) in m {
        if !GRID_KEYS.contains(&k.as_str()) {
            errs.push(format!("grid.{k}"), "unknown field");
            continue;
        }
        if k == "output_stride" {
            match v.as_u64() {
                Some(n) if n >= 1 => g.output_stride = n as usize,
                _ => errs.push("grid.output_stride", "must be a positive integer"),
            }
            continue;
        }
        let Some(x) = v.as_f64().filter(|x| x.is_finite()) else {
            errs.push(format!("grid.{k}"), "must be a finite number");
            continue;
        };
        let positive = |errs: &mut Errors| {
            if x <= 0.0 {
                errs.push(format!("grid.{k}"), "must be positive");
            }
        };
        match k.as_str() {
            "dt" => {
                positive(errs);
                g.dt = Some(x);
            }
            "t_start" => g.t_start = Some(x),
            "t_end" => g.t_end = Some(x),
            "after" => {
                if x < 0.0 {
                    errs.push("grid.after", "must be non-negative");
                }
                g.after = Some(x);
            }
            "extension_cap" => {
                positive(errs);
                g.extension_cap = Some(x);
            }
            _ => {
                positive(errs);
                g.decay_threshold = Some(x);
            }
        }
    }
    if let (Some(a), Some(b)) = (g.t_start, g.t_end) {
        if b <= a {
            errs.push("grid.t_end", "must exceed grid.t_start");
        }
    }
    g
}

fn parse_sweep(v: Option<&Value>, errs: &mut Errors) -> Option<Sweep> {
    let v = v?;
    let Some(m) = v.as_object() else {
        errs.push("sweep", "must be an object with `key` and `values`");
        return None;
    };
    for k in m.keys() {
        if k != "key" && k != "values" {
            errs.push(format!("sweep.{k}"), "unknown field");
        }
    }
    let key = match m.get("key") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            errs.push("sweep.key", "must be a string");
            return None;
        }
        None => {
            errs.push("sweep.key", "missing");
            return None;
        }
    };
    let values = match m.get("values") {
        Some(Value::Array(a)) if !a.is_empty() => {
            let mut out = Vec::new();
            for (i, x) in a.iter().enumerate() {
                match x.as_f64().filter(|x| x.is_finite()) {
                    Some(x) => out.push(x),
                    None => errs.push(format!("sweep.values[{i}]"), "must be a finite number"),
                }
            }
            out
        }
        Some(_) => {
            errs.push("sweep.values", "must be a non-empty array of numbers");
            return None;
        }
        None => {
            errs.push("sweep.values", "missing");
            return None;
        }
    };
    Some(Sweep { key, values })
}

fn parse_cases(v: Option<&Value>, errs: &mut Errors) -> Vec<Case> {
    let Some(v) = v else { return Vec::new() };
    let Some(list) = v.as_array() else {
        errs.push("cases", "must be an array");
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, c) in list.iter().enumerate() {
        let path = format!("cases[{i}]");
        let Some(m) = c.as_object() else {
            errs.push(path, "must be an object with `label` and `set`");
            continue;
        };
        for k in m.keys() {
            if k != "label" && k != "set" {
                errs.push(format!("{path}.{k}"), "unknown field");
            }
        }
        let label = match m.get("label") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            _ => {
                errs.push(format!("{path}.label"), "must be a non-empty string");
                continue;
            }
        };
        let set = match m.get("set") {
            Some(Value::Object(s)) => s.clone(),
            None => Map::new(),
            Some(_) => {
                errs.push(format!("{path}.set"), "must be an object");
                continue;
            }
        };
        out.push(Case { label, path, set });
    }
    out
}

/// Writes `value` at `key`. Bare keys resolve to a network parameter first,
/// then `initial_state`/`t_terminal`, then a pulse field; `params.` and
/// `pulse.` prefixes select explicitly.
fn apply_override(t: &mut Map<String, Value>, key: &str, value: Value) -> Result<(), String> {
    let (scope, field) = match key.split_once('.') {
        Some((s, f)) => (Some(s), f),
        None => (None, key),
    };
    let to_params = scope == Some("params") || (scope.is_none() && PARAM_KEYS.contains(&field));
    if to_params {
        if !PARAM_KEYS.contains(&field) {
            return Err(format!("`{field}` is not a network parameter"));
        }
        if let Some(Value::Object(m)) = t.get_mut("params") {
            m.insert(field.into(), value);
        }
        return Ok(());
    }
    if scope.is_none() && (field == "initial_state" || field == "t_terminal") {
        t.insert(field.into(), value);
        return Ok(());
    }
    if scope.is_none() || scope == Some("pulse") {
        return match t.get_mut("pulse") {
            Some(Value::Object(m)) if field != "type" => {
                m.insert(field.into(), value);
                Ok(())
            }
            _ => Err(format!("`{key}` names no network parameter or pulse field")),
        };
    }
    Err(format!("unknown scope in `{key}`"))
}

fn resolve_point(
    t: &Map<String, Value>,
    scenario: Scenario,
    label: String,
    sweep_value: Option<f64>,
    errs: &mut Errors,
) -> Option<Point> {
    let params = parse_params(t.get("params"), errs)?;
    let initial = match t.get("initial_state") {
        None => InitialState::Ground,
        Some(Value::String(s)) => match InitialState::from_label(s) {
            Ok(s) => s,
            Err(_) => {
                errs.push("initial_state", format!("unknown label {s:?}; expected g1g2_0, e1g2_0, g1e2_0 or g1g2_1"));
                return None;
            }
        },
        Some(_) => {
            errs.push("initial_state", "must be a string");
            return None;
        }
    };
    let t_terminal = match t.get("t_terminal") {
        None => 0.0,
        Some(v) => match v.as_f64().filter(|x| x.is_finite()) {
            Some(x) => x,
            None => {
                errs.push("t_terminal", "must be a finite number");
                return None;
            }
        },
    };
    let pulse = match t.get("pulse") {
        None => None,
        Some(Value::String(s)) if s == "vacuum" => {
            if scenario != Scenario::Excitation {
                errs.push("pulse", "\"vacuum\" is only meaningful for `excitation`");
                return None;
            }
            None
        }
        Some(Value::Object(m)) => {
            let mut m = m.clone();
            fill_pulse(&mut m, &params, t_terminal);
            match serde_json::from_value::<PulseSpec>(Value::Object(m)) {
                Ok(spec) => {
                    if let Err(e) = spec.validate() {
                        errs.push("pulse", e.to_string());
                        return None;
                    }
                    if scenario == Scenario::Invert {
                        check_pulse_matches(&spec, &params, errs);
                    }
                    Some(spec)
                }
                Err(e) => {
                    errs.push("pulse", e.to_string());
                    return None;
                }
            }
        }
        Some(_) => {
            errs.push("pulse", "must be a pulse object or \"vacuum\"");
            return None;
        }
    };
    if scenario == Scenario::Invert && pulse.is_none() {
        if !params.is_mutual_resonance() {
            errs.push("params", "the inverting pulse needs mutual resonance (all detunings zero)");
        }
        if (params.coupling_1 > 0.0) == (params.coupling_2 > 0.0) {
            errs.push("params", "the inverting pulse needs exactly one nonzero coupling; use a superposition pulse otherwise");
        }
    }
    Some(Point { label, params, pulse, initial, t_terminal, sweep_value })
}

fn parse_params(v: Option<&Value>, errs: &mut Errors) -> Option<NetworkParams> {
    let m = v?.as_object()?;
    let mut ok = true;
    for k in m.keys() {
        if !PARAM_KEYS.contains(&k.as_str()) {
            errs.push(format!("params.{k}"), "unknown field");
            ok = false;
        }
    }
    let mut x = [0.0; 7];
    let mut absent: Vec<&str> = Vec::new();
    for (slot, key) in x.iter_mut().zip(PARAM_KEYS) {
        match m.get(key) {
            None => {
                errs.push(format!("params.{key}"), "missing");
                absent.push(key);
            }
            Some(v) => match v.as_f64() {
                Some(f) => *slot = f,
                None => {
                    errs.push(format!("params.{key}"), "must be a number");
                    absent.push(key);
                }
            },
        }
    }
    let p = NetworkParams {
        delta_omega_1: x[0],
        delta_omega_2: x[1],
        delta_omega_r: x[2],
        coupling_1: x[3],
        coupling_2: x[4],
        kappa: x[5],
        mu: x[6],
    };
    // range checks still run on the fields that were given
    let mut valid = ok && absent.is_empty();
    for e in p.violations() {
        match e {
            qfeedback_core::Error::InvalidParameter { name, reason } => {
                if !absent.contains(&name) {
                    errs.push(format!("params.{name}"), reason);
                    valid = false;
                }
            }
            other => {
                errs.push("params", other.to_string());
                valid = false;
            }
        }
    }
    valid.then_some(p)
}

/// Inverting-type pulses take any omitted cavity, coupling and timing fields
/// from the network.
fn fill_pulse(m: &mut Map<String, Value>, p: &NetworkParams, t_terminal: f64) {
    let kind = m.get("type").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut fill = |k: &str, v: f64| {
        m.entry(k.to_string()).or_insert(Value::from(v));
    };
    match kind.as_str() {
        "inverting" => {
            fill("kappa_tilde", p.kappa_tilde());
            let (gk, other) = if p.coupling_1 > 0.0 || p.coupling_2 == 0.0 {
                (p.coupling_1, p.coupling_2)
            } else {
                (p.coupling_2, p.coupling_1)
            };
            fill("gamma_k", gk);
            fill("gamma_other", other);
            fill("t_terminal", t_terminal);
        }
        "superposition" => {
            fill("kappa_tilde", p.kappa_tilde());
            fill("gamma_1", p.coupling_1);
            fill("gamma_2", p.coupling_2);
            fill("t_terminal", t_terminal);
        }
        _ => {}
    }
}

fn check_pulse_matches(spec: &PulseSpec, p: &NetworkParams, errs: &mut Errors) {
    let kt = p.kappa_tilde();
    let differs = |a: f64, b: f64| (a - b).abs() > KAPPA_MATCH * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    match spec {
        PulseSpec::Inverting(s) => {
            if differs(s.kappa_tilde, kt) {
                errs.push("pulse.kappa_tilde", format!("{} does not match the network's {kt}", s.kappa_tilde));
            }
        }
        PulseSpec::Superposition { kappa_tilde, gamma_1, gamma_2, .. } => {
            if differs(*kappa_tilde, kt) {
                errs.push("pulse.kappa_tilde", format!("{kappa_tilde} does not match the network's {kt}"));
            }
            if differs(*gamma_1, p.coupling_1) || differs(*gamma_2, p.coupling_2) {
                errs.push("pulse", "superposition couplings must match params.gamma_1 and params.gamma_2");
            }
        }
        _ => {}
    }
}
