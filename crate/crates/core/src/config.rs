//! Layered TOML configuration.
//!
//! Precedence, lowest first: built-in defaults, parameter files (given
//! directly or pulled in by `include`), the scenario file, then
//! `key.path=value` overrides. Layers are
//! deep-merged as key/value trees and the result is deserialized once, so
//! unknown keys are rejected wherever they come from.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::params::ActuatorParams;
use crate::sim::Scenario;

pub const BUNDLED_PARAMS: &str = include_str!("../data/prototype.params");
pub const BUNDLED_FULL_TRIAL: &str = include_str!("../data/full_trial.scn");

/// Deep merge `overlay` into `base`. Tables merge key by key; any other
/// value replaces. A table whose `kind` tag changes is replaced whole,
/// since its fields belong to a different variant.
pub fn merge(base: &mut Table, overlay: Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if same_kind(b, &o) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn same_kind(a: &Table, b: &Table) -> bool {
    match (a.get("kind"), b.get("kind")) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Config(format!("{origin}: {e}")))
}

fn include_list(t: &mut Table, origin: &str) -> Result<Vec<String>> {
    match t.remove("include") {
        None => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(vec![s]),
        Some(Value::Array(a)) => a
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(Error::Config(format!("{origin}: include entries must be paths, got {other}"))),
            })
            .collect(),
        Some(other) => Err(Error::Config(format!("{origin}: include must be a path or list, got {other}"))),
    }
}

/// Read a parameter file, resolving its own includes first so that the
/// including file wins.
fn read_params_tree(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Table> {
    let canon = path.canonicalize().map_err(|e| io_err(path, e))?;
    if stack.contains(&canon) {
        return Err(Error::Config(format!("include cycle through {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let origin = path.display().to_string();
    let mut own = parse_table(&text, &origin)?;
    let includes = include_list(&mut own, &origin)?;
    stack.push(canon);
    let mut out = Table::new();
    for inc in includes {
        merge(&mut out, read_params_tree(&resolve(path, &inc), stack)?);
    }
    stack.pop();
    merge(&mut out, own);
    Ok(out)
}

fn resolve(from: &Path, inc: &str) -> PathBuf {
    let p = Path::new(inc);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        from.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Split `a.b.c=value`. The value is read as a TOML value when it parses
/// as one and as a bare string otherwise.
pub fn parse_override(raw: &str) -> Result<(Vec<String>, Value)> {
    let (key, val) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not KEY=VALUE")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override `{raw}` has an empty key segment")));
    }
    let val = val.trim();
    let value = match format!("v = {val}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(val.to_string()),
    };
    Ok((path, value))
}

pub fn apply_override(root: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = root;
    for (i, seg) in parents.iter().enumerate() {
        let entry = node.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(Error::Config(format!(
                    "override path `{}` runs through a non-table value",
                    path[..=i].join(".")
                )))
            }
        };
    }
    match (node.get_mut(last.as_str()), value) {
        (Some(Value::Table(b)), Value::Table(o)) if same_kind(b, &o) => merge(b, o),
        (_, v) => {
            node.insert(last.clone(), v);
        }
    }
    Ok(())
}

fn to_table<T: serde::Serialize>(v: &T) -> Table {
    match Value::try_from(v).expect("config types serialize to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("config types are tables"),
    }
}

/// Everything that went into a scenario, kept for `--print-effective-config`.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scenario: Scenario,
    pub tree: Table,
}

impl LoadedConfig {
    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(&to_table(&self.scenario)).expect("scenario serializes")
    }
}

/// Build a scenario from defaults, an optional scenario file and overrides.
pub fn load_scenario(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
    load_layers(None, path, overrides)
}

/// Full layering: defaults, an explicit parameter file, the scenario file
/// (with its own includes over the parameter file), then overrides.
pub fn load_layers(params: Option<&Path>, scenario: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
    let file = match scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Some((p.to_path_buf(), text))
        }
        None => None,
    };
    build(params, file.as_ref().map(|(p, t)| (p.as_path(), t.as_str())), overrides)
}

/// As [`load_scenario`], with the scenario text supplied by the caller.
/// Includes resolve relative to `path`.
pub fn load_scenario_text(file: Option<(&Path, &str)>, overrides: &[String]) -> Result<LoadedConfig> {
    build(None, file, overrides)
}

/// The bundled full trial. Its only include is the bundled prototype
/// parameter file, which matches the defaults, so no file access is needed.
pub fn load_full_trial(overrides: &[String]) -> Result<LoadedConfig> {
    let mut own = parse_table(BUNDLED_FULL_TRIAL, "full_trial.scn")?;
    let includes = include_list(&mut own, "full_trial.scn")?;
    debug_assert_eq!(includes, ["prototype.params"]);
    let text = toml::to_string(&own).expect("table serializes");
    build(None, Some((Path::new("full_trial.scn"), &text)), overrides)
}

fn build(params_file: Option<&Path>, file: Option<(&Path, &str)>, overrides: &[String]) -> Result<LoadedConfig> {
    let mut tree = to_table(&Scenario::default());
    let mut params = Table::new();
    if let Some(path) = params_file {
        params = read_params_tree(path, &mut Vec::new())?;
    }
    let mut own = Table::new();
    if let Some((path, text)) = file {
        let origin = path.display().to_string();
        own = parse_table(text, &origin)?;
        for inc in include_list(&mut own, &origin)? {
            let mut stack = Vec::new();
            merge(&mut params, read_params_tree(&resolve(path, &inc), &mut stack)?);
        }
    }
    let mut layer = Table::new();
    layer.insert("params".into(), Value::Table(params));
    merge(&mut tree, layer);
    merge(&mut tree, own);
    for raw in overrides {
        let (path, value) = parse_override(raw)?;
        apply_override(&mut tree, &path, value)?;
    }
    let scenario: Scenario = Value::Table(tree.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    scenario.validate()?;
    Ok(LoadedConfig { scenario, tree })
}

/// Parameter file on its own, over the prototype defaults.
pub fn load_params(path: &Path) -> Result<ActuatorParams> {
    let mut tree = to_table(&ActuatorParams::prototype());
    merge(&mut tree, read_params_tree(path, &mut Vec::new())?);
    let p: ActuatorParams = Value::Table(tree)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
    p.validate()?;
    Ok(p)
}

pub fn parse_params(text: &str) -> Result<ActuatorParams> {
    let mut tree = to_table(&ActuatorParams::prototype());
    merge(&mut tree, parse_table(text, "parameters")?);
    let p: ActuatorParams = Value::Table(tree)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

/// Where a configuration default comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Paper,
    Invented,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Paper => "PAPER",
            Provenance::Invented => "invented",
        }
    }
}

pub struct KeyDoc {
    pub key: &'static str,
    pub provenance: Provenance,
    pub doc: &'static str,
}

const fn paper(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, provenance: Provenance::Paper, doc }
}

const fn invented(key: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, provenance: Provenance::Invented, doc }
}

/// Every scenario key with its source. `*` stands for either motor.
pub const CONFIG_KEYS: &[KeyDoc] = &[
    paper("params.r1", "EM1 total reduction (600)"),
    paper("params.r2", "EM2 total reduction (18)"),
    paper("params.drum_radius", "drum radius, m (0.04)"),
    invented("params.output_damping", "output viscous damping b0, N·s/m"),
    invented("params.drum_mass", "translational drum/strap mass, kg"),
    invented("params.*.torque_constant", "motor torque constant, N·m/A"),
    paper("params.*.nominal_torque", "continuous torque, N·m (318 kgf HF, 59 kgf HS at the output)"),
    paper("params.*.peak_torque", "torque limit, N·m (100 kgf HS peak at the output)"),
    paper("params.*.max_speed", "loaded speed, rad/s (0.05 / 0.55 m/s at the output)"),
    paper("params.*.speed_at_peak", "speed at peak torque, rad/s (0.34 m/s at the output)"),
    paper("params.*.rotor_inertia", "rotor inertia, kg·m² (3427 / 5.1 kg reflected)"),
    invented("params.*.viscous_damping", "motor viscous damping, N·m·s/rad"),
    invented("params.brake.angle_to_torque_slope", "brake map slope, N·m/deg"),
    invented("params.brake.angle_to_torque_offset", "brake map offset, N·m"),
    invented("params.brake.max_torque", "brake torque limit, N·m"),
    invented("params.brake.servo_rate_limit", "servo slew limit, deg/s"),
    invented("params.brake.servo_delay", "servo dead time, s"),
    invented("params.brake.sign_sharpness", "brake direction smoothing, s/rad"),
    invented("params.friction.b_visc", "EM2 viscous friction, N·m·s/rad"),
    paper("params.friction.dry_offset", "EM2 dry friction, N·m (3.2 kgf backdrive)"),
    invented("params.friction.load_scale", "load-dependent friction, N·m/N"),
    invented("params.friction.tanh_sharpness", "friction direction smoothing, s/rad"),
    invented("plant.variant.kind", "dead_load | patient"),
    paper("plant.variant.mass", "load or patient mass, kg (45 to 318)"),
    invented("plant.variant.profile", "scripted patient activity"),
    invented("plant.variant.fall_time", "time the patient collapses, s"),
    invented("plant.strap_stiffness", "strap stiffness, N/m"),
    invented("plant.strap_damping", "strap damping, N·s/m"),
    invented("plant.initial_height", "initial output position, m"),
    invented("plant.initial_strap_force", "initial strap tension, N"),
    invented("controller.variant", "assistance force controller, kind = open_loop_current | friction_comp | friction_comp_with_em1 | pid | dob"),
    paper("controller.F_desired", "assistance unloading force, N"),
    paper("controller.fall.detect_speed", "fall detection speed, m/s (0.90)"),
    paper("controller.fall.a_d", "desired fall deceleration, m/s² (1 to 2)"),
    invented("controller.fall.k", "EM2 speed-loop gain during a fall, N·m·s/m"),
    invented("controller.fall.recovery_speed", "lift speed after a fall, m/s"),
    paper("controller.fall.target", "deceleration | max_force"),
    invented("controller.fall.em2_feedforward", "EM2 covers the brake shortfall"),
    invented("controller.fall.em2_limit", "EM2 rating during a fall, nominal | peak"),
    invented("controller.fall.escalate_after", "full braking if still falling this long after the ramp, s"),
    invented("controller.friction_model", "friction used for compensation; unset uses params.friction"),
    invented("controller.force_sensor", "strap load cell available"),
    invented("controller.em1_kp", "EM1 speed loop proportional gain"),
    invented("controller.em1_ki", "EM1 speed loop integral gain"),
    invented("controller.recovery_gain", "fall recovery position gain, 1/s"),
    invented("controller.fallback_mass", "mass used when weighing fails, kg"),
    invented("initial_mode", "transfer_hf | assistance_hs | fall_prevention | fall_recovery"),
    invented("duration", "simulated time, s"),
    invented("physics_dt", "integration step, s"),
    paper("control_dt", "control period, s (250 Hz)"),
    invented("events", "timed events: request_mode | fall | set_force | user_input"),
    invented("seed", "noise seed"),
    invented("load_cell_noise", "strap force noise std, N"),
];

/// Documentation entry covering a dotted key.
pub fn key_doc(key: &str) -> Option<&'static KeyDoc> {
    let generic = key
        .strip_prefix("params.em1.")
        .or_else(|| key.strip_prefix("params.em2."))
        .map(|rest| format!("params.*.{rest}"));
    let probe = generic.as_deref().unwrap_or(key);
    CONFIG_KEYS
        .iter()
        .filter(|d| probe == d.key || probe.starts_with(&format!("{}.", d.key)))
        .max_by_key(|d| d.key.len())
}

/// `--help` text listing every key.
pub fn keys_help() -> String {
    let mut out = String::from("Config keys (dotted, for --override):\n");
    for d in CONFIG_KEYS {
        out.push_str(&format!("  {:<40} [{}] {}\n", d.key, d.provenance.tag(), d.doc));
    }
    out
}

/// Leaf keys of a tree. Arrays count as leaves.
pub fn leaf_keys(t: &Table) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(prefix: &str, t: &Table, out: &mut Vec<String>) {
        for (k, v) in t {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(inner) => walk(&key, inner, out),
                _ => out.push(key),
            }
        }
    }
    walk("", t, &mut out);
    out
}
