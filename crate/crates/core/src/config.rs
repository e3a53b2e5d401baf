//! Plain-text scenario configuration.
//!
//! ```text
//! # comments start with '#' or ';'
//! [domain]
//! n = 100
//! dt = 0.5
//!
//! [orography]
//! kind = steep
//! ```
//!
//! Keys may also be written fully qualified (`orography.kind = steep`) outside
//! any section. Every key is optional; omitted keys take the control-run
//! values. Feature positions and radii scale with `domain.half_length` unless
//! set explicitly.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{InitialCondition, MeshMode, ScenarioConfig};
use crate::geometry::OrographyKind;

type Getter = fn(&ScenarioConfig) -> String;
type Setter = fn(&mut ScenarioConfig, &str) -> std::result::Result<(), String>;

struct Key {
    name: &'static str,
    get: Getter,
    set: Setter,
}

fn parse<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected {what}, found `{v}`"))
}

fn parse_enum<T: FromStr<Err = String>>(v: &str) -> std::result::Result<T, String> {
    v.parse()
}

macro_rules! key {
    ($name:literal, $c:ident => $get:expr, $v:ident => $set:expr) => {
        Key {
            name: $name,
            get: |$c: &ScenarioConfig| format!("{:?}", $get),
            set: |$c: &mut ScenarioConfig, $v: &str| {
                $set = parse($v, "a number")?;
                Ok(())
            },
        }
    };
    (int $name:literal, $c:ident => $get:expr) => {
        Key {
            name: $name,
            get: |$c: &ScenarioConfig| format!("{}", $get),
            set: |$c: &mut ScenarioConfig, v: &str| {
                $get = parse(v, "a non-negative integer")?;
                Ok(())
            },
        }
    };
    (bool $name:literal, $c:ident => $get:expr) => {
        Key {
            name: $name,
            get: |$c: &ScenarioConfig| format!("{}", $get),
            set: |$c: &mut ScenarioConfig, v: &str| {
                $get = parse(v, "true or false")?;
                Ok(())
            },
        }
    };
}

const KEYS: &[Key] = &[
    key!(int "domain.n", c => c.n),
    key!("domain.dt", c => c.dt, v => c.dt),
    key!("domain.half_length", c => c.half_length, v => c.half_length),
    key!("domain.height", c => c.height, v => c.height),
    key!("domain.revolutions", c => c.revolutions, v => c.revolutions),
    key!("domain.alpha", c => c.alpha, v => c.alpha),
    Key {
        name: "domain.mesh",
        get: |c| c.mesh_mode.as_str().into(),
        set: |c, v| {
            c.mesh_mode = parse_enum::<MeshMode>(v)?;
            Ok(())
        },
    },
    key!(bool "domain.use_a", c => c.volume_adjustment),
    Key {
        name: "orography.kind",
        get: |c| c.orography.kind.as_str().into(),
        set: |c, v| {
            c.orography.kind = parse_enum::<OrographyKind>(v)?;
            Ok(())
        },
    },
    key!("orography.hill_x", c => c.orography.hill_center[0], v => c.orography.hill_center[0]),
    key!("orography.hill_y", c => c.orography.hill_center[1], v => c.orography.hill_center[1]),
    key!("orography.valley_x", c => c.orography.valley_center[0], v => c.orography.valley_center[0]),
    key!("orography.valley_y", c => c.orography.valley_center[1], v => c.orography.valley_center[1]),
    key!("orography.radius", c => c.orography.radius, v => c.orography.radius),
    key!("orography.h_max", c => c.orography.h_max, v => c.orography.h_max),
    key!("orography.h_min", c => c.orography.h_min, v => c.orography.h_min),
    key!("orography.h_c", c => c.orography.h_c, v => c.orography.h_c),
    key!("flow.omega", c => c.flow.omega, v => c.flow.omega),
    key!("flow.inner_radius", c => c.flow.inner_radius, v => c.flow.inner_radius),
    key!("flow.outer_radius", c => c.flow.outer_radius, v => c.flow.outer_radius),
    Key {
        name: "tracer.initial",
        get: |c| c.tracer.initial.as_str().into(),
        set: |c, v| {
            c.tracer.initial = parse_enum::<InitialCondition>(v)?;
            Ok(())
        },
    },
    key!("tracer.centre_x", c => c.tracer.centre[0], v => c.tracer.centre[0]),
    key!("tracer.centre_y", c => c.tracer.centre[1], v => c.tracer.centre[1]),
    key!("tracer.radius", c => c.tracer.radius, v => c.tracer.radius),
    key!("monitor.r_max", c => c.monitor.r_max, v => c.monitor.r_max),
    key!("monitor.smoothing", c => c.monitor.smoothing, v => c.monitor.smoothing),
    key!(int "solver.initial_outer", c => c.solver.initial_outer),
    key!(int "solver.step_outer", c => c.solver.step_outer),
    key!(int "solver.inner_max_iter", c => c.solver.inner_max_iter),
    key!("solver.inner_rel_tol", c => c.solver.inner_rel_tol, v => c.solver.inner_rel_tol),
    key!("solver.inner_abs_tol", c => c.solver.inner_abs_tol, v => c.solver.inner_abs_tol),
    key!("solver.regularisation", c => c.solver.regularisation, v => c.solver.regularisation),
    key!("solver.early_exit", c => c.solver.early_exit, v => c.solver.early_exit),
    Key {
        name: "output.name",
        get: |c| c.output.name.clone(),
        set: |c, v| {
            if v.is_empty() || v.contains(['/', '\\']) || v.chars().any(char::is_whitespace) {
                return Err(format!("expected a plain file-name stem, found `{v}`"));
            }
            c.output.name = v.into();
            Ok(())
        },
    },
    key!(int "output.cadence", c => c.output.cadence),
    key!(bool "output.snapshots", c => c.output.snapshots),
];

const SECTIONS: &[&str] = &["domain", "orography", "flow", "tracer", "monitor", "solver", "output"];

fn lookup(name: &str) -> Option<&'static Key> {
    let canonical = if name == "N" || name == "domain.N" {
        "domain.n"
    } else {
        name
    };
    KEYS.iter().find(|k| k.name == canonical)
}

/// Splits text into fully qualified `(key, value)` pairs in file order.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config(format!(
                    "line {}: unknown section `[{name}]`",
                    lineno + 1
                )));
            }
            section = Some(name.into());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, found `{line}`",
                lineno + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        let key = match &section {
            Some(s) if !k.contains('.') => format!("{s}.{k}"),
            _ => k.to_string(),
        };
        out.push((key, v.to_string()));
    }
    Ok(out)
}

/// Builds a configuration from `key = value` pairs applied over the control run.
pub fn config_from_entries(entries: &[(String, String)]) -> Result<ScenarioConfig> {
    for (k, _) in entries {
        if lookup(k).is_none() {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
    }
    let last = |name: &str| {
        entries
            .iter()
            .rev()
            .find(|(k, _)| lookup(k).is_some_and(|key| key.name == name))
            .map(|(_, v)| v.as_str())
    };
    let number = |name: &str, default: f64| -> Result<f64> {
        match last(name) {
            Some(v) => parse(v, "a number").map_err(|m| Error::Config(format!("`{name}`: {m}"))),
            None => Ok(default),
        }
    };
    let half_length = number("domain.half_length", 5000.0)?;
    let height = number("domain.height", 1000.0)?;
    let mut config = ScenarioConfig::for_domain(half_length, height);
    for (k, v) in entries {
        let key = lookup(k).expect("checked above");
        (key.set)(&mut config, v).map_err(|m| Error::Config(format!("`{}`: {m}", key.name)))?;
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    config_from_entries(&parse_entries(text)?)
}

/// Reads a configuration file, then applies `overrides` on top.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let mut entries = match path {
        Some(p) => parse_entries(&std::fs::read_to_string(p)?)?,
        None => Vec::new(),
    };
    entries.extend_from_slice(overrides);
    config_from_entries(&entries)
}

/// Writes every key, grouped by section, in a form [`parse_config`] reads back exactly.
pub fn serialise_config(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    for section in SECTIONS {
        let _ = writeln!(out, "[{section}]");
        for key in KEYS.iter().filter(|k| k.name.split('.').next() == Some(section)) {
            let short = &key.name[section.len() + 1..];
            let _ = writeln!(out, "{short} = {}", (key.get)(config));
        }
        out.push('\n');
    }
    out
}
