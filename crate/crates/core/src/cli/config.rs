use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use toml::Value;

use super::CliError;

/// A known key with its default.
pub struct KeySpec {
    pub key: &'static str,
    pub default: DefaultValue,
    pub help: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub enum DefaultValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(&'static str),
}

impl DefaultValue {
    fn value(self) -> Value {
        match self {
            DefaultValue::Float(v) => Value::Float(v),
            DefaultValue::Int(v) => Value::Integer(v),
            DefaultValue::Bool(v) => Value::Boolean(v),
            DefaultValue::Str(v) => Value::String(v.to_string()),
        }
    }
}

const fn f(key: &'static str, v: f64, help: &'static str) -> KeySpec {
    KeySpec { key, default: DefaultValue::Float(v), help }
}
const fn i(key: &'static str, v: i64, help: &'static str) -> KeySpec {
    KeySpec { key, default: DefaultValue::Int(v), help }
}
const fn b(key: &'static str, v: bool, help: &'static str) -> KeySpec {
    KeySpec { key, default: DefaultValue::Bool(v), help }
}
const fn s(key: &'static str, v: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default: DefaultValue::Str(v), help }
}

pub const REGISTER_KEYS: &[KeySpec] = &[
    s("image.reference", "", "reference image R (PNG/PGM)"),
    s("image.target", "", "template image T, warped onto R"),
    f("image.sigma", 1.0, "Gaussian smoothing in pixels"),
    i("phantom.size", 0, "use a synthetic head phantom pair of this size instead of files"),
    f("phantom.warp", 0.02, "deformation amplitude of the phantom template"),
    f("material.young", 1.0, "Young modulus"),
    f("material.poisson", 0.25, "Poisson ratio"),
    f("material.kappa", 0.5, "boundary spring stiffness (0 adds rigid-body multipliers)"),
    f("material.alpha", 1e4, "similarity weight"),
    f("solver.dt", 1e-5, "pseudo-time step"),
    f("solver.tol", 1e-4, "stopping tolerance"),
    i("solver.max_iter", 10000, "iteration cap per solve"),
    s("solver.stop_mode", "residual", "residual | velocity"),
    i("solver.aa_depth", 10, "Anderson depth m (0 disables acceleration)"),
    s("solver.proximal", "identity", "identity | h1"),
    i("solver.q_img", 6, "image quadrature order"),
    f("solver.cond_limit", 1e10, "least-squares condition limit for acceleration"),
    i("mesh.degree", 1, "polynomial degree 1 or 2"),
    i("mesh.pixels_per_element", 1, "fixed-mesh resolution"),
    b("amr.enabled", true, "adaptive loop instead of a single fixed-mesh solve"),
    i("amr.n0_ref", 4, "initial uniform refinements"),
    i("amr.n_ref", 5, "adaptive cycles"),
    f("amr.theta_refine", 0.4, "fraction of cells refined per cycle"),
    f("amr.theta_coarsen", 0.2, "fraction of cells coarsened per cycle"),
    s("amr.level_tol", "", "comma-separated tolerances per level (last one repeats)"),
    i("amr.estimator_order", 6, "estimator quadrature order"),
    b("amr.compare_fixed", true, "also solve on a uniform mesh with at least as many dofs"),
    b("output.vtk", true, "write one VTK mesh per level"),
];

pub const VERIFY_KEYS: &[KeySpec] = &[
    s("verify.case", "smooth", "smooth | singular"),
    s("verify.mode", "uniform", "uniform | adaptive"),
    i("verify.degree", 1, "polynomial degree 1 or 2"),
    i("verify.levels", 6, "number of meshes"),
    f("verify.theta_refine", 0.15, "refinement fraction of adaptive runs"),
    f("verify.amplitude", 0.0, "prefactor of the exact solution (0 keeps the case default)"),
    f("solver.tol", 1e-11, "relative residual tolerance"),
    i("solver.max_iter", 400, "iteration cap per level"),
    i("solver.aa_depth", 5, "Anderson depth m"),
];

pub const QUADRATURE_KEYS: &[KeySpec] = &[
    s("image.reference", "", "reference image R"),
    s("image.target", "", "template image T"),
    i("phantom.size", 200, "synthetic phantom size when no files are given"),
    f("phantom.warp", 0.02, "deformation amplitude of the phantom template"),
    s("quadrature.sigmas", "0,1,5,10", "smoothing widths in pixels"),
    s("quadrature.ppe", "5,10,20,50", "pixels per element"),
    s("quadrature.orders", "1-51:2", "studied orders, as a list or ranges a-b or a-b:step"),
    i("quadrature.q_truth", 71, "order of the reference integral"),
];

/// Resolved flat configuration: defaults, then a file, then command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Value>,
}

impl Settings {
    pub fn defaults(keys: &[KeySpec]) -> Self {
        Self { values: keys.iter().map(|k| (k.key.to_string(), k.default.value())).collect() }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Merge a flat `key = value` file; nested tables are flattened into dotted keys.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.merge_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn merge_str(&mut self, text: &str) -> Result<(), CliError> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (k, v) in flat {
            self.set_value(&k, v)?;
        }
        Ok(())
    }

    /// Apply a `key=value` override; the value is read as a TOML literal, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{assignment}`")))?;
        let (k, raw) = (k.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set_value(k, value)
    }

    pub fn set_value(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        let slot = self.values.get_mut(key).ok_or_else(|| CliError::Config(format!("unknown key `{key}`")))?;
        let value = match (&*slot, value) {
            (Value::Float(_), Value::Integer(v)) => Value::Float(v as f64),
            (Value::String(_), Value::Integer(v)) => Value::String(v.to_string()),
            (Value::String(_), Value::Float(v)) => Value::String(v.to_string()),
            (old, new) if old.type_str() == new.type_str() => new,
            (old, new) => {
                return Err(CliError::Config(format!("`{key}` expects a {}, got a {}", old.type_str(), new.type_str())))
            }
        };
        *slot = value;
        Ok(())
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("key `{key}` is not registered"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_float().expect("registered as float")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().expect("registered as bool")
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().expect("registered as string")
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let v = self.get(key).as_integer().expect("registered as integer");
        usize::try_from(v).map_err(|_| CliError::Config(format!("`{key}` must be non-negative, got {v}")))
    }

    /// Comma-separated floats; empty gives an empty list.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let s = self.str(key).trim();
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("`{key}`: `{p}` is not a number"))))
            .collect()
    }

    /// Comma-separated integers or ranges `a-b` (inclusive).
    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let bad = |p: &str| CliError::Config(format!("`{key}`: `{p}` is not an integer or range"));
        let mut out = Vec::new();
        for p in self.str(key).split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match p.split_once('-') {
                Some((a, rest)) => {
                    let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
                    let a: usize = a.trim().parse().map_err(|_| bad(p))?;
                    let b: usize = b.trim().parse().map_err(|_| bad(p))?;
                    let step: usize = step.trim().parse().map_err(|_| bad(p))?;
                    if a > b || step == 0 {
                        return Err(bad(p));
                    }
                    out.extend((a..=b).step_by(step));
                }
                None => out.push(p.parse().map_err(|_| bad(p))?),
            }
        }
        Ok(out)
    }

    /// Flat `key = value` text that [`Settings::merge_str`] reads back unchanged.
    pub fn manifest(&self, command: &str) -> String {
        let mut s = format!("# amreg {command}\n");
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}
