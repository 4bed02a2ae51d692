//! Plain-text run configuration: `key = value` lines grouped in named
//! `[section]` blocks. The grammar is documented in the repository README;
//! all parse and validation errors carry line numbers.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::exponents::Descriptor;
use crate::nonlinearity::Form;
use crate::pde::SolverConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Cooperative,
    Competitive,
    Single,
    VerifyMoser,
    Validate,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub resolution: usize,
    pub dimension: usize,
    /// Ambient dimension N used by the Sobolev conjugate and the hypothesis
    /// windows; defaults to the grid dimension.
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityBlock {
    pub form: Form,
    pub m: f64,
    pub alpha: Descriptor,
    pub beta: Descriptor,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompetitiveBlock {
    /// Strip width; defaults to 0.1 x inradius when absent.
    pub delta: Option<f64>,
    pub lambda_cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleBlock {
    /// Constant right-hand side of the single-equation mode.
    pub source: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub grid: GridSpec,
    pub p: Descriptor,
    pub q: Descriptor,
    pub f: Option<NonlinearityBlock>,
    pub g: Option<NonlinearityBlock>,
    #[serde(serialize_with = "serialize_solver")]
    pub solver: SolverConfig,
    pub competitive: CompetitiveBlock,
    pub single: SingleBlock,
    /// Moser chain depth.
    pub n_max: usize,
}

fn serialize_solver<S: serde::Serializer>(
    cfg: &SolverConfig,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("SolverConfig", 5)?;
    st.serialize_field("eps_schedule", &cfg.eps_schedule)?;
    st.serialize_field("residual_tol", &cfg.residual_tol)?;
    st.serialize_field("max_iter", &cfg.max_iter)?;
    st.serialize_field("armijo_c", &cfg.armijo_c)?;
    st.serialize_field("max_backtracks", &cfg.max_backtracks)?;
    st.end()
}

struct RawEntry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

/// Section name -> key -> (line, value).
struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, RawEntry>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, RawEntry>> = BTreeMap::new();
        // Keys before the first [section] land in the "run" section.
        let mut current = "run".to_string();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {line_no}: unterminated section header"))
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `key = value`"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = sections.entry(current.clone()).or_default();
            if section
                .insert(
                    key.clone(),
                    RawEntry {
                        line: line_no,
                        value,
                        used: std::cell::Cell::new(false),
                    },
                )
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key `{key}` in section [{current}]"
                )));
            }
        }
        Ok(RawConfig { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&RawEntry> {
        let e = self.sections.get(section)?.get(key)?;
        e.used.set(true);
        Some(e)
    }

    fn require(&self, section: &str, key: &str) -> Result<&RawEntry> {
        self.get(section, key).ok_or_else(|| {
            Error::Config(format!("missing key `{key}` in section [{section}]"))
        })
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| type_err(e, section, key, "a number")),
        }
    }

    fn usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| type_err(e, section, key, "a non-negative integer")),
        }
    }

    fn check_unknown_keys(&self, known: &[(&str, &[&str])]) -> Result<()> {
        for (section, keys) in &self.sections {
            let allowed = known.iter().find(|(s, _)| s == section).ok_or_else(|| {
                Error::Config(format!("unknown section [{section}]"))
            })?;
            for (key, entry) in keys {
                if !allowed.1.contains(&key.as_str()) {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{key}` in section [{section}]",
                        entry.line
                    )));
                }
            }
        }
        Ok(())
    }
}

fn type_err(e: &RawEntry, section: &str, key: &str, what: &str) -> Error {
    Error::Config(format!(
        "line {}: value `{}` for `{key}` in [{section}] is not {what}",
        e.line, e.value
    ))
}

/// Parses a descriptor written as `constant V`, `affine A BX BY`, or
/// `sinusoidal A B C E`.
fn parse_descriptor(e: &RawEntry, section: &str, key: &str) -> Result<Descriptor> {
    let mut parts = e.value.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let nums: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
    let nums = nums.map_err(|_| {
        type_err(e, section, key, "a descriptor (`constant V`, `affine A BX BY`, `sinusoidal A B C E`)")
    })?;
    match (kind, nums.as_slice()) {
        ("constant", [v]) => Ok(Descriptor::Constant(*v)),
        ("affine", [a, bx, by]) => Ok(Descriptor::Affine {
            a: *a,
            bx: *bx,
            by: *by,
        }),
        ("sinusoidal", [a, b, c, ee]) => Ok(Descriptor::Sinusoidal {
            a: *a,
            b: *b,
            c: *c,
            e: *ee,
        }),
        _ => Err(type_err(
            e,
            section,
            key,
            "a descriptor (`constant V`, `affine A BX BY`, `sinusoidal A B C E`)",
        )),
    }
}

fn parse_pair(e: &RawEntry, section: &str, key: &str) -> Result<(f64, f64)> {
    let nums: std::result::Result<Vec<f64>, _> =
        e.value.split_whitespace().map(str::parse).collect();
    match nums.map_err(|_| type_err(e, section, key, "two numbers `A B`"))?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(type_err(e, section, key, "two numbers `A B`")),
    }
}

fn parse_nonlinearity(raw: &RawConfig, section: &str) -> Result<Option<NonlinearityBlock>> {
    if !raw.sections.contains_key(section) {
        return Ok(None);
    }
    let form_entry = raw.require(section, "form")?;
    let form = match form_entry.value.as_str() {
        "product" => Form::Product,
        "sum-in-first" => Form::SumInFirst,
        "sum-in-second" => Form::SumInSecond,
        _ => {
            return Err(type_err(
                form_entry,
                section,
                "form",
                "one of product | sum-in-first | sum-in-second",
            ))
        }
    };
    let m = raw.f64(section, "m")?.unwrap_or(1.0);
    let alpha = parse_descriptor(raw.require(section, "alpha")?, section, "alpha")?;
    let beta = parse_descriptor(raw.require(section, "beta")?, section, "beta")?;
    Ok(Some(NonlinearityBlock {
        form,
        m,
        alpha,
        beta,
    }))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw = RawConfig::parse(text)?;
    raw.check_unknown_keys(&[
        ("run", &["mode", "n_max"]),
        ("grid", &["x", "y", "resolution", "dimension", "n"]),
        ("p", &["descriptor"]),
        ("q", &["descriptor"]),
        ("f", &["form", "m", "alpha", "beta"]),
        ("g", &["form", "m", "alpha", "beta"]),
        (
            "solver",
            &["residual_tol", "eps", "max_iter", "armijo_c", "max_backtracks"],
        ),
        ("competitive", &["delta", "lambda_cap"]),
        ("single", &["source"]),
    ])?;

    let mode_entry = raw.require("run", "mode")?;
    let mode = match mode_entry.value.as_str() {
        "cooperative" => Mode::Cooperative,
        "competitive" => Mode::Competitive,
        "single" => Mode::Single,
        "verify-moser" => Mode::VerifyMoser,
        "validate" => Mode::Validate,
        _ => {
            return Err(type_err(
                mode_entry,
                "run",
                "mode",
                "one of cooperative | competitive | single | verify-moser | validate",
            ))
        }
    };

    let dimension = raw.usize("grid", "dimension")?.unwrap_or(2);
    if dimension != 1 && dimension != 2 {
        return Err(Error::Config(format!(
            "grid dimension {dimension} unsupported (1 or 2)"
        )));
    }
    let x = match raw.get("grid", "x") {
        Some(e) => parse_pair(e, "grid", "x")?,
        None => (0.0, 1.0),
    };
    let y = match raw.get("grid", "y") {
        Some(e) => parse_pair(e, "grid", "y")?,
        None => (0.0, 1.0),
    };
    let resolution_entry = raw.require("grid", "resolution")?;
    let resolution: usize = resolution_entry.value.parse().map_err(|_| {
        type_err(resolution_entry, "grid", "resolution", "a positive integer")
    })?;
    if resolution < 3 {
        return Err(Error::Config(format!(
            "line {}: resolution {resolution} must be at least 3",
            resolution_entry.line
        )));
    }
    let n = raw.usize("grid", "n")?.unwrap_or(dimension);
    let grid = GridSpec {
        x,
        y,
        resolution,
        dimension,
        n,
    };

    let p = parse_descriptor(raw.require("p", "descriptor")?, "p", "descriptor")?;
    let q = match raw.get("q", "descriptor") {
        Some(e) => parse_descriptor(e, "q", "descriptor")?,
        None => p.clone(),
    };

    let f = parse_nonlinearity(&raw, "f")?;
    let g = parse_nonlinearity(&raw, "g")?;
    let needs_system = matches!(mode, Mode::Cooperative | Mode::Competitive | Mode::VerifyMoser | Mode::Validate);
    if needs_system {
        if f.is_none() {
            return Err(Error::Config("missing section [f] required by the mode".into()));
        }
        if g.is_none() {
            return Err(Error::Config("missing section [g] required by the mode".into()));
        }
    }

    let mut solver = SolverConfig::default();
    if let Some(v) = raw.f64("solver", "residual_tol")? {
        solver.residual_tol = v;
    }
    if let Some(e) = raw.get("solver", "eps") {
        let eps: std::result::Result<Vec<f64>, _> =
            e.value.split_whitespace().map(str::parse).collect();
        solver.eps_schedule =
            eps.map_err(|_| type_err(e, "solver", "eps", "a list of numbers"))?;
    }
    if let Some(v) = raw.usize("solver", "max_iter")? {
        solver.max_iter = v;
    }
    if let Some(v) = raw.f64("solver", "armijo_c")? {
        solver.armijo_c = v;
    }
    if let Some(v) = raw.usize("solver", "max_backtracks")? {
        solver.max_backtracks = v;
    }
    solver.validate()?;

    let competitive = CompetitiveBlock {
        delta: raw.f64("competitive", "delta")?,
        lambda_cap: raw
            .f64("competitive", "lambda_cap")?
            .unwrap_or(crate::competitive::LAMBDA_CAP),
    };
    let single = SingleBlock {
        source: raw.f64("single", "source")?.unwrap_or(1.0),
    };
    let n_max = raw.usize("run", "n_max")?.unwrap_or(crate::moser::DEFAULT_N_MAX);

    Ok(RunConfig {
        mode,
        grid,
        p,
        q,
        f,
        g,
        solver,
        competitive,
        single,
        n_max,
    })
}
