//! Run configuration, schema `v1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use diagbose::lattice::{GaussianTerm, ModelParams, TestFunction};

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sweep,
    SolveMu,
    Genfun,
    Condense,
    KacCheck,
    Equiv,
    Scaling,
    Positivity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::SolveMu => "solve-mu",
            Command::Genfun => "genfun",
            Command::Condense => "condense",
            Command::KacCheck => "kac-check",
            Command::Equiv => "equiv",
            Command::Scaling => "scaling",
            Command::Positivity => "positivity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    #[default]
    Limit,
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<f64>>,
}

/// One Gaussian `amplitude e^{i phase} exp(-|x|^2 / 2 width^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfSpec {
    Single(GaussianSpec),
    Sum(Vec<GaussianSpec>),
}

impl TfSpec {
    pub fn build(&self) -> TestFunction {
        let terms = match self {
            TfSpec::Single(g) => std::slice::from_ref(g),
            TfSpec::Sum(gs) => gs.as_slice(),
        };
        TestFunction {
            terms: terms
                .iter()
                .map(|g| GaussianTerm { amplitude: Complex64::from_polar(g.amplitude, g.phase), width: g.width })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub format: Format,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub command: Command,
    pub model: ModelParams,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf: Option<TfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_set: Option<Vec<TfSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    pub output: Output,
}

/// A schema violation, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn bad<T>(field: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { field: field.to_string(), message: message.into() })
}

fn check_list(field: &str, xs: &[f64], positive: bool) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return bad(field, "must not be empty");
    }
    for (i, x) in xs.iter().enumerate() {
        if !x.is_finite() || (positive && *x <= 0.0) {
            let want = if positive { "a positive finite number" } else { "a finite number" };
            return bad(&format!("{field}[{i}]"), format!("{x} is not {want}"));
        }
    }
    Ok(())
}

/// The chemical-potential or density axis of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Mu,
    Rho,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError { field: field_of(&e.to_string()), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn axis(&self) -> Axis {
        if self.grid.mu.is_some() {
            Axis::Mu
        } else {
            Axis::Rho
        }
    }

    pub fn axis_values(&self) -> &[f64] {
        self.grid.mu.as_deref().or(self.grid.rho.as_deref()).unwrap_or(&[])
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.grid.l.clone().unwrap_or_else(|| vec![self.model.l])
    }

    pub fn test_function(&self) -> TestFunction {
        self.tf.as_ref().map(TfSpec::build).unwrap_or_else(TestFunction::zero)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return bad("version", format!("expected \"{SCHEMA_VERSION}\", got \"{}\"", self.version));
        }
        if let Err(e) = self.model.validate() {
            return bad("model", e.to_string());
        }
        check_list("grid.beta", &self.grid.beta, true)?;
        if let Some(ls) = &self.grid.l {
            check_list("grid.L", ls, true)?;
        }
        match (&self.grid.mu, &self.grid.rho) {
            (Some(_), Some(_)) => return bad("grid", "give exactly one of mu and rho, not both"),
            (None, None) => return bad("grid", "give exactly one of mu and rho"),
            (Some(mu), None) => check_list("grid.mu", mu, false)?,
            (None, Some(rho)) => check_list("grid.rho", rho, true)?,
        }
        let cmd = self.command.name();
        let needs_rho =
            matches!(self.command, Command::SolveMu | Command::KacCheck | Command::Equiv | Command::Scaling);
        if needs_rho && self.grid.rho.is_none() {
            return bad("grid.rho", format!("{cmd} needs a rho grid"));
        }
        if matches!(self.command, Command::Genfun | Command::Equiv | Command::KacCheck) && self.tf.is_none() {
            return bad("tf", format!("required for {cmd}"));
        }
        if let Some(tf) = &self.tf {
            if let Err(e) = tf.build().validate() {
                return bad("tf", e.to_string());
            }
        }
        if self.command == Command::Positivity {
            let set = match &self.tf_set {
                Some(set) => set,
                None => return bad("tf_set", "required for positivity"),
            };
            if set.is_empty() || set.len() > diagbose::experiments::MAX_POSITIVITY_SET {
                return bad("tf_set", format!("must hold 1 to {} entries", diagbose::experiments::MAX_POSITIVITY_SET));
            }
            for (i, tf) in set.iter().enumerate() {
                if let Err(e) = tf.build().validate() {
                    return bad(&format!("tf_set[{i}]"), e.to_string());
                }
            }
        }
        if self.command == Command::Condense {
            match &self.deltas {
                None => return bad("deltas", "required for condense"),
                Some(ds) => {
                    check_list("deltas", ds, true)?;
                    if ds.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("deltas", "must be strictly ascending");
                    }
                }
            }
        }
        if self.command == Command::Scaling && self.lengths().len() < 4 {
            return bad("grid.L", "scaling needs at least 4 box lengths");
        }
        if let Some(t) = self.quad_tol {
            if !(t > 0.0 && t < 1.0) {
                return bad("quad_tol", format!("{t} is not in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Pulls the field name out of a serde message such as
/// "unknown field `foo`" or "missing field `bar`".
fn field_of(message: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "version": "v1",
            "command": "solve-mu",
            "model": {"d": 3, "L": 8.0, "kinetic": 1.0, "eps0": -1.0, "g0": 1.0, "gk_profile": {"Constant": 1.0}},
            "grid": {"beta": [1.0], "rho": [0.5]},
            "output": {"format": "csv"}
        })
    }

    fn parse(v: &serde_json::Value) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(&v.to_string())
    }

    #[test]
    fn accepts_a_minimal_config() {
        let cfg = parse(&base()).unwrap();
        assert_eq!(cfg.axis(), Axis::Rho);
        assert_eq!(cfg.lengths(), vec![8.0]);
    }

    #[test]
    fn names_the_offending_field() {
        let mut v = base();
        v["grid"]["mu"] = serde_json::json!([-0.1]);
        assert_eq!(parse(&v).unwrap_err().field, "grid");
        let mut v = base();
        v["grid"]["beta"] = serde_json::json!([1.0, -2.0]);
        assert_eq!(parse(&v).unwrap_err().field, "grid.beta[1]");
        let mut v = base();
        v["colour"] = serde_json::json!(1);
        assert_eq!(parse(&v).unwrap_err().field, "colour");
        let mut v = base();
        v.as_object_mut().unwrap().remove("output");
        assert_eq!(parse(&v).unwrap_err().field, "output");
        let mut v = base();
        v["version"] = serde_json::json!("v2");
        assert_eq!(parse(&v).unwrap_err().field, "version");
        let mut v = base();
        v["command"] = serde_json::json!("genfun");
        assert_eq!(parse(&v).unwrap_err().field, "tf");
    }

    #[test]
    fn test_function_forms() {
        let one: TfSpec = serde_json::from_str(r#"{"amplitude": 1.0, "width": 2.0}"#).unwrap();
        assert_eq!(one.build(), TestFunction::gaussian(1.0, 2.0));
        let sum: TfSpec = serde_json::from_str(
            r#"[{"amplitude": 1.0, "width": 2.0}, {"amplitude": 0.5, "width": 1.0, "phase": 1.0}]"#,
        )
        .unwrap();
        assert_eq!(sum.build().terms.len(), 2);
    }
}
