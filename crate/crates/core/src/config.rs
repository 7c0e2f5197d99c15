//! Run configuration: which scenario to simulate, where to write results,
//! and optional overrides. Stored as TOML with a strict schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cases::{preset_by_name, ProbeSpec, Scenario};
use crate::error::{Error, Result};

/// Optional replacements for the scenario's time-stepping parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_step_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_max_iter: Option<usize>,
}

impl SolverOverrides {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Features {
    /// Force the CO₂/Ca(OH)₂ equations on or off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carbonation: Option<bool>,
    /// `false` drops all cracks of the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cracks: Option<bool>,
    /// Compare the analytic Jacobian with finite differences on the initial
    /// state before solving.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub jacobian_check: bool,
}

impl Features {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// A complete run description. Exactly one of `preset`, `scenario_file`
/// and `scenario` selects the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in preset name, e.g. `case1` or `case4_rh60`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// TOML file holding a scenario table, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Replaces the scenario's snapshot schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    /// Probes added to those of the scenario.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeSpec>,
    #[serde(default, skip_serializing_if = "SolverOverrides::is_empty")]
    pub solver: SolverOverrides,
    #[serde(default, skip_serializing_if = "Features::is_empty")]
    pub features: Features,
    /// Inline scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

impl RunConfig {
    /// Config running the named preset with all defaults.
    pub fn for_preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            scenario_file: None,
            output_dir: default_output_dir(),
            snapshot_times: None,
            probes: vec![],
            solver: SolverOverrides::default(),
            features: Features::default(),
            scenario: None,
        }
    }

    /// Config embedding a full scenario.
    pub fn inline(scenario: Scenario, output_dir: impl Into<PathBuf>) -> Self {
        Self { preset: None, output_dir: output_dir.into(), scenario: Some(scenario), ..Self::for_preset("") }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { line: None, msg: e.to_string() })
    }

    /// The scenario with all overrides applied and validated. Relative
    /// `scenario_file` paths are resolved against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario> {
        let sources = [self.preset.is_some(), self.scenario_file.is_some(), self.scenario.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config {
                line: None,
                msg: "exactly one of `preset`, `scenario_file` or `[scenario]` is required".into(),
            });
        }
        let mut sc = if let Some(name) = &self.preset {
            preset_by_name(name)?
        } else if let Some(file) = &self.scenario_file {
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config { line: None, msg: format!("scenario_file {}: {e}", path.display()) })?;
            parse_scenario(&text)?
        } else {
            self.scenario.clone().expect("checked above")
        };
        if let Some(times) = &self.snapshot_times {
            sc.snapshot_times = times.clone();
        }
        sc.probes.extend(self.probes.iter().cloned());
        let o = &self.solver;
        let t = &mut sc.time;
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { t.$f = v; } )* };
        }
        apply!(t_end, dt_init, dt_min, dt_max, newton_tol, newton_step_tol, newton_max_iter);
        if let Some(c) = self.features.carbonation {
            sc.carbonation = c;
        }
        if self.features.cracks == Some(false) {
            sc.cracks.clear();
        }
        validate_scenario(&sc)?;
        Ok(sc)
    }

    /// Check paths and create the output directory.
    pub fn prepare_output(&self, base_dir: &Path) -> Result<PathBuf> {
        let dir = base_dir.join(&self.output_dir);
        if dir.exists() && !dir.is_dir() {
            return Err(Error::Config { line: None, msg: format!("output_dir {} is not a directory", dir.display()) });
        }
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::Config { line: None, msg: format!("output_dir {}: {e}", dir.display()) })?;
        Ok(dir)
    }
}

/// Checks that do not need a mesh: parameters, time plan, probe names and
/// snapshot times.
pub fn validate_scenario(sc: &Scenario) -> Result<()> {
    sc.material.resolve()?;
    sc.time.validate()?;
    if sc.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Scenario("snapshot times must be finite and non-negative".into()));
    }
    let mut names: Vec<&str> = sc.probes.iter().map(|p| p.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Scenario("probe names must be unique".into()));
    }
    if let Some(bad) = names.iter().find(|n| n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
    {
        return Err(Error::Scenario(format!("probe name {bad:?} must be non-empty [A-Za-z0-9_]")));
    }
    Ok(())
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `key` is assigned, if it appears exactly once.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let hits: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|(i, _)| i + 1)
        .collect();
    (hits.len() == 1).then(|| hits[0])
}

fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(text, s.start)),
        msg: e.message().trim().to_string(),
    })
}

/// Attach the line of the offending key to validation errors.
fn locate(text: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => {
            Error::Config { line: line_of_key(text, &name), msg: format!("`{name}`: {reason}") }
        }
        Error::Config { .. } => err,
        other => Error::Config { line: None, msg: other.to_string() },
    }
}

/// Parse a run config. Unknown keys, malformed values and non-physical
/// inline material parameters are rejected with the offending line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = from_toml(text)?;
    if let Some(sc) = &cfg.scenario {
        validate_scenario(sc).map_err(|e| locate(text, e))?;
    }
    cfg.solver_plan_check().map_err(|e| locate(text, e))?;
    Ok(cfg)
}

/// Parse a stand-alone scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario = from_toml(text)?;
    validate_scenario(&sc).map_err(|e| locate(text, e))?;
    Ok(sc)
}

impl RunConfig {
    fn solver_plan_check(&self) -> Result<()> {
        let o = &self.solver;
        let positive = [("t_end", o.t_end), ("dt_init", o.dt_init), ("dt_min", o.dt_min), ("dt_max", o.dt_max)];
        for (name, v) in
            positive.into_iter().chain([("newton_tol", o.newton_tol), ("newton_step_tol", o.newton_step_tol)])
        {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) || (name != "t_end" && v == 0.0) {
                    return Err(Error::param(name, "must be finite and positive"));
                }
            }
        }
        if o.newton_max_iter == Some(0) {
            return Err(Error::param("newton_max_iter", "must be at least 1"));
        }
        if let Some(t) = &self.snapshot_times {
            if t.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::param("snapshot_times", "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Every preset as a self-contained config, keyed by preset name.
pub fn preset_configs() -> Vec<(String, RunConfig)> {
    use crate::cases::{case4_carbonation, CASE4_RH_LEVELS, PRESET_NAMES};
    let mut out: Vec<(String, RunConfig)> = PRESET_NAMES
        .iter()
        .filter(|n| **n != "case4")
        .map(|n| (n.to_string(), RunConfig::inline(preset_by_name(n).expect("built-in preset"), *n)))
        .collect();
    for rh in CASE4_RH_LEVELS {
        let sc = case4_carbonation(rh);
        out.push((sc.name.clone(), RunConfig::inline(sc.clone(), sc.name)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::case1_drying;

    #[test]
    fn minimal_preset_config() {
        let cfg = parse_config("preset = \"case1\"\n").unwrap();
        assert_eq!(cfg, RunConfig::for_preset("case1"));
        assert_eq!(cfg.output_dir, PathBuf::from("output"));
        assert_eq!(cfg.resolve(Path::new(".")).unwrap(), case1_drying());
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_config("preset = \"case1\"\n\n[solver]\ndt_maxx = 3.0\n").unwrap_err();
        let Error::Config { line, msg } = err else { panic!("{err}") };
        assert_eq!(line, Some(4));
        assert!(msg.contains("dt_maxx"), "{msg}");
    }

    #[test]
    fn non_physical_beta_rejected_with_line() {
        let mut text = RunConfig::inline(case1_drying(), "out").to_toml().unwrap();
        text = text.replace("branch = \"drying\"", "branch = \"drying\"\nbeta = 0.5");
        let err = parse_config(&text).unwrap_err();
        let Error::Config { line, msg } = err else { panic!("{err}") };
        assert!(msg.contains("beta"), "{msg}");
        let expect = text.lines().position(|l| l.starts_with("beta")).unwrap() + 1;
        assert_eq!(line, Some(expect));
    }

    #[test]
    fn exactly_one_source() {
        let mut cfg = RunConfig::for_preset("case1");
        cfg.scenario = Some(case1_drying());
        assert!(cfg.resolve(Path::new(".")).is_err());
        cfg.preset = None;
        cfg.scenario = None;
        assert!(cfg.resolve(Path::new(".")).is_err());
    }

    #[test]
    fn overrides_apply() {
        let text = "preset = \"case5_cracked\"\nsnapshot_times = [0.0]\n[solver]\nt_end = 10.0\n[features]\ncracks = false\ncarbonation = false\n";
        let sc = parse_config(text).unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!(sc.time.t_end, 10.0);
        assert!(sc.cracks.is_empty() && !sc.carbonation);
        assert_eq!(sc.snapshot_times, vec![0.0]);
    }

    #[test]
    fn negative_override_rejected() {
        assert!(parse_config("preset = \"case1\"\n[solver]\ndt_min = -1.0\n").is_err());
    }

    #[test]
    fn presets_round_trip() {
        for (name, cfg) in preset_configs() {
            let text = cfg.to_toml().unwrap();
            let back = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn scenario_file_is_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let sc = case1_drying();
        std::fs::write(dir.path().join("s.toml"), toml::to_string(&sc).unwrap()).unwrap();
        let cfg = parse_config("scenario_file = \"s.toml\"\n").unwrap();
        assert_eq!(cfg.resolve(dir.path()).unwrap(), sc);
        assert!(cfg.resolve(Path::new("/nonexistent")).is_err());
    }
}
