//! Run configuration: a TOML file mapped onto a [`Scenario`] plus the checks to run.
//!
//! Relative file paths inside a config resolve against the config's directory.

use std::fs;
use std::path::{Path, PathBuf};

use kvwave_core::{DampingPreset, InitialData, Scenario, SchemeConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] kvwave_core::Error),
}

pub fn read_text(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

/// Whitespace- or comma-separated floats; `#` starts a comment.
pub fn read_grid_file(path: &Path) -> Result<Vec<f64>, ConfigError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v = tok.parse::<f64>().map_err(|_| {
                ConfigError::Invalid(format!("{}:{}: `{tok}` is not a number", path.display(), n + 1))
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Grid values of `u0` and optionally `u1`, read from text files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFileInitial {
    pub u: PathBuf,
    #[serde(default)]
    pub v: Option<PathBuf>,
}

/// Grid values of `a`, read from a text file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFileDamping {
    pub path: PathBuf,
    #[serde(default)]
    pub declared_constant: Option<f64>,
}

/// Initial data: a core preset, or `kind = "grid_file"` with paths to grid values.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    GridFile(GridFileInitial),
    Inline(InitialData),
}

/// Damping: a core preset, or `preset = "grid_file"` with a path to grid values.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingSpec {
    GridFile(GridFileDamping),
    Inline(DampingPreset),
}

/// Dispatch on the tag by hand so that field errors of the chosen variant surface
/// unchanged instead of as "no variant matched".
fn split_tagged<'de, D, F, C>(d: D, tag: &str, file: impl FnOnce(toml::Table) -> Result<F, toml::de::Error>, core: impl FnOnce(toml::Table) -> Result<C, toml::de::Error>) -> Result<Result<F, C>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    use serde::de::Error;
    let mut table = toml::Table::deserialize(d)?;
    if table.get(tag).and_then(|v| v.as_str()) == Some("grid_file") {
        table.remove(tag);
        file(table).map(Ok).map_err(D::Error::custom)
    } else {
        core(table).map(Err).map_err(D::Error::custom)
    }
}

impl<'de> Deserialize<'de> for InitialSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = split_tagged(d, "kind", |t| t.try_into(), |t| t.try_into())?;
        Ok(r.map_or_else(InitialSpec::Inline, InitialSpec::GridFile))
    }
}

impl<'de> Deserialize<'de> for DampingSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = split_tagged(d, "preset", |t| t.try_into(), |t| t.try_into())?;
        Ok(r.map_or_else(DampingSpec::Inline, DampingSpec::GridFile))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    EnergyIdentity,
    Structural,
    Decay,
    Bernoulli,
    Commutator,
    Tail,
    FrequencySplit,
    TruncationConvergence,
    Stability,
}

fn default_residual() -> f64 {
    1e-5
}
fn default_probes() -> usize {
    4
}
fn default_k_list() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}
fn default_delta() -> f64 {
    1e-3
}
fn default_sample_every() -> usize {
    1
}

/// Parameters of the individual checks.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default = "default_residual")]
    pub energy_max_residual: f64,
    /// Defaults to the profile's own floor.
    #[serde(default)]
    pub structural_floor: Option<f64>,
    #[serde(default)]
    pub decay_window: Option<[f64; 2]>,
    /// Initial data for the strong-energy calibration; defaults to the run's own.
    #[serde(default)]
    pub bernoulli_family: Vec<InitialSpec>,
    /// Modes per axis of the refined calibration; defaults to twice the run's.
    #[serde(default)]
    pub bernoulli_refined_modes: Option<usize>,
    #[serde(default = "default_probes")]
    pub commutator_probes: usize,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            energy_max_residual: default_residual(),
            structural_floor: None,
            decay_window: None,
            bernoulli_family: Vec::new(),
            bernoulli_refined_modes: None,
            commutator_probes: default_probes(),
            k_list: default_k_list(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub edge_lengths: Vec<f64>,
    pub modes_per_axis: usize,
    #[serde(default)]
    pub grid_intervals: Option<usize>,
    pub damping: DampingSpec,
    pub truncation: f64,
    #[serde(default)]
    pub linear: bool,
    pub scheme: SchemeConfig,
    pub final_time: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Frequency thresholds for split energies, commutator and tail scans.
    #[serde(default)]
    pub n_list: Vec<f64>,
    pub initial: InitialSpec,
    /// Replaces the seed of random initial data and of the commutator probes.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyParams,
}

/// A config whose file references are loaded and whose overrides are applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub family: Vec<InitialData>,
    pub seed: u64,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl InitialSpec {
    fn load(&self, base: &Path, seed: Option<u64>) -> Result<InitialData, ConfigError> {
        Ok(match self {
            InitialSpec::GridFile(GridFileInitial { u, v }) => InitialData::Grid {
                u: read_grid_file(&resolve_path(base, u))?,
                v: v.as_ref().map(|v| read_grid_file(&resolve_path(base, v))).transpose()?,
            },
            InitialSpec::Inline(InitialData::RandomH1 { seed: s, decay, amplitude, velocity_amplitude }) => {
                InitialData::RandomH1 {
                    seed: seed.unwrap_or(*s),
                    decay: *decay,
                    amplitude: *amplitude,
                    velocity_amplitude: *velocity_amplitude,
                }
            }
            InitialSpec::Inline(d) => d.clone(),
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: toml::Value) -> Result<Self, ConfigError> {
        let cfg: RunConfig = value.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.truncation > 0.0) {
            return Err(ConfigError::Invalid(format!("truncation must be positive (got {})", self.truncation)));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Invalid("n_list must be strictly ascending".into()));
        }
        if let Some(n) = self.n_list.iter().find(|n| !(**n > 0.0)) {
            return Err(ConfigError::Invalid(format!("n_list entries must be positive (got {n})")));
        }
        self.scheme.validate()?;
        Ok(())
    }

    /// Load referenced files and apply the seed override (`cli_seed` wins over `seed`).
    pub fn resolve(&self, base: &Path, cli_seed: Option<u64>) -> Result<Resolved, ConfigError> {
        let seed = cli_seed.or(self.seed);
        let damping = match &self.damping {
            DampingSpec::GridFile(GridFileDamping { path, declared_constant }) => DampingPreset::Grid {
                values: read_grid_file(&resolve_path(base, path))?,
                declared_constant: *declared_constant,
            },
            DampingSpec::Inline(p) => p.clone(),
        };
        let initial = self.initial.load(base, seed)?;
        let family = if self.verify.bernoulli_family.is_empty() {
            vec![initial.clone()]
        } else {
            self.verify.bernoulli_family.iter().map(|s| s.load(base, None)).collect::<Result<_, _>>()?
        };
        let scenario = Scenario {
            edge_lengths: self.edge_lengths.clone(),
            modes_per_axis: self.modes_per_axis,
            grid_intervals: self.grid_intervals,
            damping,
            truncation: self.truncation,
            linear: self.linear,
            scheme: self.scheme,
            final_time: self.final_time,
            sample_every: self.sample_every,
            thresholds: self.n_list.clone(),
            initial,
        };
        scenario.basis()?;
        Ok(Resolved { config: self.clone(), scenario, family, seed: seed.unwrap_or(0) })
    }
}

/// Hex SHA-256 of the config text and any override that changes the outputs.
pub fn config_hash(text: &str, cli_seed: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    if let Some(s) = cli_seed {
        h.update(format!("\nseed-override={s}").as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
edge_lengths = [3.141592653589793]
modes_per_axis = 8
truncation = 10.0
final_time = 0.1
n_list = [2.0, 4.0]

[scheme]
dt = 0.01

[damping]
preset = "constant"
alpha = 0.1

[initial]
kind = "random_h1"
seed = 1
decay = 2.0
amplitude = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.sample_every, 1);
        assert!(cfg.checks.is_empty());
        assert_eq!(cfg.verify, VerifyParams::default());
        let r = cfg.resolve(Path::new("."), Some(9)).unwrap();
        assert!(matches!(r.scenario.initial, InitialData::RandomH1 { seed: 9, .. }));
        assert_eq!(r.family.len(), 1);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("final_time", "finaltime");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("alpha = 0.1", "alpha = 0.1\nbeta = 2.0");
        assert!(RunConfig::parse(&text).is_err());
        let text = MINIMAL.replace("preset = \"constant\"", "preset = \"nope\"");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn parse_errors_carry_a_location() {
        let text = MINIMAL.replace("modes_per_axis = 8", "modes_per_axis = = 8");
        let msg = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn semantic_validation() {
        assert!(RunConfig::parse(&MINIMAL.replace("[2.0, 4.0]", "[4.0, 2.0]")).is_err());
        assert!(RunConfig::parse(&MINIMAL.replace("truncation = 10.0", "truncation = 0.0")).is_err());
        let cfg = RunConfig::parse(&format!("grid_intervals = 16\n{MINIMAL}")).unwrap();
        assert!(matches!(cfg.resolve(Path::new("."), None), Err(ConfigError::Core(kvwave_core::Error::AliasingGuard { .. }))));
    }

    #[test]
    fn file_variants_load() {
        let dir = tempfile::tempdir().unwrap();
        let n = 33;
        let vals: Vec<String> = (0..n).map(|i| format!("{}", (i as f64 / 32.0 * 3.0).sin())).collect();
        fs::write(dir.path().join("u.txt"), vals.join("\n")).unwrap();
        fs::write(dir.path().join("a.txt"), format!("# ramp\n{}", vec!["0.5"; n].join(", "))).unwrap();
        let text = MINIMAL
            .replace("kind = \"random_h1\"\nseed = 1\ndecay = 2.0\namplitude = 1.0", "kind = \"grid_file\"\nu = \"u.txt\"")
            .replace("preset = \"constant\"\nalpha = 0.1", "preset = \"grid_file\"\npath = \"a.txt\"");
        let r = RunConfig::parse(&text).unwrap().resolve(dir.path(), None).unwrap();
        assert!(matches!(&r.scenario.initial, InitialData::Grid { u, v: None } if u.len() == n));
        assert!(matches!(&r.scenario.damping, DampingPreset::Grid { values, .. } if values == &vec![0.5; n]));
        assert!(r.scenario.setup().is_ok());
    }

    #[test]
    fn hash_depends_on_text_and_seed_override() {
        assert_eq!(config_hash(MINIMAL, None), config_hash(MINIMAL, None));
        assert_ne!(config_hash(MINIMAL, None), config_hash(MINIMAL, Some(1)));
        assert_eq!(config_hash(MINIMAL, None).len(), 64);
    }
}
