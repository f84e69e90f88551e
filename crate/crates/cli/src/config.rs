//! Run configuration: TOML schema, `--set` overrides and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use defectvqe_core::ansatz::ExcitationSelection;
use defectvqe_core::fixtures::FIXTURE_NAMES;
use defectvqe_core::mitigation::{CalibrationMode, FitKind, NegativeHandling};
use defectvqe_core::solvers::OptimizerConfig;
use serde::{Deserialize, Serialize};

/// Built-in device calibration shipped with the binary.
pub const CASABLANCA_TOML: &str = include_str!("../../../configs/casablanca.toml");

/// Invalid or inconsistent configuration (exit code 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Fci,
    Vqe,
    Scan,
    Qse,
    Zne,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    /// Built-in fixture name.
    pub fixture: Option<String>,
    /// FCIDUMP path, relative to the config file.
    pub fcidump: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub n_electrons: Option<usize>,
    pub sz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingChoice {
    JordanWigner,
    #[default]
    Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub kind: MappingChoice,
    /// Remove the two symmetry qubits (parity only).
    pub taper: bool,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self { kind: MappingChoice::Parity, taper: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzConfig {
    pub selection: ExcitationSelection,
    /// Occupied spin orbitals of the reference; defaults to the fixture's or aufbau.
    pub reference: Option<Vec<usize>>,
    pub merge_first_generator: bool,
    /// Starting parameters; zeros when absent.
    pub theta0: Option<Vec<f64>>,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            selection: ExcitationSelection::ConfigurationPreserving,
            reference: None,
            merge_first_generator: true,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// `none`, `casablanca`, or unset when `path` is given.
    pub preset: Option<String>,
    /// Device calibration TOML, relative to the config file.
    pub path: Option<PathBuf>,
    /// Thermal relaxation from T1/T2 and gate durations.
    pub damping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// Shots per measurement group; 0 uses exact outcome distributions.
    pub shots: u64,
    pub post_select: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { shots: 8192, post_select: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub mitigate: bool,
    pub calibration: CalibrationMode,
    pub calibration_shots: u64,
    pub negatives: NegativeHandling,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self { mitigate: false, calibration: CalibrationMode::Product, calibration_shots: 8192, negatives: NegativeHandling::Clip }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Include `stop` in the grid.
    pub endpoint: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { start: -std::f64::consts::PI, stop: std::f64::consts::PI, points: 12, endpoint: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZneConfig {
    pub replications: Vec<usize>,
    pub repetitions: usize,
    pub fit: FitKind,
    /// Parameters to evaluate at; the noiseless optimum when absent.
    pub theta: Option<Vec<f64>>,
    pub bootstrap: usize,
}

impl Default for ZneConfig {
    fn default() -> Self {
        Self { replications: vec![1, 2, 3, 4, 5], repetitions: 50, fit: FitKind::Linear, theta: None, bootstrap: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QseReference {
    /// Ansatz at its noiseless optimum (exact for the two-determinant fixtures).
    #[default]
    Exact,
    /// Tail-averaged parameters of a VQE run with the same settings.
    Vqe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QseConfig {
    pub reference: QseReference,
    /// Overlap cutoff; 1e-8 noiseless and 1e-3 noisy when absent.
    pub s_threshold: Option<f64>,
    /// Replication factors for element-wise extrapolation; `[1]` disables it.
    pub replications: Vec<usize>,
    pub repetitions: usize,
    pub degeneracy_tol: f64,
}

impl Default for QseConfig {
    fn default() -> Self {
        Self {
            reference: QseReference::Exact,
            s_threshold: None,
            replications: vec![1, 2, 3, 4, 5],
            repetitions: 10,
            degeneracy_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub sector: SectorConfig,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub readout: ReadoutConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub zne: ZneConfig,
    #[serde(default)]
    pub qse: QseConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| cfg_err(format!("override `{assignment}` lacks `=`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("override key `{key}` is malformed")));
    }
    let mut table = root;
    for part in &path[..path.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| cfg_err(format!("override path `{key}` crosses a non-table value")))?;
    }
    table.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides, and validates.
    ///
    /// Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, overrides: &[String], base_dir: &Path) -> anyhow::Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        for p in [&mut cfg.hamiltonian.fcidump, &mut cfg.noise.path].into_iter().flatten() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.hamiltonian.fixture, &self.hamiltonian.fcidump) {
            (Some(_), Some(_)) => return Err(cfg_err("set exactly one of hamiltonian.fixture and hamiltonian.fcidump")),
            (None, None) => return Err(cfg_err("hamiltonian.fixture or hamiltonian.fcidump is required")),
            (Some(name), None) if !FIXTURE_NAMES.contains(&name.as_str()) => {
                return Err(cfg_err(format!("unknown fixture `{name}`; expected one of {FIXTURE_NAMES:?}")))
            }
            (None, Some(p)) if !p.is_file() => {
                return Err(cfg_err(format!("FCIDUMP `{}` does not exist", p.display())))
            }
            _ => {}
        }
        if self.hamiltonian.fcidump.is_some() && self.sector.n_electrons.is_none() {
            return Err(cfg_err("sector.n_electrons is required with an FCIDUMP Hamiltonian"));
        }
        if let Some(sz) = self.sector.sz {
            if (2.0 * sz).fract() != 0.0 {
                return Err(cfg_err(format!("sector.sz = {sz} is not a half-integer")));
            }
        }
        if self.mapping.taper && self.mapping.kind != MappingChoice::Parity {
            return Err(cfg_err("tapering requires the parity mapping"));
        }
        match (self.noise.preset.as_deref(), &self.noise.path) {
            (Some(_), Some(_)) => return Err(cfg_err("set at most one of noise.preset and noise.path")),
            (Some("none") | Some("casablanca") | None, None) => {}
            (Some(other), None) => return Err(cfg_err(format!("unknown noise preset `{other}`"))),
            (None, Some(p)) if !p.is_file() => return Err(cfg_err(format!("noise file `{}` does not exist", p.display()))),
            _ => {}
        }
        if self.readout.mitigate && self.readout.calibration_shots == 0 {
            return Err(cfg_err("readout.calibration_shots must be positive"));
        }
        self.optimizer.validate().map_err(|e| cfg_err(format!("optimizer: {e}")))?;
        if self.optimizer.seed != 0 {
            return Err(cfg_err("optimizer.seed is derived from the top-level seed; leave it unset"));
        }
        match self.mode {
            Mode::Scan if self.scan.points == 0 => return Err(cfg_err("scan.points must be positive")),
            Mode::Zne => {
                let mut r = self.zne.replications.clone();
                r.sort_unstable();
                r.dedup();
                if r.len() != self.zne.replications.len() || r.len() < 2 || r[0] == 0 {
                    return Err(cfg_err("zne.replications needs at least two distinct positive factors"));
                }
                if self.zne.repetitions == 0 {
                    return Err(cfg_err("zne.repetitions must be positive"));
                }
                let min = match self.zne.fit {
                    FitKind::Linear => 2,
                    _ => 3,
                };
                if r.len() < min {
                    return Err(cfg_err(format!("zne.fit = {:?} needs at least {min} replication factors", self.zne.fit)));
                }
            }
            Mode::Qse => {
                if self.qse.replications.is_empty() || self.qse.replications.contains(&0) || self.qse.repetitions == 0 {
                    return Err(cfg_err("qse.replications must be positive and qse.repetitions nonzero"));
                }
                if let Some(t) = self.qse.s_threshold {
                    if !(t > 0.0) {
                        return Err(cfg_err("qse.s_threshold must be positive"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.path.is_some() || self.noise.preset.as_deref().is_some_and(|p| p != "none")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = \"fci\"\n[hamiltonian]\nfixture = \"hubbard1\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL, &[], Path::new(".")).unwrap();
        assert_eq!(c.estimation.shots, 8192);
        assert_eq!(c.zne.replications, vec![1, 2, 3, 4, 5]);
        assert_eq!(c.optimizer.spsa.a, 0.2);
        assert!(!c.is_noisy());
    }

    #[test]
    fn overrides_apply() {
        let o = vec!["mode=vqe".to_string(), "estimation.shots=0".into(), "noise.preset=casablanca".into(), "zne.replications=[1,3]".into()];
        let c = RunConfig::from_toml_str(MINIMAL, &o, Path::new(".")).unwrap();
        assert_eq!(c.mode, Mode::Vqe);
        assert_eq!(c.estimation.shots, 0);
        assert!(c.is_noisy());
        assert_eq!(c.zne.replications, vec![1, 3]);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_toml_str(MINIMAL, &["mode=qse".into()], Path::new(".")).unwrap();
        let again = RunConfig::from_toml_str(&c.to_toml(), &[], Path::new(".")).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "mode = \"fci\"\n[hamiltonian]\nfixture = \"nope\"\n",
            "mode = \"fci\"\n[hamiltonian]\n",
            "mode = \"fci\"\nbogus = 1\n[hamiltonian]\nfixture = \"hubbard1\"\n",
            "mode = \"zne\"\n[hamiltonian]\nfixture = \"hubbard1\"\n[zne]\nreplications = [1]\n",
            "mode = \"fci\"\n[hamiltonian]\nfcidump = \"/does/not/exist\"\n[sector]\nn_electrons = 2\n",
            "mode = \"fci\"\n[hamiltonian]\nfixture = \"hubbard1\"\n[noise]\npreset = \"mystery\"\n",
        ];
        for b in bad {
            let e = RunConfig::from_toml_str(b, &[], Path::new(".")).unwrap_err();
            assert!(e.downcast_ref::<ConfigError>().is_some(), "{b}: {e}");
        }
    }

    #[test]
    fn preset_parses() {
        let d = defectvqe_core::sim::DeviceCalibration::from_toml(CASABLANCA_TOML).unwrap();
        assert_eq!(d.qubits.len(), 7);
        assert_eq!(d.pairs.len(), 6);
    }
}
