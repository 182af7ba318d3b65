use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{param, Error, Result};
use crate::model::{SparsityModel, SystemParams};
use crate::network::{LinkFailureProcess, NetworkTopology};
use crate::ratebound::resolution_for_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    Uniform,
    CsQiht,
    CsFista,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Uniform, Scheme::CsQiht, Scheme::CsFista];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Uniform => "uniform",
            Scheme::CsQiht => "cs-qiht",
            Scheme::CsFista => "cs-fista",
        }
    }

    pub fn is_cs(&self) -> bool {
        matches!(self, Scheme::CsQiht | Scheme::CsFista)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown scheme {s:?} (proposed, uniform, cs-qiht, cs-fista)")))
    }
}

/// Whether codebooks are redrawn for every trial or shared by all trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodebookRefresh {
    #[default]
    PerTrial,
    Fixed,
}

impl CodebookRefresh {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodebookRefresh::PerTrial => "per-trial",
            CodebookRefresh::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyChoice {
    SingleHop,
    Graph { source: String, topology: NetworkTopology },
}

impl TopologyChoice {
    pub fn resolve(&self, n: usize) -> Result<NetworkTopology> {
        match self {
            TopologyChoice::SingleHop => NetworkTopology::single_hop(n),
            TopologyChoice::Graph { topology, .. } => Ok(topology.clone()),
        }
    }

    pub fn describe(&self) -> &str {
        match self {
            TopologyChoice::SingleHop => "single-hop",
            TopologyChoice::Graph { source, .. } => source,
        }
    }
}

/// Compressed-sensing baseline settings. `None` for `a` or `lambda` means
/// "tune per rate point" in sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsSettings {
    pub a: Option<usize>,
    pub lambda: Option<f64>,
    pub step_size: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    /// Trials used to pick `a` and `lambda`; 0 means all of them.
    pub tune_trials: usize,
    pub golden_iters: usize,
}

impl Default for CsSettings {
    fn default() -> Self {
        Self { a: None, lambda: None, step_size: None, max_iters: 300, tol: 1e-7, tune_trials: 64, golden_iters: 12 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawExperiment {
    scheme: Scheme,
    trials: usize,
    master_seed: u64,
    output: Option<PathBuf>,
    codebook: CodebookRefresh,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            trials: 200,
            master_seed: 1,
            output: None,
            codebook: CodebookRefresh::PerTrial,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSystem {
    n: usize,
    #[serde(rename = "T", alias = "t")]
    t: usize,
    rate: f64,
    b: Option<usize>,
    l: Option<usize>,
    gamma: f64,
    epsilon: f64,
}

impl Default for RawSystem {
    fn default() -> Self {
        Self { n: 5, t: 20, rate: 1.0, b: None, l: None, gamma: 2.0, epsilon: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawNetwork {
    topology: String,
    failures: String,
}

impl Default for RawNetwork {
    fn default() -> Self {
        Self { topology: "single-hop".into(), failures: "none".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSweep {
    rates: Vec<f64>,
    schemes: Vec<Scheme>,
}

impl Default for RawSweep {
    fn default() -> Self {
        Self { rates: vec![0.4, 0.6, 0.8, 1.0, 1.2], schemes: Scheme::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    system: RawSystem,
    model: Option<SparsityModel>,
    network: RawNetwork,
    baselines: CsSettings,
    sweep: RawSweep,
}

/// A fully resolved experiment: referenced files are already loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub t: usize,
    pub rate: f64,
    /// Explicit register length; overrides `rate` when set.
    pub b: Option<usize>,
    /// Explicit resolution; otherwise derived from the rate.
    pub l: Option<usize>,
    pub gamma: f64,
    pub epsilon: f64,
    pub model: SparsityModel,
    pub topology: TopologyChoice,
    pub failures: LinkFailureProcess,
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub codebook: CodebookRefresh,
    pub cs: CsSettings,
    pub rates: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_table(Table::new(), Path::new(".")).expect("built-in defaults are valid")
    }
}

impl ExperimentConfig {
    /// Parses a config file body. Relative paths inside it resolve against
    /// `base_dir`. `overrides` are `section.key=value` assignments applied
    /// before validation.
    pub fn from_toml_str(text: &str, base_dir: &Path, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text.parse().map_err(|e| Error::Format(format!("config: {e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        Self::from_table(table, base_dir)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base, overrides)
    }

    /// Defaults plus overrides, with no file.
    pub fn from_overrides(overrides: &[String]) -> Result<Self> {
        Self::from_toml_str("", Path::new("."), overrides)
    }

    fn from_table(table: Table, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = Value::Table(table).try_into().map_err(|e| Error::Format(format!("config: {e}")))?;
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let topology = match raw.network.topology.as_str() {
            "single-hop" | "" => TopologyChoice::SingleHop,
            path => {
                let file = resolve(path);
                let text = std::fs::read_to_string(&file)
                    .map_err(|e| Error::Param(format!("topology file {}: {e}", file.display())))?;
                TopologyChoice::Graph { source: path.to_string(), topology: NetworkTopology::parse(&text)? }
            }
        };
        let failures = match raw.network.failures.trim() {
            "none" | "" => LinkFailureProcess::None,
            inline if inline.contains('=') => LinkFailureProcess::parse(inline)?,
            path => {
                let file = resolve(path);
                let text = std::fs::read_to_string(&file)
                    .map_err(|e| Error::Param(format!("failure file {}: {e}", file.display())))?;
                LinkFailureProcess::parse(&text)?
            }
        };
        let cfg = ExperimentConfig {
            scheme: raw.experiment.scheme,
            n: raw.system.n,
            t: raw.system.t,
            rate: raw.system.rate,
            b: raw.system.b,
            l: raw.system.l,
            gamma: raw.system.gamma,
            epsilon: raw.system.epsilon,
            model: raw.model.unwrap_or(SparsityModel::Overall { k: 3 }),
            topology,
            failures,
            trials: raw.experiment.trials,
            master_seed: raw.experiment.master_seed,
            output: raw.experiment.output.map(|p| resolve(&p.to_string_lossy())),
            codebook: raw.experiment.codebook,
            cs: raw.baselines,
            rates: raw.sweep.rates,
            schemes: raw.sweep.schemes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param("trial count must be at least 1");
        }
        if self.n == 0 || self.t == 0 {
            return param("n and T must be positive");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return param(format!("rate must be positive, got {}", self.rate));
        }
        if self.rates.is_empty() || self.rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return param("sweep rates must be a nonempty list of positive numbers");
        }
        if self.schemes.is_empty() {
            return param("sweep needs at least one scheme");
        }
        self.model.validate(self.n, self.t)?;
        self.failures.validate()?;
        if let TopologyChoice::Graph { topology, .. } = &self.topology {
            if topology.encoders() != self.n {
                return Err(Error::Topology(format!(
                    "topology has {} encoders but n = {}",
                    topology.encoders(),
                    self.n
                )));
            }
        }
        if self.cs.a == Some(0) {
            return param("CS measurement count a must be at least 1");
        }
        Ok(())
    }

    /// Same experiment at another rate, with `b` and `l` re-derived.
    pub fn at_rate(&self, rate: f64) -> Self {
        Self { rate, b: None, l: None, ..self.clone() }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self { scheme, ..self.clone() }
    }

    pub fn register_bits(&self) -> Result<usize> {
        match self.b {
            Some(b) => Ok(b),
            None => Ok(SystemParams::from_rate(self.n, self.t, self.rate, 1, self.gamma, self.epsilon)?.b),
        }
    }

    /// Resolution used by the proposed scheme: explicit, or the largest `l`
    /// the selection rule allows at this rate.
    pub fn resolution(&self) -> Result<usize> {
        match self.l {
            Some(l) => Ok(l),
            None => {
                let rate = self.register_bits()? as f64 / (self.n * self.t) as f64;
                resolution_for_rate(rate, self.n, self.t, self.model.k(), self.epsilon)
            }
        }
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(self.n, self.t, self.register_bits()?, self.resolution()?, self.gamma, self.epsilon)
    }
}

/// Applies one `section.key=value` assignment. The value is read as a TOML
/// literal when possible and as a bare string otherwise.
fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Param(format!("override {assignment:?} is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    };
    let mut keys = path.split('.').collect::<Vec<_>>();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| Error::Param("empty override key".into()))?;
    let mut cur = table;
    for key in keys {
        let entry = cur.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Param(format!("override path {path:?} crosses a non-table value")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.n, cfg.t, cfg.rate, cfg.epsilon, cfg.gamma), (5, 20, 1.0, 1.0, 2.0));
        assert_eq!(cfg.model, SparsityModel::Overall { k: 3 });
        assert_eq!(cfg.resolution().unwrap(), 1040);
        assert_eq!(cfg.params().unwrap().b, 100);
    }

    #[test]
    fn parses_sections_and_overrides() {
        let text = r#"
            [experiment]
            scheme = "cs-qiht"
            trials = 10
            master_seed = 7

            [system]
            n = 4
            T = 10
            rate = 0.8

            [model]
            model = "structured"
            k_s = 2
            k_t = 1

            [network]
            failures = "p_fail=0.1 seed=3"

            [sweep]
            rates = [0.5, 1.0]
            schemes = ["proposed", "uniform"]
        "#;
        let over = vec!["system.rate=1.2".to_string(), "experiment.scheme=uniform".to_string()];
        let cfg = ExperimentConfig::from_toml_str(text, Path::new("."), &over).unwrap();
        assert_eq!(cfg.scheme, Scheme::Uniform);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.rate, 1.2);
        assert_eq!(cfg.model, SparsityModel::Structured { k_s: 2, k_t: 1 });
        assert_eq!(cfg.failures, LinkFailureProcess::Iid { p_fail: 0.1, seed: 3 });
        assert_eq!(cfg.rates, vec![0.5, 1.0]);
        assert_eq!(cfg.register_bits().unwrap(), 48);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_overrides(&["experiment.trials=0".into()]).is_err());
        assert!(ExperimentConfig::from_overrides(&["system.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::from_overrides(&["experiment.scheme=magic".into()]).is_err());
        assert!(ExperimentConfig::from_overrides(&["network.topology=/no/such/file".into()]).is_err());
        assert!(ExperimentConfig::from_overrides(&["model.model=overall".into(), "model.k=0".into()]).is_err());
    }

    #[test]
    fn loads_topology_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("net.txt"), "e0 r0\ne1 r0\nr0 p0\n").unwrap();
        std::fs::write(dir.path().join("fail.txt"), "e1 r0\n").unwrap();
        let cfg_path = dir.path().join("exp.toml");
        std::fs::write(
            &cfg_path,
            "[system]\nn = 2\nT = 5\n[model]\nmodel = \"overall\"\nk = 1\n[network]\ntopology = \"net.txt\"\nfailures = \"fail.txt\"\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&cfg_path, &[]).unwrap();
        assert_eq!(cfg.topology.describe(), "net.txt");
        assert!(matches!(cfg.failures, LinkFailureProcess::Explicit(ref v) if v.len() == 1));
        let bad = ExperimentConfig::load(&cfg_path, &["system.n=3".into()]);
        assert!(matches!(bad, Err(Error::Topology(_))));
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
    }
}
