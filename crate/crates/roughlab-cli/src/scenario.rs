use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use roughlab::noise::MarkMeasure;
use roughlab::rsde::{DeterministicJump, NoiseSpec};

/// One experiment run, read from a TOML file.
///
/// `threads` and `output` change neither the results nor the hash.
#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    pub grid: GridSpec,
    pub noise: NoiseConfig,
    pub experiment: Experiment,
}

/// File layout: a top-level `experiment = "<kind>"` selector and a `[<kind>]` section.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    seed: u64,
    experiment: String,
    #[serde(default)]
    threads: Option<usize>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    model: Option<ModelSpec>,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    noise: NoiseConfig,
    #[serde(default)]
    simulate: Option<SimulateConfig>,
    #[serde(default)]
    filter: Option<FilterConfig>,
    #[serde(default)]
    consistency: Option<ConsistencyConfig>,
    #[serde(default)]
    stability: Option<StabilityConfig>,
    #[serde(default)]
    skorokhod: Option<SkorokhodConfig>,
    #[serde(default)]
    robustness: Option<RobustnessConfig>,
    #[serde(default)]
    lm: Option<LmConfig>,
    #[serde(default)]
    moments: Option<MomentsConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Initial value of rough SDE presets; defaults to ones.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            horizon: 1.0,
            cells: default_cells(),
        }
    }
}

/// Martingale and jump inputs of rough SDE experiments. Marks are scalar.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "one_usize")]
    pub brownian_dim: usize,
    /// `[mark, mass]` pairs.
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub jump_time: Option<f64>,
    #[serde(default)]
    pub jump_size: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            brownian_dim: 1,
            atoms: Vec::new(),
            jump_time: None,
            jump_size: None,
        }
    }
}

impl NoiseConfig {
    pub fn measure(&self) -> Result<MarkMeasure> {
        let pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a[0], a[1])).collect();
        MarkMeasure::scalar(&pairs).map_err(|e| anyhow!("noise.atoms: {}", e))
    }

    pub fn spec(&self) -> Result<NoiseSpec> {
        let deterministic_jump = match (self.jump_time, self.jump_size) {
            (Some(time), Some(size)) => Some(DeterministicJump { time, size: vec![size] }),
            (None, None) => None,
            _ => bail!("noise.jump_time and noise.jump_size go together"),
        };
        Ok(NoiseSpec {
            brownian_dim: self.brownian_dim,
            jump_measure: self.measure()?,
            deterministic_jump,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteChoice {
    Robust,
    Oracle,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureChoice {
    Reference,
    Signal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "one_usize")]
    pub paths: usize,
    /// Paths written out in full.
    #[serde(default = "one_usize")]
    pub write_paths: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub particles: usize,
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default = "robust")]
    pub route: RouteChoice,
    #[serde(default = "signal")]
    pub measure: MeasureChoice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub fine_cells: usize,
    pub mesh_cells: [usize; 2],
    pub outer: usize,
    pub inner: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "default_level")]
    pub level: u32,
    pub paths: usize,
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub component: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkorokhodConfig {
    #[serde(default)]
    pub counterexample: bool,
    /// Jump time of the driver.
    #[serde(default = "half")]
    pub t0: f64,
    /// Driver jump size, or `ξ` in the counterexample.
    #[serde(default = "half")]
    pub jump: f64,
    /// Time changes of size `T / 2^n` for each level `n`.
    pub levels: Vec<u32>,
    #[serde(default = "one_usize")]
    pub paths: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub particles: usize,
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub component: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    pub levels: Vec<u32>,
    pub outer: usize,
    pub particles: usize,
    #[serde(default = "two")]
    pub m: f64,
    #[serde(default = "half")]
    pub epsilon: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_precondition_cells")]
    pub precondition_cells: usize,
    #[serde(default = "one_usize")]
    pub stride: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    pub paths: usize,
    /// Resolutions of the rough integral moment; empty skips it.
    #[serde(default)]
    pub rough_cells: Vec<usize>,
    #[serde(default = "one")]
    pub rough_lambda: f64,
    #[serde(default)]
    pub rough_paths: Option<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "one")]
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Experiment {
    Simulate(SimulateConfig),
    Filter(FilterConfig),
    Consistency(ConsistencyConfig),
    Stability(StabilityConfig),
    Skorokhod(SkorokhodConfig),
    Robustness(RobustnessConfig),
    Lm(LmConfig),
    Moments(MomentsConfig),
}

pub const EXPERIMENTS: [&str; 8] = [
    "simulate",
    "filter",
    "consistency",
    "stability",
    "skorokhod",
    "robustness",
    "lm",
    "moments",
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate(_) => "simulate",
            Experiment::Filter(_) => "filter",
            Experiment::Consistency(_) => "consistency",
            Experiment::Stability(_) => "stability",
            Experiment::Skorokhod(_) => "skorokhod",
            Experiment::Robustness(_) => "robustness",
            Experiment::Lm(_) => "lm",
            Experiment::Moments(_) => "moments",
        }
    }
}

/// The selected section, or its defaults when every field has one.
fn section<T: serde::de::DeserializeOwned>(kind: &str, given: Option<T>) -> Result<T> {
    match given {
        Some(c) => Ok(c),
        None => toml::from_str("").map_err(|e| anyhow!("missing [{}] section: {}", kind, e.message())),
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn one_usize() -> usize {
    1
}
fn default_cells() -> usize {
    256
}
fn default_p() -> f64 {
    2.5
}
fn default_level() -> u32 {
    4
}
fn default_beta() -> f64 {
    0.1
}
fn default_precondition_cells() -> usize {
    32
}
fn default_lambdas() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn robust() -> RouteChoice {
    RouteChoice::Robust
}
fn signal() -> MeasureChoice {
    MeasureChoice::Signal
}

impl Scenario {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| anyhow!("{}: {}", origin.display(), e))?;
        let s = Self::from_file(f).with_context(|| format!("{}", origin.display()))?;
        s.check().with_context(|| format!("{}", origin.display()))?;
        Ok(s)
    }

    fn from_file(f: ScenarioFile) -> Result<Self> {
        let present: Vec<&str> = [
            ("simulate", f.simulate.is_some()),
            ("filter", f.filter.is_some()),
            ("consistency", f.consistency.is_some()),
            ("stability", f.stability.is_some()),
            ("skorokhod", f.skorokhod.is_some()),
            ("robustness", f.robustness.is_some()),
            ("lm", f.lm.is_some()),
            ("moments", f.moments.is_some()),
        ]
        .iter()
        .filter(|(k, there)| *there && *k != f.experiment)
        .map(|(k, _)| *k)
        .collect();
        if let Some(k) = present.first() {
            bail!("section [{}] does not belong to experiment = \"{}\"", k, f.experiment);
        }
        let kind = f.experiment.as_str();
        let experiment = match kind {
            "simulate" => Experiment::Simulate(section(kind, f.simulate)?),
            "filter" => Experiment::Filter(section(kind, f.filter)?),
            "consistency" => Experiment::Consistency(section(kind, f.consistency)?),
            "stability" => Experiment::Stability(section(kind, f.stability)?),
            "skorokhod" => Experiment::Skorokhod(section(kind, f.skorokhod)?),
            "robustness" => Experiment::Robustness(section(kind, f.robustness)?),
            "lm" => Experiment::Lm(section(kind, f.lm)?),
            "moments" => Experiment::Moments(section(kind, f.moments)?),
            other => bail!("unknown experiment `{}`; expected one of {}", other, EXPERIMENTS.join(", ")),
        };
        Ok(Scenario {
            name: f.name,
            seed: f.seed,
            threads: f.threads,
            output: f.output,
            model: f.model,
            grid: f.grid,
            noise: f.noise,
            experiment,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path)
    }

    fn check(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name must be a non-empty file name component");
        }
        if !(self.grid.horizon > 0.0) || self.grid.cells == 0 {
            bail!("grid: need horizon > 0 and cells > 0");
        }
        Ok(())
    }

    /// Refines every mesh in the scenario `levels` times by halving.
    pub fn refine(&mut self, levels: u32) {
        if levels == 0 {
            return;
        }
        let f = 1usize << levels;
        self.grid.cells *= f;
        match &mut self.experiment {
            Experiment::Consistency(c) => {
                c.fine_cells *= f;
                c.mesh_cells[0] *= f;
                c.mesh_cells[1] *= f;
            }
            Experiment::Moments(c) => c.rough_cells.iter_mut().for_each(|v| *v *= f),
            Experiment::Lm(c) => c.precondition_cells *= f,
            _ => {}
        }
    }

    /// JSON of everything that determines the results.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
name = "t"
seed = 3
threads = 2
experiment = "filter"
[model]
preset = "degenerate"
params = { drift = 0.25 }
[filter]
particles = 10
"#;

    #[test]
    fn threads_do_not_enter_the_hash() {
        let a = Scenario::parse(TEXT, Path::new("a")).unwrap();
        let b = Scenario::parse(&TEXT.replace("threads = 2", "threads = 8"), Path::new("b")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Scenario::parse(&TEXT.replace("seed = 3", "seed = 4"), Path::new("c")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn errors_name_the_line_and_field() {
        let err = Scenario::parse(&TEXT.replace("particles = 10", "particles = \"x\""), Path::new("f.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 10") && err.contains("particles"), "{}", err);
        let err = Scenario::parse(&TEXT.replace("particles = 10", "particles = 10\nbogus = 1"), Path::new("f.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{}", err);
        let err = Scenario::parse(&TEXT.replace("particles = 10", ""), Path::new("f.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("particles"), "{}", err);
        let err = Scenario::parse(&format!("{}[lm]\nouter = 1\n", TEXT), Path::new("f.toml"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("[lm]"), "{}", err);
    }

    #[test]
    fn sections_with_only_defaults_may_be_omitted() {
        let s = Scenario::parse("name = \"s\"\nseed = 1\nexperiment = \"simulate\"\n", Path::new("s")).unwrap();
        assert_eq!(s.experiment.kind(), "simulate");
        assert!(Scenario::parse("name = \"s\"\nseed = 1\nexperiment = \"nope\"\n", Path::new("s")).is_err());
    }

    #[test]
    fn refinement_scales_all_meshes() {
        let mut s = Scenario::parse(TEXT, Path::new("a")).unwrap();
        s.refine(2);
        assert_eq!(s.grid.cells, 1024);
    }
}
