//! Experiment configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "model": { "strip": { "length": 4, "fibers": 2 } },
//!   "disorder": { "law": { "family": "uniform", "a": -1.0, "b": 1.0 } },
//!   "task": { "verify-all": { "samples": 10 } },
//!   "seed": 7
//! }
//! ```
//!
//! Unknown fields are rejected everywhere. Every tolerance must be positive.

use serde::{Deserialize, Serialize};
use specmult_core::operator_model::Distribution;

use crate::error::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderConfig>,
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Strip {
        length: usize,
        fibers: usize,
        /// Adds hopping along each fiber column, which splits the fiber degeneracy.
        #[serde(default)]
        vertical_hopping: bool,
    },
    Shell {
        d: usize,
        radius: usize,
    },
    Nested {
        levels: usize,
    },
    Canopy {
        k: usize,
        depth: usize,
        block_depth: usize,
    },
    Tree {
        k: usize,
        depth: usize,
    },
    RandomDense {
        dim: usize,
        rank: usize,
    },
    CanonicalAveraging {},
    File {
        path: String,
    },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Strip {
                length,
                fibers,
                vertical_hopping,
            } => {
                let v = if *vertical_hopping { ",vertical" } else { "" };
                format!("strip(L={length},F={fibers}{v})")
            }
            ModelSpec::Shell { d, radius } => format!("shell(d={d},R={radius})"),
            ModelSpec::Nested { levels } => format!("nested(levels={levels})"),
            ModelSpec::Canopy {
                k,
                depth,
                block_depth,
            } => format!("canopy(K={k},D={depth},l={block_depth})"),
            ModelSpec::Tree { k, depth } => format!("tree(K={k},L={depth})"),
            ModelSpec::RandomDense { dim, rank } => format!("random_dense(dim={dim},rank={rank})"),
            ModelSpec::CanonicalAveraging {} => "canonical_averaging".into(),
            ModelSpec::File { path } => format!("file({path})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub law: Distribution,
    /// Defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub cluster_tol: f64,
    pub gcd_tol: f64,
    pub residual_tol: f64,
    pub angle_tol: f64,
    pub deviation_tol: f64,
    pub gap_tol: f64,
    pub amp_tol: f64,
    pub fh_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cluster_tol: 1e-8,
            gcd_tol: 1e-8,
            residual_tol: 1e-9,
            angle_tol: 1e-6,
            deviation_tol: 1e-6,
            gap_tol: 1e-9,
            amp_tol: 1e-9,
            fh_tol: 1e-6,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("cluster_tol", self.cluster_tol),
            ("gcd_tol", self.gcd_tol),
            ("residual_tol", self.residual_tol),
            ("angle_tol", self.angle_tol),
            ("deviation_tol", self.deviation_tol),
            ("gap_tol", self.gap_tol),
            ("amp_tol", self.amp_tol),
            ("fh_tol", self.fh_tol),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Green(GreenParams),
    Mult(MultParams),
    Sweep(SweepParams),
    TreeCheck(TreeParams),
    Measure(MeasureParams),
    Avg(AvgParams),
    VerifyAll(VerifyParams),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Green(_) => "green",
            Task::Mult(_) => "mult",
            Task::Sweep(_) => "sweep",
            Task::TreeCheck(_) => "tree-check",
            Task::Measure(_) => "measure",
            Task::Avg(_) => "avg",
            Task::VerifyAll(_) => "verify-all",
        }
    }
}

fn default_z() -> Vec<[f64; 2]> {
    vec![[0.3, 0.7], [-1.1, 0.2]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenParams {
    pub samples: usize,
    /// Spectral parameters as `[re, im]`, `im != 0`.
    pub z: Vec<[f64; 2]>,
    pub lambda: f64,
}

impl Default for GreenParams {
    fn default() -> Self {
        GreenParams {
            samples: 10,
            z: default_z(),
            lambda: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultParams {
    pub samples: usize,
    pub z_count: usize,
    /// Blocks to examine; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
}

impl Default for MultParams {
    fn default() -> Self {
        MultParams {
            samples: 20,
            z_count: 16,
            blocks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub samples: usize,
    /// Real energies per sample and block, spread over `[-||A|| - 1, ||A|| + 1]`.
    pub energies: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    /// Blocks of larger rank are skipped by the exact path.
    pub max_rank: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            samples: 20,
            energies: 2,
            blocks: None,
            max_rank: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub samples: usize,
    /// JSON file with one boundary vector or a list of them; replaces random draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_file: Option<String>,
    /// Central-difference step; the check is skipped when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fh_step: Option<f64>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            samples: 100,
            tau_file: None,
            fh_step: Some(1e-4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    Atoms,
    Weights,
    Poltoratskii,
    Cyclic,
    Kernel,
}

impl std::str::FromStr for MeasureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| format!("unknown measure mode {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureParams {
    pub samples: usize,
    pub block: usize,
    pub mode: MeasureMode,
    /// Coupling for the kernel mode.
    pub lambda: f64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            samples: 1,
            block: 0,
            mode: MeasureMode::Weights,
            lambda: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    /// Centre; the heaviest atom at the mid coupling when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    pub first_len: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AvgParams {
    pub block: usize,
    pub intervals: IntervalSpec,
    pub samples: usize,
    pub law: [f64; 2],
}

impl Default for AvgParams {
    fn default() -> Self {
        AvgParams {
            block: 0,
            intervals: IntervalSpec {
                center: None,
                first_len: 0.2,
                count: 4,
            },
            samples: 10_000,
            law: [-1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub samples: usize,
    pub z: Vec<[f64; 2]>,
    pub lambda: f64,
    pub z_count: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            samples: 10,
            z: default_z(),
            lambda: 0.7,
            z_count: 8,
        }
    }
}

fn bad(path: impl Into<String>, message: impl Into<String>) -> RunError {
    RunError::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn positive_count(path: &str, n: usize) -> Result<(), RunError> {
    if n == 0 {
        return Err(bad(path, "must be at least 1"));
    }
    Ok(())
}

fn check_z(path: &str, z: &[[f64; 2]]) -> Result<(), RunError> {
    if z.is_empty() {
        return Err(bad(path, "needs at least one spectral parameter"));
    }
    for (i, [re, im]) in z.iter().enumerate() {
        if !re.is_finite() || !im.is_finite() || *im == 0.0 {
            return Err(bad(
                format!("{path}[{i}]"),
                "needs finite entries and a non-zero imaginary part",
            ));
        }
    }
    Ok(())
}

fn check_finite(path: &str, x: f64) -> Result<(), RunError> {
    if !x.is_finite() {
        return Err(bad(path, "must be finite"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the JSON path of the offending field.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(
                if path == "." { "$".into() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        for (name, v) in self.tolerances.entries() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(
                    format!("tolerances.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if let Some(d) = &self.disorder {
            d.law
                .validate()
                .map_err(|e| bad("disorder.law", e.to_string()))?;
        }
        if self.output.dir.is_empty() {
            return Err(bad("output.dir", "must not be empty"));
        }
        let p = format!("task.{}", self.task.name());
        match &self.task {
            Task::Green(g) => {
                positive_count(&format!("{p}.samples"), g.samples)?;
                check_z(&format!("{p}.z"), &g.z)?;
                check_finite(&format!("{p}.lambda"), g.lambda)?;
            }
            Task::Mult(m) => {
                positive_count(&format!("{p}.samples"), m.samples)?;
                positive_count(&format!("{p}.z_count"), m.z_count)?;
            }
            Task::Sweep(s) => {
                positive_count(&format!("{p}.samples"), s.samples)?;
                positive_count(&format!("{p}.energies"), s.energies)?;
                positive_count(&format!("{p}.max_rank"), s.max_rank)?;
            }
            Task::TreeCheck(t) => {
                positive_count(&format!("{p}.samples"), t.samples)?;
                if let Some(h) = t.fh_step {
                    if !(h > 0.0 && h.is_finite()) {
                        return Err(bad(format!("{p}.fh_step"), "must be positive"));
                    }
                }
                if !matches!(self.model, ModelSpec::Tree { .. }) {
                    return Err(bad("model", "tree-check needs a tree model"));
                }
            }
            Task::Measure(m) => {
                positive_count(&format!("{p}.samples"), m.samples)?;
                check_finite(&format!("{p}.lambda"), m.lambda)?;
            }
            Task::Avg(a) => {
                positive_count(&format!("{p}.samples"), a.samples)?;
                positive_count(&format!("{p}.intervals.count"), a.intervals.count)?;
                if !(a.intervals.first_len > 0.0 && a.intervals.first_len.is_finite()) {
                    return Err(bad(format!("{p}.intervals.first_len"), "must be positive"));
                }
                if let Some(c) = a.intervals.center {
                    check_finite(&format!("{p}.intervals.center"), c)?;
                }
                if !(a.law[0] < a.law[1] && a.law.iter().all(|x| x.is_finite())) {
                    return Err(bad(format!("{p}.law"), "needs finite a < b"));
                }
            }
            Task::VerifyAll(v) => {
                positive_count(&format!("{p}.samples"), v.samples)?;
                positive_count(&format!("{p}.z_count"), v.z_count)?;
                check_z(&format!("{p}.z"), &v.z)?;
                check_finite(&format!("{p}.lambda"), v.lambda)?;
            }
        }
        if matches!(self.model, ModelSpec::Tree { .. }) && !matches!(self.task, Task::TreeCheck(_))
        {
            return Err(bad("model", "tree models are only used by tree-check"));
        }
        if matches!(self.model, ModelSpec::CanonicalAveraging {})
            && !matches!(self.task, Task::Avg(_))
        {
            return Err(bad(
                "model",
                "the canonical averaging model is only used by avg",
            ));
        }
        Ok(())
    }

    /// Rewrites relative model and tau paths against `base`, the directory of the config file.
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        let fix = |p: &mut String| {
            let path = std::path::Path::new(p.as_str());
            if path.is_relative() {
                *p = base.join(path).display().to_string();
            }
        };
        if let ModelSpec::File { path } = &mut self.model {
            fix(path);
        }
        if let Task::TreeCheck(t) = &mut self.task {
            if let Some(p) = &mut t.tau_file {
                fix(p);
            }
        }
    }

    /// Lower-case hex SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut identity = self.clone();
        identity.output = OutputConfig::default();
        let text = serde_json::to_string(&identity).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
