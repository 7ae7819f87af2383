//! Run configuration: a TOML file with top-level keys and one table per
//! component. Every key is optional; command-line flags override the file.
//!
//! ```toml
//! seed = 0
//! dataset = "runs/data"
//! out = "runs/knn"
//! regressor = "knn"
//!
//! [oracle]
//! n_p = 2000
//!
//! [models.knn]
//! k = [7, 6, 9, 6]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wallreg_core::global::{FieldMlpSpec, GlobalSpec, IsomapSpec, KnnSpec, PodSpec};
use wallreg_core::metrics::MeanMode;
use wallreg_core::pointwise::{LambdaDnnSpec, MlpSearchSpace, MlpSpec, PointwiseSpec, TrainSpec, TreeSpec};
use wallreg_core::{DoeSpec, GasModel, OracleConfig};

use crate::Failure;

pub const REGRESSORS: [&str; 7] = [
    "mlp_pointwise",
    "lambda_dnn",
    "tree",
    "mlp_global",
    "knn",
    "pod_rbf",
    "isomap_rbf",
];

pub const TUNABLE: [&str; 2] = ["mlp_pointwise", "knn"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds the test split, the inner train/validation split and tuning.
    pub seed: u64,
    pub inner_fraction: f64,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub submission: Option<PathBuf>,
    pub regressor: Option<String>,
    pub mean_mode: MeanMode,
    pub oracle: OracleConfig,
    pub gas: GasModel,
    pub doe: DoeSpec,
    pub models: ModelSpecs,
    pub tune: TuneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            inner_fraction: 0.75,
            dataset: None,
            out: None,
            model: None,
            submission: None,
            regressor: None,
            mean_mode: MeanMode::Unweighted,
            oracle: OracleConfig::default(),
            gas: GasModel::air(),
            doe: DoeSpec::default(),
            models: ModelSpecs::default(),
            tune: TuneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpecs {
    pub mlp_pointwise: MlpSpec,
    pub lambda_dnn: LambdaDnnSpec,
    pub tree: TreeSpec,
    pub mlp_global: FieldMlpSpec,
    pub knn: KnnSpec,
    pub pod_rbf: PodSpec,
    pub isomap_rbf: IsomapSpec,
}

fn pointwise_train() -> TrainSpec {
    TrainSpec {
        epochs: 20,
        ..TrainSpec::default()
    }
}

impl Default for ModelSpecs {
    fn default() -> Self {
        // Pointwise networks default to desk-scale widths; the full-size
        // presets are available from the library.
        ModelSpecs {
            mlp_pointwise: MlpSpec {
                hidden_sizes: vec![64, 64, 32],
                train: pointwise_train(),
            },
            lambda_dnn: LambdaDnnSpec {
                geo_branch: vec![32, 32],
                cond_branch: vec![32, 32],
                trunk: vec![32],
                train: pointwise_train(),
            },
            tree: TreeSpec {
                max_depth: Some(20),
                min_samples_leaf: 5,
                seed: 0,
            },
            mlp_global: FieldMlpSpec::default(),
            knn: KnnSpec::default(),
            pod_rbf: PodSpec::default(),
            isomap_rbf: IsomapSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub budget: usize,
    pub space: MlpSearchSpace,
    pub k_min: usize,
    pub k_max: usize,
    pub removals: usize,
    pub repeats: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            budget: 8,
            space: MlpSearchSpace {
                base: pointwise_train(),
                ..MlpSearchSpace::default()
            },
            k_min: 1,
            k_max: 12,
            removals: 20,
            repeats: 5,
        }
    }
}

/// Which model family a regressor name resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Pointwise(PointwiseSpec),
    Global(GlobalSpec),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Failure::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::config(e.to_string().trim_end().to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration, with the
    /// path keys cleared so that relocating a run does not change it.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            dataset: None,
            out: None,
            model: None,
            submission: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn require_dataset(&self) -> Result<&Path, Failure> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Failure::config("no dataset directory (set `dataset` or pass --dataset)"))
    }

    pub fn require_out(&self) -> Result<&Path, Failure> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::config("no output directory (set `out` or pass --out)"))
    }

    pub fn regressor_name(&self) -> Result<&str, Failure> {
        let name = self
            .regressor
            .as_deref()
            .ok_or_else(|| Failure::config(format!("no regressor given; valid: {}", REGRESSORS.join(", "))))?;
        if !REGRESSORS.contains(&name) {
            return Err(Failure::config(format!(
                "unknown regressor `{name}`; valid: {}",
                REGRESSORS.join(", ")
            )));
        }
        Ok(name)
    }

    pub fn model_choice(&self) -> Result<(String, ModelChoice), Failure> {
        let name = self.regressor_name()?;
        let m = &self.models;
        let choice = match name {
            "mlp_pointwise" => ModelChoice::Pointwise(PointwiseSpec::Mlp(m.mlp_pointwise.clone())),
            "lambda_dnn" => ModelChoice::Pointwise(PointwiseSpec::LambdaDnn(m.lambda_dnn.clone())),
            "tree" => ModelChoice::Pointwise(PointwiseSpec::Tree(m.tree.clone())),
            "mlp_global" => ModelChoice::Global(GlobalSpec::MlpGlobal(m.mlp_global.clone())),
            "knn" => ModelChoice::Global(GlobalSpec::Knn(m.knn.clone())),
            "pod_rbf" => ModelChoice::Global(GlobalSpec::PodRbf(m.pod_rbf.clone())),
            "isomap_rbf" => ModelChoice::Global(GlobalSpec::IsomapRbf(m.isomap_rbf.clone())),
            _ => unreachable!("name checked against REGRESSORS"),
        };
        Ok((name.to_string(), choice))
    }

    /// Model file path: `model`, else `<out>/model.json`.
    pub fn model_path(&self) -> Result<PathBuf, Failure> {
        match &self.model {
            Some(p) => Ok(p.clone()),
            None => Ok(self.require_out()?.join("model.json")),
        }
    }

    /// Submission directory: `submission`, else `<out>/submission`.
    pub fn submission_path(&self) -> Result<PathBuf, Failure> {
        match &self.submission {
            Some(p) => Ok(p.clone()),
            None => Ok(self.require_out()?.join("submission")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_sections_parse() {
        let c = RunConfig::parse(
            "seed = 3\nregressor = \"knn\"\n[oracle]\nn_p = 50\n[models.knn]\nk = [1, 2, 3, 4]\n[doe]\nmach_list = [0.5]\naoa_table = [[0, 1]]\np_i_list = [1e5]\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.oracle.n_p, 50);
        assert_eq!(c.models.knn.k, [1, 2, 3, 4]);
        assert_eq!(c.doe.aoa_table, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[oracle]\nnp = 3", "[models.knn]\nkk = 2", "[extra]"] {
            let err = RunConfig::parse(text).unwrap_err();
            assert_eq!(err.code, crate::EXIT_CONFIG, "{text}");
        }
    }

    #[test]
    fn unknown_regressor_lists_valid_names() {
        let c = RunConfig {
            regressor: Some("foo".into()),
            ..RunConfig::default()
        };
        let err = c.model_choice().unwrap_err();
        assert_eq!(err.code, crate::EXIT_CONFIG);
        for name in REGRESSORS {
            assert!(err.message.contains(name));
        }
    }

    #[test]
    fn hash_ignores_paths_but_not_seeds() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: Some("elsewhere".into()),
            ..a.clone()
        };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
