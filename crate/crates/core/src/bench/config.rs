use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::{ScoreConfig, ScoreKind};
use crate::data_io::{load_dataset_csv, synth_dataset_with_features, Dataset, SplitSpec, SynthKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        d_out: usize,
    },
    /// Regenerated for every seed with that seed.
    Synthetic {
        #[serde(flatten)]
        kind: SynthKind,
        n: usize,
        d: usize,
        #[serde(default = "one")]
        p: usize,
    },
}

fn one() -> usize {
    1
}

impl DataSource {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Csv { path, d_out } => load_dataset_csv(path, *d_out),
            DataSource::Synthetic { kind, n, d, p } => synth_dataset_with_features(kind, *n, *d, *p, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub data: DataSource,
    pub methods: Vec<ScoreKind>,
    pub alpha: f64,
    pub fractions: [f64; 4],
    pub score: ScoreConfig,
    pub seeds: Vec<u64>,
    /// Uniform samples per region-size estimate.
    pub mc_samples: usize,
    /// Test points used for region size (coverage uses all of them).
    pub max_region_points: usize,
    /// Scale of the calibration-residual box used for region sampling.
    pub bbox_inflation: f64,
    /// Fit the OT map / covariance on the calibration split itself.
    pub fit_on_calib: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic {
                kind: SynthKind::gaussian_identity(),
                n: 2000,
                d: 2,
                p: 1,
            },
            methods: vec![ScoreKind::MergeL2, ScoreKind::MergeMahalanobis, ScoreKind::McpMax, ScoreKind::Otcp],
            alpha: 0.1,
            fractions: SplitSpec::default().fractions,
            score: ScoreConfig::default(),
            seeds: (0..10).collect(),
            mc_samples: 10_000,
            max_region_points: 200,
            bbox_inflation: 1.5,
            fit_on_calib: false,
            output_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Param(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.score.otcp.epsilon > 0.0) {
            return Err(Error::Param("epsilon must be positive".into()));
        }
        if self.score.otcp.targets < 2 {
            return Err(Error::Param("need at least 2 grid points".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Param("need at least one seed".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Param("need at least one method".into()));
        }
        if self.mc_samples == 0 || !(self.bbox_inflation > 0.0) {
            return Err(Error::Param("mc_samples and bbox_inflation must be positive".into()));
        }
        SplitSpec::new(self.fractions, 0)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_json() {
        let cfg: BenchConfig = serde_json::from_str(
            r#"{
                "data": {"synthetic": {"kind": "banana", "n": 500, "d": 2}},
                "methods": ["merge_l2", "otcp"],
                "seeds": [1, 2],
                "score": {"otcp": {"epsilon": 0.05, "targets": 1024}}
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.methods, vec![ScoreKind::MergeL2, ScoreKind::Otcp]);
        assert_eq!(cfg.score.otcp.targets, 1024);
        assert_eq!(cfg.alpha, 0.1);
        match cfg.data {
            DataSource::Synthetic { kind, p, .. } => {
                assert_eq!(kind, SynthKind::banana());
                assert_eq!(p, 1);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let cfg = BenchConfig {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = BenchConfig {
            seeds: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
