use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Fractions for the train / transport-fit / calibration / test partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 4],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fractions: [0.4, 0.2, 0.2, 0.2],
            seed: 0,
        }
    }
}

/// The four disjoint parts produced by [`split_dataset`].
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub ot_fit: Option<Dataset>,
    pub calib: Dataset,
    pub test: Dataset,
}

impl SplitSpec {
    pub fn new(fractions: [f64; 4], seed: u64) -> Result<Self> {
        let s = Self { fractions, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Split(format!("fractions must lie in [0,1]: {:?}", self.fractions)));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Split sizes `(train, ot_fit, calib, test)`; flooring remainder goes to train.
    pub fn sizes(&self, n: usize) -> [usize; 4] {
        let part = |f: f64| (f * n as f64 + 1e-9).floor() as usize;
        let ot = part(self.fractions[1]);
        let cal = part(self.fractions[2]);
        let test = part(self.fractions[3]);
        [n - ot - cal - test, ot, cal, test]
    }

    /// Index sets `(train, ot_fit, calib, test)` after a seeded shuffle.
    pub fn partition(&self, n: usize) -> Result<[Vec<usize>; 4]> {
        self.validate()?;
        if n < 4 {
            return Err(Error::Split(format!("need at least 4 rows, got {n}")));
        }
        let sizes = self.sizes(n);
        for (name, &s) in ["train", "calib", "test"].iter().zip(&[sizes[0], sizes[2], sizes[3]]) {
            if s == 0 {
                return Err(Error::Split(format!("{name} split is empty for n={n}")));
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut out: [Vec<usize>; 4] = Default::default();
        let mut start = 0;
        for (slot, &s) in out.iter_mut().zip(&sizes) {
            *slot = idx[start..start + s].to_vec();
            start += s;
        }
        Ok(out)
    }
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    let [tr, ot, cal, te] = spec.partition(ds.len())?;
    let tag = |s: &str| format!("{}/{s}", ds.origin);
    Ok(Splits {
        train: ds.subset(&tr, tag("train")),
        ot_fit: (!ot.is_empty()).then(|| ds.subset(&ot, tag("ot_fit"))),
        calib: ds.subset(&cal, tag("calib")),
        test: ds.subset(&te, tag("test")),
    })
}
