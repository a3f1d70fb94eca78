//! Synthetic oracle-complete pools with a known defect rate.
//!
//! Each stratum has a fixed number of defects, `round(size · defect_rate)`,
//! so the population rate is a constant of the spec rather than a random
//! variable. Scores are uniform on a per-class interval, which is enough to
//! make the proposal informative, weak or misaligned.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttrValue, Instance, Pool};
use crate::error::{Error, Result};

pub const PRESETS: [&str; 3] = ["two-strata-aligned", "two-strata-misaligned", "low-defect"];
pub const DEFAULT_PRESET_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthStratum {
    pub size: usize,
    pub defect_rate: f64,
    /// `[lo, hi]` support of scores on defective items.
    pub defective_scores: [f64; 2],
    /// `[lo, hi]` support of scores on correctly classified items.
    pub correct_scores: [f64; 2],
}

impl SynthStratum {
    pub fn defect_count(&self) -> usize {
        (self.size as f64 * self.defect_rate).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub strata: Vec<SynthStratum>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(Error::InvalidArgument("synthetic spec has no strata".into()));
        }
        for (j, s) in self.strata.iter().enumerate() {
            if s.size == 0 {
                return Err(Error::InvalidArgument(format!("stratum {} has size 0", j + 1)));
            }
            if !(0.0..=1.0).contains(&s.defect_rate) {
                return Err(Error::InvalidArgument(format!(
                    "stratum {} defect rate {} outside [0, 1]",
                    j + 1,
                    s.defect_rate
                )));
            }
            for [lo, hi] in [s.defective_scores, s.correct_scores] {
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "stratum {} score support [{lo}, {hi}] not inside [0, 1]",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact defect rate any pool drawn from this spec will have.
    pub fn defect_rate(&self) -> f64 {
        let n: usize = self.strata.iter().map(|s| s.size).sum();
        let d: usize = self.strata.iter().map(SynthStratum::defect_count).sum();
        d as f64 / n as f64
    }
}

fn two_strata(size: usize, rates: [f64; 2], defective: [[f64; 2]; 2], correct: [[f64; 2]; 2]) -> SynthSpec {
    let first = ((size as f64) * 0.2).round().max(1.0) as usize;
    let sizes = [first, size - first];
    SynthSpec {
        strata: (0..2)
            .map(|j| SynthStratum {
                size: sizes[j],
                defect_rate: rates[j],
                defective_scores: defective[j],
                correct_scores: correct[j],
            })
            .collect(),
    }
}

/// Built-in regimes, split 20% / 80% between a high-defect and a low-defect stratum.
///
/// * `two-strata-aligned`: ε = 1%, defects score high in both strata.
/// * `two-strata-misaligned`: the high-defect stratum scores low globally, so a
///   global proposal starves it, while scores stay informative within strata.
/// * `low-defect`: ε = 0.5%.
pub fn preset(name: &str, size: usize) -> Result<SynthSpec> {
    if size < 2 {
        return Err(Error::InvalidArgument(format!("preset size {size} must be at least 2")));
    }
    let spec = match name {
        "two-strata-aligned" => two_strata(
            size,
            [0.04, 0.0025],
            [[0.8, 1.0], [0.8, 1.0]],
            [[0.0, 0.2], [0.0, 0.2]],
        ),
        "two-strata-misaligned" => two_strata(
            size,
            [0.25, 0.0125],
            [[0.1, 0.2], [0.9, 1.0]],
            [[0.0, 0.1], [0.5, 0.9]],
        ),
        "low-defect" => two_strata(
            size,
            [0.015, 0.0025],
            [[0.6, 1.0], [0.6, 1.0]],
            [[0.0, 0.4], [0.0, 0.4]],
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}`; available presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Generates an oracle-complete pool. Ids run `0..N` in stratum order and
/// the generating stratum (1-based) is stored in attribute `stratum`.
pub fn synth_pool(spec: &SynthSpec, seed: u64) -> Result<Pool> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(spec.strata.iter().map(|s| s.size).sum());
    let mut next_id = 0u64;
    for (j, stratum) in spec.strata.iter().enumerate() {
        let mut defective = vec![false; stratum.size];
        for k in index::sample(&mut rng, stratum.size, stratum.defect_count()) {
            defective[k] = true;
        }
        for is_defect in defective {
            let support = if is_defect {
                stratum.defective_scores
            } else {
                stratum.correct_scores
            };
            let score = uniform(&mut rng, support);
            let pred = i64::from(score >= 0.5);
            let truth = if is_defect { 1 - pred } else { pred };
            instances.push(
                Instance::new(next_id, score, pred)
                    .with_true_label(truth)
                    .with_attr("stratum", AttrValue::Num((j + 1) as f64)),
            );
            next_id += 1;
        }
    }
    Pool::new(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::true_defect_rate;

    fn stratum(size: usize, rate: f64) -> SynthStratum {
        SynthStratum {
            size,
            defect_rate: rate,
            defective_scores: [0.5, 1.0],
            correct_scores: [0.0, 0.5],
        }
    }

    #[test]
    fn deterministic_defect_count() {
        let spec = SynthSpec { strata: vec![stratum(10, 0.2)] };
        let pool = synth_pool(&spec, 3).unwrap();
        let defects = pool
            .instances()
            .iter()
            .filter(|i| i.pred_label != i.true_label.unwrap())
            .count();
        assert_eq!(defects, 2);
    }

    #[test]
    fn two_strata_rate() {
        let spec = SynthSpec { strata: vec![stratum(6, 0.5), stratum(4, 0.0)] };
        let pool = synth_pool(&spec, 11).unwrap();
        assert_eq!(true_defect_rate::<f64>(&pool).unwrap(), 0.3);
        assert_eq!(spec.defect_rate(), 0.3);
    }

    #[test]
    fn seed_determinism() {
        let spec = preset("two-strata-aligned", 500).unwrap();
        let a = synth_pool(&spec, 1).unwrap();
        let b = synth_pool(&spec, 1).unwrap();
        let c = synth_pool(&spec, 2).unwrap();
        assert_eq!(a.instances(), b.instances());
        let sa: Vec<f64> = a.scores().collect();
        let sc: Vec<f64> = c.scores().collect();
        assert_ne!(sa, sc);
    }

    #[test]
    fn low_defect_preset_is_half_a_percent() {
        let pool = synth_pool(&preset("low-defect", 10_000).unwrap(), 5).unwrap();
        assert_eq!(true_defect_rate::<f64>(&pool).unwrap(), 0.005);
    }

    #[test]
    fn unknown_preset_lists_choices() {
        let msg = preset("foo", 100).unwrap_err().to_string();
        for p in PRESETS {
            assert!(msg.contains(p));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(synth_pool(&SynthSpec { strata: vec![] }, 0).is_err());
        let mut s = stratum(5, 0.1);
        s.correct_scores = [0.2, 1.2];
        assert!(synth_pool(&SynthSpec { strata: vec![s] }, 0).is_err());
        assert!(synth_pool(&SynthSpec { strata: vec![stratum(0, 0.1)] }, 0).is_err());
    }
}
