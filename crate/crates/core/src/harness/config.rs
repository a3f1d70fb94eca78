use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::designs::DesignKind;
use crate::error::{Error, Result};
use crate::pool::Pool;
use crate::proposal::{build_proposal, Proposal, ScoreTransform, TransformFamily, DEFAULT_FLOOR};
use crate::scalar::Scalar;
use crate::strata::{
    build_categorical_strata, build_cross_strata, build_quantile_strata, merge_small_strata,
    Stratification, DEFAULT_MIN_COUNT, DEFAULT_MIN_FRAC,
};

pub const DEFAULT_REPLICATIONS: usize = 1000;

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_min_count() -> usize {
    DEFAULT_MIN_COUNT
}

fn default_min_frac() -> f64 {
    DEFAULT_MIN_FRAC
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

/// Experiment grid read from JSON. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    pub designs: Vec<DesignKind>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<StrataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<ProposalConfigs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrataConfig {
    pub method: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default = "default_min_frac")]
    pub min_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrataMethod {
    Categorical { attr: String },
    Cross { attrs: Vec<String> },
    Quantile {
        feature: String,
        feature_bins: usize,
        score_bins: usize,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoricalParams {
    attr: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CrossParams {
    attrs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuantileParams {
    feature: String,
    feature_bins: usize,
    score_bins: usize,
}

fn params<T: serde::de::DeserializeOwned>(method: &str, value: &Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("strata `{method}` params: {e}")))
}

impl StrataConfig {
    pub fn categorical(attr: &str) -> Self {
        StrataConfig {
            method: "categorical".into(),
            params: serde_json::json!({ "attr": attr }),
            min_count: DEFAULT_MIN_COUNT,
            min_frac: DEFAULT_MIN_FRAC,
        }
    }

    pub fn method(&self) -> Result<StrataMethod> {
        Ok(match self.method.as_str() {
            "categorical" => {
                let p: CategoricalParams = params(&self.method, &self.params)?;
                StrataMethod::Categorical { attr: p.attr }
            }
            "cross" => {
                let p: CrossParams = params(&self.method, &self.params)?;
                StrataMethod::Cross { attrs: p.attrs }
            }
            "quantile" => {
                let p: QuantileParams = params(&self.method, &self.params)?;
                StrataMethod::Quantile {
                    feature: p.feature,
                    feature_bins: p.feature_bins,
                    score_bins: p.score_bins,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown strata method `{other}` (expected categorical, cross or quantile)"
                )))
            }
        })
    }

    /// Short label for reports, e.g. `categorical(stratum)`.
    pub fn describe(&self) -> String {
        match self.method() {
            Ok(StrataMethod::Categorical { attr }) => format!("categorical({attr})"),
            Ok(StrataMethod::Cross { attrs }) => format!("cross({})", attrs.join("x")),
            Ok(StrataMethod::Quantile {
                feature,
                feature_bins,
                score_bins,
            }) => format!("quantile({feature}:{feature_bins}x{score_bins})"),
            Err(_) => self.method.clone(),
        }
    }

    /// Builds the partition and merges tiny strata.
    pub fn build(&self, pool: &Pool) -> Result<Stratification> {
        if !(0.0..1.0).contains(&self.min_frac) {
            return Err(Error::Config(format!("min_frac {} outside [0, 1)", self.min_frac)));
        }
        let raw = match self.method()? {
            StrataMethod::Categorical { attr } => build_categorical_strata(pool, &attr)?,
            StrataMethod::Cross { attrs } => {
                let names: Vec<&str> = attrs.iter().map(String::as_str).collect();
                build_cross_strata(pool, &names)?
            }
            StrataMethod::Quantile {
                feature,
                feature_bins,
                score_bins,
            } => build_quantile_strata(pool, &feature, feature_bins, score_bins)?,
        };
        merge_small_strata(&raw, pool, self.min_count, self.min_frac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalConfig {
    pub family: TransformFamily,
    pub alpha: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

impl ProposalConfig {
    pub fn transform(&self) -> Result<ScoreTransform> {
        ScoreTransform::new(self.family, self.floor).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build<T: Scalar>(&self, pool: &Pool) -> Result<Proposal<T>> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {} must be >= 0", self.alpha)));
        }
        build_proposal(pool, &self.transform()?, self.alpha)
    }
}

/// One proposal or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProposalConfigs {
    One(ProposalConfig),
    Many(Vec<ProposalConfig>),
}

impl ProposalConfigs {
    pub fn as_slice(&self) -> &[ProposalConfig] {
        match self {
            ProposalConfigs::One(p) => std::slice::from_ref(p),
            ProposalConfigs::Many(ps) => ps,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn proposals(&self) -> &[ProposalConfig] {
        self.proposal.as_ref().map(ProposalConfigs::as_slice).unwrap_or(&[])
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.designs.is_empty() {
            return fail("designs must not be empty".into());
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return fail("budgets must be a non-empty list of positive integers".into());
        }
        if self.replications < 2 {
            return fail(format!("replications must be at least 2, got {}", self.replications));
        }
        if self.designs.iter().any(|d| d.is_stratified()) && self.strata.is_none() {
            return fail("SRS/SIS designs need a `strata` section".into());
        }
        if self.designs.iter().any(|d| d.uses_proposal()) && self.proposals().is_empty() {
            return fail("IS/SIS designs need a `proposal` section".into());
        }
        if let Some(s) = &self.strata {
            s.method()?;
        }
        for p in self.proposals() {
            p.transform()?;
            if !(p.alpha >= 0.0 && p.alpha.is_finite()) {
                return fail(format!("alpha {} must be >= 0", p.alpha));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "designs": ["RS", "SRS", "IS", "SIS"],
        "budgets": [3],
        "replications": 10,
        "seed": 7,
        "strata": {"method": "categorical", "params": {"attr": "stratum"}, "min_count": 0, "min_frac": 0.0},
        "proposal": {"family": "raw_score", "alpha": 1.0}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = SimConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.designs.len(), 4);
        assert_eq!(cfg.proposals()[0].floor, DEFAULT_FLOOR);
        assert_eq!(cfg.strata.as_ref().unwrap().describe(), "categorical(stratum)");
    }

    #[test]
    fn defaults() {
        let cfg = SimConfig::from_json(r#"{"designs":["RS"],"budgets":[5],"seed":1}"#).unwrap();
        assert_eq!(cfg.replications, DEFAULT_REPLICATIONS);
        let s: StrataConfig = serde_json::from_str(r#"{"method":"categorical","params":{"attr":"a"}}"#).unwrap();
        assert_eq!((s.min_count, s.min_frac), (3, 0.005));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = SimConfig::from_json(r#"{"designs":["RS"],"budgets":[5],"seed":1,"replicas":3}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = SimConfig::from_json(
            r#"{"designs":["SRS"],"budgets":[5],"seed":1,"strata":{"method":"categorical","params":{"attr":"a","bins":2}}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bins"));
        assert!(SimConfig::from_json(
            r#"{"designs":["IS"],"budgets":[5],"seed":1,"proposal":{"family":"raw_score","alpha":1,"beta":2}}"#
        )
        .is_err());
    }

    #[test]
    fn semantic_validation() {
        let bad = [
            r#"{"designs":[],"budgets":[5],"seed":1}"#,
            r#"{"designs":["RS"],"budgets":[],"seed":1}"#,
            r#"{"designs":["RS"],"budgets":[5],"seed":1,"replications":1}"#,
            r#"{"designs":["SRS"],"budgets":[5],"seed":1}"#,
            r#"{"designs":["IS"],"budgets":[5],"seed":1}"#,
            r#"{"designs":["IS"],"budgets":[5],"seed":1,"proposal":{"family":"raw_score","alpha":-1}}"#,
            r#"{"designs":["SRS"],"budgets":[5],"seed":1,"strata":{"method":"kmeans"}}"#,
            r#"{"designs":["XS"],"budgets":[5],"seed":1}"#,
        ];
        for text in bad {
            assert!(matches!(SimConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn proposal_list() {
        let cfg = SimConfig::from_json(
            r#"{"designs":["IS"],"budgets":[5],"seed":1,"proposal":[{"family":"raw_score","alpha":0.5},{"family":"margin","alpha":1}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.proposals().len(), 2);
        assert_eq!(cfg.proposals()[1].family, TransformFamily::Margin);
    }

    #[test]
    fn quantile_and_cross_methods() {
        let q: StrataConfig = serde_json::from_str(
            r#"{"method":"quantile","params":{"feature":"perimeter","feature_bins":4,"score_bins":3}}"#,
        )
        .unwrap();
        assert_eq!(q.describe(), "quantile(perimeter:4x3)");
        let c: StrataConfig =
            serde_json::from_str(r#"{"method":"cross","params":{"attrs":["pred_label","brightness"]}}"#).unwrap();
        assert!(matches!(c.method().unwrap(), StrataMethod::Cross { attrs } if attrs.len() == 2));
    }
}
