use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::checkpoint::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamClass {
    Weight,
    Bias,
    Excluded,
}

impl fmt::Display for ParamClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamClass::Weight => "weight",
            ParamClass::Bias => "bias",
            ParamClass::Excluded => "excluded",
        })
    }
}

/// Regex rules mapping tensor names to a [`ParamClass`].
///
/// Precedence: exclude patterns, then the include filter (if any), then bias
/// patterns; everything left is a weight. Normalization parameters are
/// excluded by default, including their shift terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationRules {
    pub bias_patterns: Vec<String>,
    pub exclude_patterns: Vec<String>,
    /// When set, tensors matching none of these are excluded.
    pub include_patterns: Option<Vec<String>>,
}

impl Default for ClassificationRules {
    fn default() -> Self {
        ClassificationRules {
            bias_patterns: vec![r"\.bias$".to_string()],
            exclude_patterns: vec![
                r"(^|\.)(bn|norm|ln|batchnorm|batch_norm|layernorm|layer_norm|groupnorm|group_norm)[^.]*\.(weight|bias)$"
                    .to_string(),
                r"\.(running_mean|running_var|num_batches_tracked)$".to_string(),
            ],
            include_patterns: None,
        }
    }
}

impl ClassificationRules {
    /// Reads rules from TOML, or JSON for `.json` files. Patterns are
    /// compiled to catch errors early.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rules: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        rules.compile()?;
        Ok(rules)
    }

    pub fn compile(&self) -> Result<Classifier> {
        fn build(patterns: &[String]) -> Result<Vec<Regex>> {
            patterns
                .iter()
                .map(|p| {
                    Regex::new(p).map_err(|e| Error::Pattern {
                        pattern: p.clone(),
                        reason: e.to_string(),
                    })
                })
                .collect()
        }
        Ok(Classifier {
            bias: build(&self.bias_patterns)?,
            exclude: build(&self.exclude_patterns)?,
            include: self.include_patterns.as_deref().map(build).transpose()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    bias: Vec<Regex>,
    exclude: Vec<Regex>,
    include: Option<Vec<Regex>>,
}

impl Classifier {
    pub fn classify(&self, name: &str) -> ParamClass {
        if self.exclude.iter().any(|r| r.is_match(name)) {
            return ParamClass::Excluded;
        }
        if let Some(include) = &self.include {
            if !include.iter().any(|r| r.is_match(name)) {
                return ParamClass::Excluded;
            }
        }
        if self.bias.iter().any(|r| r.is_match(name)) {
            ParamClass::Bias
        } else {
            ParamClass::Weight
        }
    }
}

pub fn classify_params(cp: &Checkpoint, rules: &ClassificationRules) -> Result<BTreeMap<String, ParamClass>> {
    let classifier = rules.compile()?;
    Ok(cp.names().map(|n| (n.to_string(), classifier.classify(n))).collect())
}
