use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_store::ClassificationRules;

use super::prune::PruneSpec;
use super::reinit::ReinitKind;
use super::utility::UtilityKind;

/// Percentages used in the reference experiments. Others are accepted but
/// flagged as non-standard.
pub const STANDARD_PERCENTS: [u32; 3] = [5, 10, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Each weight tensor prunes its own `floor(n*k)` entries.
    #[default]
    PerTensor,
    /// One selection over all weight tensors concatenated.
    Global,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-tensor" | "per_tensor" => Ok(Scope::PerTensor),
            "global" => Ok(Scope::Global),
            other => Err(Error::Config(format!("unknown scope `{other}`"))),
        }
    }
}

/// An experimental case tag: a percentage followed by a reinitialization
/// function, e.g. `10M` or `5MN`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CaseTag {
    pub percent: u32,
    pub reinit: ReinitKind,
}

impl CaseTag {
    pub fn k(&self) -> f64 {
        self.percent as f64 / 100.0
    }

    pub fn is_standard(&self) -> bool {
        STANDARD_PERCENTS.contains(&self.percent)
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.percent, self.reinit)
    }
}

impl FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config_tag(s)
    }
}

/// Parses `<percent><RF>`; whitespace between the parts is ignored.
pub fn parse_config_tag(tag: &str) -> Result<CaseTag> {
    let compact: String = tag.chars().filter(|c| !c.is_whitespace()).collect();
    let digits = compact.chars().take_while(char::is_ascii_digit).count();
    if digits == 0 {
        return Err(Error::BadTag(tag.to_string()));
    }
    let percent: u32 = compact[..digits].parse().map_err(|_| Error::BadTag(tag.to_string()))?;
    if percent == 0 || percent > 100 {
        return Err(Error::BadTag(tag.to_string()));
    }
    let reinit = compact[digits..].parse()?;
    Ok(CaseTag { percent, reinit })
}

/// A fully resolved surgery configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeryConfig {
    pub utility: UtilityKind,
    pub prune: PruneSpec,
    pub reinit: ReinitKind,
    pub scope: Scope,
    pub bias_reset: bool,
    pub seed: u64,
}

impl SurgeryConfig {
    /// Magnitude utility, floor-rounded proportional pruning, per-tensor
    /// scope, biases reset.
    pub fn from_tag(tag: CaseTag, seed: u64) -> Self {
        SurgeryConfig {
            utility: UtilityKind::Magnitude,
            prune: PruneSpec::proportional(tag.k()),
            reinit: tag.reinit,
            scope: Scope::PerTensor,
            bias_reset: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prune.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    #[serde(default)]
    pub utility: UtilityKind,
    pub prune: PruneSpec,
    pub reinit: ReinitKind,
    #[serde(default)]
    pub scope: Scope,
}

/// On-disk surgery configuration (TOML, or JSON for `.json` files).
///
/// Exactly one of `tag` and `explicit` must be given. Top-level `scope`
/// overrides the scope of either form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeryFile {
    pub tag: Option<String>,
    pub explicit: Option<ExplicitSpec>,
    pub scope: Option<Scope>,
    pub bias_reset: Option<bool>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub rules: ClassificationRules,
}

impl SurgeryFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json)
    }

    pub fn parse(text: &str, is_json: bool) -> Result<Self> {
        if is_json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn resolve(&self) -> Result<(SurgeryConfig, Option<CaseTag>)> {
        let seed = self.seed.unwrap_or(0);
        let (mut config, tag) = match (&self.tag, &self.explicit) {
            (Some(tag), None) => {
                let tag = parse_config_tag(tag)?;
                (SurgeryConfig::from_tag(tag, seed), Some(tag))
            }
            (None, Some(ex)) => (
                SurgeryConfig {
                    utility: ex.utility,
                    prune: ex.prune,
                    reinit: ex.reinit,
                    scope: ex.scope,
                    bias_reset: true,
                    seed,
                },
                None,
            ),
            _ => return Err(Error::Config("exactly one of `tag` or `explicit` is required".into())),
        };
        if let Some(scope) = self.scope {
            config.scope = scope;
        }
        if let Some(b) = self.bias_reset {
            config.bias_reset = b;
        }
        config.validate()?;
        Ok((config, tag))
    }
}
