//! `family:param[,param]` model specifications.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use entbound_core::PmfModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    text: String,
    model: PmfModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub token: String,
    pub reason: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad model token '{}': {}", self.token, self.reason)
    }
}

impl std::error::Error for SpecError {}

fn bad(token: &str, reason: impl Into<String>) -> SpecError {
    SpecError {
        token: token.to_string(),
        reason: reason.into(),
    }
}

fn params<const N: usize>(family: &str, raw: &str) -> Result<[f64; N], SpecError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(bad(
            raw,
            format!("{family} takes {N} parameter(s), got {}", parts.len()),
        ));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.parse::<f64>().map_err(|_| bad(part, "not a number"))?;
    }
    Ok(out)
}

impl ModelSpec {
    pub fn model(&self) -> &PmfModel {
        &self.model
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl FromStr for ModelSpec {
    type Err = SpecError;

    fn from_str(text: &str) -> Result<Self, SpecError> {
        let text = text.trim();
        let (family, raw) = text
            .split_once(':')
            .ok_or_else(|| bad(text, "expected family:params"))?;
        let family = family.trim();
        let invalid = |e: entbound_core::Error| bad(raw, e.to_string());
        let model = match family.to_ascii_lowercase().as_str() {
            "poisson" => {
                let [rate] = params::<1>(family, raw)?;
                PmfModel::poisson(rate).map_err(invalid)?
            }
            "geometric" => {
                let [p] = params::<1>(family, raw)?;
                PmfModel::geometric(p).map_err(invalid)?
            }
            "negbinomial" => {
                let [size, p] = params::<2>(family, raw)?;
                PmfModel::negative_binomial(size, p).map_err(invalid)?
            }
            "zeta" => {
                let [s] = params::<1>(family, raw)?;
                PmfModel::zeta(s).map_err(invalid)?
            }
            "tabulated" => {
                let path = raw.trim();
                if path.is_empty() {
                    return Err(bad(text, "tabulated needs a file path"));
                }
                let body = std::fs::read_to_string(Path::new(path))
                    .map_err(|e| bad(path, format!("cannot read: {e}")))?;
                PmfModel::from_tabulated_json(&body).map_err(|e| bad(path, e.to_string()))?
            }
            _ => {
                return Err(bad(
                    family,
                    "unknown family (poisson, geometric, negbinomial, zeta, tabulated)",
                ))
            }
        };
        Ok(ModelSpec {
            text: text.to_string(),
            model,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}
