//! Bundled reference data sets and a plain-text reader.

use serde::{Deserialize, Serialize};

use crate::error::{EwlError, Result};

const FATIGUE: &str = include_str!("../data/fatigue.txt");
const CARBON_FIBER: &str = include_str!("../data/carbon_fiber.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub values: Vec<f64>,
    pub source_path: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, values: Vec<f64>, source_path: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(EwlError::domain(format!("data set '{name}' has no observations")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(EwlError::domain(format!(
                "data set '{name}': value {} is {v}; observations must be positive and finite",
                i + 1
            )));
        }
        Ok(Dataset {
            name,
            values,
            source_path: source_path.into(),
        })
    }
}

/// Parses whitespace- or comma-separated numbers; `#` starts a comment.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| {
                EwlError::domain(format!("line {}: '{tok}' is not a number", line_no + 1))
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Fatigue life of aluminum coupons at 31,000 psi (thousands of cycles), n = 101.
pub fn fatigue() -> Dataset {
    Dataset::new("fatigue", parse_values(FATIGUE).expect("bundled data parses"), "builtin:fatigue")
        .expect("bundled data is valid")
}

/// Tensile strength of single carbon fibers at 10 mm gauge length (GPa), n = 63.
pub fn carbon_fiber() -> Dataset {
    Dataset::new(
        "carbon-fiber",
        parse_values(CARBON_FIBER).expect("bundled data parses"),
        "builtin:carbon-fiber",
    )
    .expect("bundled data is valid")
}

/// Looks up a bundled data set by name (`fatigue`, `carbon-fiber`).
pub fn builtin(name: &str) -> Option<Dataset> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "fatigue" => Some(fatigue()),
        "carbon-fiber" | "carbon" => Some(carbon_fiber()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sizes() {
        let f = fatigue();
        assert_eq!(f.values.len(), 101);
        let mean = f.values.iter().sum::<f64>() / 101.0;
        assert!((mean - 133.7327).abs() < 1e-3, "{mean}");
        assert_eq!(carbon_fiber().values.len(), 63);
        assert!(builtin("Carbon_Fiber").is_some());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn parser_handles_comments_and_commas() {
        assert_eq!(parse_values("# head\n1, 2.5\n 3 # tail\n\n").unwrap(), vec![1.0, 2.5, 3.0]);
        assert!(parse_values("1 x").is_err());
    }

    #[test]
    fn dataset_rejects_nonpositive() {
        assert!(Dataset::new("d", vec![1.0, 0.0], "-").is_err());
        assert!(Dataset::new("d", vec![], "-").is_err());
    }
}
