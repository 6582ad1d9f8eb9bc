use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use ilaplace::Strategy;

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Laplace,
    IlaplaceExact,
    IlaplaceApprox,
    Bruteforce,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Laplace,
        Method::IlaplaceExact,
        Method::IlaplaceApprox,
        Method::Bruteforce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Laplace => "laplace",
            Method::IlaplaceExact => "ilaplace-exact",
            Method::IlaplaceApprox => "ilaplace-approx",
            Method::Bruteforce => "bruteforce",
        }
    }

    pub fn strategy(self) -> Option<Strategy> {
        match self {
            Method::IlaplaceExact => Some(Strategy::Exact),
            Method::IlaplaceApprox => Some(Strategy::Approximate),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            // "ilaplace" alone means the exact strategy
            "ilaplace" => Ok(Method::IlaplaceExact),
            other => Method::ALL
                .into_iter()
                .find(|m| m.as_str() == other)
                .ok_or_else(|| BenchError::Usage(format!("unknown method `{other}`"))),
        }
    }
}

/// One approximation run, with everything needed to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub params: BTreeMap<String, String>,
    pub method: Method,
    pub log_i: f64,
    /// Empty unless the method computes re-normalization constants.
    pub log_c_q: Vec<f64>,
    pub log_truth: Option<f64>,
    pub wall_time_ms: u64,
    pub seed: Option<u64>,
    pub quad_rel_tol: f64,
    pub grad_tol: f64,
    pub permutation: String,
    pub threads: usize,
}

impl RunRecord {
    pub fn to_json_line(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(line: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(line)?)
    }
}
