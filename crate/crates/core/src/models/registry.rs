//! Built-in models addressable by name with string parameter maps.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::objective::Objective;

use super::gaussian::{random_spd, IsotropicGaussian, Quadratic};
use super::glmm::BinaryGlmm;
use super::gompertz::{gompertz_sample, GompertzPosterior};
use super::skew_t::SkewTParams;

pub const MODEL_NAMES: [&str; 5] = [
    "gaussian",
    "quadratic",
    "skew-t",
    "gompertz-posterior",
    "glmm-binary",
];

pub type ModelParams = BTreeMap<String, String>;

/// A registered model ready to integrate.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub name: String,
    /// Parameters actually used, defaults filled in.
    pub params: ModelParams,
    pub objective: Objective,
    pub start: Vec<f64>,
    /// `log ∫ exp(-h)` when known independently of the engine.
    pub log_truth: Option<f64>,
}

struct Reader<'a> {
    given: &'a ModelParams,
    used: ModelParams,
}

impl<'a> Reader<'a> {
    fn new(given: &'a ModelParams) -> Self {
        Self {
            given,
            used: ModelParams::new(),
        }
    }

    fn optional<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr + ToString,
    {
        let Some(raw) = self.given.get(key) else {
            return Ok(None);
        };
        let value = raw.trim().parse::<T>().map_err(|_| {
            Error::InvalidParameter(format!("cannot parse parameter {key}={raw}"))
        })?;
        self.used.insert(key.to_string(), value.to_string());
        Ok(Some(value))
    }

    fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr + ToString,
    {
        match self.optional(key)? {
            Some(v) => Ok(v),
            None => {
                self.used.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    /// `seed` is accepted by every model so that runs can always record one.
    fn finish(mut self, model: &str) -> Result<ModelParams> {
        if let Some(seed) = self.given.get("seed") {
            if !self.used.contains_key("seed") {
                let seed = seed.trim().parse::<u64>().map_err(|_| {
                    Error::InvalidParameter(format!("cannot parse parameter seed={seed}"))
                })?;
                self.used.insert("seed".into(), seed.to_string());
            }
        }
        if let Some(extra) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(Error::InvalidParameter(format!(
                "model {model} does not take parameter `{extra}`"
            )));
        }
        Ok(self.used)
    }
}

fn positive_dim(dim: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be at least 1".into()));
    }
    Ok(dim)
}

/// Builds model `name` from `params`.
///
/// | model | parameters (default) |
/// |---|---|
/// | `gaussian` | `dim` (2) |
/// | `quadratic` | `dim` (2), `rho` (1); or `cond` and `seed` for a random matrix |
/// | `skew-t` | `dim` (2), `a` (1.5), `c` (1.5), `nu` (3) |
/// | `gompertz-posterior` | `n` (20), `alpha` (2), `beta` (3), `seed` (1) |
/// | `glmm-binary` | `n` (10), `beta` (0.5), `sigma2` (1), `seed` (1) |
pub fn build_model(name: &str, params: &ModelParams) -> Result<ModelInstance> {
    let mut r = Reader::new(params);
    let (objective, start, log_truth) = match name {
        "gaussian" => {
            let dim = positive_dim(r.get("dim", 2usize)?)?;
            let m = IsotropicGaussian::new(dim);
            (m.objective(), vec![0.5; dim], Some(m.log_integral()))
        }
        "quadratic" => {
            let dim = positive_dim(r.get("dim", 2usize)?)?;
            let m = match r.optional::<f64>("cond")? {
                Some(cond) => {
                    if !(cond >= 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "condition number must be >= 1, got {cond}"
                        )));
                    }
                    let seed = r.get("seed", 1u64)?;
                    Quadratic::new(random_spd(dim, cond, seed))?
                }
                None => Quadratic::equicorrelated(dim, r.get("rho", 1.0f64)?)?,
            };
            (m.objective(), vec![0.5; dim], Some(m.log_integral()))
        }
        "skew-t" => {
            let dim = positive_dim(r.get("dim", 2usize)?)?;
            let p = SkewTParams::new(
                dim,
                r.get("a", 1.5)?,
                r.get("c", 1.5)?,
                r.get("nu", 3.0)?,
            )?;
            (p.objective(), vec![0.0; dim], Some(0.0))
        }
        "gompertz-posterior" => {
            let n = r.get("n", 20usize)?;
            let data = gompertz_sample(r.get("alpha", 2.0)?, r.get("beta", 3.0)?, n, r.get("seed", 1u64)?)?;
            let m = GompertzPosterior::new(data)?;
            (m.objective(), m.start(), None)
        }
        "glmm-binary" => {
            let n = r.get("n", 10usize)?;
            let m = BinaryGlmm::simulate(n, r.get("beta", 0.5)?, r.get("sigma2", 1.0)?, r.get("seed", 1u64)?)?;
            let truth = m.factorized_log_marginal(1e-10)?;
            (m.objective(), vec![0.0; n], Some(truth))
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(ModelInstance {
        name: name.to_string(),
        params: r.finish(name)?,
        objective,
        start,
        log_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> ModelParams {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn every_name_builds_with_defaults() {
        for name in MODEL_NAMES {
            let m = build_model(name, &ModelParams::new()).unwrap();
            assert_eq!(m.objective.dim(), m.start.len());
            assert!(m.objective.evaluate(&m.start).unwrap().is_finite());
        }
    }

    #[test]
    fn defaults_are_recorded() {
        let m = build_model("skew-t", &params(&[("dim", "10"), ("a", "4")])).unwrap();
        assert_eq!(m.params["dim"], "10");
        assert_eq!(m.params["c"], "1.5");
        assert_eq!(m.params["nu"], "3");
        assert_eq!(m.log_truth, Some(0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_model("nope", &ModelParams::new()),
            Err(Error::UnknownModel(_))
        ));
        assert!(build_model("gaussian", &params(&[("dim", "x")])).is_err());
        assert!(build_model("gaussian", &params(&[("nu", "3")])).is_err());
        assert!(build_model("gaussian", &params(&[("dim", "0")])).is_err());
        assert!(build_model("quadratic", &params(&[("cond", "0.5")])).is_err());
        assert!(build_model("gaussian", &params(&[("seed", "x")])).is_err());
        let g = build_model("gaussian", &params(&[("seed", "4")])).unwrap();
        assert_eq!(g.params["seed"], "4");
    }

    #[test]
    fn random_quadratic_uses_seed() {
        let p = params(&[("dim", "4"), ("cond", "100"), ("seed", "5")]);
        let a = build_model("quadratic", &p).unwrap();
        let b = build_model("quadratic", &p).unwrap();
        assert_eq!(a.log_truth, b.log_truth);
        assert_eq!(a.params["seed"], "5");
    }
}
