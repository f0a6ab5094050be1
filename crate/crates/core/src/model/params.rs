use crate::error::{Error, Result};

/// Scalar parameters of the aggregated model.
///
/// `beta_j` is the chronic-carrier infectiousness, the small parameter `ε`
/// of the perturbation experiments. The exit rates `nu_i` and `nu_j` are
/// primitive; how they split into death and recovery does not matter here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    lambda_influx: f64,
    mu: f64,
    beta_i: f64,
    beta_j: f64,
    nu_i: f64,
    nu_j: f64,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(name, v, "a finite value > 0"))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::domain(name, v, "a finite value >= 0"))
    }
}

impl ModelParams {
    pub fn new(
        lambda_influx: f64,
        mu: f64,
        beta_i: f64,
        beta_j: f64,
        nu_i: f64,
        nu_j: f64,
    ) -> Result<Self> {
        Ok(Self {
            lambda_influx: positive("lambda_influx", lambda_influx)?,
            mu: positive("mu", mu)?,
            beta_i: positive("beta_I", beta_i)?,
            beta_j: non_negative("beta_J", beta_j)?,
            nu_i: positive("nu_I", nu_i)?,
            nu_j: positive("nu_J", nu_j)?,
        })
    }

    /// Desk-scale reference configuration: `R0 ≈ 46.35` with `β_J = 0`.
    pub fn reference() -> Self {
        Self {
            lambda_influx: 1.0,
            mu: 0.02,
            beta_i: 0.5,
            beta_j: 0.0,
            nu_i: 0.5,
            nu_j: 0.1,
        }
    }

    pub fn with_beta_j(self, beta_j: f64) -> Result<Self> {
        Ok(Self {
            beta_j: non_negative("beta_J", beta_j)?,
            ..self
        })
    }

    pub fn with_beta_i(self, beta_i: f64) -> Result<Self> {
        Ok(Self {
            beta_i: positive("beta_I", beta_i)?,
            ..self
        })
    }

    /// Degenerate copy with `Λ = 0`. Only meaningful for probing the
    /// dissipativity bound; it is not an admissible epidemic configuration.
    pub fn without_influx(self) -> Self {
        Self {
            lambda_influx: 0.0,
            ..self
        }
    }

    pub fn lambda_influx(&self) -> f64 {
        self.lambda_influx
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta_i(&self) -> f64 {
        self.beta_i
    }

    pub fn beta_j(&self) -> f64 {
        self.beta_j
    }

    pub fn nu_i(&self) -> f64 {
        self.nu_i
    }

    pub fn nu_j(&self) -> f64 {
        self.nu_j
    }

    /// `min(μ, ν_I, ν_J)`, the decay rate of the dissipativity bound.
    pub fn nu_min(&self) -> f64 {
        self.mu.min(self.nu_i).min(self.nu_j)
    }

    /// Force of infection `β_I I + β_J J`.
    pub fn force(&self, acute: f64, chronic: f64) -> f64 {
        self.beta_i * acute + self.beta_j * chronic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_domain_values() {
        assert!(matches!(
            ModelParams::new(1.0, 0.02, -1.0, 0.0, 0.5, 0.1),
            Err(Error::ParameterDomain { name: "beta_I", .. })
        ));
        assert!(ModelParams::new(0.0, 0.02, 0.5, 0.0, 0.5, 0.1).is_err());
        assert!(ModelParams::new(1.0, 0.02, 0.5, -1e-3, 0.5, 0.1).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 0.5, 0.0, 0.5, 0.1).is_err());
        assert!(ModelParams::new(1.0, 0.02, 0.5, 0.0, 0.5, 0.1).is_ok());
    }

    #[test]
    fn nu_min_is_smallest_rate() {
        let p = ModelParams::reference();
        assert_eq!(p.nu_min(), 0.02);
        let p = ModelParams::new(1.0, 0.3, 0.5, 0.0, 0.5, 0.1).unwrap();
        assert_eq!(p.nu_min(), 0.1);
    }
}
