use crate::error::{Error, Result};

/// Which infected class a newly infected individual enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    /// Develops acute disease (`p_I`).
    Acute,
    /// Becomes a chronic carrier (`p_J`).
    Chronic,
}

/// Age-dependent split of new infections: `p_J(a) = κ e^{−r a}`,
/// `p_I(a) = 1 − p_J(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityProfile {
    kappa: f64,
    rate: f64,
}

pub fn make_profile(kappa: f64, rate: f64) -> Result<SusceptibilityProfile> {
    SusceptibilityProfile::new(kappa, rate)
}

/// `p*[e^{−c·}] = ∫_0^∞ p(a) e^{−c a} da` in closed form.
pub fn dual_exp(profile: &SusceptibilityProfile, which: Class, c: f64) -> Result<f64> {
    profile.dual_exp(which, c)
}

impl SusceptibilityProfile {
    pub fn new(kappa: f64, rate: f64) -> Result<Self> {
        if !(kappa.is_finite() && (0.0..=1.0).contains(&kappa)) {
            return Err(Error::domain("kappa", kappa, "a value in [0, 1]"));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::domain("rate", rate, "a finite value > 0"));
        }
        Ok(Self { kappa, rate })
    }

    /// Fitted instance `p_J(a) = 0.643 e^{−0.156 a}`.
    pub fn fitted() -> Self {
        Self {
            kappa: 0.643,
            rate: 0.156,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(kappa, self.rate)
    }

    pub fn chronic(&self, a: f64) -> f64 {
        self.kappa * (-self.rate * a).exp()
    }

    pub fn acute(&self, a: f64) -> f64 {
        1.0 - self.chronic(a)
    }

    pub fn prob(&self, which: Class, a: f64) -> f64 {
        match which {
            Class::Acute => self.acute(a),
            Class::Chronic => self.chronic(a),
        }
    }

    pub fn dual_exp(&self, which: Class, c: f64) -> Result<f64> {
        if !(c > 0.0) || c.is_nan() {
            return Err(Error::DivergentIntegral { c });
        }
        let (k, r) = (self.kappa, self.rate);
        Ok(match which {
            Class::Chronic => k / (c + r),
            // 1/c − κ/(c+r) written without cancellation.
            Class::Acute => ((1.0 - k) * c + r) / (c * (c + r)),
        })
    }

    /// Exact `∫_lo^{lo+width} p(a) da`.
    pub fn cell_integral(&self, which: Class, lo: f64, width: f64) -> f64 {
        let chronic =
            self.kappa * (-self.rate * lo).exp() * -(-self.rate * width).exp_m1() / self.rate;
        match which {
            Class::Chronic => chronic,
            Class::Acute => width - chronic,
        }
    }
}
