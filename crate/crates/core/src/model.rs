use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

/// A GI/GI/1 queue in which every completed service is fed back to the tail
/// of the queue with probability `feedback_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arrival: DistributionSpec,
    pub service: DistributionSpec,
    pub feedback_p: f64,
}

/// Constants derived from the first moments of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Mean inter-arrival time.
    pub a: f64,
    /// Mean service time.
    pub b: f64,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    /// Branching rate `p + λb` of the queue behind the tagged customer.
    pub r: f64,
    /// Traffic intensity `λb / q`.
    pub rho: f64,
    /// `b / (q·a)`; algebraically equal to `rho`.
    pub rho_aux: f64,
    /// Mean compounded service `b / q`.
    pub b_h: f64,
    /// `λb / (1 − r)`, the limit of the fluid multipliers.
    pub m_inf: f64,
    pub stable: bool,
}

impl ModelParams {
    pub fn new(arrival: DistributionSpec, service: DistributionSpec, feedback_p: f64) -> Result<Self> {
        let m = Self {
            arrival,
            service,
            feedback_p,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.feedback_p) {
            return Err(Error::invalid("feedback_p", "feedback_p must lie in [0,1)"));
        }
        self.arrival.validate()?;
        self.service.validate()?;
        if self.arrival.mean()? <= 0.0 {
            return Err(Error::invalid("arrival", "mean inter-arrival time must be > 0"));
        }
        if self.service.mean()? <= 0.0 {
            return Err(Error::invalid("service", "mean service time must be > 0"));
        }
        Ok(())
    }

    /// True when inter-arrival times are exponential.
    pub fn has_poisson_arrivals(&self) -> bool {
        matches!(self.arrival, DistributionSpec::Exponential { .. })
    }

    /// Service law is heavy-tailed but not intermediate regularly varying;
    /// asymptotic comparisons for such models are diagnostics only.
    pub fn diagnostic_warning(&self) -> Option<String> {
        self.service.is_diagnostic_only().then(|| {
            format!(
                "service law {} is not intermediate regularly varying; asymptotes are diagnostic only",
                self.service
            )
        })
    }

    pub fn derive_constants(&self) -> Result<DerivedConstants> {
        self.validate()?;
        let a = self.arrival.mean()?;
        let b = self.service.mean()?;
        let p = self.feedback_p;
        let q = 1.0 - p;
        let lambda = 1.0 / a;
        let r = p + lambda * b;
        let rho = lambda * b / q;
        Ok(DerivedConstants {
            a,
            b,
            lambda,
            p,
            q,
            r,
            rho,
            rho_aux: b / (q * a),
            b_h: b / q,
            m_inf: lambda * b / (1.0 - r),
            stable: rho < 1.0,
        })
    }

    /// Derived constants, failing unless the queue is stable.
    pub fn stable_constants(&self) -> Result<DerivedConstants> {
        let c = self.derive_constants()?;
        if !c.stable {
            return Err(Error::Instability { rho: c.rho });
        }
        Ok(c)
    }
}
