use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Theory,
    Practical,
}

/// Algorithm parameters.
///
/// In theory mode every field follows from `(epsilon, d, rho, ell)`; in
/// practical mode they are set directly and only the structural invariants
/// are enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub mode: Mode,
    pub epsilon: f64,
    pub d: u64,
    /// Conductance threshold for accepting a cluster.
    pub phi: f64,
    /// Truncation threshold for diffusion.
    pub rho: f64,
    /// Maximum diffusion length.
    pub ell: u64,
    /// Per-phase firing probability.
    pub delta: f64,
    /// Number of phases.
    pub hbar: u64,
    /// Independence parameter of every hash family.
    pub b: u64,
    /// Number of findr draws per phase.
    pub sample_budget: u64,
    /// Largest cluster-size threshold tried by findr.
    pub k_max: u64,
}

impl Params {
    pub const PRACTICAL_PHI: f64 = 0.4;

    /// Desk-scale defaults for degree bound `d`.
    pub fn practical(d: u64) -> Self {
        let rho = 0.02;
        let delta = 0.05;
        Self {
            mode: Mode::Practical,
            epsilon: 0.5,
            d,
            phi: Self::PRACTICAL_PHI,
            rho,
            ell: 20,
            delta,
            hbar: hbar_for(delta),
            b: 16,
            sample_budget: 8,
            k_max: k_max_for(rho),
        }
    }

    /// Theory-mode parameters. Fails with an overflow error when the derived
    /// quantities do not fit the integer fields; use
    /// [`TheoryLedger`](super::ledger::TheoryLedger) for exact accounting at
    /// any magnitude.
    pub fn theory(epsilon: f64, d: u64, rho: f64, ell: u64) -> Result<Self> {
        let shape = TheoryShape::new(epsilon, d, rho, ell)?;
        let to_u64 = |name: &str, x: f64| -> Result<u64> {
            if x.is_finite() && x <= u64::MAX as f64 {
                Ok(x as u64)
            } else {
                Err(Error::Overflow(format!("{name} = {x:e} does not fit in 64 bits")))
            }
        };
        let params = Self {
            mode: Mode::Theory,
            epsilon,
            d,
            phi: shape.phi,
            rho,
            ell,
            delta: shape.delta,
            hbar: to_u64("hbar", shape.hbar)?,
            b: to_u64("b", shape.b)?,
            sample_budget: to_u64("sample_budget", shape.sample_budget)?,
            k_max: k_max_for(rho),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn beta(&self) -> f64 {
        self.epsilon / 10.0
    }

    /// Size cap on any component, `ell / rho`.
    pub fn max_component(&self) -> f64 {
        self.ell as f64 / self.rho
    }

    /// Powers of two up to `k_max`.
    pub fn k_ladder(&self) -> Vec<u64> {
        std::iter::successors(Some(1u64), |k| k.checked_mul(2))
            .take_while(|&k| k <= self.k_max)
            .collect()
    }

    /// Minimum number of good timesteps for viability:
    /// `ceil(beta / log2(1/beta)^2 * ell)`.
    pub fn viability_threshold(&self) -> u64 {
        let beta = self.beta();
        let l = (1.0 / beta).log2();
        ((beta / (l * l)) * self.ell as f64).ceil() as u64
    }

    /// Minimum `|cluster ∩ F|` for a good timestep, `beta^3 * k`.
    pub fn capture_threshold(&self, k: u64) -> f64 {
        self.beta().powi(3) * k as f64
    }

    /// findr acceptance count, `max(1, ceil(12 beta^4 |S_h|))`.
    pub fn findr_threshold(&self, sampled: usize) -> usize {
        let t = (12.0 * self.beta().powi(4) * sampled as f64).ceil() as usize;
        t.max(1)
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {} not in (0, 1)", self.epsilon));
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho = {} not in (0, 1)", self.rho));
        }
        if self.ell == 0 {
            return bad("ell must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta = {} not in [0, 1]", self.delta));
        }
        if self.delta > 0.0 && self.hbar != hbar_for(self.delta) {
            return bad(format!(
                "hbar = {} but ceil(2/delta) = {}",
                self.hbar,
                hbar_for(self.delta)
            ));
        }
        if self.hbar == 0 || self.hbar > u32::MAX as u64 {
            return bad(format!("hbar = {} outside 1..=2^32-1", self.hbar));
        }
        if self.b == 0 {
            return bad("b must be positive".into());
        }
        if !(self.phi >= 0.0) {
            return bad(format!("phi = {} must be nonnegative", self.phi));
        }
        if self.k_max == 0 {
            return bad("k_max must be positive".into());
        }
        Ok(())
    }
}

pub fn hbar_for(delta: f64) -> u64 {
    (2.0 / delta).ceil() as u64
}

/// Default ladder bound, `2 * ceil(1/rho)`.
pub fn k_max_for(rho: f64) -> u64 {
    2 * (1.0 / rho).ceil() as u64
}

/// Real-valued theory-mode quantities before any integer conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryShape {
    pub beta: f64,
    pub phi: f64,
    pub delta: f64,
    pub hbar: f64,
    pub b: f64,
    pub sample_budget: f64,
}

impl TheoryShape {
    pub fn new(epsilon: f64, d: u64, rho: f64, ell: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) || d == 0 || !(rho > 0.0 && rho < 1.0) || ell == 0 {
            return Err(Error::Params(format!(
                "theory mode needs epsilon, rho in (0,1), d, ell >= 1; got {epsilon}, {d}, {rho}, {ell}"
            )));
        }
        let beta = epsilon / 10.0;
        let d4 = (d as f64).powi(4);
        // delta * ell / rho = epsilon^100 / d^4
        let delta = epsilon.powi(100) * rho / (d4 * ell as f64);
        if delta == 0.0 {
            return Err(Error::Overflow(format!(
                "delta underflows for epsilon = {epsilon}, d = {d}"
            )));
        }
        Ok(Self {
            beta,
            phi: epsilon.powi(10) / d as f64,
            delta,
            hbar: (2.0 / delta).ceil(),
            b: (4.0 * ell as f64 / rho).ceil().max((4.0 / beta.powi(10)).ceil()),
            sample_budget: beta.powi(-10).ceil(),
        })
    }
}
