//! Closed-form lower bounds on `rho(pi) - rho(pi_b)`.
//!
//! Every bound is `<= 0`. The PQI bound is only known up to constants; it
//! is evaluated with all hidden constants set to 1.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::estimation::CountTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub v_max: f64,
    pub gamma: f64,
    pub n_wedge: u64,
    pub delta: f64,
    pub c_n_wedge: u64,
    pub m_r_n_wedge: u64,
    pub epsilon_r: f64,
    pub num_states: usize,
    pub num_actions: usize,
    pub b: f64,
    pub dataset_size: u64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            gamma: 0.9,
            n_wedge: 1,
            delta: 0.05,
            c_n_wedge: 1,
            m_r_n_wedge: 1,
            epsilon_r: 0.0,
            num_states: 1,
            num_actions: 1,
            b: 0.02,
            dataset_size: 1,
        }
    }
}

impl BoundInputs {
    fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(config_err(format!("delta {} outside (0, 1]", self.delta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(config_err(format!("discount {} outside [0, 1)", self.gamma)));
        }
        if !(self.v_max >= 0.0) || !self.v_max.is_finite() {
            return Err(config_err("v_max must be finite and nonnegative"));
        }
        Ok(())
    }

    fn horizon_scale(&self) -> f64 {
        self.v_max / (1.0 - self.gamma)
    }

    fn n_wedge_pos(&self) -> Result<f64> {
        if self.n_wedge == 0 {
            return Err(config_err("n_wedge must be at least 1"));
        }
        Ok(self.n_wedge as f64)
    }
}

/// Constant inside the square root of the discrete bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteForm {
    /// `1 / N` (the conservative form).
    #[default]
    Statement,
    /// `1 / (2N)`.
    Halved,
}

/// `-(V_max / (1-gamma)) * sqrt((1/N) * ln(C / delta))`; 0 when `C = 0`.
pub fn dprl_discrete_bound(inputs: &BoundInputs, form: DiscreteForm) -> Result<f64> {
    inputs.check()?;
    let n = inputs.n_wedge_pos()?;
    if inputs.c_n_wedge == 0 {
        return Ok(0.0);
    }
    let scale = match form {
        DiscreteForm::Statement => 1.0 / n,
        DiscreteForm::Halved => 1.0 / (2.0 * n),
    };
    let log = (inputs.c_n_wedge as f64 / inputs.delta).ln();
    Ok(-inputs.horizon_scale() * (scale * log).sqrt())
}

/// Number of pairs with at least `n_wedge` visits.
pub fn count_c_n_wedge(counts: &CountTable, n_wedge: u64) -> u64 {
    counts.pairs().iter().filter(|&&n| n >= n_wedge).count() as u64
}

/// `-(V_max / (1-gamma)) * sqrt(ln(M / delta) / (2N)) - 3 eps_r`.
pub fn dprl_continuous_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check()?;
    let n = inputs.n_wedge_pos()?;
    if inputs.m_r_n_wedge == 0 {
        return Err(config_err("covering number must be at least 1"));
    }
    if !(inputs.epsilon_r >= 0.0) {
        return Err(config_err("epsilon_r must be nonnegative"));
    }
    let log = (inputs.m_r_n_wedge as f64 / inputs.delta).ln();
    Ok(-inputs.horizon_scale() * (log / (2.0 * n)).sqrt() - 3.0 * inputs.epsilon_r)
}

/// `-(4 V_max / (1-gamma)) * sqrt((2/N) * ln(2 |S| |A| 2^|S| / delta))`,
/// with the logarithm expanded so `2^|S|` never materializes.
pub fn spibb_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check()?;
    let n = inputs.n_wedge_pos()?;
    let (s, a) = (inputs.num_states as f64, inputs.num_actions as f64);
    let log = (2.0 * s * a).ln() + s * std::f64::consts::LN_2 - inputs.delta.ln();
    Ok(-4.0 * inputs.horizon_scale() * (2.0 / n * log).sqrt())
}

/// Effective horizon `ceil(1 / (1 - gamma))`. A relative slack absorbs
/// rounding, so `gamma = 0.9` gives 10 rather than 11.
pub fn effective_horizon(gamma: f64) -> u64 {
    let h = 1.0 / (1.0 - gamma);
    (h * (1.0 - 1e-12)).ceil() as u64
}

/// PQI bound up to constants:
/// `-(L V/(b(1-g)^3) * SA/n + L V/(b(1-g)^3) * sqrt(SA/n) + g^K V/(1-g)^2)`
/// with `L = ln(SA/delta)` and `K` the effective horizon.
pub fn pqi_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check()?;
    if !(inputs.b > 0.0) {
        return Err(config_err("density threshold must be positive"));
    }
    if inputs.dataset_size == 0 {
        return Err(config_err("dataset size must be at least 1"));
    }
    let g = inputs.gamma;
    let sa = (inputs.num_states * inputs.num_actions) as f64;
    let ratio = sa / inputs.dataset_size as f64;
    let log = (sa / inputs.delta).ln();
    let lead = inputs.v_max / (inputs.b * (1.0 - g).powi(3));
    let k = effective_horizon(g);
    let tail = g.powf(k as f64) * inputs.v_max / (1.0 - g).powi(2);
    Ok(-(lead * ratio * log + lead * ratio.sqrt() * log + tail))
}

/// Count-pessimism bound with the expectation taken over the empirical pair
/// frequencies of `counts`.
pub fn count_pessimism_bound(counts: &CountTable, inputs: &BoundInputs) -> Result<f64> {
    inputs.check()?;
    let total: u64 = counts.pairs().iter().sum();
    if total == 0 {
        return Err(config_err("count table is empty"));
    }
    let sa = (counts.num_states * counts.num_actions) as f64;
    let log = (sa / inputs.delta).ln();
    let expectation: f64 = counts
        .pairs()
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| n as f64 / total as f64 * (2.0 / n as f64 * log).sqrt().min(1.0))
        .sum();
    let g = inputs.gamma;
    Ok(-g * inputs.v_max / (1.0 - g).powi(2) * expectation)
}
