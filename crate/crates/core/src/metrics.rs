//! SINR, rates, transmit power and energy efficiency.

use num_complex::Complex64;

use crate::channel::{effective_channels, CVector, ChannelSet};
use crate::error::{CoreError, Result};

/// The optimization variables: beamformers `w_k`, IRS phase vectors `u_l`
/// (the diagonals of the reflection matrices) and the switch vector `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub beamformers: Vec<CVector>,
    pub phases: Vec<CVector>,
    pub switch: Vec<bool>,
}

impl DesignState {
    /// Zero beamformers, all-ones phases and every IRS on.
    pub fn neutral(n_t: usize, k_users: usize, n_r: usize, l_irs: usize) -> Self {
        Self {
            beamformers: vec![CVector::zeros(n_t); k_users],
            phases: vec![CVector::from_element(n_r, Complex64::new(1.0, 0.0)); l_irs],
            switch: vec![true; l_irs],
        }
    }

    pub fn active_irs(&self) -> usize {
        self.switch.iter().filter(|&&x| x).count()
    }
}

/// Power-consumption parameters of the energy-efficiency metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub p_rf_watts: f64,
    /// Per reflecting element of an active IRS.
    pub p_irs_watts: f64,
    pub n_rf: usize,
}

fn check_noise(noise_w: &[f64], k: usize) -> Result<f64> {
    let s = *noise_w
        .get(k)
        .ok_or_else(|| CoreError::Dimension(format!("no noise power for user {k}")))?;
    if !(s > 0.0) {
        return Err(CoreError::Domain(format!("noise power must be positive, got {s}")));
    }
    Ok(s)
}

/// SINR of user `k` given effective channels `a` and beamformers `w`.
pub fn sinr_from_effective(a: &[CVector], w: &[CVector], noise_w: &[f64], k: usize) -> Result<f64> {
    if a.len() != w.len() || k >= a.len() {
        return Err(CoreError::Dimension(format!("{} channels, {} beamformers, user {k}", a.len(), w.len())));
    }
    let noise = check_noise(noise_w, k)?;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if wi.len() != a[k].len() {
            return Err(CoreError::Dimension("beamformer length differs from antenna count".into()));
        }
        let p = a[k].dotc(wi).norm_sqr();
        if i == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(signal / (interference + noise))
}

pub fn sinr(channels: &ChannelSet, state: &DesignState, noise_w: &[f64], user_index: usize) -> Result<f64> {
    let a = effective_channels(channels, &state.phases, &state.switch)?;
    sinr_from_effective(&a, &state.beamformers, noise_w, user_index)
}

/// `log2(1 + sinr)` in bits/s/Hz.
pub fn user_rate(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(CoreError::Domain(format!("SINR must be nonnegative, got {sinr}")));
    }
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

pub fn user_rates_from_effective(a: &[CVector], w: &[CVector], noise_w: &[f64]) -> Result<Vec<f64>> {
    (0..a.len()).map(|k| user_rate(sinr_from_effective(a, w, noise_w, k)?)).collect()
}

pub fn user_rates(channels: &ChannelSet, state: &DesignState, noise_w: &[f64]) -> Result<Vec<f64>> {
    let a = effective_channels(channels, &state.phases, &state.switch)?;
    user_rates_from_effective(&a, &state.beamformers, noise_w)
}

pub fn sum_rate(channels: &ChannelSet, state: &DesignState, noise_w: &[f64]) -> Result<f64> {
    Ok(user_rates(channels, state, noise_w)?.iter().sum())
}

/// `sum_k ||w_k||^2` in watts.
pub fn transmit_power(state: &DesignState) -> f64 {
    state.beamformers.iter().map(|w| w.norm_squared()).sum()
}

/// Energy efficiency from its ingredients, in bits/Joule/Hz.
pub fn energy_efficiency_from_parts(
    sum_rate: f64,
    transmit_power_w: f64,
    active_irs: usize,
    n_r: usize,
    model: &PowerModel,
) -> Result<f64> {
    let denom = transmit_power_w + model.n_rf as f64 * model.p_rf_watts + (active_irs * n_r) as f64 * model.p_irs_watts;
    if !(denom > 0.0) {
        return Err(CoreError::Domain("energy-efficiency denominator must be positive".into()));
    }
    Ok(sum_rate / denom)
}

pub fn energy_efficiency(
    channels: &ChannelSet,
    state: &DesignState,
    noise_w: &[f64],
    model: &PowerModel,
) -> Result<f64> {
    let r = sum_rate(channels, state, noise_w)?;
    energy_efficiency_from_parts(r, transmit_power(state), state.active_irs(), channels.n_r(), model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_sinr() {
        let a = vec![CVector::from_vec(vec![c(2.0, 0.0)])];
        let w = vec![CVector::from_vec(vec![c(1.0, 0.0)])];
        assert!((sinr_from_effective(&a, &w, &[1.0], 0).unwrap() - 4.0).abs() < 1e-15);
        assert!(sinr_from_effective(&a, &w, &[0.0], 0).is_err());
        assert!(sinr_from_effective(&a, &w, &[-1.0], 0).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(user_rate(0.0).unwrap(), 0.0);
        assert!((user_rate(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((user_rate(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(user_rate(-0.1).is_err());
    }

    #[test]
    fn power_examples() {
        let mut s = DesignState::neutral(3, 2, 4, 1);
        assert_eq!(transmit_power(&s), 0.0);
        s.beamformers[0][1] = c(0.6, 0.8);
        assert!((transmit_power(&s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_efficiency_hand_value() {
        let model = PowerModel { p_rf_watts: 0.25, p_irs_watts: 0.01, n_rf: 8 };
        let ee = energy_efficiency_from_parts(10.0, 0.1, 3, 16, &model).unwrap();
        assert!((ee - 10.0 / 2.58).abs() < 1e-12);
        assert!((ee - 3.876).abs() < 1e-3);
        assert_eq!(energy_efficiency_from_parts(0.0, 0.1, 3, 16, &model).unwrap(), 0.0);
        let zero = PowerModel { p_rf_watts: 0.0, p_irs_watts: 0.0, n_rf: 0 };
        assert!(energy_efficiency_from_parts(1.0, 0.0, 0, 16, &zero).is_err());
    }
}
