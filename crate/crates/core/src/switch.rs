//! IRS on/off selection for fixed beamformers and phases.
//!
//! [`greedy_switch`] starts from every IRS on and repeatedly switches off the
//! single IRS whose removal gives the largest feasible sum-rate, stopping as
//! soon as no removal strictly improves. Switched-off IRSs never come back.
//! [`exhaustive_switch`] enumerates all `2^L` vectors and serves as a
//! reference for small `L`.

use crate::channel::{effective_channels, CVector, ChannelSet};
use crate::error::{CoreError, Result};
use crate::metrics::user_rates_from_effective;

/// Largest IRS count accepted by [`exhaustive_switch`].
pub const EXHAUSTIVE_MAX_IRS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchVector {
    pub flags: Vec<bool>,
}

impl SwitchVector {
    pub fn all_on(l_irs: usize) -> Self {
        Self { flags: vec![true; l_irs] }
    }

    pub fn active(&self) -> usize {
        self.flags.iter().filter(|&&x| x).count()
    }

    fn from_mask(mask: u32, l_irs: usize) -> Self {
        Self { flags: (0..l_irs).map(|l| mask >> l & 1 == 1).collect() }
    }
}

/// Sum-rate under `switch` if every user reaches `gamma_bits`, else 0.
pub fn switch_value(
    channels: &ChannelSet,
    phases: &[CVector],
    beamformers: &[CVector],
    noise_w: &[f64],
    gamma_bits: f64,
    switch: &[bool],
) -> Result<f64> {
    let a = effective_channels(channels, phases, switch)?;
    let rates = user_rates_from_effective(&a, beamformers, noise_w)?;
    if rates.iter().all(|&r| r >= gamma_bits - 1e-9) {
        Ok(rates.iter().sum())
    } else {
        Ok(0.0)
    }
}

/// Greedy deactivation search. Returns the final vector and its value.
/// Ties between candidate removals go to the lowest index.
pub fn greedy_switch(
    channels: &ChannelSet,
    phases: &[CVector],
    beamformers: &[CVector],
    noise_w: &[f64],
    gamma_bits: f64,
) -> Result<(SwitchVector, f64)> {
    let mut x = SwitchVector::all_on(channels.l_irs());
    let mut best = switch_value(channels, phases, beamformers, noise_w, gamma_bits, &x.flags)?;
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for l in (0..x.flags.len()).filter(|&l| x.flags[l]) {
            let mut trial = x.flags.clone();
            trial[l] = false;
            let v = switch_value(channels, phases, beamformers, noise_w, gamma_bits, &trial)?;
            if pick.is_none_or(|(_, pv)| v > pv) {
                pick = Some((l, v));
            }
        }
        match pick {
            Some((l, v)) if v > best => {
                x.flags[l] = false;
                best = v;
            }
            _ => return Ok((x, best)),
        }
    }
}

/// Best of all `2^L` switch vectors under the same feasibility rule; ties go
/// to fewer active IRSs, then to the lowest bit mask (bit `l` is IRS `l`).
pub fn exhaustive_switch(
    channels: &ChannelSet,
    phases: &[CVector],
    beamformers: &[CVector],
    noise_w: &[f64],
    gamma_bits: f64,
) -> Result<(SwitchVector, f64)> {
    let l_irs = channels.l_irs();
    if l_irs > EXHAUSTIVE_MAX_IRS {
        return Err(CoreError::Dimension(format!("exhaustive search supports up to {EXHAUSTIVE_MAX_IRS} IRSs, got {l_irs}")));
    }
    let mut best: Option<(SwitchVector, f64)> = None;
    for mask in 0..1u32 << l_irs {
        let x = SwitchVector::from_mask(mask, l_irs);
        let v = switch_value(channels, phases, beamformers, noise_w, gamma_bits, &x.flags)?;
        let better = match &best {
            None => true,
            Some((bx, bv)) => v > *bv || (v == *bv && x.active() < bx.active()),
        };
        if better {
            best = Some((x, v));
        }
    }
    Ok(best.expect("at least the all-off vector is evaluated"))
}
