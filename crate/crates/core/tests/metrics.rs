mod common;

use common::{desk_scenario, random_cvector, random_phases, sample};
use dirsim_core::channel::{CVector, ChannelSet};
use dirsim_core::metrics::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Received amplitude of beam `i` at user `k` by direct summation over IRSs,
/// elements and antennas.
fn received(ch: &ChannelSet, st: &DesignState, k: usize, i: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for l in (0..ch.l_irs()).filter(|&l| st.switch[l]) {
        for n in 0..ch.n_r() {
            for m in 0..ch.n_t() {
                total += ch.h[k][l][n].conj() * st.phases[l][n] * ch.g[l][(n, m)] * st.beamformers[i][m];
            }
        }
    }
    total
}

fn sinr_oracle(ch: &ChannelSet, st: &DesignState, noise: f64, k: usize) -> f64 {
    let interference: f64 = (0..st.beamformers.len()).filter(|&i| i != k).map(|i| received(ch, st, k, i).norm_sqr()).sum();
    received(ch, st, k, k).norm_sqr() / (interference + noise)
}

fn random_state(ch: &ChannelSet, k: usize, rng: &mut ChaCha8Rng) -> DesignState {
    DesignState {
        beamformers: (0..k).map(|_| random_cvector(ch.n_t(), rng)).collect(),
        phases: (0..ch.l_irs()).map(|_| random_phases(ch.n_r(), rng)).collect(),
        switch: vec![true; ch.l_irs()],
    }
}

fn three_user_instance(seed: u64) -> (ChannelSet, DesignState, f64) {
    let mut s = desk_scenario();
    s.user_positions.push([0.0, 90.0, 0.0]);
    let ch = sample(&s, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = random_state(&ch, 3, &mut rng);
    st.beamformers.iter_mut().for_each(|w| *w *= Complex64::from(1e-2));
    (ch, st, s.noise_power_w())
}

#[test]
fn sinr_and_rates_match_direct_summation() {
    let (ch, st, noise) = three_user_instance(4);
    let noise_w = [noise; 3];
    let mut total = 0.0;
    for k in 0..3 {
        let want = sinr_oracle(&ch, &st, noise, k);
        let got = sinr(&ch, &st, &noise_w, k).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "user {k}: {got} vs {want}");
        total += (1.0 + want).log2();
    }
    let r = sum_rate(&ch, &st, &noise_w).unwrap();
    assert!((r - total).abs() <= 1e-12 * total);
    assert!(sinr(&ch, &st, &noise_w[..2], 2).is_err());
}

#[test]
fn switched_off_design_has_no_rate() {
    let (ch, mut st, noise) = three_user_instance(1);
    st.switch = vec![false; 3];
    assert_eq!(sinr(&ch, &st, &[noise; 3], 0).unwrap(), 0.0);
    assert_eq!(sum_rate(&ch, &st, &[noise; 3]).unwrap(), 0.0);
}

#[test]
fn one_user_sum_rate_is_its_rate() {
    let s = desk_scenario();
    let ch = sample(&s, 3);
    let one = ChannelSet { g: ch.g.clone(), h: vec![ch.h[0].clone()] };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let st = random_state(&one, 1, &mut rng);
    let noise = [s.noise_power_w()];
    assert_eq!(sum_rate(&one, &st, &noise).unwrap(), user_rate(sinr(&one, &st, &noise, 0).unwrap()).unwrap());
}

#[test]
fn transmit_power_matches_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let st = DesignState { beamformers: (0..4).map(|_| random_cvector(6, &mut rng)).collect(), phases: vec![], switch: vec![] };
    let trace: f64 = st.beamformers.iter().map(|w| (w * w.adjoint()).trace().re).sum();
    assert!((transmit_power(&st) - trace).abs() <= 1e-12 * trace);
}

#[test]
fn switching_an_irs_off_lowers_the_denominator_by_its_elements() {
    let model = PowerModel { p_rf_watts: 0.25, p_irs_watts: 0.01, n_rf: 8 };
    let all = energy_efficiency_from_parts(10.0, 0.1, 3, 16, &model).unwrap();
    let two = energy_efficiency_from_parts(10.0, 0.1, 2, 16, &model).unwrap();
    assert!((10.0 / all - 10.0 / two - 16.0 * 0.01).abs() < 1e-12);

    let (ch, mut st, noise) = three_user_instance(2);
    let ee = energy_efficiency(&ch, &st, &[noise; 3], &model).unwrap();
    let r = sum_rate(&ch, &st, &[noise; 3]).unwrap();
    let denom = transmit_power(&st) + 8.0 * 0.25 + 3.0 * 8.0 * 0.01;
    assert!((ee - r / denom).abs() <= 1e-12 * ee);
    st.switch[1] = false;
    let r_off = sum_rate(&ch, &st, &[noise; 3]).unwrap();
    let ee_off = energy_efficiency(&ch, &st, &[noise; 3], &model).unwrap();
    assert!((r_off / ee_off - (denom - 8.0 * 0.01)).abs() <= 1e-12 * denom);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sum_rate_ignores_a_common_beam_rotation(seed in any::<u64>(), k in 0usize..3, theta in 0.0f64..6.3) {
        let (ch, mut st, noise) = three_user_instance(seed);
        let before = sum_rate(&ch, &st, &[noise; 3]).unwrap();
        st.beamformers[k] *= Complex64::from_polar(1.0, theta);
        let after = sum_rate(&ch, &st, &[noise; 3]).unwrap();
        prop_assert!((after - before).abs() <= 1e-12 * before.max(1.0));
    }

    #[test]
    fn sinr_is_invariant_under_joint_scaling(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let (ch, st, noise) = three_user_instance(seed);
        let mut scaled = st.clone();
        scaled.beamformers.iter_mut().for_each(|w| *w *= Complex64::from(scale));
        for k in 0..3 {
            let a = sinr(&ch, &st, &[noise; 3], k).unwrap();
            let b = sinr(&ch, &scaled, &[noise * scale * scale; 3], k).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
        }
    }

    #[test]
    fn denominator_falls_as_irss_switch_off(active in 0usize..8, n_r in 1usize..64, p in 0.0f64..10.0) {
        let model = PowerModel { p_rf_watts: 0.25, p_irs_watts: 0.01, n_rf: 4 };
        let more = 1.0 / energy_efficiency_from_parts(1.0, p, active + 1, n_r, &model).unwrap();
        let fewer = 1.0 / energy_efficiency_from_parts(1.0, p, active, n_r, &model).unwrap();
        prop_assert!(fewer < more);
    }
}

#[test]
fn mismatched_phase_lengths_are_rejected() {
    let (ch, st, noise) = three_user_instance(0);
    let short = DesignState { phases: vec![CVector::zeros(3); 3], ..st };
    assert!(sum_rate(&ch, &short, &[noise; 3]).is_err());
}
