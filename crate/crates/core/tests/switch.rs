mod common;

use common::{desk_scenario, interference_instance, random_cvector, random_phases, sample};
use dirsim_core::channel::{CVector, ChannelSet};
use dirsim_core::switch::{exhaustive_switch, greedy_switch, switch_value, SwitchVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sum-rate under `x` by direct summation over IRSs and elements, 0 when a
/// user misses `gamma`.
fn value_oracle(ch: &ChannelSet, u: &[CVector], w: &[CVector], noise: f64, gamma: f64, x: &[bool]) -> f64 {
    let k_users = ch.h.len();
    let mut total = 0.0;
    for k in 0..k_users {
        let gain = |i: usize| {
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..x.len() {
                if !x[l] {
                    continue;
                }
                let gw = &ch.g[l] * &w[i];
                for n in 0..u[l].len() {
                    s += ch.h[k][l][n].conj() * u[l][n] * gw[n];
                }
            }
            s.norm_sqr()
        };
        let interference: f64 = (0..k_users).filter(|&i| i != k).map(gain).sum();
        let rate = (1.0 + gain(k) / (interference + noise)).log2();
        if rate < gamma {
            return 0.0;
        }
        total += rate;
    }
    total
}

#[test]
fn crafted_interference_instance_greedy_finds_optimum() {
    let (ch, u, w, noise) = interference_instance();
    let (xg, vg) = greedy_switch(&ch, &u, &w, &[noise; 2], 0.0).unwrap();
    let (xe, ve) = exhaustive_switch(&ch, &u, &w, &[noise; 2], 0.0).unwrap();
    assert_eq!(xg.flags, vec![true, true, false]);
    assert_eq!(xg, xe);
    assert_eq!(vg, ve);
    assert!((ve - 2.0 * 11f64.log2()).abs() < 1e-12);
    let all_on = value_oracle(&ch, &u, &w, noise, 0.0, &[true; 3]);
    assert!((all_on - 2.0 * (1.0 + 3.24 / 0.74f64).log2()).abs() < 1e-12);
    assert!(vg > all_on);
}

#[test]
fn single_irs_is_kept_when_it_carries_the_signal() {
    let s = desk_scenario();
    let s = dirsim_core::channel::Scenario { irs_positions: vec![s.irs_positions[0]], ..s };
    let ch = sample(&s, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = vec![random_phases(s.n_r, &mut rng)];
    let w: Vec<CVector> = (0..2).map(|_| random_cvector(s.n_t, &mut rng)).collect();
    let (x, v) = greedy_switch(&ch, &u, &w, &s.noise_w(), 0.0).unwrap();
    assert_eq!(x.flags, vec![true]);
    assert!(v > 0.0);
    let (xe, _) = exhaustive_switch(&ch, &u, &w, &s.noise_w(), 0.0).unwrap();
    assert_eq!(xe.flags, vec![true]);
}

#[test]
fn unreachable_target_returns_all_on_with_zero_value() {
    let (ch, u, w, noise) = interference_instance();
    let (x, v) = greedy_switch(&ch, &u, &w, &[noise; 2], 1e6).unwrap();
    assert_eq!(x, SwitchVector::all_on(3));
    assert_eq!(v, 0.0);
    let (_, ve) = exhaustive_switch(&ch, &u, &w, &[noise; 2], f64::INFINITY).unwrap();
    assert_eq!(ve, 0.0);
}

#[test]
fn exhaustive_matches_enumeration_oracle_and_tie_rule() {
    let s = desk_scenario();
    let ch = sample(&s, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u: Vec<CVector> = (0..3).map(|_| random_phases(s.n_r, &mut rng)).collect();
    let w: Vec<CVector> = (0..2).map(|_| random_cvector(s.n_t, &mut rng)).collect();
    let noise = s.noise_power_w() * 1e-4;
    let mut best = (vec![false; 3], 0.0);
    for mask in 0..8u32 {
        let x: Vec<bool> = (0..3).map(|l| mask >> l & 1 == 1).collect();
        let v = value_oracle(&ch, &u, &w, noise, 0.0, &x);
        let direct = switch_value(&ch, &u, &w, &[noise; 2], 0.0, &x).unwrap();
        assert!((v - direct).abs() <= 1e-12 * (1.0 + v));
        let fewer = x.iter().filter(|&&b| b).count() < best.0.iter().filter(|&&b| b).count();
        if v > best.1 || (v == best.1 && fewer) {
            best = (x, v);
        }
    }
    let (xe, ve) = exhaustive_switch(&ch, &u, &w, &[noise; 2], 0.0).unwrap();
    assert_eq!(xe.flags, best.0);
    assert!((ve - best.1).abs() <= 1e-12 * (1.0 + ve));

    // all-zero beamformers: every vector scores 0, the empty one wins
    let zero = vec![CVector::zeros(s.n_t); 2];
    let (xz, vz) = exhaustive_switch(&ch, &u, &zero, &[noise; 2], 0.0).unwrap();
    assert_eq!((xz.active(), vz), (0, 0.0));
}

#[test]
fn greedy_sits_between_all_on_and_exhaustive() {
    let s = desk_scenario();
    let mut removals = 0;
    for seed in 0..20u64 {
        let ch = sample(&s, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let u: Vec<CVector> = (0..3).map(|_| random_phases(s.n_r, &mut rng)).collect();
        let w: Vec<CVector> = (0..2).map(|_| random_cvector(s.n_t, &mut rng)).collect();
        for (scale, gamma) in [(1.0, 0.0), (1e-4, 0.0), (1e-4, 1.0), (1e-6, 2.0)] {
            let noise = [s.noise_power_w() * scale; 2];
            let (xg, vg) = greedy_switch(&ch, &u, &w, &noise, gamma).unwrap();
            let (_, ve) = exhaustive_switch(&ch, &u, &w, &noise, gamma).unwrap();
            let all_on = switch_value(&ch, &u, &w, &noise, gamma, &[true; 3]).unwrap();
            assert!(vg <= ve + 1e-12, "seed {seed}: greedy {vg} above exhaustive {ve}");
            if all_on > 0.0 {
                assert!(vg >= all_on, "seed {seed}: greedy {vg} below all-on {all_on}");
            }
            if vg > 0.0 {
                let rates = dirsim_core::metrics::user_rates_from_effective(
                    &dirsim_core::channel::effective_channels(&ch, &u, &xg.flags).unwrap(),
                    &w,
                    &noise,
                )
                .unwrap();
                assert!(rates.iter().all(|&r| r >= gamma - 1e-9));
            }
            assert_eq!(switch_value(&ch, &u, &w, &noise, gamma, &xg.flags).unwrap(), vg);
            removals += 3 - xg.active();
        }
    }
    assert!(removals > 0, "no instance exercised a deactivation");
}
