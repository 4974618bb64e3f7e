#![allow(dead_code)]

use dirsim_core::channel::{CMatrix, CVector, ChannelSet, Scenario};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn desk_scenario() -> Scenario {
    Scenario {
        bs_position: [0.0, 0.0, 0.0],
        irs_positions: vec![[0.0, 30.0, 20.0], [0.0, 60.0, 20.0], [0.0, 90.0, 20.0]],
        user_positions: vec![[0.0, 30.0, 0.0], [0.0, 60.0, 0.0]],
        n_t: 8,
        n_r: 8,
        n_paths_irs_user: 3,
        beta0_db: 61.4,
        c_los: 2.0,
        c_nlos: 5.0,
        noise_power_dbm: -210.0,
        power_budget_dbm: 20.0,
        gamma_bits: 0.0,
        seed: 0,
    }
}

pub fn sample(scenario: &Scenario, seed: u64) -> ChannelSet {
    ChannelSet::sample(scenario, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub fn random_cvector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn ones(n: usize) -> CVector {
    CVector::from_element(n, Complex64::new(1.0, 0.0))
}

pub fn random_phases(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
}

pub fn single_user(seed: u64) -> Scenario {
    let s = desk_scenario();
    Scenario {
        irs_positions: vec![s.irs_positions[0]],
        user_positions: vec![s.user_positions[0]],
        power_budget_dbm: 10.0,
        seed,
        ..s
    }
}

/// `||a(u)||^2` for one user and one IRS by direct summation.
pub fn channel_gain(ch: &ChannelSet, u: &[Complex64]) -> f64 {
    let (g, h) = (&ch.g[0], &ch.h[0][0]);
    let mut a = vec![Complex64::new(0.0, 0.0); g.ncols()];
    for (m, am) in a.iter_mut().enumerate() {
        for n in 0..g.nrows() {
            *am += g[(n, m)].conj() * u[n].conj() * h[n];
        }
    }
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// MRT rate with phases from element-wise coordinate ascent over a 2 degree
/// grid, repeated until no element changes.
pub fn grid_oracle(s: &Scenario, ch: &ChannelSet) -> f64 {
    let grid: Vec<Complex64> = (0..180).map(|i| Complex64::from_polar(1.0, (2.0 * i as f64).to_radians())).collect();
    let mut u = vec![Complex64::new(1.0, 0.0); s.n_r];
    let mut best = channel_gain(ch, &u);
    loop {
        let mut changed = false;
        for n in 0..s.n_r {
            for z in &grid {
                let keep = u[n];
                u[n] = *z;
                let v = channel_gain(ch, &u);
                if v > best * (1.0 + 1e-12) {
                    best = v;
                    changed = true;
                } else {
                    u[n] = keep;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (1.0 + s.power_budget_w() * best / s.noise_power_w()).log2()
}

/// Two single-antenna-per-beam users; IRS 0 serves user 0, IRS 1 serves
/// user 1 and IRS 2 leaks each user's beam into the other user.
pub fn interference_instance() -> (ChannelSet, Vec<CVector>, Vec<CVector>, f64) {
    let g = vec![
        CMatrix::from_row_slice(1, 2, &[c1(1.0), c1(0.0)]),
        CMatrix::from_row_slice(1, 2, &[c1(0.0), c1(1.0)]),
        CMatrix::from_row_slice(1, 2, &[c1(1.0), c1(1.0)]),
    ];
    let one = |v: f64| CVector::from_element(1, c1(v));
    let h = vec![vec![one(1.0), one(0.0), one(0.8)], vec![one(0.0), one(1.0), one(0.8)]];
    let w = vec![CVector::from_vec(vec![c1(1.0), c1(0.0)]), CVector::from_vec(vec![c1(0.0), c1(1.0)])];
    (ChannelSet { g, h }, vec![one(1.0); 3], w, 0.1)
}

fn c1(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}
