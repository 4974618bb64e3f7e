use dirsim_conic::{pack_symmetric, project_exp, project_psd, project_soc, unpack_symmetric, Cone};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Nearest point of the exponential cone by a 1-D search over the boundary
/// ray family `y (r, 1, e^r)`, compared against the `y = 0` face, the origin
/// and the point itself.
fn exp_projection_oracle(v: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = v;
    let mut candidates: Vec<[f64; 3]> = vec![[0.0, 0.0, 0.0], [x.min(0.0), 0.0, z.max(0.0)]];
    if y > 0.0 && y * (x / y).exp() <= z {
        return v;
    }
    let score = |r: f64| {
        let d = [r, 1.0, r.exp()];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        (x * d[0] + y * d[1] + z * d[2]) / n
    };
    let (mut best_r, mut best) = (0.0, f64::NEG_INFINITY);
    let mut r = -200.0;
    while r <= 40.0 {
        let s = score(r);
        if s > best {
            best = s;
            best_r = r;
        }
        r += 2e-3;
    }
    // bisection on the derivative of the score around the grid maximum
    let slope = |r: f64| {
        let e = r.exp();
        let num = x * r + y + z * e;
        let den = r * r + 1.0 + e * e;
        (x + z * e) * den - num * (r + e * e)
    };
    let (mut lo, mut hi) = (best_r - 2e-3, best_r + 2e-3);
    if slope(lo) > 0.0 && slope(hi) < 0.0 {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        lo = best_r;
        hi = best_r;
    }
    let r = 0.5 * (lo + hi);
    let d = [r, 1.0, r.exp()];
    let dd = d.iter().map(|t| t * t).sum::<f64>();
    let t = ((x * d[0] + y * d[1] + z * d[2]) / dd).max(0.0);
    candidates.push([t * d[0], t * d[1], t * d[2]]);
    candidates
        .into_iter()
        .min_by(|a, b| dist(a, &v).partial_cmp(&dist(b, &v)).unwrap())
        .unwrap()
}

#[test]
fn exp_projection_matches_search_oracle() {
    let p = project_exp([1.0, 1.0, 1.0]);
    let o = exp_projection_oracle([1.0, 1.0, 1.0]);
    assert!(dist(&p, &o) < 1e-12, "{p:?} vs {o:?}");
    assert!(Cone::Exponential.distance(&p) < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let v: [f64; 3] = std::array::from_fn(|_| 3.0 * rng.sample::<f64, _>(StandardNormal));
        let p = project_exp(v);
        let o = exp_projection_oracle(v);
        assert!(dist(&p, &o) < 1e-9 * (1.0 + dist(&v, &[0.0; 3])), "{v:?}: {p:?} vs {o:?}");
    }
}

#[test]
fn exp_projection_trivial_cases() {
    assert_eq!(project_exp([0.0, 1.0, 2.0]), [0.0, 1.0, 2.0]);
    assert_eq!(project_exp([0.0, 0.0, -1.0]), [0.0, 0.0, 0.0]);
}

#[test]
fn soc_trivial_cases() {
    let mut v = [2.0, 1.0, 0.0];
    project_soc(&mut v);
    assert_eq!(v, [2.0, 1.0, 0.0]);
    let mut v = [-2.0, 1.0, 0.0];
    project_soc(&mut v);
    assert_eq!(v, [0.0, 0.0, 0.0]);
    let mut v = [0.0, 1.0, 1.0];
    project_soc(&mut v);
    let h = std::f64::consts::SQRT_2 / 2.0;
    assert!(dist(&v, &[h, 0.5, 0.5]) < 1e-15);
}

#[test]
fn psd_projection_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..6 {
        let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let m = &b + b.transpose();
        let p = project_psd(&m);
        let eig = SymmetricEigen::new(m.clone());
        let mut want = DMatrix::zeros(n, n);
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            if lam > 0.0 {
                let q = eig.eigenvectors.column(k);
                want += lam * q * q.transpose();
            }
        }
        assert!((&p - &want).norm() < 1e-10);
        // residual is negative semidefinite and orthogonal to the projection
        let resid = &m - &p;
        assert!((resid.component_mul(&p)).sum().abs() < 1e-9);
        assert!(SymmetricEigen::new(resid).eigenvalues.max() < 1e-10);
        assert!(SymmetricEigen::new(p).eigenvalues.min() > -1e-10);
    }
}

fn random_member(cone: &Cone, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut g = || rng.sample::<f64, _>(StandardNormal);
    match *cone {
        Cone::Zero(n) => vec![0.0; n],
        Cone::Nonneg(n) => (0..n).map(|_| g().abs()).collect(),
        Cone::SecondOrder(n) => {
            let tail: Vec<f64> = (0..n - 1).map(|_| g()).collect();
            let t = tail.iter().map(|x| x * x).sum::<f64>().sqrt() + g().abs();
            std::iter::once(t).chain(tail).collect()
        }
        Cone::Exponential => {
            let y = g().abs() + 1e-3;
            let x = g();
            vec![x, y, y * (x / y).exp() + g().abs()]
        }
        Cone::Psd(n) => {
            let b = DMatrix::<f64>::from_fn(n, n, |_, _| g());
            pack_symmetric(&(&b * b.transpose()))
        }
    }
}

fn cone_strategy() -> impl Strategy<Value = Cone> {
    prop_oneof![
        (1usize..5).prop_map(Cone::Zero),
        (1usize..5).prop_map(Cone::Nonneg),
        (2usize..6).prop_map(Cone::SecondOrder),
        Just(Cone::Exponential),
        (1usize..4).prop_map(Cone::Psd),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_nearest(cone in cone_strategy(), seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..cone.dim()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut p = v.clone();
        cone.project(&mut p);
        prop_assert!(cone.distance(&p) < 1e-9);
        let mut pp = p.clone();
        cone.project(&mut pp);
        prop_assert!(dist(&p, &pp) < 1e-9 * (1.0 + scale));
        let d = dist(&v, &p);
        for _ in 0..1000 {
            let w = random_member(&cone, &mut rng);
            prop_assert!(d <= dist(&v, &w) + 1e-9);
        }
    }

    #[test]
    fn dual_projection_lands_in_dual_cone(cone in cone_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..cone.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        cone.project_dual(&mut v);
        prop_assert!(cone.dual_distance(&v) < 1e-9);
    }

    #[test]
    fn packing_round_trips(n in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let m = &b + b.transpose();
        prop_assert!((unpack_symmetric(&pack_symmetric(&m), n) - &m).norm() < 1e-12);
    }
}
