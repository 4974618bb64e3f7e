//! Geometric mmWave channels for a BS that reaches its users only through
//! reflecting surfaces.
//!
//! The BS array is a vertical half-wavelength ULA (along z) and every IRS is a
//! horizontal ULA (along y), so line-of-sight angles follow from positions.
//! BS→IRS links are pure line of sight and therefore rank one; IRS→user links
//! are a sum of `n_paths_irs_user` scattered paths with uniformly drawn angles.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub type Point = [f64; 3];

/// Static description of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_position: Point,
    pub irs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub n_t: usize,
    /// Elements per IRS.
    pub n_r: usize,
    pub n_paths_irs_user: usize,
    pub beta0_db: f64,
    pub c_los: f64,
    pub c_nlos: f64,
    pub noise_power_dbm: f64,
    pub power_budget_dbm: f64,
    pub gamma_bits: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn l_irs(&self) -> usize {
        self.irs_positions.len()
    }

    pub fn k_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// Noise power of every user, in watts.
    pub fn noise_w(&self) -> Vec<f64> {
        vec![self.noise_power_w(); self.k_users()]
    }

    pub fn power_budget_w(&self) -> f64 {
        dbm_to_watts(self.power_budget_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 || self.l_irs() == 0 || self.k_users() == 0 || self.n_paths_irs_user == 0
        {
            return Err(CoreError::Domain("all counts must be at least 1".into()));
        }
        if !self.power_budget_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return Err(CoreError::Domain("power budget and noise power must be finite".into()));
        }
        if !(self.gamma_bits >= 0.0) {
            return Err(CoreError::Domain(format!("gamma must be >= 0, got {}", self.gamma_bits)));
        }
        let all: Vec<&Point> =
            std::iter::once(&self.bs_position).chain(&self.irs_positions).chain(&self.user_positions).collect();
        for (i, p) in all.iter().enumerate() {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::Domain(format!("non-finite position {p:?}")));
            }
            if all[..i].iter().any(|q| q == p) {
                return Err(CoreError::Domain(format!("duplicate position {p:?}")));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Unit-norm ULA response `exp(j pi m f) / sqrt(n)`.
pub fn steering_vector(n: usize, spatial_freq: f64) -> Result<CVector> {
    if n == 0 {
        return Err(CoreError::Dimension("steering vector needs at least one element".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CVector::from_fn(n, |m, _| Complex64::from_polar(scale, std::f64::consts::PI * m as f64 * spatial_freq)))
}

/// `beta0 + 10 c log10(d)`; distances under one meter are clamped to one.
pub fn pathloss_db(d: f64, c: f64, beta0_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(CoreError::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(beta0_db + 10.0 * c * d.max(1.0).log10())
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Spatial frequency of `to` seen from a vertical array at `from`.
fn vertical_freq(from: &Point, to: &Point) -> f64 {
    (to[2] - from[2]) / distance(from, to)
}

/// Spatial frequency of `to` seen from a horizontal (y-axis) array at `from`.
fn horizontal_freq(from: &Point, to: &Point) -> f64 {
    (to[1] - from[1]) / distance(from, to)
}

fn check_irs(scenario: &Scenario, irs_index: usize) -> Result<()> {
    if irs_index >= scenario.l_irs() {
        return Err(CoreError::Dimension(format!("IRS index {irs_index} out of {}", scenario.l_irs())));
    }
    Ok(())
}

/// BS→IRS line-of-sight channel with a given small-scale gain.
///
/// The array responses carry unit-modulus entries, so the link has array
/// gain `sqrt(n_t n_r)` on top of the path loss.
pub fn bs_irs_channel(scenario: &Scenario, irs_index: usize, alpha: Complex64) -> Result<CMatrix> {
    check_irs(scenario, irs_index)?;
    let irs = &scenario.irs_positions[irs_index];
    let bs = &scenario.bs_position;
    let d = distance(bs, irs);
    let beta = db_to_linear(pathloss_db(d, scenario.c_los, scenario.beta0_db)?);
    let a = steering_vector(scenario.n_r, horizontal_freq(irs, bs))?;
    let b = steering_vector(scenario.n_t, vertical_freq(bs, irs))?;
    let gain = (scenario.n_t as f64 * scenario.n_r as f64).sqrt() / beta.sqrt();
    Ok(a * b.adjoint() * (alpha * gain))
}

pub fn sample_bs_irs_channel<R: Rng + ?Sized>(scenario: &Scenario, irs_index: usize, rng: &mut R) -> Result<CMatrix> {
    let alpha = sample_cn(rng);
    bs_irs_channel(scenario, irs_index, alpha)
}

/// IRS→user channel from explicit `(gain, spatial_freq)` paths.
pub fn irs_user_channel(
    scenario: &Scenario,
    user_index: usize,
    irs_index: usize,
    paths: &[(Complex64, f64)],
) -> Result<CVector> {
    check_irs(scenario, irs_index)?;
    if user_index >= scenario.k_users() {
        return Err(CoreError::Dimension(format!("user index {user_index} out of {}", scenario.k_users())));
    }
    if paths.is_empty() {
        return Err(CoreError::Domain("at least one path required".into()));
    }
    let d = distance(&scenario.irs_positions[irs_index], &scenario.user_positions[user_index]);
    let beta = db_to_linear(pathloss_db(d, scenario.c_nlos, scenario.beta0_db)?);
    let mut h = CVector::zeros(scenario.n_r);
    for &(alpha, f) in paths {
        h += steering_vector(scenario.n_r, f)? * alpha;
    }
    Ok(h / Complex64::from((beta * paths.len() as f64).sqrt()))
}

pub fn sample_irs_user_channel<R: Rng + ?Sized>(
    scenario: &Scenario,
    user_index: usize,
    irs_index: usize,
    rng: &mut R,
) -> Result<CVector> {
    let paths: Vec<(Complex64, f64)> = (0..scenario.n_paths_irs_user)
        .map(|_| {
            let alpha = sample_cn(rng);
            let angle = rng.random_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2);
            (alpha, angle.sin())
        })
        .collect();
    irs_user_channel(scenario, user_index, irs_index, &paths)
}

/// One channel realization: `g[l]` is `n_r x n_t`, `h[k][l]` has length `n_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g: Vec<CMatrix>,
    pub h: Vec<Vec<CVector>>,
}

impl ChannelSet {
    /// Draws every BS→IRS link first, then IRS→user links user by user.
    pub fn sample<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Self> {
        scenario.validate()?;
        let g = (0..scenario.l_irs()).map(|l| sample_bs_irs_channel(scenario, l, rng)).collect::<Result<_>>()?;
        let h = (0..scenario.k_users())
            .map(|k| (0..scenario.l_irs()).map(|l| sample_irs_user_channel(scenario, k, l, rng)).collect())
            .collect::<Result<_>>()?;
        Ok(Self { g, h })
    }

    pub fn n_t(&self) -> usize {
        self.g.first().map_or(0, |g| g.ncols())
    }

    pub fn n_r(&self) -> usize {
        self.g.first().map_or(0, |g| g.nrows())
    }

    pub fn l_irs(&self) -> usize {
        self.g.len()
    }

    pub fn k_users(&self) -> usize {
        self.h.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_t, n_r) = (self.n_t(), self.n_r());
        if self.g.iter().any(|g| g.nrows() != n_r || g.ncols() != n_t) {
            return Err(CoreError::Dimension("BS-IRS channels differ in shape".into()));
        }
        for hk in &self.h {
            if hk.len() != self.l_irs() || hk.iter().any(|h| h.len() != n_r) {
                return Err(CoreError::Dimension("IRS-user channels do not match the IRS set".into()));
            }
        }
        let finite = self.g.iter().flat_map(|g| g.iter()).chain(self.h.iter().flatten().flat_map(|h| h.iter()));
        if finite.into_iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::Domain("non-finite channel entry".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_design(channels: &ChannelSet, phases: &[CVector], switch: &[bool]) -> Result<()> {
    if phases.len() != channels.l_irs() || switch.len() != channels.l_irs() {
        return Err(CoreError::Dimension(format!(
            "expected {} phase vectors and switch flags, got {} and {}",
            channels.l_irs(),
            phases.len(),
            switch.len()
        )));
    }
    if phases.iter().any(|u| u.len() != channels.n_r()) {
        return Err(CoreError::Dimension("phase vector length differs from IRS size".into()));
    }
    Ok(())
}

/// `a_k` with `a_k^H = sum_l x_l h_kl^H diag(u_l) G_l`.
pub fn effective_channel(channels: &ChannelSet, phases: &[CVector], switch: &[bool], user_index: usize) -> Result<CVector> {
    check_design(channels, phases, switch)?;
    if user_index >= channels.k_users() {
        return Err(CoreError::Dimension(format!("user index {user_index} out of {}", channels.k_users())));
    }
    let mut a = CVector::zeros(channels.n_t());
    for l in (0..channels.l_irs()).filter(|&l| switch[l]) {
        // G^H diag(conj u) h
        let reflected = channels.h[user_index][l].zip_map(&phases[l], |h, u| h * u.conj());
        a += channels.g[l].ad_mul(&reflected);
    }
    Ok(a)
}

pub fn effective_channels(channels: &ChannelSet, phases: &[CVector], switch: &[bool]) -> Result<Vec<CVector>> {
    (0..channels.k_users()).map(|k| effective_channel(channels, phases, switch, k)).collect()
}
