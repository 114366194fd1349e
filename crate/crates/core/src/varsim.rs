//! VAR(1) processes with identity innovation covariance: simulation,
//! closed-form spectral densities, and the block-diagonal transition
//! matrices of the three benchmark settings.
//!
//! For `x_t = A x_{t-1} + e_t` with `e_t ~ N(0, I)`,
//! `f(lambda) = (2 pi)^{-1} M^{-1} M^{-H}` where `M = I - A e^{-i lambda}`,
//! so `f(lambda)^{-1} = 2 pi M^H M` exactly.
//!
//! Random streams: every generator is ChaCha20 seeded from a `u64` seed and
//! a stream number, so draws are reproducible bit-for-bit on any platform.
//! Condition 1 and condition 2 trajectories use streams
//! [`STREAM_CONDITION_1`] and [`STREAM_CONDITION_2`]; transition-matrix
//! construction uses [`STREAM_SETTING`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SddError};
use crate::realspace::{expand, ExpandedMatrix};
use crate::timeseries::TimeSeriesPanel;

pub const STREAM_CONDITION_1: u64 = 0;
pub const STREAM_CONDITION_2: u64 = 1;
pub const STREAM_SETTING: u64 = 2;

pub const DEFAULT_BURN_IN: usize = 1000;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest eigenvalue modulus of a square real matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0, |acc, z| acc.max(z.norm()))
}

/// A stable VAR(1) transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    transition: DMatrix<f64>,
}

impl VarModel {
    pub fn new(transition: DMatrix<f64>) -> Result<Self> {
        if !transition.is_square() || transition.nrows() == 0 {
            return Err(SddError::Argument(format!(
                "transition matrix must be square and non-empty, got {:?}",
                transition.shape()
            )));
        }
        let radius = spectral_radius(&transition);
        if radius >= 1.0 {
            return Err(SddError::Argument(format!(
                "unstable transition matrix: spectral radius {radius:.4}"
            )));
        }
        Ok(Self { transition })
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn p(&self) -> usize {
        self.transition.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.transition)
    }

    /// `I - A e^{-i lambda}`.
    fn lag_polynomial(&self, lambda: f64) -> DMatrix<Complex64> {
        let z = Complex64::from_polar(1.0, -lambda);
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - z * self.transition[(i, j)]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SettingId {
    /// Repeated upper-triangular 3x3 blocks.
    One,
    /// One random 60%-sparse large block plus a random 3x3 block.
    Two,
    /// One random 95%-sparse large block plus a random 3x3 block.
    Three,
}

impl SettingId {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(SettingId::One),
            2 => Ok(SettingId::Two),
            3 => Ok(SettingId::Three),
            _ => Err(SddError::Argument(format!("unknown setting {n}; expected 1, 2 or 3"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            SettingId::One => 1,
            SettingId::Two => 2,
            SettingId::Three => 3,
        }
    }

    /// Fraction of nonzero coefficients in the large block.
    fn large_block_density(self) -> f64 {
        match self {
            SettingId::One => 1.0,
            SettingId::Two => 0.40,
            SettingId::Three => 0.05,
        }
    }
}

/// Fraction of nonzero coefficients in the random 3x3 block.
const SMALL_BLOCK_DENSITY: f64 = 0.60;

const SETTING_ONE_BLOCK: [f64; 9] = [0.5, 0.9, 0.0, 0.0, 0.5, 0.9, 0.0, 0.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub id: SettingId,
    pub p: usize,
    pub rng_seed: u64,
    /// Redraws allowed per random block when its spectral radius reaches `stability_limit`.
    pub max_retries: usize,
    pub stability_limit: f64,
    /// When the large block stays unstable after all redraws, scale it to this
    /// spectral radius instead of failing. `None` turns the fallback off.
    pub rescale_to: Option<f64>,
}

impl SimSetting {
    pub fn new(id: SettingId, rng_seed: u64) -> Self {
        Self {
            id,
            p: 54,
            rng_seed,
            max_retries: 100,
            stability_limit: 0.99,
            rescale_to: Some(0.9),
        }
    }
}

/// Transition matrices for both conditions plus construction notes.
#[derive(Debug, Clone)]
pub struct SettingModels {
    pub condition1: VarModel,
    pub condition2: VarModel,
    /// Redraws spent on the random blocks.
    pub retries: usize,
    /// Scale applied to the large block (1.0 when untouched).
    pub large_block_scale: f64,
}

fn random_sparse_block<R: Rng>(rng: &mut R, dim: usize, density: f64) -> DMatrix<f64> {
    let total = dim * dim;
    let count = ((density * total as f64).round() as usize).min(total);
    let mut block = DMatrix::zeros(dim, dim);
    for idx in sample(rng, total, count).into_iter() {
        let magnitude = rng.random_range(0.2..0.5);
        let value = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        block[(idx / dim, idx % dim)] = value;
    }
    block
}

fn draw_stable<R: Rng>(
    rng: &mut R,
    dim: usize,
    density: f64,
    setting: &SimSetting,
    retries: &mut usize,
) -> (DMatrix<f64>, f64) {
    let mut block = random_sparse_block(rng, dim, density);
    let mut radius = spectral_radius(&block);
    let mut attempt = 0;
    while radius >= setting.stability_limit && attempt < setting.max_retries {
        attempt += 1;
        block = random_sparse_block(rng, dim, density);
        radius = spectral_radius(&block);
    }
    *retries += attempt;
    (block, radius)
}

/// Builds the condition-1 and condition-2 transition matrices. Condition 2
/// equals condition 1 with the final 3x3 block negated.
pub fn build_setting(setting: &SimSetting) -> Result<SettingModels> {
    let p = setting.p;
    let mut a1 = DMatrix::zeros(p, p);
    let mut retries = 0;
    let mut large_block_scale = 1.0;
    match setting.id {
        SettingId::One => {
            if !p.is_multiple_of(3) || p < 6 {
                return Err(SddError::Argument(format!(
                    "setting 1 needs p a multiple of 3 and at least 6, got {p}"
                )));
            }
            let block = DMatrix::from_row_slice(3, 3, &SETTING_ONE_BLOCK);
            for b in 0..p / 3 {
                a1.view_mut((3 * b, 3 * b), (3, 3)).copy_from(&block);
            }
        }
        SettingId::Two | SettingId::Three => {
            if p < 4 {
                return Err(SddError::Argument(format!(
                    "settings 2 and 3 need p >= 4, got {p}"
                )));
            }
            let mut rng = seeded_rng(setting.rng_seed, STREAM_SETTING);
            let large = p - 3;
            let (mut big, big_radius) = draw_stable(
                &mut rng,
                large,
                setting.id.large_block_density(),
                setting,
                &mut retries,
            );
            if big_radius >= setting.stability_limit {
                match setting.rescale_to {
                    Some(target) if target > 0.0 && target < setting.stability_limit => {
                        large_block_scale = target / big_radius;
                        big *= large_block_scale;
                    }
                    _ => {
                        return Err(SddError::Generation(format!(
                            "large block still unstable (spectral radius {big_radius:.3}) after {} redraws",
                            setting.max_retries
                        )))
                    }
                }
            }
            let (small, small_radius) =
                draw_stable(&mut rng, 3, SMALL_BLOCK_DENSITY, setting, &mut retries);
            if small_radius >= setting.stability_limit {
                return Err(SddError::Generation(format!(
                    "3x3 block still unstable (spectral radius {small_radius:.3}) after {} redraws",
                    setting.max_retries
                )));
            }
            a1.view_mut((0, 0), (large, large)).copy_from(&big);
            a1.view_mut((large, large), (3, 3)).copy_from(&small);
        }
    }
    let mut a2 = a1.clone();
    a2.view_mut((p - 3, p - 3), (3, 3)).neg_mut();
    Ok(SettingModels {
        condition1: VarModel::new(a1)?,
        condition2: VarModel::new(a2)?,
        retries,
        large_block_scale,
    })
}

/// Simulates `n` observations after `burn_in` discarded steps from `x_0 = 0`,
/// drawing innovations from stream 0 of `seed`.
pub fn simulate_var1(
    model: &VarModel,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeriesPanel> {
    simulate_var1_stream(model, n, burn_in, seed, STREAM_CONDITION_1)
}

pub fn simulate_var1_stream(
    model: &VarModel,
    n: usize,
    burn_in: usize,
    seed: u64,
    stream: u64,
) -> Result<TimeSeriesPanel> {
    if n < 2 {
        return Err(SddError::Argument(format!("need n >= 2, got {n}")));
    }
    let radius = model.spectral_radius();
    if radius >= 1.0 {
        return Err(SddError::Argument(format!(
            "unstable model: spectral radius {radius:.4}"
        )));
    }
    let p = model.p();
    let a = model.transition();
    let mut rng = seeded_rng(seed, stream);
    let mut x = DVector::<f64>::zeros(p);
    let mut next = DVector::<f64>::zeros(p);
    let mut data = DMatrix::zeros(n, p);
    for t in 0..burn_in + n {
        a.mul_to(&x, &mut next);
        for v in next.iter_mut() {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
        std::mem::swap(&mut x, &mut next);
        if t >= burn_in {
            data.row_mut(t - burn_in).copy_from(&x.transpose());
        }
    }
    TimeSeriesPanel::new(data, format!("var1-seed{seed}-stream{stream}"))
}

/// Closed-form spectral density at angular frequency `lambda`.
pub fn true_spectral_density(model: &VarModel, lambda: f64) -> Result<DMatrix<Complex64>> {
    let m = model.lag_polynomial(lambda);
    let inv = m
        .try_inverse()
        .ok_or(SddError::Singular { min_eigenvalue: 0.0 })?;
    let mut f = &inv * inv.adjoint();
    f.scale_mut(1.0 / (2.0 * PI));
    hermitize(&mut f);
    Ok(f)
}

/// Closed-form inverse spectral density `2 pi M^H M`.
pub fn true_inverse_spectral_density(model: &VarModel, lambda: f64) -> DMatrix<Complex64> {
    let m = model.lag_polynomial(lambda);
    let mut g = m.adjoint() * &m;
    g.scale_mut(2.0 * PI);
    hermitize(&mut g);
    g
}

fn hermitize(m: &mut DMatrix<Complex64>) {
    let p = m.nrows();
    for i in 0..p {
        m[(i, i)].im = 0.0;
        for k in (i + 1)..p {
            m[(k, i)] = m[(i, k)].conj();
        }
    }
}

/// Expanded `f1(lambda)^{-1} - f2(lambda)^{-1}`.
pub fn true_difference(m1: &VarModel, m2: &VarModel, lambda: f64) -> Result<ExpandedMatrix> {
    if m1.p() != m2.p() {
        return Err(SddError::Argument(format!(
            "models have p={} and p={}",
            m1.p(),
            m2.p()
        )));
    }
    let diff = true_inverse_spectral_density(m1, lambda) - true_inverse_spectral_density(m2, lambda);
    Ok(expand(&diff))
}
