//! Received power, SINR, rates, and the null-interference upper bound.
//!
//! Received power is computed both as the elementwise double sum and as the
//! diagonal-matrix product; the two routes are algebraically identical and
//! debug builds assert their agreement on every call.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// The M+N controllable phase shifts, stored reduced to [0, 2pi).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    eta: Vec<f64>,
    psi: Vec<f64>,
}

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn wrap_2pi(x: f64) -> f64 {
    x.rem_euclid(TWO_PI)
}

/// Wrap to (-pi, pi].
pub fn wrap_pi(x: f64) -> f64 {
    let w = x.rem_euclid(TWO_PI);
    if w > std::f64::consts::PI {
        w - TWO_PI
    } else {
        w
    }
}

impl PhaseConfig {
    pub fn new(eta: Vec<f64>, psi: Vec<f64>) -> Self {
        Self {
            eta: eta.into_iter().map(wrap_2pi).collect(),
            psi: psi.into_iter().map(wrap_2pi).collect(),
        }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            eta: vec![0.0; m],
            psi: vec![0.0; n],
        }
    }

    pub fn from_flat(values: &[f64], m: usize) -> Result<Self> {
        if values.len() < m {
            return Err(Error::Shape(format!(
                "need at least {m} phases, got {}",
                values.len()
            )));
        }
        Ok(Self::new(values[..m].to_vec(), values[m..].to_vec()))
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.eta.iter().chain(self.psi.iter()).copied().collect()
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub p_rx: Vec<f64>,
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub upper_bound: f64,
}

fn check_dims(ch: &ChannelRealization, phases: &PhaseConfig, user: usize) -> Result<()> {
    if user >= ch.num_users() {
        return Err(Error::Shape(format!(
            "user index {user} out of range for {} users",
            ch.num_users()
        )));
    }
    if phases.eta.len() != ch.irs1_size() || phases.psi.len() != ch.irs2_size() {
        return Err(Error::Shape(format!(
            "phase lengths ({}, {}) do not match channel ({}, {})",
            phases.eta.len(),
            phases.psi.len(),
            ch.irs1_size(),
            ch.irs2_size()
        )));
    }
    Ok(())
}

/// Received power by the elementwise double sum over (m, n) phasors.
pub fn received_power(
    ch: &ChannelRealization,
    phases: &PhaseConfig,
    loss: f64,
    tx_power: f64,
    user: usize,
    alpha: f64,
) -> Result<f64> {
    check_dims(ch, phases, user)?;
    if loss <= 0.0 || tx_power <= 0.0 {
        return Err(Error::Domain("loss and tx_power must be > 0".into()));
    }
    let h_t = &ch.h_t[user];
    let mut acc = Complex64::ZERO;
    let mut mag_sum = 0.0;
    for m in 0..ch.irs1_size() {
        for n in 0..ch.irs2_size() {
            let ht = h_t[(0, m)];
            let hm = ch.h_mn[(m, n)];
            let hr = ch.h_r[(n, 0)];
            let mag = ht.norm() * hm.norm() * hr.norm() * alpha * alpha;
            mag_sum += mag;
            let phase = ht.arg()
                + phases.eta[m]
                + hm.arg()
                + phases.psi[n]
                + hr.arg()
                + ch.omega_k[user]
                + ch.omega_3;
            acc += Complex64::from_polar(mag, -phase);
        }
    }
    let p = loss * acc.norm_sqr() * tx_power;
    debug_assert!({
        // The matrix route sums in a different order; near-cancellation makes
        // a purely relative comparison meaningless, so scale by the coherent
        // (all-aligned) power.
        let pm = received_power_matrix(ch, phases, loss, tx_power, user, alpha).unwrap();
        (p - pm).abs() <= 1e-10 * loss * tx_power * mag_sum * mag_sum + 1e-9 * p.abs().max(pm.abs())
    });
    Ok(p)
}

/// Received power by the matrix route h_r^H Phi_N H^H Phi_M h_t^H.
pub fn received_power_matrix(
    ch: &ChannelRealization,
    phases: &PhaseConfig,
    loss: f64,
    tx_power: f64,
    user: usize,
    alpha: f64,
) -> Result<f64> {
    check_dims(ch, phases, user)?;
    let n = ch.irs2_size();
    let m = ch.irs1_size();
    let phi_n = ComplexMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::from_polar(alpha, -phases.psi[r])
        } else {
            Complex64::ZERO
        }
    });
    let phi_m = ComplexMatrix::from_fn(m, m, |r, c| {
        if r == c {
            Complex64::from_polar(alpha, -phases.eta[r])
        } else {
            Complex64::ZERO
        }
    });
    let amp = ch
        .h_r
        .adjoint()
        .mul(&phi_n)?
        .mul(&ch.h_mn.adjoint())?
        .mul(&phi_m)?
        .mul(&ch.h_t[user].adjoint())?;
    let scalar = amp[(0, 0)]
        * Complex64::from_polar(1.0, -ch.omega_3)
        * Complex64::from_polar(1.0, -ch.omega_k[user]);
    Ok(loss * scalar.norm_sqr() * tx_power)
}

/// gamma_k = P_k / (sum_{i != k} P_i + noise).
pub fn sinr(p_rx_all: &[f64], user: usize, noise: f64) -> Result<f64> {
    if noise <= 0.0 {
        return Err(Error::Domain("noise power must be > 0".into()));
    }
    if user >= p_rx_all.len() {
        return Err(Error::Shape(format!("user {user} out of range")));
    }
    let interference: f64 = p_rx_all
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != user)
        .map(|(_, &p)| p)
        .sum();
    Ok(p_rx_all[user] / (interference + noise))
}

pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&g| rate(g)).sum()
}

/// All-magnitude triangle bound with null interference: for each user,
/// gamma^U = L (sum |h_t||H||h_r| alpha^2)^2 P_t / noise.
pub fn upper_bound_sum_rate(
    ch: &ChannelRealization,
    losses: &[f64],
    tx_power: f64,
    noise: f64,
    alpha: f64,
) -> Result<f64> {
    if losses.len() != ch.num_users() {
        return Err(Error::Shape("one loss per user required".into()));
    }
    let mut total = 0.0;
    for user in 0..ch.num_users() {
        let mut mag_sum = 0.0;
        for m in 0..ch.irs1_size() {
            for n in 0..ch.irs2_size() {
                mag_sum += ch.h_t[user][(0, m)].norm()
                    * ch.h_mn[(m, n)].norm()
                    * ch.h_r[(n, 0)].norm()
                    * alpha
                    * alpha;
            }
        }
        let gamma_u = losses[user] * mag_sum * mag_sum * tx_power / noise;
        total += rate(gamma_u);
    }
    Ok(total)
}

/// Evaluate one phase configuration on one realization end-to-end.
pub fn evaluate(
    ch: &ChannelRealization,
    phases: &PhaseConfig,
    losses: &[f64],
    tx_power: f64,
    noise: f64,
    alpha: f64,
) -> Result<RatePoint> {
    let p_rx: Vec<f64> = (0..ch.num_users())
        .map(|u| received_power(ch, phases, losses[u], tx_power, u, alpha))
        .collect::<Result<_>>()?;
    let sinrs: Vec<f64> = (0..ch.num_users())
        .map(|u| sinr(&p_rx, u, noise))
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = sinrs.iter().map(|&g| rate(g)).collect();
    Ok(RatePoint {
        sum_rate: sum_rate(&sinrs),
        upper_bound: upper_bound_sum_rate(ch, losses, tx_power, noise, alpha)?,
        p_rx,
        sinr: sinrs,
        rate: rates,
    })
}
