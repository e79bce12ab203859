//! Deterministic geometry, antenna/RU gains, free-space path loss, absorption
//! loss, and noise power for the three-hop link.

use serde::{Deserialize, Serialize};

use crate::channel::LosMode;
use crate::error::{Error, Result};
use crate::numerics::bessel_j1;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Full experiment description. Defaults reproduce the reference scenario:
/// 300 GHz carrier, 2 GHz bandwidth, 18-element surfaces, two users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Carrier frequency, Hz.
    pub frequency: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Per-user transmit power, linear scale.
    pub tx_power: f64,
    /// IRS1 element count M.
    pub irs1_size: usize,
    /// IRS2 element count N.
    pub irs2_size: usize,
    /// Coordinates, meters.
    pub irs1_pos: [f64; 3],
    pub irs2_pos: [f64; 3],
    pub rx_pos: [f64; 3],
    /// User-to-IRS1 distances, meters. r_t1 is the swept distance.
    pub r_t1: f64,
    pub r_t2: f64,
    /// User antenna height, meters.
    pub user_height: f64,
    /// Antenna diameters, meters.
    pub d_t: f64,
    pub d_r: f64,
    /// Aperture efficiencies in (0, 1].
    pub e_t: f64,
    pub e_r: f64,
    /// Reflection magnitude in (0, 1].
    pub alpha: f64,
    /// Rician factors for the first and third hop.
    pub k1: f64,
    pub k2: f64,
    /// Spatial correlation coefficient of the IRS1-IRS2 channel.
    pub rho: f64,
    /// Correlation phase progression, radians; derived from the IRS2
    /// incidence angle when absent.
    pub corr_theta: Option<f64>,
    /// Noise PSD in dBm/Hz.
    pub noise_psd: f64,
    /// Receiver noise figure in dB.
    pub noise_figure: f64,
    /// Exponential absorption coefficient, 1/m. Zero disables absorption.
    pub absorption_coeff: f64,
    /// LOS component layout for the Rician links.
    pub los_mode: LosMode,
    /// Surface normals; computed from the reflection geometry when absent.
    pub irs1_normal: Option<[f64; 3]>,
    pub irs2_normal: Option<[f64; 3]>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            frequency: 300e9,
            bandwidth: 2e9,
            tx_power: 1.0,
            irs1_size: 18,
            irs2_size: 18,
            irs1_pos: [5.0, 10.0, 12.0],
            irs2_pos: [10.0, 10.0, 12.0],
            rx_pos: [20.0, 0.0, 5.0],
            r_t1: 3.0,
            r_t2: 15.0,
            user_height: 5.0,
            d_t: 0.12,
            d_r: 0.12,
            e_t: 1.0,
            e_r: 1.0,
            alpha: 1.0,
            k1: 10.0,
            k2: 10.0,
            rho: 0.9,
            corr_theta: None,
            noise_psd: -174.0,
            noise_figure: 10.0,
            absorption_coeff: 0.0,
            los_mode: LosMode::Ones,
            irs1_normal: None,
            irs2_normal: None,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn user_distances(&self) -> Vec<f64> {
        vec![self.r_t1, self.r_t2]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frequency", self.frequency),
            ("bandwidth", self.bandwidth),
            ("tx_power", self.tx_power),
            ("r_t1", self.r_t1),
            ("r_t2", self.r_t2),
            ("d_t", self.d_t),
            ("d_r", self.d_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("e_t", self.e_t), ("e_r", self.e_r), ("alpha", self.alpha)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0,1], got {v}")));
            }
        }
        if self.irs1_size == 0 || self.irs2_size == 0 {
            return Err(Error::Config("irs1_size and irs2_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must be in [0,1], got {}", self.rho)));
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2)] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.absorption_coeff < 0.0 {
            return Err(Error::Config(format!(
                "absorption_coeff must be >= 0, got {}",
                self.absorption_coeff
            )));
        }
        Ok(())
    }
}

/// Derived distances and incidence/reflection angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Per-user distance to IRS1, meters.
    pub r_tk: Vec<f64>,
    pub r_2: f64,
    pub r_3: f64,
    /// Per-user incidence angle at IRS1.
    pub theta_i1: Vec<f64>,
    pub theta_r1: f64,
    pub theta_i2: f64,
    pub theta_r2: f64,
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn unit3(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Unsigned angle between a ray and the surface normal line, in [0, pi/2].
fn angle_to_normal(ray: [f64; 3], normal: [f64; 3]) -> f64 {
    let c = (dot3(unit3(ray), unit3(normal)).abs()).clamp(0.0, 1.0);
    c.acos()
}

/// Mirror orientation for one incident/outgoing direction pair.
fn reflector_normal(incident: [f64; 3], outgoing: [f64; 3]) -> [f64; 3] {
    let vi = unit3(incident);
    let vo = unit3(outgoing);
    unit3([vo[0] - vi[0], vo[1] - vi[1], vo[2] - vi[2]])
}

/// Nominal user position: in front of IRS1 (toward -y) at the configured
/// horizontal offset and user height. The configured distance itself feeds the
/// path loss; the position only fixes the incidence angle.
fn user_position(cfg: &ScenarioConfig, r_tk: f64) -> Result<[f64; 3]> {
    Ok([
        cfg.irs1_pos[0],
        cfg.irs1_pos[1] - r_tk,
        cfg.user_height,
    ])
}

pub fn derive_geometry(cfg: &ScenarioConfig) -> Result<Geometry> {
    cfg.validate()?;
    let r_2 = norm3(sub3(cfg.irs2_pos, cfg.irs1_pos));
    let r_3 = norm3(sub3(cfg.rx_pos, cfg.irs2_pos));
    if r_2 <= 0.0 || r_3 <= 0.0 {
        return Err(Error::Geometry("coincident nodes give a zero hop distance".into()));
    }
    let r_tk = cfg.user_distances();
    let users: Vec<[f64; 3]> = r_tk
        .iter()
        .map(|&d| user_position(cfg, d))
        .collect::<Result<_>>()?;

    let to_irs2 = sub3(cfg.irs2_pos, cfg.irs1_pos);
    let to_rx = sub3(cfg.rx_pos, cfg.irs2_pos);
    let n1 = match cfg.irs1_normal {
        Some(n) => unit3(n),
        None => reflector_normal(sub3(cfg.irs1_pos, users[0]), to_irs2),
    };
    let n2 = match cfg.irs2_normal {
        Some(n) => unit3(n),
        None => reflector_normal(to_irs2, to_rx),
    };

    let theta_i1 = users
        .iter()
        .map(|&u| angle_to_normal(sub3(cfg.irs1_pos, u), n1))
        .collect();
    Ok(Geometry {
        r_tk,
        r_2,
        r_3,
        theta_i1,
        theta_r1: angle_to_normal(to_irs2, n1),
        theta_i2: angle_to_normal(to_irs2, n2),
        theta_r2: angle_to_normal(to_rx, n2),
    })
}

/// Parabolic-dish gain. Boresight value e (pi D / lambda)^2; off-boresight
/// the squared-magnitude aperture pattern (2 J1(u)/u)^2 with
/// u = pi D sin(angle) / lambda, so the gain is non-negative with its first
/// null at the first J1 root.
pub fn antenna_gain(
    angle_off_boresight: f64,
    diameter: f64,
    efficiency: f64,
    wavelength: f64,
) -> Result<f64> {
    if !angle_off_boresight.is_finite() {
        return Err(Error::Domain("antenna angle must be finite".into()));
    }
    if diameter <= 0.0 || wavelength <= 0.0 {
        return Err(Error::Domain("diameter and wavelength must be > 0".into()));
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain(format!(
            "efficiency must be in (0,1], got {efficiency}"
        )));
    }
    let boresight = efficiency * (std::f64::consts::PI * diameter / wavelength).powi(2);
    let u = std::f64::consts::PI * diameter * angle_off_boresight.sin() / wavelength;
    let pattern = if u.abs() < 1e-8 {
        1.0
    } else {
        let p = 2.0 * bessel_j1(u)? / u;
        p * p
    };
    Ok(boresight * pattern)
}

/// Reflecting-unit gain 4 cos(theta) on [0, pi/2].
pub fn ru_gain(theta: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(Error::Domain(format!(
            "RU gain angle must be in [0, pi/2], got {theta}"
        )));
    }
    Ok(4.0 * theta.cos())
}

/// Combined three-hop free-space factor:
/// (lambda/4pi)^6 G_t G(i1) G(r1) G(i2) G(r2) G_r / (r_tk^2 r_2^2 r_3^2).
pub fn fspl_total(geom: &Geometry, cfg: &ScenarioConfig, user: usize) -> Result<f64> {
    let lam = cfg.wavelength();
    let g_t = antenna_gain(0.0, cfg.d_t, cfg.e_t, lam)?;
    let g_r = antenna_gain(0.0, cfg.d_r, cfg.e_r, lam)?;
    let gains = g_t
        * ru_gain(geom.theta_i1[user])?
        * ru_gain(geom.theta_r1)?
        * ru_gain(geom.theta_i2)?
        * ru_gain(geom.theta_r2)?
        * g_r;
    let r_tk = geom.r_tk[user];
    Ok((lam / (4.0 * std::f64::consts::PI)).powi(6) * gains
        / (r_tk * r_tk * geom.r_2 * geom.r_2 * geom.r_3 * geom.r_3))
}

/// exp(-kappa * path), in (0, 1].
pub fn absorption_loss(kappa: f64, total_path: f64) -> f64 {
    (-kappa * total_path).exp()
}

/// Total loss factor L = FSPL * absorption over the full traveled path.
pub fn total_loss(geom: &Geometry, cfg: &ScenarioConfig, user: usize) -> Result<f64> {
    let path = geom.r_tk[user] + geom.r_2 + geom.r_3;
    Ok(fspl_total(geom, cfg, user)? * absorption_loss(cfg.absorption_coeff, path))
}

/// Linear noise power from PSD (dBm/Hz), bandwidth, and noise figure.
/// The dB sum is converted at the watt scale, matching the reference
/// linear value 7.9621e-11 for (-174, 2 GHz, 10 dB).
pub fn noise_power(noise_psd: f64, bandwidth: f64, noise_figure: f64) -> f64 {
    10f64.powf((noise_psd + 10.0 * bandwidth.log10() + noise_figure - 30.0) / 10.0)
}
