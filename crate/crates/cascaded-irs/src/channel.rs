//! Stochastic channel generation: Rician user->IRS1 and IRS2->Rx links and a
//! spatially correlated Rayleigh IRS1->IRS2 link, all with unit per-entry power.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{psd_sqrt, ComplexMatrix};

/// Counter-based reproducible RNG handle: identical (seed, stream_id) pairs
/// reproduce identical draws bit-for-bit, independent of call order elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derive a child stream; mixing keeps distinct (id, child) pairs disjoint.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: self
                .stream_id
                .wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add(tag),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Exponential spatial correlation: entry (a,b) is rho^|a-b| e^{j |a-b| theta}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub rho: f64,
    pub theta: f64,
    pub size: usize,
}

impl CorrelationSpec {
    pub fn new(rho: f64, theta: f64, size: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must be in [0,1], got {rho}")));
        }
        if size == 0 {
            return Err(Error::Domain("correlation size must be >= 1".into()));
        }
        Ok(Self { rho, theta, size })
    }
}

/// One draw of the three-hop small-scale fading state plus the deterministic
/// propagation phases.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Per-user 1xM user->IRS1 channels.
    pub h_t: Vec<ComplexMatrix>,
    /// MxN IRS1->IRS2 channel.
    pub h_mn: ComplexMatrix,
    /// Nx1 IRS2->Rx channel.
    pub h_r: ComplexMatrix,
    /// Per-user bulk phase 2 pi r_tk / lambda.
    pub omega_k: Vec<f64>,
    /// Bulk phase 2 pi r_3 / lambda.
    pub omega_3: f64,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.h_t.len()
    }

    pub fn irs1_size(&self) -> usize {
        self.h_mn.rows()
    }

    pub fn irs2_size(&self) -> usize {
        self.h_mn.cols()
    }
}

pub fn correlation_matrix(spec: &CorrelationSpec) -> Result<ComplexMatrix> {
    if !(0.0..=1.0).contains(&spec.rho) {
        return Err(Error::Domain(format!("rho must be in [0,1], got {}", spec.rho)));
    }
    let n = spec.size;
    Ok(ComplexMatrix::from_fn(n, n, |a, b| {
        let d = a.abs_diff(b) as f64;
        let mag = if d == 0.0 { 1.0 } else { spec.rho.powf(d) };
        let phase = d * spec.theta;
        let v = Complex64::from_polar(mag, phase);
        if a > b {
            v.conj()
        } else {
            v
        }
    }))
}

fn standard_complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician fading vector: sqrt(K/(K+1)) los + sqrt(1/(K+1)) g, g iid CN(0,1).
pub fn sample_rician(
    length: usize,
    k_factor: f64,
    los: &[Complex64],
    stream: RngStream,
) -> Result<Vec<Complex64>> {
    if k_factor < 0.0 || !k_factor.is_finite() {
        return Err(Error::Domain(format!(
            "rician factor must be finite and >= 0, got {k_factor}"
        )));
    }
    if los.len() != length {
        return Err(Error::Shape(format!(
            "los length {} does not match requested length {}",
            los.len(),
            length
        )));
    }
    let los_scale = (k_factor / (k_factor + 1.0)).sqrt();
    let nlos_scale = (1.0 / (k_factor + 1.0)).sqrt();
    let mut rng = stream.rng();
    Ok(los
        .iter()
        .map(|l| los_scale * l + nlos_scale * standard_complex_gaussian(&mut rng))
        .collect())
}

/// Kronecker-separable correlated Rayleigh draw: H = S_M G S_N^H with G iid CN(0,1).
pub fn sample_correlated_rayleigh(
    m: usize,
    n: usize,
    row_spec: &CorrelationSpec,
    col_spec: &CorrelationSpec,
    stream: RngStream,
) -> Result<ComplexMatrix> {
    if row_spec.size != m || col_spec.size != n {
        return Err(Error::Shape(format!(
            "correlation sizes ({}, {}) do not match requested ({m}, {n})",
            row_spec.size, col_spec.size
        )));
    }
    let s_m = psd_sqrt(&correlation_matrix(row_spec)?, 1e-9)?;
    let s_n = psd_sqrt(&correlation_matrix(col_spec)?, 1e-9)?;
    let mut rng = stream.rng();
    let g = ComplexMatrix::from_fn(m, n, |_, _| standard_complex_gaussian(&mut rng));
    s_m.mul(&g)?.mul(&s_n.adjoint())
}

/// Deterministic propagation phase 2 pi d / lambda.
pub fn path_phase(distance: f64, wavelength: f64) -> Result<f64> {
    if wavelength <= 0.0 {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    if distance < 0.0 {
        return Err(Error::Domain(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * distance / wavelength)
}

/// How LOS component phases are laid out across the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LosMode {
    /// All-ones LOS vectors; the bulk phase is carried by omega_k / omega_3.
    #[default]
    Ones,
    /// Half-wavelength steering vector with per-element phase 2 pi d i sin(angle) / lambda.
    Steering,
}

pub fn los_vector(length: usize, mode: LosMode, angle: f64, wavelength: f64) -> Vec<Complex64> {
    match mode {
        LosMode::Ones => vec![Complex64::ONE; length],
        LosMode::Steering => {
            let d = wavelength / 2.0;
            (0..length)
                .map(|i| {
                    let phase = 2.0 * std::f64::consts::PI * d * i as f64 * angle.sin() / wavelength;
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        }
    }
}

/// Everything the channel sampler needs from a scenario, decoupled from the
/// link-budget config type.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub m: usize,
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    pub rho: f64,
    pub theta: f64,
    pub los_mode: LosMode,
    pub wavelength: f64,
    /// Per-user distance to IRS1, meters.
    pub user_distances: Vec<f64>,
    /// IRS2 -> Rx distance, meters.
    pub r3: f64,
    /// Per-user LOS departure angle, used only in steering mode.
    pub los_angles_tx: Vec<f64>,
    pub los_angle_rx: f64,
}

/// Draw one full realization; distinct links use disjoint child streams so
/// Monte-Carlo trials remain order-independent.
pub fn sample_realization(spec: &ChannelSpec, stream: RngStream) -> Result<ChannelRealization> {
    let mut h_t = Vec::with_capacity(spec.user_distances.len());
    let mut omega_k = Vec::with_capacity(spec.user_distances.len());
    for (k, &dist) in spec.user_distances.iter().enumerate() {
        let los = los_vector(spec.m, spec.los_mode, spec.los_angles_tx[k], spec.wavelength);
        let v = sample_rician(spec.m, spec.k1, &los, stream.child(1 + k as u64))?;
        h_t.push(ComplexMatrix::new(1, spec.m, v)?);
        omega_k.push(path_phase(dist, spec.wavelength)?);
    }
    let row_spec = CorrelationSpec::new(spec.rho, spec.theta, spec.m)?;
    let col_spec = CorrelationSpec::new(spec.rho, spec.theta, spec.n)?;
    let h_mn = sample_correlated_rayleigh(spec.m, spec.n, &row_spec, &col_spec, stream.child(100))?;
    let los_r = los_vector(spec.n, spec.los_mode, spec.los_angle_rx, spec.wavelength);
    let h_r = ComplexMatrix::new(
        spec.n,
        1,
        sample_rician(spec.n, spec.k2, &los_r, stream.child(200))?,
    )?;
    Ok(ChannelRealization {
        h_t,
        h_mn,
        h_r,
        omega_k,
        omega_3: path_phase(spec.r3, spec.wavelength)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn correlation_rho_zero_is_identity() {
        let r = correlation_matrix(&CorrelationSpec::new(0.0, 0.4, 3).unwrap()).unwrap();
        let id = ComplexMatrix::identity(3);
        assert!(r.sub(&id).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn correlation_half_matches_direct_evaluation() {
        let r = correlation_matrix(&CorrelationSpec::new(0.5, 0.0, 2).unwrap()).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[(0, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r[(1, 0)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn correlation_rho_one_all_ones() {
        let r = correlation_matrix(&CorrelationSpec::new(1.0, 0.0, 2).unwrap()).unwrap();
        for e in r.entries() {
            assert_abs_diff_eq!(e.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn correlation_is_hermitian_with_phase() {
        let r = correlation_matrix(&CorrelationSpec::new(0.7, 0.9, 5).unwrap()).unwrap();
        assert!(r.is_hermitian(1e-12));
    }

    #[test]
    fn correlation_rejects_bad_rho() {
        assert!(CorrelationSpec::new(1.5, 0.0, 2).is_err());
    }

    #[test]
    fn rician_large_k_collapses_to_los() {
        let los = vec![Complex64::from_polar(1.0, 0.3); 6];
        let v = sample_rician(6, 1e12, &los, RngStream::new(1, 0)).unwrap();
        for (a, b) in v.iter().zip(&los) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn rician_k_zero_unit_power() {
        let los = vec![Complex64::ONE; 4];
        let mut acc = 0.0;
        let draws = 10_000;
        for t in 0..draws {
            let v = sample_rician(4, 0.0, &los, RngStream::new(9, t)).unwrap();
            acc += v.iter().map(|e| e.norm_sqr()).sum::<f64>() / 4.0;
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |h|^2 = {mean}");
    }

    #[test]
    fn rician_deterministic_under_seed() {
        let los = vec![Complex64::ONE; 18];
        let a = sample_rician(18, 10.0, &los, RngStream::new(7, 3)).unwrap();
        let b = sample_rician(18, 10.0, &los, RngStream::new(7, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rician_rejects_negative_k() {
        let los = vec![Complex64::ONE; 2];
        assert!(sample_rician(2, -0.1, &los, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn rayleigh_uncorrelated_entries() {
        let spec = CorrelationSpec::new(0.0, 0.0, 4).unwrap();
        let mut cross = Complex64::ZERO;
        let draws = 10_000;
        for t in 0..draws {
            let h = sample_correlated_rayleigh(4, 4, &spec, &spec, RngStream::new(3, t)).unwrap();
            cross += h[(0, 0)] * h[(0, 1)].conj();
        }
        let c = (cross / draws as f64).norm();
        assert!(c < 0.05, "adjacent cross-correlation {c}");
    }

    #[test]
    fn rayleigh_full_correlation_rank_one() {
        let spec = CorrelationSpec::new(1.0, 0.0, 3).unwrap();
        let h = sample_correlated_rayleigh(3, 3, &spec, &spec, RngStream::new(5, 0)).unwrap();
        let first = h[(0, 0)];
        for e in h.entries() {
            assert!((e - first).norm() < 1e-10);
        }
    }

    #[test]
    fn rayleigh_correlation_fidelity() {
        // Sample covariance of column-adjacent entries tracks rho^1.
        for &rho in &[0.25, 0.5, 0.75, 0.9] {
            let spec = CorrelationSpec::new(rho, 0.0, 3).unwrap();
            let mut cross = Complex64::ZERO;
            let draws = 10_000;
            for t in 0..draws {
                let h =
                    sample_correlated_rayleigh(3, 3, &spec, &spec, RngStream::new(11, t)).unwrap();
                cross += h[(0, 0)] * h[(0, 1)].conj();
            }
            let c = (cross / draws as f64).re;
            assert!((c - rho).abs() < 0.05, "rho {rho}: sample correlation {c}");
        }
    }

    #[test]
    fn rayleigh_unit_power() {
        let spec = CorrelationSpec::new(0.9, 0.3, 3).unwrap();
        let mut acc = 0.0;
        let draws = 10_000;
        for t in 0..draws {
            let h = sample_correlated_rayleigh(3, 3, &spec, &spec, RngStream::new(13, t)).unwrap();
            acc += h.entries().iter().map(|e| e.norm_sqr()).sum::<f64>() / 9.0;
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |entry|^2 = {mean}");
    }

    #[test]
    fn path_phase_values() {
        let lam = 1e-3;
        assert_abs_diff_eq!(
            path_phase(lam, lam).unwrap(),
            2.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_eq!(path_phase(0.0, lam).unwrap(), 0.0);
        assert_abs_diff_eq!(
            path_phase(15.0, lam).unwrap(),
            2.0 * std::f64::consts::PI * 15_000.0,
            epsilon = 1e-6
        );
        assert!(path_phase(1.0, 0.0).is_err());
    }

    #[test]
    fn realization_dimensions_and_determinism() {
        let spec = ChannelSpec {
            m: 4,
            n: 3,
            k1: 10.0,
            k2: 10.0,
            rho: 0.5,
            theta: 0.2,
            los_mode: LosMode::Ones,
            wavelength: 1e-3,
            user_distances: vec![3.0, 15.0],
            r3: 15.78,
            los_angles_tx: vec![0.0, 0.0],
            los_angle_rx: 0.0,
        };
        let a = sample_realization(&spec, RngStream::new(42, 0)).unwrap();
        let b = sample_realization(&spec, RngStream::new(42, 0)).unwrap();
        assert_eq!(a.h_mn.entries(), b.h_mn.entries());
        assert_eq!(a.h_t[0].entries(), b.h_t[0].entries());
        assert_eq!(a.h_r.entries(), b.h_r.entries());
        assert_eq!((a.irs1_size(), a.irs2_size(), a.num_users()), (4, 3, 2));
    }
}
