//! Classical phase-selection strategies: the over-determined alignment system,
//! minimum-norm pseudo-inverse solve, the block (group replication) solution,
//! discretized exhaustive grid, coordinate ascent, and the random baseline.

use std::time::Instant;

use rand::Rng;

use crate::channel::{ChannelRealization, RngStream};
use crate::error::{Error, Result};
use crate::metrics::{wrap_pi, PhaseConfig, TWO_PI};
use crate::numerics::{least_squares_min_norm, svd, ComplexMatrix};

/// The M*N x (M+N) phase-alignment system A theta = c.
///
/// Row (m, n) has ones in columns m and M+n; its right-hand side is the
/// negated channel phase, wrapped to (-pi, pi]. The matrix has rank M+N-1:
/// the sum of the first M columns equals the sum of the last N columns.
#[derive(Debug, Clone)]
pub struct PhaseSystem {
    pub a: ComplexMatrix,
    pub c: Vec<f64>,
    pub m: usize,
    pub n: usize,
}

impl PhaseSystem {
    pub fn row_index(&self, m: usize, n: usize) -> usize {
        m * self.n + n
    }

    pub fn rank(&self, tol: f64) -> Result<usize> {
        let f = svd(&self.a)?;
        let sigma_max = f.singular_values.first().copied().unwrap_or(0.0);
        let t = if tol > 0.0 { tol } else { 1e-10 * sigma_max.max(1.0) };
        Ok(f.singular_values.iter().filter(|&&s| s > t).count())
    }
}

/// Result of one solver invocation.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub phases: PhaseConfig,
    pub objective: f64,
    pub evaluations: u64,
    pub wall_time: f64,
}

fn alignment_rhs(ch: &ChannelRealization, user: usize, m: usize, n: usize) -> f64 {
    wrap_pi(
        -(ch.h_t[user][(0, m)].arg()
            + ch.h_mn[(m, n)].arg()
            + ch.h_r[(n, 0)].arg()
            + ch.omega_k[user]
            + ch.omega_3),
    )
}

pub fn assemble_system(ch: &ChannelRealization, user: usize) -> PhaseSystem {
    let m = ch.irs1_size();
    let n = ch.irs2_size();
    let mut a = ComplexMatrix::zeros(m * n, m + n);
    let mut c = Vec::with_capacity(m * n);
    for mi in 0..m {
        for ni in 0..n {
            let row = mi * n + ni;
            a[(row, mi)] = num_complex::Complex64::ONE;
            a[(row, m + ni)] = num_complex::Complex64::ONE;
            c.push(alignment_rhs(ch, user, mi, ni));
        }
    }
    PhaseSystem { a, c, m, n }
}

/// Minimum-norm least-squares solve of the alignment system, wrapped to
/// [0, 2pi) on output only.
pub fn solve_pinv(sys: &PhaseSystem) -> Result<PhaseConfig> {
    let c = ComplexMatrix::from_real(sys.c.len(), 1, &sys.c)?;
    let theta = least_squares_min_norm(&sys.a, &c)?;
    let flat: Vec<f64> = (0..sys.m + sys.n).map(|i| theta[(i, 0)].re).collect();
    PhaseConfig::from_flat(&flat, sys.m)
}

/// Group-replication solution: one representative phase per block of
/// `n_blk` adjacent elements on each surface.
pub fn solve_block(ch: &ChannelRealization, n_blk: usize, user: usize) -> Result<PhaseConfig> {
    let m = ch.irs1_size();
    let n = ch.irs2_size();
    if n_blk == 0 {
        return Err(Error::Domain("block size must be >= 1".into()));
    }
    if m % n_blk != 0 || n % n_blk != 0 {
        return Err(Error::Domain(format!(
            "block size {n_blk} must divide both M={m} and N={n}"
        )));
    }
    if m + n < n_blk {
        // Degenerate branch: fall back to the full per-element solve.
        return solve_pinv(&assemble_system(ch, user));
    }
    let v = m / n_blk;
    let w = n / n_blk;
    // Reduced V*W x (V+W) system over group representatives.
    let mut a = ComplexMatrix::zeros(v * w, v + w);
    let mut c = Vec::with_capacity(v * w);
    for vi in 0..v {
        for wi in 0..w {
            let row = vi * w + wi;
            a[(row, vi)] = num_complex::Complex64::ONE;
            a[(row, v + wi)] = num_complex::Complex64::ONE;
            c.push(alignment_rhs(ch, user, vi * n_blk, wi * n_blk));
        }
    }
    let reduced = PhaseSystem { a, c, m: v, n: w };
    let rep = solve_pinv(&reduced)?;
    let mut eta = Vec::with_capacity(m);
    for vi in 0..v {
        eta.extend(std::iter::repeat(rep.eta()[vi]).take(n_blk));
    }
    let mut psi = Vec::with_capacity(n);
    for wi in 0..w {
        psi.extend(std::iter::repeat(rep.psi()[wi]).take(n_blk));
    }
    Ok(PhaseConfig::new(eta, psi))
}

fn grid_values(step: f64) -> Vec<f64> {
    let count = (TWO_PI / step).floor() as usize + 1;
    (0..count).map(|i| i as f64 * step).collect()
}

/// Exhaustive enumeration of the full phase grid. Errors if the grid exceeds
/// the evaluation budget. Ties break to the lexicographically smallest vector.
pub fn solve_grid(
    evaluator: &dyn Fn(&PhaseConfig) -> f64,
    m: usize,
    n: usize,
    step: f64,
    budget: u64,
) -> Result<SolverResult> {
    if step <= 0.0 {
        return Err(Error::Domain("grid step must be > 0".into()));
    }
    let values = grid_values(step);
    let dims = m + n;
    let required = (values.len() as f64).powi(dims as i32);
    if required > budget as f64 {
        return Err(Error::Budget { required, budget });
    }
    let start = Instant::now();
    let mut idx = vec![0usize; dims];
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_idx = idx.clone();
    let mut evaluations = 0u64;
    loop {
        let flat: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let phases = PhaseConfig::new(flat[..m].to_vec(), flat[m..].to_vec());
        let obj = evaluator(&phases);
        evaluations += 1;
        // Strictly-greater keeps the first (lexicographically smallest) argmax.
        if obj > best_obj {
            best_obj = obj;
            best_idx = idx.clone();
        }
        // Odometer in lexicographic order: last coordinate fastest.
        let mut d = dims;
        loop {
            if d == 0 {
                let flat: Vec<f64> = best_idx.iter().map(|&i| values[i]).collect();
                return Ok(SolverResult {
                    phases: PhaseConfig::new(flat[..m].to_vec(), flat[m..].to_vec()),
                    objective: best_obj,
                    evaluations,
                    wall_time: start.elapsed().as_secs_f64(),
                });
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < values.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Cyclic 1-D grid ascent: optimizes each phase over its own grid holding the
/// others fixed. The objective is non-decreasing across updates.
pub fn solve_coordinate_ascent(
    evaluator: &dyn Fn(&PhaseConfig) -> f64,
    init: &PhaseConfig,
    step: f64,
    sweeps: usize,
) -> Result<SolverResult> {
    if sweeps == 0 {
        return Err(Error::Domain("at least one sweep required".into()));
    }
    if step <= 0.0 {
        return Err(Error::Domain("grid step must be > 0".into()));
    }
    let start = Instant::now();
    let values = grid_values(step);
    let m = init.eta().len();
    let mut flat = init.to_flat();
    let mut current = evaluator(init);
    let mut evaluations = 1u64;
    for _ in 0..sweeps {
        let before = current;
        for d in 0..flat.len() {
            let saved = flat[d];
            let mut best = (current, saved);
            for &v in &values {
                flat[d] = v;
                let cfg = PhaseConfig::from_flat(&flat, m)?;
                let obj = evaluator(&cfg);
                evaluations += 1;
                if obj > best.0 {
                    best = (obj, v);
                }
            }
            flat[d] = best.1;
            current = best.0;
        }
        let improvement = (current - before).abs() / before.abs().max(f64::MIN_POSITIVE);
        if improvement < 1e-9 {
            break;
        }
    }
    Ok(SolverResult {
        phases: PhaseConfig::from_flat(&flat, m)?,
        objective: current,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Uniform random phases in [0, 2pi).
pub fn solve_random(stream: RngStream, m: usize, n: usize) -> PhaseConfig {
    let mut rng = stream.rng();
    let eta = (0..m).map(|_| rng.random::<f64>() * TWO_PI).collect();
    let psi = (0..n).map(|_| rng.random::<f64>() * TWO_PI).collect();
    PhaseConfig::new(eta, psi)
}
