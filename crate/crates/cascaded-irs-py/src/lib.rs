//! Python bindings for the cascaded-IRS simulator: scenario setup, channel
//! sampling, rate evaluation, phase solvers, and the complexity table.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cascaded_irs::channel::{sample_realization, RngStream};
use cascaded_irs::ddpg::{Env, Objective};
use cascaded_irs::harness::{
    complexity_report, parse_config, ComplexityParams, Config, SolverKind,
};
use cascaded_irs::metrics::{evaluate, PhaseConfig};
use cascaded_irs::solvers::{assemble_system, solve_block, solve_pinv, solve_random};

fn err(e: cascaded_irs::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn noise_power(noise_psd: f64, bandwidth: f64, noise_figure: f64) -> f64 {
    cascaded_irs::linkbudget::noise_power(noise_psd, bandwidth, noise_figure)
}

#[pyfunction]
fn bessel_j1(x: f64) -> PyResult<f64> {
    cascaded_irs::numerics::bessel_j1(x).map_err(err)
}

/// Operation counts (drl_forward, pinv, block, exhaustive).
#[pyfunction]
#[pyo3(signature = (m=18, n=18, k=2, xi=72, s=3, ui=128, uj=128, n_hidden=2, a=36, n_blk=3))]
#[allow(clippy::too_many_arguments)]
fn complexity(
    m: u64,
    n: u64,
    k: u64,
    xi: u64,
    s: u64,
    ui: u64,
    uj: u64,
    n_hidden: u64,
    a: u64,
    n_blk: u64,
) -> PyResult<(f64, f64, f64, f64)> {
    let rep = complexity_report(&ComplexityParams {
        m,
        n,
        k,
        xi,
        s,
        ui,
        uj,
        n_hidden,
        a,
        n_blk,
    })
    .map_err(err)?;
    Ok((rep.c_drl, rep.c_pinv, rep.c_block, rep.c_es))
}

/// One fully-configured scenario; channels are drawn per call from the seed.
#[pyclass]
struct Simulator {
    config: Config,
    env: Env,
}

#[pymethods]
impl Simulator {
    /// Build from TOML text; an empty string gives the reference scenario.
    #[new]
    #[pyo3(signature = (config_toml=""))]
    fn new(config_toml: &str) -> PyResult<Self> {
        let config = parse_config(config_toml).map_err(err)?;
        let env = Env::new(&config.scenario, Objective::SumRate, 0.0).map_err(err)?;
        Ok(Self { config, env })
    }

    fn config_toml(&self) -> PyResult<String> {
        toml::to_string(&self.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn sizes(&self) -> (usize, usize) {
        (self.env.spec.m, self.env.spec.n)
    }

    fn noise(&self) -> f64 {
        self.env.noise
    }

    /// Per-user deterministic link-budget loss factors.
    fn losses(&self) -> Vec<f64> {
        self.env.losses.clone()
    }

    /// (r_tk list, r_2, r_3) in meters.
    fn distances(&self) -> PyResult<(Vec<f64>, f64, f64)> {
        let g = cascaded_irs::linkbudget::derive_geometry(&self.config.scenario).map_err(err)?;
        Ok((g.r_tk, g.r_2, g.r_3))
    }

    /// Solve one fresh realization and return
    /// (eta, psi, rate1, rate2, sum_rate, upper_bound).
    #[pyo3(signature = (solver="pinv", seed=0))]
    fn solve(
        &self,
        solver: &str,
        seed: u64,
    ) -> PyResult<(Vec<f64>, Vec<f64>, f64, f64, f64, f64)> {
        let kind: SolverKind = solver.parse().map_err(err)?;
        let stream = RngStream::new(seed, 0x9);
        let ch = sample_realization(&self.env.spec, stream.child(0)).map_err(err)?;
        let phases = match kind {
            SolverKind::Pinv => solve_pinv(&assemble_system(&ch, 0)).map_err(err)?,
            SolverKind::Block => {
                solve_block(&ch, self.config.sweep.block_size, 0).map_err(err)?
            }
            SolverKind::Random => solve_random(stream.child(1), self.env.spec.m, self.env.spec.n),
            other => {
                return Err(PyValueError::new_err(format!(
                    "solver {other} is not exposed here; use pinv, block, or random"
                )))
            }
        };
        let point = self.rate_point(&ch, &phases)?;
        Ok((
            phases.eta().to_vec(),
            phases.psi().to_vec(),
            point.rate[0],
            point.rate[1],
            point.sum_rate,
            point.upper_bound,
        ))
    }

    /// Evaluate explicit phase vectors on a fresh realization:
    /// (rate1, rate2, sum_rate, upper_bound, p_rx1).
    #[pyo3(signature = (eta, psi, seed=0))]
    fn evaluate_phases(
        &self,
        eta: Vec<f64>,
        psi: Vec<f64>,
        seed: u64,
    ) -> PyResult<(f64, f64, f64, f64, f64)> {
        if eta.len() != self.env.spec.m || psi.len() != self.env.spec.n {
            return Err(PyValueError::new_err(format!(
                "expected {} eta and {} psi phases",
                self.env.spec.m, self.env.spec.n
            )));
        }
        let stream = RngStream::new(seed, 0x9);
        let ch = sample_realization(&self.env.spec, stream.child(0)).map_err(err)?;
        let point = self.rate_point(&ch, &PhaseConfig::new(eta, psi))?;
        Ok((
            point.rate[0],
            point.rate[1],
            point.sum_rate,
            point.upper_bound,
            point.p_rx[0],
        ))
    }
}

impl Simulator {
    fn rate_point(
        &self,
        ch: &cascaded_irs::channel::ChannelRealization,
        phases: &PhaseConfig,
    ) -> PyResult<cascaded_irs::metrics::RatePoint> {
        evaluate(
            ch,
            phases,
            &self.env.losses,
            self.env.tx_power,
            self.env.noise,
            self.env.alpha,
        )
        .map_err(err)
    }
}

#[pymodule]
fn cascaded_irs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(noise_power, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j1, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_class::<Simulator>()?;
    Ok(())
}
