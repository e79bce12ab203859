//! Sweep orchestration: configuration files, Monte-Carlo benchmarking of every
//! solver over the (rho, distance-ratio) grid, complexity reports, CSV output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, RngStream};
use crate::ddpg::{agent_act, train, Env, Objective, TrainConfig};
use crate::error::{Error, Result};
use crate::linkbudget::ScenarioConfig;
use crate::metrics::{evaluate, PhaseConfig};
use crate::solvers::{
    assemble_system, solve_block, solve_coordinate_ascent, solve_grid, solve_pinv, solve_random,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pinv,
    Block,
    Grid,
    Coord,
    Random,
    Ddpg,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolverKind::Pinv => "pinv",
            SolverKind::Block => "block",
            SolverKind::Grid => "grid",
            SolverKind::Coord => "coord",
            SolverKind::Random => "random",
            SolverKind::Ddpg => "ddpg",
        };
        f.write_str(s)
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinv" => Ok(SolverKind::Pinv),
            "block" => Ok(SolverKind::Block),
            "grid" => Ok(SolverKind::Grid),
            "coord" => Ok(SolverKind::Coord),
            "random" => Ok(SolverKind::Random),
            "ddpg" => Ok(SolverKind::Ddpg),
            other => Err(Error::Config(format!(
                "unknown solver {other:?}; expected one of pinv, block, grid, coord, random, ddpg"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub objective: Objective,
    pub solvers: Vec<SolverKind>,
    /// r_t1 / r_t2 grid; r_t2 stays fixed.
    pub ratios: Vec<f64>,
    pub rhos: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub grid_step: f64,
    pub grid_budget: u64,
    pub coord_sweeps: usize,
    pub block_size: usize,
    /// When false, the wall_s column is a constant 0 so output stays
    /// byte-reproducible.
    pub record_timings: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            objective: Objective::SumRate,
            solvers: vec![SolverKind::Pinv, SolverKind::Block, SolverKind::Random],
            ratios: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            rhos: vec![0.25, 0.5, 0.75, 0.9, 1.0],
            trials: 1000,
            seed: 0,
            grid_step: std::f64::consts::PI / 8.0,
            grid_budget: 2_000_000,
            coord_sweeps: 3,
            block_size: 3,
            record_timings: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::Config("solvers must not be empty".into()));
        }
        for &r in &self.ratios {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Config(format!("ratios must be in (0,1], got {r}")));
            }
        }
        for &r in &self.rhos {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("rhos must be in [0,1], got {r}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::Config(format!(
                "grid_step must be > 0, got {}",
                self.grid_step
            )));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Whole-run configuration: one file, three sections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub sweep: SweepSpec,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.sweep.validate()
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let cfg: Config =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// One CSV line. Aggregate rows use "mean" / "ci95" in the trial column; the
/// solved phases ride along (not emitted) so rows can be re-verified.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub solver: SolverKind,
    pub rho: f64,
    pub ratio: f64,
    pub trial: String,
    pub rate1: f64,
    pub rate2: f64,
    pub sum_rate: f64,
    pub upper_bound: f64,
    pub p_rx1_mw: f64,
    pub wall_s: f64,
    pub phases: Option<PhaseConfig>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn trial_stream(seed: u64, ratio_idx: usize, trial: usize) -> RngStream {
    RngStream::new(seed, 0x7000 + ratio_idx as u64).child(trial as u64)
}

fn objective_value(point: &crate::metrics::RatePoint, objective: Objective) -> f64 {
    match objective {
        Objective::DesiredUser => point.p_rx[0],
        Objective::SumRate => point.sum_rate,
    }
}

fn solve_trial(
    solver: SolverKind,
    env: &Env,
    ddpg_actor: Option<&crate::neuralnet::MlpParams>,
    spec: &SweepSpec,
    stream: RngStream,
) -> Result<(PhaseConfig, crate::metrics::RatePoint, f64)> {
    let ch = sample_realization(&env.spec, stream.child(0))?;
    let eval_point = |phases: &PhaseConfig| -> Result<crate::metrics::RatePoint> {
        evaluate(&ch, phases, &env.losses, env.tx_power, env.noise, env.alpha)
    };
    let started = Instant::now();
    let phases = match solver {
        SolverKind::Pinv => solve_pinv(&assemble_system(&ch, 0))?,
        SolverKind::Block => solve_block(&ch, spec.block_size, 0)?,
        SolverKind::Random => solve_random(stream.child(2), env.spec.m, env.spec.n),
        SolverKind::Grid => {
            let f = |p: &PhaseConfig| {
                eval_point(p).map_or(f64::NEG_INFINITY, |pt| objective_value(&pt, spec.objective))
            };
            solve_grid(&f, env.spec.m, env.spec.n, spec.grid_step, spec.grid_budget)?.phases
        }
        SolverKind::Coord => {
            let f = |p: &PhaseConfig| {
                eval_point(p).map_or(f64::NEG_INFINITY, |pt| objective_value(&pt, spec.objective))
            };
            let init = solve_random(stream.child(2), env.spec.m, env.spec.n);
            solve_coordinate_ascent(&f, &init, spec.grid_step, spec.coord_sweeps)?.phases
        }
        SolverKind::Ddpg => {
            let actor = ddpg_actor.ok_or_else(|| Error::Config("no trained policy".into()))?;
            let state = env.reset(stream.child(3))?;
            PhaseConfig::from_flat(&agent_act(actor, &state, None)?, env.spec.m)?
        }
    };
    let wall = if spec.record_timings {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let point = eval_point(&phases)?;
    Ok((phases, point, wall))
}

fn run_cell(
    solver: SolverKind,
    rho: f64,
    ratio: f64,
    ratio_idx: usize,
    scenario: &ScenarioConfig,
    spec: &SweepSpec,
    train_cfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    let env = Env::new(scenario, spec.objective, train_cfg.reward_offset)?;
    let actor = if solver == SolverKind::Ddpg {
        let mut tc = train_cfg.clone();
        tc.objective = spec.objective;
        tc.seed = spec.seed;
        Some(train(scenario, &tc)?.agent.actor)
    } else {
        None
    };
    let mut rows: Vec<SweepRow> = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<SweepRow> {
            let stream = trial_stream(spec.seed, ratio_idx, t);
            let (phases, point, wall) = solve_trial(solver, &env, actor.as_ref(), spec, stream)?;
            Ok(SweepRow {
                solver,
                rho,
                ratio,
                trial: t.to_string(),
                rate1: point.rate[0],
                rate2: point.rate[1],
                sum_rate: point.sum_rate,
                upper_bound: point.upper_bound,
                p_rx1_mw: point.p_rx[0],
                wall_s: wall,
                phases: Some(phases),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pickers: [fn(&SweepRow) -> f64; 6] = [
        |r| r.rate1,
        |r| r.rate2,
        |r| r.sum_rate,
        |r| r.upper_bound,
        |r| r.p_rx1_mw,
        |r| r.wall_s,
    ];
    let stats: Vec<(f64, f64)> = pickers
        .iter()
        .map(|&f| mean_and_ci(&rows.iter().map(|r| f(r)).collect::<Vec<f64>>()))
        .collect();
    for (label, pick_ci) in [("mean", false), ("ci95", true)] {
        let v = |i: usize| if pick_ci { stats[i].1 } else { stats[i].0 };
        rows.push(SweepRow {
            solver,
            rho,
            ratio,
            trial: label.to_string(),
            rate1: v(0),
            rate2: v(1),
            sum_rate: v(2),
            upper_bound: v(3),
            p_rx1_mw: v(4),
            wall_s: v(5),
            phases: None,
        });
    }
    Ok(rows)
}

/// Full grid: for each (solver, rho, ratio) cell run `trials` realizations.
/// Classical solvers run per realization; the learned policy trains once per
/// cell and is then evaluated greedily. Grid-search cells whose lattice
/// exceeds the evaluation budget are skipped with a note on stderr.
pub fn run_sweep(
    spec: &SweepSpec,
    scenario: &ScenarioConfig,
    train_cfg: &TrainConfig,
) -> Result<SweepResult> {
    spec.validate()?;
    scenario.validate()?;
    train_cfg.validate()?;
    let mut rows = Vec::new();
    for &solver in &spec.solvers {
        for &rho in &spec.rhos {
            for (ratio_idx, &ratio) in spec.ratios.iter().enumerate() {
                let mut cell = scenario.clone();
                cell.rho = rho;
                cell.r_t1 = ratio * cell.r_t2;
                match run_cell(solver, rho, ratio, ratio_idx, &cell, spec, train_cfg) {
                    Ok(mut cell_rows) => rows.append(&mut cell_rows),
                    Err(Error::Budget { required, budget })
                        if solver == SolverKind::Grid =>
                    {
                        eprintln!(
                            "skipping grid cell rho={rho} ratio={ratio}: {required} lattice points exceed budget {budget}"
                        );
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(SweepResult { rows })
}

pub const SWEEP_CSV_VERSION: &str = "# sweep-csv v1";

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: &mut W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_VERSION}")?;
    writeln!(
        out,
        "solver,rho,ratio,trial,rate1,rate2,sum_rate,upper_bound,p_rx1_mw,wall_s"
    )?;
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.solver, r.rho, r.ratio, r.trial, r.rate1, r.rate2, r.sum_rate, r.upper_bound,
            r.p_rx1_mw, r.wall_s
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityParams {
    pub m: u64,
    pub n: u64,
    /// User count.
    pub k: u64,
    /// Quantization levels minus one for exhaustive search.
    pub xi: u64,
    /// State width.
    pub s: u64,
    /// Hidden widths (assumed equal) and hidden-layer link count.
    pub ui: u64,
    pub uj: u64,
    pub n_hidden: u64,
    /// Action width.
    pub a: u64,
    pub n_blk: u64,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        Self {
            m: 18,
            n: 18,
            k: 2,
            xi: 72,
            s: 3,
            ui: 128,
            uj: 128,
            n_hidden: 2,
            a: 36,
            n_blk: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    /// One policy forward pass: S Ui + n Ui Uj + Uj A + A.
    pub c_drl: f64,
    /// (MN)^2 (M+N).
    pub c_pinv: f64,
    /// (MN/N_blk^2)^2 ((M+N)/N_blk).
    pub c_block: f64,
    /// K (Xi+1)^(M+N).
    pub c_es: f64,
}

pub fn complexity_report(p: &ComplexityParams) -> Result<ComplexityReport> {
    for (name, v) in [
        ("m", p.m),
        ("n", p.n),
        ("k", p.k),
        ("s", p.s),
        ("ui", p.ui),
        ("uj", p.uj),
        ("a", p.a),
        ("n_blk", p.n_blk),
    ] {
        if v == 0 {
            return Err(Error::Domain(format!("{name} must be >= 1")));
        }
    }
    let (m, n) = (p.m as f64, p.n as f64);
    let (s, ui, uj, a) = (p.s as f64, p.ui as f64, p.uj as f64, p.a as f64);
    let nb = p.n_blk as f64;
    Ok(ComplexityReport {
        c_drl: s * ui + p.n_hidden as f64 * ui * uj + uj * a + a,
        c_pinv: (m * n).powi(2) * (m + n),
        c_block: (m * n / (nb * nb)).powi(2) * ((m + n) / nb),
        c_es: p.k as f64 * ((p.xi + 1) as f64).powf(m + n),
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let ranks = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            solvers: vec![SolverKind::Random, SolverKind::Pinv],
            ratios: vec![0.2, 1.0],
            rhos: vec![0.5],
            trials: 5,
            seed: 7,
            ..SweepSpec::default()
        }
    }

    fn tiny_scenario() -> ScenarioConfig {
        ScenarioConfig {
            irs1_size: 2,
            irs2_size: 2,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.scenario.frequency, 300e9);
        assert_eq!(cfg.scenario.irs1_size, 18);
        assert_eq!(cfg.scenario.irs2_size, 18);
        assert_eq!(cfg.sweep.trials, 1000);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.train.gamma, 0.99);
    }

    #[test]
    fn bad_rho_names_the_key() {
        let err = parse_config("[scenario]\nrho = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(parse_config("[scenario]\nfrequencyy = 1.0\n").is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg = parse_config("[scenario]\nrho = 0.75\n[sweep]\ntrials = 9\n").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let again = parse_config(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn complexity_reference_values() {
        let rep = complexity_report(&ComplexityParams::default()).unwrap();
        assert_eq!(rep.c_drl, 37_796.0);
        // 18*18=324 elements per surface pair.
        assert_eq!(rep.c_pinv, (324.0f64).powi(2) * 36.0);

        let es_small = complexity_report(&ComplexityParams {
            m: 4,
            n: 4,
            ..ComplexityParams::default()
        })
        .unwrap();
        assert_eq!(es_small.c_es, 2.0 * 73.0f64.powi(8));

        let big = complexity_report(&ComplexityParams {
            m: 64,
            n: 64,
            n_blk: 6,
            ..ComplexityParams::default()
        })
        .unwrap();
        assert!(big.c_block < big.c_pinv);
    }

    #[test]
    fn sweep_rows_satisfy_dominance() {
        let result = run_sweep(&tiny_spec(), &tiny_scenario(), &TrainConfig::default()).unwrap();
        assert!(!result.rows.is_empty());
        for r in result.rows.iter().filter(|r| r.trial != "ci95") {
            assert!(
                r.sum_rate <= r.upper_bound * (1.0 + 1e-9),
                "{} {} > {}",
                r.solver,
                r.sum_rate,
                r.upper_bound
            );
        }
    }

    #[test]
    fn sweep_rows_reverify_from_phases() {
        let spec = tiny_spec();
        let scenario = tiny_scenario();
        let result = run_sweep(&spec, &scenario, &TrainConfig::default()).unwrap();
        for r in result.rows.iter().filter(|r| r.phases.is_some()) {
            let mut cell = scenario.clone();
            cell.rho = r.rho;
            cell.r_t1 = r.ratio * cell.r_t2;
            let env = Env::new(&cell, spec.objective, 0.0).unwrap();
            let ratio_idx = spec.ratios.iter().position(|&x| x == r.ratio).unwrap();
            let trial: usize = r.trial.parse().unwrap();
            let stream = trial_stream(spec.seed, ratio_idx, trial);
            let ch = sample_realization(&env.spec, stream.child(0)).unwrap();
            let point = evaluate(
                &ch,
                r.phases.as_ref().unwrap(),
                &env.losses,
                env.tx_power,
                env.noise,
                env.alpha,
            )
            .unwrap();
            assert_eq!(point.sum_rate, r.sum_rate);
            assert_eq!(point.rate[0], r.rate1);
            assert_eq!(point.p_rx[0], r.p_rx1_mw);
        }
    }

    #[test]
    fn sweep_csv_byte_identical() {
        let spec = tiny_spec();
        let scenario = tiny_scenario();
        let emit = || {
            let result = run_sweep(&spec, &scenario, &TrainConfig::default()).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&result, &mut buf).unwrap();
            buf
        };
        let a = emit();
        assert_eq!(a, emit());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# sweep-csv v1\nsolver,rho,ratio,trial,"));
    }

    #[test]
    fn mean_row_present_per_cell() {
        let result = run_sweep(&tiny_spec(), &tiny_scenario(), &TrainConfig::default()).unwrap();
        let means = result.rows.iter().filter(|r| r.trial == "mean").count();
        // 2 solvers x 1 rho x 2 ratios.
        assert_eq!(means, 4);
    }

    #[test]
    fn grid_budget_cell_is_skipped_not_fatal() {
        let spec = SweepSpec {
            solvers: vec![SolverKind::Grid],
            ratios: vec![0.5],
            rhos: vec![0.5],
            trials: 2,
            grid_budget: 10,
            ..SweepSpec::default()
        };
        let result = run_sweep(&spec, &tiny_scenario(), &TrainConfig::default()).unwrap();
        assert!(result.rows.is_empty());
    }

    #[test]
    fn solver_kind_round_trip() {
        for s in [
            SolverKind::Pinv,
            SolverKind::Block,
            SolverKind::Grid,
            SolverKind::Coord,
            SolverKind::Random,
            SolverKind::Ddpg,
        ] {
            assert_eq!(s.to_string().parse::<SolverKind>().unwrap(), s);
        }
        assert!("nope".parse::<SolverKind>().is_err());
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 40.0]), 1.0);
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), -1.0);
        let with_tie = spearman(&x, &[1.0, 1.0, 2.0, 3.0]);
        assert!(with_tie > 0.9);
    }

    #[test]
    fn mean_and_ci_basics() {
        let (m, ci) = mean_and_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((ci - 1.96 / 3.0f64.sqrt()).abs() < 1e-12);
    }
}
