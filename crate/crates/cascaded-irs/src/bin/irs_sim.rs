use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascaded_irs::channel::{sample_realization, RngStream};
use cascaded_irs::ddpg::{save_checkpoint, train, write_reward_csv, Env, Objective};
use cascaded_irs::error::Result;
use cascaded_irs::harness::{
    complexity_report, load_config, run_sweep, write_sweep_csv, ComplexityParams, Config,
    SolverKind, SweepSpec,
};
use cascaded_irs::metrics::evaluate;

#[derive(Parser)]
#[command(name = "irs-sim", about = "Cascaded-IRS THz uplink simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML configuration file; defaults apply for absent keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo benchmark over the (solver, rho, distance-ratio) grid; CSV out.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated solver subset: pinv,block,grid,coord,random,ddpg.
        #[arg(long)]
        solver: Option<String>,
        /// desired_user or sum_rate.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Train the RL policy once; writes the reward trace and optionally a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        objective: Option<String>,
        /// Checkpoint file for the trained networks.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Solve one realization with one solver; prints phases and rates.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "pinv")]
        solver: String,
    },
    /// Operation-count table for the policy, pseudo-inverse, block, and
    /// exhaustive schemes.
    Complexity {
        #[arg(long, default_value_t = 18)]
        m: u64,
        #[arg(long, default_value_t = 18)]
        n: u64,
        #[arg(long, default_value_t = 2)]
        k: u64,
        #[arg(long, default_value_t = 72)]
        xi: u64,
        #[arg(long, default_value_t = 3)]
        s: u64,
        #[arg(long, default_value_t = 128)]
        ui: u64,
        #[arg(long, default_value_t = 128)]
        uj: u64,
        #[arg(long, default_value_t = 2)]
        n_hidden: u64,
        #[arg(long, default_value_t = 36)]
        a: u64,
        #[arg(long, default_value_t = 3)]
        nblk: u64,
    },
    /// Fast invariant checks on the live build.
    Selftest {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn parse_objective(s: &str) -> Result<Objective> {
    match s {
        "desired_user" => Ok(Objective::DesiredUser),
        "sum_rate" => Ok(Objective::SumRate),
        other => Err(cascaded_irs::Error::Config(format!(
            "unknown objective {other:?}; expected desired_user or sum_rate"
        ))),
    }
}

fn load(common: &CommonArgs) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
        cfg.train.seed = seed;
        cfg.sweep.seed = seed;
    }
    Ok(cfg)
}

fn write_out(common: &CommonArgs, bytes: &[u8]) -> Result<()> {
    match &common.out {
        Some(path) => {
            File::create(path)?.write_all(bytes)?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_sweep(
    common: &CommonArgs,
    solver: &Option<String>,
    objective: &Option<String>,
    trials: Option<usize>,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(list) = solver {
        cfg.sweep.solvers = list
            .split(',')
            .map(|s| s.trim().parse::<SolverKind>())
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(obj) = objective {
        cfg.sweep.objective = parse_objective(obj)?;
    }
    if let Some(t) = trials {
        cfg.sweep.trials = t;
    }
    let result = run_sweep(&cfg.sweep, &cfg.scenario, &cfg.train)?;
    let mut buf = Vec::new();
    write_sweep_csv(&result, &mut buf)?;
    write_out(common, &buf)
}

fn cmd_train(
    common: &CommonArgs,
    objective: &Option<String>,
    checkpoint: &Option<PathBuf>,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(obj) = objective {
        cfg.train.objective = parse_objective(obj)?;
    }
    let out = train(&cfg.scenario, &cfg.train)?;
    if let Some(path) = checkpoint {
        save_checkpoint(&out.agent, &mut File::create(path)?)?;
    }
    let mut buf = Vec::new();
    write_reward_csv(&out.reward_history, &mut buf)?;
    write_out(common, &buf)
}

fn cmd_solve(common: &CommonArgs, solver: &str) -> Result<()> {
    let cfg = load(common)?;
    let kind: SolverKind = solver.parse()?;
    let spec = SweepSpec {
        solvers: vec![kind],
        ratios: vec![cfg.scenario.r_t1 / cfg.scenario.r_t2],
        rhos: vec![cfg.scenario.rho],
        trials: 1,
        seed: cfg.sweep.seed,
        ..cfg.sweep.clone()
    };
    let result = run_sweep(&spec, &cfg.scenario, &cfg.train)?;
    let row = result
        .rows
        .iter()
        .find(|r| r.phases.is_some())
        .ok_or_else(|| cascaded_irs::Error::Config("solver produced no solution".into()))?;
    let phases = row.phases.as_ref().unwrap();
    let mut buf = Vec::new();
    writeln!(buf, "solver: {}", row.solver)?;
    writeln!(buf, "eta:    {:?}", phases.eta())?;
    writeln!(buf, "psi:    {:?}", phases.psi())?;
    writeln!(buf, "rate1:  {} bit/s/Hz", row.rate1)?;
    writeln!(buf, "rate2:  {} bit/s/Hz", row.rate2)?;
    writeln!(buf, "sum:    {} bit/s/Hz (upper bound {})", row.sum_rate, row.upper_bound)?;
    writeln!(buf, "p_rx1:  {} mW", row.p_rx1_mw)?;
    write_out(common, &buf)
}

fn cmd_complexity(p: &ComplexityParams, out: Option<&PathBuf>) -> Result<()> {
    let rep = complexity_report(p)?;
    let mut buf = Vec::new();
    writeln!(buf, "scheme        operations")?;
    writeln!(buf, "drl_forward   {}", rep.c_drl)?;
    writeln!(buf, "pinv          {}", rep.c_pinv)?;
    writeln!(buf, "block         {}", rep.c_block)?;
    writeln!(buf, "exhaustive    {:e}", rep.c_es)?;
    match out {
        Some(path) => File::create(path)?.write_all(&buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_selftest(common: &CommonArgs) -> Result<()> {
    let cfg = load(common)?;
    let env = Env::new(&cfg.scenario, Objective::SumRate, 0.0)?;
    let mut checks = Vec::new();
    let mut violations = 0usize;
    for trial in 0..200u64 {
        let stream = RngStream::new(cfg.scenario.seed, 0x5e1f).child(trial);
        let ch = sample_realization(&env.spec, stream.child(0))?;
        let phases = cascaded_irs::solvers::solve_random(stream.child(1), env.spec.m, env.spec.n);
        let point = evaluate(&ch, &phases, &env.losses, env.tx_power, env.noise, env.alpha)?;
        if point.sum_rate > point.upper_bound * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    checks.push(("upper-bound dominance (200 draws)", violations == 0));
    let j1 = cascaded_irs::numerics::bessel_j1(3.8317059702075125)?;
    checks.push(("bessel first root", j1.abs() < 1e-10));
    let rep = complexity_report(&ComplexityParams::default())?;
    checks.push(("complexity reference", rep.c_drl == 37_796.0));
    let mut buf = Vec::new();
    let mut ok = true;
    for (name, passed) in checks {
        ok &= passed;
        writeln!(buf, "{}: {}", name, if passed { "pass" } else { "FAIL" })?;
    }
    write_out(common, &buf)?;
    if !ok {
        return Err(cascaded_irs::Error::Numerical("selftest failed".into()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Sweep {
            common,
            solver,
            objective,
            trials,
        } => cmd_sweep(common, solver, objective, *trials),
        Command::Train {
            common,
            objective,
            checkpoint,
        } => cmd_train(common, objective, checkpoint),
        Command::Solve { common, solver } => cmd_solve(common, solver),
        Command::Complexity {
            m,
            n,
            k,
            xi,
            s,
            ui,
            uj,
            n_hidden,
            a,
            nblk,
        } => cmd_complexity(
            &ComplexityParams {
                m: *m,
                n: *n,
                k: *k,
                xi: *xi,
                s: *s,
                ui: *ui,
                uj: *uj,
                n_hidden: *n_hidden,
                a: *a,
                n_blk: *nblk,
            },
            None,
        ),
        Command::Selftest { common } => cmd_selftest(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
