//! End-to-end acceptance suite. Each test prints one pass/fail line so a full
//! run doubles as a checklist of the simulator's load-bearing guarantees.

use std::sync::OnceLock;

use cascaded_irs::channel::{sample_realization, ChannelSpec, LosMode, RngStream};
use cascaded_irs::ddpg::{
    actor_gradient, agent_act, train, Agent, Env, EnvState, Objective, TrainConfig, TrainOutput,
};
use cascaded_irs::harness::{
    complexity_report, run_sweep, spearman, write_sweep_csv, ComplexityParams, SolverKind,
    SweepSpec,
};
use cascaded_irs::linkbudget::{noise_power, ScenarioConfig};
use cascaded_irs::metrics::{evaluate, received_power, received_power_matrix, PhaseConfig};
use cascaded_irs::neuralnet::{backward, forward, mlp_init, Activation, MlpParams};
use cascaded_irs::solvers::{assemble_system, solve_grid, solve_pinv, solve_random};

fn report(id: u32, label: &str, pass: bool) {
    println!(
        "acceptance {id:02} ({label}): {}",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "acceptance {id} ({label}) failed");
}

fn realization(m: usize, n: usize, seed: u64) -> cascaded_irs::channel::ChannelRealization {
    let spec = ChannelSpec {
        m,
        n,
        k1: 2.0,
        k2: 2.0,
        rho: 0.6,
        theta: 0.3,
        los_mode: LosMode::Ones,
        wavelength: 1e-3,
        user_distances: vec![3.0, 15.0],
        r3: 15.78,
        los_angles_tx: vec![0.0, 0.0],
        los_angle_rx: 0.0,
    };
    sample_realization(&spec, RngStream::new(seed, 0)).unwrap()
}

#[test]
fn c01_thermal_noise_constant() {
    let v = noise_power(-174.0, 2e9, 10.0);
    report(
        1,
        "noise power -174 dBm/Hz x 2 GHz x NF 10 dB",
        (v - 7.9621e-11).abs() / 7.9621e-11 < 1e-3,
    );
}

#[test]
fn c02_double_sum_equals_matrix_form() {
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let m = 1 + (i % 6) as usize;
        let n = 1 + ((i / 6) % 6) as usize;
        let ch = realization(m, n, 10_000 + i);
        let phases = solve_random(RngStream::new(20_000 + i, 1), m, n);
        let a = received_power(&ch, &phases, 1.0, 1.0, 0, 0.9).unwrap();
        let b = received_power_matrix(&ch, &phases, 1.0, 1.0, 0, 0.9).unwrap();
        // The two routes sum in different orders, so rounding is on the scale
        // of the coherent (all-aligned) power, not of the possibly-cancelled
        // result.
        let mut mag_sum = 0.0;
        for p in 0..m {
            for q in 0..n {
                mag_sum += ch.h_t[0][(0, p)].norm()
                    * ch.h_mn[(p, q)].norm()
                    * ch.h_r[(q, 0)].norm()
                    * 0.81;
            }
        }
        let scale = a.abs().max(b.abs()).max(mag_sum * mag_sum).max(f64::MIN_POSITIVE);
        worst = worst.max((a - b).abs() / scale);
    }
    report(2, "double sum vs matrix received power, 100 draws", worst <= 1e-10);
}

#[test]
fn c03_alignment_system_rank_deficiency() {
    let mut pass = true;
    for m in 2..=6usize {
        for n in 2..=6usize {
            let ch = realization(m, n, (100 * m + n) as u64);
            let sys = assemble_system(&ch, 0);
            pass &= sys.rank(0.0).unwrap() == m + n - 1;
            pass &= solve_pinv(&sys).is_ok();
        }
    }
    report(3, "rank(A) = M+N-1 and pinv solve succeeds", pass);
}

#[test]
fn c04_consistent_system_reaches_coherent_power() {
    let mut pass = true;
    for i in 0..100u64 {
        let m = 2 + (i % 5) as usize;
        let ch = realization(m, 1, 30_000 + i);
        let phases = solve_pinv(&assemble_system(&ch, 0)).unwrap();
        let p = received_power(&ch, &phases, 1.0, 1.0, 0, 1.0).unwrap();
        let mut mag = 0.0;
        for mm in 0..m {
            mag += ch.h_t[0][(0, mm)].norm() * ch.h_mn[(mm, 0)].norm() * ch.h_r[(0, 0)].norm();
        }
        let coherent = mag * mag;
        pass &= (p - coherent).abs() / coherent < 1e-6;
    }
    report(4, "single-column systems align perfectly", pass);
}

#[test]
fn c05_upper_bound_dominance() {
    let scenario = ScenarioConfig {
        irs1_size: 4,
        irs2_size: 4,
        tx_power: 1e7,
        ..ScenarioConfig::default()
    };
    let env = Env::new(&scenario, Objective::SumRate, 0.0).unwrap();
    let mut violations = 0u32;
    for r in 0..1000u64 {
        let stream = RngStream::new(5_000, r);
        let ch = sample_realization(&env.spec, stream.child(0)).unwrap();
        for p in 0..10u64 {
            let phases = solve_random(stream.child(1 + p), 4, 4);
            let point =
                evaluate(&ch, &phases, &env.losses, env.tx_power, env.noise, env.alpha).unwrap();
            if point.sum_rate > point.upper_bound {
                violations += 1;
            }
        }
    }
    report(5, "sum rate below upper bound on 10^4 draws", violations == 0);
}

fn finite_difference_worst(p: &MlpParams, x: &[f64], coeffs: &[f64]) -> f64 {
    let loss = |p: &MlpParams| -> f64 {
        let (y, _) = forward(p, x).unwrap();
        y.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = forward(p, x).unwrap();
    let (grads, _) = backward(p, &cache, coeffs).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for li in 0..p.layers.len() {
        for wi in 0..p.layers[li].weights.len() {
            let mut plus = p.clone();
            plus.layers[li].weights[wi] += h;
            let mut minus = p.clone();
            minus.layers[li].weights[wi] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let g = grads.weights[li][wi];
            worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-6));
        }
    }
    worst
}

#[test]
fn c06_gradient_fidelity() {
    use rand::Rng;
    let mut worst_net: f64 = 0.0;
    for seed in 0..10u64 {
        let p = mlp_init(
            &[4, 8, 8, 2],
            &[Activation::Relu, Activation::Tanh, Activation::Linear],
            RngStream::new(60_000 + seed, 0),
        )
        .unwrap();
        let mut rng = RngStream::new(seed, 9).rng();
        let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let c: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        worst_net = worst_net.max(finite_difference_worst(&p, &x, &c));
    }

    // Policy gradient chained through the critic, against central differences.
    let agent = Agent::new(2, &[5], RngStream::new(61_000, 0)).unwrap();
    let states: Vec<EnvState> = (0..4)
        .map(|i| EnvState {
            gamma1: 0.4 * i as f64,
            gamma2: 1.2 - 0.3 * i as f64,
            reward: 0.2 * i as f64,
        })
        .collect();
    let mean_q = |actor: &MlpParams| -> f64 {
        let mut total = 0.0;
        for s in &states {
            let (out, _) = forward(actor, &s.to_vec()).unwrap();
            let mut input = s.to_vec();
            input.extend(out.iter().map(|&y| std::f64::consts::PI * (y + 1.0)));
            total += forward(&agent.critic, &input).unwrap().0[0];
        }
        total / states.len() as f64
    };
    let (grads, _) = actor_gradient(&agent.actor, &agent.critic, &states).unwrap();
    let h = 1e-5;
    let mut worst_actor: f64 = 0.0;
    for li in 0..agent.actor.layers.len() {
        for wi in 0..agent.actor.layers[li].weights.len() {
            let mut plus = agent.actor.clone();
            plus.layers[li].weights[wi] += h;
            let mut minus = agent.actor.clone();
            minus.layers[li].weights[wi] -= h;
            let fd = (mean_q(&plus) - mean_q(&minus)) / (2.0 * h);
            let g = grads.weights[li][wi];
            worst_actor = worst_actor.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-6));
        }
    }
    report(
        6,
        "backprop and policy gradients match finite differences",
        worst_net <= 1e-4 && worst_actor <= 1e-3,
    );
}

fn smoke_scenario() -> ScenarioConfig {
    ScenarioConfig {
        irs1_size: 2,
        irs2_size: 2,
        tx_power: 1e7,
        seed: 42,
        ..ScenarioConfig::default()
    }
}

fn smoke_train_cfg() -> TrainConfig {
    TrainConfig {
        episodes: 2000,
        steps_per_episode: 25,
        batch_size: 64,
        hidden: vec![32, 32],
        actor_lr: 1e-3,
        critic_lr: 3e-3,
        seed: 42,
        objective: Objective::SumRate,
        ..TrainConfig::default()
    }
}

fn smoke_train() -> &'static TrainOutput {
    static OUT: OnceLock<TrainOutput> = OnceLock::new();
    OUT.get_or_init(|| train(&smoke_scenario(), &smoke_train_cfg()).unwrap())
}

#[test]
fn c07_solver_ordering_desk_scale() {
    let out = smoke_train();
    let env = Env::new(&smoke_scenario(), Objective::SumRate, 0.0).unwrap();
    let step = std::f64::consts::PI / 8.0;
    let (mut grid_m, mut ddpg_m, mut rand_m) = (0.0, 0.0, 0.0);
    for t in 0..100u64 {
        let stream = RngStream::new(777, t);
        let ch = sample_realization(&env.spec, stream.child(0)).unwrap();
        let eval = |p: &PhaseConfig| {
            evaluate(&ch, p, &env.losses, env.tx_power, env.noise, env.alpha)
                .unwrap()
                .sum_rate
        };
        grid_m += solve_grid(&eval, 2, 2, step, 200_000).unwrap().objective;
        rand_m += eval(&solve_random(stream.child(2), 2, 2));
        let state = env.reset(stream.child(3)).unwrap();
        let action = agent_act(&out.agent.actor, &state, None).unwrap();
        ddpg_m += eval(&PhaseConfig::from_flat(&action, 2).unwrap());
    }
    let pass = grid_m >= ddpg_m && ddpg_m >= rand_m && ddpg_m >= 0.85 * grid_m;
    report(
        7,
        "grid >= trained policy >= random, policy within 85% of grid",
        pass,
    );
    println!(
        "  (grid {:.4}, policy {:.4}, random {:.4} mean sum rate)",
        grid_m / 100.0,
        ddpg_m / 100.0,
        rand_m / 100.0
    );
}

#[test]
fn c08_training_rewards_increase() {
    let history = &smoke_train().reward_history;
    let n = history.len();
    let ma: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(99);
            history[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64
        })
        .collect();
    let tenth = n / 10;
    let first = ma[..tenth].iter().sum::<f64>() / tenth as f64;
    let last = ma[n - tenth..].iter().sum::<f64>() / tenth as f64;
    report(
        8,
        "moving-average reward rises by 10% over training",
        last >= 1.10 * first,
    );
    println!("  (window-100 average: first tenth {first:.4}, final tenth {last:.4})");
}

#[test]
fn c09a_rate_decreases_with_distance_ratio() {
    let spec = SweepSpec {
        solvers: vec![SolverKind::Pinv, SolverKind::Block],
        ratios: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        rhos: vec![0.9],
        trials: 1000,
        seed: 42,
        ..SweepSpec::default()
    };
    let scenario = ScenarioConfig {
        seed: 42,
        ..ScenarioConfig::default()
    };
    let result = run_sweep(&spec, &scenario, &TrainConfig::default()).unwrap();
    let mut pass = true;
    for solver in [SolverKind::Pinv, SolverKind::Block] {
        let mut ratios = Vec::new();
        let mut means = Vec::new();
        for r in result.rows.iter().filter(|r| r.solver == solver && r.trial == "mean") {
            ratios.push(r.ratio);
            means.push(r.rate1);
        }
        let rho_rank = spearman(&ratios, &means);
        pass &= rho_rank <= -0.8;
        println!("  ({solver}: rank correlation {rho_rank:.3})");
    }
    report(9, "user-1 rate falls as the distance ratio grows", pass);
}

#[test]
fn c09b_policy_gains_from_correlation() {
    let scenario = ScenarioConfig {
        irs1_size: 4,
        irs2_size: 4,
        tx_power: 1e7,
        seed: 42,
        ..ScenarioConfig::default()
    };
    let train_cfg = TrainConfig {
        episodes: 600,
        ..smoke_train_cfg()
    };
    let spec = SweepSpec {
        solvers: vec![SolverKind::Ddpg],
        ratios: vec![0.2],
        rhos: vec![0.25, 0.9],
        trials: 200,
        seed: 42,
        ..SweepSpec::default()
    };
    let result = run_sweep(&spec, &scenario, &train_cfg).unwrap();
    let mean_at = |rho: f64| {
        result
            .rows
            .iter()
            .find(|r| r.rho == rho && r.trial == "mean")
            .unwrap()
            .sum_rate
    };
    let (low, high) = (mean_at(0.25), mean_at(0.9));
    report(
        9,
        "policy sum rate higher under strong correlation",
        high >= low,
    );
    println!("  (rho 0.25: {low:.4}, rho 0.9: {high:.4} bit/s/Hz)");
}

#[test]
fn c10_complexity_formulas() {
    let drl = complexity_report(&ComplexityParams::default()).unwrap().c_drl;
    let es = complexity_report(&ComplexityParams {
        m: 4,
        n: 4,
        ..ComplexityParams::default()
    })
    .unwrap()
    .c_es;
    let big = complexity_report(&ComplexityParams {
        m: 64,
        n: 64,
        n_blk: 6,
        ..ComplexityParams::default()
    })
    .unwrap();
    let pass = drl == 37_796.0 && es == 2.0 * 73.0f64.powi(8) && big.c_block < big.c_pinv;
    report(10, "operation-count formulas", pass);
}

#[test]
fn c11_end_to_end_determinism() {
    let spec = SweepSpec {
        solvers: vec![SolverKind::Pinv, SolverKind::Random],
        ratios: vec![0.2, 1.0],
        rhos: vec![0.9],
        trials: 20,
        seed: 11,
        ..SweepSpec::default()
    };
    let scenario = ScenarioConfig {
        irs1_size: 4,
        irs2_size: 4,
        ..ScenarioConfig::default()
    };
    let emit = || {
        let result = run_sweep(&spec, &scenario, &TrainConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&result, &mut buf).unwrap();
        buf
    };
    let sweep_ok = emit() == emit();

    let cfg = TrainConfig {
        episodes: 4,
        steps_per_episode: 8,
        batch_size: 16,
        buffer_capacity: 64,
        hidden: vec![8],
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(&scenario, &cfg).unwrap();
    let b = train(&scenario, &cfg).unwrap();
    let train_ok = a.reward_history == b.reward_history && a.agent.actor == b.agent.actor;
    report(11, "sweep and training byte-reproducible", sweep_ok && train_ok);
}
