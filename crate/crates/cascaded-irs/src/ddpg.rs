//! Actor-critic phase controller: environment wrapper around the channel and
//! rate machinery, replay buffer, OU exploration noise, and the training loop.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelSpec, RngStream};
use crate::error::{Error, Result};
use crate::linkbudget::{derive_geometry, noise_power, total_loss, Geometry, ScenarioConfig};
use crate::metrics::{evaluate, wrap_2pi, PhaseConfig};
use crate::neuralnet::{
    adam_step, backward, forward, load_params, mlp_init, save_params, soft_update, Activation,
    AdamState, MlpGrads, MlpParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize user 1's received power; reward is dB-scaled.
    DesiredUser,
    /// Maximize the two-user sum rate; reward is the raw rate.
    #[default]
    SumRate,
}

/// Previous-step SINRs plus the previous reward: the full 3-component
/// observation the agent sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub gamma1: f64,
    pub gamma2: f64,
    pub reward: f64,
}

impl EnvState {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.gamma1, self.gamma2, self.reward]
    }

    pub fn is_finite(&self) -> bool {
        self.gamma1.is_finite() && self.gamma2.is_finite() && self.reward.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: EnvState,
}

/// Fixed-capacity ring buffer; insertion past capacity evicts the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Domain("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            items: Vec::new(),
            capacity,
            next: 0,
        })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn sample<'a>(&'a self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<&'a Transition> {
        (0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Mean-reverting exploration noise: x <- x + theta (mu - x) + sigma g.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub value: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64) -> Self {
        Self {
            value: vec![0.0; dim],
            theta,
            sigma,
            mu: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.value.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn step(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        for v in self.value.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v += self.theta * (self.mu - *v) + self.sigma * g;
        }
        &self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// Added to the dB-scaled reward so objective-1 rewards sit near zero.
    pub reward_offset: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::SumRate,
            episodes: 10_000,
            steps_per_episode: 50,
            batch_size: 128,
            buffer_capacity: 100_000,
            gamma: 0.99,
            tau: 1e-3,
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            reward_offset: 0.0,
            hidden: vec![128, 128],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must be in (0,1], got {}", self.tau)));
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::Config("episodes and steps_per_episode must be >= 1".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config(
                "need batch_size >= 1 and buffer_capacity >= batch_size".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be nonzero".into()));
        }
        Ok(())
    }
}

/// Channel-sampling spec derived from a scenario and its geometry.
pub fn scenario_channel_spec(cfg: &ScenarioConfig, geom: &Geometry) -> ChannelSpec {
    ChannelSpec {
        m: cfg.irs1_size,
        n: cfg.irs2_size,
        k1: cfg.k1,
        k2: cfg.k2,
        rho: cfg.rho,
        theta: cfg.corr_theta.unwrap_or(geom.theta_i2),
        los_mode: cfg.los_mode,
        wavelength: cfg.wavelength(),
        user_distances: geom.r_tk.clone(),
        r3: geom.r_3,
        los_angles_tx: geom.theta_i1.clone(),
        los_angle_rx: geom.theta_r2,
    }
}

/// One fully-resolved scenario the agent interacts with: per-user losses and
/// noise are precomputed, channels are resampled on every step.
#[derive(Debug, Clone)]
pub struct Env {
    pub spec: ChannelSpec,
    pub losses: Vec<f64>,
    pub tx_power: f64,
    pub noise: f64,
    pub alpha: f64,
    pub objective: Objective,
    pub reward_offset: f64,
}

impl Env {
    pub fn new(cfg: &ScenarioConfig, objective: Objective, reward_offset: f64) -> Result<Self> {
        let geom = derive_geometry(cfg)?;
        let losses = (0..2)
            .map(|u| total_loss(&geom, cfg, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: scenario_channel_spec(cfg, &geom),
            losses,
            tx_power: cfg.tx_power,
            noise: noise_power(cfg.noise_psd, cfg.bandwidth, cfg.noise_figure),
            alpha: cfg.alpha,
            objective,
            reward_offset,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.spec.m + self.spec.n
    }

    fn score(&self, ch: &crate::channel::ChannelRealization, phases: &PhaseConfig) -> Result<(EnvState, f64)> {
        let point = evaluate(ch, phases, &self.losses, self.tx_power, self.noise, self.alpha)?;
        let reward = match self.objective {
            Objective::DesiredUser => {
                10.0 * point.p_rx[0].max(1e-300).log10() + self.reward_offset
            }
            Objective::SumRate => point.sum_rate,
        };
        Ok((
            EnvState {
                gamma1: point.sinr[0],
                gamma2: point.sinr[1],
                reward,
            },
            reward,
        ))
    }

    /// Fresh channels, uniformly random phases; the resulting metrics seed the
    /// initial observation.
    pub fn reset(&self, stream: RngStream) -> Result<EnvState> {
        let ch = sample_realization(&self.spec, stream.child(0))?;
        let mut rng = stream.child(1).rng();
        let phases: Vec<f64> = (0..self.action_dim())
            .map(|_| rng.random::<f64>() * crate::metrics::TWO_PI)
            .collect();
        let (state, _) = self.score(&ch, &PhaseConfig::from_flat(&phases, self.spec.m)?)?;
        Ok(state)
    }

    /// Apply an action on a newly drawn realization.
    pub fn step(&self, action: &[f64], stream: RngStream) -> Result<(EnvState, f64)> {
        if action.len() != self.action_dim() {
            return Err(Error::Shape(format!(
                "action length {} but surfaces need {}",
                action.len(),
                self.action_dim()
            )));
        }
        let ch = sample_realization(&self.spec, stream)?;
        let phases = PhaseConfig::from_flat(action, self.spec.m)?;
        self.score(&ch, &phases)
    }
}

/// a = pi (tanh_output + 1) + noise, wrapped to [0, 2pi).
pub fn agent_act(actor: &MlpParams, state: &EnvState, noise: Option<&[f64]>) -> Result<Vec<f64>> {
    let (out, _) = forward(actor, &state.to_vec())?;
    if let Some(n) = noise {
        if n.len() != out.len() {
            return Err(Error::Shape("noise length does not match action".into()));
        }
    }
    Ok(out
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let a = std::f64::consts::PI * (y + 1.0) + noise.map_or(0.0, |n| n[i]);
            wrap_2pi(a)
        })
        .collect())
}

/// Online and target actor/critic networks plus their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub actor_target: MlpParams,
    pub critic_target: MlpParams,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
}

impl Agent {
    pub fn new(action_dim: usize, hidden: &[usize], stream: RngStream) -> Result<Self> {
        let mut actor_sizes = vec![3];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(action_dim);
        let mut actor_acts = vec![Activation::Relu; hidden.len()];
        actor_acts.push(Activation::Tanh);
        let actor = mlp_init(&actor_sizes, &actor_acts, stream.child(1))?;

        let mut critic_sizes = vec![3 + action_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let mut critic_acts = vec![Activation::Relu; hidden.len()];
        critic_acts.push(Activation::Linear);
        let critic = mlp_init(&critic_sizes, &critic_acts, stream.child(2))?;

        let actor_adam = AdamState::new(&actor);
        let critic_adam = AdamState::new(&critic);
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_adam,
            critic_adam,
        })
    }
}

fn critic_input(state: &EnvState, action: &[f64]) -> Vec<f64> {
    let mut x = state.to_vec();
    x.extend_from_slice(action);
    x
}

/// Deterministic target-policy action: pi (tanh + 1), no noise, no wrap needed.
fn target_action(actor_target: &MlpParams, state: &EnvState) -> Result<Vec<f64>> {
    let (out, _) = forward(actor_target, &state.to_vec())?;
    Ok(out.iter().map(|&y| std::f64::consts::PI * (y + 1.0)).collect())
}

/// r + gamma Q'(s', mu'(s')) per transition.
pub fn bellman_targets(agent: &Agent, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let a_next = target_action(&agent.actor_target, &t.next_state)?;
            let (q_next, _) = forward(&agent.critic_target, &critic_input(&t.next_state, &a_next))?;
            Ok(t.reward + gamma * q_next[0])
        })
        .collect()
}

/// Mean squared Bellman error of the online critic.
pub fn critic_loss(critic: &MlpParams, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let (q, _) = forward(critic, &critic_input(&t.state, &t.action))?;
        loss += (q[0] - y) * (q[0] - y);
    }
    Ok(loss / batch.len() as f64)
}

/// Gradient of J = mean_s Q(s, pi(tanh+1)-scaled actor output) with respect to
/// the actor parameters, chained through the critic's input gradient.
pub fn actor_gradient(
    actor: &MlpParams,
    critic: &MlpParams,
    states: &[EnvState],
) -> Result<(MlpGrads, f64)> {
    let mut grads = MlpGrads::zeros_like(actor);
    let mut mean_q = 0.0;
    let scale = std::f64::consts::PI / states.len() as f64;
    for s in states {
        let (out, cache) = forward(actor, &s.to_vec())?;
        let action: Vec<f64> = out.iter().map(|&y| std::f64::consts::PI * (y + 1.0)).collect();
        let (q, critic_cache) = forward(critic, &critic_input(s, &action))?;
        mean_q += q[0];
        let (_, dinput) = backward(critic, &critic_cache, &[1.0])?;
        // dQ/d(tanh output) = dQ/da * pi; averaged over the batch.
        let dout: Vec<f64> = dinput[3..].iter().map(|&d| d * scale).collect();
        let (g, _) = backward(actor, &cache, &dout)?;
        grads.accumulate(&g);
    }
    Ok((grads, mean_q / states.len() as f64))
}

/// One optimization step on a sampled batch; returns (critic loss before the
/// update, mean online Q under the current policy).
pub fn train_step(agent: &mut Agent, batch: &[&Transition], cfg: &TrainConfig) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let targets = bellman_targets(agent, batch, cfg.gamma)?;
    let loss = critic_loss(&agent.critic, batch, &targets)?;

    let mut critic_grads = MlpGrads::zeros_like(&agent.critic);
    let inv_b = 1.0 / batch.len() as f64;
    for (t, &y) in batch.iter().zip(&targets) {
        let input = critic_input(&t.state, &t.action);
        let (q, cache) = forward(&agent.critic, &input)?;
        let (g, _) = backward(&agent.critic, &cache, &[2.0 * (q[0] - y) * inv_b])?;
        critic_grads.accumulate(&g);
    }
    adam_step(&mut agent.critic, &critic_grads, &mut agent.critic_adam, cfg.critic_lr)?;

    let states: Vec<EnvState> = batch.iter().map(|t| t.state).collect();
    let (mut actor_grads, mean_q) = actor_gradient(&agent.actor, &agent.critic, &states)?;
    // Ascend mean Q.
    actor_grads.scale(-1.0);
    adam_step(&mut agent.actor, &actor_grads, &mut agent.actor_adam, cfg.actor_lr)?;

    agent.actor_target = soft_update(&agent.actor_target, &agent.actor, cfg.tau)?;
    agent.critic_target = soft_update(&agent.critic_target, &agent.critic, cfg.tau)?;
    Ok((loss, mean_q))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub agent: Agent,
    /// Mean reward per episode.
    pub reward_history: Vec<f64>,
}

/// Full training loop: act with OU exploration, store, sample, update. Every
/// step sees a freshly drawn channel realization.
pub fn train(scenario: &ScenarioConfig, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let env = Env::new(scenario, cfg.objective, cfg.reward_offset)?;
    let root = RngStream::new(cfg.seed, 0xdd);
    let mut agent = Agent::new(env.action_dim(), &cfg.hidden, root.child(1))?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut ou = OuNoise::new(env.action_dim(), cfg.ou_theta, cfg.ou_sigma);
    let mut rng = root.child(2).rng();
    let mut history = Vec::with_capacity(cfg.episodes);
    let mut step_counter = 0u64;
    for ep in 0..cfg.episodes {
        ou.reset();
        let mut state = env.reset(root.child(1_000_000 + ep as u64))?;
        let mut total = 0.0;
        for _ in 0..cfg.steps_per_episode {
            let noise = ou.step(&mut rng).to_vec();
            let action = agent_act(&agent.actor, &state, Some(&noise))?;
            debug_assert!(action.iter().all(|&a| (0.0..crate::metrics::TWO_PI).contains(&a)));
            step_counter += 1;
            let (next, reward) = env.step(&action, root.child(2_000_000 + step_counter))?;
            if !next.is_finite() {
                return Err(Error::Numerical("non-finite environment state".into()));
            }
            buffer.push(Transition {
                state,
                action,
                reward,
                next_state: next,
            });
            if buffer.len() >= cfg.batch_size {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                train_step(&mut agent, &batch, cfg)?;
            }
            state = next;
            total += reward;
        }
        history.push(total / cfg.steps_per_episode as f64);
    }
    Ok(TrainOutput {
        agent,
        reward_history: history,
    })
}

/// Noiseless policy rollout on held-out realizations: each trial resets the
/// environment, acts once greedily, and records the reward.
pub fn evaluate_policy(
    env: &Env,
    actor: &MlpParams,
    trials: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    (0..trials)
        .map(|t| {
            let s = stream.child(t as u64);
            let state = env.reset(s.child(0))?;
            let action = agent_act(actor, &state, None)?;
            let (_, reward) = env.step(&action, s.child(1))?;
            Ok(reward)
        })
        .collect()
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"DDP1";

fn write_f64s<W: Write>(out: &mut W, vals: &[f64]) -> Result<()> {
    for &v in vals {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_adam<W: Write>(out: &mut W, a: &AdamState) -> Result<()> {
    out.write_all(&a.step.to_le_bytes())?;
    write_f64s(out, &[a.beta1, a.beta2, a.epsilon])?;
    for group in [&a.m_weights, &a.v_weights, &a.m_biases, &a.v_biases] {
        for v in group {
            write_f64s(out, v)?;
        }
    }
    Ok(())
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    (0..count)
        .map(|_| {
            input.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        })
        .collect()
}

fn read_adam<R: Read>(input: &mut R, like: &MlpParams) -> Result<AdamState> {
    let mut u64buf = [0u8; 8];
    input.read_exact(&mut u64buf)?;
    let step = u64::from_le_bytes(u64buf);
    let scalars = read_f64s(input, 3)?;
    let mut a = AdamState::new(like);
    a.step = step;
    a.beta1 = scalars[0];
    a.beta2 = scalars[1];
    a.epsilon = scalars[2];
    for li in 0..like.layers.len() {
        a.m_weights[li] = read_f64s(input, like.layers[li].weights.len())?;
    }
    for li in 0..like.layers.len() {
        a.v_weights[li] = read_f64s(input, like.layers[li].weights.len())?;
    }
    for li in 0..like.layers.len() {
        a.m_biases[li] = read_f64s(input, like.layers[li].biases.len())?;
    }
    for li in 0..like.layers.len() {
        a.v_biases[li] = read_f64s(input, like.layers[li].biases.len())?;
    }
    Ok(a)
}

/// All four networks plus optimizer state; round-trips bit-exactly.
pub fn save_checkpoint<W: Write>(agent: &Agent, out: &mut W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    save_params(&agent.actor, out)?;
    save_params(&agent.critic, out)?;
    save_params(&agent.actor_target, out)?;
    save_params(&agent.critic_target, out)?;
    write_adam(out, &agent.actor_adam)?;
    write_adam(out, &agent.critic_adam)?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(input: &mut R) -> Result<Agent> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Config("bad checkpoint magic".into()));
    }
    let actor = load_params(input)?;
    let critic = load_params(input)?;
    let actor_target = load_params(input)?;
    let critic_target = load_params(input)?;
    let actor_adam = read_adam(input, &actor)?;
    let critic_adam = read_adam(input, &critic)?;
    Ok(Agent {
        actor,
        critic,
        actor_target,
        critic_target,
        actor_adam,
        critic_adam,
    })
}

/// Reward trace in the `episode,mean_reward` layout.
pub fn write_reward_csv<W: Write>(history: &[f64], out: &mut W) -> Result<()> {
    writeln!(out, "episode,mean_reward")?;
    for (i, r) in history.iter().enumerate() {
        writeln!(out, "{i},{r}")?;
    }
    Ok(())
}
