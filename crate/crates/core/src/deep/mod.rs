//! Deep Q-Learning: a small dense network trained from uniformly sampled
//! experience with a squared-error loss and Adam.

mod adam;
mod mlp;
mod replay;

pub use adam::AdamState;
pub use mlp::{ForwardCache, MlpNetwork};
pub use replay::ReplayBuffer;

use rand::SeedableRng;

use crate::explore::epsilon_greedy;
use crate::policy::{AgentModel, Decision, Policy, PolicyKind, Transition};
use crate::rng::SimRng;

/// Mean squared error between `Q(s_i, a_i)` and fixed targets `y_i`, with its
/// gradient accumulated into `grad` (which is zeroed first). Only the taken
/// action's output receives gradient.
pub fn batch_loss_and_grad(
    net: &MlpNetwork,
    states: &[&[f64]],
    actions: &[usize],
    targets: &[f64],
    grad: &mut [f64],
) -> f64 {
    let n = states.len();
    assert!(n > 0 && actions.len() == n && targets.len() == n);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut cache = ForwardCache::default();
    let mut d_out = vec![0.0; net.output_width()];
    let mut loss = 0.0;
    for i in 0..n {
        net.forward_cached(states[i], &mut cache);
        let diff = cache.output()[actions[i]] - targets[i];
        loss += diff * diff;
        d_out.iter_mut().for_each(|d| *d = 0.0);
        d_out[actions[i]] = 2.0 * diff / n as f64;
        net.backward(&cache, &d_out, grad);
    }
    loss / n as f64
}

/// Bellman targets `r + gamma * max_a' Q(s', a')`, zero future for terminal
/// transitions. `q_net` is the target network if one is kept.
pub fn bellman_targets(q_net: &MlpNetwork, batch: &[&Transition], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let future = if t.terminal {
                0.0
            } else {
                q_net
                    .forward(&t.next_state)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            t.reward + gamma * future
        })
        .collect()
}

/// One optimizer step on a batch; returns the loss before the step.
pub fn train_batch(
    net: &mut MlpNetwork,
    adam: &mut AdamState,
    batch: &[&Transition],
    gamma: f64,
    target_net: Option<&MlpNetwork>,
) -> f64 {
    assert!(!batch.is_empty(), "empty training batch");
    let targets = bellman_targets(target_net.unwrap_or(net), batch, gamma);
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let mut grad = vec![0.0; net.params().len()];
    let loss = batch_loss_and_grad(net, &states, &actions, &targets, &mut grad);
    adam.step(net.params_mut(), &grad);
    loss
}

/// Epsilon-greedy over the network's Q-values.
pub fn dql_act(net: &MlpNetwork, state: &[f64], epsilon: f64, rng: &mut SimRng) -> usize {
    epsilon_greedy(&net.forward(state), epsilon, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqlSettings {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Copy the online network into a frozen target every this many
    /// training steps; `None` bootstraps from the online network.
    pub target_sync_steps: Option<u64>,
}

/// Deep Q-Learning agent for one UAV: its own network, optimizer and buffer.
#[derive(Debug, Clone)]
pub struct DqlAgent {
    pub net: MlpNetwork,
    pub adam: AdamState,
    pub buffer: ReplayBuffer,
    target: Option<MlpNetwork>,
    settings: DqlSettings,
    sample_rng: SimRng,
    epsilon: f64,
    learning: bool,
    last_loss: Option<f64>,
}

impl DqlAgent {
    pub fn new(net: MlpNetwork, settings: DqlSettings, seed: u64) -> Self {
        let adam = AdamState::new(net.params().len(), settings.learning_rate);
        Self {
            target: settings.target_sync_steps.map(|_| net.clone()),
            adam,
            buffer: ReplayBuffer::new(settings.replay_capacity),
            net,
            settings,
            sample_rng: SimRng::seed_from_u64(seed),
            epsilon: 0.0,
            learning: true,
            last_loss: None,
        }
    }

    pub fn settings(&self) -> &DqlSettings {
        &self.settings
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    fn train_once(&mut self) {
        let Some(batch) = self.buffer.sample(self.settings.batch_size, &mut self.sample_rng) else {
            return;
        };
        let loss = train_batch(
            &mut self.net,
            &mut self.adam,
            &batch,
            self.settings.gamma,
            self.target.as_ref(),
        );
        self.last_loss = Some(loss);
        if let (Some(every), Some(target)) = (self.settings.target_sync_steps, self.target.as_mut()) {
            if every > 0 && self.adam.steps().is_multiple_of(every) {
                target.clone_from(&self.net);
            }
        }
    }
}

impl Policy for DqlAgent {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Dql
    }

    fn select(&mut self, d: &Decision<'_>, rng: &mut SimRng) -> usize {
        dql_act(&self.net, d.state, self.epsilon, rng)
    }

    fn observe(&mut self, t: Transition) {
        if !self.learning {
            return;
        }
        self.buffer.push(t);
        self.train_once();
    }

    fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    fn set_learning(&mut self, learning: bool) {
        self.learning = learning;
    }

    fn model(&self) -> Option<AgentModel> {
        Some(AgentModel::Network(self.net.clone()))
    }
}
