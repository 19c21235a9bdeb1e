//! Policy ensembles and the two behavior-cloning losses.
//!
//! The standard ensemble loss for a sample `(s, a)` sums the squared error of
//! every member against the expert action. The swarm loss adds
//! `tau * sum_k sum_{i<j} |h_ik(s) - h_jk(s)|^2`, a penalty on pairwise
//! differences of the members' hidden activations at every hidden layer.
//! Member outputs are not part of the penalty.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::nn::{self, BatchTrace, Cotangent, ForwardTrace, Mlp, NnError, OutputActivation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("an ensemble needs at least one member")]
    Empty,
    #[error("member {member} has layer widths different from member 0")]
    HeterogeneousMembers { member: usize },
    #[error("regularization coefficient must be finite and non-negative, got {0}")]
    InvalidTau(f64),
    #[error("{kind:?} actions need a {expected:?} output head")]
    OutputHead {
        kind: ActionKind,
        expected: OutputActivation,
    },
    #[error("target action has width {found}, ensemble outputs {expected}")]
    ActionDimension { expected: usize, found: usize },
    #[error("normalizer covers {found} dims, ensemble input has {expected}")]
    NormalizerDimension { expected: usize, found: usize },
    #[error(transparent)]
    Network(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Continuous,
    Discrete,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Continuous => "continuous",
            ActionKind::Discrete => "discrete",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "continuous" => Some(ActionKind::Continuous),
            "discrete" => Some(ActionKind::Discrete),
            _ => None,
        }
    }

    pub fn output_activation(self) -> OutputActivation {
        match self {
            ActionKind::Continuous => OutputActivation::Identity,
            ActionKind::Discrete => OutputActivation::Softmax,
        }
    }
}

/// Per-dimension affine state standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Dimensions whose spread falls below this are left unscaled.
    pub const MIN_STD: f64 = 1e-6;

    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation of `states`.
    pub fn fit<'a, I>(states: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for s in states.clone() {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
            count += 1;
        }
        if count == 0 {
            return Self::identity(dim);
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for s in states {
            for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = libm::sqrt(v / count as f64);
                if sd < Self::MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Value of the per-sample loss split into its two sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Summed squared action error of all members.
    pub bc_term: f64,
    /// Pairwise hidden-activation penalty before multiplication by `tau`.
    pub swarm_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Mlp>,
    tau: f64,
    action_kind: ActionKind,
    normalizer: Normalizer,
    normalized_pairs: bool,
}

impl Ensemble {
    pub fn new(
        members: Vec<Mlp>,
        tau: f64,
        action_kind: ActionKind,
        normalizer: Normalizer,
    ) -> Result<Self, EnsembleError> {
        let first = members.first().ok_or(EnsembleError::Empty)?;
        if let Some(member) = members.iter().position(|m| m.dims() != first.dims()) {
            return Err(EnsembleError::HeterogeneousMembers { member });
        }
        let expected = action_kind.output_activation();
        if members.iter().any(|m| m.output_activation() != expected) {
            return Err(EnsembleError::OutputHead {
                kind: action_kind,
                expected,
            });
        }
        if normalizer.dim() != first.input_dim() || normalizer.std.len() != normalizer.dim() {
            return Err(EnsembleError::NormalizerDimension {
                expected: first.input_dim(),
                found: normalizer.dim(),
            });
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(EnsembleError::InvalidTau(tau));
        }
        Ok(Ensemble {
            members,
            tau,
            action_kind,
            normalizer,
            normalized_pairs: false,
        })
    }

    /// Divides the pairwise penalty by `K * N(N-1)/2` so that `tau` keeps its
    /// meaning across ensemble sizes and depths. Off by default.
    pub fn with_normalized_pairs(mut self, on: bool) -> Self {
        self.normalized_pairs = on;
        self
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Mlp] {
        &mut self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn action_kind(&self) -> ActionKind {
        self.action_kind
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn normalized_pairs(&self) -> bool {
        self.normalized_pairs
    }

    pub fn dims(&self) -> &[usize] {
        self.members[0].dims()
    }

    pub fn obs_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.members[0].output_dim()
    }

    /// Forward traces of every member on the normalized state.
    pub fn traces(&self, state: &[f64]) -> Result<Vec<ForwardTrace>, EnsembleError> {
        if state.len() != self.obs_dim() {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: self.obs_dim(),
                found: state.len(),
            }
            .into());
        }
        let x = self.normalizer.apply(state);
        self.members
            .iter()
            .map(|m| m.forward(&x).map_err(Into::into))
            .collect()
    }

    /// Raw outputs of every member: actions for continuous heads, probability
    /// vectors for discrete heads.
    pub fn member_actions(&self, state: &[f64]) -> Result<Vec<Vec<f64>>, EnsembleError> {
        Ok(self.traces(state)?.into_iter().map(|t| t.output).collect())
    }

    fn pair_scale(&self) -> f64 {
        let n = self.members.len();
        let pairs = n * (n - 1) / 2;
        let k = self.members[0].hidden_layers();
        if self.normalized_pairs && pairs > 0 && k > 0 {
            1.0 / (pairs * k) as f64
        } else {
            1.0
        }
    }

    fn check_action(&self, action: &[f64]) -> Result<(), EnsembleError> {
        if action.len() != self.action_dim() {
            return Err(EnsembleError::ActionDimension {
                expected: self.action_dim(),
                found: action.len(),
            });
        }
        Ok(())
    }
}

fn bc_term(traces: &[ForwardTrace], action: &[f64]) -> f64 {
    traces
        .iter()
        .map(|t| {
            t.output
                .iter()
                .zip(action)
                .map(|(y, a)| (y - a) * (y - a))
                .sum::<f64>()
        })
        .sum()
}

fn pairwise_hidden_term(traces: &[ForwardTrace]) -> f64 {
    let n = traces.len();
    let layers = traces.first().map_or(0, |t| t.hidden.len());
    let mut sum = 0.0;
    for k in 0..layers {
        for i in 0..n {
            for j in i + 1..n {
                sum += traces[i].hidden[k]
                    .iter()
                    .zip(&traces[j].hidden[k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
        }
    }
    sum
}

/// Standard ensemble loss; `swarm_term` is reported as zero.
pub fn standard_loss(
    ensemble: &Ensemble,
    state: &[f64],
    action: &[f64],
) -> Result<LossBreakdown, EnsembleError> {
    ensemble.check_action(action)?;
    let traces = ensemble.traces(state)?;
    let bc = bc_term(&traces, action);
    Ok(LossBreakdown {
        bc_term: bc,
        swarm_term: 0.0,
        total: bc,
    })
}

/// Swarm loss with the ensemble's own `tau`.
pub fn swarm_loss(
    ensemble: &Ensemble,
    state: &[f64],
    action: &[f64],
) -> Result<LossBreakdown, EnsembleError> {
    ensemble.check_action(action)?;
    let traces = ensemble.traces(state)?;
    Ok(breakdown(ensemble, &traces, action))
}

fn breakdown(ensemble: &Ensemble, traces: &[ForwardTrace], action: &[f64]) -> LossBreakdown {
    let bc = bc_term(traces, action);
    let swarm = ensemble.pair_scale() * pairwise_hidden_term(traces);
    LossBreakdown {
        bc_term: bc,
        swarm_term: swarm,
        total: bc + ensemble.tau * swarm,
    }
}

/// Swarm loss of one sample together with the loss cotangents of every
/// member's output and hidden activations.
pub fn loss_cotangents(
    ensemble: &Ensemble,
    traces: &[ForwardTrace],
    action: &[f64],
) -> (LossBreakdown, Vec<Cotangent>) {
    let loss = breakdown(ensemble, traces, action);
    let n = traces.len() as f64;
    let coupling = 2.0 * ensemble.tau * ensemble.pair_scale();
    let layers = traces[0].hidden.len();
    // d/dh_ik of sum_{i<j} |h_ik - h_jk|^2 is 2 * (N h_ik - sum_j h_jk).
    let layer_sums: Vec<Vec<f64>> = (0..layers)
        .map(|k| {
            let mut s = vec![0.0; traces[0].hidden[k].len()];
            for t in traces {
                for (acc, h) in s.iter_mut().zip(&t.hidden[k]) {
                    *acc += h;
                }
            }
            s
        })
        .collect();
    let cotangents = traces
        .iter()
        .map(|t| {
            let output = t
                .output
                .iter()
                .zip(action)
                .map(|(y, a)| 2.0 * (y - a))
                .collect();
            let hidden = t
                .hidden
                .iter()
                .zip(&layer_sums)
                .map(|(h, sum)| {
                    h.iter()
                        .zip(sum)
                        .map(|(hi, s)| coupling * (n * hi - s))
                        .collect()
                })
                .collect();
            Cotangent { output, hidden }
        })
        .collect();
    (loss, cotangents)
}

/// Summed swarm loss over a batch and the sample-major cotangents of every
/// member's batch trace. `actions` holds one action per row.
pub fn batch_loss_cotangents(
    ensemble: &Ensemble,
    traces: &[BatchTrace],
    actions: &[f64],
) -> (LossBreakdown, Vec<Cotangent>) {
    let n = traces.len();
    let coupling = 2.0 * ensemble.tau * ensemble.pair_scale();
    let mut bc = 0.0;
    let mut cotangents: Vec<Cotangent> = traces
        .iter()
        .map(|t| {
            let output = t
                .output
                .iter()
                .zip(actions)
                .map(|(y, a)| {
                    bc += (y - a) * (y - a);
                    2.0 * (y - a)
                })
                .collect();
            Cotangent {
                output,
                hidden: Vec::with_capacity(t.hidden.len()),
            }
        })
        .collect();
    let mut pairwise = 0.0;
    for k in 0..traces[0].hidden.len() {
        let width = traces[0].hidden[k].len();
        let mut sum = vec![0.0; width];
        for t in traces {
            for (acc, h) in sum.iter_mut().zip(&t.hidden[k]) {
                *acc += h;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                pairwise += traces[i].hidden[k]
                    .iter()
                    .zip(&traces[j].hidden[k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
        }
        for (t, c) in traces.iter().zip(&mut cotangents) {
            c.hidden.push(
                t.hidden[k]
                    .iter()
                    .zip(&sum)
                    .map(|(h, s)| coupling * (n as f64 * h - s))
                    .collect(),
            );
        }
    }
    let swarm = ensemble.pair_scale() * pairwise;
    let loss = LossBreakdown {
        bc_term: bc,
        swarm_term: swarm,
        total: bc + ensemble.tau * swarm,
    };
    (loss, cotangents)
}

/// Swarm loss of one sample and its gradient with respect to every member's
/// parameters.
pub fn loss_gradients(
    ensemble: &Ensemble,
    state: &[f64],
    action: &[f64],
) -> Result<(LossBreakdown, Vec<Vec<f64>>), EnsembleError> {
    ensemble.check_action(action)?;
    let traces = ensemble.traces(state)?;
    let (loss, cotangents) = loss_cotangents(ensemble, &traces, action);
    let grads = nn::backward(ensemble.members(), &traces, &cotangents)?;
    Ok((loss, grads))
}

/// Mean of the member outputs. Continuous actions are clipped to `bounds`
/// when given; discrete actions come back one-hot at the argmax of the mean
/// probability vector.
pub fn ensemble_action(
    ensemble: &Ensemble,
    state: &[f64],
    bounds: Option<&[(f64, f64)]>,
) -> Result<Vec<f64>, EnsembleError> {
    let outputs = ensemble.member_actions(state)?;
    Ok(aggregate(ensemble.action_kind, &outputs, bounds))
}

pub fn aggregate(kind: ActionKind, outputs: &[Vec<f64>], bounds: Option<&[(f64, f64)]>) -> Vec<f64> {
    let mut mean = mean_action(outputs);
    match kind {
        ActionKind::Continuous => {
            if let Some(bounds) = bounds {
                for (a, &(lo, hi)) in mean.iter_mut().zip(bounds) {
                    *a = a.clamp(lo, hi);
                }
            }
            mean
        }
        ActionKind::Discrete => {
            let best = argmax(&mean);
            mean.iter_mut().enumerate().for_each(|(i, v)| *v = if i == best { 1.0 } else { 0.0 });
            mean
        }
    }
}

/// Componentwise mean, accumulated in a fixed order.
pub fn mean_action(outputs: &[Vec<f64>]) -> Vec<f64> {
    let dim = outputs.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for o in outputs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += v;
        }
    }
    let n = outputs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_member(dims: &[usize], out: &[f64]) -> Mlp {
        // Zero weights everywhere, output biases carry the constant.
        let mut net = Mlp::zeros(dims, OutputActivation::Identity).unwrap();
        let len = net.num_params();
        let k = out.len();
        net.params_mut()[len - k..].copy_from_slice(out);
        net
    }

    fn random_ensemble(n: usize, dims: &[usize], tau: f64, seed: u64) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..n)
            .map(|_| Mlp::init_uniform(dims, OutputActivation::Identity, &mut rng).unwrap())
            .collect();
        Ensemble::new(members, tau, ActionKind::Continuous, Normalizer::identity(dims[0])).unwrap()
    }

    #[test]
    fn batch_loss_matches_per_sample_loss() {
        let e = random_ensemble(3, &[3, 5, 4, 2], 0.4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        use rand::Rng;
        let states: Vec<f64> = (0..6 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let actions: Vec<f64> = (0..6 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let traces: Vec<BatchTrace> = e.members().iter().map(|m| m.forward_batch(&states).unwrap()).collect();
        let (loss, cots) = batch_loss_cotangents(&e, &traces, &actions);
        let mut expected = LossBreakdown::default();
        for s in 0..6 {
            let single = e.traces(&states[s * 3..(s + 1) * 3]).unwrap();
            let (l, c) = loss_cotangents(&e, &single, &actions[s * 2..(s + 1) * 2]);
            expected.bc_term += l.bc_term;
            expected.swarm_term += l.swarm_term;
            expected.total += l.total;
            for (batch, one) in cots.iter().zip(&c) {
                assert_eq!(&batch.output[s * 2..(s + 1) * 2], one.output.as_slice());
                for (bh, oh) in batch.hidden.iter().zip(&one.hidden) {
                    let w = oh.len();
                    assert_eq!(&bh[s * w..(s + 1) * w], oh.as_slice());
                }
            }
        }
        for (a, b) in [
            (loss.bc_term, expected.bc_term),
            (loss.swarm_term, expected.swarm_term),
            (loss.total, expected.total),
        ] {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn perfect_members_have_zero_loss() {
        let dims = [2, 3, 2];
        let m = constant_member(&dims, &[0.4, -0.1]);
        let e = Ensemble::new(vec![m.clone(), m], 0.0, ActionKind::Continuous, Normalizer::identity(2))
            .unwrap();
        let l = standard_loss(&e, &[1.0, 2.0], &[0.4, -0.1]).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn two_members_symmetric_error() {
        let dims = [1, 2, 1];
        let e = Ensemble::new(
            vec![constant_member(&dims, &[0.5]), constant_member(&dims, &[-0.5])],
            0.0,
            ActionKind::Continuous,
            Normalizer::identity(1),
        )
        .unwrap();
        let l = standard_loss(&e, &[0.3], &[0.0]).unwrap();
        assert_eq!(l.total, 0.5);
    }

    #[test]
    fn single_member_is_plain_squared_error() {
        let e = random_ensemble(1, &[3, 4, 2], 0.7, 1);
        let s = [0.1, -0.2, 0.3];
        let a = [0.5, 0.25];
        let y = e.members()[0].predict(&s).unwrap();
        let direct: f64 = y.iter().zip(a).map(|(p, t)| (p - t) * (p - t)).sum();
        let l = swarm_loss(&e, &s, &a).unwrap();
        assert_eq!(l.bc_term, direct);
        assert_eq!(l.swarm_term, 0.0);
        assert_eq!(l.total, direct);
    }

    #[test]
    fn zero_tau_reduces_exactly() {
        let e = random_ensemble(3, &[2, 4, 4, 1], 0.0, 2);
        let s = [0.7, -1.3];
        assert_eq!(
            swarm_loss(&e, &s, &[0.2]).unwrap().total,
            standard_loss(&e, &s, &[0.2]).unwrap().total
        );
    }

    #[test]
    fn identical_members_have_no_swarm_term() {
        let m = random_ensemble(1, &[2, 5, 5, 1], 0.0, 3).members()[0].clone();
        let e = Ensemble::new(vec![m.clone(), m.clone(), m], 10.0, ActionKind::Continuous, Normalizer::identity(2))
            .unwrap();
        assert_eq!(swarm_loss(&e, &[0.2, 0.9], &[1.0]).unwrap().swarm_term, 0.0);
    }

    #[test]
    fn swarm_term_on_orthogonal_hidden_activations() {
        // tanh never reaches exactly 1, so the traces are built by hand.
        let dims = [1, 2, 1];
        let e = Ensemble::new(
            vec![constant_member(&dims, &[0.0]), constant_member(&dims, &[0.0])],
            0.25,
            ActionKind::Continuous,
            Normalizer::identity(1),
        )
        .unwrap();
        let trace = |h: [f64; 2], y: f64| ForwardTrace {
            input: vec![0.0],
            pre: vec![h.to_vec(), vec![y]],
            hidden: vec![h.to_vec()],
            output: vec![y],
        };
        let traces = [trace([1.0, 0.0], 0.5), trace([0.0, 1.0], -0.5)];
        let (l, _) = loss_cotangents(&e, &traces, &[0.0]);
        assert_eq!(l.bc_term, 0.5);
        assert_eq!(l.swarm_term, 2.0);
        assert_eq!(l.total, 0.5 + 0.25 * 2.0);
    }

    #[test]
    fn heterogeneous_widths_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Mlp::init_uniform(&[2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        let b = Mlp::init_uniform(&[2, 4, 1], OutputActivation::Identity, &mut rng).unwrap();
        assert_eq!(
            Ensemble::new(vec![a, b], 0.25, ActionKind::Continuous, Normalizer::identity(2)).unwrap_err(),
            EnsembleError::HeterogeneousMembers { member: 1 }
        );
    }

    #[test]
    fn negative_tau_rejected() {
        let e = random_ensemble(1, &[1, 2, 1], 0.0, 0);
        let members = e.members().to_vec();
        assert!(matches!(
            Ensemble::new(members, -0.1, ActionKind::Continuous, Normalizer::identity(1)),
            Err(EnsembleError::InvalidTau(_))
        ));
    }

    #[test]
    fn action_dimension_checked() {
        let e = random_ensemble(2, &[2, 3, 2], 0.1, 0);
        assert!(matches!(
            swarm_loss(&e, &[0.0, 0.0], &[1.0]),
            Err(EnsembleError::ActionDimension { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn aggregation_means_and_clips() {
        let out = aggregate(
            ActionKind::Continuous,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            None,
        );
        assert_eq!(out, vec![0.5, 0.5]);
        let clipped = aggregate(
            ActionKind::Continuous,
            &[vec![3.0, -3.0]],
            Some(&[(-1.0, 1.0), (-2.0, 2.0)]),
        );
        assert_eq!(clipped, vec![1.0, -2.0]);
        let discrete = aggregate(
            ActionKind::Discrete,
            &[vec![0.6, 0.4], vec![0.3, 0.7]],
            None,
        );
        assert_eq!(discrete, vec![0.0, 1.0]);
    }

    #[test]
    fn single_member_action_is_its_own() {
        let e = random_ensemble(1, &[2, 3, 2], 0.0, 5);
        let s = [0.3, 0.3];
        assert_eq!(
            ensemble_action(&e, &s, None).unwrap(),
            e.members()[0].predict(&s).unwrap()
        );
    }

    #[test]
    fn normalized_pairs_divides_by_pair_and_layer_count() {
        let e = random_ensemble(3, &[2, 4, 4, 1], 1.0, 8);
        let raw = swarm_loss(&e, &[0.1, 0.2], &[0.0]).unwrap();
        let e = e.with_normalized_pairs(true);
        let scaled = swarm_loss(&e, &[0.1, 0.2], &[0.0]).unwrap();
        assert!((scaled.swarm_term * 6.0 - raw.swarm_term).abs() < 1e-12);
    }

    #[test]
    fn coupling_changes_member_gradient() {
        let s = [0.4, -0.6];
        let a = [0.3];
        let coupled = random_ensemble(2, &[2, 4, 4, 1], 0.25, 11);
        let members = coupled.members().to_vec();
        let plain = Ensemble::new(members, 0.0, ActionKind::Continuous, Normalizer::identity(2)).unwrap();
        let (_, g_coupled) = loss_gradients(&coupled, &s, &a).unwrap();
        let (_, g_plain) = loss_gradients(&plain, &s, &a).unwrap();
        assert_ne!(g_coupled[0], g_plain[0]);

        // Member 0's coupled gradient moves when only member 1 changes.
        let mut shifted = coupled.clone();
        shifted.members_mut()[1].params_mut()[0] += 0.5;
        let (_, g_shifted) = loss_gradients(&shifted, &s, &a).unwrap();
        assert_ne!(g_coupled[0], g_shifted[0]);
    }
}
