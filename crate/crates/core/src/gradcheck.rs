//! Central finite differences, used as the independent oracle for the
//! analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{loss_gradients, swarm_loss, ActionKind, Ensemble, EnsembleError, Normalizer};
use crate::nn::Mlp;

/// Finite-difference step used by [`check_random_ensembles`].
pub const STEP: f64 = 1e-3;
/// Smallest denominator of the relative error in [`check_random_ensembles`].
pub const ABS_FLOOR: f64 = 1e-7;
/// Regularization coefficients exercised by [`check_random_ensembles`].
pub const TAUS: [f64; 3] = [0.0, 0.25, 1.0];

/// Fourth-order central-difference gradient of `loss` at `params`:
/// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`.
pub fn finite_diff_grad<F>(loss: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            let mut at = |offset: f64| {
                probe[i] = orig + offset;
                loss(&probe)
            };
            let (up2, up, down, down2) = (at(2.0 * step), at(step), at(-step), at(-2.0 * step));
            probe[i] = orig;
            (8.0 * (up - down) - (up2 - down2)) / (12.0 * step)
        })
        .collect()
}

/// Relative disagreement between an analytic and a numerical derivative.
/// The denominator never drops below `abs_floor`, so derivatives that are
/// both near zero are compared absolutely.
pub fn gradient_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(abs_floor)
}

/// Largest [`gradient_error`] over paired entries.
pub fn max_gradient_error(analytic: &[f64], numeric: &[f64], abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| gradient_error(a, n, abs_floor))
        .fold(0.0, f64::max)
}

/// Outcome of [`check_random_ensembles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub parameters: usize,
    pub max_error: f64,
    /// Trial that produced `max_error`.
    pub worst_trial: usize,
}

/// Compares analytic swarm-loss gradients against central differences on
/// `trials` random tiny ensembles: 2 or 3 members, at most 4 inputs, one or
/// two hidden layers of width at most 4, continuous or discrete heads, and
/// `tau` cycling through [`TAUS`].
pub fn check_random_ensembles(trials: usize, seed: u64) -> Result<GradCheckReport, EnsembleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        trials,
        parameters: 0,
        max_error: 0.0,
        worst_trial: 0,
    };
    for trial in 0..trials {
        let tau = TAUS[trial % TAUS.len()];
        let (ensemble, state, action) = random_case(&mut rng, tau)?;
        let (_, grads) = loss_gradients(&ensemble, &state, &action)?;
        for (member, analytic) in grads.iter().enumerate() {
            let loss = |params: &[f64]| {
                let mut probe = ensemble.clone();
                probe.members_mut()[member].params_mut().copy_from_slice(params);
                swarm_loss(&probe, &state, &action).map_or(f64::NAN, |l| l.total)
            };
            let numeric = finite_diff_grad(loss, ensemble.members()[member].params(), STEP);
            let err = max_gradient_error(analytic, &numeric, ABS_FLOOR);
            report.parameters += analytic.len();
            if !(err <= report.max_error) {
                report.max_error = err;
                report.worst_trial = trial;
            }
        }
    }
    Ok(report)
}

fn random_case<R: Rng>(rng: &mut R, tau: f64) -> Result<(Ensemble, Vec<f64>, Vec<f64>), EnsembleError> {
    let members = rng.gen_range(2..=3);
    let kind = if rng.gen_bool(0.5) {
        ActionKind::Continuous
    } else {
        ActionKind::Discrete
    };
    let obs_dim = rng.gen_range(1..=4);
    let action_dim = match kind {
        ActionKind::Continuous => rng.gen_range(1..=3),
        ActionKind::Discrete => rng.gen_range(2..=3),
    };
    let mut dims = vec![obs_dim];
    for _ in 0..rng.gen_range(1..=2) {
        dims.push(rng.gen_range(1..=4));
    }
    dims.push(action_dim);
    let nets = (0..members)
        .map(|_| {
            let mut net = Mlp::zeros(&dims, kind.output_activation())?;
            net.params_mut().iter_mut().for_each(|p| *p = rng.gen_range(-1.0..1.0));
            Ok(net)
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;
    let normalizer = Normalizer {
        mean: (0..obs_dim).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        std: (0..obs_dim).map(|_| rng.gen_range(0.5..2.0)).collect(),
    };
    let state = (0..obs_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let action = match kind {
        ActionKind::Continuous => (0..action_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        ActionKind::Discrete => {
            let hot = rng.gen_range(0..action_dim);
            (0..action_dim).map(|i| if i == hot { 1.0 } else { 0.0 }).collect()
        }
    };
    let ensemble = Ensemble::new(nets, tau, kind, normalizer)?;
    Ok((ensemble, state, action))
}
