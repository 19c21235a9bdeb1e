use std::fmt;

use crate::error::{CliError, Result};

pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_MEMBERS: usize = 4;

/// The three behavior-cloning variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// A single policy.
    Bc,
    /// Independent members, `tau = 0`.
    Ensemble,
    /// Members coupled through the hidden-activation penalty, `tau > 0`.
    Swarm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Bc, Method::Ensemble, Method::Swarm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bc => "bc",
            Method::Ensemble => "ensemble",
            Method::Swarm => "swarm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Fills in the defaults for `tau` and `n` and rejects combinations the
    /// method does not allow.
    pub fn resolve(self, tau: Option<f64>, n: Option<usize>) -> Result<(f64, usize)> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        match self {
            Method::Bc => {
                let (tau, n) = (tau.unwrap_or(0.0), n.unwrap_or(1));
                if n != 1 {
                    return usage(format!("bc trains a single policy; got n = {n} (use ensemble)"));
                }
                if tau != 0.0 {
                    return usage(format!("bc has no alignment penalty; got tau = {tau}"));
                }
                Ok((tau, n))
            }
            Method::Ensemble => {
                let (tau, n) = (tau.unwrap_or(0.0), n.unwrap_or(DEFAULT_MEMBERS));
                if tau != 0.0 {
                    return usage(format!("ensemble requires tau = 0, got {tau} (use swarm)"));
                }
                if n < 2 {
                    return usage(format!("ensemble needs n >= 2, got {n} (use bc)"));
                }
                Ok((tau, n))
            }
            Method::Swarm => {
                let (tau, n) = (tau.unwrap_or(DEFAULT_TAU), n.unwrap_or(DEFAULT_MEMBERS));
                if !(tau.is_finite() && tau > 0.0) {
                    return usage(format!(
                        "swarm requires a positive finite tau, got {tau}; with tau = 0 use ensemble"
                    ));
                }
                if n < 2 {
                    return usage(format!("swarm needs n >= 2, got {n}"));
                }
                Ok((tau, n))
            }
        }
    }

    /// The method a trained `(tau, n)` pair belongs to.
    pub fn classify(tau: f64, n: usize) -> Self {
        if n == 1 {
            Method::Bc
        } else if tau == 0.0 {
            Method::Ensemble
        } else {
            Method::Swarm
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert_eq!(Method::Swarm.resolve(None, None).unwrap(), (0.25, 4));
        assert_eq!(Method::Ensemble.resolve(None, None).unwrap(), (0.0, 4));
        assert_eq!(Method::Bc.resolve(None, None).unwrap(), (0.0, 1));
    }

    #[test]
    fn swarm_without_penalty_points_to_ensemble() {
        let err = Method::Swarm.resolve(Some(0.0), None).unwrap_err();
        assert!(err.to_string().contains("use ensemble"), "{err}");
    }

    #[test]
    fn bc_with_members_rejected() {
        assert!(Method::Bc.resolve(None, Some(3)).is_err());
        assert!(Method::Ensemble.resolve(Some(0.5), None).is_err());
    }
}
