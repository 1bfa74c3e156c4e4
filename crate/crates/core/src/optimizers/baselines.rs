//! Explicit baselines: GDA, EG, OGD, SGA, LOLA and LEAD.
//!
//! Rules are written for general-sum games in terms of each player's own
//! cost (θ descends f, φ descends g). For zero-sum games the max-player rows
//! reduce to the usual ascent form. Cross terms use the game's Jacobian-vector
//! products: exact for analytic games, forward differences otherwise.

use std::fmt;
use std::str::FromStr;

use crate::games::{DifferentiableGame, JointState};

use super::{OptimizerConfig, OptimizerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Gda,
    Eg,
    Ogd,
    Sga,
    Lola,
    Lead,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Gda => "gda",
            Baseline::Eg => "eg",
            Baseline::Ogd => "ogd",
            Baseline::Sga => "sga",
            Baseline::Lola => "lola",
            Baseline::Lead => "lead",
        })
    }
}

impl FromStr for Baseline {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "gda" => Baseline::Gda,
            "eg" => Baseline::Eg,
            "ogd" => Baseline::Ogd,
            "sga" => Baseline::Sga,
            "lola" => Baseline::Lola,
            "lead" => Baseline::Lead,
            _ => return Err(()),
        })
    }
}

/// Previous iterate, needed by OGD (past gradient) and LEAD (last move).
/// Absent on the first step, where both fall back to GDA.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerHistory {
    pub prev_state: Option<JointState>,
}

fn gradients(
    game: &dyn DifferentiableGame,
    s: &JointState,
) -> Result<(crate::linalg::Vector, crate::linalg::Vector), OptimizerError> {
    Ok((game.grad_theta_cost(s)?, game.grad_phi_cost(s)?))
}

/// One step of a baseline method; returns the new state and the history for
/// the next call.
pub fn baseline_step(
    alg: Baseline,
    game: &dyn DifferentiableGame,
    s: &JointState,
    cfg: &OptimizerConfig,
    hist: &OptimizerHistory,
) -> Result<(JointState, OptimizerHistory), OptimizerError> {
    cfg.validate()?;
    game.check_dims(s)?;
    if let Some(prev) = &hist.prev_state {
        if prev.dims() != s.dims() {
            return Err(OptimizerError::MissingHistory);
        }
    }
    let (et, ep) = (cfg.eta_theta, cfg.eta_phi);
    let (gt, gp) = gradients(game, s)?;
    let next = match alg {
        Baseline::Gda => JointState::new(s.theta.add_scaled(-et, &gt), s.phi.add_scaled(-ep, &gp)),
        Baseline::Eg => {
            let look = JointState::new(s.theta.add_scaled(-et, &gt), s.phi.add_scaled(-ep, &gp));
            let (lt, lp) = gradients(game, &look)?;
            JointState::new(s.theta.add_scaled(-et, &lt), s.phi.add_scaled(-ep, &lp))
        }
        Baseline::Ogd => match &hist.prev_state {
            None => JointState::new(s.theta.add_scaled(-et, &gt), s.phi.add_scaled(-ep, &gp)),
            Some(prev) => {
                let (pt, pp) = gradients(game, prev)?;
                JointState::new(
                    s.theta.add_scaled(-2.0 * et, &gt).add_scaled(et, &pt),
                    s.phi.add_scaled(-2.0 * ep, &gp).add_scaled(ep, &pp),
                )
            }
        },
        Baseline::Sga | Baseline::Lola => {
            // θ⁺ = θ − η∇θf − ηγ ∇θφf·∇φf  (zero-sum form, ∇φf = −∇φg)
            let coeff = if alg == Baseline::Sga {
                cfg.gamma
            } else {
                cfg.delta
            };
            let adj_theta = game.cross_jvp_theta(s, &gp)?;
            let adj_phi = game.cross_jvp_phi(s, &gt)?;
            JointState::new(
                s.theta
                    .add_scaled(-et, &gt)
                    .add_scaled(et * coeff, &adj_theta),
                s.phi.add_scaled(-ep, &gp).add_scaled(ep * coeff, &adj_phi),
            )
        }
        Baseline::Lead => match &hist.prev_state {
            None => JointState::new(s.theta.add_scaled(-et, &gt), s.phi.add_scaled(-ep, &gp)),
            Some(prev) => {
                // θ⁺ = θ − η∇θf − α ∇θφf (φ_t − φ_{t−1}), mirrored for φ
                let adj_theta = game.cross_jvp_theta(s, &(&s.phi - &prev.phi))?;
                let adj_phi = game.cross_jvp_phi(s, &(&s.theta - &prev.theta))?;
                JointState::new(
                    s.theta
                        .add_scaled(-et, &gt)
                        .add_scaled(-cfg.alpha, &adj_theta),
                    s.phi.add_scaled(-ep, &gp).add_scaled(-cfg.alpha, &adj_phi),
                )
            }
        },
    };
    Ok((
        next,
        OptimizerHistory {
            prev_state: Some(s.clone()),
        },
    ))
}
