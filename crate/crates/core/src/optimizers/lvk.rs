use crate::games::{DifferentiableGame, JointState};

use super::{OptimizerConfig, OptimizerError, ReasoningTrace};

/// One reasoning level: both players respond to the opponent's previous
/// tentative state, with gradients anchored at `anchor`.
///
/// θ' = θ − η_θ ∇θf(θ, φ_prev),  φ' = φ − η_φ ∇φg(θ_prev, φ)
pub fn reasoning_map(
    game: &dyn DifferentiableGame,
    anchor: &JointState,
    prev: &JointState,
    eta_theta: f64,
    eta_phi: f64,
) -> Result<JointState, OptimizerError> {
    let gt = game.grad_theta_cost(&JointState::new(anchor.theta.clone(), prev.phi.clone()))?;
    let gp = game.grad_phi_cost(&JointState::new(prev.theta.clone(), anchor.phi.clone()))?;
    Ok(JointState::new(
        anchor.theta.add_scaled(-eta_theta, &gt),
        anchor.phi.add_scaled(-eta_phi, &gp),
    ))
}

/// Level-k gradient play: k reasoning levels, commit the k-th.
pub fn lvk_gp_step(
    game: &dyn DifferentiableGame,
    s: &JointState,
    cfg: &OptimizerConfig,
) -> Result<(JointState, ReasoningTrace), OptimizerError> {
    cfg.validate()?;
    game.check_dims(s)?;
    let mut states = Vec::with_capacity(cfg.k + 1);
    states.push(s.clone());
    for _ in 0..cfg.k {
        let prev = states.last().expect("non-empty");
        let next = reasoning_map(game, s, prev, cfg.eta_theta, cfg.eta_phi)?;
        states.push(next);
    }
    let next = states.last().expect("non-empty").clone();
    Ok((next, ReasoningTrace { states }))
}

/// Alternating variant: θ⁽ⁿ⁾ responds to φ⁽ⁿ⁻¹⁾ and φ⁽ⁿ⁾ to the fresh θ⁽ⁿ⁾.
/// θ⁽ᵏ⁾ coincides with θ⁽²ᵏ⁻¹⁾ of [`lvk_gp_step`] and φ⁽ᵏ⁾ with φ⁽²ᵏ⁾.
pub fn alt_lvk_gp_step(
    game: &dyn DifferentiableGame,
    s: &JointState,
    cfg: &OptimizerConfig,
) -> Result<(JointState, ReasoningTrace), OptimizerError> {
    cfg.validate()?;
    game.check_dims(s)?;
    let mut states = Vec::with_capacity(cfg.k + 1);
    states.push(s.clone());
    for _ in 0..cfg.k {
        let prev = states.last().expect("non-empty");
        let gt = game.grad_theta_cost(&JointState::new(s.theta.clone(), prev.phi.clone()))?;
        let theta = s.theta.add_scaled(-cfg.eta_theta, &gt);
        let gp = game.grad_phi_cost(&JointState::new(theta.clone(), s.phi.clone()))?;
        let phi = s.phi.add_scaled(-cfg.eta_phi, &gp);
        states.push(JointState::new(theta, phi));
    }
    let next = states.last().expect("non-empty").clone();
    Ok((next, ReasoningTrace { states }))
}

/// SPPM by iterating the reasoning map until consecutive iterates are closer
/// than `tol`. Returns the iterate and the number of reasoning levels used.
///
/// Contraction is only guaranteed for η < 1/(2L); expanding maps end in
/// [`OptimizerError::NoConvergence`].
pub fn sppm_step_fixed_point(
    game: &dyn DifferentiableGame,
    s: &JointState,
    eta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(JointState, usize), OptimizerError> {
    if !(eta > 0.0) {
        return Err(OptimizerError::InvalidConfig("eta"));
    }
    game.check_dims(s)?;
    let mut prev = s.clone();
    let mut gap = f64::INFINITY;
    for n in 1..=max_iter {
        let next = reasoning_map(game, s, &prev, eta, eta)?;
        gap = next.gap(&prev);
        if gap < tol {
            return Ok((next, n));
        }
        if !gap.is_finite() {
            return Err(OptimizerError::NoConvergence { iterations: n, gap });
        }
        prev = next;
    }
    Err(OptimizerError::NoConvergence {
        iterations: max_iter,
        gap,
    })
}
