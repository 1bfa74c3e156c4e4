//! Adam with recursive reasoning.
//!
//! All k reasoning levels reuse the same gradient oracle (for stochastic games
//! the caller fixes the minibatch inside the game) and the moments carried in
//! from the previous step. Only the k-th level's moments are committed.

use crate::games::{DifferentiableGame, JointState};
use crate::linalg::Vector;

use super::{OptimizerConfig, OptimizerError, ReasoningTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m_theta: Vector,
    pub v_theta: Vector,
    pub m_phi: Vector,
    pub v_phi: Vector,
    /// number of committed steps so far
    pub t: u64,
}

impl AdamMoments {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m_theta: Vector::zeros(m),
            v_theta: Vector::zeros(m),
            m_phi: Vector::zeros(n),
            v_phi: Vector::zeros(n),
            t: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m_theta.len(), self.m_phi.len())
    }
}

#[derive(Debug, Clone)]
pub struct AdamStep {
    pub state: JointState,
    pub moments: AdamMoments,
    pub trace: ReasoningTrace,
}

/// Moment update from frozen `m`, `v` plus the bias-corrected step.
struct Update {
    m: Vector,
    v: Vector,
    step: Vector,
}

fn adam_update(
    m_prev: &Vector,
    v_prev: &Vector,
    g: &Vector,
    t: u64,
    cfg: &OptimizerConfig,
) -> Update {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let n = g.len();
    let mut m = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut step = Vec::with_capacity(n);
    for i in 0..n {
        let mi = b1 * m_prev[i] + (1.0 - b1) * g[i];
        let vi = b2 * v_prev[i] + (1.0 - b2) * g[i] * g[i];
        step.push((mi / c1) / ((vi / c2).sqrt() + cfg.epsilon));
        m.push(mi);
        v.push(vi);
    }
    Update {
        m: Vector::from_vec_unchecked(m),
        v: Vector::from_vec_unchecked(v),
        step: Vector::from_vec_unchecked(step),
    }
}

fn check(
    game: &dyn DifferentiableGame,
    s: &JointState,
    moments: &AdamMoments,
    cfg: &OptimizerConfig,
) -> Result<(), OptimizerError> {
    cfg.validate()?;
    game.check_dims(s)?;
    if moments.dims() != s.dims()
        || moments.v_theta.len() != s.theta.len()
        || moments.v_phi.len() != s.phi.len()
    {
        return Err(OptimizerError::InvalidConfig("moments"));
    }
    Ok(())
}

/// Level-k Adam: k simultaneous reasoning levels anchored at `s`, each one
/// normalizing its gradient with moments recomputed from `moments`.
pub fn lvk_adam_step(
    game: &dyn DifferentiableGame,
    s: &JointState,
    moments: &AdamMoments,
    cfg: &OptimizerConfig,
) -> Result<AdamStep, OptimizerError> {
    check(game, s, moments, cfg)?;
    let t = moments.t + 1;
    let mut states = Vec::with_capacity(cfg.k + 1);
    states.push(s.clone());
    let mut last = None;
    for _ in 0..cfg.k {
        let prev = states.last().expect("non-empty");
        let gt = game.grad_theta_cost(&JointState::new(s.theta.clone(), prev.phi.clone()))?;
        let gp = game.grad_phi_cost(&JointState::new(prev.theta.clone(), s.phi.clone()))?;
        let ut = adam_update(&moments.m_theta, &moments.v_theta, &gt, t, cfg);
        let up = adam_update(&moments.m_phi, &moments.v_phi, &gp, t, cfg);
        states.push(JointState::new(
            s.theta.add_scaled(-cfg.eta_theta, &ut.step),
            s.phi.add_scaled(-cfg.eta_phi, &up.step),
        ));
        last = Some((ut, up));
    }
    Ok(commit(states, last, t))
}

/// Alternating Level-k Adam: within a level θ responds to the previous φ and
/// φ to the fresh θ.
pub fn alt_lvk_adam_step(
    game: &dyn DifferentiableGame,
    s: &JointState,
    moments: &AdamMoments,
    cfg: &OptimizerConfig,
) -> Result<AdamStep, OptimizerError> {
    check(game, s, moments, cfg)?;
    let t = moments.t + 1;
    let mut states = Vec::with_capacity(cfg.k + 1);
    states.push(s.clone());
    let mut last = None;
    for _ in 0..cfg.k {
        let prev = states.last().expect("non-empty");
        let gt = game.grad_theta_cost(&JointState::new(s.theta.clone(), prev.phi.clone()))?;
        let ut = adam_update(&moments.m_theta, &moments.v_theta, &gt, t, cfg);
        let theta = s.theta.add_scaled(-cfg.eta_theta, &ut.step);
        let gp = game.grad_phi_cost(&JointState::new(theta.clone(), s.phi.clone()))?;
        let up = adam_update(&moments.m_phi, &moments.v_phi, &gp, t, cfg);
        let phi = s.phi.add_scaled(-cfg.eta_phi, &up.step);
        states.push(JointState::new(theta, phi));
        last = Some((ut, up));
    }
    Ok(commit(states, last, t))
}

fn commit(states: Vec<JointState>, last: Option<(Update, Update)>, t: u64) -> AdamStep {
    let (ut, up) = last.expect("k >= 1 checked by validate");
    AdamStep {
        state: states.last().expect("non-empty").clone(),
        moments: AdamMoments {
            m_theta: ut.m,
            v_theta: ut.v,
            m_phi: up.m,
            v_phi: up.v,
            t,
        },
        trace: ReasoningTrace { states },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{fixtures, AnalyticGame};
    use crate::linalg::Matrix;
    use crate::optimizers::{alt_lvk_gp_step, lvk_gp_step};

    fn cosine(a: &Vector, b: &Vector) -> f64 {
        a.dot(b) / (a.norm() * b.norm())
    }

    fn delta(a: &JointState, b: &JointState) -> Vector {
        a.theta
            .iter()
            .chain(a.phi.iter())
            .zip(b.theta.iter().chain(b.phi.iter()))
            .map(|(x, y)| x - y)
            .collect()
    }

    #[test]
    fn first_step_is_sign_like() {
        let (g, s) = fixtures::quadratic_5d(1.0).unwrap();
        let cfg = OptimizerConfig::with_eta(1e-3);
        let out = lvk_adam_step(&g, &s, &AdamMoments::zeros(5, 5), &cfg).unwrap();
        let gt = g.grad_theta_cost(&s).unwrap();
        let gp = g.grad_phi_cost(&s).unwrap();
        for i in 0..5 {
            let want = -1e-3 * gt[i] / (gt[i].abs() + 1e-8);
            assert!((out.state.theta[i] - s.theta[i] - want).abs() < 1e-15);
            let want = -1e-3 * gp[i] / (gp[i].abs() + 1e-8);
            assert!((out.state.phi[i] - s.phi[i] - want).abs() < 1e-15);
        }
        assert_eq!(out.moments.t, 1);
        assert_eq!(out.moments.m_theta, gt);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let g = AnalyticGame::bilinear(Matrix::identity(2)).unwrap();
        let s = JointState::zeros(2, 2);
        let mut m = AdamMoments::zeros(2, 2);
        m.v_theta = Vector::from_vec_unchecked(vec![1.0, 4.0]);
        m.v_phi = Vector::from_vec_unchecked(vec![0.5, 2.0]);
        m.t = 3;
        let mut cfg = OptimizerConfig::with_eta(0.1).depth(3);
        cfg.beta1 = 0.5;
        for out in [
            lvk_adam_step(&g, &s, &m, &cfg).unwrap(),
            alt_lvk_adam_step(&g, &s, &m, &cfg).unwrap(),
        ] {
            assert_eq!(out.state, s);
            assert_eq!(out.moments.v_theta.as_slice(), &[0.9, 3.6]);
            assert_eq!(out.moments.v_phi.as_slice(), &[0.45, 1.8]);
            assert_eq!(out.moments.m_phi, Vector::zeros(2));
            assert_eq!(out.moments.t, 4);
        }
    }

    #[test]
    fn only_last_level_moments_are_committed() {
        let (g, s) = fixtures::quadratic_5d(2.0).unwrap();
        let cfg = OptimizerConfig::with_eta(0.01).depth(3);
        let out = lvk_adam_step(&g, &s, &AdamMoments::zeros(5, 5), &cfg).unwrap();
        let prev = &out.trace.states[2];
        let gt = g
            .grad_theta_cost(&JointState::new(s.theta.clone(), prev.phi.clone()))
            .unwrap();
        // β₁ = 0: m equals the last reasoning gradient
        assert!(out.moments.m_theta.max_abs_diff(&gt) < 1e-15);
    }

    #[test]
    fn depth_two_reasoning_iterates_differ() {
        let (g, s) = fixtures::quadratic_5d(1.0).unwrap();
        let cfg = OptimizerConfig::with_eta(0.01).depth(2);
        let out = lvk_adam_step(&g, &s, &AdamMoments::zeros(5, 5), &cfg).unwrap();
        let gaps = out.trace.gaps();
        assert_eq!(gaps.len(), 2);
        assert!(gaps[1] > 0.0);
        assert!((gaps[1] - out.trace.states[2].gap(&out.trace.states[1])).abs() == 0.0);
    }

    #[test]
    fn huge_epsilon_points_like_gradient_play() {
        let (g, s) = fixtures::quadratic_5d(1.5).unwrap();
        let eps = 1e12;
        let k = 4;
        let mut cfg = OptimizerConfig::with_eta(0.05).depth(k);
        cfg.beta2 = 0.0;
        cfg.epsilon = eps;
        let adam = lvk_adam_step(&g, &s, &AdamMoments::zeros(5, 5), &cfg).unwrap();
        let gp_cfg = OptimizerConfig::with_eta(0.05 / eps).depth(k);
        let (gp, _) = lvk_gp_step(&g, &s, &gp_cfg).unwrap();
        assert!(cosine(&delta(&adam.state, &s), &delta(&gp, &s)) > 0.999);
    }

    #[test]
    fn alternating_adam_tracks_alternating_gp() {
        let (g, s) = fixtures::bilinear_scalar(10.0).unwrap();
        let eps = 1e12;
        let mut cfg = OptimizerConfig::with_eta(0.02 * eps).depth(3);
        cfg.beta2 = 0.0;
        cfg.epsilon = eps;
        let adam = alt_lvk_adam_step(&g, &s, &AdamMoments::zeros(1, 1), &cfg).unwrap();
        let (gp, _) = alt_lvk_gp_step(&g, &s, &OptimizerConfig::with_eta(0.02).depth(3)).unwrap();
        assert!(adam.state.max_abs_diff(&gp) < 1e-6);
    }

    #[test]
    fn alternating_min_player_is_odd_level() {
        let (g, s) = fixtures::bilinear_scalar(10.0).unwrap();
        for k in 1..=6 {
            let (alt, _) =
                alt_lvk_gp_step(&g, &s, &OptimizerConfig::with_eta(0.03).depth(k)).unwrap();
            let (lv, _) =
                lvk_gp_step(&g, &s, &OptimizerConfig::with_eta(0.03).depth(2 * k - 1)).unwrap();
            assert!((alt.theta[0] - lv.theta[0]).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn mismatched_moments_rejected() {
        let (g, s) = fixtures::bilinear_scalar(10.0).unwrap();
        let cfg = OptimizerConfig::with_eta(0.1);
        assert!(lvk_adam_step(&g, &s, &AdamMoments::zeros(2, 1), &cfg).is_err());
    }
}
