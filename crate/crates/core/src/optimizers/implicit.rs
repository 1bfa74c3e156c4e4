//! Implicit updates solved exactly from the Hessian blocks.

use crate::games::{GameError, GameJacobianBlocks, JointState};
use crate::linalg::{solve_linear, Matrix, Vector};

use super::OptimizerError;

fn check(blocks: &GameJacobianBlocks, s: &JointState, eta: f64) -> Result<(), OptimizerError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(OptimizerError::InvalidConfig("eta"));
    }
    if blocks.dims() != s.dims() {
        return Err(GameError::DimensionMismatch {
            expected: blocks.dims(),
            got: s.dims(),
        }
        .into());
    }
    Ok(())
}

/// I + η² X Xᵀ, symmetric positive definite for every real η.
fn shifted_gram(x: &Matrix, eta: f64) -> Matrix {
    let g = x.outer_gram();
    Matrix::identity(g.rows()).add_scaled(eta * eta, &g)
}

fn solve_spd(m: &Matrix, rhs: &Vector) -> Vector {
    solve_linear(m, rhs).expect("I + η²XXᵀ is positive definite")
}

/// Semi-proximal point step on the linearized game with blocks (A, C, B):
///
/// θ⁺ = (I + η²CCᵀ)⁻¹ [(I − ηA)θ − ηC(I + ηB)φ]
/// φ⁺ = (I + η²CᵀC)⁻¹ [ηCᵀ(I − ηA)θ + (I + ηB)φ]
pub fn sppm_step_closed_form(
    blocks: &GameJacobianBlocks,
    s: &JointState,
    eta: f64,
) -> Result<JointState, OptimizerError> {
    check(blocks, s, eta)?;
    let (a, c, b) = (&blocks.dtt, &blocks.dtp, &blocks.dpp);
    // (I − ηA)θ and (I + ηB)φ
    let theta_lin = s.theta.add_scaled(-eta, &a.matvec(&s.theta));
    let phi_lin = s.phi.add_scaled(eta, &b.matvec(&s.phi));

    let rhs_theta = theta_lin.add_scaled(-eta, &c.matvec(&phi_lin));
    let rhs_phi = phi_lin.add_scaled(eta, &c.tmatvec(&theta_lin));
    let theta = solve_spd(&shifted_gram(c, eta), &rhs_theta);
    let phi = solve_spd(&shifted_gram(&c.transpose(), eta), &rhs_phi);
    Ok(JointState::new(theta, phi))
}

/// Competitive gradient descent in its standard form:
///
/// θ⁺ = θ − η(I + η²∇θφf∇φθf)⁻¹(∇θf + η∇θφf ∇φf)
/// φ⁺ = φ + η(I + η²∇φθf∇θφf)⁻¹(∇φf − η∇φθf ∇θf)
pub fn cgd_step(
    blocks: &GameJacobianBlocks,
    s: &JointState,
    eta: f64,
) -> Result<JointState, OptimizerError> {
    check(blocks, s, eta)?;
    let (a, c, b) = (&blocks.dtt, &blocks.dtp, &blocks.dpp);
    let grad_theta = &a.matvec(&s.theta) + &c.matvec(&s.phi);
    let grad_phi = &b.matvec(&s.phi) + &c.tmatvec(&s.theta);

    let dir_theta = grad_theta.add_scaled(eta, &c.matvec(&grad_phi));
    let dir_phi = grad_phi.add_scaled(-eta, &c.tmatvec(&grad_theta));
    let theta = s
        .theta
        .add_scaled(-eta, &solve_spd(&shifted_gram(c, eta), &dir_theta));
    let phi = s.phi.add_scaled(
        eta,
        &solve_spd(&shifted_gram(&c.transpose(), eta), &dir_phi),
    );
    Ok(JointState::new(theta, phi))
}
