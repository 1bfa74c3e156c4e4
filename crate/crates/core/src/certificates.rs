//! Closed-form convergence bounds and their check against measured runs.
//!
//! Every certificate works with the linearized game through its Hessian
//! blocks (A = ∇θθf, C = ∇θφf, B = ∇φφf) and measures distance as
//! r = ‖θ − θ*‖² + ‖φ − φ*‖² with the equilibrium at the origin.

use std::fmt::Write as _;

use thiserror::Error;

use crate::games::{AnalyticGame, DifferentiableGame, GameError, GameJacobianBlocks, JointState};
use crate::linalg::{spectral_radius_sym, sym_eigvals, LinalgError, Lu, Matrix};
use crate::optimizers::{
    run_trajectory, Method, OptimizerConfig, OptimizerError, ReasoningTrace, Trajectory,
};

/// Eigenvalues of the interaction Gram at or below this count as zero.
pub const ZERO_EIGENVALUE_TOLERANCE: f64 = 1e-12;
/// Absolute slack allowed on a certified ratio.
pub const CERTIFICATE_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("interaction matrix has no nonzero singular value (largest eigenvalue {0:e})")]
    RankDeficient(f64),
    #[error("η²λ_max = {0} must be below 1")]
    StepTooLarge(f64),
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("state dimensions {got:?} do not match blocks {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// A per-step contraction bound and whether its hypothesis holds.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub bound_factor: f64,
    pub condition_ok: bool,
    pub details: Vec<(&'static str, f64)>,
}

impl RateCertificate {
    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }
}

/// Smallest nonzero and largest eigenvalue of CᵀC. The nonzero spectra of
/// CᵀC and CCᵀ coincide, so the smaller Gram is used. λ_min is 0 when C has
/// no nonzero singular value.
pub fn interaction_spectrum(c: &Matrix) -> Result<(f64, f64), CertificateError> {
    let gram = if c.rows() <= c.cols() {
        c.outer_gram()
    } else {
        c.gram()
    };
    if gram.rows() == 0 {
        return Ok((0.0, 0.0));
    }
    let eig = sym_eigvals(&gram)?;
    let lmax = eig.iter().copied().fold(0.0_f64, f64::max);
    let lmin = eig
        .iter()
        .copied()
        .filter(|&l| l > ZERO_EIGENVALUE_TOLERANCE)
        .fold(f64::INFINITY, f64::min);
    Ok((if lmin.is_finite() { lmin } else { 0.0 }, lmax))
}

fn check_eta(eta: f64) -> Result<(), CertificateError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(CertificateError::InvalidStep(eta))
    }
}

/// ρ(I + s·X) for symmetric X.
fn shifted_radius(x: &Matrix, s: f64) -> Result<f64, CertificateError> {
    if x.rows() == 0 {
        return Ok(1.0);
    }
    let m = Matrix::identity(x.rows()).add_scaled(s, x);
    Ok(spectral_radius_sym(&m)?)
}

/// η(ηL)^{k−1}Δ_max, the bound on the k-th reasoning gap.
pub fn cauchy_bound(eta: f64, lipschitz: f64, delta_max: f64, k: usize) -> f64 {
    let exp = k.saturating_sub(1) as i32;
    eta * (eta * lipschitz).powi(exp) * delta_max
}

/// Δ_max = 2·max(‖∇θf‖, ‖∇φg‖) at `s`.
pub fn delta_max(game: &dyn DifferentiableGame, s: &JointState) -> Result<f64, CertificateError> {
    let gt = game.grad_theta_cost(s)?;
    let gp = game.grad_phi_cost(s)?;
    Ok(2.0 * gt.norm().max(gp.norm()))
}

/// For each level n of `trace`, the measured gap and its Cauchy bound.
pub fn trace_gap_bounds(
    trace: &ReasoningTrace,
    eta: f64,
    lipschitz: f64,
    delta_max: f64,
) -> Vec<(f64, f64)> {
    trace
        .gaps()
        .into_iter()
        .enumerate()
        .map(|(i, gap)| (gap, cauchy_bound(eta, lipschitz, delta_max, i + 1)))
        .collect()
}

/// Bilinear SPPM contraction 1/(1 + η²λ_min(MᵀM)).
pub fn bilinear_rate(m: &Matrix, eta: f64) -> Result<RateCertificate, CertificateError> {
    check_eta(eta)?;
    let (lmin, lmax) = interaction_spectrum(m)?;
    if lmin == 0.0 {
        return Err(CertificateError::RankDeficient(lmax));
    }
    Ok(RateCertificate {
        bound_factor: 1.0 / (1.0 + eta * eta * lmin),
        condition_ok: true,
        details: vec![("lambda_min", lmin), ("lambda_max", lmax)],
    })
}

/// State-dependent bound on r after one SPPM step from `s`:
///
/// [ρ²(I − ηA)‖θ‖² + ρ²(I + ηB)‖φ‖²] / (1 + η²λ_min(CᵀC))
pub fn quadratic_rate_bound(
    blocks: &GameJacobianBlocks,
    eta: f64,
    s: &JointState,
) -> Result<f64, CertificateError> {
    check_eta(eta)?;
    if blocks.dims() != s.dims() {
        return Err(CertificateError::DimensionMismatch {
            expected: blocks.dims(),
            got: s.dims(),
        });
    }
    let (lmin, lmax) = interaction_spectrum(&blocks.dtp)?;
    if lmin == 0.0 {
        return Err(CertificateError::RankDeficient(lmax));
    }
    let rho_a = shifted_radius(&blocks.dtt, -eta)?;
    let rho_b = shifted_radius(&blocks.dpp, eta)?;
    let num = rho_a * rho_a * s.theta.norm_sq() + rho_b * rho_b * s.phi.norm_sq();
    Ok(num / (1.0 + eta * eta * lmin))
}

/// The local contraction factor
/// max(ρ²(I − ηA), ρ²(I + ηB)) / (1 + η²λ_min(CCᵀ)).
pub fn local_rate(
    blocks: &GameJacobianBlocks,
    eta: f64,
) -> Result<RateCertificate, CertificateError> {
    let rho_a = shifted_radius(&blocks.dtt, -eta)?;
    let rho_b = shifted_radius(&blocks.dpp, eta)?;
    let (lmin, lmax) = interaction_spectrum(&blocks.dtp)?;
    let factor = (rho_a * rho_a).max(rho_b * rho_b) / (1.0 + eta * eta * lmin);
    Ok(RateCertificate {
        bound_factor: factor,
        condition_ok: factor < 1.0,
        details: vec![
            ("rho_sq_theta", rho_a * rho_a),
            ("rho_sq_phi", rho_b * rho_b),
            ("lambda_min", lmin),
            ("lambda_max", lmax),
        ],
    })
}

/// Whether the local contraction factor is strictly below one.
pub fn local_convergence_condition(blocks: &GameJacobianBlocks, eta: f64) -> bool {
    local_rate(blocks, eta)
        .map(|c| c.condition_ok)
        .unwrap_or(false)
}

/// Constants (a, b) with r(Lv.2k step) ≤ a·(SPPM bound at s) + b·r(s).
pub fn remark1_constants(
    blocks: &GameJacobianBlocks,
    eta: f64,
    k: usize,
) -> Result<(f64, f64), CertificateError> {
    check_eta(eta)?;
    let (lmin, lmax) = interaction_spectrum(&blocks.dtp)?;
    let x = eta * eta * lmax;
    if x >= 1.0 {
        return Err(CertificateError::StepTooLarge(x));
    }
    let y = eta * eta * lmin;
    let xk = x.powi(k as i32);
    let yk = y.powi(k as i32);
    let a = if k % 2 == 1 {
        (1.0 + xk).powi(2) / (1.0 - xk)
    } else {
        (1.0 - yk).powi(2) / (1.0 - xk)
    };
    let b = xk * (1.0 - yk) / (1.0 - xk);
    Ok((a, b))
}

/// ‖(I + η²BBᵀ)⁻¹B − B(I + η²BᵀB)⁻¹‖_F
pub fn lemma1_residual(b: &Matrix, eta: f64) -> f64 {
    let q_theta = Matrix::identity(b.rows()).add_scaled(eta * eta, &b.outer_gram());
    let q_phi = Matrix::identity(b.cols()).add_scaled(eta * eta, &b.gram());
    let left = Lu::factor(&q_theta)
        .and_then(|lu| lu.solve_matrix(b))
        .expect("I + η²BBᵀ is positive definite");
    // B Q_φ = (Q_φ Bᵀ)ᵀ since Q_φ is symmetric
    let right = Lu::factor(&q_phi)
        .and_then(|lu| lu.solve_matrix(&b.transpose()))
        .expect("I + η²BᵀB is positive definite")
        .transpose();
    left.add_scaled(-1.0, &right).frobenius_norm()
}

/// Which bound a trajectory was checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// bilinear SPPM, constant factor
    BilinearSppm,
    /// quadratic SPPM, state-dependent bound
    QuadraticSppm,
    /// Lv.2k GP sandwich with the given k
    LevelTwoK(usize),
    NotApplicable,
}

impl BoundKind {
    pub fn label(&self) -> String {
        match self {
            BoundKind::BilinearSppm => "bilinear-sppm".into(),
            BoundKind::QuadraticSppm => "quadratic-sppm".into(),
            BoundKind::LevelTwoK(k) => format!("lv{}-sandwich", 2 * k),
            BoundKind::NotApplicable => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub step: usize,
    pub measured_ratio: f64,
    /// certified bound on the ratio; `None` when no certificate applies
    pub bound: Option<f64>,
}

impl CertificateRow {
    pub fn ok(&self) -> Option<bool> {
        self.bound
            .map(|b| self.measured_ratio <= b + CERTIFICATE_SLACK)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub kind: BoundKind,
    pub rows: Vec<CertificateRow>,
    pub diverged: bool,
}

impl CertificationReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.ok() == Some(false)).count()
    }

    pub fn applicable(&self) -> bool {
        self.kind != BoundKind::NotApplicable
    }

    /// `step,measured_ratio,bound,ok` with `N/A` where no bound applies.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,measured_ratio,bound,ok\n");
        for r in &self.rows {
            match r.bound {
                Some(b) => {
                    let _ = writeln!(
                        out,
                        "{},{:?},{:?},{}",
                        r.step,
                        r.measured_ratio,
                        b,
                        r.ok() == Some(true)
                    );
                }
                None => {
                    let _ = writeln!(out, "{},{:?},N/A,N/A", r.step, r.measured_ratio);
                }
            }
        }
        out
    }
}

fn bound_kind(game: &AnalyticGame, method: Method, cfg: &OptimizerConfig) -> BoundKind {
    match (method, game) {
        (Method::Sppm | Method::SppmFixedPoint { .. }, AnalyticGame::Bilinear { .. }) => {
            BoundKind::BilinearSppm
        }
        (Method::Sppm | Method::SppmFixedPoint { .. }, AnalyticGame::Quadratic { .. }) => {
            BoundKind::QuadraticSppm
        }
        (Method::LevelK, _) if cfg.k % 2 == 0 => BoundKind::LevelTwoK(cfg.k / 2),
        _ => BoundKind::NotApplicable,
    }
}

fn ratio(next: f64, prev: f64) -> f64 {
    if prev > 0.0 {
        next / prev
    } else {
        0.0
    }
}

/// Runs `method` for `steps` steps and checks each measured ratio
/// r_{t+1}/r_t against the bound that applies to it.
pub fn certify_trajectory(
    game: &AnalyticGame,
    method: Method,
    cfg: &OptimizerConfig,
    s0: &JointState,
    steps: usize,
) -> Result<CertificationReport, CertificateError> {
    let traj: Trajectory = run_trajectory(game, method, cfg, s0, steps)?;
    let blocks = game.jacobian_blocks()?;
    let eta = cfg.eta_theta;
    let mut kind = bound_kind(game, method, cfg);

    let bilinear_factor = match kind {
        BoundKind::BilinearSppm => Some(bilinear_rate(&blocks.dtp, eta)?.bound_factor),
        _ => None,
    };
    let sandwich = match kind {
        BoundKind::LevelTwoK(k) => match remark1_constants(&blocks, eta, k) {
            Ok(ab) => Some(ab),
            Err(CertificateError::StepTooLarge(_) | CertificateError::RankDeficient(_)) => {
                kind = BoundKind::NotApplicable;
                None
            }
            Err(e) => return Err(e),
        },
        _ => None,
    };

    let mut rows = Vec::with_capacity(traj.states.len().saturating_sub(1));
    for (t, w) in traj.states.windows(2).enumerate() {
        let (prev, next) = (&w[0], &w[1]);
        let r_prev = prev.norm_sq();
        let measured = ratio(next.norm_sq(), r_prev);
        let bound = match kind {
            BoundKind::BilinearSppm => bilinear_factor,
            BoundKind::QuadraticSppm => {
                Some(ratio(quadratic_rate_bound(&blocks, eta, prev)?, r_prev))
            }
            BoundKind::LevelTwoK(_) => {
                let (a, b) = sandwich.expect("computed with the kind");
                let thm = quadratic_rate_bound(&blocks, eta, prev)?;
                Some(ratio(a * thm + b * r_prev, r_prev))
            }
            BoundKind::NotApplicable => None,
        };
        rows.push(CertificateRow {
            step: t + 1,
            measured_ratio: measured,
            bound,
        });
    }
    Ok(CertificationReport {
        kind,
        rows,
        diverged: traj.diverged,
    })
}
