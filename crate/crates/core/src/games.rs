//! Two-player differentiable games.
//!
//! The min player controls θ ∈ ℝᵐ and minimizes f(θ, φ); the max player
//! controls φ ∈ ℝⁿ and minimizes its own cost g(θ, φ). Analytic games are
//! zero-sum (g = −f) with the unique stationary point at the origin.

use thiserror::Error;

use crate::linalg::{spectral_norm, sym_eigvals, LinalgError, Matrix, Vector};

/// Threshold on λ_min of the interaction Gram matrix below which a matrix is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("dimension mismatch: game is {expected:?}, state is {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("operation requires an analytic game")]
    Unsupported,
    #[error("interaction matrix is rank deficient (λ_min = {0:e})")]
    RankDeficient(f64),
    #[error("{0} must be symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{0} must be symmetric negative definite")]
    NotNegativeDefinite(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("gradient oracle failed: {0}")]
    Oracle(String),
}

/// The pair (θ, φ) at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub theta: Vector,
    pub phi: Vector,
}

impl JointState {
    pub fn new(theta: Vector, phi: Vector) -> Self {
        Self { theta, phi }
    }

    /// Convenience constructor from plain slices; panics on non-finite input.
    pub fn from_slices(theta: &[f64], phi: &[f64]) -> Self {
        Self {
            theta: Vector::new(theta.to_vec()).expect("finite θ"),
            phi: Vector::new(phi.to_vec()).expect("finite φ"),
        }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self::new(Vector::zeros(m), Vector::zeros(n))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.theta.len(), self.phi.len())
    }

    /// ‖θ‖² + ‖φ‖²
    pub fn norm_sq(&self) -> f64 {
        self.theta.norm_sq() + self.phi.norm_sq()
    }

    /// ‖ω − ω'‖² where ω = [θ, φ].
    pub fn gap_sq(&self, other: &JointState) -> f64 {
        (&self.theta - &other.theta).norm_sq() + (&self.phi - &other.phi).norm_sq()
    }

    pub fn gap(&self, other: &JointState) -> f64 {
        self.gap_sq(other).sqrt()
    }

    pub fn max_abs_diff(&self, other: &JointState) -> f64 {
        self.theta
            .max_abs_diff(&other.theta)
            .max(self.phi.max_abs_diff(&other.phi))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi.is_finite()
    }
}

/// Hessian blocks of f at the stationary point of an analytic game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameJacobianBlocks {
    /// ∇θθ f, m×m symmetric
    pub dtt: Matrix,
    /// ∇θφ f, m×n; ∇φθ f is its transpose
    pub dtp: Matrix,
    /// ∇φφ f, n×n symmetric
    pub dpp: Matrix,
    /// max spectral norm over the blocks
    pub lipschitz_l: f64,
}

impl GameJacobianBlocks {
    /// Builds blocks from raw matrices, checking shapes and symmetry of the
    /// diagonal blocks. No definiteness is required, so degenerate games
    /// (A = 0, B = 0, C = 0) are representable.
    pub fn new(dtt: Matrix, dtp: Matrix, dpp: Matrix) -> Result<Self, GameError> {
        let (m, n) = (dtp.rows(), dtp.cols());
        if dtt.rows() != m || dtt.cols() != m || dpp.rows() != n || dpp.cols() != n {
            return Err(GameError::DimensionMismatch {
                expected: (m, n),
                got: (dtt.rows(), dpp.rows()),
            });
        }
        for block in [&dtt, &dpp] {
            if !block.is_symmetric() {
                let asymmetry = block.asymmetry()?;
                return Err(LinalgError::NotSymmetric { asymmetry }.into());
            }
        }
        let lipschitz_l = spectral_norm(&dtt)
            .max(spectral_norm(&dtp))
            .max(spectral_norm(&dpp));
        Ok(Self {
            dtt,
            dtp,
            dpp,
            lipschitz_l,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dtp.rows(), self.dtp.cols())
    }
}

/// Gradient oracle for a two-player game.
///
/// `grad_theta_cost` is ∇θ f and `grad_phi_cost` is ∇φ g; both players
/// descend on their own cost. The cross Jacobian-vector products default to
/// forward differences of the gradients.
pub trait DifferentiableGame: Sync {
    fn dims(&self) -> (usize, usize);

    fn grad_theta_cost(&self, s: &JointState) -> Result<Vector, GameError>;

    fn grad_phi_cost(&self, s: &JointState) -> Result<Vector, GameError>;

    /// (∂∇θ f / ∂φ) · v
    fn cross_jvp_theta(&self, s: &JointState, v: &Vector) -> Result<Vector, GameError> {
        let eps = fd_step(&s.phi, v);
        let shifted = JointState::new(s.theta.clone(), s.phi.add_scaled(eps, v));
        let g1 = self.grad_theta_cost(&shifted)?;
        let g0 = self.grad_theta_cost(s)?;
        Ok((&g1 - &g0).scale(1.0 / eps))
    }

    /// (∂∇φ g / ∂θ) · u
    fn cross_jvp_phi(&self, s: &JointState, u: &Vector) -> Result<Vector, GameError> {
        let eps = fd_step(&s.theta, u);
        let shifted = JointState::new(s.theta.add_scaled(eps, u), s.phi.clone());
        let g1 = self.grad_phi_cost(&shifted)?;
        let g0 = self.grad_phi_cost(s)?;
        Ok((&g1 - &g0).scale(1.0 / eps))
    }

    /// Exact Hessian blocks at the stationary point (analytic games only).
    fn jacobian_blocks(&self) -> Result<GameJacobianBlocks, GameError> {
        Err(GameError::Unsupported)
    }

    /// r = ‖θ − θ*‖² + ‖φ − φ*‖² (analytic games only).
    fn distance_to_equilibrium(&self, _s: &JointState) -> Result<f64, GameError> {
        Err(GameError::Unsupported)
    }

    fn check_dims(&self, s: &JointState) -> Result<(), GameError> {
        if s.dims() == self.dims() {
            Ok(())
        } else {
            Err(GameError::DimensionMismatch {
                expected: self.dims(),
                got: s.dims(),
            })
        }
    }
}

fn fd_step(base: &Vector, dir: &Vector) -> f64 {
    1e-6 * (1.0 + base.norm()) / (1.0 + dir.norm())
}

/// Zero-sum bilinear or quadratic game with equilibrium at the origin.
///
/// Quadratic costs use f = ½θᵀAθ + ½φᵀBφ + θᵀCφ so the Hessian blocks are
/// exactly A, C and B.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticGame {
    Bilinear { m: Matrix },
    Quadratic { a: Matrix, b: Matrix, c: Matrix },
}

impl AnalyticGame {
    /// min_θ max_φ θᵀMφ with M full rank.
    pub fn bilinear(m: Matrix) -> Result<Self, GameError> {
        check_full_rank(&m)?;
        Ok(Self::Bilinear { m })
    }

    /// A symmetric positive definite, B symmetric negative definite, C full rank.
    pub fn quadratic(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, GameError> {
        if a.rows() != c.rows() || b.rows() != c.cols() {
            return Err(GameError::DimensionMismatch {
                expected: (c.rows(), c.cols()),
                got: (a.rows(), b.rows()),
            });
        }
        if !a.is_square() || !a.is_symmetric() || sym_eigvals(&a)?[0] <= 0.0 {
            return Err(GameError::NotPositiveDefinite("A"));
        }
        if !b.is_square() || !b.is_symmetric() {
            return Err(GameError::NotNegativeDefinite("B"));
        }
        let eb = sym_eigvals(&b)?;
        if eb[eb.len() - 1] >= 0.0 {
            return Err(GameError::NotNegativeDefinite("B"));
        }
        check_full_rank(&c)?;
        Ok(Self::Quadratic { a, b, c })
    }

    /// The interaction block M or C.
    pub fn interaction(&self) -> &Matrix {
        match self {
            Self::Bilinear { m } => m,
            Self::Quadratic { c, .. } => c,
        }
    }

    /// Same game with the interaction block multiplied by `factor`.
    pub fn with_interaction_scaled(&self, factor: f64) -> Result<Self, GameError> {
        match self {
            Self::Bilinear { m } => Self::bilinear(m.scale(factor)),
            Self::Quadratic { a, b, c } => Self::quadratic(a.clone(), b.clone(), c.scale(factor)),
        }
    }

    /// f(θ, φ)
    pub fn cost(&self, s: &JointState) -> Result<f64, GameError> {
        self.check_dims(s)?;
        Ok(match self {
            Self::Bilinear { m } => s.theta.dot(&m.matvec(&s.phi)),
            Self::Quadratic { a, b, c } => {
                0.5 * s.theta.dot(&a.matvec(&s.theta))
                    + 0.5 * s.phi.dot(&b.matvec(&s.phi))
                    + s.theta.dot(&c.matvec(&s.phi))
            }
        })
    }

    /// Assumption-1 constant L = max spectral norm of the Hessian blocks.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Bilinear { m } => spectral_norm(m),
            Self::Quadratic { a, b, c } => {
                spectral_norm(a).max(spectral_norm(b)).max(spectral_norm(c))
            }
        }
    }
}

fn check_full_rank(m: &Matrix) -> Result<(), GameError> {
    let g = if m.rows() >= m.cols() {
        m.gram()
    } else {
        m.outer_gram()
    };
    let lmin = sym_eigvals(&g)?[0];
    if lmin > RANK_TOLERANCE {
        Ok(())
    } else {
        Err(GameError::RankDeficient(lmin))
    }
}

impl DifferentiableGame for AnalyticGame {
    fn dims(&self) -> (usize, usize) {
        let i = self.interaction();
        (i.rows(), i.cols())
    }

    fn grad_theta_cost(&self, s: &JointState) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        Ok(match self {
            Self::Bilinear { m } => m.matvec(&s.phi),
            Self::Quadratic { a, c, .. } => &a.matvec(&s.theta) + &c.matvec(&s.phi),
        })
    }

    fn grad_phi_cost(&self, s: &JointState) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        Ok(match self {
            Self::Bilinear { m } => -&m.tmatvec(&s.theta),
            Self::Quadratic { b, c, .. } => -&(&b.matvec(&s.phi) + &c.tmatvec(&s.theta)),
        })
    }

    fn cross_jvp_theta(&self, s: &JointState, v: &Vector) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        Ok(self.interaction().matvec(v))
    }

    fn cross_jvp_phi(&self, s: &JointState, u: &Vector) -> Result<Vector, GameError> {
        self.check_dims(s)?;
        Ok(-&self.interaction().tmatvec(u))
    }

    fn jacobian_blocks(&self) -> Result<GameJacobianBlocks, GameError> {
        match self {
            Self::Bilinear { m } => GameJacobianBlocks::new(
                Matrix::zeros(m.rows(), m.rows()),
                m.clone(),
                Matrix::zeros(m.cols(), m.cols()),
            ),
            Self::Quadratic { a, b, c } => GameJacobianBlocks::new(a.clone(), c.clone(), b.clone()),
        }
    }

    fn distance_to_equilibrium(&self, s: &JointState) -> Result<f64, GameError> {
        self.check_dims(s)?;
        Ok(s.norm_sq())
    }
}

/// Named fixtures with their start points.
pub mod fixtures {
    use super::*;

    pub const QUADRATIC_5D: &str = "paper-quadratic-5d";
    pub const BILINEAR_SCALAR: &str = "paper-bilinear-scalar";

    const A_5D: [[f64; 5]; 5] = [
        [1.8398, 0.5195, 1.2537, 1.7470, 1.2769],
        [0.5195, 0.6586, 0.4476, 0.8898, 1.1309],
        [1.2537, 0.4476, 1.4440, 1.3923, 0.8877],
        [1.7470, 0.8898, 1.3923, 2.1249, 1.7664],
        [1.2769, 1.1309, 0.8877, 1.7664, 2.1553],
    ];

    // negated below
    const NEG_B_5D: [[f64; 5]; 5] = [
        [1.0821, 1.2427, 1.0093, 1.3335, 0.6761],
        [1.2427, 2.2031, 1.3236, 1.8566, 0.9394],
        [1.0093, 1.3236, 1.2393, 1.3675, 0.9065],
        [1.3335, 1.8566, 1.3675, 1.9081, 0.9693],
        [0.6761, 0.9394, 0.9065, 0.9693, 0.7141],
    ];

    pub const THETA0_5D: [f64; 5] = [0.1270, 0.9667, 0.2605, 0.8972, 0.3767];
    pub const PHI0_5D: [f64; 5] = [0.3362, 0.4514, 0.8403, 0.1231, 0.5430];

    /// Default coefficient of min_θ max_φ aθφ.
    pub const BILINEAR_SCALAR_COEFF: f64 = 10.0;

    fn to_matrix(rows: &[[f64; 5]; 5], sign: f64) -> Matrix {
        Matrix::new(5, 5, rows.iter().flatten().map(|x| sign * x).collect()).unwrap()
    }

    pub fn quadratic_5d_a() -> Matrix {
        to_matrix(&A_5D, 1.0)
    }

    pub fn quadratic_5d_b() -> Matrix {
        to_matrix(&NEG_B_5D, -1.0)
    }

    /// The 5-d quadratic game with interaction C = cI, and its start point.
    pub fn quadratic_5d(c: f64) -> Result<(AnalyticGame, JointState), GameError> {
        let game = AnalyticGame::quadratic(
            quadratic_5d_a(),
            quadratic_5d_b(),
            Matrix::scaled_identity(5, c),
        )?;
        Ok((game, JointState::from_slices(&THETA0_5D, &PHI0_5D)))
    }

    /// min_θ max_φ aθφ started from (−12, 10).
    pub fn bilinear_scalar(a: f64) -> Result<(AnalyticGame, JointState), GameError> {
        let game = AnalyticGame::bilinear(Matrix::new(1, 1, vec![a])?)?;
        Ok((game, JointState::from_slices(&[-12.0], &[10.0])))
    }

    /// Looks a fixture up by name; `interaction` is c for the quadratic
    /// fixture and the coefficient a for the scalar bilinear one.
    pub fn by_name(
        name: &str,
        interaction: Option<f64>,
    ) -> Option<Result<(AnalyticGame, JointState), GameError>> {
        match name {
            QUADRATIC_5D => Some(quadratic_5d(interaction.unwrap_or(1.0))),
            BILINEAR_SCALAR => Some(bilinear_scalar(
                interaction.unwrap_or(BILINEAR_SCALAR_COEFF),
            )),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_bilinear() -> AnalyticGame {
        fixtures::bilinear_scalar(10.0).unwrap().0
    }

    fn simple_quadratic(a: f64, b: f64, c: f64) -> AnalyticGame {
        AnalyticGame::quadratic(
            Matrix::scaled_identity(2, a),
            Matrix::scaled_identity(2, b),
            Matrix::scaled_identity(2, c),
        )
        .unwrap()
    }

    #[test]
    fn bilinear_gradients_at_fixture_start() {
        let g = scalar_bilinear();
        let s = JointState::from_slices(&[-12.0], &[10.0]);
        assert_eq!(g.grad_theta_cost(&s).unwrap()[0], 100.0);
        assert_eq!(g.grad_phi_cost(&s).unwrap()[0], 120.0);
        let zero_phi = JointState::from_slices(&[-12.0], &[0.0]);
        assert_eq!(g.grad_theta_cost(&zero_phi).unwrap()[0], 0.0);
    }

    #[test]
    fn quadratic_gradients() {
        let g = simple_quadratic(1.0, -1.0, 1.0);
        let s = JointState::from_slices(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(g.grad_theta_cost(&s).unwrap().as_slice(), &[1.0, 0.0]);
        let s = JointState::from_slices(&[0.0, 0.0], &[2.0, 0.0]);
        assert_eq!(g.grad_phi_cost(&s).unwrap().as_slice(), &[2.0, 0.0]);
        let origin = JointState::zeros(2, 2);
        assert_eq!(g.grad_phi_cost(&origin).unwrap().norm(), 0.0);
        assert_eq!(g.grad_theta_cost(&origin).unwrap().norm(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let g = scalar_bilinear();
        let s = JointState::zeros(2, 1);
        assert!(matches!(
            g.grad_theta_cost(&s),
            Err(GameError::DimensionMismatch { .. })
        ));
        assert!(g.distance_to_equilibrium(&s).is_err());
    }

    #[test]
    fn blocks_and_lipschitz() {
        let b = scalar_bilinear().jacobian_blocks().unwrap();
        assert_eq!(b.dtt[(0, 0)], 0.0);
        assert_eq!(b.dtp[(0, 0)], 10.0);
        assert_eq!(b.dpp[(0, 0)], 0.0);
        assert!((b.lipschitz_l - 10.0).abs() < 1e-12);

        let (q, _) = fixtures::quadratic_5d(1.0).unwrap();
        let b = q.jacobian_blocks().unwrap();
        assert_eq!(b.dtp, Matrix::identity(5));

        let b = simple_quadratic(2.0, -1.0, 1.0).jacobian_blocks().unwrap();
        assert!((b.lipschitz_l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn distances() {
        let g = scalar_bilinear();
        let s = JointState::from_slices(&[-12.0], &[10.0]);
        assert_eq!(g.distance_to_equilibrium(&s).unwrap(), 244.0);
        assert_eq!(
            g.distance_to_equilibrium(&JointState::zeros(1, 1)).unwrap(),
            0.0
        );
        let q = simple_quadratic(1.0, -1.0, 1.0);
        let s = JointState::from_slices(&[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!(q.distance_to_equilibrium(&s).unwrap(), 25.0);
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            AnalyticGame::bilinear(Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap()),
            Err(GameError::RankDeficient(_))
        ));
        assert!(AnalyticGame::quadratic(
            Matrix::scaled_identity(2, -1.0),
            Matrix::scaled_identity(2, -1.0),
            Matrix::identity(2)
        )
        .is_err());
        assert!(AnalyticGame::quadratic(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::identity(2)
        )
        .is_err());
        // rectangular interaction of full row rank
        assert!(AnalyticGame::bilinear(Matrix::from_rows(&[vec![1.0, 0.0, 2.0]]).unwrap()).is_ok());
    }

    #[test]
    fn fixture_matrices_are_definite() {
        let a = sym_eigvals(&fixtures::quadratic_5d_a()).unwrap();
        let b = sym_eigvals(&fixtures::quadratic_5d_b()).unwrap();
        assert!(a[0] > 0.0);
        assert!(b[4] < 0.0);
        assert!(fixtures::by_name("nope", None).is_none());
    }

    #[test]
    fn neural_style_default_jvp_matches_exact() {
        // a wrapper that hides the exact products
        struct Opaque(AnalyticGame);
        impl DifferentiableGame for Opaque {
            fn dims(&self) -> (usize, usize) {
                self.0.dims()
            }
            fn grad_theta_cost(&self, s: &JointState) -> Result<Vector, GameError> {
                self.0.grad_theta_cost(s)
            }
            fn grad_phi_cost(&self, s: &JointState) -> Result<Vector, GameError> {
                self.0.grad_phi_cost(s)
            }
        }
        let (q, s) = fixtures::quadratic_5d(2.0).unwrap();
        let opaque = Opaque(q.clone());
        let v = Vector::new(vec![0.3, -1.0, 0.5, 0.0, 2.0]).unwrap();
        let exact = q.cross_jvp_theta(&s, &v).unwrap();
        let fd = opaque.cross_jvp_theta(&s, &v).unwrap();
        assert!(exact.max_abs_diff(&fd) < 1e-6);
        let exact = q.cross_jvp_phi(&s, &v).unwrap();
        let fd = opaque.cross_jvp_phi(&s, &v).unwrap();
        assert!(exact.max_abs_diff(&fd) < 1e-6);
        assert_eq!(opaque.jacobian_blocks(), Err(GameError::Unsupported));
    }
}
