//! Update rules for two-player games.
//!
//! * [`lvk_gp_step`] and [`alt_lvk_gp_step`]: recursive reasoning anchored at
//!   the current state.
//! * [`sppm_step_closed_form`] / [`sppm_step_fixed_point`]: the k → ∞ limit,
//!   either solved exactly from the Hessian blocks or by iterating the
//!   reasoning map to a fixed point.
//! * [`cgd_step`] and [`baseline_step`]: GDA, EG, OGD, SGA, LOLA, LEAD, CGD.
//! * [`lvk_adam_step`] / [`alt_lvk_adam_step`]: the Adam-normalized variants.
//!
//! [`Optimizer`] wraps any of them into a stateful stepper and
//! [`run_trajectory`] drives it for a fixed horizon.

mod adam;
mod baselines;
mod implicit;
mod lvk;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::games::{DifferentiableGame, GameError, GameJacobianBlocks, JointState};
use crate::linalg::LinalgError;

pub use adam::{alt_lvk_adam_step, lvk_adam_step, AdamMoments, AdamStep};
pub use baselines::{baseline_step, Baseline, OptimizerHistory};
pub use implicit::{cgd_step, sppm_step_closed_form};
pub use lvk::{alt_lvk_gp_step, lvk_gp_step, reasoning_map, sppm_step_fixed_point};

/// Squared distance beyond which a trajectory is truncated and flagged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-12;
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(
        "fixed-point reasoning did not converge after {iterations} iterations (last gap {gap:e})"
    )]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(&'static str),
    #[error("history state does not match the game dimensions")]
    MissingHistory,
}

/// Step sizes, reasoning depth and per-method coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub eta_theta: f64,
    pub eta_phi: f64,
    /// reasoning depth
    pub k: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// SGA coefficient
    pub gamma: f64,
    /// LOLA coefficient
    pub delta: f64,
    /// LEAD coefficient
    pub alpha: f64,
}

impl OptimizerConfig {
    /// Shared step size for both players, depth 1, β₁ = 0, β₂ = 0.9,
    /// ε = 1e−8 and γ = δ = α = η.
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta_theta: eta,
            eta_phi: eta,
            k: 1,
            beta1: 0.0,
            beta2: 0.9,
            epsilon: 1e-8,
            gamma: eta,
            delta: eta,
            alpha: eta,
        }
    }

    pub fn depth(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.eta_theta > 0.0 && self.eta_theta.is_finite()) {
            return Err(OptimizerError::InvalidConfig("eta_theta"));
        }
        if !(self.eta_phi > 0.0 && self.eta_phi.is_finite()) {
            return Err(OptimizerError::InvalidConfig("eta_phi"));
        }
        if self.k == 0 {
            return Err(OptimizerError::InvalidConfig("k"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(OptimizerError::InvalidConfig("beta1"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(OptimizerError::InvalidConfig("beta2"));
        }
        if !(self.epsilon > 0.0) {
            return Err(OptimizerError::InvalidConfig("epsilon"));
        }
        for (v, name) in [
            (self.gamma, "gamma"),
            (self.delta, "delta"),
            (self.alpha, "alpha"),
        ] {
            if !v.is_finite() {
                return Err(OptimizerError::InvalidConfig(name));
            }
        }
        Ok(())
    }
}

/// The within-step iterates ω⁽⁰⁾ … ω⁽ᵏ⁾; `states[0]` is the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningTrace {
    pub states: Vec<JointState>,
}

impl ReasoningTrace {
    pub fn depth(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// ‖ω⁽ⁿ⁾ − ω⁽ⁿ⁻¹⁾‖ for n = 1..=depth.
    pub fn gaps(&self) -> Vec<f64> {
        self.states.windows(2).map(|w| w[1].gap(&w[0])).collect()
    }
}

/// Every update rule the harness can schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Lv.k GP with depth `cfg.k`
    LevelK,
    AltLevelK,
    Sppm,
    SppmFixedPoint {
        tol: f64,
        max_iter: usize,
    },
    Cgd,
    Baseline(Baseline),
    LevelKAdam,
    AltLevelKAdam,
}

impl Method {
    pub fn uses_depth(&self) -> bool {
        matches!(
            self,
            Method::LevelK | Method::AltLevelK | Method::LevelKAdam | Method::AltLevelKAdam
        )
    }

    /// Methods that read the exact Hessian blocks.
    pub fn needs_blocks(&self) -> bool {
        matches!(self, Method::Sppm | Method::Cgd)
    }

    pub fn sppm_fixed_point() -> Self {
        Method::SppmFixedPoint {
            tol: DEFAULT_FIXED_POINT_TOL,
            max_iter: DEFAULT_FIXED_POINT_MAX_ITER,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::LevelK => "lvk",
            Method::AltLevelK => "alt-lvk",
            Method::Sppm => "sppm",
            Method::SppmFixedPoint { .. } => "sppm-fp",
            Method::Cgd => "cgd",
            Method::Baseline(b) => return write!(f, "{b}"),
            Method::LevelKAdam => "lvk-adam",
            Method::AltLevelKAdam => "alt-lvk-adam",
        };
        f.write_str(s)
    }
}

/// Parses an algorithm token into a method and an optional depth:
/// `lv4` → (LevelK, 4), `alt-lv2-adam` → (AltLevelKAdam, 2), `eg` → (EG, None).
pub fn parse_algorithm(token: &str) -> Option<(Method, Option<usize>)> {
    let t = token.trim().to_ascii_lowercase();
    if let Ok(b) = Baseline::from_str(&t) {
        return Some((Method::Baseline(b), None));
    }
    match t.as_str() {
        "sppm" => return Some((Method::Sppm, None)),
        "sppm-fp" => return Some((Method::sppm_fixed_point(), None)),
        "cgd" => return Some((Method::Cgd, None)),
        _ => {}
    }
    let (alt, rest) = match t.strip_prefix("alt-") {
        Some(r) => (true, r),
        None => (false, t.as_str()),
    };
    let rest = rest.strip_prefix("lv")?;
    let (digits, adam) = match rest.strip_suffix("-adam") {
        Some(d) => (d, true),
        None => (rest, false),
    };
    let k: usize = digits.parse().ok().filter(|&k| k >= 1)?;
    let method = match (alt, adam) {
        (false, false) => Method::LevelK,
        (true, false) => Method::AltLevelK,
        (false, true) => Method::LevelKAdam,
        (true, true) => Method::AltLevelKAdam,
    };
    Some((method, Some(k)))
}

/// Canonical algorithm token, the inverse of [`parse_algorithm`].
pub fn algorithm_name(method: &Method, k: usize) -> String {
    match method {
        Method::LevelK => format!("lv{k}"),
        Method::AltLevelK => format!("alt-lv{k}"),
        Method::LevelKAdam => format!("lv{k}-adam"),
        Method::AltLevelKAdam => format!("alt-lv{k}-adam"),
        other => other.to_string(),
    }
}

/// Result of one [`Optimizer::step`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: JointState,
    pub trace: Option<ReasoningTrace>,
}

/// A method bound to its config and carrying whatever cross-step state it
/// needs (previous iterate, Adam moments, cached blocks).
#[derive(Debug, Clone)]
pub struct Optimizer {
    method: Method,
    cfg: OptimizerConfig,
    history: OptimizerHistory,
    moments: Option<AdamMoments>,
    blocks: Option<GameJacobianBlocks>,
}

impl Optimizer {
    pub fn new(method: Method, cfg: OptimizerConfig) -> Result<Self, OptimizerError> {
        cfg.validate()?;
        Ok(Self {
            method,
            cfg,
            history: OptimizerHistory::default(),
            moments: None,
            blocks: None,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn moments(&self) -> Option<&AdamMoments> {
        self.moments.as_ref()
    }

    fn eta(&self) -> f64 {
        // the implicit methods use one step size for both players
        self.cfg.eta_theta
    }

    pub fn step(
        &mut self,
        game: &dyn DifferentiableGame,
        s: &JointState,
    ) -> Result<StepOutput, OptimizerError> {
        let (state, trace) = match self.method {
            Method::LevelK => {
                let (st, tr) = lvk_gp_step(game, s, &self.cfg)?;
                (st, Some(tr))
            }
            Method::AltLevelK => {
                let (st, tr) = alt_lvk_gp_step(game, s, &self.cfg)?;
                (st, Some(tr))
            }
            Method::Sppm | Method::Cgd => {
                if self.blocks.is_none() {
                    self.blocks = Some(game.jacobian_blocks()?);
                }
                let blocks = self.blocks.as_ref().expect("cached above");
                let st = if self.method == Method::Sppm {
                    sppm_step_closed_form(blocks, s, self.eta())?
                } else {
                    cgd_step(blocks, s, self.eta())?
                };
                (st, None)
            }
            Method::SppmFixedPoint { tol, max_iter } => {
                let (st, _) = sppm_step_fixed_point(game, s, self.eta(), tol, max_iter)?;
                (st, None)
            }
            Method::Baseline(b) => {
                let (st, hist) = baseline_step(b, game, s, &self.cfg, &self.history)?;
                self.history = hist;
                (st, None)
            }
            Method::LevelKAdam | Method::AltLevelKAdam => {
                let (m, n) = game.dims();
                let moments = self
                    .moments
                    .take()
                    .unwrap_or_else(|| AdamMoments::zeros(m, n));
                let out = if self.method == Method::LevelKAdam {
                    lvk_adam_step(game, s, &moments, &self.cfg)?
                } else {
                    alt_lvk_adam_step(game, s, &moments, &self.cfg)?
                };
                self.moments = Some(out.moments);
                (out.state, Some(out.trace))
            }
        };
        Ok(StepOutput { state, trace })
    }
}

/// States ω₀ … ω_T of a run, truncated at the first divergent state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<JointState>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn last(&self) -> &JointState {
        self.states.last().expect("trajectory holds at least s0")
    }
}

/// Whether `s` counts as divergent for `game`: squared distance above
/// [`DIVERGENCE_THRESHOLD`] for analytic games, non-finite entries otherwise.
pub fn is_divergent(game: &dyn DifferentiableGame, s: &JointState) -> bool {
    match game.distance_to_equilibrium(s) {
        Ok(r) => !(r <= DIVERGENCE_THRESHOLD),
        Err(_) => !s.is_finite(),
    }
}

/// Applies `method` `steps` times from `s0`, recording every state.
///
/// Divergence (and a fixed-point SPPM failing to converge) ends the run early
/// with `diverged = true`; other errors propagate.
pub fn run_trajectory(
    game: &dyn DifferentiableGame,
    method: Method,
    cfg: &OptimizerConfig,
    s0: &JointState,
    steps: usize,
) -> Result<Trajectory, OptimizerError> {
    game.check_dims(s0)?;
    let mut opt = Optimizer::new(method, cfg.clone())?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s0.clone());
    let mut diverged = is_divergent(game, s0);
    for _ in 0..steps {
        if diverged {
            break;
        }
        let current = states.last().expect("non-empty");
        match opt.step(game, current) {
            Ok(out) => {
                diverged = is_divergent(game, &out.state);
                states.push(out.state);
            }
            Err(OptimizerError::NoConvergence { .. }) => diverged = true,
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { states, diverged })
}
