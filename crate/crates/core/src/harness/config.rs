//! Line-oriented experiment configs.
//!
//! ```text
//! # interaction sweep
//! kind  = grid
//! game  = paper-quadratic-5d
//! algs  = gda, sga, lv4, sppm
//! etas  = 0.01, 0.1
//! cs    = 0.5, 1, 2
//! T     = 100
//! ```
//!
//! One `key = value` per line, `#` starts a comment, lists are comma
//! separated and matrices separate rows with `;`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::games::{fixtures, AnalyticGame, JointState};
use crate::linalg::{Matrix, Vector};
use crate::optimizers::{algorithm_name, parse_algorithm, Method, OptimizerConfig, OptimizerError};
use crate::toygan::GanLossKind;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Grid,
    Trajectory,
    MaxStep,
    DistanceVsK,
    CauchyTable,
    GanTrain,
    Certify,
}

impl ExperimentKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "grid" => Self::Grid,
            "trajectory" => Self::Trajectory,
            "maxstep" => Self::MaxStep,
            "distance_vs_k" | "dist-vs-k" => Self::DistanceVsK,
            "cauchy_table" | "cauchy" => Self::CauchyTable,
            "gan_train" | "gan-train" => Self::GanTrain,
            "certify" => Self::Certify,
            _ => return None,
        })
    }

    /// The CLI subcommand running this kind.
    pub fn command(&self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::Trajectory => "trajectory",
            Self::MaxStep => "maxstep",
            Self::DistanceVsK => "dist-vs-k",
            Self::CauchyTable => "cauchy",
            Self::GanTrain => "gan-train",
            Self::Certify => "certify",
        }
    }

    fn keys(&self) -> &'static [&'static str] {
        const GAME: &[&str] = &[
            "game", "matrix_m", "matrix_a", "matrix_b", "matrix_c", "theta0", "phi0",
        ];
        const COEFFS: &[&str] = &["gamma", "delta", "alpha", "beta1", "beta2", "epsilon"];
        const GAN: &[&str] = &["loss", "batch", "hidden", "latent"];
        let own: &[&str] = match self {
            Self::Grid => &["algs", "etas", "cs", "T"],
            Self::Trajectory => &["alg", "eta", "c", "T", "reasoning"],
            Self::MaxStep => &["ks", "algs", "c", "T", "eta_lo", "eta_hi", "bisect_steps"],
            Self::DistanceVsK => &["ks", "c", "T", "eta", "eta_lo", "eta_hi", "bisect_steps"],
            Self::CauchyTable => &["ks", "c", "T", "steps", "adam_eta", "gp_eta"],
            Self::GanTrain => &[
                "alg",
                "eta",
                "eta_phi",
                "steps",
                "gap_ks",
                "coverage_every",
                "coverage_samples",
            ],
            Self::Certify => &["alg", "eta", "c", "T"],
        };
        let mut all: Vec<&'static str> = vec!["kind", "seed", "out"];
        all.extend_from_slice(own);
        if *self != Self::GanTrain {
            all.extend_from_slice(GAME);
        }
        if matches!(self, Self::GanTrain | Self::CauchyTable) {
            all.extend_from_slice(GAN);
        }
        all.extend_from_slice(COEFFS);
        Box::leak(all.into_boxed_slice())
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.command())
    }
}

/// Which game an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSpec {
    Fixture(String),
    Bilinear(Matrix),
    Quadratic {
        a: Matrix,
        b: Matrix,
        c: Matrix,
    },
    /// the 8-Gaussians GAN (cauchy table only)
    ToyGan,
}

/// An algorithm token with its depth, e.g. `lv4` → (LevelK, 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgSpec {
    pub method: Method,
    pub k: usize,
}

impl AlgSpec {
    pub fn parse(token: &str) -> Option<Self> {
        parse_algorithm(token).map(|(method, k)| Self {
            method,
            k: k.unwrap_or(1),
        })
    }

    pub fn name(&self) -> String {
        algorithm_name(&self.method, self.k)
    }

    /// Depth column value: the depth for reasoning methods, empty otherwise.
    pub fn depth_field(&self) -> String {
        if self.method.uses_depth() {
            self.k.to_string()
        } else {
            String::new()
        }
    }
}

/// Optional per-method coefficients; unset ones follow the step size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coefficients {
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub game: GameSpec,
    pub theta0: Option<Vector>,
    pub phi0: Option<Vector>,
    pub algs: Vec<AlgSpec>,
    pub alg: Option<AlgSpec>,
    pub etas: Vec<f64>,
    pub eta: Option<f64>,
    pub eta_phi: Option<f64>,
    pub cs: Vec<f64>,
    pub c: Option<f64>,
    pub t: usize,
    pub ks: Vec<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub coefficients: Coefficients,
    pub reasoning: bool,
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub bisect_steps: usize,
    pub steps: usize,
    pub adam_eta: f64,
    pub gp_eta: f64,
    pub loss: GanLossKind,
    pub batch: usize,
    pub hidden: usize,
    pub latent: usize,
    pub gap_ks: Vec<usize>,
    pub coverage_every: usize,
    pub coverage_samples: usize,
}

/// η grid used when a grid config gives none: 10^(−3 + i/2), i = 0..=6.
pub fn default_etas() -> Vec<f64> {
    (0..=6).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// c grid used when a grid config gives none: 0.5, 1.0, …, 5.0.
pub fn default_cs() -> Vec<f64> {
    (1..=10).map(|i| 0.5 * i as f64).collect()
}

impl ExperimentConfig {
    fn defaults(kind: ExperimentKind) -> Self {
        let game = match kind {
            ExperimentKind::CauchyTable | ExperimentKind::GanTrain => GameSpec::ToyGan,
            _ => GameSpec::Fixture(fixtures::QUADRATIC_5D.to_string()),
        };
        let alg = match kind {
            ExperimentKind::GanTrain => AlgSpec::parse("lv2-adam"),
            _ => None,
        };
        Self {
            kind,
            game,
            theta0: None,
            phi0: None,
            algs: Vec::new(),
            alg,
            etas: default_etas(),
            eta: None,
            eta_phi: None,
            cs: default_cs(),
            c: None,
            t: 100,
            ks: match kind {
                ExperimentKind::MaxStep | ExperimentKind::DistanceVsK => vec![2, 4, 6, 8, 12],
                _ => vec![2, 4, 6, 8, 10],
            },
            seed: None,
            out: None,
            coefficients: Coefficients::default(),
            reasoning: false,
            eta_lo: 1e-4,
            eta_hi: 10.0,
            bisect_steps: 40,
            steps: 100,
            adam_eta: 1e-4,
            gp_eta: 1e-2,
            loss: GanLossKind::NonSaturating,
            batch: crate::toygan::BATCH_SIZE,
            hidden: crate::toygan::HIDDEN_WIDTH,
            latent: crate::toygan::LATENT_DIM,
            gap_ks: Vec::new(),
            coverage_every: 0,
            coverage_samples: 8000,
        }
    }

    /// Optimizer settings for one cell at step size `eta` and depth `k`.
    pub fn optimizer_config(&self, eta: f64, k: usize) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::with_eta(eta).depth(k);
        let co = &self.coefficients;
        if let Some(v) = co.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = co.delta {
            cfg.delta = v;
        }
        if let Some(v) = co.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = co.beta1 {
            cfg.beta1 = v;
        }
        if let Some(v) = co.beta2 {
            cfg.beta2 = v;
        }
        if let Some(v) = co.epsilon {
            cfg.epsilon = v;
        }
        cfg
    }

    /// Builds the analytic game at interaction strength `c` with its start
    /// point. Fixture quadratic: C = cI. Scalar bilinear: M = [c]. Inline
    /// games scale their interaction block by c.
    pub fn build_game(&self, c: Option<f64>) -> Result<(AnalyticGame, JointState), HarnessError> {
        let (game, start) = match &self.game {
            GameSpec::Fixture(name) => fixtures::by_name(name, c)
                .ok_or_else(|| HarnessError::validation("game", format!("unknown fixture {name}")))?
                .map_err(|e| HarnessError::validation("game", e.to_string()))?,
            GameSpec::Bilinear(m) => {
                let game = AnalyticGame::bilinear(m.scale(c.unwrap_or(1.0)))
                    .map_err(|e| HarnessError::validation("matrix_m", e.to_string()))?;
                let (p, q) = (m.rows(), m.cols());
                (game, JointState::zeros(p, q))
            }
            GameSpec::Quadratic { a, b, c: cm } => {
                let game =
                    AnalyticGame::quadratic(a.clone(), b.clone(), cm.scale(c.unwrap_or(1.0)))
                        .map_err(|e| HarnessError::validation("game", e.to_string()))?;
                (game, JointState::zeros(a.rows(), b.rows()))
            }
            GameSpec::ToyGan => {
                return Err(HarnessError::validation(
                    "game",
                    "an analytic game is required",
                ))
            }
        };
        let dims = start.dims();
        let theta = self.theta0.clone().unwrap_or(start.theta);
        let phi = self.phi0.clone().unwrap_or(start.phi);
        let s0 = JointState::new(theta, phi);
        if s0.dims() != dims {
            return Err(HarnessError::validation(
                "theta0",
                "start point does not match the game",
            ));
        }
        Ok((game, s0))
    }

    fn validate(&self) -> Result<(), HarnessError> {
        use ExperimentKind::*;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !matches!(self.kind, GanTrain | CauchyTable) || !matches!(self.game, GameSpec::ToyGan) {
            if matches!(self.game, GameSpec::ToyGan) {
                return Err(HarnessError::validation("game", "required"));
            }
            let inline = matches!(
                self.game,
                GameSpec::Bilinear(_) | GameSpec::Quadratic { .. }
            );
            if inline && (self.theta0.is_none() || self.phi0.is_none()) {
                return Err(HarnessError::validation(
                    "theta0",
                    "inline games need theta0 and phi0",
                ));
            }
        }
        if self.t == 0 {
            return Err(HarnessError::validation("T", "must be at least 1"));
        }
        match self.kind {
            Grid => {
                if self.algs.is_empty() {
                    return Err(HarnessError::validation("algs", "required"));
                }
                if self.etas.is_empty() {
                    return Err(HarnessError::validation("etas", "grid is empty"));
                }
                if self.cs.is_empty() {
                    return Err(HarnessError::validation("cs", "grid is empty"));
                }
            }
            Trajectory | Certify | GanTrain => {
                if self.alg.is_none() {
                    return Err(HarnessError::validation("alg", "required"));
                }
                if self.eta.is_none() {
                    return Err(HarnessError::validation("eta", "required"));
                }
            }
            MaxStep | DistanceVsK | CauchyTable => {
                if self.ks.is_empty() {
                    return Err(HarnessError::validation("ks", "list is empty"));
                }
            }
        }
        for &e in self
            .etas
            .iter()
            .chain(self.eta.iter())
            .chain(self.eta_phi.iter())
        {
            if !positive(e) {
                return Err(HarnessError::validation(
                    "eta",
                    format!("must be positive, got {e}"),
                ));
            }
        }
        for (v, name) in [(self.adam_eta, "adam_eta"), (self.gp_eta, "gp_eta")] {
            if !positive(v) {
                return Err(HarnessError::validation(
                    name,
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if !(positive(self.eta_lo) && self.eta_lo < self.eta_hi && self.eta_hi.is_finite()) {
            return Err(HarnessError::validation(
                "eta_lo",
                "bracket must satisfy 0 < eta_lo < eta_hi",
            ));
        }
        for &c in self.cs.iter().chain(self.c.iter()) {
            if !c.is_finite() {
                return Err(HarnessError::validation("c", "must be finite"));
            }
        }
        if self.ks.iter().chain(self.gap_ks.iter()).any(|&k| k == 0) {
            return Err(HarnessError::validation("ks", "depths start at 1"));
        }
        if let Some(a) = self.alg.filter(|_| self.kind == GanTrain) {
            if a.method.needs_blocks() || matches!(a.method, Method::SppmFixedPoint { .. }) {
                return Err(HarnessError::validation(
                    "alg",
                    format!("{} needs an analytic game", a.name()),
                ));
            }
        }
        if matches!(self.kind, GanTrain)
            || (self.kind == CauchyTable && self.game == GameSpec::ToyGan)
        {
            if self.seed.is_none() {
                return Err(HarnessError::validation(
                    "seed",
                    "stochastic experiments need a seed",
                ));
            }
            if self.batch == 0 || self.hidden == 0 || self.latent == 0 {
                return Err(HarnessError::validation(
                    "batch",
                    "network and batch sizes must be positive",
                ));
            }
        }
        let k = self.alg.map_or(1, |a| a.k);
        match self.optimizer_config(self.eta.unwrap_or(1.0), k).validate() {
            Err(OptimizerError::InvalidConfig(field)) => {
                Err(HarnessError::validation(field, "out of range"))
            }
            Err(e) => Err(HarnessError::validation("alg", e.to_string())),
            Ok(()) => Ok(()),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("{key}: expected a number, got {v:?}"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("{key}: expected a non-negative integer, got {v:?}"))
}

fn parse_list<T>(
    key: &str,
    v: &str,
    f: impl Fn(&str, &str) -> Result<T, String>,
) -> Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

fn parse_matrix(key: &str, v: &str) -> Result<Matrix, String> {
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| parse_list(key, r, parse_f64))
        .collect::<Result<_, _>>()?;
    Matrix::from_rows(&rows).map_err(|e| format!("{key}: {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(HarnessError::Parse {
                line: line_no,
                message: "empty key".into(),
            });
        }
        if let Some((first, _)) = entries.get(key) {
            return Err(HarnessError::Parse {
                line: line_no,
                message: format!("duplicate key {key:?} (first set on line {first})"),
            });
        }
        entries.insert(key.to_string(), (line_no, value.trim().to_string()));
    }

    let (kind_line, kind_value) = entries
        .get("kind")
        .cloned()
        .ok_or_else(|| HarnessError::validation("kind", "required"))?;
    let kind = ExperimentKind::parse(&kind_value).ok_or_else(|| HarnessError::Parse {
        line: kind_line,
        message: format!("unknown experiment kind {kind_value:?}"),
    })?;
    let allowed = kind.keys();
    let mut cfg = ExperimentConfig::defaults(kind);
    let mut game_name: Option<String> = None;
    let mut matrices: BTreeMap<&str, Matrix> = BTreeMap::new();

    for (key, (line, value)) in &entries {
        if !allowed.contains(&key.as_str()) {
            return Err(HarnessError::Parse {
                line: *line,
                message: format!("unknown key {key:?} for {kind}"),
            });
        }
        let err = |message: String| HarnessError::Parse {
            line: *line,
            message,
        };
        let v = value.as_str();
        match key.as_str() {
            "kind" => {}
            "seed" => {
                cfg.seed = Some(
                    v.parse()
                        .map_err(|_| err(format!("seed: expected a 64-bit integer, got {v:?}")))?,
                )
            }
            "out" => cfg.out = Some(PathBuf::from(v)),
            "game" => game_name = Some(v.to_string()),
            "matrix_m" | "matrix_a" | "matrix_b" | "matrix_c" => {
                let k: &'static str = allowed
                    .iter()
                    .find(|a| **a == key.as_str())
                    .expect("allowed");
                matrices.insert(k, parse_matrix(key, v).map_err(err)?);
            }
            "theta0" => {
                cfg.theta0 = Some(Vector::from_vec_unchecked(
                    parse_list(key, v, parse_f64).map_err(err)?,
                ))
            }
            "phi0" => {
                cfg.phi0 = Some(Vector::from_vec_unchecked(
                    parse_list(key, v, parse_f64).map_err(err)?,
                ))
            }
            "algs" => {
                cfg.algs = parse_list(key, v, |_, tok| {
                    AlgSpec::parse(tok).ok_or_else(|| format!("algs: unknown algorithm {tok:?}"))
                })
                .map_err(err)?
            }
            "alg" => {
                cfg.alg = Some(
                    AlgSpec::parse(v)
                        .ok_or_else(|| err(format!("alg: unknown algorithm {v:?}")))?,
                )
            }
            "etas" => cfg.etas = parse_list(key, v, parse_f64).map_err(err)?,
            "eta" => cfg.eta = Some(parse_f64(key, v).map_err(err)?),
            "eta_phi" => cfg.eta_phi = Some(parse_f64(key, v).map_err(err)?),
            "cs" => cfg.cs = parse_list(key, v, parse_f64).map_err(err)?,
            "c" => cfg.c = Some(parse_f64(key, v).map_err(err)?),
            "T" => cfg.t = parse_usize(key, v).map_err(err)?,
            "ks" => cfg.ks = parse_list(key, v, parse_usize).map_err(err)?,
            "gap_ks" => cfg.gap_ks = parse_list(key, v, parse_usize).map_err(err)?,
            "gamma" => cfg.coefficients.gamma = Some(parse_f64(key, v).map_err(err)?),
            "delta" => cfg.coefficients.delta = Some(parse_f64(key, v).map_err(err)?),
            "alpha" => cfg.coefficients.alpha = Some(parse_f64(key, v).map_err(err)?),
            "beta1" => cfg.coefficients.beta1 = Some(parse_f64(key, v).map_err(err)?),
            "beta2" => cfg.coefficients.beta2 = Some(parse_f64(key, v).map_err(err)?),
            "epsilon" => cfg.coefficients.epsilon = Some(parse_f64(key, v).map_err(err)?),
            "reasoning" => cfg.reasoning = parse_bool(key, v).map_err(err)?,
            "eta_lo" => cfg.eta_lo = parse_f64(key, v).map_err(err)?,
            "eta_hi" => cfg.eta_hi = parse_f64(key, v).map_err(err)?,
            "bisect_steps" => cfg.bisect_steps = parse_usize(key, v).map_err(err)?,
            "steps" => cfg.steps = parse_usize(key, v).map_err(err)?,
            "adam_eta" => cfg.adam_eta = parse_f64(key, v).map_err(err)?,
            "gp_eta" => cfg.gp_eta = parse_f64(key, v).map_err(err)?,
            "loss" => {
                cfg.loss = v
                    .parse()
                    .map_err(|_| err(format!("loss: unknown loss {v:?}")))?
            }
            "batch" => cfg.batch = parse_usize(key, v).map_err(err)?,
            "hidden" => cfg.hidden = parse_usize(key, v).map_err(err)?,
            "latent" => cfg.latent = parse_usize(key, v).map_err(err)?,
            "coverage_every" => cfg.coverage_every = parse_usize(key, v).map_err(err)?,
            "coverage_samples" => cfg.coverage_samples = parse_usize(key, v).map_err(err)?,
            other => unreachable!("{other} is in the allowed list but not handled"),
        }
    }

    if let Some(name) = game_name {
        cfg.game = match name.as_str() {
            "bilinear" => GameSpec::Bilinear(matrices.remove("matrix_m").ok_or_else(|| {
                HarnessError::validation("matrix_m", "required for game = bilinear")
            })?),
            "quadratic" => {
                let mut take = |k: &'static str| {
                    matrices
                        .remove(k)
                        .ok_or_else(|| HarnessError::validation(k, "required for game = quadratic"))
                };
                GameSpec::Quadratic {
                    a: take("matrix_a")?,
                    b: take("matrix_b")?,
                    c: take("matrix_c")?,
                }
            }
            "toygan" => GameSpec::ToyGan,
            fixture => GameSpec::Fixture(fixture.to_string()),
        };
    }
    if let Some((k, _)) = matrices.into_iter().next() {
        return Err(HarnessError::validation(
            k,
            "matrix given but the game does not use it",
        ));
    }
    if cfg.game == GameSpec::ToyGan
        && !matches!(kind, ExperimentKind::CauchyTable | ExperimentKind::GanTrain)
    {
        return Err(HarnessError::validation(
            "game",
            "toygan is only available to cauchy and gan-train",
        ));
    }
    if let GameSpec::Fixture(name) = &cfg.game {
        if fixtures::by_name(name, None).is_none() {
            return Err(HarnessError::validation(
                "game",
                format!("unknown fixture {name:?}"),
            ));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::Baseline;

    const GRID: &str = "\
# sweep
kind = grid
game = paper-quadratic-5d
algs = gda, lv4, sppm   # three
etas = 0.01, 0.1
cs = 0.5, 1, 2
T = 100
";

    #[test]
    fn minimal_grid_parses() {
        let cfg = parse_config(GRID).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Grid);
        assert_eq!(cfg.algs.len(), 3);
        assert_eq!(cfg.algs[0].method, Method::Baseline(Baseline::Gda));
        assert_eq!(
            cfg.algs[1],
            AlgSpec {
                method: Method::LevelK,
                k: 4
            }
        );
        assert_eq!(cfg.etas, vec![0.01, 0.1]);
        assert_eq!(cfg.cs, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.t, 100);
    }

    fn validation_field(text: &str) -> &'static str {
        match parse_config(text) {
            Err(HarnessError::Validation { field, .. }) => field,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    fn parse_line(text: &str) -> usize {
        match parse_config(text) {
            Err(HarnessError::Parse { line, .. }) => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_eta_names_the_field() {
        assert_eq!(
            validation_field(&GRID.replace("0.01, 0.1", "0.01, -0.1")),
            "eta"
        );
        assert_eq!(
            validation_field("kind = trajectory\nalg = eg\neta = -1\n"),
            "eta"
        );
    }

    #[test]
    fn duplicate_key_reports_line() {
        assert_eq!(parse_line(&format!("{GRID}T = 50\n")), 8);
    }

    #[test]
    fn unknown_key_reports_line() {
        assert_eq!(parse_line("kind = grid\nalgs = gda\ncolour = red\n"), 3);
        assert_eq!(parse_line("kind = grid\nalgs = gda\nsteps = 3\n"), 3);
        assert_eq!(parse_line("kind = grid\n this line has no equals\n"), 2);
        assert_eq!(parse_line("kind = grid\nalgs = gda, lv0\n"), 2);
        assert_eq!(parse_line("kind = nothing\n"), 1);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(validation_field("game = paper-quadratic-5d\n"), "kind");
        assert_eq!(validation_field("kind = grid\n"), "algs");
        assert_eq!(validation_field("kind = grid\nalgs = gda\nT = 0\n"), "T");
        assert_eq!(validation_field("kind = grid\nalgs = gda\ncs = \n"), "cs");
        assert_eq!(validation_field("kind = gan-train\neta = 0.001\n"), "seed");
        assert_eq!(
            validation_field("kind = gan-train\neta = 0.001\nseed = 1\nalg = sppm\n"),
            "alg"
        );
        assert_eq!(
            validation_field("kind = grid\nalgs = gda\ngame = nowhere\n"),
            "game"
        );
        assert_eq!(
            validation_field("kind = grid\nalgs = gda\ngame = bilinear\n"),
            "matrix_m"
        );
        assert_eq!(
            validation_field("kind = grid\nalgs = gda\nbeta2 = 1.5\n"),
            "beta2"
        );
    }

    #[test]
    fn inline_games() {
        let cfg = parse_config(
            "kind = trajectory\nalg = lv2\neta = 0.1\ngame = bilinear\nmatrix_m = 1, 2; 0, 1\ntheta0 = 1, 1\nphi0 = 0, -1\n",
        )
        .unwrap();
        let (g, s0) = cfg.build_game(Some(2.0)).unwrap();
        assert_eq!(g.interaction().as_slice(), &[2.0, 4.0, 0.0, 2.0]);
        assert_eq!(s0, JointState::from_slices(&[1.0, 1.0], &[0.0, -1.0]));
        assert_eq!(
            validation_field(
                "kind = trajectory\nalg = lv2\neta = 0.1\ngame = bilinear\nmatrix_m = 1\n"
            ),
            "theta0"
        );
        let cfg = parse_config(
            "kind = certify\nalg = sppm\neta = 0.1\ngame = quadratic\nmatrix_a = 1\nmatrix_b = -1\nmatrix_c = 2\ntheta0 = 1\nphi0 = 1\n",
        )
        .unwrap();
        assert!(matches!(cfg.game, GameSpec::Quadratic { .. }));
    }

    #[test]
    fn fixture_interaction_semantics() {
        let cfg = parse_config(GRID).unwrap();
        let (g, _) = cfg.build_game(Some(2.0)).unwrap();
        assert_eq!(*g.interaction(), Matrix::scaled_identity(5, 2.0));
        let cfg = parse_config("kind = grid\nalgs = gda\ngame = paper-bilinear-scalar\n").unwrap();
        let (g, s0) = cfg.build_game(Some(3.0)).unwrap();
        assert_eq!(g.interaction().as_slice(), &[3.0]);
        assert_eq!(s0, JointState::from_slices(&[-12.0], &[10.0]));
    }

    #[test]
    fn coefficients_follow_eta_unless_set() {
        let cfg = parse_config("kind = grid\nalgs = sga\ngamma = 0.5\n").unwrap();
        let o = cfg.optimizer_config(0.1, 1);
        assert_eq!((o.gamma, o.delta, o.alpha), (0.5, 0.1, 0.1));
    }

    #[test]
    fn defaults() {
        let cfg = parse_config("kind = grid\nalgs = gda\n").unwrap();
        assert_eq!(cfg.etas.len(), 7);
        assert!((cfg.etas[0] - 1e-3).abs() < 1e-18 && (cfg.etas[6] - 1.0).abs() < 1e-15);
        assert_eq!(cfg.cs, default_cs());
        assert_eq!(cfg.cs[9], 5.0);
        let cfg = parse_config("kind = maxstep\n").unwrap();
        assert_eq!(cfg.ks, vec![2, 4, 6, 8, 12]);
        assert_eq!((cfg.eta_lo, cfg.eta_hi, cfg.bisect_steps), (1e-4, 10.0, 40));
        let cfg = parse_config("kind = gan-train\neta = 1e-3\nseed = 4\n").unwrap();
        assert_eq!(cfg.alg.unwrap().name(), "lv2-adam");
        assert_eq!(cfg.game, GameSpec::ToyGan);
    }
}
