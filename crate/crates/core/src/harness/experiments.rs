use std::fmt::Write as _;

use rayon::prelude::*;

use crate::certificates::{self, CertificationReport};
use crate::games::{AnalyticGame, DifferentiableGame, JointState};
use crate::optimizers::{
    is_divergent, run_trajectory, Method, Optimizer, OptimizerConfig, ReasoningTrace,
};
use crate::toygan::{self, GanTrainConfig, GanTrainLog};

use super::config::{AlgSpec, ExperimentConfig, ExperimentKind, GameSpec};
use super::HarnessError;

/// Final distances above this are reported as this value.
pub const FINAL_DISTANCE_CAP: f64 = 1e12;

/// Shortest decimal that parses back to the same f64.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn capped(r: f64) -> f64 {
    if r.is_nan() {
        FINAL_DISTANCE_CAP
    } else {
        r.min(FINAL_DISTANCE_CAP)
    }
}

fn distance(game: &AnalyticGame, s: &JointState) -> Result<f64, HarnessError> {
    Ok(game.distance_to_equilibrium(s)?)
}

/// One cell of a grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub alg: AlgSpec,
    pub eta: f64,
    pub c: f64,
    pub t: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub diverged: bool,
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("algorithm,k,eta,c,T,final_distance,diverged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.alg.name(),
            r.alg.depth_field(),
            format_float(r.eta),
            format_float(r.c),
            r.t,
            format_float(r.final_distance),
            r.diverged
        );
    }
    out
}

fn run_cell(
    cfg: &ExperimentConfig,
    alg: AlgSpec,
    eta: f64,
    c: f64,
) -> Result<GridRow, HarnessError> {
    let (game, s0) = cfg.build_game(Some(c))?;
    let opt = cfg.optimizer_config(eta, alg.k);
    let traj = run_trajectory(&game, alg.method, &opt, &s0, cfg.t)?;
    let last = distance(&game, traj.last())?;
    let diverged = traj.diverged || !(last <= FINAL_DISTANCE_CAP);
    Ok(GridRow {
        alg,
        eta,
        c,
        t: cfg.t,
        initial_distance: distance(&game, &s0)?,
        final_distance: capped(last),
        diverged,
    })
}

/// Every (algorithm, η, c) cell, in that nesting order.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<GridRow>, HarnessError> {
    let mut cells = Vec::with_capacity(cfg.algs.len() * cfg.etas.len() * cfg.cs.len());
    for &alg in &cfg.algs {
        for &eta in &cfg.etas {
            for &c in &cfg.cs {
                cells.push((alg, eta, c));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(alg, eta, c)| run_cell(cfg, alg, eta, c))
        .collect()
}

fn shrinks(
    game: &AnalyticGame,
    alg: AlgSpec,
    cfg: &ExperimentConfig,
    s0: &JointState,
    eta: f64,
) -> Result<bool, HarnessError> {
    let opt = cfg.optimizer_config(eta, alg.k);
    let traj = run_trajectory(game, alg.method, &opt, s0, cfg.t)?;
    if traj.diverged {
        return Ok(false);
    }
    Ok(distance(game, traj.last())? < distance(game, s0)?)
}

/// Largest η in the bracket for which T steps shrink the distance, by
/// bisection. Returns a bracket edge when the predicate never or always holds.
pub fn max_step_for(
    cfg: &ExperimentConfig,
    game: &AnalyticGame,
    s0: &JointState,
    alg: AlgSpec,
) -> Result<f64, HarnessError> {
    let (mut lo, mut hi) = (cfg.eta_lo, cfg.eta_hi);
    if shrinks(game, alg, cfg, s0, hi)? {
        return Ok(hi);
    }
    if !shrinks(game, alg, cfg, s0, lo)? {
        return Ok(lo);
    }
    for _ in 0..cfg.bisect_steps {
        let mid = 0.5 * (lo + hi);
        if shrinks(game, alg, cfg, s0, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxStepRow {
    pub alg: AlgSpec,
    pub eta_max: f64,
}

fn sppm() -> AlgSpec {
    AlgSpec {
        method: Method::Sppm,
        k: 1,
    }
}

fn level_k(k: usize) -> AlgSpec {
    AlgSpec {
        method: Method::LevelK,
        k,
    }
}

/// η_max for Lv.k GP at every configured k, then for each extra algorithm
/// (SPPM when none is given).
pub fn max_step_size_search(cfg: &ExperimentConfig) -> Result<Vec<MaxStepRow>, HarnessError> {
    let (game, s0) = cfg.build_game(cfg.c)?;
    let mut algs: Vec<AlgSpec> = cfg.ks.iter().map(|&k| level_k(k)).collect();
    if cfg.algs.is_empty() {
        algs.push(sppm());
    } else {
        algs.extend_from_slice(&cfg.algs);
    }
    algs.into_par_iter()
        .map(|alg| {
            Ok(MaxStepRow {
                alg,
                eta_max: max_step_for(cfg, &game, &s0, alg)?,
            })
        })
        .collect()
}

pub fn max_step_csv(rows: &[MaxStepRow]) -> String {
    let mut out = String::from("algorithm,k,eta_max\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.alg.name(),
            r.alg.depth_field(),
            format_float(r.eta_max)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub alg: AlgSpec,
    pub eta: f64,
    pub final_distance: f64,
    pub diverged: bool,
    /// |distance − SPPM's distance|
    pub gap_to_sppm: f64,
}

/// Final distance of Lv.k GP for each k at a shared η, with SPPM's as the
/// last row. η is the config's, or SPPM's η_max when unset.
pub fn distance_vs_k(cfg: &ExperimentConfig) -> Result<Vec<DistanceRow>, HarnessError> {
    let (game, s0) = cfg.build_game(cfg.c)?;
    let eta = match cfg.eta {
        Some(e) => e,
        None => max_step_for(cfg, &game, &s0, sppm())?,
    };
    let run = |alg: AlgSpec| -> Result<(f64, bool), HarnessError> {
        let traj = run_trajectory(
            &game,
            alg.method,
            &cfg.optimizer_config(eta, alg.k),
            &s0,
            cfg.t,
        )?;
        let r = distance(&game, traj.last())?;
        Ok((capped(r), traj.diverged || !(r <= FINAL_DISTANCE_CAP)))
    };
    let (sppm_r, sppm_div) = run(sppm())?;
    let mut rows: Vec<DistanceRow> = cfg
        .ks
        .par_iter()
        .map(|&k| {
            let (r, diverged) = run(level_k(k))?;
            Ok(DistanceRow {
                alg: level_k(k),
                eta,
                final_distance: r,
                diverged,
                gap_to_sppm: (r - sppm_r).abs(),
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    rows.push(DistanceRow {
        alg: sppm(),
        eta,
        final_distance: sppm_r,
        diverged: sppm_div,
        gap_to_sppm: 0.0,
    });
    Ok(rows)
}

pub fn distance_csv(rows: &[DistanceRow], t: usize) -> String {
    let mut out = String::from("algorithm,k,eta,T,final_distance,diverged,abs_diff_sppm\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.alg.name(),
            r.alg.depth_field(),
            format_float(r.eta),
            t,
            format_float(r.final_distance),
            r.diverged,
            format_float(r.gap_to_sppm)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyRow {
    pub alg: AlgSpec,
    pub eta: f64,
    pub k: usize,
    /// r̄⁽ᵏ⁾, the squared k-th reasoning gap averaged over the run
    pub mean_gap: f64,
    /// per-step squared Cauchy bound averaged the same way (analytic GP only)
    pub mean_bound: Option<f64>,
}

fn squared_gap(trace: &ReasoningTrace, k: usize) -> f64 {
    trace.states[k].gap_sq(&trace.states[k - 1])
}

fn analytic_gaps(
    cfg: &ExperimentConfig,
    game: &AnalyticGame,
    s0: &JointState,
    alg: AlgSpec,
    eta: f64,
) -> Result<Vec<CauchyRow>, HarnessError> {
    let opt_cfg = cfg.optimizer_config(eta, alg.k);
    let mut opt = Optimizer::new(alg.method, opt_cfg)?;
    let lip = game.lipschitz();
    let mut gaps = vec![0.0; cfg.ks.len()];
    let mut bounds = vec![0.0; cfg.ks.len()];
    let mut s = s0.clone();
    let mut steps = 0usize;
    for _ in 0..cfg.t {
        if is_divergent(game, &s) {
            break;
        }
        let dmax = certificates::delta_max(game, &s)?;
        let out = opt.step(game, &s)?;
        let trace = out.trace.expect("reasoning methods return a trace");
        for (i, &k) in cfg.ks.iter().enumerate() {
            gaps[i] += squared_gap(&trace, k);
            bounds[i] += certificates::cauchy_bound(eta, lip, dmax, k).powi(2);
        }
        steps += 1;
        s = out.state;
    }
    let n = steps.max(1) as f64;
    let with_bound = alg.method == Method::LevelK;
    Ok(cfg
        .ks
        .iter()
        .enumerate()
        .map(|(i, &k)| CauchyRow {
            alg,
            eta,
            k,
            mean_gap: gaps[i] / n,
            mean_bound: with_bound.then(|| bounds[i] / n),
        })
        .collect())
}

fn gan_config(
    cfg: &ExperimentConfig,
    alg: AlgSpec,
    eta: f64,
    steps: usize,
    gap_ks: Vec<usize>,
) -> Result<GanTrainConfig, HarnessError> {
    let seed = cfg
        .seed
        .ok_or_else(|| HarnessError::validation("seed", "stochastic experiments need a seed"))?;
    let mut opt = cfg.optimizer_config(eta, alg.k);
    if let Some(e) = cfg.eta_phi {
        opt.eta_phi = e;
    }
    let mut g = GanTrainConfig::new(alg.method, opt, cfg.loss, steps, seed);
    g.batch_size = cfg.batch;
    g.hidden = cfg.hidden;
    g.latent = cfg.latent;
    g.gap_ks = gap_ks;
    g.coverage_every = cfg.coverage_every;
    g.coverage_samples = cfg.coverage_samples;
    Ok(g)
}

/// r̄⁽ᵏ⁾ for Lv.K Adam (at `adam_eta`) and Lv.K GP (at `gp_eta`) with K the
/// largest configured k, on the toy GAN or an analytic game.
pub fn cauchy_table(cfg: &ExperimentConfig) -> Result<Vec<CauchyRow>, HarnessError> {
    let k_max = *cfg.ks.iter().max().expect("ks validated nonempty");
    let adam = AlgSpec {
        method: Method::LevelKAdam,
        k: k_max,
    };
    let gp = level_k(k_max);
    let runs = [(adam, cfg.adam_eta), (gp, cfg.gp_eta)];
    if cfg.game == GameSpec::ToyGan {
        let logs: Vec<(AlgSpec, f64, GanTrainLog)> = runs
            .into_par_iter()
            .map(|(alg, eta)| {
                let g = gan_config(cfg, alg, eta, cfg.steps, cfg.ks.clone())?;
                Ok((alg, eta, toygan::train_gan(&g)?))
            })
            .collect::<Result<_, HarnessError>>()?;
        Ok(logs
            .into_iter()
            .flat_map(|(alg, eta, log)| {
                let ks = log.gap_ks.clone();
                ks.into_iter()
                    .zip(log.mean_gaps())
                    .map(move |(k, mean_gap)| CauchyRow {
                        alg,
                        eta,
                        k,
                        mean_gap,
                        mean_bound: None,
                    })
            })
            .collect())
    } else {
        let (game, s0) = cfg.build_game(cfg.c)?;
        let mut rows = Vec::new();
        for (alg, eta) in runs {
            rows.extend(analytic_gaps(cfg, &game, &s0, alg, eta)?);
        }
        Ok(rows)
    }
}

pub fn cauchy_csv(rows: &[CauchyRow]) -> String {
    let mut out = String::from("algorithm,eta,k,mean_gap,mean_bound\n");
    for r in rows {
        let bound = r.mean_bound.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.alg.name(),
            format_float(r.eta),
            r.k,
            format_float(r.mean_gap),
            bound
        );
    }
    out
}

/// A logged trajectory and, when requested, each step's reasoning chain.
#[derive(Debug, Clone)]
pub struct TrajectoryDump {
    pub states: Vec<JointState>,
    pub distances: Vec<f64>,
    /// chain for the step leaving `states[t]`
    pub traces: Vec<ReasoningTrace>,
    pub diverged: bool,
}

pub fn trajectory_dump(cfg: &ExperimentConfig) -> Result<TrajectoryDump, HarnessError> {
    let alg = cfg.alg.expect("alg validated");
    let eta = cfg.eta.expect("eta validated");
    let (game, s0) = cfg.build_game(cfg.c)?;
    if cfg.reasoning && !alg.method.uses_depth() {
        return Err(HarnessError::validation(
            "reasoning",
            format!("{} has no reasoning chain", alg.name()),
        ));
    }
    let mut opt = Optimizer::new(alg.method, cfg.optimizer_config(eta, alg.k))?;
    let mut dump = TrajectoryDump {
        distances: vec![distance(&game, &s0)?],
        states: vec![s0],
        traces: Vec::new(),
        diverged: false,
    };
    dump.diverged = is_divergent(&game, &dump.states[0]);
    for _ in 0..cfg.t {
        if dump.diverged {
            break;
        }
        let out = opt.step(&game, dump.states.last().expect("non-empty"))?;
        dump.diverged = is_divergent(&game, &out.state);
        dump.distances.push(distance(&game, &out.state)?);
        dump.states.push(out.state);
        if cfg.reasoning {
            dump.traces.push(out.trace.expect("checked above"));
        }
    }
    Ok(dump)
}

fn push_state_row(out: &mut String, t: usize, point: &str, s: &JointState, r: f64) {
    let _ = write!(out, "{t},{point}");
    for x in s.theta.iter().chain(s.phi.iter()) {
        let _ = write!(out, ",{}", format_float(*x));
    }
    let _ = writeln!(out, ",{}", format_float(r));
}

/// `t,point,theta_1…,phi_1…,r`. Trajectory rows have point `state`; the
/// reasoning chain leaving step t follows as points `lv1` … `lvk`.
pub fn trajectory_csv(dump: &TrajectoryDump, game: &AnalyticGame) -> Result<String, HarnessError> {
    let (m, n) = dump.states[0].dims();
    let mut out = String::from("t,point");
    for i in 1..=m {
        let _ = write!(out, ",theta_{i}");
    }
    for j in 1..=n {
        let _ = write!(out, ",phi_{j}");
    }
    out.push_str(",r\n");
    for (t, (s, r)) in dump.states.iter().zip(&dump.distances).enumerate() {
        push_state_row(&mut out, t, "state", s, *r);
        if let Some(trace) = dump.traces.get(t) {
            for (level, p) in trace.states.iter().enumerate().skip(1) {
                push_state_row(
                    &mut out,
                    t,
                    &format!("lv{level}"),
                    p,
                    game.distance_to_equilibrium(p)?,
                );
            }
        }
    }
    Ok(out)
}

pub fn certify(cfg: &ExperimentConfig) -> Result<CertificationReport, HarnessError> {
    let alg = cfg.alg.expect("alg validated");
    let eta = cfg.eta.expect("eta validated");
    let (game, s0) = cfg.build_game(cfg.c)?;
    let opt: OptimizerConfig = cfg.optimizer_config(eta, alg.k);
    Ok(certificates::certify_trajectory(
        &game, alg.method, &opt, &s0, cfg.t,
    )?)
}

pub fn gan_train(cfg: &ExperimentConfig) -> Result<GanTrainLog, HarnessError> {
    let alg = cfg.alg.expect("alg validated");
    let g = gan_config(
        cfg,
        alg,
        cfg.eta.expect("eta validated"),
        cfg.steps,
        cfg.gap_ks.clone(),
    )?;
    Ok(toygan::train_gan(&g)?)
}

/// Runs whatever `cfg.kind` names and renders its CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<String, HarnessError> {
    Ok(match cfg.kind {
        ExperimentKind::Grid => grid_csv(&run_grid(cfg)?),
        ExperimentKind::MaxStep => max_step_csv(&max_step_size_search(cfg)?),
        ExperimentKind::DistanceVsK => distance_csv(&distance_vs_k(cfg)?, cfg.t),
        ExperimentKind::CauchyTable => cauchy_csv(&cauchy_table(cfg)?),
        ExperimentKind::Trajectory => {
            let dump = trajectory_dump(cfg)?;
            let (game, _) = cfg.build_game(cfg.c)?;
            trajectory_csv(&dump, &game)?
        }
        ExperimentKind::Certify => {
            let report = certify(cfg)?;
            format!("# bound: {}\n{}", report.kind.label(), report.to_csv())
        }
        ExperimentKind::GanTrain => gan_train(cfg)?.to_csv(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::fixtures;
    use crate::harness::parse_config;
    use crate::optimizers::sppm_step_closed_form;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn grid_cardinality_and_order() {
        let c = cfg("kind = grid\nalgs = gda, lv2, sppm\netas = 0.01, 0.02, 0.05, 0.1\ncs = 0.5, 1, 2, 3, 4\nT = 20\n");
        let rows = run_grid(&c).unwrap();
        assert_eq!(rows.len(), 60);
        assert_eq!(grid_csv(&rows).lines().count(), 61);
        assert_eq!(
            (rows[0].alg.name(), rows[0].eta, rows[0].c),
            ("gda".into(), 0.01, 0.5)
        );
        assert_eq!((rows[5].eta, rows[5].c), (0.02, 0.5));
        assert_eq!(rows[59].alg.name(), "sppm");
    }

    #[test]
    fn gda_grows_on_bilinear_cells() {
        let c = cfg("kind = grid\ngame = paper-bilinear-scalar\nalgs = gda\netas = 0.001, 0.1, 1\ncs = 1, 10\nT = 10\n");
        for r in run_grid(&c).unwrap() {
            assert!(r.final_distance > r.initial_distance, "{r:?}");
        }
    }

    #[test]
    fn sppm_quadratic_cell_golden() {
        let c = cfg("kind = grid\nalgs = sppm\netas = 0.1\ncs = 1\nT = 100\n");
        let r = &run_grid(&c).unwrap()[0];
        // frozen from an independent dense solve of the semi-implicit step
        let golden = 0.009402117368483698;
        assert!(
            (r.final_distance - golden).abs() <= 1e-12 * golden,
            "{}",
            r.final_distance
        );
        assert!(!r.diverged && r.final_distance < r.initial_distance);
        // spectral radius 0.98690: the 1e-6 level is first reached at T = 437
        let slow = |t: usize| {
            let c = cfg(&format!(
                "kind = grid\nalgs = sppm\netas = 0.1\ncs = 1\nT = {t}\n"
            ));
            run_grid(&c).unwrap()[0].final_distance
        };
        assert!(slow(436) >= 1e-6 && slow(437) < 1e-6);
    }

    #[test]
    fn divergent_cells_are_capped_and_flagged() {
        let c = cfg(
            "kind = grid\ngame = paper-bilinear-scalar\nalgs = gda\netas = 1\ncs = 10\nT = 100\n",
        );
        let r = &run_grid(&c).unwrap()[0];
        assert!(r.diverged);
        assert_eq!(r.final_distance, FINAL_DISTANCE_CAP);
    }

    #[test]
    fn max_step_bracket_edges() {
        let c = cfg("kind = maxstep\ngame = paper-bilinear-scalar\nks = 1\nalgs = gda, sppm\n");
        let rows = max_step_size_search(&c).unwrap();
        assert_eq!(rows.len(), 3);
        // Lv.1 is GDA
        assert_eq!(rows[0].eta_max, 1e-4);
        assert_eq!(rows[1].eta_max, 1e-4);
        assert_eq!(rows[2].eta_max, 10.0);
    }

    #[test]
    fn distance_vs_k_on_scalar_bilinear() {
        let c = cfg("kind = dist-vs-k\ngame = paper-bilinear-scalar\nks = 1, 2, 4, 6, 8, 10, 12\neta = 0.04\nT = 100\n");
        let rows = distance_vs_k(&c).unwrap();
        let gaps: Vec<f64> = rows[..7].iter().map(|r| r.gap_to_sppm).collect();
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "{gaps:?}");
        }
        assert!(gaps[6] < 1e-8, "{}", gaps[6]);

        let (g, s0) = fixtures::bilinear_scalar(10.0).unwrap();
        let gda = run_trajectory(
            &g,
            Method::Baseline(crate::optimizers::Baseline::Gda),
            &OptimizerConfig::with_eta(0.04),
            &s0,
            100,
        )
        .unwrap();
        assert_eq!(
            rows[0].final_distance,
            g.distance_to_equilibrium(gda.last()).unwrap()
        );
        let blocks = g.jacobian_blocks().unwrap();
        let mut s = s0;
        for _ in 0..100 {
            s = sppm_step_closed_form(&blocks, &s, 0.04).unwrap();
        }
        assert_eq!(
            rows[7].final_distance,
            g.distance_to_equilibrium(&s).unwrap()
        );
    }

    #[test]
    fn analytic_cauchy_table_respects_bound() {
        let c = cfg("kind = cauchy\ngame = paper-bilinear-scalar\nadam_eta = 0.001\ngp_eta = 0.01\nT = 100\n");
        let rows = cauchy_table(&c).unwrap();
        assert_eq!(rows.len(), 10);
        let (adam, gp) = rows.split_at(5);
        for w in gp.windows(2) {
            assert!(w[1].mean_gap < w[0].mean_gap, "{rows:#?}");
        }
        // normalized steps on a scalar game collapse the deep levels to exact zeros
        for w in adam.windows(2) {
            assert!(
                w[1].mean_gap < w[0].mean_gap || w[1].mean_gap == 0.0,
                "{rows:#?}"
            );
        }
        for r in gp {
            assert!(r.mean_gap <= r.mean_bound.unwrap() * (1.0 + 1e-9), "{r:?}");
        }
        assert!(adam.iter().all(|r| r.mean_bound.is_none()));
    }

    #[test]
    fn trajectory_dump_eg_spirals_in() {
        let c =
            cfg("kind = trajectory\ngame = paper-bilinear-scalar\nalg = eg\neta = 0.01\nT = 200\n");
        let d = trajectory_dump(&c).unwrap();
        for w in d.distances.windows(2) {
            assert!(w[1] < w[0]);
        }
        // EG factor on a·xy: (1 − η²a²)² + η²a²
        let f: f64 = (1.0 - 0.01f64).powi(2) + 0.01;
        assert!((d.distances[1] / d.distances[0] - f).abs() < 1e-12);
    }

    #[test]
    fn lv6_beats_eg_and_chain_tracks_sppm() {
        let eg = trajectory_dump(&cfg(
            "kind = trajectory\ngame = paper-bilinear-scalar\nalg = eg\neta = 0.05\nT = 30\n",
        ))
        .unwrap();
        let lv6 = trajectory_dump(&cfg(
            "kind = trajectory\ngame = paper-bilinear-scalar\nalg = lv6\neta = 0.05\nT = 30\nreasoning = true\n",
        ))
        .unwrap();
        for t in 1..=30 {
            assert!(lv6.distances[t] < eg.distances[t], "t = {t}");
        }
        // frozen from an independent scalar recursion
        let golden = 0.30261094291141566;
        assert!(
            (lv6.distances[30] / golden - 1.0).abs() < 1e-12,
            "{}",
            lv6.distances[30]
        );

        let (g, _) = fixtures::bilinear_scalar(10.0).unwrap();
        let blocks = g.jacobian_blocks().unwrap();
        for (t, trace) in lv6.traces.iter().enumerate() {
            let s = &lv6.states[t];
            let next_sppm = sppm_step_closed_form(&blocks, s, 0.05).unwrap();
            let gap = trace.states[6].gap(&next_sppm);
            // geometric gap ratio ηL = 0.5 over six levels
            let dmax = certificates::delta_max(&g, s).unwrap();
            assert!(gap <= 0.05 * 0.5f64.powi(6) * dmax * 2.0, "t = {t}");
        }
        let csv = trajectory_csv(&lv6, &g).unwrap();
        assert_eq!(csv.lines().next(), Some("t,point,theta_1,phi_1,r"));
        assert_eq!(csv.lines().count(), 1 + 31 + 30 * 6);
    }

    #[test]
    fn certify_report_and_floats_round_trip() {
        let c =
            cfg("kind = certify\ngame = paper-bilinear-scalar\nalg = sppm\neta = 0.1\nT = 20\n");
        let csv = run_experiment(&c).unwrap();
        assert!(csv.starts_with("# bound: bilinear-sppm\nstep,measured_ratio,bound,ok\n"));
        assert!(!csv.contains(",false"));
        for x in [
            0.1,
            1.0 / 3.0,
            1e-300,
            0.009402117368483698,
            1e12,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn grid_output_is_deterministic() {
        let c = cfg("kind = grid\nalgs = sga, lead, lv3, alt-lv2, sppm-fp\netas = 0.05, 0.3\ncs = 1, 4\nT = 50\n");
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
    }
}
