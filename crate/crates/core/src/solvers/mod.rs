//! Solver methods behind a common interface.
//!
//! Every algorithm implements [`Method`] and is registered by name in a
//! [`MethodRegistry`], so the harness and CLI select variants at runtime:
//!
//! - `omb` — the batched optimistic method with variance reduction and
//!   snapshot momentum ([`omb::OmbMethod`]);
//! - `mirror-prox` — deterministic two-call extragradient in Bregman
//!   geometry ([`mirror_prox::MirrorProxMethod`]);
//! - `vr-mirror-prox` — double-loop variance-reduced mirror-prox baseline
//!   ([`vr_mirror_prox::VrMirrorProxMethod`]).

pub mod mirror_prox;
pub mod omb;
pub mod vr_mirror_prox;

pub use mirror_prox::MirrorProxMethod;
pub use omb::{OmbMethod, OmbState};
pub use vr_mirror_prox::VrMirrorProxMethod;

use crate::geometry::GeometryError;
use crate::problems::{GapProblem, LipschitzInfo, ProblemError};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("batch size {b} violates the feasibility bound {rule} (limit {bound})")]
    Feasibility {
        b: usize,
        bound: f64,
        rule: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zero oracle budget")]
    ZeroBudget,
    #[error("unknown method '{name}'; available: {available}")]
    UnknownMethod { name: String, available: String },
    #[error("epoch finalization called mid-epoch ({completed} of {expected} inner steps done)")]
    MidEpoch { completed: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// How batch indices are drawn each inner iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SchemeKind {
    #[default]
    Uniform,
    /// Probabilities proportional to coordinates of the current optimistic
    /// difference vector, redrawn every iteration.
    Importance,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self, SolverError> {
        match s {
            "uniform" => Ok(SchemeKind::Uniform),
            "importance" => Ok(SchemeKind::Importance),
            other => Err(SolverError::Config(format!(
                "unknown sampling scheme '{other}' (expected uniform or importance)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Uniform => "uniform",
            SchemeKind::Importance => "importance",
        }
    }
}

/// Which Lipschitz assumption drives the theoretical step size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoryVariant {
    /// Euclidean constants: eta from barL2 and L2, feasibility
    /// b <= sqrt(M) barL2 / L2.
    EuclideanLip,
    /// Dual-norm constant with the ln n geometry factor, feasibility
    /// b <= sqrt(M).
    DualNormLip,
}

impl TheoryVariant {
    pub fn parse(s: &str) -> Result<Self, SolverError> {
        match s {
            "cor1" => Ok(TheoryVariant::EuclideanLip),
            "cor2" => Ok(TheoryVariant::DualNormLip),
            other => Err(SolverError::Config(format!(
                "unknown theory variant '{other}' (expected cor1 or cor2)"
            ))),
        }
    }
}

/// Tuned solver parameters for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub eta: f64,
    pub gamma: f64,
    /// Recorded alongside gamma; the update rule itself never consults it.
    pub p: f64,
    pub b: usize,
    pub k_inner: usize,
    pub epochs: usize,
    pub seed: u64,
    pub scheme: SchemeKind,
    pub shared_batch: bool,
}

impl SolverConfig {
    pub fn validate(&self, m: usize) -> Result<(), SolverError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(SolverError::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(SolverError::Config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.b == 0 || self.b > m {
            return Err(SolverError::Config(format!(
                "batch size must lie in 1..={m}, got {}",
                self.b
            )));
        }
        if self.k_inner == 0 || self.epochs == 0 {
            return Err(SolverError::Config("K and S must be positive".into()));
        }
        Ok(())
    }
}

/// Step size, momentum and epoch length from the theoretical tuning.
///
/// K = round(M / 3b) clamped to at least 1 (one inner iteration costs three
/// component calls per sampled index), gamma = p = 1/K, and
///
/// - EuclideanLip: eta = min( sqrt(gamma b) / (eta_scale barL2), 1 / (8 L2) )
/// - DualNormLip:  eta = min( sqrt(gamma b) / (eta_scale L W), 1 / (8 L W) )
///   with W = sqrt(1 + C ln n).
///
/// `eta_scale` is the constant in the sqrt branch: 8 is the proof-backed
/// default, 2 the more aggressive published constant.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_params(
    m: usize,
    b: usize,
    lip: &LipschitzInfo,
    variant: TheoryVariant,
    c_const: f64,
    n: usize,
    epochs: usize,
    eta_scale: f64,
) -> Result<SolverConfig, SolverError> {
    if b == 0 {
        return Err(SolverError::Config("batch size must be at least 1".into()));
    }
    if m < 3 * b {
        return Err(SolverError::Config(format!(
            "theoretical tuning needs M >= 3b (M = {m}, b = {b})"
        )));
    }
    if eta_scale <= 0.0 {
        return Err(SolverError::Config("eta_scale must be positive".into()));
    }
    match variant {
        TheoryVariant::EuclideanLip => {
            if lip.l2 > 0.0 {
                let bound = (m as f64).sqrt() * lip.bar_l2 / lip.l2;
                if (b as f64) > bound {
                    return Err(SolverError::Feasibility {
                        b,
                        bound,
                        rule: "b <= sqrt(M) * barL2 / L2",
                    });
                }
            }
        }
        TheoryVariant::DualNormLip => {
            let bound = (m as f64).sqrt();
            if (b as f64) > bound {
                return Err(SolverError::Feasibility {
                    b,
                    bound,
                    rule: "b <= sqrt(M)",
                });
            }
        }
    }
    let k = ((m as f64 / (3.0 * b as f64)).round() as usize).max(1);
    let gamma = 1.0 / k as f64;
    let sqrt_gb = (gamma * b as f64).sqrt();
    let eta = match variant {
        TheoryVariant::EuclideanLip => {
            let stoch = if lip.bar_l2 > 0.0 {
                sqrt_gb / (eta_scale * lip.bar_l2)
            } else {
                f64::INFINITY
            };
            let det = if lip.l2 > 0.0 {
                1.0 / (8.0 * lip.l2)
            } else {
                f64::INFINITY
            };
            let eta = stoch.min(det);
            if eta.is_finite() {
                eta
            } else {
                1.0 // zero operator: any step works
            }
        }
        TheoryVariant::DualNormLip => {
            let omega = (1.0 + c_const * (n as f64).ln()).sqrt();
            if lip.l_dual > 0.0 {
                (sqrt_gb / (eta_scale * lip.l_dual * omega))
                    .min(1.0 / (8.0 * lip.l_dual * omega))
            } else {
                1.0
            }
        }
    };
    Ok(SolverConfig {
        eta,
        gamma,
        p: gamma,
        b,
        k_inner: k,
        epochs,
        seed: 0,
        scheme: SchemeKind::Uniform,
        shared_batch: false,
    })
}

/// One trace checkpoint: cumulative solver oracle calls, duality gap of the
/// running average, wall-clock seconds (0 when timing is off).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub oracle_calls: u64,
    pub gap: f64,
    pub elapsed_s: f64,
}

/// Outcome of one solver run: the gap trace, the averaged point, and exact
/// oracle accounting, keyed by the configuration fingerprint columns.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub method: String,
    pub matrix: String,
    pub n: usize,
    pub b: usize,
    pub seed: u64,
    pub eta: f64,
    pub gamma: f64,
    pub trace: Vec<TracePoint>,
    pub final_point: Vec<f64>,
    pub total_calls: u64,
    pub inner_steps: u64,
    pub refreshes: u64,
    /// Oracle units spent on gap evaluations, metered separately and never
    /// counted against the solver budget.
    pub gap_meter_units: u64,
    pub iterate_log: Option<Vec<Vec<f64>>>,
}

impl RunRecord {
    pub fn final_gap(&self) -> f64 {
        self.trace.last().map(|t| t.gap).unwrap_or(f64::NAN)
    }

    /// First checkpoint at which the gap is at or below `target`.
    pub fn calls_to_reach(&self, target: f64) -> Option<u64> {
        self.trace
            .iter()
            .find(|t| t.gap <= target)
            .map(|t| t.oracle_calls)
    }
}

/// Run-time options shared by every method.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Solver oracle budget in component-call units.
    pub budget: u64,
    /// Gap checkpoint cadence in oracle units.
    pub gap_every: u64,
    pub seed: u64,
    /// Retain every produced iterate (small diagnostic runs only).
    pub log_iterates: bool,
    /// Record wall-clock seconds per checkpoint. Off by default so identical
    /// reruns produce byte-identical CSV.
    pub timing: bool,
}

impl RunOptions {
    pub fn new(budget: u64, gap_every: u64, seed: u64) -> Self {
        RunOptions {
            budget,
            gap_every,
            seed,
            log_iterates: false,
            timing: false,
        }
    }
}

/// Shared knob bag from which each registered method resolves its own
/// parameters; knobs a method does not use are ignored by it.
#[derive(Clone, Debug)]
pub struct MethodParams {
    pub b: usize,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub theory: Option<TheoryVariant>,
    /// Constant in the sqrt branch of the theoretical step (8 or 2).
    pub eta_scale: f64,
    /// C in the (1 + C ln n) geometry factor.
    pub c_const: f64,
    pub scheme: SchemeKind,
    pub shared_batch: bool,
    /// Epoch cap; runs also stop when the budget is exhausted.
    pub epochs: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            b: 1,
            eta: None,
            gamma: None,
            theory: None,
            eta_scale: 8.0,
            c_const: 1.0,
            scheme: SchemeKind::Uniform,
            shared_batch: false,
            epochs: usize::MAX / 2,
        }
    }
}

/// An interchangeable solver strategy.
pub trait Method: Sync {
    fn name(&self) -> &str;
    fn run(&self, problem: &dyn GapProblem, opts: &RunOptions) -> Result<RunRecord, SolverError>;
}

type MethodBuilder = fn(&MethodParams) -> Result<Box<dyn Method>, SolverError>;

/// Name-to-builder registry of solver strategies.
pub struct MethodRegistry {
    builders: BTreeMap<String, MethodBuilder>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        MethodRegistry {
            builders: BTreeMap::new(),
        }
    }

    /// Registry with the built-in methods.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("omb", |p| Ok(Box::new(OmbMethod::new(p.clone()))));
        r.register("mirror-prox", |p| {
            Ok(Box::new(MirrorProxMethod::new(p.clone())))
        });
        r.register("vr-mirror-prox", |p| {
            Ok(Box::new(VrMirrorProxMethod::new(p.clone())))
        });
        r
    }

    pub fn register(&mut self, name: &str, builder: MethodBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<String> {
        self.builders.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, params: &MethodParams) -> Result<Box<dyn Method>, SolverError> {
        match self.builders.get(name) {
            Some(b) => b(params),
            None => Err(SolverError::UnknownMethod {
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

/// Shared trace bookkeeping: checkpoints every `gap_every` units plus the
/// initial and final states, with the gap meter kept out of solver budgets.
pub(crate) struct TraceRecorder {
    trace: Vec<TracePoint>,
    next_checkpoint: u64,
    gap_every: u64,
    gap_meter_units: u64,
    timing: bool,
    started: std::time::Instant,
}

impl TraceRecorder {
    pub fn new(gap_every: u64, timing: bool) -> Self {
        TraceRecorder {
            trace: Vec::new(),
            next_checkpoint: 0,
            gap_every: gap_every.max(1),
            gap_meter_units: 0,
            timing,
            started: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        if self.timing {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn record(&mut self, problem: &dyn GapProblem, calls: u64, point: &[f64]) {
        let gap = problem.gap(point);
        self.gap_meter_units += problem.components() as u64;
        self.trace.push(TracePoint {
            oracle_calls: calls,
            gap,
            elapsed_s: self.elapsed(),
        });
    }

    /// Record the starting state at zero calls.
    pub fn record_initial(&mut self, problem: &dyn GapProblem, point: &[f64]) {
        self.record(problem, 0, point);
        self.next_checkpoint = self.gap_every;
    }

    /// Record a checkpoint once `calls` has crossed the next boundary.
    pub fn tick(&mut self, problem: &dyn GapProblem, calls: u64, point: &[f64]) {
        if calls >= self.next_checkpoint {
            self.record(problem, calls, point);
            while self.next_checkpoint <= calls {
                self.next_checkpoint += self.gap_every;
            }
        }
    }

    /// Record the final state if it sits past the last checkpoint.
    pub fn finish(&mut self, problem: &dyn GapProblem, calls: u64, point: &[f64]) {
        if self.trace.last().map(|t| t.oracle_calls) != Some(calls) {
            self.record(problem, calls, point);
        }
    }

    pub fn into_parts(self) -> (Vec<TracePoint>, u64) {
        (self.trace, self.gap_meter_units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lip(l2: f64, bar_l2: f64, l_dual: f64) -> LipschitzInfo {
        LipschitzInfo { l2, bar_l2, l_dual }
    }

    #[test]
    fn theory_cor1_epoch_length_and_momentum() {
        let cfg = theoretical_params(
            300,
            1,
            &lip(10.0, 10.0, 1.0),
            TheoryVariant::EuclideanLip,
            1.0,
            300,
            10,
            8.0,
        )
        .unwrap();
        assert_eq!(cfg.k_inner, 100);
        assert!((cfg.gamma - 0.01).abs() < 1e-15);
        assert_eq!(cfg.p, cfg.gamma);
    }

    #[test]
    fn theory_cor1_eta_value() {
        // eta = min(sqrt(0.01 * 1) / (8 * 10), 1 / (8 * 10)) = 1/800
        let cfg = theoretical_params(
            300,
            1,
            &lip(10.0, 10.0, 1.0),
            TheoryVariant::EuclideanLip,
            1.0,
            300,
            10,
            8.0,
        )
        .unwrap();
        assert!((cfg.eta - 1.0 / 800.0).abs() < 1e-15);
    }

    #[test]
    fn theory_cor1_feasibility_bound() {
        let l = lip(10.0, 10.0, 1.0);
        // bound = sqrt(300) * 1 ~ 17.32; b = 18 must fail with the bound attached
        match theoretical_params(300, 18, &l, TheoryVariant::EuclideanLip, 1.0, 300, 1, 8.0) {
            Err(SolverError::Feasibility { b, bound, rule }) => {
                assert_eq!(b, 18);
                assert!((bound - (300.0f64).sqrt()).abs() < 1e-9);
                assert!(rule.contains("barL2"));
            }
            other => panic!("expected feasibility error, got {other:?}"),
        }
    }

    #[test]
    fn theory_cor2_feasibility_and_eta() {
        let l = lip(10.0, 10.0, 2.0);
        match theoretical_params(300, 18, &l, TheoryVariant::DualNormLip, 1.0, 300, 1, 8.0) {
            Err(SolverError::Feasibility { bound, rule, .. }) => {
                assert!((bound - (300.0f64).sqrt()).abs() < 1e-12);
                assert_eq!(rule, "b <= sqrt(M)");
            }
            other => panic!("expected feasibility error, got {other:?}"),
        }
        let cfg =
            theoretical_params(300, 1, &l, TheoryVariant::DualNormLip, 1.0, 300, 1, 8.0).unwrap();
        let omega = (1.0 + (300.0f64).ln()).sqrt();
        let expected = ((0.01f64).sqrt() / (8.0 * 2.0 * omega)).min(1.0 / (8.0 * 2.0 * omega));
        assert!((cfg.eta - expected).abs() < 1e-15);
    }

    #[test]
    fn theory_corollary_constant_is_exposed() {
        let l = lip(10.0, 10.0, 1.0);
        let safe =
            theoretical_params(300, 1, &l, TheoryVariant::EuclideanLip, 1.0, 300, 1, 8.0).unwrap();
        let aggressive =
            theoretical_params(300, 1, &l, TheoryVariant::EuclideanLip, 1.0, 300, 1, 2.0).unwrap();
        assert!((aggressive.eta - 4.0 * safe.eta).abs() < 1e-15);
    }

    #[test]
    fn theory_rejects_tiny_m() {
        let l = lip(1.0, 1.0, 1.0);
        assert!(matches!(
            theoretical_params(5, 2, &l, TheoryVariant::EuclideanLip, 1.0, 5, 1, 8.0),
            Err(SolverError::Config(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = theoretical_params(
            300,
            1,
            &lip(10.0, 10.0, 1.0),
            TheoryVariant::EuclideanLip,
            1.0,
            300,
            10,
            8.0,
        )
        .unwrap();
        assert!(cfg.validate(300).is_ok());
        cfg.b = 301;
        assert!(cfg.validate(300).is_err());
    }

    #[test]
    fn registry_builds_builtins_and_rejects_unknown() {
        let reg = MethodRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["mirror-prox", "omb", "vr-mirror-prox"]);
        let params = MethodParams {
            eta: Some(0.1),
            ..MethodParams::default()
        };
        for name in reg.names() {
            let m = reg.build(&name, &params).unwrap();
            assert_eq!(m.name(), name);
        }
        match reg.build("sgd", &params) {
            Err(SolverError::UnknownMethod { available, .. }) => {
                assert!(available.contains("omb"));
            }
            Err(e) => panic!("expected unknown-method error, got {e}"),
            Ok(_) => panic!("expected unknown-method error, got a method"),
        }
    }
}
