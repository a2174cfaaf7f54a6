//! The lemma pipeline: constants, point placement, the two deformation
//! processes, extraction of the polygon Q and verification of every labelled
//! property, wrapped in an ε0 restart loop.

pub mod config;
pub mod constants;
pub mod eval;
pub mod extract;
pub mod first;
pub mod ledger;
pub mod placement;
pub mod second;
pub mod verify;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, QuadratureOptions, C};
use crate::deformations::DeformError;
use crate::planar::{Membership, PlanarError, PlanarRegion, PolygonCurve};
use crate::weierstrass::{WeierstrassError, WeierstrassField};

pub use config::{LemmaConfig, PolygonSpec, SeedSpec};
pub use constants::{choose_constants, Constants};
pub use ledger::{CaseMargin, Diagnostic, LedgerEntry, PropertyLedger, Status, Worst};

use eval::FieldEvaluator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LemmaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no λ satisfies 1.a")]
    NoFeasibleLambda,
    #[error("no ε0 satisfies every chain")]
    NoFeasibleEps0,
    #[error("placement failed on {condition}: {detail}")]
    PlacementFailed { condition: String, detail: String },
    #[error("process failed on {label} at i = {index}: {detail}")]
    ProcessFailed { label: String, index: usize, detail: String },
    #[error("a_{index} underflows: t = {t:e} below the floor {floor:e}")]
    Underflow { index: usize, t: f64, floor: f64 },
    #[error("no admissible path reaches {z}")]
    Unreachable { z: C },
    #[error("no level band on ray at angle {angle}: {detail}")]
    NoLevelBand { angle: f64, detail: String },
    #[error("ε0 restart budget of {restarts} exhausted; last failure: {last}")]
    RestartsExhausted { restarts: usize, last: String },
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

impl LemmaError {
    /// Failures cured by a smaller ε0. Underflow and the point budget only
    /// get worse as ε0 shrinks, so they end the run.
    pub fn restartable(&self) -> bool {
        match self {
            LemmaError::ProcessFailed { .. } => true,
            LemmaError::PlacementFailed { condition, .. } => condition != "point budget",
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LemmaError::InvalidConfig(_) => "invalid_config",
            LemmaError::NoFeasibleLambda => "no_feasible_lambda",
            LemmaError::NoFeasibleEps0 => "no_feasible_eps0",
            LemmaError::PlacementFailed { .. } => "placement_failed",
            LemmaError::ProcessFailed { .. } => "process_failed",
            LemmaError::Underflow { .. } => "underflow",
            LemmaError::Unreachable { .. } => "unreachable",
            LemmaError::NoLevelBand { .. } => "no_level_band",
            LemmaError::RestartsExhausted { .. } => "restarts_exhausted",
            LemmaError::Deform(_) => "deformation",
            LemmaError::Weierstrass(_) => "weierstrass",
            LemmaError::Planar(_) => "planar",
            LemmaError::Complex(_) => "complex",
        }
    }
}

fn d_per_stratum() -> usize {
    2000
}
fn d_ring() -> usize {
    32
}
fn d_boundary() -> usize {
    512
}
fn d_rays() -> usize {
    720
}
fn d_fit() -> usize {
    200
}
fn d_check() -> usize {
    800
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    #[serde(default = "d_per_stratum")]
    pub per_stratum: usize,
    /// Points on each circle used for maximum-principle checks.
    #[serde(default = "d_ring")]
    pub ring: usize,
    /// Target number of samples along a boundary curve.
    #[serde(default = "d_boundary")]
    pub boundary: usize,
    /// Rays of the level-band sweep.
    #[serde(default = "d_rays")]
    pub rays: usize,
    /// Runge fit samples per compact.
    #[serde(default = "d_fit")]
    pub fit: usize,
    /// Runge validation samples per compact.
    #[serde(default = "d_check")]
    pub check: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            per_stratum: d_per_stratum(),
            ring: d_ring(),
            boundary: d_boundary(),
            rays: d_rays(),
            fit: d_fit(),
            check: d_check(),
        }
    }
}

fn d_restarts() -> usize {
    20
}
fn d_delta() -> usize {
    60
}
fn d_beta() -> usize {
    40
}
fn d_xi() -> usize {
    40
}
fn d_nu() -> usize {
    30
}
fn d_k() -> usize {
    80
}
fn d_points() -> usize {
    1_000_000
}
fn d_degree() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    #[serde(default = "d_restarts")]
    pub restarts: usize,
    #[serde(default = "d_delta")]
    pub delta_halvings: usize,
    #[serde(default = "d_beta")]
    pub beta_halvings: usize,
    #[serde(default = "d_xi")]
    pub xi_halvings: usize,
    #[serde(default = "d_nu")]
    pub nu_halvings: usize,
    #[serde(default = "d_k")]
    pub k_halvings: usize,
    #[serde(default = "d_points")]
    pub max_points: usize,
    #[serde(default = "d_degree")]
    pub max_degree: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            restarts: d_restarts(),
            delta_halvings: d_delta(),
            beta_halvings: d_beta(),
            xi_halvings: d_xi(),
            nu_halvings: d_nu(),
            k_halvings: d_k(),
            max_points: d_points(),
            max_degree: d_degree(),
        }
    }
}

fn d_true() -> bool {
    true
}
fn d_tol() -> f64 {
    1e-11
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaOptions {
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub rng_seed: u64,
    /// When false the seed is returned unchanged (Y = X, Ω = O): a negative
    /// control for the conclusions.
    #[serde(default = "d_true")]
    pub deformations: bool,
    /// Check r < ‖X‖ < r + s/2 on O ∖ Int P before running.
    #[serde(default = "d_true")]
    pub check_hypothesis: bool,
    /// Start ε0 here instead of the value from the chains.
    #[serde(default)]
    pub eps0_override: Option<f64>,
    /// Absolute quadrature tolerance.
    #[serde(default = "d_tol")]
    pub quad_tol: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        LemmaOptions {
            sampling: Sampling::default(),
            budgets: Budgets::default(),
            rng_seed: 0,
            deformations: true,
            check_hypothesis: true,
            eps0_override: None,
            quad_tol: d_tol(),
        }
    }
}

/// Inputs of one lemma run.
#[derive(Debug, Clone)]
pub struct LemmaProblem {
    pub x: WeierstrassField,
    pub p: PolygonCurve,
    pub o: PlanarRegion,
    pub r: f64,
    pub s: f64,
    pub b1: f64,
    pub b2: f64,
    pub options: LemmaOptions,
}

impl LemmaProblem {
    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions::with_tol(self.options.quad_tol)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.options.rng_seed)
    }

    /// Worst slack of `r < ‖X‖ < r + s/2` over random samples of O ∖ Int P
    /// and the boundary of P.
    pub fn hypothesis_margin(&self) -> Result<Worst, LemmaError> {
        let inner = PlanarRegion::Polygon(self.p.as_simple().clone());
        let band = PlanarRegion::difference(self.o.clone(), inner);
        let mut rng = self.rng();
        let mut pts = band.sample_points(self.options.sampling.per_stratum, &mut rng);
        pts.extend(self.p.boundary_samples(self.p.perimeter() / self.options.sampling.boundary as f64));
        let mut ev = FieldEvaluator::new(self.x.tape(), self.quadrature(), self.o.clone());
        let (bv, _) = eval::march_boundary(&ev.tape, self.p.vertices(), &self.o, &ev.opts)?;
        ev.add_anchors(self.p.vertices(), &bv);
        let mut w = Worst::default();
        for z in pts {
            let x = ev.at(z)?.norm();
            w.push((x - self.r).min(self.r + 0.5 * self.s - x), z);
        }
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), LemmaError> {
        if !(self.s > 0.0 && self.s < self.r / 100.0) {
            return Err(LemmaError::InvalidConfig(format!("need 0 < s < r/100, got r = {}, s = {}", self.r, self.s)));
        }
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return Err(LemmaError::InvalidConfig("b1 and b2 must be positive".into()));
        }
        if self.o.contains(C::new(0.0, 0.0)) != Membership::Inside {
            return Err(LemmaError::InvalidConfig("0 must lie inside O".into()));
        }
        if self.options.check_hypothesis {
            let w = self.hypothesis_margin()?;
            if !w.passed() {
                return Err(LemmaError::InvalidConfig(format!(
                    "r < ‖X‖ < r + s/2 fails on O ∖ Int P at {:?} (margin {:e})",
                    w.witness, w.margin
                )));
            }
        }
        Ok(())
    }
}

/// One attempt of the restart loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub eps0: f64,
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub error: Option<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&LemmaError> for ErrorRecord {
    fn from(e: &LemmaError) -> Self {
        ErrorRecord {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Verified,
    Violated,
    ConstructionFailed,
    InvalidInput,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Verified => 0,
            RunStatus::Violated => 2,
            RunStatus::ConstructionFailed => 3,
            RunStatus::InvalidInput => 4,
        }
    }
}

/// Everything a run reports, whether or not it finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub r: f64,
    pub s: f64,
    pub b1: f64,
    pub b2: f64,
    pub constants: Option<Constants>,
    pub status: RunStatus,
    pub error: Option<ErrorRecord>,
    pub attempts: Vec<Attempt>,
    pub deformations: bool,
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub xi: Option<f64>,
    pub ledger: PropertyLedger,
    pub diagnostics: Vec<Diagnostic>,
    /// Labels a finished run should carry but does not (or carries as
    /// skipped).
    pub missing: Vec<(String, Option<usize>)>,
}

/// Outputs of a finished run.
#[derive(Debug, Clone)]
pub struct LemmaOutput {
    pub y: WeierstrassField,
    /// The region U = Ω on which Y is defined.
    pub omega: PlanarRegion,
    pub q: PolygonCurve,
    /// `Y` at the vertices of Q.
    pub y_on_q: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct LemmaRun {
    pub report: LemmaReport,
    pub output: Option<LemmaOutput>,
}

impl LemmaRun {
    pub fn exit_code(&self) -> i32 {
        self.report.status.exit_code()
    }
}

struct Finished {
    output: LemmaOutput,
    ledger: PropertyLedger,
    diagnostics: Vec<Diagnostic>,
    n: usize,
    delta: Option<f64>,
    xi: Option<f64>,
}

fn attempt(problem: &LemmaProblem, constants: &Constants) -> Result<Finished, (LemmaError, Option<usize>, Option<f64>)> {
    let pl = placement::place_points(problem, constants).map_err(|e| (e, None, None))?;
    let (n, delta) = (pl.n(), pl.delta);
    let wrap = |e: LemmaError| (e, Some(n), Some(delta));
    let first = first::first_process(problem, constants, &pl).map_err(wrap)?;
    let second = second::second_process(problem, constants, &pl, &first).map_err(wrap)?;
    let domain = first.omega.region.clone();
    let y = second.y.with_domain(domain.clone());
    let anchors = (first.boundary.clone(), second.y_boundary.clone());
    let q = extract::extract_polygon_q(problem, &y, &domain, problem.r + problem.s, problem.b2)
        .map_err(wrap)?;
    let mut ledger = PropertyLedger::default();
    let mut diagnostics = pl.diagnostics.clone();
    for e in first.ledger.iter().chain(&second.ledger) {
        ledger.push(e.clone());
    }
    diagnostics.extend(first.diagnostics.iter().cloned());
    diagnostics.extend(second.diagnostics.iter().cloned());
    let strata = verify::Strata {
        disks: pl.points.iter().map(|p| (*p, pl.delta)).collect(),
        tubes: second.tubes.clone(),
    };
    let conclusions = verify::verify_lemma(problem, constants, &y, &q, &strata, Some(&anchors)).map_err(wrap)?;
    for e in conclusions.entries {
        ledger.push(e);
    }
    diagnostics.extend(conclusions.diagnostics);
    Ok(Finished {
        output: LemmaOutput {
            y,
            omega: domain,
            y_on_q: q.values.clone(),
            q: q.polygon,
        },
        ledger,
        diagnostics,
        n,
        delta: Some(delta),
        xi: Some(second.xi),
    })
}

/// The negative control: no deformation, Y = X on Ω = O.
fn undeformed(problem: &LemmaProblem, constants: &Constants) -> Result<Finished, LemmaError> {
    let y = problem.x.with_domain(problem.o.clone());
    let mut diagnostics = Vec::new();
    let q = match extract::extract_polygon_q(problem, &y, &problem.o, problem.r + problem.s, problem.b2) {
        Ok(q) => q,
        Err(LemmaError::NoLevelBand { angle, detail }) => {
            // No band to trace: fall back to a polygon just inside ∂O so that
            // (c) is measured rather than assumed.
            diagnostics.push(Diagnostic::flag("level band", None, false, -1.0, 0));
            let _ = (angle, detail);
            extract::fallback_polygon(problem, &y, &problem.o)?
        }
        Err(e) => return Err(e),
    };
    let strata = verify::Strata::default();
    let conclusions = verify::verify_lemma(problem, constants, &y, &q, &strata, None)?;
    let mut ledger = PropertyLedger::default();
    for e in conclusions.entries {
        ledger.push(e);
    }
    diagnostics.extend(conclusions.diagnostics);
    Ok(Finished {
        output: LemmaOutput {
            y,
            omega: problem.o.clone(),
            y_on_q: q.values.clone(),
            q: q.polygon,
        },
        ledger,
        diagnostics,
        n: 0,
        delta: None,
        xi: None,
    })
}

/// Run the lemma with the ε0 restart loop. Always returns a report; the
/// output is present only when the construction finished.
pub fn run_lemma(problem: &LemmaProblem) -> LemmaRun {
    let mut report = LemmaReport {
        r: problem.r,
        s: problem.s,
        b1: problem.b1,
        b2: problem.b2,
        constants: None,
        status: RunStatus::ConstructionFailed,
        error: None,
        attempts: Vec::new(),
        deformations: problem.options.deformations,
        n: None,
        delta: None,
        xi: None,
        ledger: PropertyLedger::default(),
        diagnostics: Vec::new(),
        missing: Vec::new(),
    };
    let fail = |mut report: LemmaReport, e: &LemmaError, status: RunStatus| {
        report.status = status;
        report.error = Some(e.into());
        LemmaRun { report, output: None }
    };
    if let Err(e) = problem.validate() {
        let status = match e {
            LemmaError::InvalidConfig(_) => RunStatus::InvalidInput,
            _ => RunStatus::ConstructionFailed,
        };
        return fail(report, &e, status);
    }
    let mut constants = match choose_constants(problem.r, problem.s, problem.b1, problem.b2) {
        Ok(c) => c,
        Err(e) => {
            let status = match e {
                LemmaError::InvalidConfig(_) => RunStatus::InvalidInput,
                _ => RunStatus::ConstructionFailed,
            };
            return fail(report, &e, status);
        }
    };
    if let Some(e0) = problem.options.eps0_override {
        if !(e0 > 0.0 && e0 < 1.0) {
            return fail(report, &LemmaError::InvalidConfig(format!("ε0 override {e0} not in (0, 1)")), RunStatus::InvalidInput);
        }
        constants.eps0 = e0;
    }
    report.constants = Some(constants);

    if !problem.options.deformations {
        return match undeformed(problem, &constants) {
            Ok(f) => finish(report, f),
            Err(e) => fail(report, &e, RunStatus::ConstructionFailed),
        };
    }

    let mut restarts = 0;
    loop {
        match attempt(problem, &constants) {
            Ok(f) => {
                report.attempts.push(Attempt {
                    eps0: constants.eps0,
                    n: Some(f.n),
                    delta: f.delta,
                    error: None,
                });
                report.constants = Some(constants);
                return finish(report, f);
            }
            Err((e, n, delta)) => {
                report.attempts.push(Attempt {
                    eps0: constants.eps0,
                    n,
                    delta,
                    error: Some((&e).into()),
                });
                report.n = n;
                report.delta = delta;
                if !e.restartable() {
                    return fail(report, &e, RunStatus::ConstructionFailed);
                }
                if restarts >= problem.options.budgets.restarts {
                    let e = LemmaError::RestartsExhausted {
                        restarts,
                        last: e.to_string(),
                    };
                    return fail(report, &e, RunStatus::ConstructionFailed);
                }
                restarts += 1;
                constants.eps0 *= 0.5;
            }
        }
    }
}

fn finish(mut report: LemmaReport, f: Finished) -> LemmaRun {
    report.n = Some(f.n);
    report.delta = f.delta;
    report.xi = f.xi;
    report.missing = if report.deformations { f.ledger.incomplete(f.n) } else { Vec::new() };
    report.status = if f.ledger.any_violated() || !report.missing.is_empty() {
        RunStatus::Violated
    } else {
        RunStatus::Verified
    };
    report.ledger = f.ledger;
    report.diagnostics = f.diagnostics;
    LemmaRun {
        report,
        output: Some(f.output),
    }
}
