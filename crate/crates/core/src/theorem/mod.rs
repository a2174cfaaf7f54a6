//! The stage recursion: a sequence of fields X_n and polygons P_n with the
//! properties (T1)–(T5), plus properness and limit-metric diagnostics over
//! the finished stages.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{QuadratureOptions, C};
use crate::lemma::{
    run_lemma, ErrorRecord, LedgerEntry, LemmaError, LemmaOptions, LemmaProblem, LemmaReport, PropertyLedger,
    RunStatus, Status, Worst,
};
use crate::planar::{Disk, PlanarError, PlanarRegion, PolygonCurve};
use crate::weierstrass::{metric, Immersion, WeierstrassError, WeierstrassField};

/// Radius of the disk that contains every polygon.
pub const OUTER_RADIUS: f64 = 3.0;

/// Smallest r_1 accepted in conforming mode is anything above this.
pub const CONFORMING_R1: f64 = 301.0;

#[derive(Debug, Error)]
pub enum TheoremError {
    #[error("invalid theorem config: {0}")]
    InvalidConfig(String),
    #[error("stage {stage}: no admissible O around P_{prev}: {detail}", prev = stage - 1)]
    NoAdmissibleDomain { stage: usize, detail: String },
    #[error("stage {stage}: lemma run ended with status {status:?}: {message}")]
    LemmaFailed {
        stage: usize,
        status: RunStatus,
        message: String,
    },
    #[error("stage {stage}: metric ratio condition never held after {shrinks} shrinks of b1")]
    MetricSelectionFailed { stage: usize, shrinks: usize },
    #[error("no stage index up to {last} clears the radius {radius}; run more stages")]
    NotYetProper { radius: f64, last: usize },
    #[error(transparent)]
    Lemma(#[from] LemmaError),
    #[error(transparent)]
    Weierstrass(#[from] WeierstrassError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
}

impl TheoremError {
    pub fn status(&self) -> RunStatus {
        match self {
            TheoremError::InvalidConfig(_) => RunStatus::InvalidInput,
            TheoremError::LemmaFailed { status, .. } if *status == RunStatus::Violated => RunStatus::Violated,
            _ => RunStatus::ConstructionFailed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TheoremError::InvalidConfig(_) => "invalid_config",
            TheoremError::NoAdmissibleDomain { .. } => "no_admissible_domain",
            TheoremError::LemmaFailed { .. } => "lemma_failed",
            TheoremError::MetricSelectionFailed { .. } => "metric_selection_failed",
            TheoremError::NotYetProper { .. } => "not_yet_proper",
            TheoremError::Lemma(e) => e.kind(),
            TheoremError::Weierstrass(_) => "weierstrass",
            TheoremError::Planar(_) => "planar",
        }
    }
}

impl From<&TheoremError> for ErrorRecord {
    fn from(e: &TheoremError) -> Self {
        ErrorRecord {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// `α_k = (½)^{2^{−k}}`, whose partial products `(½)^{1 − 2^{−j}}` decrease
/// to exactly ½.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule;

impl AlphaSchedule {
    pub fn alpha(&self, k: usize) -> f64 {
        0.5f64.powf(0.5f64.powi(k as i32))
    }

    /// `∏_{k=1}^{j} α_k`.
    pub fn partial_product(&self, j: usize) -> f64 {
        0.5f64.powf(1.0 - 0.5f64.powi(j as i32))
    }
}

/// `r_n` from `r_1` by `r_k = r_{k−1} + 2/k`.
pub fn radius(r1: f64, n: usize) -> f64 {
    (2..=n).fold(r1, |r, k| r + 2.0 / k as f64)
}

/// Lemma data of the step producing stage n from stage n − 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepData {
    pub n: usize,
    pub r: f64,
    pub s: f64,
    pub b2: f64,
    /// `r + s − r_n`, zero up to rounding.
    pub level_defect: f64,
    /// `r/2 − (r_{n−1}/2 − 1/(2n))`: the (d) floor against the (T3) floor.
    pub floor_defect: f64,
}

pub fn step_data(r1: f64, n: usize) -> StepData {
    let prev = radius(r1, n - 1);
    let nf = n as f64;
    let r = prev - 1.0 / nf;
    let s = 3.0 / nf;
    StepData {
        n,
        r,
        s,
        b2: 1.0 / (2.0 * (nf + 1.0).powi(2)),
        level_defect: r + s - radius(r1, n),
        floor_defect: 0.5 * r - (0.5 * prev - 0.5 / nf),
    }
}

/// `b1 = ε̂_k = 1/(n²·2^k)`.
pub fn eps_hat(n: usize, k: usize) -> f64 {
    1.0 / ((n * n) as f64 * 2f64.powi(k as i32))
}

/// `r_{k−1}/2 − 1/(2k) − 2`: a ball of radius below this misses the image of
/// the annulus Int P_k ∖ Int P_{k−1} in the limit.
pub fn properness_floor(r1: f64, k: usize) -> f64 {
    0.5 * radius(r1, k - 1) - 0.5 / k as f64 - 2.0
}

fn d_stages() -> usize {
    3
}
fn d_sides() -> usize {
    128
}
fn d_samples() -> usize {
    2000
}
fn d_shrinks() -> usize {
    10
}
fn d_dilation() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConfig {
    pub r1: f64,
    #[serde(default = "d_stages")]
    pub stages: usize,
    /// Sides of the regular polygon P_1.
    #[serde(default = "d_sides")]
    pub polygon_sides: usize,
    /// Samples per (T) check and per diagnostic.
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Shrinks of b1 before the metric selection gives up.
    #[serde(default = "d_shrinks")]
    pub eps_hat_shrinks: usize,
    /// Relative step when dilating P_{n−1} into O.
    #[serde(default = "d_dilation")]
    pub dilation_step: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub lemma: LemmaOptions,
}

impl TheoremConfig {
    pub fn from_json(text: &str) -> Result<Self, TheoremError> {
        serde_json::from_str(text).map_err(|e| TheoremError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), TheoremError> {
        if !(self.r1 > 0.0 && self.r1.is_finite()) {
            return Err(TheoremError::InvalidConfig(format!("r1 must be positive, got {}", self.r1)));
        }
        if self.stages == 0 {
            return Err(TheoremError::InvalidConfig("stages must be at least 1".into()));
        }
        if self.polygon_sides < 3 {
            return Err(TheoremError::InvalidConfig("polygon_sides must be at least 3".into()));
        }
        if !(self.dilation_step > 0.0) {
            return Err(TheoremError::InvalidConfig("dilation_step must be positive".into()));
        }
        Ok(())
    }

    pub fn conforming(&self) -> bool {
        self.r1 > CONFORMING_R1
    }

    fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions::with_tol(self.lemma.quad_tol)
    }
}

/// Flag carried by every report of a run whose r_1 does not exceed 301.
pub const NONCONFORMING_FLAG: &str = "nonconforming constants: r_1 <= 301 (desk mode)";
/// Flag carried by runs with r_1 > 301.
pub const CONFORMING_FLAG: &str = "conforming constants: r_1 > 301";

pub fn mode_flag(r1: f64) -> &'static str {
    if r1 > CONFORMING_R1 {
        CONFORMING_FLAG
    } else {
        NONCONFORMING_FLAG
    }
}

/// Lemma inputs used for one stage, kept for the archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCall {
    pub r: f64,
    pub s: f64,
    pub b1: f64,
    pub b2: f64,
    pub o: PlanarRegion,
    pub options: LemmaOptions,
}

#[derive(Debug, Clone)]
pub struct StageRecord {
    pub index: usize,
    pub field: WeierstrassField,
    pub polygon: PolygonCurve,
    pub radius: f64,
    pub alpha: f64,
    pub ledger: PropertyLedger,
    pub lemma: Option<LemmaCall>,
}

fn sample_rng(config: &TheoremConfig, stage: usize, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.rng_seed ^ ((stage as u64) << 32) ^ salt)
}

/// Circumradius of a regular N-gon whose vertex and edge-midpoint radii sit
/// symmetrically about 1, so `|‖X_1‖ − r_1|` is at most
/// `r_1·(1 − cos(π/N))/(1 + cos(π/N))` on P_1.
pub fn centered_circumradius(sides: usize) -> f64 {
    2.0 / (1.0 + (PI / sides as f64).cos())
}

fn outer_disk() -> PlanarRegion {
    PlanarRegion::Disk(Disk::new(C::new(0.0, 0.0), OUTER_RADIUS).expect("positive radius"))
}

fn polygon_in_outer(p: &PolygonCurve) -> (bool, Worst) {
    let mut w = Worst::default();
    for &v in p.vertices() {
        w.push(OUTER_RADIUS - v.norm(), v);
    }
    (w.passed(), w)
}

/// `X_1 = r_1·(u, v, 0)` with P_1 a regular polygon centred on the unit
/// circle, and the (T1)_1, (T2)_1 checks. (T3)–(T5) are vacuous at n = 1.
pub fn init_stage(config: &TheoremConfig) -> Result<StageRecord, TheoremError> {
    config.validate()?;
    let r1 = config.r1;
    let field = WeierstrassField::plane(r1, outer_disk());
    let polygon = PolygonCurve::regular(centered_circumradius(config.polygon_sides), config.polygon_sides, 0.0)?;
    let mut ledger = PropertyLedger::default();
    let (inside, w1) = polygon_in_outer(&polygon);
    ledger.push(
        LedgerEntry::from_worst("(T1)", Some(1), &w1, "vertices of P_1 against D(0,3)")
            .with_note(if inside { "P_1 ⊂ D(0,3); P_0 is empty" } else { "P_1 leaves D(0,3)" }),
    );
    ledger.push(t2_entry(config, 1, &field, &polygon, r1)?);
    for label in ["(T3)", "(T4)", "(T5)"] {
        ledger.push(LedgerEntry::skipped(label, Some(1), "vacuous at n = 1"));
    }
    Ok(StageRecord {
        index: 1,
        field,
        polygon,
        radius: r1,
        alpha: AlphaSchedule.alpha(1),
        ledger,
        lemma: None,
    })
}

fn t2_entry(
    config: &TheoremConfig,
    n: usize,
    field: &WeierstrassField,
    polygon: &PolygonCurve,
    rn: f64,
) -> Result<LedgerEntry, TheoremError> {
    let bound = 1.0 / (2.0 * ((n + 1) as f64).powi(2));
    let im = Immersion::new(field, config.quadrature());
    let mut w = Worst::default();
    let pts = polygon.boundary_samples(polygon.perimeter() / config.samples.max(1) as f64);
    for z in pts {
        w.push(bound - (im.at(z)?.norm() - rn).abs(), z);
    }
    Ok(LedgerEntry::from_worst("(T2)", Some(n), &w, format!("points of P_{n}")))
}

fn interior(p: &PolygonCurve) -> PlanarRegion {
    PlanarRegion::Polygon(p.as_simple().clone())
}

/// Interior samples of P together with its vertices: the closure of Int P.
fn closed_interior_samples(p: &PolygonCurve, n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    let mut pts = interior(p).sample_points(n, rng);
    pts.extend_from_slice(p.vertices());
    pts
}

/// O for the step out of `prev`: P_{n−1} dilated in steps of
/// `dilation_step` until the lemma hypothesis fails or D(0,3) is left, then
/// backed off one step.
pub fn choose_domain(
    config: &TheoremConfig,
    prev: &StageRecord,
    data: &StepData,
) -> Result<PolygonCurve, TheoremError> {
    let mut best: Option<PolygonCurve> = None;
    let mut last_detail = String::from("first dilation already fails");
    for j in 1usize.. {
        let cand = prev.polygon.scaled(1.0 + j as f64 * config.dilation_step);
        if !polygon_in_outer(&cand).0 {
            break;
        }
        let problem = LemmaProblem {
            x: prev.field.with_domain(interior(&cand)),
            p: prev.polygon.clone(),
            o: interior(&cand),
            r: data.r,
            s: data.s,
            b1: eps_hat(data.n, 1),
            b2: data.b2,
            options: config.lemma.clone(),
        };
        let w = problem.hypothesis_margin()?;
        if !w.passed() {
            last_detail = format!("hypothesis margin {:e} at dilation step {j}", w.margin);
            break;
        }
        best = Some(cand);
    }
    best.ok_or(TheoremError::NoAdmissibleDomain {
        stage: data.n,
        detail: last_detail,
    })
}

/// Worst slack of `λ_Y ≥ α·λ_X` over samples.
fn metric_ratio(y: &WeierstrassField, x: &WeierstrassField, alpha: f64, samples: &[C]) -> Result<Worst, TheoremError> {
    let mut w = Worst::default();
    for &z in samples {
        w.push(metric(y, z)? - alpha * metric(x, z)?, z);
    }
    Ok(w)
}

/// One recursive step: lemma runs with shrinking b1 until the metric ratio
/// condition holds, then the (T1)–(T5) checks for the new stage.
pub fn advance_stage(config: &TheoremConfig, prev: &StageRecord, n: usize) -> Result<StageRecord, TheoremError> {
    if !prev.ledger.entries.iter().all(|e| e.status != Status::Violated) {
        return Err(TheoremError::InvalidConfig(format!("stage {} carries violated (T) entries", prev.index)));
    }
    let data = step_data(config.r1, n);
    let alpha = AlphaSchedule.alpha(n);
    let o = choose_domain(config, prev, &data)?;
    let mut rng = sample_rng(config, n, 0x7a11);
    let closure = closed_interior_samples(&prev.polygon, config.samples, &mut rng);
    for k in 1..=config.eps_hat_shrinks {
        let b1 = eps_hat(n, k);
        let mut options = config.lemma.clone();
        options.rng_seed = config.lemma.rng_seed.wrapping_add(n as u64);
        let problem = LemmaProblem {
            x: prev.field.with_domain(interior(&o)),
            p: prev.polygon.clone(),
            o: interior(&o),
            r: data.r,
            s: data.s,
            b1,
            b2: data.b2,
            options: options.clone(),
        };
        let run = run_lemma(&problem);
        let output = match (run.report.status, run.output) {
            (RunStatus::Verified, Some(out)) => out,
            (status, _) => {
                return Err(TheoremError::LemmaFailed {
                    stage: n,
                    status,
                    message: lemma_message(&run.report),
                })
            }
        };
        let ratio = metric_ratio(&output.y, &prev.field, alpha, &closure)?;
        if !ratio.passed() {
            continue;
        }
        let call = LemmaCall {
            r: data.r,
            s: data.s,
            b1,
            b2: data.b2,
            o: interior(&o),
            options,
        };
        let ledger = stage_ledger(config, prev, n, &output.y, &output.q, &closure, ratio)?;
        return Ok(StageRecord {
            index: n,
            field: output.y,
            polygon: output.q,
            radius: radius(config.r1, n),
            alpha,
            ledger,
            lemma: Some(call),
        });
    }
    Err(TheoremError::MetricSelectionFailed {
        stage: n,
        shrinks: config.eps_hat_shrinks,
    })
}

fn lemma_message(report: &LemmaReport) -> String {
    match &report.error {
        Some(e) => e.message.clone(),
        None => format!(
            "{} violated entries, {} missing",
            report.ledger.count(Status::Violated),
            report.missing.len()
        ),
    }
}

fn stage_ledger(
    config: &TheoremConfig,
    prev: &StageRecord,
    n: usize,
    x: &WeierstrassField,
    p: &PolygonCurve,
    closure: &[C],
    ratio: Worst,
) -> Result<PropertyLedger, TheoremError> {
    let mut ledger = PropertyLedger::default();
    let nested = p.as_simple().strictly_contains_polygon(prev.polygon.as_simple());
    let (inside, mut w1) = polygon_in_outer(p);
    for &v in prev.polygon.vertices() {
        let d = p.as_simple().distance_to_boundary(v);
        w1.push(if nested { d } else { -d }, v);
    }
    ledger.push(
        LedgerEntry::from_worst("(T1)", Some(n), &w1, format!("vertices of P_{} against P_{n}; P_{n} against D(0,3)", n - 1))
            .with_note(if nested && inside { "nested and bounded" } else { "nesting or bound fails" }),
    );
    let rn = radius(config.r1, n);
    ledger.push(t2_entry(config, n, x, p, rn)?);

    let im = Immersion::new(x, config.quadrature());
    let prev_im = Immersion::new(&prev.field, config.quadrature());
    let mut rng = sample_rng(config, n, 0x7e57);
    let floor = 0.5 * prev.radius - 0.5 / n as f64;
    let annulus = PlanarRegion::difference(interior(p), interior(&prev.polygon));
    let mut w3 = Worst::default();
    for z in annulus.sample_points(config.samples, &mut rng) {
        w3.push(im.at(z)?.norm() - floor, z);
    }
    ledger.push(LedgerEntry::from_worst("(T3)", Some(n), &w3, format!("random points of Int P_{n} ∖ Int P_{}", n - 1)));

    let bound = 1.0 / (n * n) as f64;
    let mut w4 = Worst::default();
    for &z in closure {
        w4.push(bound - (im.at(z)? - prev_im.at(z)?).norm(), z);
    }
    ledger.push(LedgerEntry::from_worst("(T4)", Some(n), &w4, format!("closure of Int P_{}", n - 1)));
    ledger.push(LedgerEntry::from_worst("(T5)", Some(n), &ratio, format!("closure of Int P_{}", n - 1)));
    Ok(ledger)
}

/// One row of the properness table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropernessRow {
    pub k: usize,
    pub r_k: f64,
    pub floor: f64,
}

pub fn properness_table(r1: f64, stages: usize) -> Vec<PropernessRow> {
    (2..=stages.max(2))
        .map(|k| PropernessRow {
            k,
            r_k: radius(r1, k),
            floor: properness_floor(r1, k),
        })
        .collect()
}

/// Least stage index k with `R < r_{k−1}/2 − 1/(2k) − 2`, confirmed by
/// sampling ‖X_N‖ > R on every annulus Int P_k ∖ Int P_{k−1} with
/// k_0 < k ≤ N for the last stage N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropernessWitness {
    pub radius: f64,
    pub k0: usize,
    pub sampled: Vec<(usize, Option<f64>)>,
}

pub fn properness_witness(
    config: &TheoremConfig,
    stages: &[StageRecord],
    ball_radius: f64,
) -> Result<PropernessWitness, TheoremError> {
    let last = stages.last().ok_or_else(|| TheoremError::InvalidConfig("no stages".into()))?;
    let k0 = (2..=last.index)
        .find(|&k| ball_radius < properness_floor(config.r1, k))
        .ok_or(TheoremError::NotYetProper {
            radius: ball_radius,
            last: last.index,
        })?;
    let im = Immersion::new(&last.field, config.quadrature());
    let mut rng = sample_rng(config, last.index, 0x9209);
    let mut sampled = Vec::new();
    for k in k0 + 1..=last.index {
        let (inner, outer) = (&stages[k - 2].polygon, &stages[k - 1].polygon);
        let annulus = PlanarRegion::difference(interior(outer), interior(inner));
        let mut w = Worst::default();
        for z in annulus.sample_points(config.samples, &mut rng) {
            w.push(im.at(z)?.norm() - ball_radius, z);
        }
        sampled.push((k, w.margin.is_finite().then_some(w.margin)));
    }
    Ok(PropernessWitness {
        radius: ball_radius,
        k0,
        sampled,
    })
}

/// Worst slack of `λ_{X_k} ≥ (∏_{j≤k} α_j)·λ_{X_{n0}}` and of
/// `(∏_{j≤k} α_j)·λ_{X_{n0}} ≥ ½·λ_{X_{n0}}` for each later stage k.
pub fn limit_metric_bound(
    stages: &[StageRecord],
    n0: usize,
    samples: &[C],
) -> Result<PropertyLedger, TheoremError> {
    let mut ledger = PropertyLedger::default();
    let Some(base) = stages.iter().find(|s| s.index == n0) else {
        return Ok(ledger);
    };
    let base_metric: Vec<f64> = samples.iter().map(|&z| metric(&base.field, z)).collect::<Result<_, _>>()?;
    for st in stages.iter().filter(|s| s.index > n0) {
        let prod = AlphaSchedule.partial_product(st.index);
        let mut w = Worst::default();
        let mut half = Worst::default();
        for (&z, &lb) in samples.iter().zip(&base_metric) {
            w.push(metric(&st.field, z)? - prod * lb, z);
            half.push((prod - 0.5) * lb, z);
        }
        ledger.push(LedgerEntry::from_worst("limit metric", Some(st.index), &w, format!("Int P_{n0}")));
        ledger.push(LedgerEntry::from_worst("limit metric half", Some(st.index), &half, format!("Int P_{n0}")));
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyPair {
    pub m: usize,
    pub n: usize,
    pub max_distance: f64,
    /// `Σ_{k=m+1}^{n} 1/k²`.
    pub bound: f64,
    pub passed: bool,
}

/// `max ‖X_n − X_m‖` over samples against the (T4) tail for every pair.
pub fn cauchy_diagnostic(
    config: &TheoremConfig,
    stages: &[StageRecord],
    samples: &[C],
) -> Result<Vec<CauchyPair>, TheoremError> {
    let values: Vec<Vec<nalgebra::Vector3<f64>>> = stages
        .iter()
        .map(|st| {
            let im = Immersion::new(&st.field, config.quadrature());
            samples.iter().map(|&z| im.at(z)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (a, sa) in stages.iter().enumerate() {
        for (b, sb) in stages.iter().enumerate().skip(a + 1) {
            let max_distance = values[a]
                .iter()
                .zip(&values[b])
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            let bound = cauchy_bound(sa.index, sb.index);
            out.push(CauchyPair {
                m: sa.index,
                n: sb.index,
                max_distance,
                bound,
                passed: max_distance < bound,
            });
        }
    }
    Ok(out)
}

pub fn cauchy_bound(m: usize, n: usize) -> f64 {
    (m + 1..=n).map(|k| 1.0 / (k * k) as f64).sum()
}

/// Everything a theorem run reports.
#[derive(Debug, Clone)]
pub struct TheoremRun {
    pub config: TheoremConfig,
    pub flag: &'static str,
    pub stages: Vec<StageRecord>,
    pub steps: Vec<StepData>,
    pub properness: Vec<PropernessRow>,
    pub limit_metric: PropertyLedger,
    pub cauchy: Vec<CauchyPair>,
    pub status: RunStatus,
    pub error: Option<ErrorRecord>,
}

impl TheoremRun {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Run stages 1..=N, stopping at the first failure, then the diagnostics
/// over whatever finished.
pub fn run_theorem(config: &TheoremConfig) -> TheoremRun {
    let mut run = TheoremRun {
        config: config.clone(),
        flag: mode_flag(config.r1),
        stages: Vec::new(),
        steps: (2..=config.stages).map(|n| step_data(config.r1, n)).collect(),
        properness: properness_table(config.r1, config.stages),
        limit_metric: PropertyLedger::default(),
        cauchy: Vec::new(),
        status: RunStatus::Verified,
        error: None,
    };
    let fail = |run: &mut TheoremRun, e: TheoremError| {
        run.status = e.status();
        run.error = Some((&e).into());
    };
    match init_stage(config) {
        Ok(s) => run.stages.push(s),
        Err(e) => {
            fail(&mut run, e);
            return run;
        }
    }
    for n in 2..=config.stages {
        match advance_stage(config, run.stages.last().expect("stage 1 exists"), n) {
            Ok(s) => run.stages.push(s),
            Err(e) => {
                fail(&mut run, e);
                break;
            }
        }
    }
    let mut rng = sample_rng(config, 0, 0x11);
    let samples = interior(&run.stages[0].polygon).sample_points(config.samples, &mut rng);
    match limit_metric_bound(&run.stages, 1, &samples) {
        Ok(l) => run.limit_metric = l,
        Err(e) => fail(&mut run, e),
    }
    match cauchy_diagnostic(config, &run.stages, &samples) {
        Ok(c) => run.cauchy = c,
        Err(e) => fail(&mut run, e),
    }
    if run.status == RunStatus::Verified {
        let violated = run.stages.iter().any(|s| s.ledger.any_violated())
            || run.limit_metric.any_violated()
            || run.cauchy.iter().any(|c| !c.passed);
        if violated {
            run.status = RunStatus::Violated;
        }
    }
    run
}
