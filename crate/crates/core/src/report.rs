//! Verification driver and the JSON check report.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::catalog::{self, CatalogSpec, Expected};
use crate::contact3::{
    ac3_residual, foliation_residual, quasi_sasakian_residuals, rank_from_matrix, rank_from_wedges, reeb_coefficients,
    Structure3Eval, REEB_TOL,
};
use crate::geometry::{fd, ChartedManifold, PointGeometry};
use crate::sampling::{point_rng, sample_points};
use crate::stats::Residual;
use crate::verify::{
    classify_analyses, value_part, Classification, IdentityId, PointAnalysis, Witness, MIN_CLASSIFY_DIRECTIONS,
    MIN_CLASSIFY_POINTS,
};
use crate::{Error, Result};

pub const REPORT_SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Relative tolerance for jet vs finite-difference agreement.
pub const FD_TOL: f64 = 1e-5;
/// Points per manifold used for the finite-difference comparison.
pub const FD_POINTS: usize = 10;
/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QS3_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Catalog name or path to a manifold spec file.
    pub manifold: String,
    pub points: usize,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    pub fd_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { manifold: String::new(), points: 16, trials: 8, seed: 42, tol: 1e-8, fd_check: true }
    }
}

impl RunConfig {
    pub fn new(manifold: impl Into<String>) -> Self {
        RunConfig { manifold: manifold.into(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifold.is_empty() {
            return Err(Error::Config("no manifold given".into()));
        }
        if self.points < 1 {
            return Err(Error::Config("points must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive and finite, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A manifold plus the invariants it was built to have, if known.
pub struct Resolved {
    pub manifold: ChartedManifold,
    pub expected: Option<Expected>,
}

/// An existing file is read as a manifold spec; anything else must be a
/// catalog name.
pub fn resolve_manifold(name: &str) -> Result<Resolved> {
    let path = Path::new(name);
    if path.is_file() {
        return Ok(Resolved { manifold: crate::expr::load_manifold(path)?, expected: None });
    }
    let spec = CatalogSpec::parse(name)?;
    Ok(Resolved { manifold: spec.build()?, expected: Some(spec.expected()) })
}

/// Number of worker threads requested through [`THREADS_ENV`].
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

/// Runs `f` on a pool capped by [`THREADS_ENV`], or on the global pool.
pub fn with_thread_limit<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match thread_limit()? {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckId {
    Ac3Relations,
    Normality,
    DPhiClosed,
    ReebBracket,
    Rank,
    RankWedges,
    ExpectedInvariants,
    SplitInvariance,
    InvariantFoliations,
    CurvatureSymmetry,
    FdChristoffel,
    FdRiemann,
    Identity(IdentityId),
    PhiSectionalPartials,
    ReebSectional,
    HorizontalSection,
}

impl CheckId {
    pub fn code(self) -> &'static str {
        match self {
            CheckId::Ac3Relations => "AC3_RELATIONS",
            CheckId::Normality => "NORMALITY",
            CheckId::DPhiClosed => "DPHI_CLOSED",
            CheckId::ReebBracket => "REEB_BRACKET",
            CheckId::Rank => "RANK",
            CheckId::RankWedges => "RANK_WEDGES",
            CheckId::ExpectedInvariants => "EXPECTED_INVARIANTS",
            CheckId::SplitInvariance => "SPLIT_INVARIANCE",
            CheckId::InvariantFoliations => "INVARIANT_FOLIATIONS",
            CheckId::CurvatureSymmetry => "CURVATURE_SYMMETRY",
            CheckId::FdChristoffel => "FD_CHRISTOFFEL",
            CheckId::FdRiemann => "FD_RIEMANN",
            CheckId::Identity(id) => id.code(),
            CheckId::PhiSectionalPartials => "PHI_SECTIONAL_PARTIALS",
            CheckId::ReebSectional => "REEB_SECTIONAL",
            CheckId::HorizontalSection => "HORIZONTAL_SECTION",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            CheckId::Ac3Relations => "phi_a^2 = -I + eta_a xi_a, eta_a(xi_b) = delta_ab, g(phi X, phi Y) = g(X,Y) - eta(X)eta(Y), \
                                      phi_c = phi_a phi_b - eta_b xi_a for even (a,b,c)",
            CheckId::Normality => "[phi,phi] + d eta (x) xi = 0",
            CheckId::DPhiClosed => "d Phi = 0",
            CheckId::ReebBracket => "[xi_a, xi_b] = c xi_c for even (a,b,c), c constant",
            CheckId::Rank => "rank of eta_a independent of a and of the point",
            CheckId::RankWedges => "rank from the skew spectrum of d eta equals rank from wedge powers",
            CheckId::ExpectedInvariants => "dimension, rank and c match the construction",
            CheckId::SplitInvariance => "phi_a preserves E^{4m}",
            CheckId::InvariantFoliations => "nabla_X Y stays in E^{4l+3} (resp. E^{4m}) for X, Y in it",
            CheckId::CurvatureSymmetry => "R_ijkl = -R_jikl = -R_ijlk = R_klij, first Bianchi identity",
            CheckId::FdChristoffel => "jet Christoffel symbols agree with central differences",
            CheckId::FdRiemann => "jet Riemann tensor agrees with central differences",
            CheckId::Identity(id) => id.statement(),
            CheckId::PhiSectionalPartials => {
                "H_g(X) - g(R(X, phi_g X) phi_{g+1} X, phi_{g+2} X) = (c^2/4)|X_{E4l}|^4, cross terms sum to 0"
            }
            CheckId::ReebSectional => "K(X, xi_a) = (c^2/4)|X_{E4l}|^2 for horizontal unit X",
            CheckId::HorizontalSection => "spread of sectional curvatures over the horizontal section at X",
        }
    }
}

/// One row of the report. `value` carries the measured quantity where the
/// check extracts one (c, rank, the largest spread).
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: CheckId,
    pub alpha: Option<usize>,
    pub residual: Residual,
    pub tol: f64,
    pub vacuous: bool,
    /// Only reported, never failing.
    pub informational: bool,
    pub n_trials: usize,
    pub value: Option<f64>,
    pub worst: Option<Witness>,
    pub error: Option<String>,
}

impl Check {
    pub fn new(id: CheckId, alpha: Option<usize>, tol: f64) -> Self {
        Check {
            id,
            alpha,
            residual: Residual::default(),
            tol,
            vacuous: false,
            informational: false,
            n_trials: 0,
            value: None,
            worst: None,
            error: None,
        }
    }

    fn failed(id: CheckId, alpha: Option<usize>, tol: f64, e: &Error) -> Self {
        Check { error: Some(e.to_string()), ..Check::new(id, alpha, tol) }
    }

    pub fn normalized(&self) -> f64 {
        self.residual.normalized()
    }

    pub fn pass(&self) -> bool {
        self.error.is_none() && (self.informational || self.vacuous || self.normalized() <= self.tol)
    }

    fn merge(&mut self, other: &Check) {
        let worse = other.residual.max_abs > self.residual.max_abs
            || (other.residual.max_abs.is_nan() && !self.residual.max_abs.is_nan());
        if other.worst.is_some() && (worse || self.worst.is_none()) {
            self.worst = other.worst.clone();
        }
        self.residual.merge(&other.residual);
        self.n_trials += other.n_trials;
        self.vacuous |= other.vacuous;
        if self.error.is_none() {
            self.error = other.error.clone();
        }
        self.value = match (self.value, other.value) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    fn sort_key(&self) -> (CheckId, Option<usize>) {
        (self.id, self.alpha)
    }
}

/// Manifold metadata; `None` where extraction failed.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldInfo {
    pub name: String,
    pub dim: usize,
    pub rank: Option<usize>,
    pub c: Option<f64>,
    pub l: Option<usize>,
    pub m: Option<usize>,
    pub expected: Option<Expected>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub config: RunConfig,
    pub manifold: ManifoldInfo,
    pub checks: Vec<Check>,
    /// `None` when the sample is too small to classify.
    pub classification: Option<std::result::Result<Classification, String>>,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass())
    }

    pub fn pass(&self) -> bool {
        self.failures().next().is_none() && !matches!(self.classification, Some(Err(_)))
    }

    pub fn check(&self, id: CheckId, alpha: Option<usize>) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id && c.alpha == alpha)
    }

    pub fn to_json(&self) -> String {
        let json = JsonReport::from(self);
        let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Everything computed at one sample point.
struct PointOutcome {
    checks: Vec<Check>,
    reeb: Option<[(f64, f64); 3]>,
    ranks: Option<[usize; 3]>,
    analysis: Option<PointAnalysis>,
}

fn point_outcome(m: &ChartedManifold, p: &[f64], index: usize, config: &RunConfig) -> PointOutcome {
    let tol = config.tol;
    let mut checks = Vec::new();
    let s = match m.jets_at(p) {
        Ok(s) => s,
        Err(e) => {
            return PointOutcome {
                checks: vec![Check::failed(CheckId::Ac3Relations, None, tol, &e)],
                reeb: None,
                ranks: None,
                analysis: None,
            }
        }
    };
    let mut rng = point_rng(config.seed, index as u64);

    let mut ac3 = Check::new(CheckId::Ac3Relations, None, tol);
    match Structure3Eval::from_values_unchecked(p, &value_part(&s)) {
        Ok(se) => ac3.residual = ac3_residual(&se),
        Err(e) => ac3.error = Some(e.to_string()),
    }
    ac3.n_trials = 1;
    checks.push(ac3);

    for a in 0..3 {
        let (normal, dphi) = quasi_sasakian_residuals(&s, a);
        let mut c = Check::new(CheckId::Normality, Some(a), tol);
        c.residual = normal;
        c.n_trials = 1;
        checks.push(c);
        let mut c = Check::new(CheckId::DPhiClosed, Some(a), tol);
        c.residual = dphi;
        c.n_trials = 1;
        checks.push(c);
    }

    let reeb = match reeb_coefficients(&s) {
        Ok(r) => Some(r),
        Err(e) => {
            checks.push(Check::failed(CheckId::ReebBracket, None, REEB_TOL, &e));
            None
        }
    };

    let mut ranks = [0; 3];
    let mut rank_ok = true;
    let mut wedge = Check::new(CheckId::RankWedges, None, 0.5);
    for (a, rank) in ranks.iter_mut().enumerate() {
        let eta_j = crate::contact3::eta_jets(&s, a);
        let eta = crate::jet::values(&eta_j);
        let deta = crate::geometry::d_one_form(&eta_j).to_skew_matrix();
        match (rank_from_matrix(&eta, &deta), rank_from_wedges(&eta, &deta)) {
            (Ok(r), Ok(w)) => {
                *rank = r;
                wedge.residual.record(r as f64 - w as f64, &[]);
                wedge.n_trials += 1;
            }
            (Err(e), _) | (_, Err(e)) => {
                rank_ok = false;
                checks.push(Check::failed(CheckId::Rank, Some(a), 0.5, &e));
            }
        }
    }
    if rank_ok {
        checks.push(wedge);
    }

    match PointGeometry::from_metric_jets(p, &s.g) {
        Ok(geom) => {
            let mut c = Check::new(CheckId::CurvatureSymmetry, None, tol);
            c.residual.record(geom.symmetry_residual(), &[]);
            c.n_trials = 1;
            checks.push(c);
        }
        Err(e) => checks.push(Check::failed(CheckId::CurvatureSymmetry, None, tol, &e)),
    }

    let mut fol = Check::new(CheckId::InvariantFoliations, None, tol);
    match foliation_residual(p, &s, config.trials, &mut rng) {
        Ok(r) => {
            fol.residual = r;
            fol.n_trials = config.trials;
        }
        Err(e) => fol.error = Some(e.to_string()),
    }
    checks.push(fol);

    if config.fd_check && index < FD_POINTS {
        match fd::compare(m, p) {
            Ok(agree) => {
                for (id, err) in [(CheckId::FdChristoffel, agree.christoffel), (CheckId::FdRiemann, agree.riemann)] {
                    let mut c = Check::new(id, None, FD_TOL);
                    c.residual.record(err, &[]);
                    c.n_trials = 1;
                    checks.push(c);
                }
            }
            Err(e) => checks.push(Check::failed(CheckId::FdChristoffel, None, FD_TOL, &e)),
        }
    }

    let analysis = match PointAnalysis::from_jets(p, &s) {
        Ok(pa) => pa,
        Err(e) => {
            checks.push(Check::failed(CheckId::SplitInvariance, None, tol, &e));
            return PointOutcome { checks, reeb, ranks: rank_ok.then_some(ranks), analysis: None };
        }
    };
    let mut inv = Check::new(CheckId::SplitInvariance, None, tol);
    inv.residual.record(analysis.split.e4m_invariance, &[]);
    inv.n_trials = 1;
    checks.push(inv);

    let mut id_rng = point_rng(config.seed, (1 << 32) | index as u64);
    for id in IdentityId::ALL {
        let alphas: Vec<Option<usize>> = if id.per_alpha() { (0..3).map(Some).collect() } else { vec![None] };
        for alpha in alphas {
            match analysis.identity_stat(id, alpha, config.trials, &mut id_rng, index) {
                Ok(stat) => checks.push(Check {
                    residual: stat.residual,
                    vacuous: stat.vacuous,
                    n_trials: stat.n_trials,
                    worst: stat.worst,
                    ..Check::new(CheckId::Identity(id), alpha, tol)
                }),
                Err(e) => checks.push(Check::failed(CheckId::Identity(id), alpha, tol, &e)),
            }
        }
    }

    let mut partials = Check::new(CheckId::PhiSectionalPartials, None, tol);
    let mut reeb_sec: [Check; 3] = std::array::from_fn(|a| Check::new(CheckId::ReebSectional, Some(a), tol));
    let mut section = Check::new(CheckId::HorizontalSection, None, tol);
    section.informational = true;
    let extras = (|| -> Result<()> {
        for _ in 0..config.trials {
            let x = analysis.random_horizontal(&mut id_rng)?;
            let sum = analysis.phi_sectional_sum(&x)?;
            for g in 0..3 {
                partials.residual.record(sum.partials[g] - sum.partial_predicted, &[sum.partials[g], sum.partial_predicted]);
            }
            partials.residual.record(sum.bianchi, &sum.h);
            partials.n_trials += 1;
            for (a, c) in reeb_sec.iter_mut().enumerate() {
                c.residual.merge(&analysis.reeb_sectional_residual(a, &x)?);
                c.n_trials += 1;
            }
            let (ks, spread) = analysis.horizontal_section(&x)?;
            section.residual.record(spread, &ks);
            section.value = Some(section.value.map_or(spread, |v: f64| v.max(spread)));
            section.n_trials += 1;
        }
        Ok(())
    })();
    if let Err(e) = extras {
        partials.error = Some(e.to_string());
    }
    checks.push(partials);
    checks.extend(reeb_sec);
    checks.push(section);

    PointOutcome { checks, reeb, ranks: rank_ok.then_some(ranks), analysis: Some(analysis) }
}

/// Checks that compare points with each other.
fn global_checks(outcomes: &[PointOutcome], expected: Option<Expected>, dim: usize, tol: f64) -> (Vec<Check>, Option<f64>, Option<usize>) {
    let mut out = Vec::new();

    let mut reeb = Check::new(CheckId::ReebBracket, None, REEB_TOL);
    let coefs: Option<Vec<[(f64, f64); 3]>> = outcomes.iter().map(|o| o.reeb).collect();
    let c = coefs.map(|coefs| {
        let flat: Vec<(f64, f64)> = coefs.into_iter().flatten().collect();
        let lo = flat.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let hi = flat.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
        for &(coef, rest) in &flat {
            reeb.residual.record(rest, &[coef]);
        }
        reeb.residual.record(hi - lo, &[hi, lo]);
        reeb.n_trials = flat.len();
        let mean = flat.iter().map(|x| x.0).sum::<f64>() / flat.len() as f64;
        reeb.value = Some(mean);
        mean
    });
    if c.is_none() {
        reeb.error = Some("Reeb bracket unavailable at some point".into());
    }
    out.push(reeb);

    let mut rank = Check::new(CheckId::Rank, None, 0.5);
    let ranks: Option<Vec<[usize; 3]>> = outcomes.iter().map(|o| o.ranks).collect();
    let r0 = ranks.and_then(|ranks| {
        let r0 = ranks.first()?[0];
        for r in ranks.iter().flatten() {
            rank.residual.record(*r as f64 - r0 as f64, &[]);
            rank.n_trials += 1;
        }
        rank.value = Some(r0 as f64);
        Some(r0)
    });
    if r0.is_none() {
        rank.error = Some("rank unavailable at some point".into());
    }
    out.push(rank);

    if let Some(exp) = expected {
        let mut chk = Check::new(CheckId::ExpectedInvariants, None, tol);
        chk.residual.record(dim as f64 - exp.dim as f64, &[]);
        match (c, r0) {
            (Some(c), Some(r)) => {
                chk.residual.record(c - exp.c, &[c, exp.c]);
                chk.residual.record(r as f64 - exp.rank as f64, &[]);
                chk.n_trials = 1;
            }
            _ => chk.error = Some("c or rank unavailable".into()),
        }
        out.push(chk);
    }
    (out, c, r0)
}

/// Resolves the manifold and runs every check. Configuration and spec-file
/// problems are errors; anything found while checking lands in the report.
pub fn run_suite(config: &RunConfig) -> Result<CheckReport> {
    config.validate()?;
    let Resolved { manifold, expected } = resolve_manifold(&config.manifold)?;
    with_thread_limit(|| run_suite_on(&manifold, expected, config))
}

pub fn run_suite_on(m: &ChartedManifold, expected: Option<Expected>, config: &RunConfig) -> CheckReport {
    let radius = m.domain_radius().min(1.0);
    let points = sample_points(config.seed, config.points, m.dim(), radius);
    let outcomes: Vec<PointOutcome> =
        points.par_iter().enumerate().map(|(i, p)| point_outcome(m, p, i, config)).collect();

    let mut merged: Vec<Check> = Vec::new();
    for o in &outcomes {
        for c in &o.checks {
            match merged.iter_mut().find(|x| x.sort_key() == c.sort_key()) {
                Some(x) => x.merge(c),
                None => merged.push(c.clone()),
            }
        }
    }
    let (globals, c, rank) = global_checks(&outcomes, expected, m.dim(), config.tol);
    merged.extend(globals);
    merged.sort_by_key(|c| c.sort_key());

    let analyses: Option<Vec<PointAnalysis>> = outcomes.into_iter().map(|o| o.analysis).collect();
    let classification = classifiable(config).then(|| match analyses {
        Some(a) => classify_analyses(m, &a, config.trials, config.tol, config.seed).map_err(|e| e.to_string()),
        None => Err("point analysis failed at some point".into()),
    });
    let (l, mm) = match rank {
        Some(r) if r % 4 == 3 => (Some((r - 3) / 4), Some((m.dim() - r) / 4)),
        Some(1) => (Some(0), Some((m.dim() - 3) / 4)),
        _ => (None, None),
    };
    CheckReport {
        config: config.clone(),
        manifold: ManifoldInfo { name: m.name().to_string(), dim: m.dim(), rank, c, l, m: mm, expected },
        checks: merged,
        classification,
    }
}

// ---------------------------------------------------------------------------
// classify and list
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyReport {
    pub config: RunConfig,
    pub manifold: String,
    pub dim: usize,
    pub classification: Classification,
}

impl ClassifyReport {
    pub fn to_json(&self) -> String {
        let json = JsonClassify {
            schema: REPORT_SCHEMA,
            tool: "qs3",
            version: TOOL_VERSION,
            command: "classify",
            seed: self.config.seed,
            points: self.config.points,
            directions: self.config.trials,
            tol: Real(self.config.tol),
            manifold: &self.manifold,
            dim: self.dim,
            verdict: JsonVerdict::from(&self.classification),
        };
        let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
        s.push('\n');
        s
    }
}

fn classifiable(config: &RunConfig) -> bool {
    config.points >= MIN_CLASSIFY_POINTS && config.trials >= MIN_CLASSIFY_DIRECTIONS
}

/// Samples `config.points` points and classifies by horizontal sectional
/// curvature, using `config.trials` directions per point.
pub fn cmd_classify(config: &RunConfig) -> Result<ClassifyReport> {
    config.validate()?;
    if !classifiable(config) {
        return Err(Error::Config(format!(
            "classification needs at least {MIN_CLASSIFY_POINTS} points and {MIN_CLASSIFY_DIRECTIONS} trials"
        )));
    }
    let Resolved { manifold: m, .. } = resolve_manifold(&config.manifold)?;
    let radius = m.domain_radius().min(1.0);
    let points = sample_points(config.seed, config.points, m.dim(), radius);
    let classification = with_thread_limit(|| {
        let analyses: Vec<PointAnalysis> =
            points.par_iter().map(|p| PointAnalysis::new(&m, p)).collect::<Result<_>>()?;
        classify_analyses(&m, &analyses, config.trials, config.tol, config.seed)
    })??;
    Ok(ClassifyReport { config: config.clone(), manifold: m.name().to_string(), dim: m.dim(), classification })
}

pub fn cmd_list() -> Vec<catalog::CatalogEntry> {
    catalog::list()
}

pub fn format_list(entries: &[catalog::CatalogEntry]) -> String {
    let mut s = format!("{:<16} {:>4} {:>5} {:>6}\n", "name", "dim", "rank", "c");
    for e in entries {
        let _ = writeln!(s, "{:<16} {:>4} {:>5} {:>6}", e.name, e.expected.dim, e.expected.rank, e.expected.c);
    }
    s
}

pub fn list_json(entries: &[catalog::CatalogEntry]) -> String {
    #[derive(Serialize)]
    struct Entry<'a> {
        name: &'a str,
        dim: usize,
        rank: usize,
        c: Real,
    }
    let rows: Vec<Entry> =
        entries.iter().map(|e| Entry { name: &e.name, dim: e.expected.dim, rank: e.expected.rank, c: Real(e.expected.c) }).collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("listing serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

/// A real printed with 17 significant digits; non-finite values become null.
#[derive(Clone, Copy, Debug)]
struct Real(f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: JsonConfig<'a>,
    manifold: JsonManifold<'a>,
    checks: Vec<JsonCheck<'a>>,
    classification: Option<JsonVerdict<'a>>,
    classification_error: Option<&'a str>,
    classification_skipped: bool,
    summary: JsonSummary,
    pass: bool,
}

#[derive(Serialize)]
struct JsonConfig<'a> {
    manifold: &'a str,
    points: usize,
    trials: usize,
    seed: u64,
    tol: Real,
    fd_check: bool,
}

#[derive(Serialize)]
struct JsonManifold<'a> {
    name: &'a str,
    dim: usize,
    rank: Option<usize>,
    c: Option<Real>,
    l: Option<usize>,
    m: Option<usize>,
    expected: Option<JsonExpected>,
}

#[derive(Serialize)]
struct JsonExpected {
    dim: usize,
    rank: usize,
    c: Real,
}

#[derive(Serialize)]
struct JsonCheck<'a> {
    id: &'static str,
    /// 1-based.
    alpha: Option<usize>,
    statement: &'static str,
    max_residual: Real,
    scale: Real,
    normalized: Real,
    tol: Real,
    vacuous: bool,
    informational: bool,
    pass: bool,
    n_trials: usize,
    value: Option<Real>,
    worst: Option<JsonWitness>,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct JsonWitness {
    point_index: usize,
    trial: usize,
    args: Vec<Vec<Real>>,
}

#[derive(Serialize)]
struct JsonVerdict<'a> {
    kind: &'static str,
    description: String,
    c: Option<Real>,
    k: Option<Real>,
    low: Option<Real>,
    high: Option<Real>,
    evidence: Vec<JsonEvidence>,
    #[serde(skip)]
    _marker: std::marker::PhantomData<&'a ()>,
}

#[derive(Serialize)]
struct JsonEvidence {
    point_index: usize,
    min: Real,
    max: Real,
}

#[derive(Serialize)]
struct JsonSummary {
    total: usize,
    passed: usize,
    failed: usize,
    vacuous: usize,
}

#[derive(Serialize)]
struct JsonClassify<'a> {
    schema: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    points: usize,
    directions: usize,
    tol: Real,
    manifold: &'a str,
    dim: usize,
    verdict: JsonVerdict<'a>,
}

impl<'a> From<&'a Classification> for JsonVerdict<'a> {
    fn from(c: &'a Classification) -> Self {
        use crate::verify::Verdict;
        let (kind, cc, k, low, high) = match c.verdict {
            Verdict::ThreeCSasakian { c, k } => ("ThreeCSasakian", Some(c), Some(k), None, None),
            Verdict::ThreeCosymplecticFlat => ("ThreeCosymplecticFlat", None, None, None, None),
            Verdict::NonConstantHSC { low, high } => ("NonConstantHSC", None, None, Some(low), Some(high)),
        };
        JsonVerdict {
            kind,
            description: c.verdict.to_string(),
            c: cc.map(Real),
            k: k.map(Real),
            low: low.map(Real),
            high: high.map(Real),
            evidence: c
                .evidence
                .iter()
                .map(|e| JsonEvidence { point_index: e.point_index, min: Real(e.min), max: Real(e.max) })
                .collect(),
            _marker: std::marker::PhantomData,
        }
    }
}

impl<'a> From<&'a CheckReport> for JsonReport<'a> {
    fn from(r: &'a CheckReport) -> Self {
        let checks: Vec<JsonCheck> = r
            .checks
            .iter()
            .map(|c| JsonCheck {
                id: c.id.code(),
                alpha: c.alpha.map(|a| a + 1),
                statement: c.id.statement(),
                max_residual: Real(c.residual.max_abs),
                scale: Real(c.residual.scale),
                normalized: Real(c.normalized()),
                tol: Real(c.tol),
                vacuous: c.vacuous,
                informational: c.informational,
                pass: c.pass(),
                n_trials: c.n_trials,
                value: c.value.map(Real),
                worst: c.worst.as_ref().map(|w| JsonWitness {
                    point_index: w.point_index,
                    trial: w.trial,
                    args: w.args.iter().map(|a| reals(a)).collect(),
                }),
                error: c.error.as_deref(),
            })
            .collect();
        let passed = r.checks.iter().filter(|c| c.pass()).count();
        JsonReport {
            schema: REPORT_SCHEMA,
            tool: "qs3",
            version: TOOL_VERSION,
            command: "check",
            seed: r.config.seed,
            config: JsonConfig {
                manifold: &r.config.manifold,
                points: r.config.points,
                trials: r.config.trials,
                seed: r.config.seed,
                tol: Real(r.config.tol),
                fd_check: r.config.fd_check,
            },
            manifold: JsonManifold {
                name: &r.manifold.name,
                dim: r.manifold.dim,
                rank: r.manifold.rank,
                c: r.manifold.c.map(Real),
                l: r.manifold.l,
                m: r.manifold.m,
                expected: r.manifold.expected.map(|e| JsonExpected { dim: e.dim, rank: e.rank, c: Real(e.c) }),
            },
            summary: JsonSummary {
                total: r.checks.len(),
                passed,
                failed: r.checks.len() - passed,
                vacuous: r.checks.iter().filter(|c| c.vacuous).count(),
            },
            pass: r.pass(),
            checks,
            classification: r.classification.as_ref().and_then(|c| c.as_ref().ok()).map(JsonVerdict::from),
            classification_error: r.classification.as_ref().and_then(|c| c.as_ref().err()).map(|s| s.as_str()),
            classification_skipped: r.classification.is_none(),
        }
    }
}
