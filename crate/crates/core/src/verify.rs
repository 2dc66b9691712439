//! Pointwise evaluation of the curvature identities of 3-quasi-Sasakian
//! structures, φ-sectional curvatures, and the constant horizontal
//! sectional curvature classification.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::contact3::{reeb_constant, split_from_jets, SplitEval, SplitJets, Structure3Eval};
use crate::error::{Error, Result};
use crate::geometry::{ChartedManifold, PointGeometry, StructureJets};
use crate::jet::{Jet1, Jet2, JetMat};
use crate::sampling::{gaussian_vector, point_rng};
use crate::stats::Residual;
use crate::tensor::{MetricFrame, PointVector};

/// Identities checked pointwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum IdentityId {
    #[serde(rename = "SYM_PSI2")]
    SymPsi2,
    #[serde(rename = "PSI_CUBE")]
    PsiCube,
    #[serde(rename = "NABLA_ETA")]
    NablaEta,
    #[serde(rename = "DETA_CPSI")]
    DetaCpsi,
    #[serde(rename = "NABLA_XI")]
    NablaXi,
    #[serde(rename = "NABLA_PSI")]
    NablaPsi,
    #[serde(rename = "NABLA_PSI_SQ")]
    NablaPsiSq,
    #[serde(rename = "R_XI")]
    RXi,
    #[serde(rename = "R_PHI_COMMUTE")]
    RPhiCommute,
    #[serde(rename = "P_IDENTITY")]
    PIdentity,
    #[serde(rename = "PHI4")]
    Phi4,
    #[serde(rename = "PHI_SECTIONAL_SUM")]
    PhiSectionalSum,
}

impl IdentityId {
    pub const ALL: [IdentityId; 12] = [
        IdentityId::SymPsi2,
        IdentityId::PsiCube,
        IdentityId::NablaEta,
        IdentityId::DetaCpsi,
        IdentityId::NablaXi,
        IdentityId::NablaPsi,
        IdentityId::NablaPsiSq,
        IdentityId::RXi,
        IdentityId::RPhiCommute,
        IdentityId::PIdentity,
        IdentityId::Phi4,
        IdentityId::PhiSectionalSum,
    ];

    pub fn code(self) -> &'static str {
        match self {
            IdentityId::SymPsi2 => "SYM_PSI2",
            IdentityId::PsiCube => "PSI_CUBE",
            IdentityId::NablaEta => "NABLA_ETA",
            IdentityId::DetaCpsi => "DETA_CPSI",
            IdentityId::NablaXi => "NABLA_XI",
            IdentityId::NablaPsi => "NABLA_PSI",
            IdentityId::NablaPsiSq => "NABLA_PSI_SQ",
            IdentityId::RXi => "R_XI",
            IdentityId::RPhiCommute => "R_PHI_COMMUTE",
            IdentityId::PIdentity => "P_IDENTITY",
            IdentityId::Phi4 => "PHI4",
            IdentityId::PhiSectionalSum => "PHI_SECTIONAL_SUM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.code() == s)
    }

    /// The identity as a formula; `ψ, Ψ, η, ξ, φ` carry the index `α`.
    pub fn statement(self) -> &'static str {
        match self {
            IdentityId::SymPsi2 => "g(psi^2 X, Y) = g(X, psi^2 Y)",
            IdentityId::PsiCube => "psi^3 = -psi",
            IdentityId::NablaEta => "(nabla_X eta)Y = (c/2) Psi(X,Y)",
            IdentityId::DetaCpsi => "d eta = c Psi",
            IdentityId::NablaXi => "nabla_X xi = -(c/2) psi X",
            IdentityId::NablaPsi => "(nabla_X psi)Y = (c/2)(eta(Y) psi^2 X - g(psi^2 X, Y) xi)",
            IdentityId::NablaPsiSq => "(nabla_X psi^2)Y = (c/2)(Psi(X,Y) xi - eta(Y) psi X)",
            IdentityId::RXi => "R(X,Y)xi = (c^2/4)(eta(X) psi^2 Y - eta(Y) psi^2 X)",
            IdentityId::RPhiCommute => {
                "R(X,Y)phi Z - phi R(X,Y)Z = (c^2/4)((Psi(Y,psi Z) - eta(Y)eta(Z)) psi X \
                 - (Psi(X,psi Z) - eta(X)eta(Z)) psi Y - Psi(Y,Z) psi^2 X + Psi(X,Z) psi^2 Y \
                 + (eta(X)Psi(Y,Z) - eta(Y)Psi(X,Z)) xi)"
            }
            IdentityId::PIdentity => {
                "g(R(X,Y)phi Z, W) + g(R(X,Y)Z, phi W) = -P(X,Y,Z,W), P = (c^2/4)(Psi(Y,Z)Psi(X,psi W) \
                 - Psi(X,Z)Psi(Y,psi W) + Psi(Y,psi Z)Psi(X,W) - Psi(X,psi Z)Psi(Y,W) \
                 - eta(X)eta(W)Psi(Y,Z) - eta(Y)eta(Z)Psi(X,W) + eta(Y)eta(W)Psi(X,Z) + eta(X)eta(Z)Psi(Y,W))"
            }
            IdentityId::Phi4 => {
                "X,Y,Z,W horizontal: g(R(phi X,phi Y)phi Z, phi W) = g(R(X,Y)Z,W) \
                 + (c^2/4)(Psi(Z,X)Psi(W,psi phi Y) + Psi(Z,psi X)Psi(W,phi Y) \
                 + Psi(phi X,Z)Psi(phi Y,psi phi W) + Psi(phi X,psi Z)Psi(phi Y,phi W))"
            }
            IdentityId::PhiSectionalSum => {
                "X horizontal unit: H_1(X) + H_2(X) + H_3(X) = (3c^2/4) g(X_E4l, X_E4l)^2"
            }
        }
    }

    /// Whether the identity is indexed by `α` (all but the φ-sectional sum).
    pub fn per_alpha(self) -> bool {
        self != IdentityId::PhiSectionalSum
    }

    fn arity(self) -> usize {
        match self {
            IdentityId::PsiCube | IdentityId::PhiSectionalSum => 1,
            IdentityId::SymPsi2
            | IdentityId::NablaEta
            | IdentityId::DetaCpsi
            | IdentityId::NablaXi
            | IdentityId::NablaPsi
            | IdentityId::NablaPsiSq
            | IdentityId::RXi => 2,
            IdentityId::RPhiCommute => 3,
            IdentityId::PIdentity | IdentityId::Phi4 => 4,
        }
    }

    fn horizontal_args(self) -> bool {
        matches!(self, IdentityId::Phi4 | IdentityId::PhiSectionalSum)
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Where the largest defect of a [`ResidualStat`] occurred.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub point_index: usize,
    pub trial: usize,
    pub args: Vec<Vec<f64>>,
}

/// Residual of one identity (and `α`) accumulated over points and trials.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualStat {
    pub identity: IdentityId,
    pub alpha: Option<usize>,
    pub residual: Residual,
    pub n_trials: usize,
    /// Evaluated on a `c = 0` structure, where ψ_α is a convention.
    pub vacuous: bool,
    pub worst: Option<Witness>,
}

impl ResidualStat {
    pub fn new(identity: IdentityId, alpha: Option<usize>) -> Self {
        ResidualStat { identity, alpha, residual: Residual::default(), n_trials: 0, vacuous: false, worst: None }
    }

    pub fn normalized(&self) -> f64 {
        self.residual.normalized()
    }

    pub fn merge(&mut self, other: &ResidualStat) {
        let worse = other.residual.max_abs > self.residual.max_abs
            || (other.residual.max_abs.is_nan() && !self.residual.max_abs.is_nan());
        if other.worst.is_some() && (worse || self.worst.is_none()) {
            self.worst = other.worst.clone();
        }
        self.residual.merge(&other.residual);
        self.n_trials += other.n_trials;
        self.vacuous |= other.vacuous;
    }
}

/// One evaluation: defect size and the size of each term.
#[derive(Clone, Debug)]
struct Eval {
    defect: f64,
    terms: Vec<f64>,
}

fn balance_vec(lhs: &[PointVector], rhs: &[PointVector]) -> Eval {
    let d = lhs.first().or(rhs.first()).map_or(0, |v| v.len());
    let mut diff = PointVector::zeros(d);
    for v in lhs {
        diff += v;
    }
    for v in rhs {
        diff -= v;
    }
    Eval { defect: diff.amax(), terms: lhs.iter().chain(rhs).map(|v| v.amax()).collect() }
}

fn balance(lhs: &[f64], rhs: &[f64]) -> Eval {
    Eval { defect: lhs.iter().sum::<f64>() - rhs.iter().sum::<f64>(), terms: lhs.iter().chain(rhs).copied().collect() }
}

/// Everything needed to evaluate identities at one point.
#[derive(Clone, Debug)]
pub struct PointAnalysis {
    pub point: Vec<f64>,
    pub geom: PointGeometry,
    pub structure: Structure3Eval,
    pub split: SplitEval,
    jets: SplitJets,
    xi1: [Vec<Jet1>; 3],
    eta1: [Vec<Jet1>; 3],
}

/// `φ_α(E^{4m}) ⊆ E^{4m}` tolerance used when building a [`PointAnalysis`].
pub const INVARIANCE_TOL: f64 = 1e-8;

impl PointAnalysis {
    pub fn new(m: &ChartedManifold, p: &[f64]) -> Result<Self> {
        Self::from_jets(p, &m.jets_at(p)?)
    }

    pub fn from_jets(p: &[f64], s: &StructureJets<Jet2>) -> Result<Self> {
        let structure = Structure3Eval::from_values(p, &value_part(s))?;
        let geom = PointGeometry::from_metric_jets(p, &s.g)?;
        let (split, jets) = split_from_jets(s, None)?;
        if !(split.e4m_invariance <= INVARIANCE_TOL) {
            return Err(Error::NotThreeQuasiSasakian(format!(
                "phi does not preserve E^(4m): defect {:e}",
                split.e4m_invariance
            )));
        }
        let t = s.truncate();
        let eta1 = std::array::from_fn(|a| t.g.matvec(&t.xi[a]));
        Ok(PointAnalysis { point: p.to_vec(), geom, structure, split, jets, xi1: t.xi, eta1 })
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn c(&self) -> f64 {
        self.split.c
    }

    pub fn metric(&self) -> &MetricFrame {
        &self.structure.g
    }

    fn g(&self, x: &PointVector, y: &PointVector) -> f64 {
        self.structure.g.inner(x, y)
    }

    pub fn phi(&self, a: usize, x: &PointVector) -> PointVector {
        &self.structure.phi[a] * x
    }

    pub fn psi(&self, a: usize, x: &PointVector) -> PointVector {
        &self.split.psi[a] * x
    }

    pub fn psi2(&self, a: usize, x: &PointVector) -> PointVector {
        self.psi(a, &self.psi(a, x))
    }

    pub fn eta(&self, a: usize, x: &PointVector) -> f64 {
        self.structure.eta[a].dot(x)
    }

    /// `Ψ_α(X,Y) = g(X, ψ_α Y)`
    pub fn big_psi(&self, a: usize, x: &PointVector, y: &PointVector) -> f64 {
        self.g(x, &self.psi(a, y))
    }

    fn r(&self, x: &PointVector, y: &PointVector, z: &PointVector) -> PointVector {
        self.geom.curvature_operator(x, y, z)
    }

    /// The tensor `P_α(X,Y,Z,W)`.
    pub fn p_tensor(&self, a: usize, x: &PointVector, y: &PointVector, z: &PointVector, w: &PointVector) -> f64 {
        self.p_terms(a, x, y, z, w).iter().sum()
    }

    fn p_terms(&self, a: usize, x: &PointVector, y: &PointVector, z: &PointVector, w: &PointVector) -> [f64; 8] {
        let k = self.c() * self.c() / 4.0;
        let ps = |u: &PointVector, v: &PointVector| self.big_psi(a, u, v);
        let e = |u: &PointVector| self.eta(a, u);
        let (pz, pw) = (self.psi(a, z), self.psi(a, w));
        [
            k * ps(y, z) * ps(x, &pw),
            -k * ps(x, z) * ps(y, &pw),
            k * ps(y, &pz) * ps(x, w),
            -k * ps(x, &pz) * ps(y, w),
            -k * e(x) * e(w) * ps(y, z),
            -k * e(y) * e(z) * ps(x, w),
            k * e(y) * e(w) * ps(x, z),
            k * e(x) * e(z) * ps(y, w),
        ]
    }

    fn eval(&self, id: IdentityId, a: usize, v: &[PointVector]) -> Result<Eval> {
        let c = self.c();
        let half = c / 2.0;
        let k = c * c / 4.0;
        Ok(match id {
            IdentityId::SymPsi2 => balance(&[self.g(&self.psi2(a, &v[0]), &v[1])], &[self.g(&v[0], &self.psi2(a, &v[1]))]),
            IdentityId::PsiCube => {
                let px = self.psi(a, &v[0]);
                balance_vec(&[self.psi2(a, &px), px], &[])
            }
            IdentityId::NablaEta => {
                let lhs = self.geom.nabla_covector(&self.eta1[a], &v[0]).dot(&v[1]);
                balance(&[lhs], &[half * self.big_psi(a, &v[0], &v[1])])
            }
            IdentityId::DetaCpsi => {
                let lhs = (v[0].transpose() * &self.split.deta[a] * &v[1])[(0, 0)];
                balance(&[lhs], &[c * self.big_psi(a, &v[0], &v[1])])
            }
            IdentityId::NablaXi => {
                let lhs = self.geom.nabla_vector(&self.xi1[a], &v[0]);
                balance_vec(&[lhs], &[self.psi(a, &v[0]) * -half])
            }
            IdentityId::NablaPsi => {
                let (x, y) = (&v[0], &v[1]);
                let lhs = self.geom.nabla_endomorphism(&self.jets.psi[a], x) * y;
                let p2x = self.psi2(a, x);
                let xi = &self.structure.xi[a];
                balance_vec(&[lhs], &[&p2x * (half * self.eta(a, y)), xi * (-half * self.g(&p2x, y))])
            }
            IdentityId::NablaPsiSq => {
                let (x, y) = (&v[0], &v[1]);
                let lhs = self.geom.nabla_endomorphism(&self.jets.psi2[a], x) * y;
                let xi = &self.structure.xi[a];
                balance_vec(&[lhs], &[xi * (half * self.big_psi(a, x, y)), self.psi(a, x) * (-half * self.eta(a, y))])
            }
            IdentityId::RXi => {
                let (x, y) = (&v[0], &v[1]);
                let lhs = self.r(x, y, &self.structure.xi[a]);
                balance_vec(&[lhs], &[self.psi2(a, y) * (k * self.eta(a, x)), self.psi2(a, x) * (-k * self.eta(a, y))])
            }
            IdentityId::RPhiCommute => {
                let (x, y, z) = (&v[0], &v[1], &v[2]);
                let e = |u: &PointVector| self.eta(a, u);
                let ps = |u: &PointVector, w: &PointVector| self.big_psi(a, u, w);
                let pz = self.psi(a, z);
                let lhs1 = self.r(x, y, &self.phi(a, z));
                let lhs2 = -self.phi(a, &self.r(x, y, z));
                let rhs = [
                    self.psi(a, x) * (k * (ps(y, &pz) - e(y) * e(z))),
                    self.psi(a, y) * (-k * (ps(x, &pz) - e(x) * e(z))),
                    self.psi2(a, x) * (-k * ps(y, z)),
                    self.psi2(a, y) * (k * ps(x, z)),
                    &self.structure.xi[a] * (k * (e(x) * ps(y, z) - e(y) * ps(x, z))),
                ];
                balance_vec(&[lhs1, lhs2], &rhs)
            }
            IdentityId::PIdentity => {
                let (x, y, z, w) = (&v[0], &v[1], &v[2], &v[3]);
                let lhs1 = self.g(&self.r(x, y, &self.phi(a, z)), w);
                let lhs2 = self.g(&self.r(x, y, z), &self.phi(a, w));
                let rhs = self.p_terms(a, x, y, z, w).map(|t| -t);
                balance(&[lhs1, lhs2], &rhs)
            }
            IdentityId::Phi4 => return self.phi4_eval(a, &v[0], &v[1], &v[2], &v[3]),
            IdentityId::PhiSectionalSum => {
                let s = self.phi_sectional_sum(&v[0])?;
                balance(&s.h, &[s.predicted])
            }
        })
    }

    fn check_horizontal(&self, v: &PointVector) -> Result<()> {
        let vert = self.structure.g.norm(&(&self.split.p_v * v));
        if vert > 1e-10 * self.structure.g.norm(v).max(1.0) {
            return Err(Error::Precondition(format!("argument is not horizontal (|P_V X| = {vert:e})")));
        }
        Ok(())
    }

    fn phi4_eval(&self, a: usize, x: &PointVector, y: &PointVector, z: &PointVector, w: &PointVector) -> Result<Eval> {
        for v in [x, y, z, w] {
            self.check_horizontal(v)?;
        }
        let k = self.c() * self.c() / 4.0;
        let ps = |u: &PointVector, v: &PointVector| self.big_psi(a, u, v);
        let (fx, fy, fz, fw) = (self.phi(a, x), self.phi(a, y), self.phi(a, z), self.phi(a, w));
        let lhs = self.g(&self.r(&fx, &fy, &fz), &fw);
        let base = self.g(&self.r(x, y, z), w);
        let rhs = [
            base,
            k * ps(z, x) * ps(w, &self.psi(a, &fy)),
            k * ps(z, &self.psi(a, x)) * ps(w, &fy),
            k * ps(&fx, z) * ps(&fy, &self.psi(a, &fw)),
            k * ps(&fx, &self.psi(a, z)) * ps(&fy, &fw),
        ];
        Ok(balance(&[lhs], &rhs))
    }

    /// Random g-unit argument vectors for `id`, horizontal where required.
    pub fn draw_args<R: Rng + ?Sized>(&self, id: IdentityId, rng: &mut R) -> Result<Vec<PointVector>> {
        (0..id.arity())
            .map(|_| {
                if id.horizontal_args() {
                    self.random_horizontal(rng)
                } else {
                    self.structure.g.normalize(&gaussian_vector(rng, self.dim()))
                }
            })
            .collect()
    }

    pub fn random_horizontal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointVector> {
        let v = &self.split.p_h * gaussian_vector(rng, self.dim());
        self.structure.g.normalize(&v)
    }

    /// Residual of one identity on explicit arguments.
    pub fn identity_residual(&self, id: IdentityId, alpha: usize, args: &[PointVector]) -> Result<Residual> {
        if args.len() != id.arity() {
            return Err(Error::Dimension(format!("{id} takes {} vector arguments, got {}", id.arity(), args.len())));
        }
        let e = self.eval(id, alpha, args)?;
        let mut r = Residual::default();
        r.record(e.defect, &e.terms);
        Ok(r)
    }

    /// [`ResidualStat`] over `trials` random argument tuples drawn from `rng`.
    pub fn identity_stat<R: Rng + ?Sized>(
        &self,
        id: IdentityId,
        alpha: Option<usize>,
        trials: usize,
        rng: &mut R,
        point_index: usize,
    ) -> Result<ResidualStat> {
        let mut stat = ResidualStat::new(id, alpha);
        stat.vacuous = self.split.degenerate;
        for trial in 0..trials {
            let args = self.draw_args(id, rng)?;
            let e = self.eval(id, alpha.unwrap_or(0), &args)?;
            if e.defect.abs() > stat.residual.max_abs || e.defect.is_nan() || stat.worst.is_none() {
                stat.worst = Some(Witness {
                    point_index,
                    trial,
                    args: args.iter().map(|v| v.as_slice().to_vec()).collect(),
                });
            }
            stat.residual.record(e.defect, &e.terms);
            stat.n_trials += 1;
        }
        Ok(stat)
    }

    /// `H_α(X)`, the sectional curvature of the plane `(X, φ_α X)`.
    pub fn phi_sectional(&self, a: usize, x: &PointVector) -> Result<f64> {
        let fx = self.phi(a, x);
        if self.structure.g.norm(&fx) <= 1e-10 {
            return Err(Error::Precondition("phi X vanishes".into()));
        }
        self.geom.sectional(x, &fx)
    }

    /// `H_1 + H_2 + H_3` against `(3c²/4)‖X_{E4l}‖⁴`, with the cyclic partial
    /// sums `H_γ − g(R(X,φ_γX)φ_{γ+1}X, φ_{γ+2}X)`, each predicted to be
    /// `(c²/4)‖X_{E4l}‖⁴`.
    pub fn phi_sectional_sum(&self, x: &PointVector) -> Result<PhiSectionalSum> {
        self.check_horizontal(x)?;
        let h: [f64; 3] = [self.phi_sectional(0, x)?, self.phi_sectional(1, x)?, self.phi_sectional(2, x)?];
        let t = self.g(&(&self.split.p_e4l * x), &(&self.split.p_e4l * x));
        let k = self.c() * self.c() / 4.0;
        let norm4 = self.g(x, x).powi(2);
        let fx: [PointVector; 3] = std::array::from_fn(|a| self.phi(a, x));
        let cross: [f64; 3] = std::array::from_fn(|g| {
            let (a, b) = ((g + 1) % 3, (g + 2) % 3);
            self.g(&self.r(x, &fx[g], &fx[a]), &fx[b]) / norm4
        });
        let partials = std::array::from_fn(|g| h[g] - cross[g]);
        let sum = h.iter().sum();
        let predicted = 3.0 * k * t * t;
        Ok(PhiSectionalSum {
            h,
            sum,
            predicted,
            residual: (sum - predicted).abs(),
            partials,
            partial_predicted: k * t * t,
            bianchi: cross.iter().sum(),
            e4l_norm_sq: t,
        })
    }

    /// Sectional curvatures of the 6 planes of the horizontal section
    /// `⟨X, φ_1X, φ_2X, φ_3X⟩` and their spread.
    pub fn horizontal_section(&self, x: &PointVector) -> Result<(Vec<f64>, f64)> {
        self.check_horizontal(x)?;
        let vs = [x.clone(), self.phi(0, x), self.phi(1, x), self.phi(2, x)];
        let gram = nalgebra::DMatrix::from_fn(4, 4, |i, j| self.g(&vs[i], &vs[j]));
        let min_eig = gram.symmetric_eigenvalues().min();
        if !(min_eig > 1e-10 * gram.amax()) {
            return Err(Error::Precondition(format!("horizontal section is degenerate (Gram eigenvalue {min_eig:e})")));
        }
        let mut ks = Vec::with_capacity(6);
        for i in 0..4 {
            for j in (i + 1)..4 {
                ks.push(self.geom.sectional(&vs[i], &vs[j])?);
            }
        }
        let spread = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max) - ks.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((ks, spread))
    }

    /// `K(X, ξ_α) − (c²/4)‖X_{E4l}‖²` for horizontal unit `X`.
    pub fn reeb_sectional_residual(&self, a: usize, x: &PointVector) -> Result<Residual> {
        self.check_horizontal(x)?;
        let k = self.geom.sectional(x, &self.structure.xi[a])?;
        let t = self.g(&(&self.split.p_e4l * x), &(&self.split.p_e4l * x));
        let predicted = self.c() * self.c() / 4.0 * t;
        let mut r = Residual::default();
        r.record(k - predicted, &[k, predicted]);
        Ok(r)
    }
}

/// Value parts of a jet evaluation.
pub fn value_part(s: &StructureJets<Jet2>) -> StructureJets<f64> {
    StructureJets {
        g: JetMat::from_fn(s.g.nrows(), s.g.ncols(), |i, j| s.g.get(i, j).value),
        phi: std::array::from_fn(|a| JetMat::from_fn(s.phi[a].nrows(), s.phi[a].ncols(), |i, j| s.phi[a].get(i, j).value)),
        xi: std::array::from_fn(|a| s.xi[a].iter().map(|v| v.value).collect()),
    }
}

/// Outcome of the φ-sectional sum check at one `X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiSectionalSum {
    pub h: [f64; 3],
    pub sum: f64,
    pub predicted: f64,
    pub residual: f64,
    pub partials: [f64; 3],
    pub partial_predicted: f64,
    /// `Σ_γ g(R(X,φ_γX)φ_{γ+1}X, φ_{γ+2}X)`; zero by the Bianchi identity.
    pub bianchi: f64,
    pub e4l_norm_sq: f64,
}

/// Point analyses for all `points`, in order.
pub fn analyze_points(m: &ChartedManifold, points: &[Vec<f64>]) -> Result<Vec<PointAnalysis>> {
    points.par_iter().map(|p| PointAnalysis::new(m, p)).collect()
}

/// One identity at one point over `trials` seeded argument tuples.
pub fn identity_stat_at(
    m: &ChartedManifold,
    p: &[f64],
    id: IdentityId,
    alpha: usize,
    trials: usize,
    seed: u64,
) -> Result<ResidualStat> {
    let pa = PointAnalysis::new(m, p)?;
    pa.identity_stat(id, id.per_alpha().then_some(alpha), trials, &mut point_rng(seed, 0), 0)
}

pub fn r_xi_residual(m: &ChartedManifold, p: &[f64], x: &PointVector, y: &PointVector, alpha: usize) -> Result<Residual> {
    PointAnalysis::new(m, p)?.identity_residual(IdentityId::RXi, alpha, &[x.clone(), y.clone()])
}

pub fn r_phi_commute_residual(
    m: &ChartedManifold,
    p: &[f64],
    x: &PointVector,
    y: &PointVector,
    z: &PointVector,
    alpha: usize,
) -> Result<Residual> {
    PointAnalysis::new(m, p)?.identity_residual(IdentityId::RPhiCommute, alpha, &[x.clone(), y.clone(), z.clone()])
}

/// Residual of the `P_α` identity and the value of `P_α(X,Y,Z,W)`.
pub fn p_identity_residual(
    m: &ChartedManifold,
    p: &[f64],
    args: [&PointVector; 4],
    alpha: usize,
) -> Result<(Residual, f64)> {
    let pa = PointAnalysis::new(m, p)?;
    let v: Vec<PointVector> = args.iter().map(|v| (*v).clone()).collect();
    let r = pa.identity_residual(IdentityId::PIdentity, alpha, &v)?;
    Ok((r, pa.p_tensor(alpha, args[0], args[1], args[2], args[3])))
}

pub fn phi4_residual(m: &ChartedManifold, p: &[f64], args: [&PointVector; 4], alpha: usize) -> Result<Residual> {
    let v: Vec<PointVector> = args.iter().map(|v| (*v).clone()).collect();
    PointAnalysis::new(m, p)?.identity_residual(IdentityId::Phi4, alpha, &v)
}

pub fn phi_sectional(m: &ChartedManifold, p: &[f64], x: &PointVector, alpha: usize) -> Result<f64> {
    let pa = PointAnalysis::new(m, p)?;
    pa.check_horizontal(x)?;
    pa.phi_sectional(alpha, x)
}

pub fn phi_sectional_sum_check(m: &ChartedManifold, p: &[f64], x: &PointVector) -> Result<PhiSectionalSum> {
    PointAnalysis::new(m, p)?.phi_sectional_sum(x)
}

pub fn horizontal_section_spread(m: &ChartedManifold, p: &[f64], x: &PointVector) -> Result<(Vec<f64>, f64)> {
    PointAnalysis::new(m, p)?.horizontal_section(x)
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Verdict of the constant horizontal sectional curvature test.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    ThreeCSasakian { c: f64, k: f64 },
    ThreeCosymplecticFlat,
    /// Two horizontal-section curvatures that differ beyond tolerance.
    NonConstantHSC { low: f64, high: f64 },
}

/// Six decimals with trailing zeros dropped; the JSON report keeps full
/// precision.
fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::ThreeCSasakian { c, k } => {
                write!(f, "3-c-Sasakian (c = {}, constant curvature {})", short(*c), short(*k))
            }
            Verdict::ThreeCosymplecticFlat => write!(f, "3-cosymplectic, flat"),
            Verdict::NonConstantHSC { low, high } => {
                write!(f, "non-constant horizontal sectional curvature (values {} and {})", short(*low), short(*high))
            }
        }
    }
}

/// Range of horizontal-section curvatures seen at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointEvidence {
    pub point_index: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Vec<PointEvidence>,
}

/// Minimum sample sizes for [`classify_chsc`].
pub const MIN_CLASSIFY_POINTS: usize = 8;
pub const MIN_CLASSIFY_DIRECTIONS: usize = 8;

/// Classifies from precomputed point analyses; `directions` random
/// horizontal `X` per point, plus unit probes from `E^{4l}` and `E^{4m}`
/// when both are nontrivial.
pub fn classify_analyses(
    m: &ChartedManifold,
    analyses: &[PointAnalysis],
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<Classification> {
    if analyses.len() < MIN_CLASSIFY_POINTS || directions < MIN_CLASSIFY_DIRECTIONS {
        return Err(Error::Precondition(format!(
            "classification needs at least {MIN_CLASSIFY_POINTS} points and {MIN_CLASSIFY_DIRECTIONS} directions, got {} and {directions}",
            analyses.len()
        )));
    }
    struct PointData {
        hsc: Vec<f64>,
        sectional: Vec<f64>,
        riemann_max: f64,
    }
    let data: Vec<PointData> = analyses
        .par_iter()
        .enumerate()
        .map(|(i, pa)| {
            let mut rng = point_rng(seed, (2 << 32) | i as u64);
            let mut xs = Vec::with_capacity(directions + 2);
            for _ in 0..directions {
                xs.push(pa.random_horizontal(&mut rng)?);
            }
            let e4l_dim = pa.split.p_e4l.trace().round();
            let e4m_dim = pa.split.p_e4m.trace().round();
            if e4l_dim > 0.5 && e4m_dim > 0.5 {
                for proj in [&pa.split.p_e4l, &pa.split.p_e4m] {
                    let v = proj * gaussian_vector(&mut rng, pa.dim());
                    xs.push(pa.metric().normalize(&v)?);
                }
            }
            let mut hsc = Vec::with_capacity(6 * xs.len());
            for x in &xs {
                hsc.extend(pa.horizontal_section(x)?.0);
            }
            let mut sectional = Vec::with_capacity(directions);
            for _ in 0..directions {
                let x = gaussian_vector(&mut rng, pa.dim());
                let y = gaussian_vector(&mut rng, pa.dim());
                sectional.push(pa.geom.sectional(&x, &y)?);
            }
            let riemann_max = pa.geom.riemann_slice().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            Ok(PointData { hsc, sectional, riemann_max })
        })
        .collect::<Result<_>>()?;

    let evidence: Vec<PointEvidence> = data
        .iter()
        .enumerate()
        .map(|(i, d)| PointEvidence {
            point_index: i,
            min: d.hsc.iter().copied().fold(f64::INFINITY, f64::min),
            max: d.hsc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let low = evidence.iter().map(|e| e.min).fold(f64::INFINITY, f64::min);
    let high = evidence.iter().map(|e| e.max).fold(f64::NEG_INFINITY, f64::max);
    let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
    if !close(low, high) {
        return Ok(Classification { verdict: Verdict::NonConstantHSC { low, high }, evidence });
    }

    let points: Vec<Vec<f64>> = analyses.iter().map(|a| a.point.clone()).collect();
    let c = reeb_constant(m, &points)?;
    let d = m.dim();
    let verdict = if c.abs() <= crate::contact3::REEB_ZERO_TOL {
        let riemann_max = data.iter().map(|d| d.riemann_max).fold(0.0, f64::max);
        if riemann_max > tol {
            return Err(Error::InternalConsistency(format!(
                "constant horizontal sectional curvature with c = 0 but |R| reaches {riemann_max:e}"
            )));
        }
        Verdict::ThreeCosymplecticFlat
    } else {
        let k = c * c / 4.0;
        let max_rank = analyses.iter().all(|a| a.split.rank == d);
        let worst = data.iter().flat_map(|d| d.sectional.iter()).map(|s| (s - k).abs()).fold(0.0, f64::max);
        if !max_rank || !close(low, k) || worst > tol * k.max(1.0) {
            return Err(Error::InternalConsistency(format!(
                "constant horizontal sectional curvature {low} but c = {c}, maximal rank: {max_rank}, \
                 sectional deviation from c^2/4: {worst:e}"
            )));
        }
        Verdict::ThreeCSasakian { c, k }
    };
    Ok(Classification { verdict, evidence })
}

/// Classification over the given sample points.
pub fn classify_chsc(
    m: &ChartedManifold,
    points: &[Vec<f64>],
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<Classification> {
    if points.len() < MIN_CLASSIFY_POINTS {
        return Err(Error::Precondition(format!(
            "classification needs at least {MIN_CLASSIFY_POINTS} points, got {}",
            points.len()
        )));
    }
    classify_analyses(m, &analyze_points(m, points)?, directions, tol, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{flat_cosymplectic, homothety, product_3qs, sphere_3sasakian};
    use crate::sampling::sample_points;

    fn all_identities_hold(m: &ChartedManifold, tol: f64) {
        for (i, p) in sample_points(11, 3, m.dim(), 1.0).iter().enumerate() {
            let pa = PointAnalysis::new(m, p).unwrap();
            let mut rng = point_rng(5, i as u64);
            for id in IdentityId::ALL {
                for a in 0..3 {
                    let s = pa.identity_stat(id, Some(a), 4, &mut rng, i).unwrap();
                    assert!(s.normalized() <= tol, "{} {id} alpha={a}: {:?}", m.name(), s.residual);
                }
            }
        }
    }

    #[test]
    fn sphere_satisfies_every_identity() {
        all_identities_hold(&sphere_3sasakian(1), 1e-9);
    }

    #[test]
    fn homothetic_sphere_satisfies_every_identity() {
        all_identities_hold(&homothety(&sphere_3sasakian(1), 4.0).unwrap(), 1e-9);
    }

    #[test]
    fn product_satisfies_every_identity() {
        all_identities_hold(&product_3qs(1, 1), 1e-9);
    }

    #[test]
    fn flat_identities_are_vacuous() {
        let m = flat_cosymplectic(1);
        let pa = PointAnalysis::new(&m, &[0.2; 7]).unwrap();
        let s = pa.identity_stat(IdentityId::RXi, Some(0), 3, &mut point_rng(0, 0), 0).unwrap();
        assert!(s.vacuous);
        assert_eq!(s.residual.max_abs, 0.0);
    }

    #[test]
    fn reeb_curvature_on_sphere() {
        let m = sphere_3sasakian(1);
        let pa = PointAnalysis::new(&m, &[0.1, 0.2, 0.0, -0.3, 0.1, 0.0, 0.2]).unwrap();
        let x = pa.random_horizontal(&mut point_rng(1, 1)).unwrap();
        let xi = pa.structure.xi[0].clone();
        // R(X,ξ)ξ = X on a Sasakian manifold
        let lhs = pa.geom.curvature_operator(&x, &xi, &xi);
        assert!((lhs - &x).amax() < 1e-10);
    }

    #[test]
    fn phi4_rejects_vertical_arguments() {
        let m = sphere_3sasakian(1);
        let pa = PointAnalysis::new(&m, &[0.0; 7]).unwrap();
        let xi = pa.structure.xi[0].clone();
        let r = pa.identity_residual(IdentityId::Phi4, 0, &[xi.clone(), xi.clone(), xi.clone(), xi]);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn product_phi_sectional_sums() {
        let m = product_3qs(1, 1);
        let p: Vec<f64> = (0..11).map(|i| 0.04 * i as f64 - 0.2).collect();
        let pa = PointAnalysis::new(&m, &p).unwrap();
        let mut rng = point_rng(3, 0);
        let unit = |proj: &nalgebra::DMatrix<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
            pa.metric().normalize(&(proj * gaussian_vector(rng, 11))).unwrap()
        };
        let x1 = unit(&pa.split.p_e4l, &mut rng);
        let x2 = unit(&pa.split.p_e4m, &mut rng);
        assert!((pa.phi_sectional_sum(&x1).unwrap().sum - 3.0).abs() < 1e-9);
        assert!(pa.phi_sectional_sum(&x2).unwrap().sum.abs() < 1e-9);
        let mixed = (&x1 + &x2) / 2f64.sqrt();
        let s = pa.phi_sectional_sum(&mixed).unwrap();
        assert!((s.predicted - 0.75).abs() < 1e-9);
        assert!(s.residual < 1e-9, "{s:?}");
        assert!(s.bianchi.abs() < 1e-9);
        for g in 0..3 {
            assert!((s.partials[g] - s.partial_predicted).abs() < 1e-9, "{s:?}");
        }
        for a in 0..3 {
            assert!(pa.reeb_sectional_residual(a, &mixed).unwrap().normalized() < 1e-9);
        }
    }

    #[test]
    fn classification_of_catalog() {
        let pts = |d| sample_points(21, 8, d, 1.0);
        let sphere = classify_chsc(&sphere_3sasakian(1), &pts(7), 8, 1e-8, 1).unwrap();
        match sphere.verdict {
            Verdict::ThreeCSasakian { c, k } => {
                assert!((c - 2.0).abs() < 1e-9 && (k - 1.0).abs() < 1e-9);
            }
            v => panic!("{v:?}"),
        }
        let flat = classify_chsc(&flat_cosymplectic(1), &pts(7), 8, 1e-8, 1).unwrap();
        assert_eq!(flat.verdict, Verdict::ThreeCosymplecticFlat);
        let prod = classify_chsc(&product_3qs(1, 1), &pts(11), 8, 1e-8, 1).unwrap();
        match prod.verdict {
            Verdict::NonConstantHSC { low, high } => {
                assert!(low.abs() < 1e-9 && (high - 1.0).abs() < 1e-9, "{low} {high}");
            }
            v => panic!("{v:?}"),
        }
        assert!(classify_chsc(&sphere_3sasakian(1), &pts(7)[..3], 8, 1e-8, 1).is_err());
    }
}
