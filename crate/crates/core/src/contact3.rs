//! Almost contact metric 3-structures at a point: structure relations,
//! normality, the Reeb constant, rank, and the `E^{4m}` / `E^{4l+3}` split.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{d_one_form, d_two_form, lie_bracket, nijenhuis_tensor, ChartedManifold, StructureJets};
use crate::jet::{jet_inverse, jet_solve_matrix, Jet1, Jet2, JetMat, JetScalar};
use crate::sampling::{gaussian_vector, point_rng};
use crate::stats::Residual;
use crate::tensor::{interior, skew_spectrum, sorted_svd, wedge, AltForm, MetricFrame, PointVector};

/// `(α, β, γ)` even permutations of `(0, 1, 2)`.
pub const EVEN_PERMUTATIONS: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

/// Defect above which [`structure_eval`] rejects its input.
pub const STRUCTURE_TOL: f64 = 1e-6;
/// Relative singular-value cut for ranks and kernels.
pub const RANK_TOL: f64 = 1e-7;
/// Singular values between `GAP_LOW·σ_max` and `GAP_HIGH·σ_max` make a rank
/// decision ambiguous.
const GAP_LOW: f64 = 1e-10;
const GAP_HIGH: f64 = 1e-4;
/// Bracket coefficients below this count as `c = 0`.
pub const REEB_ZERO_TOL: f64 = 1e-8;
/// Tolerance on the Reeb bracket's transverse part and spread.
pub const REEB_TOL: f64 = 1e-8;

fn outer(a: &PointVector, b: &PointVector) -> DMatrix<f64> {
    a * b.transpose()
}

/// Values of the structure tensors at one point.
#[derive(Clone, Debug)]
pub struct Structure3Eval {
    pub point: Vec<f64>,
    pub g: MetricFrame,
    /// `(φ_α)^i_j`
    pub phi: [DMatrix<f64>; 3],
    pub xi: [PointVector; 3],
    /// `η_α = g(ξ_α, ·)`
    pub eta: [PointVector; 3],
    /// `Φ_α(X,Y) = g(X, φ_α Y)`
    pub fundamental: [AltForm; 3],
}

impl Structure3Eval {
    /// Builds the evaluation without checking the structure relations.
    pub fn from_values_unchecked(p: &[f64], s: &StructureJets<f64>) -> Result<Self> {
        let g = MetricFrame::new(s.g.values())?;
        let phi: [DMatrix<f64>; 3] = std::array::from_fn(|a| s.phi[a].values());
        let xi: [PointVector; 3] = std::array::from_fn(|a| DVector::from_column_slice(&s.xi[a]));
        let eta = std::array::from_fn(|a| &g.g * &xi[a]);
        let fundamental = std::array::from_fn(|a| {
            let m = &g.g * &phi[a];
            AltForm::from_skew_matrix(&((&m - m.transpose()) * 0.5))
        });
        Ok(Structure3Eval { point: p.to_vec(), g, phi, xi, eta, fundamental })
    }

    pub fn from_values(p: &[f64], s: &StructureJets<f64>) -> Result<Self> {
        let e = Self::from_values_unchecked(p, s)?;
        for (relation, residual) in e.defects() {
            if !(residual <= STRUCTURE_TOL) {
                return Err(Error::StructureDefect { relation: relation.to_string(), residual });
            }
        }
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Largest defect of each defining relation.
    pub fn defects(&self) -> [(&'static str, f64); 3] {
        let d = self.dim();
        let id = DMatrix::<f64>::identity(d, d);
        let mut ortho = 0.0_f64;
        let mut square = 0.0_f64;
        let mut skew = 0.0_f64;
        for a in 0..3 {
            for b in 0..3 {
                let target = if a == b { 1.0 } else { 0.0 };
                ortho = ortho.max((self.eta[a].dot(&self.xi[b]) - target).abs());
            }
            let sq = &self.phi[a] * &self.phi[a] + &id - outer(&self.xi[a], &self.eta[a]);
            square = square.max(sq.amax());
            let m = &self.g.g * &self.phi[a];
            skew = skew.max((&m + m.transpose()).amax());
        }
        [("eta_a(xi_b) = delta_ab", ortho), ("phi_a^2 = -I + xi_a (x) eta_a", square), ("Phi_a skew", skew)]
    }
}

/// Structure tensors at `p`, rejecting defects above [`STRUCTURE_TOL`].
pub fn structure_eval(m: &ChartedManifold, p: &[f64]) -> Result<Structure3Eval> {
    Structure3Eval::from_values(p, &m.values_at(p)?)
}

/// Residual of the 3-structure relations and metric compatibility, taken as
/// the largest entry of each defect tensor over all even permutations.
pub fn ac3_residual(s: &Structure3Eval) -> Residual {
    let d = s.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let g = &s.g.g;
    let mut r = Residual::default();
    for (a, b, c) in EVEN_PERMUTATIONS {
        let prod = &s.phi[a] * &s.phi[b];
        let corr = outer(&s.xi[a], &s.eta[b]);
        r.record_matrix(&(&s.phi[c] - &prod + &corr), &[&s.phi[c], &prod, &corr]);
        let px = &s.phi[a] * &s.xi[b];
        r.record_vector(&(&s.xi[c] - &px), &[&s.xi[c], &px]);
        let ep = s.phi[b].transpose() * &s.eta[a];
        r.record_vector(&(&s.eta[c] - &ep), &[&s.eta[c], &ep]);
    }
    for a in 0..3 {
        let pgp = s.phi[a].transpose() * g * &s.phi[a];
        let ee = outer(&s.eta[a], &s.eta[a]);
        r.record_matrix(&(&pgp - g + &ee), &[&pgp, g, &ee]);
        let sq = &s.phi[a] * &s.phi[a];
        let xe = outer(&s.xi[a], &s.eta[a]);
        r.record_matrix(&(&sq + &id - &xe), &[&sq, &id, &xe]);
        for b in 0..3 {
            let v = s.eta[a].dot(&s.xi[b]);
            r.record(v - if a == b { 1.0 } else { 0.0 }, &[v]);
        }
    }
    r
}

pub fn check_ac3_relations(m: &ChartedManifold, p: &[f64]) -> Result<Residual> {
    Ok(ac3_residual(&Structure3Eval::from_values_unchecked(p, &m.values_at(p)?)?))
}

/// `η_α = g ξ_α` with full jets.
pub fn eta_jets<T: JetScalar>(s: &StructureJets<T>, alpha: usize) -> Vec<T> {
    s.g.matvec(&s.xi[alpha])
}

/// Normality `N_{φ_α} + dη_α ⊗ ξ_α` and closedness `dΦ_α` residuals.
pub fn quasi_sasakian_residuals(s: &StructureJets<Jet2>, alpha: usize) -> (Residual, Residual) {
    let d = s.dim();
    let n = nijenhuis_tensor(&s.phi[alpha]);
    let deta = d_one_form(&eta_jets(s, alpha));
    let mut normal = Residual::default();
    for k in 0..d {
        let xk = s.xi[alpha][k].value;
        for i in 0..d {
            for j in 0..d {
                let nk = n[(k * d + i) * d + j];
                let t = deta.component(&[i, j]) * xk;
                normal.record(nk + t, &[nk, t]);
            }
        }
    }
    let big_phi = s.g.matmul(&s.phi[alpha]);
    let dphi = d_two_form(&big_phi);
    let mut closed = Residual::default();
    let partials: Vec<f64> = (0..d)
        .flat_map(|i| (0..d).flat_map(move |j| (0..d).map(move |k| (i, j, k))))
        .map(|(i, j, k)| big_phi.get(j, k).d(i))
        .collect();
    closed.record(dphi.max_abs(), &partials);
    (normal, closed)
}

/// `(normality, dΦ)` residuals of structure `alpha` at `p`.
pub fn check_quasi_sasakian(m: &ChartedManifold, p: &[f64], alpha: usize) -> Result<(Residual, Residual)> {
    Ok(quasi_sasakian_residuals(&m.jets_at(p)?, alpha))
}

/// Coefficient of `ξ_γ` in `[ξ_α, ξ_β]` and the g-norm of the rest, per
/// even permutation.
pub fn reeb_coefficients(s: &StructureJets<Jet2>) -> Result<[(f64, f64); 3]> {
    let g = MetricFrame::new(s.g.values())?;
    let xi: [PointVector; 3] = std::array::from_fn(|a| crate::jet::values(&s.xi[a]));
    Ok(EVEN_PERMUTATIONS.map(|(a, b, c)| {
        let br = lie_bracket(&s.xi[a], &s.xi[b]);
        let coef = g.inner(&br, &xi[c]);
        let rest = &br - &xi[c] * coef;
        (coef, g.norm(&rest))
    }))
}

/// The constant `c` in `[ξ_α, ξ_β] = c ξ_γ`, checked for consistency
/// across all points and even permutations.
pub fn reeb_constant(m: &ChartedManifold, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Precondition("reeb_constant needs at least one point".into()));
    }
    let mut coefs = Vec::with_capacity(3 * points.len());
    for p in points {
        for (coef, rest) in reeb_coefficients(&m.jets_at(p)?)? {
            if !(rest <= REEB_TOL * coef.abs().max(1.0)) {
                return Err(Error::NotThreeQuasiSasakian(format!(
                    "[xi_a, xi_b] has a component of norm {rest:e} off xi_c at {p:?}"
                )));
            }
            coefs.push(coef);
        }
    }
    let lo = coefs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo <= REEB_TOL * hi.abs().max(lo.abs()).max(1.0)) {
        return Err(Error::NotThreeQuasiSasakian(format!("Reeb bracket coefficient varies in [{lo}, {hi}]")));
    }
    Ok(coefs.iter().sum::<f64>() / coefs.len() as f64)
}

fn check_gap(sv: &[f64]) -> Result<()> {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax > 0.0 && sv.iter().any(|&s| s > GAP_LOW * smax && s <= GAP_HIGH * smax) {
        return Err(Error::IndeterminateRank { singular_values: sv.to_vec() });
    }
    Ok(())
}

/// Rank of a 1-form `η` with differential matrix `deta`: `2p` from the
/// skew spectrum, plus one if `η` does not vanish on the kernel.
pub fn rank_from_matrix(eta: &PointVector, deta: &DMatrix<f64>) -> Result<usize> {
    let spec = skew_spectrum(deta, RANK_TOL)?;
    check_gap(&spec.singular_values)?;
    let on_kernel = spec.kernel.transpose() * eta;
    let scale = eta.amax();
    let k = if on_kernel.ncols() == 0 || on_kernel.nrows() == 0 { 0.0 } else { on_kernel.amax() };
    if scale > 0.0 && k > GAP_LOW * scale && k <= GAP_HIGH * scale {
        return Err(Error::IndeterminateRank { singular_values: spec.singular_values });
    }
    Ok(spec.rank + usize::from(scale > 0.0 && k > GAP_HIGH * scale))
}

/// Same rank from wedge powers: the largest `2p+1` with `η∧(dη)^p ≠ 0`,
/// else the largest `2p` with `(dη)^p ≠ 0`.
pub fn rank_from_wedges(eta: &PointVector, deta: &DMatrix<f64>) -> Result<usize> {
    let d = eta.len();
    let eta_f = AltForm::from_covector(eta.as_slice());
    let deta_f = AltForm::from_skew_matrix(deta);
    let unit = deta.amax().max(eta.amax()).max(f64::MIN_POSITIVE);
    let mut power = AltForm::scalar(d, 1.0);
    let mut best = 0;
    let mut fact = 1.0;
    for p in 0..=d / 2 {
        if p > 0 {
            fact *= p as f64;
            if power.max_abs() > GAP_HIGH * fact * unit.powi(p as i32) {
                best = best.max(2 * p);
            }
        }
        if 2 * p < d && wedge(&eta_f, &power)?.max_abs() > GAP_HIGH * fact * unit.powi(p as i32 + 1) {
            best = best.max(2 * p + 1);
        }
        if 2 * p + 2 <= d {
            power = wedge(&power, &deta_f)?;
        }
    }
    Ok(best)
}

/// Rank of `η_α` at `p`.
pub fn rank_at(m: &ChartedManifold, p: &[f64], alpha: usize) -> Result<usize> {
    let s = m.jets_at(p)?;
    let eta = eta_jets(&s, alpha);
    rank_from_matrix(&crate::jet::values(&eta), &d_one_form(&eta).to_skew_matrix())
}

/// Wedge-power rank of `η_α` at `p`; the brute-force oracle for [`rank_at`].
pub fn rank_at_by_wedges(m: &ChartedManifold, p: &[f64], alpha: usize) -> Result<usize> {
    let s = m.jets_at(p)?;
    let eta = eta_jets(&s, alpha);
    rank_from_wedges(&crate::jet::values(&eta), &d_one_form(&eta).to_skew_matrix())
}

/// Interior product check of the defining property of `E^{4m}`:
/// `i_X η_α = 0` and `i_X dη_α = 0` for every `α`.
pub fn in_e4m_by_contraction(s: &Structure3Eval, deta: &[DMatrix<f64>; 3], x: &PointVector) -> Result<f64> {
    let mut worst = 0.0_f64;
    for a in 0..3 {
        worst = worst.max(interior(x, &AltForm::from_covector(s.eta[a].as_slice()))?.max_abs());
        worst = worst.max(interior(x, &AltForm::from_skew_matrix(&deta[a]))?.max_abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

/// Projectors and split tensors at one point.
#[derive(Clone, Debug)]
pub struct SplitEval {
    pub p_v: DMatrix<f64>,
    pub p_h: DMatrix<f64>,
    pub p_e4m: DMatrix<f64>,
    pub p_e4l3: DMatrix<f64>,
    pub p_e4l: DMatrix<f64>,
    pub psi: [DMatrix<f64>; 3],
    pub theta: [DMatrix<f64>; 3],
    /// `Ψ_α(X,Y) = g(X, ψ_α Y)`
    pub big_psi: [AltForm; 3],
    /// `Θ_α(X,Y) = g(X, θ_α Y)`
    pub big_theta: [AltForm; 3],
    /// Reeb constant at this point.
    pub c: f64,
    pub rank: usize,
    pub l: usize,
    pub m: usize,
    /// `c = 0`: ψ_α is taken as `φ_α∘P_V` and ψ-identities are vacuous.
    pub degenerate: bool,
    /// Largest entry of `P_{E4l3} φ_α P_{E4m}`.
    pub e4m_invariance: f64,
    /// `dη_α` as matrices.
    pub deta: [DMatrix<f64>; 3],
}

/// Differentiable (first-order) versions of the split tensors, as needed
/// for covariant derivatives of `ψ_α`.
#[derive(Clone, Debug)]
pub struct SplitJets {
    pub p_e4l3: JetMat<Jet1>,
    pub p_v: JetMat<Jet1>,
    pub psi: [JetMat<Jet1>; 3],
    pub psi2: [JetMat<Jet1>; 3],
}

fn skew_form(g: &DMatrix<f64>, t: &DMatrix<f64>) -> AltForm {
    let m = g * t;
    AltForm::from_skew_matrix(&((&m - m.transpose()) * 0.5))
}

/// Splits the tangent space at `p`. `mix_seed` rotates the kernel basis
/// before building projectors, which must not change them.
pub fn split_from_jets(s: &StructureJets<Jet2>, mix_seed: Option<u64>) -> Result<(SplitEval, SplitJets)> {
    let d = s.dim();
    let t = s.truncate();
    let g1 = &t.g;
    let g_val = g1.values();
    let g_inv1 = jet_inverse(g1)?;
    let eta2: [Vec<Jet2>; 3] = std::array::from_fn(|a| eta_jets(s, a));
    let eta1: [Vec<Jet1>; 3] = std::array::from_fn(|a| eta2[a].iter().map(Jet2::truncate).collect());
    // dη_α as first-order jets
    let deta1: [JetMat<Jet1>; 3] =
        std::array::from_fn(|a| JetMat::from_fn(d, d, |i, j| eta2[a][j].partial(i) - eta2[a][i].partial(j)));
    let deta: [DMatrix<f64>; 3] = std::array::from_fn(|a| deta1[a].values());

    let p_v = (0..3).fold(JetMat::zeros(d, d, d), |acc, a| {
        acc.add(&JetMat::from_fn(d, d, |i, j| t.xi[a][i].clone() * eta1[a][j].clone()))
    });
    // S = −Σ B_α² + P_V with B_α = g⁻¹ dη_α; g-self-adjoint, kernel E^{4m}.
    let mut big_s = p_v.clone();
    for a in 0..3 {
        let b = g_inv1.matmul(&deta1[a]);
        big_s = big_s.sub(&b.matmul(&b));
    }
    let (sv, v) = sorted_svd(&big_s.values());
    check_gap(&sv)?;
    let smax = sv[0];
    let r = sv.iter().filter(|&&x| x > RANK_TOL * smax).count();
    let mut w = v.columns(0, r).into_owned();
    if let Some(seed) = mix_seed {
        let mut rng = point_rng(seed, 0);
        let mix = DMatrix::from_fn(r, r, |_, _| rng.random::<f64>() - 0.5) + DMatrix::identity(r, r) * 2.0;
        w *= mix;
    }
    let range = big_s.matmul(&JetMat::constant(&w, d));
    let rt_g = range.transpose().matmul(g1);
    let gram = rt_g.matmul(&range);
    let p_e4l3 = range.matmul(&jet_solve_matrix(&gram, &rt_g)?);

    let psi: [JetMat<Jet1>; 3] = std::array::from_fn(|a| t.phi[a].matmul(&p_e4l3));
    let psi2: [JetMat<Jet1>; 3] = std::array::from_fn(|a| psi[a].matmul(&psi[a]));

    let id = DMatrix::<f64>::identity(d, d);
    let p_e4l3_v = p_e4l3.values();
    let p_v_v = p_v.values();
    let p_e4m_v = &id - &p_e4l3_v;
    let phi_v: [DMatrix<f64>; 3] = std::array::from_fn(|a| t.phi[a].values());
    let psi_v: [DMatrix<f64>; 3] = std::array::from_fn(|a| psi[a].values());
    let theta: [DMatrix<f64>; 3] = std::array::from_fn(|a| &phi_v[a] * &p_e4m_v);
    let e4m_invariance = (0..3).map(|a| (&p_e4l3_v * &phi_v[a] * &p_e4m_v).amax()).fold(0.0, f64::max);

    let coefs = reeb_coefficients(s)?;
    let c = coefs.iter().map(|x| x.0).sum::<f64>() / 3.0;
    let degenerate = c.abs() <= REEB_ZERO_TOL;
    let rank = rank_from_matrix(&crate::jet::values(&eta2[0]), &deta[0])?;
    if !degenerate && rank != r {
        return Err(Error::InternalConsistency(format!(
            "dim E^(4l+3) = {r} from dη kernels but rank(η_1) = {rank}"
        )));
    }
    let (l, m) = if degenerate {
        if rank != 1 {
            return Err(Error::NotThreeQuasiSasakian(format!("c = 0 but rank(η_1) = {rank}")));
        }
        (0, (d - 3) / 4)
    } else {
        if r < 3 || !(r - 3).is_multiple_of(4) || !(d - r).is_multiple_of(4) {
            return Err(Error::NotThreeQuasiSasakian(format!("rank {r} is not of the form 4l+3 in dimension {d}")));
        }
        ((r - 3) / 4, (d - r) / 4)
    };

    let split = SplitEval {
        p_h: &id - &p_v_v,
        p_e4l: &p_e4l3_v - &p_v_v,
        p_v: p_v_v,
        p_e4m: p_e4m_v,
        p_e4l3: p_e4l3_v,
        big_psi: std::array::from_fn(|a| skew_form(&g_val, &psi_v[a])),
        big_theta: std::array::from_fn(|a| skew_form(&g_val, &theta[a])),
        psi: psi_v,
        theta,
        c,
        rank,
        l,
        m,
        degenerate,
        e4m_invariance,
        deta,
    };
    Ok((split, SplitJets { p_e4l3, p_v, psi, psi2 }))
}

pub fn split_eval(m: &ChartedManifold, p: &[f64]) -> Result<SplitEval> {
    Ok(split_from_jets(&m.jets_at(p)?, None)?.0)
}

/// `split_eval` with the kernel basis mixed by a seeded random matrix.
pub fn split_eval_mixed(m: &ChartedManifold, p: &[f64], seed: u64) -> Result<SplitEval> {
    Ok(split_from_jets(&m.jets_at(p)?, Some(seed))?.0)
}

/// Total geodesy of the two complementary foliations: with `X, Y` constant
/// vectors pushed through the projector field,
/// `‖P_{E4m} ∇_X Y‖` for `X, Y ∈ E^{4l+3}` and `‖P_{E4l3} ∇_X Y‖` for
/// `X, Y ∈ E^{4m}`.
pub fn check_invariant_foliations(m: &ChartedManifold, p: &[f64], trials: usize, seed: u64) -> Result<Residual> {
    foliation_residual(p, &m.jets_at(p)?, trials, &mut point_rng(seed, 0))
}

/// [`check_invariant_foliations`] on a precomputed jet evaluation.
pub fn foliation_residual<R: Rng + ?Sized>(
    p: &[f64],
    s: &StructureJets<Jet2>,
    trials: usize,
    rng: &mut R,
) -> Result<Residual> {
    let d = s.dim();
    let geom = crate::geometry::PointGeometry::from_metric_jets(p, &s.g)?;
    let (split, jets) = split_from_jets(s, None)?;
    let id: JetMat<Jet1> = JetMat::identity(d, d);
    let p_e4m = id.sub(&jets.p_e4l3);
    let to_jets = |v: &PointVector| -> Vec<Jet1> { v.iter().map(|&c| Jet1::constant(c, d)).collect() };
    let mut r = Residual::default();
    for _ in 0..trials {
        for (proj, other) in [(&jets.p_e4l3, &split.p_e4m), (&p_e4m, &split.p_e4l3)] {
            let x0 = gaussian_vector(rng, d);
            let y0 = gaussian_vector(rng, d);
            let x = crate::jet::values(&proj.matvec(&to_jets(&x0)));
            let y_field = proj.matvec(&to_jets(&y0));
            if x.amax() == 0.0 {
                continue;
            }
            let nab = geom.nabla_vector(&y_field, &x);
            r.record_vector(&(other * &nab), &[&nab]);
        }
    }
    Ok(r)
}
