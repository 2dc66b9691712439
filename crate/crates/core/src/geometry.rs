//! Chart-based Riemannian computation.
//!
//! A [`ChartedManifold`] is a single coordinate chart together with
//! jet-evaluable component fields for the metric and the three structure
//! pairs `(φ_α, ξ_α)`. Everything here works at one chart point at a time.
//!
//! Conventions:
//! - `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z` and
//!   `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, so the unit sphere has
//!   `R(X,Y)Z = g(Y,Z)X − g(X,Z)Y` and `K(X,Y) = R(X,Y,Y,X)/|X∧Y|² = 1`.
//! - Exterior derivative without a `1/(k+1)` factor:
//!   `dω(X,Y) = Xω(Y) − Yω(X) − ω([X,Y])`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{jet_inverse, jet_point, Jet1, Jet2, JetMat, JetScalar};
use crate::tensor::{combinations, AltForm, MetricFrame, PointVector};

/// Metric and structure tensors as jets at one chart point.
#[derive(Clone, Debug)]
pub struct StructureJets<T> {
    /// `g_ij`
    pub g: JetMat<T>,
    /// `(φ_α)^i_j`, row index up.
    pub phi: [JetMat<T>; 3],
    /// `ξ_α^i`
    pub xi: [Vec<T>; 3],
}

impl<T: JetScalar> StructureJets<T> {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

impl StructureJets<Jet2> {
    pub fn truncate(&self) -> StructureJets<Jet1> {
        StructureJets {
            g: self.g.truncate(),
            phi: [self.phi[0].truncate(), self.phi[1].truncate(), self.phi[2].truncate()],
            xi: [
                self.xi[0].iter().map(Jet2::truncate).collect(),
                self.xi[1].iter().map(Jet2::truncate).collect(),
                self.xi[2].iter().map(Jet2::truncate).collect(),
            ],
        }
    }
}

/// Component fields of an almost contact metric 3-structure in one chart.
///
/// `eval_jet` receives one seeded [`Jet2`] per coordinate; `eval_value`
/// evaluates the same fields on plain reals. Both must describe the same
/// functions. Most implementors write one generic function and use
/// [`impl_structure_fields!`](crate::impl_structure_fields).
pub trait StructureFields: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_jet(&self, u: &[Jet2]) -> Result<StructureJets<Jet2>>;
    fn eval_value(&self, u: &[f64]) -> Result<StructureJets<f64>>;
}

/// Implements [`StructureFields`] for a type with an inherent
/// `fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>>` and
/// `fn dim(&self) -> usize`.
#[macro_export]
macro_rules! impl_structure_fields {
    ($ty:ty) => {
        impl $crate::geometry::StructureFields for $ty {
            fn dim(&self) -> usize {
                <$ty>::dim(self)
            }
            fn eval_jet(
                &self,
                u: &[$crate::jet::Jet2],
            ) -> $crate::error::Result<$crate::geometry::StructureJets<$crate::jet::Jet2>> {
                self.eval(u)
            }
            fn eval_value(
                &self,
                u: &[f64],
            ) -> $crate::error::Result<$crate::geometry::StructureJets<f64>> {
                self.eval(u)
            }
        }
    };
}

/// A chart with its structure fields.
#[derive(Clone)]
pub struct ChartedManifold {
    name: String,
    domain_radius: f64,
    fields: Arc<dyn StructureFields>,
}

impl fmt::Debug for ChartedManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartedManifold")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("domain_radius", &self.domain_radius)
            .finish()
    }
}

impl ChartedManifold {
    pub fn new(name: impl Into<String>, domain_radius: f64, fields: Arc<dyn StructureFields>) -> Self {
        ChartedManifold { name: name.into(), domain_radius, fields }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.fields.dim()
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn fields(&self) -> &Arc<dyn StructureFields> {
        &self.fields
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension(format!("point of length {} on a {}-manifold", p.len(), self.dim())));
        }
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(r <= self.domain_radius) {
            return Err(Error::Domain { point: p.to_vec(), radius: self.domain_radius });
        }
        Ok(())
    }

    pub fn jets_at(&self, p: &[f64]) -> Result<StructureJets<Jet2>> {
        self.check_point(p)?;
        self.fields.eval_jet(&jet_point(p))
    }

    pub fn values_at(&self, p: &[f64]) -> Result<StructureJets<f64>> {
        self.check_point(p)?;
        self.fields.eval_value(p)
    }
}

// ---------------------------------------------------------------------------
// Connection and curvature
// ---------------------------------------------------------------------------

#[inline]
fn idx3(d: usize, a: usize, b: usize, c: usize) -> usize {
    (a * d + b) * d + c
}

#[inline]
fn idx4(d: usize, a: usize, b: usize, c: usize, e: usize) -> usize {
    ((a * d + b) * d + c) * d + e
}

/// Christoffel symbols of the second kind as first-order jets, `[k][i][j]`.
///
/// The value parts come from first derivatives of `g` and the gradients
/// from its Hessian, so the result is exact to first order.
pub fn christoffel_jets(g: &JetMat<Jet2>) -> Result<Vec<Jet1>> {
    let d = g.nrows();
    let g_inv = jet_inverse(&g.truncate())?;
    // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = Vec::with_capacity(d * d * d);
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                let v = (g.get(j, l).partial(i) + g.get(i, l).partial(j) - g.get(i, j).partial(l)) * 0.5;
                first.push(v);
            }
        }
    }
    let mut gamma = Vec::with_capacity(d * d * d);
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut acc = Jet1::zero(d);
                for l in 0..d {
                    acc = acc + g_inv.get(k, l).clone() * first[idx3(d, l, i, j)].clone();
                }
                gamma.push(acc);
            }
        }
    }
    // Symmetric in (i,j) up to rounding; make it exact.
    for k in 0..d {
        for i in 0..d {
            for j in (i + 1)..d {
                let a = &gamma[idx3(d, k, i, j)];
                let b = &gamma[idx3(d, k, j, i)];
                let s = (a.clone() + b.clone()) * 0.5;
                gamma[idx3(d, k, i, j)] = s.clone();
                gamma[idx3(d, k, j, i)] = s;
            }
        }
    }
    Ok(gamma)
}

/// Levi-Civita connection and curvature at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub point: PointVector,
    pub metric: MetricFrame,
    dim: usize,
    gamma: Vec<f64>,
    /// `R^l_{ijk}` with `R(∂_i,∂_j)∂_k = R^l_{ijk} ∂_l`, stored `[l][i][j][k]`.
    riem_op: Vec<f64>,
    /// `R_{ijkl} = g(R(∂_i,∂_j)∂_k, ∂_l)`.
    riem: Vec<f64>,
}

impl PointGeometry {
    pub fn from_metric_jets(point: &[f64], g: &JetMat<Jet2>) -> Result<Self> {
        let d = g.nrows();
        let metric = MetricFrame::new(g.values())?;
        let gamma_j = christoffel_jets(g)?;
        let gamma: Vec<f64> = gamma_j.iter().map(|j| j.value).collect();
        let mut riem_op = vec![0.0; d * d * d * d];
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let mut v = gamma_j[idx3(d, l, j, k)].grad[i] - gamma_j[idx3(d, l, i, k)].grad[j];
                        for m in 0..d {
                            v += gamma[idx3(d, l, i, m)] * gamma[idx3(d, m, j, k)]
                                - gamma[idx3(d, l, j, m)] * gamma[idx3(d, m, i, k)];
                        }
                        riem_op[idx4(d, l, i, j, k)] = v;
                    }
                }
            }
        }
        let mut riem = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut v = 0.0;
                        for m in 0..d {
                            v += metric.g[(l, m)] * riem_op[idx4(d, m, i, j, k)];
                        }
                        riem[idx4(d, i, j, k, l)] = v;
                    }
                }
            }
        }
        Ok(PointGeometry { point: DVector::from_column_slice(point), metric, dim: d, gamma, riem_op, riem })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^k_{ij}`
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[idx3(self.dim, k, i, j)]
    }

    pub fn gamma_slice(&self) -> &[f64] {
        &self.gamma
    }

    /// `R_{ijkl} = g(R(∂_i,∂_j)∂_k, ∂_l)`
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.riem[idx4(self.dim, i, j, k, l)]
    }

    pub fn riemann_slice(&self) -> &[f64] {
        &self.riem
    }

    /// `R(X,Y)Z` as a vector.
    pub fn curvature_operator(&self, x: &PointVector, y: &PointVector, z: &PointVector) -> PointVector {
        let d = self.dim;
        let mut out = PointVector::zeros(d);
        for l in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let xy = x[i] * y[j];
                    if xy == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        acc += xy * z[k] * self.riem_op[idx4(d, l, i, j, k)];
                    }
                }
            }
            out[l] = acc;
        }
        out
    }

    /// `R(X,Y,Z,W) = g(R(X,Y)Z, W)`
    pub fn curvature_form(&self, x: &PointVector, y: &PointVector, z: &PointVector, w: &PointVector) -> f64 {
        self.metric.inner(&self.curvature_operator(x, y, z), w)
    }

    /// Sectional curvature of the plane spanned by `x`, `y`.
    pub fn sectional(&self, x: &PointVector, y: &PointVector) -> Result<f64> {
        let m = &self.metric;
        let den = m.inner(x, x) * m.inner(y, y) - m.inner(x, y).powi(2);
        if den <= 1e-10 {
            return Err(Error::Precondition(format!("degenerate plane (|X∧Y|² = {den:e})")));
        }
        Ok(self.curvature_form(x, y, y, x) / den)
    }

    /// Largest violation of the algebraic curvature symmetries and the first
    /// Bianchi identity, normalized by `max(1, max |R_ijkl|)`.
    pub fn symmetry_residual(&self) -> f64 {
        let d = self.dim;
        let r = |i, j, k, l| self.riemann(i, j, k, l);
        let scale = self.riem.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = r(i, j, k, l);
                        worst = worst
                            .max((v + r(j, i, k, l)).abs())
                            .max((v + r(i, j, l, k)).abs())
                            .max((v - r(k, l, i, j)).abs())
                            .max((v + r(j, k, i, l) + r(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// `∇_X Y` for a vector field given as jets.
    pub fn nabla_vector<T: JetScalar>(&self, field: &[T], x: &PointVector) -> PointVector {
        let d = self.dim;
        PointVector::from_fn(d, |k, _| {
            let mut acc = 0.0;
            for i in 0..d {
                if x[i] == 0.0 {
                    continue;
                }
                let mut t = field[k].d(i);
                for j in 0..d {
                    t += self.gamma(k, i, j) * field[j].value();
                }
                acc += x[i] * t;
            }
            acc
        })
    }

    /// `∇_X ω` for a covector field.
    pub fn nabla_covector<T: JetScalar>(&self, field: &[T], x: &PointVector) -> PointVector {
        let d = self.dim;
        PointVector::from_fn(d, |j, _| {
            let mut acc = 0.0;
            for i in 0..d {
                if x[i] == 0.0 {
                    continue;
                }
                let mut t = field[j].d(i);
                for k in 0..d {
                    t -= self.gamma(k, i, j) * field[k].value();
                }
                acc += x[i] * t;
            }
            acc
        })
    }

    /// `∇_X T` for an endomorphism field `T^k_j`.
    pub fn nabla_endomorphism<T: JetScalar>(&self, field: &JetMat<T>, x: &PointVector) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |k, j| {
            let mut acc = 0.0;
            for i in 0..d {
                if x[i] == 0.0 {
                    continue;
                }
                let mut t = field.get(k, j).d(i);
                for m in 0..d {
                    t += self.gamma(k, i, m) * field.get(m, j).value() - self.gamma(m, i, j) * field.get(k, m).value();
                }
                acc += x[i] * t;
            }
            acc
        })
    }
}

/// Christoffel symbols `Γ^k_{ij}` (flattened `[k][i][j]`) at `p`.
pub fn christoffel_at(m: &ChartedManifold, p: &[f64]) -> Result<Vec<f64>> {
    let jets = m.jets_at(p)?;
    MetricFrame::new(jets.g.values())?;
    Ok(christoffel_jets(&jets.g)?.iter().map(|j| j.value).collect())
}

/// Connection and curvature at `p`.
pub fn riemann_at(m: &ChartedManifold, p: &[f64]) -> Result<PointGeometry> {
    let jets = m.jets_at(p)?;
    PointGeometry::from_metric_jets(p, &jets.g)
}

/// Sectional curvature `K(X,Y)` at `p`.
pub fn sectional(m: &ChartedManifold, p: &[f64], x: &PointVector, y: &PointVector) -> Result<f64> {
    riemann_at(m, p)?.sectional(x, y)
}

// ---------------------------------------------------------------------------
// Calculus on jet fields
// ---------------------------------------------------------------------------

/// `[A,B]^k = A^i ∂_i B^k − B^i ∂_i A^k`.
pub fn lie_bracket<T: JetScalar>(a: &[T], b: &[T]) -> PointVector {
    let d = a.len();
    assert_eq!(d, b.len());
    PointVector::from_fn(d, |k, _| {
        (0..d).map(|i| a[i].value() * b[k].d(i) - b[i].value() * a[k].d(i)).sum()
    })
}

/// Exterior derivative of a 1- or 2-form field whose components (dense over
/// increasing index tuples, as in [`AltForm`]) are given as jets.
pub fn d_form<T: JetScalar>(degree: usize, comps: &[T]) -> Result<AltForm> {
    if !(1..=2).contains(&degree) {
        return Err(Error::Degree(format!("exterior derivative of degree {degree} forms is not supported")));
    }
    let d = comps.first().map(JetScalar::dim).unwrap_or(0);
    let tuples = combinations(d, degree);
    if tuples.len() != comps.len() {
        return Err(Error::Dimension(format!(
            "{}-form on R^{d} needs {} components, got {}",
            degree,
            tuples.len(),
            comps.len()
        )));
    }
    // ω_{I} for an arbitrary (unsorted) index tuple, as the derivative along `dir`.
    let lookup = |idx: &[usize], dir: usize| -> f64 {
        let mut f = AltForm::zero(d, degree);
        // Reuse AltForm's sign handling: write +1 at idx, read back the
        // stored sign.
        f.set_component(idx, 1.0);
        tuples
            .iter()
            .zip(comps)
            .zip(f.components())
            .filter(|(_, &s)| s != 0.0)
            .map(|((_, c), &s)| s * c.d(dir))
            .sum()
    };
    let mut out = AltForm::zero(d, degree + 1);
    for tuple in combinations(d, degree + 1) {
        let mut acc = 0.0;
        for m in 0..=degree {
            let rest: Vec<usize> = tuple.iter().enumerate().filter(|(q, _)| *q != m).map(|(_, &t)| t).collect();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * lookup(&rest, tuple[m]);
        }
        out.set_component(&tuple, acc);
    }
    Ok(out)
}

/// Components of a 2-form field `ω_ij` given as a (skew) jet matrix, in
/// [`AltForm`] order.
pub fn two_form_components<T: JetScalar>(m: &JetMat<T>) -> Vec<T> {
    combinations(m.nrows(), 2).iter().map(|t| m.get(t[0], t[1]).clone()).collect()
}

/// `dω` for a 1-form field.
pub fn d_one_form<T: JetScalar>(omega: &[T]) -> AltForm {
    d_form(1, omega).expect("degree 1 is supported")
}

/// `dω` for a 2-form field given as a skew jet matrix.
pub fn d_two_form<T: JetScalar>(omega: &JetMat<T>) -> AltForm {
    d_form(2, &two_form_components(omega)).expect("degree 2 is supported")
}

/// Tensor field kinds accepted by [`cov_deriv`].
#[derive(Clone, Copy, Debug)]
pub enum TensorField<'a, T> {
    Vector(&'a [T]),
    Covector(&'a [T]),
    Endomorphism(&'a JetMat<T>),
}

/// Covariant derivative result, same valence as the input.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorValue {
    Vector(PointVector),
    Covector(PointVector),
    Endomorphism(DMatrix<f64>),
}

impl TensorValue {
    pub fn max_abs(&self) -> f64 {
        match self {
            TensorValue::Vector(v) | TensorValue::Covector(v) => v.amax(),
            TensorValue::Endomorphism(m) => m.amax(),
        }
    }
}

/// `∇_X` of a vector, covector or endomorphism field at the point of `geom`.
pub fn cov_deriv<T: JetScalar>(geom: &PointGeometry, field: TensorField<'_, T>, x: &PointVector) -> TensorValue {
    match field {
        TensorField::Vector(v) => TensorValue::Vector(geom.nabla_vector(v, x)),
        TensorField::Covector(w) => TensorValue::Covector(geom.nabla_covector(w, x)),
        TensorField::Endomorphism(t) => TensorValue::Endomorphism(geom.nabla_endomorphism(t, x)),
    }
}

/// Nijenhuis torsion `[φ,φ]^k_{ij}` of an endomorphism field, flattened `[k][i][j]`.
pub fn nijenhuis_tensor<T: JetScalar>(phi: &JetMat<T>) -> Vec<f64> {
    let d = phi.nrows();
    let p = |a: usize, b: usize| phi.get(a, b).value();
    let dp = |a: usize, b: usize, dir: usize| phi.get(a, b).d(dir);
    let mut out = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for m in 0..d {
                    v += p(m, i) * dp(k, j, m) - p(m, j) * dp(k, i, m) - p(k, m) * (dp(m, j, i) - dp(m, i, j));
                }
                out[idx3(d, k, i, j)] = v;
            }
        }
    }
    out
}

/// `[φ,φ](X,Y)`.
pub fn nijenhuis<T: JetScalar>(phi: &JetMat<T>, x: &PointVector, y: &PointVector) -> PointVector {
    let d = phi.nrows();
    let n = nijenhuis_tensor(phi);
    PointVector::from_fn(d, |k, _| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += n[idx3(d, k, i, j)] * x[i] * y[j];
            }
        }
        acc
    })
}

/// [`nijenhuis`] for structure `alpha` (0-based) of `m` at `p`.
pub fn nijenhuis_at(m: &ChartedManifold, alpha: usize, x: &PointVector, y: &PointVector, p: &[f64]) -> Result<PointVector> {
    let jets = m.jets_at(p)?;
    Ok(nijenhuis(&jets.phi[alpha], x, y))
}

/// [`lie_bracket`] of two Reeb fields of `m` at `p` (0-based indices).
pub fn reeb_bracket_at(m: &ChartedManifold, a: usize, b: usize, p: &[f64]) -> Result<PointVector> {
    let jets = m.jets_at(p)?;
    Ok(lie_bracket(&jets.xi[a], &jets.xi[b]))
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

/// Central-difference reconstruction of `Γ` and `R` from value-only metric
/// evaluations. Shares no code with the jet path beyond the field
/// definitions themselves.
pub mod fd {
    use super::*;

    pub const STEP: f64 = 1e-4;

    fn metric_at(m: &ChartedManifold, p: &[f64]) -> Result<DMatrix<f64>> {
        let s = m.values_at(p)?;
        Ok(DMatrix::from_fn(s.g.nrows(), s.g.ncols(), |i, j| *s.g.get(i, j)))
    }

    fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
        let mut q = p.to_vec();
        for &(i, h) in moves {
            q[i] += h;
        }
        q
    }

    /// `(g, ∂g, ∂∂g)` by central differences; `dg[k]`, `ddg[k*d+l]`.
    #[allow(clippy::type_complexity)]
    pub fn metric_derivatives(
        m: &ChartedManifold,
        p: &[f64],
        h: f64,
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
        let d = p.len();
        let g0 = metric_at(m, p)?;
        let mut dg = Vec::with_capacity(d);
        let mut plus = Vec::with_capacity(d);
        let mut minus = Vec::with_capacity(d);
        for k in 0..d {
            let gp = metric_at(m, &shifted(p, &[(k, h)]))?;
            let gm = metric_at(m, &shifted(p, &[(k, -h)]))?;
            dg.push((&gp - &gm) / (2.0 * h));
            plus.push(gp);
            minus.push(gm);
        }
        let mut ddg = vec![DMatrix::zeros(d, d); d * d];
        for k in 0..d {
            ddg[k * d + k] = (&plus[k] - &g0 * 2.0 + &minus[k]) / (h * h);
            for l in (k + 1)..d {
                let pp = metric_at(m, &shifted(p, &[(k, h), (l, h)]))?;
                let pm = metric_at(m, &shifted(p, &[(k, h), (l, -h)]))?;
                let mp = metric_at(m, &shifted(p, &[(k, -h), (l, h)]))?;
                let mm = metric_at(m, &shifted(p, &[(k, -h), (l, -h)]))?;
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                ddg[k * d + l] = v.clone();
                ddg[l * d + k] = v;
            }
        }
        Ok((g0, dg, ddg))
    }

    /// `Γ^k_{ij}` and `∂_m Γ^k_{ij}` from metric derivatives.
    fn connection(g: &DMatrix<f64>, dg: &[DMatrix<f64>], ddg: &[DMatrix<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = g.nrows();
        let gi = g.clone().try_inverse().ok_or_else(|| Error::Metric("singular metric".into()))?;
        let first = |l: usize, i: usize, j: usize| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
        let dfirst = |mm: usize, l: usize, i: usize, j: usize| {
            0.5 * (ddg[mm * d + i][(j, l)] + ddg[mm * d + j][(i, l)] - ddg[mm * d + l][(i, j)])
        };
        let dgi: Vec<DMatrix<f64>> = (0..d).map(|mm| -(&gi * &dg[mm] * &gi)).collect();
        let mut gamma = vec![0.0; d * d * d];
        let mut dgamma = vec![0.0; d * d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    gamma[idx3(d, k, i, j)] = (0..d).map(|l| gi[(k, l)] * first(l, i, j)).sum();
                    for mm in 0..d {
                        dgamma[idx4(d, mm, k, i, j)] = (0..d)
                            .map(|l| dgi[mm][(k, l)] * first(l, i, j) + gi[(k, l)] * dfirst(mm, l, i, j))
                            .sum();
                    }
                }
            }
        }
        Ok((gamma, dgamma))
    }

    /// `Γ^k_{ij}` by central differences.
    pub fn christoffel(m: &ChartedManifold, p: &[f64], h: f64) -> Result<Vec<f64>> {
        let d = p.len();
        let g = metric_at(m, p)?;
        let dg: Vec<DMatrix<f64>> = (0..d)
            .map(|k| Ok((metric_at(m, &shifted(p, &[(k, h)]))? - metric_at(m, &shifted(p, &[(k, -h)]))?) / (2.0 * h)))
            .collect::<Result<_>>()?;
        let zeros = vec![DMatrix::zeros(d, d); d * d];
        Ok(connection(&g, &dg, &zeros)?.0)
    }

    /// Lowered `R_{ijkl}` by central differences.
    pub fn riemann(m: &ChartedManifold, p: &[f64], h: f64) -> Result<Vec<f64>> {
        let d = p.len();
        let (g, dg, ddg) = metric_derivatives(m, p, h)?;
        let (gamma, dgamma) = connection(&g, &dg, &ddg)?;
        let mut out = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut v = 0.0;
                        for a in 0..d {
                            let mut up = dgamma[idx4(d, i, a, j, k)] - dgamma[idx4(d, j, a, i, k)];
                            for mm in 0..d {
                                up += gamma[idx3(d, a, i, mm)] * gamma[idx3(d, mm, j, k)]
                                    - gamma[idx3(d, a, j, mm)] * gamma[idx3(d, mm, i, k)];
                            }
                            v += g[(l, a)] * up;
                        }
                        out[idx4(d, i, j, k, l)] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Relative disagreement `max|a−b| / max(1, max|b|)`.
    pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        a.iter().zip(b).fold(0.0_f64, |e, (x, y)| e.max((x - y).abs())) / scale
    }

    /// Jet-vs-FD agreement for `Γ` and `R` at one point.
    #[derive(Clone, Copy, Debug)]
    pub struct FdAgreement {
        pub christoffel: f64,
        pub riemann: f64,
    }

    pub fn compare(m: &ChartedManifold, p: &[f64]) -> Result<FdAgreement> {
        let geom = riemann_at(m, p)?;
        let g_fd = christoffel(m, p, STEP)?;
        let r_fd = riemann(m, p, STEP)?;
        Ok(FdAgreement {
            christoffel: relative_error(geom.gamma_slice(), &g_fd),
            riemann: relative_error(geom.riemann_slice(), &r_fd),
        })
    }
}
