//! Concrete 3-structures used as test beds.
//!
//! - `flat{4n+3}`: ℝ^{4n} × ℝ³ with constant quaternionic tensors, c = 0.
//! - `sphere{4n+3}`: the round sphere in ℍ^{n+1} through inverse
//!   stereographic projection, 3-Sasakian (c = 2).
//! - `csasakian{d}:c=<v>`: homothety of the sphere with Reeb constant v.
//! - `product11` (or `product:l=<l>,m=<m>`): S^{4l+3} × ℝ^{4m}, rank 4l+3.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ChartedManifold, StructureFields, StructureJets};
use crate::jet::{jet_solve, jet_solve_matrix, Jet2, JetMat, JetScalar};

/// Chart radius used for the stereographic charts.
pub const SPHERE_DOMAIN_RADIUS: f64 = 1.5;

/// Right multiplication by `i`, `j`, `k` on one quaternion `(a,b,c,d)`,
/// returned as `(perm, sign)` so that `(x·q)[r] = sign[r] * x[perm[r]]`.
const RIGHT_MULT: [([usize; 4], [f64; 4]); 3] = [
    ([1, 0, 3, 2], [-1.0, 1.0, 1.0, -1.0]),
    ([2, 3, 0, 1], [-1.0, -1.0, 1.0, 1.0]),
    ([3, 2, 1, 0], [-1.0, 1.0, -1.0, 1.0]),
];

fn right_mult_apply<T: JetScalar>(alpha: usize, x: &[T]) -> Vec<T> {
    let (perm, sign) = RIGHT_MULT[alpha];
    (0..x.len())
        .map(|r| {
            let b = r - r % 4;
            x[b + perm[r % 4]].clone() * sign[r % 4]
        })
        .collect()
}

/// Matrix of right multiplication by `q_α` on ℍ^{blocks}.
pub fn right_mult_matrix(alpha: usize, blocks: usize) -> DMatrix<f64> {
    let n = 4 * blocks;
    let mut m = DMatrix::zeros(n, n);
    let (perm, sign) = RIGHT_MULT[alpha];
    for r in 0..n {
        let b = r - r % 4;
        m[(r, b + perm[r % 4])] = sign[r % 4];
    }
    m
}

/// Constant quaternionic structure `J_α = −R_α` on ℝ^{4m}; `J_αJ_β = J_γ`.
pub fn quaternionic_j(alpha: usize, blocks: usize) -> DMatrix<f64> {
    -right_mult_matrix(alpha, blocks)
}

// ---------------------------------------------------------------------------

/// Flat 3-cosymplectic ℝ^{4n} × ℝ³.
#[derive(Clone, Debug)]
pub struct FlatFields {
    n: usize,
    phi: [DMatrix<f64>; 3],
}

impl FlatFields {
    pub fn new(n: usize) -> Self {
        let d = 4 * n + 3;
        let r = 4 * n;
        let phi = std::array::from_fn(|a| {
            let mut m = DMatrix::zeros(d, d);
            m.view_mut((0, 0), (r, r)).copy_from(&quaternionic_j(a, n));
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            // φ_α ξ_β = ξ_γ, φ_α ξ_γ = −ξ_β
            m[(r + c, r + b)] = 1.0;
            m[(r + b, r + c)] = -1.0;
            m
        });
        FlatFields { n, phi }
    }

    pub fn dim(&self) -> usize {
        4 * self.n + 3
    }

    pub fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let d = self.dim();
        let jd = u[0].dim();
        let xi = std::array::from_fn(|a| (0..d).map(|i| T::constant(if i == 4 * self.n + a { 1.0 } else { 0.0 }, jd)).collect());
        Ok(StructureJets {
            g: JetMat::identity(d, jd),
            phi: std::array::from_fn(|a| JetMat::constant(&self.phi[a], jd)),
            xi,
        })
    }
}
crate::impl_structure_fields!(FlatFields);

/// Round unit sphere `S^{4n+3} ⊂ ℍ^{n+1}` with `ξ_α = x·q_α`.
#[derive(Clone, Copy, Debug)]
pub struct SphereFields {
    n: usize,
}

impl SphereFields {
    pub fn new(n: usize) -> Self {
        SphereFields { n }
    }

    pub fn dim(&self) -> usize {
        4 * self.n + 3
    }

    /// Ambient position `x(u)` and differential `Dx` of the inverse
    /// stereographic map, with the pole on the last axis.
    pub fn embedding<T: JetScalar>(&self, u: &[T]) -> Result<(Vec<T>, JetMat<T>)> {
        let d = self.dim();
        let jd = u[0].dim();
        let r2 = u.iter().fold(T::zero(jd), |acc, v| acc + v.square());
        let s = r2.clone() + 1.0;
        let inv_s = s.recip()?;
        let inv_s2 = inv_s.square();
        let mut x: Vec<T> = u.iter().map(|v| v.clone() * inv_s.clone() * 2.0).collect();
        x.push((r2 + -1.0) * inv_s.clone());
        let dx = JetMat::from_fn(d + 1, d, |a, i| {
            if a == d {
                u[i].clone() * inv_s2.clone() * 4.0
            } else {
                let mut v = u[a].clone() * u[i].clone() * inv_s2.clone() * -4.0;
                if a == i {
                    v = v + inv_s.clone() * 2.0;
                }
                v
            }
        });
        Ok((x, dx))
    }

    pub fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let d = self.dim();
        let (x, dx) = self.embedding(u)?;
        let dxt = dx.transpose();
        let g = dxt.matmul(&dx);
        let mut xi: [Vec<T>; 3] = Default::default();
        let mut phi: [Option<JetMat<T>>; 3] = Default::default();
        for a in 0..3 {
            let rx = right_mult_apply(a, &x);
            xi[a] = jet_solve(&g, &dxt.matvec(&rx))?;
            // −G⁻¹ Dxᵀ (I − xxᵀ) R_α Dx
            let cols: Vec<Vec<T>> = (0..d)
                .map(|j| {
                    let w = right_mult_apply(a, &dx.column(j));
                    let xw = crate::jet::dot(&x, &w);
                    w.iter().zip(&x).map(|(wi, xi)| xi.clone() * xw.clone() - wi.clone()).collect()
                })
                .collect();
            let rhs = dxt.matmul(&JetMat::from_columns(&cols));
            phi[a] = Some(jet_solve_matrix(&g, &rhs)?);
        }
        let [p0, p1, p2] = phi;
        Ok(StructureJets { g, phi: [p0.unwrap(), p1.unwrap(), p2.unwrap()], xi })
    }
}
crate::impl_structure_fields!(SphereFields);

/// `g' = g/a²`, `ξ' = aξ`, `φ' = φ`; multiplies the Reeb constant by `a`.
#[derive(Clone)]
pub struct HomothetyFields {
    base: Arc<dyn StructureFields>,
    scale: f64,
}

fn rescale<T: JetScalar>(s: StructureJets<T>, a: f64) -> StructureJets<T> {
    StructureJets {
        g: s.g.scale(1.0 / (a * a)),
        phi: s.phi,
        xi: s.xi.map(|v| v.into_iter().map(|c| c * a).collect()),
    }
}

impl StructureFields for HomothetyFields {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval_jet(&self, u: &[Jet2]) -> Result<StructureJets<Jet2>> {
        Ok(rescale(self.base.eval_jet(u)?, self.scale))
    }

    fn eval_value(&self, u: &[f64]) -> Result<StructureJets<f64>> {
        Ok(rescale(self.base.eval_value(u)?, self.scale))
    }
}

/// S^{4l+3} × ℝ^{4m} with the flat factor carrying `J_α`.
#[derive(Clone, Debug)]
pub struct ProductFields {
    sphere: SphereFields,
    m: usize,
    j: [DMatrix<f64>; 3],
}

impl ProductFields {
    pub fn new(l: usize, m: usize) -> Self {
        ProductFields { sphere: SphereFields::new(l), m, j: std::array::from_fn(|a| quaternionic_j(a, m)) }
    }

    pub fn dim(&self) -> usize {
        self.sphere.dim() + 4 * self.m
    }

    pub fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let ds = self.sphere.dim();
        let d = self.dim();
        let jd = u[0].dim();
        let s = self.sphere.eval(&u[..ds])?;
        let block = |m: &JetMat<T>, flat: Option<&DMatrix<f64>>| {
            JetMat::from_fn(d, d, |i, j| match (i < ds, j < ds) {
                (true, true) => m.get(i, j).clone(),
                (false, false) => match flat {
                    Some(f) => T::constant(f[(i - ds, j - ds)], jd),
                    None => T::constant(if i == j { 1.0 } else { 0.0 }, jd),
                },
                _ => T::zero(jd),
            })
        };
        let g = block(&s.g, None);
        let phi = std::array::from_fn(|a| block(&s.phi[a], Some(&self.j[a])));
        let xi = s.xi.map(|v| {
            let mut v = v;
            v.resize(d, T::zero(jd));
            v
        });
        Ok(StructureJets { g, phi, xi })
    }
}
crate::impl_structure_fields!(ProductFields);

// ---------------------------------------------------------------------------

/// Catalog entry.
#[derive(Clone, Debug, PartialEq)]
pub enum CatalogSpec {
    FlatCosymplectic(usize),
    Sphere3Sasakian(usize),
    /// Rescales so the Reeb constant becomes `base_c · c/2`.
    Homothety { base: Box<CatalogSpec>, c: f64 },
    Product3QS { l: usize, m: usize },
}

/// Dimension, rank and Reeb constant a catalog entry is built to have.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expected {
    pub dim: usize,
    pub rank: usize,
    pub c: f64,
}

impl fmt::Display for CatalogSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogSpec::FlatCosymplectic(n) => write!(f, "flat{}", 4 * n + 3),
            CatalogSpec::Sphere3Sasakian(n) => write!(f, "sphere{}", 4 * n + 3),
            CatalogSpec::Homothety { base, c } => match **base {
                CatalogSpec::Sphere3Sasakian(n) => write!(f, "csasakian{}:c={}", 4 * n + 3, c),
                ref b => write!(f, "homothety({b}):c={c}"),
            },
            CatalogSpec::Product3QS { l: 1, m: 1 } => write!(f, "product11"),
            CatalogSpec::Product3QS { l, m } => write!(f, "product:l={l},m={m}"),
        }
    }
}

fn quaternionic_n(dim: &str, name: &str) -> Result<usize> {
    let d: usize = dim.parse().map_err(|_| Error::Config(format!("unknown manifold '{name}'")))?;
    if d < 7 || !(d - 3).is_multiple_of(4) {
        return Err(Error::Config(format!("'{name}': dimension must be 4n+3 with n ≥ 1")));
    }
    Ok((d - 3) / 4)
}

fn parse_usize_field(s: &str, key: &str, name: &str) -> Result<usize> {
    s.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Config(format!("'{name}': expected {key}=<integer>")))
}

impl CatalogSpec {
    pub fn parse(name: &str) -> Result<Self> {
        let unknown = || Error::Config(format!("unknown manifold '{name}'"));
        if let Some(d) = name.strip_prefix("flat") {
            return Ok(CatalogSpec::FlatCosymplectic(quaternionic_n(d, name)?));
        }
        if let Some(d) = name.strip_prefix("sphere") {
            return Ok(CatalogSpec::Sphere3Sasakian(quaternionic_n(d, name)?));
        }
        if let Some(rest) = name.strip_prefix("csasakian") {
            let (d, c) = rest.split_once(":c=").ok_or_else(unknown)?;
            let c: f64 = c.parse().map_err(|_| Error::Config(format!("'{name}': c is not a number")))?;
            let spec = CatalogSpec::Homothety { base: Box::new(CatalogSpec::Sphere3Sasakian(quaternionic_n(d, name)?)), c };
            spec.validate()?;
            return Ok(spec);
        }
        if name == "product11" {
            return Ok(CatalogSpec::Product3QS { l: 1, m: 1 });
        }
        if let Some(rest) = name.strip_prefix("product:") {
            let (l, m) = rest.split_once(',').ok_or_else(unknown)?;
            let spec = CatalogSpec::Product3QS { l: parse_usize_field(l, "l", name)?, m: parse_usize_field(m, "m", name)? };
            spec.validate()?;
            return Ok(spec);
        }
        Err(unknown())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CatalogSpec::FlatCosymplectic(n) | CatalogSpec::Sphere3Sasakian(n) if *n == 0 => {
                Err(Error::Config("n must be at least 1".into()))
            }
            CatalogSpec::Homothety { c, .. } if !(c.is_finite() && *c != 0.0) => {
                Err(Error::Config(format!("homothety parameter must be finite and nonzero, got {c}")))
            }
            CatalogSpec::Homothety { base, .. } => base.validate(),
            CatalogSpec::Product3QS { l, m } if *l == 0 || *m == 0 => {
                Err(Error::Config("product needs l ≥ 1 and m ≥ 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn expected(&self) -> Expected {
        match self {
            CatalogSpec::FlatCosymplectic(n) => Expected { dim: 4 * n + 3, rank: 1, c: 0.0 },
            CatalogSpec::Sphere3Sasakian(n) => Expected { dim: 4 * n + 3, rank: 4 * n + 3, c: 2.0 },
            CatalogSpec::Homothety { base, c } => {
                let b = base.expected();
                Expected { c: b.c * c / 2.0, ..b }
            }
            CatalogSpec::Product3QS { l, m } => Expected { dim: 4 * l + 3 + 4 * m, rank: 4 * l + 3, c: 2.0 },
        }
    }

    pub fn build(&self) -> Result<ChartedManifold> {
        self.validate()?;
        let name = self.to_string();
        Ok(match self {
            CatalogSpec::FlatCosymplectic(n) => flat_cosymplectic(*n),
            CatalogSpec::Sphere3Sasakian(n) => sphere_3sasakian(*n),
            CatalogSpec::Homothety { base, c } => {
                let m = homothety(&base.build()?, *c)?;
                ChartedManifold::new(name, m.domain_radius(), m.fields().clone())
            }
            CatalogSpec::Product3QS { l, m } => product_3qs(*l, *m),
        })
    }
}

pub fn flat_cosymplectic(n: usize) -> ChartedManifold {
    let f = FlatFields::new(n);
    ChartedManifold::new(format!("flat{}", f.dim()), f64::INFINITY, Arc::new(f))
}

pub fn sphere_3sasakian(n: usize) -> ChartedManifold {
    let f = SphereFields::new(n);
    ChartedManifold::new(format!("sphere{}", f.dim()), SPHERE_DOMAIN_RADIUS, Arc::new(f))
}

/// `φ' = φ`, `ξ' = (c/2)ξ`, `g' = (4/c²)g`. On a 3-Sasakian input the
/// result is 3-c-Sasakian; in general the Reeb constant is multiplied by
/// `c/2`, so parameter `4/c` undoes parameter `c`.
pub fn homothety(m: &ChartedManifold, c: f64) -> Result<ChartedManifold> {
    if !(c.is_finite() && c != 0.0) {
        return Err(Error::Precondition(format!("homothety parameter must be finite and nonzero, got {c}")));
    }
    let fields = HomothetyFields { base: m.fields().clone(), scale: c / 2.0 };
    Ok(ChartedManifold::new(format!("homothety({}):c={}", m.name(), c), m.domain_radius(), Arc::new(fields)))
}

pub fn product_3qs(l: usize, m: usize) -> ChartedManifold {
    let name = CatalogSpec::Product3QS { l, m }.to_string();
    ChartedManifold::new(name, SPHERE_DOMAIN_RADIUS, Arc::new(ProductFields::new(l, m)))
}

/// Names accepted by [`CatalogSpec::parse`] for the standard entries.
pub const STANDARD_NAMES: [&str; 6] = ["flat7", "flat11", "sphere7", "sphere11", "csasakian7:c=4", "product11"];

/// One row of the catalog listing.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub expected: Expected,
}

pub fn list() -> Vec<CatalogEntry> {
    STANDARD_NAMES
        .iter()
        .map(|n| {
            let spec = CatalogSpec::parse(n).expect("standard names parse");
            CatalogEntry { name: spec.to_string(), expected: spec.expected() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_units_multiply() {
        let [i, j, k] = [0, 1, 2].map(|a| right_mult_matrix(a, 1));
        let id = DMatrix::<f64>::identity(4, 4);
        for m in [&i, &j, &k] {
            assert_eq!(m * m, -&id);
        }
        // (x·j)·i = x·(ji) = −x·k
        assert_eq!(&i * &j, -&k);
        let [ji, jj, jk] = [0, 1, 2].map(|a| quaternionic_j(a, 2));
        assert_eq!(&ji * &jj, jk);
        assert_eq!(&jj * &jk, ji);
        assert_eq!(&jk * &ji, jj);
    }

    #[test]
    fn right_mult_apply_matches_matrix() {
        let x: Vec<f64> = (0..8).map(|v| v as f64 - 2.5).collect();
        for a in 0..3 {
            let m = right_mult_matrix(a, 2) * nalgebra::DVector::from_vec(x.clone());
            assert_eq!(right_mult_apply(a, &x), m.as_slice());
        }
    }

    #[test]
    fn names_roundtrip() {
        for n in STANDARD_NAMES {
            assert_eq!(CatalogSpec::parse(n).unwrap().to_string(), n);
        }
        assert_eq!(CatalogSpec::parse("product:l=2,m=1").unwrap(), CatalogSpec::Product3QS { l: 2, m: 1 });
        for bad in ["flat8", "sphere", "torus7", "csasakian7:c=0", "csasakian7:c=x", "product:l=0,m=1"] {
            assert!(matches!(CatalogSpec::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn listing_has_expected_invariants() {
        let l = list();
        let get = |n: &str| l.iter().find(|e| e.name == n).unwrap().expected;
        assert_eq!(get("flat7"), Expected { dim: 7, rank: 1, c: 0.0 });
        assert_eq!(get("sphere7"), Expected { dim: 7, rank: 7, c: 2.0 });
        assert_eq!(get("product11"), Expected { dim: 11, rank: 7, c: 2.0 });
        assert_eq!(get("csasakian7:c=4").c, 4.0);
    }

    #[test]
    fn sphere_embedding_lands_on_sphere() {
        let s = SphereFields::new(1);
        let u = [0.3, -0.1, 0.5, 0.2, 0.0, -0.7, 0.4];
        let (x, dx) = s.embedding(&u).unwrap();
        assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-15);
        // columns of Dx are tangent
        for j in 0..7 {
            assert!(crate::jet::dot(&x, &dx.column(j)).abs() < 1e-15);
        }
    }

    #[test]
    fn homothety_is_rejected_at_zero() {
        assert!(homothety(&sphere_3sasakian(1), 0.0).is_err());
    }
}
