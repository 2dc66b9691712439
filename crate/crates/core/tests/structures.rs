use std::sync::Arc;

use qs3_core::catalog::{homothety, product_3qs, sphere_3sasakian, CatalogSpec, ProductFields};
use qs3_core::contact3::{
    check_ac3_relations, check_invariant_foliations, check_quasi_sasakian, rank_at, reeb_constant, split_eval,
    split_eval_mixed,
};
use qs3_core::expr::{sphere_spec, Expr};
use qs3_core::geometry::{ChartedManifold, StructureJets};
use qs3_core::jet::{Jet2, JetMat, JetScalar};
use qs3_core::report::{run_suite_on, CheckId, RunConfig};
use qs3_core::sampling::{point_rng, sample_points};
use qs3_core::verify::{IdentityId, PointAnalysis};
use qs3_core::{Error, Result};

fn jets_close(a: &Jet2, b: &Jet2, tol: f64) -> bool {
    let d = a.grad.len();
    (a.value - b.value).abs() <= tol
        && a.grad.iter().zip(&b.grad).all(|(x, y)| (x - y).abs() <= tol)
        && (0..d).all(|i| (0..d).all(|j| (a.hess(i, j) - b.hess(i, j)).abs() <= tol))
}

fn structures_close(a: &StructureJets<Jet2>, b: &StructureJets<Jet2>, tol: f64) -> bool {
    let d = a.dim();
    let mats_close = |x: &JetMat<Jet2>, y: &JetMat<Jet2>| {
        (0..d).all(|i| (0..d).all(|j| jets_close(x.get(i, j), y.get(i, j), tol)))
    };
    mats_close(&a.g, &b.g)
        && (0..3).all(|k| mats_close(&a.phi[k], &b.phi[k]))
        && (0..3).all(|k| a.xi[k].iter().zip(&b.xi[k]).all(|(x, y)| jets_close(x, y, tol)))
}

#[test]
fn homothety_with_inverse_parameter_is_the_identity() {
    let base = sphere_3sasakian(1);
    for c in [4.0, 0.5, 3.0] {
        let there = homothety(&base, c).unwrap();
        let back = homothety(&there, 4.0 / c).unwrap();
        for p in sample_points(7, 5, 7, 1.0) {
            assert!(structures_close(&back.jets_at(&p).unwrap(), &base.jets_at(&p).unwrap(), 1e-12), "c = {c}");
        }
        let pts = sample_points(7, 4, 7, 1.0);
        assert!((reeb_constant(&there, &pts).unwrap() - c).abs() < 1e-9);
    }
    assert!(matches!(homothety(&base, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn homothety_of_the_product_rescales_c_only() {
    let m = homothety(&product_3qs(1, 1), 4.0).unwrap();
    let pts = sample_points(8, 4, 11, 1.0);
    assert!((reeb_constant(&m, &pts).unwrap() - 4.0).abs() < 1e-9);
    for p in &pts {
        assert_eq!(rank_at(&m, p, 1).unwrap(), 7);
        let pa = PointAnalysis::new(&m, p).unwrap();
        let mut rng = point_rng(8, 0);
        for id in IdentityId::ALL {
            let stat = pa.identity_stat(id, Some(0), 4, &mut rng, 0).unwrap();
            assert!(stat.normalized() < 1e-9, "{id}: {:?}", stat.residual);
        }
    }
}

#[test]
fn split_projectors_ignore_kernel_basis() {
    let m = product_3qs(1, 2);
    for (i, p) in sample_points(9, 3, m.dim(), 1.0).iter().enumerate() {
        let a = split_eval(&m, p).unwrap();
        let b = split_eval_mixed(&m, p, i as u64 + 1).unwrap();
        assert!((&a.p_e4l3 - &b.p_e4l3).amax() < 1e-10);
        assert!((&a.p_e4m - &b.p_e4m).amax() < 1e-10);
        assert_eq!((a.l, a.m, a.rank), (1, 2, 7));
    }
}

#[test]
fn catalog_entries_match_their_expected_invariants() {
    for spec in ["flat7", "flat11", "sphere7", "sphere11", "csasakian7:c=4", "product11", "product:l=2,m=1"] {
        let cs = CatalogSpec::parse(spec).unwrap();
        let m = cs.build().unwrap();
        let exp = cs.expected();
        let pts = sample_points(10, 3, m.dim(), 1.0);
        assert_eq!(m.dim(), exp.dim);
        assert!((reeb_constant(&m, &pts).unwrap() - exp.c).abs() < 1e-9, "{spec}");
        for p in &pts {
            assert!(check_ac3_relations(&m, p).unwrap().normalized() < 1e-12, "{spec}");
            for a in 0..3 {
                assert_eq!(rank_at(&m, p, a).unwrap(), exp.rank, "{spec}");
                let (normal, dphi) = check_quasi_sasakian(&m, p, a).unwrap();
                assert!(normal.normalized() < 1e-10 && dphi.normalized() < 1e-10, "{spec}");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Negative controls: the checks must notice broken inputs.

#[test]
fn perturbed_phi_breaks_the_structure_checks() {
    let mut spec = sphere_spec(1);
    let entry = &mut spec.phi[0][2][3];
    *entry = entry.clone() + Expr::var(0) * Expr::Num(1e-3);
    let m = spec.build().unwrap();
    let p = sample_points(11, 1, 7, 1.0).remove(0);
    assert!(check_ac3_relations(&m, &p).unwrap().normalized() > 1e-5);
    let (normal, _) = check_quasi_sasakian(&m, &p, 0).unwrap();
    assert!(normal.normalized() > 1e-5);
    assert!(PointAnalysis::new(&m, &p).is_err());

    let report = run_suite_on(&m, None, &RunConfig { points: 4, trials: 2, fd_check: false, ..RunConfig::new("x") });
    assert!(!report.pass());
    assert!(!report.check(CheckId::Ac3Relations, None).unwrap().pass());
}

/// product11 with the flat factor warped by `1 + |u_sphere|²/2`.
struct WarpedProduct(ProductFields);

impl WarpedProduct {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let mut s = self.0.eval(u)?;
        let f = u[..7].iter().fold(T::constant(1.0, u[0].dim()), |acc, v| acc + v.square() * 0.5);
        for i in 7..11 {
            let gii = s.g.get(i, i).clone() * f.clone();
            s.g.set(i, i, gii);
        }
        Ok(s)
    }
}
qs3_core::impl_structure_fields!(WarpedProduct);

#[test]
fn warped_flat_factor_breaks_the_foliation_check() {
    let good = product_3qs(1, 1);
    let bad = ChartedManifold::new("warped", 1.5, Arc::new(WarpedProduct(ProductFields::new(1, 1))));
    let mut worst = 0.0_f64;
    for (i, p) in sample_points(12, 4, 11, 1.0).iter().enumerate() {
        assert!(check_invariant_foliations(&good, p, 4, i as u64).unwrap().normalized() < 1e-12);
        // still an almost contact metric 3-structure
        assert!(check_ac3_relations(&bad, p).unwrap().normalized() < 1e-12);
        worst = worst.max(check_invariant_foliations(&bad, p, 4, i as u64).unwrap().normalized());
    }
    assert!(worst > 1e-3, "{worst}");
}

/// The φ-quadruple identity with `c²/4` applied to the curvature term too.
fn uncorrected_phi4_defect(pa: &PointAnalysis, a: usize, seed: u64) -> f64 {
    let mut rng = point_rng(seed, 0);
    let mut worst = 0.0_f64;
    for _ in 0..8 {
        let v: Vec<_> = (0..4).map(|_| pa.random_horizontal(&mut rng).unwrap()).collect();
        let (x, y, z, w) = (&v[0], &v[1], &v[2], &v[3]);
        let k = pa.c() * pa.c() / 4.0;
        let ps = |s: &_, t: &_| pa.big_psi(a, s, t);
        let (fx, fy, fz, fw) = (pa.phi(a, x), pa.phi(a, y), pa.phi(a, z), pa.phi(a, w));
        let lhs = pa.geom.curvature_form(&fx, &fy, &fz, &fw);
        let rhs = k
            * (pa.geom.curvature_form(x, y, z, w)
                + ps(z, x) * ps(w, &pa.psi(a, &fy))
                + ps(z, &pa.psi(a, x)) * ps(w, &fy)
                + ps(&fx, z) * ps(&fy, &pa.psi(a, &fw))
                + ps(&fx, &pa.psi(a, z)) * ps(&fy, &fw));
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    worst
}

#[test]
fn literal_phi4_form_fails_once_c_squared_over_four_is_not_one() {
    let p = sample_points(13, 1, 7, 1.0).remove(0);
    let sphere = PointAnalysis::new(&sphere_3sasakian(1), &p).unwrap();
    assert!(uncorrected_phi4_defect(&sphere, 0, 1) < 1e-10);
    let scaled = PointAnalysis::new(&homothety(&sphere_3sasakian(1), 4.0).unwrap(), &p).unwrap();
    assert!(uncorrected_phi4_defect(&scaled, 0, 1) > 1e-2);
    let mut rng = point_rng(1, 0);
    assert!(scaled.identity_stat(IdentityId::Phi4, Some(0), 8, &mut rng, 0).unwrap().normalized() < 1e-10);
}
