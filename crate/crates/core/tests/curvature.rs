use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use qs3_core::catalog::{product_3qs, sphere_3sasakian};
use qs3_core::geometry::{fd, riemann_at, ChartedManifold, StructureJets};
use qs3_core::jet::{jet_point, JetMat, JetScalar};
use qs3_core::sampling::{gaussian_vector, point_rng, sample_points};
use qs3_core::Result;

/// A metric with no special structure: `g = A(u)ᵀA(u) + I`, entries of `A`
/// quadratic in `u`. The 3-structure fields are placeholders.
struct Lumpy {
    d: usize,
}

impl Lumpy {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let d = self.d;
        let jd = u[0].dim();
        let a = JetMat::from_fn(d, d, |i, j| {
            let k = (i + 2 * j) % d;
            u[k].clone() * u[(k + 1) % d].clone() * (0.3 + 0.1 * i as f64) + u[j].clone() * (0.2 * (i as f64 - j as f64))
        });
        let g = a.transpose().matmul(&a).add(&JetMat::identity(d, jd));
        let zero = JetMat::zeros(d, d, jd);
        let xi = std::array::from_fn(|_| vec![T::zero(jd); d]);
        Ok(StructureJets { g, phi: [zero.clone(), zero.clone(), zero], xi })
    }
}
qs3_core::impl_structure_fields!(Lumpy);

fn lumpy(d: usize) -> ChartedManifold {
    ChartedManifold::new("lumpy", f64::INFINITY, Arc::new(Lumpy { d }))
}

#[test]
fn riemann_has_algebraic_symmetries_on_a_generic_metric() {
    let m = lumpy(5);
    for p in sample_points(1, 6, 5, 1.0) {
        let geom = riemann_at(&m, &p).unwrap();
        assert!(geom.symmetry_residual() < 1e-12, "{}", geom.symmetry_residual());
        let scale = geom.riemann_slice().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(scale > 1e-3, "curvature should not vanish");
    }
}

#[test]
fn finite_differences_agree_on_a_generic_metric() {
    let m = lumpy(4);
    for p in sample_points(2, 10, 4, 1.0) {
        let a = fd::compare(&m, &p).unwrap();
        assert!(a.christoffel < 1e-5 && a.riemann < 1e-5, "{a:?} at {p:?}");
    }
}

#[test]
fn levi_civita_connection_is_metric() {
    // X g(Y,Z) = g(∇_X Y, Z) + g(Y, ∇_X Z) for polynomial fields Y, Z
    let m = lumpy(5);
    for (i, p) in sample_points(3, 5, 5, 1.0).iter().enumerate() {
        let u = jet_point(p);
        let s = m.jets_at(p).unwrap();
        let geom = riemann_at(&m, p).unwrap();
        let y: Vec<_> = (0..5).map(|k| u[k].clone() * u[(k + 1) % 5].clone() + (k as f64 + 1.0)).collect();
        let z: Vec<_> = (0..5).map(|k| u[(k + 3) % 5].clone() * 2.0 - u[k].clone() * u[k].clone()).collect();
        let gyz = (0..5)
            .flat_map(|a| (0..5).map(move |b| (a, b)))
            .map(|(a, b)| s.g.get(a, b).clone() * y[a].clone() * z[b].clone())
            .reduce(|a, b| a + b)
            .unwrap();
        let x = gaussian_vector(&mut point_rng(9, i as u64), 5);
        let lhs: f64 = (0..5).map(|k| x[k] * gyz.grad[k]).sum();
        let yv = DVector::from_iterator(5, y.iter().map(|j| j.value));
        let zv = DVector::from_iterator(5, z.iter().map(|j| j.value));
        let rhs = geom.metric.inner(&geom.nabla_vector(&y, &x), &zv) + geom.metric.inner(&yv, &geom.nabla_vector(&z, &x));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn sphere_riemann_has_the_unit_constant_curvature_form() {
    // R_ijkl = g_il g_jk − g_ik g_jl for K = 1 under R(X,Y) = [∇_X, ∇_Y] − ∇_[X,Y]
    let m = sphere_3sasakian(1);
    for p in sample_points(4, 6, 7, 1.0) {
        let geom = riemann_at(&m, &p).unwrap();
        let g = &geom.metric.g;
        let mut worst = 0.0_f64;
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    for l in 0..7 {
                        let expected = g[(i, l)] * g[(j, k)] - g[(i, k)] * g[(j, l)];
                        worst = worst.max((geom.riemann(i, j, k, l) - expected).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
        // and the oracle sees the same thing
        let fd = fd::riemann(&m, &p, fd::STEP).unwrap();
        assert!(fd::relative_error(&fd, geom.riemann_slice()) < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sectional_curvature_depends_only_on_the_plane(
        index in 0u64..1000,
        coef in prop::array::uniform4(-2.0..2.0f64),
        product in any::<bool>(),
    ) {
        let m = if product { product_3qs(1, 1) } else { lumpy(5) };
        let d = m.dim();
        let p = sample_points(index, 1, d, 1.0).remove(0);
        let geom = riemann_at(&m, &p).unwrap();
        let mut rng = point_rng(index, 1);
        let x = gaussian_vector(&mut rng, d);
        let y = gaussian_vector(&mut rng, d);
        let [a, b, c, e] = coef;
        prop_assume!((a * e - b * c).abs() > 0.1);
        let k0 = geom.sectional(&x, &y).unwrap();
        let k1 = geom.sectional(&(&x * a + &y * b), &(&x * c + &y * e)).unwrap();
        prop_assert!((k0 - k1).abs() < 1e-9 * k0.abs().max(1.0), "{k0} vs {k1}");
    }
}

#[test]
fn product_curvature_splits_into_blocks() {
    let m = product_3qs(1, 1);
    for p in sample_points(5, 4, 11, 1.0) {
        let geom = riemann_at(&m, &p).unwrap();
        let mut rng = point_rng(6, 0);
        let mut flat = DVector::zeros(11);
        let mut round = DVector::zeros(11);
        let v = gaussian_vector(&mut rng, 11);
        for i in 0..11 {
            if i < 7 { round[i] = v[i] } else { flat[i] = v[i] }
        }
        let w = gaussian_vector(&mut rng, 11);
        let w_flat = DVector::from_fn(11, |i, _| if i >= 7 { w[i] } else { 0.0 });
        let w_round = DVector::from_fn(11, |i, _| if i < 7 { w[i] } else { 0.0 });
        assert!(geom.sectional(&round, &flat).unwrap().abs() < 1e-12);
        assert!(geom.sectional(&flat, &w_flat).unwrap().abs() < 1e-12);
        assert!((geom.sectional(&round, &w_round).unwrap() - 1.0).abs() < 1e-12);
    }
}
