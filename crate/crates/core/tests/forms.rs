use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qs3_core::tensor::{combinations, interior, orthonormalize, skew_spectrum, wedge, AltForm, MetricFrame};

const D: usize = 6;

fn form(degree: usize, comps: &[f64]) -> AltForm {
    let mut f = AltForm::zero(D, degree);
    for (idx, c) in combinations(D, degree).iter().zip(comps) {
        f.set_component(idx, *c);
    }
    f
}

fn random_form(degree: usize) -> impl Strategy<Value = AltForm> {
    let n = combinations(D, degree).len();
    prop::collection::vec(-1.0..1.0f64, n).prop_map(move |c| form(degree, &c))
}

fn close(a: &AltForm, b: &AltForm) -> bool {
    a.sub(b).max_abs() <= 1e-12 * a.max_abs().max(b.max_abs()).max(1.0)
}

proptest! {
    #[test]
    fn wedge_is_associative(a in random_form(1), b in random_form(2), c in random_form(2)) {
        let left = wedge(&wedge(&a, &b).unwrap(), &c).unwrap();
        let right = wedge(&a, &wedge(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn wedge_is_graded_commutative(p in 0usize..4, q in 0usize..3, seed in prop::collection::vec(-1.0..1.0f64, 40)) {
        let a = form(p, &seed);
        let b = form(q, &seed[20..]);
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(close(&ab, &ba.scaled(sign)));
    }

    #[test]
    fn odd_forms_square_to_zero(a in random_form(3)) {
        prop_assert!(wedge(&a, &a).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn interior_is_an_antiderivation(
        x in prop::collection::vec(-1.0..1.0f64, D),
        a in random_form(2),
        b in random_form(3),
    ) {
        let x = DVector::from_vec(x);
        let lhs = interior(&x, &wedge(&a, &b).unwrap()).unwrap();
        let rhs = wedge(&interior(&x, &a).unwrap(), &b)
            .unwrap()
            .add(&wedge(&a, &interior(&x, &b).unwrap()).unwrap());
        prop_assert!(close(&lhs, &rhs));
        // i_X i_X = 0
        prop_assert!(interior(&x, &interior(&x, &b).unwrap()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn skew_rank_is_congruence_invariant(
        r in 0usize..4,
        vs in prop::collection::vec(-1.0..1.0f64, 2 * 3 * D),
        s in prop::collection::vec(-1.0..1.0f64, D * D),
    ) {
        // sum of r generic planes u∧v has rank 2r
        let mut a = DMatrix::zeros(D, D);
        for k in 0..r {
            let u = DVector::from_column_slice(&vs[2 * k * D..(2 * k + 1) * D]);
            let v = DVector::from_column_slice(&vs[(2 * k + 1) * D..(2 * k + 2) * D]);
            a += &u * v.transpose() - &v * u.transpose();
        }
        let s = DMatrix::from_vec(D, D, s) + DMatrix::identity(D, D) * 3.0;
        let b = s.transpose() * &a * &s;
        let ra = skew_spectrum(&a, 1e-9).unwrap().rank;
        let rb = skew_spectrum(&b, 1e-9).unwrap().rank;
        prop_assert_eq!(ra, rb);
        prop_assert!(ra <= 2 * r && ra.is_multiple_of(2));
    }

    #[test]
    fn gram_schmidt_gives_orthonormal_frames(
        vs in prop::collection::vec(-1.0..1.0f64, 5 * 7),
        l in prop::collection::vec(-0.5..0.5f64, 49),
    ) {
        let l = DMatrix::from_vec(7, 7, l) + DMatrix::identity(7, 7);
        let frame = MetricFrame::new(&l * l.transpose()).unwrap();
        let input: Vec<DVector<f64>> = (0..5).map(|k| DVector::from_column_slice(&vs[7 * k..7 * k + 7])).collect();
        if let Ok(out) = orthonormalize(&input, &frame) {
            for i in 0..5 {
                for j in 0..5 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((frame.inner(&out[i], &out[j]) - target).abs() < 1e-10);
                }
                // span is preserved: out[i] lies in span(input[..=i])
                let basis = DMatrix::from_columns(&input[..=i]);
                let coef = basis.clone().svd(true, true).solve(&out[i], 1e-12).unwrap();
                prop_assert!((basis * coef - &out[i]).amax() < 1e-8);
            }
        }
    }
}

#[test]
fn dependent_vectors_are_rejected() {
    let frame = MetricFrame::euclidean(3);
    let a = DVector::from_vec(vec![1.0, 2.0, 0.0]);
    let b = &a * 2.0;
    assert!(orthonormalize(&[a, b], &frame).is_err());
}

#[test]
fn basis_wedges_follow_permutation_sign() {
    let e01 = AltForm::basis(D, &[0, 1]);
    let e2 = AltForm::basis(D, &[2]);
    let w = wedge(&e2, &e01).unwrap();
    assert_eq!(w.component(&[0, 1, 2]), 1.0);
    assert_eq!(w.component(&[1, 0, 2]), -1.0);
    assert_eq!(AltForm::basis(D, &[1, 0]).component(&[0, 1]), -1.0);
    assert_eq!(AltForm::basis(D, &[1, 1]).max_abs(), 0.0);
}
