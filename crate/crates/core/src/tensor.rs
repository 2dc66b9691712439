//! Multilinear algebra at a single point: alternating forms with wedge and
//! interior products, skew-matrix rank and kernels, and metric frames.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type PointVector = DVector<f64>;

/// Strictly increasing index tuples of length `k` drawn from `0..d`, in
/// lexicographic order.
pub fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            if d - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= d {
        rec(0, d, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Position of an increasing tuple in [`combinations`] order.
fn rank_of(tuple: &[usize], d: usize) -> usize {
    let k = tuple.len();
    let mut r = 0;
    let mut prev = 0;
    for (pos, &t) in tuple.iter().enumerate() {
        for skipped in prev..t {
            r += binomial(d - skipped - 1, k - pos - 1);
        }
        prev = t + 1;
    }
    r
}

/// Sorts a tuple of distinct indices, returning the permutation sign, or
/// `None` if an index repeats.
fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// Alternating `k`-form on `R^d`, stored densely over increasing index tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct AltForm {
    dim: usize,
    degree: usize,
    comps: Vec<f64>,
}

impl AltForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        AltForm { dim, degree, comps: vec![0.0; binomial(dim, degree)] }
    }

    /// 0-form with the given value.
    pub fn scalar(dim: usize, value: f64) -> Self {
        AltForm { dim, degree: 0, comps: vec![value] }
    }

    pub fn from_covector(eta: &[f64]) -> Self {
        AltForm { dim: eta.len(), degree: 1, comps: eta.to_vec() }
    }

    /// 2-form from the upper triangle of a (skew) matrix, `ω(e_i,e_j) = A_ij`.
    pub fn from_skew_matrix(a: &DMatrix<f64>) -> Self {
        let d = a.nrows();
        let comps = combinations(d, 2).iter().map(|t| a[(t[0], t[1])]).collect();
        AltForm { dim: d, degree: 2, comps }
    }

    /// `dx^{i_1}∧…∧dx^{i_k}` for distinct indices.
    pub fn basis(dim: usize, idx: &[usize]) -> Self {
        let mut f = AltForm::zero(dim, idx.len());
        if let Some((sorted, sign)) = sort_with_sign(idx) {
            let r = rank_of(&sorted, dim);
            f.comps[r] = sign;
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[f64] {
        &self.comps
    }

    /// Value on basis vectors `e_{idx[0]},…`; indices may be in any order.
    pub fn component(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.degree);
        match sort_with_sign(idx) {
            Some((sorted, sign)) => sign * self.comps[rank_of(&sorted, self.dim)],
            None => 0.0,
        }
    }

    pub fn set_component(&mut self, idx: &[usize], value: f64) {
        if let Some((sorted, sign)) = sort_with_sign(idx) {
            let r = rank_of(&sorted, self.dim);
            self.comps[r] = sign * value;
        }
    }

    /// The 2-form as a full skew matrix.
    pub fn to_skew_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.degree, 2);
        DMatrix::from_fn(self.dim, self.dim, |i, j| if i == j { 0.0 } else { self.component(&[i, j]) })
    }

    /// `ω(X_1,…,X_k) = Σ_I ω_I det[X_j^{i_m}]`.
    pub fn eval(&self, vectors: &[&PointVector]) -> f64 {
        assert_eq!(vectors.len(), self.degree, "wrong number of arguments");
        if self.degree == 0 {
            return self.comps[0];
        }
        let k = self.degree;
        combinations(self.dim, k)
            .iter()
            .zip(&self.comps)
            .filter(|(_, &c)| c != 0.0)
            .map(|(tuple, &c)| {
                let m = DMatrix::from_fn(k, k, |r, s| vectors[s][tuple[r]]);
                c * m.determinant()
            })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        AltForm { dim: self.dim, degree: self.degree, comps: self.comps.iter().map(|c| c * s).collect() }
    }

    pub fn sub(&self, other: &AltForm) -> AltForm {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree));
        AltForm {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &AltForm) -> AltForm {
        self.sub(&other.scaled(-1.0))
    }
}

/// Wedge product with the determinant (unit shuffle) convention.
pub fn wedge(omega: &AltForm, tau: &AltForm) -> Result<AltForm> {
    if omega.dim != tau.dim {
        return Err(Error::Dimension(format!("wedge of forms on R^{} and R^{}", omega.dim, tau.dim)));
    }
    let (k, l, d) = (omega.degree, tau.degree, omega.dim);
    if k + l > d {
        return Err(Error::Degree(format!("wedge degree {} exceeds dimension {d}", k + l)));
    }
    let mut out = AltForm::zero(d, k + l);
    for (r, tuple) in combinations(d, k + l).iter().enumerate() {
        let mut acc = 0.0;
        // Each k-subset of positions gives one shuffle; its sign is the
        // parity of (selected positions, remaining positions).
        for pos in combinations(k + l, k) {
            let rest: Vec<usize> = (0..k + l).filter(|p| !pos.contains(p)).collect();
            let mut perm = pos.clone();
            perm.extend(&rest);
            let (_, sign) = sort_with_sign(&perm).expect("distinct positions");
            let a: Vec<usize> = pos.iter().map(|&p| tuple[p]).collect();
            let b: Vec<usize> = rest.iter().map(|&p| tuple[p]).collect();
            let wa = if k == 0 { omega.comps[0] } else { omega.comps[rank_of(&a, d)] };
            let tb = if l == 0 { tau.comps[0] } else { tau.comps[rank_of(&b, d)] };
            acc += sign * wa * tb;
        }
        out.comps[r] = acc;
    }
    Ok(out)
}

/// Interior product `(i_X ω)(Y_1,…) = ω(X, Y_1,…)`.
pub fn interior(x: &PointVector, omega: &AltForm) -> Result<AltForm> {
    if omega.degree == 0 {
        return Err(Error::Degree("interior product of a 0-form".into()));
    }
    if x.len() != omega.dim {
        return Err(Error::Dimension(format!("vector of length {} on R^{}", x.len(), omega.dim)));
    }
    let d = omega.dim;
    let k = omega.degree;
    let mut out = AltForm::zero(d, k - 1);
    let tuples = combinations(d, k - 1);
    for (r, tuple) in tuples.iter().enumerate() {
        let mut acc = 0.0;
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            let mut idx = vec![i];
            idx.extend(tuple);
            acc += x[i] * omega.component(&idx);
        }
        out.comps[r] = acc;
    }
    Ok(out)
}

/// Rank and kernel of a skew-symmetric matrix.
#[derive(Clone, Debug)]
pub struct SkewSpectrum {
    pub rank: usize,
    /// Euclidean-orthonormal basis of the null space, one vector per column.
    pub kernel: DMatrix<f64>,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Singular values (descending) and matching right singular vectors.
pub(crate) fn sorted_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let n = a.ncols();
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(n, order.len(), |r, c| v_t[(order[c], r)]);
    (sv, v)
}

/// Numerical rank (singular values above `tol·σ_max`) and kernel of a skew
/// matrix.
pub fn skew_spectrum(a: &DMatrix<f64>, tol: f64) -> Result<SkewSpectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("skew_spectrum needs a square matrix".into()));
    }
    let norm = a.amax();
    let asym = (a + a.transpose()).amax();
    if asym > tol * norm.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(Error::NotSkew(asym));
    }
    let (sv, v) = sorted_svd(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tol * smax).count() };
    if rank % 2 != 0 {
        return Err(Error::IndeterminateRank { singular_values: sv });
    }
    let kernel = v.columns(rank, n - rank).into_owned();
    Ok(SkewSpectrum { rank, kernel, singular_values: sv })
}

/// Metric at a point with its inverse.
#[derive(Clone, Debug)]
pub struct MetricFrame {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricFrame {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::Metric("metric is not square".into()));
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-10 * g.amax().max(1.0) {
            return Err(Error::Metric(format!("metric is not symmetric (asymmetry {asym:e})")));
        }
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Metric("metric is not positive definite".into()))?;
        let g_inv = chol.inverse();
        Ok(MetricFrame { g, g_inv })
    }

    pub fn euclidean(d: usize) -> Self {
        MetricFrame { g: DMatrix::identity(d, d), g_inv: DMatrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn inner(&self, x: &PointVector, y: &PointVector) -> f64 {
        (x.transpose() * &self.g * y)[(0, 0)]
    }

    pub fn norm(&self, x: &PointVector) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// `g(x, ·)` as a covector.
    pub fn flat(&self, x: &PointVector) -> PointVector {
        &self.g * x
    }

    pub fn normalize(&self, x: &PointVector) -> Result<PointVector> {
        let n = self.norm(x);
        if n <= 1e-12 {
            return Err(Error::RankDeficient("cannot normalize a null vector".into()));
        }
        Ok(x / n)
    }
}

/// Flips `v` so its first non-negligible component is positive.
fn sign_normalize(mut v: PointVector) -> PointVector {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Modified Gram–Schmidt with respect to `frame.g`.
pub fn orthonormalize(vectors: &[PointVector], frame: &MetricFrame) -> Result<Vec<PointVector>> {
    let mut out: Vec<PointVector> = Vec::with_capacity(vectors.len());
    for (idx, v) in vectors.iter().enumerate() {
        let start = frame.norm(v);
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let p = frame.inner(e, &w);
                w -= e * p;
            }
        }
        let n = frame.norm(&w);
        if n <= 1e-10 * start.max(1e-300) || start == 0.0 {
            return Err(Error::RankDeficient(format!("vector {idx} depends on its predecessors")));
        }
        out.push(sign_normalize(w / n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> PointVector {
        let mut v = PointVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn combination_ranking_roundtrips() {
        for d in 1..8 {
            for k in 0..=d {
                for (r, t) in combinations(d, k).iter().enumerate() {
                    assert_eq!(rank_of(t, d), r);
                }
            }
        }
    }

    #[test]
    fn basis_two_form_on_basis_vectors() {
        let w = AltForm::basis(3, &[0, 1]);
        assert_eq!(w.eval(&[&e(3, 0), &e(3, 1)]), 1.0);
        assert_eq!(w.eval(&[&e(3, 1), &e(3, 0)]), -1.0);
        let dx1 = AltForm::basis(3, &[0]);
        let dx2 = AltForm::basis(3, &[1]);
        let w2 = wedge(&dx1, &dx2).unwrap();
        assert_eq!(w2, w);
    }

    #[test]
    fn one_form_wedge_itself_vanishes() {
        let w = AltForm::from_covector(&[0.3, -1.2, 2.0, 0.5]);
        let ww = wedge(&w, &w).unwrap();
        assert!(ww.max_abs() < 1e-15);
    }

    #[test]
    fn symplectic_square_on_four_vectors() {
        let omega = AltForm::basis(4, &[0, 1]).add(&AltForm::basis(4, &[2, 3]));
        let sq = wedge(&omega, &omega).unwrap();
        assert_eq!(sq.eval(&[&e(4, 0), &e(4, 1), &e(4, 2), &e(4, 3)]), 2.0);
    }

    #[test]
    fn wedge_degree_overflow() {
        let a = AltForm::basis(2, &[0, 1]);
        let b = AltForm::basis(2, &[0]);
        assert!(matches!(wedge(&a, &b), Err(Error::Degree(_))));
    }

    #[test]
    fn interior_of_basis_form() {
        let w = AltForm::basis(3, &[0, 1]);
        let i = interior(&e(3, 0), &w).unwrap();
        assert_eq!(i, AltForm::basis(3, &[1]));
        let eta = AltForm::from_covector(&[1.0, 2.0, 3.0]);
        let x = PointVector::from_vec(vec![1.0, 1.0, -1.0]);
        let s = interior(&x, &eta).unwrap();
        assert_eq!((s.degree(), s.components()[0]), (0, 0.0));
        assert!(matches!(interior(&x, &AltForm::scalar(3, 1.0)), Err(Error::Degree(_))));
    }

    #[test]
    fn skew_spectrum_of_zero_and_symplectic() {
        let z = DMatrix::zeros(4, 4);
        let s = skew_spectrum(&z, 1e-7).unwrap();
        assert_eq!((s.rank, s.kernel.ncols()), (0, 4));

        let mut j = DMatrix::zeros(6, 6);
        for b in 0..3 {
            j[(2 * b, 2 * b + 1)] = 1.0;
            j[(2 * b + 1, 2 * b)] = -1.0;
        }
        let s = skew_spectrum(&j, 1e-7).unwrap();
        assert_eq!((s.rank, s.kernel.ncols()), (6, 0));
    }

    #[test]
    fn skew_spectrum_rejects_symmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(skew_spectrum(&m, 1e-7), Err(Error::NotSkew(_))));
    }

    #[test]
    fn orthonormalize_simple_cases() {
        let f = MetricFrame::euclidean(2);
        let out = orthonormalize(&[e(2, 0), e(2, 0) + e(2, 1)], &f).unwrap();
        assert!((&out[0] - e(2, 0)).amax() < 1e-15);
        assert!((&out[1] - e(2, 1)).amax() < 1e-15);

        let flipped = orthonormalize(&[-e(2, 1), e(2, 0)], &f).unwrap();
        assert!((&flipped[0] - e(2, 1)).amax() < 1e-15);

        assert!(matches!(
            orthonormalize(&[e(2, 0), e(2, 0) * 2.0], &f),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn metric_frame_rejects_indefinite() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(MetricFrame::new(g), Err(Error::Metric(_))));
    }
}
