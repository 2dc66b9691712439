//! Forward-mode jets: scalars that carry their partial derivatives with
//! respect to the chart coordinates.
//!
//! [`Jet2`] holds value, gradient and Hessian and is what catalog fields are
//! evaluated in, so that the metric comes with the second derivatives needed
//! for curvature. [`Jet1`] holds value and gradient only; it is what you get
//! when differentiating a [`Jet2`] once (see [`Jet2::partial`]), and it is
//! the right type for quantities such as Christoffel symbols or `dη` whose
//! first derivatives are still exact but whose second derivatives would need
//! a third-order jet.
//!
//! Plain `f64` also implements [`JetScalar`] (with dimension 0), which lets
//! the same generic field code produce value-only evaluations for the
//! finite-difference oracles.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Operations available to jet programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Recip,
    Sqrt,
    PowInt,
}

impl fmt::Display for JetOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JetOp::Add => "add",
            JetOp::Sub => "sub",
            JetOp::Mul => "mul",
            JetOp::Div => "div",
            JetOp::Neg => "neg",
            JetOp::Recip => "recip",
            JetOp::Sqrt => "sqrt",
            JetOp::PowInt => "pow_int",
        };
        f.write_str(s)
    }
}

/// Common surface of `f64`, [`Jet1`] and [`Jet2`].
///
/// Infallible ring operations come from the std operator traits; the
/// partial ones (`recip`, `sqrt`, `powi` with negative exponent) return a
/// singular-evaluation error instead of producing infinities.
pub trait JetScalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(value: f64, dim: usize) -> Self;
    fn value(&self) -> f64;
    fn dim(&self) -> usize;
    /// First partial derivative along coordinate `i`; zero for plain reals.
    fn d(&self, i: usize) -> f64;
    fn recip(&self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn powi(&self, n: i32) -> Result<Self>;

    fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }

    fn checked_div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.clone() * rhs.recip()?)
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

fn singular(op: JetOp, value: f64) -> Error {
    Error::SingularEvaluation { op: op.to_string(), value }
}

fn check_recip(v: f64) -> Result<()> {
    if v == 0.0 || !v.is_finite() {
        Err(singular(JetOp::Recip, v))
    } else {
        Ok(())
    }
}

fn check_sqrt(v: f64) -> Result<()> {
    if v <= 0.0 || !v.is_finite() {
        Err(singular(JetOp::Sqrt, v))
    } else {
        Ok(())
    }
}

fn check_powi(v: f64, n: i32) -> Result<()> {
    if n < 0 && v == 0.0 {
        Err(singular(JetOp::PowInt, v))
    } else {
        Ok(())
    }
}

/// Value, first and second derivative of `v^n`.
fn powi_derivs(v: f64, n: i32) -> (f64, f64, f64) {
    match n {
        0 => (1.0, 0.0, 0.0),
        1 => (v, 1.0, 0.0),
        _ => {
            let nf = n as f64;
            (v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
        }
    }
}

impl JetScalar for f64 {
    fn constant(value: f64, _dim: usize) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn dim(&self) -> usize {
        0
    }
    fn d(&self, _i: usize) -> f64 {
        0.0
    }
    fn recip(&self) -> Result<Self> {
        check_recip(*self)?;
        Ok(1.0 / self)
    }
    fn sqrt(&self) -> Result<Self> {
        check_sqrt(*self)?;
        Ok(f64::sqrt(*self))
    }
    fn powi(&self, n: i32) -> Result<Self> {
        check_powi(*self, n)?;
        Ok(f64::powi(*self, n))
    }
}

// ---------------------------------------------------------------------------
// Jet1
// ---------------------------------------------------------------------------

/// A scalar with exact gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Jet1 {
    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Jet1 { value, grad }
    }

    fn assert_same_dim(&self, other: &Jet1) {
        assert_eq!(
            self.grad.len(),
            other.grad.len(),
            "jet dimension mismatch: {} vs {}",
            self.grad.len(),
            other.grad.len()
        );
    }

    /// Apply a scalar function given its value and first derivative at `self.value`.
    fn chain(&self, f0: f64, f1: f64) -> Jet1 {
        Jet1 {
            value: f0,
            grad: self.grad.iter().map(|g| f1 * g).collect(),
        }
    }
}

impl JetScalar for Jet1 {
    fn constant(value: f64, dim: usize) -> Self {
        Jet1 { value, grad: vec![0.0; dim] }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn dim(&self) -> usize {
        self.grad.len()
    }
    fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }
    fn recip(&self) -> Result<Self> {
        check_recip(self.value)?;
        let r = 1.0 / self.value;
        Ok(self.chain(r, -r * r))
    }
    fn sqrt(&self) -> Result<Self> {
        check_sqrt(self.value)?;
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s))
    }
    fn powi(&self, n: i32) -> Result<Self> {
        check_powi(self.value, n)?;
        let (f0, f1, _) = powi_derivs(self.value, n);
        Ok(self.chain(f0, f1))
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(mut self, rhs: Jet1) -> Jet1 {
        self.assert_same_dim(&rhs);
        self.value += rhs.value;
        for (a, b) in self.grad.iter_mut().zip(&rhs.grad) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(mut self, rhs: Jet1) -> Jet1 {
        self.assert_same_dim(&rhs);
        self.value -= rhs.value;
        for (a, b) in self.grad.iter_mut().zip(&rhs.grad) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    // product rule
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Jet1) -> Jet1 {
        self.assert_same_dim(&rhs);
        let grad = self
            .grad
            .iter()
            .zip(&rhs.grad)
            .map(|(ga, gb)| self.value * gb + rhs.value * ga)
            .collect();
        Jet1 { value: self.value * rhs.value, grad }
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(mut self) -> Jet1 {
        self.value = -self.value;
        for g in &mut self.grad {
            *g = -*g;
        }
        self
    }
}

impl Add<f64> for Jet1 {
    type Output = Jet1;
    fn add(mut self, rhs: f64) -> Jet1 {
        self.value += rhs;
        self
    }
}

impl Mul<f64> for Jet1 {
    type Output = Jet1;
    fn mul(mut self, rhs: f64) -> Jet1 {
        self.value *= rhs;
        for g in &mut self.grad {
            *g *= rhs;
        }
        self
    }
}

// ---------------------------------------------------------------------------
// Jet2
// ---------------------------------------------------------------------------

/// A scalar with exact gradient and Hessian in `d` chart coordinates.
///
/// The Hessian is stored densely (row-major `d×d`). Every operation writes
/// entry `(i,j)` and `(j,i)` from expressions that are bitwise symmetric in
/// `i` and `j`, so symmetry holds exactly, not just to rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Jet2 {
    /// Builds a jet from raw parts, symmetrizing the Hessian.
    pub fn from_parts(value: f64, grad: Vec<f64>, hess: Vec<f64>) -> Self {
        let d = grad.len();
        assert_eq!(hess.len(), d * d, "hessian must be d×d");
        let mut h = hess;
        for i in 0..d {
            for j in (i + 1)..d {
                let s = 0.5 * (h[i * d + j] + h[j * d + i]);
                h[i * d + j] = s;
                h[j * d + i] = s;
            }
        }
        Jet2 { value, grad, hess: h }
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.grad.len() + j]
    }

    pub fn hess_slice(&self) -> &[f64] {
        &self.hess
    }

    /// Drops the Hessian.
    pub fn truncate(&self) -> Jet1 {
        Jet1 { value: self.value, grad: self.grad.clone() }
    }

    /// `∂_i` of this jet as a first-order jet: value `∂_i f`, gradient
    /// `∂_j ∂_i f`.
    pub fn partial(&self, i: usize) -> Jet1 {
        let d = self.grad.len();
        Jet1 {
            value: self.grad[i],
            grad: self.hess[i * d..(i + 1) * d].to_vec(),
        }
    }

    fn assert_same_dim(&self, other: &Jet2) {
        assert_eq!(
            self.grad.len(),
            other.grad.len(),
            "jet dimension mismatch: {} vs {}",
            self.grad.len(),
            other.grad.len()
        );
    }

    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let d = self.grad.len();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = f1 * self.hess[i * d + j] + f2 * (self.grad[i] * self.grad[j]);
            }
        }
        Jet2 { value: f0, grad, hess }
    }
}

/// `x_i` as a jet at value `v`: gradient `e_i`, zero Hessian.
pub fn jet_var(v: f64, i: usize, d: usize) -> Result<Jet2> {
    if i >= d {
        return Err(Error::Dimension(format!("variable index {i} out of range for dimension {d}")));
    }
    let mut grad = vec![0.0; d];
    grad[i] = 1.0;
    Ok(Jet2 { value: v, grad, hess: vec![0.0; d * d] })
}

/// Seeds one jet variable per coordinate of `point`.
pub fn jet_point(point: &[f64]) -> Vec<Jet2> {
    let d = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &v)| jet_var(v, i, d).expect("index in range"))
        .collect()
}

/// Second operand of [`jet_apply`].
#[derive(Debug, Clone, Copy)]
pub enum JetArg<'a> {
    None,
    Jet(&'a Jet2),
    Exponent(i32),
}

/// Applies one op of the jet instruction set.
pub fn jet_apply(op: JetOp, a: &Jet2, b: JetArg<'_>) -> Result<Jet2> {
    let other = |b: JetArg<'_>| match b {
        JetArg::Jet(j) => Ok(j.clone()),
        _ => Err(Error::Dimension(format!("op {op} needs a jet operand"))),
    };
    match op {
        JetOp::Add => Ok(a.clone() + other(b)?),
        JetOp::Sub => Ok(a.clone() - other(b)?),
        JetOp::Mul => Ok(a.clone() * other(b)?),
        JetOp::Div => a.checked_div(&other(b)?),
        JetOp::Neg => Ok(-a.clone()),
        JetOp::Recip => a.recip(),
        JetOp::Sqrt => a.sqrt(),
        JetOp::PowInt => match b {
            JetArg::Exponent(n) => a.powi(n),
            _ => Err(Error::Dimension("pow_int needs an integer exponent".into())),
        },
    }
}

impl JetScalar for Jet2 {
    fn constant(value: f64, dim: usize) -> Self {
        Jet2 { value, grad: vec![0.0; dim], hess: vec![0.0; dim * dim] }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn dim(&self) -> usize {
        self.grad.len()
    }
    fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }
    fn recip(&self) -> Result<Self> {
        check_recip(self.value)?;
        let r = 1.0 / self.value;
        Ok(self.chain(r, -r * r, 2.0 * r * r * r))
    }
    fn sqrt(&self) -> Result<Self> {
        check_sqrt(self.value)?;
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * self.value)))
    }
    fn powi(&self, n: i32) -> Result<Self> {
        check_powi(self.value, n)?;
        let (f0, f1, f2) = powi_derivs(self.value, n);
        Ok(self.chain(f0, f1, f2))
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        self.assert_same_dim(&rhs);
        self.value += rhs.value;
        for (a, b) in self.grad.iter_mut().zip(&rhs.grad) {
            *a += b;
        }
        for (a, b) in self.hess.iter_mut().zip(&rhs.hess) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: Jet2) -> Jet2 {
        self.assert_same_dim(&rhs);
        self.value -= rhs.value;
        for (a, b) in self.grad.iter_mut().zip(&rhs.grad) {
            *a -= b;
        }
        for (a, b) in self.hess.iter_mut().zip(&rhs.hess) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        &self * &rhs
    }
}

impl<'a> Mul<&'a Jet2> for &'a Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &'a Jet2) -> Jet2 {
        self.assert_same_dim(rhs);
        let d = self.grad.len();
        let (a, b) = (self.value, rhs.value);
        let grad = self.grad.iter().zip(&rhs.grad).map(|(ga, gb)| a * gb + b * ga).collect();
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            let (gai, gbi) = (self.grad[i], rhs.grad[i]);
            for j in 0..d {
                let k = i * d + j;
                hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + (gai * rhs.grad[j] + self.grad[j] * gbi);
            }
        }
        // (gai*gbj + gaj*gbi) is the same sum in both orders, so hess stays symmetric.
        Jet2 { value: a * b, grad, hess }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        self.value = -self.value;
        for g in &mut self.grad {
            *g = -*g;
        }
        for h in &mut self.hess {
            *h = -*h;
        }
        self
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: f64) -> Jet2 {
        self.value += rhs;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, rhs: f64) -> Jet2 {
        self.value *= rhs;
        for g in &mut self.grad {
            *g *= rhs;
        }
        for h in &mut self.hess {
            *h *= rhs;
        }
        self
    }
}

// ---------------------------------------------------------------------------
// Jet matrices and linear solves
// ---------------------------------------------------------------------------

/// Dense row-major matrix of jet scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: JetScalar> JetMat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        JetMat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        JetMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |col| col.len());
        JetMat::from_fn(r, c, |i, j| cols[j][i].clone())
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        JetMat::from_fn(rows, cols, |_, _| T::zero(dim))
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        JetMat::from_fn(n, n, |i, j| T::constant(if i == j { 1.0 } else { 0.0 }, dim))
    }

    /// Constant jets from a plain matrix.
    pub fn constant(m: &nalgebra::DMatrix<f64>, dim: usize) -> Self {
        JetMat::from_fn(m.nrows(), m.ncols(), |i, j| T::constant(m[(i, j)], dim))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        JetMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        JetMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x.clone() * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        JetMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).clone() + other.get(i, j).clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        JetMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).clone() - other.get(i, j).clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        JetMat::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = self.get(i, 0).clone() * other.get(0, j).clone();
            for k in 1..self.cols {
                acc = acc + self.get(i, k).clone() * other.get(k, j).clone();
            }
            acc
        })
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = self.get(i, 0).clone() * v[0].clone();
                for k in 1..self.cols {
                    acc = acc + self.get(i, k).clone() * v[k].clone();
                }
                acc
            })
            .collect()
    }

    /// Value parts as a plain matrix.
    pub fn values(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).value())
    }

    /// `∂_k` of every entry (value parts of the derivative only).
    pub fn d_values(&self, k: usize) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).d(k))
    }
}

impl JetMat<Jet2> {
    pub fn truncate(&self) -> JetMat<Jet1> {
        JetMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(Jet2::truncate).collect() }
    }
}

/// Value parts of a jet vector.
pub fn values<T: JetScalar>(v: &[T]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(v.len(), v.iter().map(JetScalar::value))
}

/// `Σ a_i b_i` over jets.
pub fn dot<T: JetScalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let mut acc = a[0].clone() * b[0].clone();
    for k in 1..a.len() {
        acc = acc + a[k].clone() * b[k].clone();
    }
    acc
}

/// Relative pivot floor used by [`jet_solve`].
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Solves `A X = B` over the jet ring by Gaussian elimination with partial
/// pivoting on value magnitude.
///
/// Because every step is a ring operation (plus reciprocals of pivots), the
/// derivative parts of `X` are the exact derivatives of the solution of the
/// value system.
pub fn jet_solve_matrix<T: JetScalar>(a: &JetMat<T>, b: &JetMat<T>) -> Result<JetMat<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "jet_solve needs square A and matching B, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let w = b.ncols();
    let col_scale: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| a.get(i, j).value().abs()).fold(0.0, f64::max))
        .collect();

    let mut m = a.clone();
    let mut r = b.clone();
    for k in 0..n {
        let (piv, piv_abs) = (k..n)
            .map(|i| (i, m.get(i, k).value().abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if col_scale[k] == 0.0 || piv_abs <= PIVOT_FLOOR * col_scale[k] {
            return Err(Error::SingularSystem { pivot: piv_abs, column: k });
        }
        if piv != k {
            for j in 0..n {
                m.data.swap(k * n + j, piv * n + j);
            }
            for j in 0..w {
                r.data.swap(k * w + j, piv * w + j);
            }
        }
        let inv = m.get(k, k).recip()?;
        for i in (k + 1)..n {
            let f = m.get(i, k).clone() * inv.clone();
            for j in (k + 1)..n {
                let v = m.get(i, j).clone() - f.clone() * m.get(k, j).clone();
                m.set(i, j, v);
            }
            for j in 0..w {
                let v = r.get(i, j).clone() - f.clone() * r.get(k, j).clone();
                r.set(i, j, v);
            }
        }
    }
    let mut x = r;
    for k in (0..n).rev() {
        let inv = m.get(k, k).recip()?;
        for j in 0..w {
            let mut acc = x.get(k, j).clone();
            for c in (k + 1)..n {
                acc = acc - m.get(k, c).clone() * x.get(c, j).clone();
            }
            x.set(k, j, acc * inv.clone());
        }
    }
    Ok(x)
}

/// Single right-hand side version of [`jet_solve_matrix`].
pub fn jet_solve<T: JetScalar>(a: &JetMat<T>, b: &[T]) -> Result<Vec<T>> {
    let bm = JetMat::from_columns(&[b.to_vec()]);
    Ok(jet_solve_matrix(a, &bm)?.column(0))
}

/// Inverse of a jet matrix.
pub fn jet_inverse<T: JetScalar>(a: &JetMat<T>) -> Result<JetMat<T>> {
    let dim = a.get(0, 0).dim();
    jet_solve_matrix(a, &JetMat::identity(a.nrows(), dim))
}
