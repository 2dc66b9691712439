//! User-defined manifolds from a JSON description.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "name": "my7",
//!   "dim": 7,
//!   "domain_radius": 1.0,
//!   "metric": [[1, 0, ...], ...],
//!   "phi": [[[...]], [[...]], [[...]]],
//!   "xi": [[...], [...], [...]]
//! }
//! ```
//!
//! Each entry is an expression: a number, `{"var": i}`, `{"add": [a, b]}`,
//! `{"sub": [a, b]}`, `{"mul": [a, b]}`, `{"div": [a, b]}`, `{"neg": a}`,
//! `{"recip": a}`, `{"sqrt": a}` or `{"pow": [a, n]}` with integer `n`.
//! `phi[α][i][j]` is the component `(φ_α)^i_j`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChartedManifold, StructureJets};
use crate::jet::{JetMat, JetScalar};

pub const SPEC_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Num(f64),
    Op(Box<Op>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Recip(Expr),
    Sqrt(Expr),
    Pow(Expr, i32),
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Op(Box::new(Op::Var(i)))
    }
    pub fn op(op: Op) -> Self {
        Expr::Op(Box::new(op))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $v:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::op(Op::$v(self, rhs))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::op(Op::Neg(self))
    }
}

/// On-disk manifold description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub schema: u32,
    pub name: String,
    pub dim: usize,
    pub domain_radius: f64,
    pub metric: Vec<Vec<Expr>>,
    pub phi: [Vec<Vec<Expr>>; 3],
    pub xi: [Vec<Expr>; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Instr {
    Const(f64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Recip(usize),
    Sqrt(usize),
    Pow(usize, i32),
}

/// Key for common-subexpression elimination; constants compare by bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(usize),
    Bin(u8, usize, usize),
    Un(u8, usize),
    Pow(usize, i32),
}

impl Instr {
    fn key(self) -> Key {
        match self {
            Instr::Const(v) => Key::Const(v.to_bits()),
            Instr::Var(i) => Key::Var(i),
            Instr::Add(a, b) => Key::Bin(0, a.min(b), a.max(b)),
            Instr::Mul(a, b) => Key::Bin(1, a.min(b), a.max(b)),
            Instr::Sub(a, b) => Key::Bin(2, a, b),
            Instr::Div(a, b) => Key::Bin(3, a, b),
            Instr::Neg(a) => Key::Un(0, a),
            Instr::Recip(a) => Key::Un(1, a),
            Instr::Sqrt(a) => Key::Un(2, a),
            Instr::Pow(a, n) => Key::Pow(a, n),
        }
    }
}

/// Straight-line program shared by all component fields.
#[derive(Clone, Debug, Default)]
pub struct Program {
    code: Vec<Instr>,
    seen: HashMap<Key, usize>,
}

impl Program {
    fn emit(&mut self, ins: Instr) -> usize {
        if let Some(&r) = self.seen.get(&ins.key()) {
            return r;
        }
        self.code.push(ins);
        let r = self.code.len() - 1;
        self.seen.insert(ins.key(), r);
        r
    }

    /// Compiles `e`, returning its register.
    pub fn compile(&mut self, e: &Expr, dim: usize) -> Result<usize> {
        Ok(match e {
            Expr::Num(v) => {
                if !v.is_finite() {
                    return Err(Error::Spec(format!("non-finite constant {v}")));
                }
                self.emit(Instr::Const(*v))
            }
            Expr::Op(op) => match &**op {
                Op::Var(i) => {
                    if *i >= dim {
                        return Err(Error::Spec(format!("variable index {i} out of range for dimension {dim}")));
                    }
                    self.emit(Instr::Var(*i))
                }
                Op::Add(a, b) => {
                    let (a, b) = (self.compile(a, dim)?, self.compile(b, dim)?);
                    self.emit(Instr::Add(a, b))
                }
                Op::Sub(a, b) => {
                    let (a, b) = (self.compile(a, dim)?, self.compile(b, dim)?);
                    self.emit(Instr::Sub(a, b))
                }
                Op::Mul(a, b) => {
                    let (a, b) = (self.compile(a, dim)?, self.compile(b, dim)?);
                    self.emit(Instr::Mul(a, b))
                }
                Op::Div(a, b) => {
                    let (a, b) = (self.compile(a, dim)?, self.compile(b, dim)?);
                    self.emit(Instr::Div(a, b))
                }
                Op::Neg(a) => {
                    let a = self.compile(a, dim)?;
                    self.emit(Instr::Neg(a))
                }
                Op::Recip(a) => {
                    let a = self.compile(a, dim)?;
                    self.emit(Instr::Recip(a))
                }
                Op::Sqrt(a) => {
                    let a = self.compile(a, dim)?;
                    self.emit(Instr::Sqrt(a))
                }
                Op::Pow(a, n) => {
                    let a = self.compile(a, dim)?;
                    self.emit(Instr::Pow(a, *n))
                }
            },
        })
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// Runs the program on `u`, returning every register.
    pub fn run<T: JetScalar>(&self, u: &[T]) -> Result<Vec<T>> {
        let jd = u.first().map_or(0, JetScalar::dim);
        let mut r: Vec<T> = Vec::with_capacity(self.code.len());
        for ins in &self.code {
            let v = match *ins {
                Instr::Const(c) => T::constant(c, jd),
                Instr::Var(i) => u[i].clone(),
                Instr::Add(a, b) => r[a].clone() + r[b].clone(),
                Instr::Sub(a, b) => r[a].clone() - r[b].clone(),
                Instr::Mul(a, b) => r[a].clone() * r[b].clone(),
                Instr::Div(a, b) => r[a].checked_div(&r[b])?,
                Instr::Neg(a) => -r[a].clone(),
                Instr::Recip(a) => r[a].recip()?,
                Instr::Sqrt(a) => r[a].sqrt()?,
                Instr::Pow(a, n) => r[a].powi(n)?,
            };
            r.push(v);
        }
        Ok(r)
    }
}

/// Compiled [`ManifoldSpec`].
#[derive(Clone, Debug)]
pub struct ExprFields {
    dim: usize,
    program: Program,
    g: Vec<usize>,
    phi: [Vec<usize>; 3],
    xi: [Vec<usize>; 3],
}

impl ExprFields {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval<T: JetScalar>(&self, u: &[T]) -> Result<StructureJets<T>> {
        let d = self.dim;
        let r = self.program.run(u)?;
        let mat = |regs: &[usize]| JetMat::from_fn(d, d, |i, j| r[regs[i * d + j]].clone());
        Ok(StructureJets {
            g: mat(&self.g),
            phi: std::array::from_fn(|a| mat(&self.phi[a])),
            xi: std::array::from_fn(|a| self.xi[a].iter().map(|&k| r[k].clone()).collect()),
        })
    }
}
crate::impl_structure_fields!(ExprFields);

impl ManifoldSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ManifoldSpec = serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        if spec.schema != SPEC_SCHEMA {
            return Err(Error::Spec(format!("unsupported schema {} (expected {SPEC_SCHEMA})", spec.schema)));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn compile(&self) -> Result<ExprFields> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        let mut program = Program::default();
        let matrix = |m: &[Vec<Expr>], what: &str, program: &mut Program| -> Result<Vec<usize>> {
            if m.len() != d || m.iter().any(|row| row.len() != d) {
                return Err(Error::Spec(format!("{what} must be a {d}x{d} matrix")));
            }
            m.iter().flatten().map(|e| program.compile(e, d)).collect()
        };
        let g = matrix(&self.metric, "metric", &mut program)?;
        let mut phi: [Vec<usize>; 3] = Default::default();
        for a in 0..3 {
            phi[a] = matrix(&self.phi[a], &format!("phi[{a}]"), &mut program)?;
        }
        let mut xi: [Vec<usize>; 3] = Default::default();
        for a in 0..3 {
            if self.xi[a].len() != d {
                return Err(Error::Spec(format!("xi[{a}] must have {d} components")));
            }
            xi[a] = self.xi[a].iter().map(|e| program.compile(e, d)).collect::<Result<_>>()?;
        }
        Ok(ExprFields { dim: d, program, g, phi, xi })
    }

    pub fn build(&self) -> Result<ChartedManifold> {
        if !(self.domain_radius > 0.0) {
            return Err(Error::Spec("domain_radius must be positive".into()));
        }
        Ok(ChartedManifold::new(self.name.clone(), self.domain_radius, Arc::new(self.compile()?)))
    }
}

/// The round 3-Sasakian sphere `S^{4n+3}` in the stereographic chart of
/// [`crate::catalog::SphereFields`], written out as expressions. Uses
/// `g = (4/s²)I` with `s = 1 + |u|²` and `Dxᵀx = 0` to avoid linear solves.
pub fn sphere_spec(n: usize) -> ManifoldSpec {
    let d = 4 * n + 3;
    let u: Vec<Expr> = (0..d).map(Expr::var).collect();
    let r2 = u.iter().skip(1).fold(u[0].clone() * u[0].clone(), |acc, v| acc + v.clone() * v.clone());
    let s = Expr::Num(1.0) + r2.clone();
    let inv_s = Expr::op(Op::Recip(s.clone()));
    let inv_s2 = Expr::op(Op::Pow(inv_s.clone(), 2));
    let ginv = Expr::op(Op::Pow(s, 2)) * Expr::Num(0.25);
    let mut x: Vec<Expr> = u.iter().map(|v| Expr::Num(2.0) * v.clone() * inv_s.clone()).collect();
    x.push((r2 - Expr::Num(1.0)) * inv_s.clone());
    let dx = |a: usize, i: usize| -> Expr {
        if a == d {
            return Expr::Num(4.0) * u[i].clone() * inv_s2.clone();
        }
        let v = Expr::Num(-4.0) * u[a].clone() * u[i].clone() * inv_s2.clone();
        if a == i {
            v + Expr::Num(2.0) * inv_s.clone()
        } else {
            v
        }
    };
    let sum = |terms: Vec<Expr>| terms.into_iter().reduce(|a, b| a + b).unwrap_or(Expr::Num(0.0));
    let metric = (0..d)
        .map(|i| (0..d).map(|j| if i == j { Expr::Num(4.0) * inv_s2.clone() } else { Expr::Num(0.0) }).collect())
        .collect();
    let mut phi: [Vec<Vec<Expr>>; 3] = Default::default();
    let mut xi: [Vec<Expr>; 3] = Default::default();
    for a in 0..3 {
        let r = crate::catalog::right_mult_matrix(a, n + 1);
        // (row, column, sign) of the signed permutation
        let entries: Vec<(usize, usize, f64)> =
            (0..=d).flat_map(|p| (0..=d).map(move |q| (p, q))).filter(|&(p, q)| r[(p, q)] != 0.0).map(|(p, q)| (p, q, r[(p, q)])).collect();
        xi[a] = (0..d)
            .map(|i| ginv.clone() * sum(entries.iter().map(|&(p, q, sg)| Expr::Num(sg) * dx(p, i) * x[q].clone()).collect()))
            .collect();
        phi[a] = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| -(ginv.clone() * sum(entries.iter().map(|&(p, q, sg)| Expr::Num(sg) * dx(p, i) * dx(q, j)).collect())))
                    .collect()
            })
            .collect();
    }
    ManifoldSpec {
        schema: SPEC_SCHEMA,
        name: format!("sphere{d}-spec"),
        dim: d,
        domain_radius: crate::catalog::SPHERE_DOMAIN_RADIUS,
        metric,
        phi,
        xi,
    }
}

/// Reads and compiles a manifold spec file.
pub fn load_manifold(path: &Path) -> Result<ChartedManifold> {
    ManifoldSpec::load(path)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{jet_point, Jet2};

    #[test]
    fn parses_all_node_kinds() {
        let text = r#"[1.5, {"var": 0}, {"add": [1, 2]}, {"sub": [1, 2]}, {"mul": [{"var": 1}, 2]},
                       {"div": [1, 4]}, {"neg": 3}, {"recip": 2}, {"sqrt": 9}, {"pow": [2, -2]}]"#;
        let es: Vec<Expr> = serde_json::from_str(text).unwrap();
        let mut p = Program::default();
        let regs: Vec<usize> = es.iter().map(|e| p.compile(e, 2).unwrap()).collect();
        let out = p.run(&[10.0, 20.0]).unwrap();
        let vals: Vec<f64> = regs.iter().map(|&r| out[r]).collect();
        assert_eq!(vals, vec![1.5, 10.0, 3.0, -1.0, 40.0, 0.25, -3.0, 0.5, 3.0, 0.25]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(serde_json::from_str::<Expr>(r#"{"exp": 1}"#).is_err());
        let mut p = Program::default();
        assert!(matches!(p.compile(&Expr::var(3), 2), Err(Error::Spec(_))));
        let e = Expr::op(Op::Sqrt(Expr::var(0)));
        let r = p.compile(&e, 1).unwrap();
        assert!(p.run(&[-1.0]).is_err());
        assert_eq!(p.run(&[4.0]).unwrap()[r], 2.0);
    }

    #[test]
    fn shares_common_subexpressions() {
        let x = Expr::var(0);
        let sq = x.clone() * x.clone();
        let mut p = Program::default();
        p.compile(&(sq.clone() + sq), 1).unwrap();
        // var, mul, add
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn jets_flow_through_programs() {
        let x = Expr::var(0);
        let e = Expr::op(Op::Recip(Expr::Num(1.0) + x.clone() * x));
        let mut p = Program::default();
        let r = p.compile(&e, 1).unwrap();
        let out: Vec<Jet2> = p.run(&jet_point(&[1.0])).unwrap();
        assert_eq!(out[r].value, 0.5);
        assert_eq!(out[r].grad, vec![-0.5]);
        assert_eq!(out[r].hess(0, 0), 0.5);
    }

    #[test]
    fn spec_shape_is_validated() {
        let spec = ManifoldSpec {
            schema: 1,
            name: "bad".into(),
            dim: 2,
            domain_radius: 1.0,
            metric: vec![vec![Expr::Num(1.0)]],
            phi: Default::default(),
            xi: Default::default(),
        };
        assert!(matches!(spec.compile(), Err(Error::Spec(_))));
        assert!(matches!(ManifoldSpec::from_json("{\"schema\": 2}"), Err(Error::Spec(_))));
    }

    #[test]
    fn sphere_spec_matches_catalog() {
        let spec = ManifoldSpec::from_json(&sphere_spec(1).to_json()).unwrap();
        let m = spec.build().unwrap();
        let reference = crate::catalog::sphere_3sasakian(1);
        for p in crate::sampling::sample_points(3, 4, 7, 1.0) {
            let a = m.jets_at(&p).unwrap();
            let b = reference.jets_at(&p).unwrap();
            let close = |x: &Jet2, y: &Jet2| {
                (x.value - y.value).abs() < 1e-12
                    && x.grad.iter().zip(&y.grad).all(|(s, t)| (s - t).abs() < 1e-11)
                    && (0..7).all(|i| (0..7).all(|j| (x.hess(i, j) - y.hess(i, j)).abs() < 1e-10))
            };
            for i in 0..7 {
                for j in 0..7 {
                    assert!(close(a.g.get(i, j), b.g.get(i, j)), "g[{i}][{j}] at {p:?}");
                    for k in 0..3 {
                        assert!(close(a.phi[k].get(i, j), b.phi[k].get(i, j)), "phi{k}[{i}][{j}]");
                    }
                }
                for k in 0..3 {
                    assert!(close(&a.xi[k][i], &b.xi[k][i]), "xi{k}[{i}]");
                }
            }
        }
    }
}
