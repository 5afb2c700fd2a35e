//! Sparse multivariate polynomials and polynomial constraint systems.
//!
//! Text format (one polynomial): one term per line, `coeff e1 e2 ... en`;
//! `#` starts a comment; an optional `vars N` line fixes the variable count.
//! Systems separate polynomials with a line containing `---`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Exponent vector ordered graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(Box<[u16]>);

impl Monomial {
    pub fn new(exps: &[u16]) -> Self {
        Monomial(exps.into())
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial in `n_vars` real variables stored as a sparse monomial map.
///
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Debug)]
pub struct MultiPoly {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: u16, k: u16) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl MultiPoly {
    /// The zero polynomial.
    pub fn zero(n_vars: usize) -> Self {
        MultiPoly { n_vars, terms: BTreeMap::new() }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(&vec![0; n_vars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(n_vars: usize, i: usize) -> Self {
        assert!(i < n_vars, "variable index out of range");
        let mut e = vec![0; n_vars];
        e[i] = 1;
        let mut p = Self::zero(n_vars);
        p.add_term(&e, 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated monomials accumulate.
    pub fn from_terms<I, E>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (E, f64)>,
        E: AsRef<[u16]>,
    {
        let mut p = Self::zero(n_vars);
        for (e, c) in terms {
            let e = e.as_ref();
            if e.len() != n_vars {
                return Err(Error::DimensionMismatch { expected: n_vars, got: e.len() });
            }
            if !c.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: &[u16], c: f64) {
        if c == 0.0 {
            return;
        }
        let key = Monomial::new(e);
        let v = self.terms.entry(key.clone()).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Maximum total degree over stored terms (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().next_back().map(|m| m.degree()).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u16], f64)> {
        self.terms.iter().map(|(m, &c)| (m.exponents(), c))
    }

    /// Coefficient of the monomial with exponents `e` (0 if absent).
    pub fn coeff(&self, e: &[u16]) -> f64 {
        self.terms.get(&Monomial::new(e)).copied().unwrap_or(0.0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.keys().all(|m| m.degree() == d)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n_vars {
            return Err(Error::DimensionMismatch { expected: self.n_vars, got: len });
        }
        Ok(())
    }

    /// Evaluates at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, &c)| {
                m.0.iter().zip(x).fold(c, |acc, (&e, &xi)| if e == 0 { acc } else { acc * xi.powi(e as i32) })
            })
            .sum()
    }

    /// Exact gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let n = self.n_vars;
        let mut g = DVector::zeros(n);
        for (m, &c) in &self.terms {
            let e = &m.0;
            for i in 0..n {
                if e[i] == 0 {
                    continue;
                }
                let mut v = c * e[i] as f64;
                for k in 0..n {
                    let p = if k == i { e[k] - 1 } else { e[k] };
                    if p > 0 {
                        v *= x[k].powi(p as i32);
                    }
                }
                g[i] += v;
            }
        }
        Ok(g)
    }

    /// Exact Hessian at `x` (symmetric by construction).
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x.len())?;
        let n = self.n_vars;
        let mut h = DMatrix::zeros(n, n);
        let mut d = vec![0i32; n];
        for (m, &c) in &self.terms {
            let e = &m.0;
            for i in 0..n {
                for j in i..n {
                    let f = if i == j {
                        (e[i] as f64) * (e[i] as f64 - 1.0)
                    } else {
                        e[i] as f64 * e[j] as f64
                    };
                    if f == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        d[k] = e[k] as i32;
                    }
                    d[i] -= 1;
                    d[j] -= 1;
                    let mut v = c * f;
                    for k in 0..n {
                        if d[k] > 0 {
                            v *= x[k].powi(d[k]);
                        }
                    }
                    h[(i, j)] += v;
                    if i != j {
                        h[(j, i)] += v;
                    }
                }
            }
        }
        Ok(h)
    }

    /// Formal partial derivative with respect to `x_i`.
    pub fn partial(&self, i: usize) -> MultiPoly {
        let mut out = Self::zero(self.n_vars);
        for (m, &c) in &self.terms {
            if m.0[i] == 0 {
                continue;
            }
            let mut e = m.0.to_vec();
            let k = e[i];
            e[i] -= 1;
            out.add_term(&e, c * k as f64);
        }
        out
    }

    /// Re-centers at `z`: returns `q(eps) = p(z + eps)`.
    pub fn shift(&self, z: &[f64]) -> Result<MultiPoly> {
        self.check_dim(z.len())?;
        let n = self.n_vars;
        let mut out = Self::zero(n);
        for (m, &c) in &self.terms {
            // Expand prod_k (z_k + eps_k)^{e_k} one variable at a time.
            let mut partial: Vec<(Vec<u16>, f64)> = vec![(vec![0; n], c)];
            for k in 0..n {
                let ek = m.0[k];
                if ek == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(partial.len() * (ek as usize + 1));
                for (e, v) in &partial {
                    for j in 0..=ek {
                        let w = binomial(ek, j) * z[k].powi((ek - j) as i32);
                        if w == 0.0 {
                            continue;
                        }
                        let mut e2 = e.clone();
                        e2[k] = j;
                        next.push((e2, v * w));
                    }
                }
                partial = next;
            }
            for (e, v) in partial {
                out.add_term(&e, v);
            }
        }
        out.prune(0.0);
        Ok(out)
    }

    /// Drops terms whose magnitude is at most `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    /// Degree-`j` homogeneous component.
    pub fn homogeneous_part(&self, j: usize) -> MultiPoly {
        MultiPoly {
            n_vars: self.n_vars,
            terms: self.terms.iter().filter(|(m, _)| m.degree() == j).map(|(m, &c)| (m.clone(), c)).collect(),
        }
    }

    /// Homogenizes with an extra trailing variable; evaluating at `(x; 1)` recovers `p(x)`.
    pub fn homogenize(&self) -> MultiPoly {
        let d = self.degree() as u16;
        let mut out = Self::zero(self.n_vars + 1);
        for (m, &c) in &self.terms {
            let mut e = m.0.to_vec();
            e.push(d - m.degree() as u16);
            out.add_term(&e, c);
        }
        out
    }

    /// Sum of absolute coefficient values.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        let mut out = Self::zero(self.n_vars);
        for (m, &c) in &self.terms {
            out.add_term(&m.0, c * s);
        }
        out
    }

    fn combine(&self, other: &MultiPoly, sign: f64) -> MultiPoly {
        assert_eq!(self.n_vars, other.n_vars, "variable count mismatch");
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(&m.0, sign * c);
        }
        out
    }

    fn product(&self, other: &MultiPoly) -> MultiPoly {
        assert_eq!(self.n_vars, other.n_vars, "variable count mismatch");
        let mut out = Self::zero(self.n_vars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let e: Vec<u16> = a.0.iter().zip(b.0.iter()).map(|(x, y)| x + y).collect();
                out.add_term(&e, ca * cb);
            }
        }
        out
    }

    /// Raises to a nonnegative integer power.
    pub fn pow(&self, k: u32) -> MultiPoly {
        let mut out = Self::constant(self.n_vars, 1.0);
        for _ in 0..k {
            out = out.product(self);
        }
        out
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        self.product(rhs)
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(-1.0)
    }
}

impl Add for MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: MultiPoly) -> MultiPoly {
        &self + &rhs
    }
}

impl Sub for MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: MultiPoly) -> MultiPoly {
        &self - &rhs
    }
}

impl Mul for MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: MultiPoly) -> MultiPoly {
        &self * &rhs
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars {}", self.n_vars)?;
        for (m, c) in self.terms.iter().rev() {
            write!(f, "{c:e}")?;
            for e in m.0.iter() {
                write!(f, " {e}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn parse_block<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Option<MultiPoly>> {
    let mut n_vars: Option<usize> = None;
    let mut terms: Vec<(Vec<u16>, f64)> = Vec::new();
    let mut seen = false;
    for (lineno, raw) in lines {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        seen = true;
        let mut tok = line.split_whitespace();
        let first = tok.next().expect("non-empty line");
        if first == "vars" {
            let n = tok
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse { line: lineno, msg: "expected `vars N`".into() })?;
            if let Some(prev) = n_vars {
                if prev != n {
                    return Err(Error::Parse { line: lineno, msg: "conflicting variable count".into() });
                }
            }
            n_vars = Some(n);
            continue;
        }
        let c: f64 = first
            .parse()
            .map_err(|_| Error::Parse { line: lineno, msg: format!("bad coefficient `{first}`") })?;
        let exps = tok
            .map(|s| s.parse::<u16>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse { line: lineno, msg: "bad exponent".into() })?;
        match n_vars {
            Some(n) if n != exps.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {n} exponents, found {}", exps.len()),
                })
            }
            None => n_vars = Some(exps.len()),
            _ => {}
        }
        terms.push((exps, c));
    }
    if !seen {
        return Ok(None);
    }
    let n = n_vars.ok_or_else(|| Error::Parse { line: 0, msg: "cannot infer variable count".into() })?;
    MultiPoly::from_terms(n, terms).map(Some)
}

impl FromStr for MultiPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_block(s.lines().enumerate().map(|(i, l)| (i + 1, l)))?
            .ok_or_else(|| Error::Parse { line: 0, msg: "empty polynomial".into() })
    }
}

/// Symmetric order-`j` array of `j`-th partial derivatives, stored densely.
#[derive(Clone, Debug)]
pub struct SymmetricTensor {
    pub n: usize,
    pub order: usize,
    pub data: Vec<f64>,
}

impl SymmetricTensor {
    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    /// Full contraction with `v` in every slot.
    pub fn contract(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut idx = vec![0usize; self.order];
        for (flat, &t) in self.data.iter().enumerate() {
            let mut r = flat;
            for k in (0..self.order).rev() {
                idx[k] = r % self.n;
                r /= self.n;
            }
            total += t * idx.iter().map(|&i| v[i]).product::<f64>();
        }
        total
    }
}

/// Value, Jacobian and (optionally) Hessians of a system at a point.
#[derive(Clone, Debug)]
pub struct TaylorData {
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub hessians: Vec<DMatrix<f64>>,
}

/// `N >= 1` polynomial constraints sharing the same variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialConstraintSystem {
    constraints: Vec<MultiPoly>,
    n: usize,
}

impl PolynomialConstraintSystem {
    pub fn new(constraints: Vec<MultiPoly>) -> Result<Self> {
        let first = constraints
            .first()
            .ok_or_else(|| Error::InvalidInput("a system needs at least one constraint".into()))?;
        let n = first.n_vars();
        for c in &constraints {
            if c.n_vars() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.n_vars() });
            }
        }
        Ok(PolynomialConstraintSystem { constraints, n })
    }

    pub fn single(p: MultiPoly) -> Self {
        let n = p.n_vars();
        PolynomialConstraintSystem { constraints: vec![p], n }
    }

    pub fn constraints(&self) -> &[MultiPoly] {
        &self.constraints
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.constraints.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: z.len() });
        }
        Ok(())
    }

    pub fn values(&self, z: &[f64]) -> Result<DVector<f64>> {
        self.check(z)?;
        Ok(DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.eval_unchecked(z))))
    }

    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let mut j = DMatrix::zeros(self.constraints.len(), self.n);
        for (i, c) in self.constraints.iter().enumerate() {
            j.set_row(i, &c.gradient(z)?.transpose());
        }
        Ok(j)
    }

    /// Value and Jacobian; `hessians` is left empty.
    pub fn eval_system(&self, z: &[f64]) -> Result<TaylorData> {
        Ok(TaylorData { value: self.values(z)?, jacobian: self.jacobian(z)?, hessians: Vec::new() })
    }

    pub fn eval_hessians(&self, z: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check(z)?;
        self.constraints.iter().map(|c| c.hessian(z)).collect()
    }

    /// Value, Jacobian and Hessians.
    pub fn taylor(&self, z: &[f64]) -> Result<TaylorData> {
        let mut t = self.eval_system(z)?;
        t.hessians = self.eval_hessians(z)?;
        Ok(t)
    }

    /// Component `i` is `v x T_j^{(i)}`, the order-`j` derivative tensor contracted with `v` in every slot.
    pub fn contract_tensor(&self, z: &[f64], j: usize, v: &[f64]) -> Result<DVector<f64>> {
        self.check(z)?;
        self.check(v)?;
        let d = self.degree();
        if j < 1 || j > d.max(1) {
            return Err(Error::OrderOutOfRange { order: j, degree: d });
        }
        let jf = factorial(j);
        let mut out = DVector::zeros(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            let part = c.shift(z)?.homogeneous_part(j);
            out[i] = jf * part.eval_unchecked(v);
        }
        Ok(out)
    }

    /// Dense order-`j` derivative tensor of constraint `i` at `z`.
    pub fn taylor_tensor(&self, i: usize, z: &[f64], j: usize) -> Result<SymmetricTensor> {
        self.check(z)?;
        let c = self
            .constraints
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("constraint index {i} out of range")))?;
        let n = self.n;
        let part = c.shift(z)?.homogeneous_part(j);
        let mut t = SymmetricTensor { n, order: j, data: vec![0.0; n.pow(j as u32)] };
        let mut idx = vec![0usize; j];
        for flat in 0..t.data.len() {
            let mut r = flat;
            for k in (0..j).rev() {
                idx[k] = r % n;
                r /= n;
            }
            let mut alpha = vec![0u16; n];
            for &k in &idx {
                alpha[k] += 1;
            }
            let afact: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
            t.data[flat] = afact * part.coeff(&alpha);
        }
        Ok(t)
    }

    /// Parses polynomials separated by `---` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut polys = Vec::new();
        let mut block: Vec<(usize, &str)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim() == "---" {
                if let Some(p) = parse_block(block.drain(..))? {
                    polys.push(p);
                }
            } else {
                block.push((i + 1, line));
            }
        }
        if let Some(p) = parse_block(block.drain(..))? {
            polys.push(p);
        }
        Self::new(polys)
    }
}

impl fmt::Display for PolynomialConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                writeln!(f, "---")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Convenience constructors used throughout tests and examples.
pub mod examples {
    use super::*;

    /// The ellipse `x1^2 + 2 x2^2 - 4`.
    pub fn ellipse() -> MultiPoly {
        MultiPoly::from_terms(2, [([2u16, 0], 1.0), ([0, 2], 2.0), ([0, 0], -4.0)]).expect("static")
    }

    /// Unit sphere intersected with the saddle `z - x y`.
    pub fn sphere_saddle() -> PolynomialConstraintSystem {
        let s = MultiPoly::from_terms(3, [([2u16, 0, 0], 1.0), ([0, 2, 0], 1.0), ([0, 0, 2], 1.0), ([0, 0, 0], -1.0)])
            .expect("static");
        let q = MultiPoly::from_terms(3, [([0u16, 0, 1], 1.0), ([1, 1, 0], -1.0)]).expect("static");
        PolynomialConstraintSystem::new(vec![s, q]).expect("static")
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;

    #[test]
    fn ellipse_values() {
        let sys = PolynomialConstraintSystem::single(ellipse());
        let t = sys.taylor(&[2.0, 0.0]).unwrap();
        assert_eq!(t.value[0], 0.0);
        assert_eq!(t.jacobian, DMatrix::from_row_slice(1, 2, &[4.0, 0.0]));
        assert_eq!(t.hessians[0], DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]));
        let t0 = sys.eval_system(&[0.0, 0.0]).unwrap();
        assert_eq!(t0.value[0], -4.0);
        assert_eq!(t0.jacobian.norm(), 0.0);
    }

    #[test]
    fn sphere_saddle_jacobian() {
        let sys = sphere_saddle();
        let t = sys.taylor(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.value.as_slice(), &[0.0, 0.0]);
        assert_eq!(t.jacobian, DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 1.0]));
        let h = &t.hessians[1];
        assert_eq!(*h, DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn linear_hessian_is_zero() {
        let p = MultiPoly::from_terms(2, [([1u16, 0], 1.0), ([0, 1], 1.0)]).unwrap();
        assert_eq!(p.hessian(&[0.3, -2.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn contractions() {
        let sys = PolynomialConstraintSystem::single(ellipse());
        assert_eq!(sys.contract_tensor(&[0.5, 0.5], 2, &[1.0, 0.0]).unwrap()[0], 2.0);
        assert_eq!(sys.contract_tensor(&[0.5, 0.5], 1, &[0.0, 0.0]).unwrap()[0], 0.0);
        let cube = PolynomialConstraintSystem::single(MultiPoly::from_terms(1, [([3u16], 1.0)]).unwrap());
        assert!((cube.contract_tensor(&[0.7], 3, &[2.0]).unwrap()[0] - 48.0).abs() < 1e-12);
        assert!(matches!(sys.contract_tensor(&[0.0, 0.0], 3, &[1.0, 0.0]), Err(Error::OrderOutOfRange { .. })));
    }

    #[test]
    fn coefficient_norms() {
        let p = MultiPoly::from_terms(2, [([2u16, 0], 3.0), ([1, 1], -2.0)]).unwrap();
        assert_eq!(p.coefficient_norm(), 5.0);
        assert!(p.eval(&[1.0, 1.0]).unwrap().abs() <= 5.0 * 2.0);
        assert_eq!(MultiPoly::zero(3).coefficient_norm(), 0.0);
        let q = MultiPoly::from_terms(2, [([2u16, 0], 1.0), ([0, 2], 2.0)]).unwrap();
        assert_eq!(q.coefficient_norm(), 3.0);
    }

    #[test]
    fn zero_terms_are_dropped() {
        let p = MultiPoly::from_terms(1, [([1u16], 2.0), ([1], -2.0), ([0], 0.0)]).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn text_roundtrip() {
        let sys = sphere_saddle();
        let text = sys.to_string();
        let back = PolynomialConstraintSystem::parse(&text).unwrap();
        assert_eq!(back, sys);
        let p: MultiPoly = "# ellipse\n1 2 0\n2 0 2 # y^2 term\n-4 0 0\n".parse().unwrap();
        assert_eq!(p, ellipse());
        assert!("1 2 0\n1 1\n".parse::<MultiPoly>().is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(ellipse().eval(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn tensor_matches_contraction() {
        let p = MultiPoly::from_terms(2, [([3u16, 0], 1.0), ([1, 2], -2.0), ([0, 1], 0.5)]).unwrap();
        let sys = PolynomialConstraintSystem::single(p);
        let z = [0.4, -1.3];
        let v = [0.7, 0.2];
        for j in 1..=3 {
            let t = sys.taylor_tensor(0, &z, j).unwrap();
            let c = sys.contract_tensor(&z, j, &v).unwrap()[0];
            assert!((t.contract(&v) - c).abs() < 1e-12);
        }
        let h = sys.eval_hessians(&z).unwrap();
        let t2 = sys.taylor_tensor(0, &z, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((t2.get(&[a, b]) - h[0][(a, b)]).abs() < 1e-12);
            }
        }
    }
}
