//! Sparse multivariate polynomials with `f64` coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Coefficients with magnitude below this are dropped.
pub const PRUNE: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    Arity(usize, usize),
    #[error("polynomial text at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Exponent vector. Ordered by total degree, then with earlier variables
/// ranking first (so the degree-1 block reads x, y, z).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &v)| acc * v.powi(e as i32))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in `n` variables of total degree ≤ `max_degree`, in
/// monomial order.
pub fn monomials_up_to(n: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut exps = vec![0u32; n];
        of_degree(n, d, 0, &mut exps, &mut out);
    }
    out
}

fn of_degree(n: usize, remaining: u32, i: usize, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if n == 0 {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if i == n - 1 {
        exps[i] = remaining;
        out.push(Monomial(exps.clone()));
        exps[i] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[i] = e;
        of_degree(n, remaining - e, i + 1, exps, out);
    }
    exps[i] = 0;
}

/// Number of monomials of degree ≤ d in n variables, C(n + d, d), or `None`
/// on overflow.
pub fn basis_count(n: usize, d: u32) -> Option<u128> {
    let mut c: u128 = 1;
    for k in 1..=d as u128 {
        c = c.checked_mul(n as u128 + k)? / k;
    }
    Some(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(Monomial::one(nvars), c)])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::from_terms(nvars, [(Monomial::var(nvars, i), 1.0)])
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let n = m.nvars();
        Self::from_terms(n, [(m, c)])
    }

    /// Sums duplicate monomials and prunes near-zero coefficients.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Polynomial::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial arity");
            *p.terms.entry(m).or_insert(0.0) += c;
        }
        p.prune();
        p
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE);
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    fn check(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::Arity(self.nvars, other.nvars));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (a, &x) in &self.terms {
            for (b, &y) in &other.terms {
                *out.terms.entry(a.mul(b)).or_insert(0.0) += x * y;
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect(),
        };
        out.prune();
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self).expect("same arity");
        }
        out
    }

    /// Sum of squared coefficients.
    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum()
    }

    /// Re-expresses the polynomial over a larger variable set; variable `i`
    /// of `self` becomes variable `map[i]` of the result.
    pub fn embed(&self, nvars: usize, map: &[usize]) -> Polynomial {
        Polynomial::from_terms(
            nvars,
            self.terms.iter().map(|(m, &c)| {
                let mut e = vec![0; nvars];
                for (i, &x) in m.0.iter().enumerate() {
                    e[map[i]] += x;
                }
                (Monomial(e), c)
            }),
        )
    }

    /// Renders in the fixture text form, highest degree first and in
    /// monomial order within a degree.
    pub fn to_text(&self, vars: &[&str]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut terms: Vec<(&Monomial, &f64)> = self.terms.iter().collect();
        terms.sort_by_key(|(m, _)| std::cmp::Reverse(m.degree()));
        let mut s = String::new();
        for (i, (m, &c)) in terms.into_iter().enumerate() {
            let mag = c.abs();
            if i == 0 {
                if c < 0.0 {
                    s.push('-');
                }
            } else {
                s.push_str(if c < 0.0 { " - " } else { " + " });
            }
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(v, &e)| {
                    if e == 1 {
                        vars[v].to_string()
                    } else {
                        format!("{}^{}", vars[v], e)
                    }
                })
                .collect();
            if factors.is_empty() {
                let _ = write!(s, "{mag}");
            } else {
                if mag != 1.0 {
                    let _ = write!(s, "{mag}*");
                }
                s.push_str(&factors.join("*"));
            }
        }
        s
    }

    /// Parses `3*x^2*y - 1.5*y + 2` over the given variable names.
    pub fn parse(text: &str, vars: &[&str]) -> Result<Polynomial, PolyError> {
        let n = vars.len();
        let b = text.as_bytes();
        let mut i = 0;
        let err = |pos: usize, msg: &str| PolyError::Parse {
            pos,
            msg: msg.to_string(),
        };
        let skip = |i: &mut usize| {
            while *i < b.len() && b[*i].is_ascii_whitespace() {
                *i += 1;
            }
        };
        let mut terms = Vec::new();
        let mut first = true;
        loop {
            skip(&mut i);
            if i >= b.len() {
                if first {
                    return Err(err(i, "empty polynomial"));
                }
                break;
            }
            let mut sign = 1.0;
            if b[i] == b'+' || b[i] == b'-' {
                if b[i] == b'-' {
                    sign = -1.0;
                }
                i += 1;
                skip(&mut i);
            } else if !first {
                return Err(err(i, "expected `+` or `-`"));
            }
            first = false;
            let mut coeff = sign;
            let mut exps = vec![0u32; n];
            loop {
                skip(&mut i);
                if i >= b.len() {
                    return Err(err(i, "expected a factor"));
                }
                if b[i].is_ascii_digit() || b[i] == b'.' {
                    let start = i;
                    while i < b.len()
                        && (b[i].is_ascii_digit()
                            || b[i] == b'.'
                            || b[i] == b'e'
                            || b[i] == b'E'
                            || ((b[i] == b'-' || b[i] == b'+')
                                && i > start
                                && (b[i - 1] == b'e' || b[i - 1] == b'E')))
                    {
                        i += 1;
                    }
                    let v: f64 = text[start..i]
                        .parse()
                        .map_err(|_| err(start, "malformed number"))?;
                    coeff *= v;
                } else if b[i].is_ascii_alphabetic() || b[i] == b'_' {
                    let start = i;
                    while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                        i += 1;
                    }
                    let name = &text[start..i];
                    let v = vars
                        .iter()
                        .position(|&x| x == name)
                        .ok_or_else(|| err(start, &format!("unknown variable `{name}`")))?;
                    skip(&mut i);
                    let mut e = 1;
                    if i < b.len() && b[i] == b'^' {
                        i += 1;
                        skip(&mut i);
                        let s = i;
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                        e = text[s..i].parse().map_err(|_| err(s, "malformed exponent"))?;
                    }
                    exps[v] += e;
                } else {
                    return Err(err(i, "expected a number or variable"));
                }
                skip(&mut i);
                if i < b.len() && b[i] == b'*' {
                    i += 1;
                    continue;
                }
                break;
            }
            terms.push((Monomial(exps), coeff));
        }
        Ok(Polynomial::from_terms(n, terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> Polynomial {
        Polynomial::var(2, 0)
    }
    fn y() -> Polynomial {
        Polynomial::var(2, 1)
    }

    #[test]
    fn difference_of_squares() {
        let p = x().sub(&y()).unwrap().mul(&x().add(&y()).unwrap()).unwrap();
        // schoolbook: x·x + x·y − y·x − y·y
        let oracle = Polynomial::from_terms(
            2,
            [
                (Monomial(vec![2, 0]), 1.0),
                (Monomial(vec![1, 1]), 1.0),
                (Monomial(vec![1, 1]), -1.0),
                (Monomial(vec![0, 2]), -1.0),
            ],
        );
        assert_eq!(p, oracle);
        assert_eq!(p.len(), 2);
        assert_eq!(p.norm_sq(), 2.0);
    }

    #[test]
    fn additive_inverse_is_zero() {
        let p = Polynomial::parse("3*x^2*y - 1.5*y + 2", &["x", "y"]).unwrap();
        assert!(p.add(&p.scale(-1.0)).unwrap().is_zero());
    }

    #[test]
    fn arity_mismatch() {
        assert!(x().add(&Polynomial::var(3, 0)).is_err());
    }

    #[test]
    fn basis_enumeration() {
        let b = monomials_up_to(2, 1);
        assert_eq!(b, vec![Monomial(vec![0, 0]), Monomial(vec![1, 0]), Monomial(vec![0, 1])]);
        assert_eq!(monomials_up_to(2, 2).len(), 6);
        assert_eq!(monomials_up_to(3, 0), vec![Monomial(vec![0, 0, 0])]);
        for n in 0..5 {
            for d in 0..5 {
                let m = monomials_up_to(n, d);
                assert_eq!(m.len() as u128, basis_count(n, d).unwrap());
                assert!(m.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        let vars = ["x", "y"];
        let p = Polynomial::parse("3*x^2*y - 1.5*y + 2", &vars).unwrap();
        assert_eq!(p.to_text(&vars), "3*x^2*y - 1.5*y + 2");
        assert_eq!(Polynomial::parse(&p.to_text(&vars), &vars).unwrap(), p);
        assert!(Polynomial::parse("3*z", &vars).is_err());
        assert!(Polynomial::parse("3 x", &vars).is_err());
        assert_eq!(Polynomial::parse("-x", &vars).unwrap(), x().scale(-1.0));
    }

    proptest! {
        #[test]
        fn product_evaluates_pointwise(
            a in proptest::collection::vec(-3.0f64..3.0, 6),
            b in proptest::collection::vec(-3.0f64..3.0, 6),
            at in proptest::collection::vec(-2.0f64..2.0, 2),
        ) {
            let basis = monomials_up_to(2, 2);
            let p = Polynomial::from_terms(2, basis.iter().cloned().zip(a));
            let q = Polynomial::from_terms(2, basis.iter().cloned().zip(b));
            let pq = p.mul(&q).unwrap();
            let lhs = pq.eval(&at);
            let rhs = p.eval(&at) * q.eval(&at);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
