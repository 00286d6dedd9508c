//! Sparse multivariate polynomials over an exact coefficient domain, with
//! truncation in a distinguished deformation variable.
//!
//! The coefficient domain is either [`Rational`] or an affine form in named
//! unknowns (see [`crate::linsolve::AffineForm`]); the two are never mixed.
//! Multiplication accepts an optional cutoff `(x, n)` meaning "work modulo
//! x^{n+1}": result monomials with `deg_x >= n + 1` are omitted, and a term
//! whose coefficient product would be nonlinear (two non-constant affine
//! forms) is dropped before the coefficient multiplication as soon as its
//! `deg_x` reaches `n`. Nonlinear products below that degree are an error.

use crate::rational::Rational;
use crate::vars::{VarList, Variable};
use std::collections::BTreeMap;
use std::fmt;

/// Errors from polynomial arithmetic.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolyError {
    /// Operands are defined over different variable lists.
    DomainMismatch,
    /// A surviving term would require multiplying two non-constant affine
    /// forms.
    NonlinearTerm,
}

impl fmt::Display for PolyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyError::DomainMismatch => write!(f, "operands use different variable lists"),
            PolyError::NonlinearTerm => {
                write!(f, "product of two non-constant affine coefficients")
            }
        }
    }
}

impl std::error::Error for PolyError {}

/// Exponent map; zero exponents are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    exps: Vec<(Variable, u32)>, // ascending by variable, exponents > 0
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial { exps: Vec::new() }
    }

    pub fn var(x: Variable) -> Monomial {
        Monomial { exps: vec![(x, 1)] }
    }

    pub fn power(x: Variable, e: u32) -> Monomial {
        if e == 0 {
            Monomial::one()
        } else {
            Monomial { exps: vec![(x, e)] }
        }
    }

    pub fn from_exps<I: IntoIterator<Item = (Variable, u32)>>(exps: I) -> Monomial {
        let mut map: BTreeMap<Variable, u32> = BTreeMap::new();
        for (x, e) in exps {
            if e > 0 {
                *map.entry(x).or_insert(0) += e;
            }
        }
        Monomial {
            exps: map.into_iter().collect(),
        }
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, x: Variable) -> u32 {
        self.exps
            .iter()
            .find(|(v, _)| *v == x)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().map(|(_, e)| e).sum()
    }

    pub fn exps(&self) -> impl Iterator<Item = (Variable, u32)> + '_ {
        self.exps.iter().copied()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_exps(self.exps().chain(other.exps()))
    }

    /// The monomial with `x` removed entirely.
    pub fn without(&self, x: Variable) -> Monomial {
        Monomial {
            exps: self.exps.iter().copied().filter(|(v, _)| *v != x).collect(),
        }
    }

    /// `x^e * t^k * ...` rendered with `*` and `^`, variables in declaration
    /// order. The empty monomial renders as `1`.
    pub fn display_with(&self, vars: &VarList) -> String {
        if self.exps.is_empty() {
            return "1".to_string();
        }
        self.exps
            .iter()
            .map(|(v, e)| {
                if *e == 1 {
                    vars.name(*v).to_string()
                } else {
                    format!("{}^{}", vars.name(*v), e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Graded lexicographic order: higher total degree first; ties broken by the
/// earliest declared variable with the higher exponent.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let mut a = self.exps.iter().peekable();
        let mut b = other.exps.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((va, ea)), Some((vb, eb))) => {
                    if va == vb {
                        match ea.cmp(eb) {
                            Ordering::Equal => {
                                a.next();
                                b.next();
                            }
                            ord => return ord,
                        }
                    } else if va < vb {
                        // `a` has a positive exponent on an earlier variable.
                        return Ordering::Greater;
                    } else {
                        return Ordering::Less;
                    }
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Order of vanishing in one variable; the zero polynomial has infinite
/// valuation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl Valuation {
    pub fn at_least(self, n: u32) -> bool {
        match self {
            Valuation::Finite(v) => v >= n,
            Valuation::Infinite => true,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{}", v),
            Valuation::Infinite => write!(f, "infinity"),
        }
    }
}

/// Abstract coefficient domain. Exactly two instantiations exist: [`Rational`]
/// and [`crate::linsolve::AffineForm`].
pub trait Coefficient: Clone + PartialEq + fmt::Debug + fmt::Display {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    /// True when the value carries no unknowns.
    fn is_constant(&self) -> bool;
    /// The rational value, when the coefficient carries no unknowns.
    fn as_rational_constant(&self) -> Option<Rational>;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }
    /// `None` means the product would be nonlinear in the unknowns.
    fn try_mul(&self, other: &Self) -> Option<Self>;
    fn scale(&self, k: &Rational) -> Self;
    fn from_rational(r: Rational) -> Self;
}

impl Coefficient for Rational {
    fn zero() -> Self {
        Rational::zero()
    }
    fn one() -> Self {
        Rational::one()
    }
    fn is_zero(&self) -> bool {
        Rational::is_zero(self)
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn as_rational_constant(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn try_mul(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
    fn scale(&self, k: &Rational) -> Self {
        self * k
    }
    fn from_rational(r: Rational) -> Self {
        r
    }
}

/// Truncation instruction: work modulo `var^{order+1}`, i.e. keep
/// `deg_var <= order`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Cutoff {
    pub var: Variable,
    pub order: u32,
}

impl Cutoff {
    pub fn new(var: Variable, order: u32) -> Cutoff {
        Cutoff { var, order }
    }
}

/// Sparse polynomial: a map from monomials to nonzero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial<C: Coefficient> {
    vars: VarList,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> Polynomial<C> {
    pub fn zero(vars: &VarList) -> Self {
        Polynomial {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &VarList, c: C) -> Self {
        Polynomial::from_terms(vars, [(Monomial::one(), c)])
    }

    pub fn variable(vars: &VarList, x: Variable) -> Self {
        Polynomial::from_terms(vars, [(Monomial::var(x), C::one())])
    }

    /// Builds a polynomial, combining repeated monomials and dropping zeros.
    pub fn from_terms<I>(vars: &VarList, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, C)>,
    {
        let mut map: BTreeMap<Monomial, C> = BTreeMap::new();
        for (m, c) in terms {
            debug_assert!(m.exps().all(|(v, _)| v.index() < vars.len()));
            match map.remove(&m) {
                Some(prev) => {
                    let sum = prev.add(&c);
                    if !sum.is_zero() {
                        map.insert(m, sum);
                    }
                }
                None => {
                    if !c.is_zero() {
                        map.insert(m, c);
                    }
                }
            }
        }
        Polynomial {
            vars: vars.clone(),
            terms: map,
        }
    }

    pub fn var_list(&self) -> &VarList {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn degree_in(&self, x: Variable) -> u32 {
        self.terms.keys().map(|m| m.exponent(x)).max().unwrap_or(0)
    }

    fn check_domain(&self, other: &Self) -> Result<(), PolyError> {
        if self.vars == other.vars {
            Ok(())
        } else {
            Err(PolyError::DomainMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_domain(other)?;
        let mut out = self.terms.clone();
        for (m, c) in &other.terms {
            match out.remove(m) {
                Some(prev) => {
                    let sum = prev.add(c);
                    if !sum.is_zero() {
                        out.insert(m.clone(), sum);
                    }
                }
                None => {
                    out.insert(m.clone(), c.clone());
                }
            }
        }
        Ok(Polynomial {
            vars: self.vars.clone(),
            terms: out,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Polynomial::zero(&self.vars);
        }
        Polynomial {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.scale(k)))
                .collect(),
        }
    }

    /// Distributive product, truncated at the cutoff when one is given.
    pub fn mul(&self, other: &Self, cutoff: Option<Cutoff>) -> Result<Self, PolyError> {
        self.check_domain(other)?;
        let mut out: BTreeMap<Monomial, C> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                if let Some(cut) = cutoff {
                    if m.exponent(cut.var) > cut.order {
                        continue;
                    }
                }
                let c = match c1.try_mul(c2) {
                    Some(c) => c,
                    None => match cutoff {
                        // Nonlinear term at the cutoff order: short-circuit
                        // before the coefficient multiplication.
                        Some(cut) if m.exponent(cut.var) >= cut.order => continue,
                        _ => return Err(PolyError::NonlinearTerm),
                    },
                };
                if c.is_zero() {
                    continue;
                }
                match out.remove(&m) {
                    Some(prev) => {
                        let sum = prev.add(&c);
                        if !sum.is_zero() {
                            out.insert(m, sum);
                        }
                    }
                    None => {
                        out.insert(m, c);
                    }
                }
            }
        }
        Ok(Polynomial {
            vars: self.vars.clone(),
            terms: out,
        })
    }

    /// Formal partial derivative; exact.
    pub fn partial_derivative(&self, x: Variable) -> Self {
        let terms = self.terms.iter().filter_map(|(m, c)| {
            let e = m.exponent(x);
            if e == 0 {
                return None;
            }
            let mut rest = m.without(x);
            if e > 1 {
                rest = rest.mul(&Monomial::power(x, e - 1));
            }
            Some((rest, c.scale(&Rational::from_int(e as i64))))
        });
        Polynomial::from_terms(&self.vars, terms)
    }

    /// Reduces modulo `x^{n+1}`: removes every monomial with `deg_x >= n + 1`.
    pub fn truncate(&self, x: Variable, n: u32) -> Self {
        Polynomial {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.exponent(x) <= n)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Minimal `deg_x` over the terms; infinite for the zero polynomial.
    pub fn valuation(&self, x: Variable) -> Valuation {
        self.terms
            .keys()
            .map(|m| m.exponent(x))
            .min()
            .map_or(Valuation::Infinite, Valuation::Finite)
    }

    /// Exact substitution `x := value`.
    pub fn substitute(&self, x: Variable, value: &Self) -> Result<Self, PolyError> {
        self.check_domain(value)?;
        // Powers of `value` computed once per needed exponent.
        let max_e = self.degree_in(x);
        let mut powers: Vec<Polynomial<C>> = Vec::with_capacity(max_e as usize + 1);
        powers.push(Polynomial::constant(&self.vars, C::one()));
        for _ in 0..max_e {
            let next = powers.last().unwrap().mul(value, None)?;
            powers.push(next);
        }
        let mut acc = Polynomial::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.exponent(x);
            let rest = Polynomial::from_terms(&self.vars, [(m.without(x), c.clone())]);
            acc = acc.add(&powers[e as usize].mul(&rest, None)?)?;
        }
        Ok(acc)
    }

    /// Rebuilds the polynomial with mapped coefficients, dropping zeros.
    pub fn try_map_coefficients<D, E, F>(&self, mut f: F) -> Result<Polynomial<D>, E>
    where
        D: Coefficient,
        F: FnMut(&C) -> Result<D, E>,
    {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            terms.push((m.clone(), f(c)?));
        }
        Ok(Polynomial::from_terms(&self.vars, terms))
    }
}

impl Polynomial<Rational> {
    /// Rational constant helper.
    pub fn rational_constant(vars: &VarList, r: Rational) -> Self {
        Polynomial::constant(vars, r)
    }
}

/// Canonical text: terms in descending graded-lex order, exact fractional
/// coefficients, `^` for powers, e.g. `-1/2*t^2*v + 1/2*t^2`. Coefficients
/// carrying unknowns are parenthesised: `(1/2*B_1_2)*t^2`.
impl<C: Coefficient> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            match c.as_rational_constant() {
                Some(r) => {
                    let neg = r.is_negative();
                    if i == 0 {
                        if neg {
                            write!(f, "-")?;
                        }
                    } else if neg {
                        write!(f, " - ")?;
                    } else {
                        write!(f, " + ")?;
                    }
                    let a = r.abs();
                    if m.is_one() {
                        write!(f, "{}", a)?;
                    } else if a.is_one() {
                        write!(f, "{}", m.display_with(&self.vars))?;
                    } else {
                        write!(f, "{}*{}", a, m.display_with(&self.vars))?;
                    }
                }
                None => {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if m.is_one() {
                        write!(f, "({})", c)?;
                    } else {
                        write!(f, "({})*{}", c, m.display_with(&self.vars))?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl<C: Coefficient> fmt::Debug for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars() -> VarList {
        VarList::new(["t", "v", "y"])
    }

    fn parse(vars: &VarList, s: &str) -> Polynomial<Rational> {
        crate::dsl::parse_polynomial(s, vars).unwrap()
    }

    #[test]
    fn grlex_order() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let v = vs.var("v").unwrap();
        let y = vs.var("y").unwrap();
        let t2v = Monomial::from_exps([(t, 2), (v, 1)]);
        let t2 = Monomial::power(t, 2);
        let vy2 = Monomial::from_exps([(v, 1), (y, 2)]);
        // degree first
        assert!(t2v > t2);
        // same degree: earlier variable with higher exponent wins
        assert!(t2v > vy2);
        assert!(Monomial::power(t, 3) > t2v);
        assert_eq!(t2v.cmp(&t2v.clone()), std::cmp::Ordering::Equal);
    }

    #[test]
    fn add_cancels() {
        let vs = vars();
        let p = parse(&vs, "-v^2*y^2");
        let q = parse(&vs, "v^2*y^2");
        assert!(p.add(&q).unwrap().is_zero());
        let r = parse(&vs, "2*y").add(&parse(&vs, "-v")).unwrap();
        assert_eq!(r.to_string(), "-v + 2*y");
    }

    #[test]
    fn add_matches_first_order_component_shape() {
        let vs = vars();
        let p = parse(&vs, "-y^2").add(&parse(&vs, "1/2*t")).unwrap();
        assert_eq!(p.to_string(), "-y^2 + 1/2*t");
    }

    #[test]
    fn domain_mismatch() {
        let a = Polynomial::<Rational>::zero(&vars());
        let b = Polynomial::<Rational>::zero(&VarList::new(["x"]));
        assert_eq!(a.add(&b), Err(PolyError::DomainMismatch));
    }

    #[test]
    fn mul_plain_and_truncated() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let p = parse(&vs, "v + t").mul(&parse(&vs, "v - t"), None).unwrap();
        assert_eq!(p, parse(&vs, "v^2 - t^2"));

        let q = parse(&vs, "1/2*t*v^2")
            .mul(&parse(&vs, "t*v"), Some(Cutoff::new(t, 2)))
            .unwrap();
        assert_eq!(q.to_string(), "1/2*t^2*v^3");

        let dropped = parse(&vs, "1/2*t*v^2")
            .mul(&parse(&vs, "t^2*v"), Some(Cutoff::new(t, 2)))
            .unwrap();
        assert!(dropped.is_zero());
    }

    #[test]
    fn derivative() {
        let vs = vars();
        let v = vs.var("v").unwrap();
        let y = vs.var("y").unwrap();
        let t = vs.var("t").unwrap();
        assert_eq!(
            parse(&vs, "-v^2*y^2").partial_derivative(y),
            parse(&vs, "-2*v^2*y")
        );
        assert_eq!(parse(&vs, "2*y*v").partial_derivative(v), parse(&vs, "2*y"));
        // d/dt of (1/2 t v^2 + n t^2) with rational n stand-in
        assert_eq!(
            parse(&vs, "1/2*t*v^2 + 3*t^2").partial_derivative(t),
            parse(&vs, "1/2*v^2 + 6*t")
        );
    }

    #[test]
    fn truncate_and_valuation() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let p = parse(&vs, "-1/2*t^2*v + t^3*v^5");
        assert_eq!(p.truncate(t, 2), parse(&vs, "-1/2*t^2*v"));
        assert_eq!(
            parse(&vs, "1/2*t*v^2").truncate(t, 1),
            parse(&vs, "1/2*t*v^2")
        );
        assert_eq!(
            parse(&vs, "-v^2*y^2 + 5*t").truncate(t, 0),
            parse(&vs, "-v^2*y^2")
        );

        assert_eq!(parse(&vs, "3*t").valuation(t), Valuation::Finite(1));
        assert_eq!(
            Polynomial::<Rational>::zero(&vs).valuation(t),
            Valuation::Infinite
        );
        assert_eq!(
            parse(&vs, "-v^2*y^2 + 7*t").valuation(t),
            Valuation::Finite(0)
        );
    }

    #[test]
    fn substitution() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let v = vs.var("v").unwrap();
        let zero = Polynomial::zero(&vs);
        assert_eq!(
            parse(&vs, "-y^2 + 4*t").substitute(t, &zero).unwrap(),
            parse(&vs, "-y^2")
        );
        assert!(parse(&vs, "v^2 - t^2")
            .substitute(t, &Polynomial::variable(&vs, v))
            .unwrap()
            .is_zero());
        assert_eq!(
            parse(&vs, "2*v^2 + 3*v + 5").substitute(v, &zero).unwrap(),
            parse(&vs, "5")
        );
    }

    #[test]
    fn canonical_text_matches_spec_shape() {
        let vs = vars();
        let p = parse(&vs, "1/2*t^2 - 1/2*t^2*v");
        assert_eq!(p.to_string(), "-1/2*t^2*v + 1/2*t^2");
    }
}
