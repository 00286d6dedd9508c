//! Polynomial vector fields (derivations) over a fixed coordinate list, with
//! exact and truncated Lie brackets and central-fiber restriction.

use crate::poly::{Coefficient, Cutoff, PolyError, Polynomial};
use crate::rational::Rational;
use crate::vars::{VarList, Variable};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FieldError {
    Poly(PolyError),
    /// Truncated bracket requested on a field whose deformation component has
    /// a term of valuation zero; the result would depend on discarded orders.
    IllDefinedBracket,
    /// Central-fiber restriction of a field whose deformation component has a
    /// nonzero constant term.
    NotTangent,
    /// Coefficient and field lists of different lengths.
    LengthMismatch,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::Poly(e) => write!(f, "{}", e),
            FieldError::IllDefinedBracket => write!(
                f,
                "truncated bracket is ill-defined: a deformation component has valuation 0"
            ),
            FieldError::NotTangent => write!(
                f,
                "field is not tangent to the central fiber: constant deformation component"
            ),
            FieldError::LengthMismatch => write!(f, "coefficient and field lists differ in length"),
        }
    }
}

impl std::error::Error for FieldError {}

impl From<PolyError> for FieldError {
    fn from(e: PolyError) -> Self {
        FieldError::Poly(e)
    }
}

/// A derivation: one polynomial coefficient per coordinate direction. Zero
/// components are not stored.
#[derive(Clone, PartialEq, Eq)]
pub struct VectorField<C: Coefficient> {
    vars: VarList,
    components: BTreeMap<Variable, Polynomial<C>>,
}

impl<C: Coefficient> VectorField<C> {
    pub fn zero(vars: &VarList) -> Self {
        VectorField {
            vars: vars.clone(),
            components: BTreeMap::new(),
        }
    }

    pub fn new<I>(vars: &VarList, components: I) -> Result<Self, FieldError>
    where
        I: IntoIterator<Item = (Variable, Polynomial<C>)>,
    {
        let mut map = BTreeMap::new();
        for (x, p) in components {
            if p.var_list() != vars {
                return Err(FieldError::Poly(PolyError::DomainMismatch));
            }
            if !p.is_zero() {
                match map.remove(&x) {
                    Some(prev) => {
                        let prev: Polynomial<C> = prev;
                        let sum = prev.add(&p)?;
                        if !sum.is_zero() {
                            map.insert(x, sum);
                        }
                    }
                    None => {
                        map.insert(x, p);
                    }
                }
            }
        }
        Ok(VectorField {
            vars: vars.clone(),
            components: map,
        })
    }

    pub fn var_list(&self) -> &VarList {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, x: Variable) -> Option<&Polynomial<C>> {
        self.components.get(&x)
    }

    pub fn component_or_zero(&self, x: Variable) -> Polynomial<C> {
        self.components
            .get(&x)
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(&self.vars))
    }

    /// Components in coordinate order.
    pub fn components(&self) -> impl Iterator<Item = (Variable, &Polynomial<C>)> {
        self.components.iter().map(|(x, p)| (*x, p))
    }

    /// Applies the derivation: `sum_x X^x * d f / d x`, with the optional
    /// cutoff threaded through every product.
    pub fn apply(
        &self,
        f: &Polynomial<C>,
        cutoff: Option<Cutoff>,
    ) -> Result<Polynomial<C>, FieldError> {
        if f.var_list() != &self.vars {
            return Err(FieldError::Poly(PolyError::DomainMismatch));
        }
        let mut acc = Polynomial::zero(&self.vars);
        for (x, comp) in &self.components {
            let df = f.partial_derivative(*x);
            if df.is_zero() {
                continue;
            }
            acc = acc.add(&comp.mul(&df, cutoff)?)?;
        }
        Ok(acc)
    }

    /// Commutator `[X, Y]^j = X(Y^j) - Y(X^j)`, truncated when a cutoff is
    /// given. With a cutoff, both deformation components must have valuation
    /// at least one, otherwise the truncated bracket is not well defined.
    pub fn lie_bracket(&self, other: &Self, cutoff: Option<Cutoff>) -> Result<Self, FieldError> {
        if self.vars != other.vars {
            return Err(FieldError::Poly(PolyError::DomainMismatch));
        }
        if let Some(cut) = cutoff {
            for field in [self, other] {
                if let Some(t_comp) = field.component(cut.var) {
                    if !t_comp.valuation(cut.var).at_least(1) {
                        return Err(FieldError::IllDefinedBracket);
                    }
                }
            }
        }
        let dirs: BTreeSet<Variable> = self
            .components
            .keys()
            .chain(other.components.keys())
            .copied()
            .collect();
        let mut components = BTreeMap::new();
        for j in dirs {
            let mut comp = self.apply(&other.component_or_zero(j), cutoff)?;
            comp = comp.sub(&other.apply(&self.component_or_zero(j), cutoff)?)?;
            if !comp.is_zero() {
                components.insert(j, comp);
            }
        }
        Ok(VectorField {
            vars: self.vars.clone(),
            components,
        })
    }

    /// Substitutes `t = 0` in every component and drops the `d/dt` component.
    /// Errors when the `t`-component has a nonzero constant term.
    pub fn restrict_central(&self, t: Variable) -> Result<Self, FieldError> {
        if let Some(t_comp) = self.component(t) {
            if !t_comp.valuation(t).at_least(1) {
                return Err(FieldError::NotTangent);
            }
        }
        let zero = Polynomial::zero(&self.vars);
        let mut components = BTreeMap::new();
        for (x, p) in &self.components {
            if *x == t {
                continue;
            }
            let restricted = p.substitute(t, &zero)?;
            if !restricted.is_zero() {
                components.insert(*x, restricted);
            }
        }
        Ok(VectorField {
            vars: self.vars.clone(),
            components,
        })
    }

    /// Componentwise `sum_i coeffs[i] * fields[i]`.
    pub fn linear_combination(
        vars: &VarList,
        coeffs: &[Rational],
        fields: &[Self],
    ) -> Result<Self, FieldError> {
        if coeffs.len() != fields.len() {
            return Err(FieldError::LengthMismatch);
        }
        let mut acc = VectorField::zero(vars);
        for (c, f) in coeffs.iter().zip(fields) {
            if f.var_list() != vars {
                return Err(FieldError::Poly(PolyError::DomainMismatch));
            }
            acc = acc.add(&f.scale(c))?;
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self, FieldError> {
        if self.vars != other.vars {
            return Err(FieldError::Poly(PolyError::DomainMismatch));
        }
        let mut out = self.components.clone();
        for (x, p) in &other.components {
            match out.remove(x) {
                Some(prev) => {
                    let sum = prev.add(p)?;
                    if !sum.is_zero() {
                        out.insert(*x, sum);
                    }
                }
                None => {
                    out.insert(*x, p.clone());
                }
            }
        }
        Ok(VectorField {
            vars: self.vars.clone(),
            components: out,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_components(|p| p.neg())
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return VectorField::zero(&self.vars);
        }
        self.map_components(|p| p.scale(k))
    }

    pub fn truncate(&self, x: Variable, n: u32) -> Self {
        self.map_components(|p| p.truncate(x, n))
    }

    pub fn map_components<D, F>(&self, mut f: F) -> VectorField<D>
    where
        D: Coefficient,
        F: FnMut(&Polynomial<C>) -> Polynomial<D>,
    {
        VectorField {
            vars: self.vars.clone(),
            components: self
                .components
                .iter()
                .filter_map(|(x, p)| {
                    let q = f(p);
                    if q.is_zero() {
                        None
                    } else {
                        Some((*x, q))
                    }
                })
                .collect(),
        }
    }

    pub fn try_map_components<D, E, F>(&self, mut f: F) -> Result<VectorField<D>, E>
    where
        D: Coefficient,
        F: FnMut(&Polynomial<C>) -> Result<Polynomial<D>, E>,
    {
        let mut components = BTreeMap::new();
        for (x, p) in &self.components {
            let q = f(p)?;
            if !q.is_zero() {
                components.insert(*x, q);
            }
        }
        Ok(VectorField {
            vars: self.vars.clone(),
            components,
        })
    }
}

/// Canonical text: `(poly) d/x` per component in coordinate order, zero
/// components omitted; the zero field prints as `0`.
impl<C: Coefficient> fmt::Display for VectorField<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        for (i, (x, p)) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}) d/{}", p, self.vars.name(*x))?;
        }
        Ok(())
    }
}

impl<C: Coefficient> fmt::Debug for VectorField<C> {
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

    fn field(vars: &VarList, spec: &[(&str, &str)]) -> VectorField<Rational> {
        VectorField::new(
            vars,
            spec.iter().map(|(x, p)| {
                (
                    vars.var(x).unwrap(),
                    crate::dsl::parse_polynomial(p, vars).unwrap(),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let vs = vars();
        let p = crate::dsl::parse_polynomial("-v^2*y^2", &vs).unwrap();
        let x = field(&vs, &[("v", "v")]);
        assert_eq!(
            x.apply(&p, None).unwrap(),
            crate::dsl::parse_polynomial("-2*v^2*y^2", &vs).unwrap()
        );
        let dv = field(&vs, &[("v", "1")]);
        let c = crate::dsl::parse_polynomial("7", &vs).unwrap();
        assert!(dv.apply(&c, None).unwrap().is_zero());
        let e5 = field(&vs, &[("y", "2*y"), ("v", "-v")]);
        let y = crate::dsl::parse_polynomial("y", &vs).unwrap();
        assert_eq!(
            e5.apply(&y, None).unwrap(),
            crate::dsl::parse_polynomial("2*y", &vs).unwrap()
        );
    }

    #[test]
    fn bracket_reproduces_table_entries() {
        let vs = vars();
        let e1 = field(&vs, &[("y", "-v^2*y^2")]);
        let e3 = field(&vs, &[("v", "1")]);
        let e4 = field(&vs, &[("y", "-v*y^2")]);
        let e5 = field(&vs, &[("y", "2*y"), ("v", "-v")]);
        let e6 = field(&vs, &[("v", "v")]);
        let e7 = field(&vs, &[("y", "2*y*v"), ("v", "-v^2")]);

        assert_eq!(
            e1.lie_bracket(&e3, None).unwrap(),
            e4.scale(&Rational::from_int(-2))
        );
        assert!(e5.lie_bracket(&e6, None).unwrap().is_zero());
        let diff = e5.sub(&e6).unwrap();
        assert_eq!(e3.lie_bracket(&e7, None).unwrap(), diff);
        assert!(e7.lie_bracket(&e7, None).unwrap().is_zero());
    }

    #[test]
    fn restriction() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let lifted = field(&vs, &[("y", "2*y"), ("v", "-v"), ("t", "t")]);
        let e5 = field(&vs, &[("y", "2*y"), ("v", "-v")]);
        assert_eq!(lifted.restrict_central(t).unwrap(), e5);

        let first_order = field(&vs, &[("y", "-v^2*y^2 + t*v*y"), ("v", "1/2*t*v^2")]);
        let e1 = field(&vs, &[("y", "-v^2*y^2")]);
        assert_eq!(first_order.restrict_central(t).unwrap(), e1);

        let bad = field(&vs, &[("t", "1")]);
        assert_eq!(bad.restrict_central(t), Err(FieldError::NotTangent));
    }

    #[test]
    fn linear_combinations() {
        let vs = vars();
        let e5 = field(&vs, &[("y", "2*y"), ("v", "-v")]);
        let e6 = field(&vs, &[("v", "v")]);
        let combo = VectorField::linear_combination(
            &vs,
            &[Rational::one(), Rational::from_int(-1)],
            &[e5.clone(), e6.clone()],
        )
        .unwrap();
        assert_eq!(combo, field(&vs, &[("y", "2*y"), ("v", "-2*v")]));

        let zero = VectorField::linear_combination(&vs, &[Rational::zero()], &[e5]).unwrap();
        assert!(zero.is_zero());

        let e4 = field(&vs, &[("y", "-v*y^2")]);
        let neg2 = VectorField::linear_combination(&vs, &[Rational::from_int(-2)], &[e4]).unwrap();
        assert_eq!(neg2, field(&vs, &[("y", "2*v*y^2")]));

        assert_eq!(
            VectorField::<Rational>::linear_combination(&vs, &[Rational::one()], &[]),
            Err(FieldError::LengthMismatch)
        );
    }

    #[test]
    fn truncated_bracket_requires_tangency() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let ok = field(&vs, &[("v", "1"), ("t", "t")]);
        let bad = field(&vs, &[("v", "1"), ("t", "1")]);
        let cut = Some(Cutoff::new(t, 1));
        assert!(ok.lie_bracket(&ok, cut).unwrap().is_zero());
        assert_eq!(
            ok.lie_bracket(&bad, cut),
            Err(FieldError::IllDefinedBracket)
        );
        // exact bracket of the same pair is fine
        assert!(ok.lie_bracket(&bad, None).is_ok());
    }

    #[test]
    fn display() {
        let vs = vars();
        let e1 = field(&vs, &[("y", "-v^2*y^2 + t*v*y"), ("v", "1/2*t*v^2")]);
        assert_eq!(e1.to_string(), "(1/2*t*v^2) d/v + (-v^2*y^2 + t*v*y) d/y");
        assert_eq!(VectorField::<Rational>::zero(&vs).to_string(), "0");
    }
}
