//! Affine forms in named unknowns, constraint systems collected from
//! parametric polynomials, and exact rational solving.
//!
//! Solving is reduced row echelon form over the rationals with a fixed pivot
//! rule (unknowns in global order, constraints in listed order), so identical
//! systems always produce structurally identical results. Inconsistency is a
//! value, not an error: it carries a list of rational multipliers whose
//! combination of the original constraint forms equals a nonzero constant —
//! an exact, independently checkable proof of `0 = c`.

use crate::poly::{Coefficient, Monomial, Polynomial};
use crate::rational::Rational;
use crate::vars::Variable;
use crate::vfield::VectorField;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// A named unknown. The global order is (introduction order, name), which is
/// stable across parse/print round trips.
#[derive(Clone, Debug)]
pub struct Unknown {
    order: u32,
    name: Arc<str>,
}

impl Unknown {
    pub fn new(name: &str, order: u32) -> Unknown {
        Unknown {
            order,
            name: Arc::from(name),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The extension order that introduced this unknown.
    pub fn order_tag(&self) -> u32 {
        self.order
    }
}

impl PartialEq for Unknown {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.name == other.name
    }
}

impl Eq for Unknown {}

impl PartialOrd for Unknown {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Unknown {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order
            .cmp(&other.order)
            .then_with(|| self.name.cmp(&other.name))
    }
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Registry of unknowns with unique names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UnknownSet {
    by_name: BTreeMap<String, Unknown>,
}

impl UnknownSet {
    pub fn new() -> UnknownSet {
        UnknownSet::default()
    }

    /// Mints a fresh unknown; `None` if the name is taken.
    pub fn mint(&mut self, name: &str, order: u32) -> Option<Unknown> {
        if self.by_name.contains_key(name) {
            return None;
        }
        let u = Unknown::new(name, order);
        self.by_name.insert(name.to_string(), u.clone());
        Some(u)
    }

    pub fn get(&self, name: &str) -> Option<&Unknown> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Unknown> {
        self.by_name.values()
    }

    pub fn of_order(&self, order: u32) -> impl Iterator<Item = &Unknown> {
        self.iter().filter(move |u| u.order == order)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

/// `constant + sum(coefficient * unknown)` with exact rational coefficients.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AffineForm {
    constant: Rational,
    linear: BTreeMap<Unknown, Rational>,
}

impl AffineForm {
    pub fn constant(c: Rational) -> AffineForm {
        AffineForm {
            constant: c,
            linear: BTreeMap::new(),
        }
    }

    pub fn unknown(u: Unknown) -> AffineForm {
        AffineForm::term(u, Rational::one())
    }

    pub fn term(u: Unknown, coeff: Rational) -> AffineForm {
        let mut linear = BTreeMap::new();
        if !coeff.is_zero() {
            linear.insert(u, coeff);
        }
        AffineForm {
            constant: Rational::zero(),
            linear,
        }
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub fn linear_terms(&self) -> impl Iterator<Item = (&Unknown, &Rational)> {
        self.linear.iter()
    }

    pub fn coefficient_of(&self, u: &Unknown) -> Rational {
        self.linear.get(u).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn unknowns(&self) -> impl Iterator<Item = &Unknown> {
        self.linear.keys()
    }

    /// The constant value when the form has no unknowns.
    pub fn as_constant(&self) -> Option<&Rational> {
        if self.linear.is_empty() {
            Some(&self.constant)
        } else {
            None
        }
    }

    /// Replaces `u` by an affine expression; the result stays affine.
    pub fn substitute(&self, u: &Unknown, value: &AffineForm) -> AffineForm {
        match self.linear.get(u) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut out = self.clone();
                out.linear.remove(u);
                out.add_assign(&value.scale(&c));
                out
            }
        }
    }

    fn add_assign(&mut self, other: &AffineForm) {
        self.constant = &self.constant + &other.constant;
        for (u, c) in &other.linear {
            match self.linear.remove(u) {
                Some(prev) => {
                    let sum = &prev + c;
                    if !sum.is_zero() {
                        self.linear.insert(u.clone(), sum);
                    }
                }
                None => {
                    self.linear.insert(u.clone(), c.clone());
                }
            }
        }
    }
}

impl Coefficient for AffineForm {
    fn zero() -> Self {
        AffineForm::constant(Rational::zero())
    }

    fn one() -> Self {
        AffineForm::constant(Rational::one())
    }

    fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.linear.is_empty()
    }

    fn is_constant(&self) -> bool {
        self.linear.is_empty()
    }

    fn as_rational_constant(&self) -> Option<Rational> {
        self.as_constant().cloned()
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    fn neg(&self) -> Self {
        AffineForm {
            constant: -&self.constant,
            linear: self.linear.iter().map(|(u, c)| (u.clone(), -c)).collect(),
        }
    }

    fn try_mul(&self, other: &Self) -> Option<Self> {
        if let Some(c) = self.as_constant() {
            Some(other.scale(c))
        } else {
            other.as_constant().map(|c| self.scale(c))
        }
    }

    fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return AffineForm::zero();
        }
        AffineForm {
            constant: &self.constant * k,
            linear: self
                .linear
                .iter()
                .map(|(u, c)| (u.clone(), c * k))
                .collect(),
        }
    }

    fn from_rational(r: Rational) -> Self {
        AffineForm::constant(r)
    }
}

/// Canonical text: constant first when nonzero, then unknowns in global
/// order, e.g. `2 - 2*A_1`.
impl fmt::Display for AffineForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        if !self.constant.is_zero() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (u, c) in &self.linear {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            if a.is_one() {
                write!(f, "{}", u)?;
            } else {
                write!(f, "{}*{}", a, u)?;
            }
        }
        Ok(())
    }
}

/// Where a constraint came from.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Provenance {
    /// Coefficient of `monomial` in the named component of the bracket defect
    /// of relation `(i, j)` (0-based field indices).
    Bracket {
        relation: (usize, usize),
        component: Variable,
        monomial: Monomial,
    },
    /// Side constraint supplied by the problem, activated at `order`.
    Side { order: u32, index: usize },
    /// Directly supplied constraint (hand-built systems).
    Given { index: usize },
}

impl Provenance {
    fn rank(&self) -> u8 {
        match self {
            Provenance::Bracket { .. } => 0,
            Provenance::Side { .. } => 1,
            Provenance::Given { .. } => 2,
        }
    }
}

impl PartialOrd for Provenance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Bracket constraints sort by relation pair, then component, then monomial
/// in descending graded-lex order (the canonical print order).
impl Ord for Provenance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (
                Provenance::Bracket {
                    relation: r1,
                    component: c1,
                    monomial: m1,
                },
                Provenance::Bracket {
                    relation: r2,
                    component: c2,
                    monomial: m2,
                },
            ) => r1.cmp(r2).then_with(|| c1.cmp(c2)).then_with(|| m2.cmp(m1)),
            (
                Provenance::Side {
                    order: o1,
                    index: i1,
                },
                Provenance::Side {
                    order: o2,
                    index: i2,
                },
            ) => o1.cmp(o2).then_with(|| i1.cmp(i2)),
            (Provenance::Given { index: i1 }, Provenance::Given { index: i2 }) => i1.cmp(i2),
            _ => self.rank().cmp(&other.rank()).then(Ordering::Equal),
        }
    }
}

/// One constraint, read "form = 0".
#[derive(Clone, Debug)]
pub struct Constraint {
    pub form: AffineForm,
    pub provenance: Provenance,
}

/// An ordered list of affine constraints.
#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    constraints: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new() -> LinearSystem {
        LinearSystem::default()
    }

    pub fn push(&mut self, form: AffineForm, provenance: Provenance) {
        self.constraints.push(Constraint { form, provenance });
    }

    pub fn extend_from(&mut self, other: LinearSystem) {
        self.constraints.extend(other.constraints);
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Stable sort by provenance; makes collection order irrelevant.
    pub fn sort_by_provenance(&mut self) {
        self.constraints
            .sort_by(|a, b| a.provenance.cmp(&b.provenance));
    }

    /// One constraint per monomial of `p`: its coefficient must vanish.
    /// Constraints are listed in descending graded-lex monomial order.
    pub fn collect<F>(p: &Polynomial<AffineForm>, mut provenance: F) -> LinearSystem
    where
        F: FnMut(&Monomial) -> Provenance,
    {
        let mut sys = LinearSystem::new();
        for (m, c) in p.terms().collect::<Vec<_>>().into_iter().rev() {
            sys.push(c.clone(), provenance(m));
        }
        sys
    }

    /// All unknowns referenced by the system, in global order.
    pub fn unknowns(&self) -> Vec<Unknown> {
        let mut set: BTreeSet<Unknown> = BTreeSet::new();
        for c in &self.constraints {
            set.extend(c.form.unknowns().cloned());
        }
        set.into_iter().collect()
    }
}

/// Result of an exact solve.
#[derive(Clone, PartialEq, Debug)]
pub enum SolutionSet {
    Solved {
        /// Pivot unknowns expressed over the free ones.
        assignments: BTreeMap<Unknown, AffineForm>,
        free: Vec<Unknown>,
    },
    Inconsistent {
        /// `(constraint index, multiplier)` pairs whose combination of the
        /// constraint forms equals `residual_constant`.
        certificate: Vec<(usize, Rational)>,
        residual_constant: Rational,
    },
}

impl SolutionSet {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolutionSet::Solved { .. })
    }

    /// The constant value assigned to `u`, if `u` is pinned.
    ///
    /// Panics when called on an inconsistent solution set: there is nothing
    /// to read off.
    pub fn pinned_value(&self, u: &Unknown) -> Option<Rational> {
        match self {
            SolutionSet::Solved { assignments, .. } => assignments
                .get(u)
                .and_then(|form| form.as_constant().cloned()),
            SolutionSet::Inconsistent { .. } => {
                panic!("pinned_value called on an inconsistent solution set")
            }
        }
    }

    /// Substitutes the assignments into `form`; under `ZeroFill` the
    /// remaining free unknowns become zero.
    pub fn apply_to_form(&self, form: &AffineForm, policy: FreePolicy) -> AffineForm {
        let assignments = match self {
            SolutionSet::Solved { assignments, .. } => assignments,
            SolutionSet::Inconsistent { .. } => {
                panic!("apply_to_form called on an inconsistent solution set")
            }
        };
        apply_assignments(form, assignments, policy)
    }

    pub fn apply_to_poly(
        &self,
        p: &Polynomial<AffineForm>,
        policy: FreePolicy,
    ) -> Polynomial<AffineForm> {
        p.try_map_coefficients(|c| Ok::<_, std::convert::Infallible>(self.apply_to_form(c, policy)))
            .unwrap()
    }

    pub fn apply_to_field(
        &self,
        f: &VectorField<AffineForm>,
        policy: FreePolicy,
    ) -> VectorField<AffineForm> {
        f.map_components(|p| self.apply_to_poly(p, policy))
    }
}

/// What to do with unknowns the constraints leave undetermined.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FreePolicy {
    /// Set free unknowns to zero when specialising.
    ZeroFill,
    /// Keep free unknowns symbolic; they thread into later systems.
    KeepSymbolic,
}

/// Substitutes an assignment map into a form. Unassigned unknowns are zeroed
/// under `ZeroFill` and kept under `KeepSymbolic`.
pub fn apply_assignments(
    form: &AffineForm,
    assignments: &BTreeMap<Unknown, AffineForm>,
    policy: FreePolicy,
) -> AffineForm {
    let mut out = AffineForm::constant(form.constant_part().clone());
    for (u, c) in form.linear_terms() {
        match assignments.get(u) {
            Some(value) => out = out.add(&value.scale(c)),
            None => match policy {
                FreePolicy::ZeroFill => {}
                FreePolicy::KeepSymbolic => out = out.add(&AffineForm::term(u.clone(), c.clone())),
            },
        }
    }
    out
}

pub fn apply_assignments_poly(
    p: &Polynomial<AffineForm>,
    assignments: &BTreeMap<Unknown, AffineForm>,
    policy: FreePolicy,
) -> Polynomial<AffineForm> {
    p.try_map_coefficients(|c| {
        Ok::<_, std::convert::Infallible>(apply_assignments(c, assignments, policy))
    })
    .unwrap()
}

pub fn apply_assignments_field(
    f: &VectorField<AffineForm>,
    assignments: &BTreeMap<Unknown, AffineForm>,
    policy: FreePolicy,
) -> VectorField<AffineForm> {
    f.map_components(|p| apply_assignments_poly(p, assignments, policy))
}

/// Embeds a rational polynomial into the affine coefficient domain.
pub fn embed_poly(p: &Polynomial<Rational>) -> Polynomial<AffineForm> {
    p.try_map_coefficients(|c| Ok::<_, std::convert::Infallible>(AffineForm::constant(c.clone())))
        .unwrap()
}

pub fn embed_field(f: &VectorField<Rational>) -> VectorField<AffineForm> {
    f.map_components(embed_poly)
}

/// Extracts a rational polynomial when every coefficient is constant.
pub fn demote_poly(p: &Polynomial<AffineForm>) -> Option<Polynomial<Rational>> {
    p.try_map_coefficients(|c| c.as_constant().cloned().ok_or(()))
        .ok()
}

pub fn demote_field(f: &VectorField<AffineForm>) -> Option<VectorField<Rational>> {
    f.try_map_components(|p| demote_poly(p).ok_or(())).ok()
}

/// Exact reduced row echelon form with multiplier tracking.
///
/// Deterministic: columns are the system's unknowns in global order, the
/// pivot for each column is the first unreduced row with a nonzero entry.
pub fn solve(sys: &LinearSystem) -> SolutionSet {
    let reduced = reduce(sys);
    match reduced.inconsistent_rows.first() {
        Some(row) => SolutionSet::Inconsistent {
            certificate: row.multipliers.clone(),
            residual_constant: row.constant.clone(),
        },
        None => SolutionSet::Solved {
            assignments: reduced.assignments,
            free: reduced.free,
        },
    }
}

/// Checks that a certificate's combination of the constraint forms is exactly
/// the claimed nonzero constant.
pub fn verify_certificate(
    sys: &LinearSystem,
    certificate: &[(usize, Rational)],
    residual_constant: &Rational,
) -> bool {
    if residual_constant.is_zero() {
        return false;
    }
    let mut acc = AffineForm::zero();
    for (idx, mult) in certificate {
        match sys.constraints.get(*idx) {
            Some(c) => acc = acc.add(&c.form.scale(mult)),
            None => return false,
        }
    }
    acc.as_constant() == Some(residual_constant)
}

pub(crate) struct InconsistentRow {
    pub multipliers: Vec<(usize, Rational)>,
    pub constant: Rational,
}

pub(crate) struct Reduced {
    pub assignments: BTreeMap<Unknown, AffineForm>,
    pub free: Vec<Unknown>,
    pub inconsistent_rows: Vec<InconsistentRow>,
}

struct Row {
    coeffs: Vec<Rational>,
    constant: Rational,
    /// This row as a combination of the original constraints.
    multipliers: Vec<Rational>,
}

impl Row {
    fn scale(&mut self, k: &Rational) {
        for c in self.coeffs.iter_mut().chain(Some(&mut self.constant)) {
            *c = &*c * k;
        }
        for m in &mut self.multipliers {
            *m = &*m * k;
        }
    }

    fn sub_scaled(&mut self, other: &Row, k: &Rational) {
        if k.is_zero() {
            return;
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = &*a - &(b * k);
        }
        self.constant = &self.constant - &(&other.constant * k);
        for (a, b) in self.multipliers.iter_mut().zip(&other.multipliers) {
            *a = &*a - &(b * k);
        }
    }
}

pub(crate) fn reduce(sys: &LinearSystem) -> Reduced {
    let unknowns = sys.unknowns();
    let ncols = unknowns.len();
    let nrows = sys.len();
    let col_of: BTreeMap<&Unknown, usize> =
        unknowns.iter().enumerate().map(|(i, u)| (u, i)).collect();

    let mut rows: Vec<Row> = sys
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut coeffs = vec![Rational::zero(); ncols];
            for (u, k) in c.form.linear_terms() {
                coeffs[col_of[u]] = k.clone();
            }
            let mut multipliers = vec![Rational::zero(); nrows];
            multipliers[i] = Rational::one();
            Row {
                coeffs,
                constant: c.form.constant_part().clone(),
                multipliers,
            }
        })
        .collect();

    let mut pivot_cols: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut next_row = 0usize;
    for col in 0..ncols {
        let Some(r) = (next_row..rows.len()).find(|&r| !rows[r].coeffs[col].is_zero()) else {
            continue;
        };
        rows.swap(next_row, r);
        let inv = rows[next_row].coeffs[col].recip();
        rows[next_row].scale(&inv);
        for r in 0..rows.len() {
            if r != next_row {
                let k = rows[r].coeffs[col].clone();
                let (target, pivot) = if r < next_row {
                    let (head, tail) = rows.split_at_mut(next_row);
                    (&mut head[r], &tail[0])
                } else {
                    let (head, tail) = rows.split_at_mut(r);
                    (&mut tail[0], &head[next_row])
                };
                target.sub_scaled(pivot, &k);
            }
        }
        pivot_cols.push((next_row, col));
        next_row += 1;
    }

    let mut inconsistent_rows = Vec::new();
    for row in &rows[next_row..] {
        if !row.constant.is_zero() {
            let multipliers: Vec<(usize, Rational)> = row
                .multipliers
                .iter()
                .enumerate()
                .filter(|(_, m)| !m.is_zero())
                .map(|(i, m)| (i, m.clone()))
                .collect();
            inconsistent_rows.push(InconsistentRow {
                multipliers,
                constant: row.constant.clone(),
            });
        }
    }

    let pivot_set: BTreeSet<usize> = pivot_cols.iter().map(|(_, c)| *c).collect();
    let free: Vec<Unknown> = (0..ncols)
        .filter(|c| !pivot_set.contains(c))
        .map(|c| unknowns[c].clone())
        .collect();

    let mut assignments = BTreeMap::new();
    for (r, c) in pivot_cols {
        let row = &rows[r];
        let mut form = AffineForm::constant(-&row.constant);
        for (fc, coeff) in row.coeffs.iter().enumerate() {
            if fc != c && !coeff.is_zero() {
                form = form.add(&AffineForm::term(unknowns[fc].clone(), -coeff));
            }
        }
        assignments.insert(unknowns[c].clone(), form);
    }

    Reduced {
        assignments,
        free,
        inconsistent_rows,
    }
}

/// All inconsistent residual rows of the reduced system, each with its own
/// certificate. Empty when the system is consistent.
pub fn inconsistencies(sys: &LinearSystem) -> Vec<(Vec<(usize, Rational)>, Rational)> {
    reduce(sys)
        .inconsistent_rows
        .into_iter()
        .map(|r| (r.multipliers, r.constant))
        .collect()
}
