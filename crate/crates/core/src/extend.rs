//! Order-by-order extension driver.
//!
//! Starting from base fields that satisfy a table of bracket relations, each
//! order `n` adds fresh unknown correction terms `t^n * (ansatz block)` to
//! every field, imposes the relations modulo `t^{n+1}`, and solves the
//! resulting affine system exactly. A solvable order advances the state; an
//! unsolvable one stops the run with an obstruction report carrying an exact
//! inconsistency certificate.
//!
//! Side constraints attached to an order are solved first and substituted
//! into the fresh blocks before any bracket is taken. Pins such as a constant
//! deformation-direction coefficient thereby become constants in the
//! parametric fields, which keeps every bracket product affine.

use crate::linsolve::{
    self, AffineForm, FreePolicy, LinearSystem, Provenance, SolutionSet, Unknown, UnknownSet,
};
use crate::poly::{Coefficient, Cutoff, Polynomial};
use crate::rational::Rational;
use crate::vars::{VarList, Variable};
use crate::vfield::{FieldError, VectorField};
use std::collections::BTreeMap;
use std::fmt;

/// Field names plus structure constants: `[E_i, E_j] = sum c * E_k` for
/// `i < j` (0-based indices). Pairs not listed are not constrained.
#[derive(Clone, Debug)]
pub struct LieAlgebraSpec {
    field_names: Vec<String>,
    relations: BTreeMap<(usize, usize), Vec<(Rational, usize)>>,
}

impl LieAlgebraSpec {
    pub fn new(
        field_names: Vec<String>,
        relations: BTreeMap<(usize, usize), Vec<(Rational, usize)>>,
    ) -> LieAlgebraSpec {
        let n = field_names.len();
        for (&(i, j), rhs) in &relations {
            assert!(i < j && j < n, "invalid relation pair ({}, {})", i, j);
            assert!(rhs.iter().all(|(_, k)| *k < n), "invalid field index");
        }
        LieAlgebraSpec {
            field_names,
            relations,
        }
    }

    pub fn field_count(&self) -> usize {
        self.field_names.len()
    }

    pub fn field_name(&self, i: usize) -> &str {
        &self.field_names[i]
    }

    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    pub fn relations(&self) -> impl Iterator<Item = ((usize, usize), &[(Rational, usize)])> {
        self.relations.iter().map(|(p, rhs)| (*p, rhs.as_slice()))
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }
}

/// Outcome of checking one relation.
#[derive(Clone, Debug)]
pub struct RelationCheck<C: Coefficient> {
    pub pair: (usize, usize),
    /// `[E_i, E_j] - sum c * E_k`; zero when the relation holds.
    pub difference: VectorField<C>,
}

impl<C: Coefficient> RelationCheck<C> {
    pub fn holds(&self) -> bool {
        self.difference.is_zero()
    }
}

/// Result of checking a full relation table.
#[derive(Clone, Debug)]
pub struct VerificationReport<C: Coefficient> {
    pub checks: Vec<RelationCheck<C>>,
}

impl<C: Coefficient> VerificationReport<C> {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(RelationCheck::holds)
    }

    pub fn relations_checked(&self) -> usize {
        self.checks.len()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RelationCheck<C>> {
        self.checks.iter().filter(|c| !c.holds())
    }
}

/// Computes `[E_i, E_j] - sum c * E_k` for every relation in the table,
/// modulo the cutoff when one is given.
pub fn verify_structure<C: Coefficient>(
    fields: &[VectorField<C>],
    spec: &LieAlgebraSpec,
    cutoff: Option<Cutoff>,
) -> Result<VerificationReport<C>, FieldError> {
    assert_eq!(fields.len(), spec.field_count(), "field count mismatch");
    let mut checks = Vec::new();
    for ((i, j), rhs) in spec.relations() {
        let bracket = fields[i].lie_bracket(&fields[j], cutoff)?;
        let vars = fields[i].var_list().clone();
        let coeffs: Vec<Rational> = rhs.iter().map(|(c, _)| c.clone()).collect();
        let members: Vec<VectorField<C>> = rhs.iter().map(|(_, k)| fields[*k].clone()).collect();
        let mut expected = VectorField::linear_combination(&vars, &coeffs, &members)?;
        if let Some(cut) = cutoff {
            expected = expected.truncate(cut.var, cut.order);
        }
        let difference = bracket.sub(&expected)?;
        checks.push(RelationCheck {
            pair: (i, j),
            difference,
        });
    }
    Ok(VerificationReport { checks })
}

/// Monomial supports and side constraints for the unknown correction terms.
///
/// `blocks` maps `(field index, order, component)` to the parametric ansatz
/// polynomial for that slot, written without the `t^order` factor. The block
/// may reference unknowns of lower orders; those are replaced by their solved
/// values when the block is instantiated. `side_constraints` are affine
/// equations over unknowns of any orders; each is activated at the highest
/// order it mentions.
#[derive(Clone, Debug, Default)]
pub struct AnsatzTemplate {
    pub blocks: BTreeMap<(usize, u32, Variable), Polynomial<AffineForm>>,
    pub side_constraints: Vec<AffineForm>,
}

impl AnsatzTemplate {
    pub fn empty() -> AnsatzTemplate {
        AnsatzTemplate::default()
    }

    fn block(
        &self,
        field: usize,
        order: u32,
        component: Variable,
    ) -> Option<&Polynomial<AffineForm>> {
        self.blocks.get(&(field, order, component))
    }

    fn constraints_for_order(&self, order: u32) -> Vec<(usize, &AffineForm)> {
        self.side_constraints
            .iter()
            .enumerate()
            .filter(|(_, form)| {
                let max = form.unknowns().map(Unknown::order_tag).max();
                max == Some(order)
            })
            .collect()
    }
}

/// A complete extension problem.
#[derive(Clone, Debug)]
pub struct ExtensionProblem {
    pub vars: VarList,
    pub deform: Variable,
    pub base_fields: Vec<VectorField<Rational>>,
    pub spec: LieAlgebraSpec,
    pub ansatz: AnsatzTemplate,
    pub unknowns: UnknownSet,
    pub max_order: u32,
    pub free_policy: FreePolicy,
}

impl ExtensionProblem {
    /// Checks the structural invariants that do not require solving: base
    /// fields are tangent to the central fiber and satisfy the relation
    /// table exactly.
    pub fn validate(&self) -> Result<(), ExtendError> {
        for (i, f) in self.base_fields.iter().enumerate() {
            if f.component(self.deform).is_some() {
                return Err(ExtendError::BaseNotTangent { field: i });
            }
        }
        let report = verify_structure(&self.base_fields, &self.spec, None)?;
        let failed = report.failures().next().map(|check| check.pair);
        if let Some(pair) = failed {
            return Err(ExtendError::BaseStructure { pair });
        }
        Ok(())
    }
}

/// One solved order.
#[derive(Clone, Debug)]
pub struct OrderStage {
    pub order: u32,
    /// Fields after applying the free policy; constant coefficients under
    /// `ZeroFill`, affine over the kept free unknowns otherwise.
    pub fields: Vec<VectorField<AffineForm>>,
    /// Assignment for every unknown of this order, over the free ones.
    pub assignments: BTreeMap<Unknown, AffineForm>,
    pub free: Vec<Unknown>,
    /// Constant assignments, read off `assignments`.
    pub pinned: BTreeMap<Unknown, Rational>,
}

/// Exact witness that an order cannot be solved.
#[derive(Clone, Debug)]
pub struct ObstructionReport {
    pub order: u32,
    pub failing_relation: (usize, usize),
    pub component: Variable,
    /// The failing component of the bracket defect, parametric in the free
    /// unknowns of the failing order.
    pub residual: Polynomial<AffineForm>,
    /// Certificate into `system`: the combination equals `residual_constant`.
    pub certificate: Vec<(usize, Rational)>,
    pub residual_constant: Rational,
    /// The collected constraint system of the failing relation.
    pub system: LinearSystem,
    /// Provenances of every constraint entering any inconsistent residual row.
    pub inconsistent_provenances: Vec<Provenance>,
}

impl ObstructionReport {
    pub fn certificate_verifies(&self) -> bool {
        linsolve::verify_certificate(&self.system, &self.certificate, &self.residual_constant)
    }
}

/// Outcome of a run: the reached order, the per-order stages, and the
/// obstruction that stopped the run, if any.
#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub achieved_order: u32,
    pub stages: Vec<OrderStage>,
    pub obstruction: Option<ObstructionReport>,
}

#[derive(Clone, Debug)]
pub enum ExtendError {
    Field(FieldError),
    /// A base field has a nonzero deformation component.
    BaseNotTangent {
        field: usize,
    },
    /// The base fields do not satisfy the claimed relation table.
    BaseStructure {
        pair: (usize, usize),
    },
    /// The side constraints of one order contradict each other.
    SideConstraints {
        order: u32,
        certificate: Vec<(usize, Rational)>,
        residual_constant: Rational,
    },
    /// A solved order failed re-verification: a product dropped during the
    /// affine bracket did not vanish on the solved values.
    StructureCheck {
        order: u32,
        pair: (usize, usize),
    },
}

impl fmt::Display for ExtendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendError::Field(e) => write!(f, "{}", e),
            ExtendError::BaseNotTangent { field } => write!(
                f,
                "base field #{} has a d/t component; base fields must be tangent to the central fiber",
                field + 1
            ),
            ExtendError::BaseStructure { pair } => write!(
                f,
                "base fields do not satisfy relation ({}, {})",
                pair.0 + 1,
                pair.1 + 1
            ),
            ExtendError::SideConstraints { order, .. } => {
                write!(f, "side constraints at order {} are inconsistent", order)
            }
            ExtendError::StructureCheck { order, pair } => write!(
                f,
                "solved order {} fails exact re-verification of relation ({}, {})",
                order,
                pair.0 + 1,
                pair.1 + 1
            ),
        }
    }
}

impl std::error::Error for ExtendError {}

impl From<FieldError> for ExtendError {
    fn from(e: FieldError) -> Self {
        ExtendError::Field(e)
    }
}

struct DriverState {
    /// Current parametric fields (policy-applied after each solved order).
    fields: Vec<VectorField<AffineForm>>,
    /// Policy-applied values of every unknown solved so far.
    solved: BTreeMap<Unknown, AffineForm>,
    stages: Vec<OrderStage>,
}

/// Runs the driver from order 1 to `max_order`, stopping at the first
/// obstruction.
pub fn extend(problem: &ExtensionProblem) -> Result<ExtensionResult, ExtendError> {
    problem.validate()?;
    let mut state = DriverState {
        fields: problem
            .base_fields
            .iter()
            .map(linsolve::embed_field)
            .collect(),
        solved: BTreeMap::new(),
        stages: Vec::new(),
    };
    for order in 1..=problem.max_order {
        match extend_one_order(problem, &mut state, order)? {
            None => {}
            Some(report) => {
                return Ok(ExtensionResult {
                    achieved_order: order - 1,
                    stages: state.stages,
                    obstruction: Some(report),
                });
            }
        }
    }
    Ok(ExtensionResult {
        achieved_order: problem.max_order,
        stages: state.stages,
        obstruction: None,
    })
}

/// Advances the state by one order, or reports the obstruction.
fn extend_one_order(
    problem: &ExtensionProblem,
    state: &mut DriverState,
    order: u32,
) -> Result<Option<ObstructionReport>, ExtendError> {
    let cutoff = Cutoff::new(problem.deform, order);
    let t_power = Polynomial::from_terms(
        &problem.vars,
        [(
            crate::poly::Monomial::power(problem.deform, order),
            AffineForm::one(),
        )],
    );

    // Fresh blocks with solved lower-order values substituted.
    let mut fresh: Vec<VectorField<AffineForm>> = Vec::with_capacity(state.fields.len());
    for i in 0..state.fields.len() {
        let mut components = Vec::new();
        for x in problem.vars.variables() {
            if let Some(block) = problem.ansatz.block(i, order, x) {
                let block = linsolve::apply_assignments_poly(
                    block,
                    &state.solved,
                    FreePolicy::KeepSymbolic,
                );
                let lifted = block.mul(&t_power, None).map_err(FieldError::Poly)?;
                components.push((x, lifted));
            }
        }
        fresh.push(VectorField::new(&problem.vars, components).map_err(ExtendError::Field)?);
    }

    // Side constraints for this order, pre-solved and substituted into the
    // fresh blocks so that pinned slots become constants before bracketing.
    let mut side_sys = LinearSystem::new();
    for (index, form) in problem.ansatz.constraints_for_order(order) {
        let form = linsolve::apply_assignments(form, &state.solved, FreePolicy::KeepSymbolic);
        side_sys.push(form, Provenance::Side { order, index });
    }
    let side_assignments = match linsolve::solve(&side_sys) {
        SolutionSet::Solved { assignments, .. } => assignments,
        SolutionSet::Inconsistent {
            certificate,
            residual_constant,
        } => {
            return Err(ExtendError::SideConstraints {
                order,
                certificate,
                residual_constant,
            })
        }
    };

    let mut parametric: Vec<VectorField<AffineForm>> = Vec::with_capacity(state.fields.len());
    for (current, block) in state.fields.iter().zip(&fresh) {
        let block =
            linsolve::apply_assignments_field(block, &side_assignments, FreePolicy::KeepSymbolic);
        parametric.push(current.add(&block).map_err(ExtendError::Field)?);
    }

    // Bracket defects modulo t^{order+1}, one constraint per monomial.
    let mut system = LinearSystem::new();
    for ((i, j), _) in problem.spec.relations() {
        let defect = relation_defect(problem, &parametric, (i, j), Some(cutoff))?;
        for x in problem.vars.variables() {
            if let Some(comp) = defect.component(x) {
                system.extend_from(LinearSystem::collect(comp, |m| Provenance::Bracket {
                    relation: (i, j),
                    component: x,
                    monomial: m.clone(),
                }));
            }
        }
    }
    system.sort_by_provenance();

    match linsolve::solve(&system) {
        SolutionSet::Solved {
            assignments,
            free: _,
        } => {
            // Compose: express every unknown of this order over the frees.
            let mut composed: BTreeMap<Unknown, AffineForm> = BTreeMap::new();
            for (u, expr) in &assignments {
                composed.insert(u.clone(), expr.clone());
            }
            for (u, expr) in &side_assignments {
                let substituted =
                    linsolve::apply_assignments(expr, &assignments, FreePolicy::KeepSymbolic);
                composed.insert(u.clone(), substituted);
            }

            // Everything of this order not determined above stays free.
            let free: Vec<Unknown> = problem
                .unknowns
                .of_order(order)
                .filter(|u| !composed.contains_key(*u))
                .cloned()
                .collect();

            // Policy: either zero the frees or keep them symbolic.
            let mut applied: BTreeMap<Unknown, AffineForm> = BTreeMap::new();
            for (u, expr) in &composed {
                applied.insert(
                    u.clone(),
                    linsolve::apply_assignments(expr, &BTreeMap::new(), problem.free_policy),
                );
            }
            if problem.free_policy == FreePolicy::ZeroFill {
                for u in &free {
                    applied.insert(u.clone(), AffineForm::zero());
                }
            }

            let specialized: Vec<VectorField<AffineForm>> = parametric
                .iter()
                .map(|f| linsolve::apply_assignments_field(f, &applied, problem.free_policy))
                .collect();

            // Exact re-check: dropped nonlinear products must vanish on the
            // solved values. Only meaningful once fully specialised.
            if problem.free_policy == FreePolicy::ZeroFill {
                let report = verify_structure(&specialized, &problem.spec, Some(cutoff))?;
                let failed = report.failures().next().map(|check| check.pair);
                if let Some(pair) = failed {
                    return Err(ExtendError::StructureCheck { order, pair });
                }
            }

            let pinned: BTreeMap<Unknown, Rational> = composed
                .iter()
                .filter_map(|(u, expr)| expr.as_constant().map(|c| (u.clone(), c.clone())))
                .collect();

            for (u, expr) in &applied {
                state.solved.insert(u.clone(), expr.clone());
            }
            state.fields = specialized.clone();
            state.stages.push(OrderStage {
                order,
                fields: specialized,
                assignments: composed,
                free,
                pinned,
            });
            Ok(None)
        }
        SolutionSet::Inconsistent { .. } => Ok(Some(build_obstruction(
            problem,
            &parametric,
            &system,
            order,
            cutoff,
        )?)),
    }
}

/// `[E_i, E_j] - sum c * E_k` with parametric right-hand side.
fn relation_defect(
    problem: &ExtensionProblem,
    fields: &[VectorField<AffineForm>],
    pair: (usize, usize),
    cutoff: Option<Cutoff>,
) -> Result<VectorField<AffineForm>, ExtendError> {
    let rhs = problem
        .spec
        .relations()
        .find(|(p, _)| *p == pair)
        .map(|(_, rhs)| rhs.to_vec())
        .unwrap_or_default();
    let bracket = fields[pair.0]
        .lie_bracket(&fields[pair.1], cutoff)
        .map_err(ExtendError::Field)?;
    let coeffs: Vec<Rational> = rhs.iter().map(|(c, _)| c.clone()).collect();
    let members: Vec<VectorField<AffineForm>> =
        rhs.iter().map(|(_, k)| fields[*k].clone()).collect();
    let mut expected = VectorField::linear_combination(&problem.vars, &coeffs, &members)
        .map_err(ExtendError::Field)?;
    if let Some(cut) = cutoff {
        expected = expected.truncate(cut.var, cut.order);
    }
    bracket.sub(&expected).map_err(ExtendError::Field)
}

/// Locates the lowest relation pair whose own constraints are inconsistent
/// and wraps its certificate.
fn build_obstruction(
    problem: &ExtensionProblem,
    parametric: &[VectorField<AffineForm>],
    full_system: &LinearSystem,
    order: u32,
    cutoff: Cutoff,
) -> Result<ObstructionReport, ExtendError> {
    for ((i, j), _) in problem.spec.relations() {
        let mut subsystem = LinearSystem::new();
        for c in full_system.constraints() {
            if let Provenance::Bracket { relation, .. } = &c.provenance {
                if *relation == (i, j) {
                    subsystem.push(c.form.clone(), c.provenance.clone());
                }
            }
        }
        let reduced = linsolve::inconsistencies(&subsystem);
        if reduced.is_empty() {
            continue;
        }
        let (certificate, residual_constant) = reduced[0].clone();

        // The reported component: provenance of the first constraint in the
        // primary certificate.
        let first_idx = certificate
            .first()
            .map(|(idx, _)| *idx)
            .expect("nonempty certificate");
        let component = match &subsystem.constraints()[first_idx].provenance {
            Provenance::Bracket { component, .. } => *component,
            _ => unreachable!("subsystem holds bracket constraints only"),
        };

        let mut provenances: Vec<Provenance> = Vec::new();
        for (cert, _) in &reduced {
            for (idx, _) in cert {
                let p = subsystem.constraints()[*idx].provenance.clone();
                if !provenances.contains(&p) {
                    provenances.push(p);
                }
            }
        }
        provenances.sort();

        let defect = relation_defect(problem, parametric, (i, j), Some(cutoff))?;
        let residual = defect.component_or_zero(component);

        return Ok(ObstructionReport {
            order,
            failing_relation: (i, j),
            component,
            residual,
            certificate,
            residual_constant,
            system: subsystem,
            inconsistent_provenances: provenances,
        });
    }
    // The full system is inconsistent but every single relation is
    // consistent in isolation: report against the whole system.
    let reduced = linsolve::inconsistencies(full_system);
    let (certificate, residual_constant) = reduced[0].clone();
    let first_idx = certificate.first().map(|(idx, _)| *idx).unwrap();
    let (relation, component) = match &full_system.constraints()[first_idx].provenance {
        Provenance::Bracket {
            relation,
            component,
            ..
        } => (*relation, *component),
        _ => ((0, 0), problem.deform),
    };
    let defect = relation_defect(problem, parametric, relation, Some(cutoff))?;
    let mut provenances: Vec<Provenance> = Vec::new();
    for (cert, _) in &reduced {
        for (idx, _) in cert {
            let p = full_system.constraints()[*idx].provenance.clone();
            if !provenances.contains(&p) {
                provenances.push(p);
            }
        }
    }
    provenances.sort();
    Ok(ObstructionReport {
        order,
        failing_relation: relation,
        component,
        residual: defect.component_or_zero(component),
        certificate,
        residual_constant,
        system: full_system.clone(),
        inconsistent_provenances: provenances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    fn vars() -> VarList {
        VarList::new(["t", "v", "y"])
    }

    fn rational_field(vs: &VarList, spec: &[(&str, &str)]) -> VectorField<Rational> {
        VectorField::new(
            vs,
            spec.iter().map(|(x, p)| {
                (
                    vs.var(x).unwrap(),
                    crate::dsl::parse_polynomial(p, vs).unwrap(),
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn verify_structure_flags_wrong_tables() {
        let vs = vars();
        let e1 = rational_field(&vs, &[("y", "-v^2*y^2")]);
        let e2 = rational_field(&vs, &[("y", "-y^2")]);
        // claim [E1, E2] = E3 with E3 = d/v; actually [E1, E2] = 0
        let e3 = rational_field(&vs, &[("v", "1")]);
        let spec = LieAlgebraSpec::new(
            vec!["E1".into(), "E2".into(), "E3".into()],
            BTreeMap::from([((0, 1), vec![(Rational::one(), 2)])]),
        );
        let report = verify_structure(&[e1, e2, e3.clone()], &spec, None).unwrap();
        assert!(!report.all_hold());
        let failure = report.failures().next().unwrap();
        assert_eq!(failure.pair, (0, 1));
        assert_eq!(failure.difference, e3.neg());
    }

    #[test]
    fn abelian_pair_passes() {
        let vs = vars();
        let e5 = rational_field(&vs, &[("y", "2*y"), ("v", "-v")]);
        let e6 = rational_field(&vs, &[("v", "v")]);
        let spec = LieAlgebraSpec::new(
            vec!["E5".into(), "E6".into()],
            BTreeMap::from([((0, 1), vec![])]),
        );
        let report = verify_structure(&[e5, e6], &spec, None).unwrap();
        assert!(report.all_hold());
        assert_eq!(report.relations_checked(), 1);
    }

    #[test]
    fn trivial_problem_extends_to_any_order() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let v = vs.var("v").unwrap();
        let base = rational_field(&vs, &[("v", "1")]);
        let mut unknowns = UnknownSet::new();
        let mut blocks = BTreeMap::new();
        for order in 1..=3u32 {
            let name = format!("u_{}", order);
            let u = unknowns.mint(&name, order).unwrap();
            blocks.insert(
                (0usize, order, v),
                Polynomial::from_terms(&vs, [(Monomial::one(), AffineForm::unknown(u))]),
            );
        }
        let problem = ExtensionProblem {
            vars: vs.clone(),
            deform: t,
            base_fields: vec![base.clone()],
            spec: LieAlgebraSpec::new(vec!["X".into()], BTreeMap::new()),
            ansatz: AnsatzTemplate {
                blocks,
                side_constraints: Vec::new(),
            },
            unknowns,
            max_order: 3,
            free_policy: FreePolicy::ZeroFill,
        };
        let result = extend(&problem).unwrap();
        assert_eq!(result.achieved_order, 3);
        assert!(result.obstruction.is_none());
        let last = result.stages.last().unwrap();
        assert_eq!(
            linsolve::demote_field(&last.fields[0]).unwrap(),
            base,
            "zero-fill keeps the field unchanged"
        );
    }

    #[test]
    fn max_order_zero_returns_base() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let base = rational_field(&vs, &[("v", "1")]);
        let problem = ExtensionProblem {
            vars: vs.clone(),
            deform: t,
            base_fields: vec![base],
            spec: LieAlgebraSpec::new(vec!["X".into()], BTreeMap::new()),
            ansatz: AnsatzTemplate::empty(),
            unknowns: UnknownSet::new(),
            max_order: 0,
            free_policy: FreePolicy::ZeroFill,
        };
        let result = extend(&problem).unwrap();
        assert_eq!(result.achieved_order, 0);
        assert!(result.stages.is_empty());
        assert!(result.obstruction.is_none());
    }

    #[test]
    fn fixed_vertical_block_obstructs() {
        // X = d/v, Y = v d/v with [X, Y] = X. Forcing X's t-block to be
        // t d/t (no unknowns) breaks the t-component of the relation.
        let vs = vars();
        let t = vs.var("t").unwrap();
        let x = rational_field(&vs, &[("v", "1")]);
        let y = rational_field(&vs, &[("v", "v")]);
        let spec = LieAlgebraSpec::new(
            vec!["X".into(), "Y".into()],
            BTreeMap::from([((0, 1), vec![(Rational::one(), 0)])]),
        );
        let mut blocks = BTreeMap::new();
        blocks.insert(
            (0usize, 1u32, t),
            Polynomial::constant(&vs, AffineForm::one()),
        );
        let problem = ExtensionProblem {
            vars: vs.clone(),
            deform: t,
            base_fields: vec![x, y],
            spec,
            ansatz: AnsatzTemplate {
                blocks,
                side_constraints: Vec::new(),
            },
            unknowns: UnknownSet::new(),
            max_order: 2,
            free_policy: FreePolicy::ZeroFill,
        };
        let result = extend(&problem).unwrap();
        assert_eq!(result.achieved_order, 0);
        let report = result.obstruction.unwrap();
        assert_eq!(report.order, 1);
        assert_eq!(report.failing_relation, (0, 1));
        assert_eq!(report.component, t);
        assert!(report.certificate_verifies());
        assert_eq!(report.residual_constant, Rational::from_int(-1));
        assert_eq!(
            report.residual,
            linsolve::embed_poly(&crate::dsl::parse_polynomial("-t", &vs).unwrap())
        );
    }

    #[test]
    fn keep_symbolic_threads_free_unknowns() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let v = vs.var("v").unwrap();
        let base = rational_field(&vs, &[("v", "1")]);
        let mut unknowns = UnknownSet::new();
        let u1 = unknowns.mint("u_1", 1).unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert(
            (0usize, 1u32, v),
            Polynomial::from_terms(&vs, [(Monomial::one(), AffineForm::unknown(u1.clone()))]),
        );
        let problem = ExtensionProblem {
            vars: vs.clone(),
            deform: t,
            base_fields: vec![base],
            spec: LieAlgebraSpec::new(vec!["X".into()], BTreeMap::new()),
            ansatz: AnsatzTemplate {
                blocks,
                side_constraints: Vec::new(),
            },
            unknowns,
            max_order: 1,
            free_policy: FreePolicy::KeepSymbolic,
        };
        let result = extend(&problem).unwrap();
        let stage = &result.stages[0];
        assert_eq!(stage.free, vec![u1.clone()]);
        // the field keeps the symbolic correction 1 + u_1 t
        let comp = stage.fields[0].component_or_zero(v);
        let t_mono = Monomial::var(t);
        assert_eq!(comp.coefficient(&t_mono), AffineForm::unknown(u1));
    }

    #[test]
    fn verify_structure_with_cutoff_truncates() {
        // [X, Y] = X holds only modulo t^1 for these deformed fields.
        let vs = vars();
        let t = vs.var("t").unwrap();
        let x = rational_field(&vs, &[("v", "1"), ("t", "t^2")]);
        let y = rational_field(&vs, &[("v", "v")]);
        let spec = LieAlgebraSpec::new(
            vec!["X".into(), "Y".into()],
            BTreeMap::from([((0, 1), vec![(Rational::one(), 0)])]),
        );
        let exact = verify_structure(&[x.clone(), y.clone()], &spec, None).unwrap();
        assert!(!exact.all_hold());
        let truncated = verify_structure(&[x, y], &spec, Some(Cutoff::new(t, 1))).unwrap();
        assert!(truncated.all_hold());
    }

    #[test]
    fn base_with_deform_component_rejected() {
        let vs = vars();
        let t = vs.var("t").unwrap();
        let bad = rational_field(&vs, &[("v", "1"), ("t", "t")]);
        let problem = ExtensionProblem {
            vars: vs.clone(),
            deform: t,
            base_fields: vec![bad],
            spec: LieAlgebraSpec::new(vec!["X".into()], BTreeMap::new()),
            ansatz: AnsatzTemplate::empty(),
            unknowns: UnknownSet::new(),
            max_order: 1,
            free_policy: FreePolicy::ZeroFill,
        };
        assert!(matches!(
            extend(&problem),
            Err(ExtendError::BaseNotTangent { field: 0 })
        ));
    }
}
