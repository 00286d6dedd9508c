//! Solver properties on random systems, checked against an independent
//! elimination oracle that pivots in the opposite order.

use liext::linsolve::{
    self, AffineForm, LinearSystem, Provenance, SolutionSet, Unknown, UnknownSet,
};
use liext::poly::Coefficient;
use liext::rational::Rational;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=4).prop_map(|(n, d)| Rational::new(n, d))
}

fn unknown_pool() -> Vec<Unknown> {
    let mut set = UnknownSet::new();
    (0..8)
        .map(|i| set.mint(&format!("x_{}", i), 1).unwrap())
        .collect()
}

#[derive(Clone, Debug)]
struct RandomSystem {
    sys: LinearSystem,
}

fn system() -> impl Strategy<Value = RandomSystem> {
    let constraint = prop::collection::vec((0usize..8, rational()), 0..5)
        .prop_flat_map(|terms| rational().prop_map(move |c| (terms.clone(), c)));
    prop::collection::vec(constraint, 1..=10).prop_map(|rows| {
        let pool = unknown_pool();
        let mut sys = LinearSystem::new();
        for (index, (terms, constant)) in rows.into_iter().enumerate() {
            let mut form = AffineForm::constant(constant);
            for (i, c) in terms {
                form = form.add(&AffineForm::term(pool[i].clone(), c));
            }
            sys.push(form, Provenance::Given { index });
        }
        RandomSystem { sys }
    })
}

/// Independent elimination: repeatedly takes the first non-constant
/// constraint and eliminates its highest-ordered unknown by substitution.
enum OracleOut {
    Consistent { eliminated: usize },
    Inconsistent,
}

fn oracle(sys: &LinearSystem) -> OracleOut {
    let mut work: Vec<AffineForm> = sys.constraints().iter().map(|c| c.form.clone()).collect();
    let mut eliminated = 0usize;
    while let Some(pos) = work.iter().position(|f| f.as_constant().is_none()) {
        let f = work[pos].clone();
        let u = f.unknowns().max().unwrap().clone();
        let c = f.coefficient_of(&u);
        // f = c*u + rest = 0  =>  u = -rest/c
        let rest = f.substitute(&u, &AffineForm::zero());
        let expr = rest.scale(&-&c.recip());
        for g in work.iter_mut() {
            *g = g.substitute(&u, &expr);
        }
        eliminated += 1;
    }
    if work.iter().any(|f| !f.is_zero()) {
        OracleOut::Inconsistent
    } else {
        OracleOut::Consistent { eliminated }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn solver_agrees_with_oracle(rs in system()) {
        let sys = rs.sys;
        let solution = linsolve::solve(&sys);
        match (&solution, oracle(&sys)) {
            (SolutionSet::Solved { assignments, free }, OracleOut::Consistent { eliminated }) => {
                // Rank sanity, compared across the two elimination orders.
                let total = sys.unknowns().len();
                prop_assert_eq!(assignments.len() + free.len(), total);
                prop_assert_eq!(assignments.len(), eliminated);

                // Back-substitution with random rationals for the frees.
                let mut rng_values = BTreeMap::new();
                for (i, u) in free.iter().enumerate() {
                    rng_values.insert(
                        u.clone(),
                        AffineForm::constant(Rational::new(2 * i as i64 + 1, 3)),
                    );
                }
                let mut full = rng_values.clone();
                for (u, expr) in assignments {
                    let value = linsolve::apply_assignments(
                        expr,
                        &rng_values,
                        linsolve::FreePolicy::KeepSymbolic,
                    );
                    prop_assert!(value.as_constant().is_some());
                    full.insert(u.clone(), value);
                }
                for c in sys.constraints() {
                    let evaluated = linsolve::apply_assignments(
                        &c.form,
                        &full,
                        linsolve::FreePolicy::KeepSymbolic,
                    );
                    prop_assert!(evaluated.is_zero(), "constraint {} not satisfied", c.form);
                }
            }
            (SolutionSet::Inconsistent { certificate, residual_constant }, OracleOut::Inconsistent) => {
                prop_assert!(linsolve::verify_certificate(&sys, certificate, residual_constant));
                prop_assert!(!residual_constant.is_zero());
            }
            (got, _) => {
                prop_assert!(false, "solver and oracle disagree: {:?}", got);
            }
        }
    }

    #[test]
    fn solver_is_deterministic(rs in system()) {
        prop_assert_eq!(linsolve::solve(&rs.sys), linsolve::solve(&rs.sys));
    }
}
