//! Problems shared by the benchmarks.

use nlgreen::{
    BoundaryOperatorSet, Coefficient, FunctionalSet, LinearFunctional, LinearODEProblem, NonlocalSpec, PeriodicParams,
};

pub fn periodic(m: f64, delta: f64) -> NonlocalSpec {
    PeriodicParams::new(m, delta).spec().expect("valid periodic spec")
}

/// `u'' + t u' - u` on `[0, 1]`, Dirichlet rows, one weighted integral and one
/// two-point functional.
pub fn second_order(deltas: [f64; 2]) -> NonlocalSpec {
    let problem = LinearODEProblem::new(
        2,
        (0.0, 1.0),
        vec![Coefficient::parse("t").unwrap(), Coefficient::Constant(0.0)],
        -1.0,
    )
    .unwrap();
    let functionals = FunctionalSet::PerCondition(vec![
        LinearFunctional::weighted_integral(Coefficient::parse("exp(-t)").unwrap(), 0.0, 1.0),
        LinearFunctional::multipoint(vec![0.25, 0.5], vec![1.0, -0.5]).unwrap(),
    ]);
    NonlocalSpec::new(problem, BoundaryOperatorSet::dirichlet2(), deltas.to_vec(), functionals).unwrap()
}
