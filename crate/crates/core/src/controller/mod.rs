//! The switching automaton, the hybrid policy it drives, closed-loop
//! simulation and Monte Carlo estimation of the satisfaction probability.

mod montecarlo;
mod policy;
mod switching;

use thiserror::Error;

use crate::automaton::{AutomatonError, Dfa};
use crate::formula::{evaluate, Formula, FormulaError, Trace};
use crate::system::SystemError;

pub use montecarlo::{
    clopper_pearson, monte_carlo, InitialStates, MonteCarloConfig, MonteCarloSummary,
};
pub use policy::{
    run_closed_loop, ClosedLoopRun, ConstantLaw, ControlLaw, Fallback, FallbackEvent,
    FeedbackPolicy, HybridPolicy, Selection,
};
pub use switching::{SwitchState, SwitchingAutomaton};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("semantics and automaton disagree on trace {trace:?}: {detail}")]
    Mismatch { trace: Vec<usize>, detail: String },
    #[error("at least one run is required")]
    NoRuns,
    #[error("confidence {0} is not in (0, 1)")]
    Confidence(f64),
    #[error("no initial state found in the initial region")]
    EmptyInitialRegion,
    #[error("{0}")]
    Statistics(String),
}

/// Whether `trace` satisfies `φ`, cross-checked against the DFA of `¬φ`.
pub fn check_trace(phi: &Formula, negated: &Dfa, trace: &Trace) -> Result<bool, ControllerError> {
    let sat = evaluate(phi, trace, 0)?;
    if sat == negated.accepts(trace.symbols())? {
        return Err(ControllerError::Mismatch {
            trace: trace.symbols().to_vec(),
            detail: format!("formula evaluates to {sat}, negated DFA agrees"),
        });
    }
    Ok(sat)
}
