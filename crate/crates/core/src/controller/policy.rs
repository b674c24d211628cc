use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cegis::BarrierCertificate;
use crate::decomposition::Decomposition;
use crate::system::{Labeling, StochasticSystem, SystemError};
use crate::Scalar;

use super::switching::{SwitchState, SwitchingAutomaton};

/// Why an input was chosen outside the certified rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Every `D_u(x)` exceeded the tolerance; the argmin was used.
    NoValidInput,
    /// The active mode has no certificate; the first input was used.
    NoController,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub input: usize,
    pub fallback: Option<Fallback>,
}

impl Selection {
    pub fn plain(input: usize) -> Self {
        Self {
            input,
            fallback: None,
        }
    }
}

/// Picks an input index given the active switching mode and the state.
pub trait ControlLaw<T>: Sync {
    fn select(&self, mode: usize, x: &[T]) -> Selection;
}

/// The switching policy: the mode selects a certificate, the certificate's
/// drift polynomials select the input. Smallest index wins among inputs
/// with `D_u(x) ≤ tol`; otherwise the argmin of `D_u(x)` is used and the
/// event is reported.
#[derive(Debug, Clone)]
pub struct HybridPolicy<T> {
    /// Certificate per switching state.
    controllers: Vec<Option<BarrierCertificate<T>>>,
    tol: T,
}

impl<T: Scalar> HybridPolicy<T> {
    /// `certificates[g]` serves group `g` of the decomposition.
    pub fn new(
        automaton: &SwitchingAutomaton,
        dec: &Decomposition,
        certificates: &[Option<BarrierCertificate<T>>],
        tol: T,
    ) -> Self {
        let controllers = automaton
            .states()
            .iter()
            .map(|s| match s {
                SwitchState::Interior(k) => dec
                    .group_for_edge(k.source, k.via)
                    .and_then(|g| certificates.get(g).cloned().flatten()),
                _ => None,
            })
            .collect();
        Self { controllers, tol }
    }

    /// One certificate for every mode.
    pub fn uniform(
        automaton: &SwitchingAutomaton,
        certificate: BarrierCertificate<T>,
        tol: T,
    ) -> Self {
        Self {
            controllers: vec![Some(certificate); automaton.num_states()],
            tol,
        }
    }

    pub fn controller(&self, mode: usize) -> Option<&BarrierCertificate<T>> {
        self.controllers.get(mode).and_then(Option::as_ref)
    }
}

impl<T: Scalar> ControlLaw<T> for HybridPolicy<T> {
    fn select(&self, mode: usize, x: &[T]) -> Selection {
        let Some(cert) = self.controller(mode) else {
            return Selection {
                input: 0,
                fallback: Some(Fallback::NoController),
            };
        };
        let drift = cert.drift_at(x);
        if let Some(u) = drift.iter().position(|d| *d <= self.tol) {
            return Selection::plain(u);
        }
        let u = drift
            .iter()
            .enumerate()
            .fold(
                (0, T::infinity()),
                |a, (i, d)| if *d < a.1 { (i, *d) } else { a },
            )
            .0;
        Selection {
            input: u,
            fallback: Some(Fallback::NoValidInput),
        }
    }
}

/// Quantized linear feedback: the input closest to `-(K x + b)`, ties to
/// the smallest index. Ignores the switching mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeedbackPolicy<T> {
    /// One row per input dimension.
    pub gains: Vec<Vec<T>>,
    pub offset: Vec<T>,
    pub inputs: Vec<Vec<T>>,
}

impl<T: Scalar> ControlLaw<T> for FeedbackPolicy<T> {
    fn select(&self, _mode: usize, x: &[T]) -> Selection {
        let want: Vec<T> = self
            .gains
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| -(row.iter().zip(x).fold(*b, |acc, (k, v)| acc + *k * *v)))
            .collect();
        let dist = |u: &[T]| {
            u.iter()
                .zip(&want)
                .fold(T::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b))
        };
        let best = self
            .inputs
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |a, (i, u)| {
                let d = dist(u);
                if d < a.1 {
                    (i, d)
                } else {
                    a
                }
            })
            .0;
        Selection::plain(best)
    }
}

/// Always the same input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantLaw(pub usize);

impl<T> ControlLaw<T> for ConstantLaw {
    fn select(&self, _mode: usize, _x: &[T]) -> Selection {
        Selection::plain(self.0)
    }
}

/// A fallback during a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEvent {
    pub step: usize,
    pub mode: usize,
    pub kind: Fallback,
}

/// Closed-loop trajectory. `states`, `labels` and `modes` have one entry
/// per visited step; `inputs` one per transition taken.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun<T> {
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<usize>,
    pub labels: Vec<usize>,
    /// Switching state after reading each label.
    pub modes: Vec<usize>,
    /// The switching automaton reached an accepting state of the negated
    /// specification; the run stops there.
    pub violated: bool,
    pub fallbacks: Vec<FallbackEvent>,
    /// States projected back onto X.
    pub clamped: usize,
}

/// Runs at most `n` steps from `x0`: label the state, advance the switching
/// automaton, stop if it accepted, else apply the input its mode selects.
pub fn run_closed_loop<T: Scalar, L: ControlLaw<T> + ?Sized>(
    sys: &StochasticSystem<T>,
    labeling: &Labeling<T>,
    automaton: &SwitchingAutomaton,
    law: &L,
    x0: &[T],
    n: usize,
    rng: &mut impl Rng,
) -> Result<ClosedLoopRun<T>, SystemError> {
    let mut run = ClosedLoopRun {
        states: Vec::with_capacity(n),
        inputs: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        modes: Vec::with_capacity(n),
        violated: false,
        fallbacks: Vec::new(),
        clamped: 0,
    };
    drive(
        sys,
        labeling,
        automaton,
        law,
        x0,
        n,
        rng,
        |x, label, mode, sel| {
            run.states.push(x.to_vec());
            run.labels.push(label);
            run.modes.push(mode);
            if let Some(sel) = sel {
                run.inputs.push(sel.input);
            }
        },
    )
    .map(|out| {
        run.violated = out.violated;
        run.fallbacks = out.fallbacks;
        run.clamped = out.clamped;
        run
    })
}

pub(crate) struct DriveOutcome {
    pub violated: bool,
    pub fallbacks: Vec<FallbackEvent>,
    pub clamped: usize,
}

/// Shared closed-loop core; `visit` sees every step with the selection made
/// there (none on the last step or when the run stops).
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<T: Scalar, L: ControlLaw<T> + ?Sized>(
    sys: &StochasticSystem<T>,
    labeling: &Labeling<T>,
    automaton: &SwitchingAutomaton,
    law: &L,
    x0: &[T],
    n: usize,
    rng: &mut impl Rng,
    mut visit: impl FnMut(&[T], usize, usize, Option<Selection>),
) -> Result<DriveOutcome, SystemError> {
    let mut out = DriveOutcome {
        violated: false,
        fallbacks: Vec::new(),
        clamped: 0,
    };
    let mut x = x0.to_vec();
    if sys.clamp(&mut x) {
        out.clamped += 1;
    }
    let mut mode = automaton.initial()[0];
    for k in 0..n {
        let label = labeling.label(&x);
        mode = automaton.step(mode, label);
        if automaton.is_final(mode) {
            out.violated = true;
            visit(&x, label, mode, None);
            break;
        }
        if k + 1 == n {
            visit(&x, label, mode, None);
            break;
        }
        let sel = law.select(mode, &x);
        if let Some(kind) = sel.fallback {
            out.fallbacks.push(FallbackEvent {
                step: k,
                mode,
                kind,
            });
        }
        visit(&x, label, mode, Some(sel));
        x = sys.step_index(&x, sel.input, rng)?;
        if sys.clamp(&mut x) {
            out.clamped += 1;
        }
    }
    Ok(out)
}
