use crate::poly::Interval;
use crate::system::Region;
use crate::Scalar;

use super::CegisProblem;

const PRIMES: [u8; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// A sample point (normalized coordinates) with its region tags and the
/// constraint rows it contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub z: Vec<T>,
    pub in_source: bool,
    pub in_target: bool,
    /// `b_i(z)`.
    pub(crate) basis: Vec<T>,
    /// `E[b_i(f̃(z,u,w))] - b_i(z)`, indexed `[u][i]`.
    pub(crate) drift: Vec<Vec<T>>,
    /// Input chosen for this sample by the last successful candidate.
    pub(crate) pref: Option<usize>,
}

/// Append-only set of samples.
#[derive(Debug, Clone, Default)]
pub struct SampleSet<T> {
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    /// Adds `z` unless it is already present.
    pub fn push(&mut self, problem: &CegisProblem<T>, z: Vec<T>) -> bool {
        let tiny = T::epsilon() * T::lit(16.0);
        if self
            .samples
            .iter()
            .any(|s| s.z.iter().zip(&z).all(|(a, b)| (*a - *b).abs() <= tiny))
        {
            return false;
        }
        let basis = problem.template.eval(&z);
        let drift = problem
            .drift_basis
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| d.eval_state(&z).unwrap_or(T::nan()))
                    .collect()
            })
            .collect();
        self.samples.push(Sample {
            in_source: problem.source_z.contains(&z),
            in_target: problem.target_z.contains(&z),
            z,
            basis,
            drift,
            pref: None,
        });
        true
    }

    /// Low-discrepancy points over the box and over each region, plus the
    /// corners of every region piece's bounding box.
    pub fn seed(&mut self, problem: &CegisProblem<T>, per_region: usize) {
        let unit = problem.norm.unit_box();
        for z in spread(&unit, per_region) {
            self.push(problem, z);
        }
        for region in [&problem.source_z, &problem.target_z] {
            let pieces: Vec<_> = region
                .disjuncts
                .iter()
                .filter_map(|d| Region::new(vec![d.clone()]).bounding_box(&unit))
                .collect();
            let share = per_region.div_ceil(pieces.len().max(1));
            for bx in &pieces {
                let mut added = 0;
                for z in corners(bx).into_iter().chain(spread(bx, share * 4)) {
                    if added >= share {
                        break;
                    }
                    if region.contains(&z) && self.push(problem, z) {
                        added += 1;
                    }
                }
            }
        }
    }

    pub(crate) fn set_preferences(&mut self, assignment: &[usize]) {
        for (s, &u) in self.samples.iter_mut().zip(assignment) {
            s.pref = Some(u);
        }
    }
}

/// `k` points over the box: an even grid in one dimension, Halton points
/// otherwise.
pub(crate) fn spread<T: Scalar>(bx: &[Interval<T>], k: usize) -> Vec<Vec<T>> {
    if k == 0 || bx.is_empty() {
        return Vec::new();
    }
    if bx.len() == 1 {
        let side = bx[0];
        if k == 1 {
            return vec![vec![side.mid()]];
        }
        return (0..k)
            .map(|i| {
                vec![side.lo + side.width() * T::from_usize_lossy(i) / T::from_usize_lossy(k - 1)]
            })
            .collect();
    }
    (1..=k)
        .map(|i| {
            bx.iter()
                .enumerate()
                .map(|(d, side)| {
                    side.lo + side.width() * T::lit(halton::number(PRIMES[d % PRIMES.len()], i))
                })
                .collect()
        })
        .collect()
}

pub(crate) fn corners<T: Scalar>(bx: &[Interval<T>]) -> Vec<Vec<T>> {
    if bx.len() > 10 {
        return Vec::new();
    }
    (0..1usize << bx.len())
        .map(|mask| {
            bx.iter()
                .enumerate()
                .map(|(d, s)| if mask >> d & 1 == 1 { s.hi } else { s.lo })
                .collect()
        })
        .collect()
}
