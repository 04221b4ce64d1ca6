//! Step sizes and projections for the two-timescale update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Coupled step sizes `a_k = a0 / (1 + k)^p_a` (inter-skill, slow) and
/// `b_k = b0 / (1 + k)^p_b` (RAD, fast).
///
/// Exponents in `(0.5, 1]` give `sum a_k = sum b_k = inf` with square-summable
/// steps. Requiring `b0 > a0` and `p_b <= p_a` makes `b_k / a_k` nondecreasing
/// in `k`, so `b_k > a_k` holds for every `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleFields")]
pub struct StepSchedule {
    a0: f64,
    p_a: f64,
    b0: f64,
    p_b: f64,
}

#[derive(Deserialize)]
struct ScheduleFields {
    a0: f64,
    p_a: f64,
    b0: f64,
    p_b: f64,
}

impl TryFrom<ScheduleFields> for StepSchedule {
    type Error = Error;

    fn try_from(f: ScheduleFields) -> Result<Self> {
        StepSchedule::new(f.a0, f.p_a, f.b0, f.p_b)
    }
}

impl StepSchedule {
    pub fn new(a0: f64, p_a: f64, b0: f64, p_b: f64) -> Result<Self> {
        for (name, p) in [("p_a", p_a), ("p_b", p_b)] {
            if !(p > 0.5 && p <= 1.0) {
                return Err(Error::Validation(format!("exponent {name} = {p} outside (0.5, 1]")));
            }
        }
        for (name, v) in [("a0", a0), ("b0", b0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("initial step {name} = {v} must be positive")));
            }
        }
        if b0 <= a0 {
            return Err(Error::Validation(format!(
                "fast step b_0 = {b0} must exceed slow step a_0 = {a0}"
            )));
        }
        if p_b > p_a {
            return Err(Error::Validation(format!(
                "fast exponent p_b = {p_b} above slow exponent p_a = {p_a}: b_k would fall below a_k"
            )));
        }
        Ok(StepSchedule { a0, p_a, b0, p_b })
    }

    pub fn slow(&self, k: u64) -> f64 {
        self.a0 / (1.0 + k as f64).powf(self.p_a)
    }

    pub fn fast(&self, k: u64) -> f64 {
        self.b0 / (1.0 + k as f64).powf(self.p_b)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }
}

/// Compact box `[lower_i, upper_i]`; projection clamps elementwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ProjectionBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dimension("projection box", lower.len(), upper.len()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Validation("projection box needs lower < upper elementwise".into()));
        }
        Ok(ProjectionBox { lower, upper })
    }

    pub fn uniform(len: usize, lower: f64, upper: f64) -> Result<Self> {
        ProjectionBox::new(vec![lower; len], vec![upper; len])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn project(&self, params: &mut Matrix) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::dimension("projected parameters", self.len(), params.len()));
        }
        for ((v, &lo), &hi) in params.as_mut_slice().iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
        Ok(())
    }

    pub fn contains(&self, params: &Matrix) -> bool {
        params.len() == self.len()
            && params
                .as_slice()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Number of entries sitting on a face of the box.
    pub fn saturated(&self, params: &Matrix) -> usize {
        params
            .as_slice()
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(v, (lo, hi))| *v <= lo || *v >= hi)
            .count()
    }
}
