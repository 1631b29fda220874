/// Backtracking Armijo rule for maximization along a retraction curve.
///
/// Step sizes tried are `initial_step · shrink^i` for `i = 0..=max_backtracks`;
/// the first one satisfying
/// `f(R(δ)) ≥ f(x) + slope · δ · directional_derivative` is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub initial_step: f64,
    pub shrink: f64,
    pub slope: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            slope: 1e-4,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome<P> {
    /// Accepted step, `0.0` when stalled.
    pub step: f64,
    pub point: P,
    pub value: f64,
    pub stalled: bool,
}

impl Armijo {
    pub fn with_initial_step(mut self, step: f64) -> Self {
        self.initial_step = step;
        self
    }

    /// Runs the search. `step_to(δ)` returns the retracted trial point or
    /// `None` if that step is degenerate (then the step is shrunk).
    pub fn search<P, S, F>(
        &self,
        start: P,
        value: f64,
        directional: f64,
        mut step_to: S,
        mut objective: F,
    ) -> LineSearchOutcome<P>
    where
        S: FnMut(f64) -> Option<P>,
        F: FnMut(&P) -> f64,
    {
        let stall = |start, value| LineSearchOutcome {
            step: 0.0,
            point: start,
            value,
            stalled: true,
        };
        if !(directional > 0.0) || !directional.is_finite() {
            return stall(start, value);
        }
        let mut step = self.initial_step;
        for _ in 0..=self.max_backtracks {
            if let Some(trial) = step_to(step) {
                let f = objective(&trial);
                if f.is_finite() && f >= value + self.slope * step * directional {
                    return LineSearchOutcome {
                        step,
                        point: trial,
                        value: f,
                        stalled: false,
                    };
                }
            }
            step *= self.shrink;
        }
        stall(start, value)
    }
}
