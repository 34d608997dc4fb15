use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Time cutpoints and size caps that define the training, validation and test slices.
///
/// `cutpoints[j]` is `t_j`; interval `j` (for `j >= 1`) is the half-open year
/// range `(t_{j-1}, t_j]`. Index fields refer to positions in `cutpoints`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// `T0`: first year of publication history.
    pub history_start: i32,
    /// `t_0 = T1 < t_1 < ... < t_J = T2`.
    pub cutpoints: Vec<i32>,
    /// `I`: largest historical publication count the rate matrix covers.
    pub max_history: usize,
    /// `K`: largest historical publication count used when estimating rates.
    pub fit_history: usize,
    /// `L`: number of training intervals.
    pub fit_intervals: usize,
    /// `M`: largest annual publication count with its own new-coauthor rate.
    pub max_annual: usize,
    /// `I1`: historical publication cap for test researchers.
    pub test_history_cap: usize,
    /// `U`, `V`: validation series runs over `t_U..=t_V`.
    pub validation_start: usize,
    pub validation_end: usize,
    /// `X`, `Y`, `Z`: forecasts start from `t_X` and run through `t_Z`.
    pub test_origin: usize,
    pub test_eval_start: usize,
    pub test_end: usize,
}

impl WindowSpec {
    /// Consecutive calendar-year cutpoints `first..=last`.
    pub fn annual(first: i32, last: i32) -> Vec<i32> {
        (first..=last).collect()
    }

    /// The 2000-origin test configuration over dblp 1951–2018.
    pub fn set4() -> Self {
        WindowSpec {
            history_start: 1951,
            cutpoints: Self::annual(1985, 2018),
            max_history: 180,
            fit_history: 42,
            fit_intervals: 24,
            max_annual: 12,
            test_history_cap: 40,
            validation_start: 15,
            validation_end: 24,
            test_origin: 15,
            test_eval_start: 25,
            test_end: 33,
        }
    }

    /// The 1994-origin test configuration; training and validation match [`WindowSpec::set4`].
    pub fn set3() -> Self {
        WindowSpec { test_origin: 9, test_history_cap: 60, ..Self::set4() }
    }

    /// `J`.
    pub fn intervals(&self) -> usize {
        self.cutpoints.len().saturating_sub(1)
    }

    /// `t_j`.
    pub fn t(&self, j: usize) -> i32 {
        self.cutpoints[j]
    }

    /// `T2`.
    pub fn end(&self) -> i32 {
        *self.cutpoints.last().expect("validated window has cutpoints")
    }

    /// Regressor `t_j - t_1` for interval `j`.
    pub fn offset(&self, j: usize) -> f64 {
        f64::from(self.t(j) - self.t(1))
    }

    /// Publications of `tl` in interval `j`.
    pub fn pubs_in(&self, tl: &super::AuthorTimeline, j: usize) -> u32 {
        tl.pubs_between(self.t(j - 1), self.t(j))
    }

    pub fn new_coauthors_in(&self, tl: &super::AuthorTimeline, j: usize) -> u32 {
        tl.new_coauthors_between(self.t(j - 1), self.t(j))
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| Err(CorpusError::Window(msg));
        let j = self.intervals();
        if j < 1 {
            return fail("need at least two cutpoints".into());
        }
        if self.cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return fail("cutpoints must be strictly increasing".into());
        }
        if self.history_start > self.cutpoints[0] {
            return fail("history start must not follow the first cutpoint".into());
        }
        for (name, v) in [
            ("max_history", self.max_history),
            ("fit_history", self.fit_history),
            ("fit_intervals", self.fit_intervals),
            ("max_annual", self.max_annual),
            ("test_history_cap", self.test_history_cap),
        ] {
            if v < 1 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.fit_history > self.max_history {
            return fail(format!("fit_history {} exceeds max_history {}", self.fit_history, self.max_history));
        }
        if self.fit_intervals > j {
            return fail(format!("fit_intervals {} exceeds interval count {j}", self.fit_intervals));
        }
        if !(1 <= self.validation_start && self.validation_start < self.validation_end && self.validation_end <= j) {
            return fail(format!(
                "need 1 <= validation_start < validation_end <= {j}, got {} and {}",
                self.validation_start, self.validation_end
            ));
        }
        if !(1 <= self.test_origin
            && self.test_origin < self.test_eval_start
            && self.test_eval_start < self.test_end
            && self.test_end <= j)
        {
            return fail(format!(
                "need 1 <= test_origin < test_eval_start < test_end <= {j}, got {}, {}, {}",
                self.test_origin, self.test_eval_start, self.test_end
            ));
        }
        Ok(())
    }
}
