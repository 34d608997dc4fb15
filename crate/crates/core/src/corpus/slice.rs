use std::fmt;

use serde::Serialize;

use super::{AuthorTimeline, CorpusError, Timelines, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Training,
    Validation,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Training => "training",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

/// Researchers eligible for one role under a window.
#[derive(Debug, Clone)]
pub struct DatasetSlice {
    pub role: Role,
    pub members: Vec<AuthorTimeline>,
    pub window: WindowSpec,
    /// Researchers active in the role's anchor interval.
    pub anchor_total: usize,
}

impl DatasetSlice {
    /// Eligible members over researchers active in the anchor interval.
    pub fn coverage(&self) -> f64 {
        if self.anchor_total == 0 {
            0.0
        } else {
            self.members.len() as f64 / self.anchor_total as f64
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Role {
    /// Activity in the interval that defines the role's population.
    pub fn in_anchor(self, tl: &AuthorTimeline, spec: &WindowSpec) -> bool {
        match self {
            // [T0, t_{L-1}]
            Role::Training => tl.pubs_between(spec.history_start - 1, spec.t(spec.fit_intervals - 1)) > 0,
            // (t_{U-1}, t_U]
            Role::Validation => spec.pubs_in(tl, spec.validation_start) > 0,
            // [t_X, t_{X+1})
            Role::Test => {
                let x = spec.test_origin;
                tl.pubs_between(spec.t(x) - 1, spec.t(x + 1) - 1) > 0
            }
        }
    }

    /// Full eligibility rule: anchor activity plus the role's caps.
    pub fn eligible(self, tl: &AuthorTimeline, spec: &WindowSpec) -> bool {
        if !self.in_anchor(tl, spec) {
            return false;
        }
        match self {
            Role::Training | Role::Validation => true,
            Role::Test => {
                let x = spec.test_origin;
                let history = tl.pubs_between(spec.history_start - 1, spec.t(x));
                history as usize <= spec.test_history_cap
                    && (x..=spec.test_end).all(|j| spec.pubs_in(tl, j) as usize <= spec.max_annual)
            }
        }
    }
}

/// Selects the researchers eligible for `role`.
pub fn slice_dataset(timelines: &Timelines, spec: &WindowSpec, role: Role) -> Result<DatasetSlice, CorpusError> {
    spec.validate()?;
    let mut anchor_total = 0;
    let mut members = Vec::new();
    for tl in timelines.iter() {
        if role.in_anchor(tl, spec) {
            anchor_total += 1;
            if role.eligible(tl, spec) {
                members.push(tl.clone());
            }
        }
    }
    if members.is_empty() {
        return Err(CorpusError::EmptySlice(role));
    }
    Ok(DatasetSlice { role, members, window: spec.clone(), anchor_total })
}
