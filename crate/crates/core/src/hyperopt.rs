//! Genetic search for the cumulative-advantage hyperparameters.
//!
//! The fitness of `(τ, υ)` is the total absolute error between the modified
//! coauthor rate and the observed new-coauthor count, summed over validation
//! researchers and validation years. Fitness terms are collapsed to distinct
//! `(m, l, k_prev, Δk)` tuples with multiplicities before the search starts.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetSlice, WindowSpec};
use crate::predict::modified_zeta;
use crate::rng;
use crate::training::ZetaMatrix;
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum HyperoptError {
    #[error("validation slice is empty")]
    EmptyValidation,
    #[error("validation interval {0} is not covered by the ζ matrix")]
    IntervalOutOfRange(usize),
    #[error("invalid search configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub tau: f64,
    pub upsilon: f64,
}

/// Real interval with an optionally open lower end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub open_lo: bool,
}

impl Interval {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, open_lo: false }
    }

    pub const fn open_closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, open_lo: true }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.open_lo { v > self.lo } else { v >= self.lo };
        above && v <= self.hi
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && (self.lo < self.hi || (!self.open_lo && self.lo == self.hi))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let v = self.lo + (self.hi - self.lo) * rng.random::<f64>();
            if self.contains(v) {
                return v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    /// Population size `n0`.
    pub population: usize,
    /// Crossovers per generation `n1`.
    pub crossovers: usize,
    /// Mutations per generation `n2`.
    pub mutations: usize,
    /// Generations `n3`.
    pub generations: usize,
    /// Sampling range `L0`.
    pub range_l0: Interval,
    /// Sampling range `L1`.
    pub range_l1: Interval,
    /// Mutation step range `L2`.
    pub mutation_step: Interval,
    /// When false, υ is drawn from `L0` and τ from `L1`; when true the other way round.
    pub tau_in_l0: bool,
    /// Set by the caller, never read from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig::with_population(400)
    }
}

impl GaConfig {
    /// Defaults with `n1` and `n2` scaled to the given `n0`.
    pub fn with_population(n0: usize) -> Self {
        GaConfig {
            population: n0,
            crossovers: (0.6 * n0 as f64).ceil() as usize,
            mutations: (0.3 * n0 as f64).ceil() as usize,
            generations: 500,
            range_l0: Interval::closed(0.6, 1.0),
            range_l1: Interval::open_closed(0.0, 0.4),
            mutation_step: Interval::closed(-0.01, 0.01),
            tau_in_l0: false,
            seed: 0,
        }
    }

    /// `(τ range, υ range)`.
    pub fn ranges(&self) -> (Interval, Interval) {
        if self.tau_in_l0 {
            (self.range_l0, self.range_l1)
        } else {
            (self.range_l1, self.range_l0)
        }
    }

    pub fn in_bounds(&self, hp: HyperParams) -> bool {
        let (t, u) = self.ranges();
        t.contains(hp.tau) && u.contains(hp.upsilon)
    }

    pub fn validate(&self) -> Result<(), HyperoptError> {
        if self.population == 0 {
            return Err(HyperoptError::Config("population must be positive".into()));
        }
        for (name, iv) in [("L0", self.range_l0), ("L1", self.range_l1), ("L2", self.mutation_step)] {
            if !iv.is_valid() {
                return Err(HyperoptError::Config(format!("interval {name} is empty")));
            }
        }
        if self.population < 2 && self.crossovers > 0 {
            return Err(HyperoptError::Config("crossover needs a population of at least 2".into()));
        }
        Ok(())
    }
}

/// One distinct fitness term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Term {
    /// Publications in the year; 0 means none.
    pub m: usize,
    pub l: usize,
    pub k_prev: u64,
    pub dk: u64,
}

/// Validation data reduced to weighted fitness terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationTerms {
    pub terms: Vec<(Term, u64)>,
    /// Researcher-years with more than `M` publications, left out.
    pub skipped: u64,
    /// Researcher-years in total, including the skipped ones.
    pub total: u64,
}

impl ValidationTerms {
    /// Collects terms for intervals `U+1..=V`.
    pub fn build(validation: &DatasetSlice, spec: &WindowSpec) -> Result<Self, HyperoptError> {
        if validation.is_empty() {
            return Err(HyperoptError::EmptyValidation);
        }
        let mut counts: BTreeMap<Term, u64> = BTreeMap::new();
        let (mut skipped, mut total) = (0, 0);
        for tl in &validation.members {
            for l in spec.validation_start + 1..=spec.validation_end {
                total += 1;
                let m = spec.pubs_in(tl, l) as usize;
                if m > spec.max_annual {
                    skipped += 1;
                    continue;
                }
                let term = Term {
                    m,
                    l,
                    k_prev: u64::from(tl.coauthors_through(spec.t(l - 1))),
                    dk: u64::from(spec.new_coauthors_in(tl, l)),
                };
                *counts.entry(term).or_default() += 1;
            }
        }
        Ok(ValidationTerms { terms: counts.into_iter().collect(), skipped, total })
    }

    fn check<T: Real>(&self, zeta: &ZetaMatrix<T>) -> Result<(), HyperoptError> {
        for (t, _) in &self.terms {
            if t.m > zeta.rows || t.l == 0 || t.l > zeta.cols {
                return Err(HyperoptError::IntervalOutOfRange(t.l));
            }
        }
        Ok(())
    }
}

/// Absolute-error fitness of `hp` over precomputed terms. Lower is better.
pub fn fitness_terms<T: Real>(hp: HyperParams, terms: &ValidationTerms, zeta: &ZetaMatrix<T>) -> f64 {
    terms
        .terms
        .iter()
        .map(|&(t, n)| {
            let predicted = if t.m == 0 { 0.0 } else { modified_zeta(zeta.get(t.m, t.l).f64(), t.k_prev, hp) };
            n as f64 * (predicted - t.dk as f64).abs()
        })
        .sum()
}

/// Fitness of `hp` on a validation slice.
pub fn fitness<T: Real>(hp: HyperParams, validation: &DatasetSlice, zeta: &ZetaMatrix<T>, spec: &WindowSpec) -> Result<f64, HyperoptError> {
    let terms = ValidationTerms::build(validation, spec)?;
    terms.check(zeta)?;
    Ok(fitness_terms(hp, &terms, zeta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub best: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaResult {
    pub best: HyperParams,
    pub best_fitness: f64,
    /// Generation 0 is the initial population.
    pub trace: Vec<TraceRow>,
    pub skipped_terms: u64,
    pub evaluations: u64,
}

type Scored = (HyperParams, f64);

fn rank(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1)
        .then(a.0.tau.total_cmp(&b.0.tau))
        .then(a.0.upsilon.total_cmp(&b.0.upsilon))
}

/// Runs the search on a validation slice.
pub fn run_ga<T: Real>(config: &GaConfig, validation: &DatasetSlice, zeta: &ZetaMatrix<T>, spec: &WindowSpec) -> Result<GaResult, HyperoptError> {
    let terms = ValidationTerms::build(validation, spec)?;
    run_ga_terms(config, &terms, zeta)
}

/// Runs the search on precomputed terms.
pub fn run_ga_terms<T: Real>(config: &GaConfig, terms: &ValidationTerms, zeta: &ZetaMatrix<T>) -> Result<GaResult, HyperoptError> {
    config.validate()?;
    terms.check(zeta)?;
    let (tau_range, ups_range) = config.ranges();
    let mut rng = rng::stream(config.seed);
    let score = |cands: Vec<HyperParams>| -> Vec<Scored> {
        cands.into_par_iter().map(|hp| (hp, fitness_terms(hp, terms, zeta))).collect()
    };

    let init: Vec<HyperParams> = (0..config.population)
        .map(|_| {
            let tau = tau_range.sample(&mut rng);
            let upsilon = ups_range.sample(&mut rng);
            HyperParams { tau, upsilon }
        })
        .collect();
    let mut evaluations = init.len() as u64;
    let mut pop = score(init);
    pop.sort_by(rank);
    let mut trace = vec![TraceRow { generation: 0, best_fitness: pop[0].1, best: pop[0].0 }];

    for generation in 1..=config.generations {
        let n = pop.len();
        let mut children = Vec::with_capacity(config.crossovers + config.mutations);
        for _ in 0..config.crossovers {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let r: f64 = rng.random();
            let (p, q) = (pop[a].0, pop[b].0);
            children.push(HyperParams {
                tau: r * p.tau + (1.0 - r) * q.tau,
                upsilon: r * p.upsilon + (1.0 - r) * q.upsilon,
            });
        }
        for _ in 0..config.mutations {
            let c = pop[rng.random_range(0..n)].0;
            let dt = config.mutation_step.sample(&mut rng);
            let du = config.mutation_step.sample(&mut rng);
            children.push(HyperParams { tau: c.tau + dt, upsilon: c.upsilon + du });
        }
        children.retain(|&c| config.in_bounds(c));
        evaluations += children.len() as u64;
        pop.extend(score(children));
        pop.sort_by(rank);
        pop.truncate(config.population);
        trace.push(TraceRow { generation, best_fitness: pop[0].1, best: pop[0].0 });
    }
    Ok(GaResult { best: pop[0].0, best_fitness: pop[0].1, trace, skipped_terms: terms.skipped, evaluations })
}

/// Writes `generation,best_fitness,best_tau,best_upsilon` rows.
pub fn write_trace_csv<W: Write>(w: W, trace: &[TraceRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["generation", "best_fitness", "best_tau", "best_upsilon"])?;
    for r in trace {
        out.write_record([r.generation.to_string(), r.best_fitness.to_string(), r.best.tau.to_string(), r.best.upsilon.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
