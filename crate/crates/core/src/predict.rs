//! Monte Carlo forecasting of publication and coauthor counts, and the
//! closed-form probability of gaining a new coauthor in a given year.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AuthorTimeline, DatasetSlice, WindowSpec};
use crate::hyperopt::HyperParams;
use statrs::function::gamma::gamma_lr;

use crate::rng::{self, derive, hash_label, poisson, poisson_pmf};
use crate::training::{LambdaMatrix, ZetaMatrix};
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum PredictError {
    #[error("historical publication count {h} outside 1..={max}")]
    HistoryOutOfRange { h: u64, max: usize },
    #[error("interval {0} is not covered by the rate matrices")]
    IntervalOutOfRange(usize),
    #[error("event probability {0} lies outside [0, 1]")]
    Inconsistent(f64),
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("no test member has a publication history")]
    NothingToSimulate,
}

/// Coauthor rate adjusted for the researcher's current coauthor count.
pub fn modified_zeta(zeta: f64, k_prev: u64, hp: HyperParams) -> f64 {
    if k_prev == 0 {
        hp.upsilon * zeta
    } else {
        hp.upsilon * (k_prev as f64).powf(hp.tau) * zeta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Keep every replicate path in the output.
    pub keep_trajectories: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { replicates: 100, seed: 0, keep_trajectories: false }
    }
}

/// Clamping events seen while simulating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Overflow {
    /// Steps where `h` exceeded `I` and the last λ row was used.
    pub history: u64,
    /// Steps where more than `M` publications were drawn and ζ row `M` was used.
    pub annual: u64,
}

impl std::ops::AddAssign for Overflow {
    fn add_assign(&mut self, o: Self) {
        self.history += o.history;
        self.annual += o.annual;
    }
}

/// One simulated year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Step {
    pub year: i32,
    pub h: u64,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forecast {
    pub author: String,
    /// `(h, k)` at the forecast origin.
    pub start: (u64, u64),
    pub years: Vec<i32>,
    pub mean_h: Vec<f64>,
    pub mean_k: Vec<f64>,
    pub q05_k: Vec<f64>,
    pub q95_k: Vec<f64>,
    /// Per-year `k` of replicate 0.
    pub first_replicate_k: Vec<u64>,
    pub trajectories: Option<Vec<Vec<Step>>>,
    pub replicates: usize,
    pub seed: u64,
}

impl Forecast {
    /// Index of `year` in the forecast horizon.
    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.iter().position(|&y| y == year)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub forecasts: Vec<Forecast>,
    /// Test members without any prior publication.
    pub skipped: Vec<String>,
    pub overflow: Overflow,
}

/// `(h, k)` of a researcher at the end of interval `j`.
pub fn state_at(tl: &AuthorTimeline, spec: &WindowSpec, j: usize) -> (u64, u64) {
    let t = spec.t(j);
    (
        u64::from(tl.pubs_between(spec.history_start - 1, t)),
        u64::from(tl.coauthors_through(t)),
    )
}

/// Rates needed to step one researcher through a run of intervals.
pub struct RateView<'a, T> {
    pub lambda: &'a LambdaMatrix<T>,
    pub zeta: &'a ZetaMatrix<T>,
    pub hp: HyperParams,
}

impl<T: Real> RateView<'_, T> {
    /// Advances `(h, k)` through intervals `first..=last`, one step each.
    pub fn run<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut h: u64,
        mut k: u64,
        intervals: std::ops::RangeInclusive<usize>,
        mut record: impl FnMut(usize, u64, u64),
    ) -> Overflow {
        let mut over = Overflow::default();
        let (max_i, max_m) = (self.lambda.rows as u64, self.zeta.rows as u64);
        for l in intervals {
            let row = if h > max_i {
                over.history += 1;
                max_i
            } else {
                h.max(1)
            };
            let r = poisson(rng, self.lambda.get(row as usize, l).f64());
            let u = if r > 0 {
                let m = if r > max_m {
                    over.annual += 1;
                    max_m
                } else {
                    r
                };
                poisson(rng, modified_zeta(self.zeta.get(m as usize, l).f64(), k, self.hp))
            } else {
                0
            };
            h += r;
            k += u;
            record(l, h, k);
        }
        over
    }
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

/// Forecasts every test member over intervals `X+1..=Z`.
pub fn simulate<T: Real>(
    test: &DatasetSlice,
    lambda: &LambdaMatrix<T>,
    zeta: &ZetaMatrix<T>,
    hp: HyperParams,
    spec: &WindowSpec,
    opts: SimulationOptions,
) -> Result<Simulation, PredictError> {
    if opts.replicates == 0 {
        return Err(PredictError::NoReplicates);
    }
    let (first, last) = (spec.test_origin + 1, spec.test_end);
    if last > lambda.cols || last > zeta.cols {
        return Err(PredictError::IntervalOutOfRange(last));
    }
    let view = RateView { lambda, zeta, hp };
    let years: Vec<i32> = (first..=last).map(|l| spec.t(l)).collect();
    let results: Vec<Result<(Forecast, Overflow), String>> = test
        .members
        .par_iter()
        .map(|tl| {
            let (h0, k0) = state_at(tl, spec, spec.test_origin);
            if h0 == 0 {
                return Err(tl.author.clone());
            }
            Ok(forecast_one(&view, &tl.author, h0, k0, first..=last, &years, opts))
        })
        .collect();
    let mut sim = Simulation { forecasts: Vec::new(), skipped: Vec::new(), overflow: Overflow::default() };
    for r in results {
        match r {
            Ok((f, o)) => {
                sim.overflow += o;
                sim.forecasts.push(f);
            }
            Err(author) => sim.skipped.push(author),
        }
    }
    if sim.forecasts.is_empty() {
        return Err(PredictError::NothingToSimulate);
    }
    Ok(sim)
}

fn forecast_one<T: Real>(
    view: &RateView<'_, T>,
    author: &str,
    h0: u64,
    k0: u64,
    intervals: std::ops::RangeInclusive<usize>,
    years: &[i32],
    opts: SimulationOptions,
) -> (Forecast, Overflow) {
    let n = years.len();
    let reps = opts.replicates;
    let key = hash_label(author);
    let mut hs = vec![vec![0u64; reps]; n];
    let mut ks = vec![vec![0u64; reps]; n];
    let mut paths = opts.keep_trajectories.then(|| Vec::with_capacity(reps));
    let mut over = Overflow::default();
    let first = *intervals.start();
    for rep in 0..reps {
        let mut rng = rng::stream(derive(opts.seed, &[key, rep as u64]));
        let mut path = Vec::new();
        over += view.run(&mut rng, h0, k0, intervals.clone(), |l, h, k| {
            hs[l - first][rep] = h;
            ks[l - first][rep] = k;
            if paths.is_some() {
                path.push(Step { year: years[l - first], h, k });
            }
        });
        if let Some(p) = paths.as_mut() {
            p.push(path);
        }
    }
    let mean = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / reps as f64;
    let mut q05 = Vec::with_capacity(n);
    let mut q95 = Vec::with_capacity(n);
    for row in &ks {
        let mut sorted = row.clone();
        sorted.sort_unstable();
        q05.push(quantile(&sorted, 0.05));
        q95.push(quantile(&sorted, 0.95));
    }
    let f = Forecast {
        author: author.to_string(),
        start: (h0, k0),
        years: years.to_vec(),
        mean_h: hs.iter().map(|r| mean(r)).collect(),
        mean_k: ks.iter().map(|r| mean(r)).collect(),
        q05_k: q05,
        q95_k: q95,
        first_replicate_k: ks.iter().map(|r| r[0]).collect(),
        trajectories: paths,
        replicates: reps,
        seed: opts.seed,
    };
    (f, over)
}

/// Writes `author,year,mean_h,mean_k,q05_k,q95_k` rows.
pub fn write_forecasts_csv<W: Write>(w: W, forecasts: &[Forecast]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["author", "year", "mean_h", "mean_k", "q05_k", "q95_k"])?;
    for f in forecasts {
        for (i, y) in f.years.iter().enumerate() {
            out.write_record([
                f.author.clone(),
                y.to_string(),
                f.mean_h[i].to_string(),
                f.mean_k[i].to_string(),
                f.q05_k[i].to_string(),
                f.q95_k[i].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `author,replicate,year,h,k` rows for forecasts that kept their paths.
pub fn write_trajectories_csv<W: Write>(w: W, forecasts: &[Forecast]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["author", "replicate", "year", "h", "k"])?;
    for f in forecasts {
        for (rep, path) in f.trajectories.iter().flatten().enumerate() {
            for s in path {
                out.write_record([f.author.clone(), rep.to_string(), s.year.to_string(), s.h.to_string(), s.k.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Form of the Poisson mass used in the event probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmfForm {
    /// `λ^x e^{-λ} / x!`.
    #[default]
    Standard,
    /// `x^λ e^{-λ} / x!`, kept for comparison only.
    PowerSwapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventProbability {
    pub p: f64,
    /// `P(X > M)` for the publication count, which the truncated sum leaves out.
    pub tail_mass: f64,
}

const EVENT_EPS: f64 = 1e-12;

/// Probability that a researcher in state `(h_prev, k_prev)` gains at least
/// one new coauthor in interval `l`.
pub fn event_probability<T: Real>(
    h_prev: u64,
    k_prev: u64,
    lambda: &LambdaMatrix<T>,
    zeta: &ZetaMatrix<T>,
    hp: HyperParams,
    l: usize,
    form: PmfForm,
) -> Result<EventProbability, PredictError> {
    if h_prev == 0 || h_prev as usize > lambda.rows {
        return Err(PredictError::HistoryOutOfRange { h: h_prev, max: lambda.rows });
    }
    if l == 0 || l > lambda.cols || l > zeta.cols {
        return Err(PredictError::IntervalOutOfRange(l));
    }
    let lam = lambda.get(h_prev as usize, l).f64();
    let zetas: Vec<f64> = (1..=zeta.rows).map(|m| modified_zeta(zeta.get(m, l).f64(), k_prev, hp)).collect();
    event_probability_raw(lam, &zetas, form)
}

/// Event probability from a publication rate and the modified coauthor
/// rates for `x = 1..=M` publications.
pub fn event_probability_raw(lambda: f64, zetas: &[f64], form: PmfForm) -> Result<EventProbability, PredictError> {
    let mass = |x: u64| match form {
        PmfForm::Standard => poisson_pmf(x, lambda),
        PmfForm::PowerSwapped => {
            let xf = x as f64;
            (lambda * xf.ln() - lambda - statrs::function::gamma::ln_gamma(xf + 1.0)).exp()
        }
    };
    let mut p = 1.0 - (-lambda).exp();
    for (i, &z) in zetas.iter().enumerate() {
        p -= mass(i as u64 + 1) * (-z).exp();
    }
    if !(-EVENT_EPS..=1.0 + EVENT_EPS).contains(&p) || p.is_nan() {
        return Err(PredictError::Inconsistent(p));
    }
    let tail_mass = if lambda > 0.0 { gamma_lr(zetas.len() as f64 + 1.0, lambda) } else { 0.0 };
    Ok(EventProbability { p: p.clamp(0.0, 1.0), tail_mass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub author: String,
    pub year: i32,
    /// Publications through the previous interval.
    pub h_prev: u64,
    pub p: f64,
    pub tail_mass: f64,
    /// Whether the researcher actually gained a coauthor.
    pub observed: bool,
}

/// Event probabilities for every test member and interval in `intervals`,
/// conditioned on the observed state at the end of the previous interval.
/// Researcher-years with no publication history are left out.
pub fn event_records<T: Real>(
    test: &DatasetSlice,
    lambda: &LambdaMatrix<T>,
    zeta: &ZetaMatrix<T>,
    hp: HyperParams,
    spec: &WindowSpec,
    intervals: std::ops::RangeInclusive<usize>,
    form: PmfForm,
) -> Result<Vec<EventRecord>, PredictError> {
    let per_author: Vec<Result<Vec<EventRecord>, PredictError>> = test
        .members
        .par_iter()
        .map(|tl| {
            let mut out = Vec::new();
            for l in intervals.clone() {
                let (h, k) = state_at(tl, spec, l - 1);
                if h == 0 {
                    continue;
                }
                let h_row = h.min(lambda.rows as u64);
                let e = event_probability(h_row, k, lambda, zeta, hp, l, form)?;
                out.push(EventRecord {
                    author: tl.author.clone(),
                    year: spec.t(l),
                    h_prev: h,
                    p: e.p,
                    tail_mass: e.tail_mass,
                    observed: spec.new_coauthors_in(tl, l) > 0,
                });
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_author {
        all.extend(r?);
    }
    Ok(all)
}

pub fn write_events_csv<W: Write>(w: W, records: &[EventRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["author", "year", "p", "tail_mass", "observed"])?;
    for r in records {
        out.write_record([
            r.author.clone(),
            r.year.to_string(),
            r.p.to_string(),
            r.tail_mass.to_string(),
            u8::from(r.observed).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
