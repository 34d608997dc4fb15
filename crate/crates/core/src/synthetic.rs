//! Corpora drawn from the forecasting model itself.
//!
//! Each focal author starts with a seed year of publications and then, year by
//! year, draws a publication count from λ and, when it is positive, a count of
//! brand-new coauthors from the modified ζ. The draws are materialized as
//! publication records so the normal ingest path can be run on them, and the
//! latent counts are returned alongside for exact comparisons.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Publication, WindowSpec};
use crate::hyperopt::HyperParams;
use crate::predict::modified_zeta;
use crate::rng::{self, derive, poisson};
use crate::training::{LambdaMatrix, ZetaMatrix};

/// Publication rate as a function of `(h, year)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaSurface {
    Constant { rate: f64 },
    /// `exp(a + b (year - origin)) h^nu`.
    Parametric { a: f64, b: f64, nu: f64, origin: i32 },
}

/// Coauthor rate as a function of `(m, year)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ZetaSurface {
    Constant { rate: f64 },
    /// `c m exp(eps (year - origin))`.
    Parametric { c: f64, eps: f64, origin: i32 },
}

impl LambdaSurface {
    pub fn at(&self, h: u64, year: i32) -> f64 {
        match *self {
            LambdaSurface::Constant { rate } => rate,
            LambdaSurface::Parametric { a, b, nu, origin } => (a + b * f64::from(year - origin)).exp() * (h.max(1) as f64).powf(nu),
        }
    }
}

impl ZetaSurface {
    pub fn at(&self, m: u64, year: i32) -> f64 {
        match *self {
            ZetaSurface::Constant { rate } => rate,
            ZetaSurface::Parametric { c, eps, origin } => c * m as f64 * (eps * f64::from(year - origin)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerativeSpec {
    pub authors: usize,
    /// Career start years are drawn uniformly from this inclusive range.
    pub first_year: (i32, i32),
    /// Last simulated year.
    pub last_year: i32,
    pub lambda: LambdaSurface,
    pub zeta: ZetaSurface,
    pub hp: HyperParams,
    /// Publications in the career start year.
    pub initial_pubs: u32,
    /// Mean of the Poisson number of coauthors in the start year. When unset
    /// the start year draws from the model like any other year.
    pub initial_coauthors: Option<f64>,
    /// Add a known coauthor to publications that would otherwise be solo.
    pub padding: bool,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GenerativeSpec {
    fn default() -> Self {
        GenerativeSpec {
            authors: 1000,
            first_year: (1990, 2000),
            last_year: 2010,
            lambda: LambdaSurface::Constant { rate: 1.0 },
            zeta: ZetaSurface::Constant { rate: 1.0 },
            hp: HyperParams { tau: 0.0, upsilon: 1.0 },
            initial_pubs: 1,
            initial_coauthors: None,
            padding: true,
            seed: 0,
        }
    }
}

/// Latent yearly increments of one author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrueStep {
    pub year: i32,
    pub dh: u64,
    pub dk: u64,
}

pub type GroundTruth = BTreeMap<String, Vec<TrueStep>>;

pub fn focal_name(index: usize) -> String {
    format!("a{index:06}")
}

impl GenerativeSpec {
    /// Model-consistent λ matrix for a window with annual cutpoints.
    pub fn lambda_matrix(&self, window: &WindowSpec) -> LambdaMatrix<f64> {
        LambdaMatrix::from_fn(window.max_history, window.intervals(), |i, j| self.lambda.at(i as u64, window.t(j)))
    }

    pub fn zeta_matrix(&self, window: &WindowSpec) -> ZetaMatrix<f64> {
        ZetaMatrix::from_fn(window.max_annual, window.intervals(), |m, j| self.zeta.at(m as u64, window.t(j)))
    }

    fn author<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> (Vec<Publication>, Vec<TrueStep>) {
        let name = focal_name(index);
        let start = rng.random_range(self.first_year.0..=self.first_year.1);
        let mut known: Vec<String> = Vec::new();
        let mut pubs = Vec::new();
        let mut steps = Vec::new();
        let (mut h, mut k) = (0u64, 0u64);
        for year in start..=self.last_year {
            let (dh, dk) = if year == start {
                let dh = u64::from(self.initial_pubs);
                let rate = self.initial_coauthors.unwrap_or_else(|| modified_zeta(self.zeta.at(dh.max(1), year), 0, self.hp));
                (dh, if dh > 0 { poisson(rng, rate) } else { 0 })
            } else {
                let dh = poisson(rng, self.lambda.at(h, year));
                let dk = if dh > 0 { poisson(rng, modified_zeta(self.zeta.at(dh, year), k, self.hp)) } else { 0 };
                (dh, dk)
            };
            steps.push(TrueStep { year, dh, dk });
            if dh > 0 {
                let mut lists: Vec<Vec<String>> = vec![vec![name.clone()]; dh as usize];
                for n in 0..dk {
                    lists[(n % dh) as usize].push(format!("c{index:06}_{}", k + n));
                }
                if self.padding && !known.is_empty() {
                    for list in lists.iter_mut().filter(|l| l.len() == 1) {
                        list.push(known[rng.random_range(0..known.len())].clone());
                    }
                }
                known.extend((0..dk).map(|n| format!("c{index:06}_{}", k + n)));
                for (p, authors) in lists.into_iter().enumerate() {
                    pubs.push(Publication { id: format!("{name}/{year}/{p}"), year, authors, venue: None });
                }
            }
            h += dh;
            k += dk;
        }
        (pubs, steps)
    }

    /// Draws the corpus. Author `i` uses its own substream, so the output
    /// does not depend on scheduling.
    pub fn generate(&self) -> (Vec<Publication>, GroundTruth) {
        let per_author: Vec<(Vec<Publication>, Vec<TrueStep>)> = (0..self.authors)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(derive(self.seed, &[i as u64]));
                self.author(i, &mut rng)
            })
            .collect();
        let mut pubs = Vec::new();
        let mut truth = GroundTruth::new();
        for (i, (p, steps)) in per_author.into_iter().enumerate() {
            pubs.extend(p);
            truth.insert(focal_name(i), steps);
        }
        (pubs, truth)
    }
}

/// Writes `author,year,dh,dk` rows.
pub fn write_truth_csv<W: Write>(w: W, truth: &GroundTruth) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["author", "year", "dh", "dk"])?;
    for (author, steps) in truth {
        for s in steps {
            out.write_record([author.clone(), s.year.to_string(), s.dh.to_string(), s.dk.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_timelines;
    use crate::rng::poisson_pmf;

    #[test]
    fn vanishing_rate_stops_after_first_year() {
        let spec = GenerativeSpec {
            authors: 50,
            lambda: LambdaSurface::Constant { rate: 1e-300 },
            ..Default::default()
        };
        let (pubs, truth) = spec.generate();
        for steps in truth.values() {
            assert!(steps[1..].iter().all(|s| s.dh == 0 && s.dk == 0));
        }
        assert_eq!(pubs.len(), 50);
    }

    #[test]
    fn timelines_reproduce_latent_counts() {
        for padding in [false, true] {
            let spec = GenerativeSpec {
                authors: 200,
                lambda: LambdaSurface::Parametric { a: -0.5, b: 0.02, nu: 0.4, origin: 1990 },
                zeta: ZetaSurface::Parametric { c: 0.8, eps: 0.01, origin: 1990 },
                hp: HyperParams { tau: 0.2, upsilon: 0.7 },
                padding,
                seed: 17,
                ..Default::default()
            };
            let (pubs, truth) = spec.generate();
            let mut tls = build_timelines(&pubs, 1990, 2010).unwrap();
            tls.retain_prefix("a");
            assert_eq!(tls.len(), 200);
            for (author, steps) in &truth {
                let tl = tls.get(author).unwrap();
                for s in steps {
                    assert_eq!(u64::from(tl.pubs_in_year(s.year)), s.dh, "{author} {}", s.year);
                    assert_eq!(u64::from(tl.new_coauthors_in_year(s.year)), s.dk, "{author} {}", s.year);
                }
            }
        }
    }

    #[test]
    fn constant_rates_match_enumeration() {
        // Δk is Poisson(1) when Δh > 0, so E[Δk] = P(Δh > 0).
        let spec = GenerativeSpec { authors: 20000, first_year: (2000, 2000), last_year: 2010, seed: 3, ..Default::default() };
        let (_, truth) = spec.generate();
        let steps: Vec<&TrueStep> = truth.values().flat_map(|s| s.iter().skip(1)).collect();
        let n = steps.len() as f64;
        let mean_h = steps.iter().map(|s| s.dh as f64).sum::<f64>() / n;
        let mean_k = steps.iter().map(|s| s.dk as f64).sum::<f64>() / n;
        let mut ek = 0.0;
        let mut ek2 = 0.0;
        for r in 1..60 {
            let p = poisson_pmf(r, 1.0);
            ek += p * 1.0;
            ek2 += p * 2.0;
        }
        let var_k = ek2 - ek * ek;
        assert!((mean_h - 1.0).abs() < 3.0 * (1.0 / n).sqrt());
        assert!((mean_k - ek).abs() < 3.0 * (var_k / n).sqrt(), "{mean_k} vs {ek}");
    }

    #[test]
    fn deterministic_under_any_pool() {
        let spec = GenerativeSpec { authors: 100, seed: 5, ..Default::default() };
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| spec.generate());
        let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| spec.generate());
        assert_eq!(a, b);
    }

    #[test]
    fn generated_publications_are_well_formed() {
        let spec = GenerativeSpec { authors: 100, seed: 9, ..Default::default() };
        let (pubs, _) = spec.generate();
        let ids: std::collections::BTreeSet<_> = pubs.iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids.len(), pubs.len());
        for p in &pubs {
            assert!(p.authors[0].starts_with('a'));
            let distinct: std::collections::BTreeSet<_> = p.authors.iter().collect();
            assert_eq!(distinct.len(), p.authors.len());
        }
    }
}
