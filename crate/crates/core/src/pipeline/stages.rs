//! Command-line stages. Each one reads its inputs from, and writes its
//! artifacts to, a single output directory.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::svg::{Chart, Mark, Series};
use super::{prepare, InputFormat, PipelineConfig, PipelineError, Prepared};
use crate::corpus::{filter_publications, parse_dblp_xml, parse_jsonl, write_jsonl, DatasetSlice, IngestSummary, ParseMode, Publication};
use crate::evaluate::{
    appendix_diagnostics, auc_report, distribution_report, grouped_autocorrelation, poisson_character_scan, trend_report, AucCounts, DistributionMode,
    ScanOptions,
};
use crate::hyperopt::{run_ga, write_trace_csv, GaConfig, HyperParams};
use crate::matrices::{compute_eta, compute_xi, GroupMeans};
use crate::predict::{event_records, simulate, write_events_csv, write_forecasts_csv, write_trajectories_csv, Simulation, SimulationOptions};
use crate::rng::stage_seed;
use crate::synthetic::write_truth_csv;
use crate::training::{fit_lambda, fit_zeta, CellSource, LambdaMatrix, ZetaMatrix};

pub const SYNTHETIC: &str = "synthetic.jsonl";
pub const TRUTH: &str = "truth.csv";
pub const CORPUS: &str = "corpus.jsonl";
pub const INGEST: &str = "ingest.json";
pub const ETA: &str = "eta.csv";
pub const ETA_COUNTS: &str = "eta_counts.csv";
pub const XI: &str = "xi.csv";
pub const XI_COUNTS: &str = "xi_counts.csv";
pub const SLICES: &str = "slices.json";
pub const LAMBDA: &str = "lambda.csv";
pub const LAMBDA_PROVENANCE: &str = "lambda_provenance.csv";
pub const LAMBDA_COEFFICIENTS: &str = "lambda_coefficients.csv";
pub const ZETA: &str = "zeta.csv";
pub const ZETA_COEFFICIENTS: &str = "zeta_coefficients.csv";
pub const HYPERPARAMS: &str = "hyperparams.json";
pub const GA_TRACE: &str = "ga_trace.csv";
pub const FORECASTS: &str = "forecasts.csv";
pub const EVENTS: &str = "events.csv";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const PREDICT: &str = "predict.json";
pub const TREND: &str = "trend.csv";
pub const TREND_FIT: &str = "trend_fit.csv";
pub const DISTRIBUTION: &str = "distribution.csv";
pub const AUC: &str = "auc.csv";
pub const SCAN: &str = "scan.csv";
pub const AUTOCORRELATION: &str = "autocorrelation.csv";
pub const APPENDIX: &str = "appendix.csv";
pub const EVALUATE: &str = "evaluate.json";
pub const REPORT: &str = "report.json";
pub const FIG_ZETA: &str = "zeta_significance.svg";
pub const FIG_TREND: &str = "trend.svg";
pub const FIG_DISTRIBUTION: &str = "distribution.svg";
pub const FIG_AUC: &str = "auc.svg";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Matrices,
    Train,
    Tune,
    Predict,
    Evaluate,
    Report,
    Synth,
}

impl Stage {
    /// Stages run by `pipeline`, in order, after the optional synth stage.
    pub const CHAIN: [Stage; 7] = [Stage::Ingest, Stage::Matrices, Stage::Train, Stage::Tune, Stage::Predict, Stage::Evaluate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Matrices => "matrices",
            Stage::Train => "train",
            Stage::Tune => "tune",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Synth => "synth",
        }
    }

    /// Stages that draw random numbers and so need a seed.
    pub fn stochastic(self) -> bool {
        matches!(self, Stage::Tune | Stage::Predict | Stage::Evaluate | Stage::Synth)
    }
}

#[derive(Debug, Deserialize)]
struct TunedFile {
    tau: f64,
    upsilon: f64,
}

/// One configured run against one output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    hash: String,
}

impl Run {
    pub fn new(cfg: PipelineConfig, out: PathBuf) -> Self {
        let hash = cfg.hash();
        Run { cfg, out, hash }
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn seed_label(&self) -> String {
        self.cfg.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    fn header(&self) -> String {
        format!("config={} seed={}", self.hash, self.seed_label())
    }

    fn meta(&self) -> Value {
        json!({ "config": self.hash, "seed": self.cfg.seed })
    }

    fn stage_seed(&self, stage: Stage) -> Result<u64, PipelineError> {
        Ok(stage_seed(self.cfg.require_seed()?, stage.name()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { path, source })
    }

    /// Writes a text artifact whose first line is the `#` header.
    fn write_text(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<(), PipelineError>) -> Result<(), PipelineError> {
        let mut buf = format!("# {}\n", self.header()).into_bytes();
        body(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    fn write_json(&self, name: &str, mut value: Value) -> Result<(), PipelineError> {
        let body = match &mut value {
            Value::Object(map) => {
                let mut out = serde_json::Map::new();
                out.insert("meta".into(), self.meta());
                out.append(map);
                Value::Object(out)
            }
            other => json!({ "meta": self.meta(), "value": other.take() }),
        };
        let mut text = serde_json::to_string_pretty(&body).expect("json values serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    fn open(&self, name: &str) -> Result<BufReader<File>, PipelineError> {
        open_input(&self.path(name))
    }

    fn read_json(&self, name: &str) -> Result<Value, PipelineError> {
        serde_json::from_reader(self.open(name)?).map_err(|e| PipelineError::Artifact { path: self.path(name), message: e.to_string() })
    }

    fn read_hyperparams(&self) -> Result<HyperParams, PipelineError> {
        let v = self.read_json(HYPERPARAMS)?;
        let t: TunedFile = serde_json::from_value(v).map_err(|e| PipelineError::Artifact { path: self.path(HYPERPARAMS), message: e.to_string() })?;
        Ok(HyperParams { tau: t.tau, upsilon: t.upsilon })
    }

    fn read_lambda(&self) -> Result<LambdaMatrix<f64>, PipelineError> {
        Ok(LambdaMatrix::read_values_csv(self.open(LAMBDA)?)?)
    }

    fn read_zeta(&self) -> Result<ZetaMatrix<f64>, PipelineError> {
        Ok(ZetaMatrix::read_values_csv(self.open(ZETA)?)?)
    }

    fn corpus(&self) -> Result<Vec<Publication>, PipelineError> {
        Ok(parse_jsonl(self.open(CORPUS)?, ParseMode::Strict)?.publications)
    }

    fn prepared(&self) -> Result<Prepared, PipelineError> {
        let pubs = self.corpus()?;
        prepare(&pubs, &self.cfg.window, self.cfg.input.focal_prefix.as_deref())
    }

    fn input_path(&self) -> Result<PathBuf, PipelineError> {
        if !self.cfg.input.path.as_os_str().is_empty() {
            Ok(self.cfg.input.path.clone())
        } else if self.cfg.synth.is_some() {
            Ok(self.path(SYNTHETIC))
        } else {
            Err(PipelineError::Config("input.path is not set and there is no [synth] section".into()))
        }
    }

    fn ensure_out(&self) -> Result<(), PipelineError> {
        fs::create_dir_all(&self.out).map_err(|source| PipelineError::Io { path: self.out.clone(), source })
    }

    /// Runs one stage and returns its summary line.
    pub fn stage(&self, stage: Stage) -> Result<String, PipelineError> {
        if stage.stochastic() {
            self.cfg.require_seed()?;
        }
        self.ensure_out()?;
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Matrices => self.matrices(),
            Stage::Train => self.train(),
            Stage::Tune => self.tune(),
            Stage::Predict => self.predict(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
            Stage::Synth => self.synth(),
        }
    }

    /// Every stage in order; synth first when the corpus is to be generated.
    pub fn pipeline(&self) -> Result<Vec<String>, PipelineError> {
        self.cfg.require_seed()?;
        let mut lines = Vec::new();
        if self.cfg.synth.is_some() && self.cfg.input.path.as_os_str().is_empty() {
            lines.push(self.stage(Stage::Synth)?);
        }
        for s in Stage::CHAIN {
            lines.push(self.stage(s)?);
        }
        Ok(lines)
    }

    fn synth(&self) -> Result<String, PipelineError> {
        let spec = self.cfg.synth.clone().ok_or_else(|| PipelineError::Config("the synth stage needs a [synth] section".into()))?;
        let spec = crate::synthetic::GenerativeSpec { seed: self.stage_seed(Stage::Synth)?, ..spec };
        let (pubs, truth) = spec.generate();
        self.write_text(SYNTHETIC, |b| write_jsonl(b, &pubs).map_err(|source| PipelineError::Io { path: self.path(SYNTHETIC), source }))?;
        self.write_text(TRUTH, |b| Ok(write_truth_csv(b, &truth)?))?;
        Ok(format!("synth: {} authors, {} publications", spec.authors, pubs.len()))
    }

    fn ingest(&self) -> Result<String, PipelineError> {
        let path = self.input_path()?;
        let reader = open_input(&path)?;
        let input = &self.cfg.input;
        let outcome = match input.format {
            InputFormat::Jsonl => parse_jsonl(reader, input.parse)?,
            InputFormat::DblpXml => parse_dblp_xml(reader, input.parse)?,
        };
        let parsed = outcome.publications.len();
        let pubs = filter_publications(outcome.publications, input.max_authors);
        let summary = IngestSummary {
            parsed,
            rejected: outcome.rejected,
            filtered: parsed - pubs.len(),
            retained: pubs.len(),
            diagnostics: outcome.diagnostics.len(),
        };
        self.write_text(CORPUS, |b| write_jsonl(b, &pubs).map_err(|source| PipelineError::Io { path: self.path(CORPUS), source }))?;
        self.write_json(INGEST, json!({ "summary": summary, "diagnostics": outcome.diagnostics }))?;
        Ok(format!(
            "ingest: kept {} of {} publications ({} rejected, {} over the author cap)",
            summary.retained, summary.parsed, summary.rejected, summary.filtered
        ))
    }

    fn matrices(&self) -> Result<String, PipelineError> {
        let prep = self.prepared()?;
        let w = &self.cfg.window;
        let eta = compute_eta::<f64>(&prep.training, w)?;
        let xi = compute_xi::<f64>(&prep.training, w)?;
        self.write_text(ETA, |b| Ok(eta.write_values_csv(b, "i/j")?))?;
        self.write_text(ETA_COUNTS, |b| Ok(eta.write_counts_csv(b, "i/j")?))?;
        self.write_text(XI, |b| Ok(xi.write_values_csv(b, "m/j")?))?;
        self.write_text(XI_COUNTS, |b| Ok(xi.write_counts_csv(b, "m/j")?))?;
        let slice = |s: &DatasetSlice| json!({ "members": s.len(), "anchor_total": s.anchor_total, "coverage": s.coverage() });
        self.write_json(
            SLICES,
            json!({
                "researchers": prep.timelines.len(),
                "training": slice(&prep.training),
                "validation": slice(&prep.validation),
                "test": slice(&prep.test),
            }),
        )?;
        Ok(format!(
            "matrices: {} researchers; training {}, validation {}, test {} (coverage {:.2}%)",
            prep.timelines.len(),
            prep.training.len(),
            prep.validation.len(),
            prep.test.len(),
            100.0 * prep.test.coverage()
        ))
    }

    fn train(&self) -> Result<String, PipelineError> {
        let eta = GroupMeans::<f64>::read_csv(self.open(ETA)?, self.open(ETA_COUNTS)?)?;
        let xi = GroupMeans::<f64>::read_csv(self.open(XI)?, self.open(XI_COUNTS)?)?;
        let w = &self.cfg.window;
        let lambda = fit_lambda(&eta, w, self.cfg.train)?;
        let zeta = fit_zeta(&xi, w, self.cfg.train)?;
        self.write_text(LAMBDA, |b| Ok(lambda.write_values_csv(b)?))?;
        self.write_text(LAMBDA_PROVENANCE, |b| Ok(lambda.write_sources_csv(b)?))?;
        self.write_text(LAMBDA_COEFFICIENTS, |b| Ok(lambda.write_coefficients_csv(b)?))?;
        self.write_text(ZETA, |b| Ok(zeta.write_values_csv(b)?))?;
        self.write_text(ZETA_COEFFICIENTS, |b| Ok(zeta.write_coefficients_csv(b)?))?;
        let significant = zeta.significance.iter().filter(|p| p.is_some_and(|p| p < 0.05)).count();
        let observed = (1..=lambda.rows)
            .flat_map(|i| (1..=lambda.cols).map(move |j| (i, j)))
            .filter(|&(i, j)| lambda.source(i, j) == CellSource::ObservedFit)
            .count();
        Ok(format!(
            "train: λ {}x{} ({} cells from row fits, {} fallback rows, {} fallback columns); ζ {}x{} ({} of {} slopes significant, {} rows borrowed)",
            lambda.rows,
            lambda.cols,
            observed,
            lambda.fallback_rows.len(),
            lambda.fallback_cols.len(),
            zeta.rows,
            zeta.cols,
            significant,
            zeta.rows,
            zeta.borrowed.len()
        ))
    }

    fn tune(&self) -> Result<String, PipelineError> {
        let prep = self.prepared()?;
        let zeta = self.read_zeta()?;
        let config = GaConfig { seed: self.stage_seed(Stage::Tune)?, ..self.cfg.tune };
        let result = run_ga(&config, &prep.validation, &zeta, &self.cfg.window)?;
        self.write_text(GA_TRACE, |b| Ok(write_trace_csv(b, &result.trace)?))?;
        self.write_json(
            HYPERPARAMS,
            json!({
                "tau": result.best.tau,
                "upsilon": result.best.upsilon,
                "fitness": result.best_fitness,
                "generations": config.generations,
                "evaluations": result.evaluations,
                "skipped_terms": result.skipped_terms,
                "validation_researchers": prep.validation.len(),
            }),
        )?;
        Ok(format!("tune: τ = {:.4}, υ = {:.4}, fitness {:.3}", result.best.tau, result.best.upsilon, result.best_fitness))
    }

    fn simulation(&self, prep: &Prepared, lambda: &LambdaMatrix<f64>, zeta: &ZetaMatrix<f64>, hp: HyperParams, keep: bool) -> Result<Simulation, PipelineError> {
        let opts = SimulationOptions {
            replicates: self.cfg.predict.replicates,
            seed: self.stage_seed(Stage::Predict)?,
            keep_trajectories: keep,
        };
        Ok(simulate(&prep.test, lambda, zeta, hp, &self.cfg.window, opts)?)
    }

    fn forecast_intervals(&self) -> std::ops::RangeInclusive<usize> {
        self.cfg.window.test_origin + 1..=self.cfg.window.test_end
    }

    fn predict(&self) -> Result<String, PipelineError> {
        let prep = self.prepared()?;
        let (lambda, zeta, hp) = (self.read_lambda()?, self.read_zeta()?, self.read_hyperparams()?);
        let keep = self.cfg.predict.keep_trajectories;
        let sim = self.simulation(&prep, &lambda, &zeta, hp, keep)?;
        let events = event_records(&prep.test, &lambda, &zeta, hp, &self.cfg.window, self.forecast_intervals(), self.cfg.predict.pmf_form)?;
        self.write_text(FORECASTS, |b| Ok(write_forecasts_csv(b, &sim.forecasts)?))?;
        self.write_text(EVENTS, |b| Ok(write_events_csv(b, &events)?))?;
        if keep {
            self.write_text(TRAJECTORIES, |b| Ok(write_trajectories_csv(b, &sim.forecasts)?))?;
        }
        self.write_json(
            PREDICT,
            json!({
                "researchers": sim.forecasts.len(),
                "skipped": sim.skipped,
                "replicates": self.cfg.predict.replicates,
                "overflow": sim.overflow,
                "events": events.len(),
            }),
        )?;
        Ok(format!(
            "predict: {} researchers x {} replicates, {} skipped, {} clamped steps",
            sim.forecasts.len(),
            self.cfg.predict.replicates,
            sim.skipped.len(),
            sim.overflow.history + sim.overflow.annual
        ))
    }

    fn evaluate(&self) -> Result<String, PipelineError> {
        let prep = self.prepared()?;
        let w = &self.cfg.window;
        let ev = self.cfg.evaluate;
        let (lambda, zeta, hp) = (self.read_lambda()?, self.read_zeta()?, self.read_hyperparams()?);
        let keep = self.cfg.predict.keep_trajectories || ev.distribution == DistributionMode::Pooled;
        let sim = self.simulation(&prep, &lambda, &zeta, hp, keep)?;
        let trend = trend_report(&prep.test, &sim.forecasts, w)?;
        let dist = distribution_report(&prep.test, &sim.forecasts, w, ev.distribution)?;
        let (auc, _) = auc_report(&prep.test, &lambda, &zeta, hp, w, self.forecast_intervals(), self.cfg.predict.pmf_form)?;
        let scan_opts = ScanOptions { min_size: ev.scan_min_size, bootstrap: ev.scan_bootstrap, seed: self.stage_seed(Stage::Evaluate)?, ..Default::default() };
        let scan = poisson_character_scan(&prep.training, w, 1..=w.fit_intervals, scan_opts);
        let autocorr = grouped_autocorrelation(&prep.test, w, w.test_origin, w.test_end, ev.max_lag);
        let appendix = appendix_diagnostics(&prep.training, w, 1..=w.fit_intervals);

        self.write_text(TREND, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["k0", "size", "year", "observed", "predicted", "observed_new", "predicted_new"])?;
            for g in &trend.groups {
                for (i, year) in trend.years.iter().enumerate() {
                    out.write_record([
                        g.k0.to_string(),
                        g.size.to_string(),
                        year.to_string(),
                        g.observed[i].to_string(),
                        g.predicted[i].to_string(),
                        g.observed_new[i].to_string(),
                        g.predicted_new[i].to_string(),
                    ])?;
                }
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(TREND_FIT, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["year", "s1", "s2"])?;
            for (i, year) in trend.years.iter().enumerate() {
                out.write_record([year.to_string(), opt(trend.s1[i]), opt(trend.s2[i])])?;
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(DISTRIBUTION, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["year", "n_combined", "statistic", "p_value"])?;
            for y in &dist.years {
                out.write_record([y.year.to_string(), y.ks.n.to_string(), y.ks.statistic.to_string(), y.ks.p_value.to_string()])?;
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(AUC, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["scope", "key", "m1", "m2", "m3", "m", "auc"])?;
            let mut row = |scope: &str, key: String, c: &AucCounts| {
                out.write_record([scope.to_string(), key, c.m1.to_string(), c.m2.to_string(), c.m3.to_string(), c.m.to_string(), opt(c.auc())])
            };
            row("overall", String::new(), &auc.overall)?;
            for (y, c) in &auc.by_year {
                row("year", y.to_string(), c)?;
            }
            for (h, c) in &auc.by_history {
                row("history", h.to_string(), c)?;
            }
            row("history_overflow", String::new(), &auc.overflow)?;
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(SCAN, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["year", "m", "l", "size", "mean", "statistic", "p_value"])?;
            for c in &scan.cells {
                out.write_record([
                    c.year.to_string(),
                    c.m.to_string(),
                    c.l.map(|l| l.to_string()).unwrap_or_default(),
                    c.size.to_string(),
                    c.mean.to_string(),
                    opt(c.statistic),
                    opt(c.p_value),
                ])?;
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(AUTOCORRELATION, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["k0", "size", "constant", "q", "lag", "mean"])?;
            for g in &autocorr.groups {
                for (lag, m) in g.mean.iter().enumerate() {
                    out.write_record([g.k0.to_string(), g.size.to_string(), g.constant.to_string(), g.q.to_string(), (lag + 1).to_string(), m.to_string()])?;
                }
            }
            for (lag, m) in autocorr.weighted.iter().enumerate() {
                out.write_record(["all".to_string(), String::new(), String::new(), "1".to_string(), (lag + 1).to_string(), m.to_string()])?;
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        self.write_text(APPENDIX, |b| {
            let mut out = csv::Writer::from_writer(b);
            out.write_record(["year", "active", "single_publication", "spearman_rho", "spearman_p"])?;
            for y in &appendix.years {
                out.write_record([
                    y.year.to_string(),
                    y.active.to_string(),
                    opt(y.single_publication),
                    opt(y.spearman.map(|s| s.0)),
                    opt(y.spearman.map(|s| s.1)),
                ])?;
            }
            out.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;

        let ks_pass = dist.years.iter().filter(|y| y.ks.p_value > 0.05).count();
        let ks_fraction = ks_pass as f64 / dist.years.len().max(1) as f64;
        let s2_min = trend.s2.iter().flatten().copied().reduce(f64::min);
        self.write_json(
            EVALUATE,
            json!({
                "hyperparams": hp,
                "researchers": trend.researchers,
                "years": trend.years,
                "s1": trend.s1,
                "s2": trend.s2,
                "s2_min": s2_min,
                "ks_p_values": dist.years.iter().map(|y| y.ks.p_value).collect::<Vec<_>>(),
                "ks_pass_fraction": ks_fraction,
                "auc": auc.overall.auc(),
                "auc_counts": auc.overall,
                "auc_by_history": auc.by_history.iter().map(|(h, c)| json!({ "h": h, "auc": c.auc(), "m": c.m })).collect::<Vec<_>>(),
                "scan": { "tested": scan.tested, "rejected": scan.rejected, "insufficient": scan.insufficient, "largest_group": scan.largest_group },
                "autocorrelation": autocorr.weighted,
                "trend_groups": trend.groups,
                "distribution": dist.years.iter().map(|y| json!({ "year": y.year, "observed": y.observed, "predicted": y.predicted })).collect::<Vec<_>>(),
            }),
        )?;
        Ok(format!(
            "evaluate: min s2 {}, KS pass {}/{} years, AUC {}",
            s2_min.map_or("n/a".into(), |v| format!("{v:.4}")),
            ks_pass,
            dist.years.len(),
            auc.overall.auc().map_or("n/a".into(), |v| format!("{v:.4}"))
        ))
    }

    fn report(&self) -> Result<String, PipelineError> {
        let eval = self.read_json(EVALUATE)?;
        let tuned = self.read_json(HYPERPARAMS)?;
        let slices = self.read_json(SLICES)?;
        let zeta_rows = read_zeta_significance(&self.path(ZETA_COEFFICIENTS), self.open(ZETA_COEFFICIENTS)?)?;
        let significant: Vec<usize> = zeta_rows.iter().filter(|r| r.1.is_some_and(|p| p < 0.05)).map(|r| r.0).collect();
        let headline = json!({
            "tau": tuned["tau"],
            "upsilon": tuned["upsilon"],
            "fitness": tuned["fitness"],
            "test_coverage": slices["test"]["coverage"],
            "researchers": { "training": slices["training"]["members"], "validation": slices["validation"]["members"], "test": slices["test"]["members"] },
            "zeta_significant_rows": significant,
            "s1": eval["s1"],
            "s2": eval["s2"],
            "s2_min": eval["s2_min"],
            "ks_pass_fraction": eval["ks_pass_fraction"],
            "auc": eval["auc"],
            "scan": eval["scan"],
            "autocorrelation": eval["autocorrelation"],
        });
        self.write_json(REPORT, json!({ "headline": headline }))?;

        let header = self.header();
        let figs = [
            (FIG_ZETA, zeta_chart(&zeta_rows)),
            (FIG_TREND, trend_chart(&eval)),
            (FIG_DISTRIBUTION, distribution_chart(&eval)),
            (FIG_AUC, auc_chart(&eval)),
        ];
        for (name, chart) in &figs {
            self.write_bytes(name, chart.render(&header).as_bytes())?;
        }
        Ok(format!(
            "report: τ = {}, υ = {}, AUC {}, {} figures",
            tuned["tau"],
            tuned["upsilon"],
            eval["auc"],
            figs.len()
        ))
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|_| PipelineError::MissingFile(path.to_path_buf()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Deserialize, Serialize)]
struct ZetaCoefficientRow {
    m: usize,
    chi2_p_value: Option<f64>,
}

fn read_zeta_significance(path: &Path, r: impl std::io::Read) -> Result<Vec<(usize, Option<f64>)>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut rows = Vec::new();
    for rec in reader.deserialize::<ZetaCoefficientRow>() {
        let rec = rec.map_err(|e| PipelineError::Artifact { path: path.to_path_buf(), message: e.to_string() })?;
        rows.push((rec.m, rec.chi2_p_value));
    }
    Ok(rows)
}

fn zeta_chart(rows: &[(usize, Option<f64>)]) -> Chart {
    Chart {
        title: "Time-slope significance of the coauthor rate".into(),
        x_label: "publications in the year (m)".into(),
        y_label: "p-value".into(),
        series: vec![Series {
            name: "chi-square p-value".into(),
            points: rows.iter().filter_map(|&(m, p)| p.map(|p| (m as f64, p))).collect(),
            mark: Mark::Bars,
        }],
        reference: Some(0.05),
        ..Default::default()
    }
}

fn trend_chart(eval: &Value) -> Chart {
    let mut points = Vec::new();
    if let Some(groups) = eval["trend_groups"].as_array() {
        for g in groups {
            let last = |key: &str| g[key].as_array().and_then(|v| v.last()).and_then(Value::as_f64);
            if let (Some(o), Some(p)) = (last("observed"), last("predicted")) {
                points.push((o, p));
            }
        }
    }
    let year = eval["years"].as_array().and_then(|v| v.last()).cloned().unwrap_or(Value::Null);
    Chart {
        title: format!("Mean coauthors by starting group, {year}"),
        x_label: "observed".into(),
        y_label: "predicted".into(),
        series: vec![Series { name: "group mean".into(), points, mark: Mark::Points }],
        diagonal: true,
        ..Default::default()
    }
}

fn histogram_points(h: &Value) -> Vec<(f64, f64)> {
    let Some(map) = h.as_object() else { return Vec::new() };
    let total: f64 = map.values().filter_map(Value::as_f64).sum();
    let mut pts: Vec<(f64, f64)> = map
        .iter()
        .filter_map(|(k, v)| Some((k.parse::<f64>().ok()?, v.as_f64()?)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    pts.into_iter()
        .map(|(k, c)| {
            acc += c;
            (k, acc / total.max(1.0))
        })
        .collect()
}

fn distribution_chart(eval: &Value) -> Chart {
    let last = eval["distribution"].as_array().and_then(|v| v.last()).cloned().unwrap_or(Value::Null);
    Chart {
        title: format!("Coauthor count distribution, {}", last["year"]),
        x_label: "coauthors".into(),
        y_label: "cumulative share".into(),
        series: vec![
            Series { name: "observed".into(), points: histogram_points(&last["observed"]), mark: Mark::Line },
            Series { name: "predicted".into(), points: histogram_points(&last["predicted"]), mark: Mark::Line },
        ],
        ..Default::default()
    }
}

fn auc_chart(eval: &Value) -> Chart {
    let points = eval["auc_by_history"]
        .as_array()
        .map(|v| v.iter().filter_map(|r| Some((r["h"].as_f64()?, r["auc"].as_f64()?))).collect())
        .unwrap_or_default();
    Chart {
        title: "Collaboration-event accuracy by publication history".into(),
        x_label: "publications to date".into(),
        y_label: "AUC".into(),
        series: vec![Series { name: "AUC".into(), points, mark: Mark::Line }],
        reference: Some(0.5),
        ..Default::default()
    }
}
