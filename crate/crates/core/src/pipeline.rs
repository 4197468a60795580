//! Batch orchestration behind the command-line tool.
//!
//! Layout under the output directory:
//!
//! ```text
//! config.resolved.toml
//! calibration.csv
//! ensemble_summary.csv
//! failures.csv
//! report.txt
//! N<k>/gap_trace.csv
//! N<k>/populations.csv
//! N<k>/instances_<kind>_<sigma>.csv
//! N<k>/dmin_hist_<kind>_<sigma>.csv
//! N<k>/scatter_<kind>_<sigma>.csv      (conditions ensemble only)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::calibration::{self, CalibrationRecord};
use crate::conditions::{self, ScatterRow};
use crate::config::ExperimentConfig;
use crate::ensemble::{self, DisorderSpec, EnsembleOptions, EnsembleSummary, ParamKind};
use crate::error::{Error, Result};
use crate::io::{read_csv, CsvWriter};
use crate::model::{ChainParams, Schedule};
use crate::propagation::{eigenbasis_populations, Protocol, StepKernel};
use crate::spectrum::gap_trace;
use crate::stats;

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "ISING_AQC_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Calibrate,
    Spectrum,
    Evolve,
    Ensemble,
    Conditions,
    Report,
    All,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
}

/// Worker count from the flag, else the environment, else the config.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>, config: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return positive_workers(w);
    }
    if let Some(v) = env {
        let w: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}: not a worker count: {v:?}")))?;
        return positive_workers(w);
    }
    Ok(config.unwrap_or(1))
}

fn positive_workers(w: usize) -> Result<usize> {
    if w == 0 {
        return Err(Error::Config("workers: must be positive".into()));
    }
    Ok(w)
}

/// Filename fragment for a relative standard deviation.
pub fn sigma_tag(sigma: f64) -> String {
    format!("{sigma}")
}

fn chain_dir(out: &Path, n: usize) -> PathBuf {
    out.join(format!("N{n}"))
}

impl Pipeline {
    pub fn new(config: ExperimentConfig, out: PathBuf, workers: usize) -> Result<Self> {
        config.validate()?;
        positive_workers(workers)?;
        Ok(Self { config, out, workers })
    }

    fn ideal(&self, n: usize) -> Result<ChainParams> {
        let i = &self.config.ideal;
        ChainParams::uniform(n, i.lambda, i.h, i.j)
    }

    fn schedule(&self, rec: &CalibrationRecord) -> Result<Schedule> {
        rec.schedule(self.config.epsilon0)
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let reuse = self.calibration_reusable();
        // report only reads, so it must not replace the echo of the run it reports on
        if stage != Stage::Report {
            std::fs::write(self.out.join("config.resolved.toml"), self.config.resolved_echo()?)?;
        }
        match stage {
            Stage::Calibrate => self.calibrate().map(drop),
            Stage::Spectrum => {
                let recs = self.calibration_records(!reuse)?;
                self.spectrum(&recs)
            }
            Stage::Evolve => {
                let recs = self.calibration_records(!reuse)?;
                self.evolve(&recs)
            }
            Stage::Ensemble => {
                let recs = self.calibration_records(!reuse)?;
                self.ensembles(&recs)
            }
            Stage::Conditions => self.conditions_only(reuse),
            Stage::Report => self.report().map(drop),
            Stage::All => {
                let recs = self.calibrate()?;
                self.spectrum(&recs)?;
                self.evolve(&recs)?;
                self.ensembles(&recs)?;
                self.report().map(drop)
            }
        }
    }

    /// Calibrate every N in `n_list` and write `calibration.csv`.
    pub fn calibrate(&self) -> Result<Vec<CalibrationRecord>> {
        let opts = self.config.calibration_options();
        let mut recs = Vec::new();
        for &n in &self.config.n_list {
            log::info!("calibrating N={n}");
            recs.push(calibration::calibrate_with(n, &opts)?);
        }
        calibration::save_table(&recs, &self.out.join("calibration.csv"))?;
        Ok(recs)
    }

    /// Reuse `calibration.csv` when it covers `n_list`, else recalibrate.
    /// Whether an existing calibration.csv was produced with the same
    /// calibration inputs, judged from the previous config echo.
    fn calibration_reusable(&self) -> bool {
        std::fs::read_to_string(self.out.join("config.resolved.toml"))
            .ok()
            .and_then(|s| ExperimentConfig::from_toml_str(&s).ok())
            .is_some_and(|prev| prev.calibration_options() == self.config.calibration_options())
    }

    fn calibration_records(&self, force: bool) -> Result<Vec<CalibrationRecord>> {
        let path = self.out.join("calibration.csv");
        if !force && path.exists() {
            let stored = calibration::load_table(&path)?;
            let by_n: BTreeMap<usize, (f64, f64)> = stored.iter().map(|r| (r.0, (r.1, r.3))).collect();
            if self.config.n_list.iter().all(|n| by_n.contains_key(n)) {
                log::info!("reusing {}", path.display());
                let opts = self.config.calibration_options();
                let recs = self
                    .config
                    .n_list
                    .iter()
                    .map(|&n| {
                        let (tf, dmin) = by_n[&n];
                        calibration::record_from_stored(n, tf, dmin, &opts)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if recs.iter().all(|r| r.achieved_fidelity >= opts.target) {
                    return Ok(recs);
                }
                log::warn!("stored t_f misses the target fidelity; recalibrating");
            }
        }
        self.calibrate()
    }

    fn record_for(&self, recs: &[CalibrationRecord], n: usize) -> Result<CalibrationRecord> {
        match recs.iter().find(|r| r.n_qubits == n) {
            Some(r) => Ok(*r),
            None => {
                log::info!("calibrating N={n} for the conditions ensemble");
                calibration::calibrate_with(n, &self.config.calibration_options())
            }
        }
    }

    /// Ideal-chain gap traces.
    pub fn spectrum(&self, recs: &[CalibrationRecord]) -> Result<()> {
        for rec in recs {
            let n = rec.n_qubits;
            log::info!("gap trace N={n}");
            let p = self.ideal(n)?;
            let sched = self.schedule(rec)?;
            let mut trace = gap_trace(&p, &sched, self.config.grid.trace_points, self.config.levels_for(n))?;
            trace.refine(&p, &sched)?;
            trace.save_csv(&chain_dir(&self.out, n).join("gap_trace.csv"))?;
        }
        Ok(())
    }

    /// Ideal-chain eigenbasis population traces.
    pub fn evolve(&self, recs: &[CalibrationRecord]) -> Result<()> {
        for rec in recs {
            let n = rec.n_qubits;
            log::info!("population trace N={n}");
            let p = self.ideal(n)?;
            let sched = self.schedule(rec)?;
            let pops = eigenbasis_populations(
                &p,
                &sched,
                rec.steps,
                self.config.grid.population_samples,
                self.config.levels_for(n),
            )?;
            pops.save_csv(&chain_dir(&self.out, n).join("populations.csv"))?;
        }
        Ok(())
    }

    fn ensemble_options(&self, rec: &CalibrationRecord) -> EnsembleOptions {
        EnsembleOptions {
            steps: rec.steps,
            scan_points: self.config.grid.ensemble_points,
            trace_points: self.config.grid.trace_points,
            pair_set: self.config.conditions.pair_set,
            workers: self.workers,
            kernel: StepKernel::Taylor,
        }
    }

    fn conditions_spec(&self) -> Result<DisorderSpec> {
        let c = &self.config.conditions;
        DisorderSpec::new(c.sigma, &c.targets, self.config.master_seed, self.config.ensemble_size)
    }

    fn is_conditions_ensemble(&self, n: usize, spec: &DisorderSpec) -> bool {
        let c = self.conditions_spec();
        self.config.conditions.enabled
            && n == self.config.conditions.n
            && c.is_ok_and(|c| c.targets == spec.targets && c.sigma_rel == spec.sigma_rel)
    }

    /// Run one ensemble and write its per-N artifacts.
    fn run_one(
        &self,
        rec: &CalibrationRecord,
        spec: &DisorderSpec,
        with_conditions: bool,
        failures: &mut Vec<Vec<String>>,
    ) -> Result<EnsembleSummary> {
        let n = rec.n_qubits;
        log::info!("ensemble N={n} {} sigma={} ({} instances)", spec.label(), spec.sigma_rel, spec.ensemble_size);
        let ideal = self.ideal(n)?;
        let sched = self.schedule(rec)?;
        let opts = self.ensemble_options(rec);
        let run = ensemble::run_ensemble(&ideal, spec, &sched, with_conditions, &opts)?;
        let mut summary = run.summary;
        summary.histogram = ensemble::dmin_histogram(&run.records, self.config.grid.hist_bins, summary.histogram.ideal)?;

        let dir = chain_dir(&self.out, n);
        let tag = format!("{}_{}", spec.label(), sigma_tag(spec.sigma_rel));
        ensemble::save_instances(&run.records, &dir.join(format!("instances_{tag}.csv")))?;
        summary.histogram.save_csv(&dir.join(format!("dmin_hist_{tag}.csv")))?;
        if with_conditions {
            let ideal_row = self.ideal_scatter_row(&ideal, &sched, &opts)?;
            let rows: Vec<ScatterRow> = run
                .records
                .iter()
                .filter_map(|r| r.conditions.as_ref().map(|c| ScatterRow { index: r.index as i64, c: c.values(), p_s: r.p_s }))
                .collect();
            conditions::save_scatter(&ideal_row, &rows, &dir.join(format!("scatter_{tag}.csv")))?;
        }
        failures.extend(run.failures.iter().map(|f| ensemble::failure_row(spec, n, f)));
        Ok(summary)
    }

    fn ideal_scatter_row(&self, ideal: &ChainParams, sched: &Schedule, opts: &EnsembleOptions) -> Result<ScatterRow> {
        let n = ideal.n_qubits();
        let mut trace = gap_trace(ideal, sched, opts.trace_points, crate::spectrum::default_levels(n))?;
        trace.refine(ideal, sched)?;
        let report = conditions::evaluate(ideal, sched, &trace, opts.pair_set)?;
        let p_s = Protocol::new(ideal, sched)?.run(opts.steps, opts.kernel)?.success_probability;
        Ok(ScatterRow { index: -1, c: report.values(), p_s })
    }

    /// Every configured ensemble, plus the conditions ensemble if it is not
    /// already part of the sweep.
    pub fn ensembles(&self, recs: &[CalibrationRecord]) -> Result<()> {
        let cfg = &self.config;
        let mut summaries = Vec::new();
        let mut failures = Vec::new();
        let mut conditions_done = false;
        for rec in recs {
            for entry in &cfg.disorder {
                for &sigma in &cfg.sigma_list {
                    let spec = DisorderSpec::new(sigma, &entry.targets, cfg.master_seed, cfg.ensemble_size)?;
                    let with_conditions = self.is_conditions_ensemble(rec.n_qubits, &spec);
                    conditions_done |= with_conditions;
                    summaries.push(self.run_one(rec, &spec, with_conditions, &mut failures)?);
                }
            }
        }
        if cfg.conditions.enabled && !conditions_done {
            let rec = self.record_for(recs, cfg.conditions.n)?;
            summaries.push(self.run_one(&rec, &self.conditions_spec()?, true, &mut failures)?);
        }
        ensemble::save_summaries(&summaries, &self.out.join("ensemble_summary.csv"))?;
        save_failures(&failures, &self.out.join("failures.csv"))?;
        if !failures.is_empty() {
            log::warn!("{} instances failed; see failures.csv", failures.len());
        }
        Ok(())
    }

    /// Only the conditions ensemble and its scatter table.
    fn conditions_only(&self, reuse: bool) -> Result<()> {
        let spec = self.conditions_spec()?;
        let path = self.out.join("calibration.csv");
        let recs = if reuse && path.exists() { self.calibration_records(false)? } else { Vec::new() };
        let rec = self.record_for(&recs, self.config.conditions.n)?;
        let mut failures = Vec::new();
        self.run_one(&rec, &spec, true, &mut failures)?;
        save_failures(&failures, &self.out.join("failures.csv"))?;
        Ok(())
    }

    /// Validate every CSV in the tree and write `report.txt` from the
    /// existing artifacts, without recomputation.
    pub fn report(&self) -> Result<String> {
        let problems = validate_tree(&self.out)?;
        if !problems.is_empty() {
            return Err(Error::Precondition(format!("schema validation failed:\n{}", problems.join("\n"))));
        }
        let text = render_report(&self.out)?;
        std::fs::write(self.out.join("report.txt"), &text)?;
        Ok(text)
    }
}

fn save_failures(rows: &[Vec<String>], path: &Path) -> std::io::Result<()> {
    crate::io::write_file(path, |f| {
        let mut w = CsvWriter::new(f, &ensemble::FAILURES_HEADER)?;
        for r in rows {
            w.row(r)?;
        }
        Ok(())
    })
}

fn expected_header(name: &str, header: &[String]) -> Option<Vec<String>> {
    let owned = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let levels = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix) && h.len() > prefix.len()).count();
    Some(match name {
        "calibration.csv" => owned(&calibration::CSV_HEADER),
        "ensemble_summary.csv" => owned(&ensemble::SUMMARY_HEADER),
        "failures.csv" => owned(&ensemble::FAILURES_HEADER),
        "gap_trace.csv" => {
            let k = levels("E").max(2);
            let mut h = vec!["s".to_string()];
            h.extend((0..k).map(|i| format!("E{i}")));
            h.push("gap".into());
            h
        }
        "populations.csv" => {
            let k = levels("p").max(1);
            let mut h = vec!["s".to_string()];
            h.extend((0..k).map(|i| format!("p{i}")));
            h
        }
        _ if name.starts_with("instances_") => owned(&ensemble::INSTANCES_HEADER),
        _ if name.starts_with("dmin_hist_") => owned(&["bin_left", "bin_right", "count"]),
        _ if name.starts_with("scatter_") => owned(&conditions::SCATTER_HEADER),
        _ => return None,
    })
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            csv_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Header and row-width check of every CSV below `root`. Returns one line
/// per problem.
pub fn validate_tree(root: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    csv_files(root, &mut files)?;
    let mut problems = Vec::new();
    for path in files {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let table = match read_csv(&path) {
            Ok(t) => t,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        match expected_header(&name, &table.header) {
            None => problems.push(format!("{}: unknown artifact", path.display())),
            Some(h) if h != table.header => problems.push(format!("{}: unexpected header {:?}", path.display(), table.header)),
            Some(h) => {
                if let Some(i) = table.rows.iter().position(|r| r.len() != h.len()) {
                    problems.push(format!("{}: row {} has {} fields", path.display(), i + 1, table.rows[i].len()));
                }
            }
        }
    }
    Ok(problems)
}

fn render_report(out: &Path) -> Result<String> {
    let mut s = String::new();
    let cal = out.join("calibration.csv");
    if cal.exists() {
        let _ = writeln!(s, "calibration (target fidelity met at t_f)");
        let _ = writeln!(s, "{:>3} {:>14} {:>14} {:>14}", "N", "t_f [ns]", "fidelity", "delta_min");
        for (n, tf, fid, dmin) in calibration::load_table(&cal)? {
            let _ = writeln!(s, "{n:>3} {tf:>14.6} {fid:>14.9} {dmin:>14.8}");
        }
        let _ = writeln!(s);
    }
    let summary = out.join("ensemble_summary.csv");
    if summary.exists() {
        let t = read_csv(&summary)?;
        let _ = writeln!(s, "ensembles");
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>3} {:>6} {:>14} {:>10} {:>12} {:>10} {:>8}",
            "kind", "sigma", "N", "size", "mean_ps", "std_ps", "mean_dmin", "std_dmin", "gs_match"
        );
        for r in &t.rows {
            let f = |i: usize| r[i].parse::<f64>().unwrap_or(f64::NAN);
            let _ = writeln!(
                s,
                "{:>8} {:>6} {:>3} {:>6} {:>14.9} {:>10.3e} {:>12.6} {:>10.3e} {:>8.4}",
                r[0],
                f(1),
                r[2],
                r[3],
                f(4),
                f(5),
                f(6),
                f(7),
                f(8)
            );
        }
        let _ = writeln!(s);
    }
    let mut files = Vec::new();
    csv_files(out, &mut files)?;
    for path in files.iter().filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("scatter_"))) {
        let t = read_csv(path)?;
        let ps = t.f64_column("ps")?;
        let rel = path.strip_prefix(out).unwrap_or(path);
        let _ = writeln!(s, "conditions {} (instances exclude the ideal row)", rel.display());
        for i in 1..=4 {
            let c = t.f64_column(&format!("c{i}"))?;
            let (c, p) = (&c[1..], &ps[1..]);
            let _ = writeln!(
                s,
                "  C{i}: spearman {:+.4}  witness fraction {:.4}  ideal {:.6e}",
                stats::spearman(c, p),
                stats::monotonicity_witness_fraction(c, p),
                t.f64_column(&format!("c{i}"))?[0]
            );
        }
    }
    Ok(s)
}

/// Parse a disorder target list such as `lambda` or `h,j`.
pub fn parse_targets(text: &str) -> Result<Vec<ParamKind>> {
    text.split([',', '+']).map(|t| t.trim().parse()).collect()
}
