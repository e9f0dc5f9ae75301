use std::error::Error;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use mvsboost::boost::{train_observed, IterationLog, TrainObserver};
use mvsboost::lab::{compare_strategies, run_scenario, write_comparison_csv, ScenarioConfig};
use mvsboost::{
    evaluate as evaluate_model, load_csv, load_features_csv, quantize, Ensemble64, RawDataset64,
    SamplingConfig64,
};

use crate::{csv_options, EvaluateArgs, LabArgs, PredictArgs, TrainArgs};

pub type CmdResult = Result<(), Box<dyn Error>>;

/// Writes one line per boosting iteration to standard error.
pub struct StderrLog;

impl TrainObserver<f64> for StderrLog {
    fn iteration(&mut self, log: &IterationLog<f64>) {
        let mut line = format!("iter={} sampled={}", log.iteration, log.sampled);
        if let Some(mu) = log.threshold {
            line.push_str(&format!(" mu={mu}"));
        }
        if let Some(lambda) = log.lambda {
            line.push_str(&format!(" lambda={lambda}"));
        }
        line.push_str(&format!(" train_loss={}", log.train_loss));
        eprintln!("{line}");
    }
}

pub fn train(args: &TrainArgs, sampling: SamplingConfig64) -> CmdResult {
    let raw: RawDataset64 = load_csv(&args.train, &args.data.target, args.data.csv_options())?;
    let binned = quantize(&raw, args.boost.max_bins)?;
    let params = args.boost.params(sampling);
    let out = train_observed(&binned, &raw.targets, &params, &mut StderrLog)?;
    out.ensemble.save(&args.model)?;
    eprintln!(
        "saved {} trees to {}",
        out.ensemble.trees.len(),
        args.model.display()
    );
    Ok(())
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn predict(args: &PredictArgs) -> CmdResult {
    let model = Ensemble64::load(&args.model)?;
    let options = csv_options(args.no_header, args.impute_median);
    let data: RawDataset64 = match &args.target {
        Some(target) => load_csv(&args.data, target, options)?,
        None => load_features_csv(&args.data, options)?,
    };
    let scores = model.predict(&data, args.output)?;
    let mut out = output(args.out.as_deref())?;
    for s in scores {
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let model = Ensemble64::load(&args.model)?;
    let data: RawDataset64 = load_csv(&args.data, &args.data_args.target, args.data_args.csv_options())?;
    let report = evaluate_model(&model, &data, &args.metrics)?;
    print!("{}", report.to_key_value());

    if let Some(path) = &args.csv {
        let is_new = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::Writer::from_writer(file);
        if is_new {
            let mut header = vec!["model".to_string(), "data".to_string(), "n_test".to_string()];
            header.extend(report.values.keys().map(|m| m.to_string()));
            w.write_record(&header)?;
        }
        let mut row = vec![
            args.model.display().to_string(),
            args.data.display().to_string(),
            report.n_test.to_string(),
        ];
        row.extend(report.values.values().map(|v| v.to_string()));
        w.write_record(&row)?;
        w.flush()?;
    }
    Ok(())
}

pub fn lab(args: &LabArgs) -> CmdResult {
    let text = fs::read_to_string(&args.scenario)
        .map_err(|e| format!("cannot read {}: {e}", args.scenario.display()))?;
    let config: ScenarioConfig = text.parse()?;
    let scenario = config.build()?;
    let mut out = output(args.out.as_deref())?;

    if let Some(lambdas) = &config.lambdas {
        let rows = compare_strategies(&scenario, lambdas)?;
        for row in &rows {
            eprintln!(
                "strategy={} lambda={} empirical_msd={} std_error={} theoretical_msd={}",
                row.strategy,
                row.lambda.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
                row.report.empirical.mean,
                row.report.empirical.std_error,
                row.report.theory.value,
            );
        }
        write_comparison_csv(&mut out, lambdas, &rows)?;
    } else {
        let report = run_scenario(&scenario)?;
        eprintln!(
            "strategy={} n={} n_leaves={} n_draws={}",
            scenario.strategy.name(),
            scenario.g.len(),
            scenario.n_leaves,
            scenario.n_draws
        );
        eprintln!(
            "empirical_msd={} std_error={} theoretical_msd={} relative_gap={} empty_leaf_draws={}",
            report.empirical.mean,
            report.empirical.std_error,
            report.theory.value,
            report.relative_gap(),
            report.empirical.empty_leaf_draws
        );
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["leaf", "c", "var_x", "var_y", "cov_xy", "contribution"])?;
        for (l, t) in report.theory.leaves.iter().enumerate() {
            w.write_record([
                l.to_string(),
                t.c.to_string(),
                t.var_x.to_string(),
                t.var_y.to_string(),
                t.cov_xy.to_string(),
                t.contribution().to_string(),
            ])?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}
