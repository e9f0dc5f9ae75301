//! Strategy × sample-rate × seed grid.
//!
//! Output columns:
//! `kind,strategy,sample_rate,seed,test_error,test_error_std,wall_time_s,mean_sampled_fraction,status`.
//! `kind` is `run` for one seed or `aggregate` for the mean over the seeds of a
//! cell; `seed` is empty on aggregates and `test_error_std` is empty on runs.
//! `test_error` is `1 − AUC` on the test file. Wall time covers training only.

use std::io::Write;
use std::time::Instant;

use mvsboost::{
    load_csv, quantize, roc_auc, train, BinnedDataset64, OutputKind, RawDataset64, SamplingConfig64,
    Strategy,
};

use crate::commands::CmdResult;
use crate::BenchArgs;

pub const HEADER: [&str; 9] = [
    "kind",
    "strategy",
    "sample_rate",
    "seed",
    "test_error",
    "test_error_std",
    "wall_time_s",
    "mean_sampled_fraction",
    "status",
];

struct RunResult {
    test_error: f64,
    wall_time_s: f64,
    sampled_fraction: f64,
}

/// GOSS splits the rate evenly between its top and random parts.
fn sampling_for(strategy: Strategy, rate: f64, lambda: f64, seed: u64) -> SamplingConfig64 {
    match strategy {
        Strategy::None => SamplingConfig64 { seed, ..SamplingConfig64::none() },
        Strategy::Sgb => SamplingConfig64::sgb(rate, seed),
        Strategy::Goss => SamplingConfig64::goss(rate / 2.0, rate / 2.0, seed),
        Strategy::Mvs => SamplingConfig64::mvs(rate, lambda, seed),
        Strategy::MvsAdaptive => SamplingConfig64::mvs_adaptive(rate, seed),
    }
}

fn run_cell(
    args: &BenchArgs,
    binned: &BinnedDataset64,
    train_raw: &RawDataset64,
    test: &RawDataset64,
    strategy: Strategy,
    rate: f64,
    seed: u64,
) -> mvsboost::Result<RunResult> {
    let params = args.boost.params(sampling_for(strategy, rate, args.mvs_lambda, seed));
    let start = Instant::now();
    let out = train(binned, &train_raw.targets, &params)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let scores = out.ensemble.predict(test, OutputKind::Raw)?;
    let n = binned.n_rows() as f64;
    let sampled: f64 = out.log.iter().map(|l| l.sampled as f64).sum();
    Ok(RunResult {
        test_error: 1.0 - roc_auc(&scores, &test.targets)?,
        wall_time_s,
        sampled_fraction: sampled / (n * out.log.len() as f64),
    })
}

pub fn run(args: &BenchArgs) -> CmdResult {
    let options = args.data.csv_options();
    let train_raw: RawDataset64 = load_csv(&args.train, &args.data.target, options)?;
    let test: RawDataset64 = load_csv(&args.test, &args.data.target, options)?;
    let binned = quantize(&train_raw, args.boost.max_bins)?;

    let out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;

    for &strategy in &args.strategies {
        for &rate in &args.sample_rates {
            let mut ok = Vec::new();
            for &seed in &args.seeds {
                let result = run_cell(args, &binned, &train_raw, &test, strategy, rate, seed);
                let strategy = strategy.to_string();
                let (rate, seed) = (rate.to_string(), seed.to_string());
                match result {
                    Ok(r) => {
                        eprintln!("{strategy} rate={rate} seed={seed} test_error={}", r.test_error);
                        w.write_record([
                            "run",
                            &strategy,
                            &rate,
                            &seed,
                            &r.test_error.to_string(),
                            "",
                            &r.wall_time_s.to_string(),
                            &r.sampled_fraction.to_string(),
                            "ok",
                        ])?;
                        ok.push(r);
                    }
                    Err(e) => {
                        eprintln!("{strategy} rate={rate} seed={seed} failed: {e}");
                        w.write_record(["run", &strategy, &rate, &seed, "", "", "", "", &format!("error: {e}")])?;
                    }
                }
            }
            w.write_record(aggregate(strategy, rate, &ok, args.seeds.len()))?;
            w.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

fn aggregate(strategy: Strategy, rate: f64, ok: &[RunResult], total: usize) -> Vec<String> {
    let status = if ok.len() == total {
        "ok".to_string()
    } else {
        format!("{} of {total} runs failed", total - ok.len())
    };
    if ok.is_empty() {
        return vec![
            "aggregate".into(),
            strategy.to_string(),
            rate.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            status,
        ];
    }
    let n = ok.len() as f64;
    let mean = |f: fn(&RunResult) -> f64| ok.iter().map(f).sum::<f64>() / n;
    let err = mean(|r| r.test_error);
    let std = if ok.len() > 1 {
        (ok.iter().map(|r| (r.test_error - err).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    vec![
        "aggregate".into(),
        strategy.to_string(),
        rate.to_string(),
        String::new(),
        err.to_string(),
        std.to_string(),
        mean(|r| r.wall_time_s).to_string(),
        mean(|r| r.sampled_fraction).to_string(),
        status,
    ]
}
