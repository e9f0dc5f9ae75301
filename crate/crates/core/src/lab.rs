//! Variance lab: expected squared deviation of the sampled split score.
//!
//! A scenario fixes gradients, hessians and a leaf partition, then asks how far
//! the inverse-probability-weighted score `Ŝ = Σ_l (Σ wg)² / Σ wh` strays from
//! the full-data score `S` under independent Bernoulli sampling. The closed
//! form is compared against Monte-Carlo draws through the production
//! [`leaf_score`].

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::GradHess;
use crate::sampling::{
    bernoulli_select, iteration_rng, mvs_probabilities, regularized_abs, threshold_by_sort,
    RegularizedGradients,
};
use crate::scalar::Scalar;
use crate::tree::{leaf_score, LeafStats};

pub const MIN_DRAWS: usize = 1000;

/// How inclusion probabilities are assigned in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum LabStrategy<T> {
    /// `p_i = s` for every row.
    Uniform,
    /// `p_i ∝ |g_i|`, capped at one.
    Importance,
    /// `p_i = min(1, ĝ_i / μ)` with `ĝ_i = sqrt(g_i² + λ h_i²)`.
    Mvs { lambda: T },
    Fixed(Vec<T>),
}

impl<T: Scalar> LabStrategy<T> {
    pub fn name(&self) -> &'static str {
        match self {
            LabStrategy::Uniform => "uniform",
            LabStrategy::Importance => "importance",
            LabStrategy::Mvs { .. } => "mvs",
            LabStrategy::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabScenario<T> {
    pub g: Vec<T>,
    pub h: Vec<T>,
    /// Leaf index of every row.
    pub leaves: Vec<usize>,
    pub n_leaves: usize,
    pub strategy: LabStrategy<T>,
    pub sample_rate: T,
    pub n_draws: usize,
    pub seed: u64,
    pub eps_reg: T,
}

impl<T: Scalar> LabScenario<T> {
    /// Scenario with rows assigned to leaves round-robin.
    pub fn round_robin(g: Vec<T>, h: Vec<T>, n_leaves: usize, strategy: LabStrategy<T>, sample_rate: T) -> Self {
        let leaves = (0..g.len()).map(|i| i % n_leaves.max(1)).collect();
        LabScenario {
            g,
            h,
            leaves,
            n_leaves,
            strategy,
            sample_rate,
            n_draws: 10_000,
            seed: 0,
            eps_reg: T::lit(1e-3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.len();
        if n == 0 {
            return Err(Error::Scenario("no rows".into()));
        }
        if self.h.len() != n || self.leaves.len() != n {
            return Err(Error::Scenario(format!(
                "g, h and leaf assignment lengths differ: {}, {}, {}",
                n,
                self.h.len(),
                self.leaves.len()
            )));
        }
        if self.g.iter().chain(&self.h).any(|v| !v.is_finite()) {
            return Err(Error::Scenario("non-finite g or h".into()));
        }
        if let Some(&l) = self.leaves.iter().find(|&&l| l >= self.n_leaves) {
            return Err(Error::Scenario(format!("leaf index {l} out of range")));
        }
        let mut occupied = vec![false; self.n_leaves];
        self.leaves.iter().for_each(|&l| occupied[l] = true);
        if let Some(l) = occupied.iter().position(|&o| !o) {
            return Err(Error::Scenario(format!("leaf {l} has no rows")));
        }
        if !(self.sample_rate > T::zero() && self.sample_rate <= T::one()) {
            return Err(Error::Scenario(format!("sample rate {} outside (0, 1]", self.sample_rate)));
        }
        if self.n_draws < MIN_DRAWS {
            return Err(Error::Scenario(format!("n_draws must be at least {MIN_DRAWS}")));
        }
        if let LabStrategy::Fixed(p) = &self.strategy {
            if p.len() != n || p.iter().any(|&p| !(p > T::zero() && p <= T::one())) {
                return Err(Error::Scenario("fixed probabilities must lie in (0, 1]".into()));
            }
        }
        if let LabStrategy::Mvs { lambda } = self.strategy {
            if !(lambda >= T::zero() && lambda.is_finite()) {
                return Err(Error::Scenario(format!("lambda {lambda} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<T> {
        match &self.strategy {
            LabStrategy::Uniform => vec![self.sample_rate; self.g.len()],
            LabStrategy::Importance => mvs_probs(&self.g, &self.h, T::zero(), self.sample_rate),
            LabStrategy::Mvs { lambda } => mvs_probs(&self.g, &self.h, *lambda, self.sample_rate),
            LabStrategy::Fixed(p) => p.clone(),
        }
    }

    fn leaf_totals(&self) -> Vec<LeafStats<T>> {
        let mut totals = vec![LeafStats::default(); self.n_leaves];
        for ((&g, &h), &l) in self.g.iter().zip(&self.h).zip(&self.leaves) {
            totals[l].push(g, h);
        }
        totals
    }
}

/// MVS probabilities for raw `g`, `h`.
pub fn mvs_probs<T: Scalar>(g: &[T], h: &[T], lambda: T, sample_rate: T) -> Vec<T> {
    let gh = GradHess {
        g: g.to_vec(),
        h: h.to_vec(),
    };
    let RegularizedGradients(values) = regularized_abs(&gh, lambda);
    let mu = threshold_by_sort(&values, sample_rate);
    mvs_probabilities(&values, sample_rate, mu)
}

/// Variance objective `Σ (g_i² + λ h_i²) / p_i`.
pub fn objective<T: Scalar>(g: &[T], h: &[T], lambda: T, p: &[T]) -> T {
    g.iter()
        .zip(h)
        .zip(p)
        .map(|((&g, &h), &p)| (g * g + lambda * h * h) / p)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafTerms {
    pub c: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl LeafTerms {
    pub fn contribution(&self) -> f64 {
        let c = self.c;
        c * c * (4.0 * self.var_x - 4.0 * c * self.cov_xy + c * c * self.var_y)
    }

    /// Contribution with the covariance term dropped.
    pub fn bound(&self) -> f64 {
        let c = self.c;
        c * c * (4.0 * self.var_x + c * c * self.var_y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theory {
    pub value: f64,
    pub leaves: Vec<LeafTerms>,
}

impl Theory {
    pub fn bound(&self) -> f64 {
        self.leaves.iter().map(LeafTerms::bound).sum()
    }
}

/// First-order approximation of `E[Δ²]`:
/// `Σ_l c_l² (4 Var x_l − 4 c_l Cov(x_l, y_l) + c_l² Var y_l)`, where `x_l`,
/// `y_l` are the weighted gradient and hessian sums of leaf `l` and the
/// Bernoulli moments are `Σ (1 − p)/p · {g², h², gh}`.
pub fn theoretical_delta2<T: Scalar>(scenario: &LabScenario<T>) -> Result<Theory> {
    scenario.validate()?;
    let p = scenario.probabilities();
    if let Some(i) = p.iter().position(|&p| !(p > T::zero())) {
        return Err(Error::Scenario(format!("row {i} has zero inclusion probability")));
    }
    let mut terms = vec![[0.0f64; 3]; scenario.n_leaves];
    for i in 0..scenario.g.len() {
        let (g, h, p) = (scenario.g[i].as_f64(), scenario.h[i].as_f64(), p[i].as_f64());
        let odds = (1.0 - p) / p;
        let t = &mut terms[scenario.leaves[i]];
        t[0] += odds * g * g;
        t[1] += odds * h * h;
        t[2] += odds * g * h;
    }
    let totals = scenario.leaf_totals();
    let mut leaves = Vec::with_capacity(scenario.n_leaves);
    for (l, (tot, t)) in totals.iter().zip(&terms).enumerate() {
        if tot.sum_wh == T::zero() {
            return Err(Error::ZeroHessianLeaf(l));
        }
        leaves.push(LeafTerms {
            c: tot.ratio().as_f64(),
            var_x: t[0],
            var_y: t[1],
            cov_xy: t[2],
        });
    }
    Ok(Theory {
        value: leaves.iter().map(LeafTerms::contribution).sum(),
        leaves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Empirical {
    pub mean: f64,
    pub std_error: f64,
    /// Draws in which at least one leaf received no sampled row.
    pub empty_leaf_draws: usize,
}

/// Monte-Carlo mean of `(Ŝ − S)²`. Draw `d` uses its own stream of the
/// scenario seed, so the result does not depend on thread scheduling.
pub fn empirical_delta2<T: Scalar>(scenario: &LabScenario<T>) -> Result<Empirical> {
    scenario.validate()?;
    let p = scenario.probabilities();
    let eps = scenario.eps_reg;
    let exact: T = scenario
        .leaf_totals()
        .iter()
        .map(|s| leaf_score(s, eps))
        .sum();

    let draws: Vec<(f64, bool)> = (0..scenario.n_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = iteration_rng(scenario.seed, d as u64);
            let (rows, weights) = bernoulli_select(&p, &mut rng);
            let mut est = vec![LeafStats::default(); scenario.n_leaves];
            for (&i, &w) in rows.iter().zip(&weights) {
                est[scenario.leaves[i]].push(w * scenario.g[i], w * scenario.h[i]);
            }
            let estimate: T = est.iter().map(|s| leaf_score(s, eps)).sum();
            let delta = (estimate - exact).as_f64();
            (delta * delta, est.iter().any(|s| s.count == 0))
        })
        .collect();

    let n = draws.len() as f64;
    let mean = draws.iter().map(|d| d.0).sum::<f64>() / n;
    let var = draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Empirical {
        mean,
        std_error: (var / n).sqrt(),
        empty_leaf_draws: draws.iter().filter(|d| d.1).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabReport {
    pub empirical: Empirical,
    pub theory: Theory,
}

impl LabReport {
    pub fn relative_gap(&self) -> f64 {
        (self.empirical.mean - self.theory.value).abs() / self.theory.value
    }

    /// Whether the empirical mean lies within `max(k σ, rel · theory)` of theory.
    pub fn agrees(&self, k_sigma: f64, rel: f64) -> bool {
        let gap = (self.empirical.mean - self.theory.value).abs();
        gap <= (k_sigma * self.empirical.std_error).max(rel * self.theory.value)
    }
}

pub fn run_scenario<T: Scalar>(scenario: &LabScenario<T>) -> Result<LabReport> {
    Ok(LabReport {
        theory: theoretical_delta2(scenario)?,
        empirical: empirical_delta2(scenario)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub strategy: &'static str,
    pub lambda: Option<f64>,
    pub report: LabReport,
    /// Variance objective of this row's probabilities at each grid λ.
    pub objectives: Vec<f64>,
}

/// Uniform, capped importance sampling and MVS at every `λ` of the grid, all on
/// the same scenario data. `base.strategy` is ignored.
pub fn compare_strategies<T: Scalar>(base: &LabScenario<T>, lambdas: &[T]) -> Result<Vec<StrategyRow>> {
    let mut strategies = vec![LabStrategy::Uniform, LabStrategy::Importance];
    strategies.extend(lambdas.iter().map(|&lambda| LabStrategy::Mvs { lambda }));
    strategies
        .into_iter()
        .map(|strategy| {
            let lambda = match &strategy {
                LabStrategy::Mvs { lambda } => Some(lambda.as_f64()),
                _ => None,
            };
            let scenario = LabScenario {
                strategy,
                ..base.clone()
            };
            let p = scenario.probabilities();
            let objectives = lambdas
                .iter()
                .map(|&l| objective(&scenario.g, &scenario.h, l, &p).as_f64())
                .collect();
            Ok(StrategyRow {
                strategy: scenario.strategy.name(),
                lambda,
                report: run_scenario(&scenario)?,
                objectives,
            })
        })
        .collect()
}

pub fn write_comparison_csv<T: Scalar, W: Write>(out: W, lambdas: &[T], rows: &[StrategyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "strategy",
        "lambda",
        "empirical_msd",
        "std_error",
        "theoretical_msd",
        "relative_gap",
        "empty_leaf_draws",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(lambdas.iter().map(|l| format!("objective_lambda_{l}")));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.strategy.to_string(),
            row.lambda.map(|l| l.to_string()).unwrap_or_default(),
            row.report.empirical.mean.to_string(),
            row.report.empirical.std_error.to_string(),
            row.report.theory.value.to_string(),
            row.report.relative_gap().to_string(),
            row.report.empirical.empty_leaf_draws.to_string(),
        ];
        record.extend(row.objectives.iter().map(|o| o.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// Best objective found by search over feasible probability vectors.
    pub oracle: f64,
    pub mvs: f64,
    pub evaluated: usize,
}

const GRID_STEPS: usize = 20;
const GRID_MAX_N: usize = 5;
const RANDOM_CANDIDATES: usize = 10_000;
const LOCAL_CANDIDATES: usize = 2_000;
const MIN_PROBABILITY: f64 = 1e-9;

/// Searches for a feasible `p` (`Σp = N s`, `p ∈ (0, 1]`) beating MVS on the
/// variance objective. Small `N` get an exhaustive grid; all `N` get random
/// vectors projected onto the feasible set plus perturbations of the MVS
/// solution.
pub fn optimality_oracle(g: &[f64], h: &[f64], lambda: f64, sample_rate: f64, seed: u64) -> Result<OracleResult> {
    let n = g.len();
    if n == 0 || h.len() != n {
        return Err(Error::Scenario("g and h must be nonempty and of equal length".into()));
    }
    if n > 12 {
        return Err(Error::Scenario(format!("oracle supports at most 12 rows, got {n}")));
    }
    let budget = sample_rate * n as f64;
    let p_mvs = mvs_probs(g, h, lambda, sample_rate);
    let mvs = objective(g, h, lambda, &p_mvs);
    let mut best = f64::INFINITY;
    let mut evaluated = 0;
    let mut consider = |p: &[f64]| {
        evaluated += 1;
        best = best.min(objective(g, h, lambda, p));
    };

    if n <= GRID_MAX_N {
        let mut p = vec![0.0; n];
        let cells = GRID_STEPS.pow((n - 1) as u32);
        for cell in 0..cells {
            let mut code = cell;
            for v in p.iter_mut().take(n - 1) {
                *v = (code % GRID_STEPS + 1) as f64 / GRID_STEPS as f64;
                code /= GRID_STEPS;
            }
            let last = budget - p[..n - 1].iter().sum::<f64>();
            if last > 0.0 && last <= 1.0 {
                p[n - 1] = last;
                consider(&p);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; n];
    for _ in 0..RANDOM_CANDIDATES {
        for v in p.iter_mut() {
            *v = rng.random::<f64>();
        }
        project(&mut p, budget);
        consider(&p);
    }
    for k in 0..LOCAL_CANDIDATES {
        let scale = 10f64.powi(-(1 + (k % 6) as i32));
        for (v, &m) in p.iter_mut().zip(&p_mvs) {
            *v = m + scale * (rng.random::<f64>() - 0.5);
        }
        project(&mut p, budget);
        consider(&p);
    }
    Ok(OracleResult {
        oracle: best,
        mvs,
        evaluated,
    })
}

/// Shifts `p` by a constant and clips to `[MIN_PROBABILITY, 1]` so that the
/// total is as close to `budget` as possible without exceeding it.
fn project(p: &mut [f64], budget: f64) {
    let total = |tau: f64, p: &[f64]| -> f64 {
        p.iter().map(|&v| (v + tau).clamp(MIN_PROBABILITY, 1.0)).sum()
    };
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid, p) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for v in p.iter_mut() {
        *v = (*v + lo).clamp(MIN_PROBABILITY, 1.0);
    }
}

/// How scenario gradients are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientSource {
    List(Vec<f64>),
    Normal { sigma: f64 },
    /// Log-normal magnitudes with random signs.
    LogNormal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum HessianSource {
    List(Vec<f64>),
    Ones,
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeafSource {
    /// Row `i` goes to leaf `i mod count`.
    Count(usize),
    List(Vec<usize>),
}

/// A lab run described by a flat `key=value` file. Lines starting with `#`
/// and blank lines are skipped.
///
/// | key | meaning | default |
/// |---|---|---|
/// | `n` | row count when gradients are generated | required for `g_dist` |
/// | `g` / `g_dist` | comma list, or `normal:σ` / `lognormal:σ` | |
/// | `h` / `h_dist` | comma list, or `ones` / `uniform:a:b` | `ones` |
/// | `leaves` / `leaf` | leaf count (round-robin), or comma list of leaf ids | `1` |
/// | `strategy` | `uniform`, `importance` or `mvs` | `mvs` |
/// | `sample_rate` | expected sampled fraction | `0.1` |
/// | `lambda` | MVS λ | `0.1` |
/// | `lambdas` | comma list; runs the strategy comparison | |
/// | `n_draws` | Monte-Carlo draws, at least 1000 | `10000` |
/// | `seed` | seeds both generated data and draws | `0` |
/// | `eps_reg` | denominator guard of the score | `0.001` |
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: Option<usize>,
    pub gradients: GradientSource,
    pub hessians: HessianSource,
    pub leaves: LeafSource,
    pub strategy: String,
    pub sample_rate: f64,
    pub lambda: f64,
    pub lambdas: Option<Vec<f64>>,
    pub n_draws: usize,
    pub seed: u64,
    pub eps_reg: f64,
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Scenario(format!("bad value {value:?} for key {key}")))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value.split(',').map(|v| parse_value(key, v)).collect()
}

impl FromStr for ScenarioConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Scenario(format!("line {}: expected key=value", lineno + 1)))?;
            if pairs.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Scenario(format!("duplicate key {}", key.trim())));
            }
        }
        let mut take = |key: &str| pairs.remove(key);

        let n = take("n").map(|v| parse_value("n", &v)).transpose()?;
        let gradients = match (take("g"), take("g_dist")) {
            (Some(list), None) => GradientSource::List(parse_list("g", &list)?),
            (None, Some(dist)) => match dist.split_once(':') {
                Some(("normal", s)) => GradientSource::Normal { sigma: parse_value("g_dist", s)? },
                Some(("lognormal", s)) => GradientSource::LogNormal { sigma: parse_value("g_dist", s)? },
                _ => return Err(Error::Scenario(format!("unknown g_dist {dist:?}"))),
            },
            (Some(_), Some(_)) => return Err(Error::Scenario("give either g or g_dist".into())),
            (None, None) => return Err(Error::Scenario("missing g or g_dist".into())),
        };
        let hessians = match (take("h"), take("h_dist")) {
            (Some(list), None) => HessianSource::List(parse_list("h", &list)?),
            (None, Some(dist)) if dist == "ones" => HessianSource::Ones,
            (None, Some(dist)) => {
                let parts: Vec<&str> = dist.split(':').collect();
                match parts.as_slice() {
                    ["uniform", a, b] => HessianSource::Uniform {
                        low: parse_value("h_dist", a)?,
                        high: parse_value("h_dist", b)?,
                    },
                    _ => return Err(Error::Scenario(format!("unknown h_dist {dist:?}"))),
                }
            }
            (Some(_), Some(_)) => return Err(Error::Scenario("give either h or h_dist".into())),
            (None, None) => HessianSource::Ones,
        };
        let leaves = match (take("leaves"), take("leaf")) {
            (Some(count), None) => LeafSource::Count(parse_value("leaves", &count)?),
            (None, Some(list)) => LeafSource::List(parse_list("leaf", &list)?),
            (None, None) => LeafSource::Count(1),
            (Some(_), Some(_)) => return Err(Error::Scenario("give either leaves or leaf".into())),
        };
        let config = ScenarioConfig {
            n,
            gradients,
            hessians,
            leaves,
            strategy: take("strategy").unwrap_or_else(|| "mvs".into()),
            sample_rate: take("sample_rate").map(|v| parse_value("sample_rate", &v)).transpose()?.unwrap_or(0.1),
            lambda: take("lambda").map(|v| parse_value("lambda", &v)).transpose()?.unwrap_or(0.1),
            lambdas: take("lambdas").map(|v| parse_list("lambdas", &v)).transpose()?,
            n_draws: take("n_draws").map(|v| parse_value("n_draws", &v)).transpose()?.unwrap_or(10_000),
            seed: take("seed").map(|v| parse_value("seed", &v)).transpose()?.unwrap_or(0),
            eps_reg: take("eps_reg").map(|v| parse_value("eps_reg", &v)).transpose()?.unwrap_or(1e-3),
        };
        if let Some(key) = pairs.keys().next() {
            return Err(Error::Scenario(format!("unknown key {key}")));
        }
        Ok(config)
    }
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<LabScenario<f64>> {
        let mut rng = iteration_rng(self.seed, u64::MAX);
        let need_n = || self.n.ok_or_else(|| Error::Scenario("generated gradients need n".into()));
        let g = match &self.gradients {
            GradientSource::List(g) => g.clone(),
            GradientSource::Normal { sigma } => {
                let dist = Normal::new(0.0, *sigma).map_err(|e| Error::Scenario(e.to_string()))?;
                (0..need_n()?).map(|_| dist.sample(&mut rng)).collect()
            }
            GradientSource::LogNormal { sigma } => {
                let dist = LogNormal::new(0.0, *sigma).map_err(|e| Error::Scenario(e.to_string()))?;
                (0..need_n()?)
                    .map(|_| {
                        let m = dist.sample(&mut rng);
                        if rng.random::<bool>() { m } else { -m }
                    })
                    .collect()
            }
        };
        let n = g.len();
        if let Some(expected) = self.n {
            if expected != n {
                return Err(Error::Scenario(format!("n = {expected} but {n} gradients given")));
            }
        }
        let h = match &self.hessians {
            HessianSource::List(h) => h.clone(),
            HessianSource::Ones => vec![1.0; n],
            HessianSource::Uniform { low, high } => {
                if !(0.0 < *low && low < high) {
                    return Err(Error::Scenario("h_dist uniform needs 0 < a < b".into()));
                }
                (0..n).map(|_| rng.random_range(*low..*high)).collect()
            }
        };
        let (leaves, n_leaves) = match &self.leaves {
            LeafSource::Count(0) => return Err(Error::Scenario("leaves must be at least 1".into())),
            LeafSource::Count(k) => ((0..n).map(|i| i % k).collect(), *k),
            LeafSource::List(list) => (list.clone(), list.iter().max().map_or(0, |m| m + 1)),
        };
        let strategy = match self.strategy.as_str() {
            "uniform" => LabStrategy::Uniform,
            "importance" => LabStrategy::Importance,
            "mvs" => LabStrategy::Mvs { lambda: self.lambda },
            other => return Err(Error::Scenario(format!("unknown strategy {other:?}"))),
        };
        let scenario = LabScenario {
            g,
            h,
            leaves,
            n_leaves,
            strategy,
            sample_rate: self.sample_rate,
            n_draws: self.n_draws,
            seed: self.seed,
            eps_reg: self.eps_reg,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
