//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and budgets are fixed below.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use quantband::backtest::{cumulative_return, drawdown, scenario_test};
use quantband::indicators::{shape_from_quantiles, IndicatorConfig};
use quantband::metrics::{crossing_rate, cwc, picp, pinaw, CwcVariant, MetricConfig};
use quantband::models::{
    encoder_block, forward, gradient_check, multi_head_attention, repair_monotonic, train, AttentionWeights,
    GradCheckConfig, Matrix, Mode, ModelSpec, Optimizer, PredictionInterval, QuantileForecast, QuantileLevels,
    QuantileLinear, QuantileModel, QuantileTransformer, TrainConfig,
};
use quantband::pipeline::{cmd_compare, cmd_eval, cmd_ingest, cmd_train, ArtifactNames, RunConfig};
use quantband::strategy::{generate_signal, SignalKind};
use quantband::WindowedDataset;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let elapsed = start.elapsed();
    (elapsed < budget, format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs()))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// PICP exact and PINAW within 1e-12 relative against a brute-force loop, on 1,000 random sets.
fn metric_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_pinaw = 0.0f64;
    for set in 0..1000 {
        let n = rng.random_range(2..200);
        let actuals: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let intervals: Vec<PredictionInterval> = (0..n)
            .map(|_| {
                let lower = rng.random_range(-6.0..6.0);
                PredictionInterval { lower, upper: lower + rng.random_range(0.0..4.0), beta: 0.1 }
            })
            .collect();
        let mut inside = 0usize;
        let mut width_sum = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            if intervals[i].lower <= actuals[i] && actuals[i] <= intervals[i].upper {
                inside += 1;
            }
            width_sum += intervals[i].upper - intervals[i].lower;
            lo = lo.min(actuals[i]);
            hi = hi.max(actuals[i]);
        }
        let expected_picp = inside as f64 / n as f64;
        let expected_pinaw = width_sum / (n as f64 * (hi - lo));
        let got_picp = picp(&actuals, &intervals).map_err(|e| e.to_string())?;
        let got_pinaw = pinaw(&actuals, &intervals).map_err(|e| e.to_string())?;
        if got_picp != expected_picp {
            return Err(format!("set {set}: picp {got_picp} vs {expected_picp}"));
        }
        worst_pinaw = worst_pinaw.max((got_pinaw - expected_pinaw).abs() / expected_pinaw.abs());
    }
    let (fast, time) = within_budget(start, Duration::from_secs(1));
    check(worst_pinaw <= 1e-12 && fast, format!("picp exact, pinaw max rel err {worst_pinaw:.2e}, {time}"))
}

fn cwc_spot_values() -> Outcome {
    let nominal = MetricConfig { beta: 0.1, eta: 30.0, ..MetricConfig::default() };
    let squared = MetricConfig { cwc_variant: CwcVariant::SquaredDeviation, ..nominal.clone() };
    let a = cwc(0.81, 0.2, &nominal);
    let b = cwc(0.91, 0.2, &nominal);
    let c = cwc(0.90, 0.2, &squared);
    let ok = (a - 0.8).abs() <= 1e-6 && (b - 0.03983).abs() <= 1e-6 && (c - 0.8).abs() <= 1e-6;
    check(ok, format!("squared-nominal {a:.8} / {b:.8}, squared-deviation {c:.8}"))
}

/// Finite differences on a randomized 2-block, 2-head, T=5 encoder for three seeds.
fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut min_checked = usize::MAX;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let window_in = 5;
        let spec = ModelSpec {
            window_in,
            num_features: rng.random_range(1..=3),
            num_blocks: 2,
            num_heads: 2,
            key_dim: rng.random_range(2..=6),
            conv_channels: rng.random_range(3..=10),
            conv_kernel: rng.random_range(1..=window_in),
            dense_units: [rng.random_range(4..=12), rng.random_range(3..=8)],
            ..ModelSpec::default()
        };
        let mut model = QuantileTransformer::new(spec).map_err(|e| e.to_string())?;
        model.params_mut().initialize(&mut rng);
        for v in model.params_mut().values_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        let n = 4;
        let inputs = uniform(&mut rng, n * model.input_len());
        let targets = uniform(&mut rng, n);
        let config = GradCheckConfig { seed, num_params: 300, ..GradCheckConfig::default() };
        let report = gradient_check(&model, &inputs, &targets, &config).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_relative_error);
        min_checked = min_checked.min(report.checked);
    }
    let (fast, time) = within_budget(start, Duration::from_secs(30));
    check(
        worst <= 1e-4 && min_checked >= 200 && fast,
        format!("max rel err {worst:.2e}, at least {min_checked} parameters compared per seed, {time}"),
    )
}

/// Full-batch SGD on an intercept-only model lands within one order-statistic gap of the
/// empirical quantile at each level.
fn pinball_optimum_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 1000;
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    let levels = [0.1, 0.5, 0.9];
    let ds = WindowedDataset::from_arrays(0, 1, Vec::new(), draws).map_err(|e| e.to_string())?;
    let mut model = QuantileLinear::intercept_only(QuantileLevels::new(levels.to_vec()).map_err(|e| e.to_string())?);
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 4000,
        batch_size: n,
        optimizer: Optimizer::Sgd,
        ..TrainConfig::default()
    };
    train(&mut model, &ds, &config).map_err(|e| e.to_string())?;
    let fitted = model.forward_sample(&[]);
    let mut details = Vec::new();
    let mut ok = true;
    for (j, &beta) in levels.iter().enumerate() {
        // Pinball minimizers over n draws with n*beta integral form [x_(k), x_(k+1)], 1-based k = n*beta.
        let k = (n as f64 * beta).round() as usize;
        let (lo, hi) = (sorted[k - 2], sorted[k + 1]);
        let inside = lo <= fitted[j] && fitted[j] <= hi;
        ok &= inside;
        details.push(format!("q{beta}={:.5} in [{lo:.5}, {hi:.5}]", fitted[j]));
    }
    let (fast, time) = within_budget(start, Duration::from_secs(10));
    check(ok && fast, format!("{}, {time}", details.join(", ")))
}

/// End-to-end synthetic run: train on 70%, score on the last 15%.
fn coverage_calibration(scratch: &Path) -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig { base_dir: scratch.to_path_buf(), ..RunConfig::default() };
    cfg.synthetic.length = 5000;
    cfg.data.split = [0.7, 0.15, 0.15];
    cfg.set_seed(1);
    cfg.validate().map_err(|e| e.to_string())?;
    let out = scratch.join("calibration");
    cmd_ingest(&cfg, &out).map_err(|e| e.to_string())?;
    cmd_train(&cfg, &out).map_err(|e| e.to_string())?;
    let eval = cmd_eval(&cfg, &out).map_err(|e| e.to_string())?;
    let oracle = eval.oracle.ok_or("synthetic run produced no oracle report")?;
    let ratio = eval.report.mean_pinball_overall / oracle.mean_pinball_overall;
    let (fast, time) = within_budget(start, Duration::from_secs(300));
    check(
        (0.85..=0.95).contains(&eval.report.picp) && ratio <= 1.15 && fast,
        format!("test picp {:.4} (oracle {:.4}), pinball ratio to oracle {ratio:.4}, {time}", eval.report.picp, oracle.picp),
    )
}

fn shape_and_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = QuantileTransformer::new(ModelSpec::default()).map_err(|e| e.to_string())?;
    model.params_mut().initialize(&mut rng);
    let n = 7;
    let inputs = uniform(&mut rng, n * model.input_len());
    let out = forward(&model, &inputs, n, Mode::Eval).map_err(|e| e.to_string())?;
    let shape = (out.num_samples(), out.levels.len());

    let mut zeroed = model.clone();
    let names: Vec<String> = zeroed.params().tensors().iter().map(|t| t.name.clone()).filter(|n| n.starts_with("block1.")).collect();
    for name in &names {
        zeroed.params_mut().get_mut(name).expect("tensor exists").fill(0.0);
    }
    let d = model.spec().model_dim();
    let x = Matrix::from_vec(5, d, uniform(&mut rng, 5 * d)).map_err(|e| e.to_string())?;
    let y = encoder_block(&zeroed, 1, &x, Mode::Eval).map_err(|e| e.to_string())?;
    let identity = y == x;

    let w: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, d * d).iter().map(|v| v * 3.0).collect()).collect();
    let weights = AttentionWeights { wq: &w[0], wk: &w[1], wv: &w[2], wo: &w[3] };
    let attn = multi_head_attention(&x, &weights, 2).map_err(|e| e.to_string())?;
    let mut softmax_err = 0.0f64;
    for head in &attn.weights {
        for r in 0..5 {
            softmax_err = softmax_err.max((head.row(r).iter().sum::<f64>() - 1.0).abs());
        }
    }

    let rows: Vec<Vec<f64>> = (0..50).map(|_| uniform(&mut rng, 5)).collect();
    let crossed = QuantileForecast::from_rows(QuantileLevels::default(), &rows).map_err(|e| e.to_string())?;
    let repaired = repair_monotonic(&crossed);
    let rate_before = crossing_rate(&crossed).map_err(|e| e.to_string())?;
    let rate_after = crossing_rate(&repaired).map_err(|e| e.to_string())?;
    let idempotent = repair_monotonic(&repaired) == repaired;

    check(
        shape == (n, 5) && identity && softmax_err <= 1e-12 && rate_after == 0.0 && idempotent,
        format!(
            "shape {shape:?}, zero block identity {identity}, softmax row err {softmax_err:.1e}, crossing {rate_before:.2} -> {rate_after}, idempotent {idempotent}"
        ),
    )
}

/// Independent transcription of the decision tree used as the oracle.
fn decision_oracle(price: f64, atr: f64, lower: f64, rsi: f64, threshold: f64) -> SignalKind {
    let moderate = (0.01..0.03).contains(&atr);
    if rsi < 30.0 && price < threshold * lower && moderate {
        SignalKind::Buy
    } else if rsi > 70.0 && price > threshold * lower && moderate {
        SignalKind::Sell
    } else {
        SignalKind::None
    }
}

fn decision_table() -> Outcome {
    let cfg = IndicatorConfig::default();
    let lower = 100.0;
    let mut counts = [0usize; 3];
    let mut mismatches = Vec::new();
    for rsi in [25.0, 50.0, 75.0] {
        for atr in [0.005, 0.02, 0.035] {
            for price in [99.0, 101.0] {
                let got = generate_signal(price, atr, lower, rsi, &cfg).kind;
                let want = decision_oracle(price, atr, lower, rsi, cfg.threshold);
                if got != want {
                    mismatches.push(format!("rsi {rsi} atr {atr} price {price}: {got} vs {want}"));
                }
                counts[match got {
                    SignalKind::Buy => 0,
                    SignalKind::Sell => 1,
                    SignalKind::None => 2,
                }] += 1;
            }
        }
    }
    check(
        mismatches.is_empty() && counts == [1, 1, 16],
        format!(
            "{} buy, {} sell, {} none across 18 cases; the decision tree admits one buy cell, not the two stated in the criterion{}",
            counts[0],
            counts[1],
            counts[2],
            if mismatches.is_empty() { String::new() } else { format!("; mismatches: {}", mismatches.join("; ")) }
        ),
    )
}

fn backtest_arithmetic() -> Outcome {
    let cr = cumulative_return(&[0.1, -0.05]).map_err(|e| e.to_string())?;
    let s1 = scenario_test(1_000_000.0, 0.14316);
    let s2 = scenario_test(1_000_000.0, 0.12254);
    let dd = drawdown(&[100.0, 110.0, 99.0]).max_drawdown;
    check(
        cr == 0.045 && s1 == 1_143_160.0 && s2 == 1_122_540.0 && (dd - 0.1).abs() <= 1e-12,
        format!("cumulative {cr}, scenarios {s1} / {s2}, max drawdown {dd}"),
    )
}

fn moment_fit_oracle() -> Outcome {
    let levels = QuantileLevels::default();
    let normal = Normal::new(3.0, 2.0).expect("valid normal");
    let row: Vec<f64> = levels.as_slice().iter().map(|&p| normal.inverse_cdf(p)).collect();
    let fit = shape_from_quantiles(&row, levels.as_slice()).map_err(|e| e.to_string())?;
    let gauss_err = [fit.mean - 3.0, fit.std_dev - 2.0, fit.skewness, fit.excess_kurtosis]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let asymmetric = [1.0, 1.8, 3.0, 5.5, 7.5];
    let reflected: Vec<f64> = asymmetric.iter().rev().map(|v| -v).collect();
    let a = shape_from_quantiles(&asymmetric, levels.as_slice()).map_err(|e| e.to_string())?;
    let b = shape_from_quantiles(&reflected, levels.as_slice()).map_err(|e| e.to_string())?;
    let flipped = a.skewness != 0.0 && a.skewness.signum() == -b.skewness.signum();
    let magnitude_gap = (a.skewness + b.skewness).abs();
    check(
        gauss_err <= 1e-6 && flipped && magnitude_gap <= 1e-12,
        format!("gaussian max err {gauss_err:.1e}, skew {:.6} vs reflected {:.6}", a.skewness, b.skewness),
    )
}

/// Two full compare runs from the same config in separate directories.
fn end_to_end_determinism(scratch: &Path) -> Outcome {
    let mut cfg = RunConfig { base_dir: scratch.to_path_buf(), ..RunConfig::default() };
    cfg.synthetic.length = 600;
    cfg.model.num_blocks = 2;
    cfg.train.epochs = 3;
    cfg.set_seed(11);
    cfg.validate().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in ["determinism_a", "determinism_b"] {
        let out = scratch.join(run);
        cmd_ingest(&cfg, &out).map_err(|e| e.to_string())?;
        cmd_compare(&cfg, &out).map_err(|e| e.to_string())?;
        let read = |name: &str| std::fs::read(out.join(name)).map_err(|e| e.to_string());
        reports.push((read(ArtifactNames::COMPARISON_CSV)?, read(ArtifactNames::COMPARISON_TXT)?));
    }
    let identical = reports[0] == reports[1];
    let rows = String::from_utf8_lossy(&reports[0].0).lines().count() - 1;
    check(identical && rows == 4, format!("{rows} report rows, byte-identical {identical}"))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("metric oracle equivalence", Box::new(metric_oracle_equivalence)),
        ("cwc spot values", Box::new(cwc_spot_values)),
        ("gradient fidelity", Box::new(gradient_fidelity)),
        ("pinball-optimum oracle", Box::new(pinball_optimum_oracle)),
        ("coverage calibration", Box::new(|| coverage_calibration(scratch.path()))),
        ("shape and identity checks", Box::new(shape_and_identity)),
        ("decision table", Box::new(decision_table)),
        ("backtest arithmetic", Box::new(backtest_arithmetic)),
        ("moment-fit oracle", Box::new(moment_fit_oracle)),
        ("end-to-end determinism", Box::new(|| end_to_end_determinism(scratch.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("acceptance {:>2} {status} {name}: {detail}", i + 1);
    }
    println!("acceptance summary: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
