use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, info};

use super::config::{DataSource, RunConfig, Split};
use super::io::{csv_bytes, open_artifact, write_atomic};
use super::{PipelineError, Result};
use crate::backtest::{run_backtest, svg_line_chart, BacktestResult};
use crate::market_data::{
    decision_inputs, fit_scalers, make_windows, parse_ticks, read_bars_csv, read_dataset, resample,
    write_bars_csv, write_dataset, write_ticks_csv, Bar, Feature, ParsedTicks, WindowedDataset,
};
use crate::metrics::{evaluate, MetricsReport};
use crate::models::{
    evaluate_loss, load_checkpoint, save_checkpoint, train, AnyModel, LossKind, ModelKind, QuantileForecast,
    QuantileLinear, QuantileMlp, QuantileModel, QuantileTransformer, TrainConfig, TrainOutcome,
};
use crate::synthetic::{generate, SyntheticSeries};

/// File names of every artifact in the output directory.
pub struct ArtifactNames;

impl ArtifactNames {
    pub const TICKS: &'static str = "ticks.csv";
    pub const ORACLE: &'static str = "oracle.csv";
    pub const BARS: &'static str = "bars.csv";
    pub const DATASETS: [&'static str; 3] = ["dataset_train.qbw", "dataset_val.qbw", "dataset_test.qbw"];
    pub const INGEST_REPORT: &'static str = "ingest_report.txt";
    pub const CHECKPOINT: &'static str = "checkpoint.txt";
    pub const LOSS_HISTORY: &'static str = "loss_history.csv";
    pub const TRAIN_REPORT: &'static str = "train_report.txt";
    pub const FORECAST: &'static str = "forecast.csv";
    pub const METRICS: &'static str = "metrics.txt";
    pub const METRICS_TABLE: &'static str = "metrics.csv";
    pub const BACKTEST_SUMMARY: &'static str = "backtest_summary.txt";
    pub const EQUITY: &'static str = "equity.csv";
    pub const SIGNALS: &'static str = "signals.csv";
    pub const INDICATORS: &'static str = "indicators.csv";
    pub const TRADES: &'static str = "trades.csv";
    pub const EQUITY_SVG: &'static str = "equity.svg";
    pub const DRAWDOWN_SVG: &'static str = "drawdown.svg";
    pub const COMPARISON_CSV: &'static str = "comparison.csv";
    pub const COMPARISON_TXT: &'static str = "comparison.txt";
}

const ORACLE_ROW: &str = "oracle";

fn level_columns(levels: &[f64]) -> Vec<String> {
    levels.iter().map(|l| format!("q{l}")).collect()
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    write_atomic(&path, text.as_bytes())?;
    debug!("wrote {}", path.display());
    Ok(path)
}

fn write_csv<I, R>(out: &Path, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let path = out.join(name);
    write_atomic(&path, &csv_bytes(header, rows)?)?;
    debug!("wrote {}", path.display());
    Ok(path)
}

fn read_dataset_artifact(out: &Path, name: &str) -> Result<WindowedDataset> {
    Ok(read_dataset(open_artifact(&out.join(name))?)?)
}

fn read_bars_artifact(out: &Path) -> Result<Vec<Bar>> {
    Ok(read_bars_csv(open_artifact(&out.join(ArtifactNames::BARS))?)?)
}

fn load_model(out: &Path) -> Result<AnyModel> {
    let path = out.join(ArtifactNames::CHECKPOINT);
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact(path));
    }
    Ok(load_checkpoint(&path)?)
}

/// Rejects artifacts produced under a different window or feature setting.
fn check_dataset(cfg: &RunConfig, ds: &WindowedDataset) -> Result<()> {
    let names: Vec<&str> = cfg.data.features.iter().map(|f| f.name()).collect();
    if ds.window_in != cfg.data.window_in || ds.feature_names != names {
        return Err(PipelineError::Config(format!(
            "dataset has window_in {} and features {:?} but the config asks for {} and {:?}; re-run ingest",
            ds.window_in, ds.feature_names, cfg.data.window_in, names
        )));
    }
    Ok(())
}

fn check_model(model: &AnyModel, ds: &WindowedDataset) -> Result<()> {
    if model.window_in() != ds.window_in || model.num_features() != ds.num_features {
        return Err(PipelineError::Config(format!(
            "checkpoint expects {}x{} windows but the dataset has {}x{}; re-run train",
            model.window_in(),
            model.num_features(),
            ds.window_in,
            ds.num_features
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub series: SyntheticSeries,
    pub num_ticks: usize,
}

/// Writes the synthetic series as a tick file plus its closed-form next-bar quantiles.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<SynthOutcome> {
    let series = generate(&cfg.synthetic)?;
    let ticks = series.to_ticks();
    let mut buf = Vec::new();
    write_ticks_csv(&mut buf, &ticks, cfg.data.delimiter as u8)?;
    write_atomic(&out.join(ArtifactNames::TICKS), &buf)?;

    let levels = cfg.levels()?;
    let mut header = vec!["open_time_ms".to_string(), "price".into(), "regime".into()];
    header.extend(level_columns(levels.as_slice()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = series.prices().enumerate().map(|(t, price)| {
        let mut row = vec![series.bar_open_time(t).millis().to_string(), price.to_string(), series.regimes[t].to_string()];
        row.extend(series.oracle_row(t, levels.as_slice()).iter().map(f64::to_string));
        row
    });
    write_csv(out, ArtifactNames::ORACLE, &header, rows)?;
    info!("synth: {} bars, {} ticks -> {}", series.len(), ticks.len(), out.display());
    Ok(SynthOutcome { num_ticks: ticks.len(), series })
}

fn load_ticks(cfg: &RunConfig) -> Result<ParsedTicks> {
    let schema = cfg.tick_schema();
    match cfg.data.source {
        DataSource::Csv => {
            let path = cfg.data_path().ok_or_else(|| PipelineError::Config("data.path is required".into()))?;
            Ok(parse_ticks(open_artifact(&path)?, &schema)?)
        }
        DataSource::Synthetic => {
            // Round-trip through the tick text format so synthetic runs share the csv path.
            let series = generate(&cfg.synthetic)?;
            let mut buf = Vec::new();
            write_ticks_csv(&mut buf, &series.to_ticks(), schema.delimiter)?;
            Ok(parse_ticks(buf.as_slice(), &schema)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub num_ticks: usize,
    pub bars: Vec<Bar>,
    pub split: Split,
    /// Train, validation and test datasets.
    pub datasets: [WindowedDataset; 3],
}

/// Parses ticks, resamples bars and cuts the three windowed datasets.
///
/// Scalers are fit on the training bars only. A sample belongs to the segment
/// holding its target bar, so validation and test inputs may reach back into the
/// previous segment.
pub fn cmd_ingest(cfg: &RunConfig, out: &Path) -> Result<IngestOutcome> {
    let parsed = load_ticks(cfg)?;
    let bars = resample(&parsed.ticks, cfg.data.bar_interval_ms)?;
    let window_in = cfg.data.window_in;
    let split = Split::new(bars.len(), cfg.data.split, window_in)?;
    let features: &[Feature] = &cfg.data.features;
    let (norm, target_norm) = fit_scalers(&bars[..split.train_end], features)?;
    let [r_train, r_val, r_test] = split.ranges(window_in);
    let datasets = [
        make_windows(&bars[r_train], features, window_in, 1, cfg.data.stride, &norm, &target_norm)?,
        make_windows(&bars[r_val], features, window_in, 1, 1, &norm, &target_norm)?,
        make_windows(&bars[r_test], features, window_in, 1, 1, &norm, &target_norm)?,
    ];

    let mut buf = Vec::new();
    write_bars_csv(&mut buf, &bars)?;
    write_atomic(&out.join(ArtifactNames::BARS), &buf)?;
    for (ds, name) in datasets.iter().zip(ArtifactNames::DATASETS) {
        let mut buf = Vec::new();
        write_dataset(&mut buf, ds)?;
        write_atomic(&out.join(name), &buf)?;
    }

    let mut report = String::new();
    let _ = writeln!(report, "tick_rows = {}", parsed.rows);
    let _ = writeln!(report, "ticks_kept = {}", parsed.ticks.len());
    let _ = writeln!(report, "ticks_dropped_missing_quote = {}", parsed.dropped_missing_quote);
    let _ = writeln!(report, "bars = {}", bars.len());
    let _ = writeln!(report, "bar_interval_ms = {}", cfg.data.bar_interval_ms);
    let _ = writeln!(report, "train_bars = 0..{}", split.train_end);
    let _ = writeln!(report, "val_bars = {}..{}", split.train_end, split.val_end);
    let _ = writeln!(report, "test_bars = {}..{}", split.val_end, split.len);
    for (ds, name) in datasets.iter().zip(["train", "val", "test"]) {
        let _ = writeln!(report, "{name}_samples = {}", ds.num_samples);
    }
    for (k, f) in features.iter().enumerate() {
        let _ = writeln!(report, "scaler_{f} = [{}, {}]", norm.x_min[k], norm.x_max[k]);
    }
    let _ = writeln!(report, "target_scaler = [{}, {}]", target_norm.x_min[0], target_norm.x_max[0]);
    write_text(out, ArtifactNames::INGEST_REPORT, &report)?;
    info!("ingest: {} ticks -> {} bars, samples {}/{}/{}", parsed.ticks.len(), bars.len(),
        datasets[0].num_samples, datasets[1].num_samples, datasets[2].num_samples);
    Ok(IngestOutcome { num_ticks: parsed.ticks.len(), bars, split, datasets })
}

/// Untrained model of `kind` sized for the configured windows.
pub(crate) fn build_model(cfg: &RunConfig, kind: ModelKind) -> Result<AnyModel> {
    let levels = cfg.levels()?;
    let (t, f) = (cfg.data.window_in, cfg.data.features.len());
    Ok(match kind {
        ModelKind::FutureQuant => QuantileTransformer::new(cfg.model_spec()?)?.into(),
        ModelKind::QuantileLinear => QuantileLinear::new(t, f, levels).into(),
        ModelKind::QuantileMlp => QuantileMlp::new(t, f, cfg.model.mlp_hidden, levels).into(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model: AnyModel,
    pub outcome: TrainOutcome,
    pub val_loss: f64,
}

fn fit(cfg: &RunConfig, kind: ModelKind, train_cfg: &TrainConfig, train_ds: &WindowedDataset, val: &WindowedDataset) -> Result<TrainRun> {
    let mut model = build_model(cfg, kind)?;
    let outcome = train(&mut model, train_ds, train_cfg)?;
    let val_loss = evaluate_loss(&model, val, LossKind::Pinball)?;
    Ok(TrainRun { model, outcome, val_loss })
}

/// Trains the configured model on the training dataset.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<TrainRun> {
    let [train_name, val_name, _] = ArtifactNames::DATASETS;
    let train_ds = read_dataset_artifact(out, train_name)?;
    let val_ds = read_dataset_artifact(out, val_name)?;
    check_dataset(cfg, &train_ds)?;
    let kind = cfg.model_kind()?;
    info!("train: {kind} on {} samples, {} epochs", train_ds.num_samples, cfg.train.epochs);
    let run = fit(cfg, kind, &cfg.train, &train_ds, &val_ds)?;
    save_checkpoint(&out.join(ArtifactNames::CHECKPOINT), &run.model)?;
    write_csv(
        out,
        ArtifactNames::LOSS_HISTORY,
        &["epoch", "train_loss"],
        run.outcome.loss_history.iter().enumerate().map(|(e, l)| [(e + 1).to_string(), l.to_string()]),
    )?;
    let mut report = String::new();
    let _ = writeln!(report, "model = {kind}");
    let _ = writeln!(report, "parameters = {}", run.model.params().len());
    let _ = writeln!(report, "train_samples = {}", train_ds.num_samples);
    let _ = writeln!(report, "epochs = {}", cfg.train.epochs);
    let _ = writeln!(report, "seed = {}", cfg.train.seed);
    let _ = writeln!(report, "initial_loss = {:.8}", run.outcome.initial_loss);
    let _ = writeln!(report, "final_loss = {:.8}", run.outcome.final_loss);
    let _ = writeln!(report, "val_loss = {:.8}", run.val_loss);
    write_text(out, ArtifactNames::TRAIN_REPORT, &report)?;
    info!("train: loss {:.6} -> {:.6}, validation {:.6}", run.outcome.initial_loss, run.outcome.final_loss, run.val_loss);
    Ok(run)
}

/// Price-unit forecast of every sample in `ds`.
fn forecast_prices(model: &AnyModel, ds: &WindowedDataset) -> Result<QuantileForecast> {
    Ok(model.predict(ds)?.map_values(|v| ds.target_norm.invert(0, v)))
}

/// Standard deviation of one-step close changes inside each input window, or
/// `None` when close is not an input feature.
fn window_volatility(ds: &WindowedDataset) -> Option<Vec<f64>> {
    let k = ds.feature_names.iter().position(|n| n == Feature::Close.name())?;
    if ds.window_in < 2 {
        return None;
    }
    Some(
        (0..ds.num_samples)
            .map(|i| {
                let input = ds.input(i);
                let closes: Vec<f64> = (0..ds.window_in).map(|t| ds.norm.invert(k, input[t * ds.num_features + k])).collect();
                let diffs: Vec<f64> = closes.windows(2).map(|w| w[1] - w[0]).collect();
                let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
                (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt()
            })
            .collect(),
    )
}

/// Closed-form quantiles for each test sample when the data is synthetic.
fn oracle_forecast(cfg: &RunConfig, ds: &WindowedDataset) -> Result<Option<QuantileForecast>> {
    if cfg.data.source != DataSource::Synthetic {
        return Ok(None);
    }
    let series = generate(&cfg.synthetic)?;
    let levels = cfg.levels()?;
    let rows = ds
        .input_end_times
        .iter()
        .map(|&ts| {
            series.bar_index(ts).map(|t| series.oracle_row(t, levels.as_slice())).ok_or_else(|| {
                PipelineError::Config(format!("window ending at {ts} is not a synthetic bar; re-run ingest"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(QuantileForecast::from_rows(levels, &rows)?))
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub model: ModelKind,
    pub report: MetricsReport,
    pub oracle: Option<MetricsReport>,
}

/// Scores the trained checkpoint on the test dataset.
pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<EvalOutcome> {
    let model = load_model(out)?;
    let test = read_dataset_artifact(out, ArtifactNames::DATASETS[2])?;
    check_model(&model, &test)?;
    let forecast = forecast_prices(&model, &test)?;
    let actuals = test.targets_in_price_units();
    let volatility = window_volatility(&test);
    let report = evaluate(&actuals, &forecast, volatility.as_deref(), &cfg.metrics)?;
    let oracle = oracle_forecast(cfg, &test)?
        .map(|f| evaluate(&actuals, &f, volatility.as_deref(), &cfg.metrics))
        .transpose()?;

    let levels = forecast.levels.as_slice();
    let mut header = vec!["target_time_ms".to_string(), "actual".into()];
    header.extend(level_columns(levels));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..test.num_samples).map(|i| {
        let mut row = vec![test.target_times[i].millis().to_string(), actuals[i].to_string()];
        row.extend(forecast.row(i).iter().map(f64::to_string));
        row
    });
    write_csv(out, ArtifactNames::FORECAST, &header, rows)?;

    let kind = model.kind();
    let mut text = format!("model = {kind}\n{}", report.to_key_value());
    let mut table = format!("{}\n{}\n", MetricsReport::TABLE_HEADER, report.table_row(kind.name()));
    if let Some(o) = &oracle {
        let _ = write!(text, "\n[{ORACLE_ROW}]\n{}", o.to_key_value());
        let _ = writeln!(table, "{}", o.table_row(ORACLE_ROW));
    }
    write_text(out, ArtifactNames::METRICS, &text)?;
    write_text(out, ArtifactNames::METRICS_TABLE, &table)?;
    info!("eval: {kind} picp {:.4} pinaw {:.4} cwc {:.4}", report.picp, report.pinaw, report.cwc);
    Ok(EvalOutcome { model: kind, report, oracle })
}

#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    pub bars: Vec<Bar>,
    pub forecast: QuantileForecast,
    pub result: BacktestResult,
}

/// Runs the indicator strategy over the test bars, forecasting at every bar close.
pub fn cmd_backtest(cfg: &RunConfig, out: &Path) -> Result<BacktestOutcome> {
    let model = load_model(out)?;
    let test = read_dataset_artifact(out, ArtifactNames::DATASETS[2])?;
    check_dataset(cfg, &test)?;
    check_model(&model, &test)?;
    let all_bars = read_bars_artifact(out)?;
    let window_in = cfg.data.window_in;
    let split = Split::new(all_bars.len(), cfg.data.split, window_in)?;
    let bars = all_bars[split.val_end..].to_vec();
    let (inputs, _) = decision_inputs(&all_bars[split.val_end + 1 - window_in..], &cfg.data.features, window_in, &test.norm)?;
    let sample_len = window_in * cfg.data.features.len();
    let values: Vec<f64> = inputs
        .chunks(sample_len)
        .flat_map(|x| model.forward_sample(x))
        .map(|v| test.target_norm.invert(0, v))
        .collect();
    let forecast = QuantileForecast::new(model.levels().clone(), values)?;
    let result = run_backtest(&bars, &forecast, &cfg.indicators, &cfg.strategy, &cfg.backtest)?;
    write_backtest_artifacts(out, &bars, &result)?;
    let s = &result.run.summary;
    info!("backtest: {} bars, {} trades, return {:.6}, max drawdown {:.6}", s.num_bars, s.num_trades, s.cumulative_return, s.max_drawdown);
    Ok(BacktestOutcome { bars, forecast, result })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_backtest_artifacts(out: &Path, bars: &[Bar], r: &BacktestResult) -> Result<()> {
    let run = &r.run;
    write_text(out, ArtifactNames::BACKTEST_SUMMARY, &run.summary.to_key_value())?;
    write_csv(
        out,
        ArtifactNames::EQUITY,
        &["open_time_ms", "close", "position", "equity", "return", "drawdown"],
        bars.iter().enumerate().map(|(i, b)| {
            [
                b.open_time.millis().to_string(),
                b.close.to_string(),
                run.positions[i].side.to_string(),
                run.curve.equity[i].to_string(),
                run.curve.returns[i].to_string(),
                run.drawdown.series[i].to_string(),
            ]
        }),
    )?;
    write_csv(
        out,
        ArtifactNames::SIGNALS,
        &["open_time_ms", "close", "signal", "reason"],
        bars.iter().zip(&r.signals).map(|(b, s)| {
            [b.open_time.millis().to_string(), b.close.to_string(), s.kind.to_string(), s.reason.to_string()]
        }),
    )?;
    write_csv(
        out,
        ArtifactNames::INDICATORS,
        &[
            "open_time_ms", "rsi", "atr_pct", "lower", "lower_inner", "middle", "upper_inner", "upper", "mean",
            "std_dev", "skewness", "excess_kurtosis",
        ],
        bars.iter().enumerate().map(|(i, b)| {
            let (band, shape) = (&r.bands[i], &r.shapes[i]);
            [
                b.open_time.millis().to_string(),
                opt(r.indicators.rsi[i]),
                opt(r.indicators.atr_pct[i]),
                band.lower.to_string(),
                band.lower_inner.to_string(),
                band.middle.to_string(),
                band.upper_inner.to_string(),
                band.upper.to_string(),
                shape.mean.to_string(),
                shape.std_dev.to_string(),
                shape.skewness.to_string(),
                shape.excess_kurtosis.to_string(),
            ]
        }),
    )?;
    write_csv(
        out,
        ArtifactNames::TRADES,
        &["side", "entry_index", "entry_price", "exit_index", "exit_price", "pnl", "cost", "net_pnl"],
        run.trades.iter().map(|t| {
            [
                t.side.to_string(),
                t.entry_index.to_string(),
                t.entry_price.to_string(),
                t.exit_index.to_string(),
                t.exit_price.to_string(),
                t.pnl.to_string(),
                t.cost.to_string(),
                t.net_pnl().to_string(),
            ]
        }),
    )?;
    write_text(out, ArtifactNames::EQUITY_SVG, &svg_line_chart("Equity", &[("equity", &run.curve.equity)]))?;
    write_text(out, ArtifactNames::DRAWDOWN_SVG, &svg_line_chart("Drawdown", &[("drawdown", &run.drawdown.series)]))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    /// `(row name, report)` per model, then the oracle row for synthetic data.
    pub rows: Vec<(String, MetricsReport)>,
    pub runs: Vec<(ModelKind, TrainRun)>,
}

/// Trains every model kind on the same datasets and scores each on the test split.
/// Model `i` trains with seed `train.seed + i`.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<CompareOutcome> {
    let [train_name, val_name, test_name] = ArtifactNames::DATASETS;
    let train_ds = read_dataset_artifact(out, train_name)?;
    let val_ds = read_dataset_artifact(out, val_name)?;
    let test = read_dataset_artifact(out, test_name)?;
    check_dataset(cfg, &train_ds)?;
    info!("compare: {} models on {} samples", ModelKind::ALL.len(), train_ds.num_samples);

    let results: Vec<Result<TrainRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ModelKind::ALL
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let train_cfg = TrainConfig { seed: cfg.train.seed.wrapping_add(i as u64), ..cfg.train.clone() };
                let (train_ds, val_ds) = (&train_ds, &val_ds);
                scope.spawn(move || fit(cfg, kind, &train_cfg, train_ds, val_ds))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });

    let actuals = test.targets_in_price_units();
    let volatility = window_volatility(&test);
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (kind, run) in ModelKind::ALL.into_iter().zip(results) {
        let run = run?;
        let forecast = forecast_prices(&run.model, &test)?;
        rows.push((kind.name().to_string(), evaluate(&actuals, &forecast, volatility.as_deref(), &cfg.metrics)?));
        runs.push((kind, run));
    }
    if let Some(f) = oracle_forecast(cfg, &test)? {
        rows.push((ORACLE_ROW.to_string(), evaluate(&actuals, &f, volatility.as_deref(), &cfg.metrics)?));
    }

    let mut table = format!("{}\n", MetricsReport::TABLE_HEADER);
    for (name, r) in &rows {
        let _ = writeln!(table, "{}", r.table_row(name));
    }
    write_text(out, ArtifactNames::COMPARISON_CSV, &table)?;
    write_text(out, ArtifactNames::COMPARISON_TXT, &comparison_text(cfg, &rows, &runs))?;
    for (name, r) in &rows {
        info!("compare: {name:<16} picp {:.4} pinaw {:.4} cwc {:.4}", r.picp, r.pinaw, r.cwc);
    }
    Ok(CompareOutcome { rows, runs })
}

fn comparison_text(cfg: &RunConfig, rows: &[(String, MetricsReport)], runs: &[(ModelKind, TrainRun)]) -> String {
    let mut s = String::new();
    let n = rows.first().map_or(0, |(_, r)| r.n);
    let _ = writeln!(s, "test samples: {n}");
    let _ = writeln!(s, "nominal coverage: {:.2}", 1.0 - cfg.metrics.beta);
    let _ = writeln!(s, "cwc variant: {} (eta {})", cfg.metrics.cwc_variant.name(), cfg.metrics.eta);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<16} {:>8} {:>8} {:>12} {:>12} {:>9} {:>11} {:>9}", "model", "PICP", "PINAW", "CWC", "pinball", "crossing", "final_loss", "val_loss");
    for (name, r) in rows {
        let run = runs.iter().find(|(k, _)| k.name() == name).map(|(_, run)| run);
        let (fl, vl) = match run {
            Some(run) => (format!("{:.6}", run.outcome.final_loss), format!("{:.6}", run.val_loss)),
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(
            s,
            "{:<16} {:>8.4} {:>8.4} {:>12.6} {:>12.6} {:>9.4} {:>11} {:>9}",
            name, r.picp, r.pinaw, r.cwc, r.mean_pinball_overall, r.crossing_rate, fl, vl
        );
    }
    s
}
