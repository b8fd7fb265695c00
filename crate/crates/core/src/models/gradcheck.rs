//! Central-difference verification of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LossKind, ModelError, QuantileModel, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Parameters sampled for comparison; all parameters when the model has fewer.
    pub num_params: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Residuals this close to zero count as sitting on a pinball kink.
    pub kink_tolerance: f64,
    /// Lower bound on the relative-error denominator.
    pub denominator_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            num_params: 200,
            seed: 0,
            loss: LossKind::Pinball,
            kink_tolerance: 1e-7,
            denominator_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameters whose gradients were compared.
    pub checked: usize,
    /// Sampled parameters skipped because a perturbation crossed a kink.
    pub excluded: usize,
    /// Parameter with the largest error, as `tensor[offset]`.
    pub worst: Option<String>,
}

struct Probe<'a, M: ?Sized> {
    model: &'a M,
    inputs: &'a [f64],
    targets: &'a [f64],
    loss: LossKind,
    kink_tolerance: f64,
}

impl<M: QuantileModel + ?Sized> Probe<'_, M> {
    fn samples(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs.chunks(self.model.input_len().max(1)).zip(self.targets.iter().copied())
    }

    fn loss(&self) -> f64 {
        let levels = self.model.levels().as_slice();
        let mut dout = vec![0.0; levels.len()];
        let total: f64 = self
            .samples()
            .map(|(x, y)| self.loss.evaluate(&self.model.forward_sample(x), y, levels, &mut dout))
            .sum();
        total / self.targets.len() as f64
    }

    /// ReLU activation signs and residual signs; `None` when some residual sits on a kink.
    fn regime(&self) -> Option<Vec<bool>> {
        let mut pattern = Vec::new();
        for (x, y) in self.samples() {
            pattern.extend(self.model.activation_pattern(x));
            if self.loss == LossKind::Pinball {
                for o in self.model.forward_sample(x) {
                    let r = o - y;
                    if r.abs() < self.kink_tolerance {
                        return None;
                    }
                    pattern.push(r > 0.0);
                }
            }
        }
        Some(pattern)
    }
}

/// Compares analytic and central-difference gradients of the batch loss on a random
/// subset of parameters. `inputs` holds `targets.len()` flattened windows.
pub fn gradient_check<M: QuantileModel + Clone>(
    model: &M,
    inputs: &[f64],
    targets: &[f64],
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if targets.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if inputs.len() != targets.len() * model.input_len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} input values for {} targets of window length {}",
            inputs.len(),
            targets.len(),
            model.input_len()
        )));
    }
    let mut work = model.clone();
    let n = targets.len();
    let mut analytic = vec![0.0; work.params().len()];
    for (x, &y) in inputs.chunks(work.input_len().max(1)).zip(targets) {
        work.backward_sample(x, y, config.loss, None, 1.0 / n as f64, &mut analytic);
    }

    let probe = |m: &M| Probe { model: m, inputs, targets, loss: config.loss, kink_tolerance: config.kink_tolerance }.regime();
    let base_regime = probe(&work);

    let total = work.params().len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen = sample(&mut rng, total, config.num_params.min(total)).into_vec();
    chosen.sort_unstable();

    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, excluded: 0, worst: None };
    let h = config.step;
    for idx in chosen {
        let saved = work.params().values()[idx];
        let evaluate = |value: f64, work: &mut M| {
            work.params_mut().values_mut()[idx] = value;
            let p = Probe { model: &*work, inputs, targets, loss: config.loss, kink_tolerance: config.kink_tolerance };
            (p.loss(), p.regime())
        };
        let (plus, plus_regime) = evaluate(saved + h, &mut work);
        let (minus, minus_regime) = evaluate(saved - h, &mut work);
        work.params_mut().values_mut()[idx] = saved;

        if base_regime.is_none() || plus_regime != base_regime || minus_regime != base_regime {
            report.excluded += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(config.denominator_floor);
        report.checked += 1;
        if report.worst.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            let info = work.params().owner_of(idx).expect("index within parameter set");
            report.worst = Some(format!("{}[{}]", info.name, idx - info.offset));
        }
    }
    Ok(report)
}
