//! Plain-text model checkpoints.
//!
//! ```text
//! quantband-checkpoint v1
//! [spec]
//! kind = futurequant
//! window_in = 5
//! ...
//! [params]
//! input.kernel 1x16
//! <16 space-separated values>
//! ...
//! ```
//!
//! Values use the shortest representation that parses back to the same `f64`, so a
//! save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::RngCore;

use super::{
    LossKind, ModelError, ModelKind, ModelSpec, ParameterSet, QuantileLevels, QuantileLinear, QuantileMlp,
    QuantileModel, QuantileTransformer, Result,
};

pub const CHECKPOINT_HEADER: &str = "quantband-checkpoint v1";

/// Any of the supported models, for code that picks the kind at run time.
#[derive(Debug, Clone)]
pub enum AnyModel {
    FutureQuant(QuantileTransformer),
    Linear(QuantileLinear),
    Mlp(QuantileMlp),
}

impl From<QuantileTransformer> for AnyModel {
    fn from(m: QuantileTransformer) -> Self {
        AnyModel::FutureQuant(m)
    }
}

impl From<QuantileLinear> for AnyModel {
    fn from(m: QuantileLinear) -> Self {
        AnyModel::Linear(m)
    }
}

impl From<QuantileMlp> for AnyModel {
    fn from(m: QuantileMlp) -> Self {
        AnyModel::Mlp(m)
    }
}

impl AnyModel {
    fn inner(&self) -> &dyn QuantileModel {
        match self {
            AnyModel::FutureQuant(m) => m,
            AnyModel::Linear(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn QuantileModel {
        match self {
            AnyModel::FutureQuant(m) => m,
            AnyModel::Linear(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    fn spec_entries(&self) -> Vec<(&'static str, String)> {
        let levels = join(self.levels().as_slice());
        let mut out = vec![("kind", self.kind().name().to_string())];
        match self {
            AnyModel::FutureQuant(m) => {
                let s = m.spec();
                out.extend([
                    ("window_in", s.window_in.to_string()),
                    ("num_features", s.num_features.to_string()),
                    ("num_blocks", s.num_blocks.to_string()),
                    ("num_heads", s.num_heads.to_string()),
                    ("key_dim", s.key_dim.to_string()),
                    ("conv_channels", s.conv_channels.to_string()),
                    ("conv_kernel", s.conv_kernel.to_string()),
                    ("dense_units", format!("{},{}", s.dense_units[0], s.dense_units[1])),
                    ("dropout_rate", s.dropout_rate.to_string()),
                    ("layer_norm_eps", s.layer_norm_eps.to_string()),
                ]);
            }
            AnyModel::Linear(m) => {
                out.extend([
                    ("window_in", m.window_in().to_string()),
                    ("num_features", m.num_features().to_string()),
                ]);
            }
            AnyModel::Mlp(m) => {
                out.extend([
                    ("window_in", m.window_in().to_string()),
                    ("num_features", m.num_features().to_string()),
                    ("hidden", m.hidden().to_string()),
                ]);
            }
        }
        out.push(("levels", levels));
        out
    }
}

impl QuantileModel for AnyModel {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }

    fn levels(&self) -> &QuantileLevels {
        self.inner().levels()
    }

    fn window_in(&self) -> usize {
        self.inner().window_in()
    }

    fn num_features(&self) -> usize {
        self.inner().num_features()
    }

    fn params(&self) -> &ParameterSet {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        self.inner_mut().params_mut()
    }

    fn forward_sample(&self, input: &[f64]) -> Vec<f64> {
        self.inner().forward_sample(input)
    }

    fn backward_sample(
        &self,
        input: &[f64],
        target: f64,
        loss: LossKind,
        dropout: Option<&mut dyn RngCore>,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        self.inner().backward_sample(input, target, loss, dropout, scale, grad)
    }

    fn activation_pattern(&self, input: &[f64]) -> Vec<bool> {
        self.inner().activation_pattern(input)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &AnyModel) -> Result<()> {
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    writeln!(w, "[spec]")?;
    for (k, v) in model.spec_entries() {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "[params]")?;
    let params = model.params();
    for t in params.tensors() {
        let shape = t.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        writeln!(w, "{} {}", t.name, shape)?;
        let values = &params.values()[t.range()];
        let line = values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

struct SpecBlock(BTreeMap<String, String>);

impl SpecBlock {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0.get(key).map(String::as_str).ok_or_else(|| corrupt(format!("missing spec key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| corrupt(format!("bad value `{raw}` for `{key}`")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| corrupt(format!("bad value `{raw}` for `{key}`"))))
            .collect()
    }
}

fn build(spec: &SpecBlock) -> Result<AnyModel> {
    let kind: ModelKind = spec.parse("kind")?;
    let levels = QuantileLevels::new(spec.list("levels")?)?;
    let window_in = spec.parse("window_in")?;
    let num_features = spec.parse("num_features")?;
    Ok(match kind {
        ModelKind::FutureQuant => {
            let dense: Vec<usize> = spec.list("dense_units")?;
            let dense_units: [usize; 2] =
                dense.try_into().map_err(|_| corrupt("dense_units must have two entries"))?;
            AnyModel::FutureQuant(QuantileTransformer::new(ModelSpec {
                window_in,
                num_features,
                num_blocks: spec.parse("num_blocks")?,
                num_heads: spec.parse("num_heads")?,
                key_dim: spec.parse("key_dim")?,
                conv_channels: spec.parse("conv_channels")?,
                conv_kernel: spec.parse("conv_kernel")?,
                dense_units,
                dropout_rate: spec.parse("dropout_rate")?,
                layer_norm_eps: spec.parse("layer_norm_eps")?,
                levels,
            })?)
        }
        ModelKind::QuantileLinear => AnyModel::Linear(QuantileLinear::new(window_in, num_features, levels)),
        ModelKind::QuantileMlp => {
            AnyModel::Mlp(QuantileMlp::new(window_in, num_features, spec.parse("hidden")?, levels))
        }
    })
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<AnyModel> {
    let mut lines = reader.lines();
    let mut next = move || -> Result<Option<String>> { lines.next().transpose().map_err(ModelError::from) };

    if next()?.as_deref().map(str::trim_end) != Some(CHECKPOINT_HEADER) {
        return Err(corrupt(format!("expected header `{CHECKPOINT_HEADER}`")));
    }
    if next()?.as_deref().map(str::trim) != Some("[spec]") {
        return Err(corrupt("expected `[spec]` section"));
    }
    let mut entries = BTreeMap::new();
    loop {
        let line = next()?.ok_or_else(|| corrupt("missing `[params]` section"))?;
        let line = line.trim();
        if line == "[params]" {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| corrupt(format!("bad spec line `{line}`")))?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut model = build(&SpecBlock(entries))?;

    let layout: Vec<_> = model.params().tensors().to_vec();
    for t in &layout {
        let head = next()?.ok_or_else(|| corrupt(format!("missing tensor `{}`", t.name)))?;
        let (name, shape) = head
            .trim()
            .split_once(' ')
            .ok_or_else(|| corrupt(format!("bad tensor header `{head}`")))?;
        let expected = t.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        if name != t.name || shape != expected {
            return Err(corrupt(format!("expected tensor `{} {expected}`, found `{}`", t.name, head.trim())));
        }
        let body = next()?.ok_or_else(|| corrupt(format!("missing values for `{name}`")))?;
        let values: Vec<f64> = body
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| corrupt(format!("bad number `{s}` in `{name}`"))))
            .collect::<Result<_>>()?;
        if values.len() != t.len() {
            return Err(corrupt(format!("`{name}` has {} values, expected {}", values.len(), t.len())));
        }
        model.params_mut().values_mut()[t.range()].copy_from_slice(&values);
    }
    while let Some(line) = next()? {
        if !line.trim().is_empty() {
            return Err(corrupt(format!("unexpected trailing line `{line}`")));
        }
    }
    if !model.params().all_finite() {
        return Err(corrupt("non-finite parameter"));
    }
    Ok(model)
}

/// Writes atomically: the file at `path` is either the old one or the complete new one.
pub fn save_checkpoint(path: &Path, model: &AnyModel) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_checkpoint(BufWriter::new(tmp.as_file_mut()), model)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| ModelError::Io(e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AnyModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(mut model: AnyModel) {
        model.params_mut().initialize(&mut ChaCha8Rng::seed_from_u64(3));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.kind(), model.kind());
        assert_eq!(back.params().tensors(), model.params().tensors());
        let bits = |m: &AnyModel| m.params().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&model));
        let mut again = Vec::new();
        write_checkpoint(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn all_kinds_round_trip_bit_exactly() {
        round_trip(QuantileTransformer::new(ModelSpec::default()).unwrap().into());
        round_trip(QuantileLinear::new(30, 1, QuantileLevels::default()).into());
        round_trip(QuantileMlp::new(30, 2, 8, QuantileLevels::default()).into());
    }

    #[test]
    fn rejects_corruption() {
        let model: AnyModel = QuantileLinear::new(2, 1, QuantileLevels::new(vec![0.5]).unwrap()).into();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(read_checkpoint("bogus\n".as_bytes()).is_err());
        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(truncated.as_bytes()).is_err());
        let reshaped = text.replace("linear.kernel 2x1", "linear.kernel 1x2");
        assert!(read_checkpoint(reshaped.as_bytes()).is_err());
    }
}
