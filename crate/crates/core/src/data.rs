//! Dataset loading, synthetic generation, and partitioning of labeled
//! sequences across nodes.
//!
//! The interchange format is JSON Lines, one record per labeled sequence:
//! `{"seq": [[f64, ...] x m], "label": f64}` where every inner array is one
//! sequence column of length `p`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lstm::{predict, run_sequence, LabeledSequence, LstmParams, PoolingMode};
use crate::rng::{substream, STREAM_DATA};

/// An ordered collection of labeled sequences sharing one feature
/// dimension. `p` is `None` until the first item pins it down.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    items: Vec<LabeledSequence>,
    p: Option<usize>,
}

impl Dataset {
    pub fn from_items(items: Vec<LabeledSequence>) -> Result<Self> {
        let p = items.first().map(|item| item.x.nrows());
        if let Some(p) = p {
            if let Some(bad) = items.iter().find(|item| item.x.nrows() != p) {
                return Err(Error::DimensionMismatch {
                    context: "dataset feature dimension",
                    expected: p,
                    got: bad.x.nrows(),
                });
            }
        }
        Ok(Dataset { items, p })
    }

    pub fn items(&self) -> &[LabeledSequence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Feature dimension; undefined (and an error to rely on) while empty.
    pub fn feature_dim(&self) -> Option<usize> {
        self.p
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    seq: Vec<Vec<f64>>,
    label: f64,
}

/// Parse JSON Lines from a reader. Errors carry the 1-based line number.
pub fn parse_jsonl(reader: impl BufRead) -> Result<Dataset> {
    let mut items = Vec::new();
    let mut p: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::DatasetParse {
            line: lineno,
            message: e.to_string(),
        })?;
        if record.seq.is_empty() {
            return Err(Error::DatasetParse {
                line: lineno,
                message: "sequence has no columns".into(),
            });
        }
        let expected = *p.get_or_insert(record.seq[0].len());
        for col in &record.seq {
            if col.len() != expected {
                return Err(Error::DatasetParse {
                    line: lineno,
                    message: format!("column of length {} in a p = {expected} dataset", col.len()),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::DatasetParse {
                    line: lineno,
                    message: "non-finite feature value".into(),
                });
            }
        }
        if !record.label.is_finite() {
            return Err(Error::DatasetParse {
                line: lineno,
                message: "non-finite label".into(),
            });
        }
        let item =
            LabeledSequence::from_columns(&record.seq, record.label).map_err(|e| Error::DatasetParse {
                line: lineno,
                message: e.to_string(),
            })?;
        items.push(item);
    }
    Dataset::from_items(items)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_jsonl(BufReader::new(file))
}

/// 17 significant digits: enough for an exact f64 round trip through
/// decimal.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write the dataset in the JSONL schema with round-trip-exact numbers.
pub fn write_jsonl(dataset: &Dataset, mut writer: impl Write) -> Result<()> {
    for item in &dataset.items {
        let mut line = String::from("{\"seq\":[");
        for (ci, col) in item.x.column_iter().enumerate() {
            if ci > 0 {
                line.push(',');
            }
            line.push('[');
            for (ri, v) in col.iter().enumerate() {
                if ri > 0 {
                    line.push(',');
                }
                line.push_str(&format_f64(*v));
            }
            line.push(']');
        }
        line.push_str("],\"label\":");
        line.push_str(&format_f64(item.label));
        line.push('}');
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn save_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_jsonl(dataset, std::io::BufWriter::new(file))
}

/// Second-order autoregressive surrogate for a smooth rate series: each item
/// is the previous two values as a single column (`p = 2`, one column) with
/// the next value as its label.
///
/// `len` is the length of the underlying series; the dataset holds
/// `len - 2` items. With driving noise the recursion must be stable, i.e.
/// the roots of `z^2 - a1 z - a2` stay inside the unit circle.
pub fn synth_window_series(seed: u64, len: usize, a1: f64, a2: f64, noise_sd: f64) -> Result<Dataset> {
    if len < 3 {
        return Err(Error::Config(format!(
            "series length must be at least 3, got {len}"
        )));
    }
    if noise_sd > 0.0 && ar2_spectral_radius(a1, a2) >= 1.0 {
        return Err(Error::UnstableSeries);
    }
    let mut rng = substream(seed, STREAM_DATA, 0, 0);
    let normal = Normal::new(0.0, noise_sd.max(0.0)).map_err(|_| Error::NonFinite("noise sd"))?;
    let mut prev2 = 0.1f64;
    let mut prev1 = 0.1f64;
    let mut items = Vec::with_capacity(len - 2);
    for _ in 3..=len {
        let shock = if noise_sd > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        let value = a1 * prev1 + a2 * prev2 + shock;
        items.push(LabeledSequence::from_columns(&[vec![prev1, prev2]], value)?);
        prev2 = prev1;
        prev1 = value;
    }
    Dataset::from_items(items)
}

fn ar2_spectral_radius(a1: f64, a2: f64) -> f64 {
    // Roots of z^2 - a1 z - a2.
    let disc = a1 * a1 + 4.0 * a2;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (((a1 + s) / 2.0).abs()).max(((a1 - s) / 2.0).abs())
    } else {
        // Complex pair with |z|^2 = -a2.
        (-a2).sqrt()
    }
}

/// Teacher-generated variable-length dataset: column counts uniform on
/// `1..=m_max`, standard-normal columns, labels from the teacher's
/// mean-pooled readout plus Gaussian noise. A realizable target, so filters
/// can be checked for consistency.
pub fn synth_varlen(
    seed: u64,
    count: usize,
    p: usize,
    m_max: usize,
    teacher: &LstmParams,
    noise_sd: f64,
) -> Result<Dataset> {
    if m_max == 0 {
        return Err(Error::Config("m_max must be at least 1".into()));
    }
    if teacher.p() != p {
        return Err(Error::DimensionMismatch {
            context: "teacher feature dimension",
            expected: p,
            got: teacher.p(),
        });
    }
    let mut rng = substream(seed, STREAM_DATA, 1, 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let label_noise = Normal::new(0.0, noise_sd.max(0.0)).map_err(|_| Error::NonFinite("noise sd"))?;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let m = rng.gen_range(1..=m_max);
        let mut columns = Vec::with_capacity(m);
        for _ in 0..m {
            columns.push((0..p).map(|_| normal.sample(&mut rng)).collect::<Vec<f64>>());
        }
        let item = LabeledSequence::from_columns(&columns, 0.0)?;
        let (pooled, _) = run_sequence(teacher, &item.x, PoolingMode::Mean)?;
        let mut label = predict(&teacher.readout, &pooled)?;
        if noise_sd > 0.0 {
            label += label_noise.sample(&mut rng);
        }
        items.push(LabeledSequence { x: item.x, label });
    }
    Dataset::from_items(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    RoundRobin,
    Contiguous,
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round_robin" => Ok(PartitionScheme::RoundRobin),
            "contiguous" => Ok(PartitionScheme::Contiguous),
            other => Err(Error::Config(format!("unknown partition scheme `{other}`"))),
        }
    }
}

/// Per-node ordered item streams; one item is consumed per node per round.
#[derive(Debug, Clone)]
pub struct NodeStreams {
    streams: Vec<Vec<LabeledSequence>>,
}

impl NodeStreams {
    pub fn node_count(&self) -> usize {
        self.streams.len()
    }

    pub fn stream(&self, node: usize) -> &[LabeledSequence] {
        &self.streams[node]
    }

    pub fn min_len(&self) -> usize {
        self.streams.iter().map(Vec::len).min().unwrap_or(0)
    }
}

/// Split a dataset across `k` nodes. Round-robin deals item `t` to node
/// `t mod k`; contiguous cuts the dataset into `k` runs of near-equal
/// length.
pub fn partition(dataset: &Dataset, k: usize, scheme: PartitionScheme) -> Result<NodeStreams> {
    if k == 0 {
        return Err(Error::Config("node count must be at least 1".into()));
    }
    if k > dataset.len() {
        return Err(Error::InsufficientData {
            need: k,
            have: dataset.len(),
        });
    }
    let mut streams: Vec<Vec<LabeledSequence>> = (0..k).map(|_| Vec::new()).collect();
    match scheme {
        PartitionScheme::RoundRobin => {
            for (t, item) in dataset.items().iter().enumerate() {
                streams[t % k].push(item.clone());
            }
        }
        PartitionScheme::Contiguous => {
            let base = dataset.len() / k;
            let extra = dataset.len() % k;
            let mut at = 0usize;
            for (node, stream) in streams.iter_mut().enumerate() {
                let take = base + usize::from(node < extra);
                stream.extend(dataset.items()[at..at + take].iter().cloned());
                at += take;
            }
        }
    }
    Ok(NodeStreams { streams })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::STREAM_INIT;
    use std::io::Cursor;

    #[test]
    fn minimal_line_parses() {
        let ds = parse_jsonl(Cursor::new(r#"{"seq": [[0.1, 0.2]], "label": 1.0}"#)).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.feature_dim(), Some(2));
        assert_eq!(ds.items()[0].len(), 1);
        assert_eq!(ds.items()[0].label, 1.0);
    }

    #[test]
    fn empty_input_gives_empty_dataset_with_undefined_p() {
        let ds = parse_jsonl(Cursor::new("")).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.feature_dim(), None);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let ragged = "{\"seq\": [[0.1, 0.2]], \"label\": 1.0}\n{\"seq\": [[0.1]], \"label\": 2.0}\n";
        match parse_jsonl(Cursor::new(ragged)) {
            Err(Error::DatasetParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let ragged_inner = "{\"seq\": [[0.1, 0.2], [0.3]], \"label\": 1.0}\n";
        assert!(matches!(
            parse_jsonl(Cursor::new(ragged_inner)),
            Err(Error::DatasetParse { line: 1, .. })
        ));

        let missing = "{\"seq\": [[0.1]]}\n";
        assert!(matches!(
            parse_jsonl(Cursor::new(missing)),
            Err(Error::DatasetParse { line: 1, .. })
        ));

        let non_numeric = "{\"seq\": [[\"x\"]], \"label\": 1.0}\n";
        assert!(matches!(
            parse_jsonl(Cursor::new(non_numeric)),
            Err(Error::DatasetParse { line: 1, .. })
        ));

        let nan_literal = "{\"seq\": [[NaN]], \"label\": 1.0}\n";
        assert!(matches!(
            parse_jsonl(Cursor::new(nan_literal)),
            Err(Error::DatasetParse { line: 1, .. })
        ));

        let empty_seq = "{\"seq\": [], \"label\": 1.0}\n";
        assert!(matches!(
            parse_jsonl(Cursor::new(empty_seq)),
            Err(Error::DatasetParse { line: 1, .. })
        ));
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let teacher = {
            let mut rng = substream(5, STREAM_INIT, 0, 0);
            LstmParams::random_uniform(2, 3, 0.5, &mut rng)
        };
        let ds = synth_varlen(9, 25, 3, 4, &teacher, 0.1).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&ds, &mut buf).unwrap();
        let back = parse_jsonl(Cursor::new(&buf)).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in ds.items().iter().zip(back.items()) {
            assert_eq!(a.label.to_bits(), b.label.to_bits());
            assert_eq!(a.x.ncols(), b.x.ncols());
            for (va, vb) in a.x.iter().zip(b.x.iter()) {
                assert_eq!(va.to_bits(), vb.to_bits());
            }
        }
    }

    #[test]
    fn window_series_recurrence_values() {
        let ds = synth_window_series(1, 4, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(ds.len(), 2);
        let first = &ds.items()[0];
        assert_eq!(first.x.as_slice(), &[0.1, 0.1]);
        assert!((first.label - 0.05).abs() < 1e-15);
        // Next item shifts the window: [v3, v2] with label v4.
        let second = &ds.items()[1];
        assert_eq!(second.x.as_slice(), &[0.05, 0.1]);
        assert!((second.label - 0.025).abs() < 1e-15);
    }

    #[test]
    fn instability_is_rejected_only_with_noise() {
        assert!(matches!(
            synth_window_series(1, 10, 1.0, 0.0, 0.1),
            Err(Error::UnstableSeries)
        ));
        // Noise-free constant drift is accepted.
        let ds = synth_window_series(1, 10, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(ds.len(), 8);
        // Complex-root case inside the unit circle is fine.
        assert!(synth_window_series(1, 10, 0.2, -0.5, 0.1).is_ok());
        assert!(matches!(
            synth_window_series(1, 10, 0.0, -1.0, 0.1),
            Err(Error::UnstableSeries)
        ));
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let a = synth_window_series(7, 50, 0.8, -0.2, 0.05).unwrap();
        let b = synth_window_series(7, 50, 0.8, -0.2, 0.05).unwrap();
        for (x, y) in a.items().iter().zip(b.items()) {
            assert_eq!(x.label.to_bits(), y.label.to_bits());
        }
        let c = synth_window_series(8, 50, 0.8, -0.2, 0.05).unwrap();
        assert!(a.items()[0].label != c.items()[0].label);
    }

    #[test]
    fn varlen_shapes_and_exact_teacher_labels() {
        let teacher = {
            let mut rng = substream(6, STREAM_INIT, 0, 0);
            LstmParams::random_uniform(2, 2, 0.5, &mut rng)
        };
        let short = synth_varlen(3, 30, 2, 1, &teacher, 0.1).unwrap();
        assert!(short.items().iter().all(|i| i.len() == 1));

        let clean = synth_varlen(4, 30, 2, 4, &teacher, 0.0).unwrap();
        for item in clean.items() {
            let (pooled, _) = run_sequence(&teacher, &item.x, PoolingMode::Mean).unwrap();
            let expected = predict(&teacher.readout, &pooled).unwrap();
            assert_eq!(item.label, expected);
        }
        assert!(clean.items().iter().any(|i| i.len() > 1));
    }

    #[test]
    fn varlen_label_variance_is_teacher_variance_plus_noise() {
        let teacher = {
            let mut rng = substream(16, STREAM_INIT, 0, 0);
            LstmParams::random_uniform(2, 2, 0.5, &mut rng)
        };
        let count = 10_000usize;
        let noisy = synth_varlen(21, count, 2, 3, &teacher, 0.1).unwrap();
        let clean = synth_varlen(21, count, 2, 3, &teacher, 0.0).unwrap();
        let var = |values: Vec<f64>| {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
        };
        let noisy_var = var(noisy.items().iter().map(|i| i.label).collect());
        let clean_var = var(clean.items().iter().map(|i| i.label).collect());
        let expected = clean_var + 0.01;
        assert!(
            (noisy_var - expected).abs() < 0.1 * expected,
            "noisy {noisy_var} vs expected {expected}"
        );
    }

    #[test]
    fn partition_schemes() {
        let ds = synth_window_series(2, 12, 0.5, 0.1, 0.0).unwrap();
        assert_eq!(ds.len(), 10);

        let single = partition(&ds, 1, PartitionScheme::RoundRobin).unwrap();
        assert_eq!(single.stream(0).len(), 10);
        for (a, b) in single.stream(0).iter().zip(ds.items()) {
            assert_eq!(a.label, b.label);
        }

        let rr = partition(&ds, 4, PartitionScheme::RoundRobin).unwrap();
        assert_eq!(rr.stream(0)[0].label, ds.items()[0].label);
        assert_eq!(rr.stream(0)[1].label, ds.items()[4].label);
        let lens: Vec<usize> = (0..4).map(|k| rr.stream(k).len()).collect();
        assert_eq!(lens, vec![3, 3, 2, 2]);
        assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);

        let contiguous = partition(&ds, 3, PartitionScheme::Contiguous).unwrap();
        let lens: Vec<usize> = (0..3).map(|k| contiguous.stream(k).len()).collect();
        assert_eq!(lens.iter().sum::<usize>(), 10);
        assert_eq!(contiguous.stream(0)[0].label, ds.items()[0].label);

        // Union equals the dataset as a multiset, any scheme.
        for scheme in [PartitionScheme::RoundRobin, PartitionScheme::Contiguous] {
            let parts = partition(&ds, 4, scheme).unwrap();
            let mut all: Vec<f64> = (0..4)
                .flat_map(|k| parts.stream(k).iter().map(|i| i.label))
                .collect();
            let mut expected: Vec<f64> = ds.items().iter().map(|i| i.label).collect();
            all.sort_by(f64::total_cmp);
            expected.sort_by(f64::total_cmp);
            assert_eq!(all, expected);
        }

        assert!(matches!(
            partition(&ds, 11, PartitionScheme::RoundRobin),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn format_f64_round_trips() {
        for v in [0.1, -0.0, 1.0 / 3.0, 2.5e-17, 123456.789, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
    }
}
