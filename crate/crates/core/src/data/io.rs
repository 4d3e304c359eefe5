//! File formats.
//!
//! CSV: a header `feature_0,...,feature_{d-1},label[,true_label]`, then one
//! sample per line with decimal floats and integer labels.
//!
//! IDX: big-endian IDX3 images (magic `0x00000803`, count, rows, cols, then
//! one byte per pixel) and IDX1 labels (magic `0x00000801`, count, then one
//! byte per label). Pixels are scaled to `[0, 1]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::dataset::{Dataset, LabeledSample, Modality, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IDX3_MAGIC: u32 = 0x0000_0803;
pub const IDX1_MAGIC: u32 = 0x0000_0801;

fn infer_classes(labels: impl Iterator<Item = usize>, num_classes: Option<usize>) -> usize {
    num_classes.unwrap_or_else(|| labels.max().map_or(0, |m| m + 1))
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, num_classes: Option<usize>, split: Split) -> Result<Dataset<T>> {
    parse_csv(&fs::read_to_string(path)?, num_classes, split)
}

/// Parse CSV text. `num_classes` overrides the inferred `max label + 1`.
pub fn parse_csv<T: Scalar>(text: &str, num_classes: Option<usize>, split: Split) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::parse_line(1, "empty file, expected a header")),
        Some(r) => r.map_err(|e| Error::parse_line(1, e.to_string()))?,
    };
    let cols: Vec<&str> = header.iter().collect();
    let has_truth = cols.last() == Some(&"true_label");
    let label_col = if has_truth { cols.len() - 2 } else { cols.len() - 1 };
    if cols.len() < 2 || cols.get(label_col) != Some(&"label") {
        return Err(Error::parse_line(1, "header must end with `label` or `label,true_label`"));
    }
    for (k, name) in cols[..label_col].iter().enumerate() {
        if *name != format!("feature_{k}") {
            return Err(Error::parse_line(1, format!("column {k} should be `feature_{k}`, found `{name}`")));
        }
    }

    let width = cols.len();
    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse_line(line, e.to_string())
        })?;
        let line = rec.position().map_or(samples.len() + 2, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::parse_line(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let features = rec
            .iter()
            .take(label_col)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::parse_line(line, format!("bad feature value `{f}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        let parse_label = |f: &str| f.parse::<usize>().map_err(|_| Error::parse_line(line, format!("bad label `{f}`")));
        let observed_label = parse_label(&rec[label_col])?;
        let true_label = if has_truth { Some(parse_label(&rec[label_col + 1])?) } else { None };
        let sample_id = samples.len();
        samples.push((line, LabeledSample { features, observed_label, true_label, sample_id }));
    }
    if samples.is_empty() {
        return Err(Error::parse_line(2, "no samples after the header"));
    }
    let c = infer_classes(
        samples.iter().flat_map(|(_, s)| std::iter::once(s.observed_label).chain(s.true_label)),
        num_classes,
    );
    if let Some((line, _)) = samples.iter().find(|(_, s)| s.observed_label >= c || s.true_label.is_some_and(|t| t >= c))
    {
        return Err(Error::parse_line(*line, format!("label not below class count {c}")));
    }
    Dataset::new(samples.into_iter().map(|(_, s)| s).collect(), c, split, Modality::Vector)
}

/// Write a dataset in the CSV layout accepted by [`load_csv`].
pub fn write_csv<T: Scalar, W: Write>(w: &mut W, dataset: &Dataset<T>) -> Result<()> {
    let with_truth = dataset.samples().iter().all(|s| s.true_label.is_some());
    let mut header: Vec<String> = (0..dataset.dim()).map(|k| format!("feature_{k}")).collect();
    header.push("label".into());
    if with_truth {
        header.push("true_label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for s in dataset.samples() {
        let mut fields: Vec<String> = s.features.iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
        fields.push(s.observed_label.to_string());
        if let (true, Some(t)) = (with_truth, s.true_label) {
            fields.push(t.to_string());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Two-column `sample_id,flipped` listing, flags written as 0/1.
pub fn write_noise_mask<W: Write>(w: &mut W, sample_ids: &[usize], flipped: &[bool]) -> Result<()> {
    if sample_ids.len() != flipped.len() {
        return Err(Error::input("sample_ids and flipped flags differ in length"));
    }
    writeln!(w, "sample_id,flipped")?;
    for (id, f) in sample_ids.iter().zip(flipped) {
        writeln!(w, "{id},{}", u8::from(*f))?;
    }
    Ok(())
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::parse_byte(offset, format!("file ends before {what}")))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0, "magic number")?;
    if magic != expected {
        return Err(Error::parse_byte(0, format!("magic {magic:#010x} does not match expected {expected:#010x}")));
    }
    Ok(())
}

/// Decode IDX3 image bytes into (count, rows, cols, pixels).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    check_magic(bytes, IDX3_MAGIC)?;
    let n = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let need = n * rows * cols;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(Error::parse_byte(
            16 + body.len().min(need),
            format!("expected {need} pixel bytes, found {}", body.len()),
        ));
    }
    Ok((n, rows, cols, body))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    check_magic(bytes, IDX1_MAGIC)?;
    let n = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::parse_byte(
            8 + body.len().min(n),
            format!("expected {n} label bytes, found {}", body.len()),
        ));
    }
    Ok(body)
}

pub fn load_idx<T: Scalar>(
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    num_classes: Option<usize>,
    split: Split,
) -> Result<Dataset<T>> {
    let images = fs::read(image_path)?;
    let labels = fs::read(label_path)?;
    idx_dataset(&images, &labels, num_classes, split)
}

pub fn idx_dataset<T: Scalar>(
    image_bytes: &[u8],
    label_bytes: &[u8],
    num_classes: Option<usize>,
    split: Split,
) -> Result<Dataset<T>> {
    let (n, rows, cols, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != n {
        return Err(Error::parse_byte(4, format!("{n} images but {} labels", labels.len())));
    }
    if n == 0 || rows * cols == 0 {
        return Err(Error::parse_byte(4, "IDX file holds no data"));
    }
    let c = infer_classes(labels.iter().map(|&l| l as usize), num_classes);
    if let Some(i) = labels.iter().position(|&l| l as usize >= c) {
        return Err(Error::parse_byte(8 + i, format!("label {} not below class count {c}", labels[i])));
    }
    let px = rows * cols;
    let samples = (0..n)
        .map(|i| LabeledSample {
            features: pixels[i * px..(i + 1) * px].iter().map(|&b| T::lit(f64::from(b) / 255.0)).collect(),
            observed_label: labels[i] as usize,
            true_label: None,
            sample_id: i,
        })
        .collect();
    Dataset::new(samples, c, split, Modality::Image { height: rows, width: cols })
}

/// Encode images (row-major bytes) and labels as IDX3/IDX1 byte buffers.
pub fn encode_idx(rows: usize, cols: usize, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let n = labels.len() as u32;
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IDX3_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX1_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
