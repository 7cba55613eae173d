use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{Dataset, Targets};
use crate::error::{Error, Result};

/// How the last CSV column is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    /// Class names, mapped to `0..c` in order of first appearance.
    Label,
    Value,
}

/// Reads a comma-separated file whose last column is the target.
///
/// A first row with a non-numeric feature field is taken as the header.
pub fn load_csv(path: &Path, name: &str, target: TargetColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut labels = Vec::new();
    let mut reals = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if fields.len() < 2 {
            return Err(parse_err(line, "need at least one feature and a target".into()));
        }
        let parsed: Vec<Option<f64>> = fields[..fields.len() - 1]
            .iter()
            .map(|f| f.parse::<f64>().ok())
            .collect();
        if width.is_none() && header.is_none() && parsed.iter().any(Option::is_none) {
            header = Some(fields.iter().map(|f| f.to_string()).collect());
            width = Some(fields.len());
            continue;
        }
        match width {
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} fields, found {}", fields.len()),
                ))
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        for (f, p) in fields.iter().zip(&parsed) {
            match p {
                Some(v) if v.is_finite() => values.push(*v),
                _ => return Err(parse_err(line, format!("not a number: {f:?}"))),
            }
        }
        let last = fields[fields.len() - 1];
        match target {
            TargetColumn::Label => {
                let next = class_index.len();
                let id = *class_index.entry(last.to_string()).or_insert_with(|| {
                    class_names.push(last.to_string());
                    next
                });
                labels.push(id);
            }
            TargetColumn::Value => match last.parse::<f64>() {
                Ok(v) if v.is_finite() => reals.push(v),
                _ => return Err(parse_err(line, format!("target is not a number: {last:?}"))),
            },
        }
        rows += 1;
    }

    let d = width.map_or(0, |w| w - 1);
    let x_raw = Array2::from_shape_vec((rows, d), values)
        .map_err(|e| Error::Shape(format!("{}: {e}", path.display())))?;
    let feature_names = match header {
        Some(h) => h[..d].to_vec(),
        None => (0..d).map(|j| format!("x{j}")).collect(),
    };
    let (targets, class_count) = match target {
        TargetColumn::Label => (Targets::Labels(labels), class_names.len()),
        TargetColumn::Value => (Targets::Values(reals), 1),
    };
    Ok(Dataset {
        name: name.to_string(),
        x_raw,
        targets,
        feature_names,
        class_names,
        class_count,
    })
}

fn expect_shape(ds: &Dataset, features: usize, classes: Option<usize>) -> Result<()> {
    if ds.features() != features {
        return Err(Error::Shape(format!(
            "{} expects {features} features, found {}",
            ds.name,
            ds.features()
        )));
    }
    if let Some(c) = classes {
        if ds.class_count != c {
            return Err(Error::Shape(format!(
                "{} expects {c} classes, found {}",
                ds.name, ds.class_count
            )));
        }
    }
    Ok(())
}

/// Iris: 4 features, 3 classes.
pub fn load_iris(path: &Path) -> Result<Dataset> {
    let ds = load_csv(path, "iris", TargetColumn::Label)?;
    expect_shape(&ds, 4, Some(3))?;
    Ok(ds)
}

/// Boston housing: 13 features, median value target.
pub fn load_boston(path: &Path) -> Result<Dataset> {
    let ds = load_csv(path, "boston", TargetColumn::Value)?;
    expect_shape(&ds, 13, None)?;
    Ok(ds)
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0).unwrap_or(0);
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

fn header_field(path: &Path, bytes: &[u8], at: usize) -> Result<usize> {
    be_u32(bytes, at).map(|v| v as usize).ok_or_else(|| {
        Error::CountMismatch(format!("{}: header truncated", path.display()))
    })
}

/// Reads an IDX image/label pair; pixels are scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    check_magic(images_path, &images, IMAGES_MAGIC)?;
    check_magic(labels_path, &labels, LABELS_MAGIC)?;

    let n = header_field(images_path, &images, 4)?;
    let rows = header_field(images_path, &images, 8)?;
    let cols = header_field(images_path, &images, 12)?;
    let n_labels = header_field(labels_path, &labels, 4)?;
    if n != n_labels {
        return Err(Error::CountMismatch(format!(
            "{n} images but {n_labels} labels"
        )));
    }
    let d = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n * d {
        return Err(Error::CountMismatch(format!(
            "{}: header declares {n} images of {d} bytes, found {} bytes",
            images_path.display(),
            pixels.len()
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n {
        return Err(Error::CountMismatch(format!(
            "{}: header declares {n} labels, found {}",
            labels_path.display(),
            label_bytes.len()
        )));
    }
    if let Some(&bad) = label_bytes.iter().find(|&&l| l > 9) {
        return Err(Error::Parse {
            path: labels_path.to_path_buf(),
            line: 0,
            msg: format!("label {bad} outside 0..9"),
        });
    }
    let x_raw = Array2::from_shape_vec((n, d), pixels.iter().map(|&p| p as f64 / 255.0).collect())
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(Dataset {
        name: "mnist".into(),
        x_raw,
        targets: Targets::Labels(label_bytes.iter().map(|&l| l as usize).collect()),
        feature_names: (0..d).map(|j| format!("px{j}")).collect(),
        class_names: (0..10).map(|c| c.to_string()).collect(),
        class_count: 10,
    })
}

/// `(train, test)` from a directory holding the four standard IDX files.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let f = |name: &str| -> PathBuf { dir.join(name) };
    let train = load_mnist_idx(
        &f("train-images-idx3-ubyte"),
        &f("train-labels-idx1-ubyte"),
    )?;
    let test = load_mnist_idx(&f("t10k-images-idx3-ubyte"), &f("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}
