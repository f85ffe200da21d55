//! File ingestion and artifact emission: CSV datasets, key = value configs,
//! and the CSV/JSON output set of a run.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gldc::{Dataset, DiscountGranularity, ProbabilityMatrix, TrainingConfig};
use crate::layout::{CircularLayout, CycleOrder, CycleSolver, LayoutParams};
use crate::matrix::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub has_header: bool,
    pub label_column: Option<LabelColumn>,
}

/// Formats with 12 significant digits; the emitted CSVs round-trip within
/// 1e-9 per entry.
pub fn format_sig12(x: f64) -> String {
    format!("{:.11e}", x)
}

fn read_records(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path.display().to_string(),
                std::io::Error::other(e.to_string()),
            ),
            _ => Error::InvalidInput(e.to_string()),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            row: i + 1,
            col: 0,
            message: e.to_string(),
        })?;
        let fields: Vec<String> = record.iter().map(|s| s.to_string()).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Loads a rectangular numeric CSV, optionally splitting off a label column.
/// Label values are mapped to dense ids 0..c-1 in order of first appearance.
pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<Dataset> {
    let rows = read_records(path)?;
    let display = path.display().to_string();
    if rows.is_empty() {
        return Err(Error::Parse {
            path: display,
            row: 0,
            col: 0,
            message: "file is empty".into(),
        });
    }
    let (header, body_start) = if options.has_header {
        (Some(&rows[0]), 1)
    } else {
        (None, 0)
    };
    let width = rows[body_start.min(rows.len() - 1)].len();
    let label_index = match &options.label_column {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::Config(format!(
                    "label column index {i} out of range for {width} columns"
                )));
            }
            Some(*i)
        }
        Some(LabelColumn::Name(name)) => {
            let header = header.ok_or_else(|| {
                Error::Config("a named label column requires a header row".into())
            })?;
            Some(header.iter().position(|h| h == name).ok_or_else(|| {
                Error::Config(format!("label column {name:?} not found in header"))
            })?)
        }
    };
    if rows.len() - body_start == 0 {
        return Err(Error::Parse {
            path: display,
            row: 1,
            col: 0,
            message: "no data rows".into(),
        });
    }

    let n = rows.len() - body_start;
    let d = width - label_index.map_or(0, |_| 1);
    let mut features = Vec::with_capacity(n * d);
    let mut raw_labels: Vec<String> = Vec::new();
    for (r, row) in rows[body_start..].iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse {
                path: display,
                row: body_start + r + 1,
                col: 0,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        for (c, field) in row.iter().enumerate() {
            if Some(c) == label_index {
                raw_labels.push(field.clone());
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                row: body_start + r + 1,
                col: c + 1,
                message: format!("not a number: {field:?}"),
            })?;
            features.push(value);
        }
    }
    let labels = label_index.map(|_| {
        let mut ids: Vec<String> = Vec::new();
        raw_labels
            .iter()
            .map(|l| match ids.iter().position(|k| k == l) {
                Some(i) => i,
                None => {
                    ids.push(l.clone());
                    ids.len() - 1
                }
            })
            .collect()
    });
    Dataset::new(DenseMatrix::from_vec(n, d, features), labels)
}

/// Loads one integer label per line (no header).
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let rows = read_records(path)?;
    let display = path.display().to_string();
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(Error::Parse {
                path: display,
                row: r + 1,
                col: 0,
                message: format!("expected a single label, found {} fields", row.len()),
            });
        }
        let value: usize = row[0].parse().map_err(|_| Error::Parse {
            path: display.clone(),
            row: r + 1,
            col: 1,
            message: format!("not a cluster id: {:?}", row[0]),
        })?;
        labels.push(value);
    }
    Ok(labels)
}

/// Loads an n×c probability matrix. A leading non-numeric row is treated as a
/// header. Rows whose sums are within 1e-6 of one are renormalized; anything
/// further off is rejected with its row index.
pub fn load_probabilities(path: &Path) -> Result<ProbabilityMatrix> {
    let rows = read_records(path)?;
    let display = path.display().to_string();
    if rows.is_empty() {
        return Err(Error::Parse {
            path: display,
            row: 0,
            col: 0,
            message: "file is empty".into(),
        });
    }
    let has_header = rows[0].iter().any(|f| f.parse::<f64>().is_err());
    let body = &rows[if has_header { 1 } else { 0 }..];
    if body.is_empty() {
        return Err(Error::Parse {
            path: display,
            row: 1,
            col: 0,
            message: "no probability rows".into(),
        });
    }
    let c = body[0].len();
    let mut values = DenseMatrix::zeros(body.len(), c);
    for (r, row) in body.iter().enumerate() {
        let line = r + 1 + usize::from(has_header);
        if row.len() != c {
            return Err(Error::Parse {
                path: display,
                row: line,
                col: 0,
                message: format!("expected {c} fields, found {}", row.len()),
            });
        }
        let mut sum = 0.0;
        for (j, field) in row.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                row: line,
                col: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !(0.0..=1.0 + 1e-6).contains(&value) {
                return Err(Error::Parse {
                    path: display.clone(),
                    row: line,
                    col: j + 1,
                    message: format!("{value} is not a probability"),
                });
            }
            values.set(r, j, value);
            sum += value;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Parse {
                path: display.clone(),
                row: line,
                col: 0,
                message: format!("row sums to {sum}, not a distribution"),
            });
        }
        for v in values.row_mut(r) {
            *v /= sum;
        }
    }
    ProbabilityMatrix::new(values)
}

/// Resolved run parameters: the training half plus the layout half.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub layout: LayoutParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            training: TrainingConfig::default(),
            layout: LayoutParams::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.layout.validate()
    }
}

/// Parses a `key = value` config file ('#' starts a comment). Unknown keys
/// are rejected; missing keys keep their defaults.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        set_key(&mut config, key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn set_key(config: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let t = &mut config.training;
    let l = &mut config.layout;
    match key {
        "clusters" => t.clusters = Some(parse_value(key, value)?),
        "batch_size" => t.batch_size = parse_value(key, value)?,
        "learning_rate" => t.learning_rate = parse_value(key, value)?,
        "beta1" => t.beta1 = parse_value(key, value)?,
        "beta2" => t.beta2 = parse_value(key, value)?,
        "discount_gamma" => t.discount_gamma = parse_value(key, value)?,
        "discount_granularity" => {
            t.discount_granularity = match value {
                "epoch" => DiscountGranularity::Epoch,
                "minibatch" => DiscountGranularity::Minibatch,
                _ => {
                    return Err(Error::Config(format!(
                        "{key}: expected epoch or minibatch, got {value:?}"
                    )))
                }
            }
        }
        "sigma2" => t.sigma2 = parse_value(key, value)?,
        "xi" => t.xi = parse_value(key, value)?,
        "k_neighbors" => t.k_neighbors = parse_value(key, value)?,
        "pretrain_epochs" => t.pretrain_epochs = parse_value(key, value)?,
        "train_epochs" => t.train_epochs = parse_value(key, value)?,
        "seed" => t.seed = parse_value(key, value)?,
        "gamma_exponent" => l.gamma_exponent = parse_value(key, value)?,
        "radius" => l.radius = parse_value(key, value)?,
        "exact_cycle_max" => l.exact_cycle_max = parse_value(key, value)?,
        "outlier_threshold" => l.outlier_threshold = parse_value(key, value)?,
        _ => return Err(Error::Config(format!("unknown key {key:?}"))),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunMetrics {
    pub acc: f64,
    pub nmi: f64,
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub probabilities: ProbabilityMatrix,
    pub assigned: Vec<usize>,
    pub layout: CircularLayout,
    pub cycle: CycleOrder,
    pub solver: CycleSolver,
    pub similarity_score: f64,
    pub metrics: Option<RunMetrics>,
    pub config: RunConfig,
}

impl RunArtifacts {
    fn validate(&self) -> Result<()> {
        let n = self.probabilities.n();
        let c = self.probabilities.clusters();
        if self.assigned.len() != n
            || self.layout.sample_coords.len() != n
            || self.layout.outlier_flags.len() != n
            || self.layout.anchor_coords.len() != c
            || self.layout.anchor_angles.len() != c
            || self.cycle.order.len() != c
        {
            return Err(Error::DimensionMismatch(
                "artifact shapes disagree on n or c".into(),
            ));
        }
        Ok(())
    }
}

/// The cycle stage as persisted in cycle.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleArtifact {
    pub order: Vec<usize>,
    pub angles: Vec<f64>,
    pub s_sam: f64,
    pub solver: CycleSolver,
    pub total_cost: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
    text.push('\n');
    text
}

pub fn write_probabilities_csv(p: &ProbabilityMatrix, path: &Path) -> Result<()> {
    let values = p.values();
    let mut csv = String::new();
    let header: Vec<String> = (0..values.cols()).map(|j| format!("p{j}")).collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for i in 0..values.rows() {
        let row: Vec<String> = values.row(i).iter().map(|&v| format_sig12(v)).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_file(path, &csv)
}

pub fn write_layout_csv(layout: &CircularLayout, assigned: &[usize], path: &Path) -> Result<()> {
    let mut csv = String::from("id,x,y,assigned_cluster,outlier\n");
    for i in 0..layout.sample_coords.len() {
        let [x, y] = layout.sample_coords[i];
        csv.push_str(&format!(
            "{i},{},{},{},{}\n",
            format_sig12(x),
            format_sig12(y),
            assigned[i],
            layout.outlier_flags[i]
        ));
    }
    write_file(path, &csv)
}

pub fn write_cycle_json(cycle: &CycleArtifact, path: &Path) -> Result<()> {
    write_file(path, &to_json(cycle))
}

pub fn write_metrics_json(metrics: &RunMetrics, path: &Path) -> Result<()> {
    write_file(path, &to_json(metrics))
}

pub fn write_config_json(config: &RunConfig, path: &Path) -> Result<()> {
    write_file(path, &to_json(config))
}

pub fn load_cycle_json(path: &Path) -> Result<CycleArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: e.line(),
        col: e.column(),
        message: e.to_string(),
    })
}

/// Rows of layout.csv: per-sample coordinates, assigned cluster, outlier flag.
pub struct LayoutRows {
    pub sample_coords: Vec<[f64; 2]>,
    pub assigned: Vec<usize>,
    pub outlier_flags: Vec<bool>,
}

pub fn load_layout_csv(path: &Path) -> Result<LayoutRows> {
    let rows = read_records(path)?;
    let display = path.display().to_string();
    let mut out = LayoutRows {
        sample_coords: Vec::new(),
        assigned: Vec::new(),
        outlier_flags: Vec::new(),
    };
    for (r, row) in rows.iter().enumerate().skip(1) {
        let parse_err = |col: usize, message: String| Error::Parse {
            path: display.clone(),
            row: r + 1,
            col,
            message,
        };
        if row.len() != 5 {
            return Err(parse_err(0, format!("expected 5 fields, found {}", row.len())));
        }
        let x: f64 = row[1]
            .parse()
            .map_err(|_| parse_err(2, format!("not a number: {:?}", row[1])))?;
        let y: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(3, format!("not a number: {:?}", row[2])))?;
        let cluster: usize = row[3]
            .parse()
            .map_err(|_| parse_err(4, format!("not a cluster id: {:?}", row[3])))?;
        let outlier: bool = row[4]
            .parse()
            .map_err(|_| parse_err(5, format!("not a boolean: {:?}", row[4])))?;
        out.sample_coords.push([x, y]);
        out.assigned.push(cluster);
        out.outlier_flags.push(outlier);
    }
    Ok(out)
}

/// Emits probabilities.csv, layout.csv, cycle.json, config_echo.json, and —
/// when ground-truth metrics exist — metrics.json into `out_dir`.
pub fn write_outputs(artifacts: &RunArtifacts, out_dir: &Path) -> Result<()> {
    artifacts.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    write_probabilities_csv(&artifacts.probabilities, &out_dir.join("probabilities.csv"))?;
    write_layout_csv(
        &artifacts.layout,
        &artifacts.assigned,
        &out_dir.join("layout.csv"),
    )?;
    let cycle = CycleArtifact {
        order: artifacts.cycle.order.clone(),
        angles: artifacts.layout.anchor_angles.clone(),
        s_sam: artifacts.similarity_score,
        solver: artifacts.solver,
        total_cost: artifacts.cycle.total_cost,
    };
    write_cycle_json(&cycle, &out_dir.join("cycle.json"))?;
    if let Some(metrics) = &artifacts.metrics {
        write_metrics_json(metrics, &out_dir.join("metrics.json"))?;
    }
    write_config_json(&artifacts.config, &out_dir.join("config_echo.json"))
}
