//! File formats: ratings CSV, id maps, draws and atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crowdirt_core::sampler::{Adaptation, DrawStats, Draws, Fit};
use crowdirt_core::{ModelSpec, ParamLayout, RatingDataset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const RATINGS_HEADER: [&str; 3] = ["item", "rater", "rating"];

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Json { path: path.into(), source: e })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Json { path: path.into(), source: e })
}

/// Serializes rows of string fields as CSV.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

/// Shortest decimal form that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Reads long-form ratings with the exact header `item,rater,rating`.
///
/// Errors name the offending line (1-based, header is line 1).
pub fn load_ratings_csv(path: &Path) -> Result<RatingDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(CliError::data(path, "missing header; expected `item,rater,rating`")),
        Some(r) => r.map_err(|e| csv_error(path, e))?,
    };
    if header.iter().ne(RATINGS_HEADER) {
        return Err(CliError::Line {
            path: path.into(),
            line: 1,
            message: format!("header must be exactly `item,rater,rating`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| CliError::Line { path: path.into(), line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let (item, rater, rating) = (&record[0], &record[1], record[2].trim());
        if item.is_empty() || rater.is_empty() {
            return Err(bad("empty item or rater id".into()));
        }
        let value = match rating {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("rating must be 0 or 1, found `{other}`"))),
        };
        rows.push((item.to_string(), rater.to_string(), value));
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "no ratings"));
    }
    Ok(RatingDataset::from_rows(rows)?)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => CliError::Line { path: path.into(), line: p.line(), message: e.to_string() },
        None => CliError::data(path, e.to_string()),
    }
}

pub fn ratings_csv_bytes(data: &RatingDataset) -> Vec<u8> {
    let (items, raters) = (data.item_ids(), data.rater_ids());
    csv_bytes(
        &RATINGS_HEADER,
        data.triples().map(|(i, j, y)| [items[i].clone(), raters[j].clone(), y.to_string()]),
    )
}

pub fn write_ratings_csv(path: &Path, data: &RatingDataset) -> Result<()> {
    atomic_write(path, &ratings_csv_bytes(data))
}

/// Sidecar maps from zero-based index to original id.
pub fn write_id_maps(dir: &Path, data: &RatingDataset) -> Result<()> {
    let map = |ids: &[String]| {
        ids.iter().enumerate().map(|(k, id)| [k.to_string(), id.clone()]).collect::<Vec<_>>()
    };
    atomic_write(&dir.join("items.csv"), &csv_bytes(&["index", "item"], map(data.item_ids())))?;
    atomic_write(&dir.join("raters.csv"), &csv_bytes(&["index", "rater"], map(data.rater_ids())))
}

/// Layout and sampler settings stored next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: String,
    pub allow_adversarial: bool,
    pub num_items: usize,
    pub num_raters: usize,
    pub num_ratings: usize,
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub columns: Vec<String>,
    pub adaptation: Vec<Adaptation>,
    pub warmup_divergences: usize,
}

impl Manifest {
    pub fn layout(&self) -> Result<ParamLayout> {
        let spec = ModelSpec::parse(&self.model)?.with_adversarial(self.allow_adversarial);
        let layout = ParamLayout::new(spec, self.num_items, self.num_raters);
        if layout.column_names() != self.columns {
            return Err(CliError::data("manifest.json", "column names do not match the model layout"));
        }
        Ok(layout)
    }
}

const STAT_COLUMNS: [&str; 9] =
    ["chain", "iter", "lp", "accept_stat", "step_size", "tree_depth", "n_leapfrog", "divergent", "energy"];

pub fn draws_csv_bytes(fit: &Fit) -> Vec<u8> {
    let names = fit.layout.column_names();
    let mut header = vec!["chain", "iter"];
    header.extend(names.iter().map(String::as_str));
    let d = &fit.draws;
    let rows = (0..d.num_chains).flat_map(|c| {
        (0..d.num_samples).map(move |t| {
            let mut row = vec![c.to_string(), t.to_string()];
            row.extend(d.draw(c, t).iter().map(|&v| fmt_f64(v)));
            row
        })
    });
    csv_bytes(&header, rows)
}

pub fn stats_csv_bytes(draws: &Draws) -> Vec<u8> {
    let rows = (0..draws.num_chains).flat_map(|c| {
        (0..draws.num_samples).map(move |t| {
            let s = draws.stat(c, t);
            vec![
                c.to_string(),
                t.to_string(),
                fmt_f64(s.lp),
                fmt_f64(s.accept_stat),
                fmt_f64(s.step_size),
                s.tree_depth.to_string(),
                s.n_leapfrog.to_string(),
                u8::from(s.divergent).to_string(),
                fmt_f64(s.energy),
            ]
        })
    });
    csv_bytes(&STAT_COLUMNS, rows)
}

pub struct FitFiles {
    pub dir: PathBuf,
}

impl FitFiles {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }
    pub fn draws(&self) -> PathBuf {
        self.dir.join("draws.csv")
    }
    pub fn stats(&self) -> PathBuf {
        self.dir.join("sampler_stats.csv")
    }
}

pub fn save_fit(dir: &Path, fit: &Fit, manifest: &Manifest) -> Result<()> {
    let files = FitFiles::new(dir);
    atomic_write(&files.draws(), &draws_csv_bytes(fit))?;
    atomic_write(&files.stats(), &stats_csv_bytes(&fit.draws))?;
    write_json(&files.manifest(), manifest)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, field: &str) -> Result<T> {
    field.parse().map_err(|_| CliError::Line { path: path.into(), line, message: format!("cannot parse `{field}`") })
}

fn read_numeric_csv(path: &Path, expect_header: &[String]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(expect_header.iter().map(String::as_str)) {
        return Err(CliError::data(path, "unexpected header"));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            Ok((r.position().map_or(0, |p| p.line()), r))
        })
        .collect()
}

/// Reloads a fit saved by [`save_fit`]; values round-trip exactly.
pub fn load_fit(dir: &Path) -> Result<(Fit, Manifest)> {
    let files = FitFiles::new(dir);
    let manifest: Manifest = read_json(&files.manifest())?;
    let layout = manifest.layout()?;
    let dim = layout.num_columns();
    let (chains, samples) = (manifest.chains, manifest.sampling_iters);

    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(manifest.columns.iter().cloned());
    let path = files.draws();
    let rows = read_numeric_csv(&path, &header)?;
    if rows.len() != chains * samples {
        return Err(CliError::data(&path, format!("expected {} draws, found {}", chains * samples, rows.len())));
    }
    let mut values = Vec::with_capacity(rows.len() * dim);
    for (k, (line, r)) in rows.iter().enumerate() {
        let (c, t): (usize, usize) = (parse_field(&path, *line, &r[0])?, parse_field(&path, *line, &r[1])?);
        if c * samples + t != k {
            return Err(CliError::Line { path: path.clone(), line: *line, message: "draws out of order".into() });
        }
        for f in r.iter().skip(2) {
            values.push(parse_field::<f64>(&path, *line, f)?);
        }
    }

    let path = files.stats();
    let header: Vec<String> = STAT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut stats = Vec::with_capacity(chains * samples);
    for (line, r) in read_numeric_csv(&path, &header)? {
        let p = |k: usize| parse_field::<f64>(&path, line, &r[k]);
        let u = |k: usize| parse_field::<usize>(&path, line, &r[k]);
        stats.push(DrawStats {
            lp: p(2)?,
            accept_stat: p(3)?,
            step_size: p(4)?,
            tree_depth: u(5)?,
            n_leapfrog: u(6)?,
            divergent: u(7)? == 1,
            energy: p(8)?,
        });
    }
    let mut draws = Draws::from_parts(chains, samples, dim, values, stats)?;
    draws.adaptation = manifest.adaptation.clone();
    draws.warmup_divergences = manifest.warmup_divergences;
    Ok((Fit::from_constrained(layout, draws, manifest.max_tree_depth), manifest))
}
