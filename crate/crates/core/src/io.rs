//! File formats: lane, dictionary, confidence, alarm, truth and ROC CSVs,
//! PGM confidence maps, and content hashes.
//!
//! Every CSV has a mandatory header row, `.` decimals and no thousands
//! separators. Floats are written in shortest round-trip form, so a value
//! read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::alarm_scoring::{
    Alarm, AlarmLabel, ConfidenceGrid, GroundTruthEntry, LabeledAlarm, RocCurve, RocPoint,
};
use crate::dsrf::Dictionary;
use crate::preprocessing::{RawLane, SweepSample};
use crate::{Error, Position, Result};

fn name(path: &Path) -> String {
    path.display().to_string()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(name(path), line, format!("{other:?}")),
    }
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, path: &Path, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(|e| csv_err(path, e))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parsed CSV body: header plus records with their 1-based line numbers.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::parse(name(path), 1, "missing header row"));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(Error::parse(
                    name(path),
                    line,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            rows.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn expect_header(&self, expected: &[String]) -> Result<()> {
        if self.header != expected {
            return Err(Error::parse(
                name(&self.path),
                1,
                format!(
                    "expected header '{}', found '{}'",
                    expected.join(","),
                    self.header.join(",")
                ),
            ));
        }
        Ok(())
    }

    fn float(&self, line: u64, rec: &csv::StringRecord, i: usize) -> Result<f64> {
        let text = &rec[i];
        text.parse::<f64>().map_err(|_| {
            Error::parse(
                name(&self.path),
                line,
                format!("column '{}': '{text}' is not a number", self.header[i]),
            )
        })
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(
        &self,
        line: u64,
        rec: &csv::StringRecord,
        i: usize,
    ) -> Result<T> {
        rec[i].parse::<T>().map_err(|e| {
            Error::parse(
                name(&self.path),
                line,
                format!("column '{}': {e}", self.header[i]),
            )
        })
    }
}

fn complex_columns(prefix_count: usize) -> Vec<String> {
    (1..=prefix_count)
        .map(|i| format!("re_{i}"))
        .chain((1..=prefix_count).map(|i| format!("im_{i}")))
        .collect()
}

/// Header of a lane CSV with `freqs` operating frequencies.
pub fn lane_header(freqs: usize) -> Vec<String> {
    let mut h = vec!["easting".to_string(), "northing".to_string()];
    h.extend(complex_columns(freqs));
    h
}

pub fn write_lane_csv(path: &Path, lane: &RawLane) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &lane_header(lane.operating_freqs.len()))?;
    for s in &lane.samples {
        let mut row = vec![s.easting.to_string(), s.northing.to_string()];
        row.extend(s.response.iter().map(|z| z.re.to_string()));
        row.extend(s.response.iter().map(|z| z.im.to_string()));
        write_row(&mut w, path, &row)?;
    }
    finish(w, path)
}

/// Reads a lane CSV; the number of complex columns must match `operating_freqs`.
pub fn read_lane_csv(path: &Path, operating_freqs: &[f64]) -> Result<RawLane> {
    let table = Table::read(path)?;
    let freqs = operating_freqs.len();
    table.expect_header(&lane_header(freqs))?;
    let mut samples = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let v = (0..rec.len())
            .map(|i| table.float(*line, rec, i))
            .collect::<Result<Vec<f64>>>()?;
        samples.push(SweepSample {
            easting: v[0],
            northing: v[1],
            response: (0..freqs)
                .map(|f| Complex64::new(v[2 + f], v[2 + freqs + f]))
                .collect(),
        });
    }
    let lane_id = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(RawLane {
        lane_id,
        samples,
        operating_freqs: operating_freqs.to_vec(),
    })
}

/// Path of the normalized-feature companion of a dictionary CSV.
pub fn dictionary_features_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "dict".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_features.csv"))
}

/// Writes raw responses to `path` and normalized features to its companion.
pub fn write_dictionary_csv(path: &Path, dict: &Dictionary) -> Result<PathBuf> {
    let freqs = dict.operating_freqs.len();
    let mut w = csv_writer(path)?;
    let mut header = vec!["atom_id".to_string(), "zeta_hz".to_string()];
    header.extend(complex_columns(freqs));
    write_row(&mut w, path, &header)?;
    for a in &dict.atoms {
        let mut row = vec![a.id.to_string(), a.relaxation_freq.to_string()];
        row.extend(a.raw_response.iter().map(|z| z.re.to_string()));
        row.extend(a.raw_response.iter().map(|z| z.im.to_string()));
        write_row(&mut w, path, &row)?;
    }
    finish(w, path)?;

    let fpath = dictionary_features_path(path);
    let mut w = csv_writer(&fpath)?;
    let mut header = vec!["atom_id".to_string()];
    header.extend((1..=2 * freqs).map(|i| format!("f_{i}")));
    write_row(&mut w, &fpath, &header)?;
    for a in &dict.atoms {
        let mut row = vec![a.id.to_string()];
        row.extend(a.feature.iter().map(f64::to_string));
        write_row(&mut w, &fpath, &row)?;
    }
    finish(w, &fpath)?;
    Ok(fpath)
}

/// Reads a raw dictionary CSV and renormalizes its atoms.
pub fn read_dictionary_csv(path: &Path, operating_freqs: &[f64]) -> Result<Dictionary> {
    let table = Table::read(path)?;
    let freqs = operating_freqs.len();
    let mut header = vec!["atom_id".to_string(), "zeta_hz".to_string()];
    header.extend(complex_columns(freqs));
    table.expect_header(&header)?;
    let mut raw = Vec::with_capacity(table.rows.len());
    for (k, (line, rec)) in table.rows.iter().enumerate() {
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(name(path), *line, format!("bad atom id '{}'", &rec[0])))?;
        if id != k {
            return Err(Error::parse(
                name(path),
                *line,
                format!("atom ids must run 0.., found {id}"),
            ));
        }
        let v = (1..rec.len())
            .map(|i| table.float(*line, rec, i))
            .collect::<Result<Vec<f64>>>()?;
        let response = (0..freqs)
            .map(|f| Complex64::new(v[1 + f], v[1 + freqs + f]))
            .collect();
        raw.push((v[0], response));
    }
    if raw.is_empty() {
        return Err(Error::parse(name(path), 1, "dictionary has no atoms"));
    }
    Dictionary::from_raw(operating_freqs.to_vec(), raw)
}

pub fn write_confidence_csv(
    path: &Path,
    positions: &[Position],
    confidences: &[f64],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        &["easting".into(), "northing".into(), "confidence".into()],
    )?;
    for (p, c) in positions.iter().zip(confidences) {
        write_row(
            &mut w,
            path,
            &[p.easting.to_string(), p.northing.to_string(), c.to_string()],
        )?;
    }
    finish(w, path)
}

pub fn read_confidence_csv(path: &Path) -> Result<(Vec<Position>, Vec<f64>)> {
    let table = Table::read(path)?;
    table.expect_header(&["easting".into(), "northing".into(), "confidence".into()])?;
    let mut positions = Vec::with_capacity(table.rows.len());
    let mut confidences = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        positions.push(Position::new(
            table.float(*line, rec, 0)?,
            table.float(*line, rec, 1)?,
        ));
        confidences.push(table.float(*line, rec, 2)?);
    }
    Ok((positions, confidences))
}

const ALARM_HEADER: [&str; 4] = ["easting", "northing", "confidence", "label"];

pub fn write_alarms_csv(path: &Path, alarms: &[LabeledAlarm]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &ALARM_HEADER.map(String::from))?;
    for a in alarms {
        write_row(
            &mut w,
            path,
            &[
                a.alarm.easting.to_string(),
                a.alarm.northing.to_string(),
                a.alarm.confidence.to_string(),
                a.label.to_string(),
            ],
        )?;
    }
    finish(w, path)
}

pub fn read_alarms_csv(path: &Path) -> Result<Vec<LabeledAlarm>> {
    let table = Table::read(path)?;
    table.expect_header(&ALARM_HEADER.map(String::from))?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            Ok(LabeledAlarm {
                alarm: Alarm {
                    easting: table.float(*line, rec, 0)?,
                    northing: table.float(*line, rec, 1)?,
                    confidence: table.float(*line, rec, 2)?,
                },
                label: table.parsed::<AlarmLabel>(*line, rec, 3)?,
                target: None,
            })
        })
        .collect()
}

const TRUTH_HEADER: [&str; 6] = [
    "easting", "northing", "kind", "metal", "depth_in", "purpose",
];

pub fn write_truth_csv(path: &Path, truth: &[GroundTruthEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &TRUTH_HEADER.map(String::from))?;
    for t in truth {
        write_row(
            &mut w,
            path,
            &[
                t.easting.to_string(),
                t.northing.to_string(),
                t.kind.to_string(),
                t.metal.to_string(),
                t.depth_in.to_string(),
                t.purpose.to_string(),
            ],
        )?;
    }
    finish(w, path)
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthEntry>> {
    let table = Table::read(path)?;
    table.expect_header(&TRUTH_HEADER.map(String::from))?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let depth = table.float(*line, rec, 4)?;
            if depth < 0.0 {
                return Err(Error::parse(name(path), *line, "depth must be >= 0"));
            }
            Ok(GroundTruthEntry {
                easting: table.float(*line, rec, 0)?,
                northing: table.float(*line, rec, 1)?,
                kind: table.parsed(*line, rec, 2)?,
                metal: table.parsed(*line, rec, 3)?,
                depth_in: depth,
                purpose: table.parsed(*line, rec, 5)?,
            })
        })
        .collect()
}

const ROC_HEADER: [&str; 3] = ["threshold", "pd", "far_per_m2"];

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &ROC_HEADER.map(String::from))?;
    for p in &curve.points {
        write_row(
            &mut w,
            path,
            &[p.threshold.to_string(), p.pd.to_string(), p.far.to_string()],
        )?;
    }
    finish(w, path)
}

pub fn read_roc_csv(path: &Path) -> Result<RocCurve> {
    let table = Table::read(path)?;
    table.expect_header(&ROC_HEADER.map(String::from))?;
    let points = table
        .rows
        .iter()
        .map(|(line, rec)| {
            let p = RocPoint {
                threshold: table.float(*line, rec, 0)?,
                pd: table.float(*line, rec, 1)?,
                far: table.float(*line, rec, 2)?,
            };
            if !(0.0..=1.0).contains(&p.pd) || !(p.far >= 0.0 && p.far.is_finite()) {
                return Err(Error::parse(
                    name(path),
                    *line,
                    "pd must lie in [0, 1] and far must be >= 0",
                ));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    if points.is_empty() {
        return Err(Error::parse(name(path), 1, "ROC file has no points"));
    }
    Ok(RocCurve { points })
}

/// Writes an 8-bit binary PGM (north up) with values scaled linearly over the
/// grid's min..max, a `.txt` sidecar with the georeference, and a CSV of the
/// raw cell values. Returns the sidecar and CSV paths.
pub fn write_grid_pgm(path: &Path, grid: &ConfidenceGrid) -> Result<(PathBuf, PathBuf)> {
    let (lo, hi) = (grid.min_value(), grid.max_value());
    let span = hi - lo;
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    write!(out, "P5\n{} {}\n255\n", grid.cols, grid.rows).map_err(io)?;
    let mut bytes = Vec::with_capacity(grid.rows * grid.cols);
    for row in (0..grid.rows).rev() {
        for col in 0..grid.cols {
            let v = grid.get(row, col);
            let level = if span > 0.0 {
                ((v - lo) / span * 255.0).round()
            } else {
                0.0
            };
            bytes.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&bytes).map_err(io)?;
    out.flush().map_err(io)?;

    let sidecar = path.with_extension("txt");
    let mut s = create(&sidecar)?;
    let io = |e| Error::io(&sidecar, e);
    writeln!(s, "origin_easting={}", grid.origin.easting).map_err(io)?;
    writeln!(s, "origin_northing={}", grid.origin.northing).map_err(io)?;
    writeln!(s, "cell_size={}", grid.cell_size).map_err(io)?;
    writeln!(s, "rows={}", grid.rows).map_err(io)?;
    writeln!(s, "cols={}", grid.cols).map_err(io)?;
    writeln!(s, "value_min={lo}").map_err(io)?;
    writeln!(s, "value_max={hi}").map_err(io)?;
    writeln!(s, "first_image_row=north").map_err(io)?;
    s.flush().map_err(io)?;

    let csv_path = path.with_extension("grid.csv");
    let mut w = csv_writer(&csv_path)?;
    let header: Vec<String> = (0..grid.cols).map(|c| format!("col_{c}")).collect();
    write_row(&mut w, &csv_path, &header)?;
    for row in 0..grid.rows {
        let values: Vec<String> = (0..grid.cols)
            .map(|c| grid.get(row, c).to_string())
            .collect();
        write_row(&mut w, &csv_path, &values)?;
    }
    finish(w, &csv_path)?;
    Ok((sidecar, csv_path))
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
