//! Reading and writing the JSON-lines and CSV-bundle dataset layouts.
//!
//! JSON lines: `rounds.jsonl` and `predictions.jsonl`, one object per line.
//! CSV bundle: `rounds.csv`, `predictions.csv`, `histograms.csv`,
//! `prices.csv` and an optional `futures.csv`, keyed by round or prediction id.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{validate_rounds, DatasetError, DatasetFormat, PredictionSet, PricePoint, Round};

/// Outcome of ingesting a dataset without stopping at the first problem.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Rounds assembled from every record that parsed.
    pub rounds: Vec<Round>,
    pub violations: Vec<DatasetError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn n_sets(&self) -> usize {
        self.rounds.iter().map(|r| r.prediction_sets.len()).sum()
    }
}

/// Guesses the layout from the files present in `dir`.
pub fn detect_format(dir: &Path) -> Option<DatasetFormat> {
    if dir.join("rounds.jsonl").exists() || dir.join("predictions.jsonl").exists() {
        Some(DatasetFormat::Jsonl)
    } else if dir.join("rounds.csv").exists() || dir.join("predictions.csv").exists() {
        Some(DatasetFormat::CsvBundle)
    } else {
        None
    }
}

/// Loads and validates every round under `dir`; the first violation found is
/// returned as the error.
pub fn load_dataset(dir: &Path, format: DatasetFormat) -> Result<Vec<Round>, DatasetError> {
    let report = validate_dataset(dir, format);
    match report.violations.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(report.rounds),
    }
}

/// Ingests `dir` and collects every violation instead of failing fast.
pub fn validate_dataset(dir: &Path, format: DatasetFormat) -> ValidationReport {
    let mut violations = Vec::new();
    let (round_rows, set_rows) = match format {
        DatasetFormat::Jsonl => read_jsonl(dir, &mut violations),
        DatasetFormat::CsvBundle => read_csv_bundle(dir, &mut violations),
    };
    let rounds = assemble(round_rows, set_rows, &mut violations);
    violations.extend(validate_rounds(&rounds));
    ValidationReport { rounds, violations }
}

pub fn write_dataset(rounds: &[Round], dir: &Path, format: DatasetFormat) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    match format {
        DatasetFormat::Jsonl => write_jsonl(rounds, dir),
        DatasetFormat::CsvBundle => write_csv_bundle(rounds, dir),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DatasetError + '_ {
    move |e| io_err(path, e)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn missing(record: &str, field: &str) -> DatasetError {
    DatasetError::MissingField { record: record.to_string(), field: field.to_string() }
}

fn required<T>(value: Option<T>, record: &str, field: &str, errs: &mut Vec<DatasetError>) -> Option<T> {
    if value.is_none() {
        errs.push(missing(record, field));
    }
    value
}

#[derive(Debug, Default, Deserialize)]
struct RawPoint {
    date: Option<NaiveDate>,
    close: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct RawRound {
    round_id: Option<String>,
    asset_symbol: Option<String>,
    start_date: Option<NaiveDate>,
    end_date: Option<NaiveDate>,
    ground_truth: Option<f64>,
    #[serde(default)]
    analysis_cutoff: Option<NaiveDate>,
    #[serde(default)]
    futures: Option<Vec<RawPoint>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawSet {
    id: Option<String>,
    round_id: Option<String>,
    timestamp: Option<DateTime<Utc>>,
    b_pre: Option<f64>,
    b_post: Option<f64>,
    social_histogram: Option<Vec<f64>>,
    #[serde(default)]
    social_histogram_timestamps: Option<Vec<DateTime<Utc>>>,
    price_history: Option<Vec<RawPoint>>,
}

fn convert_points(raw: Vec<RawPoint>, record: &str, field: &str, errs: &mut Vec<DatasetError>) -> Option<Vec<PricePoint>> {
    let mut out = Vec::with_capacity(raw.len());
    let mut ok = true;
    for p in raw {
        match (p.date, p.close) {
            (Some(date), Some(close)) => out.push(PricePoint { date, close }),
            (None, _) => {
                errs.push(missing(record, &format!("{field}.date")));
                ok = false;
            }
            (_, None) => {
                errs.push(missing(record, &format!("{field}.close")));
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn convert_round(raw: RawRound, location: &str, errs: &mut Vec<DatasetError>) -> Option<Round> {
    let id = required(raw.round_id, location, "round_id", errs)?;
    let n_before = errs.len();
    let asset_symbol = required(raw.asset_symbol, &id, "asset_symbol", errs);
    let start_date = required(raw.start_date, &id, "start_date", errs);
    let end_date = required(raw.end_date, &id, "end_date", errs);
    let ground_truth = required(raw.ground_truth, &id, "ground_truth", errs);
    let futures = match raw.futures {
        Some(f) => Some(convert_points(f, &id, "futures", errs)?),
        None => None,
    };
    if errs.len() > n_before {
        return None;
    }
    let end_date = end_date?;
    Some(Round {
        analysis_cutoff: raw.analysis_cutoff.unwrap_or_else(|| Round::default_cutoff(end_date)),
        round_id: id,
        asset_symbol: asset_symbol?,
        start_date: start_date?,
        end_date,
        ground_truth: ground_truth?,
        futures,
        prediction_sets: Vec::new(),
    })
}

fn convert_set(raw: RawSet, location: &str, errs: &mut Vec<DatasetError>) -> Option<PredictionSet> {
    let id = required(raw.id, location, "id", errs)?;
    let n_before = errs.len();
    let round_id = required(raw.round_id, &id, "round_id", errs);
    let timestamp = required(raw.timestamp, &id, "timestamp", errs);
    let b_pre = required(raw.b_pre, &id, "b_pre", errs);
    let b_post = required(raw.b_post, &id, "b_post", errs);
    let social_histogram = required(raw.social_histogram, &id, "social_histogram", errs);
    let price_history = required(raw.price_history, &id, "price_history", errs)
        .and_then(|h| convert_points(h, &id, "price_history", errs));
    if errs.len() > n_before {
        return None;
    }
    Some(PredictionSet {
        id,
        round_id: round_id?,
        timestamp: timestamp?,
        b_pre: b_pre?,
        b_post: b_post?,
        social_histogram: social_histogram?,
        social_histogram_timestamps: raw.social_histogram_timestamps,
        price_history: price_history?,
    })
}

fn assemble(rounds: Vec<Round>, sets: Vec<PredictionSet>, errs: &mut Vec<DatasetError>) -> Vec<Round> {
    let mut rounds = rounds;
    let index: HashMap<String, usize> = rounds
        .iter()
        .enumerate()
        .map(|(i, r)| (r.round_id.clone(), i))
        .rev()
        .collect();
    for set in sets {
        match index.get(&set.round_id) {
            Some(&i) => rounds[i].prediction_sets.push(set),
            None => errs.push(DatasetError::UnknownRoundReference {
                record: set.id.clone(),
                round_id: set.round_id.clone(),
            }),
        }
    }
    rounds
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path, errs: &mut Vec<DatasetError>) -> Vec<(String, T)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(_) => {
            errs.push(missing(&path.display().to_string(), file_name(path)));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let location = format!("{}:{}", file_name(path), i + 1);
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errs.push(io_err(path, e));
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(v) => out.push((location, v)),
            Err(e) => errs.push(DatasetError::Parse { location, message: e.to_string() }),
        }
    }
    out
}

fn file_name(path: &Path) -> &str {
    path.file_name().and_then(|s| s.to_str()).unwrap_or("?")
}

fn read_jsonl(dir: &Path, errs: &mut Vec<DatasetError>) -> (Vec<Round>, Vec<PredictionSet>) {
    let rounds = read_lines::<RawRound>(&dir.join("rounds.jsonl"), errs)
        .into_iter()
        .filter_map(|(loc, raw)| convert_round(raw, &loc, errs))
        .collect();
    let sets = read_lines::<RawSet>(&dir.join("predictions.jsonl"), errs)
        .into_iter()
        .filter_map(|(loc, raw)| convert_set(raw, &loc, errs))
        .collect();
    (rounds, sets)
}

#[derive(Serialize)]
struct RoundLine<'a> {
    round_id: &'a str,
    asset_symbol: &'a str,
    start_date: NaiveDate,
    end_date: NaiveDate,
    ground_truth: f64,
    analysis_cutoff: NaiveDate,
    #[serde(skip_serializing_if = "Option::is_none")]
    futures: Option<&'a [PricePoint]>,
}

impl<'a> From<&'a Round> for RoundLine<'a> {
    fn from(r: &'a Round) -> Self {
        RoundLine {
            round_id: &r.round_id,
            asset_symbol: &r.asset_symbol,
            start_date: r.start_date,
            end_date: r.end_date,
            ground_truth: r.ground_truth,
            analysis_cutoff: r.analysis_cutoff,
            futures: r.futures.as_deref(),
        }
    }
}

fn write_jsonl(rounds: &[Round], dir: &Path) -> Result<(), DatasetError> {
    let path = dir.join("rounds.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    for r in rounds {
        let line = serde_json::to_string(&RoundLine::from(r)).map_err(|e| io_err(&path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("predictions.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    for set in rounds.iter().flat_map(|r| &r.prediction_sets) {
        let line = serde_json::to_string(set).map_err(|e| io_err(&path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct RoundRow {
    round_id: Option<String>,
    asset_symbol: Option<String>,
    start_date: Option<NaiveDate>,
    end_date: Option<NaiveDate>,
    ground_truth: Option<f64>,
    #[serde(default)]
    analysis_cutoff: Option<NaiveDate>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    id: Option<String>,
    round_id: Option<String>,
    timestamp: Option<DateTime<Utc>>,
    b_pre: Option<f64>,
    b_post: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HistogramRow {
    prediction_id: String,
    price: Option<f64>,
    #[serde(default)]
    timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriceRow {
    prediction_id: String,
    date: Option<NaiveDate>,
    close: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FuturesRow {
    round_id: String,
    date: Option<NaiveDate>,
    close: Option<f64>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, optional: bool, errs: &mut Vec<DatasetError>) -> Vec<(String, T)> {
    let mut reader = match csv::Reader::from_path(path) {
        Ok(r) => r,
        Err(_) if optional && !path.exists() => return Vec::new(),
        Err(_) => {
            errs.push(missing(&path.display().to_string(), file_name(path)));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<T>().enumerate() {
        // header is line 1
        let location = format!("{}:{}", file_name(path), i + 2);
        match row {
            Ok(v) => out.push((location, v)),
            Err(e) => errs.push(DatasetError::Parse { location, message: e.to_string() }),
        }
    }
    out
}

fn read_csv_bundle(dir: &Path, errs: &mut Vec<DatasetError>) -> (Vec<Round>, Vec<PredictionSet>) {
    let mut futures: HashMap<String, Vec<RawPoint>> = HashMap::new();
    for (_, row) in read_csv::<FuturesRow>(&dir.join("futures.csv"), true, errs) {
        futures
            .entry(row.round_id)
            .or_default()
            .push(RawPoint { date: row.date, close: row.close });
    }
    let rounds: Vec<Round> = read_csv::<RoundRow>(&dir.join("rounds.csv"), false, errs)
        .into_iter()
        .filter_map(|(loc, row)| {
            let fut = row.round_id.as_ref().and_then(|id| futures.remove(id));
            let raw = RawRound {
                round_id: row.round_id,
                asset_symbol: row.asset_symbol,
                start_date: row.start_date,
                end_date: row.end_date,
                ground_truth: row.ground_truth,
                analysis_cutoff: row.analysis_cutoff,
                futures: fut,
            };
            convert_round(raw, &loc, errs)
        })
        .collect();
    let mut orphan_futures: Vec<_> = futures.into_keys().collect();
    orphan_futures.sort();
    for round_id in orphan_futures {
        errs.push(DatasetError::UnknownRoundReference { record: "futures.csv".into(), round_id });
    }

    let mut histograms: HashMap<String, (Vec<Option<f64>>, Vec<Option<DateTime<Utc>>>)> = HashMap::new();
    for (_, row) in read_csv::<HistogramRow>(&dir.join("histograms.csv"), false, errs) {
        let entry = histograms.entry(row.prediction_id).or_default();
        entry.0.push(row.price);
        entry.1.push(row.timestamp);
    }
    let mut prices: HashMap<String, Vec<RawPoint>> = HashMap::new();
    for (_, row) in read_csv::<PriceRow>(&dir.join("prices.csv"), false, errs) {
        prices
            .entry(row.prediction_id)
            .or_default()
            .push(RawPoint { date: row.date, close: row.close });
    }

    let mut sets = Vec::new();
    for (loc, row) in read_csv::<PredictionRow>(&dir.join("predictions.csv"), false, errs) {
        let (hist, stamps) = row
            .id
            .as_ref()
            .and_then(|id| histograms.remove(id))
            .unwrap_or_default();
        let id_for_errs = row.id.clone().unwrap_or_else(|| loc.clone());
        let social_histogram = if hist.iter().all(Option::is_some) {
            Some(hist.into_iter().flatten().collect())
        } else {
            None
        };
        let social_histogram_timestamps = if stamps.is_empty() || stamps.iter().all(Option::is_none) {
            None
        } else if stamps.iter().all(Option::is_some) {
            Some(stamps.into_iter().flatten().collect())
        } else {
            errs.push(missing(&id_for_errs, "histograms.timestamp"));
            continue;
        };
        let price_history = row.id.as_ref().and_then(|id| prices.remove(id)).unwrap_or_default();
        let raw = RawSet {
            id: row.id,
            round_id: row.round_id,
            timestamp: row.timestamp,
            b_pre: row.b_pre,
            b_post: row.b_post,
            social_histogram,
            social_histogram_timestamps,
            price_history: Some(price_history),
        };
        if raw.social_histogram.is_none() {
            errs.push(missing(&id_for_errs, "histograms.price"));
            continue;
        }
        if let Some(set) = convert_set(raw, &loc, errs) {
            sets.push(set);
        }
    }
    let mut orphans: Vec<_> = histograms.into_keys().chain(prices.into_keys()).collect();
    orphans.sort();
    orphans.dedup();
    for id in orphans {
        errs.push(DatasetError::Parse {
            location: id,
            message: "histogram or price rows reference an unknown prediction id".into(),
        });
    }
    (rounds, sets)
}

fn write_csv_bundle(rounds: &[Round], dir: &Path) -> Result<(), DatasetError> {
    fn writer(path: &Path) -> Result<csv::Writer<File>, DatasetError> {
        csv::Writer::from_path(path).map_err(|e| io_err(path, e))
    }

    let path = dir.join("rounds.csv");
    let mut w = writer(&path)?;
    for r in rounds {
        w.serialize(RoundRow {
            round_id: Some(r.round_id.clone()),
            asset_symbol: Some(r.asset_symbol.clone()),
            start_date: Some(r.start_date),
            end_date: Some(r.end_date),
            ground_truth: Some(r.ground_truth),
            analysis_cutoff: Some(r.analysis_cutoff),
        })
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("futures.csv");
    if rounds.iter().any(|r| r.futures.is_some()) {
        let mut w = writer(&path)?;
        for r in rounds {
            for p in r.futures.iter().flatten() {
                w.serialize(FuturesRow { round_id: r.round_id.clone(), date: Some(p.date), close: Some(p.close) })
                    .map_err(csv_err(&path))?;
            }
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }

    let sets: Vec<&PredictionSet> = rounds.iter().flat_map(|r| &r.prediction_sets).collect();
    let path = dir.join("predictions.csv");
    let mut w = writer(&path)?;
    for s in &sets {
        w.serialize(PredictionRow {
            id: Some(s.id.clone()),
            round_id: Some(s.round_id.clone()),
            timestamp: Some(s.timestamp),
            b_pre: Some(s.b_pre),
            b_post: Some(s.b_post),
        })
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("histograms.csv");
    let mut w = writer(&path)?;
    w.write_record(["prediction_id", "price", "timestamp"]).map_err(csv_err(&path))?;
    for s in &sets {
        for (i, price) in s.social_histogram.iter().enumerate() {
            let ts = s
                .social_histogram_timestamps
                .as_ref()
                .map(|t| t[i].to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true))
                .unwrap_or_default();
            w.write_record([s.id.as_str(), &price.to_string(), &ts]).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = dir.join("prices.csv");
    let mut w = writer(&path)?;
    for s in &sets {
        for p in &s.price_history {
            w.serialize(PriceRow { prediction_id: s.id.clone(), date: Some(p.date), close: Some(p.close) })
                .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::*;

    fn two_rounds() -> Vec<Round> {
        let mut a = set("p1", "r1", date(2016, 6, 3), 2001.0, 2201.0);
        a.social_histogram = vec![2050.5, 2073.25, 1999.0];
        a.social_histogram_timestamps = Some(vec![a.timestamp - chrono::Duration::hours(2); 3]);
        let mut r1 = round("r1", 2037.41, vec![a, set("p2", "r1", date(2016, 6, 6), 2010.0, 2030.0)]);
        r1.futures = Some(history(date(2016, 6, 1), &[2040.0, 2042.5]));
        let r2 = round(
            "r2",
            45.95,
            vec![
                set("p3", "r2", date(2016, 6, 3), 48.1, 47.0),
                set("p4", "r2", date(2016, 6, 4), 0.1 + 0.2, 46.0),
                set("p5", "r2", date(2016, 6, 5), 1e-300, 46.5),
            ],
        );
        vec![r1, r2]
    }

    #[test]
    fn jsonl_and_csv_round_trip_losslessly() {
        let rounds = two_rounds();
        for format in [DatasetFormat::Jsonl, DatasetFormat::CsvBundle] {
            let dir = tempfile::tempdir().unwrap();
            write_dataset(&rounds, dir.path(), format).unwrap();
            assert_eq!(detect_format(dir.path()), Some(format));
            let loaded = load_dataset(dir.path(), format).unwrap();
            assert_eq!(loaded.len(), 2);
            assert_eq!(loaded.iter().map(|r| r.prediction_sets.len()).sum::<usize>(), 5);
            assert_eq!(loaded, rounds, "{format:?}");
        }
    }

    fn write_files(dir: &Path, rounds: &str, preds: &str) {
        fs::write(dir.join("rounds.jsonl"), rounds).unwrap();
        fs::write(dir.join("predictions.jsonl"), preds).unwrap();
    }

    const ROUND: &str = r#"{"round_id":"r1","asset_symbol":"SPX","start_date":"2016-06-01","end_date":"2016-06-24","ground_truth":2037.41}"#;

    fn pred(id: &str, round: &str, b_pre: f64) -> String {
        format!(
            r#"{{"id":"{id}","round_id":"{round}","timestamp":"2016-06-03T12:00:00Z","b_pre":{b_pre},"b_post":2000,"social_histogram":[1990,2010],"price_history":[{{"date":"2016-06-01","close":2000}},{{"date":"2016-06-02","close":2005}}]}}"#
        )
    }

    #[test]
    fn default_cutoff_applied() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), ROUND, &pred("p1", "r1", 2001.0));
        let rounds = load_dataset(dir.path(), DatasetFormat::Jsonl).unwrap();
        assert_eq!(rounds[0].analysis_cutoff, date(2016, 6, 17));
    }

    #[test]
    fn zero_b_pre_rejected_with_id() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), ROUND, &pred("bad", "r1", 0.0));
        let err = load_dataset(dir.path(), DatasetFormat::Jsonl).unwrap_err();
        assert_eq!(err, DatasetError::NonPositivePrice { record: "bad".into(), field: "b_pre".into() });
    }

    #[test]
    fn unknown_round_named() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), ROUND, &pred("p1", "r99", 2001.0));
        let err = load_dataset(dir.path(), DatasetFormat::Jsonl).unwrap_err();
        assert_eq!(
            err,
            DatasetError::UnknownRoundReference { record: "p1".into(), round_id: "r99".into() }
        );
    }

    #[test]
    fn missing_field_named_and_all_violations_listed() {
        let dir = tempfile::tempdir().unwrap();
        let no_b_post = pred("p1", "r1", 2001.0).replace(r#""b_post":2000,"#, "");
        let lines = format!("{no_b_post}\n{}\n", pred("p2", "r1", -5.0));
        write_files(dir.path(), ROUND, &lines);
        let report = validate_dataset(dir.path(), DatasetFormat::Jsonl);
        assert_eq!(
            report.violations,
            vec![
                DatasetError::MissingField { record: "p1".into(), field: "b_post".into() },
                DatasetError::NonPositivePrice { record: "p2".into(), field: "b_pre".into() },
            ]
        );
    }

    #[test]
    fn empty_directory_is_missing_field_class() {
        let dir = tempfile::tempdir().unwrap();
        let report = validate_dataset(dir.path(), DatasetFormat::Jsonl);
        assert!(!report.is_valid());
        assert!(report.violations.iter().all(|e| e.kind() == "MissingField"));
        assert_eq!(detect_format(dir.path()), None);
    }

    #[test]
    fn malformed_json_is_a_parse_error_with_location() {
        let dir = tempfile::tempdir().unwrap();
        write_files(dir.path(), ROUND, "{not json\n");
        let report = validate_dataset(dir.path(), DatasetFormat::Jsonl);
        match &report.violations[0] {
            DatasetError::Parse { location, .. } => assert_eq!(location, "predictions.jsonl:1"),
            other => panic!("{other:?}"),
        }
    }
}
