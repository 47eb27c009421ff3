use std::path::Path;

use crate::error::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map(|p| p.byte()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::format(offset, format!("{kind:?}")),
    }
}

/// Scores CSV with header `subject,score`, one row per subject in order.
pub fn scores_to_csv(scores: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "score"]).map_err(csv_error)?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()]).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn scores_from_csv(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["subject", "score"] {
        return Err(Error::format(0, "expected header `subject,score`"));
    }
    let mut scores = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let offset = rec.position().map(|p| p.byte()).unwrap_or(0);
        let subject: usize = rec[0]
            .parse()
            .map_err(|_| Error::format(offset, format!("subject `{}` is not an index", &rec[0])))?;
        if subject != scores.len() {
            return Err(Error::format(
                offset,
                format!("expected subject {}, found {subject}", scores.len()),
            ));
        }
        let score: f64 = rec[1]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::format(offset, format!("score `{}` is not a finite number", &rec[1])))?;
        scores.push(score);
    }
    Ok(scores)
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    scores_from_csv(&std::fs::read(path)?)
}

pub fn write_scores(path: &Path, scores: &[f64]) -> Result<()> {
    super::write_atomic(path, &scores_to_csv(scores)?)
}
