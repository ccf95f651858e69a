//! Point file formats: CSV (`x,y` per line, `#` comments) or JSON
//! (`{"points":[[x,y],...]}`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::geometry::{Point, PointPattern};

#[derive(Serialize, Deserialize)]
struct PointsJson {
    points: Vec<Point>,
}

pub fn parse_csv(text: &str) -> Result<PointPattern> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(MatchError::Parse {
                line,
                message: format!("expected 2 fields `x,y`, found {}", record.len()),
            });
        }
        let coord = |k: usize| -> Result<f64> {
            let field = &record[k];
            let v: f64 = field.parse().map_err(|_| MatchError::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(MatchError::Parse {
                    line,
                    message: format!("`{field}` is not finite"),
                });
            }
            Ok(v)
        };
        points.push(Point::new(coord(0)?, coord(1)?));
    }
    if points.is_empty() {
        return Err(MatchError::Parse {
            line: 0,
            message: "no points found".into(),
        });
    }
    PointPattern::new(points)
}

pub fn parse_json(text: &str) -> Result<PointPattern> {
    let parsed: PointsJson = serde_json::from_str(text).map_err(|e| MatchError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    PointPattern::new(parsed.points)
}

/// Parses either format; JSON is recognized by a leading `{`.
pub fn parse_points(text: &str) -> Result<PointPattern> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_csv(text)
    }
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointPattern> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let p = parse_points(&text)?;
    Ok(match label {
        Some(l) => p.with_label(l),
        None => p,
    })
}

pub fn to_csv(p: &PointPattern) -> String {
    let mut out = String::new();
    if let Some(label) = p.label() {
        out.push_str(&format!("# {label}\n"));
    }
    for q in p.points() {
        out.push_str(&format!("{:?},{:?}\n", q.x, q.y));
    }
    out
}

pub fn to_json(p: &PointPattern) -> String {
    serde_json::to_string(&PointsJson {
        points: p.points().to_vec(),
    })
    .expect("points serialize")
}

pub fn write_points(path: impl AsRef<Path>, p: &PointPattern) -> Result<()> {
    let path = path.as_ref();
    let body = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => to_json(p),
        _ => to_csv(p),
    };
    fs::write(path, body)?;
    Ok(())
}
