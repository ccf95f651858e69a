//! Landmark-sequence benchmark: match the first `t` landmarks of one frame
//! into every landmark of a later frame.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MatchError, Result};
use crate::geometry::{apply_rigid_transform, Assignment, Point, PointPattern};
use crate::matcher::{run_match, MatchConfig};
use crate::pointfile::read_points;
use crate::result::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub schema_version: u32,
    pub frame_a: u32,
    pub frame_b: u32,
    pub gap: u32,
    pub template_size: usize,
    pub scene_size: usize,
    pub accuracy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `ok`, or a warning/error for a skipped pair.
    pub status: String,
}

/// Frame files in `dir`, keyed by the number at the end of the file stem.
pub fn discover_frames(dir: &Path) -> Result<BTreeMap<u32, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("csv") | Some("json")) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let digits: String = stem
            .chars()
            .rev()
            .take_while(char::is_ascii_digit)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if let Ok(idx) = digits.parse::<u32>() {
            out.insert(idx, path);
        }
    }
    Ok(out)
}

/// Runs every frame pair `(i, i + gap)` between the lowest and highest frame
/// number. Pairs with a missing or unreadable frame yield a single warning
/// row with no template size.
pub fn run_sequence(dir: &Path, gap: u32, template_sizes: &[usize], cfg: &MatchConfig) -> Result<Vec<SequenceRow>> {
    let frames = discover_frames(dir)?;
    let (Some(&first), Some(&last)) = (frames.keys().next(), frames.keys().next_back()) else {
        return Err(MatchError::InvalidInput(format!("no frame files in {}", dir.display())));
    };
    let loaded: BTreeMap<u32, std::result::Result<PointPattern, String>> = frames
        .iter()
        .map(|(&k, p)| (k, read_points(p).map_err(|e| e.to_string())))
        .collect();

    let pairs: Vec<(u32, u32)> = (first..=last)
        .filter_map(|a| a.checked_add(gap).filter(|&b| b <= last).map(|b| (a, b)))
        .collect();
    let mut rows: Vec<SequenceRow> = pairs
        .into_par_iter()
        .flat_map_iter(|(a, b)| pair_rows(&loaded, a, b, gap, template_sizes, cfg))
        .collect();
    rows.sort_by_key(|r| (r.frame_a, r.template_size));
    Ok(rows)
}

fn pair_rows(
    loaded: &BTreeMap<u32, std::result::Result<PointPattern, String>>,
    a: u32,
    b: u32,
    gap: u32,
    template_sizes: &[usize],
    cfg: &MatchConfig,
) -> Vec<SequenceRow> {
    let blank = |status: String| SequenceRow {
        schema_version: SCHEMA_VERSION,
        frame_a: a,
        frame_b: b,
        gap,
        template_size: 0,
        scene_size: 0,
        accuracy: f64::NAN,
        residual: f64::NAN,
        iterations: 0,
        converged: false,
        status,
    };
    let frame = |k: u32| match loaded.get(&k) {
        None => Err(format!("warning: frame {k} missing")),
        Some(Err(e)) => Err(format!("warning: frame {k} unreadable: {e}")),
        Some(Ok(p)) => Ok(p),
    };
    let (fa, fb) = match (frame(a), frame(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("{e}");
            return vec![blank(e)];
        }
    };
    template_sizes
        .iter()
        .map(|&t| {
            let mut row = blank("ok".into());
            row.template_size = t;
            row.scene_size = fb.len();
            if t > fa.len() || t > fb.len() {
                row.status = format!("error: template size {t} exceeds frame size");
                return row;
            }
            let template = fa.truncated(t).expect("non-empty");
            match run_match(&template, fb, cfg, None) {
                Ok(out) => {
                    row.accuracy = out.result.assignment.accuracy(&Assignment::identity(t));
                    row.residual = out.result.residual;
                    row.iterations = out.result.iterations;
                    row.converged = out.result.converged;
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect()
}

/// Stand-in landmark sequence in pixel units: a fixed set of points on a
/// 640x480 image that slowly rotates and drifts, with one pixel of jitter
/// per frame.
pub fn synthetic_sequence(frames: usize, points: usize, seed: u64) -> Result<Vec<PointPattern>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = PointPattern::new(
        (0..points)
            .map(|_| Point::new(rng.random_range(120.0..520.0), rng.random_range(80.0..400.0)))
            .collect(),
    )?;
    let jitter = Normal::new(0.0, 1.0).expect("valid normal");
    (0..frames)
        .map(|f| {
            let t = f as f64;
            let moved = apply_rigid_transform(&base, 0.01 * t, (3.0 * t, -1.5 * t), false);
            PointPattern::new(
                moved
                    .points()
                    .iter()
                    .map(|p| Point::new(p.x + jitter.sample(&mut rng), p.y + jitter.sample(&mut rng)))
                    .collect(),
            )
        })
        .collect()
}
