use std::path::Path;

use serde::Deserialize;
use visionfuse_core::analysis::{iou_curve, TokenScoreVector};

use crate::error::{invalid, Classify, CmdResult};
use crate::io::{to_json, write_text};
use crate::Format;

#[derive(Debug, Deserialize)]
struct ScoreRow {
    index: Option<usize>,
    score: f64,
}

/// Reads a per-token score CSV with a `score` column and an optional
/// `index` column (which must then run 0, 1, 2, ...).
fn read_scores(path: &Path) -> CmdResult<TokenScoreVector> {
    let mut reader = csv::Reader::from_path(path).io_ctx(format!("reading {}", path.display()))?;
    let mut scores = Vec::new();
    for (row, record) in reader.deserialize::<ScoreRow>().enumerate() {
        let r = record.io_ctx(format!("parsing {}", path.display()))?;
        if let Some(i) = r.index {
            if i != row {
                return Err(invalid(format!("{}: row {row} has index {i}", path.display())));
            }
        }
        scores.push(r.score);
    }
    let source = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    TokenScoreVector::new(scores, source).invalid_ctx(path.display().to_string())
}

pub fn analyze_iou(a: &Path, b: &Path, ps: &[f64], out: Option<&Path>, format: Format) -> CmdResult {
    let va = read_scores(a)?;
    let vb = read_scores(b)?;
    let curve = iou_curve(&va, &vb, ps).invalid_ctx("iou")?;
    let text = match format {
        Format::Json => to_json(&curve),
        Format::Csv | Format::Table => curve.to_csv(),
    };
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
