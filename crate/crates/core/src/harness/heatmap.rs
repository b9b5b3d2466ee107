//! Merging visitation heatmaps and rendering them as text.

use std::path::Path;

use crate::env::{CellMap, VisitationLog};
use crate::error::{Error, Result};

/// Reads a `row,col,count` heatmap written by a run.
pub fn read_heatmap(path: &Path) -> Result<VisitationLog> {
    let mut cells = Vec::new();
    let mut rdr = csv::Reader::from_path(path)?;
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| -> Result<u64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("{}: malformed heatmap row", path.display())))
        };
        cells.push((field(0)? as usize, field(1)? as usize, field(2)?));
    }
    let rows = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut log = VisitationLog::new(rows, cols, CellMap::NormalizedGrid);
    for (r, c, n) in cells {
        log.counts[r * cols + c] += n;
    }
    Ok(log)
}

pub fn merge_all(logs: &[VisitationLog]) -> Result<VisitationLog> {
    let first = logs.first().ok_or_else(|| Error::InvalidInput("no heatmaps to merge".into()))?;
    let mut out = first.clone();
    for l in &logs[1..] {
        if (l.rows, l.cols) != (first.rows, first.cols) {
            return Err(Error::InvalidInput("heatmaps have different shapes".into()));
        }
        out.merge(l);
    }
    Ok(out)
}

/// One character per cell on a log scale; blank means never visited.
pub fn render(log: &VisitationLog) -> String {
    const SHADES: &[u8] = b".:-=+*#%@";
    let max = log.counts.iter().copied().max().unwrap_or(0);
    let top = ((max + 1) as f64).ln();
    let mut s = String::new();
    for r in 0..log.rows {
        for c in 0..log.cols {
            let n = log.get(r, c);
            s.push(if n == 0 {
                ' '
            } else {
                let f = ((n + 1) as f64).ln() / top;
                SHADES[((f * SHADES.len() as f64) as usize).min(SHADES.len() - 1)] as char
            });
        }
        s.push('\n');
    }
    s
}
