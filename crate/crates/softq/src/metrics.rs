//! Per-epoch training metrics and their CSV form.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, SoftqError};

pub const METRICS_HEADER: &str = "epoch,mean_return,mean_disc_return,q_loss,mean_soft_value,seconds";

/// One row of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    /// Mean undiscounted return of episodes finished during the epoch.
    pub mean_return: f64,
    /// Mean discounted return of episodes finished during the epoch.
    pub mean_disc_return: f64,
    /// Mean Bellman loss over updates during the epoch.
    pub q_loss: f64,
    /// Mean estimated soft value of bootstrap targets during the epoch.
    pub mean_soft_value: f64,
    /// Wall-clock seconds for the epoch; 0 when deterministic output is
    /// requested so identical runs produce byte-identical files.
    pub seconds: f64,
}

impl MetricsRow {
    fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch,
            self.mean_return,
            self.mean_disc_return,
            self.q_loss,
            self.mean_soft_value,
            self.seconds
        )
    }
}

/// Writes the full metrics file (header plus one line per row).
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Parses a metrics file written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(SoftqError::Parse(format!(
                "bad metrics header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(SoftqError::Parse(format!(
                "metrics line {} has {} fields",
                i + 2,
                fields.len()
            )));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| SoftqError::Parse(format!("bad number {s:?}")))
        };
        rows.push(MetricsRow {
            epoch: fields[0]
                .parse()
                .map_err(|_| SoftqError::Parse("bad epoch".into()))?,
            mean_return: f(fields[1])?,
            mean_disc_return: f(fields[2])?,
            q_loss: f(fields[3])?,
            mean_soft_value: f(fields[4])?,
            seconds: f(fields[5])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            MetricsRow {
                epoch: 1,
                mean_return: 1.25,
                mean_disc_return: 1.0,
                q_loss: 0.5,
                mean_soft_value: 13.862943611198906,
                seconds: 0.0,
            },
            MetricsRow {
                epoch: 2,
                mean_return: -0.125,
                mean_disc_return: -0.1,
                q_loss: 0.25,
                mean_soft_value: 14.0,
                seconds: 0.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &rows).unwrap();
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(rows, back);
    }
}
