use std::io::{self, Write};

use crate::error::Result;
use crate::froxel::FroxelGrid;
use crate::neural::ConfusionCounts;

/// Per-frame evaluation result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    pub frame: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub gtp: u64,
    /// `FN / GTP`, 0 when the ground truth is empty.
    pub fnr: f64,
    /// `FP / GTP`, 0 when the ground truth is empty.
    pub fpr: f64,
    /// Pixel error rate, when a scene was available to render.
    pub per: Option<f64>,
    pub infer_ms: f64,
    pub oracle_ms: f64,
    /// Set when `GTP = 0`; the rates are then placeholders. Not a CSV
    /// column, since `gtp` already carries it.
    pub gt_empty: bool,
}

impl MetricsRecord {
    pub const CSV_HEADER: &'static str = "frame,fnr,fpr,per,tp,fp,fn,gtp,infer_ms,oracle_ms";

    pub fn from_counts(frame: usize, c: &ConfusionCounts) -> Self {
        Self {
            frame,
            tp: c.tp as u64,
            fp: c.fp as u64,
            fn_: c.fn_ as u64,
            gtp: c.gtp as u64,
            fnr: c.fnr(),
            fpr: c.fpr(),
            gt_empty: c.gtp == 0.0,
            ..Self::default()
        }
    }

    pub fn csv_row(&self) -> String {
        let per = self.per.map(|p| format!("{p:.8}")).unwrap_or_default();
        format!(
            "{},{:.8},{:.8},{},{},{},{},{},{:.3},{:.3}",
            self.frame,
            self.fnr,
            self.fpr,
            per,
            self.tp,
            self.fp,
            self.fn_,
            self.gtp,
            self.infer_ms,
            self.oracle_ms
        )
    }
}

/// Popcount confusion counts of `pred` against `gt` and the derived rates.
pub fn froxel_metrics(pred: &FroxelGrid, gt: &FroxelGrid) -> Result<MetricsRecord> {
    Ok(MetricsRecord::from_counts(0, &ConfusionCounts::from_grids(pred, gt)?))
}

pub fn write_metrics_csv<W: Write>(mut w: W, records: &[MetricsRecord]) -> io::Result<()> {
    writeln!(w, "{}", MetricsRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()
}

/// Means over frames. Frames with an empty ground truth are left out of the
/// rate means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsSummary {
    pub frames: usize,
    pub rated_frames: usize,
    pub mean_fnr: f64,
    pub mean_fpr: f64,
    pub mean_per: Option<f64>,
}

impl MetricsSummary {
    pub fn of(records: &[MetricsRecord]) -> Self {
        let rated: Vec<&MetricsRecord> = records.iter().filter(|r| !r.gt_empty).collect();
        let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| if n == 0 { 0.0 } else { xs.sum::<f64>() / n as f64 };
        let pers: Vec<f64> = records.iter().filter_map(|r| r.per).collect();
        Self {
            frames: records.len(),
            rated_frames: rated.len(),
            mean_fnr: mean(&mut rated.iter().map(|r| r.fnr), rated.len()),
            mean_fpr: mean(&mut rated.iter().map(|r| r.fpr), rated.len()),
            mean_per: (!pers.is_empty()).then(|| pers.iter().sum::<f64>() / pers.len() as f64),
        }
    }
}
