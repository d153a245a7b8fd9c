//! Froxel and pixel error metrics, and the runtime side of a PVS: culling,
//! the far-field pass and temporal bounding volumes for moving objects.

mod culling;
mod metrics;
mod tbv;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use culling::{cull, dynamic_primitive_ids, far_field_merge, id_mismatches, pixel_error_rate, pixel_error_rate_of};
pub use metrics::{froxel_metrics, write_metrics_csv, MetricsRecord, MetricsSummary};
pub use tbv::{object_tbv, tbv_build, tbv_footprint, tbv_test, Footprint, Tbv};

use crate::error::{PvsError, Result};
use crate::oracle::DepthBuffer;
use crate::Real;

/// Resolution of the PER renders when none is given.
pub const DEFAULT_EVAL_RESOLUTION: (usize, usize) = (256, 256);

/// Writes the depth channel as a PFM image.
pub fn dump_depth_pfm<T: Real>(buf: &DepthBuffer<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| PvsError::io(path, e))?;
    buf.write_pfm(BufWriter::new(f)).map_err(|e| PvsError::io(path, e))
}

/// Writes primitive ids as a false-colour PPM image.
pub fn dump_id_ppm<T: Real>(buf: &DepthBuffer<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| PvsError::io(path, e))?;
    buf.write_id_ppm(BufWriter::new(f)).map_err(|e| PvsError::io(path, e))
}
