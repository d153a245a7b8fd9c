//! Volume-preserving block interleaving `g_d` between froxel grids and
//! channel tensors, and its inverse.

use crate::error::{PvsError, Result};
use crate::froxel::{FroxelGrid, GridDims, GridRole};
use crate::Real;

/// Dense channels-last tensor: element `(x, y, z, c)` lives at
/// `((z·ny + y)·nx + x)·channels + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTensor<T> {
    dims: [usize; 3],
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> ChannelTensor<T> {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Self::filled(dims, channels, T::zero())
    }

    pub fn filled(dims: [usize; 3], channels: usize, value: T) -> Self {
        Self {
            dims,
            channels,
            data: vec![value; dims[0] * dims[1] * dims[2] * channels],
        }
    }

    pub fn from_vec(dims: [usize; 3], channels: usize, data: Vec<T>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2] * channels;
        if data.len() != n {
            return Err(PvsError::DimMismatch {
                expected: format!("{n} values"),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self { dims, channels, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn cell_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize, c: usize) -> T {
        self.data[self.cell_index(x, y, z) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, c: usize, v: T) {
        let i = self.cell_index(x, y, z) * self.channels + c;
        self.data[i] = v;
    }

    /// Channel vector of one cell.
    #[inline]
    pub fn cell(&self, x: usize, y: usize, z: usize) -> &[T] {
        let i = self.cell_index(x, y, z) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims || self.channels != other.channels {
            return Err(PvsError::DimMismatch {
                expected: format!("{:?}x{}", self.dims, self.channels),
                actual: format!("{:?}x{}", other.dims, other.channels),
            });
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ChannelTensor<U> {
        ChannelTensor {
            dims: self.dims,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Real-valued grid in froxel order (x fastest), e.g. per-froxel probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid<T> {
    pub dims: GridDims,
    pub values: Vec<T>,
}

impl<T: Real> RealGrid<T> {
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.values[self.dims.linear(x, y, z)]
    }

    /// Binary grid of froxels with value `≥ tau`.
    pub fn threshold(&self, tau: T, role: GridRole) -> Result<FroxelGrid> {
        let mut g = FroxelGrid::new(self.dims, role)?;
        for (i, &v) in self.values.iter().enumerate() {
            if v >= tau {
                g.set_linear(i);
            }
        }
        Ok(g)
    }
}

/// Spatial size of the tensor for `dims` interleaved with block size `d`.
pub fn interleaved_dims(dims: GridDims, d: usize) -> Result<[usize; 3]> {
    if d == 0 || dims.nx % d != 0 || dims.ny % d != 0 || dims.nz % d != 0 {
        return Err(PvsError::invalid(format!("block size {d} does not divide grid {dims}")));
    }
    Ok([dims.nx / d, dims.ny / d, dims.nz / d])
}

/// Channel of local block offset `(lx, ly, lz)`.
#[inline]
pub fn channel_of(lx: usize, ly: usize, lz: usize, d: usize) -> usize {
    lx + d * (ly + d * lz)
}

/// Offset of froxel `(x, y, z)` in the interleaved tensor data.
#[inline]
fn tensor_offset(t: [usize; 3], d: usize, x: usize, y: usize, z: usize) -> usize {
    let cell = ((z / d) * t[1] + y / d) * t[0] + x / d;
    cell * d * d * d + channel_of(x % d, y % d, z % d, d)
}

/// Stacks each `d×d×d` block of `grid` into the `d³` channels of one cell.
pub fn interleave<T: Real>(grid: &FroxelGrid, d: usize) -> Result<ChannelTensor<T>> {
    let dims = grid.dims();
    let t = interleaved_dims(dims, d)?;
    let mut out = ChannelTensor::zeros(t, d * d * d);
    for i in grid.iter_ones() {
        let [x, y, z] = dims.coords(i);
        out.data[tensor_offset(t, d, x, y, z)] = T::one();
    }
    Ok(out)
}

fn check_channels<T: Real>(t: &ChannelTensor<T>, d: usize) -> Result<GridDims> {
    if d == 0 || t.channels != d * d * d {
        return Err(PvsError::DimMismatch {
            expected: format!("{} channels for block size {d}", d * d * d),
            actual: t.channels.to_string(),
        });
    }
    Ok(GridDims::new(t.dims[0] * d, t.dims[1] * d, t.dims[2] * d))
}

/// Exact inverse of [`interleave`]'s index map, keeping real values.
pub fn deinterleave<T: Real>(t: &ChannelTensor<T>, d: usize) -> Result<RealGrid<T>> {
    let dims = check_channels(t, d)?;
    let mut values = vec![T::zero(); dims.len()];
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                values[dims.linear(x, y, z)] = t.data[tensor_offset(t.dims, d, x, y, z)];
            }
        }
    }
    Ok(RealGrid { dims, values })
}

/// [`deinterleave`] followed by the indicator `value ≥ tau`.
pub fn deinterleave_threshold<T: Real>(t: &ChannelTensor<T>, d: usize, tau: T, role: GridRole) -> Result<FroxelGrid> {
    let dims = check_channels(t, d)?;
    dims.validate_packed()?;
    let mut g = FroxelGrid::new(dims, role)?;
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                if t.data[tensor_offset(t.dims, d, x, y, z)] >= tau {
                    g.set_unchecked(x, y, z);
                }
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_bit_lands_in_channel_seven() {
        let mut g = FroxelGrid::new(GridDims::new(8, 4, 4), GridRole::Geometry).unwrap();
        g.set(3, 3, 3).unwrap();
        let t: ChannelTensor<f32> = interleave(&g, 2).unwrap();
        assert_eq!(t.dims(), [4, 2, 2]);
        assert_eq!(t.get(1, 1, 1, 7), 1.0);
        assert_eq!(t.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn zero_grid_zero_tensor_and_shape() {
        let g = FroxelGrid::new(GridDims::cube(32), GridRole::Geometry).unwrap();
        let t: ChannelTensor<f32> = interleave(&g, 8).unwrap();
        assert_eq!(t.dims(), [4, 4, 4]);
        assert_eq!(t.channels(), 512);
        assert!(t.data().iter().all(|&v| v == 0.0));
        assert_eq!(t.len(), 32 * 32 * 32);
    }

    #[test]
    fn threshold_is_inclusive() {
        let half = ChannelTensor::filled([2, 2, 2], 64, 0.5f32);
        let g = deinterleave_threshold(&half, 4, 0.5, GridRole::PredictedPvs).unwrap();
        assert_eq!(g.count_ones(), 8 * 8 * 8);
        let below = ChannelTensor::filled([2, 2, 2], 64, 0.49f32);
        assert!(deinterleave_threshold(&below, 4, 0.5, GridRole::PredictedPvs).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = FroxelGrid::new(GridDims::new(8, 8, 6), GridRole::Geometry).unwrap();
        assert!(interleave::<f32>(&g, 4).is_err());
        assert!(interleave::<f32>(&g, 0).is_err());
        let t = ChannelTensor::<f32>::zeros([2, 2, 2], 27);
        assert!(deinterleave(&t, 2).is_err());
    }

    #[test]
    fn same_block_same_cell() {
        let dims = GridDims::cube(16);
        let mut g = FroxelGrid::new(dims, GridRole::Geometry).unwrap();
        g.set(4, 5, 6).unwrap();
        g.set(7, 7, 7).unwrap();
        let t: ChannelTensor<f64> = interleave(&g, 4).unwrap();
        assert_eq!(t.cell(1, 1, 1).iter().filter(|&&v| v == 1.0).count(), 2);
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(any::<bool>(), 16 * 8 * 8), d in prop::sample::select(vec![2usize, 4, 8])) {
            let dims = GridDims::new(16, 8, 8);
            let mut g = FroxelGrid::new(dims, GridRole::Geometry).unwrap();
            for (i, &b) in bits.iter().enumerate() {
                if b { g.set_linear(i); }
            }
            let t: ChannelTensor<f32> = interleave(&g, d).unwrap();
            prop_assert_eq!(t.len(), dims.len());
            let back = deinterleave_threshold(&t, d, 0.5, GridRole::Geometry).unwrap();
            prop_assert_eq!(back.bytes(), g.bytes());
            let t2: ChannelTensor<f32> = interleave(&back, d).unwrap();
            prop_assert_eq!(t2, t);
        }
    }
}
