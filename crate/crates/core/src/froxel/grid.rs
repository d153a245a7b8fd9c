use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{PvsError, Result};

/// Grid resolution `(N_x, N_y, N_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridDims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn to_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn max_dim(&self) -> usize {
        self.nx.max(self.ny).max(self.nz)
    }

    /// Froxel grids need `N_x` divisible by 8 so rows pack into whole bytes.
    pub fn validate_packed(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(PvsError::invalid(format!("grid dims must be positive, got {self:?}")));
        }
        if self.nx % 8 != 0 {
            return Err(PvsError::invalid(format!("N_x = {} is not divisible by 8", self.nx)));
        }
        Ok(())
    }

    /// x-fastest linear index.
    #[inline]
    pub const fn linear(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, linear: usize) -> [usize; 3] {
        let x = linear % self.nx;
        let r = linear / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    #[inline]
    pub const fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl std::str::FromStr for GridDims {
    type Err = PvsError;

    /// Accepts `N` for a cube or `NxMxK`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| PvsError::invalid(format!("bad grid dims `{s}`")))?;
        match nums[..] {
            [n] => Ok(Self::cube(n)),
            [x, y, z] => Ok(Self::new(x, y, z)),
            _ => Err(PvsError::invalid(format!("bad grid dims `{s}`"))),
        }
    }
}

/// What a grid holds; stored in the file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridRole {
    Geometry = 0,
    GtPvs = 1,
    PredictedPvs = 2,
}

impl GridRole {
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Self::Geometry),
            1 => Ok(Self::GtPvs),
            2 => Ok(Self::PredictedPvs),
            t => Err(PvsError::format("FPVS grid", format!("unknown role tag {t}"))),
        }
    }
}

pub const GRID_MAGIC: [u8; 4] = *b"FPVS";
pub const GRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 12 + 4;

/// Bit-packed binary froxel grid. Eight consecutive froxels along x share a
/// byte, least significant bit first; byte index is
/// `x/8 + (N_x/8)·(y + N_y·z)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FroxelGrid {
    dims: GridDims,
    role: GridRole,
    supersample: u8,
    bits: Vec<u8>,
}

impl FroxelGrid {
    pub fn new(dims: GridDims, role: GridRole) -> Result<Self> {
        dims.validate_packed()?;
        Ok(Self {
            dims,
            role,
            supersample: 1,
            bits: vec![0; dims.len() / 8],
        })
    }

    /// Builds a grid from raw packed bytes.
    pub fn from_bytes(dims: GridDims, role: GridRole, bits: Vec<u8>) -> Result<Self> {
        dims.validate_packed()?;
        if bits.len() != dims.len() / 8 {
            return Err(PvsError::DimMismatch {
                expected: format!("{} bytes", dims.len() / 8),
                actual: format!("{} bytes", bits.len()),
            });
        }
        Ok(Self {
            dims,
            role,
            supersample: 1,
            bits,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn role(&self) -> GridRole {
        self.role
    }

    pub fn set_role(&mut self, role: GridRole) {
        self.role = role;
    }

    pub fn with_role(mut self, role: GridRole) -> Self {
        self.role = role;
        self
    }

    pub fn supersample(&self) -> u8 {
        self.supersample
    }

    pub fn set_supersample(&mut self, s: u8) {
        self.supersample = s;
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn byte_index(&self, x: usize, y: usize, z: usize) -> usize {
        x / 8 + (self.dims.nx / 8) * (y + self.dims.ny * z)
    }

    fn check(&self, x: usize, y: usize, z: usize) -> Result<()> {
        if self.dims.contains(x, y, z) {
            Ok(())
        } else {
            Err(PvsError::OutOfRange {
                x,
                y,
                z,
                dims: self.dims.to_array(),
            })
        }
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> Result<bool> {
        self.check(x, y, z)?;
        Ok(self.get_unchecked(x, y, z))
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize) -> Result<()> {
        self.check(x, y, z)?;
        self.set_unchecked(x, y, z);
        Ok(())
    }

    /// Caller guarantees the coordinate is in range (checked in debug builds).
    #[inline]
    pub fn get_unchecked(&self, x: usize, y: usize, z: usize) -> bool {
        debug_assert!(self.dims.contains(x, y, z));
        self.bits[self.byte_index(x, y, z)] >> (x % 8) & 1 == 1
    }

    #[inline]
    pub fn set_unchecked(&mut self, x: usize, y: usize, z: usize) {
        debug_assert!(self.dims.contains(x, y, z));
        let i = self.byte_index(x, y, z);
        self.bits[i] |= 1 << (x % 8);
    }

    #[inline]
    pub fn get_linear(&self, i: usize) -> bool {
        // x-fastest linear order coincides with the packed bit order
        self.bits[i / 8] >> (i % 8) & 1 == 1
    }

    #[inline]
    pub fn set_linear(&mut self, i: usize) {
        self.bits[i / 8] |= 1 << (i % 8);
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Fraction of occupied froxels.
    pub fn occupancy(&self) -> f64 {
        self.count_ones() as f64 / self.dims.len() as f64
    }

    /// Linear indices of set froxels, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(bi, &b)| {
            (0..8).filter(move |k| b >> k & 1 == 1).map(move |k| bi * 8 + k)
        })
    }

    fn same_dims(&self, other: &FroxelGrid) -> Result<()> {
        if self.dims == other.dims {
            Ok(())
        } else {
            Err(PvsError::DimMismatch {
                expected: self.dims.to_string(),
                actual: other.dims.to_string(),
            })
        }
    }

    pub fn union_with(&mut self, other: &FroxelGrid) -> Result<()> {
        self.same_dims(other)?;
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &FroxelGrid) -> Result<bool> {
        self.same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0))
    }

    /// `|self ∧ other|`
    pub fn count_and(&self, other: &FroxelGrid) -> Result<usize> {
        self.same_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// `|self ∧ ¬other|`
    pub fn count_and_not(&self, other: &FroxelGrid) -> Result<usize> {
        self.same_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum())
    }

    /// Intersection-over-union of the set froxels; 1 when both are empty.
    pub fn jaccard(&self, other: &FroxelGrid) -> Result<f64> {
        self.same_dims(other)?;
        let (mut inter, mut uni) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (a & b).count_ones() as usize;
            uni += (a | b).count_ones() as usize;
        }
        Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(&GRID_MAGIC);
        header.extend_from_slice(&GRID_VERSION.to_le_bytes());
        for d in self.dims.to_array() {
            header.extend_from_slice(&(d as u32).to_le_bytes());
        }
        header.push(self.role as u8);
        header.push(self.supersample);
        header.extend_from_slice(&[0, 0]);
        w.write_all(&header)?;
        w.write_all(&self.bits)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let fmt = |d: String| PvsError::format("FPVS grid", d);
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header).map_err(|e| fmt(format!("header: {e}")))?;
        if header[..4] != GRID_MAGIC {
            return Err(fmt(format!("bad magic {:?}", &header[..4])));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != GRID_VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let dims = GridDims::new(word(8) as usize, word(12) as usize, word(16) as usize);
        dims.validate_packed()?;
        let role = GridRole::from_tag(header[20])?;
        let supersample = header[21];
        let mut bits = vec![0u8; dims.len() / 8];
        r.read_exact(&mut bits).map_err(|e| fmt(format!("payload: {e}")))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| fmt(e.to_string()))? != 0 {
            return Err(fmt("trailing bytes after payload".into()));
        }
        Ok(Self {
            dims,
            role,
            supersample,
            bits,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| PvsError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| PvsError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| PvsError::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}
