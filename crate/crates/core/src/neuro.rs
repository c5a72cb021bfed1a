//! Neuroimaging ingestion: a single-file NIfTI-1 reader subset, per-volume
//! intensity normalization, flattening volumes into sample rows,
//! filename-keyed tag loading, and grayscale slice rendering.
//!
//! Only uncompressed single-file NIfTI-1 volumes are supported: no separated
//! header/image pairs, no NIfTI-2, no gzip. Three spatial dimensions are
//! required; a fourth dimension is accepted only when it is a singleton.
//! Supported on-disk datatypes are uint8, int16, and float32, in either byte
//! order. Brain masking and spatial registration are out of scope; analyses
//! run on full flattened volumes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, NiftiError, Result};
use crate::linalg::Mat;
use crate::sampling::parse_tag_sidecar;

/// Fixed size of a NIfTI-1 header in bytes.
pub const NIFTI_HEADER_SIZE: usize = 348;

/// Magic trailer identifying a single-file NIfTI-1 volume.
pub const NIFTI_MAGIC: [u8; 4] = *b"n+1\0";

/// One 3-D image: voxel dimensions, intensities in x-fastest order, and the
/// spatial affine carried through from the header (never interpreted here).
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    /// Voxel counts along x, y, z.
    pub dims: (usize, usize, usize),
    /// Intensities, `x + nx*(y + ny*z)` indexing.
    pub voxels: Vec<f32>,
    /// Rows of the 4x4 voxel-to-world transform.
    pub affine: [[f32; 4]; 4],
    /// How many non-finite voxels were replaced with 0 at load time.
    pub nan_replaced: usize,
}

/// Identity spatial transform, used when constructing volumes in memory.
pub const IDENTITY_AFFINE: [[f32; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

impl Volume {
    /// Builds a volume with an identity affine, checking the voxel count and
    /// that every intensity is finite.
    pub fn new(dims: (usize, usize, usize), voxels: Vec<f32>) -> Result<Self> {
        let expected = dims.0 * dims.1 * dims.2;
        if voxels.len() != expected {
            return Err(Error::Shape {
                op: "volume",
                detail: format!(
                    "{}x{}x{} needs {expected} voxels, got {}",
                    dims.0,
                    dims.1,
                    dims.2,
                    voxels.len()
                ),
            });
        }
        if let Some(bad) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                op: "volume",
                detail: format!("non-finite voxel at index {bad}"),
            });
        }
        Ok(Self { dims, voxels, affine: IDENTITY_AFFINE, nan_replaced: 0 })
    }

    /// Number of voxels.
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Intensity at integer coordinates, x-fastest layout.
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        let (nx, ny, _) = self.dims;
        self.voxels[x + nx * (y + ny * z)]
    }
}

fn u16_at(bytes: &[u8], at: usize, big_endian: bool) -> u16 {
    let raw = [bytes[at], bytes[at + 1]];
    if big_endian { u16::from_be_bytes(raw) } else { u16::from_le_bytes(raw) }
}

fn i16_at(bytes: &[u8], at: usize, big_endian: bool) -> i16 {
    u16_at(bytes, at, big_endian) as i16
}

fn u32_at(bytes: &[u8], at: usize, big_endian: bool) -> u32 {
    let raw = [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
    if big_endian { u32::from_be_bytes(raw) } else { u32::from_le_bytes(raw) }
}

fn f32_at(bytes: &[u8], at: usize, big_endian: bool) -> f32 {
    f32::from_bits(u32_at(bytes, at, big_endian))
}

/// Parses a single-file NIfTI-1 volume from raw bytes.
///
/// Byte order is inferred from the declared header size. Intensities are
/// scaled by the header's slope and intercept when the slope is nonzero (a
/// zero slope means unscaled by convention). Non-finite voxels are replaced
/// with 0 and counted in `nan_replaced`, so every loaded volume is finite.
pub fn read_nifti(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < NIFTI_HEADER_SIZE {
        return Err(NiftiError::Truncated { needed: NIFTI_HEADER_SIZE, available: bytes.len() }
            .into());
    }
    let le_size = u32_at(bytes, 0, false) as i32;
    let big_endian = match (le_size, u32_at(bytes, 0, true) as i32) {
        (348, _) => false,
        (_, 348) => true,
        _ => return Err(NiftiError::BadHeaderSize { found: le_size }.into()),
    };
    let magic = [bytes[344], bytes[345], bytes[346], bytes[347]];
    if magic != NIFTI_MAGIC {
        return Err(NiftiError::BadMagic { found: magic }.into());
    }
    let datatype = i16_at(bytes, 70, big_endian);
    let bytes_per_voxel: usize = match datatype {
        2 => 1,
        4 => 2,
        16 => 4,
        code => return Err(NiftiError::UnsupportedDatatype { code }.into()),
    };

    let ndim = i16_at(bytes, 40, big_endian);
    if ndim < 3 {
        return Err(NiftiError::TooFewDims { count: ndim }.into());
    }
    if ndim > 4 {
        return Err(NiftiError::TooManyDims { count: ndim }.into());
    }
    let mut dims = [0usize; 3];
    for (i, slot) in dims.iter_mut().enumerate() {
        let value = i16_at(bytes, 40 + 2 * (i + 1), big_endian);
        if value < 1 {
            return Err(NiftiError::BadDim { index: i + 1, value }.into());
        }
        *slot = value as usize;
    }
    if ndim == 4 {
        let fourth = i16_at(bytes, 48, big_endian);
        if fourth != 1 {
            return Err(NiftiError::NonSingletonFourthDim { size: fourth }.into());
        }
    }

    let vox_offset = f32_at(bytes, 108, big_endian);
    if !vox_offset.is_finite() || vox_offset < NIFTI_HEADER_SIZE as f32 {
        return Err(NiftiError::BadVoxOffset { offset: vox_offset as i64 }.into());
    }
    // Compute in u64 with saturation: a mangled header can declare an offset
    // or dims far beyond any real file, and that must surface as truncation.
    let offset = vox_offset as u64;
    let count = dims[0] as u64 * dims[1] as u64 * dims[2] as u64;
    let needed = offset.saturating_add(count * bytes_per_voxel as u64);
    if (bytes.len() as u64) < needed {
        return Err(NiftiError::Truncated {
            needed: usize::try_from(needed).unwrap_or(usize::MAX),
            available: bytes.len(),
        }
        .into());
    }
    let offset = offset as usize;
    let count = count as usize;

    let slope = f32_at(bytes, 112, big_endian);
    let inter = f32_at(bytes, 116, big_endian);
    let mut nan_replaced = 0usize;
    let mut voxels = Vec::with_capacity(count);
    for i in 0..count {
        let at = offset + i * bytes_per_voxel;
        let raw = match datatype {
            2 => f32::from(bytes[at]),
            4 => f32::from(i16_at(bytes, at, big_endian)),
            _ => f32_at(bytes, at, big_endian),
        };
        let scaled = if slope != 0.0 { slope * raw + inter } else { raw };
        if scaled.is_finite() {
            voxels.push(scaled);
        } else {
            voxels.push(0.0);
            nan_replaced += 1;
        }
    }

    let mut affine = IDENTITY_AFFINE;
    for (r, base) in [(0usize, 280usize), (1, 296), (2, 312)] {
        for (c, slot) in affine[r].iter_mut().enumerate() {
            *slot = f32_at(bytes, base + 4 * c, big_endian);
        }
    }
    Ok(Volume { dims: (dims[0], dims[1], dims[2]), voxels, affine, nan_replaced })
}

/// Reads a NIfTI file from disk.
pub fn read_nifti_file(path: &Path) -> Result<Volume> {
    read_nifti(&std::fs::read(path)?)
}

/// Encodes a volume as a little-endian float32 single-file NIfTI-1 image
/// with unit slope and zero intercept.
pub fn write_nifti(volume: &Volume) -> Result<Vec<u8>> {
    let (nx, ny, nz) = volume.dims;
    for (i, n) in [nx, ny, nz].into_iter().enumerate() {
        if n == 0 || n > i16::MAX as usize {
            return Err(Error::Config(format!(
                "dim {} of {n} voxels cannot be encoded in a NIfTI-1 header",
                i + 1
            )));
        }
    }
    if volume.voxels.len() != nx * ny * nz {
        return Err(Error::Shape {
            op: "write_nifti",
            detail: format!(
                "{nx}x{ny}x{nz} needs {} voxels, got {}",
                nx * ny * nz,
                volume.voxels.len()
            ),
        });
    }
    let offset = NIFTI_HEADER_SIZE + 4;
    let mut out = vec![0u8; offset + 4 * volume.voxels.len()];
    out[0..4].copy_from_slice(&(NIFTI_HEADER_SIZE as i32).to_le_bytes());
    let dim: [i16; 8] = [3, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        out[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    out[70..72].copy_from_slice(&16i16.to_le_bytes());
    out[72..74].copy_from_slice(&32i16.to_le_bytes());
    for i in 0..8 {
        out[76 + 4 * i..80 + 4 * i].copy_from_slice(&1.0f32.to_le_bytes());
    }
    out[108..112].copy_from_slice(&(offset as f32).to_le_bytes());
    out[112..116].copy_from_slice(&1.0f32.to_le_bytes());
    out[116..120].copy_from_slice(&0.0f32.to_le_bytes());
    out[254..256].copy_from_slice(&1i16.to_le_bytes());
    for (r, base) in [(0usize, 280usize), (1, 296), (2, 312)] {
        for c in 0..4 {
            out[base + 4 * c..base + 4 * (c + 1)]
                .copy_from_slice(&volume.affine[r][c].to_le_bytes());
        }
    }
    out[344..348].copy_from_slice(&NIFTI_MAGIC);
    for (i, v) in volume.voxels.iter().enumerate() {
        out[offset + 4 * i..offset + 4 * (i + 1)].copy_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Writes a volume to disk; see [`write_nifti`].
pub fn write_nifti_file(path: &Path, volume: &Volume) -> Result<()> {
    Ok(std::fs::write(path, write_nifti(volume)?)?)
}

/// Min-max rescales intensities to `[0, 1]`. A constant volume maps to all
/// zeros. Idempotent: normalizing twice equals normalizing once.
pub fn normalize(volume: &Volume) -> Volume {
    let min = volume.voxels.iter().copied().fold(f32::INFINITY, f32::min);
    let max = volume.voxels.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = max - min;
    let voxels = if volume.voxels.is_empty() || span == 0.0 {
        vec![0.0; volume.voxels.len()]
    } else {
        volume.voxels.iter().map(|v| (v - min) / span).collect()
    };
    Volume { voxels, ..volume.clone() }
}

/// Stacks volumes into a sample matrix, one row per volume with voxels in
/// x-fastest order. An empty list yields an empty matrix (zero rows and
/// width; `Mat::is_empty` is the flag). All volumes must share dimensions;
/// a mismatch error names the offending volume index.
pub fn flatten(volumes: &[Volume]) -> Result<Mat<f64>> {
    let Some(first) = volumes.first() else {
        return Ok(Mat::zeros(0, 0));
    };
    let dims = first.dims;
    let width = first.len();
    let mut data = Vec::with_capacity(volumes.len() * width);
    for (i, v) in volumes.iter().enumerate() {
        if v.dims != dims {
            return Err(Error::Shape {
                op: "flatten",
                detail: format!(
                    "volume {i} has dims {}x{}x{}, expected {}x{}x{}",
                    v.dims.0, v.dims.1, v.dims.2, dims.0, dims.1, dims.2
                ),
            });
        }
        data.extend(v.voxels.iter().map(|&x| f64::from(x)));
    }
    Ok(Mat::from_vec(volumes.len(), width, data))
}

/// Rebuilds a volume from one flattened row (the inverse of [`flatten`] on
/// values that fit in 32 bits).
pub fn volume_from_row(row: &[f64], dims: (usize, usize, usize)) -> Result<Volume> {
    Volume::new(dims, row.iter().map(|&v| v as f32).collect())
}

/// Tags for an ordered list of volumes, plus the vocabulary they draw from.
#[derive(Clone, Debug, PartialEq)]
pub struct TagAssignment {
    /// One tag set per volume, aligned with the name order given to
    /// [`load_tags`].
    pub tags: Vec<Vec<String>>,
    pub vocabulary: Vec<String>,
    /// Non-fatal notes, e.g. tags that were missing from the vocabulary line.
    pub warnings: Vec<String>,
}

impl TagAssignment {
    /// Number of volumes carrying the given tag.
    pub fn count_tagged(&self, tag: &str) -> usize {
        self.tags.iter().filter(|set| set.iter().any(|t| t == tag)).count()
    }
}

/// Matches a tag sidecar against the volumes it describes.
///
/// `names` lists the volume filenames in load order; the sidecar must
/// reference each exactly once (an empty tag set is allowed and lands the
/// volume on the untagged side of every split). Tags absent from the
/// vocabulary line are appended to the vocabulary with a warning.
pub fn load_tags(text: &str, names: &[String]) -> Result<TagAssignment> {
    let sidecar = parse_tag_sidecar(text)?;
    let mut by_name: BTreeMap<&str, &[String]> =
        sidecar.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
    let mut tags = Vec::with_capacity(names.len());
    for name in names {
        match by_name.remove(name.as_str()) {
            Some(set) => tags.push(set.to_vec()),
            None => {
                return Err(Error::Sidecar(format!("no entry for volume \"{name}\"")));
            }
        }
    }
    if !by_name.is_empty() {
        let extra: Vec<&str> = by_name.into_keys().collect();
        return Err(Error::Sidecar(format!(
            "entries for unknown volumes: {}",
            extra.join(", ")
        )));
    }
    Ok(TagAssignment { tags, vocabulary: sidecar.vocab, warnings: sidecar.warnings })
}

fn axis_letter(axis: usize) -> char {
    ['x', 'y', 'z'][axis]
}

/// Extracts one slice as an 8-bit grayscale raster. Returns (width, height,
/// bytes) with intensities min-max mapped over the whole volume so slices
/// share a scale; a constant volume maps to mid-gray.
fn slice_bytes(volume: &Volume, axis: usize, index: usize) -> (usize, usize, Vec<u8>) {
    let (nx, ny, nz) = volume.dims;
    let min = f64::from(volume.voxels.iter().copied().fold(f32::INFINITY, f32::min));
    let max = f64::from(volume.voxels.iter().copied().fold(f32::NEG_INFINITY, f32::max));
    let shade = |v: f32| -> u8 {
        if max == min {
            128
        } else {
            ((f64::from(v) - min) / (max - min) * 255.0).round().clamp(0.0, 255.0) as u8
        }
    };
    let (width, height): (usize, usize) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    let mut bytes = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (x, y, z) = match axis {
                0 => (index, col, row),
                1 => (col, index, row),
                _ => (col, row, index),
            };
            bytes.push(shade(volume.get(x, y, z)));
        }
    }
    (width, height, bytes)
}

/// Renders the selected slices as binary PGM (P5) images in `dir`, named
/// `slice_<axis><index>.pgm`, and returns the written paths in index order.
pub fn render_slices(
    volume: &Volume,
    axis: usize,
    indices: &[usize],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if axis > 2 {
        return Err(Error::Config(format!("axis {axis} is not one of 0 (x), 1 (y), 2 (z)")));
    }
    let size = [volume.dims.0, volume.dims.1, volume.dims.2][axis];
    if let Some(&bad) = indices.iter().find(|&&i| i >= size) {
        return Err(Error::Config(format!(
            "slice index {bad} out of range for axis {} of size {size}",
            axis_letter(axis)
        )));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(indices.len());
    for &index in indices {
        let (width, height, bytes) = slice_bytes(volume, axis, index);
        let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
        out.extend_from_slice(&bytes);
        let path = dir.join(format!("slice_{}{index:03}.pgm", axis_letter(axis)));
        std::fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a NIfTI byte buffer field by field, in either byte order, so
    /// reader tests do not depend on the crate's own writer.
    struct HeaderBuilder {
        bytes: Vec<u8>,
        big_endian: bool,
    }

    impl HeaderBuilder {
        fn new(big_endian: bool) -> Self {
            let mut b = Self { bytes: vec![0u8; 352], big_endian };
            b.put_i32(0, 348);
            b.put_i16(70, 16);
            b.put_i16(72, 32);
            b.put_f32(108, 352.0);
            b.put_f32(112, 1.0);
            b.bytes[344..348].copy_from_slice(b"n+1\0");
            b
        }

        fn put_i16(&mut self, at: usize, v: i16) {
            let raw = if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
            self.bytes[at..at + 2].copy_from_slice(&raw);
        }

        fn put_i32(&mut self, at: usize, v: i32) {
            let raw = if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
            self.bytes[at..at + 4].copy_from_slice(&raw);
        }

        fn put_f32(&mut self, at: usize, v: f32) {
            let raw = if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
            self.bytes[at..at + 4].copy_from_slice(&raw);
        }

        fn dims(mut self, d: &[i16]) -> Self {
            self.put_i16(40, d.len() as i16);
            for (i, &v) in d.iter().enumerate() {
                self.put_i16(42 + 2 * i, v);
            }
            self
        }

        fn datatype(mut self, code: i16) -> Self {
            self.put_i16(70, code);
            self
        }

        fn scaling(mut self, slope: f32, inter: f32) -> Self {
            self.put_f32(112, slope);
            self.put_f32(116, inter);
            self
        }

        fn payload_f32(mut self, values: &[f32]) -> Vec<u8> {
            for &v in values {
                let raw = if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
                self.bytes.extend_from_slice(&raw);
            }
            self.bytes
        }

        fn payload_i16(mut self, values: &[i16]) -> Vec<u8> {
            for &v in values {
                let raw = if self.big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
                self.bytes.extend_from_slice(&raw);
            }
            self.bytes
        }

        fn payload_u8(mut self, values: &[u8]) -> Vec<u8> {
            self.bytes.extend_from_slice(values);
            self.bytes
        }
    }

    fn nifti_err(r: Result<Volume>) -> NiftiError {
        match r {
            Err(Error::Nifti(e)) => e,
            other => panic!("expected a NIfTI error, got {other:?}"),
        }
    }

    fn sample_volume() -> Volume {
        let voxels: Vec<f32> = (0..24).map(|i| i as f32 * 0.5 - 3.0).collect();
        let mut v = Volume::new((4, 3, 2), voxels).unwrap();
        v.affine = [
            [2.0, 0.0, 0.0, -10.0],
            [0.0, 2.0, 0.0, -20.0],
            [0.0, 0.0, 2.0, -30.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        v
    }

    #[test]
    fn writer_and_reader_round_trip() {
        let vol = sample_volume();
        let parsed = read_nifti(&write_nifti(&vol).unwrap()).unwrap();
        assert_eq!(parsed, vol);
        assert_eq!(parsed.nan_replaced, 0);
        assert_eq!(parsed.get(1, 2, 1), vol.voxels[1 + 4 * (2 + 3)]);
    }

    #[test]
    fn int16_values_are_scaled_by_slope_and_intercept() {
        let bytes =
            HeaderBuilder::new(false).dims(&[1, 1, 1]).datatype(4).scaling(2.0, 1.0).payload_i16(&[3]);
        let vol = read_nifti(&bytes).unwrap();
        assert_eq!(vol.voxels, vec![7.0]);
    }

    #[test]
    fn zero_slope_means_unscaled() {
        let bytes = HeaderBuilder::new(false)
            .dims(&[3, 1, 1])
            .datatype(2)
            .scaling(0.0, 5.0)
            .payload_u8(&[10, 20, 30]);
        let vol = read_nifti(&bytes).unwrap();
        assert_eq!(vol.voxels, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn big_endian_files_decode_to_the_same_values() {
        let values: Vec<i16> = (0..6).map(|i| i * 100 - 250).collect();
        let le = HeaderBuilder::new(false).dims(&[3, 2, 1]).datatype(4).payload_i16(&values);
        let be = HeaderBuilder::new(true).dims(&[3, 2, 1]).datatype(4).payload_i16(&values);
        assert_eq!(read_nifti(&le).unwrap(), read_nifti(&be).unwrap());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = HeaderBuilder::new(false).dims(&[1, 1, 1]).payload_f32(&[1.0]);
        bytes[344..348].copy_from_slice(b"ni1\0");
        assert_eq!(nifti_err(read_nifti(&bytes)), NiftiError::BadMagic { found: *b"ni1\0" });
    }

    #[test]
    fn short_buffers_are_truncation_errors() {
        assert_eq!(
            nifti_err(read_nifti(&[0u8; 100])),
            NiftiError::Truncated { needed: 348, available: 100 }
        );
        let mut bytes = HeaderBuilder::new(false).dims(&[2, 2, 2]).payload_f32(&[0.0; 8]);
        bytes.truncate(352 + 3 * 4);
        assert_eq!(
            nifti_err(read_nifti(&bytes)),
            NiftiError::Truncated { needed: 352 + 32, available: 352 + 12 }
        );
    }

    #[test]
    fn bad_header_size_is_rejected() {
        let mut b = HeaderBuilder::new(false);
        b.put_i32(0, 340);
        let bytes = b.dims(&[1, 1, 1]).payload_f32(&[1.0]);
        assert_eq!(nifti_err(read_nifti(&bytes)), NiftiError::BadHeaderSize { found: 340 });
    }

    #[test]
    fn unsupported_datatypes_are_rejected() {
        let bytes =
            HeaderBuilder::new(false).dims(&[1, 1, 1]).datatype(8).payload_f32(&[1.0]);
        assert_eq!(nifti_err(read_nifti(&bytes)), NiftiError::UnsupportedDatatype { code: 8 });
    }

    #[test]
    fn dimension_counts_and_sizes_are_validated() {
        let two = HeaderBuilder::new(false).dims(&[4, 3]).payload_f32(&[0.0; 12]);
        assert_eq!(nifti_err(read_nifti(&two)), NiftiError::TooFewDims { count: 2 });

        let five = HeaderBuilder::new(false).dims(&[2, 2, 2, 1, 1]).payload_f32(&[0.0; 8]);
        assert_eq!(nifti_err(read_nifti(&five)), NiftiError::TooManyDims { count: 5 });

        let movie = HeaderBuilder::new(false).dims(&[2, 2, 2, 9]).payload_f32(&[0.0; 72]);
        assert_eq!(
            nifti_err(read_nifti(&movie)),
            NiftiError::NonSingletonFourthDim { size: 9 }
        );

        let singleton = HeaderBuilder::new(false).dims(&[2, 2, 2, 1]).payload_f32(&[0.0; 8]);
        assert_eq!(read_nifti(&singleton).unwrap().dims, (2, 2, 2));

        let zero = HeaderBuilder::new(false).dims(&[2, 0, 2]).payload_f32(&[]);
        assert_eq!(nifti_err(read_nifti(&zero)), NiftiError::BadDim { index: 2, value: 0 });

        let negative = HeaderBuilder::new(false).dims(&[2, 2, -3]).payload_f32(&[]);
        assert_eq!(nifti_err(read_nifti(&negative)), NiftiError::BadDim { index: 3, value: -3 });
    }

    #[test]
    fn voxel_offsets_inside_the_header_are_rejected() {
        let mut b = HeaderBuilder::new(false);
        b.put_f32(108, 100.0);
        let bytes = b.dims(&[1, 1, 1]).payload_f32(&[1.0]);
        assert_eq!(nifti_err(read_nifti(&bytes)), NiftiError::BadVoxOffset { offset: 100 });
    }

    #[test]
    fn non_finite_voxels_are_zeroed_and_counted() {
        let bytes = HeaderBuilder::new(false).dims(&[4, 1, 1]).payload_f32(&[
            1.5,
            f32::NAN,
            f32::INFINITY,
            f32::NEG_INFINITY,
        ]);
        let vol = read_nifti(&bytes).unwrap();
        assert_eq!(vol.voxels, vec![1.5, 0.0, 0.0, 0.0]);
        assert_eq!(vol.nan_replaced, 3);
    }

    #[test]
    fn normalize_rescales_to_the_unit_interval() {
        let vol = Volume::new((3, 1, 1), vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(normalize(&vol).voxels, vec![0.0, 0.5, 1.0]);

        let constant = Volume::new((2, 2, 1), vec![3.0; 4]).unwrap();
        assert_eq!(normalize(&constant).voxels, vec![0.0; 4]);

        let spread = sample_volume();
        let once = normalize(&spread);
        assert!(once.voxels.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn flatten_lays_out_rows_in_voxel_order() {
        let a = Volume::new((2, 1, 1), vec![5.0, 6.0]).unwrap();
        let b = Volume::new((2, 1, 1), vec![7.0, 8.0]).unwrap();
        let m = flatten(&[a, b]).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.row(0), &[5.0, 6.0]);
        assert_eq!(m.row(1), &[7.0, 8.0]);
    }

    #[test]
    fn flatten_of_nothing_is_an_empty_matrix() {
        let m = flatten(&[]).unwrap();
        assert!(m.is_empty());
        assert_eq!((m.rows(), m.cols()), (0, 0));
    }

    #[test]
    fn flatten_rejects_mixed_dimensions_by_index() {
        let a = Volume::new((2, 1, 1), vec![0.0; 2]).unwrap();
        let b = Volume::new((1, 2, 1), vec![0.0; 2]).unwrap();
        match flatten(&[a, b]) {
            Err(Error::Shape { detail, .. }) => assert!(detail.contains("volume 1"), "{detail}"),
            other => panic!("expected a shape error, got {other:?}"),
        }
    }

    #[test]
    fn flatten_and_reshape_are_inverse() {
        let vol = sample_volume();
        let m = flatten(std::slice::from_ref(&vol)).unwrap();
        let back = volume_from_row(m.row(0), vol.dims).unwrap();
        assert_eq!(back.voxels, vol.voxels);
    }

    const SIDECAR: &str = "vocab: visual, auditory\n\
                           a.nii: visual\n\
                           b.nii: visual, auditory\n";

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tags_align_with_the_volume_order() {
        let loaded = load_tags(SIDECAR, &names(&["b.nii", "a.nii"])).unwrap();
        assert_eq!(loaded.vocabulary, vec!["visual", "auditory"]);
        assert_eq!(loaded.tags[0], vec!["visual", "auditory"]);
        assert_eq!(loaded.tags[1], vec!["visual"]);
        assert_eq!(loaded.count_tagged("visual"), 2);
        assert_eq!(loaded.count_tagged("auditory"), 1);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn every_volume_needs_exactly_one_entry() {
        let missing = load_tags(SIDECAR, &names(&["a.nii", "b.nii", "c.nii"]));
        assert!(matches!(missing, Err(Error::Sidecar(ref m)) if m.contains("c.nii")), "{missing:?}");

        let extra = load_tags(SIDECAR, &names(&["a.nii"]));
        assert!(matches!(extra, Err(Error::Sidecar(ref m)) if m.contains("b.nii")), "{extra:?}");

        let duplicate = "vocab: visual\na.nii: visual\na.nii: visual\n";
        assert!(load_tags(duplicate, &names(&["a.nii"])).is_err());
    }

    #[test]
    fn untagged_volumes_and_new_tags_are_tolerated() {
        let text = "vocab: visual\na.nii:\nb.nii: visual, motor\n";
        let loaded = load_tags(text, &names(&["a.nii", "b.nii"])).unwrap();
        assert_eq!(loaded.tags[0], Vec::<String>::new());
        assert_eq!(loaded.vocabulary, vec!["visual", "motor"]);
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn constant_volumes_render_uniform_gray() {
        let dir = tempfile::tempdir().unwrap();
        let vol = Volume::new((3, 2, 2), vec![4.0; 12]).unwrap();
        let paths = render_slices(&vol, 2, &[0, 1], dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        for p in &paths {
            let bytes = std::fs::read(p).unwrap();
            let header = b"P5\n3 2\n255\n";
            assert_eq!(&bytes[..header.len()], header);
            assert!(bytes[header.len()..].iter().all(|&b| b == 128));
        }
    }

    #[test]
    fn a_single_bright_voxel_lands_on_the_matching_pixel() {
        let mut voxels = vec![0.0f32; 24];
        let (x, y, z) = (1, 2, 0);
        voxels[x + 4 * (y + 3 * z)] = 9.0;
        let vol = Volume::new((4, 3, 2), voxels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = render_slices(&vol, 2, &[0, 1], dir.path()).unwrap();

        let bright = std::fs::read(&paths[0]).unwrap();
        let header = b"P5\n4 3\n255\n";
        let pixels = &bright[header.len()..];
        for (i, &b) in pixels.iter().enumerate() {
            let expected = if i == 1 + 4 * 2 { 255 } else { 0 };
            assert_eq!(b, expected, "pixel {i}");
        }
        let dark = std::fs::read(&paths[1]).unwrap();
        assert!(dark[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn gradient_slices_match_hand_computed_bytes() {
        // v = x + 3y over 3x2x1; shades are 255*v/5 = 51*v exactly.
        let vol = Volume::new((3, 2, 1), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = render_slices(&vol, 2, &[0], dir.path()).unwrap();
        let bytes = std::fs::read(&paths[0]).unwrap();
        assert_eq!(&bytes[b"P5\n3 2\n255\n".len()..], &[0, 51, 102, 153, 204, 255]);
    }

    #[test]
    fn other_axes_slice_the_expected_planes() {
        let vol = sample_volume();
        let dir = tempfile::tempdir().unwrap();
        let x_slices = render_slices(&vol, 0, &[2], dir.path()).unwrap();
        let bytes = std::fs::read(&x_slices[0]).unwrap();
        // Axis x: width ny=3, height nz=2.
        assert_eq!(&bytes[..b"P5\n3 2\n255\n".len()], b"P5\n3 2\n255\n");
    }

    #[test]
    fn out_of_range_slices_are_rejected() {
        let vol = sample_volume();
        let dir = tempfile::tempdir().unwrap();
        let high = render_slices(&vol, 2, &[2], dir.path());
        assert!(matches!(high, Err(Error::Config(ref m)) if m.contains("axis z")), "{high:?}");
        assert!(render_slices(&vol, 7, &[0], dir.path()).is_err());
    }
}
