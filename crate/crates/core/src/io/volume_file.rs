use std::path::Path;

use crate::error::{Error, Result};
use crate::gp::{HyperParams, N_HYPER};
use crate::spatial::{HyperField, Lattice};

pub const HEADER_LEN: usize = 20;
/// Bit pattern every NaN is normalized to on disk.
pub const CANONICAL_NAN: u32 = 0x7FC0_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    /// `GPV1`: any number of scalar volumes.
    Volume,
    /// `GPH1`: exactly three hyperparameter components.
    Field,
}

impl FileKind {
    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            FileKind::Volume => b"GPV1",
            FileKind::Field => b"GPH1",
        }
    }
}

/// In-memory image of a `GPV1`/`GPH1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFile {
    pub lattice: Lattice,
    /// Each entry holds one value per voxel, x fastest.
    pub volumes: Vec<Vec<f32>>,
}

impl VolumeFile {
    pub fn new(lattice: Lattice, volumes: Vec<Vec<f32>>) -> Result<Self> {
        if let Some(i) = volumes.iter().position(|v| v.len() != lattice.n_voxels()) {
            return Err(Error::invalid(format!("volume {i} does not match lattice dims")));
        }
        Ok(Self { lattice, volumes })
    }

    /// Narrow f64 volumes, writing NaN outside the mask.
    pub fn from_f64(lattice: Lattice, volumes: &[Vec<f64>]) -> Result<Self> {
        let vols = volumes
            .iter()
            .map(|vol| {
                vol.iter()
                    .zip(lattice.mask())
                    .map(|(&x, &m)| if m { x as f32 } else { f32::NAN })
                    .collect()
            })
            .collect();
        Self::new(lattice, vols)
    }

    pub fn volumes_f64(&self) -> Vec<Vec<f64>> {
        self.volumes
            .iter()
            .map(|v| v.iter().map(|&x| x as f64).collect())
            .collect()
    }
}

pub fn expected_len(dims: [usize; 3], nvol: usize) -> Option<u64> {
    let n = (dims[0] as u64).checked_mul(dims[1] as u64)?.checked_mul(dims[2] as u64)?;
    n.checked_mul(4 * nvol as u64 + 1)?.checked_add(HEADER_LEN as u64)
}

fn canonical(x: f32) -> u32 {
    if x.is_nan() {
        CANONICAL_NAN
    } else {
        x.to_bits()
    }
}

pub fn encode(kind: FileKind, file: &VolumeFile) -> Result<Vec<u8>> {
    if kind == FileKind::Field && file.volumes.len() != N_HYPER {
        return Err(Error::invalid(format!("field files hold {N_HYPER} volumes")));
    }
    let dims = file.lattice.dims();
    let too_big = || Error::invalid("lattice too large for the file format");
    let len = expected_len(dims, file.volumes.len()).ok_or_else(too_big)?;
    let mut out = Vec::with_capacity(len as usize);
    out.extend_from_slice(kind.magic());
    for d in dims.into_iter().chain([file.volumes.len()]) {
        out.extend_from_slice(&u32::try_from(d).map_err(|_| too_big())?.to_le_bytes());
    }
    out.extend(file.lattice.mask().iter().map(|&m| m as u8));
    for vol in &file.volumes {
        for &x in vol {
            out.extend_from_slice(&canonical(x).to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode(kind: FileKind, bytes: &[u8]) -> Result<VolumeFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "file shorter than the 20-byte header"));
    }
    if &bytes[..4] != kind.magic() {
        let magic = String::from_utf8_lossy(kind.magic()).into_owned();
        return Err(Error::format(0, format!("expected magic {magic}")));
    }
    let dims = [read_u32(bytes, 4), read_u32(bytes, 8), read_u32(bytes, 12)].map(|d| d as usize);
    let nvol = read_u32(bytes, 16) as usize;
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::format(4 + 4 * i as u64, "dimension must be positive"));
    }
    if kind == FileKind::Field && nvol != N_HYPER {
        return Err(Error::format(16, format!("field files hold {N_HYPER} components, found {nvol}")));
    }
    let expected = expected_len(dims, nvol).ok_or_else(|| Error::format(4, "dimensions overflow"))?;
    let actual = bytes.len() as u64;
    if actual != expected {
        let offset = actual.min(expected);
        return Err(Error::format(
            offset,
            format!("file length {actual} does not match the {expected} bytes implied by the header"),
        ));
    }
    let n: usize = dims.iter().product();
    let mask_bytes = &bytes[HEADER_LEN..HEADER_LEN + n];
    if let Some(i) = mask_bytes.iter().position(|&b| b > 1) {
        return Err(Error::format(
            (HEADER_LEN + i) as u64,
            format!("mask byte {} is not 0 or 1", mask_bytes[i]),
        ));
    }
    let lattice = Lattice::new(dims, mask_bytes.iter().map(|&b| b == 1).collect())?;
    let data = &bytes[HEADER_LEN + n..];
    let volumes = data
        .chunks_exact(4 * n)
        .map(|vol| {
            vol.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect()
        })
        .collect();
    VolumeFile::new(lattice, volumes)
}

/// Write `bytes` to a temporary file next to `path` and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_volume_file(path: &Path) -> Result<VolumeFile> {
    decode(FileKind::Volume, &std::fs::read(path)?)
}

pub fn write_volume_file(path: &Path, file: &VolumeFile) -> Result<()> {
    write_atomic(path, &encode(FileKind::Volume, file)?)
}

/// Hyperparameter field to its `GPH1` image, one volume per component.
pub fn field_to_file(field: &HyperField) -> VolumeFile {
    let volumes = (0..N_HYPER)
        .map(|c| field.component(c).into_iter().map(|x| x as f32).collect())
        .collect();
    VolumeFile {
        lattice: field.lattice().clone(),
        volumes,
    }
}

pub fn field_from_file(file: &VolumeFile) -> Result<HyperField> {
    if file.volumes.len() != N_HYPER {
        return Err(Error::invalid(format!("field files hold {N_HYPER} volumes")));
    }
    let lattice = file.lattice.clone();
    let values = (0..lattice.n_voxels())
        .map(|v| {
            if !lattice.is_masked(v) {
                return Ok(None);
            }
            let c: [f64; N_HYPER] = std::array::from_fn(|k| file.volumes[k][v] as f64);
            let offset = (HEADER_LEN + lattice.n_voxels() + 4 * v) as u64;
            HyperParams::new(c[0], c[1], c[2])
                .map(Some)
                .map_err(|_| Error::format(offset, format!("non-finite hyperparameter at masked voxel {v}")))
        })
        .collect::<Result<Vec<_>>>()?;
    HyperField::from_values(lattice, values)
}

pub fn read_field_file(path: &Path) -> Result<HyperField> {
    field_from_file(&decode(FileKind::Field, &std::fs::read(path)?)?)
}

pub fn write_field_file(path: &Path, field: &HyperField) -> Result<()> {
    write_atomic(path, &encode(FileKind::Field, &field_to_file(field))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VolumeFile {
        let lattice = Lattice::new([2, 2, 1], vec![true, false, true, true]).unwrap();
        VolumeFile::from_f64(lattice, &[vec![1.5, 9.0, -0.25, 3.0], vec![0.0, 0.0, 1e-3, -7.0]]).unwrap()
    }

    #[test]
    fn layout() {
        let b = encode(FileKind::Volume, &sample()).unwrap();
        assert_eq!(b.len(), 20 + 4 * (1 + 4 * 2));
        assert_eq!(&b[..4], b"GPV1");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[16..20], &2u32.to_le_bytes());
        assert_eq!(&b[20..24], &[1, 0, 1, 1]);
        assert_eq!(&b[24..28], &1.5f32.to_le_bytes());
        assert_eq!(&b[28..32], &CANONICAL_NAN.to_le_bytes());
    }

    #[test]
    fn round_trip() {
        let f = sample();
        let back = decode(FileKind::Volume, &encode(FileKind::Volume, &f).unwrap()).unwrap();
        assert_eq!(back.lattice, f.lattice);
        for (a, b) in f.volumes.iter().flatten().zip(back.volumes.iter().flatten()) {
            assert_eq!(canonical(*a), b.to_bits());
        }
    }

    #[test]
    fn nan_payloads_normalized() {
        let lattice = Lattice::full([2, 1, 1]).unwrap();
        let odd = f32::from_bits(0x7FC0_1234);
        let f = VolumeFile::new(lattice, vec![vec![odd, -f32::NAN]]).unwrap();
        let b = encode(FileKind::Volume, &f).unwrap();
        assert_eq!(&b[22..26], &CANONICAL_NAN.to_le_bytes());
        assert_eq!(&b[26..30], &CANONICAL_NAN.to_le_bytes());
    }

    #[test]
    fn truncated_and_padded() {
        let b = encode(FileKind::Volume, &sample()).unwrap();
        let short = &b[..b.len() - 3];
        assert!(matches!(decode(FileKind::Volume, short), Err(Error::Format { offset, .. }) if offset == short.len() as u64));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(decode(FileKind::Volume, &long), Err(Error::Format { offset, .. }) if offset == b.len() as u64));
        assert!(matches!(decode(FileKind::Volume, &b[..7]), Err(Error::Format { offset: 7, .. })));
    }

    #[test]
    fn bad_header_fields() {
        let mut b = encode(FileKind::Volume, &sample()).unwrap();
        assert!(matches!(decode(FileKind::Field, &b), Err(Error::Format { offset: 0, .. })));
        b[21] = 2;
        assert!(matches!(decode(FileKind::Volume, &b), Err(Error::Format { offset: 21, .. })));
        let mut z = encode(FileKind::Volume, &sample()).unwrap();
        z[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode(FileKind::Volume, &z), Err(Error::Format { offset: 8, .. })));
    }

    #[test]
    fn field_round_trip() {
        let lattice = Lattice::new([3, 1, 1], vec![true, true, false]).unwrap();
        let mut field = HyperField::uniform(lattice, HyperParams::new(0.5, -1.25, 2.0).unwrap());
        field.set(1, HyperParams::new(-3.0, 0.0, -10.0).unwrap());
        let file = field_to_file(&field);
        let b = encode(FileKind::Field, &file).unwrap();
        assert_eq!(&b[..4], b"GPH1");
        let back = field_from_file(&decode(FileKind::Field, &b).unwrap()).unwrap();
        assert_eq!(back, field);
    }

    #[test]
    fn field_needs_three_components() {
        let lattice = Lattice::full([1, 1, 1]).unwrap();
        let f = VolumeFile::new(lattice, vec![vec![0.0]]).unwrap();
        assert!(encode(FileKind::Field, &f).is_err());
        let mut b = encode(FileKind::Volume, &f).unwrap();
        b[..4].copy_from_slice(b"GPH1");
        assert!(matches!(decode(FileKind::Field, &b), Err(Error::Format { offset: 16, .. })));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.gpv");
        write_volume_file(&p, &sample()).unwrap();
        let first = std::fs::read(&p).unwrap();
        write_volume_file(&p, &sample()).unwrap();
        assert_eq!(first, std::fs::read(&p).unwrap());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
