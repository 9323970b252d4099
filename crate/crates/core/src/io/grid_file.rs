use std::path::Path;

use super::{file_error, format_error, write_atomically};
use crate::aggregate::{LabelGrid, SemanticProbGrid, VoxelGridSpec};
use crate::depth_init::DepthMap;
use crate::error::{invalid, mismatch, Result};
use crate::gaussian::Point3;

pub const GRID_MAGIC: [u8; 4] = *b"SSCG";
pub const GRID_VERSION: u16 = 1;
/// magic 4, version 2, kind 1, reserved 1, dims 16, origin 24, voxel size 8.
pub const GRID_HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum GridKind {
    Label = 0,
    Prob = 1,
    Depth = 2,
}

impl GridKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Label),
            1 => Some(Self::Prob),
            2 => Some(Self::Depth),
            _ => None,
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            Self::Label => 1,
            Self::Prob | Self::Depth => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridPayload {
    Labels(Vec<u8>),
    Prob(Vec<f32>),
    Depth(Vec<f32>),
}

impl GridPayload {
    pub fn kind(&self) -> GridKind {
        match self {
            Self::Labels(_) => GridKind::Label,
            Self::Prob(_) => GridKind::Prob,
            Self::Depth(_) => GridKind::Depth,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Labels(v) => v.len(),
            Self::Prob(v) | Self::Depth(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense `X × Y × Z × channels` array with grid placement, stored
/// row-major with the channel index fastest.
///
/// Label grids have one channel, probability grids have `C`, and depth maps
/// are stored as `H × W × 1 × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub dims: [u32; 4],
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub payload: GridPayload,
}

impl GridFile {
    pub fn new(
        dims: [u32; 4],
        origin: [f64; 3],
        voxel_size: f64,
        payload: GridPayload,
    ) -> Result<Self> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        if expected != Some(payload.len()) {
            return Err(mismatch(format!(
                "dims {dims:?} do not match a payload of {} elements",
                payload.len()
            )));
        }
        Ok(Self {
            dims,
            origin,
            voxel_size,
            payload,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.payload.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(GRID_HEADER_LEN + self.payload.len() * self.kind().element_size());
        out.extend_from_slice(&GRID_MAGIC);
        out.extend_from_slice(&GRID_VERSION.to_le_bytes());
        out.push(self.kind() as u8);
        out.push(0);
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for o in self.origin {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.voxel_size.to_le_bytes());
        match &self.payload {
            GridPayload::Labels(v) => out.extend_from_slice(v),
            GridPayload::Prob(v) | GridPayload::Depth(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    /// Decodes a grid file; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| format_error(path, reason);
        if bytes.len() < GRID_HEADER_LEN {
            return Err(bad(format!(
                "{} bytes is shorter than the {GRID_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if bytes[..4] != GRID_MAGIC {
            return Err(bad(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != GRID_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let kind = GridKind::from_byte(bytes[6])
            .ok_or_else(|| bad(format!("unknown element kind {}", bytes[6])))?;
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let dims = [u32_at(8), u32_at(12), u32_at(16), u32_at(20)];
        let origin = [f64_at(24), f64_at(32), f64_at(40)];
        let voxel_size = f64_at(48);

        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| bad(format!("dims {dims:?} overflow")))?;
        let body = &bytes[GRID_HEADER_LEN..];
        let expected = count
            .checked_mul(kind.element_size())
            .ok_or_else(|| bad(format!("dims {dims:?} overflow")))?;
        if body.len() != expected {
            return Err(bad(format!(
                "payload is {} bytes, dims {dims:?} require {expected}",
                body.len()
            )));
        }
        let floats = || {
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect()
        };
        let payload = match kind {
            GridKind::Label => GridPayload::Labels(body.to_vec()),
            GridKind::Prob => GridPayload::Prob(floats()),
            GridKind::Depth => GridPayload::Depth(floats()),
        };
        Ok(Self {
            dims,
            origin,
            voxel_size,
            payload,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(file_error(path))?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomically(path, &self.to_bytes())
    }

    fn spatial_dims(&self) -> [usize; 3] {
        [
            self.dims[0] as usize,
            self.dims[1] as usize,
            self.dims[2] as usize,
        ]
    }

    pub fn spec(&self) -> Result<VoxelGridSpec> {
        VoxelGridSpec::new(
            Point3::from(self.origin),
            self.voxel_size,
            self.spatial_dims(),
        )
    }

    pub fn from_labels(labels: &LabelGrid, spec: &VoxelGridSpec) -> Result<Self> {
        if labels.dims() != spec.dims {
            return Err(mismatch(format!(
                "labels {:?} vs grid {:?}",
                labels.dims(),
                spec.dims
            )));
        }
        Self::new(
            dims4(spec.dims, 1)?,
            spec.origin.into(),
            spec.voxel_size,
            GridPayload::Labels(labels.as_slice().to_vec()),
        )
    }

    pub fn from_probs(probs: &SemanticProbGrid, spec: &VoxelGridSpec) -> Result<Self> {
        if probs.dims() != spec.dims {
            return Err(mismatch(format!(
                "probabilities {:?} vs grid {:?}",
                probs.dims(),
                spec.dims
            )));
        }
        let data = probs.as_slice().iter().map(|&p| p as f32).collect();
        Self::new(
            dims4(spec.dims, probs.num_classes())?,
            spec.origin.into(),
            spec.voxel_size,
            GridPayload::Prob(data),
        )
    }

    pub fn from_depth(depth: &DepthMap) -> Result<Self> {
        let data = depth.as_slice().iter().map(|&d| d as f32).collect();
        Self::new(
            dims4([depth.height(), depth.width(), 1], 1)?,
            [0.0; 3],
            1.0,
            GridPayload::Depth(data),
        )
    }

    /// Label grid with `num_classes` classes.
    pub fn to_labels(&self, num_classes: usize) -> Result<LabelGrid> {
        match &self.payload {
            GridPayload::Labels(v) if self.dims[3] == 1 => {
                LabelGrid::new(self.spatial_dims(), num_classes, v.clone())
            }
            GridPayload::Labels(_) => Err(invalid(format!(
                "label grid has {} channels, expected 1",
                self.dims[3]
            ))),
            _ => Err(invalid(format!(
                "expected a label grid, found {:?}",
                self.kind()
            ))),
        }
    }

    /// Probability grid; each voxel is renormalized after widening from f32.
    pub fn to_probs(&self) -> Result<SemanticProbGrid> {
        let GridPayload::Prob(v) = &self.payload else {
            return Err(invalid(format!(
                "expected a probability grid, found {:?}",
                self.kind()
            )));
        };
        let c = self.dims[3] as usize;
        let mut data: Vec<f64> = v.iter().map(|&p| f64::from(p)).collect();
        for voxel in data.chunks_exact_mut(c.max(1)) {
            let s: f64 = voxel.iter().sum();
            if s > 0.0 {
                voxel.iter_mut().for_each(|p| *p /= s);
            }
        }
        SemanticProbGrid::from_vec(self.spatial_dims(), c, data)
    }

    pub fn to_depth(&self) -> Result<DepthMap> {
        let GridPayload::Depth(v) = &self.payload else {
            return Err(invalid(format!(
                "expected a depth map, found {:?}",
                self.kind()
            )));
        };
        if self.dims[2] != 1 || self.dims[3] != 1 {
            return Err(invalid(format!(
                "depth map dims {:?} must be H × W × 1 × 1",
                self.dims
            )));
        }
        DepthMap::new(
            self.dims[0] as usize,
            self.dims[1] as usize,
            v.iter().map(|&d| f64::from(d)).collect(),
        )
    }
}

fn dims4([x, y, z]: [usize; 3], c: usize) -> Result<[u32; 4]> {
    let cast = |v: usize| {
        u32::try_from(v).map_err(|_| invalid(format!("dimension {v} does not fit in u32")))
    };
    Ok([cast(x)?, cast(y)?, cast(z)?, cast(c)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn p() -> &'static Path {
        Path::new("mem.sscg")
    }

    #[test]
    fn header_layout() {
        let g = GridFile::new(
            [2, 1, 1, 1],
            [1.0, 2.0, 3.0],
            0.5,
            GridPayload::Labels(vec![7, 9]),
        )
        .unwrap();
        let b = g.to_bytes();
        assert_eq!(b.len(), GRID_HEADER_LEN + 2);
        assert_eq!(&b[..8], &[b'S', b'S', b'C', b'G', 1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(b[48..56].try_into().unwrap()), 0.5);
        assert_eq!(&b[56..], &[7, 9]);
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let files = [
            GridFile::new(
                [2, 3, 1, 1],
                [0.0, -1.5, 2.25],
                0.08,
                GridPayload::Labels((0..6).collect()),
            )
            .unwrap(),
            GridFile::new(
                [1, 2, 2, 2],
                [0.1; 3],
                0.2,
                GridPayload::Prob((0..8).map(|i| i as f32 / 7.0).collect()),
            )
            .unwrap(),
            GridFile::new(
                [2, 2, 1, 1],
                [0.0; 3],
                1.0,
                GridPayload::Depth(vec![1.5, f32::MIN_POSITIVE, 3.0, 0.0]),
            )
            .unwrap(),
        ];
        for f in files {
            let bytes = f.to_bytes();
            let back = GridFile::from_bytes(&bytes, p()).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn payload_length_is_checked() {
        assert!(
            GridFile::new([2, 2, 1, 1], [0.0; 3], 1.0, GridPayload::Labels(vec![0; 3])).is_err()
        );
        let mut bytes = GridFile::new([2, 2, 1, 1], [0.0; 3], 1.0, GridPayload::Labels(vec![0; 4]))
            .unwrap()
            .to_bytes();
        bytes.pop();
        assert!(matches!(
            GridFile::from_bytes(&bytes, p()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn malformed_headers() {
        let good = GridFile::new([1, 1, 1, 1], [0.0; 3], 1.0, GridPayload::Labels(vec![0]))
            .unwrap()
            .to_bytes();
        let mut magic = good.clone();
        magic[0] = b'X';
        let mut version = good.clone();
        version[4] = 9;
        let mut kind = good.clone();
        kind[6] = 3;
        let mut overflow = good.clone();
        overflow[8..24].copy_from_slice(&[0xff; 16]);
        for b in [magic, version, kind, overflow, good[..10].to_vec()] {
            assert!(matches!(
                GridFile::from_bytes(&b, p()),
                Err(Error::Format { .. })
            ));
        }
    }

    #[test]
    fn typed_conversions() {
        let spec = VoxelGridSpec {
            dims: [2, 1, 2],
            ..Default::default()
        };
        let labels = LabelGrid::new(spec.dims, 4, vec![0, 1, 3, 2]).unwrap();
        let f = GridFile::from_labels(&labels, &spec).unwrap();
        assert_eq!(f.to_labels(4).unwrap(), labels);
        assert_eq!(f.spec().unwrap(), spec);
        assert!(f.to_probs().is_err());

        let probs = SemanticProbGrid::from_vec(
            spec.dims,
            3,
            vec![0.1, 0.2, 0.7, 1.0, 0.0, 0.0, 0.3, 0.3, 0.4, 0.0, 0.5, 0.5],
        )
        .unwrap();
        let back = GridFile::from_probs(&probs, &spec)
            .unwrap()
            .to_probs()
            .unwrap();
        assert!(back
            .as_slice()
            .iter()
            .zip(probs.as_slice())
            .all(|(a, b)| (a - b).abs() < 1e-7));

        let depth = DepthMap::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0]).unwrap();
        let f = GridFile::from_depth(&depth).unwrap();
        assert_eq!(f.dims, [2, 3, 1, 1]);
        assert_eq!(f.to_depth().unwrap(), depth);
    }
}
