//! Image volumes on disk and the preprocessing applied before registration.
//!
//! An image is a JSON header plus a little-endian `f64` raw file next to it.
//! Voxels are stored row-major with x fastest. Field files share the header
//! layout and differ in `kind`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::{voxel_image_to_dg, DgScalarField, GridDims, GridMesh};
use crate::error::{Error, Result};
use crate::objective::percentile;

pub const FORMAT_TAG: &str = "transreg";
pub const FORMAT_VERSION: u32 = 1;
pub const PAD_VOXELS: usize = 2;

/// Header shared by image and field files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    /// `image`, `dg-scalar` or `cg-vector`.
    pub kind: String,
    /// Voxels per axis (grid extents for fields).
    pub dims: Vec<usize>,
    pub dtype: String,
    pub byte_order: String,
    pub axis_order: String,
    /// Position of voxel 0 in the uncropped image.
    #[serde(default)]
    pub offset: Vec<usize>,
    pub components: usize,
    pub ordering: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet_zero: Option<bool>,
    pub count: usize,
    /// Raw data file, relative to the header.
    pub data: String,
}

impl Header {
    pub(crate) fn new(
        kind: &str,
        dims: &[usize],
        components: usize,
        ordering: &str,
        count: usize,
    ) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            kind: kind.into(),
            dims: dims.to_vec(),
            dtype: "f64".into(),
            byte_order: "little".into(),
            axis_order: "x-fastest".into(),
            offset: vec![0; dims.len()],
            components,
            ordering: ordering.into(),
            dirichlet_zero: None,
            count,
            data: String::new(),
        }
    }

    fn check(&self, kind: &str) -> Result<()> {
        if self.format != FORMAT_TAG || self.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported header format {} version {}",
                self.format, self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected a {kind} file, found {}",
                self.kind
            )));
        }
        if self.dtype != "f64" || self.byte_order != "little" || self.axis_order != "x-fastest" {
            return Err(Error::Format(
                "only little-endian f64, x-fastest data is supported".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.len() > 3 || self.dims.contains(&0) {
            return Err(Error::Format(format!("invalid dims {:?}", self.dims)));
        }
        if self.offset.len() != self.dims.len() {
            return Err(Error::Format("offset and dims differ in length".into()));
        }
        Ok(())
    }
}

fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

/// Writes `header` (with its data file name filled in) and `values`.
pub(crate) fn write_with_header(path: &Path, mut header: Header, values: &[f64]) -> Result<()> {
    let raw = data_path(path);
    header.data = raw
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid(format!("bad output path {}", path.display())))?
        .to_string();
    header.count = values.len();
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&raw, bytes)?;
    fs::write(path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub(crate) fn read_with_header(path: &Path, kind: &str) -> Result<(Header, Vec<f64>)> {
    let header: Header = serde_json::from_str(&fs::read_to_string(path)?)?;
    header.check(kind)?;
    let raw = path.parent().unwrap_or(Path::new(".")).join(&header.data);
    let bytes = fs::read(&raw)?;
    if bytes.len() != header.count * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, header announces {} values",
            raw.display(),
            bytes.len(),
            header.count
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageVolume {
    dims: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl ImageVolume {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(Error::invalid(format!(
                "images must be 2D or 3D, got {} axes",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::invalid(format!(
                "image dims must be positive, got {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::invalid(format!(
                "image {dims:?} needs {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("image has non-finite intensities"));
        }
        let offset = vec![0; dims.len()];
        Ok(Self { dims, offset, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    pub fn with_offset(mut self, offset: Vec<usize>) -> Result<Self> {
        if offset.len() != self.dims.len() {
            return Err(Error::invalid("offset and dims differ in length"));
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn offset(&self) -> &[usize] {
        &self.offset
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for a in (0..self.dims.len()).rev() {
            k = k * self.dims[a] + idx[a];
        }
        k
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.index(idx)]
    }

    /// Multi-index of flat position `k`.
    pub fn unravel(&self, mut k: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for (a, &n) in self.dims.iter().enumerate() {
            idx[a] = k % n;
            k /= n;
        }
        idx
    }

    pub fn grid(&self) -> Result<GridDims> {
        GridDims::new(&self.dims)
    }

    /// DG1 field that is constant on every voxel.
    pub fn to_dg(&self, mesh: &GridMesh<f64>) -> Result<DgScalarField<f64>> {
        if mesh.dims().extents() != self.dims.as_slice() {
            return Err(Error::invalid(format!(
                "image {:?} does not match mesh {:?}",
                self.dims,
                mesh.dims().extents()
            )));
        }
        voxel_image_to_dg(&self.data, mesh)
    }

    /// Voxel averages of a DG1 field.
    pub fn from_dg(field: &DgScalarField<f64>, mesh: &GridMesh<f64>) -> Result<Self> {
        field.check_mesh(mesh)?;
        let nvox = mesh.dims().num_voxels();
        let mut data = Vec::with_capacity(nvox);
        for vox in 0..nvox {
            let mut s = 0.0;
            let mut vol = 0.0;
            for c in mesh.voxel_cells(vox) {
                let cc = field.cell_coeffs(c);
                s += mesh.volume(c) * cc.iter().sum::<f64>() / cc.len() as f64;
                vol += mesh.volume(c);
            }
            data.push(s / vol);
        }
        Self::new(mesh.dims().extents().to_vec(), data)
    }
}

pub fn write_image(path: &Path, image: &ImageVolume) -> Result<()> {
    let mut h = Header::new("image", &image.dims, 1, "voxel-major", image.len());
    h.offset = image.offset.clone();
    write_with_header(path, h, &image.data)
}

pub fn read_image(path: &Path) -> Result<ImageVolume> {
    let (h, values) = read_with_header(path, "image")?;
    if h.components != 1 {
        return Err(Error::Format("images must have one component".into()));
    }
    ImageVolume::new(h.dims, values)
        .map_err(|e| Error::Format(e.to_string()))?
        .with_offset(h.offset)
}

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples). Intensities
/// are clamped to `[0, 1]` and scaled to the full range; row `j` of the file
/// holds voxels with y index `j`.
pub fn write_pgm16(path: &Path, image: &ImageVolume) -> Result<()> {
    if image.dim() != 2 {
        return Err(Error::invalid("PGM export needs a 2D image"));
    }
    let (w, h) = (image.dims[0], image.dims[1]);
    let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for &v in &image.data {
        let s = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        bytes.extend_from_slice(&s.to_be_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_pgm16(path: &Path) -> Result<ImageVolume> {
    let bytes = fs::read(path)?;
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(Error::Format(format!(
            "not a binary PGM (magic {})",
            tokens[0]
        )));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header value '{s}'")))
    };
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let wide = maxval > 255;
    let bpp = if wide { 2 } else { 1 };
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() < w * h * bpp {
        return Err(Error::Format("truncated PGM data".into()));
    }
    let scale = maxval as f64;
    let data = (0..w * h)
        .map(|k| {
            let s = if wide {
                u16::from_be_bytes([body[2 * k], body[2 * k + 1]]) as f64
            } else {
                body[k] as f64
            };
            s / scale
        })
        .collect();
    ImageVolume::new(vec![w, h], data)
}

/// Offset bookkeeping of [`crop_and_pad`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRecord {
    pub original_dims: Vec<usize>,
    pub offset: Vec<usize>,
    pub dims: Vec<usize>,
}

/// Crops both images to the joint bounding box of their nonzero voxels, grown
/// by two voxels per side and clamped to the image.
pub fn crop_and_pad(
    input: &ImageVolume,
    target: &ImageVolume,
) -> Result<(ImageVolume, ImageVolume, CropRecord)> {
    if input.dims != target.dims {
        return Err(Error::invalid(format!(
            "input {:?} and target {:?} differ in size",
            input.dims, target.dims
        )));
    }
    let d = input.dim();
    let mut lo = vec![usize::MAX; d];
    let mut hi = vec![0usize; d];
    let mut any = false;
    for k in 0..input.len() {
        if input.data[k] != 0.0 || target.data[k] != 0.0 {
            any = true;
            let idx = input.unravel(k);
            for a in 0..d {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a]);
            }
        }
    }
    if !any {
        return Err(Error::invalid(
            "both images are zero; the bounding box is empty",
        ));
    }
    let offset: Vec<usize> = lo.iter().map(|&l| l.saturating_sub(PAD_VOXELS)).collect();
    let end: Vec<usize> = hi
        .iter()
        .zip(&input.dims)
        .map(|(&h, &n)| (h + PAD_VOXELS + 1).min(n))
        .collect();
    let dims: Vec<usize> = end.iter().zip(&offset).map(|(e, o)| e - o).collect();
    let cut = |img: &ImageVolume| -> Result<ImageVolume> {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let nz = if d == 3 { dims[2] } else { 1 };
        for k in 0..nz {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let mut src = vec![i + offset[0], j + offset[1]];
                    if d == 3 {
                        src.push(k + offset[2]);
                    }
                    data.push(img.get(&src));
                }
            }
        }
        let global: Vec<usize> = img.offset.iter().zip(&offset).map(|(a, b)| a + b).collect();
        ImageVolume::new(dims.clone(), data)?.with_offset(global)
    };
    let record = CropRecord {
        original_dims: input.dims.clone(),
        offset: offset.clone(),
        dims: dims.clone(),
    };
    Ok((cut(input)?, cut(target)?, record))
}

/// Maps `[P_lo, P_hi]` linearly onto `[0, 1]` and clamps. A constant image maps to zeros.
pub fn normalize_percentile(image: &ImageVolume, lo_pct: f64, hi_pct: f64) -> Result<ImageVolume> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::invalid(format!(
            "percentiles must satisfy 0 <= lo < hi <= 100, got {lo_pct} and {hi_pct}"
        )));
    }
    let lo = percentile(&image.data, lo_pct);
    let hi = percentile(&image.data, hi_pct);
    let mut out = image.clone();
    if hi <= lo {
        out.data.iter_mut().for_each(|x| *x = 0.0);
        return Ok(out);
    }
    let span = hi - lo;
    out.data
        .iter_mut()
        .for_each(|x| *x = ((*x - lo) / span).clamp(0.0, 1.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_box_mesh;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(dims: Vec<usize>, seed: u64) -> ImageVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        ImageVolume::new(dims, (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
    }

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for dims in [vec![5usize, 7], vec![3, 4, 2]] {
            let img = random_image(dims.clone(), 1)
                .with_offset(vec![1; dims.len()])
                .unwrap();
            let p = dir.path().join("img.json");
            write_image(&p, &img).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn truncated_raw_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.json");
        write_image(&p, &random_image(vec![4, 4], 2)).unwrap();
        fs::write(dir.path().join("img.raw"), [0u8; 10]).unwrap();
        assert!(matches!(read_image(&p), Err(Error::Format(_))));
        fs::write(&p, "{ not json").unwrap();
        assert!(matches!(read_image(&p), Err(Error::Json(_))));
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageVolume::new(vec![3, 2], vec![0.0, 0.25, 1.0, 0.5, 2.0, -1.0]).unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm16(&p, &img).unwrap();
        let back = read_pgm16(&p).unwrap();
        assert_eq!(back.dims(), &[3, 2]);
        assert_eq!(back.data()[2], 1.0);
        assert_eq!(back.data()[4], 1.0);
        assert_eq!(back.data()[5], 0.0);
        let q = dir.path().join("b.pgm");
        write_pgm16(&q, &back).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }

    #[test]
    fn single_voxel_crop() {
        let mut a = ImageVolume::zeros(vec![16, 16]).unwrap();
        let k = a.index(&[5, 5]);
        a.data_mut()[k] = 1.0;
        let b = ImageVolume::zeros(vec![16, 16]).unwrap();
        let (ca, cb, rec) = crop_and_pad(&a, &b).unwrap();
        assert_eq!(ca.dims(), &[5, 5]);
        assert_eq!(cb.dims(), &[5, 5]);
        assert_eq!(rec.offset, vec![3, 3]);
        assert_eq!(ca.get(&[2, 2]), 1.0);
        assert_eq!(ca.offset(), &[3, 3]);
    }

    #[test]
    fn full_extent_crop_is_clamped() {
        let a = ImageVolume::new(vec![4, 3], vec![1.0; 12]).unwrap();
        let (ca, _, rec) = crop_and_pad(&a, &a).unwrap();
        assert_eq!(rec.offset, vec![0, 0]);
        assert_eq!(ca, a);
        let z = ImageVolume::zeros(vec![4, 3]).unwrap();
        assert!(crop_and_pad(&z, &z).is_err());
        assert!(crop_and_pad(&a, &ImageVolume::zeros(vec![3, 4]).unwrap()).is_err());
    }

    #[test]
    fn normalization_examples() {
        let c = ImageVolume::new(vec![2, 2], vec![3.0; 4]).unwrap();
        assert!(normalize_percentile(&c, 1.0, 99.0)
            .unwrap()
            .data()
            .iter()
            .all(|&x| x == 0.0));
        let ramp = ImageVolume::new(vec![101, 1], (0..101).map(|i| i as f64).collect()).unwrap();
        let n = normalize_percentile(&ramp, 0.0, 100.0).unwrap();
        for (i, &x) in n.data().iter().enumerate() {
            assert!((x - i as f64 / 100.0).abs() < 1e-15);
        }
        assert!(normalize_percentile(&ramp, 50.0, 10.0).is_err());
    }

    #[test]
    fn dg_round_trip_through_voxels() {
        let m = build_box_mesh::<f64>(&[4, 3, 2]).unwrap();
        let img = random_image(vec![4, 3, 2], 9);
        let dg = img.to_dg(&m).unwrap();
        let back = ImageVolume::from_dg(&dg, &m).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn normalized_values_in_unit_interval(seed in 0u64..1000, lo in 0.0f64..40.0, hi in 60.0f64..100.0) {
            let img = random_image(vec![6, 5], seed);
            let n = normalize_percentile(&img, lo, hi).unwrap();
            prop_assert!(n.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
