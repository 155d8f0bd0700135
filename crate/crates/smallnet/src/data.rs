//! Image data: IDX files and a synthetic stand-in for handwritten digits.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use lagrangekit::scalar::Scalar;
use lagrangekit::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Flattened images (one per row, values in [0, 1]) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet<T: Scalar> {
    pub pixels: DMatrix<T>,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl<T: Scalar> ImageSet<T> {
    pub fn new(pixels: DMatrix<T>, labels: Vec<u8>, rows: usize, cols: usize) -> Result<Self> {
        if pixels.nrows() != labels.len() || pixels.ncols() != rows * cols {
            return Err(Error::contract("image matrix does not match labels or image size"));
        }
        Ok(Self { pixels, labels, rows, cols })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Copy the listed rows into a batch matrix.
    pub fn gather(&self, idx: &[usize]) -> (DMatrix<T>, Vec<u8>) {
        let d = self.pixels.ncols();
        let x = DMatrix::from_fn(idx.len(), d, |r, c| self.pixels[(idx[r], c)]);
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }

    /// Rows `start..end` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::contract("slice out of range"));
        }
        let idx: Vec<usize> = (start..end).collect();
        let (pixels, labels) = self.gather(&idx);
        Ok(Self { pixels, labels, rows: self.rows, cols: self.cols })
    }
}

/// Raw IDX array: dimensions plus unsigned-byte payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

const IDX_UBYTE: u8 = 0x08;

pub fn read_idx<R: Read>(mut r: R) -> Result<IdxArray> {
    let zero = r.read_u16::<BigEndian>()?;
    let kind = r.read_u8()?;
    let ndims = r.read_u8()? as usize;
    if zero != 0 || kind != IDX_UBYTE || ndims == 0 {
        return Err(Error::Parse(format!(
            "not an unsigned-byte IDX file (magic {zero:#06x}, type {kind:#04x}, {ndims} dims)"
        )));
    }
    let dims = (0..ndims)
        .map(|_| r.read_u32::<BigEndian>().map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let n: usize = dims.iter().product();
    let mut data = vec![0u8; n];
    r.read_exact(&mut data)
        .map_err(|e| Error::Parse(format!("IDX payload shorter than {n} bytes: {e}")))?;
    Ok(IdxArray { dims, data })
}

pub fn write_idx<W: Write>(mut w: W, arr: &IdxArray) -> Result<()> {
    w.write_u16::<BigEndian>(0)?;
    w.write_u8(IDX_UBYTE)?;
    w.write_u8(arr.dims.len() as u8)?;
    for &d in &arr.dims {
        w.write_u32::<BigEndian>(d as u32)?;
    }
    w.write_all(&arr.data)?;
    Ok(())
}

/// Load an image/label IDX pair, keeping at most `limit` examples.
pub fn load_idx_pair<T: Scalar>(images: &Path, labels: &Path, limit: Option<usize>) -> Result<ImageSet<T>> {
    let img = read_idx(BufReader::new(File::open(images)?))?;
    let lab = read_idx(BufReader::new(File::open(labels)?))?;
    if img.dims.len() != 3 || lab.dims.len() != 1 || img.dims[0] != lab.dims[0] {
        return Err(Error::Parse(format!(
            "mismatched IDX shapes {:?} and {:?}",
            img.dims, lab.dims
        )));
    }
    let (rows, cols) = (img.dims[1], img.dims[2]);
    let n = limit.map_or(img.dims[0], |l| l.min(img.dims[0]));
    let d = rows * cols;
    let scale = T::lit(1.0 / 255.0);
    let pixels = DMatrix::from_fn(n, d, |r, c| T::lit(img.data[r * d + c] as f64) * scale);
    ImageSet::new(pixels, lab.data[..n].to_vec(), rows, cols)
}

/// Conventional file names of the 28x28 digit training set inside `dir`.
pub fn find_digit_files(dir: &Path) -> Option<(std::path::PathBuf, std::path::PathBuf)> {
    let img = dir.join("train-images-idx3-ubyte");
    let lab = dir.join("train-labels-idx1-ubyte");
    (img.is_file() && lab.is_file()).then_some((img, lab))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDigitsSpec {
    pub n: usize,
    pub side: usize,
    pub classes: usize,
    /// Strokes per class template.
    pub strokes: usize,
    pub max_shift: i64,
    /// Std of the ink noise.
    pub noise: f64,
    /// Largest std of the half-normal noise added to every pixel.
    pub background: f64,
    /// Per-pixel background std is `background * 10^(-decades * v)` with
    /// `v ~ U(0, 1)` fixed per pixel, which grades how informative each
    /// feature is.
    pub background_decades: f64,
    /// Width of the border that is always exactly zero.
    pub frame: usize,
    pub seed: u64,
}

impl Default for SyntheticDigitsSpec {
    /// 5,000 two-stroke 28x28 images in 10 classes with graded background
    /// noise: the scaled sparsity benchmark (4,000 train, 1,000 held out).
    fn default() -> Self {
        Self {
            n: 5000,
            side: 28,
            classes: 10,
            strokes: 2,
            max_shift: 2,
            noise: 0.15,
            background: 0.03,
            background_decades: 3.0,
            frame: 1,
            seed: 0,
        }
    }
}

/// Number of training images in the scaled sparsity benchmark.
pub const BENCHMARK_TRAIN: usize = 4000;

/// Default synthetic set split into the 4,000 training and 1,000 held-out images.
pub fn benchmark_split<T: Scalar>(seed: u64) -> Result<(ImageSet<T>, ImageSet<T>)> {
    let all = synthetic_digits(&SyntheticDigitsSpec { seed, ..Default::default() })?;
    Ok((all.slice(0, BENCHMARK_TRAIN)?, all.slice(BENCHMARK_TRAIN, all.len())?))
}

/// Blurred random-stroke templates per class, jittered by a random shift and
/// contrast, with noise on the inked pixels. With `background = 0` the
/// background stays exactly zero, as in scanned digits.
pub fn synthetic_digits<T: Scalar>(spec: &SyntheticDigitsSpec) -> Result<ImageSet<T>> {
    if spec.side < 8 || spec.classes < 2 || spec.classes > 256 || spec.strokes == 0 {
        return Err(Error::contract("synthetic digits need side >= 8, 2..=256 classes, >= 1 stroke"));
    }
    let side = spec.side;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lo = side as f64 * 0.25;
    let hi = side as f64 * 0.75;
    let templates: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let segs: Vec<[f64; 4]> = (0..spec.strokes)
                .map(|_| std::array::from_fn(|_| rng.random_range(lo..hi)))
                .collect();
            let mut img = vec![0.0; side * side];
            for r in 0..side {
                for c in 0..side {
                    let p = (c as f64, r as f64);
                    let d = segs.iter().map(|s| seg_dist(p, s)).fold(f64::INFINITY, f64::min);
                    let v = (-(d * d) / 2.0).exp();
                    img[r * side + c] = if v < 0.05 { 0.0 } else { v };
                }
            }
            img
        })
        .collect();
    let bg_std: Vec<f64> = (0..side * side)
        .map(|_| spec.background * 10f64.powf(-spec.background_decades * rng.random::<f64>()))
        .collect();
    let f = spec.frame as i64;
    let d = side * side;
    let mut pixels = DMatrix::zeros(spec.n, d);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let k = i % spec.classes;
        let dx = rng.random_range(-spec.max_shift..=spec.max_shift);
        let dy = rng.random_range(-spec.max_shift..=spec.max_shift);
        let contrast = rng.random_range(0.6..1.0);
        for r in 0..side as i64 {
            for c in 0..side as i64 {
                let (sr, sc) = (r - dy, c - dx);
                let noise: f64 = rng.sample(StandardNormal);
                let bg: f64 = rng.sample(StandardNormal);
                let inside = sr >= 0 && sc >= 0 && sr < side as i64 && sc < side as i64;
                let t = if inside { templates[k][sr as usize * side + sc as usize] } else { 0.0 };
                let ink = if t > 0.0 { contrast * t + spec.noise * noise } else { 0.0 };
                let framed = r < f || c < f || r >= side as i64 - f || c >= side as i64 - f;
                if framed {
                    continue;
                }
                let v = (ink + bg_std[r as usize * side + c as usize] * bg.abs()).clamp(0.0, 1.0);
                pixels[(i, r as usize * side + c as usize)] = T::lit(v);
            }
        }
        labels.push(k as u8);
    }
    ImageSet::new(pixels, labels, side, side)
}

fn seg_dist((px, py): (f64, f64), s: &[f64; 4]) -> f64 {
    let (ax, ay, bx, by) = (s[0], s[1], s[2], s[3]);
    let (vx, vy) = (bx - ax, by - ay);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (ax + t * vx, ay + t * vy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_round_trip() {
        let arr = IdxArray { dims: vec![2, 2, 3], data: (0..12).collect() };
        let mut buf = Vec::new();
        write_idx(&mut buf, &arr).unwrap();
        assert_eq!(&buf[..4], &[0, 0, 8, 3]);
        assert_eq!(&buf[4..8], &[0, 0, 0, 2]);
        assert_eq!(read_idx(buf.as_slice()).unwrap(), arr);
    }

    #[test]
    fn truncated_idx_rejected() {
        let arr = IdxArray { dims: vec![4], data: vec![1, 2, 3, 4] };
        let mut buf = Vec::new();
        write_idx(&mut buf, &arr).unwrap();
        buf.pop();
        assert!(matches!(read_idx(buf.as_slice()), Err(Error::Parse(_))));
        assert!(read_idx(&[0u8, 0, 9, 1][..]).is_err());
    }

    #[test]
    fn idx_pair_loads_scaled_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let img = IdxArray { dims: vec![3, 2, 2], data: vec![0, 255, 51, 0, 1, 2, 3, 4, 9, 9, 9, 9] };
        let lab = IdxArray { dims: vec![3], data: vec![7, 1, 0] };
        write_idx(File::create(dir.path().join("i")).unwrap(), &img).unwrap();
        write_idx(File::create(dir.path().join("l")).unwrap(), &lab).unwrap();
        let set: ImageSet<f64> = load_idx_pair(&dir.path().join("i"), &dir.path().join("l"), Some(2)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.labels, vec![7, 1]);
        assert_eq!(set.pixels[(0, 1)], 1.0);
        assert!((set.pixels[(0, 2)] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn synthetic_digits_are_deterministic_and_balanced() {
        let spec = SyntheticDigitsSpec { n: 200, background: 0.0, ..Default::default() };
        let a: ImageSet<f64> = synthetic_digits(&spec).unwrap();
        let b: ImageSet<f64> = synthetic_digits(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_classes(), 10);
        assert!(a.pixels.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // The frame is never inked.
        assert!((0..a.len()).all(|r| a.pixels[(r, 0)] == 0.0 && a.pixels[(r, 783)] == 0.0));
    }
}
