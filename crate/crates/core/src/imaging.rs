//! Byte streams to grayscale images, and images to fixed-length feature vectors.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const KIB: u64 = 1024;

/// Upper bounds (exclusive, in KiB) and widths of the size buckets.
const WIDTH_BUCKETS: [(u64, usize); 7] = [
    (10, 32),
    (30, 64),
    (60, 128),
    (100, 256),
    (200, 384),
    (500, 512),
    (1000, 768),
];
const MAX_WIDTH: usize = 1024;

/// Image width for an executable of `byte_count` bytes.
///
/// Buckets are lower-inclusive: a file of exactly 10 KiB is 64 pixels wide.
pub fn width_for_size(byte_count: u64) -> usize {
    WIDTH_BUCKETS
        .iter()
        .find(|&&(upper_kib, _)| byte_count < upper_kib * KIB)
        .map(|&(_, w)| w)
        .unwrap_or(MAX_WIDTH)
}

/// Byte offsets at which the width changes, for boundary tests and docs.
pub fn width_bucket_edges() -> impl Iterator<Item = u64> {
    WIDTH_BUCKETS.iter().map(|&(kib, _)| kib * KIB)
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("dimensions", "width and height must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "image pixel buffer",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Decodes any format the `image` crate understands (PNG, PGM, ...),
    /// converting to 8-bit luma.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?.into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn write_png<W: Write>(&self, out: W) -> Result<()> {
        use image::ImageEncoder;
        image::codecs::png::PngEncoder::new(out).write_image(
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )?;
        Ok(())
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }
}

/// Lays `bytes` out as an image whose width is chosen from the file size.
pub fn bytes_to_image(bytes: &[u8]) -> Result<GrayImage> {
    bytes_to_image_with_width(bytes, width_for_size(bytes.len() as u64))
}

/// Lays `bytes` out row-major at a fixed width. The last row is padded with 0.
pub fn bytes_to_image_with_width(bytes: &[u8], width: usize) -> Result<GrayImage> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if width == 0 {
        return Err(Error::invalid("width", "must be positive"));
    }
    let height = bytes.len().div_ceil(width);
    let mut pixels = Vec::with_capacity(width * height);
    pixels.extend_from_slice(bytes);
    pixels.resize(width * height, 0);
    GrayImage::new(width, height, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMethod {
    #[default]
    Bilinear,
    Nearest,
}

impl fmt::Display for ResizeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResizeMethod::Bilinear => "bilinear",
            ResizeMethod::Nearest => "nearest",
        })
    }
}

impl FromStr for ResizeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bilinear" => Ok(ResizeMethod::Bilinear),
            "nearest" => Ok(ResizeMethod::Nearest),
            _ => Err(Error::invalid("resize", format!("unknown method `{s}`"))),
        }
    }
}

/// Source coordinate of destination pixel `dst` under pixel-center alignment.
#[inline]
fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> f64 {
    let scale = src_len as f64 / dst_len as f64;
    ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64)
}

pub fn resize(
    image: &GrayImage,
    target_width: usize,
    target_height: usize,
    method: ResizeMethod,
) -> Result<GrayImage> {
    if target_width == 0 || target_height == 0 {
        return Err(Error::invalid("target size", "dimensions must be positive"));
    }
    if target_width == image.width && target_height == image.height {
        return Ok(image.clone());
    }
    let (sw, sh) = (image.width, image.height);
    let mut out = Vec::with_capacity(target_width * target_height);
    match method {
        ResizeMethod::Nearest => {
            let xs: Vec<usize> = (0..target_width)
                .map(|x| (((x as f64 + 0.5) * sw as f64 / target_width as f64) as usize).min(sw - 1))
                .collect();
            for y in 0..target_height {
                let sy = (((y as f64 + 0.5) * sh as f64 / target_height as f64) as usize).min(sh - 1);
                let row = image.row(sy);
                out.extend(xs.iter().map(|&sx| row[sx]));
            }
        }
        ResizeMethod::Bilinear => {
            let cols: Vec<(usize, usize, f64)> = (0..target_width)
                .map(|x| {
                    let fx = source_coord(x, sw, target_width);
                    let x0 = fx.floor() as usize;
                    (x0, (x0 + 1).min(sw - 1), fx - x0 as f64)
                })
                .collect();
            for y in 0..target_height {
                let fy = source_coord(y, sh, target_height);
                let y0 = fy.floor() as usize;
                let y1 = (y0 + 1).min(sh - 1);
                let wy = fy - y0 as f64;
                let (r0, r1) = (image.row(y0), image.row(y1));
                for &(x0, x1, wx) in &cols {
                    let top = r0[x0] as f64 * (1.0 - wx) + r0[x1] as f64 * wx;
                    let bottom = r1[x0] as f64 * (1.0 - wx) + r1[x1] as f64 * wx;
                    let v = top * (1.0 - wy) + bottom * wy;
                    out.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    GrayImage::new(target_width, target_height, out)
}

/// Real vector with every element in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector", "length must be positive"));
        }
        if let Some(pos) = values
            .iter()
            .position(|v| !(*v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::invalid(
                "feature vector",
                format!("element {pos} = {} is outside [0, 1]", values[pos]),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

#[inline]
fn normalize_pixel<T: Real>(p: u8) -> T {
    T::from_f64_lossy(p as f64 / 255.0)
}

/// Row-major pixels scaled to `[0, 1]` by dividing by 255.
pub fn flatten_2d<T: Real>(image: &GrayImage) -> FeatureVector<T> {
    FeatureVector {
        values: image.pixels.iter().map(|&p| normalize_pixel(p)).collect(),
    }
}

/// Block-average `values` down (or up) to exactly `target_len` elements.
///
/// The input is zero-padded to the next multiple of `target_len`, then split
/// into `target_len` consecutive blocks of equal length whose means form the
/// output. An empty input yields all zeros.
pub fn resample_1d<T: Real>(values: &[T], target_len: usize) -> Result<FeatureVector<T>> {
    if target_len == 0 {
        return Err(Error::invalid("target length", "must be at least 1"));
    }
    if values.is_empty() {
        return Ok(FeatureVector {
            values: vec![T::zero(); target_len],
        });
    }
    let block = values.len().div_ceil(target_len);
    let denom = T::from_usize_lossy(block);
    let out = (0..target_len)
        .map(|i| {
            let start = (i * block).min(values.len());
            let end = ((i + 1) * block).min(values.len());
            let sum = values[start..end].iter().fold(T::zero(), |acc, &v| acc + v);
            // rounding can push a full block of ones a hair above 1
            (sum / denom).min(T::one())
        })
        .collect();
    Ok(FeatureVector { values: out })
}

/// How a grayscale image becomes a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Featurization {
    /// Resize to `width` x `height`, then flatten.
    Image {
        width: usize,
        height: usize,
        method: ResizeMethod,
    },
    /// Read pixels row-major and block-average to `length`.
    Vector1d { length: usize },
}

impl Featurization {
    pub fn image(width: usize, height: usize) -> Self {
        Featurization::Image {
            width,
            height,
            method: ResizeMethod::Bilinear,
        }
    }

    pub fn vector(length: usize) -> Self {
        Featurization::Vector1d { length }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Featurization::Image { width, height, .. } => width * height,
            Featurization::Vector1d { length } => length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Featurization::Image { width, height, .. } if width == 0 || height == 0 => {
                Err(Error::invalid("image-size", "dimensions must be positive"))
            }
            Featurization::Vector1d { length: 0 } => {
                Err(Error::invalid("vec1d", "length must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn apply<T: Real>(&self, image: &GrayImage) -> Result<FeatureVector<T>> {
        match *self {
            Featurization::Image {
                width,
                height,
                method,
            } => Ok(flatten_2d(&resize(image, width, height, method)?)),
            Featurization::Vector1d { length } => {
                let normalized: Vec<T> = image.pixels.iter().map(|&p| normalize_pixel(p)).collect();
                resample_1d(&normalized, length)
            }
        }
    }
}

impl fmt::Display for Featurization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Featurization::Image {
                width,
                height,
                method,
            } => write!(f, "image:{width}x{height}:{method}"),
            Featurization::Vector1d { length } => write!(f, "vec1d:{length}"),
        }
    }
}

impl FromStr for Featurization {
    type Err = Error;

    /// Parses `image:WxH[:method]` or `vec1d:N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("featurization", format!("cannot parse `{s}`"));
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let feat = match kind {
            "image" => {
                let dims = parts.next().ok_or_else(bad)?;
                let (w, h) = dims.split_once('x').ok_or_else(bad)?;
                let method = match parts.next() {
                    Some(m) => m.parse()?,
                    None => ResizeMethod::Bilinear,
                };
                Featurization::Image {
                    width: w.parse().map_err(|_| bad())?,
                    height: h.parse().map_err(|_| bad())?,
                    method,
                }
            }
            "vec1d" => Featurization::Vector1d {
                length: parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        feat.validate()?;
        Ok(feat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn width_examples() {
        assert_eq!(width_for_size(45 * 1024), 128);
        assert_eq!(width_for_size(0), 32);
        assert_eq!(width_for_size(1_536_000), 1024);
        assert_eq!(width_for_size(10 * 1024), 64);
        assert_eq!(width_for_size(10 * 1024 - 1), 32);
    }

    #[test]
    fn bytes_layout_and_padding() {
        let img = bytes_to_image_with_width(&[0, 128, 255, 7], 2).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.row(0), &[0, 128]);
        assert_eq!(img.row(1), &[255, 7]);

        let img = bytes_to_image_with_width(&[10, 20, 30], 2).unwrap();
        assert_eq!(img.pixels(), &[10, 20, 30, 0]);
    }

    #[test]
    fn ten_kib_file_is_64_by_160() {
        let bytes = vec![1u8; 10_240];
        let img = bytes_to_image(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (64, 160));
    }

    #[test]
    fn empty_bytes_rejected() {
        let err = bytes_to_image(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty file");
    }

    #[test]
    fn resize_constant_and_identity() {
        let img = GrayImage::filled(2, 2, 100).unwrap();
        for method in [ResizeMethod::Bilinear, ResizeMethod::Nearest] {
            for (w, h) in [(1, 1), (3, 5), (7, 2), (64, 64)] {
                let r = resize(&img, w, h, method).unwrap();
                assert_eq!((r.width(), r.height()), (w, h));
                assert!(r.pixels().iter().all(|&p| p == 100));
            }
        }
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(resize(&img, 3, 2, ResizeMethod::Bilinear).unwrap(), img);
        assert!(resize(&img, 0, 2, ResizeMethod::Bilinear).is_err());
    }

    #[test]
    fn bilinear_upscale_matches_reference() {
        // Reference: linear interpolation between the two source pixel centers
        // located at 0.5 and 1.5 in continuous coordinates, clamped outside.
        let reference = |u: f64| -> f64 {
            let t = ((u - 0.5) / 1.0).clamp(0.0, 1.0);
            255.0 * t
        };
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        let r = resize(&img, 4, 1, ResizeMethod::Bilinear).unwrap();
        for (i, &p) in r.pixels().iter().enumerate() {
            // center of destination pixel i in source units
            let u = (i as f64 + 0.5) * 2.0 / 4.0;
            assert_eq!(p, reference(u).round() as u8, "pixel {i}");
        }
        assert!(r.pixels().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.pixels()[0], 0);
        assert_eq!(r.pixels()[3], 255);
    }

    #[test]
    fn flatten_examples() {
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        assert_eq!(flatten_2d::<f64>(&img).values(), &[0.0, 1.0]);
        let img = GrayImage::new(2, 2, vec![0, 51, 102, 255]).unwrap();
        assert_eq!(flatten_2d::<f64>(&img).values(), &[0.0, 0.2, 0.4, 1.0]);
        let img = GrayImage::filled(3, 3, 128).unwrap();
        assert!(flatten_2d::<f64>(&img)
            .values()
            .iter()
            .all(|&v| v == 128.0 / 255.0));
    }

    /// Independent block-mean oracle: explicit padding, explicit blocks.
    fn block_mean_oracle(v: &[f64], n: usize) -> Vec<f64> {
        let mut padded = v.to_vec();
        while padded.len() % n != 0 || padded.is_empty() {
            padded.push(0.0);
        }
        let len = padded.len() / n;
        padded
            .chunks(len)
            .map(|c| c.iter().sum::<f64>() / len as f64)
            .collect()
    }

    #[test]
    fn resample_examples() {
        let out = resample_1d(&[0.0, 0.2, 0.4, 0.6], 2).unwrap();
        assert_abs_diff_eq!(out.values()[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[1], 0.5, epsilon = 1e-12);

        let v = [0.3, 0.6, 0.9];
        let out = resample_1d(&v, 2).unwrap();
        let expected = block_mean_oracle(&v, 2);
        assert_eq!(expected.len(), 2);
        for (a, b) in out.values().iter().zip([0.45, 0.45]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in out.values().iter().zip(&expected) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }

        let v = [0.1, 0.7, 0.3];
        assert_eq!(resample_1d(&v, 3).unwrap().values(), &v);

        assert_eq!(resample_1d::<f64>(&[], 4).unwrap().values(), &[0.0; 4]);
        assert!(resample_1d(&v, 0).is_err());
    }

    #[test]
    fn featurization_parse_roundtrip() {
        for s in ["image:64x64:bilinear", "image:32x16:nearest", "vec1d:1024"] {
            let f: Featurization = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert_eq!(
            "image:8x4".parse::<Featurization>().unwrap(),
            Featurization::image(8, 4)
        );
        assert!("vec1d:0".parse::<Featurization>().is_err());
        assert!("blob:3".parse::<Featurization>().is_err());
    }

    #[test]
    fn png_and_pgm_roundtrip() {
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 200, 250, 255]).unwrap();
        let mut png = Vec::new();
        img.write_png(&mut png).unwrap();
        assert_eq!(GrayImage::decode(&png).unwrap(), img);
        let mut pgm = Vec::new();
        img.write_pgm(&mut pgm).unwrap();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(GrayImage::decode(&pgm).unwrap(), img);
    }

    proptest! {
        #[test]
        fn width_is_monotone(a in 0u64..3_000_000, b in 0u64..3_000_000) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(width_for_size(lo) <= width_for_size(hi));
        }

        #[test]
        fn image_prefix_is_input(bytes in proptest::collection::vec(any::<u8>(), 1..5000)) {
            let img = bytes_to_image(&bytes).unwrap();
            prop_assert_eq!(&img.pixels()[..bytes.len()], &bytes[..]);
            prop_assert!(img.pixels()[bytes.len()..].iter().all(|&p| p == 0));
            prop_assert_eq!(img.height(), bytes.len().div_ceil(img.width()));
        }

        #[test]
        fn resample_matches_oracle(
            v in proptest::collection::vec(0.0f64..=1.0, 0..300),
            n in 1usize..64,
        ) {
            let out = resample_1d(&v, n).unwrap();
            prop_assert_eq!(out.len(), n);
            let expected = block_mean_oracle(&v, n);
            for (a, b) in out.values().iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(out.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn resample_preserves_mean_when_divisible(
            blocks in 1usize..20,
            n in 1usize..20,
            seed in proptest::collection::vec(0.0f64..=1.0, 400),
        ) {
            let v = &seed[..blocks * n];
            let out = resample_1d(v, n).unwrap();
            let mean_in = v.iter().sum::<f64>() / v.len() as f64;
            let mean_out = out.values().iter().sum::<f64>() / n as f64;
            prop_assert!((mean_in - mean_out).abs() < 1e-12);
        }

        #[test]
        fn flatten_preserves_order(w in 1usize..20, h in 1usize..20, s in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (crate::seed::splitmix64(s + i as u64) & 0xff) as u8).collect();
            let img = GrayImage::new(w, h, pixels).unwrap();
            let f = flatten_2d::<f64>(&img);
            for k in 0..w * h {
                prop_assert_eq!(f.values()[k], img.get(k % w, k / w) as f64 / 255.0);
            }
        }
    }
}
