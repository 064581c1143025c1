//! Grayscale image I/O (PGM P5 and PNG), tiling, and a synthetic
//! clean-image generator.
//!
//! PGM is hand-coded because the binary P5 format is a dozen lines and the
//! 16-bit big-endian variant carries the raw dark/bias frames; PNG goes
//! through the `image` crate (8-bit grayscale only).

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patch::Patch;

/// A grayscale image with intensities in DN.
///
/// `max_value` is the sampling ceiling (255 for 8-bit sources, 65535 or the
/// native 10/12-bit maximum for dark frames); pixel data is `f64` so
/// processed frames can hold fractional and negative values after
/// fixed-pattern subtraction.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u32,
    /// Row-major pixel values.
    pub pixels: Vec<f64>,
}

impl GrayImage {
    /// Builds an image, checking only the shape (values may be negative for
    /// processed noise frames).
    pub fn new(width: usize, height: usize, max_value: u32, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::domain(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            max_value,
            pixels,
        })
    }
}

/// Reads an 8- or 16-bit binary PGM (P5) file.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and `#` comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "unexpected end of PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(bytes)?;
    if magic != "P5" {
        return Err(Error::format(path, format!("not a binary PGM (magic {magic:?})")));
    }
    let width: usize = next_token(bytes)?
        .parse()
        .map_err(|_| Error::format(path, "bad width"))?;
    let height: usize = next_token(bytes)?
        .parse()
        .map_err(|_| Error::format(path, "bad height"))?;
    let max_value: u32 = next_token(bytes)?
        .parse()
        .map_err(|_| Error::format(path, "bad maxval"))?;
    if width == 0 || height == 0 || max_value == 0 || max_value > 65535 {
        return Err(Error::format(path, "invalid PGM dimensions or maxval"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    let bytes_per = if max_value > 255 { 2 } else { 1 };
    let need = n * bytes_per;
    let raster = bytes.get(pos..pos + need).ok_or(Error::Truncated {
        path: path.to_path_buf(),
        expected: (pos + need) as u64,
        found: bytes.len() as u64,
    })?;
    let pixels = if bytes_per == 1 {
        raster.iter().map(|b| f64::from(*b)).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    GrayImage::new(width, height, max_value, pixels)
}

/// Writes an 8- or 16-bit binary PGM (P5) file.
///
/// Pixels are rounded half-to-even and clamped to `[0, max_value]`.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    if img.max_value == 0 || img.max_value > 65535 {
        return Err(Error::domain(format!(
            "PGM maxval {} outside [1, 65535]",
            img.max_value
        )));
    }
    let mut out = Vec::with_capacity(img.pixels.len() * 2 + 32);
    write!(out, "P5\n{} {}\n{}\n", img.width, img.height, img.max_value)
        .expect("write to Vec cannot fail");
    let max = f64::from(img.max_value);
    if img.max_value > 255 {
        for v in &img.pixels {
            let q = v.round_ties_even().clamp(0.0, max) as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
    } else {
        for v in &img.pixels {
            out.push(v.round_ties_even().clamp(0.0, max) as u8);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads an 8-bit grayscale PNG (other color types are converted to luma).
pub fn read_png(path: &Path) -> Result<GrayImage> {
    let dynamic = image::open(path)
        .map_err(|e| Error::format(path, format!("cannot decode PNG: {e}")))?;
    let luma = dynamic.into_luma8();
    let (width, height) = (luma.width() as usize, luma.height() as usize);
    let pixels = luma.into_raw().into_iter().map(f64::from).collect();
    GrayImage::new(width, height, 255, pixels)
}

/// Writes an 8-bit grayscale PNG; pixels rounded and clamped to `[0, 255]`.
pub fn write_png(img: &GrayImage, path: &Path) -> Result<()> {
    let data: Vec<u8> = img
        .pixels
        .iter()
        .map(|v| v.round_ties_even().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, data)
        .expect("dimension check happened at construction");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, format!("cannot encode PNG: {e}")))
}

/// Reads a grayscale image by extension (`.pgm` or `.png`).
pub fn read_image(path: &Path) -> Result<GrayImage> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pgm") => read_pgm(path),
        Some("png") => read_png(path),
        other => Err(Error::format(
            path,
            format!("unsupported image extension {other:?} (expected pgm or png)"),
        )),
    }
}

/// Cuts a grayscale image into non-overlapping row-major `patch_size` tiles;
/// trailing partial tiles are discarded.
///
/// The image must be 8-bit-ranged (values within `[0, 255]`) since patches
/// carry that range; callers ingesting deeper frames rescale first.
pub fn tile_image(img: &GrayImage, patch_size: usize) -> Result<Vec<Patch>> {
    if patch_size == 0 {
        return Err(Error::domain("patch size must be positive"));
    }
    if img.width < patch_size || img.height < patch_size {
        return Err(Error::domain(format!(
            "image {}x{} smaller than one {patch_size}x{patch_size} tile",
            img.width, img.height
        )));
    }
    let tiles_x = img.width / patch_size;
    let tiles_y = img.height / patch_size;
    let mut patches = Vec::with_capacity(tiles_x * tiles_y);
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut data = Vec::with_capacity(patch_size * patch_size);
            for y in 0..patch_size {
                let row = (ty * patch_size + y) * img.width + tx * patch_size;
                data.extend(img.pixels[row..row + patch_size].iter().map(|v| *v as f32));
            }
            patches.push(Patch::from_data(patch_size, patch_size, data)?);
        }
    }
    Ok(patches)
}

/// Generates a synthetic near-noise-free clean image: a smooth linear
/// gradient plus a handful of soft-edged Gaussian blobs.
///
/// Stands in for a natural-image corpus at desk scale; intensities stay
/// within `[0, 255]` and contain no added noise, so the only corruption a
/// generated patch carries is what the noise model later applies.
pub fn generate_clean_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: f64 = rng.random_range(60.0..180.0);
    let gx: f64 = rng.random_range(-40.0..40.0) / width.max(1) as f64;
    let gy: f64 = rng.random_range(-40.0..40.0) / height.max(1) as f64;
    let n_blobs = rng.random_range(3..7);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..n_blobs)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(-60.0..60.0),
                rng.random_range(8.0..(width.max(height) as f64 / 2.0)),
            )
        })
        .collect();
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let mut v = base + gx * x as f64 + gy * y as f64;
            for (cx, cy, amp, radius) in &blobs {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                v += amp * (-(dx * dx + dy * dy) / (2.0 * radius * radius)).exp();
            }
            pixels.push(v.clamp(0.0, 255.0));
        }
    }
    GrayImage {
        width,
        height,
        max_value: 255,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trips_8_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        for max_value in [255u32, 4095, 65535] {
            let img = GrayImage::new(
                3,
                2,
                max_value,
                vec![0.0, 1.0, 2.0, 100.0, f64::from(max_value), 7.0],
            )
            .unwrap();
            let path = dir.path().join(format!("t{max_value}.pgm"));
            write_pgm(&img, &path).unwrap();
            let back = read_pgm(&path).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let bytes = b"P5\n# a comment\n2 1\n255\n\x05\x06";
        let img = parse_pgm(bytes, Path::new("inline.pgm")).unwrap();
        assert_eq!(img.pixels, vec![5.0, 6.0]);
    }

    #[test]
    fn pgm_truncation_is_a_distinct_error() {
        let bytes = b"P5\n4 4\n255\n\x01\x02";
        match parse_pgm(bytes, Path::new("short.pgm")) {
            Err(Error::Truncated { expected, found, .. }) => {
                assert!(expected > found);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn png_round_trips_8_bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(4, 3, 255, (0..12).map(|i| f64::from(i * 20)).collect()).unwrap();
        let path = dir.path().join("t.png");
        write_png(&img, &path).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back, img);
        // Extension dispatch reaches the same decoder.
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn tiling_arithmetic() {
        let img = GrayImage::new(1280, 1024, 255, vec![7.0; 1280 * 1024]).unwrap();
        assert_eq!(tile_image(&img, 128).unwrap().len(), 80);

        let img = GrayImage::new(128, 128, 255, vec![7.0; 128 * 128]).unwrap();
        assert_eq!(tile_image(&img, 128).unwrap().len(), 1);

        let img = GrayImage::new(127, 128, 255, vec![7.0; 127 * 128]).unwrap();
        assert!(tile_image(&img, 128).is_err());
    }

    #[test]
    fn tiles_are_row_major_and_disjoint() {
        // 4x2 image, 2x2 tiles → tile 0 is the left square, tile 1 the right.
        let img = GrayImage::new(4, 2, 255, vec![0., 1., 2., 3., 4., 5., 6., 7.]).unwrap();
        let tiles = tile_image(&img, 2).unwrap();
        assert_eq!(tiles.len(), 2);
        assert_eq!(tiles[0].data(), &[0., 1., 4., 5.]);
        assert_eq!(tiles[1].data(), &[2., 3., 6., 7.]);
    }

    #[test]
    fn clean_images_are_deterministic_smooth_and_in_range() {
        let a = generate_clean_image(96, 64, 11);
        let b = generate_clean_image(96, 64, 11);
        assert_eq!(a, b);
        assert!(a.pixels.iter().all(|v| (0.0..=255.0).contains(v)));
        // Smoothness: neighboring pixels differ by well under a DN per step
        // scaled by gradient magnitudes — use a loose bound.
        let mut max_step = 0.0f64;
        for y in 0..a.height {
            for x in 1..a.width {
                let i = y * a.width + x;
                max_step = max_step.max((a.pixels[i] - a.pixels[i - 1]).abs());
            }
        }
        assert!(max_step < 16.0, "max horizontal step {max_step}");
    }
}
