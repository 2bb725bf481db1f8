//! Image containers and the filtering/sampling primitives shared by the
//! detection and warp stages.
//!
//! Intensities are real-valued in `[0, 1]` everywhere inside the pipeline;
//! quantization to 8-bit happens only at the PNG boundary. Filter responses
//! (difference of Gaussians) are signed rasters and intentionally escape the
//! `[0, 1]` range.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major raster with interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    /// Constant-filled raster. `channels` must be 1 or 3.
    pub fn new(width: usize, height: usize, channels: usize, fill: f64) -> Raster {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Raster {
            width,
            height,
            channels,
            data: vec![fill; width * height * channels],
        }
    }

    /// Build a raster from existing samples; length must be `w * h * c`.
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Raster> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    /// Grayscale raster filled from a per-pixel function of `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Raster {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }
}

/// One pixel in CIELAB (D65).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LabPixel {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

/// Rec. 601 luma: `0.299 R + 0.587 G + 0.114 B`.
pub fn to_gray(img: &Raster) -> Result<Raster> {
    if img.channels != 3 {
        return Err(Error::InvalidInput(format!(
            "to_gray expects 3 channels, got {}",
            img.channels
        )));
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect();
    Raster::from_data(img.width, img.height, 1, data)
}

/// Normalized 1-D Gaussian kernel truncated at radius `ceil(3 sigma)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let inv = -0.5 / (sigma * sigma);
    for i in -(radius as isize)..=(radius as isize) {
        kernel.push(((i * i) as f64 * inv).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    kernel
}

/// Separable Gaussian blur with clamp-to-edge borders.
///
/// Applied independently per channel; output has the input's dimensions.
pub fn gaussian_blur(img: &Raster, sigma: f64) -> Result<Raster> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "blur sigma must be > 0, got {sigma}"
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() - 1) / 2;
    let (w, h, ch) = (img.width, img.height, img.channels);
    let row_len = w * ch;

    // Horizontal pass.
    let mut tmp = vec![0.0; img.data.len()];
    tmp.par_chunks_mut(row_len)
        .zip(img.data.par_chunks(row_len))
        .for_each(|(out_row, in_row)| {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (k, wt) in kernel.iter().enumerate() {
                        let sx = (x + k).saturating_sub(radius).min(w - 1);
                        acc += wt * in_row[sx * ch + c];
                    }
                    out_row[x * ch + c] = acc;
                }
            }
        });

    // Vertical pass.
    let mut out = vec![0.0; img.data.len()];
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, out_row)| {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0.0;
                    for (k, wt) in kernel.iter().enumerate() {
                        let sy = (y + k).saturating_sub(radius).min(h - 1);
                        acc += wt * tmp[sy * row_len + x * ch + c];
                    }
                    out_row[x * ch + c] = acc;
                }
            }
        });

    Raster::from_data(w, h, ch, out)
}

/// Difference of Gaussians: `blur(img, sigma1) - blur(img, sigma2)`.
///
/// The response is signed; dark blobs of scale between the two sigmas come
/// out negative, which is what the pore detector thresholds on.
pub fn dog_filter(img: &Raster, sigma1: f64, sigma2: f64) -> Result<Raster> {
    if !(sigma1 > 0.0 && sigma1 < sigma2) {
        return Err(Error::InvalidParameter(format!(
            "dog filter requires 0 < sigma1 < sigma2, got {sigma1}, {sigma2}"
        )));
    }
    let fine = gaussian_blur(img, sigma1)?;
    let coarse = gaussian_blur(img, sigma2)?;
    let data = fine
        .data
        .iter()
        .zip(&coarse.data)
        .map(|(a, b)| a - b)
        .collect();
    Raster::from_data(img.width, img.height, img.channels, data)
}

const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) triplet in `[0, 1]` to CIELAB.
pub fn rgb_to_lab(r: f64, g: f64, b: f64) -> Result<LabPixel> {
    for (name, v) in [("r", r), ("g", g), ("b", b)] {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "rgb channel {name} = {v} outside [0, 1]"
            )));
        }
    }
    let (rl, gl, bl) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    let fx = lab_f(x / D65_WHITE[0]);
    let fy = lab_f(y / D65_WHITE[1]);
    let fz = lab_f(z / D65_WHITE[2]);
    Ok(LabPixel {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    })
}

/// Mean CIELAB value of a pixel, treating gray rasters as `r = g = b`.
pub fn pixel_lab(img: &Raster, x: usize, y: usize) -> Result<LabPixel> {
    let clampu = |v: f64| v.clamp(0.0, 1.0);
    if img.channels == 3 {
        rgb_to_lab(
            clampu(img.get(x, y, 0)),
            clampu(img.get(x, y, 1)),
            clampu(img.get(x, y, 2)),
        )
    } else {
        let v = clampu(img.get(x, y, 0));
        rgb_to_lab(v, v, v)
    }
}

/// Bilinear sample with border-clamp semantics; total over all real
/// coordinates (out-of-bound locations read the nearest border value).
pub fn bilinear_sample(img: &Raster, x: f64, y: f64, channel: usize) -> f64 {
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v00 = img.get(x0, y0, channel);
    let v10 = img.get(x1, y0, channel);
    let v01 = img.get(x0, y1, channel);
    let v11 = img.get(x1, y1, channel);
    (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11
}

/// Read an 8-bit gray or RGB PNG into a `[0, 1]` raster.
pub fn read_png(path: impl AsRef<Path>) -> Result<Raster> {
    let dynimg = image::open(path.as_ref())?;
    match dynimg {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Raster::from_data(w as usize, h as usize, 1, data)
        }
        image::DynamicImage::ImageRgb8(img) => {
            let (w, h) = img.dimensions();
            let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Raster::from_data(w as usize, h as usize, 3, data)
        }
        other => Err(Error::InvalidInput(format!(
            "unsupported PNG color type {:?}; only 8-bit gray and RGB are handled",
            other.color()
        ))),
    }
}

/// Write a raster as an 8-bit gray or RGB PNG, clamping to `[0, 1]`.
pub fn write_png(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    match img.channels {
        1 => {
            let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, bytes)
                .expect("raster length invariant");
            buf.save(path.as_ref())?;
        }
        3 => {
            let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
                .expect("raster length invariant");
            buf.save(path.as_ref())?;
        }
        c => return Err(Error::InvalidInput(format!("unsupported channel count {c}"))),
    }
    Ok(())
}
