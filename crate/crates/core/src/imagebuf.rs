//! H×W×3 float images and their 8-bit PNG encoding.

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("PNG codec error: {0}")]
    Codec(#[from] image::ImageError),
}

/// Row-major RGB image with channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    pixels: Vec<[T; 3]>,
}

impl<T: Scalar> ImageBuffer<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            pixels: vec![[value; 3]; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[T; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// Round-to-nearest 8-bit quantization with clamping to `[0, 255]`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend(px.iter().map(|&c| quantize(c.to_f64_lossy())));
        }
        out
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        assert_eq!(bytes.len(), width * height * 3, "byte length mismatch");
        let inv = T::one() / T::lit(255.0);
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| {
                [
                    T::lit(c[0] as f64) * inv,
                    T::lit(c[1] as f64) * inv,
                    T::lit(c[2] as f64) * inv,
                ]
            })
            .collect();
        Self { width, height, pixels }
    }

    /// Rotates the image a quarter turn counter-clockwise (square images).
    pub fn rotate_ccw90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = Self::filled(h, w, T::zero());
        for y in 0..h {
            for x in 0..w {
                out.set(y, w - 1 - x, self.get(x, y));
            }
        }
        out
    }

    /// Bilinear resampling with pixel-center alignment and edge clamping.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut out = Self::filled(width, height, T::zero());
        let sx = T::from_usize_lossy(self.width) / T::from_usize_lossy(width);
        let sy = T::from_usize_lossy(self.height) / T::from_usize_lossy(height);
        let half = T::lit(0.5);
        let max_x = T::from_usize_lossy(self.width - 1);
        let max_y = T::from_usize_lossy(self.height - 1);
        for y in 0..height {
            let fy = ((T::from_usize_lossy(y) + half) * sy - half).max(T::zero()).min(max_y);
            let y0 = fy.floor().to_usize().unwrap_or(0);
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - T::from_usize_lossy(y0);
            for x in 0..width {
                let fx = ((T::from_usize_lossy(x) + half) * sx - half).max(T::zero()).min(max_x);
                let x0 = fx.floor().to_usize().unwrap_or(0);
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - T::from_usize_lossy(x0);
                let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
                let mut px = [T::zero(); 3];
                for ch in 0..3 {
                    let top = a[ch] + (b[ch] - a[ch]) * tx;
                    let bottom = c[ch] + (d[ch] - c[ch]) * tx;
                    px[ch] = top + (bottom - top) * ty;
                }
                out.set(x, y, px);
            }
        }
        out
    }

    pub fn is_achromatic(&self) -> bool {
        self.pixels.iter().all(|p| p[0] == p[1] && p[1] == p[2])
    }
}

#[inline]
fn quantize(c: f64) -> u8 {
    let v = c * 255.0;
    // half-up rounding via truncation; NaN and negatives land on 0
    if v > 0.0 {
        (v + 0.5).min(255.0) as u8
    } else {
        0
    }
}

/// 8-bit RGB PNG bytes.
pub fn encode_png<T: Scalar>(img: &ImageBuffer<T>) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub).write_image(
        &img.to_rgb8(),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

pub fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<ImageBuffer<T>, ImageError> {
    let rgb = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(ImageBuffer::from_rgb8(w as usize, h as usize, rgb.as_raw()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_png_round_trip() {
        let img = ImageBuffer::<f64>::filled(2, 2, 1.0);
        let bytes = encode_png(&img).unwrap();
        let back: ImageBuffer<f64> = decode_png(&bytes).unwrap();
        assert_eq!(back.to_rgb8(), vec![255u8; 12]);
        assert_eq!(encode_png(&img).unwrap(), bytes);
    }

    #[test]
    fn quantization_clamps() {
        let mut img = ImageBuffer::<f32>::filled(1, 1, 0.0);
        img.set(0, 0, [-0.5, 0.5, 2.0]);
        assert_eq!(img.to_rgb8(), vec![0, 128, 255]);
    }

    #[test]
    fn rotation_moves_right_edge_to_top() {
        let mut img = ImageBuffer::<f64>::filled(3, 3, 0.0);
        img.set(2, 1, [1.0; 3]);
        let r = img.rotate_ccw90();
        assert_eq!(r.get(1, 0), [1.0; 3]);
        assert_eq!(r.rotate_ccw90().rotate_ccw90().rotate_ccw90(), img);
    }

    #[test]
    fn bilinear_preserves_constant() {
        let img = ImageBuffer::<f64>::filled(4, 4, 0.25);
        let up = img.resize_bilinear(10, 7);
        assert!(up.pixels().iter().all(|p| (p[0] - 0.25).abs() < 1e-12));
    }
}
