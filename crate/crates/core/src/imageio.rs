//! PNG decoding and encoding, 8-bit quantization and bilinear resizing.
//!
//! Only non-interlaced 8-bit grayscale, gray+alpha, RGB and RGBA images are
//! accepted. Alpha is dropped and gray is replicated to three channels. No
//! color management is applied: samples are display-referred codes `v / 255`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::error::{invalid_arg, Error, Result};
use crate::image::ImagePlane;
use crate::resample::resize_channels;
use crate::scalar::Scalar;

/// Header fields of a decodable PNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PngMeta {
    pub width: u32,
    pub height: u32,
    pub color: ColorType,
}

fn decode_err(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) => Error::PngDecode(io.to_string()),
        other => Error::PngDecode(other.to_string()),
    }
}

/// Decodes PNG bytes into `[0, 1]` RGB.
pub fn decode_png(bytes: &[u8]) -> Result<ImagePlane<f32>> {
    let (meta, samples) = decode_raw(bytes)?;
    let channels = match meta.color {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => unreachable!("rejected while decoding"),
    };
    let (w, h) = (meta.width as usize, meta.height as usize);
    let mut data = Vec::with_capacity(w * h * 3);
    for px in samples.chunks_exact(channels) {
        let rgb = if channels < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
        data.extend(rgb.iter().map(|&v| v as f32 / 255.0));
    }
    ImagePlane::new(h, w, data)
}

fn decode_raw(bytes: &[u8]) -> Result<(PngMeta, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let info = reader.info();
    if info.bit_depth != BitDepth::Eight {
        return Err(Error::PngUnsupported(format!(
            "bit depth {:?}; only 8-bit images are supported",
            info.bit_depth
        )));
    }
    if info.color_type == ColorType::Indexed {
        return Err(Error::PngUnsupported("palette images are not supported".into()));
    }
    if info.interlaced {
        return Err(Error::PngUnsupported("interlaced images are not supported".into()));
    }
    let meta = PngMeta {
        width: info.width,
        height: info.height,
        color: info.color_type,
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::PngDecode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(frame.buffer_size());
    Ok((meta, buf))
}

pub fn load_png(path: impl AsRef<Path>) -> Result<ImagePlane<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

/// Clamps to `[0, 1]` and rounds half up: `floor(v * 255 + 0.5)`.
pub fn quantize<S: Scalar>(v: S) -> u8 {
    let x = v.to_f64_lossy();
    if x.is_nan() {
        return 0;
    }
    (x.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// The image after an 8-bit save/load round trip.
pub fn quantized<S: Scalar>(image: &ImagePlane<S>) -> ImagePlane<f32> {
    let data = image.data().iter().map(|&v| quantize(v) as f32 / 255.0).collect();
    ImagePlane::new(image.height(), image.width(), data).expect("same shape")
}

fn encode(width: usize, height: usize, color: ColorType, samples: &[u8]) -> Result<Vec<u8>> {
    if width == 0 || height == 0 {
        return Err(invalid_arg!("cannot encode an empty image"));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::PngEncode(e.to_string()))?;
        writer
            .write_image_data(samples)
            .map_err(|e| Error::PngEncode(e.to_string()))?;
        writer.finish().map_err(|e| Error::PngEncode(e.to_string()))?;
    }
    Ok(out)
}

/// Encodes an RGB image as 8-bit PNG bytes.
pub fn encode_png<S: Scalar>(image: &ImagePlane<S>) -> Result<Vec<u8>> {
    let samples: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    encode(image.width(), image.height(), ColorType::Rgb, &samples)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn save_png<S: Scalar>(image: &ImagePlane<S>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_png(image)?)
}

/// Writes a single-channel `height×width` map as an 8-bit grayscale PNG.
pub fn save_gray_png<S: Scalar>(
    values: &[S],
    height: usize,
    width: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    if values.len() != height * width {
        return Err(invalid_arg!(
            "gray map has {} values, expected {height}x{width}",
            values.len()
        ));
    }
    let samples: Vec<u8> = values.iter().map(|&v| quantize(v)).collect();
    write_file(path.as_ref(), &encode(width, height, ColorType::Grayscale, &samples)?)
}

/// Reads a grayscale PNG back as raw 8-bit codes.
pub fn load_gray_codes(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    std::io::Read::read_to_end(&mut BufReader::new(file), &mut bytes).map_err(|e| Error::io(path, e))?;
    let (meta, samples) = decode_raw(&bytes)?;
    if meta.color != ColorType::Grayscale {
        return Err(Error::PngUnsupported(format!("expected grayscale, got {:?}", meta.color)));
    }
    Ok((meta.height as usize, meta.width as usize, samples))
}

/// Bilinear resize with half-pixel centers; the same resampler that
/// upsamples category maps.
pub fn resize_bilinear<S: Scalar>(image: &ImagePlane<S>, out_h: usize, out_w: usize) -> Result<ImagePlane<S>> {
    if out_h == image.height() && out_w == image.width() {
        return Ok(image.clone());
    }
    let data = resize_channels(image.data(), image.height(), image.width(), 3, out_h, out_w)?;
    ImagePlane::new(out_h, out_w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode_raw(w: u32, h: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut wr = enc.write_header().unwrap();
        wr.write_image_data(data).unwrap();
        wr.finish().unwrap();
        out
    }

    #[test]
    fn single_pixel_scaling() {
        let bytes = encode_raw(1, 1, ColorType::Rgb, BitDepth::Eight, &[255, 0, 128]);
        let img = decode_png(&bytes).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0, 128.0 / 255.0]);
    }

    #[test]
    fn gray_and_alpha_variants() {
        let g = decode_png(&encode_raw(2, 1, ColorType::Grayscale, BitDepth::Eight, &[0, 51])).unwrap();
        assert_eq!(g.pixel(0, 1), [0.2; 3]);
        let ga = decode_png(&encode_raw(1, 1, ColorType::GrayscaleAlpha, BitDepth::Eight, &[51, 7])).unwrap();
        assert_eq!(ga.pixel(0, 0), [0.2; 3]);
        let rgba = decode_png(&encode_raw(1, 1, ColorType::Rgba, BitDepth::Eight, &[255, 0, 51, 0])).unwrap();
        assert_eq!(rgba.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let bytes = encode_raw(1, 1, ColorType::Rgb, BitDepth::Sixteen, &[0; 6]);
        assert!(matches!(decode_png(&bytes), Err(Error::PngUnsupported(_))));
    }

    #[test]
    fn truncated_file_is_a_decode_error() {
        let bytes = encode_raw(4, 4, ColorType::Rgb, BitDepth::Eight, &[9; 48]);
        for cut in [8, 20, bytes.len() - 5] {
            assert!(matches!(decode_png(&bytes[..cut]), Err(Error::PngDecode(_))), "cut {cut}");
        }
        assert!(matches!(decode_png(b"not a png"), Err(Error::PngDecode(_))));
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        assert_eq!(quantize(0.5f32), 128);
        assert_eq!(quantize(1.2f32), 255);
        assert_eq!(quantize(-0.3f64), 0);
        assert_eq!(quantize(f32::NAN), 0);
    }

    #[test]
    fn round_trip_of_quantized_image_is_exact() {
        let img = ImagePlane::<f32>::from_fn(5, 7, |y, x| {
            [(y * 40) as f32 / 255.0, (x * 30) as f32 / 255.0, ((x + y) * 11) as f32 / 255.0]
        });
        let back = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
        let noisy = ImagePlane::<f32>::from_fn(3, 3, |y, x| [0.123 * y as f32, 0.5, 0.31 * x as f32 + 0.2]);
        assert_eq!(decode_png(&encode_png(&noisy).unwrap()).unwrap(), quantized(&noisy));
    }

    #[test]
    fn ramp_downsample_hand_values() {
        // 4 → 2: output pixel centers fall midway between source pixels 0/1 and 2/3
        let img = ImagePlane::<f64>::from_fn(4, 4, |y, x| [x as f64 / 3.0, y as f64 / 3.0, 0.25]);
        let small = resize_bilinear(&img, 2, 2).unwrap();
        let third = 1.0 / 3.0;
        assert!((small.pixel(0, 0)[0] - 0.5 * third).abs() < 1e-15);
        assert!((small.pixel(0, 1)[0] - 2.5 * third).abs() < 1e-15);
        assert!((small.pixel(1, 0)[1] - 2.5 * third).abs() < 1e-15);
        assert_eq!(small.pixel(1, 1)[2], 0.25);
    }

    #[test]
    fn same_size_resize_is_a_copy() {
        let img = ImagePlane::<f32>::from_fn(3, 5, |y, x| [0.1 * x as f32, 0.2 * y as f32, 0.3]);
        assert_eq!(resize_bilinear(&img, 3, 5).unwrap(), img);
        assert!(resize_bilinear(&img, 0, 5).is_err());
    }
}
