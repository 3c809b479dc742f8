//! Reading and writing rasters and masks as image files.
//!
//! Channel rasters are single-band 8- or 16-bit PNG/TIFF scaled to [0, 1].
//! Class masks are written as 8-bit palette PNGs whose index is the class id
//! (0 background, 1 crop, 2 weed); on input, palette, RGB, and gray-index
//! encodings are all accepted.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Class, ClassMask, Raster};

/// Display colour of each class, indexed by class id.
pub const CLASS_PALETTE: [[u8; 3]; 3] = [[0, 0, 0], [0, 255, 0], [255, 0, 0]];

pub fn read_raster(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f32> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f32 / 255.0).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| p.0[0] as f32 / 65535.0).collect(),
        DynamicImage::ImageRgb8(buf) => gray_from_rgb(path, buf.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]))?,
        DynamicImage::ImageRgba8(buf) => gray_from_rgb(path, buf.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]))?,
        other => {
            return Err(Error::format(
                path,
                format!("expected a single-band image, got {:?}", other.color()),
            ))
        }
    };
    Raster::new(w, h, values)
}

/// Accepts colour-encoded gray images, where every pixel has r = g = b.
fn gray_from_rgb(path: &Path, pixels: impl Iterator<Item = [u8; 3]>) -> Result<Vec<f32>> {
    pixels
        .map(|[r, g, b]| {
            if r == g && g == b {
                Ok(r as f32 / 255.0)
            } else {
                Err(Error::format(path, "expected a single-band image, got colour data"))
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn encoder<'a>(path: &Path, out: &'a mut BufWriter<File>, w: usize, h: usize) -> Result<png::Encoder<'a, &'a mut BufWriter<File>>> {
    let (w32, h32) = (u32::try_from(w), u32::try_from(h));
    match (w32, h32) {
        (Ok(w), Ok(h)) => Ok(png::Encoder::new(out, w, h)),
        _ => Err(Error::format(path, "image too large for PNG")),
    }
}

fn write_png(
    path: &Path,
    w: usize,
    h: usize,
    setup: impl FnOnce(&mut png::Encoder<&mut BufWriter<File>>),
    data: &[u8],
) -> Result<()> {
    let mut out = create(path)?;
    {
        let mut enc = encoder(path, &mut out, w, h)?;
        setup(&mut enc);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e))?;
        writer.write_image_data(data).map_err(|e| Error::format(path, e))?;
        writer.finish().map_err(|e| Error::format(path, e))?;
    }
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

/// Writes a raster as a 16-bit grayscale PNG. Values are clamped to [0, 1].
pub fn write_raster_png16(path: &Path, raster: &Raster) -> Result<()> {
    let (w, h) = raster.dims();
    let data: Vec<u8> = raster
        .values()
        .iter()
        .flat_map(|&v| ((v.clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes())
        .collect();
    write_png(
        path,
        w,
        h,
        |e| {
            e.set_color(png::ColorType::Grayscale);
            e.set_depth(png::BitDepth::Sixteen);
        },
        &data,
    )
}

/// Writes a class mask as an 8-bit palette PNG.
pub fn write_classmask(path: &Path, mask: &ClassMask) -> Result<()> {
    let (w, h) = mask.dims();
    let palette: Vec<u8> = CLASS_PALETTE.iter().flatten().copied().collect();
    write_png(
        path,
        w,
        h,
        |e| {
            e.set_color(png::ColorType::Indexed);
            e.set_depth(png::BitDepth::Eight);
            e.set_palette(palette);
        },
        &mask.indices(),
    )
}

/// Writes a binary mask as 8-bit grayscale, 255 for set pixels.
pub fn write_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let (w, h) = mask.dims();
    let data: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(
        path,
        w,
        h,
        |e| {
            e.set_color(png::ColorType::Grayscale);
            e.set_depth(png::BitDepth::Eight);
        },
        &data,
    )
}

/// Writes packed RGB pixels as an 8-bit PNG.
pub fn write_rgb(path: &Path, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    let data: Vec<u8> = rgb.iter().flatten().copied().collect();
    write_png(
        path,
        width,
        height,
        |e| {
            e.set_color(png::ColorType::Rgb);
            e.set_depth(png::BitDepth::Eight);
        },
        &data,
    )
}

struct DecodedPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    data: Vec<u8>,
}

/// Decodes to 8 bits per sample, expanding palettes to RGB.
fn decode_png8(path: &Path) -> Result<DecodedPng> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    let mut data = vec![0; reader.output_buffer_size().ok_or_else(|| Error::format(path, "image too large"))?];
    let info = reader.next_frame(&mut data).map_err(|e| Error::format(path, e))?;
    data.truncate(info.buffer_size());
    Ok(DecodedPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        data,
    })
}

fn class_of_colour(path: &Path, rgb: [u8; 3]) -> Result<Class> {
    CLASS_PALETTE
        .iter()
        .position(|&c| c == rgb)
        .and_then(|i| Class::from_index(i as u8))
        .ok_or_else(|| Error::format(path, format!("colour {rgb:?} is not a class colour")))
}

/// Reads a class mask from a palette PNG (colours mapped through the
/// palette), an RGB(A) PNG with the class colours, or a gray PNG holding
/// class ids 0, 1, 2.
pub fn read_classmask(path: &Path) -> Result<ClassMask> {
    let img = decode_png8(path)?;
    let n = img.width * img.height;
    let labels: Vec<Class> = match img.color {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => {
            let stride = img.data.len() / n.max(1);
            img.data
                .chunks(stride.max(1))
                .take(n)
                .map(|px| {
                    Class::from_index(px[0])
                        .ok_or_else(|| Error::format(path, format!("gray value {} is not a class id", px[0])))
                })
                .collect::<Result<_>>()?
        }
        png::ColorType::Rgb | png::ColorType::Rgba => {
            let stride = if img.color == png::ColorType::Rgb { 3 } else { 4 };
            img.data
                .chunks(stride)
                .take(n)
                .map(|px| class_of_colour(path, [px[0], px[1], px[2]]))
                .collect::<Result<_>>()?
        }
        png::ColorType::Indexed => return Err(Error::format(path, "palette was not expanded")),
    };
    ClassMask::new(img.width, img.height, labels)
}

/// Reads a grayscale PNG as a mask of its non-zero pixels.
pub fn read_binary_mask(path: &Path) -> Result<BinaryMask> {
    let img = decode_png8(path)?;
    let n = img.width * img.height;
    let stride = match img.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(Error::format(path, format!("expected a grayscale mask, got {other:?}"))),
    };
    let bits = img.data.chunks(stride).take(n).map(|px| px[0] != 0).collect();
    BinaryMask::new(img.width, img.height, bits)
}

/// Reads the raw palette indices of an 8-bit indexed PNG.
pub fn read_palette_indices(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e))?;
    {
        let info = reader.info();
        if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::format(path, "expected an 8-bit palette PNG"));
        }
    }
    let mut data = vec![0; reader.output_buffer_size().ok_or_else(|| Error::format(path, "image too large"))?];
    let info = reader.next_frame(&mut data).map_err(|e| Error::format(path, e))?;
    data.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, data))
}
