//! Colour previews of tiles with labels and rows drawn on top.

use crate::dataset::{Channel, Channels};
use crate::error::{check_dims, Error, Result};
use crate::io::CLASS_PALETTE;
use crate::raster::{BinaryMask, Class, ClassMask};

pub const ROW_COLOUR: [u8; 3] = [128, 0, 128];

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGB composite of the tile. Falls back to NIR-R-G false colour, then to
/// gray from whatever single channel exists.
pub fn composite(channels: &Channels) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let pick = |order: [Channel; 3]| -> Option<[&crate::raster::Raster; 3]> {
        Some([channels.get(&order[0])?, channels.get(&order[1])?, channels.get(&order[2])?])
    };
    let bands = pick([Channel::Red, Channel::Green, Channel::Blue])
        .or_else(|| pick([Channel::Nir, Channel::Red, Channel::Green]))
        .or_else(|| channels.values().next().map(|r| [r, r, r]))
        .ok_or(Error::EmptyInput)?;
    let (w, h) = bands[0].dims();
    for b in &bands[1..] {
        check_dims((w, h), b.dims())?;
    }
    let rgb = (0..w * h)
        .map(|i| bands.map(|b| to_u8(b.values()[i])))
        .collect();
    Ok((w, h, rgb))
}

/// Paints crop and weed pixels in their class colours, then row pixels on
/// top.
pub fn overlay(rgb: &mut [[u8; 3]], dims: (usize, usize), labels: Option<&ClassMask>, rows: Option<&BinaryMask>) -> Result<()> {
    if let Some(labels) = labels {
        check_dims(dims, labels.dims())?;
        for (px, &class) in rgb.iter_mut().zip(labels.labels()) {
            if class != Class::Background {
                *px = CLASS_PALETTE[class.index()];
            }
        }
    }
    if let Some(rows) = rows {
        check_dims(dims, rows.dims())?;
        for (px, &on) in rgb.iter_mut().zip(rows.bits()) {
            if on {
                *px = ROW_COLOUR;
            }
        }
    }
    Ok(())
}
