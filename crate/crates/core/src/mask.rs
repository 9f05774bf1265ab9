//! Binary masks and their run-length codec.
//!
//! Runs are row-major and alternate background/foreground, always starting
//! with a background run (which may be zero). This differs from COCO RLE,
//! which is column-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense binary grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Bitmap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Bitmap { height, width, data: vec![false; height * width] }
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect();
        Ok(Bitmap { height, width, data })
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count(&self) -> u64 {
        self.data.iter().filter(|&&v| v).count() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    #[serde(rename = "h")]
    pub height: usize,
    #[serde(rename = "w")]
    pub width: usize,
    pub runs: Vec<u64>,
}

impl RleMask {
    pub fn pixels(&self) -> u64 {
        (self.height * self.width) as u64
    }

    /// Foreground pixel count.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).sum()
    }

    /// Problems with this mask's internal invariants, if any.
    pub fn check(&self) -> Option<String> {
        if self.height == 0 || self.width == 0 {
            return Some(format!("zero dimension {}x{}", self.height, self.width));
        }
        let total: u64 = self.runs.iter().sum();
        if total != self.pixels() {
            return Some(format!("runs sum to {total}, expected {}", self.pixels()));
        }
        if self.runs.windows(2).any(|w| w[0] == 0 && w[1] == 0) {
            return Some("consecutive zero-length runs".into());
        }
        None
    }

    /// Half-open `[start, end)` pixel ranges of foreground, in scan order.
    pub fn foreground_spans(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &len)| {
            let start = pos;
            pos += len;
            (i % 2 == 1 && len > 0).then_some((start, pos))
        })
    }

    pub fn same_shape(&self, other: &RleMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

pub fn rle_encode(bitmap: &Bitmap) -> Result<RleMask> {
    if bitmap.height == 0 || bitmap.width == 0 {
        return Err(Error::Dimension(format!("empty grid {}x{}", bitmap.height, bitmap.width)));
    }
    if bitmap.data.len() != bitmap.height * bitmap.width {
        return Err(Error::Dimension("bitmap data length does not match its shape".into()));
    }
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for &px in &bitmap.data {
        if px != current {
            runs.push(len);
            current = px;
            len = 0;
        }
        len += 1;
    }
    runs.push(len);
    Ok(RleMask { height: bitmap.height, width: bitmap.width, runs })
}

pub fn rle_decode(mask: &RleMask) -> Result<Bitmap> {
    let total: u64 = mask.runs.iter().sum();
    if total != mask.pixels() {
        return Err(Error::MalformedMask(format!(
            "runs sum to {total} but mask is {}x{}",
            mask.height, mask.width
        )));
    }
    let mut data = Vec::with_capacity(mask.height * mask.width);
    for (i, &len) in mask.runs.iter().enumerate() {
        data.extend(std::iter::repeat(i % 2 == 1).take(len as usize));
    }
    Ok(Bitmap { height: mask.height, width: mask.width, data })
}

/// Overlap between two masks, computed on runs without decoding.
pub fn mask_intersection(a: &RleMask, b: &RleMask) -> Result<u64> {
    if !a.same_shape(b) {
        return Err(Error::Dimension(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let sa: Vec<_> = a.foreground_spans().collect();
    let sb: Vec<_> = b.foreground_spans().collect();
    let (mut i, mut j, mut inter) = (0, 0, 0u64);
    while i < sa.len() && j < sb.len() {
        let lo = sa[i].0.max(sb[j].0);
        let hi = sa[i].1.min(sb[j].1);
        if hi > lo {
            inter += hi - lo;
        }
        if sa[i].1 <= sb[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(inter)
}

/// Pixel IoU. Two empty masks are identical and score 1.
pub fn mask_iou(a: &RleMask, b: &RleMask) -> Result<f64> {
    let inter = mask_intersection(a, b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Foreground union of several same-shape masks.
pub fn mask_union<'a>(
    height: usize,
    width: usize,
    masks: impl IntoIterator<Item = &'a RleMask>,
) -> Result<RleMask> {
    let mut grid = Bitmap::zeros(height, width);
    for m in masks {
        if m.height != height || m.width != width {
            return Err(Error::Dimension(format!(
                "mask {}x{} in a {height}x{width} frame",
                m.height, m.width
            )));
        }
        for (s, e) in m.foreground_spans() {
            for p in s..e {
                grid.data[p as usize] = true;
            }
        }
    }
    rle_encode(&grid)
}
