//! Ideal-pose marker images: each landmark painted as a colored disc, and
//! the matching color-centroid detector. Together they stand in for a real
//! pose estimator when checking that image-space and joint-space transforms
//! agree.

use crate::error::{Error, Result};
use crate::sample::{FrameSize, LandmarkFrame, LandmarkPoint};
use crate::topology::{idx, LandmarkTopology, NUM_LANDMARKS};

pub const MARKER_RADIUS_PX: f64 = 3.0;

/// Maximum RGB distance for a pixel to be assigned to a palette color.
pub const CLASSIFY_THRESHOLD: f64 = 60.0;

/// Minimum matched pixels for a marker to count as visible.
pub const MIN_MARKER_PIXELS: usize = 3;

/// One color per landmark, indexed like the topology.
///
/// Chosen so that any blend of a color toward the black background stays
/// more than [`CLASSIFY_THRESHOLD`] away from every other palette color
/// (minimum over pairs of the distance from color `d` to the segment
/// `[0, c]` is 67.5). Minimum pairwise distance is 71.
pub const PALETTE: [[u8; 3]; NUM_LANDMARKS] = include!("../../data/palette.in");

/// An 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerFrameImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl MarkerFrameImage {
    pub fn black(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidArgument(format!(
                "raster of {} bytes does not match {width}x{height} RGB",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn size(&self) -> FrameSize {
        FrameSize::new(self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, col: u32, row: u32) -> [u8; 3] {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, col: u32, row: u32, rgb: [u8; 3]) {
        let i = (row as usize * self.width as usize + col as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Paints every landmark as a radius-3 disc of its palette color on black.
/// Pixel `(col, row)` is covered when its center lies within the radius of
/// `(x * W, y * H)`. Later landmarks overwrite earlier ones; discs falling
/// partly outside the image are clipped.
pub fn render_markers(frame: &LandmarkFrame, size: FrameSize) -> MarkerFrameImage {
    let mut img = MarkerFrameImage::black(size.width, size.height);
    let r2 = MARKER_RADIUS_PX * MARKER_RADIUS_PX;
    for (i, p) in frame.points.iter().enumerate().take(NUM_LANDMARKS) {
        let u = p.x * size.w();
        let v = p.y * size.h();
        if !u.is_finite() || !v.is_finite() {
            continue;
        }
        let c0 = (u - MARKER_RADIUS_PX).ceil().max(0.0);
        let c1 = (u + MARKER_RADIUS_PX).floor().min(size.w() - 1.0);
        let r0 = (v - MARKER_RADIUS_PX).ceil().max(0.0);
        let r1 = (v + MARKER_RADIUS_PX).floor().min(size.h() - 1.0);
        if c0 > c1 || r0 > r1 {
            continue;
        }
        for row in r0 as u32..=r1 as u32 {
            for col in c0 as u32..=c1 as u32 {
                let du = col as f64 - u;
                let dv = row as f64 - v;
                if du * du + dv * dv <= r2 {
                    img.put(col, row, PALETTE[i]);
                }
            }
        }
    }
    img
}

/// Recovers landmarks from a marker image, labeled anatomically.
///
/// Each pixel is assigned to its nearest palette color when that color is
/// within [`CLASSIFY_THRESHOLD`]. A marker's position is the centroid of
/// its pixels weighted by intensity, the pixel's projection onto the
/// palette color clamped to `[0, 1]`. Markers with fewer than
/// [`MIN_MARKER_PIXELS`] pixels come back invisible at `(0, 0)`.
///
/// Like a pose estimator looking at a person facing the camera, the
/// detector labels the side on the image right as the subject's left: when
/// the marker skeleton is mirrored (see [`is_mirrored`]) the lateral labels
/// are exchanged.
pub fn detect_markers(image: &MarkerFrameImage) -> LandmarkFrame {
    let raw = detect_marker_centroids(image);
    if is_mirrored(&raw) {
        let topology = LandmarkTopology::canonical();
        let points = (0..raw.points.len())
            .map(|i| raw.points[topology.mirror_of(i)])
            .collect();
        LandmarkFrame { points }
    } else {
        raw
    }
}

/// Chirality vote over the shoulder, hip and eye pairs. For a subject facing
/// the camera with image y pointing down, `left - right` crossed with the
/// downward torso direction is positive. A negative majority means the
/// image is a mirror view.
pub fn is_mirrored(frame: &LandmarkFrame) -> bool {
    let vis = |i: usize| frame.points.get(i).filter(|p| p.visibility > 0.0);
    let mid = |a: usize, b: usize| match (vis(a), vis(b)) {
        (Some(p), Some(q)) => Some(((p.x + q.x) / 2.0, (p.y + q.y) / 2.0)),
        _ => None,
    };
    let down = match (
        mid(idx::LEFT_SHOULDER, idx::RIGHT_SHOULDER),
        mid(idx::LEFT_HIP, idx::RIGHT_HIP),
    ) {
        (Some(s), Some(h)) => (h.0 - s.0, h.1 - s.1),
        _ => (0.0, 1.0),
    };
    let mut vote = 0i32;
    for (l, r) in [
        (idx::LEFT_SHOULDER, idx::RIGHT_SHOULDER),
        (idx::LEFT_HIP, idx::RIGHT_HIP),
        (idx::LEFT_EYE, idx::RIGHT_EYE),
    ] {
        if let (Some(p), Some(q)) = (vis(l), vis(r)) {
            let cross = (p.x - q.x) * down.1 - (p.y - q.y) * down.0;
            vote += if cross > 0.0 {
                1
            } else if cross < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    vote < 0
}

/// Per-color centroids with labels taken from palette order as-is.
pub fn detect_marker_centroids(image: &MarkerFrameImage) -> LandmarkFrame {
    let palette: Vec<[f64; 3]> = PALETTE
        .iter()
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    let norms2: Vec<f64> = palette.iter().map(|c| dot(c, c)).collect();
    // a pixel darker than this cannot be within threshold of any color
    let min_norm = norms2
        .iter()
        .map(|n| n.sqrt())
        .fold(f64::INFINITY, f64::min);
    let dark_cutoff = min_norm - CLASSIFY_THRESHOLD;
    let t2 = CLASSIFY_THRESHOLD * CLASSIFY_THRESHOLD;

    let mut acc = [[0.0f64; 3]; NUM_LANDMARKS]; // sum w, sum w*col, sum w*row
    let mut counts = [0usize; NUM_LANDMARKS];
    for row in 0..image.height() {
        for col in 0..image.width() {
            let px = image.get(col, row);
            if px == [0, 0, 0] {
                continue;
            }
            let p = [px[0] as f64, px[1] as f64, px[2] as f64];
            if dot(&p, &p).sqrt() < dark_cutoff {
                continue;
            }
            let mut best = usize::MAX;
            let mut best_d2 = f64::INFINITY;
            for (k, c) in palette.iter().enumerate() {
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = k;
                }
            }
            if best_d2 > t2 {
                continue;
            }
            let w = (dot(&p, &palette[best]) / norms2[best]).clamp(0.0, 1.0);
            acc[best][0] += w;
            acc[best][1] += w * col as f64;
            acc[best][2] += w * row as f64;
            counts[best] += 1;
        }
    }

    let (w, h) = (image.width() as f64, image.height() as f64);
    let points = (0..NUM_LANDMARKS)
        .map(|k| {
            if counts[k] >= MIN_MARKER_PIXELS && acc[k][0] > 0.0 {
                LandmarkPoint::new(
                    acc[k][1] / acc[k][0] / w,
                    acc[k][2] / acc[k][0] / h,
                    0.0,
                    1.0,
                )
            } else {
                LandmarkPoint::new(0.0, 0.0, 0.0, 0.0)
            }
        })
        .collect();
    LandmarkFrame { points }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
