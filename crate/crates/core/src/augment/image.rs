use crate::augment::AugmentationOp;
use crate::ingest::markers::MarkerFrameImage;

/// Applies an op to an RGB frame. Output has the input's dimensions.
///
/// Flip maps column `c` to `W - 1 - c`. Rotation is the inverse mapping of
/// [`super::transform_joints`]: each destination pixel samples the source at
/// the position rotated by `-theta` about `((W - 1) / 2, (H - 1) / 2)`,
/// bilinearly, with black outside the source.
pub fn transform_image(image: &MarkerFrameImage, op: AugmentationOp) -> MarkerFrameImage {
    let (w, h) = (image.width(), image.height());
    let mut out = MarkerFrameImage::black(w, h);
    match op {
        AugmentationOp::HorizontalFlip => {
            for row in 0..h {
                for col in 0..w {
                    out.put(w - 1 - col, row, image.get(col, row));
                }
            }
        }
        AugmentationOp::Rotate { theta_deg } => {
            let (sin, cos) = theta_deg.to_radians().sin_cos();
            let cx = (w as f64 - 1.0) / 2.0;
            let cy = (h as f64 - 1.0) / 2.0;
            for row in 0..h {
                for col in 0..w {
                    let dx = col as f64 - cx;
                    let dy = row as f64 - cy;
                    let sx = cos * dx + sin * dy + cx;
                    let sy = -sin * dx + cos * dy + cy;
                    if let Some(rgb) = sample_bilinear(image, sx, sy) {
                        out.put(col, row, rgb);
                    }
                }
            }
        }
    }
    out
}

/// Bilinear sample with zero padding. `None` when all four taps are outside.
fn sample_bilinear(image: &MarkerFrameImage, x: f64, y: f64) -> Option<[u8; 3]> {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    if x0 < -1 || y0 < -1 || x0 >= w || y0 >= h {
        return None;
    }
    let tap = |cx: i64, cy: i64| -> [f64; 3] {
        if cx < 0 || cy < 0 || cx >= w || cy >= h {
            [0.0; 3]
        } else {
            let p = image.get(cx as u32, cy as u32);
            [p[0] as f64, p[1] as f64, p[2] as f64]
        }
    };
    let (a, b, c, d) = (
        tap(x0, y0),
        tap(x0 + 1, y0),
        tap(x0, y0 + 1),
        tap(x0 + 1, y0 + 1),
    );
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    let mut out = [0u8; 3];
    for k in 0..3 {
        let v = a[k] * w00 + b[k] * w10 + c[k] * w01 + d[k] * w11;
        out[k] = v.round().clamp(0.0, 255.0) as u8;
    }
    Some(out)
}
