use crate::error::{Error, Result};
use crate::sample::{LandmarkFrame, LandmarkSequence};

/// Longest sequence handed to the model; longer ones are strided down.
pub const T_MAX: usize = 300;

/// Landmarks with visibility below this are treated as missing.
pub const VISIBILITY_THRESHOLD: f64 = 0.5;

/// Cleans a sequence before feature extraction:
///
/// 1. invisible landmarks are linearly interpolated in time between the
///    nearest visible neighbors (held at the edges);
/// 2. the sequence is downsampled by a uniform stride to at most [`T_MAX`]
///    frames;
/// 3. frames where more than half of `core` landmarks are invisible are
///    dropped.
///
/// Interpolated points keep their original visibility so step 3 still sees
/// them as missing. A landmark never visible anywhere is left as is.
pub fn preprocess_sequence(seq: &LandmarkSequence, core: &[usize]) -> Result<LandmarkSequence> {
    if seq.frames.len() < 2 {
        return Err(Error::TooShort {
            context: "sequence".into(),
            frames: seq.frames.len(),
        });
    }
    let mut frames = seq.frames.clone();
    let n_points = frames.iter().map(|f| f.points.len()).min().unwrap_or(0);
    for j in 0..n_points {
        interpolate_track(&mut frames, j);
    }

    let stride = seq.frames.len().div_ceil(T_MAX);
    let frames: Vec<LandmarkFrame> = frames
        .into_iter()
        .step_by(stride)
        .filter(|f| {
            let missing = core
                .iter()
                .filter(|&&j| {
                    f.points
                        .get(j)
                        .is_none_or(|p| p.visibility < VISIBILITY_THRESHOLD)
                })
                .count();
            2 * missing <= core.len()
        })
        .collect();
    if frames.is_empty() {
        return Err(Error::TooShort {
            context: "sequence after dropping occluded frames".into(),
            frames: 0,
        });
    }
    Ok(LandmarkSequence {
        frames,
        fps: seq.fps / stride as f64,
        frame_size: seq.frame_size,
    })
}

fn interpolate_track(frames: &mut [LandmarkFrame], j: usize) {
    let visible: Vec<usize> = (0..frames.len())
        .filter(|&t| frames[t].points[j].visibility >= VISIBILITY_THRESHOLD)
        .collect();
    let (Some(&first), Some(&last)) = (visible.first(), visible.last()) else {
        return;
    };
    let copy_xyz = |frames: &mut [LandmarkFrame], t: usize, x: f64, y: f64, z: f64| {
        let p = &mut frames[t].points[j];
        p.x = x;
        p.y = y;
        p.z = z;
    };
    let at = |frames: &[LandmarkFrame], t: usize| {
        let p = frames[t].points[j];
        (p.x, p.y, p.z)
    };

    let (x, y, z) = at(frames, first);
    for t in 0..first {
        copy_xyz(frames, t, x, y, z);
    }
    let (x, y, z) = at(frames, last);
    for t in last + 1..frames.len() {
        copy_xyz(frames, t, x, y, z);
    }
    for pair in visible.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == a + 1 {
            continue;
        }
        let (xa, ya, za) = at(frames, a);
        let (xb, yb, zb) = at(frames, b);
        for t in a + 1..b {
            let s = (t - a) as f64 / (b - a) as f64;
            copy_xyz(
                frames,
                t,
                xa + s * (xb - xa),
                ya + s * (yb - ya),
                za + s * (zb - za),
            );
        }
    }
}
