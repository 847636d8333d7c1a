//! Skeleton topology: landmark names, laterality pairs and the mirror swap.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sample::LandmarkFrame;

/// Number of landmarks in the canonical whole-body skeleton.
pub const NUM_LANDMARKS: usize = 33;

const CANONICAL_TABLE: &str = include_str!("../data/topology.txt");

/// Indices into the canonical topology.
pub mod idx {
    pub const NOSE: usize = 0;
    pub const LEFT_EYE_INNER: usize = 1;
    pub const LEFT_EYE: usize = 2;
    pub const LEFT_EYE_OUTER: usize = 3;
    pub const RIGHT_EYE_INNER: usize = 4;
    pub const RIGHT_EYE: usize = 5;
    pub const RIGHT_EYE_OUTER: usize = 6;
    pub const LEFT_EAR: usize = 7;
    pub const RIGHT_EAR: usize = 8;
    pub const MOUTH_LEFT: usize = 9;
    pub const MOUTH_RIGHT: usize = 10;
    pub const LEFT_SHOULDER: usize = 11;
    pub const RIGHT_SHOULDER: usize = 12;
    pub const LEFT_ELBOW: usize = 13;
    pub const RIGHT_ELBOW: usize = 14;
    pub const LEFT_WRIST: usize = 15;
    pub const RIGHT_WRIST: usize = 16;
    pub const LEFT_PINKY: usize = 17;
    pub const RIGHT_PINKY: usize = 18;
    pub const LEFT_INDEX: usize = 19;
    pub const RIGHT_INDEX: usize = 20;
    pub const LEFT_THUMB: usize = 21;
    pub const RIGHT_THUMB: usize = 22;
    pub const LEFT_HIP: usize = 23;
    pub const RIGHT_HIP: usize = 24;
    pub const LEFT_KNEE: usize = 25;
    pub const RIGHT_KNEE: usize = 26;
    pub const LEFT_ANKLE: usize = 27;
    pub const RIGHT_ANKLE: usize = 28;
    pub const LEFT_HEEL: usize = 29;
    pub const RIGHT_HEEL: usize = 30;
    pub const LEFT_FOOT_INDEX: usize = 31;
    pub const RIGHT_FOOT_INDEX: usize = 32;
}

/// The twelve torso and limb landmarks the default features rely on.
pub const CORE_LANDMARKS: [usize; 12] = [
    idx::LEFT_SHOULDER,
    idx::RIGHT_SHOULDER,
    idx::LEFT_ELBOW,
    idx::RIGHT_ELBOW,
    idx::LEFT_WRIST,
    idx::RIGHT_WRIST,
    idx::LEFT_HIP,
    idx::RIGHT_HIP,
    idx::LEFT_KNEE,
    idx::RIGHT_KNEE,
    idx::LEFT_ANKLE,
    idx::RIGHT_ANKLE,
];

/// Ordered landmark names plus the left/right pairs that swap under a
/// horizontal mirror.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkTopology {
    names: Vec<String>,
    mirror_pairs: Vec<(usize, usize)>,
    // mirror[i] is the partner of landmark i (or i itself)
    mirror: Vec<usize>,
}

impl LandmarkTopology {
    pub fn new(names: Vec<String>, mirror_pairs: Vec<(usize, usize)>) -> Result<Self> {
        if names.len() != NUM_LANDMARKS {
            return Err(Error::Schema(format!(
                "topology must have {NUM_LANDMARKS} landmarks, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate landmark name {name:?}")));
            }
        }
        let mut mirror: Vec<usize> = (0..names.len()).collect();
        let mut paired = vec![false; names.len()];
        for &(l, r) in &mirror_pairs {
            if l >= names.len() || r >= names.len() || l == r {
                return Err(Error::Schema(format!("bad mirror pair ({l}, {r})")));
            }
            if paired[l] || paired[r] {
                return Err(Error::Schema(format!(
                    "landmark appears in more than one mirror pair: ({l}, {r})"
                )));
            }
            paired[l] = true;
            paired[r] = true;
            mirror[l] = r;
            mirror[r] = l;
        }
        for (i, name) in names.iter().enumerate() {
            if is_lateral(name) && !paired[i] {
                return Err(Error::Schema(format!(
                    "lateral landmark {name:?} has no mirror partner"
                )));
            }
        }
        Ok(Self {
            names,
            mirror_pairs,
            mirror,
        })
    }

    /// The built-in 33-point whole-body topology.
    pub fn canonical() -> &'static LandmarkTopology {
        static CANONICAL: OnceLock<LandmarkTopology> = OnceLock::new();
        CANONICAL.get_or_init(|| {
            Self::parse_table(CANONICAL_TABLE).expect("bundled topology table is valid")
        })
    }

    /// Parses a topology table: one `index name [mirror-index]` row per
    /// landmark, `#` comments allowed.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut pairs = Vec::new();
        let mut declared = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("topology line {}: {line:?}", lineno + 1));
            let mut cols = line.split_whitespace();
            let index: usize = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let name = cols.next().ok_or_else(bad)?;
            if index != names.len() {
                return Err(bad());
            }
            let mut partner = index;
            if let Some(m) = cols.next() {
                let m: usize = m.parse().map_err(|_| bad())?;
                if m > index {
                    pairs.push((index, m));
                } else if m == index {
                    return Err(bad());
                }
                partner = m;
            }
            declared.push((lineno + 1, partner));
            if cols.next().is_some() {
                return Err(bad());
            }
            names.push(name.to_string());
        }
        let topo = Self::new(names, pairs)?;
        // both directions must be declared consistently
        for (i, &(lineno, partner)) in declared.iter().enumerate() {
            if topo.mirror_of(i) != partner {
                return Err(Error::Parse(format!(
                    "topology line {lineno}: one-sided mirror declaration"
                )));
            }
        }
        Ok(topo)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mirror_pairs(&self) -> &[(usize, usize)] {
        &self.mirror_pairs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn mirror_of(&self, index: usize) -> usize {
        self.mirror[index]
    }
}

fn is_lateral(name: &str) -> bool {
    name.split('_')
        .any(|part| part == "left" || part == "right")
}

/// Horizontally mirrors a frame: `x' = 1 - x` and lateral labels exchanged.
///
/// Points carry their `y`, `z` and visibility with them to the swapped slot.
pub fn mirror_swap(frame: &LandmarkFrame, topology: &LandmarkTopology) -> LandmarkFrame {
    let mut points = frame.points.clone();
    for (i, slot) in points.iter_mut().enumerate() {
        let src = topology.mirror_of(i);
        if let Some(p) = frame.points.get(src) {
            *slot = *p;
            slot.x = 1.0 - p.x;
        }
    }
    LandmarkFrame { points }
}
