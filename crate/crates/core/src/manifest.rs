//! Dataset manifest: a CSV index of keypoint files with labels.
//!
//! Header: `sample_id,subject_id,exercise,keypoints,score,cohort`, plus an
//! optional trailing `provenance` column in augmented manifests. Keypoint
//! paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::augment::AugmentationOp;
use crate::error::{Error, Result};
use crate::ingest::keypoints::load_keypoints;
use crate::sample::{ensure_valid, ExerciseId, Provenance, QualityScore, Sample, MAX_SCORE};

pub const BASE_HEADER: [&str; 6] = [
    "sample_id",
    "subject_id",
    "exercise",
    "keypoints",
    "score",
    "cohort",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cohort {
    Healthy,
    Patient,
    Synthetic,
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cohort::Healthy => "healthy",
            Cohort::Patient => "patient",
            Cohort::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Cohort::Healthy),
            "patient" => Ok(Cohort::Patient),
            "synthetic" => Ok(Cohort::Synthetic),
            _ => Err(Error::Parse(format!("unknown cohort {s:?}"))),
        }
    }
}

/// Where a manifest row came from. Written as `original` or
/// `augmented:<parent>:<op>`.
#[derive(Debug, Clone, PartialEq)]
pub enum EntryOrigin {
    Original,
    Augmented { parent: String, op: AugmentationOp },
}

impl fmt::Display for EntryOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryOrigin::Original => f.write_str("original"),
            EntryOrigin::Augmented { parent, op } => write!(f, "augmented:{parent}:{op}"),
        }
    }
}

impl FromStr for EntryOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "original" || s.is_empty() {
            return Ok(EntryOrigin::Original);
        }
        let rest = s
            .strip_prefix("augmented:")
            .ok_or_else(|| Error::Parse(format!("bad provenance {s:?}")))?;
        let (parent, op) = rest
            .rsplit_once(':')
            .filter(|(p, _)| !p.is_empty())
            .ok_or_else(|| Error::Parse(format!("bad provenance {s:?}")))?;
        Ok(EntryOrigin::Augmented {
            parent: parent.to_string(),
            op: op.parse()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub subject_id: String,
    pub exercise: ExerciseId,
    pub keypoints: String,
    pub score_raw: f64,
    pub cohort: Cohort,
    pub origin: EntryOrigin,
}

impl ManifestEntry {
    pub fn is_original(&self) -> bool {
        self.origin == EntryOrigin::Original
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory keypoint paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            entries: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    /// Parses manifest CSV text. `base_dir` is used for path resolution.
    pub fn parse<R: Read>(reader: R, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("manifest header: {e}")))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let has_provenance = match cols.as_slice() {
            c if c == BASE_HEADER => false,
            [base @ .., "provenance"] if base == BASE_HEADER => true,
            _ => {
                return Err(Error::Schema(format!(
                    "manifest header must be {:?} (+ optional provenance), got {cols:?}",
                    BASE_HEADER
                )))
            }
        };
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("manifest row {}: {e}", line + 1)))?;
            let bad = |what: &str| Error::Parse(format!("manifest row {}: bad {what}", line + 1));
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let sample_id = field(0).to_string();
            if sample_id.is_empty() {
                return Err(bad("sample_id"));
            }
            if !seen.insert(sample_id.clone()) {
                return Err(Error::Schema(format!("duplicate sample_id {sample_id:?}")));
            }
            let exercise: i64 = field(2).trim().parse().map_err(|_| bad("exercise"))?;
            let exercise = ExerciseId::try_from(exercise).map_err(|_| bad("exercise"))?;
            let score_raw: f64 = field(4).trim().parse().map_err(|_| bad("score"))?;
            if !(0.0..=MAX_SCORE).contains(&score_raw) {
                return Err(Error::Schema(format!(
                    "manifest row {}: score {score_raw} outside [0, 50]",
                    line + 1
                )));
            }
            let origin = if has_provenance {
                field(6).parse()?
            } else {
                EntryOrigin::Original
            };
            entries.push(ManifestEntry {
                sample_id,
                subject_id: field(1).to_string(),
                exercise,
                keypoints: field(3).to_string(),
                score_raw,
                cohort: field(5).parse()?,
                origin,
            });
        }
        Ok(Self {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(std::io::BufReader::new(file), base)
    }

    /// Writes CSV. The provenance column is emitted only when some entry is
    /// augmented, so an all-original manifest keeps the base header.
    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let with_provenance = self.entries.iter().any(|e| !e.is_original());
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let csv_err = |e: csv::Error| Error::Parse(format!("manifest write: {e}"));
        let mut header: Vec<&str> = BASE_HEADER.to_vec();
        if with_provenance {
            header.push("provenance");
        }
        w.write_record(&header).map_err(csv_err)?;
        for e in &self.entries {
            let mut row = vec![
                e.sample_id.clone(),
                e.subject_id.clone(),
                e.exercise.to_string(),
                e.keypoints.clone(),
                e.score_raw.to_string(),
                e.cohort.to_string(),
            ];
            if with_provenance {
                row.push(e.origin.to_string());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<manifest>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.keypoints)
    }

    pub fn originals(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.is_original())
    }

    /// Loads the sample behind one row. Manifest identity and label win over
    /// the file's; a conflicting exercise or label is a schema error.
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<Sample> {
        let mut sample = load_keypoints(&self.resolve(entry))?;
        if sample.exercise != entry.exercise {
            return Err(Error::Schema(format!(
                "{}: manifest says exercise {}, file says {}",
                entry.sample_id, entry.exercise, sample.exercise
            )));
        }
        let score = QualityScore::new(entry.score_raw)?;
        if let Some(file_score) = sample.score {
            if file_score.raw() != score.raw() {
                return Err(Error::Schema(format!(
                    "{}: manifest score {} disagrees with file label {}",
                    entry.sample_id,
                    score.raw(),
                    file_score.raw()
                )));
            }
        }
        sample.sample_id = entry.sample_id.clone();
        sample.subject_id = entry.subject_id.clone();
        sample.score = Some(score);
        sample.provenance = match &entry.origin {
            EntryOrigin::Original => Provenance::Original,
            EntryOrigin::Augmented { parent, op } => Provenance::Augmented {
                parent: parent.clone(),
                op: *op,
                parent_score: Some(score),
            },
        };
        ensure_valid(&sample)?;
        Ok(sample)
    }

    /// All original samples of one exercise, in manifest order.
    pub fn load_originals(&self, exercise: ExerciseId) -> Result<Vec<Sample>> {
        self.originals()
            .filter(|e| e.exercise == exercise)
            .map(|e| self.load_sample(e))
            .collect()
    }
}
