use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sample::ExerciseId;
use crate::topology::NUM_LANDMARKS;

const CANONICAL_TABLE: &str = include_str!("../../data/features.txt");

/// How a feature value is computed from the frame's landmarks. The table
/// documents each formula; see `data/features.txt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formula {
    Angle,
    Distance,
    HeightAboveLine,
    Tilt,
    Inclination,
    LineAngle,
    ProjectedRatio,
    LateralOffset,
    DisplacementFromMean,
    HeightVsP95,
}

impl Formula {
    const ALL: [Formula; 10] = [
        Formula::Angle,
        Formula::Distance,
        Formula::HeightAboveLine,
        Formula::Tilt,
        Formula::Inclination,
        Formula::LineAngle,
        Formula::ProjectedRatio,
        Formula::LateralOffset,
        Formula::DisplacementFromMean,
        Formula::HeightVsP95,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Formula::Angle => "angle",
            Formula::Distance => "distance",
            Formula::HeightAboveLine => "height_above_line",
            Formula::Tilt => "tilt",
            Formula::Inclination => "inclination",
            Formula::LineAngle => "line_angle",
            Formula::ProjectedRatio => "projected_ratio",
            Formula::LateralOffset => "lateral_offset",
            Formula::DisplacementFromMean => "displacement_from_mean",
            Formula::HeightVsP95 => "height_vs_p95",
        }
    }

    /// Whether the formula needs a statistic over the whole sequence.
    pub fn is_sequence_relative(self) -> bool {
        matches!(self, Formula::DisplacementFromMean | Formula::HeightVsP95)
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Formula::Angle => n == 3,
            Formula::Distance | Formula::LineAngle | Formula::ProjectedRatio => n == 2,
            Formula::DisplacementFromMean | Formula::HeightVsP95 => n == 2,
            Formula::Tilt | Formula::Inclination | Formula::LateralOffset => n == 4,
            Formula::HeightAboveLine => n >= 3,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Parse(format!("unknown feature formula {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDef {
    pub name: String,
    pub formula: Formula,
    pub landmarks: Vec<usize>,
}

impl FeatureDef {
    pub fn new(name: impl Into<String>, formula: Formula, landmarks: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Schema(format!("bad feature name {name:?}")));
        }
        if !formula.arity_ok(landmarks.len()) {
            return Err(Error::Schema(format!(
                "feature {name}: {formula} cannot take {} landmarks",
                landmarks.len()
            )));
        }
        if let Some(&j) = landmarks.iter().find(|&&j| j >= NUM_LANDMARKS) {
            return Err(Error::Schema(format!(
                "feature {name}: landmark {j} out of range"
            )));
        }
        Ok(Self {
            name,
            formula,
            landmarks,
        })
    }
}

/// The ordered feature set of one exercise. Its length is the model's
/// input width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    exercise: ExerciseId,
    defs: Vec<FeatureDef>,
}

impl FeatureSpec {
    pub fn new(exercise: ExerciseId, defs: Vec<FeatureDef>) -> Result<Self> {
        if defs.is_empty() {
            return Err(Error::Schema(format!(
                "exercise {exercise}: empty feature set"
            )));
        }
        for (i, d) in defs.iter().enumerate() {
            if defs[..i].iter().any(|e| e.name == d.name) {
                return Err(Error::Schema(format!(
                    "exercise {exercise}: duplicate feature {:?}",
                    d.name
                )));
            }
        }
        Ok(Self { exercise, defs })
    }

    /// The built-in feature set for an exercise.
    pub fn for_exercise(exercise: ExerciseId) -> &'static FeatureSpec {
        FeatureRegistry::canonical()
            .get(exercise)
            .expect("bundled registry covers every exercise")
    }

    pub fn exercise(&self) -> ExerciseId {
        self.exercise
    }

    pub fn dim(&self) -> usize {
        self.defs.len()
    }

    pub fn defs(&self) -> &[FeatureDef] {
        &self.defs
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.defs.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureRegistry {
    specs: BTreeMap<ExerciseId, FeatureSpec>,
}

impl FeatureRegistry {
    pub fn canonical() -> &'static FeatureRegistry {
        static CANONICAL: OnceLock<FeatureRegistry> = OnceLock::new();
        CANONICAL.get_or_init(|| {
            Self::parse_table(CANONICAL_TABLE).expect("bundled feature table is valid")
        })
    }

    pub fn get(&self, exercise: ExerciseId) -> Option<&FeatureSpec> {
        self.specs.get(&exercise)
    }

    pub fn specs(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.specs.values()
    }

    /// Parses `exercise name formula i,j,k` rows; `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows: BTreeMap<ExerciseId, Vec<FeatureDef>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let bad =
                |what: &str| Error::Parse(format!("feature table line {}: {what}", lineno + 1));
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [ex, name, formula, landmarks] = cols.as_slice() else {
                return Err(bad("expected 4 columns"));
            };
            let ex: i64 = ex.parse().map_err(|_| bad("bad exercise"))?;
            let ex = ExerciseId::try_from(ex).map_err(|_| bad("bad exercise"))?;
            let landmarks = landmarks
                .split(',')
                .map(|s| s.parse::<usize>().map_err(|_| bad("bad landmark index")))
                .collect::<Result<Vec<_>>>()?;
            let def = FeatureDef::new(*name, formula.parse()?, landmarks)?;
            rows.entry(ex).or_default().push(def);
        }
        let specs = rows
            .into_iter()
            .map(|(ex, defs)| Ok((ex, FeatureSpec::new(ex, defs)?)))
            .collect::<Result<_>>()?;
        Ok(Self { specs })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("# exercise  name  formula  landmark indices\n");
        for spec in self.specs.values() {
            for d in &spec.defs {
                let lm: Vec<String> = d.landmarks.iter().map(usize::to_string).collect();
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    spec.exercise,
                    d.name,
                    d.formula,
                    lm.join(",")
                ));
            }
        }
        out
    }
}

impl FromIterator<FeatureSpec> for FeatureRegistry {
    fn from_iter<I: IntoIterator<Item = FeatureSpec>>(iter: I) -> Self {
        Self {
            specs: iter.into_iter().map(|s| (s.exercise, s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_dims() {
        let dims: Vec<usize> = ExerciseId::ALL
            .iter()
            .map(|&e| FeatureSpec::for_exercise(e).dim())
            .collect();
        assert_eq!(dims, [6, 4, 4, 3, 4]);
        let ex1 = FeatureSpec::for_exercise(ExerciseId::new(1).unwrap());
        assert_eq!(ex1.index_of("wrist_distance"), Some(4));
    }

    #[test]
    fn table_round_trips() {
        let reg = FeatureRegistry::canonical();
        let text = reg.to_table();
        assert_eq!(&FeatureRegistry::parse_table(&text).unwrap(), reg);
    }

    #[test]
    fn bad_tables_are_rejected() {
        for text in [
            "1 a angle 11,13\n",
            "1 a angle 11,13,99\n",
            "1 a warp 1,2\n",
            "1 a distance 1,2\n1 a distance 3,4\n",
            "6 a distance 1,2\n",
            "1 a distance 1,x\n",
            "1 a distance\n",
        ] {
            assert!(FeatureRegistry::parse_table(text).is_err(), "{text}");
        }
    }
}
