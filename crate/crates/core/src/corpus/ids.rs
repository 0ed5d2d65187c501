//! Closed vocabularies: affective labels, appraisal dimensions, modalities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! closed_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $what:literal, [$($variant:ident => $text:literal),+ $(,)?]
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let lower = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
                match lower.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::ConfigInvalid(format!("unknown {}: `{}`", $what, s))),
                }
            }
        }
    };
}

closed_enum!(
    /// One of the 23 affective labels annotated per sequence.
    LabelId, "label", [
        Angry => "angry",
        Annoyed => "annoyed",
        Anxious => "anxious",
        Ashamed => "ashamed",
        Confident => "confident",
        Contemptuous => "contemptuous",
        Curious => "curious",
        Desperate => "desperate",
        Disappointed => "disappointed",
        Embarrassed => "embarrassed",
        Excited => "excited",
        Frustrated => "frustrated",
        Interested => "interested",
        Guilty => "guilty",
        Happy => "happy",
        Hopeful => "hopeful",
        Impatient => "impatient",
        Proud => "proud",
        Relaxed => "relaxed",
        Sad => "sad",
        Satisfied => "satisfied",
        Surprised => "surprised",
        Upset => "upset",
    ]
);

closed_enum!(
    /// Appraisal dimension, annotated on a bipolar [-1, 1] scale.
    DimensionId, "dimension", [
        Novelty => "novelty",
        IntrinsicPleasantness => "intrinsic_pleasantness",
        GoalConduciveness => "goal_conduciveness",
        Coping => "coping",
        Arousal => "arousal",
    ]
);

closed_enum!(
    Modality, "modality", [
        Text => "text",
        Audio => "audio",
        Video => "video",
    ]
);

closed_enum!(
    FeatureKind, "feature kind", [
        Expert => "expert",
        Deep => "deep",
    ]
);

closed_enum!(
    AgeGroup, "age group", [
        Young => "young",
        Older => "older",
    ]
);

pub const N_LABELS: usize = 23;
pub const N_DIMENSIONS: usize = 5;

impl DimensionId {
    /// Two-letter abbreviation used in heatmaps.
    pub fn short(self) -> &'static str {
        match self {
            DimensionId::Novelty => "NV",
            DimensionId::IntrinsicPleasantness => "IP",
            DimensionId::GoalConduciveness => "GC",
            DimensionId::Coping => "CP",
            DimensionId::Arousal => "AR",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_vocabulary_is_closed_at_23() {
        assert_eq!(LabelId::ALL.len(), N_LABELS);
        for (i, l) in LabelId::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(l.as_str().parse::<LabelId>().unwrap(), *l);
        }
        assert_eq!(DimensionId::ALL.len(), N_DIMENSIONS);
    }

    #[test]
    fn parse_is_case_insensitive() {
        assert_eq!("RELAXED".parse::<LabelId>().unwrap(), LabelId::Relaxed);
        assert_eq!(" Happy".parse::<LabelId>().unwrap(), LabelId::Happy);
        assert_eq!(
            "Goal Conduciveness".parse::<DimensionId>().unwrap(),
            DimensionId::GoalConduciveness
        );
        assert!("joyful".parse::<LabelId>().is_err());
    }

    #[test]
    fn serde_uses_canonical_lowercase() {
        let s = serde_json::to_string(&DimensionId::IntrinsicPleasantness).unwrap();
        assert_eq!(s, "\"intrinsic_pleasantness\"");
    }
}
