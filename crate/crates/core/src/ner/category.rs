use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! categories {
    ($($name:ident),* $(,)?) => {
        /// Entity categories produced by the health entity extractor.
        ///
        /// Labels outside the known set are kept verbatim in
        /// [`EntityCategory::Unrecognized`] so newer service output still
        /// decodes.
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum EntityCategory {
            $($name,)*
            Unrecognized(String),
        }

        impl EntityCategory {
            pub const KNOWN: &'static [EntityCategory] = &[$(EntityCategory::$name),*];

            pub fn as_str(&self) -> &str {
                match self {
                    $(EntityCategory::$name => stringify!($name),)*
                    EntityCategory::Unrecognized(label) => label,
                }
            }

            /// Parses a label, never failing.
            pub fn from_label(label: &str) -> Self {
                match label {
                    $(stringify!($name) => EntityCategory::$name,)*
                    other => EntityCategory::Unrecognized(other.to_string()),
                }
            }
        }
    };
}

categories!(
    AdministrativeEvent,
    Age,
    BodyStructure,
    CareEnvironment,
    ConditionQualifier,
    Date,
    Diagnosis,
    Direction,
    Dosage,
    ExaminationName,
    FamilyRelation,
    Frequency,
    Gender,
    GeneOrProtein,
    HealthcareProfession,
    MeasurementUnit,
    MeasurementValue,
    MedicationClass,
    MedicationForm,
    MedicationName,
    MedicationRoute,
    RelationalOperator,
    SymptomOrSign,
    Time,
    TreatmentName,
    Variant,
);

impl EntityCategory {
    pub fn is_known(&self) -> bool {
        !matches!(self, EntityCategory::Unrecognized(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown entity category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for EntityCategory {
    type Err = UnknownCategory;

    /// Strict parse: only the known categories are accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match EntityCategory::from_label(s) {
            EntityCategory::Unrecognized(label) => Err(UnknownCategory(label)),
            known => Ok(known),
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EntityCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        Ok(EntityCategory::from_label(&label))
    }
}
