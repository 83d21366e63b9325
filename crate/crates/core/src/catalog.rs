//! Static catalog of the trampoline skills the identifier knows about.
//!
//! Codes are opaque keys. Structural attributes (positions, shape, rotation
//! counts) are stored per record rather than decoded from the code text,
//! since several codes (`CDI`, `LBK`, `RUI`) are idiomatic names.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Take-off or landing position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Feet,
    Seat,
    Front,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Tuck,
    Pike,
    Straddle,
    Straight,
}

/// Direction of rotation about the lateral axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Forward,
    Backward,
}

/// A skill code that is known to exist in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkillCode(&'static str);

impl SkillCode {
    pub fn as_str(&self) -> &'static str {
        self.0
    }

    /// The catalog entry for this code.
    pub fn record(&self) -> &'static SkillRecord {
        CATALOG
            .iter()
            .find(|r| r.code == *self)
            .expect("SkillCode values are only constructed from catalog rows")
    }

    /// Position of this code in catalog order.
    pub fn catalog_index(&self) -> usize {
        CATALOG
            .iter()
            .position(|r| r.code == *self)
            .expect("SkillCode values are only constructed from catalog rows")
    }
}

impl fmt::Display for SkillCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl FromStr for SkillCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_code(s)
    }
}

impl Serialize for SkillCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.0)
    }
}

impl<'de> Deserialize<'de> for SkillCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_code(&raw).map_err(serde::de::Error::custom)
    }
}

/// Tariff in tenths of a point, so 0.6 is stored as `Tariff(6)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tariff(u8);

impl Tariff {
    pub const fn from_tenths(tenths: u8) -> Self {
        Tariff(tenths)
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Tariff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Tariff {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillRecord {
    pub code: SkillCode,
    pub name: &'static str,
    pub tariff: Tariff,
    pub takeoff: Position,
    pub landing: Position,
    pub shape: Option<Shape>,
    pub somersault_quarters: u8,
    pub somersault_direction: Option<Rotation>,
    pub twist_halves: u8,
    /// Occurrences in the recorded dataset the catalog was compiled from.
    pub occurrences: u32,
    /// Whether the skill had enough recorded examples to be classified.
    pub classified: bool,
}

macro_rules! skill {
    ($code:literal, $name:literal, $tariff:literal, $from:ident -> $to:ident, $shape:expr,
     $quarters:literal $dir:expr, $twists:literal, $occ:literal, $classified:literal) => {
        SkillRecord {
            code: SkillCode($code),
            name: $name,
            tariff: Tariff::from_tenths($tariff),
            takeoff: Position::$from,
            landing: Position::$to,
            shape: $shape,
            somersault_quarters: $quarters,
            somersault_direction: $dir,
            twist_halves: $twists,
            occurrences: $occ,
            classified: $classified,
        }
    };
}

use Rotation::{Backward as BWD, Forward as FWD};

// The source table's caption counts 28 distinct skills but lists 33 rows;
// every listed row is kept.
static CATALOG: [SkillRecord; 33] = [
    skill!("F0F", "Straight Bounce", 0, Feet -> Feet, None, 0 None, 0, 286, true),
    skill!("FTF", "Tuck Jump", 0, Feet -> Feet, Some(Shape::Tuck), 0 None, 0, 58, true),
    skill!("FPF", "Pike Jump", 0, Feet -> Feet, Some(Shape::Pike), 0 None, 0, 40, true),
    skill!("FSF", "Straddle Jump", 0, Feet -> Feet, Some(Shape::Straddle), 0 None, 0, 42, true),
    skill!("F1F", "Half Twist Jump", 1, Feet -> Feet, None, 0 None, 1, 18, true),
    skill!("F2F", "Full Twist Jump", 2, Feet -> Feet, None, 0 None, 2, 19, true),
    skill!("F0S", "Seat Drop", 0, Feet -> Seat, None, 0 None, 0, 13, true),
    skill!("F1S", "Half Twist to Seat Drop", 1, Feet -> Seat, None, 0 None, 1, 10, true),
    skill!("S1S", "Seat Half Twist To Seat", 1, Seat -> Seat, None, 0 None, 1, 24, true),
    skill!("S0F", "To Feet from Seat", 0, Seat -> Feet, None, 0 None, 0, 11, true),
    skill!("S1F", "Half Twist to Feet from Seat", 1, Seat -> Feet, None, 0 None, 1, 24, true),
    skill!("F0R", "Front Drop", 1, Feet -> Front, None, 1 Some(FWD), 0, 4, false),
    skill!("R0F", "To Feet from Front", 1, Front -> Feet, None, 1 Some(BWD), 0, 5, false),
    skill!("F0B", "Back Drop", 1, Feet -> Back, None, 1 Some(BWD), 0, 10, true),
    skill!("B0F", "To Feet from Back", 1, Back -> Feet, None, 1 Some(FWD), 0, 8, false),
    skill!("B1F", "Half Twist to Feet from Back", 2, Back -> Feet, None, 1 Some(FWD), 1, 12, true),
    skill!("FSSt", "Front Somersault (Tuck)", 5, Feet -> Feet, Some(Shape::Tuck), 4 Some(FWD), 0, 4, false),
    skill!("FSSp", "Front Somersault (Pike)", 6, Feet -> Feet, Some(Shape::Pike), 4 Some(FWD), 0, 7, false),
    skill!("BRIt", "Barani (Tuck)", 6, Feet -> Feet, Some(Shape::Tuck), 4 Some(FWD), 1, 24, true),
    skill!("BRIp", "Barani (Pike)", 6, Feet -> Feet, Some(Shape::Pike), 4 Some(FWD), 1, 19, true),
    skill!("BRIs", "Barani (Straight)", 6, Feet -> Feet, Some(Shape::Straight), 4 Some(FWD), 1, 9, false),
    skill!("CDI", "Crash Dive", 3, Feet -> Back, None, 3 Some(FWD), 0, 18, true),
    skill!("BSSt", "Back Somersault (Tuck)", 5, Feet -> Feet, Some(Shape::Tuck), 4 Some(BWD), 0, 28, true),
    skill!("BSSp", "Back Somersault (Pike)", 6, Feet -> Feet, Some(Shape::Pike), 4 Some(BWD), 0, 18, true),
    skill!("BSSs", "Back Somersault (Straight)", 6, Feet -> Feet, Some(Shape::Straight), 4 Some(BWD), 0, 30, true),
    skill!("BSTt", "Back Somersault to Seat (Tuck)", 5, Feet -> Seat, Some(Shape::Tuck), 4 Some(BWD), 0, 10, true),
    skill!("LBK", "Lazy Back", 3, Feet -> Front, None, 3 Some(BWD), 0, 3, false),
    skill!("CDYt", "Cody (Tuck)", 6, Front -> Feet, Some(Shape::Tuck), 5 Some(BWD), 0, 3, false),
    skill!("BHA", "Back Half", 6, Feet -> Feet, None, 4 Some(BWD), 1, 1, false),
    skill!("BBOt", "Barani Ball Out (Tuck)", 7, Back -> Feet, Some(Shape::Tuck), 5 Some(FWD), 1, 7, false),
    skill!("RUI", "Rudolph / Rudi", 8, Feet -> Feet, None, 4 Some(FWD), 3, 3, false),
    skill!("FFR", "Full Front", 7, Feet -> Feet, None, 4 Some(FWD), 2, 1, false),
    skill!("FUB", "Full Back", 7, Feet -> Feet, None, 4 Some(BWD), 2, 2, false),
];

/// Every catalog row, in table order.
pub fn load_catalog() -> &'static [SkillRecord] {
    &CATALOG
}

/// Rows flagged as included in classification experiments.
pub fn classified_skills() -> impl Iterator<Item = &'static SkillRecord> {
    CATALOG.iter().filter(|r| r.classified)
}

/// Parses a catalog code. Surrounding whitespace is ignored; matching is
/// case-sensitive.
pub fn parse_code(token: &str) -> Result<SkillCode> {
    let trimmed = token.trim();
    CATALOG
        .iter()
        .find(|r| r.code.0 == trimmed)
        .map(|r| r.code)
        .ok_or_else(|| Error::UnknownCode(trimmed.to_string()))
}

pub fn lookup_tariff(code: &str) -> Result<Tariff> {
    parse_code(code).map(|c| c.record().tariff)
}

/// The catalog as a JSON array, for the UI and documentation.
pub fn export_catalog_json() -> String {
    serde_json::to_string_pretty(&CATALOG[..]).expect("catalog serialises")
}
