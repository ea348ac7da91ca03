//! The 23-class public-safety taxonomy.
//!
//! Class identity (names, ids, categories) is fixed. Exchange-schema names,
//! role sets and cardinality caps are data and can be overridden from a JSON
//! config through [`TaxonomyConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown class token `{0}`")]
    UnknownClass(String),
    #[error("unknown source-dataset label `{0}`")]
    UnknownSourceLabel(String),
    #[error("unknown role `{0}` (expected firefighter, ems or full)")]
    UnknownRole(String),
    #[error("invalid taxonomy config: {0}")]
    InvalidConfig(String),
    #[error("reading taxonomy config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing taxonomy config: {0}")]
    Json(#[from] serde_json::Error),
}

/// Operational category of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Egress,
    FireSuppression,
    FireAlarm,
    UtilityControl,
    Medical,
    Structural,
    Obstacle,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Egress => "egress",
            Category::FireSuppression => "fire_suppression",
            Category::FireAlarm => "fire_alarm",
            Category::UtilityControl => "utility_control",
            Category::Medical => "medical",
            Category::Structural => "structural",
            Category::Obstacle => "obstacle",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "egress" => Category::Egress,
            "fire_suppression" => Category::FireSuppression,
            "fire_alarm" => Category::FireAlarm,
            "utility_control" => Category::UtilityControl,
            "medical" => Category::Medical,
            "structural" => Category::Structural,
            "obstacle" => Category::Obstacle,
            _ => return None,
        })
    }

    /// Responder priority tier. Only the ordering is consumed downstream.
    pub fn priority(self) -> Priority {
        match self {
            Category::FireAlarm
            | Category::FireSuppression
            | Category::Medical
            | Category::UtilityControl => Priority::Critical,
            Category::Egress => Priority::High,
            Category::Structural | Category::Obstacle => Priority::Normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    Critical,
    High,
    Normal,
}

impl Priority {
    pub fn as_str(self) -> &'static str {
        match self {
            Priority::Critical => "critical",
            Priority::High => "high",
            Priority::Normal => "normal",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Some(match s {
            "critical" => Priority::Critical,
            "high" => Priority::High,
            "normal" => Priority::Normal,
            _ => return None,
        })
    }
}

pub const NUM_CLASSES: usize = 23;

// (name, category, structural surface, default exchange-schema name)
const CLASS_TABLE: [(&str, Category, bool, &str); NUM_CLASSES] = [
    ("door", Category::Egress, false, "IfcDoor"),
    ("window", Category::Egress, false, "IfcWindow"),
    ("stairs", Category::Egress, false, "IfcStair"),
    ("elevator", Category::Egress, false, "IfcTransportElement.ELEVATOR"),
    ("ramp", Category::Egress, false, "IfcRamp"),
    ("exit_sign", Category::Egress, false, "IfcSign"),
    ("railing", Category::Egress, false, "IfcRailing"),
    ("fire_extinguisher", Category::FireSuppression, false, "IfcFireSuppressionTerminal.USERDEFINED"),
    ("standpipe", Category::FireSuppression, false, "IfcFireSuppressionTerminal.BREECHINGINLET"),
    ("fire_hose_cabinet", Category::FireSuppression, false, "IfcFireSuppressionTerminal.HOSEREEL"),
    ("sprinkler", Category::FireSuppression, false, "IfcFireSuppressionTerminal.SPRINKLER"),
    ("fire_alarm_panel", Category::FireAlarm, false, "IfcUnitaryControlElement.ALARMPANEL"),
    ("fire_alarm_pull", Category::FireAlarm, false, "IfcAlarm.MANUALPULLBOX"),
    ("electrical_panel", Category::UtilityControl, false, "IfcElectricDistributionBoard.DISTRIBUTIONBOARD"),
    ("gas_shutoff", Category::UtilityControl, false, "IfcValve.GASTAP"),
    ("water_shutoff", Category::UtilityControl, false, "IfcValve.STOPCOCK"),
    ("aed", Category::Medical, false, "IfcMedicalDevice.USERDEFINED"),
    ("wall", Category::Structural, true, "IfcWall"),
    ("floor", Category::Structural, true, "IfcSlab.FLOOR"),
    ("ceiling", Category::Structural, true, "IfcCovering.CEILING"),
    ("column", Category::Structural, false, "IfcColumn"),
    ("furniture", Category::Obstacle, false, "IfcFurniture"),
    ("clutter", Category::Obstacle, false, "IfcBuildingElementProxy"),
];

/// Dense class identifier in `0..23`. Serializes as the class name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u8);

impl ClassId {
    pub const DOOR: ClassId = ClassId(0);
    pub const WINDOW: ClassId = ClassId(1);
    pub const STAIRS: ClassId = ClassId(2);
    pub const ELEVATOR: ClassId = ClassId(3);
    pub const RAMP: ClassId = ClassId(4);
    pub const EXIT_SIGN: ClassId = ClassId(5);
    pub const RAILING: ClassId = ClassId(6);
    pub const FIRE_EXTINGUISHER: ClassId = ClassId(7);
    pub const STANDPIPE: ClassId = ClassId(8);
    pub const FIRE_HOSE_CABINET: ClassId = ClassId(9);
    pub const SPRINKLER: ClassId = ClassId(10);
    pub const FIRE_ALARM_PANEL: ClassId = ClassId(11);
    pub const FIRE_ALARM_PULL: ClassId = ClassId(12);
    pub const ELECTRICAL_PANEL: ClassId = ClassId(13);
    pub const GAS_SHUTOFF: ClassId = ClassId(14);
    pub const WATER_SHUTOFF: ClassId = ClassId(15);
    pub const AED: ClassId = ClassId(16);
    pub const WALL: ClassId = ClassId(17);
    pub const FLOOR: ClassId = ClassId(18);
    pub const CEILING: ClassId = ClassId(19);
    pub const COLUMN: ClassId = ClassId(20);
    pub const FURNITURE: ClassId = ClassId(21);
    pub const CLUTTER: ClassId = ClassId(22);

    pub fn new(id: u8) -> Option<Self> {
        ((id as usize) < NUM_CLASSES).then_some(ClassId(id))
    }

    pub fn all() -> impl Iterator<Item = ClassId> + Clone {
        (0..NUM_CLASSES as u8).map(ClassId)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CLASS_TABLE
            .iter()
            .position(|row| row.0 == name)
            .map(|i| ClassId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CLASS_TABLE[self.index()].0
    }

    pub fn category(self) -> Category {
        CLASS_TABLE[self.index()].1
    }

    pub fn priority(self) -> Priority {
        self.category().priority()
    }

    /// Wall, floor or ceiling: fused to a single instance per area.
    pub fn is_structural_surface(self) -> bool {
        CLASS_TABLE[self.index()].2
    }

    /// One of the seven classes shared with the reference dataset.
    pub fn is_overlapping(self) -> bool {
        matches!(
            self,
            ClassId::CEILING
                | ClassId::FLOOR
                | ClassId::WALL
                | ClassId::COLUMN
                | ClassId::WINDOW
                | ClassId::DOOR
                | ClassId::FURNITURE
        )
    }

    /// One of the fifteen safety classes with no reference-dataset label.
    pub fn is_novel_safety(self) -> bool {
        !self.is_overlapping() && self != ClassId::CLUTTER
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassId {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassId::from_name(s).ok_or_else(|| TaxonomyError::UnknownClass(s.to_string()))
    }
}

impl Serialize for ClassId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ClassId::from_name(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown class `{s}`")))
    }
}

/// Fully resolved description of one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyClass {
    pub id: ClassId,
    pub name: &'static str,
    pub category: Category,
    pub iso_name: String,
    pub priority: Priority,
    pub is_structural_surface: bool,
}

/// Outcome of mapping a reference-dataset label into the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappedLabel {
    Direct(ClassId),
    Furniture,
    Column,
    Excluded,
}

impl MappedLabel {
    pub fn class(self) -> Option<ClassId> {
        match self {
            MappedLabel::Direct(c) => Some(c),
            MappedLabel::Furniture => Some(ClassId::FURNITURE),
            MappedLabel::Column => Some(ClassId::COLUMN),
            MappedLabel::Excluded => None,
        }
    }
}

/// The 13 reference-dataset label tokens.
pub const SOURCE_LABELS: [&str; 13] = [
    "ceiling", "floor", "wall", "beam", "column", "window", "door", "table", "chair", "sofa",
    "bookcase", "board", "clutter",
];

pub fn map_source_label(label: &str) -> Result<MappedLabel, TaxonomyError> {
    Ok(match label {
        "ceiling" => MappedLabel::Direct(ClassId::CEILING),
        "floor" => MappedLabel::Direct(ClassId::FLOOR),
        "wall" => MappedLabel::Direct(ClassId::WALL),
        "column" => MappedLabel::Direct(ClassId::COLUMN),
        "window" => MappedLabel::Direct(ClassId::WINDOW),
        "door" => MappedLabel::Direct(ClassId::DOOR),
        "table" | "chair" | "sofa" | "bookcase" => MappedLabel::Furniture,
        "beam" => MappedLabel::Column,
        "board" | "clutter" => MappedLabel::Excluded,
        other => return Err(TaxonomyError::UnknownSourceLabel(other.to_string())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Firefighter,
    Ems,
    Full,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Full, Role::Firefighter, Role::Ems];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Firefighter => "firefighter",
            Role::Ems => "ems",
            Role::Full => "full",
        }
    }
}

impl FromStr for Role {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "firefighter" => Ok(Role::Firefighter),
            "ems" => Ok(Role::Ems),
            "full" => Ok(Role::Full),
            other => Err(TaxonomyError::UnknownRole(other.to_string())),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleFilterSpec {
    pub role: Role,
    pub retained_classes: BTreeSet<ClassId>,
    pub keep_structural_context: bool,
}

impl RoleFilterSpec {
    pub fn retains(&self, class: ClassId) -> bool {
        self.retained_classes.contains(&class)
            || (self.keep_structural_context && class.is_structural_surface())
    }
}

/// Per-subarea cardinality cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cap {
    Limited(u32),
    Uncapped,
}

/// Per-subarea top-K caps for the capped safety classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CapTable {
    per_subarea: BTreeMap<ClassId, u32>,
}

impl CapTable {
    pub fn new(per_subarea: BTreeMap<ClassId, u32>) -> Self {
        Self { per_subarea }
    }

    pub fn per_subarea(&self, class: ClassId) -> Cap {
        self.per_subarea
            .get(&class)
            .map_or(Cap::Uncapped, |&k| Cap::Limited(k))
    }

    /// Total cap over `n_subareas` subareas.
    pub fn cap_for(&self, class: ClassId, n_subareas: u32) -> Cap {
        match self.per_subarea(class) {
            Cap::Limited(k) => Cap::Limited(k * n_subareas),
            Cap::Uncapped => Cap::Uncapped,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, u32)> + '_ {
        self.per_subarea.iter().map(|(&c, &k)| (c, k))
    }
}

impl Default for CapTable {
    fn default() -> Self {
        let per_subarea = [
            (ClassId::AED, 1),
            (ClassId::FIRE_ALARM_PANEL, 1),
            (ClassId::FIRE_ALARM_PULL, 3),
            (ClassId::FIRE_EXTINGUISHER, 3),
            (ClassId::FIRE_HOSE_CABINET, 2),
            (ClassId::EXIT_SIGN, 5),
            (ClassId::ELECTRICAL_PANEL, 3),
        ]
        .into_iter()
        .collect();
        Self { per_subarea }
    }
}

/// Overrides for the data-driven parts of the taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyConfig {
    /// class name → exchange-schema display name
    pub iso_names: BTreeMap<String, String>,
    pub firefighter_includes_utility: bool,
    /// replaces the EMS retained set when present
    pub ems_classes: Option<Vec<String>>,
    /// class name → per-subarea K; replaces the whole cap table when present
    pub caps: Option<BTreeMap<String, u32>>,
    pub keep_structural_context: Option<bool>,
}

/// Immutable taxonomy: classes, role sets and cap table.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    classes: Vec<SafetyClass>,
    firefighter: RoleFilterSpec,
    ems: RoleFilterSpec,
    full: RoleFilterSpec,
    caps: CapTable,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::from_config(&TaxonomyConfig::default()).expect("built-in taxonomy is valid")
    }
}

impl Taxonomy {
    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: TaxonomyConfig = serde_json::from_str(&text)?;
        Self::from_config(&cfg)
    }

    pub fn from_config(cfg: &TaxonomyConfig) -> Result<Self, TaxonomyError> {
        let mut classes: Vec<SafetyClass> = ClassId::all()
            .map(|id| SafetyClass {
                id,
                name: id.name(),
                category: id.category(),
                iso_name: CLASS_TABLE[id.index()].3.to_string(),
                priority: id.priority(),
                is_structural_surface: id.is_structural_surface(),
            })
            .collect();
        for (name, iso) in &cfg.iso_names {
            let id: ClassId = name.parse()?;
            classes[id.index()].iso_name = iso.clone();
        }

        let keep_ctx = cfg.keep_structural_context.unwrap_or(true);
        let mut ff_categories = vec![Category::FireSuppression, Category::FireAlarm, Category::Egress];
        if cfg.firefighter_includes_utility {
            ff_categories.push(Category::UtilityControl);
        }
        let firefighter = RoleFilterSpec {
            role: Role::Firefighter,
            retained_classes: ClassId::all()
                .filter(|c| ff_categories.contains(&c.category()))
                .collect(),
            keep_structural_context: keep_ctx,
        };
        let ems_set: BTreeSet<ClassId> = match &cfg.ems_classes {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?,
            None => [ClassId::ELEVATOR, ClassId::RAMP, ClassId::AED].into_iter().collect(),
        };
        let ems = RoleFilterSpec {
            role: Role::Ems,
            retained_classes: ems_set,
            keep_structural_context: keep_ctx,
        };
        let full = RoleFilterSpec {
            role: Role::Full,
            retained_classes: ClassId::all().collect(),
            keep_structural_context: true,
        };
        for spec in [&firefighter, &ems] {
            if spec.retained_classes.len() >= NUM_CLASSES {
                return Err(TaxonomyError::InvalidConfig(format!(
                    "{} retained set must be a strict subset of the full set",
                    spec.role
                )));
            }
        }

        let caps = match &cfg.caps {
            Some(map) => {
                let mut per = BTreeMap::new();
                for (name, &k) in map {
                    per.insert(name.parse()?, k);
                }
                CapTable::new(per)
            }
            None => CapTable::default(),
        };

        Ok(Self {
            classes,
            firefighter,
            ems,
            full,
            caps,
        })
    }

    pub fn class(&self, id: ClassId) -> &SafetyClass {
        &self.classes[id.index()]
    }

    pub fn classes(&self) -> &[SafetyClass] {
        &self.classes
    }

    pub fn iso_name(&self, id: ClassId) -> &str {
        &self.classes[id.index()].iso_name
    }

    pub fn role_spec(&self, role: Role) -> &RoleFilterSpec {
        match role {
            Role::Firefighter => &self.firefighter,
            Role::Ems => &self.ems,
            Role::Full => &self.full,
        }
    }

    pub fn role_retained(&self, class: ClassId, role: Role) -> bool {
        self.role_spec(role).retains(class)
    }

    pub fn caps(&self) -> &CapTable {
        &self.caps
    }

    pub fn cap_for(&self, class: ClassId, n_subareas: u32) -> Cap {
        self.caps.cap_for(class, n_subareas)
    }
}
