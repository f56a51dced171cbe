//! Semantic label vocabulary and the partition into dynamic classes.
//!
//! Label ids follow the Semantic KITTI numbering: 40-99 are static
//! structure (40/44/48/49 ground surfaces, 50 building, 51 fence,
//! 80 pole), 10 car, 30 person, and the 25x range moving objects.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub const LABEL_CAR: u32 = 10;
pub const LABEL_PERSON: u32 = 30;
pub const LABEL_ROAD: u32 = 40;
pub const LABEL_BUILDING: u32 = 50;
pub const LABEL_FENCE: u32 = 51;
pub const LABEL_POLE: u32 = 80;
pub const LABEL_MOVING_CAR: u32 = 252;
pub const LABEL_MOVING_PERSON: u32 = 254;

/// The three dynamic classes an object can belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DynamicClass {
    Static,
    SemiStatic,
    Dynamic,
}

/// A subset of the three dynamic classes (a delta selection).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicClassSet {
    pub statics: bool,
    pub semi_static: bool,
    pub dynamic: bool,
}

impl DynamicClassSet {
    pub const ALL: DynamicClassSet = DynamicClassSet {
        statics: true,
        semi_static: true,
        dynamic: true,
    };
    pub const STATIC_ONLY: DynamicClassSet = DynamicClassSet {
        statics: true,
        semi_static: false,
        dynamic: false,
    };
    pub const NON_DYNAMIC: DynamicClassSet = DynamicClassSet {
        statics: true,
        semi_static: true,
        dynamic: false,
    };
    pub const EMPTY: DynamicClassSet = DynamicClassSet {
        statics: false,
        semi_static: false,
        dynamic: false,
    };

    pub fn single(c: DynamicClass) -> Self {
        let mut s = Self::EMPTY;
        s.insert(c);
        s
    }

    pub fn insert(&mut self, c: DynamicClass) {
        match c {
            DynamicClass::Static => self.statics = true,
            DynamicClass::SemiStatic => self.semi_static = true,
            DynamicClass::Dynamic => self.dynamic = true,
        }
    }

    pub fn contains(&self, c: DynamicClass) -> bool {
        match c {
            DynamicClass::Static => self.statics,
            DynamicClass::SemiStatic => self.semi_static,
            DynamicClass::Dynamic => self.dynamic,
        }
    }
}

impl fmt::Display for DynamicClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.statics {
            parts.push("S");
        }
        if self.semi_static {
            parts.push("E");
        }
        if self.dynamic {
            parts.push("D");
        }
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// The set of labels a world can emit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRegistry {
    pub labels: Vec<u32>,
}

impl Default for LabelRegistry {
    fn default() -> Self {
        LabelRegistry {
            labels: vec![
                LABEL_CAR,
                LABEL_PERSON,
                LABEL_ROAD,
                44,
                48,
                49,
                LABEL_BUILDING,
                LABEL_FENCE,
                LABEL_POLE,
                LABEL_MOVING_CAR,
                LABEL_MOVING_PERSON,
            ],
        }
    }
}

/// Maps every label id to a dynamic class: static labels as inclusive
/// ranges, semi-static and dynamic labels as explicit sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelPartition {
    /// Inclusive (lo, hi) ranges of static label ids.
    pub static_ranges: Vec<(u32, u32)>,
    pub semi_static: BTreeSet<u32>,
    pub dynamic: BTreeSet<u32>,
}

impl Default for LabelPartition {
    fn default() -> Self {
        LabelPartition {
            static_ranges: vec![(40, 99)],
            semi_static: [LABEL_CAR, LABEL_PERSON].into_iter().collect(),
            dynamic: [LABEL_MOVING_CAR, LABEL_MOVING_PERSON].into_iter().collect(),
        }
    }
}

impl LabelPartition {
    pub fn classify(&self, label: u32) -> Option<DynamicClass> {
        if self.semi_static.contains(&label) {
            return Some(DynamicClass::SemiStatic);
        }
        if self.dynamic.contains(&label) {
            return Some(DynamicClass::Dynamic);
        }
        if self
            .static_ranges
            .iter()
            .any(|&(lo, hi)| label >= lo && label <= hi)
        {
            return Some(DynamicClass::Static);
        }
        None
    }

    /// Movable = semi-static or dynamic; movability is a property of the
    /// label, independent of whether the object currently moves.
    pub fn is_movable(&self, label: u32) -> bool {
        matches!(
            self.classify(label),
            Some(DynamicClass::SemiStatic) | Some(DynamicClass::Dynamic)
        )
    }

    /// Check that the partition covers the registry and is pairwise disjoint.
    pub fn validate(&self, registry: &LabelRegistry) -> crate::Result<()> {
        for &l in &self.semi_static {
            if self.dynamic.contains(&l) {
                return Err(crate::Error::InvalidConfig(format!(
                    "label {l} is both semi-static and dynamic"
                )));
            }
        }
        for set in [&self.semi_static, &self.dynamic] {
            for &l in set {
                if self
                    .static_ranges
                    .iter()
                    .any(|&(lo, hi)| l >= lo && l <= hi)
                {
                    return Err(crate::Error::InvalidConfig(format!(
                        "label {l} falls in a static range and a movable set"
                    )));
                }
            }
        }
        for &l in &registry.labels {
            if self.classify(l).is_none() {
                return Err(crate::Error::InvalidConfig(format!(
                    "label {l} from the registry is not covered by the partition"
                )));
            }
        }
        Ok(())
    }
}
