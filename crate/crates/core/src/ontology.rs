use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::ClassId;

/// Reserved semantics byte for voxels that are not occupied.
pub const NO_CLASS: ClassId = u8::MAX;

/// Dense class table. Ids run `0..len`; one id is the general-object class
/// used for occupied space with unknown semantics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub classes: Vec<String>,
    pub general_object: ClassId,
}

const WAYMO: &[&str] = &[
    "general_object",
    "vehicle",
    "bicyclist",
    "pedestrian",
    "sign",
    "traffic_light",
    "pole",
    "construction_cone",
    "bicycle",
    "motorcycle",
    "building",
    "vegetation",
    "tree_trunk",
    "road",
    "sidewalk",
];

const NUSCENES: &[&str] = &[
    "others",
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "motorcycle",
    "pedestrian",
    "traffic_cone",
    "trailer",
    "truck",
    "driveable_surface",
    "other_flat",
    "sidewalk",
    "terrain",
    "manmade",
    "vegetation",
];

impl Ontology {
    pub fn new(classes: Vec<String>, general_object: ClassId) -> Result<Self> {
        let o = Ontology {
            classes,
            general_object,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.classes.len() > NO_CLASS as usize {
            return Err(Error::ManifestSchema(format!(
                "ontology must have 1..={} classes, got {}",
                NO_CLASS,
                self.classes.len()
            )));
        }
        if self.general_object as usize >= self.classes.len() {
            return Err(Error::ManifestSchema(format!(
                "general object id {} outside ontology",
                self.general_object
            )));
        }
        Ok(())
    }

    pub fn waymo() -> Self {
        Ontology {
            classes: WAYMO.iter().map(|s| s.to_string()).collect(),
            general_object: 0,
        }
    }

    pub fn nuscenes() -> Self {
        Ontology {
            classes: NUSCENES.iter().map(|s| s.to_string()).collect(),
            general_object: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id as usize) < self.classes.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.classes.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c == name).map(|i| i as ClassId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for o in [Ontology::waymo(), Ontology::nuscenes()] {
            o.validate().unwrap();
            assert_eq!(o.general_object, 0);
        }
        assert_eq!(Ontology::waymo().len(), 15);
        assert_eq!(Ontology::nuscenes().len(), 17);
        assert_eq!(Ontology::waymo().id("road"), Some(13));
    }

    #[test]
    fn general_object_must_exist() {
        assert!(Ontology::new(vec!["a".into()], 1).is_err());
        assert!(Ontology::new(vec![], 0).is_err());
    }
}
