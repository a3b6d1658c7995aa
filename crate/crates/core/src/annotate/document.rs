//! `annotations.json`: raw strokes plus the geometry derived from them.

use serde::{Deserialize, Serialize};

use super::{
    make_avoidance_region, make_interaction_zone, spray_select, AnnotateError, AvoidanceRegion,
    FilterParams, InteractionZone, SearchSpace, SprayLabel, SprayStroke,
};
use crate::cloudio::PointCloud;
use crate::geom::Quat;

pub const ANNOTATIONS_VERSION: u32 = 1;

fn version() -> u32 {
    ANNOTATIONS_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default = "version")]
    pub v: u32,
    pub strokes: Vec<SprayStroke>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterParams>,
    /// Derived, world frame.
    #[serde(default)]
    pub zones: Vec<InteractionZone>,
    /// Derived, world frame.
    #[serde(default)]
    pub regions: Vec<AvoidanceRegion>,
    /// Optional inline search space (the service accepts it here).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub searchspace: Option<SearchSpace>,
}

impl Annotations {
    pub fn new(strokes: Vec<SprayStroke>) -> Self {
        Annotations {
            v: ANNOTATIONS_VERSION,
            strokes,
            filter: None,
            zones: Vec::new(),
            regions: Vec::new(),
            searchspace: None,
        }
    }

    pub fn clear_derived(&mut self) {
        self.zones.clear();
        self.regions.clear();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedGeometry {
    pub zones: Vec<InteractionZone>,
    pub regions: Vec<AvoidanceRegion>,
}

/// Groups strokes by (label, zone id) in order of first appearance and
/// derives one zone or region per group. Zone boxes use `frame` for axes.
pub fn derive_annotations(
    cloud: &PointCloud,
    strokes: &[SprayStroke],
    frame: &Quat,
    filter: FilterParams,
) -> Result<DerivedGeometry, AnnotateError> {
    let mut groups: Vec<(SprayLabel, &str, Vec<&SprayStroke>)> = Vec::new();
    for s in strokes {
        s.validate()?;
        if s.zone_id.trim().is_empty() {
            return Err(AnnotateError::InvalidInput("stroke without zone_id".into()));
        }
        match groups
            .iter_mut()
            .find(|(l, id, _)| *l == s.label && *id == s.zone_id)
        {
            Some(g) => g.2.push(s),
            None => groups.push((s.label, &s.zone_id, vec![s])),
        }
    }

    let mut zones = Vec::new();
    let mut regions = Vec::new();
    for (label, id, members) in groups {
        let mut idx: Vec<usize> = members.iter().flat_map(|s| spray_select(cloud, s)).collect();
        idx.sort_unstable();
        idx.dedup();
        match label {
            SprayLabel::Interact => {
                let approach = members
                    .iter()
                    .find_map(|s| s.approach_dir)
                    .ok_or_else(|| {
                        AnnotateError::InvalidInput(format!("zone '{id}' has no approach_dir"))
                    })?;
                zones.push(make_interaction_zone(cloud, &idx, approach, id, frame, filter)?);
            }
            SprayLabel::Avoid => {
                if idx.len() < 4 {
                    return Err(AnnotateError::Degenerate {
                        id: Some(id.to_string()),
                        rank: 0,
                        reason: format!("only {} points sprayed", idx.len()),
                    });
                }
                regions.push(make_avoidance_region(cloud, &idx, id, filter)?);
            }
        }
    }
    Ok(DerivedGeometry { zones, regions })
}
