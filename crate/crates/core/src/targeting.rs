//! Angular target resolution: which scene objects fall inside a gaze or finger-pointing cone.
//!
//! Each modality has a casual range (objects inside it become *possible objects*) and a
//! narrower precise band (objects inside it are tagged [`Tier::High`]). Both bounds are
//! closed intervals. Offsets are measured from the ray to the object centroid.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{SceneGraph, Vec3};
use crate::session::Snapshot;

/// Slack applied to the closed range and tier bounds so that an object placed exactly on a
/// boundary is not lost to rounding.
pub const BOUNDARY_EPSILON_DEG: f64 = 1e-9;

const MIN_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point coincides with the ray origin")]
    Degenerate,
    #[error("ray direction must be a finite non-zero vector")]
    BadDirection,
    #[error("invalid angle configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRay")]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

#[derive(Deserialize)]
struct RawRay {
    origin: Vec3,
    direction: Vec3,
}

impl TryFrom<RawRay> for Ray {
    type Error = GeometryError;
    fn try_from(raw: RawRay) -> Result<Self, Self::Error> {
        Ray::new(raw.origin, raw.direction)
    }
}

impl Ray {
    /// Build a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::BadDirection);
        }
        let direction = direction.normalized().ok_or(GeometryError::BadDirection)?;
        Ok(Ray { origin, direction })
    }

    /// Ray from `origin` through `target`.
    pub fn towards(origin: Vec3, target: Vec3) -> Result<Self, GeometryError> {
        Ray::new(origin, target - origin)
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityKind {
    Gaze,
    ThumbLeft,
    ThumbRight,
    IndexLeft,
    IndexRight,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 5] = [
        ModalityKind::Gaze,
        ModalityKind::ThumbLeft,
        ModalityKind::ThumbRight,
        ModalityKind::IndexLeft,
        ModalityKind::IndexRight,
    ];
    pub const FINGERS: [ModalityKind; 4] = [
        ModalityKind::ThumbLeft,
        ModalityKind::ThumbRight,
        ModalityKind::IndexLeft,
        ModalityKind::IndexRight,
    ];

    pub fn is_finger(self) -> bool {
        self != ModalityKind::Gaze
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModalityKind::Gaze => "gaze",
            ModalityKind::ThumbLeft => "thumb_left",
            ModalityKind::ThumbRight => "thumb_right",
            ModalityKind::IndexLeft => "index_left",
            ModalityKind::IndexRight => "index_right",
        }
    }
}

/// Cone sizes in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngleConfig {
    pub gaze_range: f64,
    pub point_range: f64,
    pub gaze_high: f64,
    pub point_high: f64,
    /// Subtract the half-angle subtended by an object's bounding sphere from its offset.
    pub use_extent: bool,
}

impl Default for AngleConfig {
    fn default() -> Self {
        AngleConfig { gaze_range: 14.0, point_range: 11.0, gaze_high: 2.8, point_high: 8.0, use_extent: false }
    }
}

impl AngleConfig {
    /// Same tiers, different casual ranges. Tier bounds are clamped so `high <= range` holds.
    pub fn with_ranges(&self, gaze_range: f64, point_range: f64) -> AngleConfig {
        AngleConfig {
            gaze_range,
            point_range,
            gaze_high: self.gaze_high.min(gaze_range),
            point_high: self.point_high.min(point_range),
            use_extent: self.use_extent,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, high, range) in [
            ("gaze", self.gaze_high, self.gaze_range),
            ("point", self.point_high, self.point_range),
        ] {
            if !(high.is_finite() && range.is_finite() && high > 0.0 && high <= range && range <= 180.0) {
                return Err(GeometryError::BadConfig(format!(
                    "{name}: need 0 < high ({high}) <= range ({range}) <= 180"
                )));
            }
        }
        Ok(())
    }

    /// `(range, high)` for a modality.
    pub fn bounds(&self, modality: ModalityKind) -> (f64, f64) {
        if modality.is_finger() {
            (self.point_range, self.point_high)
        } else {
            (self.gaze_range, self.gaze_high)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PossibleObject {
    pub object_id: String,
    pub modality: ModalityKind,
    /// Degrees.
    pub offset: f64,
    pub tier: Tier,
    /// Meters from the ray origin to the object centroid.
    pub distance: f64,
}

/// Canonical ordering: High tier first, then smaller offset, nearer object, id.
pub fn rank_order(a: &PossibleObject, b: &PossibleObject) -> Ordering {
    a.tier
        .cmp(&b.tier)
        .then(a.offset.total_cmp(&b.offset))
        .then(a.distance.total_cmp(&b.distance))
        .then_with(|| a.object_id.cmp(&b.object_id))
}

/// Angle in degrees between the ray direction and the direction from its origin to `point`.
pub fn angular_offset(ray: &Ray, point: Vec3) -> Result<f64, GeometryError> {
    let to_point = point - ray.origin;
    if to_point.norm() < MIN_SEPARATION {
        return Err(GeometryError::Degenerate);
    }
    // atan2 form: accurate at 0 and 180 where acos(dot) loses precision.
    let d = ray.direction;
    let angle = d.cross(to_point).norm().atan2(d.dot(to_point));
    Ok(angle.to_degrees())
}

fn effective_offset(ray: &Ray, point: Vec3, radius: f64, cfg: &AngleConfig) -> Option<(f64, f64)> {
    let offset = angular_offset(ray, point).ok()?;
    let distance = point.distance(ray.origin);
    if cfg.use_extent && radius > 0.0 {
        let half_angle = (radius / distance).min(1.0).asin().to_degrees();
        return Some(((offset - half_angle).max(0.0), distance));
    }
    Some((offset, distance))
}

/// All objects inside the modality's cone, tier-annotated, in [`rank_order`].
pub fn resolve_ray(
    ray: &Ray,
    modality: ModalityKind,
    scene: &SceneGraph,
    cfg: &AngleConfig,
) -> Vec<PossibleObject> {
    let (range, high) = cfg.bounds(modality);
    let mut hits: Vec<PossibleObject> = scene
        .objects()
        .iter()
        .filter_map(|obj| {
            let (offset, distance) = effective_offset(ray, obj.position, obj.bounding_radius, cfg)?;
            (offset <= range + BOUNDARY_EPSILON_DEG).then(|| PossibleObject {
                object_id: obj.id.clone(),
                modality,
                offset,
                tier: if offset <= high + BOUNDARY_EPSILON_DEG { Tier::High } else { Tier::Low },
                distance,
            })
        })
        .collect();
    hits.sort_by(rank_order);
    hits
}

fn better(a: &PossibleObject, b: &PossibleObject) -> bool {
    a.tier
        .cmp(&b.tier)
        .then(a.offset.total_cmp(&b.offset))
        .then(a.modality.cmp(&b.modality))
        == Ordering::Less
}

/// Union of the gaze cone and every extended finger's cone; one entry per object.
pub fn resolve_snapshot(snapshot: &Snapshot, scene: &SceneGraph, cfg: &AngleConfig) -> Vec<PossibleObject> {
    let mut best: HashMap<String, PossibleObject> = HashMap::new();
    let rays = std::iter::once((ModalityKind::Gaze, &snapshot.gaze))
        .chain(snapshot.fingers.iter().map(|(k, r)| (*k, r)));
    for (modality, ray) in rays {
        for hit in resolve_ray(ray, modality, scene, cfg) {
            match best.get(&hit.object_id) {
                Some(existing) if !better(&hit, existing) => {}
                _ => {
                    best.insert(hit.object_id.clone(), hit);
                }
            }
        }
    }
    let mut merged: Vec<PossibleObject> = best.into_values().collect();
    merged.sort_by(rank_order);
    merged
}
