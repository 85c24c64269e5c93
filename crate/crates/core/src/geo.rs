//! Geographic coordinates: unit-sphere embedding and great-circle distance.
//!
//! Coordinates are stored in degrees and converted to radians only inside the
//! functions below. The Earth is modelled as a sphere.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius in miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat_deg) || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(Error::CoordinateRange {
                lat: lat_deg,
                lon: lon_deg,
            });
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    pub fn to_unit_vector(&self) -> GeoVector {
        geo_to_unit_vector(*self)
    }
}

/// Point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GeoVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Straight-line (chord) distance through the sphere.
    pub fn chord(&self, other: &GeoVector) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// `(cos θ cos φ, cos θ sin φ, sin θ)` for latitude θ and longitude φ.
pub fn geo_to_unit_vector(p: GeoPoint) -> GeoVector {
    let theta = p.lat_deg.to_radians();
    let phi = p.lon_deg.to_radians();
    let (sin_theta, cos_theta) = theta.sin_cos();
    let (sin_phi, cos_phi) = phi.sin_cos();
    GeoVector {
        x: cos_theta * cos_phi,
        y: cos_theta * sin_phi,
        z: sin_theta,
    }
}

/// Central angle between two points in radians (haversine form).
pub fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat_deg.to_radians();
    let lat2 = b.lat_deg.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    // atan2 stays well conditioned near antipodes where asin does not.
    2.0 * h.sqrt().atan2((1.0 - h).sqrt())
}

pub fn haversine_miles(a: GeoPoint, b: GeoPoint) -> f64 {
    central_angle(a, b) * EARTH_RADIUS_MILES
}
