use serde::{Deserialize, Serialize};

use super::{GeoError, SitePoint};

/// Meters per degree of latitude on a spherical earth.
pub const METERS_PER_DEGREE: f64 = 111_320.0;
pub const DEFAULT_SIDE_M: f64 = 150.0;
/// Latitudes at or beyond this are rejected: the longitude span blows up
/// as cos(lat) approaches zero.
pub const MAX_ABS_LATITUDE: f64 = 85.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBounds {
    pub fn center(&self) -> (f64, f64) {
        ((self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0)
    }

    /// North-south extent in meters, using the same spherical constant.
    pub fn height_m(&self) -> f64 {
        (self.lat_max - self.lat_min) * METERS_PER_DEGREE
    }

    /// East-west extent in meters at the center latitude.
    pub fn width_m(&self) -> f64 {
        let (lat, _) = self.center();
        (self.lon_max - self.lon_min) * METERS_PER_DEGREE * lat.to_radians().cos()
    }
}

/// Square of `side_m` meters centered on the site, as a lat/lon box.
pub fn square_bounds(p: &SitePoint, side_m: f64) -> Result<GeoBounds, GeoError> {
    if !(side_m > 0.0) || !side_m.is_finite() {
        return Err(GeoError::BadSide(side_m));
    }
    if p.lat.abs() >= MAX_ABS_LATITUDE {
        return Err(GeoError::PolarLatitude(p.lat));
    }
    let half = side_m / 2.0;
    let dlat = half / METERS_PER_DEGREE;
    let dlon = half / (METERS_PER_DEGREE * p.lat.to_radians().cos());
    Ok(GeoBounds { lat_min: p.lat - dlat, lat_max: p.lat + dlat, lon_min: p.lon - dlon, lon_max: p.lon + dlon })
}
