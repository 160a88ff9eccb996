use std::path::Path;

use super::HarnessError;

const EARTH_RADIUS: f64 = 6_378_137.0;

/// Equirectangular projection about a reference point: x east, y north, in
/// metres. Adequate over a test track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTangentPlane {
    pub lat0: f64,
    pub lon0: f64,
}

impl LocalTangentPlane {
    pub fn new(lat0: f64, lon0: f64) -> Self {
        LocalTangentPlane { lat0, lon0 }
    }

    pub fn to_local(&self, lat: f64, lon: f64) -> (f64, f64) {
        let x = EARTH_RADIUS * (lon - self.lon0).to_radians() * self.lat0.to_radians().cos();
        let y = EARTH_RADIUS * (lat - self.lat0).to_radians();
        (x, y)
    }

    pub fn to_geodetic(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.lat0 + (y / EARTH_RADIUS).to_degrees();
        let lon = self.lon0 + (x / (EARTH_RADIUS * self.lat0.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaypointFormat {
    /// `x, y` in local metres.
    #[default]
    Local,
    /// `lat, lon` in degrees, projected about the first waypoint.
    LatLon,
}

impl WaypointFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "local" => Some(WaypointFormat::Local),
            "latlon" => Some(WaypointFormat::LatLon),
            _ => None,
        }
    }
}

/// Parses a waypoint list: one point per line, two numbers separated by a
/// comma or whitespace; blank lines and `#` comments are skipped.
pub fn parse_waypoints(text: &str, format: WaypointFormat, origin: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = || HarnessError::Invalid(format!("{origin}:{}: expected two numbers, found `{line}`", idx + 1));
        if fields.len() != 2 {
            return Err(bad());
        }
        let a: f64 = fields[0].parse().map_err(|_| bad())?;
        let b: f64 = fields[1].parse().map_err(|_| bad())?;
        if !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        raw.push((a, b));
    }
    Ok(match format {
        WaypointFormat::Local => raw,
        WaypointFormat::LatLon => {
            let Some(&(lat0, lon0)) = raw.first() else { return Ok(raw) };
            let ltp = LocalTangentPlane::new(lat0, lon0);
            raw.into_iter().map(|(lat, lon)| ltp.to_local(lat, lon)).collect()
        }
    })
}

pub fn read_waypoints(path: &Path, format: WaypointFormat) -> Result<Vec<(f64, f64)>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_waypoints(&text, format, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_round_trip() {
        let ltp = LocalTangentPlane::new(40.0, -83.0);
        let (x, y) = ltp.to_local(40.001, -82.999);
        let (lat, lon) = ltp.to_geodetic(x, y);
        assert!((lat - 40.001).abs() < 1e-12 && (lon + 82.999).abs() < 1e-12);
        // one millidegree of latitude is about 111 m
        assert!((y - 111.32).abs() < 0.01, "{y}");
        assert!((x - 111.32 * 40f64.to_radians().cos()).abs() < 0.01, "{x}");
    }

    #[test]
    fn local_and_latlon_files() {
        let local = parse_waypoints("0, 0\n# c\n10 5\n\n20,10\n", WaypointFormat::Local, "w").unwrap();
        assert_eq!(local, vec![(0.0, 0.0), (10.0, 5.0), (20.0, 10.0)]);
        let geo = parse_waypoints("40.0, -83.0\n40.0, -82.999\n", WaypointFormat::LatLon, "w").unwrap();
        assert_eq!(geo[0], (0.0, 0.0));
        assert!(geo[1].0 > 85.0 && geo[1].1.abs() < 1e-9);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_waypoints("0,0\n1,2,3\n", WaypointFormat::Local, "w.txt").unwrap_err().to_string();
        assert!(err.contains("w.txt:2"), "{err}");
    }
}
