//! KML boundary ingestion with a WGS-84 local tangent-plane projection.

use super::boundaries::{BankingMap, RawBoundaries};
use super::geom::{v2, V2};
use super::TrackError;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Geodetic coordinate in degrees and metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geodetic {
    pub lon: f64,
    pub lat: f64,
    pub alt: f64,
}

fn ecef(g: &Geodetic) -> [f64; 3] {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let (lat, lon) = (g.lat.to_radians(), g.lon.to_radians());
    let n = WGS84_A / (1.0 - e2 * lat.sin().powi(2)).sqrt();
    [(n + g.alt) * lat.cos() * lon.cos(), (n + g.alt) * lat.cos() * lon.sin(), (n * (1.0 - e2) + g.alt) * lat.sin()]
}

/// East/north/up of `p` relative to `origin`.
pub fn to_enu(origin: &Geodetic, p: &Geodetic) -> [f64; 3] {
    let o = ecef(origin);
    let q = ecef(p);
    let d = [q[0] - o[0], q[1] - o[1], q[2] - o[2]];
    let (lat, lon) = (origin.lat.to_radians(), origin.lon.to_radians());
    let (sl, cl, so, co) = (lat.sin(), lat.cos(), lon.sin(), lon.cos());
    [-so * d[0] + co * d[1], -sl * co * d[0] - sl * so * d[1] + cl * d[2], cl * co * d[0] + cl * so * d[1] + sl * d[2]]
}

struct Line {
    name: Option<String>,
    coords: Vec<Geodetic>,
    ring: bool,
}

fn parse_coords(text: &str) -> Result<Vec<Geodetic>, TrackError> {
    text.split_whitespace()
        .map(|tok| {
            let f: Vec<&str> = tok.split(',').collect();
            let num = |i: usize| -> Result<f64, TrackError> {
                f.get(i).unwrap_or(&"0").parse().map_err(|_| TrackError::Kml {
                    element: "coordinates".into(),
                    message: format!("bad tuple `{tok}`"),
                })
            };
            if f.len() < 2 {
                return Err(TrackError::Kml { element: "coordinates".into(), message: format!("bad tuple `{tok}`") });
            }
            Ok(Geodetic { lon: num(0)?, lat: num(1)?, alt: num(2)? })
        })
        .collect()
}

/// Reads the left and right edges from a KML document. Placemarks named
/// `left` and `right` (case-insensitive) are preferred; otherwise the first
/// two line geometries are used in document order. The ENU origin is the
/// first left point.
pub fn parse_kml(text: &str) -> Result<RawBoundaries, TrackError> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| TrackError::Kml { element: "kml".into(), message: e.to_string() })?;
    let mut lines = Vec::new();
    for pm in doc.descendants().filter(|n| n.has_tag_name("Placemark")) {
        let name =
            pm.children().find(|c| c.has_tag_name("name")).and_then(|c| c.text()).map(|t| t.trim().to_lowercase());
        for geom in pm.descendants().filter(|n| n.has_tag_name("LineString") || n.has_tag_name("LinearRing")) {
            let coords =
                geom.descendants().find(|c| c.has_tag_name("coordinates")).and_then(|c| c.text()).ok_or_else(|| {
                    TrackError::Kml { element: geom.tag_name().name().into(), message: "missing <coordinates>".into() }
                })?;
            lines.push(Line {
                name: name.clone(),
                coords: parse_coords(coords)?,
                ring: geom.has_tag_name("LinearRing"),
            });
        }
    }
    let pick = |want: &str| lines.iter().position(|l| l.name.as_deref() == Some(want));
    let (li, ri) = match (pick("left"), pick("right")) {
        (Some(l), Some(r)) => (l, r),
        _ if lines.len() >= 2 => (0, 1),
        _ => {
            return Err(TrackError::Kml {
                element: "Placemark".into(),
                message: format!("need two boundary lines, found {}", lines.len()),
            })
        }
    };
    let (left, right) = (&lines[li], &lines[ri]);
    if left.coords.is_empty() || right.coords.is_empty() {
        return Err(TrackError::Kml { element: "coordinates".into(), message: "empty boundary".into() });
    }
    let origin = left.coords[0];
    let project = |l: &Line| -> Vec<V2> {
        l.coords
            .iter()
            .map(|g| {
                let e = to_enu(&origin, g);
                v2(e[0], e[1])
            })
            .collect()
    };
    let (lp, rp) = (project(left), project(right));
    let ends_meet = |p: &[V2]| p.len() > 2 && (p[0] - p[p.len() - 1]).norm() < 1e-3;
    let closed = (left.ring && right.ring) || (ends_meet(&lp) && ends_meet(&rp));
    Ok(RawBoundaries { left: lp, right: rp, closed, banking: BankingMap::flat() })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Local equirectangular approximation using the ellipsoid's meridian
    /// and prime-vertical radii at the origin latitude.
    fn equirect(o: &Geodetic, p: &Geodetic) -> (f64, f64) {
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let lat = o.lat.to_radians();
        let w = 1.0 - e2 * lat.sin().powi(2);
        let n = WGS84_A / w.sqrt();
        let m = WGS84_A * (1.0 - e2) / w.powf(1.5);
        (n * lat.cos() * (p.lon - o.lon).to_radians(), m * (p.lat - o.lat).to_radians())
    }

    #[test]
    fn enu_matches_equirectangular_near_origin() {
        let o = Geodetic { lon: -86.2353, lat: 39.7950, alt: 0.0 };
        for (dlon, dlat) in [(0.001, 0.0), (0.0, 0.002), (-0.003, 0.001), (0.0005, -0.0025)] {
            let p = Geodetic { lon: o.lon + dlon, lat: o.lat + dlat, alt: 0.0 };
            let e = to_enu(&o, &p);
            let (x, y) = equirect(&o, &p);
            assert!((e[0] - x).abs() < 0.05, "{} vs {}", e[0], x);
            assert!((e[1] - y).abs() < 0.05, "{} vs {}", e[1], y);
        }
        assert_eq!(to_enu(&o, &o), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn ring_placemarks() {
        let ring = |r_deg: f64| -> String {
            (0..=40)
                .map(|i| {
                    let a = i as f64 / 40.0 * std::f64::consts::TAU;
                    format!("{},{},0", -86.0 + r_deg * a.cos(), 39.0 + r_deg * a.sin())
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let kml = format!(
            r#"<?xml version="1.0"?><kml xmlns="http://www.opengis.net/kml/2.2"><Document>
            <Placemark><name>Right</name><LinearRing><coordinates>{}</coordinates></LinearRing></Placemark>
            <Placemark><name>Left</name><LinearRing><coordinates>{}</coordinates></LinearRing></Placemark>
            </Document></kml>"#,
            ring(0.0004),
            ring(0.0005)
        );
        let raw = parse_kml(&kml).unwrap();
        assert!(raw.closed);
        assert_eq!(raw.left[0], v2(0.0, 0.0));
        assert_eq!(raw.left.len(), 41);
    }

    #[test]
    fn malformed_kml_names_element() {
        let err = parse_kml("<kml><Placemark><LineString></LineString></Placemark></kml>").unwrap_err();
        assert!(matches!(err, TrackError::Kml { ref element, .. } if element == "LineString"));
        assert!(matches!(parse_kml("<kml"), Err(TrackError::Kml { .. })));
    }
}
