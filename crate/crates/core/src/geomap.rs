//! Place extraction, coordinate resolution, radius filtering and map output.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};

const BUNDLED_GAZETTEER: &str = include_str!("../data/cape_town_gazetteer.csv");

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Cape Town city centre, the default map centre.
pub const DEFAULT_CENTER: LatLon = LatLon {
    lat: -33.9249,
    lon: 18.4241,
};
pub const DEFAULT_RADIUS_KM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn in_bounds(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance on a sphere of radius 6371 km.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Lookup table of place names. Names are lowercase and unique.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    by_name: HashMap<String, usize>,
    /// word sequence of each entry name, for matching
    phrases: Vec<Vec<String>>,
    longest: usize,
}

/// Lowercase words: maximal runs of alphanumerics, apostrophes and hyphens.
fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-'))
        .map(|w| w.trim_matches(|c: char| c == '\'' || c == '-'))
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

impl Gazetteer {
    pub fn from_entries(entries: Vec<GazetteerEntry>) -> Result<Self> {
        let mut g = Gazetteer::default();
        for (row, e) in entries.into_iter().enumerate() {
            g.push(row + 1, e)?;
        }
        Ok(g)
    }

    fn push(&mut self, row: usize, mut entry: GazetteerEntry) -> Result<()> {
        let fail = |message: String| Error::Gazetteer { row, message };
        entry.name = entry.name.trim().to_lowercase();
        let phrase = words(&entry.name);
        if phrase.is_empty() {
            return Err(fail("empty place name".into()));
        }
        if !(-90.0..=90.0).contains(&entry.lat) {
            return Err(fail(format!("latitude {} outside [-90, 90]", entry.lat)));
        }
        if !(-180.0..=180.0).contains(&entry.lon) {
            return Err(fail(format!("longitude {} outside [-180, 180]", entry.lon)));
        }
        if self.by_name.contains_key(&entry.name) {
            return Err(fail(format!("duplicate name `{}`", entry.name)));
        }
        self.longest = self.longest.max(phrase.len());
        self.by_name.insert(entry.name.clone(), self.entries.len());
        self.phrases.push(phrase);
        self.entries.push(entry);
        Ok(())
    }

    /// The bundled Cape Town suburb list.
    pub fn bundled() -> Self {
        load_gazetteer(BUNDLED_GAZETTEER.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&GazetteerEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses headerless `name,lat,lon` rows.
pub fn load_gazetteer<R: Read>(source: R) -> Result<Gazetteer> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut g = Gazetteer::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let fail = |message: String| Error::Gazetteer { row: row_no, message };
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != 3 {
            return Err(fail(format!("expected 3 fields (name,lat,lon), found {}", row.len())));
        }
        let coord = |k: usize, what: &str| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("{what} `{}` is not a number", &row[k])))
        };
        let entry = GazetteerEntry {
            name: row[0].to_string(),
            lat: coord(1, "latitude")?,
            lon: coord(2, "longitude")?,
        };
        g.push(row_no, entry)?;
    }
    Ok(g)
}

/// Gazetteer names mentioned in `text`, in order of first appearance.
///
/// Case-insensitive whole-word matching; at each position the longest name wins
/// and the words it covers cannot start another match.
pub fn extract_locations(text: &str, gazetteer: &Gazetteer) -> Vec<String> {
    let ws = words(text);
    let mut found: Vec<String> = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let mut best: Option<(usize, usize)> = None;
        for (idx, phrase) in gazetteer.phrases.iter().enumerate() {
            let n = phrase.len();
            if n > best.map_or(0, |(_, len)| len) && i + n <= ws.len() && ws[i..i + n] == phrase[..] {
                best = Some((idx, n));
            }
        }
        match best {
            Some((idx, n)) => {
                let name = &gazetteer.entries[idx].name;
                if !found.contains(name) {
                    found.push(name.clone());
                }
                i += n;
            }
            None => i += 1,
        }
    }
    found
}

#[derive(Debug, thiserror::Error)]
pub enum GeocodeError {
    #[error("request failed: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no results")]
    NotFound,
}

/// HTTP geocoder: `GET <base>?q=<name>&format=json`, first result's `lat`/`lon` strings.
#[derive(Debug)]
pub struct RemoteGeocoder {
    base_url: String,
    agent: ureq::Agent,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl RemoteGeocoder {
    pub const TIMEOUT: Duration = Duration::from_secs(5);

    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_min_interval(base_url, Duration::from_secs(1))
    }

    /// `min_interval` spaces consecutive requests.
    pub fn with_min_interval(base_url: impl Into<String>, min_interval: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Self::TIMEOUT))
            .http_status_as_error(false)
            .build();
        Self {
            base_url: base_url.into(),
            agent: ureq::Agent::new_with_config(config),
            min_interval,
            last_request: Mutex::new(None),
        }
    }

    pub fn lookup(&self, name: &str) -> std::result::Result<LatLon, GeocodeError> {
        {
            let mut last = self.last_request.lock().expect("rate limiter lock");
            if let Some(prev) = *last {
                let wait = self.min_interval.saturating_sub(prev.elapsed());
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            *last = Some(Instant::now());
        }
        let mut resp = self
            .agent
            .get(&self.base_url)
            .query("q", name)
            .query("format", "json")
            .call()
            .map_err(|e| GeocodeError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(GeocodeError::Status(resp.status().as_u16()));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GeocodeError::Transport(e.to_string()))?;
        parse_geocoder_response(&body)
    }
}

/// Extracts the first result's decimal-string `lat` and `lon`.
pub fn parse_geocoder_response(body: &str) -> std::result::Result<LatLon, GeocodeError> {
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| GeocodeError::Malformed(e.to_string()))?;
    let first = match &value {
        serde_json::Value::Array(items) => items.first().ok_or(GeocodeError::NotFound)?,
        _ => return Err(GeocodeError::Malformed("expected a JSON array".into())),
    };
    let field = |k: &str| -> std::result::Result<f64, GeocodeError> {
        let v = first.get(k).ok_or_else(|| GeocodeError::Malformed(format!("missing `{k}`")))?;
        let parsed = match v {
            serde_json::Value::String(s) => s.trim().parse::<f64>().ok(),
            serde_json::Value::Number(n) => n.as_f64(),
            _ => None,
        };
        parsed.ok_or_else(|| GeocodeError::Malformed(format!("`{k}` is not a decimal")))
    };
    let p = LatLon::new(field("lat")?, field("lon")?);
    if !p.in_bounds() {
        return Err(GeocodeError::Malformed(format!("coordinate out of range: {p:?}")));
    }
    Ok(p)
}

/// Gazetteer-first coordinate lookup with an optional cached remote fallback.
#[derive(Debug)]
pub struct Resolver {
    gazetteer: Gazetteer,
    remote: Option<RemoteGeocoder>,
    cache: Mutex<HashMap<String, LatLon>>,
}

impl Resolver {
    pub fn new(gazetteer: Gazetteer, remote: Option<RemoteGeocoder>) -> Self {
        Self {
            gazetteer,
            remote,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    /// Remote failures degrade to `None` with a logged warning.
    pub fn resolve(&self, name: &str) -> Option<LatLon> {
        if let Some(e) = self.gazetteer.get(name) {
            return Some(LatLon::new(e.lat, e.lon));
        }
        let remote = self.remote.as_ref()?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(name) {
            return Some(*hit);
        }
        match remote.lookup(name) {
            Ok(p) => {
                self.cache.lock().expect("cache lock").insert(name.to_owned(), p);
                Some(p)
            }
            Err(e) => {
                log::warn!("geocoding `{name}` failed: {e}");
                None
            }
        }
    }
}

/// One-shot form of [`Resolver::resolve`].
pub fn resolve_coordinates(name: &str, gazetteer: &Gazetteer, remote: Option<&RemoteGeocoder>) -> Option<LatLon> {
    if let Some(e) = gazetteer.get(name) {
        return Some(LatLon::new(e.lat, e.lon));
    }
    remote.and_then(|r| r.lookup(name).map_err(|e| log::warn!("geocoding `{name}` failed: {e}")).ok())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoPoint {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Relevant posts naming this place.
    pub mentions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapDocument {
    pub center: LatLon,
    pub radius_km: f64,
    pub points: Vec<GeoPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapSummary {
    pub relevant: usize,
    pub mentions: usize,
    pub resolved: usize,
    pub within_radius: usize,
    pub unresolved_dropped: usize,
    pub outside_dropped: usize,
}

/// Extract → resolve → drop unresolved → drop beyond radius → count per place.
/// Points are ordered by name.
pub fn build_map(relevant: &[TweetRecord], resolver: &Resolver, center: LatLon, radius_km: f64) -> (MapDocument, MapSummary) {
    let mut summary = MapSummary {
        relevant: relevant.len(),
        ..MapSummary::default()
    };
    let mut counts: BTreeMap<String, (LatLon, usize)> = BTreeMap::new();
    let mut seen: HashMap<String, Option<LatLon>> = HashMap::new();
    for tweet in relevant {
        for name in extract_locations(&tweet.text, resolver.gazetteer()) {
            summary.mentions += 1;
            let coord = *seen.entry(name.clone()).or_insert_with(|| resolver.resolve(&name));
            let Some(p) = coord else {
                summary.unresolved_dropped += 1;
                continue;
            };
            summary.resolved += 1;
            if haversine_km(center, p) > radius_km {
                summary.outside_dropped += 1;
                continue;
            }
            summary.within_radius += 1;
            counts.entry(name).or_insert((p, 0)).1 += 1;
        }
    }
    let points = counts
        .into_iter()
        .map(|(name, (p, mentions))| GeoPoint {
            name,
            lat: p.lat,
            lon: p.lon,
            mentions,
        })
        .collect();
    (
        MapDocument {
            center,
            radius_km,
            points,
        },
        summary,
    )
}

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: Geometry,
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct Properties {
    name: String,
    mentions: usize,
}

/// Compact GeoJSON FeatureCollection, one Point per place, coordinates `[lon, lat]`.
///
/// Key order is fixed (`type`, `features`; `type`, `geometry`, `properties`).
/// `<` is written as `<` so the bytes can be embedded in HTML verbatim.
pub fn emit_geojson(map: &MapDocument) -> Vec<u8> {
    let fc = FeatureCollection {
        kind: "FeatureCollection".into(),
        features: map
            .points
            .iter()
            .map(|p| Feature {
                kind: "Feature".into(),
                geometry: Geometry {
                    kind: "Point".into(),
                    coordinates: [p.lon, p.lat],
                },
                properties: Properties {
                    name: p.name.clone(),
                    mentions: p.mentions,
                },
            })
            .collect(),
    };
    let json = serde_json::to_string(&fc).expect("plain structs serialize");
    json.replace('<', "\\u003c").into_bytes()
}

/// Reads points back from [`emit_geojson`] output.
pub fn parse_geojson(bytes: &[u8]) -> Result<Vec<GeoPoint>> {
    let fc: FeatureCollection = serde_json::from_slice(bytes).map_err(|e| Error::GeoJson(e.to_string()))?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::GeoJson(format!("top-level type `{}`", fc.kind)));
    }
    fc.features
        .into_iter()
        .map(|f| {
            if f.geometry.kind != "Point" {
                return Err(Error::GeoJson(format!("geometry type `{}`", f.geometry.kind)));
            }
            Ok(GeoPoint {
                name: f.properties.name,
                lat: f.geometry.coordinates[1],
                lon: f.geometry.coordinates[0],
                mentions: f.properties.mentions,
            })
        })
        .collect()
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub const LEAFLET_CSS: &str = "https://unpkg.com/leaflet@1.9.4/dist/leaflet.css";
pub const LEAFLET_JS: &str = "https://unpkg.com/leaflet@1.9.4/dist/leaflet.js";

/// Self-contained HTML point map. Marker radius grows with mention count.
/// Without scripts, the embedded GeoJSON is shown as a plain listing.
pub fn emit_html_map(map: &MapDocument) -> Vec<u8> {
    let geojson = String::from_utf8(emit_geojson(map)).expect("GeoJSON is UTF-8");
    let c = map.center;
    let r = map.radius_km;
    let listing = html_escape(&geojson);
    format!(
        r##"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Hijacking incident point map</title>
<link rel="stylesheet" href="{LEAFLET_CSS}">
<style>html,body{{height:100%;margin:0}}#map{{height:100%}}pre{{white-space:pre-wrap;margin:1em}}</style>
</head>
<body>
<div id="map"></div>
<noscript><pre id="points-listing">{listing}</pre></noscript>
<script type="application/geo+json" id="points">{geojson}</script>
<script src="{LEAFLET_JS}"></script>
<script>
(function () {{
  var data = JSON.parse(document.getElementById("points").textContent);
  if (typeof L === "undefined") {{
    var pre = document.createElement("pre");
    pre.textContent = JSON.stringify(data, null, 2);
    document.body.replaceChild(pre, document.getElementById("map"));
    return;
  }}
  var map = L.map("map").setView([{lat}, {lon}], 10);
  L.tileLayer("https://{{s}}.tile.openstreetmap.org/{{z}}/{{x}}/{{y}}.png", {{
    maxZoom: 18,
    attribution: "&copy; OpenStreetMap contributors"
  }}).addTo(map);
  L.circle([{lat}, {lon}], {{radius: {radius_m}, fill: false, weight: 1}}).addTo(map);
  L.geoJSON(data, {{
    pointToLayer: function (f, latlng) {{
      return L.circleMarker(latlng, {{radius: 4 + 3 * Math.sqrt(f.properties.mentions), color: "#c0392b"}});
    }},
    onEachFeature: function (f, layer) {{
      layer.bindPopup(f.properties.name + ": " + f.properties.mentions);
    }}
  }}).addTo(map);
}})();
</script>
</body>
</html>
"##,
        lat = c.lat,
        lon = c.lon,
        radius_m = r * 1000.0,
    )
    .into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz(rows: &str) -> Gazetteer {
        load_gazetteer(rows.as_bytes()).unwrap()
    }

    fn tweet(text: &str) -> TweetRecord {
        TweetRecord {
            id: text.into(),
            text: text.into(),
            created_at: "2022-03-01T08:00:00Z".into(),
            label: Some(1),
        }
    }

    #[test]
    fn gazetteer_parsing() {
        let g = gaz("Claremont,-33.98,18.46\n");
        assert_eq!(g.entries(), &[GazetteerEntry { name: "claremont".into(), lat: -33.98, lon: 18.46 }]);
        assert!(gaz("").is_empty());
        match load_gazetteer("a,1,1\nx,95,0\n".as_bytes()) {
            Err(Error::Gazetteer { row: 2, message }) => assert!(message.contains("latitude")),
            other => panic!("{other:?}"),
        }
        assert!(load_gazetteer("x,0,181".as_bytes()).is_err());
        assert!(load_gazetteer("x,0".as_bytes()).is_err());
        assert!(load_gazetteer("x,abc,0".as_bytes()).is_err());
        assert!(load_gazetteer("x,1,1\nX,2,2".as_bytes()).is_err());
        assert_eq!(Gazetteer::bundled().len(), 44);
    }

    #[test]
    fn extraction() {
        let g = gaz("claremont,-33.98,18.46\nkhayelitsha,-34.04,18.67\n");
        assert_eq!(extract_locations("Attempted hijacking in Claremont this morning", &g), ["claremont"]);
        assert!(extract_locations("nothing to see", &g).is_empty());
        assert!(extract_locations("claremonts are not claremont-ish", &g).is_empty());
        assert_eq!(extract_locations("Claremont, then CLAREMONT again", &g), ["claremont"]);
    }

    #[test]
    fn longest_match_wins() {
        let g = gaz("cape,0,0\ncape town,1,1\ntown,2,2\n");
        assert_eq!(extract_locations("hijacking in cape town today", &g), ["cape town"]);
        assert_eq!(extract_locations("cape point", &g), ["cape"]);
    }

    #[test]
    fn haversine_values() {
        let a = LatLon::new(0.0, 0.0);
        assert_eq!(haversine_km(a, a), 0.0);
        let reference = std::f64::consts::PI / 180.0 * 6371.0;
        let d = haversine_km(a, LatLon::new(0.0, 1.0));
        assert!((d - reference).abs() < 1e-9);
        assert!((d - 111.195).abs() < 0.001);
        let (p, q) = (LatLon::new(-33.9, 18.4), LatLon::new(51.5, -0.1));
        assert_eq!(haversine_km(p, q), haversine_km(q, p));
    }

    #[test]
    fn resolution_without_remote() {
        let g = gaz("claremont,-33.98,18.46\n");
        assert_eq!(resolve_coordinates("claremont", &g, None), Some(LatLon::new(-33.98, 18.46)));
        assert_eq!(resolve_coordinates("atlantis", &g, None), None);
    }

    #[test]
    fn geocoder_response_parsing() {
        let p = parse_geocoder_response(r#"[{"lat":"-33.5","lon":"18.25","display_name":"x"},{"lat":"0","lon":"0"}]"#).unwrap();
        assert_eq!(p, LatLon::new(-33.5, 18.25));
        assert!(matches!(parse_geocoder_response("[]"), Err(GeocodeError::NotFound)));
        assert!(parse_geocoder_response("{}").is_err());
        assert!(parse_geocoder_response(r#"[{"lat":"x","lon":"1"}]"#).is_err());
        assert!(parse_geocoder_response("not json").is_err());
    }

    #[test]
    fn aggregation_and_radius() {
        let center = LatLon::new(10.0, 10.0);
        let g = Gazetteer::from_entries(vec![
            GazetteerEntry { name: "claremont".into(), lat: 10.1, lon: 10.0 },
            GazetteerEntry { name: "far".into(), lat: 10.5, lon: 10.0 },
        ])
        .unwrap();
        let resolver = Resolver::new(g, None);
        let tweets: Vec<_> = (0..3).map(|i| tweet(&format!("hijacking {i} in claremont"))).collect();
        let (map, summary) = build_map(&tweets, &resolver, center, 50.0);
        assert_eq!(map.points.len(), 1);
        assert_eq!(map.points[0].mentions, 3);
        assert_eq!(summary.within_radius, 3);

        // 0.5 degrees north is ~55.6 km
        let (map, summary) = build_map(&[tweet("hijacking in far")], &resolver, center, 50.0);
        assert!(map.points.is_empty());
        assert_eq!(summary.outside_dropped, 1);

        let (map, summary) = build_map(&[tweet("nothing here")], &resolver, center, 50.0);
        assert!(map.points.is_empty());
        assert_eq!(summary.mentions, 0);
    }

    fn one_point() -> MapDocument {
        MapDocument {
            center: LatLon::new(-33.9, 18.4),
            radius_km: 50.0,
            points: vec![GeoPoint { name: "claremont".into(), lat: -33.98, lon: 18.46, mentions: 2 }],
        }
    }

    #[test]
    fn geojson_output() {
        let empty = MapDocument { points: vec![], ..one_point() };
        assert_eq!(emit_geojson(&empty), br#"{"type":"FeatureCollection","features":[]}"#);
        let bytes = emit_geojson(&one_point());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains(r#""coordinates":[18.46,-33.98]"#), "{text}");
        assert_eq!(
            text,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","geometry":{"type":"Point","coordinates":[18.46,-33.98]},"properties":{"name":"claremont","mentions":2}}]}"#
        );
        assert_eq!(parse_geojson(&bytes).unwrap(), one_point().points);
    }

    #[test]
    fn geojson_escapes_angle_brackets() {
        let mut m = one_point();
        m.points[0].name = "</script>".into();
        let bytes = emit_geojson(&m);
        assert!(!String::from_utf8_lossy(&bytes).contains('<'));
        assert_eq!(parse_geojson(&bytes).unwrap()[0].name, "</script>");
    }

    #[test]
    fn html_output() {
        let empty = MapDocument { points: vec![], ..one_point() };
        let html = String::from_utf8(emit_html_map(&empty)).unwrap();
        assert!(html.starts_with("<!DOCTYPE html>") && html.trim_end().ends_with("</html>"));
        assert!(html.contains(r#"{"type":"FeatureCollection","features":[]}"#));

        let m = one_point();
        let html = emit_html_map(&m);
        let text = String::from_utf8(html.clone()).unwrap();
        assert!(text.contains("claremont") && text.contains("-33.98") && text.contains("18.46"));
        let gj = emit_geojson(&m);
        assert!(html.windows(gj.len()).any(|w| w == gj.as_slice()));
        assert!(text.contains(LEAFLET_JS));
    }
}
