//! GeoJSON flow-map export: dropzone points, average-position target
//! clusters, and geodesic connecting lines.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{haversine_km, spherical_centroid_unweighted, GeoError, GeoPoint};
use crate::affinity::AttackGraph;
use crate::enrich::EnrichmentStore;

/// How a qualifying dropzone's targets are grouped into circles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    /// Group by the target's country (the map's country-level perspective).
    Country,
    /// Group by 5-degree grid cell.
    Grid5,
}

/// Flow-map policy knobs.
#[derive(Debug, Clone)]
pub struct ClusterPolicy {
    /// Only dropzones with strictly more than this many unique targets are
    /// drawn ("over 500 target IPs").
    pub degree_threshold: u64,
    pub key: GroupKey,
    /// Circle radius is `radius_scale * cluster size`.
    pub radius_scale: f64,
}

impl Default for ClusterPolicy {
    fn default() -> Self {
        ClusterPolicy {
            degree_threshold: 500,
            key: GroupKey::Country,
            radius_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub qualifying_dropzones: u64,
    pub dropzones_below_threshold: u64,
    pub dropzones_missing_geo: u64,
    pub targets_missing_geo: u64,
    pub targets_rendered: u64,
    /// Clusters whose spherical mean was undefined; rendered at their
    /// lowest member address instead.
    pub degenerate_clusters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Dropzone {
        address: Ipv4Addr,
        degree: u64,
    },
    TargetCluster {
        cluster_id: String,
        dropzone: Ipv4Addr,
        key: String,
        size: u64,
        radius: f64,
    },
    Flow {
        dropzone: Ipv4Addr,
        cluster_id: String,
        distance_km: f64,
    },
}

/// One map feature; points carry a single coordinate, lines carry two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub kind: FeatureKind,
    pub coordinates: Vec<GeoPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowMapDocument {
    pub features: Vec<Feature>,
    pub diagnostics: FlowDiagnostics,
}

impl FlowMapDocument {
    /// Standard GeoJSON FeatureCollection; coordinates are
    /// `[longitude, latitude]` per RFC 7946. Diagnostics ride along as a
    /// foreign member.
    pub fn to_geojson(&self) -> Value {
        let coords = |p: &GeoPoint| json!([p.longitude, p.latitude]);
        let features: Vec<Value> = self
            .features
            .iter()
            .map(|f| {
                let (geometry, properties) = match &f.kind {
                    FeatureKind::Dropzone { address, degree } => (
                        json!({"type": "Point", "coordinates": coords(&f.coordinates[0])}),
                        json!({"kind": "dropzone", "address": address.to_string(), "degree": degree}),
                    ),
                    FeatureKind::TargetCluster {
                        cluster_id,
                        dropzone,
                        key,
                        size,
                        radius,
                    } => (
                        json!({"type": "Point", "coordinates": coords(&f.coordinates[0])}),
                        json!({
                            "kind": "target-cluster",
                            "cluster_id": cluster_id,
                            "dropzone": dropzone.to_string(),
                            "key": key,
                            "size": size,
                            "radius": radius,
                        }),
                    ),
                    FeatureKind::Flow {
                        dropzone,
                        cluster_id,
                        distance_km,
                    } => (
                        json!({
                            "type": "LineString",
                            "coordinates": f.coordinates.iter().map(coords).collect::<Vec<_>>(),
                        }),
                        json!({
                            "kind": "flow",
                            "dropzone": dropzone.to_string(),
                            "cluster_id": cluster_id,
                            "distance_km": distance_km,
                        }),
                    ),
                };
                json!({"type": "Feature", "geometry": geometry, "properties": properties})
            })
            .collect();
        json!({
            "type": "FeatureCollection",
            "features": features,
            "diagnostics": serde_json::to_value(self.diagnostics).expect("diagnostics serialize"),
        })
    }
}

fn grid5_key(p: GeoPoint) -> String {
    let lat_cell = (p.latitude / 5.0).floor() as i32;
    let lon_cell = (p.longitude / 5.0).floor() as i32;
    format!("g{lat_cell}:{lon_cell}")
}

fn geo_point(store: &EnrichmentStore, addr: Ipv4Addr) -> Option<GeoPoint> {
    let rec = store.geo(addr)?;
    GeoPoint::new(rec.latitude, rec.longitude).ok()
}

/// Renders the flow map: for each dropzone with more than
/// `policy.degree_threshold` unique targets, geolocated targets are grouped
/// by the policy key, each group becomes a circle at its spherical centroid
/// sized by cardinality, and a geodesic line connects the dropzone to it.
pub fn flow_map(
    graph: &AttackGraph,
    store: &EnrichmentStore,
    policy: &ClusterPolicy,
) -> FlowMapDocument {
    let mut doc = FlowMapDocument::default();

    for (&dropzone, targets) in graph.dropzone_targets() {
        if (targets.len() as u64) <= policy.degree_threshold {
            doc.diagnostics.dropzones_below_threshold += 1;
            continue;
        }
        let dz_point = match geo_point(store, dropzone) {
            Some(p) => p,
            None => {
                doc.diagnostics.dropzones_missing_geo += 1;
                continue;
            }
        };
        let country_of = |addr: Ipv4Addr| {
            store
                .geo(addr)
                .map(|g| g.country.clone())
                .unwrap_or_else(|| "??".to_string())
        };
        // Key -> members, BTreeMaps keep both group order and member order
        // deterministic.
        let mut groups: BTreeMap<String, Vec<(Ipv4Addr, GeoPoint)>> = BTreeMap::new();
        for &target in targets {
            match geo_point(store, target) {
                Some(p) => {
                    let key = match policy.key {
                        GroupKey::Country => country_of(target),
                        GroupKey::Grid5 => grid5_key(p),
                    };
                    groups.entry(key).or_default().push((target, p));
                }
                None => doc.diagnostics.targets_missing_geo += 1,
            }
        }
        if groups.is_empty() {
            continue;
        }
        doc.diagnostics.qualifying_dropzones += 1;
        doc.features.push(Feature {
            kind: FeatureKind::Dropzone {
                address: dropzone,
                degree: targets.len() as u64,
            },
            coordinates: vec![dz_point],
        });
        for (key, members) in groups {
            let points: Vec<GeoPoint> = members.iter().map(|(_, p)| *p).collect();
            let center = match spherical_centroid_unweighted(&points) {
                Ok(c) => c,
                Err(GeoError::DegenerateCentroid) => {
                    doc.diagnostics.degenerate_clusters += 1;
                    members[0].1
                }
                Err(_) => unreachable!("nonempty validated points"),
            };
            let size = members.len() as u64;
            doc.diagnostics.targets_rendered += size;
            let cluster_id = format!("{dropzone}|{key}");
            doc.features.push(Feature {
                kind: FeatureKind::TargetCluster {
                    cluster_id: cluster_id.clone(),
                    dropzone,
                    key,
                    size,
                    radius: policy.radius_scale * size as f64,
                },
                coordinates: vec![center],
            });
            doc.features.push(Feature {
                kind: FeatureKind::Flow {
                    dropzone,
                    cluster_id,
                    distance_km: haversine_km(dz_point, center),
                },
                coordinates: vec![dz_point, center],
            });
        }
    }
    doc
}
