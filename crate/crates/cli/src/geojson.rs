//! GeoJSON export of a plan.

use log::warn;
use serde_json::{json, Value};

use bikelane::model::RoadNetwork;

/// One `LineString` feature per segment, `selected` set for the plan's
/// segments. Coordinates are `[lon, lat]`; segments without geometry get a
/// null geometry.
pub fn export(network: &RoadNetwork, selected: &[usize]) -> Value {
    let mut flag = vec![false; network.len()];
    for &i in selected {
        flag[i] = true;
    }
    let mut missing = 0;
    let features: Vec<Value> = network
        .segments()
        .iter()
        .zip(&flag)
        .map(|(seg, &sel)| {
            let geometry = match &seg.geometry {
                Some(pts) => json!({
                    "type": "LineString",
                    "coordinates": pts.iter().map(|&(lon, lat)| json!([lon, lat])).collect::<Vec<_>>(),
                }),
                None => {
                    missing += 1;
                    Value::Null
                }
            };
            json!({
                "type": "Feature",
                "properties": { "id": seg.id, "selected": sel },
                "geometry": geometry,
            })
        })
        .collect();
    if missing > 0 {
        warn!("{missing} segments have no geometry and were exported without coordinates");
    }
    json!({ "type": "FeatureCollection", "features": features })
}
