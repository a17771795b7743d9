use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{NodeId, NodePair};

use super::{OverlayError, OverlayState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
}

/// Estimates the QoS from `f1` to `f2` in different groups by series
/// composition `f1 -> L1 -> L2 -> f2`: latencies add, bandwidth is the
/// bottleneck. A segment disappears when its endpoints coincide (a leader
/// endpoint). Within one group the direct measurement is returned.
pub fn estimate_qos(
    f1: &NodeId,
    f2: &NodeId,
    overlay: &OverlayState,
    measurements: &BTreeMap<NodePair, Measurement>,
) -> Result<Measurement, OverlayError> {
    let l1 = overlay.leader_of(f1).ok_or_else(|| OverlayError::NodeUnknown(f1.clone()))?;
    let l2 = overlay.leader_of(f2).ok_or_else(|| OverlayError::NodeUnknown(f2.clone()))?;
    let get = |a: &NodeId, b: &NodeId| {
        measurements
            .get(&(a.clone(), b.clone()))
            .copied()
            .ok_or_else(|| OverlayError::SegmentMissing(a.clone(), b.clone()))
    };
    if l1 == l2 {
        return get(f1, f2);
    }
    let mut hops = Vec::with_capacity(3);
    if f1 != l1 {
        hops.push(get(f1, l1)?);
    }
    hops.push(get(l1, l2)?);
    if f2 != l2 {
        hops.push(get(l2, f2)?);
    }
    let mut total = hops[0];
    for h in &hops[1..] {
        total.latency_ms += h.latency_ms;
        total.bandwidth_mbps = total.bandwidth_mbps.min(h.bandwidth_mbps);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn two_groups() -> OverlayState {
        let mut o = OverlayState::new();
        o.leaders = BTreeSet::from(["L1".into(), "L2".into()]);
        o.follower_of.insert("f1".into(), "L1".into());
        o.follower_of.insert("f2".into(), "L2".into());
        o.follower_of.insert("g1".into(), "L1".into());
        o
    }

    fn m(lat: f64, bw: f64) -> Measurement {
        Measurement {
            latency_ms: lat,
            bandwidth_mbps: bw,
        }
    }

    fn segments() -> BTreeMap<NodePair, Measurement> {
        BTreeMap::from([
            (("f1".into(), "L1".into()), m(10.0, 50.0)),
            (("L1".into(), "L2".into()), m(20.0, 30.0)),
            (("L2".into(), "f2".into()), m(15.0, 40.0)),
            (("f1".into(), "g1".into()), m(3.0, 90.0)),
        ])
    }

    #[test]
    fn three_segments() {
        let est = estimate_qos(&"f1".into(), &"f2".into(), &two_groups(), &segments()).unwrap();
        assert_eq!(est, m(45.0, 30.0));
    }

    #[test]
    fn leader_endpoint_drops_segment() {
        let est = estimate_qos(&"L1".into(), &"f2".into(), &two_groups(), &segments()).unwrap();
        assert_eq!(est, m(35.0, 30.0));
    }

    #[test]
    fn same_group_uses_direct_value() {
        let est = estimate_qos(&"f1".into(), &"g1".into(), &two_groups(), &segments()).unwrap();
        assert_eq!(est, m(3.0, 90.0));
    }

    #[test]
    fn missing_segment() {
        let err = estimate_qos(&"f2".into(), &"f1".into(), &two_groups(), &segments()).unwrap_err();
        assert!(matches!(err, OverlayError::SegmentMissing(..)));
    }
}
