use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ApplicationSpec, LinkRequirement, ServiceId, ServiceRequirement};

/// Ranges new requirement values are drawn from, uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommitModel {
    pub inclusion: (f64, f64),
    pub hardware: (u64, u64),
    pub latency_ms: (f64, f64),
    pub bandwidth_mbps: (f64, f64),
}

impl Default for CommitModel {
    fn default() -> Self {
        Self {
            inclusion: (0.75, 1.0),
            hardware: (250, 750),
            latency_ms: (200.0, 750.0),
            bandwidth_mbps: (10.0, 30.0),
        }
    }
}

impl CommitModel {
    pub fn validate(&self) -> Result<(), String> {
        let (lo, hi) = self.inclusion;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(format!("inclusion range {:?} must lie in (0,1]", self.inclusion));
        }
        if self.hardware.0 > self.hardware.1 {
            return Err("empty hardware range".into());
        }
        for (name, (lo, hi)) in [("latency", self.latency_ms), ("bandwidth", self.bandwidth_mbps)] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(format!("bad {name} range ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }

    /// One inclusion probability per template service, ascending id.
    pub fn draw_inclusion<R: Rng + ?Sized>(&self, template: &ApplicationSpec, rng: &mut R) -> BTreeMap<ServiceId, f64> {
        template
            .services
            .keys()
            .map(|s| (s.clone(), Self::uniform(rng, self.inclusion)))
            .collect()
    }

    /// Redraws every requirement of the template services in `keep`, in
    /// ascending order: hardware per service, then latency and bandwidth
    /// per link. Links to services outside `keep` are dropped.
    fn redraw<R: Rng + ?Sized>(&self, template: &ApplicationSpec, keep: &[&ServiceId], rng: &mut R) -> ApplicationSpec {
        let mut services: BTreeMap<ServiceId, ServiceRequirement> = BTreeMap::new();
        for &s in keep {
            let mut req = template.services[s].clone();
            req.hardware = rng.random_range(self.hardware.0..=self.hardware.1);
            req.links.retain(|t, _| keep.contains(&t));
            services.insert(s.clone(), req);
        }
        for req in services.values_mut() {
            for link in req.links.values_mut() {
                *link = LinkRequirement {
                    max_latency_ms: Self::uniform(rng, self.latency_ms),
                    min_bandwidth_mbps: Self::uniform(rng, self.bandwidth_mbps),
                };
            }
        }
        let images = template
            .images
            .iter()
            .filter(|(s, _)| services.contains_key(*s))
            .map(|(s, i)| (s.clone(), i.clone()))
            .collect();
        ApplicationSpec {
            app_id: template.app_id.clone(),
            services,
            images,
        }
    }

    /// A commit with every template service.
    pub fn initial<R: Rng + ?Sized>(&self, template: &ApplicationSpec, rng: &mut R) -> ApplicationSpec {
        let all: Vec<&ServiceId> = template.services.keys().collect();
        self.redraw(template, &all, rng)
    }

    /// Each service is kept with its own probability, redrawn until at
    /// least one survives, then all its requirements are redrawn.
    pub fn generate_commit<R: Rng + ?Sized>(
        &self,
        template: &ApplicationSpec,
        inclusion: &BTreeMap<ServiceId, f64>,
        rng: &mut R,
    ) -> ApplicationSpec {
        assert!(!template.services.is_empty(), "template has no services");
        let keep = loop {
            let keep: Vec<&ServiceId> = template
                .services
                .keys()
                .filter(|s| rng.random_bool(inclusion.get(*s).copied().unwrap_or(1.0)))
                .collect();
            if !keep.is_empty() {
                break keep;
            }
        };
        self.redraw(template, &keep, rng)
    }
}

pub const DEMO_SERVICES: [&str; 8] = ["back1", "back2", "back3", "frontend", "mid1", "mid2", "mid3", "store"];

/// Eight-service demo application: a frontend hub talking to three mid
/// tier services, each backed by its own backend, all backends sharing one
/// store. Every edge carries a requirement in both directions. Values are
/// placeholders until a commit draws them.
pub fn demo_topology(app_id: &str) -> ApplicationSpec {
    let mut services: BTreeMap<String, ServiceRequirement> = DEMO_SERVICES
        .iter()
        .map(|&s| (s.to_owned(), ServiceRequirement::unconstrained(s).with_hardware(1)))
        .collect();
    let mut edge = |a: &str, b: &str| {
        for (x, y) in [(a, b), (b, a)] {
            let req = services.remove(x).expect("known service").with_link(y, f64::INFINITY, 0.0);
            services.insert(x.to_owned(), req);
        }
    };
    for i in 1..=3 {
        edge("frontend", &format!("mid{i}"));
        edge(&format!("mid{i}"), &format!("back{i}"));
        edge(&format!("back{i}"), "store");
    }
    let mut spec = ApplicationSpec::new(app_id, services.into_values()).expect("demo topology is consistent");
    spec.images = spec
        .services
        .keys()
        .map(|s| (s.clone(), format!("demo/{s}:latest")))
        .collect();
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::substream;

    #[test]
    fn topology_shape() {
        let t = demo_topology("app");
        assert_eq!(t.services.len(), 8);
        assert_eq!(t.link_requirements().count(), 18);
        assert_eq!(t.services["frontend"].links.len(), 3);
        assert_eq!(t.services["store"].links.len(), 3);
    }

    #[test]
    fn certain_inclusion_keeps_everything() {
        let t = demo_topology("app");
        let model = CommitModel::default();
        let ones = t.services.keys().map(|s| (s.clone(), 1.0)).collect();
        let c = model.generate_commit(&t, &ones, &mut substream(1, "c"));
        assert_eq!(c.services.keys().collect::<Vec<_>>(), t.services.keys().collect::<Vec<_>>());
        assert_eq!(c.link_requirements().count(), 18);
    }

    #[test]
    fn dropped_services_take_their_links() {
        let t = demo_topology("app");
        let model = CommitModel::default();
        let mut rng = substream(5, "c");
        let inclusion = model.draw_inclusion(&t, &mut rng);
        let mut saw_drop = false;
        for _ in 0..200 {
            let c = model.generate_commit(&t, &inclusion, &mut rng);
            assert!(!c.services.is_empty());
            c.check().unwrap();
            assert_eq!(c.images.len(), c.services.len());
            saw_drop |= c.services.len() < 8;
        }
        assert!(saw_drop);
    }
}
