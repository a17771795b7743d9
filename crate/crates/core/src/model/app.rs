use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::ServiceId;
use super::ModelError;

/// QoS a service needs towards one peer service (directed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRequirement {
    pub max_latency_ms: f64,
    pub min_bandwidth_mbps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequirement {
    pub service_id: ServiceId,
    /// RAM in MB.
    pub hardware: u64,
    pub software: BTreeSet<String>,
    pub iot: BTreeSet<String>,
    pub links: BTreeMap<ServiceId, LinkRequirement>,
}

impl ServiceRequirement {
    /// A service with no requirements at all.
    pub fn unconstrained(service_id: impl Into<ServiceId>) -> Self {
        Self {
            service_id: service_id.into(),
            hardware: 0,
            software: BTreeSet::new(),
            iot: BTreeSet::new(),
            links: BTreeMap::new(),
        }
    }

    pub fn with_hardware(mut self, hardware: u64) -> Self {
        self.hardware = hardware;
        self
    }

    pub fn with_software<I, S>(mut self, software: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.software = software.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_iot<I, S>(mut self, iot: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.iot = iot.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_link(mut self, target: impl Into<ServiceId>, max_latency_ms: f64, min_bandwidth_mbps: f64) -> Self {
        self.links.insert(
            target.into(),
            LinkRequirement {
                max_latency_ms,
                min_bandwidth_mbps,
            },
        );
        self
    }
}

/// Merged view of an application's compose and requirements descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub app_id: String,
    pub services: BTreeMap<ServiceId, ServiceRequirement>,
    pub images: BTreeMap<ServiceId, String>,
}

impl ApplicationSpec {
    /// Builds a spec from requirements alone, with empty image references.
    pub fn new(
        app_id: impl Into<String>,
        services: impl IntoIterator<Item = ServiceRequirement>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for s in services {
            let id = s.service_id.clone();
            if map.insert(id.clone(), s).is_some() {
                return Err(ModelError::DuplicateService(id));
            }
        }
        let images = map.keys().map(|k| (k.clone(), String::new())).collect();
        let spec = Self {
            app_id: app_id.into(),
            services: map,
            images,
        };
        spec.check()?;
        Ok(spec)
    }

    pub(crate) fn check(&self) -> Result<(), ModelError> {
        for (id, req) in &self.services {
            for target in req.links.keys() {
                if target == id {
                    return Err(ModelError::SelfLinkRequirement(id.clone()));
                }
                if !self.services.contains_key(target) {
                    return Err(ModelError::DanglingLinkTarget {
                        from: id.clone(),
                        to: target.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn service(&self, id: &str) -> Option<&ServiceRequirement> {
        self.services.get(id)
    }

    /// Sub-application over `keep`; link requirements pointing outside are dropped.
    pub fn restricted_to(&self, keep: &BTreeSet<ServiceId>) -> ApplicationSpec {
        let services = self
            .services
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, req)| {
                let mut req = req.clone();
                req.links.retain(|t, _| keep.contains(t));
                (id.clone(), req)
            })
            .collect();
        let images = self
            .images
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        ApplicationSpec {
            app_id: self.app_id.clone(),
            services,
            images,
        }
    }

    /// Every directed link requirement as `(from, to, requirement)`.
    pub fn link_requirements(&self) -> impl Iterator<Item = (&ServiceId, &ServiceId, &LinkRequirement)> {
        self.services
            .iter()
            .flat_map(|(from, req)| req.links.iter().map(move |(to, l)| (from, to, l)))
    }
}
