//! The two per-application descriptor files: `docker-compose.yml` and
//! `requirements.yml`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::app::{ApplicationSpec, LinkRequirement, ServiceRequirement};
use super::ids::ServiceId;
use super::ModelError;

pub const COMPOSE_FILE: &str = "docker-compose.yml";
pub const REQUIREMENTS_FILE: &str = "requirements.yml";

fn load_document(text: &[u8]) -> Result<serde_yaml::Mapping, ModelError> {
    let text = std::str::from_utf8(text).map_err(|e| ModelError::MalformedDescriptor(e.to_string()))?;
    // Going through `Value` first makes serde_yaml reject duplicate keys.
    let value: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| ModelError::MalformedDescriptor(e.to_string()))?;
    let serde_yaml::Value::Mapping(mut top) = value else {
        return Err(ModelError::MalformedDescriptor("top level is not a mapping".into()));
    };
    match top.remove("services") {
        Some(serde_yaml::Value::Mapping(services)) => Ok(services),
        Some(serde_yaml::Value::Null) => Ok(serde_yaml::Mapping::new()),
        Some(_) => Err(ModelError::MalformedDescriptor("`services` is not a mapping".into())),
        None => Err(ModelError::MalformedDescriptor("missing top-level `services` key".into())),
    }
}

fn service_key(key: &serde_yaml::Value) -> Result<ServiceId, ModelError> {
    match key {
        serde_yaml::Value::String(s) => Ok(ServiceId::new(s.clone())),
        other => Err(ModelError::MalformedDescriptor(format!("service id {other:?} is not a string"))),
    }
}

#[derive(Deserialize)]
struct ComposeService {
    #[serde(default)]
    image: Option<String>,
}

/// Parses a compose file into `service_id -> image reference`. Keys other
/// than `image` are carried by the file but never interpreted.
pub fn parse_compose(text: &[u8]) -> Result<BTreeMap<ServiceId, String>, ModelError> {
    let services = load_document(text)?;
    let mut out = BTreeMap::new();
    for (key, value) in services {
        let id = service_key(&key)?;
        let image = if value.is_null() {
            String::new()
        } else {
            let svc: ComposeService = serde_yaml::from_value(value)
                .map_err(|e| ModelError::MalformedDescriptor(format!("service `{id}`: {e}")))?;
            svc.image.unwrap_or_default()
        };
        out.insert(id, image);
    }
    Ok(out)
}

#[derive(Deserialize, Serialize)]
struct LinkDoc {
    #[serde(default)]
    bandwidth: Option<f64>,
    #[serde(default)]
    latency: Option<f64>,
}

#[derive(Deserialize, Serialize, Default)]
struct ServiceDoc {
    #[serde(default)]
    hardware: i64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    software: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    iot: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    links: BTreeMap<String, LinkDoc>,
}

/// Parses a requirements file. Missing fields default to "no requirement":
/// hardware 0, no software/IoT, no links; a link without `latency` accepts
/// any latency and one without `bandwidth` needs none.
pub fn parse_requirements(text: &[u8]) -> Result<BTreeMap<ServiceId, ServiceRequirement>, ModelError> {
    let services = load_document(text)?;
    let mut out = BTreeMap::new();
    for (key, value) in services {
        let id = service_key(&key)?;
        let doc: ServiceDoc = if value.is_null() {
            ServiceDoc::default()
        } else {
            serde_yaml::from_value(value).map_err(|e| ModelError::MalformedDescriptor(format!("service `{id}`: {e}")))?
        };
        if doc.hardware < 0 {
            return Err(ModelError::NegativeRequirement {
                service: id,
                field: "hardware",
            });
        }
        let mut links = BTreeMap::new();
        for (target, link) in doc.links {
            let latency = link.latency.unwrap_or(f64::INFINITY);
            let bandwidth = link.bandwidth.unwrap_or(0.0);
            if latency.is_nan() || latency < 0.0 {
                return Err(ModelError::NegativeRequirement {
                    service: id,
                    field: "latency",
                });
            }
            if bandwidth.is_nan() || bandwidth < 0.0 {
                return Err(ModelError::NegativeRequirement {
                    service: id,
                    field: "bandwidth",
                });
            }
            let target = ServiceId::new(target);
            if target == id {
                return Err(ModelError::SelfLinkRequirement(id));
            }
            links.insert(
                target,
                LinkRequirement {
                    max_latency_ms: latency,
                    min_bandwidth_mbps: bandwidth,
                },
            );
        }
        out.insert(
            id.clone(),
            ServiceRequirement {
                service_id: id,
                hardware: doc.hardware as u64,
                software: doc.software.into_iter().collect(),
                iot: doc.iot.into_iter().collect(),
                links,
            },
        );
    }
    Ok(out)
}

/// Combines both descriptors. Services named only in the compose file get
/// no requirements; services named only in the requirements file get an
/// empty image reference.
pub fn merge_spec(
    app_id: impl Into<String>,
    compose: &BTreeMap<ServiceId, String>,
    requirements: Option<&BTreeMap<ServiceId, ServiceRequirement>>,
) -> Result<ApplicationSpec, ModelError> {
    let mut services: BTreeMap<ServiceId, ServiceRequirement> = requirements.cloned().unwrap_or_default();
    let mut images = BTreeMap::new();
    for (id, image) in compose {
        services
            .entry(id.clone())
            .or_insert_with(|| ServiceRequirement::unconstrained(id.clone()));
        images.insert(id.clone(), image.clone());
    }
    for id in services.keys() {
        images.entry(id.clone()).or_insert_with(String::new);
    }
    let spec = ApplicationSpec {
        app_id: app_id.into(),
        services,
        images,
    };
    spec.check()?;
    Ok(spec)
}

/// Parses both descriptor texts and merges them.
pub fn load_spec(app_id: impl Into<String>, compose: &[u8], requirements: Option<&[u8]>) -> Result<ApplicationSpec, ModelError> {
    let compose = parse_compose(compose)?;
    let requirements = requirements.map(parse_requirements).transpose()?;
    merge_spec(app_id, &compose, requirements.as_ref())
}

#[derive(Serialize)]
struct ComposeOut<'a> {
    version: &'static str,
    services: BTreeMap<&'a str, ComposeImage<'a>>,
}

#[derive(Serialize)]
struct ComposeImage<'a> {
    image: &'a str,
}

/// Minimal compose file carrying only the image references.
pub fn render_compose(images: &BTreeMap<ServiceId, String>) -> String {
    let doc = ComposeOut {
        version: "3.3",
        services: images
            .iter()
            .map(|(k, v)| (k.as_str(), ComposeImage { image: v.as_str() }))
            .collect(),
    };
    serde_yaml::to_string(&doc).expect("compose document serializes")
}

#[derive(Serialize)]
struct RequirementsOut {
    services: BTreeMap<String, ServiceDoc>,
}

pub fn render_requirements(services: &BTreeMap<ServiceId, ServiceRequirement>) -> String {
    let doc = RequirementsOut {
        services: services
            .iter()
            .map(|(id, req)| {
                let links = req
                    .links
                    .iter()
                    .map(|(t, l)| {
                        (
                            t.to_string(),
                            LinkDoc {
                                bandwidth: Some(l.min_bandwidth_mbps),
                                latency: Some(l.max_latency_ms),
                            },
                        )
                    })
                    .collect();
                (
                    id.to_string(),
                    ServiceDoc {
                        hardware: req.hardware as i64,
                        software: req.software.iter().cloned().collect(),
                        iot: req.iot.iter().cloned().collect(),
                        links,
                    },
                )
            })
            .collect(),
    };
    serde_yaml::to_string(&doc).expect("requirements document serializes")
}
