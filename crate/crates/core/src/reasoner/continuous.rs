//! Continuous reasoning: re-place only the services that need attention.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AllocationLedger, ApplicationSpec, InfrastructureSnapshot, Placement, ServiceId};

use super::search::search;
use super::validate::validate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStats {
    pub candidate_assignments_explored: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningOutcome {
    pub placement: Placement,
    /// The partial search failed and every service was placed from scratch.
    pub fallback_used: bool,
    pub replaced_services: BTreeSet<ServiceId>,
    pub removed_services: BTreeSet<ServiceId>,
    pub stats: ReasoningStats,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("application `{app_id}` has no valid placement on the current infrastructure")]
pub struct Unplaceable {
    pub app_id: String,
    pub stats: ReasoningStats,
}

/// Which services a continuous step must re-place, given the previous placement.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triage {
    pub removed: BTreeSet<ServiceId>,
    pub added: BTreeSet<ServiceId>,
    pub affected: BTreeSet<ServiceId>,
    /// Retained services that are neither added nor affected.
    pub fixed: Placement,
}

impl Triage {
    pub fn to_place(&self) -> BTreeSet<ServiceId> {
        self.added.union(&self.affected).cloned().collect()
    }
}

/// Splits `spec`'s services against `previous` into removed, added,
/// affected (an endpoint of some current violation) and fixed.
pub fn triage(
    spec: &ApplicationSpec,
    previous: &Placement,
    snapshot: &InfrastructureSnapshot,
    external: &AllocationLedger,
) -> Triage {
    let removed: BTreeSet<ServiceId> = previous
        .assignment
        .keys()
        .filter(|s| !spec.services.contains_key(*s))
        .cloned()
        .collect();
    let added: BTreeSet<ServiceId> = spec
        .services
        .keys()
        .filter(|s| !previous.assignment.contains_key(*s))
        .cloned()
        .collect();
    let retained_ids: BTreeSet<ServiceId> = previous
        .assignment
        .keys()
        .filter(|s| spec.services.contains_key(*s))
        .cloned()
        .collect();
    let mut retained = Placement::new(spec.app_id.clone());
    for s in &retained_ids {
        retained.assignment.insert(s.clone(), previous.assignment[s].clone());
    }

    let mut affected = BTreeSet::new();
    for v in validate(&spec.restricted_to(&retained_ids), &retained, snapshot, external) {
        affected.insert(v.service);
        if let Some(p) = v.partner {
            affected.insert(p);
        }
    }
    retained.assignment.retain(|s, _| !affected.contains(s));
    Triage {
        removed,
        added,
        affected,
        fixed: retained,
    }
}

/// Placement from scratch over every service of the spec.
pub fn full_search(
    spec: &ApplicationSpec,
    snapshot: &InfrastructureSnapshot,
    external: &AllocationLedger,
) -> Result<ReasoningOutcome, Unplaceable> {
    let all: BTreeSet<ServiceId> = spec.services.keys().cloned().collect();
    let out = search(spec, snapshot, &Placement::new(spec.app_id.clone()), &all, external);
    let stats = ReasoningStats {
        candidate_assignments_explored: out.explored,
    };
    match out.placement {
        Some(placement) => Ok(ReasoningOutcome {
            placement,
            fallback_used: false,
            replaced_services: all,
            removed_services: BTreeSet::new(),
            stats,
        }),
        None => Err(Unplaceable {
            app_id: spec.app_id.clone(),
            stats,
        }),
    }
}

/// One continuous-reasoning step.
///
/// Without a previous placement this is a full search. Otherwise services
/// dropped from the spec are released, and only added services plus both
/// endpoints of every violated constraint are searched while the rest stay
/// put. If that partial problem has no solution, a full re-placement is
/// attempted and flagged with `fallback_used`.
pub fn continuous_step(
    spec: &ApplicationSpec,
    previous: Option<&Placement>,
    snapshot: &InfrastructureSnapshot,
    external: &AllocationLedger,
) -> Result<ReasoningOutcome, Unplaceable> {
    let Some(previous) = previous else {
        return full_search(spec, snapshot, external);
    };
    let triage = triage(spec, previous, snapshot, external);
    let to_place = triage.to_place();
    let partial = search(spec, snapshot, &triage.fixed, &to_place, external);
    if let Some(placement) = partial.placement {
        return Ok(ReasoningOutcome {
            placement,
            fallback_used: false,
            replaced_services: to_place,
            removed_services: triage.removed,
            stats: ReasoningStats {
                candidate_assignments_explored: partial.explored,
            },
        });
    }
    log::debug!(
        "partial re-placement of {} service(s) failed for `{}`, falling back",
        to_place.len(),
        spec.app_id
    );
    match full_search(spec, snapshot, external) {
        Ok(mut out) => {
            out.fallback_used = true;
            out.removed_services = triage.removed;
            out.stats.candidate_assignments_explored += partial.explored;
            Ok(out)
        }
        Err(mut e) => {
            e.stats.candidate_assignments_explored += partial.explored;
            Err(e)
        }
    }
}
