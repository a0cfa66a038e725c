use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::instance::InstanceMetadata;
use super::DicomError;
use crate::geometry;

/// All instances of one series, ordered by slice offset, temporal position and
/// SOP instance UID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub series_instance_uid: String,
    pub patient_id: String,
    pub series_description: String,
    pub instances: Vec<InstanceMetadata>,
}

impl SeriesRecord {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Groups instances by SeriesInstanceUID. Output is sorted by UID.
pub fn group_series(instances: Vec<InstanceMetadata>) -> Result<Vec<SeriesRecord>, DicomError> {
    let mut groups: BTreeMap<String, Vec<InstanceMetadata>> = BTreeMap::new();
    for inst in instances {
        groups.entry(inst.series_instance_uid.clone()).or_default().push(inst);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (uid, mut members) in groups {
        let patient_id = members[0].patient_id.clone();
        if let Some(other) = members.iter().find(|m| m.patient_id != patient_id) {
            return Err(DicomError::ConflictingPatient {
                series: uid,
                first: patient_id,
                second: other.patient_id.clone(),
            });
        }
        sort_instances(&mut members);
        let series_description = members
            .iter()
            .map(|m| m.series_description.as_str())
            .find(|d| !d.is_empty())
            .unwrap_or_default()
            .to_string();
        out.push(SeriesRecord {
            series_instance_uid: uid,
            patient_id,
            series_description,
            instances: members,
        });
    }
    Ok(out)
}

/// Sorts by projected slice offset, then temporal position, then SOP UID.
/// Instances lacking a position or temporal index sort after those that have one.
pub fn sort_instances(instances: &mut [InstanceMetadata]) {
    let normal = geometry::series_normal(instances);
    let offset = |inst: &InstanceMetadata| -> Option<f64> {
        let n = normal?;
        inst.image_position_patient.map(|p| geometry::dot(&n, &p))
    };
    instances.sort_by(|a, b| {
        cmp_missing_last(offset(a), offset(b), f64::total_cmp)
            .then_with(|| cmp_missing_last(a.temporal_position, b.temporal_position, |x, y| x.cmp(y)))
            .then_with(|| a.sop_instance_uid.cmp(&b.sop_instance_uid))
    });
}

fn cmp_missing_last<T>(a: Option<T>, b: Option<T>, cmp: impl Fn(&T, &T) -> Ordering) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => cmp(&x, &y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}
