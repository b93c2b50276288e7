//! Snapshot-to-roster matching.
//!
//! Every (detection, student) pair within the acceptance threshold is a
//! candidate. Candidates are taken in ascending order of distance, then
//! student id, then detection index, and a candidate is accepted when
//! neither its detection nor its student has been taken yet. The result is
//! injective in both directions. It is not guaranteed to minimise total
//! distance.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_distance, FaceEmbedding};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub student_id: String,
    pub embedding: FaceEmbedding,
}

impl RosterEntry {
    pub fn new(student_id: impl Into<String>, embedding: FaceEmbedding) -> Self {
        RosterEntry {
            student_id: student_id.into(),
            embedding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub student_id: String,
    pub detection_index: usize,
    pub distance: f64,
}

/// Rejects rosters with duplicate ids or mixed dimensions.
pub fn validate_roster(roster: &[RosterEntry]) -> Result<()> {
    let mut seen = HashSet::with_capacity(roster.len());
    for entry in roster {
        if !seen.insert(entry.student_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "student {} appears twice in roster",
                entry.student_id
            )));
        }
    }
    if let Some(first) = roster.first() {
        if let Some(bad) = roster
            .iter()
            .find(|e| e.embedding.dim() != first.embedding.dim())
        {
            return Err(Error::DimensionMismatch {
                left: first.embedding.dim(),
                right: bad.embedding.dim(),
            });
        }
    }
    Ok(())
}

/// Assignments come back in acceptance order (ascending distance).
pub fn match_snapshot(
    detections: &[FaceEmbedding],
    roster: &[RosterEntry],
    tau: f64,
) -> Result<Vec<Assignment>> {
    validate_roster(roster)?;
    let mut candidates: Vec<(f64, &str, usize)> = Vec::new();
    for (detection_index, detection) in detections.iter().enumerate() {
        for entry in roster {
            let distance = cosine_distance(detection, &entry.embedding)?;
            if distance <= tau {
                candidates.push((distance, entry.student_id.as_str(), detection_index));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.cmp(b.1))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut taken_students = HashSet::new();
    let mut taken_detections = vec![false; detections.len()];
    let mut out = Vec::with_capacity(detections.len().min(roster.len()));
    for (distance, student_id, detection_index) in candidates {
        if taken_detections[detection_index] || taken_students.contains(student_id) {
            continue;
        }
        taken_detections[detection_index] = true;
        taken_students.insert(student_id);
        out.push(Assignment {
            student_id: student_id.to_string(),
            detection_index,
            distance,
        });
    }
    Ok(out)
}
