//! Monte Carlo measurement of matcher accuracy.
//!
//! Each trial enrols a fixed roster, picks which students are in the room,
//! renders one noisy detection per present student and runs the matcher.
//! Trials draw from independent keyed streams, so the totals are identical
//! whether trials run in parallel or not.

use serde::{Deserialize, Serialize};

use crate::embedding::FaceEmbedding;
use crate::matching::{match_snapshot, RosterEntry};
use crate::rng::{synth_embedding, StreamKey};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub seed: u64,
    pub dim: usize,
    pub roster_size: usize,
    pub present: usize,
    pub sigma: f64,
    pub tau: f64,
    pub trials: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            seed: 1,
            dim: crate::DEFAULT_EMBEDDING_DIM,
            roster_size: 60,
            present: 40,
            sigma: 0.05,
            tau: crate::DEFAULT_TAU,
            trials: 1000,
        }
    }
}

/// Counts summed over all trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatcherAccuracy {
    /// Detections rendered (one per present student).
    pub faces: u64,
    /// Detections assigned to their true student.
    pub correct: u64,
    /// Detections assigned to someone else.
    pub misidentified: u64,
    /// Detections left unassigned.
    pub missed: u64,
    /// (absent student, trial) pairs.
    pub absent_slots: u64,
    /// Absent students that received a detection.
    pub false_accepts: u64,
}

impl MatcherAccuracy {
    pub fn correct_rate(&self) -> f64 {
        ratio(self.correct, self.faces)
    }

    pub fn false_accept_rate(&self) -> f64 {
        ratio(self.false_accepts, self.absent_slots)
    }

    fn merge(self, other: Self) -> Self {
        MatcherAccuracy {
            faces: self.faces + other.faces,
            correct: self.correct + other.correct,
            misidentified: self.misidentified + other.misidentified,
            missed: self.missed + other.missed,
            absent_slots: self.absent_slots + other.absent_slots,
            false_accepts: self.false_accepts + other.false_accepts,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn calibration_roster(seed: u64, roster_size: usize, dim: usize) -> Vec<RosterEntry> {
    (0..roster_size)
        .map(|i| {
            let id = format!("s{i:03}");
            let embedding = StreamKey::new("attenface/calibration/roster")
                .u64(seed)
                .str(&id)
                .stream()
                .unit_vector(dim);
            RosterEntry::new(id, embedding)
        })
        .collect()
}

/// One snapshot: returns the detections and, for each, its true student.
pub fn trial_snapshot(
    config: &TrialConfig,
    roster: &[RosterEntry],
    trial: usize,
) -> (Vec<FaceEmbedding>, Vec<usize>) {
    let mut picker = StreamKey::new("attenface/calibration/pick")
        .u64(config.seed)
        .u64(trial as u64)
        .stream();
    let mut order: Vec<usize> = (0..roster.len()).collect();
    picker.shuffle(&mut order);
    order.truncate(config.present.min(roster.len()));
    let detections = order
        .iter()
        .map(|&i| {
            let mut stream = StreamKey::new("attenface/calibration/face")
                .u64(config.seed)
                .u64(trial as u64)
                .str(&roster[i].student_id)
                .stream();
            synth_embedding(&roster[i].embedding, config.sigma, &mut stream)
        })
        .collect();
    (detections, order)
}

fn run_trial(
    config: &TrialConfig,
    roster: &[RosterEntry],
    trial: usize,
) -> Result<MatcherAccuracy> {
    let (detections, truth) = trial_snapshot(config, roster, trial);
    let assignments = match_snapshot(&detections, roster, config.tau)?;
    let mut acc = MatcherAccuracy {
        faces: detections.len() as u64,
        absent_slots: (roster.len() - truth.len()) as u64,
        ..Default::default()
    };
    let mut present = vec![false; roster.len()];
    for &i in &truth {
        present[i] = true;
    }
    for a in &assignments {
        let true_student = &roster[truth[a.detection_index]].student_id;
        if *true_student == a.student_id {
            acc.correct += 1;
        } else {
            acc.misidentified += 1;
        }
        let idx = roster
            .iter()
            .position(|e| e.student_id == a.student_id)
            .expect("assignment names a roster student");
        if !present[idx] {
            acc.false_accepts += 1;
        }
    }
    acc.missed = acc.faces - assignments.len() as u64;
    Ok(acc)
}

pub fn measure_sequential(config: &TrialConfig) -> Result<MatcherAccuracy> {
    let roster = calibration_roster(config.seed, config.roster_size, config.dim);
    (0..config.trials).try_fold(MatcherAccuracy::default(), |acc, trial| {
        Ok(acc.merge(run_trial(config, &roster, trial)?))
    })
}

#[cfg(feature = "parallel")]
pub fn measure(config: &TrialConfig) -> Result<MatcherAccuracy> {
    use rayon::prelude::*;

    let roster = calibration_roster(config.seed, config.roster_size, config.dim);
    (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &roster, trial))
        .try_reduce(MatcherAccuracy::default, |a, b| Ok(a.merge(b)))
}

#[cfg(not(feature = "parallel"))]
pub fn measure(config: &TrialConfig) -> Result<MatcherAccuracy> {
    measure_sequential(config)
}

/// Accuracy at each candidate threshold.
pub fn sweep_tau(config: &TrialConfig, taus: &[f64]) -> Result<Vec<(f64, MatcherAccuracy)>> {
    taus.iter()
        .map(|&tau| {
            let c = TrialConfig {
                tau,
                ..config.clone()
            };
            Ok((tau, measure(&c)?))
        })
        .collect()
}
