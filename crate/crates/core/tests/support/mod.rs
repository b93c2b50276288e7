//! Brute-force oracles shared by the core integration tests. Nothing here
//! calls into the matcher or the policy arithmetic under test.

#![allow(dead_code)]

use attenface_core::embedding::FaceEmbedding;
use attenface_core::matching::RosterEntry;

/// A matching as sorted `(detection, roster)` index pairs.
pub type Pairs = Vec<(usize, usize)>;

pub fn distance_table(detections: &[FaceEmbedding], roster: &[RosterEntry]) -> Vec<Vec<f64>> {
    detections
        .iter()
        .map(|d| {
            roster
                .iter()
                .map(|r| {
                    let dot: f64 = d
                        .values()
                        .iter()
                        .zip(r.embedding.values())
                        .map(|(a, b)| a * b)
                        .sum();
                    (1.0 - dot).clamp(0.0, 2.0)
                })
                .collect()
        })
        .collect()
}

/// Every injective partial matching that only uses pairs within `tau`.
pub fn all_matchings(dist: &[Vec<f64>], tau: f64) -> Vec<Pairs> {
    fn go(
        d: usize,
        dist: &[Vec<f64>],
        tau: f64,
        used: &mut Vec<bool>,
        cur: &mut Pairs,
        out: &mut Vec<Pairs>,
    ) {
        if d == dist.len() {
            out.push(cur.clone());
            return;
        }
        go(d + 1, dist, tau, used, cur, out);
        for s in 0..used.len() {
            if !used[s] && dist[d][s] <= tau {
                used[s] = true;
                cur.push((d, s));
                go(d + 1, dist, tau, used, cur, out);
                cur.pop();
                used[s] = false;
            }
        }
    }
    let roster_len = dist.first().map_or(0, |row| row.len());
    let mut out = Vec::new();
    go(
        0,
        dist,
        tau,
        &mut vec![false; roster_len],
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Maximum-cardinality matchings of minimal total distance. Totals within
/// `eps` count as equal.
pub fn optimal_matchings(dist: &[Vec<f64>], tau: f64, eps: f64) -> Vec<Pairs> {
    let all = all_matchings(dist, tau);
    let best_len = all.iter().map(|m| m.len()).max().unwrap_or(0);
    let total = |m: &Pairs| m.iter().map(|&(d, s)| dist[d][s]).sum::<f64>();
    let candidates: Vec<_> = all.into_iter().filter(|m| m.len() == best_len).collect();
    let best = candidates.iter().map(total).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|m| total(m) <= best + eps)
        .collect()
}

/// Matchings with no blocking pair: no pair within `tau` whose detection and
/// student are each unmatched or matched strictly farther away.
pub fn stable_matchings(dist: &[Vec<f64>], tau: f64) -> Vec<Pairs> {
    let roster_len = dist.first().map_or(0, |row| row.len());
    all_matchings(dist, tau)
        .into_iter()
        .filter(|m| {
            let mut det_at = vec![f64::INFINITY; dist.len()];
            let mut stu_at = vec![f64::INFINITY; roster_len];
            for &(d, s) in m {
                det_at[d] = dist[d][s];
                stu_at[s] = dist[d][s];
            }
            !(0..dist.len()).any(|d| {
                (0..roster_len).any(|s| {
                    let x = dist[d][s];
                    x <= tau && det_at[d] > x && stu_at[s] > x
                })
            })
        })
        .collect()
}

/// Largest k in 0..=remaining such that missing k sessions keeps the final
/// ratio at or above the requirement; 0 when even k = 0 falls short.
pub fn allowed_misses_by_search(attended: u32, held: u32, total: u32, required: u32) -> u32 {
    let remaining = total - held;
    let mut best = 0;
    for k in 0..=remaining {
        let final_attended = attended + remaining - k;
        if u64::from(final_attended) * 100 >= u64::from(required) * u64::from(total) {
            best = k;
        }
    }
    best
}
