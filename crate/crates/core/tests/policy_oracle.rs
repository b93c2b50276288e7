mod support;

use attenface_core::policy::{
    allowed_misses, apply_admin_override, clear_admin_override, compute_block_schedule,
    decide_class_attendance, recompute_attendance, PresenceVector, ThresholdPolicy,
};
use attenface_core::Timestamp;
use proptest::prelude::*;

use support::allowed_misses_by_search;

fn start() -> Timestamp {
    Timestamp::ymd_hm(2026, 3, 2, 8, 0)
}

#[test]
fn allowed_misses_matches_exhaustive_search() {
    let mut cases = 0;
    for total in 0..=12 {
        for held in 0..=total {
            for attended in 0..=held {
                for required in [0, 50, 75, 100] {
                    let expected = allowed_misses_by_search(attended, held, total, required);
                    assert_eq!(
                        allowed_misses(attended, held, total, required).unwrap(),
                        expected,
                        "attended={attended} held={held} total={total} required={required}"
                    );
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 4 * 455);
}

#[test]
fn allowed_misses_frozen_example() {
    // (8 + 10 - k) / 20 >= 0.75 holds for k <= 3.
    assert_eq!(allowed_misses_by_search(8, 10, 20, 75), 3);
    assert_eq!(allowed_misses(8, 10, 20, 75).unwrap(), 3);
}

#[test]
fn one_more_miss_breaks_the_requirement() {
    for total in 1..=12u32 {
        for held in 0..=total {
            for attended in 0..=held {
                for required in [0, 50, 75, 100] {
                    let k = allowed_misses(attended, held, total, required).unwrap();
                    let remaining = total - held;
                    if k < remaining {
                        let final_attended = attended + remaining - (k + 1);
                        assert!(
                            u64::from(final_attended) * 100
                                < u64::from(required) * u64::from(total),
                            "attended={attended} held={held} total={total} required={required}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn block_count_is_ceiling_of_duration_over_interval() {
    for duration in 1..=300i64 {
        for interval in 1..=30i64 {
            let s =
                compute_block_schedule(start(), start().plus_minutes(duration), interval).unwrap();
            let expected = (duration + interval - 1) / interval;
            assert_eq!(s.block_count() as i64, expected, "{duration}/{interval}");
            assert_eq!(s.snapshot_times[0], start());
            assert!(s.snapshot_times.windows(2).all(|w| w[0] < w[1]));
            assert!(s.snapshot_times.iter().all(|&t| t < s.session_end));
        }
    }
}

fn presence() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 1..12)
}

proptest! {
    #[test]
    fn lower_threshold_never_revokes(blocks in presence(), n in 0u32..14, lower in 0u32..14) {
        let len = blocks.len();
        let pv = PresenceVector::new("s", blocks);
        let at_n = decide_class_attendance("c", &pv, len, &ThresholdPolicy::new(n, None)).unwrap();
        let n2 = lower.min(n);
        let at_lower = decide_class_attendance("c", &pv, len, &ThresholdPolicy::new(n2, None)).unwrap();
        prop_assert!(!at_n.present || at_lower.present);
    }

    #[test]
    fn more_presence_never_revokes(blocks in presence(), flip in 0usize..12, n in 0u32..14) {
        let len = blocks.len();
        let policy = ThresholdPolicy::new(n, None);
        let before = decide_class_attendance("c", &PresenceVector::new("s", blocks.clone()), len, &policy).unwrap();
        let mut more = blocks;
        more[flip % len] = true;
        let after = decide_class_attendance("c", &PresenceVector::new("s", more), len, &policy).unwrap();
        prop_assert!(!before.present || after.present);
    }

    #[test]
    fn override_survives_recompute(
        blocks in presence(),
        later in presence(),
        n in 0u32..14,
        forced in any::<bool>(),
    ) {
        let len = blocks.len();
        let policy = ThresholdPolicy::new(n, None);
        let rec = decide_class_attendance("c", &PresenceVector::new("s", blocks), len, &policy).unwrap();
        let o = apply_admin_override(&rec, forced, "manual");
        let later_len = later.len();
        let again = recompute_attendance(&o, &PresenceVector::new("s", later), later_len, &policy).unwrap();
        prop_assert_eq!(again.present, forced);
        let cleared = clear_admin_override(&o);
        prop_assert_eq!(cleared.present, rec.present);
    }

    #[test]
    fn computed_record_obeys_rule(blocks in presence(), n in 0u32..14, over in proptest::option::of(0u32..14)) {
        let len = blocks.len();
        let policy = ThresholdPolicy::new(n, over);
        let rec = decide_class_attendance("c", &PresenceVector::new("s", blocks), len, &policy).unwrap();
        prop_assert_eq!(rec.threshold_used, over.unwrap_or(n));
        prop_assert_eq!(rec.present, rec.blocks_present >= rec.threshold_used);
        prop_assert!(rec.blocks_present as usize <= len);
    }
}
