use std::collections::BTreeMap;

use chrono::NaiveDate;
use joinpoint::analysis::{
    align_events, classify_changepoints, lead_lag, normalize_share, trend_regions, Changepoint,
    Direction, Event, LabeledChangepoints,
};
use joinpoint::synth::SynthSpec;
use joinpoint::{fit_with_target_df, lambda_max, solve_tf, SolverSettings, TimeSeries};
use proptest::prelude::*;

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 10, 1).unwrap()
}

fn d(offset: i64) -> NaiveDate {
    day0() + chrono::Duration::days(offset)
}

fn cp(offset: i64) -> Changepoint<f64> {
    Changepoint {
        index: offset as usize,
        date: d(offset),
        slope_before: 0.0,
        slope_after: 1.0,
        direction: Direction::Up,
    }
}

fn grid() -> impl Strategy<Value = BTreeMap<String, TimeSeries>> {
    (3usize..30, 1usize..5).prop_flat_map(|(n, k)| {
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1000.0], n),
            k,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, v)| (format!("C{i}"), TimeSeries::new(day0(), v).unwrap()))
                .collect()
        })
    })
}

fn offsets() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::btree_set(0i64..120, 0..12).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn shares_sum_to_one(m in grid()) {
        let out = normalize_share(&m).unwrap();
        let n = m.values().next().unwrap().len();
        for i in 0..n {
            let total: f64 = out.series.values().map(|s| s.values()[i]).sum();
            if out.zero_days.contains(&d(i as i64)) {
                prop_assert_eq!(total, 0.0);
            } else {
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shares_ignore_common_scale(m in grid(), c in 1e-3f64..1e3) {
        let scaled: BTreeMap<_, _> = m
            .iter()
            .map(|(k, s)| (k.clone(), s.with_values(s.values().iter().map(|v| v * c).collect()).unwrap()))
            .collect();
        let (a, b) = (normalize_share(&m).unwrap(), normalize_share(&scaled).unwrap());
        prop_assert_eq!(&a.zero_days, &b.zero_days);
        for (sa, sb) in a.series.values().zip(b.series.values()) {
            for (x, y) in sa.values().iter().zip(sb.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn changepoints_and_regions(y in proptest::collection::vec(0.0f64..10.0, 5..60), frac in 0.0f64..1.2) {
        let lambda = frac * lambda_max(&y).unwrap();
        let fit = solve_tf(&y, lambda, &SolverSettings::default()).unwrap();
        let cps = classify_changepoints(&fit, day0());
        prop_assert_eq!(cps.len(), fit.df - 2);
        for c in &cps {
            prop_assert!(c.slope_after != c.slope_before);
            prop_assert_eq!(c.direction == Direction::Up, c.slope_after > c.slope_before);
        }
        let r = trend_regions(&fit, day0());
        let mut covered = vec![0u32; y.len()];
        for range in r.falling.iter().chain(&r.rising) {
            for day in range.days() {
                covered[(day - day0()).num_days() as usize] += 1;
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1), "{:?}", covered);
    }

    #[test]
    fn lead_lag_swaps(a in offsets(), b in offsets(), gap in 0u32..20) {
        let ca: Vec<_> = a.iter().map(|&o| cp(o)).collect();
        let cb: Vec<_> = b.iter().map(|&o| cp(o)).collect();
        let fwd = lead_lag(&ca, &cb, gap);
        let back = lead_lag(&cb, &ca, gap);
        let mut f: Vec<_> = fwd.pairs.iter().map(|p| (p.a.date, p.b.date, p.offset_days)).collect();
        let mut g: Vec<_> = back.pairs.iter().map(|p| (p.b.date, p.a.date, -p.offset_days)).collect();
        f.sort();
        g.sort();
        prop_assert_eq!(f, g);
        prop_assert_eq!(&fwd.unmatched_a, &back.unmatched_b);
        prop_assert_eq!(&fwd.unmatched_b, &back.unmatched_a);
        prop_assert_eq!(fwd.median_offset.map(|m| -m), back.median_offset);
        for p in &fwd.pairs {
            prop_assert!(p.offset_days.unsigned_abs() <= u64::from(gap));
        }
    }

    #[test]
    fn alignment_within_window(a in offsets(), events in offsets(), window in 0u32..15) {
        let series = [LabeledChangepoints { series: "s".to_string(), changepoints: a.iter().map(|&o| cp(o)).collect() }];
        let ev: Vec<_> = events.iter().map(|&o| Event { date: d(o), label: format!("e{o}") }).collect();
        let out = align_events(&series, &ev, window);
        prop_assert_eq!(&out, &align_events(&series, &ev, window));
        for al in &out {
            for m in &al.matches {
                prop_assert!(m.offset_days.unsigned_abs() <= u64::from(window));
                prop_assert_eq!(m.offset_days, (m.changepoint.date - al.event.date).num_days());
            }
        }
    }
}

#[test]
fn documented_tie_break() {
    let r = lead_lag(&[cp(10), cp(12)], &[cp(11)], 14);
    assert_eq!(r.pairs.len(), 1);
    assert_eq!(
        (r.pairs[0].a.date, r.pairs[0].b.date, r.pairs[0].offset_days),
        (d(10), d(11), 1)
    );
    assert_eq!(r.unmatched_a, vec![cp(12)]);
}

#[test]
fn event_with_no_nearby_changepoints() {
    let out = align_events::<f64>(
        &[],
        &[Event {
            date: d(0),
            label: "x".into(),
        }],
        10,
    );
    assert!(out[0].matches.is_empty());
}

#[test]
fn triangle_recovers_one_down_knot() {
    let spec = SynthSpec {
        n_days: 61,
        knots: vec![30],
        slopes: vec![1.0, -1.0],
        intercept: 0.0,
        noise_sd: 0.5,
        seed: 7,
    };
    let y = spec.generate().unwrap();
    let t = fit_with_target_df(&y, 3, &SolverSettings::default()).unwrap();
    let cps = classify_changepoints(&t.fit, day0());
    assert_eq!(cps.len(), 1);
    assert!(
        (cps[0].index as i64 - 30).abs() <= 2,
        "knot at {}",
        cps[0].index
    );
    assert_eq!(cps[0].direction, Direction::Down);
    let regions = trend_regions(&t.fit, day0());
    assert_eq!(regions.falling.len(), 1);
}
