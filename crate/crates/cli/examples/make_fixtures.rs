//! Regenerates `crates/cli/fixtures`: `cargo run -p joinpoint-cli --example make_fixtures`.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2020;
const DAYS: u64 = 90;
const LOOKBACK: u64 = 10;

struct Candidate {
    id: &'static str,
    committee: &'static str,
    /// (day, expected daily donors) vertices of a piecewise-linear profile.
    donors: &'static [(f64, f64)],
    poll: &'static [(f64, f64)],
}

const CANDIDATES: [Candidate; 2] = [
    Candidate {
        id: "SANDERS",
        committee: "C00696948",
        donors: &[(0.0, 30.0), (30.0, 55.0), (60.0, 25.0), (89.0, 40.0)],
        poll: &[(0.0, 16.0), (35.0, 19.0), (65.0, 14.5), (89.0, 16.5)],
    },
    Candidate {
        id: "WARREN",
        committee: "C00693234",
        donors: &[(0.0, 20.0), (25.0, 24.0), (55.0, 60.0), (89.0, 42.0)],
        poll: &[(0.0, 9.0), (28.0, 13.0), (60.0, 20.0), (89.0, 18.0)],
    },
];

fn profile(vertices: &[(f64, f64)], t: f64) -> f64 {
    for w in vertices.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if t <= t1 {
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
    }
    vertices.last().unwrap().1
}

fn itcont_line(
    committee: &str,
    name: &str,
    zip: &str,
    date: NaiveDate,
    cents: i64,
    sub_id: u64,
) -> String {
    let amount = if cents % 100 == 0 {
        format!("{}", cents / 100)
    } else {
        format!("{}.{:02}", cents / 100, cents % 100)
    };
    let date = date.format("%m%d%Y");
    format!(
        "{committee}|N|M7|P2020|201908209162341287|15|IND|{name}|SPRINGFIELD|MA|{zip}|SELF|WRITER|{date}|{amount}||SA11AI.{sub_id}|1350000||EARMARKED|{sub_id}"
    )
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = NaiveDate::from_ymd_opt(2019, 6, 1).unwrap();
    let first = start - Days::new(LOOKBACK);

    let mut lines = Vec::new();
    let mut next_donor = 0u64;
    let mut sub_id = 4_000_000u64;
    // everyone who has given to anyone, for cross-candidate repeat gifts
    let mut everyone: Vec<(String, String)> = Vec::new();
    let mut pools: Vec<Vec<(String, String)>> = vec![Vec::new(); CANDIDATES.len()];
    for day in 0..LOOKBACK + DAYS {
        let date = first + Days::new(day);
        let t = day as f64 - LOOKBACK as f64;
        for (c, cand) in CANDIDATES.iter().enumerate() {
            let expected = profile(cand.donors, t.max(0.0));
            let count = (expected + rng.gen_range(-4.0..4.0)).round().max(1.0) as usize;
            let mut today: Vec<(String, String)> = Vec::new();
            for _ in 0..count {
                let roll: f64 = rng.gen();
                let donor = if roll < 0.35 || pools[c].len() < 5 {
                    next_donor += 1;
                    let zip = format!(
                        "{:05}{:04}",
                        1000 + next_donor % 90_000,
                        rng.gen_range(0..10_000)
                    );
                    let d = (format!("DONOR{next_donor}, PAT"), zip);
                    everyone.push(d.clone());
                    d
                } else if roll < 0.45 {
                    everyone.choose(&mut rng).unwrap().clone()
                } else {
                    pools[c].choose(&mut rng).unwrap().clone()
                };
                if today.contains(&donor) {
                    continue;
                }
                today.push(donor);
            }
            for (name, zip) in today {
                let cents = rng.gen_range(5..=250) * 100
                    + if rng.gen_bool(0.2) {
                        rng.gen_range(1..100)
                    } else {
                        0
                    };
                sub_id += 1;
                lines.push(itcont_line(
                    cand.committee,
                    &name,
                    &zip,
                    date,
                    cents,
                    sub_id,
                ));
                if !pools[c].contains(&(name.clone(), zip.clone())) {
                    pools[c].push((name, zip));
                }
            }
        }
        // a committee outside the map
        sub_id += 1;
        lines.push(itcont_line(
            "C00000042",
            "OTHER, SAM",
            "601011234",
            date,
            2500,
            sub_id,
        ));
    }
    // one refund, kept at parse and dropped from every metric
    let refund_date = start + Days::new(40);
    lines.push(itcont_line(
        "C00693234",
        "DONOR3, PAT",
        "010039999",
        refund_date,
        -5000,
        sub_id + 1,
    ));
    lines.shuffle(&mut rng);
    let half = lines.len() / 2;
    for (name, chunk) in [
        ("itcont_a.txt", &lines[..half]),
        ("itcont_b.txt", &lines[half..]),
    ] {
        std::fs::write(dir.join(name), chunk.join("\n") + "\n").unwrap();
    }

    let mut map = String::from("committee_id,candidate_id\n");
    for cand in &CANDIDATES {
        writeln!(map, "{},{}", cand.committee, cand.id).unwrap();
    }
    std::fs::write(dir.join("committees.csv"), map).unwrap();

    let mut polls = String::from("date,candidate,pct\n");
    let mut day = 0u64;
    while day < DAYS {
        for cand in &CANDIDATES {
            let pct = profile(cand.poll, day as f64) + rng.gen_range(-0.3..0.3);
            writeln!(polls, "{},{},{:.1}", start + Days::new(day), cand.id, pct).unwrap();
        }
        writeln!(
            polls,
            "{},BIDEN,{:.1}",
            start + Days::new(day),
            30.0 + rng.gen_range(-1.0..1.0)
        )
        .unwrap();
        day += if day + 3 >= DAYS - 1 {
            1
        } else {
            rng.gen_range(1..=3)
        };
    }
    std::fs::write(dir.join("polls.csv"), polls).unwrap();

    std::fs::write(
        dir.join("events.csv"),
        "date,label\n2019-06-26,First debate (night 1)\n2019-06-27,First debate (night 2)\n\
         2019-07-30,Second debate (night 1)\n2019-07-31,Second debate (night 2)\n",
    )
    .unwrap();
}
