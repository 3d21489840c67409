//! Shared generators for randomized suites.

use atrp_core::dataset::QidGroup;
use atrp_core::fidelity::{bounds_from_delta, Interval};
use rand::rngs::StdRng;
use rand::Rng;

/// Random group: integer weights (so ties are exact), rules mixing
/// deterministic and randomized values, and a group mass below one as in a
/// real partition.
pub fn random_group(rng: &mut StdRng, m_lo: usize, m_hi: usize) -> QidGroup {
    let m = rng.gen_range(m_lo..=m_hi);
    let weights: Vec<u64> = (0..m).map(|_| rng.gen_range(1..=40)).collect();
    let outside: u64 = rng.gen_range(0..=60);
    let total = (weights.iter().sum::<u64>() + outside) as f64;
    let p: Vec<f64> = weights.iter().map(|&w| w as f64 / total).collect();
    let d: Vec<f64> = (0..m)
        .map(|_| match rng.gen_range(0..5) {
            0 => 0.0,
            1 => 1.0,
            2 => 0.5,
            _ => rng.gen_range(0.0..=1.0),
        })
        .collect();
    QidGroup::from_parts(&p, &d)
}

pub fn delta_bounds(g: &QidGroup, delta: f64) -> Vec<Interval> {
    g.members.iter().map(|m| bounds_from_delta(m.d, delta)).collect()
}

/// Random dataset CSV with two public values and distinct sensitive codes.
pub fn random_dataset_csv(rng: &mut StdRng) -> String {
    let mut text = String::from("g,s,count,d\n");
    for (gi, gv) in ["a", "b"].iter().enumerate() {
        let rows = rng.gen_range(1..=4);
        for r in 0..rows {
            let count = rng.gen_range(1..=40);
            let d = (rng.gen_range(0.0..=1.0f64) * 1000.0).round() / 1000.0;
            text.push_str(&format!("{gv},s{gi}{r},{count},{d}\n"));
        }
    }
    text
}
