//! Acceptance suite: one test per release criterion, each printing a
//! PASS line when its assertions hold. Run with `--nocapture` to see them:
//!
//! ```text
//! cargo test -p atrp-core --test acceptance -- --nocapture
//! ```

mod common;

use atrp_core::attack::{
    fairness_inversion, posterior_distribution, InversionInput, RuleTable, SideInformation,
    DEFAULT_SLACK,
};
use atrp_core::dataset::{parse_dataset, partition_by_qid, QidGroup, SchemaRoles};
use atrp_core::fairness::{group_rate, sp_bias, GroupSelector};
use atrp_core::fidelity::FidelitySpec;
use atrp_core::oracle::{grid_oracle, GridSpec};
use atrp_core::privacy::{beta_min, c_star, check_beta_in};
use atrp_core::solver::{solve_group, solve_master, tradeoff_sweep, SolveCase, SweepKind};
use common::{delta_bounds, random_group};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;

const SMALL_CSV: &str = "\
income,gender,count,d
<100k,F,12,0
100k~200k,F,5,0
>200k,F,3,1
<100k,M,9,0
100k~200k,M,7,0.5
>200k,M,4,1
";

const TABLE1_CSV: &str = "\
income,gender,count,d
<100k,F,139,0
100k~200k,F,9,0
>200k,F,2,1
<100k,M,117,0
100k~200k,M,18,0.5
>200k,M,5,1
";

const CENSUS_CSV: &str = "\
gender,income,probability
F,<100k,0.931
F,100k~200k,0.057
F,>200k,0.012
M,<100k,0.842
M,100k~200k,0.123
M,>200k,0.035
";

fn roles() -> SchemaRoles {
    SchemaRoles::new(vec!["gender"], vec!["income"])
}

fn small_dataset() -> atrp_core::WeightedDataset {
    parse_dataset(SMALL_CSV, &roles()).unwrap()
}

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} +- {tol}"
    );
}

#[test]
fn criterion_1_end_to_end_reproduction() {
    let start = Instant::now();
    let ds = small_dataset();
    let sol = solve_master(&ds, &FidelitySpec::delta(0.9)).unwrap();

    let f = &sol.groups[0].solution;
    assert_close(f.beta1, 0.6136, 1e-3, "female beta1");
    assert_close(f.beta0, 0.6708, 1e-3, "female beta0");
    assert_close(f.beta_p, 0.675, 1e-6, "female beta_p");
    assert_eq!(f.case, SolveCase::BetaP, "female case");
    for (got, want) in f.d_tilde.iter().zip([0.1, 0.02, 0.9]) {
        assert_close(*got, want, 1e-6, "female announced rule");
    }

    let m = &sol.groups[1].solution;
    assert_close(m.beta1, 0.4444, 1e-3, "male beta1");
    assert_close(m.beta0, 0.6378, 1e-3, "male beta0");
    assert_close(m.beta_p, 0.585, 1e-6, "male beta_p");
    assert_eq!(m.case, SolveCase::Beta0, "male case");
    for (got, want) in m.d_tilde.iter().zip([0.1, 0.4, 0.9]) {
        assert_close(*got, want, 1e-6, "male announced rule");
    }

    assert_close(sol.beta_star, 0.675, 1e-9, "overall beta_star");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 (worked-example end-to-end reproduction): PASS ({elapsed:?})");
}

#[test]
fn criterion_2_fairness_table_reproduction() {
    let ds = parse_dataset(TABLE1_CSV, &roles()).unwrap();
    let rules = ds.rules();
    let f = GroupSelector::new(vec![("gender", "F")]);
    let m = GroupSelector::new(vec![("gender", "M")]);
    assert_close(group_rate(&ds, &rules, &f).unwrap(), 0.0133, 1e-4, "female rate");
    assert_close(group_rate(&ds, &rules, &m).unwrap(), 0.10, 1e-4, "male rate");
    assert_close(sp_bias(&ds, &rules, &f, &m).unwrap(), 0.0866, 1e-4, "SP bias");
    for (band, want) in [("<100k", 0.0), ("100k~200k", 0.5), (">200k", 0.0)] {
        let fb = GroupSelector::new(vec![("gender", "F"), ("income", band)]);
        let mb = GroupSelector::new(vec![("gender", "M"), ("income", band)]);
        assert_close(
            sp_bias(&ds, &rules, &fb, &mb).unwrap(),
            want,
            1e-4,
            &format!("CSP bias at {band}"),
        );
    }
    println!("criterion 2 (published fairness table reproduction): PASS");
}

#[test]
fn criterion_3_tradeoff_endpoints() {
    let ds = small_dataset();
    let groups = partition_by_qid(&ds);
    for (g, lo, hi) in [(&groups[0], 0.6, 1.0), (&groups[1], 0.45, 0.72)] {
        let curve = tradeoff_sweep(g, SweepKind::Delta, 101).unwrap();
        assert_close(curve[0].1, lo, 1e-6, &format!("{} left endpoint", g.label()));
        assert_close(curve[100].1, hi, 1e-6, &format!("{} right endpoint", g.label()));
        for w in curve.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12, "curve must be nondecreasing");
        }
    }
    println!("criterion 3 (trade-off endpoints and monotonicity): PASS");
}

#[test]
fn criterion_4_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let deltas = [0.7, 0.8, 0.9, 0.95];
    let mut worst_gap = 0.0f64;
    for i in 0..200 {
        let g = random_group(&mut rng, 2, 3);
        let delta = deltas[i % deltas.len()];
        let bounds = delta_bounds(&g, delta);
        let sol = solve_group(&g, &bounds).unwrap();
        let r = grid_oracle(&g, &bounds, GridSpec { step: 0.005 }).unwrap();
        let gap = (sol.beta_star - r.beta_grid).abs();
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= 0.01,
            "instance {i} (delta {delta}): closed {} vs grid {}",
            sol.beta_star,
            r.beta_grid
        );
        assert!(r.beta_grid >= sol.beta_star - 1e-9, "grid beat the optimum");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "criterion 4 (closed form vs grid oracle, 200 instances, worst gap {worst_gap:.2e}): PASS ({elapsed:?})"
    );
}

#[test]
fn criterion_5_solution_validity() {
    let ds = small_dataset();
    let spec = FidelitySpec::delta(0.9);
    let bounds = spec.bounds_for(&ds).unwrap();
    let mut cases: Vec<(QidGroup, Vec<atrp_core::Interval>)> = partition_by_qid(&ds)
        .into_iter()
        .map(|g| {
            let b = bounds.for_group(&g);
            (g, b)
        })
        .collect();
    let mut rng = StdRng::seed_from_u64(501);
    for _ in 0..500 {
        let g = random_group(&mut rng, 1, 6);
        let b = if rng.gen_bool(0.8) {
            delta_bounds(&g, rng.gen_range(0.0..=1.0))
        } else {
            let alpha = rng.gen_range(0.0..=1.0);
            g.members
                .iter()
                .map(|m| atrp_core::bounds_from_alpha(m.d, alpha))
                .collect()
        };
        cases.push((g, b));
    }
    for (g, b) in &cases {
        let sol = solve_group(g, b).unwrap();
        for (v, iv) in sol.d_tilde.iter().zip(b) {
            assert!(iv.contains(*v, 1e-9), "announced rule outside bounds");
        }
        assert!(
            check_beta_in(g, &sol.d_tilde, sol.beta_star).ok,
            "confidence exceeds beta_star"
        );
        assert!(
            !check_beta_in(g, &sol.d_tilde, sol.beta_star - 1e-4).ok,
            "announcement is not an optimality witness"
        );
    }
    println!("criterion 5 (solution validity on {} groups): PASS", cases.len());
}

#[test]
fn criterion_6_structural_invariants() {
    let mut rng = StdRng::seed_from_u64(600);
    for _ in 0..1000 {
        let g = random_group(&mut rng, 1, 6);
        assert!(c_star(&g) >= beta_min(&g) - 1e-12, "C* below beta_min");
    }

    let mut rng = StdRng::seed_from_u64(601);
    let mut balanced_seen = 0;
    for _ in 0..400 {
        let g = random_group(&mut rng, 2, 6);

        // Full fidelity: the true mapping is already optimal.
        let sol = solve_group(&g, &delta_bounds(&g, 1.0)).unwrap();
        assert_close(sol.beta_star, c_star(&g), 1e-12, "beta_star at delta=1");
        for (v, m) in sol.d_tilde.iter().zip(&g.members) {
            assert_close(*v, m.d, 1e-12, "announced rule at delta=1");
        }

        // No fidelity: the privacy limit is reachable.
        let sol = solve_group(&g, &delta_bounds(&g, 0.0)).unwrap();
        assert_close(sol.beta_star, beta_min(&g), 1e-12, "beta_star at delta=0");

        // Anchor collapse and balance equations at a generic delta.
        let delta = rng.gen_range(0.3..1.0);
        let bounds = delta_bounds(&g, delta);
        let sol = solve_group(&g, &bounds).unwrap();
        let ws = atrp_core::compute_workspace(&g, &bounds, sol.beta_star);
        let pi = ws.anchor[1];
        assert_close(ws.x_eff[pi].lo, bounds[pi].lo, 1e-12, "anchor x collapse (lo)");
        assert_close(ws.x_eff[pi].hi, bounds[pi].lo, 1e-12, "anchor x collapse (hi)");
        let theta = ws.anchor[0];
        let y_lo = bounds[theta].mirror().lo;
        assert_close(ws.y_eff[theta].lo, y_lo, 1e-12, "anchor y collapse (lo)");
        assert_close(ws.y_eff[theta].hi, y_lo, 1e-12, "anchor y collapse (hi)");

        if sol.case == SolveCase::BetaP {
            balanced_seen += 1;
            let tau_pos = g.members[pi].p * bounds[pi].lo;
            let tau_neg = g.members[theta].p * y_lo;
            let sum_x: f64 = g.members.iter().zip(&sol.d_tilde).map(|(m, &v)| m.p * v).sum();
            let sum_y: f64 = g
                .members
                .iter()
                .zip(&sol.d_tilde)
                .map(|(m, &v)| m.p * (1.0 - v))
                .sum();
            assert_close(sum_x, tau_pos / sol.beta_star, 1e-9, "positive balance equation");
            assert_close(sum_y, tau_neg / sol.beta_star, 1e-9, "negative balance equation");
        }
    }
    assert!(balanced_seen > 0, "no balanced case sampled");
    println!("criterion 6 (structural invariants, {balanced_seen} balanced cases): PASS");
}

#[test]
fn criterion_7_attack_reproduction() {
    let ds = parse_dataset(TABLE1_CSV, &roles()).unwrap();
    let census = SideInformation::from_csv(CENSUS_CSV, &["gender".into()], &["income".into()]).unwrap();
    let rules = RuleTable::from_rules(&ds, &ds.rules());

    // Posterior attack on the published table.
    let dist = posterior_distribution(&census, &rules, &["M".into()], 1).unwrap();
    let high = dist.iter().find(|e| e.sensitive == vec![">200k".to_string()]).unwrap();
    assert_close(high.posterior, 0.363, 5e-3, "male high-income posterior");
    assert_close(high.amplification, 10.4, 0.5, "amplification");

    // Inversion of the published measures.
    let input = InversionInput {
        group_attr: "gender".into(),
        groups: ["F".into(), "M".into()],
        rates: [2.0 / 150.0, 0.1],
        condition_attr: "income".into(),
        conditions: vec!["<100k".into(), "100k~200k".into(), ">200k".into()],
        csp_bias: vec![0.0, 0.5, 0.0],
        known: (0, 0, 0.0),
    };
    let inv = fairness_inversion(&census, &input, DEFAULT_SLACK).unwrap();
    assert_close(inv.intermediate[0][1], 0.0088, 1e-3, "intermediate d12");
    assert_close(inv.intermediate[0][2], 1.0692, 1e-3, "intermediate d13");
    assert_close(inv.recovered[0][0], 0.0, 1e-3, "final d11");
    assert_close(inv.recovered[0][1], 0.0013, 1e-3, "final d12");
    assert_close(inv.recovered[0][2], 1.0, 1e-3, "final d13");

    // Inversion against the perturbed report stays under the guarantee.
    let small = small_dataset();
    let sol = solve_master(&small, &FidelitySpec::delta(0.9)).unwrap();
    let side = SideInformation::empirical(&small);
    let announced = &sol.mapping.d_tilde;
    let rate = |gv: &str| {
        group_rate(&small, announced, &GroupSelector::new(vec![("gender", gv)])).unwrap()
    };
    let band_bias = |band: &str| {
        sp_bias(
            &small,
            announced,
            &GroupSelector::new(vec![("gender", "F"), ("income", band)]),
            &GroupSelector::new(vec![("gender", "M"), ("income", band)]),
        )
        .unwrap()
    };
    let input = InversionInput {
        group_attr: "gender".into(),
        groups: ["F".into(), "M".into()],
        rates: [rate("F"), rate("M")],
        condition_attr: "income".into(),
        conditions: vec!["<100k".into(), "100k~200k".into(), ">200k".into()],
        csp_bias: vec![band_bias("<100k"), band_bias("100k~200k"), band_bias(">200k")],
        known: (0, 0, sol.mapping.d_tilde[0]),
    };
    let inv = fairness_inversion(&side, &input, DEFAULT_SLACK).unwrap();
    assert!(
        inv.max_posterior <= 0.675 + 1e-6,
        "perturbed report leaked: {}",
        inv.max_posterior
    );
    println!("criterion 7 (attack reproduction and post-perturbation guarantee): PASS");
}

#[test]
fn criterion_8_linear_time_scaling() {
    fn synthetic(m: usize, seed: u64) -> (QidGroup, Vec<atrp_core::Interval>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..100.0)).collect();
        let total: f64 = weights.iter().sum::<f64>() * 2.0;
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let d: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let bounds = d.iter().map(|&d| atrp_core::bounds_from_delta(d, 0.9)).collect();
        (QidGroup::from_parts(&p, &d), bounds)
    }
    fn median_secs(g: &QidGroup, b: &[atrp_core::Interval]) -> f64 {
        solve_group(g, b).unwrap(); // warm-up
        let mut times: Vec<f64> = (0..3)
            .map(|_| {
                let t = Instant::now();
                let sol = solve_group(g, b).unwrap();
                let dt = t.elapsed().as_secs_f64();
                assert!(sol.beta_star > 0.0);
                dt
            })
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times[1]
    }
    let (g_half, b_half) = synthetic(500_000, 88);
    let (g_full, b_full) = synthetic(1_000_000, 89);
    let t_half = median_secs(&g_half, &b_half);
    let t_full = median_secs(&g_full, &b_full);
    let ratio = t_full / t_half;
    assert!(
        ratio <= 2.5,
        "doubling the group grew time {ratio:.2}x (half {t_half:.4}s, full {t_full:.4}s)"
    );
    println!(
        "criterion 8 (linear scaling, 2x members -> {ratio:.2}x time, median of 3): PASS"
    );
}

#[test]
fn criterion_9_fairness_distortion_bound() {
    let mut rng = StdRng::seed_from_u64(900);
    for _ in 0..100 {
        let text = common::random_dataset_csv(&mut rng);
        let ds = parse_dataset(&text, &SchemaRoles::new(vec!["g"], vec!["s"])).unwrap();
        let delta = rng.gen_range(0.0..=1.0);
        let sol = solve_master(&ds, &FidelitySpec::delta(delta)).unwrap();
        let sel_a = GroupSelector::new(vec![("g", "a")]);
        let sel_b = GroupSelector::new(vec![("g", "b")]);
        let true_bias = sp_bias(&ds, &ds.rules(), &sel_a, &sel_b).unwrap();
        let announced_bias = sp_bias(&ds, &sol.mapping.d_tilde, &sel_a, &sel_b).unwrap();
        let bound = (2.0 * (1.0 - delta)).min(1.0);
        assert!(
            (announced_bias - true_bias).abs() <= bound + 1e-9,
            "distortion {} exceeds bound {bound} at delta {delta}",
            (announced_bias - true_bias).abs()
        );
    }
    println!("criterion 9 (statistical-parity distortion bound, 100 datasets): PASS");
}
