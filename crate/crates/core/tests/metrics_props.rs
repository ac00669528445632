use std::collections::{BTreeMap, HashSet};

use ciff_kit::eval::{average_precision, err_at_k, ndcg_at_k, precision_at_k, Judgments};
use proptest::prelude::*;

fn docs(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d{i}")).collect()
}

fn instance() -> impl Strategy<Value = (Vec<String>, Judgments)> {
    (1usize..40).prop_flat_map(|n| {
        (Just(docs(n)).prop_shuffle(), prop::collection::vec(prop::option::of(0u32..4), n), 0usize..=n)
            .prop_map(|(ranking, grades, cut)| {
                let judged: Judgments =
                    grades.iter().enumerate().filter_map(|(i, g)| g.map(|g| (format!("d{i}"), g))).collect();
                (ranking[..cut].to_vec(), judged)
            })
    })
}

fn relevant(j: &Judgments, d: &str) -> bool {
    j.get(d).is_some_and(|&g| g >= 1)
}

fn brute_ap(ranking: &[String], j: &Judgments, cutoff: usize) -> f64 {
    let r = j.values().filter(|&&g| g >= 1).count();
    if r == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 1..=ranking.len().min(cutoff) {
        if relevant(j, &ranking[k - 1]) {
            let hits = ranking[..k].iter().filter(|d| relevant(j, d)).count();
            total += hits as f64 / k as f64;
        }
    }
    total / r as f64
}

fn brute_p(ranking: &[String], j: &Judgments, k: usize) -> f64 {
    ranking.iter().take(k).filter(|d| relevant(j, d)).count() as f64 / k as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ap_and_precision_match_brute_force((ranking, judged) in instance(), k in 1usize..50) {
        prop_assert!((average_precision(&ranking, &judged, 1000) - brute_ap(&ranking, &judged, 1000)).abs() < 1e-12);
        prop_assert!((precision_at_k(&ranking, &judged, k) - brute_p(&ranking, &judged, k)).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_bounded((ranking, judged) in instance(), k in 1usize..50) {
        let gmax = judged.values().copied().max().unwrap_or(0);
        for v in [
            average_precision(&ranking, &judged, 1000),
            precision_at_k(&ranking, &judged, k),
            ndcg_at_k(&ranking, &judged, k),
            err_at_k(&ranking, &judged, k, gmax).unwrap(),
        ] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn err_is_monotone_in_depth((ranking, judged) in instance()) {
        let gmax = judged.values().copied().max().unwrap_or(0);
        let mut previous = 0.0;
        for k in 1..=ranking.len() + 1 {
            let v = err_at_k(&ranking, &judged, k, gmax).unwrap();
            prop_assert!(v >= previous);
            previous = v;
        }
    }

    #[test]
    fn ideal_ordering_has_unit_ndcg((_, judged) in instance(), k in 1usize..50) {
        prop_assume!(judged.values().any(|&g| g > 0));
        let mut ideal: Vec<(&String, u32)> = judged.iter().map(|(d, &g)| (d, g)).collect();
        ideal.sort_by_key(|&(_, g)| std::cmp::Reverse(g));
        let ranking: Vec<String> = ideal.into_iter().map(|(d, _)| d.clone()).collect();
        prop_assert!((ndcg_at_k(&ranking, &judged, k) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_equal_grades_changes_nothing((ranking, judged) in instance(), k in 1usize..50) {
        let grade = |d: &String| judged.get(d).copied().unwrap_or(0);
        let mut swapped = ranking.clone();
        let mut by_grade: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, d) in ranking.iter().enumerate() {
            by_grade.entry(grade(d)).or_default().push(i);
        }
        for positions in by_grade.values() {
            let mut docs: Vec<String> = positions.iter().map(|&i| ranking[i].clone()).collect();
            docs.reverse();
            for (&i, d) in positions.iter().zip(docs) {
                swapped[i] = d;
            }
        }
        let gmax = judged.values().copied().max().unwrap_or(0);
        prop_assert_eq!(precision_at_k(&ranking, &judged, k), precision_at_k(&swapped, &judged, k));
        prop_assert!((ndcg_at_k(&ranking, &judged, k) - ndcg_at_k(&swapped, &judged, k)).abs() < 1e-12);
        prop_assert!((err_at_k(&ranking, &judged, k, gmax).unwrap() - err_at_k(&swapped, &judged, k, gmax).unwrap()).abs() < 1e-12);
        prop_assert!((average_precision(&ranking, &judged, 1000) - average_precision(&swapped, &judged, 1000)).abs() < 1e-12);
        let unique: HashSet<&String> = swapped.iter().collect();
        prop_assert_eq!(unique.len(), swapped.len());
    }
}
