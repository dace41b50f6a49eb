//! Property tests over the pure parts of the pipeline.

use std::path::Path;

use jvm_testgen::code_model::parse_compilation_unit;
use jvm_testgen::complexity::{
    bin_of, fit_normalization, init_complexity, ComplexityScore, ComplexityWeights, InitFeatures, DEFAULT_WEIGHTS,
};
use jvm_testgen::pipeline::{aggregate, ccn_group, Counters, Outcome, SessionRecord};
use jvm_testgen::seed_miner::{assertion_count, marker_count, strip_assertions, AssertionNames};
use jvm_testgen::toolchain::{apply_lightweight_fixes, ImportTable};
use proptest::prelude::*;

fn features() -> impl Strategy<Value = InitFeatures> {
    (0u32..40, 0u32..40, 0u32..40, 0u32..40).prop_map(|(v, o, m, p)| InitFeatures::new(v, o, m, p))
}

fn weights() -> impl Strategy<Value = ComplexityWeights> {
    prop::array::uniform4(0.0f64..1.0).prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3).prop_filter_map(
        "normalizable",
        |w| {
            let s: f64 = w.iter().sum();
            let mut n = w.map(|x| x / s);
            n[3] = 1.0 - n[0] - n[1] - n[2];
            ComplexityWeights::new(n).ok()
        },
    )
}

proptest! {
    #[test]
    fn score_stays_in_range(corpus in prop::collection::vec(features(), 1..20), w in weights()) {
        let stats = fit_normalization(&corpus).unwrap();
        for f in &corpus {
            let s = init_complexity(*f, &stats, &w);
            prop_assert!((0.0..=10.0).contains(&s.scaled));
            prop_assert_eq!(s.bin, bin_of(s.scaled));
            prop_assert!(s.bin <= 9);
        }
    }

    #[test]
    fn score_is_monotone_per_feature(corpus in prop::collection::vec(features(), 2..20), axis in 0usize..4) {
        let w = ComplexityWeights::new(DEFAULT_WEIGHTS).unwrap();
        let stats = fit_normalization(&corpus).unwrap();
        let mut sorted = corpus.clone();
        let key = |f: &InitFeatures| [f.variables, f.objects, f.calls, f.params][axis];
        sorted.sort_by_key(key);
        let lo = sorted[0];
        let mut hi = lo;
        let top = key(sorted.last().unwrap());
        match axis {
            0 => hi.variables = top,
            1 => hi.objects = top,
            2 => hi.calls = top,
            _ => hi.params = top,
        }
        prop_assert!(init_complexity(lo, &stats, &w).scaled <= init_complexity(hi, &stats, &w).scaled + 1e-12);
    }

    #[test]
    fn raw_score_clamps(raw in -5.0f64..5.0) {
        let s = ComplexityScore::from_raw(raw);
        prop_assert!((0.0..=1.0).contains(&s.raw));
        prop_assert!((s.scaled - 10.0 * s.raw).abs() < 1e-12);
    }

    #[test]
    fn bad_weights_rejected(w in prop::array::uniform4(-1.0f64..2.0)) {
        let ok = w.iter().all(|x| *x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        prop_assert_eq!(ComplexityWeights::new(w).is_ok(), ok);
    }

    #[test]
    fn ccn_groups_partition(n in 1u32..200) {
        let g = ccn_group(n);
        if n <= 14 {
            prop_assert_eq!(g, n.to_string());
        } else {
            prop_assert_eq!(g, ">14");
        }
    }
}

/// One JUnit statement drawn from the forms the stripper has to handle.
fn statement() -> impl Strategy<Value = (String, bool)> {
    let a = prop_oneof![
        (0i32..100).prop_map(|n| format!("assertEquals({n}, list.size());")),
        Just("assertTrue(list.isEmpty());".to_string()),
        Just("Assert.assertNotNull(list);".to_string()),
        Just("org.junit.Assert.assertFalse(list.contains(3));".to_string()),
        Just("assertThat(list.size(), org.hamcrest.CoreMatchers.is(0));".to_string()),
        Just("fail(\"unreachable\");".to_string()),
    ]
    .prop_map(|s| (s, true));
    let plain = prop_oneof![
        (0i32..100).prop_map(|n| format!("list.add({n});")),
        Just("int k = list.size();".to_string()),
        Just("list.clear();".to_string()),
        Just("String s = \"assertEquals(1, 2);\";".to_string()),
    ]
    .prop_map(|s| (s, false));
    prop_oneof![a, plain]
}

fn test_class(bodies: &[Vec<(String, bool)>]) -> String {
    let mut src = String::from(
        "package p;\nimport java.util.*;\nimport org.junit.Test;\nimport static org.junit.Assert.*;\nimport static org.hamcrest.MatcherAssert.assertThat;\npublic class LTest {\n",
    );
    for (i, body) in bodies.iter().enumerate() {
        src.push_str(&format!(
            "    @Test\n    public void t{i}() {{\n        List<Integer> list = new ArrayList<>();\n"
        ));
        for (s, _) in body {
            src.push_str("        ");
            src.push_str(s);
            src.push('\n');
        }
        src.push_str("    }\n");
    }
    src.push_str("}\n");
    src
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn stripping_removes_every_assertion(bodies in prop::collection::vec(prop::collection::vec(statement(), 0..8), 1..4)) {
        let names = AssertionNames::default();
        let src = test_class(&bodies);
        let expected = bodies.iter().flatten().filter(|(_, a)| *a).count();
        prop_assert_eq!(assertion_count(&src, &names), Some(expected));
        let (out, removed) = strip_assertions(&src, &names).unwrap();
        prop_assert_eq!(removed, expected);
        prop_assert_eq!(marker_count(&out), expected);
        prop_assert_eq!(assertion_count(&out, &names), Some(0));
        let (again, n) = strip_assertions(&out, &names).unwrap();
        prop_assert_eq!(n, 0);
        prop_assert_eq!(again, out.clone());
        prop_assert!(out.contains("String s = \"assertEquals(1, 2);\";") || !src.contains("String s ="));
    }

    #[test]
    fn lightweight_fixes_reach_a_fixed_point(
        pkg in prop_oneof![Just(None), Just(Some("wrong.pkg"))],
        fenced in any::<bool>(),
        name in "[A-Z][a-z]{2,6}Test",
        uses_list in any::<bool>(),
    ) {
        let cls = parse_compilation_unit(
            "package com.shop;\npublic class Cart { public int count() { return 0; } }\n",
            Path::new("com/shop/Cart.java"),
        ).unwrap().remove(0);
        let table = ImportTable::new(Default::default());
        let mut code = String::new();
        if let Some(p) = pkg {
            code.push_str(&format!("package {p};\n"));
        }
        code.push_str(&format!("import org.junit.Test;\npublic class {name} {{\n  @Test public void t() {{\n    Cart c = new Cart();\n"));
        if uses_list {
            code.push_str("    List<String> l = new ArrayList<>();\n");
        }
        code.push_str("  }\n}\n");
        if fenced {
            code = format!("Here you go:\n```java\n{code}```\n");
        }
        let once = apply_lightweight_fixes(&code, "Cart_count_Test", &cls, &table);
        let twice = apply_lightweight_fixes(&once, "Cart_count_Test", &cls, &table);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.starts_with("package com.shop;"));
        prop_assert!(once.contains("public class Cart_count_Test"));
        prop_assert!(!once.contains("```"));
        prop_assert_eq!(once.contains("import java.util.List;"), uses_list);
    }
}

fn record(i: usize, compiled: bool, passed: bool, ccn: u32) -> SessionRecord {
    SessionRecord {
        project: "p".into(),
        focal_signature: format!("a.B#m{i}()"),
        focal_class: "a.B".into(),
        focal_method: format!("m{i}"),
        test_class: format!("B_m{i}_Test"),
        init_complexity: Some(ComplexityScore::from_raw((i % 11) as f64 / 10.0)),
        ccn,
        outcome: Outcome {
            compiled,
            tests_passed: compiled && passed,
            partial_valid: compiled && !passed,
            ..Outcome::default()
        },
        counters: Counters::default(),
        stages: vec![],
        mining: None,
        seed_status: None,
        used_fallback: false,
        test_file: None,
        errors: vec![],
    }
}

proptest! {
    #[test]
    fn rates_follow_counts(flags in prop::collection::vec((any::<bool>(), any::<bool>(), 1u32..30), 0..40)) {
        let records: Vec<_> = flags.iter().enumerate().map(|(i, (c, p, n))| record(i, *c, *p, *n)).collect();
        let agg = aggregate(&records);
        let n = records.len();
        let compiled = flags.iter().filter(|(c, _, _)| *c).count();
        let passed = flags.iter().filter(|(c, p, _)| *c && *p).count();
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        prop_assert_eq!(agg.overall.focal_methods, n);
        prop_assert!((agg.overall.compile_pass_rate - rate(compiled, n)).abs() < 1e-12);
        prop_assert!((agg.overall.test_pass_rate - rate(passed, n)).abs() < 1e-12);
        prop_assert!((agg.overall.test_pass_rate_compiled - rate(passed, compiled)).abs() < 1e-12);
        prop_assert_eq!(agg.by_ccn.iter().map(|r| r.rates.focal_methods).sum::<usize>(), n);
        prop_assert_eq!(agg.by_init_bin.iter().map(|r| r.rates.focal_methods).sum::<usize>(), n);
    }
}
