mod common;

use proptest::prelude::*;
use targen_core::metrics::*;
use targen_core::taxonomy::parse_mini;
use targen_core::tokenize::PunctTokenizer;
use targen_core::CandidateRepair;


fn ws(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

#[test]
fn bleu_matches_decimal_oracle() {
    for (c, r, want) in common::goldens::FROZEN_BLEU {
        let got = bleu4(&ws(c), &ws(r));
        assert!((got - want).abs() < 1e-12, "{c:?} vs {r:?}: {got} != {want}");
    }
}

#[test]
fn exact_match_is_token_level() {
    let tok = PunctTokenizer;
    let gt = vec!["account.deposit(500, \"USD\");"];
    let cands = vec![vec!["x();"], vec!["account . deposit( 500,\"USD\" ) ;"]];
    assert!(exact_match(&tok, &cands, &gt));
    assert!(!exact_match(&tok, &cands[..1], &gt));
    assert!(!exact_match::<&str>(&tok, &[], &gt));
}

#[test]
fn exact_match_found_deep_in_beam() {
    let tok = PunctTokenizer;
    let gt = vec!["f(17);".to_string()];
    let cands: Vec<CandidateRepair> = (1..=40)
        .map(|r| {
            let mut c = CandidateRepair::new(format!("f({r});"), -(r as f64), r);
            c.repaired = Some(vec![c.text.clone()]);
            c
        })
        .collect();
    assert_eq!(select_best(&tok, &cands, &gt).unwrap().rank, 17);
    assert_eq!(select_best(&tok, &cands[..1], &gt).unwrap().rank, 1);
}

#[test]
fn codebleu_identity_and_structure() {
    let tok = PunctTokenizer;
    let a = ["int x = foo(y);", "x.run(y);"];
    let c = codebleu(&tok, &a, &a);
    assert_eq!(c.score, 1.0);
    let renamed = ["int z = foo(w);", "z.run(w);"];
    let c = codebleu(&tok, &renamed, &a);
    assert_eq!(c.syntax, 1.0);
    assert_eq!(c.dataflow, 1.0);
    assert!(c.bleu < 1.0);
    // same tokens, different nesting
    let reshaped = ["foo(x.run(y));"];
    let flat = ["foo(x).run(y);"];
    let s = syntax_match(&parse_mini(&reshaped), &parse_mini(&flat));
    assert!(s < 1.0, "{s}");
}

#[test]
fn codebleu_flags_unparseable_side() {
    let tok = PunctTokenizer;
    let c = codebleu(&tok, &["%% ) garbage ("], &["a.b(1);"]);
    assert!(c.fallback);
    assert_eq!(c.syntax, 0.0);
    assert_eq!(c.dataflow, 0.0);
}

fn row(em: bool, plausible: bool, bleu: f64) -> InstanceResult {
    InstanceResult { id: "x".into(), em, plausible, bleu, codebleu: bleu, best_rank: Some(1), fallback: false }
}

#[test]
fn aggregate_percentages() {
    let r = aggregate(vec![row(true, true, 1.0), row(true, true, 1.0), row(false, true, 0.5), row(false, true, 0.0)]).unwrap();
    assert_eq!(r.em, 50.0);
    assert_eq!(r.pr, 100.0);
    assert_eq!(r.bleu, 62.5);
    assert_eq!(r.n, 4);
    assert!(aggregate(vec![]).is_err());
    let single = aggregate(vec![row(true, false, 0.25)]).unwrap();
    assert_eq!((single.em, single.pr, single.bleu, single.codebleu), (100.0, 0.0, 25.0, 25.0));
}

fn token_seq() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..6, 0..14)
}

proptest! {
    #[test]
    fn bleu_bounded_and_reflexive(c in token_seq(), r in token_seq()) {
        let v = bleu4(&c, &r);
        prop_assert!((0.0..=1.0).contains(&v));
        if !c.is_empty() {
            prop_assert_eq!(bleu4(&c, &c), 1.0);
        }
    }

    #[test]
    fn bleu_monotone_when_matches_are_removed(r in prop::collection::vec(0u8..6, 1..14), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let mut cand = r.clone();
        let mut prev = bleu4(&cand, &r);
        for ix in picks {
            let k = ix.index(cand.len());
            cand[k] = 200 + k as u8;
            let v = bleu4(&cand, &r);
            prop_assert!(v <= prev + 1e-12, "{v} > {prev}");
            prev = v;
        }
    }
}
