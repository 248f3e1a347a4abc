mod common;

use common::goldens::IO3_GOLDEN;
use common::*;
use targen_core::edit_seq::*;
use targen_core::engine::{apply_candidate, repaired_lines};
use targen_core::hunks::instance_context_sets;
use targen_core::prioritize::*;
use targen_core::prompt::*;
use targen_core::special::SpecialTokens;
use targen_core::tokenize::{line_stream, PunctTokenizer};
use targen_core::*;


fn method_and_class_ids(inst: &RepairInstance) -> (usize, usize) {
    let m = inst.sut_hunks.iter().position(|h| h.level == HunkLevel::Method).unwrap();
    let c = inst.sut_hunks.iter().position(|h| h.level == HunkLevel::Class).unwrap();
    (m, c)
}

#[test]
fn instance_is_valid_with_two_hunks() {
    let inst = running_example();
    inst.validate().unwrap();
    assert_eq!(inst.sut_hunks.len(), 2);
    assert_eq!(inst.breakage.line_set().into_iter().collect::<Vec<_>>(), vec![3, 4]);
    let (m, c) = method_and_class_ids(&inst);
    assert_eq!(inst.sut_hunks[m].enclosing, "bank.BankAccount.deposit(int)");
    assert_eq!(inst.sut_hunks[c].enclosing, "bank.BankAccount");
    assert_eq!(inst.sut_hunks[c].added_lines.len(), 2);
}

#[test]
fn both_hunks_at_depth_one_and_hp1_puts_method_first() {
    let inst = running_example();
    let (m, c) = method_and_class_ids(&inst);
    let sets = instance_context_sets(&inst);
    let pr = compute_priorities(&inst, &sets, &PunctTokenizer);
    assert_eq!(pr[m].depth, Some(1));
    assert_eq!(pr[c].depth, Some(1));
    assert_eq!(pr[m].context_type, ContextType::Method);
    assert_eq!(pr[c].context_type, ContextType::Class);
    assert_eq!(prioritize(&inst.sut_hunks, &pr, Strategy::Hp1).unwrap(), vec![m, c]);
}

#[test]
fn word_level_rendering_matches_figure_when_method_hunk_leads() {
    let inst = running_example();
    let (m, c) = method_and_class_ids(&inst);
    let codec = Codec::default();
    let input = codec.build_input(&inst, &IoConfig::new(IoFormat::Io3), &[m, c]).unwrap();
    assert_eq!(input.text, IO3_GOLDEN);
    assert_eq!(input.included, vec![m, c]);
}

#[test]
fn io3_expected_output_is_repaired_lines() {
    let inst = running_example();
    let out = Codec::default().expected_output(&inst, &IoConfig::new(IoFormat::Io3)).unwrap();
    assert_eq!(out, "BankAccount account = new BankAccount(\"USD\");\naccount.deposit(500, \"USD\");");
}

#[test]
fn io4_output_round_trips_through_apply() {
    let inst = running_example();
    let codec = Codec::default();
    let text = codec.expected_output(&inst, &IoConfig::new(IoFormat::Io4)).unwrap();
    let lines = repaired_lines(&codec, &inst.breakage_lines(), &text, OutputKind::EditSequence).unwrap();
    assert_eq!(lines, vec!["BankAccount account = new BankAccount(\"USD\");", "account.deposit(500, \"USD\");"]);
    let mut cand = CandidateRepair::new(text, 0.0, 1);
    cand.repaired = Some(lines);
    let patched = apply_candidate(&codec, &inst.broken_test.source, &inst.breakage, &cand, OutputKind::EditSequence).unwrap();
    assert_eq!(patched, inst.repaired_test.source);
}

fn toks(s: &str) -> Vec<String> {
    line_stream(&PunctTokenizer, &s.lines().collect::<Vec<_>>())
}

#[test]
fn single_replacement_edit_sequence() {
    let b = toks("account.deposit (amount, \"EUR\" ) ;");
    let r = toks("account.deposit (new Money ( amount ), \"EUR\" ) ;");
    let seq = encode_edit_sequence(&b, &r).unwrap();
    assert_eq!(seq.len(), 1);
    assert_eq!(seq.replacements[0].mode, ReplaceMode::Plain);
    assert_eq!(seq.serialize(&SpecialTokens::default()), "[<replaceOld>] amount [<replaceNew>] new Money ( amount ) [<replaceEnd>]");
    assert_eq!(apply_edit_sequence(&b, &seq).unwrap(), r);
}

#[test]
fn three_replacement_edit_sequence_with_new_line() {
    let b = toks("BankAccount account = new BankAccount( ) ;");
    let r = toks("ChequingAccount account = new ChequingAccount( ) ;\naccount.setCurrency ( \"USD\" ) ;");
    let seq = encode_edit_sequence(&b, &r).unwrap();
    let modes: Vec<ReplaceMode> = seq.replacements.iter().map(|x| x.mode).collect();
    assert_eq!(modes, vec![ReplaceMode::KeepAfter, ReplaceMode::KeepBefore, ReplaceMode::KeepBefore]);
    assert_eq!(
        seq.serialize(&SpecialTokens::default()),
        "[<replaceOldKeepAfter>] BankAccount account [<replaceNewKeepAfter>] ChequingAccount account [<replaceEnd>] \
         [<replaceOldKeepBefore>] new BankAccount [<replaceNewKeepBefore>] new ChequingAccount [<replaceEnd>] \
         [<replaceOldKeepBefore>] ; [<replaceNewKeepBefore>] ; \n account . setCurrency ( \"USD\" ) ; [<replaceEnd>]"
    );
    assert_eq!(apply_edit_sequence(&b, &seq).unwrap(), r);
}
