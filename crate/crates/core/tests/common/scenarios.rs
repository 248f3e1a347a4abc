use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use targen_core::hunks::instance_context_sets;
use targen_core::prioritize::*;
use targen_core::tokenize::PunctTokenizer;
use targen_core::*;

use super::running_example;

fn hunk(file: &str, line: usize, deleted: &[&str], added: &[&str]) -> Hunk {
    Hunk {
        file: file.into(),
        level: HunkLevel::Class,
        enclosing: "bank.BankAccount".into(),
        deleted_lines: deleted.iter().map(|s| s.to_string()).collect(),
        added_lines: added.iter().map(|s| s.to_string()).collect(),
        old_start: line,
        new_start: line,
        context_before: vec![],
        context_after: vec![],
    }
}

/// Three hunks with token-identical changes: the same addition in two
/// files and a deletion in a file that sorts first.
pub fn repetition_instance() -> RepairInstance {
    let line = "account.deposit(500);";
    let mut inst = running_example();
    inst.sut_hunks = vec![
        hunk("src/Aaa.java", 1, &[line], &[]),
        hunk("src/One.java", 5, &[], &[line]),
        hunk("src/Two.java", 5, &[], &[line]),
    ];
    inst
}

pub fn ordered_files(inst: &RepairInstance, strategy: Strategy) -> Vec<String> {
    let sets = instance_context_sets(inst);
    let pr = compute_priorities(inst, &sets, &PunctTokenizer);
    prioritize(&inst.sut_hunks, &pr, strategy).unwrap().into_iter().map(|i| inst.sut_hunks[i].file.clone()).collect()
}

const WORDS: [&str; 8] = ["account", "deposit", "balance", "amount", "(", ")", ";", "500"];
const METHODS: [&str; 3] = ["bank.BankAccount.deposit(int)", "bank.BankAccount.getBalance()", "bank.Other.run()"];

fn random_hunks(rng: &mut ChaCha8Rng) -> Vec<Hunk> {
    let n = rng.random_range(2..=8);
    (0..n)
        .map(|k| {
            let line: String = (0..rng.random_range(1..6)).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ");
            let mut h = hunk(&format!("src/F{}.java", rng.random_range(0..3)), 10 * k + 1, &[], &[&line]);
            if rng.random_bool(0.5) {
                h.level = HunkLevel::Method;
                h.enclosing = METHODS[rng.random_range(0..METHODS.len())].into();
            } else {
                h.enclosing = if rng.random_bool(0.5) { "bank.BankAccount".into() } else { "bank.Other".into() };
            }
            h
        })
        .collect()
}

/// Shuffles random hunk sets and checks that the ranking of hunk identities
/// does not depend on input order, for every strategy that accepts the set.
pub fn permutation_property(sets: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for case in 0..sets {
        let mut inst = running_example();
        inst.sut_hunks = random_hunks(&mut rng);
        for strategy in [Strategy::Hp1, Strategy::Hp2] {
            let key = |inst: &RepairInstance| -> Option<Vec<(String, usize)>> {
                let sets = instance_context_sets(inst);
                let pr = compute_priorities(inst, &sets, &PunctTokenizer);
                let order = prioritize(&inst.sut_hunks, &pr, strategy).ok()?;
                Some(order.into_iter().map(|i| (inst.sut_hunks[i].file.clone(), inst.sut_hunks[i].old_start)).collect())
            };
            let base = key(&inst);
            let mut shuffled = inst.clone();
            shuffled.sut_hunks.shuffle(&mut rng);
            if base != key(&shuffled) {
                return Err(format!("set {case} ({strategy:?}): order changed under permutation"));
            }
            checked += base.is_some() as usize;
        }
    }
    Ok(checked)
}
