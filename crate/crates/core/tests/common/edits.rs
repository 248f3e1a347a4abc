use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use targen_core::diff::{word_diff, GroupKind};
use targen_core::edit_seq::*;
use targen_core::Error;

const VOCAB: [&str; 9] = ["a", "b", "c", "x", "y", ";", "(", ")", "."];

/// Naive occurrence counter; an empty needle matches at every position.
pub fn brute_count(hay: &[String], needle: &[String]) -> usize {
    let mut n = 0;
    for i in 0..=hay.len() {
        if i + needle.len() <= hay.len() && (0..needle.len()).all(|k| hay[i + k] == needle[k]) {
            n += 1;
        }
    }
    n
}

fn brute_apply_one(work: &mut Vec<String>, r: &Replacement) {
    let at = (0..=work.len()).find(|&i| i + r.old_tokens.len() <= work.len() && work[i..i + r.old_tokens.len()] == r.old_tokens[..]).unwrap();
    work.splice(at..at + r.old_tokens.len(), r.new_tokens.iter().cloned());
}

/// Breakage of 1 to 3 lines of 5 to 40 tokens, and a repair made of
/// 1 to 4 random insert, delete or update runs.
pub fn random_case(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let mut broken = Vec::new();
    for line in 0..rng.random_range(1..=3) {
        if line > 0 {
            broken.push("\n".to_string());
        }
        for _ in 0..rng.random_range(5..=40) {
            broken.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
        }
    }
    let mut repaired = broken.clone();
    for _ in 0..rng.random_range(1..=4) {
        let run = rng.random_range(1..=3);
        let fresh = |rng: &mut ChaCha8Rng| -> Vec<String> { (0..run).map(|_| VOCAB[rng.random_range(0..VOCAB.len())].to_string()).collect() };
        match rng.random_range(0..3) {
            0 => {
                let at = rng.random_range(0..=repaired.len());
                let ins = fresh(rng);
                repaired.splice(at..at, ins);
            }
            1 if repaired.len() > run => {
                let at = rng.random_range(0..=repaired.len() - run);
                repaired.drain(at..at + run);
            }
            _ if repaired.len() >= run => {
                let at = rng.random_range(0..=repaired.len() - run);
                let upd = fresh(rng);
                repaired.splice(at..at + run, upd);
            }
            _ => {}
        }
    }
    (broken, repaired)
}

/// Replacements straight from the token diff, with no anchoring context.
fn naive_sequence(b: &[String], r: &[String]) -> EditSequence {
    let mut regions: Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> = Vec::new();
    for g in word_diff(b, r).into_iter().filter(|g| g.kind != GroupKind::Keep) {
        match regions.last_mut() {
            Some((o, n)) if o.end == g.old.start && n.end == g.new.start => {
                o.end = g.old.end;
                n.end = g.new.end;
            }
            _ => regions.push((g.old, g.new)),
        }
    }
    EditSequence {
        replacements: regions
            .into_iter()
            .map(|(o, n)| Replacement { mode: ReplaceMode::Plain, old_tokens: b[o].to_vec(), new_tokens: r[n].to_vec() })
            .collect(),
    }
}

/// Checks an ambiguity report against the naive counter.
fn confirm_ambiguity(tokens: &[String], seq: &EditSequence, index: usize, occurrences: usize) -> Result<(), String> {
    let mut work = tokens.to_vec();
    for r in &seq.replacements[..index] {
        brute_apply_one(&mut work, r);
    }
    let n = brute_count(&work, &seq.replacements[index].old_tokens);
    if n == 1 || n != occurrences {
        return Err(format!("reported {occurrences} occurrences at step {index}, counted {n}"));
    }
    Ok(())
}

#[derive(Debug, Default)]
pub struct Tally {
    pub cases: usize,
    pub encoded: usize,
    pub ambiguities_confirmed: usize,
}

pub fn run_property(cases: usize, seed: u64) -> Result<Tally, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for case in 0..cases {
        let (b, r) = random_case(&mut rng);
        t.cases += 1;
        match encode_edit_sequence(&b, &r) {
            Ok(seq) => {
                let mut work = b.clone();
                for (i, rep) in seq.replacements.iter().enumerate() {
                    let n = brute_count(&work, &rep.old_tokens);
                    if n != 1 {
                        return Err(format!("case {case}: replacement {i} target occurs {n} times"));
                    }
                    brute_apply_one(&mut work, rep);
                }
                if work != r || apply_edit_sequence(&b, &seq).map_err(|e| e.to_string())? != r {
                    return Err(format!("case {case}: round trip differs\n{b:?}\n{r:?}\n{seq:?}"));
                }
                t.encoded += 1;
            }
            Err(Error::Ambiguity { index, occurrences }) => return Err(format!("case {case}: encoder reported ambiguity {index}/{occurrences}")),
            Err(e) => return Err(format!("case {case}: {e}")),
        }
        let naive = naive_sequence(&b, &r);
        if let Err(Error::Ambiguity { index, occurrences }) = apply_edit_sequence(&b, &naive) {
            confirm_ambiguity(&b, &naive, index, occurrences).map_err(|e| format!("case {case}: {e}"))?;
            t.ambiguities_confirmed += 1;
        }
    }
    Ok(t)
}
