use std::collections::HashMap;

use targen_core::engine::*;
use targen_core::metrics::{evaluate, EvalReport};
use targen_core::prompt::{Codec, IoConfig, IoFormat};
use targen_core::tokenize::PunctTokenizer;
use targen_core::RepairInstance;

use super::{logs, toy_corpus};

/// Backend that answers each prompt of `corpus` with its ground truth at
/// `gt_rank` among `beam` candidates; the other slots hold junk.
pub fn oracle_backend(codec: &Codec, corpus: &[RepairInstance], config: &IoConfig, gt_rank: usize) -> impl Backend {
    let answers: HashMap<String, String> = corpus
        .iter()
        .map(|inst| {
            let order = codec.ordered_hunks(inst, config).unwrap();
            let input = codec.build_input(inst, config, &order).unwrap().text;
            (input, codec.expected_output(inst, config).unwrap())
        })
        .collect();
    StubBackend(move |req: &GenerationRequest| {
        let gt = answers.get(&req.input).cloned().unwrap_or_default();
        (1..=req.beam_size)
            .map(|rank| RawCandidate { text: if rank == gt_rank { gt.clone() } else { format!("fail({rank});") }, score: -(rank as f64) })
            .collect()
    })
}

pub struct Run {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
    pub executor_calls: usize,
}

/// Repairs the 20-instance toy corpus and validates candidates with a
/// replay executor that knows only the ground-truth patches.
pub fn toy_run(format: IoFormat, gt_rank: usize, beam: usize) -> Run {
    let codec = Codec::default();
    let corpus = toy_corpus(20);
    let config = IoConfig::new(format);
    let backend = oracle_backend(&codec, &corpus, &config, gt_rank);
    let mut replay = ReplayExecutor::new();
    for inst in &corpus {
        replay.insert(&inst.repaired_test.source, logs::PASS);
    }
    let cache = ExecutionCache::new();
    let predictions: Vec<Prediction> = corpus
        .iter()
        .map(|inst| {
            let mut p = repair_instance(&codec, inst, &config, &backend, beam).unwrap();
            plausibility(&codec, inst, &mut p.candidates, config.output, &replay, &cache);
            p
        })
        .collect();
    let report = evaluate(&PunctTokenizer, &corpus, &predictions).unwrap();
    Run { report, predictions, executor_calls: cache.executor_calls() }
}
