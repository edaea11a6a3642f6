//! Synthetic datasets. The generator draws keywords from a Zipf-like
//! distribution, adds documents up to a triple budget, and deletes a
//! fraction of them (whole documents, never reusing an id).

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use std::collections::BTreeSet;

use csse_core::{DocId, Keyword, Op, SearchQuery, UpdateTriple};

use crate::ingest::{DatasetRecord, Ledger, RecordOp};

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    /// Upper bound on add plus delete triples.
    pub max_triples: usize,
    pub vocab: usize,
    pub min_keywords: usize,
    pub max_keywords: usize,
    /// Fraction of added documents that are later deleted.
    pub delete_fraction: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            max_triples: 1000,
            vocab: 40,
            min_keywords: 1,
            max_keywords: 8,
            delete_fraction: 0.2,
        }
    }
}

pub fn keyword(i: usize) -> String {
    format!("kw{i}")
}

fn zipf(vocab: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=vocab).map(|r| 1.0 / r as f64)).expect("vocab is non-empty")
}

/// A valid record sequence: replaying it through a fresh [`Ledger`] never
/// fails.
pub fn generate<R: Rng>(spec: &WorkloadSpec, rng: &mut R) -> Vec<DatasetRecord> {
    assert!(spec.vocab >= spec.max_keywords && spec.min_keywords >= 1 && spec.min_keywords <= spec.max_keywords);
    let dist = zipf(spec.vocab);
    let add_budget = (spec.max_triples as f64 / (1.0 + spec.delete_fraction)) as usize;

    let mut adds: Vec<DatasetRecord> = Vec::new();
    let mut used = 0;
    loop {
        let c = rng.gen_range(spec.min_keywords..=spec.max_keywords);
        if used + c > add_budget {
            break;
        }
        let mut kws = BTreeSet::new();
        while kws.len() < c {
            kws.insert(dist.sample(rng));
        }
        let words: Vec<String> = kws.into_iter().map(keyword).collect();
        adds.push(DatasetRecord {
            op: RecordOp::Add,
            id: format!("doc{}", adds.len()),
            keywords: words,
        });
        used += c;
    }

    let want = (adds.len() as f64 * spec.delete_fraction).round() as usize;
    let mut victims: Vec<usize> = (0..adds.len()).collect();
    victims.shuffle(rng);
    victims.truncate(want);
    victims.retain(|&v| {
        let c = adds[v].keywords.len();
        if used + c <= spec.max_triples {
            used += c;
            true
        } else {
            false
        }
    });

    // each delete lands somewhere after its add
    let mut slots: Vec<Vec<DatasetRecord>> = adds.iter().map(|a| vec![a.clone()]).collect();
    for v in victims {
        let at = rng.gen_range(v..adds.len());
        let mut del = adds[v].clone();
        del.op = RecordOp::Del;
        slots[at].push(del);
    }
    slots.into_iter().flatten().collect()
}

/// `n` distinct keywords drawn from the same distribution as the documents.
pub fn random_query<R: Rng>(vocab: usize, n: usize, rng: &mut R) -> SearchQuery {
    let dist = zipf(vocab);
    let n = n.min(vocab);
    let mut picked: Vec<usize> = Vec::with_capacity(n);
    while picked.len() < n {
        let w = dist.sample(rng);
        if !picked.contains(&w) {
            picked.push(w);
        }
    }
    SearchQuery::new(picked.into_iter().map(keyword)).expect("n >= 1")
}

/// Groups records into update batches of at most `docs_per_batch` documents.
pub fn batches(records: &[DatasetRecord], docs_per_batch: usize) -> Vec<Vec<UpdateTriple>> {
    records
        .chunks(docs_per_batch.max(1))
        .map(|chunk| chunk.iter().flat_map(DatasetRecord::triples).collect())
        .collect()
}

/// Checks that `records` replays cleanly, returning the final ledger.
pub fn validate(records: &[DatasetRecord]) -> Result<Ledger, String> {
    let mut l = Ledger::new();
    for r in records {
        l.apply(r.clone())?;
    }
    Ok(l)
}

/// Adds-only database for the scaling sweeps: `s_freq` documents hold the
/// keyword `s`, `x_freq` hold `x`, the first `overlap` of them hold both, and
/// single-keyword filler documents bring the total to `total` triples.
pub fn frequency_db(total: usize, s_freq: usize, x_freq: usize, overlap: usize) -> Vec<UpdateTriple> {
    assert!(overlap <= s_freq.min(x_freq));
    let id = |s: String| DocId::try_from(s.as_str()).expect("short ids");
    let mut out = Vec::with_capacity(total);
    for i in 0..s_freq {
        out.push(UpdateTriple::new(Op::Add, id(format!("s{i}")), "s"));
        if i < overlap {
            out.push(UpdateTriple::new(Op::Add, id(format!("s{i}")), "x"));
        }
    }
    for i in overlap..x_freq {
        out.push(UpdateTriple::new(Op::Add, id(format!("x{i}")), "x"));
    }
    assert!(out.len() <= total, "total {total} below the s/x triples {}", out.len());
    let filler_vocab = (total / 16).max(1);
    let mut i = 0;
    while out.len() < total {
        out.push(UpdateTriple::new(
            Op::Add,
            id(format!("f{i}")),
            Keyword::new(format!("f{}", i % filler_vocab)),
        ));
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use csse_core::oracle::PlaintextOracle;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_spec_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs = generate(&WorkloadSpec::default(), &mut rng);
        let triples: usize = recs.iter().map(|r| r.keywords.len()).sum();
        assert!(triples <= 1000 && triples > 700, "{triples}");
        let adds = recs.iter().filter(|r| r.op == RecordOp::Add).count();
        let dels = recs.len() - adds;
        assert!((dels as f64 / adds as f64 - 0.2).abs() < 0.05, "{dels}/{adds}");
        validate(&recs).unwrap();
    }

    #[test]
    fn frequency_db_counts() {
        let t = frequency_db(500, 16, 64, 8);
        assert_eq!(t.len(), 500);
        let mut o = PlaintextOracle::new();
        o.record(&t);
        assert_eq!(o.update_count(&"s".into()), 16);
        assert_eq!(o.update_count(&"x".into()), 64);
        assert_eq!(o.search(&SearchQuery::new(["s", "x"]).unwrap()).len(), 8);
    }

    #[test]
    fn batching_preserves_order() {
        let recs = generate(&WorkloadSpec { max_triples: 100, ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(3));
        let flat: Vec<UpdateTriple> = recs.iter().flat_map(DatasetRecord::triples).collect();
        let b = batches(&recs, 7);
        assert_eq!(b.concat(), flat);
    }

    proptest! {
        #[test]
        fn generated_workloads_replay_and_respect_budget(seed in any::<u64>(), max in 10usize..400, df in 0.0f64..0.6) {
            let spec = WorkloadSpec { max_triples: max, vocab: 12, min_keywords: 1, max_keywords: 5, delete_fraction: df };
            let recs = generate(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(validate(&recs).is_ok());
            prop_assert!(recs.iter().map(|r| r.keywords.len()).sum::<usize>() <= max);
            let q = random_query(12, 3, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(q.len(), 3);
        }
    }
}
