//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! hard criterion fails. Soft criteria that need the full released corpus
//! (set `REVEVAL_CORPUS_DIR`) report SKIP when it is absent and never fail
//! the run.

mod support;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reveval::agreement::{agreement, LabelLevel};
use reveval::corpus::{corpus_stats, parse_corpus, parse_document, to_xml, Aspect, EditAspect, LabelMap};
use reveval::corruption::{build_worse_testset, NoiseConfig};
use reveval::gec::{
    align, apply_edits, extract_edits, gleu_corpus, max_match_f05, sample_reference_indices, GleuConfig, MatchCounts,
    OpKind,
};
use reveval::irc::{evaluate_metric, IrcConfig};
use reveval::lm::{FitOptions, NgramModel};
use reveval::metric::{lm_sentences, Inverted, Metric, NativePerplexity, Oracle, RandomMetric};
use reveval::pairs::{extract_pairs, PairMode, Preferred, SnippetPair};

// Tolerances and sizes.
const FIXTURE_TIME_LIMIT: Duration = Duration::from_secs(1);
const RANDOM_PAIRS: usize = 4000;
const RANDOM_TOLERANCE: f64 = 0.05;
const ANTISYMMETRY_PAIRS: usize = 1000;
const GLEU_TOLERANCE: f64 = 1e-9;
const ALIGN_TRIALS: usize = 10_000;
const ALIGN_MAX_LEN: usize = 12;
const ALIGN_ORACLE_LEN: usize = 6;
const LM_NORM_CONTEXTS: usize = 100;
const LM_NORM_TOLERANCE: f64 = 1e-6;
const LM_SHUFFLE_TRIALS: usize = 100;
const LM_SHUFFLE_REQUIRED: usize = 95;
const WORSE_MIN_PAIRS: usize = 500;
const WORSE_MIN_ACCURACY: f64 = 0.60;
const WORSE_TIME_LIMIT: Duration = Duration::from_secs(60);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- fixture

fn fixture_round_trip() -> Check {
    let start = Instant::now();
    let labels = LabelMap::default();
    let docs = parse_corpus(support::fixture_dir(), &labels).map_err(|e| e.to_string())?;
    ensure(docs.len() == 3, || format!("expected 3 documents, got {}", docs.len()))?;
    for d in &docs {
        let xml = to_xml(d);
        let again = parse_document(&xml, "roundtrip.xml", &labels).map_err(|e| e.to_string())?;
        ensure(&again == d, || {
            format!("{}/{} changed after serialize + parse", d.id, d.editor)
        })?;
        ensure(to_xml(&again) == xml, || {
            format!("{}/{} serialization not stable", d.id, d.editor)
        })?;
    }

    let expected: [(&str, &str, &str, &str); 3] = [
        (
            "P01",
            "A",
            "We study the induction step and the disambiguation step of sense modelling; in a similar vein, we cluster the contexts.\n\n\
             Word sense induction is old, and well studied.\n\nDisambiguation rely on context.",
            "We study the induction and disambiguation steps of sense modelling. In a similar vein, we cluster the contexts.\n\n\
             Word sense induction is old and well studied.\n\nDisambiguation relies on context and on prior senses.",
        ),
        (
            "P01",
            "B",
            "We study the induction step and the disambiguation step of sense modelling; in a similar vein, we cluster the contexts.\n\n\
             Word sense induction is old, and well studied.\n\nDisambiguation rely on context.",
            "We study the induction step and the disambiguation step of sense modelling. In a similar vein, we cluster the usage contexts.\n\n\
             Word sense induction is long-established, and well studied.\n\nDisambiguation relies on context.",
        ),
        (
            "P02",
            "A",
            "Café-style Parsing\n\nParsers is evaluated on \"noisy\" text.\n\nOur method is simple.\\n\\n It really works on most inputs!",
            "Café-style Parsing\n\nParsers are evaluated on \"noisy\" text.\n\nOur method is simple.\\n\\n It works on most inputs.",
        ),
    ];
    for (id, editor, source, revised) in expected {
        let d = docs
            .iter()
            .find(|d| d.id == id && d.editor == editor)
            .ok_or_else(|| format!("missing {id}/{editor}"))?;
        let got_s = d.source_text(None).map_err(|e| e.to_string())?;
        let got_r = d.revised_text(None).map_err(|e| e.to_string())?;
        ensure(got_s == source, || format!("{id}/{editor} source {got_s:?}"))?;
        ensure(got_r == revised, || format!("{id}/{editor} revised {got_r:?}"))?;
    }
    let p02 = docs.iter().find(|d| d.id == "P02").expect("checked above");
    ensure(p02.extra.get("venue").map(String::as_str) == Some("demo"), || {
        "unknown root attribute lost".into()
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < FIXTURE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("3 documents round-trip, texts match, {elapsed:.2?}"))
}

fn pair_counting() -> Check {
    let docs = parse_corpus(support::fixture_dir(), &LabelMap::default()).map_err(|e| e.to_string())?;
    // P01/A: 5 edits, one with two labels -> 6; P01/B: 4; P02/A: 3
    let ex = extract_pairs(&docs, None, PairMode::Apply);
    ensure(ex.pairs.len() == 13, || {
        format!("expected 13 pairs, got {}", ex.pairs.len())
    })?;
    ensure(ex.skipped_degenerate == 0 && ex.skipped_unplaced == 0, || {
        "unexpected skips".into()
    })?;

    let abs = "We study the induction step and the disambiguation step of sense modelling; in a similar vein, we cluster the contexts.";
    let want: [(&str, &str, usize, &str, &str, &str); 7] = [
        ("P01", "A", 0, abs, "We study the induction and disambiguation steps of sense modelling; in a similar vein, we cluster the contexts.", "conciseness"),
        ("P01", "A", 1, abs, "We study the induction step and the disambiguation step of sense modelling. In a similar vein, we cluster the contexts.", "readability"),
        ("P01", "A", 2, "Word sense induction is old, and well studied.", "Word sense induction is old and well studied.", "punctuation"),
        ("P01", "A", 3, "Disambiguation rely on context.", "Disambiguation relies on context.", "grammar"),
        ("P01", "A", 4, "Disambiguation rely on context.", "Disambiguation rely on context and on prior senses.", "clarity"),
        ("P02", "A", 1, "It really works on most inputs!", "It works on most inputs!", "redundancy"),
        ("P02", "A", 2, "It really works on most inputs!", "It really works on most inputs.", "consistency"),
    ];
    for (id, editor, ei, source, revised, label) in want {
        let d = docs
            .iter()
            .find(|d| d.id == id && d.editor == editor)
            .expect("fixture doc");
        let (s, r) = d.apply_single_edit(ei).map_err(|e| e.to_string())?;
        ensure(s == source && r == revised, || {
            format!("{id}/{editor} edit {ei}: ({s:?}, {r:?})")
        })?;
        let p = ex
            .pairs
            .iter()
            .find(|p| p.doc_id == id && p.editor == editor && p.edit_index == ei && p.aspect.raw_label == label)
            .ok_or_else(|| format!("no pair for {id}/{editor} edit {ei} label {label}"))?;
        ensure(p.source == source && p.revised == revised, || {
            format!("pair text differs for {id}/{editor} edit {ei}")
        })?;
    }
    let multi: Vec<&SnippetPair> = ex
        .pairs
        .iter()
        .filter(|p| p.doc_id == "P01" && p.editor == "A" && p.edit_index == 3)
        .collect();
    let aspects: Vec<Aspect> = multi.iter().map(|p| p.aspect.aspect).collect();
    ensure(aspects == [Aspect::Grammaticality, Aspect::Fluency], || {
        format!("multi-label edit gave {aspects:?}")
    })?;
    let insertion = docs[0].apply_single_edit(4).map_err(|e| e.to_string())?;
    ensure(
        insertion.1.chars().count() == insertion.0.chars().count() + " and on prior senses".chars().count(),
        || "insertion length".into(),
    )?;
    Ok("13 pairs (multi-label edit counted twice), snippets byte-exact".into())
}

// ---------------------------------------------------------------- IRC

fn synthetic_pairs(n: usize, seed: u64) -> Vec<SnippetPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = [
        "alpha", "beta", "gamma", "delta", "river", "bread", "boat", "bell", "path", "tide",
    ];
    let text = |rng: &mut ChaCha8Rng, tag: &str, i: usize| {
        let len = rng.gen_range(3..9);
        let body: Vec<&str> = (0..len).map(|_| *words.choose(rng).expect("nonempty")).collect();
        format!("{tag}{i} {}", body.join(" "))
    };
    (0..n)
        .map(|i| {
            let aspect = Aspect::ALL[i % 7];
            SnippetPair {
                source: text(&mut rng, "s", i),
                revised: text(&mut rng, "r", i),
                aspect: EditAspect::new(aspect, aspect.name().to_lowercase()),
                doc_id: format!("D{}", i / 10),
                editor: "A".into(),
                paragraph_index: 0,
                edit_index: i % 10,
                preferred: Preferred::Revised,
            }
        })
        .collect()
}

fn irc_calibration() -> Check {
    let pairs = synthetic_pairs(RANDOM_PAIRS, 3);
    let cfg = IrcConfig {
        seed: 11,
        bootstrap_resamples: 200,
        ..IrcConfig::default()
    };
    let oracle = evaluate_metric(&mut Oracle::from_pairs(&pairs), &pairs, &cfg).map_err(|e| e.to_string())?;
    ensure(oracle.overall_accuracy == 1.0, || {
        format!("oracle accuracy {}", oracle.overall_accuracy)
    })?;
    let mut inv = Inverted(Box::new(Oracle::from_pairs(&pairs)));
    let inverted = evaluate_metric(&mut inv, &pairs, &cfg).map_err(|e| e.to_string())?;
    ensure(inverted.overall_accuracy == 0.0, || {
        format!("inverted oracle accuracy {}", inverted.overall_accuracy)
    })?;
    let random = evaluate_metric(&mut RandomMetric { seed: 5 }, &pairs, &cfg).map_err(|e| e.to_string())?;
    ensure((random.overall_accuracy - 0.5).abs() <= RANDOM_TOLERANCE, || {
        format!("random accuracy {}", random.overall_accuracy)
    })?;
    for (aspect, acc) in &oracle.per_aspect {
        if acc.n > 0 {
            ensure(acc.accuracy == Some(1.0), || {
                format!("oracle {aspect:?} accuracy {:?}", acc.accuracy)
            })?;
        }
    }
    Ok(format!(
        "oracle 1.0, inverted 0.0, random {:.4} on {} pairs",
        random.overall_accuracy, RANDOM_PAIRS
    ))
}

fn antisymmetry() -> Check {
    let pairs = synthetic_pairs(ANTISYMMETRY_PAIRS, 8);
    let train: Vec<Vec<String>> = pairs.iter().step_by(2).flat_map(|p| lm_sentences(&p.source)).collect();
    let model = Arc::new(NgramModel::fit(&train, FitOptions::default()).map_err(|e| e.to_string())?);
    let mut metrics: Vec<Box<dyn Metric>> = vec![
        Box::new(RandomMetric { seed: 1 }),
        Box::new(NativePerplexity::new(model, "synthetic", 0.0)),
        Box::new(Oracle::from_pairs(&pairs)),
        Box::new(Inverted(Box::new(RandomMetric { seed: 2 }))),
    ];
    for m in &mut metrics {
        for p in &pairs {
            let ab = m.choose(&p.source, &p.revised).map_err(|e| e.to_string())?;
            let ba = m.choose(&p.revised, &p.source).map_err(|e| e.to_string())?;
            ensure(ab.choice == ba.choice.mirror(), || {
                format!("{} not antisymmetric on {:?}", m.id(), p.source)
            })?;
        }
    }
    Ok(format!("{} metrics x {ANTISYMMETRY_PAIRS} pairs", metrics.len()))
}

// ---------------------------------------------------------------- GLEU

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// All n-grams of `t`, duplicates kept, in order.
fn grams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

fn count_of(list: &[Vec<String>], g: &[String]) -> i64 {
    list.iter().filter(|x| x.as_slice() == g).count() as i64
}

/// Brute-force corpus GLEU for one fixed choice of references.
fn gleu_oracle(srcs: &[Vec<String>], hyps: &[Vec<String>], refs: &[&Vec<String>], max_n: usize) -> f64 {
    let h_len: usize = hyps.iter().map(Vec::len).sum();
    let r_len: usize = refs.iter().map(|r| r.len()).sum();
    if h_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut num = 0i64;
        let mut den = 0i64;
        for ((s, h), r) in srcs.iter().zip(hyps).zip(refs) {
            let (sg, hg, rg) = (grams(s, n), grams(h, n), grams(r, n));
            den += hg.len() as i64;
            let mut seen: Vec<&Vec<String>> = Vec::new();
            for g in &hg {
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let (ch, cr, cs) = (count_of(&hg, g), count_of(&rg, g), count_of(&sg, g));
                num += ch.min(cr);
                if cr == 0 && cs > 0 {
                    num -= ch.min(cs);
                }
            }
        }
        let p = if den == 0 {
            1e-9
        } else {
            (num as f64 / den as f64).max(1e-9)
        };
        log_sum += p.ln();
    }
    let bp = if r_len > h_len {
        (1.0 - r_len as f64 / h_len as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / max_n as f64).exp()
}

/// (source, hypothesis, references)
const GLEU_CASES: [(&str, &str, &[&str]); 20] = [
    (
        "he go to school",
        "he goes to school",
        &["he goes to school", "he went to school"],
    ),
    (
        "the cat sat on mat",
        "the cat sat on the mat",
        &["the cat sat on the mat"],
    ),
    ("a b c d", "a b c d", &["a b c e", "a c d"]),
    (
        "i has a apple",
        "i have a apple",
        &["i have an apple", "i had an apple", "i have one apple"],
    ),
    ("this is is wrong", "this is wrong", &["this is wrong"]),
    (
        "we discuss about it",
        "we discuss about it",
        &["we discuss it", "we talk about it"],
    ),
    (
        "she like reading books",
        "she likes reading book",
        &["she likes reading books"],
    ),
    (
        "results is good",
        "the results are good",
        &["results are good", "the results are good"],
    ),
    ("x y z", "z y x", &["x y z", "x z y"]),
    (
        "one two three four five",
        "one two four five",
        &["one two three four five", "one three four five"],
    ),
    ("in the other hand", "on the other hand", &["on the other hand"]),
    ("it were raining", "it was raining", &["it was raining", "it rained"]),
    (
        "they goes home early",
        "they go home early today",
        &["they go home early"],
    ),
    (
        "we propose novel method",
        "we propose a novel method",
        &["we propose a novel method", "we propose a new method"],
    ),
    ("a a a a", "a a", &["a a a", "a"]),
    (
        "data are collected",
        "data is collected",
        &["data are collected", "the data were collected"],
    ),
    ("short", "short text here", &["short"]),
    (
        "the model perform well on test",
        "the model performs well on test",
        &["the model performs well on the test"],
    ),
    (
        "he said that that was fine",
        "he said that was fine",
        &["he said that that was fine", "he said it was fine"],
    ),
    (
        "make decision quickly",
        "make decisions quickly",
        &["make a decision quickly", "decide quickly"],
    ),
];

fn gleu_oracle_equivalence() -> Check {
    let srcs: Vec<Vec<String>> = GLEU_CASES.iter().map(|c| words(c.0)).collect();
    let hyps: Vec<Vec<String>> = GLEU_CASES.iter().map(|c| words(c.1)).collect();
    let refs: Vec<Vec<Vec<String>>> = GLEU_CASES
        .iter()
        .map(|c| c.2.iter().map(|r| words(r)).collect())
        .collect();
    let cfg = GleuConfig {
        iterations: 50,
        seed: 17,
        ..GleuConfig::default()
    };
    let mut worst: f64 = 0.0;
    let report = gleu_corpus(&srcs, &hyps, &refs, &cfg).map_err(|e| e.to_string())?;
    let draws = sample_reference_indices(&refs.iter().map(Vec::len).collect::<Vec<_>>(), cfg.iterations, cfg.seed);
    for (it, draw) in draws.iter().enumerate() {
        let chosen: Vec<&Vec<String>> = draw.iter().zip(&refs).map(|(&k, r)| &r[k]).collect();
        let want = gleu_oracle(&srcs, &hyps, &chosen, cfg.max_n);
        let diff = (report.iteration_scores[it] - want).abs();
        worst = worst.max(diff);
        ensure(diff <= GLEU_TOLERANCE, || {
            format!("iteration {it}: {} vs oracle {want}", report.iteration_scores[it])
        })?;
    }
    // each case alone as a one-instance corpus
    for (i, ((s, h), r)) in srcs.iter().zip(&hyps).zip(&refs).enumerate() {
        let one = gleu_corpus(
            std::slice::from_ref(s),
            std::slice::from_ref(h),
            std::slice::from_ref(r),
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        let draws = sample_reference_indices(&[r.len()], cfg.iterations, cfg.seed);
        for (it, draw) in draws.iter().enumerate() {
            let want = gleu_oracle(
                std::slice::from_ref(s),
                std::slice::from_ref(h),
                &[&r[draw[0]]],
                cfg.max_n,
            );
            let diff = (one.iteration_scores[it] - want).abs();
            worst = worst.max(diff);
            ensure(diff <= GLEU_TOLERANCE, || {
                format!("case {i} iteration {it}: {} vs {want}", one.iteration_scores[it])
            })?;
        }
    }
    let same: Vec<Vec<String>> = srcs.clone();
    let same_refs: Vec<Vec<Vec<String>>> = same.iter().map(|s| vec![s.clone()]).collect();
    let perfect = gleu_corpus(&same, &same, &same_refs, &cfg).map_err(|e| e.to_string())?;
    ensure(perfect.score == 100.0, || {
        format!("hyp = ref = src scored {}", perfect.score)
    })?;
    Ok(format!(
        "20 cases x {} iterations, max |diff| {worst:.1e}; identity = 100",
        cfg.iterations
    ))
}

// ---------------------------------------------------------------- alignment

const ALIGN_VOCAB: [&str; 7] = ["a", "b", "c", "A", "B", "the", "The"];

fn random_seq(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| ALIGN_VOCAB.choose(rng).expect("nonempty").to_string())
        .collect()
}

/// Optimal cost in half-units by memoized recursion from the front.
fn oracle_cost(s: &[String], t: &[String]) -> u32 {
    fn go(s: &[String], t: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), u32>) -> u32 {
        if i == s.len() {
            return 2 * (t.len() - j) as u32;
        }
        if j == t.len() {
            return 2 * (s.len() - i) as u32;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let sub = if s[i] == t[j] {
            0
        } else if s[i].to_lowercase() == t[j].to_lowercase() {
            1
        } else {
            2
        };
        let mut best = sub + go(s, t, i + 1, j + 1, memo);
        best = best.min(2 + go(s, t, i + 1, j, memo));
        best = best.min(2 + go(s, t, i, j + 1, memo));
        if i + 1 < s.len() && j + 1 < t.len() && s[i] == t[j + 1] && s[i + 1] == t[j] {
            best = best.min(2 + go(s, t, i + 2, j + 2, memo));
        }
        memo.insert((i, j), best);
        best
    }
    go(s, t, 0, 0, &mut HashMap::new())
}

/// Cost of the returned operations, checked for validity along the way.
fn ops_cost(s: &[String], t: &[String], ops: &[reveval::gec::AlignOp]) -> Result<u32, String> {
    let (mut i, mut j, mut units) = (0, 0, 0);
    for op in ops {
        ensure(op.src.start == i && op.tgt.start == j, || {
            format!("ops not contiguous at {op:?}")
        })?;
        let (sl, tl) = (op.src.len(), op.tgt.len());
        units += match op.kind {
            OpKind::Match if sl == 1 && tl == 1 && s[i] == t[j] => 0,
            OpKind::Substitute if sl == 1 && tl == 1 && s[i] != t[j] => {
                if s[i].to_lowercase() == t[j].to_lowercase() {
                    1
                } else {
                    2
                }
            }
            OpKind::Delete if sl == 1 && tl == 0 => 2,
            OpKind::Insert if sl == 0 && tl == 1 => 2,
            OpKind::Transpose if sl == 2 && tl == 2 && s[i] == t[j + 1] && s[i + 1] == t[j] => 2,
            _ => return Err(format!("invalid op {op:?}")),
        };
        i = op.src.end;
        j = op.tgt.end;
    }
    ensure(i == s.len() && j == t.len(), || {
        "ops do not cover both sequences".into()
    })?;
    Ok(units)
}

fn check_alignment(s: &[String], t: &[String], oracle: bool) -> Result<(), String> {
    let spans = extract_edits(s, t);
    ensure(apply_edits(s, &spans) == t, || {
        format!("{s:?} -> {t:?} not reconstructed")
    })?;
    if oracle {
        let a = align(s, t);
        let got = ops_cost(s, t, &a.ops)?;
        let want = oracle_cost(s, t);
        ensure(got == want, || format!("{s:?} -> {t:?}: cost {got} vs optimum {want}"))?;
        ensure(a.cost == f64::from(want) / 2.0, || "reported cost differs".into())?;
    }
    Ok(())
}

fn alignment_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut oracle_checked = 0;
    for _ in 0..ALIGN_TRIALS {
        let s = random_seq(&mut rng, ALIGN_MAX_LEN);
        let t = random_seq(&mut rng, ALIGN_MAX_LEN);
        let small = s.len() <= ALIGN_ORACLE_LEN && t.len() <= ALIGN_ORACLE_LEN;
        oracle_checked += usize::from(small);
        check_alignment(&s, &t, small)?;
    }
    // every pair of sequences up to length 3 over {a, b, A}
    let alphabet = ["a", "b", "A"];
    let mut all: Vec<Vec<String>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..3 {
        frontier = frontier
            .iter()
            .flat_map(|p| alphabet.iter().map(move |x| [p.clone(), vec![x.to_string()]].concat()))
            .collect();
        all.extend(frontier.iter().cloned());
    }
    for s in &all {
        for t in &all {
            check_alignment(s, t, true)?;
            oracle_checked += 1;
        }
    }
    Ok(format!(
        "{ALIGN_TRIALS} random reconstructions; {oracle_checked} pairs at optimal cost"
    ))
}

fn f05_hand_case() -> Check {
    let counts = MatchCounts { tp: 2, fp: 1, fn_: 2 };
    let (p, r, f) = counts.prf();
    ensure(p == 2.0 / 3.0 && r == 0.5, || format!("P {p}, R {r}"))?;
    ensure(f == 0.625, || format!("F0.5 {f}"))?;
    // the same counts through span extraction: 3 system edits, 4 gold edits, 2 shared
    let src = words("a b c d e f g h");
    let hyp = words("A b C d E f g h");
    let gold = words("A b C d e F g H");
    let gold_edits = extract_edits(&src, &gold);
    let score = max_match_f05(&[src], &[hyp], &[vec![gold_edits]]).map_err(|e| e.to_string())?;
    ensure(score.f05 == 0.625, || format!("end-to-end F0.5 {}", score.f05))?;
    Ok("P=2/3, R=1/2, F0.5 = 0.625 exactly".into())
}

// ---------------------------------------------------------------- LM

fn prose_paragraphs() -> Vec<String> {
    support::prose()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

fn lm_normalization() -> Check {
    let sentences: Vec<Vec<String>> = prose_paragraphs().iter().flat_map(|p| lm_sentences(p)).collect();
    let model = NgramModel::fit(&sentences, FitOptions::default()).map_err(|e| e.to_string())?;
    let vocab: Vec<&str> = model.vocabulary().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for k in 0..LM_NORM_CONTEXTS {
        let ctx: Vec<String> = if k % 2 == 0 {
            // observed context
            let s = sentences.choose(&mut rng).expect("nonempty");
            let i = rng.gen_range(0..s.len());
            s[i.saturating_sub(1)..=i].to_vec()
        } else {
            // arbitrary context, possibly unseen or out of vocabulary
            let mut c: Vec<String> = (0..2)
                .map(|_| vocab.choose(&mut rng).expect("nonempty").to_string())
                .collect();
            if k % 10 == 1 {
                c[0] = "zzyzx".into();
            }
            c
        };
        let total: f64 = vocab.iter().map(|w| model.prob(&ctx, w)).sum();
        worst = worst.max((total - 1.0).abs());
        ensure((total - 1.0).abs() <= LM_NORM_TOLERANCE, || {
            format!("context {ctx:?} sums to {total}")
        })?;
    }
    Ok(format!(
        "{LM_NORM_CONTEXTS} contexts over {} words, max |sum - 1| {worst:.1e}",
        vocab.len()
    ))
}

fn lm_held_out_vs_shuffled() -> Check {
    let paragraphs = prose_paragraphs();
    const FOLDS: usize = 5;
    let mut trials: Vec<(usize, Vec<String>)> = Vec::new();
    let mut models = Vec::new();
    for fold in 0..FOLDS {
        let train: Vec<Vec<String>> = paragraphs
            .iter()
            .enumerate()
            .filter(|(i, _)| i % FOLDS != fold)
            .flat_map(|(_, p)| lm_sentences(p))
            .collect();
        models.push(NgramModel::fit(&train, FitOptions::default()).map_err(|e| e.to_string())?);
        for (_, p) in paragraphs.iter().enumerate().filter(|(i, _)| i % FOLDS == fold) {
            trials.extend(lm_sentences(p).into_iter().filter(|s| s.len() >= 6).map(|s| (fold, s)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    ensure(trials.len() >= LM_SHUFFLE_TRIALS, || {
        format!("only {} held-out sentences", trials.len())
    })?;
    let chosen: Vec<&(usize, Vec<String>)> = trials.choose_multiple(&mut rng, LM_SHUFFLE_TRIALS).collect();
    let mut wins = 0;
    for (fold, sentence) in chosen {
        let mut shuffled = sentence.clone();
        while shuffled == *sentence {
            shuffled.shuffle(&mut rng);
        }
        let m = &models[*fold];
        let (a, b) = (
            m.perplexity(sentence).map_err(|e| e.to_string())?,
            m.perplexity(&shuffled).map_err(|e| e.to_string())?,
        );
        wins += usize::from(a < b);
    }
    ensure(wins >= LM_SHUFFLE_REQUIRED, || {
        format!("held-out beat shuffled in {wins}/{LM_SHUFFLE_TRIALS}")
    })?;
    Ok(format!("held-out beat shuffled in {wins}/{LM_SHUFFLE_TRIALS} trials"))
}

// ---------------------------------------------------------------- corruption

fn corruption_reliability() -> Check {
    let start = Instant::now();
    let train_docs = support::template_corpus(200, 4, 101);
    let mut train = Vec::new();
    for d in &train_docs {
        let layout = d.layout();
        for pi in 0..layout.paragraphs().len() {
            train.extend(lm_sentences(layout.source_paragraph(pi)));
        }
    }
    let model = Arc::new(NgramModel::fit(&train, FitOptions::default()).map_err(|e| e.to_string())?);
    let test_docs = support::template_corpus(150, 4, 202);
    let set = build_worse_testset(
        &test_docs,
        &NoiseConfig {
            seed: 5,
            ..NoiseConfig::default()
        },
    );
    ensure(set.pairs.len() >= WORSE_MIN_PAIRS, || {
        format!("only {} pairs", set.pairs.len())
    })?;
    ensure(set.pairs.iter().all(|p| p.source != p.revised), || {
        "pair with identical sides".into()
    })?;
    let again = build_worse_testset(
        &test_docs,
        &NoiseConfig {
            seed: 5,
            ..NoiseConfig::default()
        },
    );
    ensure(again.pairs == set.pairs, || "corruption not reproducible".into())?;
    let mut metric = NativePerplexity::new(model, "template-trigram", 0.0);
    let report = evaluate_metric(
        &mut metric,
        &set.pairs,
        &IrcConfig {
            seed: 1,
            ..IrcConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(report.overall_accuracy > WORSE_MIN_ACCURACY, || {
        format!("accuracy {}", report.overall_accuracy)
    })?;
    ensure(elapsed < WORSE_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "trigram accuracy {:.3} on {} pairs ({} shuffled papers), {elapsed:.2?}",
        report.overall_accuracy,
        set.pairs.len(),
        set.shuffled_docs.len()
    ))
}

// ---------------------------------------------------------------- full corpus (soft)

const TABLE_ONE: [(Aspect, f64); 7] = [
    (Aspect::Grammaticality, 19.4),
    (Aspect::Fluency, 23.7),
    (Aspect::Clarity, 19.4),
    (Aspect::Style, 8.0),
    (Aspect::Readability, 16.8),
    (Aspect::Redundancy, 7.2),
    (Aspect::Consistency, 5.5),
];

fn full_corpus() -> Option<PathBuf> {
    std::env::var_os("REVEVAL_CORPUS_DIR")
        .map(PathBuf::from)
        .filter(|p| p.exists())
}

fn soft_corpus_tables() -> Outcome {
    let Some(dir) = full_corpus() else {
        return Outcome::Skip("REVEVAL_CORPUS_DIR not set".into());
    };
    let docs = match parse_corpus(&dir, &LabelMap::default()) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let stats = corpus_stats(&docs);
    let mut notes = Vec::new();
    let mut ok = true;
    for (aspect, want) in TABLE_ONE {
        let got = stats.percent(aspect);
        ok &= (got - want).abs() <= 1.0;
        notes.push(format!("{}={got:.1}", aspect.name()));
    }
    let beyond = 100.0 * stats.beyond_gec_ratio;
    ok &= (beyond - 56.9).abs() <= 2.0;
    notes.push(format!("beyondGEC={beyond:.1}"));
    match agreement(&docs, LabelLevel::Aspect) {
        Ok(r) => {
            let det = r.detection.map_or(f64::NAN, |s| s.avg);
            let cor = r.correction.map_or(f64::NAN, |s| s.avg);
            ok &= (det - 0.32).abs() <= 0.03 && (cor - 0.83).abs() <= 0.05;
            notes.push(format!("detection={det:.2} correction={cor:.2}"));
        }
        Err(e) => {
            ok = false;
            notes.push(e.to_string());
        }
    }
    let pairs = extract_pairs(&docs, None, PairMode::Apply).pairs.len();
    notes.push(format!("pairs(all papers)={pairs}"));
    if ok {
        Outcome::Pass(notes.join(" "))
    } else {
        Outcome::Fail(notes.join(" "))
    }
}

// ---------------------------------------------------------------- runner

fn hard(f: fn() -> Check) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(msg)) => Outcome::Pass(msg),
        Ok(Err(msg)) => Outcome::Fail(msg),
        Err(panic) => Outcome::Fail(
            panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()),
        ),
    }
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fixture corpus round trip", fixture_round_trip),
        ("pair extraction counting", pair_counting),
        ("IRC calibration (oracle / inverted / random)", irc_calibration),
        ("IRC antisymmetry", antisymmetry),
        ("GLEU matches brute-force oracle", gleu_oracle_equivalence),
        ("alignment soundness and optimality", alignment_soundness),
        ("F0.5 hand case", f05_hand_case),
        ("LM normalization", lm_normalization),
        ("LM held-out vs shuffled", lm_held_out_vs_shuffled),
        ("corruption reliability (native trigram)", corruption_reliability),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match hard(f) {
            Outcome::Pass(m) => println!("PASS  {name}: {m}"),
            Outcome::Fail(m) => {
                failed += 1;
                println!("FAIL  {name}: {m}");
            }
            Outcome::Skip(m) => println!("SKIP  {name}: {m}"),
        }
    }
    match soft_corpus_tables() {
        Outcome::Pass(m) => println!("PASS  [soft] full-corpus tables: {m}"),
        Outcome::Fail(m) => println!("FAIL  [soft] full-corpus tables: {m}"),
        Outcome::Skip(m) => println!("SKIP  [soft] full-corpus tables: {m}"),
    }
    println!("acceptance: {} hard criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
