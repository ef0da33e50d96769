//! End-to-end paths through the library: occurrence file to scores, and
//! annotations to gold to evaluation.

use std::path::Path;

use semshift::eval::{spearman, Direction, RankedList};
use semshift::geometry::Vector;
use semshift::gold::{read_annotations, read_gold_table, write_gold_table, GoldEntry, GoldTable};
use semshift::ot::{ot_change_score, SolverConfig};
use semshift::repr::{
    read_occurrence_file, write_occurrence_file, FileFormat, LayerStack, LayerStrategy,
    OccurrenceEmbedding, OccurrenceStore,
};

fn occ(word: &str, period: &str, id: usize, dir: [f64; 2]) -> OccurrenceEmbedding {
    let layers = (0..4)
        .map(|l| Vector::new(vec![dir[0], dir[1], 0.1 * l as f64]).unwrap())
        .collect();
    OccurrenceEmbedding {
        word: word.into(),
        period: period.into(),
        occ_id: format!("{word}-{period}-{id}"),
        stack: LayerStack::new(layers).unwrap(),
    }
}

/// Three words whose new-period usages drift away from the old ones by
/// increasing amounts.
fn corpus() -> Vec<OccurrenceEmbedding> {
    let mut out = Vec::new();
    for (word, angle) in [("stable", 0.0f64), ("shifted", 0.6), ("flipped", 2.5)] {
        for i in 0..4 {
            let jitter = 0.01 * i as f64;
            out.push(occ(word, "1990", i, [1.0, jitter]));
            out.push(occ(
                word,
                "2018",
                i,
                [(angle + jitter).cos(), (angle + jitter).sin()],
            ));
        }
    }
    out
}

fn scores(store: &OccurrenceStore) -> Vec<(String, f64)> {
    let strat = LayerStrategy::Single(2);
    ["stable", "shifted", "flipped"]
        .iter()
        .map(|&w| {
            let a = store.usage_set(w, "1990", strat).unwrap();
            let b = store.usage_set(w, "2018", strat).unwrap();
            (
                w.to_string(),
                ot_change_score(&a, &b, &SolverConfig::Exact).unwrap(),
            )
        })
        .collect()
}

#[test]
fn both_encodings_give_the_same_scores() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for (name, format) in [
        ("occ.jsonl", FileFormat::JsonLines),
        ("occ.bin", FileFormat::Binary),
    ] {
        let path = dir.path().join(name);
        write_occurrence_file(&corpus(), &path, format).unwrap();
        let store = OccurrenceStore::new(read_occurrence_file(&path).unwrap()).unwrap();
        assert_eq!(store.periods(), vec!["1990", "2018"]);
        results.push(scores(&store));
    }
    assert_eq!(results[0], results[1]);
    let s = &results[0];
    assert!(s[0].1 < 1e-3, "stable scored {}", s[0].1);
    assert!(s[0].1 < s[1].1 && s[1].1 < s[2].1, "{s:?}");
}

#[test]
fn scores_rank_like_a_matching_gold_table() {
    let store = OccurrenceStore::new(corpus()).unwrap();
    let system = RankedList::new(scores(&store), Direction::HigherIsMoreChange).unwrap();
    // COMPARE is a relatedness scale: high means little change
    let gold = GoldTable::from_entries(vec![
        (
            "stable".to_string(),
            GoldEntry {
                compare: 3.9,
                n_judgments: 5,
            },
        ),
        (
            "shifted".to_string(),
            GoldEntry {
                compare: 2.5,
                n_judgments: 5,
            },
        ),
        (
            "flipped".to_string(),
            GoldEntry {
                compare: 1.1,
                n_judgments: 5,
            },
        ),
    ])
    .unwrap();
    let r = spearman(&system, &RankedList::from_gold(&gold)).unwrap();
    assert!((r.rho - 1.0).abs() < 1e-12);
    assert!(r.direction_normalized);
}

#[test]
fn appendix_sample_round_trips_through_gold_tsv() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testdata/appendix_sample.tsv");
    let records = read_annotations(&path).unwrap();
    let table = GoldTable::from_records(&records);
    let expected = [
        ("burka", 1.0),
        ("gazela", 2.0),
        ("glinast", 4.0),
        ("globinski", 7.0 / 3.0),
        ("ogaben", 11.0 / 3.0),
    ];
    assert_eq!(table.len(), expected.len());
    for (w, v) in expected {
        let e = table.get(w).unwrap();
        assert!((e.compare - v).abs() < 1e-12, "{w}: {}", e.compare);
        assert_eq!(e.n_judgments, 3);
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gold.tsv");
    write_gold_table(&table, &out).unwrap();
    let back = read_gold_table(&out).unwrap();
    for (w, v) in expected {
        assert!((back.get(w).unwrap().compare - v).abs() < 1e-12);
    }
}
