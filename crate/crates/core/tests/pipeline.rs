use jobvec::compose::{vectorize_corpus, VectorSet, VectorizeOptions};
use jobvec::corpus::{
    generate_synthetic, parse_postings, read_sequences, write_postings, write_sequences, ParseOptions, SynthConfig,
    Vocabulary,
};
use jobvec::eval::{evaluate_model, EvalConfig};
use jobvec::index::{AnnIndex, FlatIndex, IvfPqIndex, IvfPqParams};
use jobvec::train::{train_corpus, TrainConfig};

fn small() -> SynthConfig {
    SynthConfig {
        tracks: 4,
        postings: 800,
        sequences: 300,
        ..SynthConfig::default()
    }
}

#[test]
fn written_corpus_parses_back_identically() {
    let s = generate_synthetic(&small(), 5).unwrap();
    let mut postings = Vec::new();
    write_postings(&mut postings, &s.postings, &s.titles, &s.skills).unwrap();
    let mut sequences = Vec::new();
    write_sequences(&mut sequences, &s.sequences, &s.titles).unwrap();

    let (mut titles, mut skills) = (Vocabulary::new(), Vocabulary::new());
    let parsed = parse_postings(&postings[..], &mut titles, &mut skills, ParseOptions { strict: true }).unwrap();
    assert!(parsed.rejected.is_empty());
    assert_eq!(parsed.postings.len(), s.postings.len());
    for (a, b) in parsed.postings.iter().zip(&s.postings) {
        assert_eq!(a.id, b.id);
        assert_eq!(titles.token(a.title_id), s.titles.token(b.title_id));
        let names = |ids: &[usize], v: &Vocabulary| ids.iter().map(|&i| v.token(i).unwrap().to_string()).collect::<Vec<_>>();
        assert_eq!(names(&a.skill_ids, &skills), names(&b.skill_ids, &s.skills));
        assert_eq!((a.lat_deg, a.lon_deg), (b.lat_deg, b.lon_deg));
    }
    let seqs = read_sequences(&sequences[..], &mut titles).unwrap();
    assert_eq!(seqs.len(), s.sequences.len());
}

#[test]
fn library_pipeline_end_to_end() {
    let s = generate_synthetic(&small(), 6).unwrap();
    let cfg = TrainConfig { dim: 16, epochs: 10, seed: 2, ..TrainConfig::default() };
    let (space, report) = train_corpus(&s.postings, &s.sequences, s.titles.len(), s.skills.len(), &cfg).unwrap();
    assert!(report.last().unwrap().total < report.initial().unwrap().total);

    let vs = vectorize_corpus(&s.postings, &space, Some(&s.curated), &VectorizeOptions { w_loc: 1.0, lenient: false })
        .unwrap();
    let ids: Vec<&str> = s.postings.iter().map(|p| p.id.as_str()).collect();
    let set = VectorSet::from_job_vectors(&ids, &vs).unwrap();
    assert_eq!(set.dim(), 19);

    let flat = FlatIndex::from_vector_set(&set).unwrap();
    let params = IvfPqParams { nlist: 8, m: 4, nprobe: 8, ..IvfPqParams::default() };
    let ivf = IvfPqIndex::from_vector_set(&set, params).unwrap();
    assert_eq!(flat.len(), ivf.len());

    let ec = EvalConfig { queries: 100, k: 10, seed: 1, ..EvalConfig::default() };
    let exact = evaluate_model(&s.postings, &set, &flat, &ec).unwrap();
    let approx = evaluate_model(&s.postings, &set, &ivf, &ec).unwrap();
    for r in [&exact, &approx] {
        assert_eq!(r.queries, 100);
        assert_eq!(r.items, 1000);
        assert!(r.coverage_pct <= r.title_match_pct.min(100.0 * r.in_range_avg / 10.0) + 1e-9);
    }
    assert_eq!(exact, evaluate_model(&s.postings, &set, &flat, &ec).unwrap());
}
