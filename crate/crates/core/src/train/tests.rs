use super::*;
use crate::corpus::{generate_synthetic, SynthConfig, Vocabulary};
use crate::graphs::{build_job_job, build_job_skill, build_skill_skill};
use proptest::prelude::*;
use rand::Rng;

fn cfg(dim: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        dim,
        seed,
        ..TrainConfig::default()
    }
}

fn random_space(titles: usize, skills: usize, dim: usize, seed: u64) -> EmbeddingSpace {
    init_embeddings(
        titles,
        skills,
        &TrainConfig {
            init_scale: Some(1.0),
            ..cfg(dim, seed)
        },
    )
    .unwrap()
}

fn triplet(kind: RelationKind, x: usize, y: usize, z: usize) -> Triplet {
    Triplet { x, y, z, kind }
}

#[test]
fn init_shapes_and_determinism() {
    let space = init_embeddings(4325, 6214, &cfg(50, 1)).unwrap();
    assert_eq!((space.titles.rows(), space.titles.cols()), (4325, 50));
    assert_eq!((space.skills.rows(), space.skills.cols()), (6214, 50));
    let bound = 0.1 / 50f64.sqrt();
    assert!(space.titles.as_slice().iter().all(|v| v.abs() <= bound));
    assert_eq!(space, init_embeddings(4325, 6214, &cfg(50, 1)).unwrap());
    assert_ne!(space, init_embeddings(4325, 6214, &cfg(50, 2)).unwrap());

    let zero = init_embeddings(3, 4, &TrainConfig { init_scale: Some(0.0), ..cfg(5, 1) }).unwrap();
    assert!(zero.titles.as_slice().iter().chain(zero.skills.as_slice()).all(|&v| v == 0.0));

    assert!(matches!(init_embeddings(0, 4, &cfg(5, 1)), Err(Error::Empty(_))));
    assert!(init_embeddings(3, 4, &cfg(0, 1)).is_err());
}

#[test]
fn affinity_examples() {
    assert_eq!(affinity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_eq!(affinity(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
    assert!(matches!(
        affinity(&[1.0], &[1.0, 2.0]),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn triplet_loss_reference_values() {
    let zero = init_embeddings(3, 3, &TrainConfig { init_scale: Some(0.0), ..cfg(2, 0) }).unwrap();
    let t = triplet(RelationKind::JobJob, 0, 1, 2);
    assert!((triplet_loss(&zero, &t).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(triplet_loss(&zero, &triplet(RelationKind::JobSkill, 0, 5, 1)).is_err());

    // Saturation and the mirrored asymptote.
    assert!(margin_loss(100.0) >= 0.0 && margin_loss(100.0) < 1e-6);
    assert!((margin_loss(-100.0) - 100.0).abs() < 1e-6);
    assert!(margin_loss(1e4).is_finite() && margin_loss(-1e4).is_finite());
    assert!(margin_loss(30.0) > 0.0);
}

#[test]
fn triplet_loss_matches_direct_formula() {
    let mut rng = crate::rng::stream_rng(9, 0);
    for _ in 0..1000 {
        let d: f64 = rng.random_range(-20.0..20.0);
        let direct = -(1.0 / (1.0 + (-d).exp())).ln();
        assert!((margin_loss(d) - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-15);
    }
    let space = random_space(4, 5, 6, 3);
    let t = triplet(RelationKind::JobSkill, 1, 2, 4);
    let (x, y, z) = (space.titles.row(1), space.skills.row(2), space.skills.row(4));
    let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
        - x.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
    let direct = (1.0 + (-d).exp()).ln();
    assert!((triplet_loss(&space, &t).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn joint_loss_cases() {
    let space = random_space(4, 4, 3, 5);
    let empty = TripletBatches::default();
    let e = joint_loss(&space, &empty, 0.0).unwrap();
    assert_eq!(e.total, 0.0);

    let zero = init_embeddings(4, 4, &TrainConfig { init_scale: Some(0.0), ..cfg(3, 0) }).unwrap();
    let batches = TripletBatches {
        job_job: vec![triplet(RelationKind::JobJob, 0, 1, 2); 3],
        skill_skill: vec![triplet(RelationKind::SkillSkill, 3, 1, 2); 2],
        job_skill: vec![triplet(RelationKind::JobSkill, 0, 0, 3)],
    };
    let e = joint_loss(&zero, &batches, 1.0).unwrap();
    assert!((e.total - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);

    // Brute-force recomputation on random embeddings.
    let e = joint_loss(&space, &batches, 0.3).unwrap();
    let direct = |t: &Triplet| {
        let (x, y, z) = space.triplet_rows(t);
        let d: f64 = (0..3).map(|i| x[i] * (y[i] - z[i])).sum();
        (1.0 + (-d).exp()).ln()
    };
    let jj: f64 = batches.job_job.iter().map(direct).sum();
    let ss: f64 = batches.skill_skill.iter().map(direct).sum();
    let js: f64 = batches.job_skill.iter().map(direct).sum();
    let reg = 0.3
        * (space.titles.as_slice().iter().map(|v| v * v).sum::<f64>()
            + space.skills.as_slice().iter().map(|v| v * v).sum::<f64>());
    for (got, want) in [(e.o_jj, jj), (e.o_ss, ss), (e.o_js, js), (e.reg, reg)] {
        assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
    }
    assert!((e.total - (e.o_jj + e.o_ss + e.o_js + e.reg)).abs() <= 1e-9 * e.total.abs());
}

#[test]
fn sgd_step_touches_three_rows() {
    let mut space = random_space(5, 5, 4, 8);
    let before = space.clone();
    let t = triplet(RelationKind::JobSkill, 2, 1, 3);
    sgd_step(&mut space, &t, 0.0, 0.1).unwrap();
    assert_eq!(space, before);

    sgd_step(&mut space, &t, 0.1, 0.01).unwrap();
    assert_eq!(space.titles.row(0), before.titles.row(0));
    assert_ne!(space.titles.row(2), before.titles.row(2));
    for s in [0, 2, 4] {
        assert_eq!(space.skills.row(s), before.skills.row(s));
    }
    assert_ne!(space.skills.row(1), before.skills.row(1));
    assert_ne!(space.skills.row(3), before.skills.row(3));
    // One small step lowers the triplet loss.
    assert!(triplet_loss(&space, &t).unwrap() < triplet_loss(&before, &t).unwrap());

    assert!((1.0 - sigmoid(0.0) - 0.5).abs() < 1e-16);
}

#[test]
fn sgd_step_reports_divergence() {
    let mut space = random_space(3, 3, 2, 1);
    for v in space.titles.row_mut(0) {
        *v = 1e308;
    }
    let err = sgd_step(&mut space, &triplet(RelationKind::JobJob, 0, 1, 2), 1e10, 1.0).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));
}

/// Central differences of the per-triplet objective, written against raw rows.
fn numeric_gradient(space: &EmbeddingSpace, t: &Triplet, lambda: f64, h: f64) -> Vec<f64> {
    let objective = |x: &[f64], y: &[f64], z: &[f64]| {
        let d: f64 = (0..x.len()).map(|i| x[i] * y[i] - x[i] * z[i]).sum();
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        (1.0 + (-d).exp()).ln() + lambda * (sq(x) + sq(y) + sq(z))
    };
    let (x, y, z) = space.triplet_rows(t);
    let mut rows = [x.to_vec(), y.to_vec(), z.to_vec()];
    let mut out = Vec::new();
    for r in 0..3 {
        for i in 0..rows[r].len() {
            let orig = rows[r][i];
            rows[r][i] = orig + h;
            let plus = objective(&rows[0], &rows[1], &rows[2]);
            rows[r][i] = orig - h;
            let minus = objective(&rows[0], &rows[1], &rows[2]);
            rows[r][i] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
    }
    out
}

#[test]
fn analytic_step_matches_finite_differences() {
    let mut rng = crate::rng::stream_rng(21, 0);
    for case in 0..30 {
        let space = random_space(6, 7, 5, case);
        let lambda = [0.0, 0.01, 0.1][case as usize % 3];
        let kind = RelationKind::ALL[case as usize % 3];
        let (n_src, n_dst) = match kind {
            RelationKind::JobJob => (6, 6),
            RelationKind::SkillSkill => (7, 7),
            RelationKind::JobSkill => (6, 7),
        };
        let x = rng.random_range(0..n_src);
        let y = (x + 1) % n_dst;
        let z = (x + 2) % n_dst;
        let t = triplet(kind, x, y, z);
        let eta = 1e-3;
        let mut stepped = space.clone();
        sgd_step(&mut stepped, &t, eta, lambda).unwrap();
        let (a, b, c) = space.triplet_rows(&t);
        let (a2, b2, c2) = stepped.triplet_rows(&t);
        let analytic: Vec<f64> = [(a, a2), (b, b2), (c, c2)]
            .iter()
            .flat_map(|(old, new)| old.iter().zip(new.iter()).map(|(o, n)| (o - n) / eta))
            .collect();
        let numeric = numeric_gradient(&space, &t, lambda, 1e-6);
        let diff: f64 = analytic.iter().zip(&numeric).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff / scale.max(1e-8) < 1e-5, "case {case}: relative error {}", diff / scale);
    }
}

#[test]
fn ranking_accuracy_cases() {
    let zero = init_embeddings(3, 3, &TrainConfig { init_scale: Some(0.0), ..cfg(2, 0) }).unwrap();
    let ts = vec![triplet(RelationKind::JobJob, 0, 1, 2), triplet(RelationKind::SkillSkill, 2, 0, 1)];
    assert_eq!(ranking_accuracy(&zero, &ts).unwrap(), 0.5);
    assert!(matches!(ranking_accuracy(&zero, &[]), Err(Error::Empty(_))));

    let titles = Matrix::from_vec(3, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
    let skills = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
    let ordered = EmbeddingSpace::new(titles, skills).unwrap();
    let ts = vec![
        triplet(RelationKind::JobJob, 0, 1, 2),
        triplet(RelationKind::JobSkill, 1, 0, 2),
        triplet(RelationKind::SkillSkill, 1, 2, 0),
    ];
    assert_eq!(ranking_accuracy(&ordered, &ts).unwrap(), 1.0);

    // Random embeddings on random triplets sit near one half.
    let space = random_space(200, 200, 8, 4);
    let mut rng = crate::rng::stream_rng(4, 1);
    let n = 4000;
    let ts: Vec<_> = (0..n)
        .map(|_| {
            let x = rng.random_range(0..200);
            let y = rng.random_range(0..200);
            let z = rng.random_range(0..200);
            triplet(RelationKind::JobSkill, x, y, z)
        })
        .collect();
    let acc = ranking_accuracy(&space, &ts).unwrap();
    let sigma = (0.25 / n as f64).sqrt();
    assert!((acc - 0.5).abs() < 3.0 * sigma + 0.02, "accuracy {acc}");
}

fn two_track_graphs(seed: u64) -> (RelationGraph, RelationGraph, RelationGraph) {
    let cfg = SynthConfig {
        tracks: 2,
        titles_per_track: 10,
        skills_per_track: 20,
        skills_per_title: 8,
        skills_per_posting: 4,
        postings: 2000,
        sequences: 600,
        noise: 0.0,
        ..SynthConfig::default()
    };
    let s = generate_synthetic(&cfg, seed).unwrap();
    (
        build_job_job(&s.sequences, s.titles.len()).unwrap(),
        build_skill_skill(&s.postings, s.skills.len()).unwrap(),
        build_job_skill(&s.postings, s.titles.len(), s.skills.len()).unwrap(),
    )
}

#[test]
fn zero_epochs_returns_initialization() {
    let (jj, ss, js) = two_track_graphs(1);
    let graphs = TrainingGraphs { job_job: &jj, skill_skill: &ss, job_skill: &js };
    let c = TrainConfig { epochs: 0, ..cfg(8, 3) };
    let (space, report) = train(graphs, &c).unwrap();
    assert_eq!(space, init_embeddings(20, 40, &c).unwrap());
    assert_eq!(report.entries.len(), 1);
}

#[test]
fn training_learns_planted_tracks() {
    let (jj, ss, js) = two_track_graphs(2);
    let graphs = TrainingGraphs { job_job: &jj, skill_skill: &ss, job_skill: &js };
    let c = TrainConfig { epochs: 30, triplets_per_epoch: Some(1000), ..cfg(8, 3) };
    let (space, report) = train(graphs, &c).unwrap();
    let first = report.initial().unwrap();
    let last = report.last().unwrap();
    assert!(last.total < first.total);
    assert!(last.accuracy_by_kind.iter().all(|&a| a >= 0.9), "{:?}", last.accuracy_by_kind);
    assert!(space.titles.is_finite() && space.skills.is_finite());
    for e in &report.entries {
        let sum = e.o_jj + e.o_ss + e.o_js + e.reg;
        assert!((e.total - sum).abs() <= 1e-9 * sum.abs());
    }

    let (again, report2) = train(graphs, &c).unwrap();
    assert_eq!(space, again);
    assert_eq!(report, report2);
}

#[test]
fn huge_learning_rate_diverges() {
    let (jj, ss, js) = two_track_graphs(2);
    let graphs = TrainingGraphs { job_job: &jj, skill_skill: &ss, job_skill: &js };
    let c = TrainConfig { epochs: 50, learning_rate: 1e154, init_scale: Some(1.0), ..cfg(8, 3) };
    assert!(matches!(train(graphs, &c), Err(Error::Divergence { .. })));
}

#[test]
fn embedding_text_round_trip() {
    let space = random_space(3, 2, 4, 6);
    let vocab: Vocabulary = ["web developer", "nurse", "cto"].into_iter().collect();
    let mut buf = Vec::new();
    write_embeddings(&mut buf, &vocab, &space.titles).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("3 4\nweb developer "));

    let (v2, m2) = read_embeddings(buf.as_slice()).unwrap();
    assert_eq!(v2, vocab);
    for (a, b) in space.titles.as_slice().iter().zip(m2.as_slice()) {
        assert!((a - b).abs() <= 5e-9 * a.abs());
    }
    // The persisted form is a fixed point of save/load.
    let mut again = Vec::new();
    write_embeddings(&mut again, &v2, &m2).unwrap();
    assert_eq!(again, buf);
    assert_eq!(read_embeddings(again.as_slice()).unwrap().1, m2);

    assert!(read_embeddings("2 3\na 1 2 3\n".as_bytes()).is_err());
    assert!(read_embeddings("1 3\na 1 2\n".as_bytes()).is_err());
    assert!(read_embeddings("2 1\na 1\na 2\n".as_bytes()).is_err());
}

#[test]
fn loss_csv_layout() {
    let report = LossReport {
        entries: vec![LossEntry {
            epoch: 0,
            o_jj: 1.0,
            o_ss: 2.0,
            o_js: 3.0,
            reg: 0.5,
            total: 6.5,
            heldout_accuracy: 0.5,
            accuracy_by_kind: [0.5; 3],
        }],
    };
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, &report).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,o_jj,o_ss,o_js,reg,total,heldout_accuracy\n0,1,2,3,0.5,6.5,0.5\n"
    );
}

proptest! {
    #[test]
    fn loss_decreases_with_margin(a in -50.0f64..50.0, delta in 1e-3f64..10.0) {
        prop_assert!(margin_loss(a + delta) < margin_loss(a));
        prop_assert!(margin_loss(a) > 0.0);
    }

    #[test]
    fn affinity_symmetric(u in prop::collection::vec(-10.0f64..10.0, 6), v in prop::collection::vec(-10.0f64..10.0, 6)) {
        prop_assert_eq!(affinity(&u, &v).unwrap(), affinity(&v, &u).unwrap());
    }
}
