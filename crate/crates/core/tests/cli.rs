mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::Array2;
use permrank::data::{parse_rankings, read_model, write_model};
use permrank::eval::{enumerate_orderings, exact_distribution, tv_distance};
use permrank::factored_pl::{train_fpl, DampingSchedule, FplModel};
use permrank::latent_pl::MixtureModel;
use permrank::loglinear::{PairTable, PairwiseModel};
use permrank::optim::Schedule;
use permrank::pairwise::RegWeights;
use permrank::types::{FactorPair, ItemId, UserId};
use permrank::Model;
use tempfile::TempDir;

use common::*;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permrank"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn put(dir: &TempDir, name: &str, text: &str) {
    std::fs::write(dir.path().join(name), text).unwrap();
}

fn get(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join(name)).unwrap()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_writes_singletons_and_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "synth", "--out", "d.txt", "--users", "2", "--items", "3", "--k", "1", "--min-len", "1", "--max-len", "1",
    ];
    ok(dir.path(), &args);
    let text = get(&dir, "d.txt");
    let (data, _) = parse_rankings(&text).unwrap();
    assert_eq!(data.lists().len(), 2);
    assert!(data.lists().iter().all(|l| l.items.len() == 1));
    assert!(matches!(read_model(&get(&dir, "d.txt.truth.model")).unwrap(), Model::FactoredPl(_)));

    let truth = get(&dir, "d.txt.truth.model");
    ok(dir.path(), &args);
    assert_eq!(get(&dir, "d.txt"), text);
    assert_eq!(get(&dir, "d.txt.truth.model"), truth);
}

#[test]
fn synth_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "--out", "d.txt", "--items", "3", "--min-len", "5", "--max-len", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

const TOY: &str = "0\t0,1,2\n1\t3,2\n2\t1,3,0,2\n";

#[test]
fn zero_epoch_training_writes_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "toy.txt", TOY);
    ok(
        dir.path(),
        &["train", "--model", "factored-pl", "--in", "toy.txt", "--out", "m", "--k", "2", "--epochs", "0", "--seed", "9"],
    );
    let (data, _) = parse_rankings(TOY).unwrap();
    let schedule = Schedule {
        iterations: 0,
        ..Schedule::default()
    };
    let init = train_fpl(&data, 2, DampingSchedule::None, RegWeights::default(), &schedule, 9).unwrap();
    assert_eq!(get(&dir, "m"), write_model(&Model::FactoredPl(init.model)));
}

#[test]
fn training_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "toy.txt", TOY);
    let args = |out| {
        [
            "train", "--model", "loglin-positional", "--in", "toy.txt", "--out", out, "--k", "2", "--epochs", "20",
            "--seed", "4",
        ]
    };
    let t1 = ok(dir.path(), &args("a"));
    let t2 = ok(dir.path(), &args("b"));
    assert_eq!(t1, t2);
    assert_eq!(get(&dir, "a"), get(&dir, "b"));
}

#[test]
fn latent_training_trace_never_decreases() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "d.txt", "--users", "40", "--items", "15", "--min-len", "5", "--seed", "2"]);
    let trace = ok(
        dir.path(),
        &["train", "--model", "latent-pl", "--in", "d.txt", "--out", "m", "--k", "3", "--epochs", "25"],
    );
    let values: Vec<f64> = trace.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 26);
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{values:?}");
}

#[test]
fn predict_matches_score_sort() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(12);
    let model = FplModel {
        factors: factors(&mut r, 3, 8, 2, 1.0),
        damping: DampingSchedule::None,
        reg: RegWeights::default(),
    };
    put(&dir, "m", &write_model(&Model::FactoredPl(model.clone())));
    let out = ok(dir.path(), &["predict", "--model", "m", "--user", "2", "--candidates", "7,1,4,0"]);
    let expected = model.predict_sort(UserId(2), &[ItemId(7), ItemId(1), ItemId(4), ItemId(0)]).unwrap();
    let labels: Vec<String> = expected.iter().map(|y| y.to_string()).collect();
    assert_eq!(out, format!("2\t{}\n", labels.join(",")));
}

#[test]
fn one_community_latent_predicts_like_factored_pl() {
    let dir = tempfile::tempdir().unwrap();
    // seen items 0,1,2 score 3,1,-1; candidates 3,4,5 score 2,0,-2
    let scores = Array2::from_shape_vec((1, 6), vec![3.0, 1.0, -1.0, 2.0, 0.0, -2.0]).unwrap();
    let latent = MixtureModel::new(Array2::ones((1, 1)), scores.clone()).unwrap();
    let fpl = FplModel {
        factors: FactorPair::new(Array2::ones((1, 1)), scores).unwrap(),
        damping: DampingSchedule::None,
        reg: RegWeights::NONE,
    };
    put(&dir, "latent", &write_model(&Model::LatentPl(latent)));
    put(&dir, "fpl", &write_model(&Model::FactoredPl(fpl)));
    put(&dir, "seen.txt", "#! users=1 items=6\n0\t0,1,2\n");
    let a = ok(dir.path(), &["predict", "--model", "latent", "--in", "seen.txt", "--user", "0", "--candidates", "5,4,3"]);
    let b = ok(dir.path(), &["predict", "--model", "fpl", "--in", "seen.txt", "--user", "0", "--candidates", "5,4,3"]);
    assert_eq!(a, "0\t3,4,5\n");
    assert_eq!(a, b);
}

#[test]
fn empty_candidate_set_ranks_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(13);
    let model = Model::LoglinPositional(positional_model(&mut r, 2, 4, 1));
    put(&dir, "m", &write_model(&model));
    let out = ok(dir.path(), &["predict", "--model", "m", "--user", "1", "--candidates", ""]);
    assert_eq!(out, "1\t\n");
    put(&dir, "q.txt", "");
    assert_eq!(ok(dir.path(), &["predict", "--model", "m", "--queries", "q.txt"]), "");
}

#[test]
fn queries_file_keeps_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(14);
    let model = Model::LoglinPositional(positional_model(&mut r, 3, 5, 2));
    put(&dir, "m", &write_model(&model));
    put(&dir, "q.txt", "2\t0,1,2\n0\t3,4\n2\t4\n");
    let out = ok(dir.path(), &["predict", "--model", "m", "--queries", "q.txt"]);
    let users: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(users, ["2", "0", "2"]);
}

#[test]
fn unknown_user_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(15);
    put(&dir, "m", &write_model(&Model::LoglinPositional(positional_model(&mut r, 2, 4, 1))));
    let out = run(dir.path(), &["predict", "--model", "m", "--user", "17", "--candidates", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("17"), "{}", stderr(&out));
}

#[test]
fn perfect_model_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    // every list is ordered by the shared score ranking
    let scores: Vec<f64> = (0..8).map(|i| -(i as f64)).collect();
    let model = FplModel {
        factors: FactorPair::new(Array2::ones((3, 1)), Array2::from_shape_vec((1, 8), scores).unwrap()).unwrap(),
        damping: DampingSchedule::None,
        reg: RegWeights::NONE,
    };
    put(&dir, "m", &write_model(&Model::FactoredPl(model)));
    put(&dir, "d.txt", "#! users=3 items=8\n0\t0,2,3,5,7\n1\t1,2,4,6\n2\t0,1,2,3,4,5,6,7\n");
    let report = ok(dir.path(), &["evaluate", "--model", "m", "--in", "d.txt", "--split", "0.5"]);
    assert_eq!(report_value(&report, "users_evaluated"), 3.0);
    assert_eq!(report_value(&report, "mean_kendall_tau"), 1.0);
    assert!((report_value(&report, "mean_ndcg@10") - 1.0).abs() < 1e-12);
}

#[test]
fn random_model_is_uncorrelated() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "d.txt", "--users", "300", "--items", "30", "--scale", "4", "--seed", "21"]);
    let mut r = rng(22);
    let model = FplModel {
        factors: factors(&mut r, 300, 30, 3, 1.0),
        damping: DampingSchedule::None,
        reg: RegWeights::NONE,
    };
    put(&dir, "m", &write_model(&Model::FactoredPl(model)));
    let report = ok(dir.path(), &["evaluate", "--model", "m", "--in", "d.txt", "--split", "0.5"]);
    let tau = report_value(&report, "mean_kendall_tau");
    assert!(tau.abs() <= 0.1, "{report}");
}

#[test]
fn short_lists_are_skipped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(23);
    put(&dir, "m", &write_model(&Model::LoglinPositional(positional_model(&mut r, 2, 4, 1))));
    put(&dir, "d.txt", "#! users=2 items=4\n0\t0,1\n1\t3,2,1,0\n");
    let out = run(dir.path(), &["evaluate", "--model", "m", "--in", "d.txt", "--split", "0.5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning"));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("1,2,"));
}

fn zero_pairwise(m: usize) -> Model {
    Model::LoglinPairwise(PairwiseModel {
        gamma: vec![0.0; m],
        lambda: PairTable::from_entries([]).unwrap(),
        tau: 1,
    })
}

#[test]
fn sampling_a_flat_model_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "m", &write_model(&zero_pairwise(3)));
    let out = ok(dir.path(), &["sample", "--model", "m", "--user", "0", "--items", "0,1,2", "--steps", "60000", "--seed", "3"]);
    let mut counts = BTreeMap::new();
    for line in out.lines().filter(|l| !l.starts_with('#')) {
        let items: Vec<ItemId> = line.split(',').map(|t| ItemId(t.parse().unwrap())).collect();
        *counts.entry(items).or_insert(0u64) += 1;
    }
    let items = [ItemId(0), ItemId(1), ItemId(2)];
    assert_eq!(counts.len(), enumerate_orderings(&items).unwrap().len());
    let exact = exact_distribution(&zero_pairwise(3), UserId(0), &items).unwrap();
    assert!(tv_distance(&counts, &exact).unwrap() < 0.05);
    assert!(out.ends_with("# acceptance_rate = 1.000000\n"));
}

#[test]
fn zero_steps_emit_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "m", &write_model(&zero_pairwise(4)));
    let out = ok(dir.path(), &["sample", "--model", "m", "--user", "0", "--items", "2,0,3", "--steps", "0"]);
    assert_eq!(out, "2,0,3\n# acceptance_rate = 0.000000\n");
}

#[test]
fn sample_streams_repeat_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(24);
    put(&dir, "m", &write_model(&Model::LoglinPairwise(pairwise_model(&mut r, 5, 1.0))));
    let args = ["sample", "--model", "m", "--user", "0", "--items", "0,1,2,3,4", "--steps", "300", "--seed", "8"];
    assert_eq!(ok(dir.path(), &args), ok(dir.path(), &args));
}

#[test]
fn plackett_luce_models_are_not_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(25);
    put(&dir, "m", &write_model(&Model::LatentPl(mixture_model(&mut r, 2, 4, 2, 1.0))));
    let out = run(dir.path(), &["sample", "--model", "m", "--user", "0", "--items", "0,1,2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "toy.txt", TOY);
    let missing = run(dir.path(), &["train", "--model", "factored-pl", "--in", "nope.txt", "--out", "m"]);
    assert_eq!(missing.status.code(), Some(3));
    let bad = run(dir.path(), &["train", "--model", "factored-pl", "--in", "toy.txt", "--out", "m", "--k", "x"]);
    assert_eq!(bad.status.code(), Some(1));
    put(&dir, "broken.txt", "0\t1,1\n");
    let invalid = run(dir.path(), &["train", "--model", "factored-pl", "--in", "broken.txt", "--out", "m"]);
    assert_eq!(invalid.status.code(), Some(1));
    assert!(stderr(&invalid).contains("line 1"), "{}", stderr(&invalid));
    let diverge = run(
        dir.path(),
        &[
            "train", "--model", "loglin-positional", "--in", "toy.txt", "--out", "m", "--k", "2", "--step", "1e308",
            "--epochs", "5",
        ],
    );
    assert_eq!(diverge.status.code(), Some(2), "{}", stderr(&diverge));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    put(&dir, "toy.txt", TOY);
    put(&dir, "run.conf", "# settings\nk = 2\nepochs = 3\nseed = 11\n");
    let out = run(
        dir.path(),
        &["train", "--config", "run.conf", "--model", "factored-pl", "--in", "toy.txt", "--out", "m", "--epochs", "4"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let echo = stderr(&out);
    assert!(echo.contains("# k = 2\n"));
    assert!(echo.contains("# epochs = 4\n"));
    assert!(echo.contains("# seed = 11\n"));
    assert!(echo.contains("# alpha = 0.01\n"));
    assert!(echo.contains("# tau = 5\n"));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["train", "--help"]);
    assert!(help.contains("[default: 0.01]"));
    assert!(help.contains("--structure"));
}
