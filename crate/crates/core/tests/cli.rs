use std::path::Path;
use std::process::{Command, Output};

fn qbias(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbias"))
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .env_remove("QBIAS_SEED")
        .env_remove("QBIAS_OUTPUT_DIR")
        .output()
        .expect("run qbias")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\n{}", o.status, String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flag_exits_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbias(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn reversing_twice_restores_the_text() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("q.jsonl");
    std::fs::write(
        &input,
        "{\"question_id\":1,\"question\":\"what color is the cup?\"}\n{\"question_id\":2,\"question\":\"is there a dog\",\"image_id\":9}\n",
    )
    .unwrap();
    let once = dir.path().join("once.jsonl");
    let twice = dir.path().join("twice.jsonl");
    for (from, to) in [(&input, &once), (&once, &twice)] {
        ok(&qbias(
            dir.path(),
            &["morph", "--variant", "3", "--input", from.to_str().unwrap(), "--output", to.to_str().unwrap()],
        ));
    }
    let first = std::fs::read_to_string(&once).unwrap();
    assert!(first.contains("\"cup the is color what?\""), "{first}");
    assert_eq!(std::fs::read_to_string(&twice).unwrap(), std::fs::read_to_string(&input).unwrap());
}

#[test]
fn morph_reads_vqa_question_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("v.json");
    std::fs::write(&input, r#"{"questions":[{"question_id":5,"image_id":1,"question":"What color is the cup?"}]}"#).unwrap();
    let out = dir.path().join("o.json");
    ok(&qbias(
        dir.path(),
        &["morph", "--variant", "1", "--format", "vqa", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap()],
    ));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["questions"][0]["question"], "cup what color is the?");
    assert_eq!(v["questions"][0]["image_id"], 1);
}

#[test]
fn generate_train_report_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.toml");
    std::fs::write(&cfg, "n_train = 400\nn_test = 80\n").unwrap();
    let train = dir.path().join("train.toml");
    std::fs::write(&train, "epochs = 2\nembed_dim = 8\nhidden_dim = 8\n").unwrap();
    ok(&qbias(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]));
    ok(&qbias(dir.path(), &["train", "--mode", "question", "--config", train.to_str().unwrap()]));
    let o = qbias(dir.path(), &["report"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("event=report"));
    let table = std::fs::read_to_string(dir.path().join("report/table1.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("seed,model,split,ques,pre_train,post_train,pre_test,post_test"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["42", "full", "test_id"]);
    assert!(row[3].parse::<f64>().is_ok());
    assert_eq!(row[4], "NA");
}

#[test]
fn eval_writes_a_prediction_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "n_train = 200\nn_test = 40\n").unwrap();
    ok(&qbias(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]));
    ok(&qbias(dir.path(), &["train", "--mode", "postfix", "--epochs", "1"]));
    let model = dir.path().join("runs/postfix/seed42/model.json");
    let out = dir.path().join("p.jsonl");
    ok(&qbias(
        dir.path(),
        &["eval", "--model", model.to_str().unwrap(), "--split", "test_id", "--input", "variant2", "--out", out.to_str().unwrap()],
    ));
    let n = std::fs::read_to_string(out).unwrap().lines().count();
    assert_eq!(n, 40);
}

#[test]
fn recipe_without_generator_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("r.toml");
    std::fs::write(&recipe, "name = \"x\"\nseeds = [1]\n").unwrap();
    let o = qbias(dir.path(), &["reproduce", recipe.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "noise = 0.9\n").unwrap();
    let o = qbias(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_show_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbias(dir.path(), &["config", "show", "generator"]);
    ok(&o);
    let text = String::from_utf8(o.stdout).unwrap();
    let path = dir.path().join("shown.toml");
    std::fs::write(&path, &text).unwrap();
    ok(&qbias(dir.path(), &["generate", "--config", path.to_str().unwrap()]));
}
