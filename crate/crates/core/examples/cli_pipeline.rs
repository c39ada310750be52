//! Drives the command-line interface end to end in a scratch directory:
//! generate, stats, train, predict, eval. Equivalent to running the `prgc`
//! binary with the same arguments.
//!
//! cargo run --release --example cli_pipeline

use std::fs;

use clap::Parser;
use prgc::cli::{run, Cli, EXIT_OK};

fn prgc(args: &[&str]) {
    println!("$ prgc {}", args.join(" "));
    let cli = Cli::try_parse_from(std::iter::once("prgc").chain(args.iter().copied()))
        .unwrap_or_else(|e| e.exit());
    let code = run(&cli);
    assert_eq!(code, EXIT_OK, "command failed");
}

fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let dir = std::env::temp_dir().join("prgc_cli_pipeline");
    fs::create_dir_all(&dir)?;
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();

    fs::write(
        path("run.toml"),
        r#"
[encoder]
dim = 32

[train]
epochs = 30

[synth.counts]
normal = 40
seo = 30
epo = 20
soo = 20
"#,
    )?;

    let (config, train, valid) = (path("run.toml"), path("train.json"), path("valid.json"));
    let (model_dir, pred) = (path("model"), path("pred.json"));
    prgc(&[
        "generate", "--config", &config, "--seed", "1", "--out", &train,
    ]);
    prgc(&[
        "generate", "--config", &config, "--seed", "2", "--out", &valid,
    ]);
    prgc(&["stats", &train]);
    prgc(&[
        "train", "--config", &config, "--train", &train, "--valid", &valid, "--out", &model_dir,
    ]);
    let checkpoint = path("model/checkpoint.json");
    prgc(&[
        "predict",
        "--checkpoint",
        &checkpoint,
        "--test",
        &valid,
        "--out",
        &pred,
    ]);
    prgc(&["eval", "--pred", &pred, "--test", &valid]);

    let metrics = fs::read_to_string(path("model/metrics.jsonl"))?;
    println!("{} epochs logged to metrics.jsonl", metrics.lines().count());
    Ok(())
}
