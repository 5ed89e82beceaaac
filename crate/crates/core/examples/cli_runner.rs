//! Drive the experiment runner from code with a config file and flag overrides.
//!
//! ```text
//! cargo run --example cli_runner
//! ```
//! The same runs from a shell: `roughderiv beta-p --p 2.5`.

pub fn run_example() -> roughderiv::Result<()> {
    let dir = std::env::temp_dir().join(format!("roughderiv-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("chen.conf");
    std::fs::write(&config, "# Chen identity on small lifts\nd = 3\nK = 5\ngrid_level = 5\nn = 10\n")?;

    let out = dir.to_string_lossy().into_owned();
    let conf = config.to_string_lossy().into_owned();
    let code = roughderiv::cli::run(["roughderiv", "check-chen", "--config", &conf, "--seed", "7", "--output-dir", &out]);
    println!("check-chen exit code {code}");
    assert_eq!(code, 0);

    let code = roughderiv::cli::run(["roughderiv", "decay-scan", "--dry-run", "--n", "50"]);
    assert_eq!(code, 0);

    println!("{}", std::fs::read_to_string(dir.join("chen.csv"))?.lines().take(3).collect::<Vec<_>>().join("\n"));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() {
    run_example().expect("cli_runner failed");
}
