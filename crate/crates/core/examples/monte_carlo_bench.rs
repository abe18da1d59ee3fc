//! Monte-Carlo NMSE over independent realizations, as in the benchmark CLI.
//!
//! cargo run --release --example monte_carlo_bench -- [scenario] [realizations]

use reprocs::eval::{run_benchmark, BenchConfig};

fn main() -> reprocs::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().as_deref().unwrap_or("table1-9-large").parse()?;
    let realizations = args.next().map_or(4, |s| s.parse().expect("realizations"));
    let report = run_benchmark(&BenchConfig {
        realizations,
        ..BenchConfig::new(scenario)
    })?;
    report.write_csv(std::io::stdout())?;
    println!("{}", report.table_row());
    let beta: Vec<String> = report.beta_means_by_step().iter().map(|b| format!("{b:.3}")).collect();
    println!("mean residual background per p-PCA step: {}", beta.join(" "));
    Ok(())
}
