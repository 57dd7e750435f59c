use clap::Parser;

use spline_ot::cli::{error_json, exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("SPLINE_OT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("ignoring SPLINE_OT_THREADS={n}: expected a positive integer"),
        }
    }
    match run(&cli) {
        Ok(summary) => println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("summary is JSON")
        ),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            std::process::exit(exit_code(&e));
        }
    }
}
