use clap::Parser;
use predmarket_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!(
                "wrote {} files to {}",
                report.files.len(),
                report.out_dir.display()
            );
        }
        Err(e) => {
            eprintln!("predmarket: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
