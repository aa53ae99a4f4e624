use clap::Parser;
use vfog_cli::{run_args, Args, Outcome};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run_args(&args) {
        Ok(Outcome::Run(r)) => {
            for f in &r.files {
                println!("{}", f.display());
            }
        }
        Ok(Outcome::Sweep(s)) => {
            for r in &s.runs {
                println!("{}", r.dir.display());
            }
        }
        Err(e) => {
            eprintln!("vfog: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
