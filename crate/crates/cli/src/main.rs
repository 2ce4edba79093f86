use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use randmat_core::report::{run_from_file, Command, RunOptions};

/// Batch evaluation of structured random matrix bounds, Monte Carlo
/// estimates and exact trace moments.
#[derive(Parser, Debug)]
#[command(name = "randmat", version)]
struct Args {
    /// Path to the model JSON file
    #[arg(long)]
    model: PathBuf,

    /// Command to run: bounds, mc, moments, sweep, covariance or probe
    #[arg(long)]
    cmd: String,

    /// Monte Carlo sample count (default: 200 up to n = 512, else 50)
    #[arg(long)]
    samples: Option<usize>,

    /// Base seed for all random streams
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for JSON and CSV artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Trace moment order p (the exponent is 2p)
    #[arg(long, default_value_t = 2)]
    p: usize,

    /// Histogram bin count for the mc command
    #[arg(long, default_value_t = 60)]
    bins: usize,

    /// Block sizes for the sweep command (default: powers of 4 dividing n)
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,

    /// Sample counts for the covariance command (default: the model's)
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,

    /// Also write the shape table CSV for the moments command
    #[arg(long, default_value_t = false)]
    dump_shapes: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match Command::parse(&args.cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("randmat: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        samples: args.samples,
        seed: args.seed,
        out_dir: args.out,
        p: args.p,
        bins: args.bins,
        k_values: args.k_values,
        n_values: args.n_values,
        dump_shapes: args.dump_shapes,
    };
    match run_from_file(&args.model, command, &opts) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("randmat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
