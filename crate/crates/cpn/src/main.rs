use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpn::commands::{cmd_detect, cmd_eval, cmd_synth, text_report_path, DetectArgs};
use cpn::report::report_text;

#[derive(Parser)]
#[command(name = "cpn", version, about = "Corner-proposal object detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run detection over a corpus of tensor bundles.
    Detect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Detection dump (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Also dump every proposal with its objectness.
        #[arg(long)]
        proposals: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        workers: u16,
    },
    /// Generate a synthetic oracle corpus.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a detection dump against ground truth.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// JSON report; the text tables go next to it with a .txt extension.
        #[arg(long)]
        report: PathBuf,
        /// Proposal dump for the recall columns.
        #[arg(long)]
        proposals: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> cpn::Result<()> {
    match cli.command {
        Command::Detect {
            corpus,
            config,
            out,
            proposals,
            workers,
        } => {
            let results = cmd_detect(&DetectArgs {
                corpus,
                config,
                out: out.clone(),
                proposals,
                workers: workers as usize,
            })?;
            let n = results.len();
            let total: f64 = results.iter().map(|r| r.seconds).sum();
            let props: usize = results.iter().map(|r| r.output.proposals.len()).sum();
            let kept: usize = results.iter().map(|r| r.output.survived).sum();
            let dets: usize = results.iter().map(|r| r.output.detections.len()).sum();
            for r in &results {
                println!(
                    "image {:>6}  {:>8.2} ms  proposals {:>5}  survived {:>4}  detections {:>3}",
                    r.image_id,
                    r.seconds * 1e3,
                    r.output.proposals.len(),
                    r.output.survived,
                    r.output.detections.len()
                );
            }
            if n > 0 {
                println!(
                    "{n} images, {dets} detections -> {}; mean {:.2} ms/image, {:.1} proposals/image, {:.2}% survived",
                    out.display(),
                    total * 1e3 / n as f64,
                    props as f64 / n as f64,
                    if props > 0 { 100.0 * kept as f64 / props as f64 } else { 0.0 }
                );
            } else {
                println!("0 images -> {}", out.display());
            }
        }
        Command::Synth {
            config,
            out,
            count,
            seed,
        } => {
            let m = cmd_synth(config.as_deref(), &out, count, seed)?;
            let boxes: usize = m.scenes.iter().map(|s| s.boxes).sum();
            println!("{} scenes, {boxes} boxes -> {}", m.scenes.len(), out.display());
        }
        Command::Eval {
            dets,
            gt,
            report,
            proposals,
        } => {
            let r = cmd_eval(&dets, &gt, &report, proposals.as_deref())?;
            print!("{}", report_text(&r));
            println!("-> {} and {}", report.display(), text_report_path(&report).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
