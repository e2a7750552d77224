use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use citerec::corpus::Orientation;
use citerec::pipeline::{
    cmd_evaluate, cmd_prepare, cmd_recommend, cmd_train, AlgorithmSpec, ModelType, PipelineConfig,
    DEFAULT_RECOMMENDATIONS,
};
use citerec::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "citerec", version, about = "Context-aware citation recommendation")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; each component derives its own from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory holding every artifact and manifest.json.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build training corpora and test queries from a raw JSONL corpus.
    Prepare {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        min_citations: Option<usize>,
        /// Training years, e.g. 1991-2016.
        #[arg(long)]
        train_years: Option<String>,
        /// Test years, e.g. 2017.
        #[arg(long)]
        test_years: Option<String>,
    },
    /// Train models on a prepared corpus.
    Train {
        /// bm25, hd2v, doc2vec or lda; comma-separated for several.
        #[arg(long, required = true, value_delimiter = ',')]
        algorithm: Vec<String>,
        #[arg(long, default_value = "citing")]
        orientation: String,
    },
    /// Recommend papers for one citation context.
    Recommend {
        /// bm25, hd2vout, hd2vinout, doc2vec, lda, hybrid or hybrid23.
        #[arg(long)]
        algorithm: String,
        #[arg(long, default_value = "citing")]
        orientation: String,
        #[arg(long, default_value_t = DEFAULT_RECOMMENDATIONS)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// The citation context text.
        context: String,
    },
    /// Evaluate algorithms on the prepared test queries.
    Evaluate {
        /// Comma-separated `name[@orientation]` list, e.g. bm25,bm25@cited,hybrid.
        #[arg(long, required = true, value_delimiter = ',')]
        algorithm: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        cutoffs: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Prepare {
            corpus,
            min_citations,
            train_years,
            test_years,
        } => {
            if corpus.is_some() {
                config.corpus = corpus;
            }
            if let Some(m) = min_citations {
                config.min_citations = m;
            }
            if let Some(y) = train_years {
                config.train_years = y.parse()?;
            }
            if let Some(y) = test_years {
                config.test_years = y.parse()?;
            }
            let summary = cmd_prepare(&config)?;
            for (k, v) in summary.counts {
                println!("{k}\t{v}");
            }
        }
        Command::Train { algorithm, orientation } => {
            let orientation = orientation.parse::<Orientation>()?;
            let models = algorithm
                .iter()
                .map(|a| a.trim().parse::<ModelType>())
                .collect::<Result<Vec<_>>>()?;
            for model in models {
                let path = cmd_train(&config, model, orientation)?;
                println!("{}", path.display());
            }
        }
        Command::Recommend {
            algorithm,
            orientation,
            k,
            format,
            context,
        } => {
            let spec = AlgorithmSpec::new(algorithm.parse()?, orientation.parse::<Orientation>()?)?;
            let rec = cmd_recommend(&config, &context, spec, k)?;
            match format {
                Format::Json => {
                    let text = serde_json::to_string_pretty(&rec).map_err(|e| Error::InvalidInput(e.to_string()))?;
                    println!("{text}");
                }
                Format::Table => print!("{}", rec.table()),
            }
        }
        Command::Evaluate { algorithm, cutoffs } => {
            if let Some(c) = cutoffs {
                config.cutoffs = c;
            }
            let specs = algorithm
                .iter()
                .map(|a| a.trim().parse::<AlgorithmSpec>())
                .collect::<Result<Vec<_>>>()?;
            for report in cmd_evaluate(&config, &specs)? {
                for (alg, k, metric, value) in report.rows() {
                    println!("{alg}\t{k}\t{metric}\t{value:.4}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
