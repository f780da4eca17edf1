//! Command-line front-end: validate network documents, run closed
//! collections, extract views, check security claims, and derive
//! composed/combined/canonised objects.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrsim::doc::{self, Network};
use qrsim::machine::{canonise, combine};
use qrsim::network::compose;
use qrsim::runner::{run, view, RunConfig};
use qrsim::security::{check_claim, CompareOpts};

#[derive(Parser)]
#[command(name = "qrsim", version, about = "Simulator for networks of quantum machines with classical message-driven scheduling, and a checker for witnessed simulatable-security claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a network document and run every validator.
    Validate { file: PathBuf },
    /// Run a closed collection and print (or write) its trace distribution.
    Run {
        file: PathBuf,
        /// Name of the collection to run.
        collection: String,
        #[command(flatten)]
        run_opts: RunOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a run document onto one machine's view distribution.
    View {
        /// A run document produced by `qrsim run`.
        run_file: PathBuf,
        /// The machine whose view to extract.
        machine: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a witnessed security claim and emit the verdict.
    Compare {
        file: PathBuf,
        /// Name of the claim to check.
        claim: String,
        /// Security parameters, e.g. --ks 1,2,3.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, default_value_t = 1e-12)]
        prune: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose structures and write the document extended by the result.
    Compose {
        file: PathBuf,
        /// Names of the structures to compose.
        #[arg(num_args = 2..)]
        structures: Vec<String>,
        /// Name of the composed structure.
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine machines (right-associated) and write the extended document.
    Combine {
        file: PathBuf,
        /// Names of the machines to combine.
        #[arg(num_args = 2..)]
        machines: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonise a machine and write the extended document.
    Canonise {
        file: PathBuf,
        /// The machine to canonise.
        machine: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Security parameter k.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Activation budget before truncation.
    #[arg(long, default_value_t = 64)]
    budget: usize,
    /// Probability floor below which branches are pruned.
    #[arg(long, default_value_t = 1e-12)]
    prune: f64,
}

/// Exit codes: 0 success, 1 validation failure, 2 runtime model error,
/// 3 I/O error.
fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl ToString) -> Failure {
    Failure { code, message: message.to_string() }
}

fn load(path: &Path) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    doc::parse_network(&text).map_err(|e| fail(1, e))
}

fn emit(out: Option<&PathBuf>, text: String) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| fail(3, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch() -> Result<(), Failure> {
    match Cli::parse().command {
        Command::Validate { file } => {
            let network = load(&file)?;
            let violations = network.validate_all();
            for v in &violations {
                println!("{v}");
            }
            if violations.is_empty() {
                println!(
                    "ok: {} machines, {} collections, {} structures, {} configurations, {} claims",
                    network.machines.len(),
                    network.collections.len(),
                    network.structures.len(),
                    network.configurations.len(),
                    network.claims.len()
                );
                Ok(())
            } else {
                Err(fail(1, "validation failed"))
            }
        }

        Command::Run { file, collection, run_opts, out } => {
            let network = load(&file)?;
            let c = network
                .collections
                .get(&collection)
                .ok_or_else(|| fail(1, format!("no collection named {collection:?}")))?;
            let cfg = RunConfig {
                k: run_opts.k,
                max_activations: run_opts.budget,
                prune_eps: run_opts.prune,
            };
            let dist = run(c, &cfg, &network.defaults).map_err(|e| fail(2, e))?;
            let doc = doc::run_to_doc(&dist, &collection);
            emit(out.as_ref(), doc::to_toml(&doc).map_err(|e| fail(3, e))?)
        }

        Command::View { run_file, machine, out } => {
            let text = std::fs::read_to_string(&run_file)
                .map_err(|e| fail(3, format!("{}: {e}", run_file.display())))?;
            let run_doc: doc::RunDoc = doc::from_toml(&text).map_err(|e| fail(1, e))?;
            let traces = doc::traces_from_doc(&run_doc).map_err(|e| fail(1, e))?;
            let views = view(&traces, &machine);
            let doc = doc::view_to_doc(&views, &machine);
            emit(out.as_ref(), doc::to_toml(&doc).map_err(|e| fail(3, e))?)
        }

        Command::Compare { file, claim, ks, budget, prune, out } => {
            let network = load(&file)?;
            let c = network
                .claims
                .get(&claim)
                .ok_or_else(|| fail(1, format!("no claim named {claim:?}")))?;
            let mut opts = CompareOpts::new(ks);
            opts.run = RunConfig { k: 1, max_activations: budget, prune_eps: prune };
            let verdicts =
                check_claim(c, &opts, &network.defaults).map_err(|e| fail(2, e))?;
            let doc = doc::verdicts_to_doc(&claim, c, &verdicts);
            let all_pass = doc.pass;
            emit(out.as_ref(), doc::to_toml(&doc).map_err(|e| fail(3, e))?)?;
            if all_pass {
                Ok(())
            } else {
                Err(fail(1, format!("claim {claim:?} does not hold for its witnesses")))
            }
        }

        Command::Compose { file, structures, name, out } => {
            let network = load(&file)?;
            let parts: Vec<_> = structures
                .iter()
                .map(|n| {
                    network
                        .structures
                        .get(n)
                        .ok_or_else(|| fail(1, format!("no structure named {n:?}")))
                })
                .collect::<Result<_, _>>()?;
            let composed = compose(&parts, &network.defaults).map_err(|e| fail(1, e))?;
            let mut doc = network.doc().clone();
            doc.structures.push(doc::StructureDoc {
                name,
                machines: composed.machines.names().cloned().collect(),
                service: composed.service.iter().map(|p| p.to_string()).collect(),
            });
            emit(out.as_ref(), doc::serialize_network(&doc).map_err(|e| fail(3, e))?)
        }

        Command::Combine { file, machines, out } => {
            let network = load(&file)?;
            if machines.len() < 2 {
                return Err(fail(1, "combine needs at least two machines"));
            }
            let defs: Vec<_> = machines
                .iter()
                .map(|n| {
                    network
                        .machines
                        .get(n)
                        .cloned()
                        .ok_or_else(|| fail(1, format!("no machine named {n:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            // Comb(M₁, …, Mₙ) = Comb(M₁, Comb(M₂, …)).
            let mut iter = defs.into_iter().rev();
            let mut acc = iter.next().unwrap();
            for m in iter {
                acc = combine(&m, &acc).map_err(|e| fail(1, e))?;
            }
            let mut doc = network.doc().clone();
            doc.machines.push(doc::machine_to_doc(&acc).map_err(|e| fail(1, e))?);
            emit(out.as_ref(), doc::serialize_network(&doc).map_err(|e| fail(3, e))?)
        }

        Command::Canonise { file, machine, out } => {
            let network = load(&file)?;
            let m = network
                .machines
                .get(&machine)
                .ok_or_else(|| fail(1, format!("no machine named {machine:?}")))?;
            let canonised = canonise(m).map_err(|e| fail(1, e))?;
            let mut doc = network.doc().clone();
            let mut machine_doc =
                doc::machine_to_doc(&canonised).map_err(|e| fail(1, e))?;
            machine_doc.name = format!("{machine}.canonised");
            doc.machines.push(machine_doc);
            emit(out.as_ref(), doc::serialize_network(&doc).map_err(|e| fail(3, e))?)
        }
    }
}
