//! Command-line front end. `run` returns the exit code and both output
//! streams so it can be driven from tests without a subprocess.

use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand};

use crate::dehn::build_graph_of_groups;
use crate::error::{Error, Result};
use crate::format::{format_aut, format_graphmap, format_report, parse_aut, parse_input, Input};
use crate::graph::{induced_automorphism, rose_of, GraphMap, Marking};
use crate::nielsen::DEFAULT_BOUND;
use crate::normalize::{analyze, good_representative, prepare, Options, DEFAULT_BUDGET};
use crate::oracle::{check_extension, fixed_words, fixes_conjugacy_class, periodic_words, similar_bounded, Similarity};
use crate::word::Endo;

#[derive(Debug, Parser)]
#[command(name = "twistlab", version, about = "Good representatives and Dehn twists for polynomially growing free group automorphisms")]
struct Cli {
    /// Search bound for Nielsen path and conjugator searches [default: 64;
    /// oracle searches default to --max-len]
    #[arg(long, global = true)]
    bound: Option<usize>,
    /// Word length bound for oracle enumeration
    #[arg(long, global = true, default_value_t = 10)]
    max_len: usize,
    /// Output format (only `text`)
    #[arg(long, global = true, default_value = "text", value_parser = ["text"])]
    format: String,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an input: automorphism, homotopy equivalence, no exponential strata
    Validate(FileArg),
    /// Filtration, Nielsen paths, fixed-subgroup ranks
    Analyze(FileArg),
    /// Rewrite to a good representative, listing the moves
    Normalize(NormalizeArgs),
    /// Graph of groups and Dehn twist of the good representative
    Twist(NormalizeArgs),
    /// Apply the automorphism to a word, or the graph map to an edge path
    Act {
        file: String,
        /// Word or edge path, tokens separated by spaces
        word: String,
    },
    /// Brute-force verifiers
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Args)]
struct FileArg {
    /// Input file (`-` for stdin)
    file: String,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    file: String,
    /// Maximum number of moves
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Fixed words up to --max-len
    Fixed(FileArg),
    /// Periodic words up to --max-len with period at most --max-period
    Periodic {
        file: String,
        #[arg(long, default_value_t = 6)]
        max_period: usize,
    },
    /// Search for g with φ = γ_g ψ γ_{g⁻¹}, |g| ≤ --bound
    Similar { phi: String, psi: String },
    /// Extension of representatives φ_1 … φ_k by conjugators g_2 … g_k
    Extend {
        /// Representatives, one aut file each
        #[arg(required = true)]
        reps: Vec<String>,
        /// Conjugator g_j, repeated once per extra representative
        #[arg(long = "conj")]
        conjugators: Vec<String>,
    },
    /// Find a conjugate of a word fixed by a representative with rank ≥ 2 fixed subgroup
    ClassFix { file: String, word: String },
}

/// File contents; `-` reads stdin.
fn read(path: &str) -> Result<String> {
    let res = if path == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    };
    res.map_err(|e| Error::Parse { line: 0, msg: format!("{path}: {e}") })
}

fn load_map(path: &str) -> Result<GraphMap> {
    match parse_input(&read(path)?)? {
        Input::Aut(aut) => Ok(rose_of(&aut)?.0),
        Input::Map(m) => Ok(m),
    }
}

/// The automorphism a map induces on the fundamental group at its first vertex.
fn load_aut(path: &str) -> Result<Endo> {
    match parse_input(&read(path)?)? {
        Input::Aut(aut) => Ok(aut),
        Input::Map(m) => {
            let mk = Marking::new(m.graph(), 0)?;
            let mu = mk.tree_path(m.vertex_image(0)).inverse();
            induced_automorphism(&m, &mk, Some(&mu))
        }
    }
}

fn exec(cli: Cli, out: &mut String) -> Result<()> {
    let bound = cli.bound.unwrap_or(DEFAULT_BOUND);
    let len = cli.max_len;
    match cli.cmd {
        Command::Validate(a) => {
            let m = prepare(&load_map(&a.file)?)?;
            let g = m.graph();
            let _ = writeln!(out, "valid rank {} vertices {} edges {} strata {}", g.rank(), g.vertex_count(), g.edge_count(), m.strata().len());
        }
        Command::Analyze(a) => out.push_str(&format_report(&analyze(&load_map(&a.file)?, bound)?)),
        Command::Normalize(a) => {
            let res = good_representative(&load_map(&a.file)?, Options { bound, budget: a.budget })?;
            for mv in &res.moves {
                let _ = writeln!(out, "# move {mv}");
            }
            out.push_str(&format_graphmap(&res.map));
        }
        Command::Twist(a) => {
            let res = good_representative(&load_map(&a.file)?, Options { bound, budget: a.budget })?;
            let (gg, d) = build_graph_of_groups(&res.map)?;
            out.push_str(&gg.to_text(&d));
            match gg.verify_twist(&d) {
                Ok(()) => out.push_str("verified: true\n"),
                Err(edge) => {
                    let _ = writeln!(out, "verified: false witness {edge}");
                    return Err(Error::NotGoodRepresentative(format!("twist does not commute on edge `{edge}`")));
                }
            }
        }
        Command::Act { file, word } => match parse_input(&read(&file)?)? {
            Input::Aut(aut) => {
                let w = aut.basis().parse_word(&word)?;
                let _ = writeln!(out, "{}", aut.basis().format_word(&aut.apply(&w)?));
            }
            Input::Map(m) => {
                let p = m.graph().parse_path(None, &word)?;
                let img = m.apply_path(&p).tighten();
                let _ = writeln!(out, "{}", m.graph().format_path(&img));
            }
        },
        Command::Oracle(o) => oracle(o, cli.bound.unwrap_or(len), len, bound, out)?,
    }
    Ok(())
}

fn oracle(cmd: OracleCommand, search: usize, len: usize, bound: usize, out: &mut String) -> Result<()> {
    match cmd {
        OracleCommand::Fixed(a) => {
            let aut = load_aut(&a.file)?;
            for w in fixed_words(&aut, len) {
                let _ = writeln!(out, "fixed {}", aut.basis().format_word(&w));
            }
        }
        OracleCommand::Periodic { file, max_period } => {
            let aut = load_aut(&file)?;
            for (w, m) in periodic_words(&aut, len, max_period) {
                let _ = writeln!(out, "periodic {} period {m}", aut.basis().format_word(&w));
            }
        }
        OracleCommand::Similar { phi, psi } => {
            let (phi, psi) = (load_aut(&phi)?, load_aut(&psi)?);
            match similar_bounded(&phi, &psi, search)? {
                Similarity::Witness(g) => {
                    let _ = writeln!(out, "similar witness {}", phi.basis().format_word(&g));
                }
                Similarity::NoWitness(l) => {
                    let _ = writeln!(out, "no-witness-up-to {l}");
                }
                Similarity::DifferentOuterClass => out.push_str("different-outer-class\n"),
            }
        }
        OracleCommand::Extend { reps, conjugators } => {
            let reps: Vec<Endo> = reps.iter().map(|p| parse_aut(&read(p)?)).collect::<Result<_>>()?;
            let b = reps[0].basis().clone();
            let gs = conjugators.iter().map(|s| b.parse_word(s)).collect::<Result<Vec<_>>>()?;
            let rep = check_extension(&reps, &gs, len)?;
            out.push_str(&format_aut(&rep.extension));
            let _ = writeln!(out, "fixed-words {}", rep.fixed.len());
            let _ = writeln!(out, "fixed-rank {}", rep.fixed_rank);
            let _ = writeln!(out, "inside-free-product {}", rep.all_inside);
        }
        OracleCommand::ClassFix { file, word } => {
            let aut = load_aut(&file)?;
            let w = aut.basis().parse_word(&word)?;
            let r = fixes_conjugacy_class(&aut, &w, search.min(bound), len)?;
            let b = aut.basis();
            let _ = writeln!(out, "conjugator {}", b.format_word(&r.conjugator));
            let _ = writeln!(out, "fixed {}", b.format_word(&r.word));
            let _ = writeln!(out, "fixed-rank {}", r.fixed_rank);
            out.push_str(&format_aut(&r.representative));
        }
    }
    Ok(())
}

/// Runs the front end on `args` (without the program name).
pub fn run<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("twistlab".to_string()).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() { (1, String::new(), text) } else { (0, text, String::new()) };
        }
    };
    let mut out = String::new();
    match exec(cli, &mut out) {
        Ok(()) => (0, out, String::new()),
        Err(e) => (e.exit_code(), out, format!("error: {e}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, text: &str) -> String {
        let dir = std::env::temp_dir().join(format!("twistlab-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn twist_on_rose() {
        let f = tmp("rank2.aut", "aut rank=2 names=a,b\na -> a\nb -> b a\nend\n");
        let (code, out, err) = run(["twist", f.as_str()]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(out, "gog\nvertex v0 group g_a g_bab'\nedge b v0 v0 mono g_a comono g_bab' twist 1\nend\nverified: true\n");
    }

    #[test]
    fn exponential_exit_code() {
        let f = tmp("exp.aut", "aut rank=2 names=a,b\na -> b\nb -> a b\nend\n");
        let (code, _, err) = run(["validate", f.as_str()]);
        assert_eq!(code, 3);
        assert!(err.contains("[[0,1],[1,1]]"), "{err}");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["frobnicate"]).0, 1);
        assert_eq!(run(["analyze", "x", "--wat"]).0, 1);
        assert_eq!(run(["analyze", "/nonexistent/file"]).0, 1);
        assert_eq!(run(["--format", "json", "analyze", "x"]).0, 1);
    }

    #[test]
    fn act_and_oracle() {
        let f = tmp("act.aut", "aut rank=2 names=a,b\na -> a\nb -> b a\nend\n");
        assert_eq!(run(["act", f.as_str(), "b b"]).1, "b a b a\n");
        let (code, out, _) = run(["oracle", "fixed", f.as_str(), "--max-len", "1"]);
        assert_eq!(code, 0);
        assert_eq!(out, "fixed 1\nfixed a\nfixed a'\n");
        let (_, out, _) = run(["oracle", "class-fix", f.as_str(), "a", "--bound", "4", "--max-len", "4"]);
        assert!(out.starts_with("conjugator 1\nfixed a\n"), "{out}");
    }
}
