//! Command-line front end: safety checking, normalization, fragment
//! rewrites, diagram translation in both directions, SVG rendering, finite
//! evaluation, randomized equivalence testing, and the size benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reldiag::ast::Query;
use reldiag::diagram::{read_diagram, write_diagram};
use reldiag::eval::{equiv_on, eval, parse_database, EquivOutcome};
use reldiag::fragment::{remove_disjunction, remove_forall_implies};
use reldiag::gen::gen_instances_for;
use reldiag::metrics::{render_report, run_benchmark, size_metrics};
use reldiag::parser::{parse_query, pretty, ParsedQuery};
use reldiag::render::{render, RenderOptions};
use reldiag::safety::check_safety;
use reldiag::translate::{
    diagram_to_trc, to_builtin_form, trc_to_diagram, trc_to_representation_b,
};

#[derive(Parser)]
#[command(name = "reldiag", about = "Tuple relational calculus diagram toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FragmentArg {
    Encv,
    Enc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Builtin,
    Repb,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the syntactic safety conditions (exit 0 safe, 2 unsafe)
    Check { file: PathBuf },
    /// Normalize, optionally rewriting into a smaller fragment
    Normalize {
        file: PathBuf,
        #[arg(long, value_enum)]
        fragment: Option<FragmentArg>,
    },
    /// Translate a query to a diagram document
    ToDiagram {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "builtin")]
        mode: ModeArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Read a diagram document back into query text
    FromDiagram { file: PathBuf },
    /// Render a diagram document as SVG
    Render {
        file: PathBuf,
        #[arg(long)]
        shading: bool,
        #[arg(long)]
        dotted: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a query on a database file
    Eval {
        file: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Test two queries for equivalence on seeded random instances
    /// (exit 0 equivalent, 2 counterexample found)
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the size metrics of a diagram document
    Metrics { file: PathBuf },
    /// Run the coverage benchmark over a directory of .trc files
    Bench {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_query(path: &Path) -> Result<ParsedQuery, String> {
    let text = read(path)?;
    parse_query(&text).map_err(|e| {
        format!(
            "{}: parse error at bytes {}..{}: {}",
            path.display(),
            e.span.start,
            e.span.end,
            e.message
        )
    })
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Check { file } => {
            let parsed = load_query(&file)?;
            let report = check_safety(&parsed.query);
            if report.is_safe() {
                println!("safe");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("unsafe");
                for v in &report.violations {
                    let at = v
                        .leaf
                        .and_then(|l| parsed.atom_spans.get(l))
                        .map(|s| format!(" (bytes {}..{})", s.start, s.end))
                        .unwrap_or_default();
                    println!("condition {}: {}{at}", v.condition, v.message);
                }
                Ok(ExitCode::from(2))
            }
        }
        Cmd::Normalize { file, fragment } => {
            let q = load_query(&file)?.query;
            let q = match fragment {
                None => q,
                Some(FragmentArg::Encv) => remove_forall_implies(&q),
                Some(FragmentArg::Enc) => {
                    remove_disjunction(&remove_forall_implies(&q)).map_err(|e| e.to_string())?
                }
            };
            println!("{}", pretty(&q));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ToDiagram { file, mode, output } => {
            let q = load_query(&file)?.query;
            let d = match mode {
                ModeArg::Builtin => {
                    let qb = to_builtin_form(&q).map_err(|e| e.to_string())?;
                    trc_to_diagram(&qb).map_err(|e| e.to_string())?
                }
                ModeArg::Repb => trc_to_representation_b(&q).map_err(|e| e.to_string())?,
            };
            emit(&output, &write_diagram(&d))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::FromDiagram { file } => {
            let d = read_diagram(&read(&file)?).map_err(|e| e.to_string())?;
            let q = diagram_to_trc(&d).map_err(|e| e.to_string())?;
            println!("{}", pretty(&q));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Render { file, shading, dotted, output } => {
            let d = read_diagram(&read(&file)?).map_err(|e| e.to_string())?;
            let opts = RenderOptions { peirce_shading: shading, dotted_connectors: dotted };
            let svg = render(&d, opts).map_err(|e| e.to_string())?;
            emit(&output, &svg)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Eval { file, db } => {
            let q = load_query(&file)?.query;
            let (db, dom) = parse_database(&read(&db)?).map_err(|e| e.to_string())?;
            let result = eval(&q, &db, &dom).map_err(|e| e.to_string())?;
            println!("{result}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Equiv { a, b, instances, seed } => {
            let qa = load_query(&a)?.query;
            let qb = load_query(&b)?.query;
            println!("seed: {seed}");
            let insts = gen_instances_for(&[&qa, &qb], instances, seed);
            match equiv_on(&qa, &qb, &insts).map_err(|e| e.to_string())? {
                EquivOutcome::Equivalent => {
                    println!("equivalent on {} instances", insts.len());
                    Ok(ExitCode::SUCCESS)
                }
                EquivOutcome::Counterexample { instance, left, right } => {
                    println!("not equivalent: instance {instance}");
                    println!("left:  {left}");
                    println!("right: {right}");
                    let (db, dom) = &insts[instance];
                    println!("{}", reldiag::eval::write_database(db, dom));
                    Ok(ExitCode::from(2))
                }
            }
        }
        Cmd::Metrics { file } => {
            let d = read_diagram(&read(&file)?).map_err(|e| e.to_string())?;
            let m = size_metrics(&d);
            println!("boxes\t{}", m.boxes);
            println!("edges\t{}", m.edges);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench { dir, seed } => {
            let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| format!("{}: {e}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "trc"))
                .collect();
            entries.sort();
            println!("seed: {seed}");
            let mut queries: Vec<(String, Query)> = Vec::new();
            for path in entries {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                match load_query(&path) {
                    Ok(p) => queries.push((name, p.query)),
                    Err(e) => eprintln!("skipping {name}: {e}"),
                }
            }
            print!("{}", render_report(&run_benchmark(&queries, seed)));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
