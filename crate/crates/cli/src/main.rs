use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tgsa::oracle::{random_document, GenParams};
use tgsa::{
    build_indexes, construct, construct_logged, tokenize, validate_stream, validate_tgsa,
    DocumentIndex, ElementEntry, Error, Format, OverlapRule, TgsaGraph, TokenStream, Vertex,
};

/// Build, check and query overlap-aware document graphs.
#[derive(Parser)]
#[command(name = "tgsa", version)]
struct Cli {
    /// Markup flavour of input documents.
    #[arg(long, global = true, default_value = "milestone")]
    format: Format,
    /// Keep whitespace-only text between tags as text units.
    #[arg(long, global = true)]
    keep_ws: bool,
    /// Use the two-comparison overlap test in queries.
    #[arg(long, global = true)]
    compat_property1: bool,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Turn a document into a graph file.
    Build(Input),
    /// Check a graph file or a document; prints "ok" when clean.
    Validate(Input),
    /// Write the element and text index of a document.
    Index(Input),
    /// Answer a query over a document.
    Query {
        /// Answer from a saved index instead of rebuilding it.
        #[arg(long, global = true)]
        index: Option<PathBuf>,
        #[command(subcommand)]
        query: Query,
    },
    /// Write a random well-formed milestone document.
    Gen(GenArgs),
    /// Time graph construction over generated documents.
    Bench(BenchArgs),
    /// Render a graph file or a document as Graphviz DOT.
    ExportDot(Input),
}

#[derive(Args)]
struct Input {
    /// Input file; standard input when absent or `-`.
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Query {
    /// Pairs of elements named A and B that overlap.
    Overlapping {
        name_a: String,
        name_b: String,
        #[command(flatten)]
        input: Input,
    },
    /// Elements named A that overlap no element named B.
    Exclusive {
        name_a: String,
        name_b: String,
        #[command(flatten)]
        input: Input,
    },
    /// Ancestor elements of the element with this id.
    Ancestors {
        id: String,
        #[command(flatten)]
        input: Input,
    },
    /// Parent elements of the element with this id.
    Parents {
        id: String,
        #[command(flatten)]
        input: Input,
    },
    /// Elements whose content holds this term.
    ContainingTerm {
        term: String,
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of elements, root included.
    #[arg(long, default_value_t = 20)]
    elements: usize,
    #[arg(long, default_value_t = 0.3)]
    overlap_prob: f64,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 0.5)]
    text_prob: f64,
    /// Comma-separated element names.
    #[arg(long, value_delimiter = ',', default_value = "a,b,c,d")]
    alphabet: Vec<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated element counts.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    overlap_prob: f64,
    #[arg(long, default_value_t = 16)]
    max_depth: usize,
    /// Runs per size; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    repeat: usize,
}

fn read_input(input: &Input) -> Result<String, Error> {
    match input.input.as_deref() {
        None => read_stdin(),
        Some(p) if p == Path::new("-") => read_stdin(),
        Some(p) => fs::read_to_string(p)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())).into()),
    }
}

fn read_stdin() -> Result<String, Error> {
    let mut s = String::new();
    io::stdin().read_to_string(&mut s)?;
    Ok(s)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn is_graph_file(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

#[derive(Serialize)]
struct Record<'a> {
    id: &'a str,
    name: &'a str,
    start: u32,
    end: u32,
}

fn record<'a>(vertices: &'a [Vertex], e: &'a ElementEntry) -> Result<Record<'a>, Error> {
    let i = vertices
        .binary_search_by_key(&e.start, |v| v.start)
        .map_err(|_| Error::Internal(format!("index entry at {} has no graph vertex", e.start)))?;
    Ok(Record {
        id: &vertices[i].id,
        name: &e.name,
        start: e.start,
        end: e.end,
    })
}

#[derive(Serialize)]
struct Pair<'a> {
    first: Record<'a>,
    second: Record<'a>,
}

struct Loaded {
    stream: TokenStream,
    graph: TgsaGraph,
}

impl Cli {
    fn load_document(&self, input: &Input) -> Result<Loaded, Error> {
        let text = read_input(input)?;
        let stream = tokenize(&text, self.format, self.keep_ws)?;
        log::debug!("{} tokens, digest {}", stream.len(), stream.source_digest);
        let graph = construct(&stream)?;
        Ok(Loaded { stream, graph })
    }

    fn load_graph(&self, input: &Input) -> Result<TgsaGraph, Error> {
        let text = read_input(input)?;
        if is_graph_file(&text) {
            TgsaGraph::read_jsonl(text.as_bytes())
        } else {
            construct(&tokenize(&text, self.format, self.keep_ws)?)
        }
    }

    fn rule(&self) -> OverlapRule {
        if self.compat_property1 {
            OverlapRule::Literal
        } else {
            OverlapRule::Interleaving
        }
    }

    fn run(&self) -> Result<bool, Error> {
        let out = self.out.as_deref();
        match &self.verb {
            Verb::Build(input) => {
                let doc = self.load_document(input)?;
                emit(out, doc.graph.to_jsonl().as_bytes())?;
            }
            Verb::Validate(input) => return self.validate(input),
            Verb::Index(input) => {
                let doc = self.load_document(input)?;
                let index = build_indexes(&doc.stream, &doc.graph)?;
                let mut bytes = Vec::new();
                index.write_jsonl(&mut bytes)?;
                emit(out, &bytes)?;
            }
            Verb::Query { index, query } => self.query(index.as_deref(), query)?,
            Verb::Gen(args) => {
                let stream = random_document(&GenParams {
                    seed: args.seed,
                    n_elements: args.elements,
                    overlap_probability: args.overlap_prob,
                    max_depth: args.max_depth,
                    name_alphabet: args.alphabet.clone(),
                    text_probability: args.text_prob,
                })?;
                let mut text = stream.to_milestone_text();
                text.push('\n');
                emit(out, text.as_bytes())?;
            }
            Verb::Bench(args) => emit(out, bench(args)?.as_bytes())?,
            Verb::ExportDot(input) => emit(out, self.load_graph(input)?.to_dot().as_bytes())?,
        }
        Ok(true)
    }

    fn validate(&self, input: &Input) -> Result<bool, Error> {
        let text = read_input(input)?;
        let graph = if is_graph_file(&text) {
            TgsaGraph::read_jsonl(text.as_bytes())?
        } else {
            let stream = tokenize(&text, self.format, self.keep_ws)?;
            let report = validate_stream(&stream);
            if !report.is_ok() {
                for v in report.iter() {
                    eprintln!("{v}");
                }
                return Ok(false);
            }
            construct(&stream)?
        };
        let report = validate_tgsa(&graph);
        if report.is_ok() {
            emit(self.out.as_deref(), b"ok\n")?;
            Ok(true)
        } else {
            for v in report.iter() {
                eprintln!("rule {}: {v}", v.rule());
            }
            Ok(false)
        }
    }

    fn query(&self, saved: Option<&Path>, query: &Query) -> Result<(), Error> {
        let input = match query {
            Query::Overlapping { input, .. }
            | Query::Exclusive { input, .. }
            | Query::Ancestors { input, .. }
            | Query::Parents { input, .. }
            | Query::ContainingTerm { input, .. } => input,
        };
        let doc = self.load_document(input)?;
        let index = match saved {
            Some(p) => DocumentIndex::load_for(p, &doc.graph)?,
            None => build_indexes(&doc.stream, &doc.graph)?,
        };
        let elements = &index.elements;
        let vertices = doc.graph.vertices();
        let record = |e| record(vertices, e);
        let entry_for = |id: &str| -> Result<&ElementEntry, Error> {
            let v = doc.graph.vertex(doc.graph.lookup(id)?)?;
            elements
                .entry_at(v.start)
                .ok_or_else(|| Error::UnknownVertex(id.to_string()))
        };

        let mut lines = Vec::new();
        match query {
            Query::Overlapping { name_a, name_b, .. } => {
                for (a, b) in elements.overlapping_pairs(name_a, name_b, self.rule()) {
                    lines.push(to_json(&Pair {
                        first: record(a)?,
                        second: record(b)?,
                    }));
                }
            }
            Query::Exclusive { name_a, name_b, .. } => {
                for e in elements.exclusive_elements(name_a, name_b, self.rule()) {
                    lines.push(to_json(&record(e)?));
                }
            }
            Query::Ancestors { id, .. } => {
                for e in elements.ancestors_of(entry_for(id)?) {
                    lines.push(to_json(&record(e)?));
                }
            }
            Query::Parents { id, .. } => {
                for e in elements.parents_of(entry_for(id)?) {
                    lines.push(to_json(&record(e)?));
                }
            }
            Query::ContainingTerm { term, .. } => {
                for e in index.elements_containing_term(term) {
                    lines.push(to_json(&record(e)?));
                }
            }
        }
        let mut text = String::new();
        for line in lines {
            text.push_str(&line);
            text.push('\n');
        }
        emit(self.out.as_deref(), text.as_bytes())
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("query records serialize")
}

fn bench(args: &BenchArgs) -> Result<String, Error> {
    let mut table = format!(
        "{:>10} {:>10} {:>8} {:>12} {:>10}\n",
        "elements", "tokens", "overlap", "construct_ms", "ops/token"
    );
    for &size in &args.sizes {
        let stream = random_document(&GenParams {
            seed: args.seed,
            n_elements: size,
            overlap_probability: args.overlap_prob,
            max_depth: args.max_depth,
            ..GenParams::default()
        })?;
        let mut best = f64::INFINITY;
        let mut ops = 0;
        for _ in 0..args.repeat.max(1) {
            let t0 = Instant::now();
            let (_, log) = construct_logged(&stream)?;
            best = best.min(t0.elapsed().as_secs_f64() * 1e3);
            ops = log.elementary_ops;
        }
        log::info!("size {size}: {best:.3} ms");
        table.push_str(&format!(
            "{:>10} {:>10} {:>8} {:>12.3} {:>10.2}\n",
            size,
            stream.len(),
            args.overlap_prob,
            best,
            ops as f64 / stream.len() as f64
        ));
    }
    Ok(table)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TGSA_LOG")).init();
    let cli = Cli::parse();
    match cli.run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("tgsa: {e}");
            ExitCode::from(if matches!(e, Error::Io(_)) { 3 } else { 1 })
        }
    }
}
