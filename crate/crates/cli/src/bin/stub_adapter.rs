//! Minimal adapter used by the protocol tests. Scores a text as minus its
//! character count, so shorter texts win. Flags inject the failure modes the
//! harness must survive.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Score,
    Pair,
}

#[derive(Clone, Copy, ValueEnum)]
enum Handshake {
    Ok,
    /// Never send a handshake; keep reading stdin.
    None,
    /// Send a line that is not JSON.
    Bad,
    /// Claim protocol version 2.
    V2,
    /// Exit immediately with status 3.
    Exit,
}

#[derive(Parser)]
#[command(name = "stub-adapter")]
struct Args {
    #[arg(long, value_enum, default_value = "score")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "ok")]
    handshake: Handshake,
    /// Exit with status 1 after answering N requests.
    #[arg(long)]
    crash_after: Option<usize>,
    /// Stop answering (but keep reading) after N requests.
    #[arg(long)]
    hang_after: Option<usize>,
    /// Buffer K requests and answer each batch in reverse order.
    #[arg(long, default_value_t = 1)]
    reverse: usize,
    /// Answer with an id that was never sent.
    #[arg(long)]
    bad_id: bool,
    /// Answer with a per-request error when the text contains this string.
    #[arg(long)]
    error_on: Option<String>,
    /// Line written to stderr at startup.
    #[arg(long)]
    stderr: Option<String>,
}

fn score(text: &str) -> f64 {
    -(text.chars().count() as f64)
}

fn answer(args: &Args, req: &Map<String, Value>) -> Value {
    let id = req.get("id").cloned().unwrap_or(Value::Null);
    let id = if args.bad_id {
        json!(id.as_u64().unwrap_or(0) + 1000)
    } else {
        id
    };
    let field = |k: &str| req.get(k).and_then(Value::as_str);
    let texts: Vec<&str> = ["text", "a", "b"].iter().filter_map(|k| field(k)).collect();
    if let Some(pat) = &args.error_on {
        if texts.iter().any(|t| t.contains(pat.as_str())) {
            return json!({"id": id, "error": format!("refusing text containing {pat:?}")});
        }
    }
    match args.mode {
        Mode::Score => match field("text") {
            Some(t) => json!({"id": id, "score": score(t), "echo": t}),
            None => json!({"id": id, "error": "missing text"}),
        },
        Mode::Pair => match (field("a"), field("b")) {
            (Some(a), Some(b)) => {
                let (sa, sb) = (score(a), score(b));
                let choice = if sa > sb {
                    "a"
                } else if sb > sa {
                    "b"
                } else {
                    "tie"
                };
                json!({"id": id, "choice": choice, "score_a": sa, "score_b": sb})
            }
            _ => json!({"id": id, "error": "missing a or b"}),
        },
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(msg) = &args.stderr {
        eprintln!("{msg}");
    }
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mode = match args.mode {
        Mode::Score => "score",
        Mode::Pair => "pair",
    };
    let handshake = match args.handshake {
        Handshake::Ok => Some(json!({"protocol_version": 1, "mode": mode, "name": "stub", "unit": "char"}).to_string()),
        Handshake::V2 => Some(json!({"protocol_version": 2, "mode": mode}).to_string()),
        Handshake::Bad => Some("hello".to_string()),
        Handshake::None => None,
        Handshake::Exit => {
            eprintln!("stub: exiting before handshake");
            return ExitCode::from(3);
        }
    };
    if let Some(line) = handshake {
        if writeln!(out, "{line}").and_then(|_| out.flush()).is_err() {
            return ExitCode::FAILURE;
        }
    }

    let mut answered = 0usize;
    let mut buffer: Vec<Map<String, Value>> = Vec::new();
    let mut flush = |buffer: &mut Vec<Map<String, Value>>, out: &mut io::StdoutLock| -> Result<bool, io::Error> {
        while let Some(req) = buffer.pop() {
            if args.crash_after.is_some_and(|n| answered >= n) {
                eprintln!("stub: crashing after {answered} responses");
                return Ok(false);
            }
            if args.hang_after.is_some_and(|n| answered >= n) {
                buffer.clear();
                return Ok(true);
            }
            writeln!(out, "{}", answer(&args, &req))?;
            answered += 1;
        }
        out.flush()?;
        Ok(true)
    };
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if matches!(args.handshake, Handshake::None) {
            continue;
        }
        let req = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => m,
            _ => {
                eprintln!("stub: unparseable request");
                return ExitCode::from(4);
            }
        };
        buffer.push(req);
        if buffer.len() >= args.reverse.max(1) {
            match flush(&mut buffer, &mut out) {
                Ok(true) => {}
                Ok(false) => return ExitCode::FAILURE,
                Err(_) => return ExitCode::FAILURE,
            }
        }
    }
    // a reversed batch may be short at end of input
    match flush(&mut buffer, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        _ => ExitCode::FAILURE,
    }
}
