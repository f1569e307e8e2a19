use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use moca::coherence::{check_c11_oracle, check_moca};
use moca::engine::{Machine, Pid};
use moca::explorer::{self, Enumeration, ExplorationReport};
use moca::relations::compute_relations;
use moca::relations::dump::{dump, to_dot};
use moca::Program;

use crate::Status;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub key: String,
    pub expected: u64,
    pub actual: Option<u64>,
    pub ok: bool,
}

fn measured(key: &str, r: &ExplorationReport) -> Option<u64> {
    Some(match key {
        "traces" => r.distinct_traces as u64,
        "sequences" => r.sequences_explored,
        "racy" => r.racy_sequence_count,
        "racy_traces" => r.racy_trace_count() as u64,
        "violations" => {
            let mut ids: Vec<_> = r.violations.iter().map(|v| &v.trace).collect();
            ids.sort();
            ids.dedup();
            ids.len() as u64
        }
        _ => return None,
    })
}

pub fn expectations(p: &Program, r: &ExplorationReport) -> Vec<Check> {
    p.expectations
        .iter()
        .map(|(k, &v)| {
            let actual = measured(k, r);
            Check {
                key: k.clone(),
                expected: v,
                actual,
                ok: actual == Some(v),
            }
        })
        .collect()
}

pub fn classify(r: &ExplorationReport, checks: &[Check]) -> Status {
    let finding = !r.violations.is_empty()
        || !r.na_races.is_empty()
        || r.non_mca_sequences > 0
        || !r.c11_failures.is_empty()
        || checks.iter().any(|c| !c.ok);
    if finding {
        Status::Finding
    } else if !r.complete {
        Status::Budget
    } else {
        Status::Ok
    }
}

pub fn verify_text(file: &Path, r: &ExplorationReport, checks: &[Check], traces: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "program: {} ({})", r.program, file.display());
    let _ = writeln!(s, "sequences_explored: {}", r.sequences_explored);
    let _ = writeln!(s, "blocked_sequences: {}", r.blocked_sequences);
    let _ = writeln!(s, "distinct_traces: {}", r.distinct_traces);
    let _ = writeln!(s, "non_mca_sequences: {}", r.non_mca_sequences);
    let _ = writeln!(s, "c11_failures: {}", r.c11_failures.len());
    let _ = writeln!(s, "violations: {}", r.violations.len());
    for v in &r.violations {
        let _ = writeln!(
            s,
            "  assert never {} (line {}) holds in trace {}",
            v.predicate,
            v.line,
            &v.trace.0[..12]
        );
        let _ = writeln!(s, "    schedule: {}", v.schedule.join(" "));
    }
    let _ = writeln!(s, "na_races: {}", r.na_races.len());
    for race in &r.na_races {
        let _ = writeln!(s, "  {}  <->  {}", race.first, race.second);
        let _ = writeln!(s, "    schedule: {}", race.schedule.join(" "));
    }
    let _ = writeln!(s, "racy_sequences: {}", r.racy_sequence_count);
    let _ = writeln!(s, "complete: {}", r.complete);
    for d in &r.diagnostics {
        let _ = writeln!(s, "diagnostic: {d}");
    }
    for c in checks {
        let actual = c
            .actual
            .map_or_else(|| "unknown key".to_string(), |a| a.to_string());
        let verdict = if c.ok { "ok" } else { "MISMATCH" };
        let _ = writeln!(
            s,
            "expect {} = {}: {verdict} (got {actual})",
            c.key, c.expected
        );
    }
    if traces {
        for (k, t) in r.traces.iter().enumerate() {
            let _ = writeln!(
                s,
                "trace {k} [{}] sequences={}{}",
                t.id.short(),
                t.sequences,
                if t.racy { " racy" } else { "" }
            );
            let vals: Vec<String> = t
                .shared
                .iter()
                .chain(&t.locals)
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            let _ = writeln!(s, "  final: {}", vals.join(" "));
            for rf in &t.rf {
                let _ = writeln!(s, "  rf: {rf}");
            }
            let _ = writeln!(s, "  schedule: {}", t.schedule.join(" "));
        }
    }
    s
}

pub fn verify_json(file: &Path, r: &ExplorationReport, checks: &[Check], exit: u8) -> Value {
    json!({
        "schema_version": explorer::SCHEMA_VERSION,
        "file": file.display().to_string(),
        "report": r,
        "expectations": checks,
        "exit_code": exit,
    })
}

pub fn replay(m: &Machine, schedule: &[Pid], as_json: bool, relations: bool) -> Result<Status> {
    let state = m.run_sequence(schedule)?;
    let seq = &state.seq;
    let rels = compute_relations(seq);
    let moca_v = check_moca(seq, &rels);
    let c11_v = check_c11_oracle(seq, &rels);
    let terminal = m.is_terminal(&state);
    let (violated, diagnostics) = if terminal {
        explorer::check_asserts(m.program(), &state)
    } else {
        (Vec::new(), vec!["sequence is not maximal; assertions not evaluated".into()])
    };
    let races: Vec<(String, String)> = explorer::detect_na_races(seq, &rels)
        .into_iter()
        .map(|(a, b)| (m.describe(seq, a), m.describe(seq, b)))
        .collect();
    let events: Vec<String> = (0..seq.len()).map(|i| m.describe(seq, i)).collect();
    let shared: Vec<(String, i64)> = m
        .program()
        .objects
        .iter()
        .zip(&state.shr)
        .map(|(o, v)| (o.name.clone(), *v))
        .collect();
    let trace = terminal.then(|| explorer::canonical_trace_id(seq, &rels));
    let status = if !moca_v.is_ok() || !violated.is_empty() || !races.is_empty() {
        Status::Finding
    } else {
        Status::Ok
    };
    if as_json {
        let mut v = json!({
            "schema_version": explorer::SCHEMA_VERSION,
            "events": events,
            "shared": shared,
            "maximal": terminal,
            "trace": trace,
            "moca": moca_v,
            "c11": c11_v,
            "violated_asserts": violated,
            "na_races": races,
            "diagnostics": diagnostics,
        });
        if relations {
            v["relations"] = serde_json::to_value(dump(m, seq, &rels))?;
        }
        outln!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(status);
    }
    for e in &events {
        outln!("{e}");
    }
    let vals: Vec<String> = shared.iter().map(|(n, v)| format!("{n}={v}")).collect();
    outln!("final: {}", vals.join(" "));
    if let Some(t) = &trace {
        outln!("trace: {t}");
    }
    for (rule, w) in moca_v.failures().chain(c11_v.failures()) {
        outln!("rule {rule} FAILS at steps {w:?}");
    }
    if moca_v.is_ok() && c11_v.is_ok() {
        outln!("coherence: ok");
    }
    for k in &violated {
        outln!("assert at line {} violated", m.program().asserts[*k].line);
    }
    for (a, b) in &races {
        outln!("na race: {a}  <->  {b}");
    }
    for d in &diagnostics {
        outln!("diagnostic: {d}");
    }
    if relations {
        out!("{}", relations_text(m, schedule)?);
    }
    Ok(status)
}

fn relations_text(m: &Machine, schedule: &[Pid]) -> Result<String> {
    let state = m.run_sequence(schedule)?;
    let rels = compute_relations(&state.seq);
    let d = dump(m, &state.seq, &rels);
    let mut s = String::new();
    let pairs = |v: &[(usize, usize)]| {
        v.iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "po: {}", pairs(&d.po));
    let _ = writeln!(s, "sw: {}", pairs(&d.sw));
    let _ = writeln!(s, "dob: {}", pairs(&d.dob));
    let _ = writeln!(s, "hb: {}", pairs(&d.hb));
    let _ = writeln!(s, "rf: {}", pairs(&d.rf));
    for (o, ws) in &d.mo {
        let _ = writeln!(s, "mo {o}: {ws:?}");
    }
    let _ = writeln!(s, "to: {:?}", d.to);
    Ok(s)
}

pub fn relations(m: &Machine, schedule: &[Pid], as_json: bool, dot: bool) -> Result<()> {
    let state = m.run_sequence(schedule)?;
    let rels = compute_relations(&state.seq);
    let d = dump(m, &state.seq, &rels);
    if as_json {
        outln!("{}", serde_json::to_string_pretty(&d)?);
    } else if dot {
        out!("{}", to_dot(&d));
    } else {
        for e in &d.events {
            outln!("{:>3}  {}", e.id, e.label);
        }
        out!("{}", relations_text(m, schedule)?);
    }
    Ok(())
}

pub fn enumeration(m: &Machine, e: &Enumeration, as_json: bool) -> Result<()> {
    let ids = e.trace_ids();
    if as_json {
        let seqs: Vec<Value> = e
            .sequences
            .iter()
            .map(|s| {
                json!({
                    "schedule": s.schedule.iter().map(|p| m.pid_name(*p)).collect::<Vec<_>>(),
                    "trace": s.trace_id,
                })
            })
            .collect();
        let v = json!({
            "schema_version": explorer::SCHEMA_VERSION,
            "sequences": e.sequences.len(),
            "blocked": e.blocked,
            "distinct_traces": ids.len(),
            "trace_ids": ids,
            "interleavings": seqs,
        });
        outln!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        outln!("sequences: {}", e.sequences.len());
        outln!("blocked: {}", e.blocked);
        outln!("distinct_traces: {}", ids.len());
        for id in &ids {
            outln!("  {id}");
        }
    }
    Ok(())
}
