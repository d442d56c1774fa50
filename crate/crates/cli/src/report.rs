//! The JSON report printed by every command.
//!
//! Fields: `command`, `inputs_digest` (SHA-256 over the input files and the
//! options that affect the result), `verdict` (`PROVED`, `SAMPLED` or
//! `FAIL`), `witnesses`, `details` and `timings` in milliseconds. All fields
//! except `timings` are deterministic for a fixed `--seed`.

use lyapkit_core::certificates::{EscapeWitness, FactorizationWitness, LyapunovWitness};
use lyapkit_core::monovariant::{LaxconeWitness, MonovariantWitness};
use lyapkit_core::system::Trace;
use lyapkit_core::Verdict;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::format::StateSyntax;

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub parse_ms: f64,
    pub run_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub verdict: String,
    pub witnesses: Vec<Value>,
    pub details: Map<String, Value>,
    pub timings: Timings,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdict != "FAIL"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Incremental SHA-256 over labelled inputs.
#[derive(Default)]
pub struct InputDigest(Sha256);

impl InputDigest {
    pub fn add(&mut self, label: &str, bytes: &[u8]) {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
    }

    pub fn hex(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Verdict label and the witness list it implies.
pub fn verdict_parts<W>(v: Verdict<W>, witness: impl FnOnce(W) -> Value) -> (String, Vec<Value>) {
    let label = v.label().to_string();
    match v {
        Verdict::Fail(w) => (label, vec![witness(w)]),
        _ => (label, Vec::new()),
    }
}

pub fn trace<S: StateSyntax>(t: &Trace<S>) -> Value {
    json!({ "start": t.start.to_json(), "time": t.time.to_string(), "state": t.state.to_json() })
}

pub fn monovariant<S: StateSyntax>(w: &MonovariantWitness<S>) -> Value {
    json!({
        "kind": "monovariant",
        "trace": trace(&w.trace),
        "before": w.before.to_string(),
        "after": w.after.to_string(),
    })
}

pub fn escape<S: StateSyntax>(w: &EscapeWitness<S>) -> Value {
    json!({ "kind": "escape", "epsilon": w.epsilon.to_string(), "trace": trace(&w.trace) })
}

pub fn laxcone<S: StateSyntax>(w: &LaxconeWitness<S>) -> Value {
    json!({ "kind": "decrease", "epsilon": w.epsilon.to_string(), "trace": trace(&w.trace) })
}

pub fn lyapunov<S: StateSyntax>(w: &LyapunovWitness<S>) -> Value {
    match w {
        LyapunovWitness::Decrease(w) => laxcone(w),
        LyapunovWitness::Inner { epsilon, state } => {
            json!({ "kind": "inner", "epsilon": epsilon.to_string(), "state": state.to_json() })
        }
        LyapunovWitness::Outer { epsilon, state } => {
            json!({ "kind": "outer", "epsilon": epsilon.to_string(), "state": state.to_json() })
        }
    }
}

pub fn factorization<S: StateSyntax>(w: &FactorizationWitness<S>) -> Value {
    match w {
        FactorizationWitness::Beta { epsilon, state } => {
            json!({ "kind": "beta", "epsilon": epsilon.to_string(), "state": state.to_json() })
        }
        FactorizationWitness::Alpha { epsilon, trace: t } => {
            json!({ "kind": "alpha", "epsilon": epsilon.to_string(), "trace": trace(t) })
        }
        FactorizationWitness::Gamma { epsilon, state } => {
            json!({ "kind": "gamma", "epsilon": epsilon.to_string(), "state": state.to_json() })
        }
    }
}

pub fn equilibrium<S: StateSyntax>(t: &Trace<S>) -> Value {
    json!({ "kind": "moved", "trace": trace(t) })
}
