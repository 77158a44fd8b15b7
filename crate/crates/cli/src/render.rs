//! Printed artifacts.

use dalia_core::{ExecutionContext, ExecutionTrace, StepStatus, TaskGraph};
use serde::Serialize;

use crate::config::OutputFormat;

#[derive(Serialize)]
struct CapabilityLine<'a> {
    capability_id: &'a str,
    server_id: &'a str,
}

#[derive(Serialize)]
struct TaskLine<'a> {
    task_id: &'a str,
    intent: &'a str,
    feasible: bool,
    diagnostics: &'a [String],
}

#[derive(Serialize)]
struct Summary<'a> {
    capabilities: Vec<CapabilityLine<'a>>,
    tasks: Vec<TaskLine<'a>>,
    agents: Vec<&'a str>,
    fingerprint: String,
}

fn summary(ctx: &ExecutionContext) -> Summary<'_> {
    Summary {
        capabilities: ctx
            .capabilities()
            .map(|p| CapabilityLine {
                capability_id: p.capability.capability_id.as_str(),
                server_id: p.provider.as_str(),
            })
            .collect(),
        tasks: ctx
            .tasks()
            .map(|t| {
                let report = ctx
                    .feasibility(&t.task_id)
                    .expect("every sealed task has a report");
                TaskLine {
                    task_id: t.task_id.as_str(),
                    intent: t.intent.as_str(),
                    feasible: report.feasible,
                    diagnostics: &report.diagnostics,
                }
            })
            .collect(),
        agents: ctx.directory().agents.keys().map(String::as_str).collect(),
        fingerprint: ctx.fingerprint(),
    }
}

pub fn context(ctx: &ExecutionContext, format: OutputFormat) -> String {
    let s = summary(ctx);
    if format == OutputFormat::Json {
        return serde_json::to_string(&s).expect("summaries serialize") + "\n";
    }
    let mut out = format!("capabilities: {}\n", s.capabilities.len());
    for c in &s.capabilities {
        out += &format!("  {} @ {}\n", c.capability_id, c.server_id);
    }
    out += &format!("tasks: {}\n", s.tasks.len());
    for t in &s.tasks {
        let verdict = if t.feasible { "feasible" } else { "infeasible" };
        out += &format!("  {} ({}): {verdict}\n", t.task_id, t.intent);
        for d in t.diagnostics {
            out += &format!("    {d}\n");
        }
    }
    out += &format!("agents: {}\n", s.agents.len());
    for a in &s.agents {
        out += &format!("  {a}\n");
    }
    out += &format!("fingerprint: {}\n", s.fingerprint);
    out
}

pub fn graph(g: &TaskGraph, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            String::from_utf8(g.canonical_json()).expect("canonical JSON is UTF-8") + "\n"
        }
        OutputFormat::Dot => g.to_dot(),
        OutputFormat::Text => {
            let mut out = format!("task {}\n", g.task_id);
            for n in &g.nodes {
                out += &format!(
                    "  n{} {} agent={} server={}\n",
                    n.node_id,
                    n.capability_id,
                    n.agent_id.as_deref().unwrap_or("-"),
                    n.server_id.as_ref().map(|s| s.as_str()).unwrap_or("-")
                );
            }
            for e in &g.edges {
                out += &format!("  n{} -> n{} {}\n", e.from_node, e.to_node, e.slot);
            }
            out
        }
    }
}

pub fn trace(t: &ExecutionTrace, format: OutputFormat) -> String {
    if format != OutputFormat::Text {
        return String::from_utf8(t.canonical_json()).expect("canonical JSON is UTF-8") + "\n";
    }
    let mut out = String::new();
    for s in &t.steps {
        let status = match s.status {
            StepStatus::Succeeded => "succeeded",
            StepStatus::Failed => "failed",
            StepStatus::Skipped => "skipped",
        };
        out += &format!("n{} {} {status}", s.node_id, s.capability_id);
        if let Some(e) = &s.error {
            out += &format!(": {e}");
        }
        out.push('\n');
    }
    out += &format!("outcome: {}\n", outcome_name(t));
    out
}

pub fn outcome_name(t: &ExecutionTrace) -> &'static str {
    match t.outcome {
        dalia_core::Outcome::Completed => "completed",
        dalia_core::Outcome::Aborted => "aborted",
    }
}
