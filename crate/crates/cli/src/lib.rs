//! Scenario-driven front end: every verifier and experiment as a task with a JSON
//! report and CSV side tables.

pub mod execute;
pub mod objects;
pub mod report;
pub mod scenario;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use objects::Object;
use report::{report_path, table_path, to_json, Report, Table};
use scenario::{Format, Scenario, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Strict parse; the message carries serde's line and column.
pub fn parse_scenario(text: &str) -> Result<Scenario, String> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| format!("scenario parse error: {e}"))?;
    execute::validate(&s)?;
    Ok(s)
}

#[derive(Debug)]
pub struct TaskOutcome {
    pub id: String,
    pub report: Result<Report, String>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub outcomes: Vec<TaskOutcome>,
    pub exit_code: i32,
}

fn write_outputs(dir: &Path, formats: &[Format], r: &Report, tables: &[Table]) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    if formats.contains(&Format::Json) {
        let p = report_path(dir, &r.id);
        fs::write(&p, to_json(r)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    if formats.contains(&Format::Csv) {
        for t in tables {
            let p = table_path(dir, &r.id, &t.name);
            let file = fs::File::create(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            t.write(file).map_err(|e| format!("{}: {e}", p.display()))?;
        }
    }
    Ok(())
}

/// Runs a parsed scenario in order, writing reports under `dir`.
/// Exit code: 2 if any task errored, else 1 if any expectation was missed, else 0.
pub fn run_parsed(s: &Scenario, dir: &Path) -> RunSummary {
    let mut objects = BTreeMap::new();
    for (name, spec) in &s.objects {
        match Object::build(spec) {
            Ok(o) => {
                objects.insert(name.clone(), o);
            }
            Err(e) => {
                let outcomes = vec![TaskOutcome { id: name.clone(), report: Err(format!("object `{name}`: {e}")) }];
                return RunSummary { outcomes, exit_code: EXIT_ERROR };
            }
        }
    }
    let mut outcomes = Vec::with_capacity(s.tasks.len());
    let (mut errored, mut mismatched) = (false, false);
    for t in &s.tasks {
        let result = execute::run_task(t, &objects[&t.object], s.seed)
            .map_err(|e| format!("task `{}`: {e}", t.id))
            .and_then(|(r, tables)| write_outputs(dir, &s.output.formats, &r, &tables).map(|_| r));
        match &result {
            Ok(r) => mismatched |= !r.matches_expectation(),
            Err(_) => errored = true,
        }
        outcomes.push(TaskOutcome { id: t.id.clone(), report: result });
    }
    let exit_code = if errored {
        EXIT_ERROR
    } else if mismatched {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    };
    RunSummary { outcomes, exit_code }
}

/// Reads, validates and runs a scenario file. Relative output directories are
/// resolved against the scenario file's directory; `out` overrides the directory.
pub fn run_scenario(path: &Path, out: Option<&Path>) -> Result<RunSummary, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let s = parse_scenario(&text)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => {
            let d = PathBuf::from(&s.output.dir);
            if d.is_absolute() {
                d
            } else {
                path.parent().unwrap_or(Path::new(".")).join(d)
            }
        }
    };
    Ok(run_parsed(&s, &dir))
}

/// Runs one task outside a scenario, as the subcommands do.
pub fn run_single(object: &scenario::ObjectSpec, task: &Task, seed: u64) -> Result<(Report, Vec<Table>), String> {
    execute::check_tolerances(task)?;
    let obj = Object::build(object).map_err(|e| format!("object: {e}"))?;
    execute::run_task(task, &obj, seed).map_err(|e| format!("task `{}`: {e}", task.id))
}

pub use report::REPORT_SCHEMA;

/// Writes a single-task report and tables to `dir`.
pub fn write_single(dir: &Path, formats: &[Format], r: &Report, tables: &[Table]) -> Result<(), String> {
    write_outputs(dir, formats, r, tables)
}
