//! Aggregate CSV written by `cesolve bench`.

use std::fmt::Write as _;

pub const BENCH_HEADER: &str =
    "problem,n,strategy,l_blocks,bytes,factor_seconds,solve_seconds,iterations,residual,error,status";

/// One (size, strategy) run. Numeric fields are `None` when the run failed
/// before producing them.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub problem: String,
    pub n: usize,
    pub strategy: String,
    pub l_blocks: Option<f64>,
    pub bytes: Option<usize>,
    pub factor_seconds: Option<f64>,
    pub solve_seconds: Option<f64>,
    pub iterations: Option<usize>,
    /// True relative residual after MINRES.
    pub residual: Option<f64>,
    /// Relative error of the direct CE solve against a tight reference solve.
    pub error: Option<f64>,
    /// `ok`, `not-converged` or the error message (commas replaced).
    pub status: String,
}

fn opt<T>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map(f).unwrap_or_default()
}

pub fn write_bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.problem,
            r.n,
            r.strategy,
            opt(&r.l_blocks, |v| format!("{v:e}")),
            opt(&r.bytes, usize::to_string),
            opt(&r.factor_seconds, |v| format!("{v:e}")),
            opt(&r.solve_seconds, |v| format!("{v:e}")),
            opt(&r.iterations, usize::to_string),
            opt(&r.residual, |v| format!("{v:e}")),
            opt(&r.error, |v| format!("{v:e}")),
            r.status.replace(',', ";").replace('\n', " "),
        );
    }
    s
}

pub fn parse_bench_csv(text: &str) -> Result<Vec<BenchRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(BENCH_HEADER) {
        return Err("unexpected bench header".into());
    }
    fn field<T: std::str::FromStr>(s: &str, line: usize) -> Result<Option<T>, String> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| format!("line {line}: bad field `{s}`"))
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let no = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(format!("line {no}: expected 11 fields"));
        }
        rows.push(BenchRow {
            problem: f[0].to_string(),
            n: f[1].parse().map_err(|_| format!("line {no}: bad n"))?,
            strategy: f[2].to_string(),
            l_blocks: field(f[3], no)?,
            bytes: field(f[4], no)?,
            factor_seconds: field(f[5], no)?,
            solve_seconds: field(f[6], no)?,
            iterations: field(f[7], no)?,
            residual: field(f[8], no)?,
            error: field(f[9], no)?,
            status: f[10].to_string(),
        });
    }
    Ok(rows)
}
