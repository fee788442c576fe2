//! Acceptance run: one pass/fail line per criterion.

use fracid::bounds::log_grid;
use fracid::pipeline::{
    ex74_leading_curve, reproduce_table, ReferenceTable, TableRow, TABLE_EX74, TABLE_FIP, TABLE_SIP,
};
use fracid::regression::{build_basis, gram_matrix};
use fracid::verify::{delta_suite, identity_suite, lemma_suite, oracle_suite, SuiteReport, DEFAULT_SEED};
use std::process::ExitCode;
use std::time::{Duration, Instant};

struct Outcome {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn nus(table: &ReferenceTable) -> Vec<f64> {
    table.rows.iter().map(|r| r.0).collect()
}

/// Cells within tolerance, counting the given column range of every row.
fn count_cells(table: &ReferenceTable, rows: &[TableRow], cols: std::ops::Range<usize>, tol1: f64, tol2: f64) -> (usize, usize, f64, f64) {
    let (mut ok, mut total) = (0, 0);
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for (nu, cells) in table.rows {
        let row = rows.iter().find(|r| r.nu == *nu).expect("row reproduced");
        for c in cols.clone() {
            let (a, b) = cells[c];
            let got = row.cells[c];
            let (d1, d2) = ((got.nu1 - a).abs(), (got.second - b).abs());
            w1 = w1.max(d1);
            w2 = w2.max(d2);
            total += 1;
            if d1 <= tol1 && d2 <= tol2 {
                ok += 1;
            }
        }
    }
    (ok, total, w1, w2)
}

fn timed_table(table: &ReferenceTable) -> (Vec<TableRow>, Duration) {
    let start = Instant::now();
    let rows = reproduce_table(table.scenario, &nus(table)).expect("table reproduction runs");
    (rows, start.elapsed())
}

fn suite_line(r: &SuiteReport) -> String {
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let lo = r.checks.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let hi = r.checks.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    if failed.is_empty() {
        format!("{} checks, values in [{lo:.3e}, {hi:.3e}]", r.checks.len())
    } else {
        format!("{} of {} failed: {}", failed.len(), r.checks.len(), failed.join(", "))
    }
}

fn main() -> ExitCode {
    let mut out = Vec::new();

    let (fip, t_fip) = timed_table(&TABLE_FIP);
    let (ok, total, w1, w2) = count_cells(&TABLE_FIP, &fip, 3..6, 0.005, 0.02);
    out.push(Outcome {
        id: 1,
        title: "FIP table, delta=0.001",
        pass: ok >= 25 && t_fip.as_secs_f64() <= 60.0,
        detail: format!("{ok}/{total} cells (need 25), max dev nu1 {w1:.2e} nu3 {w2:.2e}, {:.2}s", t_fip.as_secs_f64()),
    });

    let (sip, t_sip) = timed_table(&TABLE_SIP);
    let (ok, total, w1, w2) = count_cells(&TABLE_SIP, &sip, 3..6, 0.005, 0.02);
    out.push(Outcome {
        id: 2,
        title: "SIP table, delta=0.001",
        pass: ok >= 10 && t_sip.as_secs_f64() <= 30.0,
        detail: format!("{ok}/{total} cells (need 10), max dev nu1 {w1:.2e} gamma {w2:.2e}, {:.2}s", t_sip.as_secs_f64()),
    });

    let (ok_f, tot_f, ..) = count_cells(&TABLE_FIP, &fip, 0..3, 0.01, 0.05);
    let (ok_s, tot_s, ..) = count_cells(&TABLE_SIP, &sip, 0..3, 0.01, 0.05);
    let (ok, total) = (ok_f + ok_s, tot_f + tot_s);
    out.push(Outcome {
        id: 3,
        title: "delta=0.01 columns",
        pass: ok * 5 >= total * 4,
        detail: format!("{ok}/{total} cells within 0.01/0.05 (need 80%)"),
    });

    let ids = identity_suite();
    out.push(Outcome { id: 4, title: "identity suite", pass: ids.passed, detail: suite_line(&ids) });

    let ora = oracle_suite(DEFAULT_SEED, 200);
    out.push(Outcome { id: 5, title: "oracle equivalence, 200 cases", pass: ora.passed, detail: suite_line(&ora) });

    let mut worst: f64 = 0.0;
    for a in [0.3, 0.99] {
        let h = gram_matrix(&build_basis(&[], 8, a, 0.2).expect("Jacobi basis"));
        for l in 0..9 {
            for m in 0..9 {
                if l != m {
                    worst = worst.max(h[(l, m)].abs() / (h[(l, l)] * h[(m, m)]).sqrt());
                }
            }
        }
    }
    out.push(Outcome {
        id: 6,
        title: "Jacobi orthogonality",
        pass: worst <= 1e-10,
        detail: format!("largest normalized off-diagonal {worst:.2e} (limit 1e-10)"),
    });

    let lem = lemma_suite(DEFAULT_SEED, 20);
    out.push(Outcome { id: 7, title: "lemma margins, 20 cases each", pass: lem.passed, detail: suite_line(&lem) });

    let (del, curves) = delta_suite();
    out.push(Outcome {
        id: 8,
        title: "horizon soundness and error decay",
        pass: del.passed && curves.len() == 2,
        detail: del.checks.iter().map(|c| format!("{}: {:.2e} ({})", c.name, c.value, if c.pass { "ok" } else { "FAIL" })).collect::<Vec<_>>().join("; "),
    });

    let t_grid = log_grid(8, 1);
    let ex_nus: Vec<f64> = TABLE_EX74.iter().map(|r| r.0).collect();
    let curve = ex74_leading_curve(&ex_nus, &t_grid);
    let emitted = curve.as_ref().map(|c| c.len() == ex_nus.len() * t_grid.len() && c.iter().all(|p| p.nu1_a.is_finite()));
    out.push(Outcome {
        id: 9,
        title: "ex74 reference data and leading-order curve",
        pass: TABLE_EX74.len() == 8 && emitted == Ok(true),
        detail: format!(
            "{} reference values shipped, {} curve points emitted, no tolerance claimed",
            TABLE_EX74.len(),
            curve.map(|c| c.len()).unwrap_or(0)
        ),
    });

    let mut all = true;
    for o in &out {
        all &= o.pass;
        println!("[{}] criterion {}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
