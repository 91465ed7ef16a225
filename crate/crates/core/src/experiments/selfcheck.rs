use crate::analytics::{f_mass, solve_conjugate, KineticTime};
use crate::trees::{cayley_count, enumerate_gamma, enumerate_trees, quadrature_oracle_f};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), passed, detail: detail.into() }
}

fn tree_checks(out: &mut Vec<CheckResult>) {
    for k in 1..=8 {
        let outcome = enumerate_trees(k).and_then(|trees| {
            let codes: HashSet<Vec<u32>> = trees
                .map(|tree| {
                    let code = tree.to_pruefer();
                    (code.code().to_vec(), code.decode() == tree)
                })
                .filter(|(_, round_trip)| *round_trip)
                .map(|(code, _)| code)
                .collect();
            Ok((codes.len() as u128, cayley_count(k)?))
        });
        out.push(match outcome {
            Ok((found, expected)) => check(
                format!("cayley k={k}"),
                found == expected,
                format!("{found} distinct round-tripping trees, expected {expected}"),
            ),
            Err(e) => check(format!("cayley k={k}"), false, e.to_string()),
        });
    }
}

fn gamma_checks(out: &mut Vec<CheckResult>) {
    for n in 0..=7usize {
        let expected: usize = (1..=n).product();
        let name = format!("collision sequences n={n}");
        out.push(match enumerate_gamma(n) {
            Ok(seqs) => {
                let distinct: HashSet<_> = seqs.collect();
                check(name, distinct.len() == expected, format!("{} sequences, expected {expected}", distinct.len()))
            }
            Err(e) => check(name, false, e.to_string()),
        });
    }
}

fn quadrature_checks(out: &mut Vec<CheckResult>) {
    for k in 2..=4 {
        for t in [0.3f64, 1.0, 2.0] {
            let kt = KineticTime::new(t).expect("valid time");
            let name = format!("quadrature k={k} t={t}");
            out.push(match quadrature_oracle_f(k, kt) {
                Ok(q) => {
                    let closed = f_mass(k, kt);
                    let rel = ((q - closed) / closed).abs();
                    check(name, rel < 1e-6, format!("relative difference {rel:.2e}"))
                }
                Err(e) => check(name, false, e.to_string()),
            });
        }
    }
}

fn conjugate_checks(out: &mut Vec<CheckResult>) {
    for t in [1.001f64, 1.5, 2.0, 3.0, 5.0, 10.0] {
        let name = format!("conjugate t={t}");
        out.push(match solve_conjugate(KineticTime::new(t).expect("valid time")) {
            Ok(s) => {
                let r = s.relative_residual();
                check(name, r < 1e-12 && s.t_star < 1.0, format!("t* = {:.10}, residual {r:.2e}", s.t_star))
            }
            Err(e) => check(name, false, e.to_string()),
        });
    }
}

/// Runs the oracle suites: labelled-tree counts and Prüfer round trips,
/// collision-sequence counts, the quadrature oracle against the closed form,
/// and conjugate-point residuals.
pub fn selfcheck() -> Vec<CheckResult> {
    let mut out = Vec::new();
    tree_checks(&mut out);
    gamma_checks(&mut out);
    quadrature_checks(&mut out);
    conjugate_checks(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_oracles_pass() {
        let results = selfcheck();
        assert_eq!(results.len(), 8 + 8 + 9 + 6);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
