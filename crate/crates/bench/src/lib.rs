//! Synthetic inputs shared by the benchmarks.

use chrono::{TimeZone, Utc};
use targen_core::hunks::{extract_hunks, FileMap, SourceIndex};
use targen_core::*;

fn sut(methods: usize, changed: bool) -> Vec<String> {
    let mut v = vec!["package bench;".to_string(), "public class Service {".to_string()];
    for k in 0..methods {
        if changed {
            v.push(format!("    public int op{k}(int a, String unit) {{"));
            v.push(format!("        return Convert.apply(a * {k}, unit);"));
        } else {
            v.push(format!("    public int op{k}(int a) {{"));
            v.push(format!("        return a * {k};"));
        }
        v.push("    }".into());
    }
    v.push("}".into());
    v
}

/// A repair whose SUT change touches `methods` methods of one class.
pub fn instance(methods: usize) -> RepairInstance {
    let file = "src/main/java/bench/Service.java".to_string();
    let old: FileMap = [(file.clone(), sut(methods, false))].into();
    let new: FileMap = [(file, sut(methods, true))].into();
    let (m, c) = extract_hunks(&old, &new, &SourceIndex::from_java(&old), &SourceIndex::from_java(&new)).expect("hunks");
    let mut hunks = c;
    hunks.extend(m);
    let fqn = "bench.ServiceTest.test()";
    let test = |body: &str| TestCase {
        fully_qualified_name: fqn.into(),
        source: vec![
            "@Test".into(),
            "public void test() {".into(),
            "    Service s = new Service();".into(),
            body.into(),
            "}".into(),
        ],
        file_path: "src/test/java/bench/ServiceTest.java".into(),
        annotation_present: true,
    };
    RepairInstance {
        id: format!("bench-{methods}"),
        broken_test: test("    assertEquals(6, s.op2(3));"),
        repaired_test: test("    assertEquals(6, s.op2(3, \"kg\"));"),
        breakage: BreakageSpec::new(vec![LineRange::single(4)], BreakageKind::CompileError),
        sut_hunks: hunks,
        call_graph_method: None,
        call_graph_class: None,
        commit: "0".into(),
        commit_time: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        project: "bench".into(),
    }
}

/// Token sequences of `n` statements with every third one edited.
pub fn token_pair(n: usize) -> (Vec<String>, Vec<String>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..n {
        let stmt = ["x", "=", "f", "(", "y", ")", ";"];
        a.extend(stmt.iter().map(|s| s.to_string()));
        if k % 3 == 0 {
            b.extend(["x", "=", "g", "(", "y", ",", "z", ")", ";"].iter().map(|s| s.to_string()));
        } else {
            b.extend(stmt.iter().map(|s| s.to_string()));
        }
    }
    (a, b)
}

/// Feature rows with one informative column.
pub fn trust_rows(n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    (0..n)
        .map(|i| {
            let y = i % 3 == 0;
            let row = vec![if y { 0.8 } else { 0.2 } + (i % 7) as f64 * 0.01, (i % 11) as f64, (i % 5) as f64, (i % 13) as f64, 1.0, (i % 4) as f64, 10.0];
            (row, y)
        })
        .unzip()
}
