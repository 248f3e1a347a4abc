#![allow(dead_code)]

use chrono::{TimeZone, Utc};
use targen_core::hunks::{extract_hunks, FileMap, SourceIndex};
use targen_core::*;

pub fn lines(s: &str) -> Vec<String> {
    s.lines().map(str::to_string).collect()
}

pub const SUT_OLD: &str = "package bank;
public class BankAccount {
    private int balance = 0;
    public int getBalance() { return balance; }
    public int deposit(int amount) {
        balance += amount;
    }
}";

pub const SUT_NEW: &str = "package bank;
public class BankAccount {
    private int balance = 0;
    private final String currency;
    public BankAccount(String currency) { this.currency = currency; }
    public int getBalance() { return balance; }
    public int deposit(int amount, String depositCurrency) {
        balance += amount * Exchange.getRate(depositCurrency, currency);
    }
}";

pub const TEST_OLD: &str = "@Test
public void test() {
    BankAccount account = new BankAccount();
    account.deposit(500);
    assertEquals(500, account.getBalance());
}";

pub const TEST_NEW: &str = "@Test
public void test() {
    BankAccount account = new BankAccount(\"USD\");
    account.deposit(500, \"USD\");
    assertEquals(500, account.getBalance());
}";

pub const TEST_FQN: &str = "bank.BankAccountTest.test()";

/// Method-level and class-level hunks of the currency change.
pub fn running_hunks() -> (Vec<Hunk>, Vec<Hunk>) {
    let old: FileMap = [("src/main/java/bank/BankAccount.java".to_string(), lines(SUT_OLD))].into();
    let new: FileMap = [("src/main/java/bank/BankAccount.java".to_string(), lines(SUT_NEW))].into();
    extract_hunks(&old, &new, &SourceIndex::from_java(&old), &SourceIndex::from_java(&new)).unwrap()
}

pub fn running_example() -> RepairInstance {
    let (m, c) = running_hunks();
    let deposit = m[0].enclosing.clone();
    let class = c[0].enclosing.clone();
    let mut hunks = c;
    hunks.extend(m);
    RepairInstance {
        id: "bank-1".into(),
        broken_test: TestCase {
            fully_qualified_name: TEST_FQN.into(),
            source: lines(TEST_OLD),
            file_path: "src/test/java/bank/BankAccountTest.java".into(),
            annotation_present: true,
        },
        repaired_test: TestCase {
            fully_qualified_name: TEST_FQN.into(),
            source: lines(TEST_NEW),
            file_path: "src/test/java/bank/BankAccountTest.java".into(),
            annotation_present: true,
        },
        breakage: BreakageSpec::new(vec![LineRange::new(3, 4)], BreakageKind::CompileError),
        sut_hunks: hunks,
        call_graph_method: Some(CallGraph::reachable(
            TEST_FQN,
            GraphKind::MethodLevel,
            vec![
                (TEST_FQN.into(), deposit),
                (TEST_FQN.into(), "bank.BankAccount.BankAccount()".into()),
                (TEST_FQN.into(), "bank.BankAccount.getBalance()".into()),
            ],
        )),
        call_graph_class: Some(CallGraph::reachable(TEST_FQN, GraphKind::ClassLevel, vec![(TEST_FQN.into(), class)])),
        commit: "c0ffee".into(),
        commit_time: Utc.with_ymd_and_hms(2023, 5, 1, 12, 0, 0).unwrap(),
        project: "bank".into(),
    }
}

/// A small family of valid instances derived from a template repair.
pub fn toy_corpus(n: usize) -> Vec<RepairInstance> {
    (0..n)
        .map(|k| {
            let mut inst = running_example();
            inst.id = format!("toy-{k}");
            let amount = 100 + k;
            inst.broken_test.source[3] = format!("    account.deposit({amount});");
            inst.repaired_test.source[3] = format!("    account.deposit({amount}, \"USD\");");
            inst.commit_time = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap() + chrono::Duration::days(k as i64);
            inst
        })
        .collect()
}

pub mod edits;
pub mod logs;
pub mod scenarios;
pub mod plumbing;
pub mod fixture;
pub mod goldens;
