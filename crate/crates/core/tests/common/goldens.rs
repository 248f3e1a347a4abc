pub const IO3_GOLDEN: &str = "[<TESTCONTEXT>]
@Test
public void test() {
[<BREAKAGE>]
BankAccount account = new BankAccount();
account.deposit(500);
[</BREAKAGE>]
assertEquals(500, account.getBalance());
}
[<REPAIRCONTEXT>]
[<HUNK>]
public int deposit(int amount [<ADD>] , String depositCurrency [</ADD>] ) {
balance += amount [<ADD>] * Exchange.getRate(depositCurrency, currency) [</ADD>] ;
} [</HUNK>]
[<HUNK>] [<ADD>]
private final String currency;
public BankAccount(String currency) { this.currency = currency; } [</ADD>] [</HUNK>]";

// Produced by tests/oracles/bleu_oracle.py (50-digit decimal arithmetic).
pub const FROZEN_BLEU: [(&str, &str, f64); 10] = [
    ("a b c d e", "a b c d e", 1.000000000000000),
    ("a b c d", "a b x d e", 0.351862973998119),
    ("the cat sat on the mat", "the cat is on the mat", 0.420448207626857),
    ("x", "x y z", 0.135335283236613),
    ("a b", "c d", 0.000000000000000),
    ("account . deposit ( 500 , \"USD\" ) ;", "account . deposit ( 500 ) ;", 0.513345048040170),
    ("a a a a a", "a a", 0.302137539735677),
    ("int x = foo ( y ) ;", "int x = foo ( y , z ) ;", 0.595942941090377),
    ("p q r s t u v", "p q r s", 0.411133616900520),
    ("w x y z", "z y x w", 0.451801001804922),
];
