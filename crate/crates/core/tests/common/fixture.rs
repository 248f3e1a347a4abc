use std::path::Path;
use std::process::Command;

pub const CART: &str = "package shop;

import java.util.ArrayList;
import java.util.List;

public class Cart {
    private final List<String> items = new ArrayList<>();
    private int total = 0;

    public void addItem(String name) {
        items.add(name);
    }

    public boolean contains(String name) {
        return items.contains(name);
    }

    public int size() {
        return items.size();
    }

    public int total() {
        return total;
    }
}
";

pub const CART_TEST: &str = "package shop;

import org.junit.Test;
import static org.junit.Assert.*;

public class CartTest {
    @Test
    public void testAdd() {
        Cart cart = new Cart();
        cart.addItem(\"apple\");
        assertTrue(cart.contains(\"apple\"));
    }

    @Test
    public void testTotal() {
        Cart cart = new Cart();
        assertEquals(0, cart.total());
    }

    @Test
    public void testSize() {
        Cart cart = new Cart();
        assertEquals(0, cart.size());
    }
}
";

pub const SUT: &str = "src/main/java/shop/Cart.java";
pub const TEST: &str = "src/test/java/shop/CartTest.java";

pub struct Repo<'a> {
    pub dir: &'a Path,
    pub clock: i64,
}

impl Repo<'_> {
    pub fn git(&mut self, args: &[&str]) {
        self.clock += 1000;
        let date = format!("@{} +0000", 1_600_000_000 + self.clock);
        let out = Command::new("git")
            .arg("-C")
            .arg(self.dir)
            .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
            .args(args)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .output()
            .unwrap();
        assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    pub fn edit(&self, file: &str, from: &str, to: &str) {
        let p = self.dir.join(file);
        let s = std::fs::read_to_string(&p).unwrap();
        assert!(s.contains(from), "{from:?} not in {file}");
        std::fs::write(p, s.replacen(from, to, 1)).unwrap();
    }

    pub fn commit(&mut self, msg: &str) {
        self.git(&["add", "-A"]);
        self.git(&["commit", "-q", "-m", msg]);
    }
}

/// Initial import, then: a repair on a side branch, a repair on main, a
/// no-ff merge of the branch, a test-only edit, and a pure method rename.
pub fn fixture_repo(dir: &Path) {
    let mut r = Repo { dir, clock: 0 };
    r.git(&["init", "-q", "-b", "main"]);
    std::fs::create_dir_all(dir.join("src/main/java/shop")).unwrap();
    std::fs::create_dir_all(dir.join("src/test/java/shop")).unwrap();
    std::fs::write(dir.join(SUT), CART).unwrap();
    std::fs::write(dir.join(TEST), CART_TEST).unwrap();
    r.commit("import");

    r.git(&["checkout", "-q", "-b", "feature"]);
    r.edit(SUT, "public int total() {\n        return total;", "public int total(boolean withTax) {\n        return withTax ? total * 2 : total;");
    r.edit(TEST, "cart.total());", "cart.total(false));");
    r.commit("tax flag");

    r.git(&["checkout", "-q", "main"]);
    r.edit(SUT, "public void addItem(String name) {\n        items.add(name);", "public void addItem(String name, int price) {\n        items.add(name);\n        total += price;");
    r.edit(TEST, "cart.addItem(\"apple\");", "cart.addItem(\"apple\", 3);");
    r.commit("prices");

    r.git(&["merge", "-q", "--no-ff", "feature", "-m", "merge feature"]);

    r.edit(TEST, "        Cart cart = new Cart();\n        assertEquals(0, cart.size());", "        final Cart cart = new Cart();\n        assertEquals(0, cart.size());");
    r.commit("tidy test");

    r.edit(SUT, "public int size() {", "public int count() {");
    r.edit(TEST, "cart.size());", "cart.count());");
    r.commit("rename size");
}

