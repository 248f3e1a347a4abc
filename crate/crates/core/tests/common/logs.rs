pub const FQN: &str = "TestClass.testMethod()";
pub const FILE: &str = "TestClass.java";

pub const PASS: &str = "[INFO] Running TestClass.testMethod
[INFO] Tests run: 1, Failures: 0, Errors: 0, Skipped: 0
[INFO] BUILD SUCCESS";

pub const COMPILE: &str = "[ERROR] COMPILATION ERROR :
[ERROR] /path/to/TestClass.java:[25,13] cannot find symbol";

pub const RUNTIME: &str = "[ERROR] TestClass.testMethod:15 NullPointerException
[ERROR] at TestClass.testMethod(TestClass.java:15)";

/// Near misses of the three valid logs plus typical environment failures.
pub fn invalid_logs() -> Vec<String> {
    let mut v: Vec<String> = vec![
        String::new(),
        PASS.replace("Failures: 0", "Failures: 1"),
        PASS.replace("Errors: 0", "Errors: 1"),
        PASS.replace("Tests run: 1", "Tests run: 0"),
        PASS.replace("Skipped: 0", "Skipped: 1"),
        PASS.replace("Tests run: 1,", "Tests run: 2,"),
        PASS.to_lowercase(),
        COMPILE.replace("TestClass.java", "OtherClass.java"),
        COMPILE.lines().next().unwrap().to_string(),
        COMPILE.replace("[ERROR] COMPILATION ERROR :\n", ""),
        COMPILE.replace("[25,13]", "[25]"),
        COMPILE.replace("[25,13]", "[x,13]"),
        COMPILE.replace("/path/to/", ""),
        RUNTIME.replace("testMethod", "otherMethod"),
        RUNTIME.replace("TestClass", "OtherTest"),
        RUNTIME.replace(":15", " 15").replace("(TestClass.java 15)", "(TestClass.java)"),
        RUNTIME.replace("TestClass.testMethod:15 NullPointerException\n", "").replace("(TestClass.java:15)", "(Helper.java:15)"),
    ];
    v.push("[ERROR] Failed to execute goal on project shop: Could not resolve dependencies for project shop:shop:jar:1.0".into());
    v.push("[INFO] BUILD FAILURE\n[ERROR] The forked VM terminated without properly saying goodbye.".into());
    v.push("[ERROR] at com.shop.Cart.total(Cart.java:15)\n[ERROR] Tests run: 1, Failures: 0, Errors: 1, Skipped: 0".into());
    v
}
