//! Parsers for javac diagnostics, JUnitCore console output and JaCoCo XML.

use std::collections::BTreeMap;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use super::{Diagnostic, DiagnosticKind, MethodCoverage, TestFailure, TestOutcome, TestRunResult, ToolchainError};

const DETAIL_KEYS: &[&str] = &["symbol", "location", "required", "found", "reason", "where"];

/// Parses `file:line: error: message` records with their indented detail
/// lines. File paths are reduced to the file name so diagnostics do not
/// depend on where the workspace lives.
pub fn parse_javac_output(stderr: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    for line in stderr.lines() {
        if let Some(d) = located_header(line) {
            out.push(d);
            continue;
        }
        if let Some(msg) = line.strip_prefix("error: ") {
            out.push(Diagnostic::error("", 0, msg.trim()));
            continue;
        }
        let trimmed = line.trim_start();
        let is_detail =
            line.starts_with("  ") && trimmed.split_once(':').is_some_and(|(key, _)| DETAIL_KEYS.contains(&key));
        if is_detail {
            if let Some(last) = out.last_mut() {
                last.detail.push(format!("  {}", collapse_spaces(trimmed)));
            }
        }
    }
    out
}

fn located_header(line: &str) -> Option<Diagnostic> {
    let (head, kind, msg) = if let Some((h, m)) = line.split_once(": error: ") {
        (h, DiagnosticKind::Error, m)
    } else if let Some((h, m)) = line.split_once(": warning: ") {
        (h, DiagnosticKind::Warning, m)
    } else {
        return None;
    };
    let (file, line_no) = head.rsplit_once(':')?;
    let line_no: usize = line_no.parse().ok()?;
    let file =
        Path::new(file).file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| file.to_string());
    Some(Diagnostic { file, line: line_no, message: msg.trim().to_string(), kind, detail: vec![] })
}

fn collapse_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

const ASSERTION_TYPES: &[&str] = &[
    "java.lang.AssertionError",
    "org.junit.ComparisonFailure",
    "org.junit.internal.ArrayComparisonFailure",
    "junit.framework.AssertionFailedError",
    "junit.framework.ComparisonFailure",
];

const FRAMEWORK_PREFIXES: &[&str] =
    &["org.junit.", "junit.framework.", "java.lang.reflect.", "sun.reflect.", "jdk.internal."];

pub fn is_assertion_type(exception_type: &str) -> bool {
    ASSERTION_TYPES.contains(&exception_type)
}

/// Parses JUnitCore output. `test_methods` are the declared `@Test`
/// methods; those without a failure record are reported as passed.
pub fn parse_junit_output(stdout: &str, test_methods: &[String]) -> Result<TestRunResult, ToolchainError> {
    let finished = stdout.lines().any(|l| l.starts_with("OK (") || l.starts_with("Tests run:"));
    if !finished {
        let tail: String = stdout.chars().rev().take(500).collect::<Vec<_>>().into_iter().rev().collect();
        return Err(ToolchainError::RunnerCrash(format!("no JUnit summary in output: {tail}")));
    }
    let mut failures = Vec::new();
    let mut lines = stdout.lines().peekable();
    while let Some(line) = lines.next() {
        let Some(test_name) = failure_header(line) else { continue };
        let mut message_lines: Vec<&str> = Vec::new();
        let mut frames: Vec<&str> = Vec::new();
        while let Some(next) = lines.peek() {
            if failure_header(next).is_some() || next.starts_with("FAILURES!!!") {
                break;
            }
            let next = lines.next().expect("peeked");
            if let Some(frame) = next.strip_prefix("\tat ") {
                frames.push(frame.trim());
            } else if frames.is_empty() {
                message_lines.push(next);
            }
        }
        let first = message_lines.first().copied().unwrap_or("").trim();
        let (exception_type, first_msg) = match first.split_once(": ") {
            Some((t, m)) if !t.contains(' ') => (t.to_string(), m.to_string()),
            _ => (first.to_string(), String::new()),
        };
        let mut message = first_msg;
        for extra in message_lines.iter().skip(1).filter(|l| !l.trim().is_empty()) {
            message.push('\n');
            message.push_str(extra.trim_end());
        }
        let first_frame = frames
            .iter()
            .find(|f| !FRAMEWORK_PREFIXES.iter().any(|p| f.starts_with(p)))
            .or(frames.first())
            .map(|f| f.to_string());
        failures.push(TestFailure { test_name, exception_type, message, first_frame });
    }

    let mut outcomes: BTreeMap<String, TestOutcome> =
        test_methods.iter().map(|m| (m.clone(), TestOutcome::Passed)).collect();
    for f in &failures {
        let outcome = if is_assertion_type(&f.exception_type) {
            TestOutcome::AssertionFailure
        } else {
            TestOutcome::RuntimeException
        };
        outcomes.insert(f.test_name.clone(), outcome);
    }
    Ok(TestRunResult { outcomes, failures })
}

/// `3) testFoo(com.x.FooTest)` yields `testFoo`.
fn failure_header(line: &str) -> Option<String> {
    let (num, rest) = line.split_once(") ")?;
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let open = rest.find('(')?;
    if !rest.ends_with(')') {
        return None;
    }
    Some(rest[..open].to_string())
}

fn primitive(c: u8) -> Option<&'static str> {
    Some(match c {
        b'B' => "byte",
        b'C' => "char",
        b'D' => "double",
        b'F' => "float",
        b'I' => "int",
        b'J' => "long",
        b'S' => "short",
        b'Z' => "boolean",
        b'V' => "void",
        _ => return None,
    })
}

/// Canonical signature for a JVM class, method name and descriptor, e.g.
/// `com/x/Reader`, `parse`, `(Ljava/lang/String;[I)V` gives
/// `com.x.Reader#parse(String,int[])`.
pub fn signature_from_descriptor(class_internal: &str, name: &str, desc: &str) -> Result<String, String> {
    let bytes = desc.as_bytes();
    if bytes.first() != Some(&b'(') {
        return Err(format!("bad descriptor {desc}"));
    }
    let mut params = Vec::new();
    let mut i = 1;
    while i < bytes.len() && bytes[i] != b')' {
        let mut dims = 0;
        while bytes.get(i) == Some(&b'[') {
            dims += 1;
            i += 1;
        }
        let base = match bytes.get(i) {
            Some(b'L') => {
                let end = desc[i..].find(';').ok_or_else(|| format!("bad descriptor {desc}"))? + i;
                let internal = &desc[i + 1..end];
                i = end + 1;
                let simple = internal.rsplit('/').next().unwrap_or(internal);
                simple.rsplit('$').next().unwrap_or(simple).to_string()
            }
            Some(c) => {
                let p = primitive(*c).filter(|p| *p != "void").ok_or_else(|| format!("bad descriptor {desc}"))?;
                i += 1;
                p.to_string()
            }
            None => return Err(format!("bad descriptor {desc}")),
        };
        params.push(format!("{base}{}", "[]".repeat(dims)));
    }
    if i >= bytes.len() {
        return Err(format!("bad descriptor {desc}"));
    }
    Ok(format!("{}#{}({})", class_internal.replace('/', "."), name, params.join(",")))
}

fn attr(e: &BytesStart<'_>, key: &str) -> Result<Option<String>, ToolchainError> {
    for a in e.attributes() {
        let a = a.map_err(|err| ToolchainError::MalformedReport(err.to_string()))?;
        if a.key.as_ref() == key {
            let v = a
                .normalized_value(XmlVersion::Implicit1_0)
                .map_err(|err| ToolchainError::MalformedReport(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart<'_>, key: &str) -> Result<String, ToolchainError> {
    attr(e, key)?.ok_or_else(|| ToolchainError::MalformedReport(format!("<{}> lacks `{key}`", e.name().as_ref())))
}

fn count(e: &BytesStart<'_>, key: &str) -> Result<u32, ToolchainError> {
    let v = required(e, key)?;
    v.parse().map_err(|_| ToolchainError::MalformedReport(format!("`{key}` is not a count: {v}")))
}

/// Every method in a JaCoCo XML report, keyed by canonical signature.
pub fn parse_jacoco_xml(xml: &str) -> Result<BTreeMap<String, MethodCoverage>, ToolchainError> {
    let mut reader = Reader::from_str(xml);
    let mut out = BTreeMap::new();
    let mut saw_report = false;
    let mut class: Option<String> = None;
    let mut method: Option<(String, MethodCoverage)> = None;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| ToolchainError::MalformedReport(format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == "report" => saw_report = true,
            Event::Start(e) if e.name().as_ref() == "class" => class = Some(required(&e, "name")?),
            Event::End(e) if e.name().as_ref() == "class" => class = None,
            Event::Start(e) if e.name().as_ref() == "method" => {
                let owner = class
                    .as_deref()
                    .ok_or_else(|| ToolchainError::MalformedReport("<method> outside <class>".into()))?;
                let sig = signature_from_descriptor(owner, &required(&e, "name")?, &required(&e, "desc")?)
                    .map_err(ToolchainError::MalformedReport)?;
                method = Some((sig, MethodCoverage::default()));
            }
            Event::Empty(e) if e.name().as_ref() == "counter" => {
                if let Some((_, cov)) = method.as_mut() {
                    let (missed, covered) = (count(&e, "missed")?, count(&e, "covered")?);
                    match required(&e, "type")?.as_str() {
                        "BRANCH" => {
                            cov.branches_covered = covered;
                            cov.branches_total = covered + missed;
                        }
                        "LINE" => {
                            cov.lines_covered = covered;
                            cov.lines_total = covered + missed;
                        }
                        _ => {}
                    }
                }
            }
            Event::End(e) if e.name().as_ref() == "method" => {
                if let Some((sig, cov)) = method.take() {
                    match out.entry(sig) {
                        std::collections::btree_map::Entry::Occupied(e) => {
                            log::warn!("duplicate coverage entry for {}; keeping the first", e.key());
                        }
                        std::collections::btree_map::Entry::Vacant(e) => {
                            e.insert(cov);
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_report {
        return Err(ToolchainError::MalformedReport("no <report> element".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn javac_errors_with_detail() {
        let stderr = "\
/tmp/ws/s1/src/com/x/FooTest.java:12: error: cannot find symbol
        Bar b = new Bar();
        ^
  symbol:   class Bar
  location: class FooTest
/tmp/ws/s1/src/com/x/FooTest.java:14: warning: [deprecation] old() in Foo has been deprecated
        f.old();
         ^
1 error
1 warning
";
        let d = parse_javac_output(stderr);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].file, "FooTest.java");
        assert_eq!(d[0].line, 12);
        assert_eq!(d[0].message, "cannot find symbol");
        assert_eq!(d[0].detail, ["  symbol: class Bar", "  location: class FooTest"]);
        assert_eq!(d[1].kind, DiagnosticKind::Warning);
        assert_eq!(parse_javac_output("error: file not found: X.java\n")[0].message, "file not found: X.java");
    }

    #[test]
    fn junit_failures_classified() {
        let out = "\
JUnit version 4.12
.E.E.
Time: 0.012
There were 2 failures:
1) testEq(com.x.FooTest)
java.lang.AssertionError: expected:<1> but was:<2>
\tat org.junit.Assert.fail(Assert.java:88)
\tat org.junit.Assert.failNotEquals(Assert.java:834)
\tat com.x.FooTest.testEq(FooTest.java:11)
2) testNull(com.x.FooTest)
java.lang.NullPointerException
\tat com.x.Foo.size(Foo.java:20)
\tat com.x.FooTest.testNull(FooTest.java:16)

FAILURES!!!
Tests run: 3,  Failures: 2

";
        let methods: Vec<String> = ["testEq", "testNull", "testOk"].map(String::from).to_vec();
        let r = parse_junit_output(out, &methods).unwrap();
        assert_eq!(r.outcomes["testEq"], TestOutcome::AssertionFailure);
        assert_eq!(r.outcomes["testNull"], TestOutcome::RuntimeException);
        assert_eq!(r.outcomes["testOk"], TestOutcome::Passed);
        assert_eq!(r.failures[0].message, "expected:<1> but was:<2>");
        assert_eq!(r.failures[0].first_frame.as_deref(), Some("com.x.FooTest.testEq(FooTest.java:11)"));
        assert_eq!(r.failures[1].exception_type, "java.lang.NullPointerException");
        assert_eq!(r.failures[1].first_frame.as_deref(), Some("com.x.Foo.size(Foo.java:20)"));
        assert!(!r.all_passed());
    }

    #[test]
    fn junit_ok_and_crash() {
        let r =
            parse_junit_output("JUnit version 4.12\n..\nTime: 0\n\nOK (2 tests)\n", &["a".into(), "b".into()]).unwrap();
        assert!(r.all_passed());
        assert!(matches!(
            parse_junit_output("Exception in thread \"main\" java.lang.NoClassDefFoundError", &[]),
            Err(ToolchainError::RunnerCrash(_))
        ));
    }

    #[test]
    fn descriptors() {
        assert_eq!(
            signature_from_descriptor("com/x/Reader", "parse", "(Ljava/lang/String;)I").unwrap(),
            "com.x.Reader#parse(String)"
        );
        assert_eq!(
            signature_from_descriptor("a/B$C", "f", "([[IJLjava/util/Map$Entry;Z)V").unwrap(),
            "a.B$C#f(int[][],long,Entry,boolean)"
        );
        assert_eq!(signature_from_descriptor("A", "<init>", "()V").unwrap(), "A#<init>()");
        assert!(signature_from_descriptor("A", "f", "(Ljava/lang/String").is_err());
        assert!(signature_from_descriptor("A", "f", "(V)V").is_err());
    }

    #[test]
    fn jacoco_rejects_garbage() {
        assert!(parse_jacoco_xml("<notreport/>").is_err());
        assert!(parse_jacoco_xml("<report><package name=\"a\"><class name=\"a/A\"><method name=\"f\">").is_err());
    }
}
