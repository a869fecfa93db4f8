use thiserror::Error;

use super::{Op, Trace, TraceBuilder};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown operation `{op}`")]
    UnknownOp { line: usize, op: String },
    #[error("line {line}: thread `{thread}` cannot {op} itself")]
    SelfReference {
        line: usize,
        thread: String,
        op: &'static str,
    },
}

/// Parse the text trace format.
///
/// One event per line or per `;`-separated segment:
/// `<thread> <op> <operand> [@site]` with `op` one of
/// `rd wr acq rel fork join`. Lines whose first non-blank character is
/// `#` are header comments and are kept verbatim in [`Trace::header`].
///
/// Lock discipline is not checked here; see [`super::validate`].
pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    let mut b = TraceBuilder::new();
    let mut header = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            header.push(rest.to_string());
            continue;
        }
        for seg in trimmed.split(';') {
            let seg = seg.trim();
            if seg.is_empty() {
                continue;
            }
            parse_event(&mut b, seg, line_no)?;
        }
    }
    b.header(header);
    Ok(b.finish())
}

fn parse_event(b: &mut TraceBuilder, seg: &str, line: usize) -> Result<(), ParseError> {
    let mut tokens: Vec<&str> = seg.split_whitespace().collect();
    let mut site = None;
    if let Some(last) = tokens.last() {
        if let Some(label) = last.strip_prefix('@') {
            if label.is_empty() {
                return Err(ParseError::Syntax {
                    line,
                    msg: "empty site label".into(),
                });
            }
            site = Some(label.to_string());
            tokens.pop();
        }
    }
    let (thread, kw, operand) = match tokens.as_slice() {
        [t, k, o] => (*t, *k, *o),
        [_, k] => {
            return Err(ParseError::Syntax {
                line,
                msg: format!("`{k}` is missing its operand"),
            })
        }
        _ => {
            return Err(ParseError::Syntax {
                line,
                msg: format!("expected `<thread> <op> <operand>`, got `{seg}`"),
            })
        }
    };
    // Validate the keyword before interning anything so that errors leave
    // no stray names behind.
    if !matches!(kw, "rd" | "wr" | "acq" | "rel" | "fork" | "join") {
        return Err(ParseError::UnknownOp {
            line,
            op: kw.to_string(),
        });
    }
    if matches!(kw, "fork" | "join") && thread == operand {
        return Err(ParseError::SelfReference {
            line,
            thread: thread.to_string(),
            op: if kw == "fork" { "fork" } else { "join" },
        });
    }
    let t = b.thread(thread);
    let op = match kw {
        "rd" => Op::Read(b.var(operand)),
        "wr" => Op::Write(b.var(operand)),
        "acq" => Op::Acquire(b.lock(operand)),
        "rel" => Op::Release(b.lock(operand)),
        "fork" => Op::Fork(b.thread(operand)),
        _ => Op::Join(b.thread(operand)),
    };
    b.push(t, op, site);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::trace::{ThreadId, VarId};

    #[test]
    fn single_read() {
        let tr = parse_trace("T1 rd x").unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.events()[0].thread, ThreadId(0));
        assert_eq!(tr.events()[0].op, Op::Read(VarId(0)));
    }

    #[test]
    fn lock_elision_fixture_shape() {
        let tr = parse_trace(fixtures::TR_FIG1).unwrap();
        assert_eq!(tr.len(), 8);
        assert_eq!(tr.thread_count(), 2);
        assert_eq!(tr.var_count(), 3);
        assert_eq!(tr.lock_count(), 1);
        for name in ["x", "y", "z"] {
            assert!(tr.var_id(name).is_some());
        }
        assert!(tr.lock_id("m").is_some());
    }

    #[test]
    fn missing_operand() {
        let err = parse_trace("T1 acq").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn unknown_keyword_and_self_fork() {
        assert!(matches!(
            parse_trace("T1 rd x\nT1 lock m").unwrap_err(),
            ParseError::UnknownOp { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace("T1 fork T1").unwrap_err(),
            ParseError::SelfReference { .. }
        ));
        assert!(matches!(
            parse_trace("T1 join T1").unwrap_err(),
            ParseError::SelfReference { .. }
        ));
    }

    #[test]
    fn header_and_sites() {
        let tr = parse_trace("# seed=3\nT1 wr x @Foo.java:12\n\n;T2 rd x;").unwrap();
        assert_eq!(tr.header, vec![" seed=3".to_string()]);
        assert_eq!(tr.events()[0].site_label(), "Foo.java:12");
        assert_eq!(tr.events()[1].site_label(), "1");
        assert_eq!(parse_trace(&tr.serialize()).unwrap(), tr);
    }
}
