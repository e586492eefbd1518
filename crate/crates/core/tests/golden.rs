//! Golden-vector regression for the fixed-point arithmetic.
//!
//! `golden/fx_ops.txt` pins the wrap/truncation semantics of every fx_* op
//! class as plain-text records so other implementations (and future versions
//! of this one) can verify bit-exact agreement. Record grammar, one per line:
//!
//! ```text
//! <op> <a_fmt> <a_raw_hex> <b_fmt> <b_raw_hex> <out_fmt> <out_raw_hex>
//! ```
//!
//! where `op` is `add|sub|mul|resize`, formats are `word_bits.frac_bits`,
//! and raws are the two's-complement bit patterns masked to the word width
//! (lowercase hex, `0x` prefix). `resize` has no second operand; its `b`
//! fields are `-`.
//!
//! Regenerate after an intentional semantics change with
//! `cargo test -p precode --test golden write_golden_file -- --ignored`.

use precode::fixedpoint::{fx_add, fx_mul, fx_resize, fx_sub, FixedFormat, FixedWord};
use precode::signal::RngStream;

const GOLDEN_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/golden/fx_ops.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Resize,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Resize => "resize",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "add" => Some(Op::Add),
            "sub" => Some(Op::Sub),
            "mul" => Some(Op::Mul),
            "resize" => Some(Op::Resize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Case {
    op: Op,
    a: FixedWord,
    b: Option<FixedWord>,
    out: FixedFormat,
}

impl Case {
    fn eval(&self) -> FixedWord {
        match (self.op, self.b) {
            (Op::Add, Some(b)) => fx_add(self.a, b, self.out),
            (Op::Sub, Some(b)) => fx_sub(self.a, b, self.out),
            (Op::Mul, Some(b)) => fx_mul(self.a, b, self.out),
            (Op::Resize, None) => fx_resize(self.a, self.out),
            _ => panic!("malformed case"),
        }
    }

    fn render(&self) -> String {
        let b_fmt = self
            .b
            .map(|w| format!("{}", w.fmt))
            .unwrap_or_else(|| "-".into());
        let b_raw = self.b.map(hex).unwrap_or_else(|| "-".into());
        format!(
            "{} {} {} {} {} {} {}",
            self.op.name(),
            self.a.fmt,
            hex(self.a),
            b_fmt,
            b_raw,
            self.out,
            hex(self.eval())
        )
    }
}

fn hex(w: FixedWord) -> String {
    let mask = (1u64 << w.fmt.word_bits) - 1;
    format!("0x{:x}", (w.raw as u64) & mask)
}

fn parse_fmt(s: &str) -> FixedFormat {
    let (w, f) = s.split_once('.').expect("format is word.frac");
    FixedFormat::new(w.parse().unwrap(), f.parse().unwrap())
}

fn parse_raw(s: &str, fmt: FixedFormat) -> FixedWord {
    let bits = u64::from_str_radix(s.trim_start_matches("0x"), 16).unwrap();
    let sign = 1u64 << (fmt.word_bits - 1);
    let raw = if bits & sign != 0 {
        (bits as i64) - (1i64 << fmt.word_bits)
    } else {
        bits as i64
    };
    FixedWord::from_raw(raw, fmt)
}

fn parse_line(line: &str) -> (Case, i64) {
    let f: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(f.len(), 7, "malformed record: {line}");
    let op = Op::parse(f[0]).unwrap_or_else(|| panic!("unknown op in: {line}"));
    let a = parse_raw(f[2], parse_fmt(f[1]));
    let b = if f[3] == "-" {
        None
    } else {
        Some(parse_raw(f[4], parse_fmt(f[3])))
    };
    let out = parse_fmt(f[5]);
    let expected = parse_raw(f[6], out).raw;
    (Case { op, a, b, out }, expected)
}

/// The datapath formats plus a narrow one that wraps early.
const FORMATS: [FixedFormat; 9] = [
    FixedFormat::new(12, 5),
    FixedFormat::new(12, 11),
    FixedFormat::new(10, 9),
    FixedFormat::new(10, 8),
    FixedFormat::new(18, 11),
    FixedFormat::new(18, 15),
    FixedFormat::new(15, 8),
    FixedFormat::new(21, 15),
    FixedFormat::new(4, 0),
];

fn golden_cases() -> Vec<Case> {
    let mut cases = Vec::new();

    // hand-picked edges: wrap at both ends, sign boundaries, truncation of
    // negatives, sub-resolution products
    let q4 = FixedFormat::new(4, 0);
    let q12_5 = FixedFormat::new(12, 5);
    let q18_11 = FixedFormat::new(18, 11);
    let edge = |raw, fmt| FixedWord::from_raw(raw, fmt);
    cases.push(Case {
        op: Op::Add,
        a: edge(7, q4),
        b: Some(edge(1, q4)),
        out: q4,
    });
    cases.push(Case {
        op: Op::Sub,
        a: edge(-8, q4),
        b: Some(edge(1, q4)),
        out: q4,
    });
    cases.push(Case {
        op: Op::Mul,
        a: edge(16, q12_5),
        b: Some(edge(16, q12_5)),
        out: q12_5,
    });
    cases.push(Case {
        op: Op::Mul,
        a: edge(1, q12_5),
        b: Some(edge(1, q12_5)),
        out: q12_5,
    });
    cases.push(Case {
        op: Op::Mul,
        a: edge(-1, q12_5),
        b: Some(edge(1, q12_5)),
        out: q12_5,
    });
    cases.push(Case {
        op: Op::Resize,
        a: edge(-3, q12_5),
        b: None,
        out: FixedFormat::new(12, 3),
    });
    cases.push(Case {
        op: Op::Resize,
        a: edge(q18_11.max_raw(), q18_11),
        b: None,
        out: q12_5,
    });
    cases.push(Case {
        op: Op::Resize,
        a: edge(q18_11.min_raw(), q18_11),
        b: None,
        out: FixedFormat::new(15, 8),
    });

    // seeded coverage across the datapath formats
    let mut rng = RngStream::new(0x600d);
    let pick_raw = |rng: &mut RngStream, fmt: FixedFormat| {
        let span = (fmt.max_raw() - fmt.min_raw() + 1) as u64;
        fmt.min_raw() + (rng.next_u64() % span) as i64
    };
    for (i, &a_fmt) in FORMATS.iter().enumerate() {
        for (j, &b_fmt) in FORMATS.iter().enumerate() {
            let out = FORMATS[(i + j) % FORMATS.len()];
            for op in [Op::Add, Op::Sub, Op::Mul] {
                let a = FixedWord::from_raw(pick_raw(&mut rng, a_fmt), a_fmt);
                let b = FixedWord::from_raw(pick_raw(&mut rng, b_fmt), b_fmt);
                cases.push(Case {
                    op,
                    a,
                    b: Some(b),
                    out,
                });
            }
        }
        for &out in &FORMATS {
            let a = FixedWord::from_raw(pick_raw(&mut rng, a_fmt), a_fmt);
            cases.push(Case {
                op: Op::Resize,
                a,
                b: None,
                out,
            });
        }
    }
    cases
}

fn render_file() -> String {
    let mut out = String::from(
        "# fx op golden vectors: op a_fmt a_raw b_fmt b_raw out_fmt out_raw\n\
         # raws are two's-complement bit patterns masked to the word width\n",
    );
    for case in golden_cases() {
        out.push_str(&case.render());
        out.push('\n');
    }
    out
}

#[test]
fn golden_file_matches_implementation() {
    let text = std::fs::read_to_string(GOLDEN_PATH)
        .expect("golden/fx_ops.txt missing; regenerate with the ignored write_golden_file test");
    let mut count = 0usize;
    let mut seen = std::collections::HashSet::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (case, expected) = parse_line(line);
        let got = case.eval();
        assert_eq!(
            got.raw, expected,
            "record `{line}` evaluated to raw {}",
            got.raw
        );
        seen.insert(case.op.name());
        count += 1;
    }
    assert!(count >= 100, "suspiciously small golden file: {count} records");
    for op in ["add", "sub", "mul", "resize"] {
        assert!(seen.contains(op), "no records for op class {op}");
    }
}

#[test]
fn golden_file_is_current() {
    // the checked-in file must be exactly what the generator emits
    let text = std::fs::read_to_string(GOLDEN_PATH).expect("golden/fx_ops.txt missing");
    assert_eq!(text, render_file(), "golden file out of date");
}

#[test]
#[ignore = "regenerates the golden file"]
fn write_golden_file() {
    std::fs::create_dir_all(std::path::Path::new(GOLDEN_PATH).parent().unwrap()).unwrap();
    std::fs::write(GOLDEN_PATH, render_file()).unwrap();
}
