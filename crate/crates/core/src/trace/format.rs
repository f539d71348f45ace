//! Line-oriented text encoding of a [`KernelTrace`].
//!
//! ```text
//! W<warp> <OPCODE> <latency> D:<Rn[,Rn]> S:<Rn[,...]> [RD:S=<N|F>[,...];D=<N|F>[,...]] [@<static_id>]
//! ```
//!
//! Empty register or hint lists are written as `-`. `#` starts a comment.
//! The trailing `@<static_id>` token is only present when the static id
//! differs from the instruction's position in its warp stream.

use std::fmt::Write as _;
use std::path::Path;

use super::{
    KernelTrace, OpcodeClass, Reg, Reuse, ReuseAnnotation, TraceInstruction, MAX_DESTINATIONS,
    MAX_SOURCES,
};
use crate::error::TraceError;

pub fn load_trace(path: impl AsRef<Path>) -> Result<KernelTrace, TraceError> {
    let bytes = std::fs::read(path)?;
    parse_bytes(&bytes)
}

pub fn save_trace(trace: &KernelTrace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    std::fs::write(path, to_text(trace))?;
    Ok(())
}

/// Parse trace text. Input must be 7-bit ASCII.
pub fn parse_trace(text: &str) -> Result<KernelTrace, TraceError> {
    parse_bytes(text.as_bytes())
}

fn parse_bytes(bytes: &[u8]) -> Result<KernelTrace, TraceError> {
    let mut warps: Vec<Vec<TraceInstruction>> = Vec::new();
    // Explicit static ids are resolved after the warp position is known.
    for (n, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = n + 1;
        if let Some(pos) = raw.iter().position(|b| !b.is_ascii()) {
            return Err(TraceError::parse(
                line_no,
                format!("non-ASCII byte 0x{:02x} at column {}", raw[pos], pos + 1),
            ));
        }
        // ASCII was checked above, so this cannot fail.
        let line = std::str::from_utf8(raw).expect("ascii is utf-8");
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (mut instr, explicit_static) = parse_line(line, line_no)?;
        let w = instr.warp_id as usize;
        if warps.len() <= w {
            warps.resize_with(w + 1, Vec::new);
        }
        instr.static_id = explicit_static.unwrap_or(warps[w].len() as u32);
        warps[w].push(instr);
    }
    if let Some(missing) = warps.iter().position(Vec::is_empty) {
        return Err(TraceError::SparseWarps {
            missing: missing as u32,
        });
    }
    Ok(KernelTrace::new(warps))
}

fn parse_line(line: &str, line_no: usize) -> Result<(TraceInstruction, Option<u32>), TraceError> {
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    if tokens.len() < 5 {
        return Err(TraceError::parse(
            line_no,
            format!("expected at least 5 fields, found {}", tokens.len()),
        ));
    }
    let warp_id = tokens[0]
        .strip_prefix('W')
        .and_then(parse_u32)
        .ok_or_else(|| TraceError::parse(line_no, format!("bad warp token `{}`", tokens[0])))?;
    let opcode = OpcodeClass::from_mnemonic(tokens[1])
        .ok_or_else(|| TraceError::parse(line_no, format!("unknown opcode `{}`", tokens[1])))?;
    let latency = parse_u32(tokens[2])
        .ok_or_else(|| TraceError::parse(line_no, format!("bad latency `{}`", tokens[2])))?;
    if latency == 0 {
        return Err(TraceError::parse(line_no, "latency must be at least 1"));
    }
    let dst_field = tokens[3]
        .strip_prefix("D:")
        .ok_or_else(|| TraceError::parse(line_no, "expected `D:` destination list"))?;
    let src_field = tokens[4]
        .strip_prefix("S:")
        .ok_or_else(|| TraceError::parse(line_no, "expected `S:` source list"))?;
    let dst_regs = parse_regs(dst_field, line_no)?;
    let src_regs = parse_regs(src_field, line_no)?;
    if src_regs.len() > MAX_SOURCES {
        return Err(TraceError::OperandCount {
            line: line_no,
            kind: "source",
            count: src_regs.len(),
            max: MAX_SOURCES,
        });
    }
    if dst_regs.len() > MAX_DESTINATIONS {
        return Err(TraceError::OperandCount {
            line: line_no,
            kind: "destination",
            count: dst_regs.len(),
            max: MAX_DESTINATIONS,
        });
    }

    let mut reuse = None;
    let mut static_id = None;
    for tok in &tokens[5..] {
        if let Some(rd) = tok.strip_prefix("RD:") {
            if reuse.is_some() || static_id.is_some() {
                return Err(TraceError::parse(line_no, "misplaced `RD:` group"));
            }
            let ann = parse_reuse(rd, line_no)?;
            if ann.src.len() != src_regs.len() || ann.dst.len() != dst_regs.len() {
                return Err(TraceError::parse(
                    line_no,
                    format!(
                        "reuse hints ({} src, {} dst) do not match operands ({} src, {} dst)",
                        ann.src.len(),
                        ann.dst.len(),
                        src_regs.len(),
                        dst_regs.len()
                    ),
                ));
            }
            reuse = Some(ann);
        } else if let Some(pc) = tok.strip_prefix('@') {
            if static_id.is_some() {
                return Err(TraceError::parse(line_no, "duplicate static id"));
            }
            static_id = Some(
                parse_u32(pc)
                    .ok_or_else(|| TraceError::parse(line_no, format!("bad static id `{tok}`")))?,
            );
        } else {
            return Err(TraceError::parse(line_no, format!("unexpected token `{tok}`")));
        }
    }

    let instr = TraceInstruction {
        warp_id,
        static_id: 0,
        opcode,
        latency,
        src_regs,
        dst_regs,
        reuse,
    };
    Ok((instr, static_id))
}

/// Strict unsigned decimal: digits only, no sign, fits in u32.
fn parse_u32(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_regs(field: &str, line_no: usize) -> Result<Vec<Reg>, TraceError> {
    if field == "-" {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|tok| {
            let n = tok
                .strip_prefix('R')
                .and_then(parse_u32)
                .ok_or_else(|| TraceError::parse(line_no, format!("bad register `{tok}`")))?;
            Reg::try_from(n).map_err(|_| TraceError::RegisterOutOfRange {
                line: line_no,
                register: n,
            })
        })
        .collect()
}

fn parse_hints(field: &str, line_no: usize) -> Result<Vec<Reuse>, TraceError> {
    if field == "-" {
        return Ok(Vec::new());
    }
    field
        .split(',')
        .map(|tok| match tok {
            "N" => Ok(Reuse::Near),
            "F" => Ok(Reuse::Far),
            _ => Err(TraceError::parse(line_no, format!("bad reuse hint `{tok}`"))),
        })
        .collect()
}

fn parse_reuse(field: &str, line_no: usize) -> Result<ReuseAnnotation, TraceError> {
    let (s, d) = field
        .split_once(';')
        .ok_or_else(|| TraceError::parse(line_no, "reuse group needs `S=...;D=...`"))?;
    let s = s
        .strip_prefix("S=")
        .ok_or_else(|| TraceError::parse(line_no, "reuse group needs `S=`"))?;
    let d = d
        .strip_prefix("D=")
        .ok_or_else(|| TraceError::parse(line_no, "reuse group needs `D=`"))?;
    Ok(ReuseAnnotation {
        src: parse_hints(s, line_no)?,
        dst: parse_hints(d, line_no)?,
    })
}

fn write_list<T>(out: &mut String, items: &[T], mut each: impl FnMut(&mut String, &T)) {
    if items.is_empty() {
        out.push('-');
        return;
    }
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        each(out, item);
    }
}

/// Encode a trace as text, warp by warp.
pub fn to_text(trace: &KernelTrace) -> String {
    let mut out = String::new();
    for stream in &trace.warps {
        for (pos, instr) in stream.iter().enumerate() {
            write_instruction(&mut out, instr, pos);
            out.push('\n');
        }
    }
    out
}

fn write_instruction(out: &mut String, instr: &TraceInstruction, pos: usize) {
    let _ = write!(out, "W{} {} {} D:", instr.warp_id, instr.opcode, instr.latency);
    write_list(out, &instr.dst_regs, |o, r| {
        let _ = write!(o, "R{r}");
    });
    out.push_str(" S:");
    write_list(out, &instr.src_regs, |o, r| {
        let _ = write!(o, "R{r}");
    });
    if let Some(reuse) = &instr.reuse {
        out.push_str(" RD:S=");
        write_list(out, &reuse.src, |o, h| o.push(h.symbol()));
        out.push_str(";D=");
        write_list(out, &reuse.dst, |o, h| o.push(h.symbol()));
    }
    if instr.static_id as usize != pos {
        let _ = write!(out, " @{}", instr.static_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_line() {
        let t = parse_trace("W0 ALU 4 D:R3 S:R1,R2\n").unwrap();
        assert_eq!(t.num_warps(), 1);
        assert_eq!(t.num_instructions(), 1);
        assert!(!t.is_annotated());
        let i = &t.warps[0][0];
        assert_eq!(i.opcode, OpcodeClass::Alu);
        assert_eq!(i.latency, 4);
        assert_eq!(i.dst_regs, vec![3]);
        assert_eq!(i.src_regs, vec![1, 2]);
        assert_eq!(i.static_id, 0);
    }

    #[test]
    fn maximal_tensor_line() {
        let t = parse_trace("W0 TENSOR 16 D:R8,R9 S:R0,R1,R2,R3,R4,R5 RD:S=N,N,F,F,N,N;D=F,N")
            .unwrap();
        assert!(t.is_annotated());
        let i = &t.warps[0][0];
        assert_eq!(i.src_regs.len(), 6);
        assert_eq!(i.dst_regs.len(), 2);
        let r = i.reuse.as_ref().unwrap();
        use Reuse::*;
        assert_eq!(r.src, vec![Near, Near, Far, Far, Near, Near]);
        assert_eq!(r.dst, vec![Far, Near]);
    }

    #[test]
    fn register_out_of_range() {
        let err = parse_trace("W0 ALU 4 D:R300 S:R1").unwrap_err();
        assert!(matches!(err, TraceError::RegisterOutOfRange { line: 1, register: 300 }));
        assert!(err.to_string().contains("register id out of range"));
    }

    #[test]
    fn operand_count_violation_reports_line() {
        let err = parse_trace("# header\nW0 ALU 4 D:- S:R0,R1,R2,R3,R4,R5,R6").unwrap_err();
        assert!(matches!(err, TraceError::OperandCount { line: 2, count: 7, .. }));
        let err = parse_trace("W0 ALU 4 D:R1,R2,R3 S:-").unwrap_err();
        assert!(matches!(err, TraceError::OperandCount { kind: "destination", .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("W0 ALU 4 D:R1 S:R2\nW0 FOO 4 D:R1 S:R2", 2),
            ("W0 ALU 0 D:R1 S:R2", 1),
            ("\n\nW0 ALU 4 D:R1", 3),
            ("W0 ALU 4 D:R1 S:R2 RD:S=N;D=", 1),
            ("W0 ALU 4 D:R1 S:R2 RD:S=N,N;D=F", 1),
            ("W0 ALU 4 D:R1 S:R2 extra", 1),
            ("W-1 ALU 4 D:R1 S:R2", 1),
            ("W0 ALU 4 D:R1 S:R+2", 1),
        ] {
            match parse_trace(text) {
                Err(TraceError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn non_ascii_rejected() {
        let err = parse_bytes("W0 ALU 4 D:R1 S:R2 # é".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 1, .. }));
    }

    #[test]
    fn sparse_warps_rejected() {
        let err = parse_trace("W0 ALU 4 D:R1 S:-\nW2 ALU 4 D:R1 S:-").unwrap_err();
        assert!(matches!(err, TraceError::SparseWarps { missing: 1 }));
    }

    #[test]
    fn empty_lists_and_comments() {
        let t = parse_trace("# only a comment\n\nW0 CTRL 2 D:- S:-   # trailing\n").unwrap();
        let i = &t.warps[0][0];
        assert!(i.src_regs.is_empty() && i.dst_regs.is_empty());
        assert_eq!(to_text(&t), "W0 CTRL 2 D:- S:-\n");
    }

    #[test]
    fn explicit_static_ids_roundtrip() {
        let text = "W0 ALU 4 D:R1 S:R2 @7\nW0 ALU 4 D:R1 S:R1\nW1 ALU 4 D:R1 S:R2 RD:S=N;D=F\nW1 SFU 9 D:- S:R1 RD:S=F;D=- @0\n";
        let t = parse_trace(text).unwrap();
        assert_eq!(t.warps[0][0].static_id, 7);
        assert_eq!(t.warps[0][1].static_id, 1);
        assert_eq!(t.warps[1][1].static_id, 0);
        assert_eq!(to_text(&t), text);
    }

    #[test]
    fn interleaved_warps_keep_program_order() {
        let t = parse_trace("W1 ALU 4 D:R1 S:-\nW0 ALU 4 D:R2 S:-\nW1 SFU 8 D:R3 S:R1\n").unwrap();
        assert_eq!(t.warps[1].len(), 2);
        assert_eq!(t.warps[1][1].opcode, OpcodeClass::Sfu);
        assert_eq!(t.warps[1][1].static_id, 1);
    }
}
