//! Executed-instruction traces: representation, text format, parser and
//! synthetic generator.
//!
//! A trace file is UTF-8 text, one instruction per line:
//!
//! ```text
//! # comment
//! trace <name> inputs r0,r1
//! <opcode> [<dest>] [<src1>,<src2>,...] [@<addr>] [<operand_bytes>] [<latency>]
//! ```
//!
//! Fields beyond the opcode are optional. `operand_bytes` defaults to 8;
//! `latency` defaults per opcode class (arith 1, getelementptr 1, load 4,
//! store 4, branch 1, call 1, phi 0, other 1). The header line declares
//! the registers a trace reads without defining them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Register identifier; rendered as `r<id>` in the text format.
pub type RegId = u32;

/// Abstract memory address; exact-match equality is the only aliasing rule.
pub type MemAddr = u64;

pub const DEFAULT_OPERAND_BYTES: u64 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("instruction {seq}: source register r{reg} is never defined and not a declared input")]
    UndefinedRegister { seq: usize, reg: RegId },
    #[error("instruction {seq}: {msg}")]
    Invariant { seq: usize, msg: String },
    #[error("trace is empty")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Instruction class of a trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Arith,
    GetElementPtr,
    Load,
    Store,
    Branch,
    Call,
    Phi,
    Other,
}

impl Opcode {
    pub const ALL: [Opcode; 8] = [
        Opcode::Arith,
        Opcode::GetElementPtr,
        Opcode::Load,
        Opcode::Store,
        Opcode::Branch,
        Opcode::Call,
        Opcode::Phi,
        Opcode::Other,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Arith => "arith",
            Opcode::GetElementPtr => "getelementptr",
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::Branch => "branch",
            Opcode::Call => "call",
            Opcode::Phi => "phi",
            Opcode::Other => "other",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.mnemonic() == s)
    }

    /// Index into [`Opcode::ALL`]; used for one-hot encodings.
    pub fn index(self) -> usize {
        Opcode::ALL.iter().position(|op| *op == self).unwrap()
    }

    /// Default abstract latency in cycles when a line omits the field.
    pub fn default_latency(self) -> u64 {
        match self {
            Opcode::Load | Opcode::Store => 4,
            Opcode::Phi => 0,
            _ => 1,
        }
    }

    /// Whether this opcode may define a destination register.
    pub fn defines_register(self) -> bool {
        !matches!(self, Opcode::Store | Opcode::Branch | Opcode::Call)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// One executed instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    /// Ordinal position in the trace, 0-based.
    pub seq: usize,
    pub opcode: Opcode,
    pub dest: Option<RegId>,
    pub sources: Vec<RegId>,
    pub mem_addr: Option<MemAddr>,
    /// Bytes produced by `dest` (or written by a store); always >= 1.
    pub operand_bytes: u64,
    /// Abstract cycles to execute this instruction.
    pub latency: u64,
}

impl Instruction {
    fn check(&self) -> Result<(), TraceError> {
        let fail = |msg: String| {
            Err(TraceError::Invariant {
                seq: self.seq,
                msg,
            })
        };
        if self.operand_bytes == 0 {
            return fail("operand_bytes must be positive".into());
        }
        match self.opcode {
            Opcode::Load => {
                if self.mem_addr.is_none() || self.dest.is_none() {
                    return fail("load requires a memory address and a destination".into());
                }
            }
            Opcode::Store => {
                if self.mem_addr.is_none() || self.sources.is_empty() {
                    return fail("store requires a memory address and at least one source".into());
                }
                if self.dest.is_some() {
                    return fail("store cannot define a destination register".into());
                }
            }
            Opcode::Branch | Opcode::Call => {
                if self.dest.is_some() {
                    return fail(format!(
                        "{} cannot define a destination register",
                        self.opcode
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// An ordered sequence of executed instructions plus the registers it
/// reads without defining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTrace {
    pub name: String,
    pub inputs: BTreeSet<RegId>,
    pub instructions: Vec<Instruction>,
}

impl InstructionTrace {
    /// Validates all trace invariants: per-instruction field rules,
    /// strictly increasing `seq`, and defined-before-use for sources.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.instructions.is_empty() {
            return Err(TraceError::Empty);
        }
        let mut defined = self.inputs.clone();
        for (k, inst) in self.instructions.iter().enumerate() {
            if inst.seq != k {
                return Err(TraceError::Invariant {
                    seq: inst.seq,
                    msg: format!("seq must equal position {k}"),
                });
            }
            inst.check()?;
            for &s in &inst.sources {
                if !defined.contains(&s) {
                    return Err(TraceError::UndefinedRegister { seq: k, reg: s });
                }
            }
            if let Some(d) = inst.dest {
                defined.insert(d);
            }
        }
        Ok(())
    }

    /// Renders the canonical text form; `parse_trace` inverts it exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("trace ");
        out.push_str(&self.name);
        if !self.inputs.is_empty() {
            out.push_str(" inputs ");
            let regs: Vec<String> = self.inputs.iter().map(|r| format!("r{r}")).collect();
            out.push_str(&regs.join(","));
        }
        out.push('\n');
        for inst in &self.instructions {
            out.push_str(inst.opcode.mnemonic());
            if let Some(d) = inst.dest {
                out.push_str(&format!(" r{d}"));
            }
            if !inst.sources.is_empty() {
                let regs: Vec<String> = inst.sources.iter().map(|r| format!("r{r}")).collect();
                out.push(' ');
                out.push_str(&regs.join(","));
            }
            if let Some(a) = inst.mem_addr {
                out.push_str(&format!(" @{a}"));
            }
            out.push_str(&format!(" {} {}\n", inst.operand_bytes, inst.latency));
        }
        out
    }
}

/// Parses the text trace format. Line `k` of the instruction body yields
/// `seq == k`. Errors carry 1-based file line numbers.
pub fn parse_trace(text: &str) -> Result<InstructionTrace, TraceError> {
    let mut name = String::from("trace");
    let mut inputs = BTreeSet::new();
    let mut instructions: Vec<Instruction> = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "trace" {
            if saw_header || !instructions.is_empty() {
                return Err(TraceError::Parse {
                    line: line_no,
                    msg: "trace header must appear once, before any instruction".into(),
                });
            }
            saw_header = true;
            if tokens.len() < 2 {
                return Err(TraceError::Parse {
                    line: line_no,
                    msg: "trace header requires a name".into(),
                });
            }
            name = tokens[1].to_string();
            match tokens.get(2) {
                None => {}
                Some(&"inputs") => {
                    let list = tokens.get(3).ok_or_else(|| TraceError::Parse {
                        line: line_no,
                        msg: "`inputs` requires a register list".into(),
                    })?;
                    for part in list.split(',') {
                        inputs.insert(parse_reg(part, line_no)?);
                    }
                }
                Some(other) => {
                    return Err(TraceError::Parse {
                        line: line_no,
                        msg: format!("unexpected token `{other}` in trace header"),
                    });
                }
            }
            continue;
        }
        let seq = instructions.len();
        instructions.push(parse_instruction(&tokens, seq, line_no)?);
    }

    let trace = InstructionTrace {
        name,
        inputs,
        instructions,
    };
    trace.validate()?;
    Ok(trace)
}

fn parse_reg(tok: &str, line: usize) -> Result<RegId, TraceError> {
    tok.strip_prefix('r')
        .and_then(|d| d.parse::<RegId>().ok())
        .ok_or_else(|| TraceError::Parse {
            line,
            msg: format!("expected register like `r3`, got `{tok}`"),
        })
}

fn is_reg_group(tok: &str) -> bool {
    tok.split(',')
        .all(|p| p.strip_prefix('r').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())))
}

fn parse_instruction(tokens: &[&str], seq: usize, line: usize) -> Result<Instruction, TraceError> {
    let opcode = Opcode::from_mnemonic(tokens[0]).ok_or_else(|| TraceError::Parse {
        line,
        msg: format!("unknown opcode `{}`", tokens[0]),
    })?;

    let mut reg_groups: Vec<Vec<RegId>> = Vec::new();
    let mut mem_addr: Option<MemAddr> = None;
    let mut numbers: Vec<u64> = Vec::new();

    for tok in &tokens[1..] {
        if let Some(addr) = tok.strip_prefix('@') {
            if mem_addr.is_some() {
                return Err(TraceError::Parse {
                    line,
                    msg: "duplicate memory address".into(),
                });
            }
            mem_addr = Some(addr.parse::<MemAddr>().map_err(|_| TraceError::Parse {
                line,
                msg: format!("bad memory address `{tok}`"),
            })?);
        } else if is_reg_group(tok) {
            if !numbers.is_empty() {
                return Err(TraceError::Parse {
                    line,
                    msg: "registers must precede numeric fields".into(),
                });
            }
            let group = tok
                .split(',')
                .map(|p| parse_reg(p, line))
                .collect::<Result<Vec<_>, _>>()?;
            reg_groups.push(group);
        } else if let Ok(n) = tok.parse::<u64>() {
            numbers.push(n);
        } else {
            return Err(TraceError::Parse {
                line,
                msg: format!("unrecognized token `{tok}`"),
            });
        }
    }

    if reg_groups.len() > 2 {
        return Err(TraceError::Parse {
            line,
            msg: "too many register fields".into(),
        });
    }
    if numbers.len() > 2 {
        return Err(TraceError::Parse {
            line,
            msg: "too many numeric fields".into(),
        });
    }

    // First group is the destination for register-defining opcodes,
    // unless it is a comma list (a destination is a single register).
    let (dest, sources) = match (reg_groups.len(), opcode.defines_register()) {
        (0, _) => (None, Vec::new()),
        (1, true) => {
            let g = reg_groups.pop().unwrap();
            if g.len() == 1 {
                (Some(g[0]), Vec::new())
            } else {
                (None, g)
            }
        }
        (1, false) => (None, reg_groups.pop().unwrap()),
        (2, true) => {
            let srcs = reg_groups.pop().unwrap();
            let d = reg_groups.pop().unwrap();
            if d.len() != 1 {
                return Err(TraceError::Parse {
                    line,
                    msg: "destination must be a single register".into(),
                });
            }
            (Some(d[0]), srcs)
        }
        (2, false) => {
            return Err(TraceError::Parse {
                line,
                msg: format!("{opcode} cannot define a destination register"),
            });
        }
        _ => unreachable!(),
    };

    let inst = Instruction {
        seq,
        opcode,
        dest,
        sources,
        mem_addr,
        operand_bytes: numbers.first().copied().unwrap_or(DEFAULT_OPERAND_BYTES),
        latency: numbers.get(1).copied().unwrap_or(opcode.default_latency()),
    };
    inst.check().map_err(|e| match e {
        TraceError::Invariant { msg, .. } => TraceError::Parse { line, msg },
        other => other,
    })?;
    Ok(inst)
}

/// Synthetic trace shapes.
///
/// `ParallelLoop` fans `size` independent iteration bodies out of a
/// shared base-pointer node (the address-cone shape that pointer
/// arithmetic produces in unrolled loops). `SequentialChain` emits one
/// dependency chain of length `size`. `Mixed` is a parallel section
/// whose per-iteration results feed a sequential reduction chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePattern {
    ParallelLoop,
    SequentialChain,
    Mixed,
}

impl TracePattern {
    pub fn name(self) -> &'static str {
        match self {
            TracePattern::ParallelLoop => "parallel_loop",
            TracePattern::SequentialChain => "sequential_chain",
            TracePattern::Mixed => "mixed",
        }
    }

    pub fn from_name(s: &str) -> Option<TracePattern> {
        match s {
            "parallel_loop" => Some(TracePattern::ParallelLoop),
            "sequential_chain" => Some(TracePattern::SequentialChain),
            "mixed" => Some(TracePattern::Mixed),
            _ => None,
        }
    }
}

/// Generates a synthetic trace. Pure in `(pattern, size, seed)`.
pub fn generate_synthetic_trace(
    pattern: TracePattern,
    size: usize,
    seed: u64,
) -> Result<InstructionTrace, TraceError> {
    if size < 4 {
        return Err(TraceError::InvalidArgument(format!(
            "size must be >= 4, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TraceBuilder::new(format!("{}_{size}_{seed}", pattern.name()));
    match pattern {
        TracePattern::SequentialChain => {
            b.chain(size, 0, &mut rng);
        }
        TracePattern::ParallelLoop => {
            b.parallel(size, &mut rng);
        }
        TracePattern::Mixed => {
            let results = b.parallel(size, &mut rng);
            b.reduce_chain(&results, &mut rng);
        }
    }
    let trace = b.finish();
    trace.validate()?;
    Ok(trace)
}

struct TraceBuilder {
    name: String,
    instructions: Vec<Instruction>,
    next_reg: RegId,
}

impl TraceBuilder {
    fn new(name: String) -> Self {
        TraceBuilder {
            name,
            instructions: Vec::new(),
            // r0 is the declared trace input
            next_reg: 1,
        }
    }

    fn alloc_reg(&mut self) -> RegId {
        let r = self.next_reg;
        self.next_reg += 1;
        r
    }

    fn push(
        &mut self,
        opcode: Opcode,
        dest: Option<RegId>,
        sources: Vec<RegId>,
        mem_addr: Option<MemAddr>,
        operand_bytes: u64,
    ) -> usize {
        let seq = self.instructions.len();
        self.instructions.push(Instruction {
            seq,
            opcode,
            dest,
            sources,
            mem_addr,
            operand_bytes,
            latency: opcode.default_latency(),
        });
        seq
    }

    /// A register-only dependency chain: instruction k>start reads the
    /// dest of instruction k-1. Returns the final register.
    fn chain(&mut self, len: usize, from_reg: RegId, rng: &mut ChaCha8Rng) -> RegId {
        let mut cur = from_reg;
        let mut defined: Vec<RegId> = Vec::new();
        for _ in 0..len {
            let opcode = match rng.gen_range(0..10) {
                0..=6 => Opcode::Arith,
                7..=8 => Opcode::GetElementPtr,
                _ => Opcode::Other,
            };
            let mut sources = vec![cur];
            // occasional second operand from an earlier chain value
            if defined.len() >= 2 && rng.gen_bool(0.3) {
                let extra = defined[rng.gen_range(0..defined.len() - 1)];
                sources.push(extra);
            }
            let dest = self.alloc_reg();
            self.push(opcode, Some(dest), sources, None, DEFAULT_OPERAND_BYTES);
            defined.push(dest);
            cur = dest;
        }
        cur
    }

    /// `iters` independent loop bodies fanned out from one base-pointer
    /// node. Returns the per-iteration result registers.
    fn parallel(&mut self, iters: usize, rng: &mut ChaCha8Rng) -> Vec<RegId> {
        let base = self.alloc_reg();
        self.push(
            Opcode::Other,
            Some(base),
            vec![0],
            None,
            DEFAULT_OPERAND_BYTES,
        );
        // parallel bodies stream narrower array elements than the
        // 8-byte scalars of sequential chains
        let elem_bytes: u64 = if rng.gen_bool(0.75) { 4 } else { 8 };
        let ariths = rng.gen_range(1..=2usize);
        let mut results = Vec::with_capacity(iters);
        for i in 0..iters {
            let addr_in = 0x1000 + (i as u64) * elem_bytes;
            let addr_out = 0x10_0000 + (i as u64) * elem_bytes;
            let gep = self.alloc_reg();
            self.push(
                Opcode::GetElementPtr,
                Some(gep),
                vec![base],
                None,
                DEFAULT_OPERAND_BYTES,
            );
            let loaded = self.alloc_reg();
            self.push(
                Opcode::Load,
                Some(loaded),
                vec![gep],
                Some(addr_in),
                elem_bytes,
            );
            let mut val = loaded;
            for _ in 0..ariths {
                let dest = self.alloc_reg();
                self.push(Opcode::Arith, Some(dest), vec![val], None, elem_bytes);
                val = dest;
            }
            self.push(Opcode::Store, None, vec![val], Some(addr_out), elem_bytes);
            results.push(val);
        }
        results
    }

    /// Sequential reduction over previously computed values.
    fn reduce_chain(&mut self, values: &[RegId], rng: &mut ChaCha8Rng) {
        let mut acc = values[0];
        for &v in &values[1..] {
            let opcode = if rng.gen_bool(0.85) {
                Opcode::Arith
            } else {
                Opcode::Other
            };
            let dest = self.alloc_reg();
            self.push(opcode, Some(dest), vec![acc, v], None, DEFAULT_OPERAND_BYTES);
            acc = dest;
        }
    }

    fn finish(self) -> InstructionTrace {
        let mut inputs = BTreeSet::new();
        inputs.insert(0);
        InstructionTrace {
            name: self.name,
            inputs,
            instructions: self.instructions,
        }
    }
}

/// Concatenates two traces, linking them with a single data dependency:
/// the first instruction of `b` that has sources gains the final defined
/// register of `a` as an extra source. Register ids and memory addresses
/// of `b` are shifted to avoid collisions.
pub fn concat_traces(
    a: &InstructionTrace,
    b: &InstructionTrace,
    name: &str,
) -> Result<InstructionTrace, TraceError> {
    a.validate()?;
    b.validate()?;
    let reg_shift = a
        .instructions
        .iter()
        .filter_map(|i| i.dest)
        .max()
        .unwrap_or(0)
        .max(a.inputs.iter().copied().max().unwrap_or(0))
        + 1;
    let addr_shift = a
        .instructions
        .iter()
        .filter_map(|i| i.mem_addr)
        .max()
        .map_or(0, |m| m + 8);
    let last_def = a
        .instructions
        .iter()
        .rev()
        .find_map(|i| i.dest)
        .ok_or_else(|| TraceError::InvalidArgument("first trace defines no register".into()))?;

    let mut instructions = a.instructions.clone();
    let mut inputs = a.inputs.clone();
    for r in &b.inputs {
        inputs.insert(r + reg_shift);
    }
    let mut linked = false;
    for inst in &b.instructions {
        let mut inst = inst.clone();
        inst.seq += a.instructions.len();
        inst.dest = inst.dest.map(|d| d + reg_shift);
        inst.sources = inst.sources.iter().map(|s| s + reg_shift).collect();
        inst.mem_addr = inst.mem_addr.map(|m| m + addr_shift);
        if !linked && !inst.sources.is_empty() {
            inst.sources.push(last_def);
            linked = true;
        }
        instructions.push(inst);
    }
    let trace = InstructionTrace {
        name: name.to_string(),
        inputs,
        instructions,
    };
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_arith_line() {
        let t = parse_trace("trace t inputs r1,r2\narith r3 r1,r2 8 1\n").unwrap();
        assert_eq!(t.instructions.len(), 1);
        let i = &t.instructions[0];
        assert_eq!(i.opcode, Opcode::Arith);
        assert_eq!(i.dest, Some(3));
        assert_eq!(i.sources, vec![1, 2]);
        assert_eq!(i.operand_bytes, 8);
        assert_eq!(i.latency, 1);
    }

    #[test]
    fn parse_load_with_address() {
        let t = parse_trace("load r2 @16 8 4\n").unwrap();
        let i = &t.instructions[0];
        assert_eq!(i.opcode, Opcode::Load);
        assert_eq!(i.dest, Some(2));
        assert_eq!(i.mem_addr, Some(16));
    }

    #[test]
    fn store_with_dest_is_rejected() {
        let err = parse_trace("trace t inputs r1\nstore r1 r1 @16\n").unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn defaults_applied_when_fields_omitted() {
        let t = parse_trace("trace t inputs r1\nstore r1 @8\nload r2 @8\nphi r3 r2\n").unwrap();
        assert_eq!(t.instructions[0].operand_bytes, 8);
        assert_eq!(t.instructions[0].latency, 4);
        assert_eq!(t.instructions[1].latency, 4);
        assert_eq!(t.instructions[2].latency, 0);
    }

    #[test]
    fn undefined_source_is_semantic_error() {
        let err = parse_trace("arith r2 r1\n").unwrap_err();
        assert_eq!(err, TraceError::UndefinedRegister { seq: 0, reg: 1 });
    }

    #[test]
    fn empty_input_is_error() {
        assert_eq!(parse_trace("# nothing\n"), Err(TraceError::Empty));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let t = parse_trace("# c\n\ntrace t inputs r1\n\n# mid\narith r2 r1\n").unwrap();
        assert_eq!(t.instructions.len(), 1);
    }

    #[test]
    fn chain_reads_previous_dest() {
        let t = generate_synthetic_trace(TracePattern::SequentialChain, 10, 7).unwrap();
        assert_eq!(t.instructions.len(), 10);
        for k in 1..t.instructions.len() {
            let prev = t.instructions[k - 1].dest.unwrap();
            assert!(
                t.instructions[k].sources.contains(&prev),
                "instruction {k} does not read dest of {k_prev}",
                k_prev = k - 1
            );
        }
    }

    #[test]
    fn generator_is_deterministic() {
        for pattern in [
            TracePattern::SequentialChain,
            TracePattern::ParallelLoop,
            TracePattern::Mixed,
        ] {
            let a = generate_synthetic_trace(pattern, 8, 7).unwrap();
            let b = generate_synthetic_trace(pattern, 8, 7).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.render(), b.render());
        }
    }

    #[test]
    fn generator_rejects_tiny_sizes() {
        assert!(matches!(
            generate_synthetic_trace(TracePattern::SequentialChain, 3, 0),
            Err(TraceError::InvalidArgument(_))
        ));
    }

    #[test]
    fn round_trip_generated_traces() {
        for seed in 0..20 {
            for pattern in [
                TracePattern::SequentialChain,
                TracePattern::ParallelLoop,
                TracePattern::Mixed,
            ] {
                let t = generate_synthetic_trace(pattern, 4 + (seed as usize % 13), seed).unwrap();
                let back = parse_trace(&t.render()).unwrap();
                assert_eq!(back, t, "round trip failed for {pattern:?} seed {seed}");
            }
        }
    }

    #[test]
    fn concat_links_with_single_extra_source() {
        let a = generate_synthetic_trace(TracePattern::SequentialChain, 5, 1).unwrap();
        let b = generate_synthetic_trace(TracePattern::ParallelLoop, 4, 2).unwrap();
        let joined = concat_traces(&a, &b, "joined").unwrap();
        assert_eq!(
            joined.instructions.len(),
            a.instructions.len() + b.instructions.len()
        );
        let last_def = a.instructions.iter().rev().find_map(|i| i.dest).unwrap();
        let cross: usize = joined.instructions[a.instructions.len()..]
            .iter()
            .map(|i| i.sources.iter().filter(|s| **s == last_def).count())
            .sum();
        assert_eq!(cross, 1);
    }
}
