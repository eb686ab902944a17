//! Exact Cover 3 instances and the unique-satisfying-assignment generator.
//!
//! Bit convention: bit `i` (1-based) of a string `z = z_1 ... z_N` is bit
//! `i - 1` of the packed integer, so `z_1` is the least-significant bit. The
//! textual form lists `z_1` first: `"100"` means `z_1 = 1, z_2 = z_3 = 0`,
//! which is the packed value `1`. The quantum engine indexes basis states
//! with the same packed value.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::seed::Seed;

/// Largest bit count the generator and `count_satisfying` will scan exhaustively.
pub const DEFAULT_MAX_EXHAUSTIVE_BITS: usize = 26;

/// Default number of discard-and-restart cycles before generation gives up.
pub const DEFAULT_MAX_RESTARTS: usize = 10_000;

const MAX_BITS: usize = 63;

/// A clause `(a, b, c)` of 1-based bit indices, stored sorted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause([usize; 3]);

impl Clause {
    pub fn new(a: usize, b: usize, c: usize) -> Result<Self> {
        if a == 0 || b == 0 || c == 0 {
            return contract("clause bit indices are 1-based");
        }
        if a == b || b == c || a == c {
            return contract(format!("clause ({a}, {b}, {c}) repeats a bit"));
        }
        let mut bits = [a, b, c];
        bits.sort_unstable();
        Ok(Clause(bits))
    }

    pub fn bits(&self) -> [usize; 3] {
        self.0
    }

    /// Largest bit index in the clause.
    pub fn max_bit(&self) -> usize {
        self.0[2]
    }

    fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &b| m | 1u64 << (b - 1))
    }

    /// `z` satisfies the clause iff exactly one addressed bit is set.
    #[inline]
    fn satisfied_by_index(&self, z: u64) -> bool {
        (z & self.mask()).count_ones() == 1
    }
}

/// Packed bit string `z_1 ... z_N`, `z_1` in the least-significant bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bitstring {
    bits: u64,
    len: usize,
}

impl Bitstring {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > MAX_BITS {
            return contract(format!(
                "bit strings longer than {MAX_BITS} are unsupported"
            ));
        }
        if len < 64 && bits >> len != 0 {
            return contract(format!("value {bits:#x} does not fit in {len} bits"));
        }
        Ok(Bitstring { bits, len })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(0, len)
    }

    /// Packed value, usable directly as a state-vector index.
    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Value of the 1-based bit `i`.
    pub fn bit(&self, i: usize) -> Result<bool> {
        if i == 0 || i > self.len {
            return contract(format!("bit {i} out of range 1..={}", self.len));
        }
        Ok(self.bits >> (i - 1) & 1 == 1)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bits >> i & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' if i < 64 => bits |= 1 << i,
                _ => return Err(Error::Parse(format!("bad bit string {s:?}"))),
            }
        }
        Bitstring::new(bits, s.chars().count())
    }
}

/// `true` iff exactly one of the clause's three bits is set in `z`.
pub fn clause_satisfied(clause: &Clause, z: &Bitstring) -> Result<bool> {
    if clause.max_bit() > z.len() {
        return contract(format!(
            "clause {:?} addresses bit {} of a {}-bit string",
            clause.0,
            clause.max_bit(),
            z.len()
        ));
    }
    Ok(clause.satisfied_by_index(z.index()))
}

/// An Exact Cover 3 instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ec3Instance {
    n_bits: usize,
    clauses: Vec<Clause>,
    solution: Option<Bitstring>,
    seed: Option<Seed>,
}

impl Ec3Instance {
    /// Builds an instance without a recorded solution. Clauses must be
    /// distinct and address bits within `1..=n_bits`.
    pub fn new(n_bits: usize, clauses: Vec<Clause>) -> Result<Self> {
        if !(3..=MAX_BITS).contains(&n_bits) {
            return contract(format!("n_bits must be in 3..={MAX_BITS}, got {n_bits}"));
        }
        let mut seen = HashSet::with_capacity(clauses.len());
        for c in &clauses {
            if c.max_bit() > n_bits {
                return contract(format!("clause {:?} exceeds n_bits = {n_bits}", c.0));
            }
            if !seen.insert(*c) {
                return contract(format!("duplicate clause {:?}", c.0));
            }
        }
        Ok(Ec3Instance {
            n_bits,
            clauses,
            solution: None,
            seed: None,
        })
    }

    /// Attaches a solution after checking it satisfies every clause.
    /// Uniqueness is the generator's guarantee; use `count_satisfying` to
    /// verify it independently.
    pub fn with_solution(mut self, solution: Bitstring) -> Result<Self> {
        if solution.len() != self.n_bits {
            return contract("solution length differs from n_bits");
        }
        if self.violation_count(&solution)? != 0 {
            return contract(format!("{solution} does not satisfy the instance"));
        }
        self.solution = Some(solution);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn solution(&self) -> Option<Bitstring> {
        self.solution
    }

    pub fn seed(&self) -> Option<Seed> {
        self.seed
    }

    /// Number of clauses `z` violates.
    pub fn violation_count(&self, z: &Bitstring) -> Result<usize> {
        if z.len() != self.n_bits {
            return contract(format!(
                "bit string has {} bits, instance has {}",
                z.len(),
                self.n_bits
            ));
        }
        Ok(self.violations_at(z.index()))
    }

    /// Violation count for a packed index known to be in range.
    #[inline]
    pub(crate) fn violations_at(&self, z: u64) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.satisfied_by_index(z))
            .count()
    }

    /// Number of clauses containing each bit, in bit order.
    pub fn bit_degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n_bits];
        for c in &self.clauses {
            for b in c.bits() {
                d[b - 1] += 1;
            }
        }
        d
    }

    /// Exhaustive count of satisfying strings, bounded by
    /// [`DEFAULT_MAX_EXHAUSTIVE_BITS`].
    pub fn count_satisfying(&self) -> Result<u64> {
        self.count_satisfying_bounded(DEFAULT_MAX_EXHAUSTIVE_BITS)
    }

    pub fn count_satisfying_bounded(&self, max_bits: usize) -> Result<u64> {
        if self.n_bits > max_bits {
            return Err(Error::Capability(format!(
                "exhaustive scan of 2^{} strings exceeds the {max_bits}-bit bound",
                self.n_bits
            )));
        }
        let masks: Vec<u64> = self.clauses.iter().map(Clause::mask).collect();
        let count = (0u64..1 << self.n_bits)
            .filter(|&z| masks.iter().all(|&m| (z & m).count_ones() == 1))
            .count();
        Ok(count as u64)
    }
}

/// Incremental unique-satisfying-assignment generator.
#[derive(Clone, Debug)]
pub struct UsaGenerator {
    pub max_restarts: usize,
    pub max_exhaustive_bits: usize,
}

impl Default for UsaGenerator {
    fn default() -> Self {
        UsaGenerator {
            max_restarts: DEFAULT_MAX_RESTARTS,
            max_exhaustive_bits: DEFAULT_MAX_EXHAUSTIVE_BITS,
        }
    }
}

/// Bookkeeping from one successful generation.
#[derive(Clone, Debug)]
pub struct GenerationTrace {
    /// Instances discarded because a clause left no satisfying string.
    pub restarts: usize,
    /// Satisfying-string count after each clause of the accepted attempt.
    pub satisfying_counts: Vec<usize>,
}

impl UsaGenerator {
    pub fn generate(&self, n_bits: usize, seed: Seed) -> Result<Ec3Instance> {
        self.generate_traced(n_bits, seed).map(|(inst, _)| inst)
    }

    /// Clauses are drawn as three distinct uniform bits; a clause already in
    /// the instance is redrawn. The surviving satisfying strings are filtered
    /// clause by clause. One survivor ends generation; zero survivors discard
    /// the whole instance and restart from no clauses.
    pub fn generate_traced(
        &self,
        n_bits: usize,
        seed: Seed,
    ) -> Result<(Ec3Instance, GenerationTrace)> {
        if n_bits < 4 {
            return contract(format!("USA generation needs n_bits >= 4, got {n_bits}"));
        }
        if n_bits > self.max_exhaustive_bits {
            return Err(Error::Capability(format!(
                "USA generation at n_bits = {n_bits} exceeds the {}-bit scan bound",
                self.max_exhaustive_bits
            )));
        }
        let mut rng = seed.rng();
        let all_clauses = n_bits * (n_bits - 1) * (n_bits - 2) / 6;

        for restarts in 0..=self.max_restarts {
            let mut clauses: Vec<Clause> = Vec::new();
            let mut used: HashSet<Clause> = HashSet::new();
            let mut survivors: Option<Vec<u64>> = None;
            let mut counts = Vec::new();

            while used.len() < all_clauses {
                let clause = loop {
                    let picks = rand::seq::index::sample(&mut rng, n_bits, 3);
                    let c =
                        Clause::new(picks.index(0) + 1, picks.index(1) + 1, picks.index(2) + 1)?;
                    if !used.contains(&c) {
                        break c;
                    }
                };
                used.insert(clause);
                clauses.push(clause);

                let next: Vec<u64> = match survivors.take() {
                    None => (0u64..1 << n_bits)
                        .filter(|&z| clause.satisfied_by_index(z))
                        .collect(),
                    Some(prev) => prev
                        .into_iter()
                        .filter(|&z| clause.satisfied_by_index(z))
                        .collect(),
                };
                counts.push(next.len());

                match next.len() {
                    0 => break,
                    1 => {
                        let solution = Bitstring::new(next[0], n_bits)?;
                        let inst = Ec3Instance::new(n_bits, clauses)?
                            .with_solution(solution)?
                            .with_seed(seed);
                        let trace = GenerationTrace {
                            restarts,
                            satisfying_counts: counts,
                        };
                        return Ok((inst, trace));
                    }
                    _ => survivors = Some(next),
                }
            }
            // Either a clause emptied the survivor set or every possible
            // clause is in use with several survivors left; both restart.
        }
        Err(Error::Generation {
            n_bits,
            restarts: self.max_restarts,
        })
    }
}

/// Generates a USA instance with the default retry budget.
pub fn generate_usa_instance(n_bits: usize, seed: Seed) -> Result<Ec3Instance> {
    UsaGenerator::default().generate(n_bits, seed)
}

/// One instance per JSON line: `{"n_bits", "clauses", "solution", "seed"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n_bits: usize,
    pub clauses: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Seed>,
}

impl From<&Ec3Instance> for InstanceRecord {
    fn from(inst: &Ec3Instance) -> Self {
        InstanceRecord {
            n_bits: inst.n_bits,
            clauses: inst.clauses.iter().map(Clause::bits).collect(),
            solution: inst.solution.map(|s| s.to_string()),
            seed: inst.seed,
        }
    }
}

impl TryFrom<InstanceRecord> for Ec3Instance {
    type Error = Error;

    fn try_from(rec: InstanceRecord) -> Result<Self> {
        let clauses = rec
            .clauses
            .iter()
            .map(|&[a, b, c]| Clause::new(a, b, c))
            .collect::<Result<Vec<_>>>()?;
        let mut inst = Ec3Instance::new(rec.n_bits, clauses)?;
        if let Some(s) = rec.solution {
            inst = inst.with_solution(s.parse()?)?;
        }
        inst.seed = rec.seed;
        Ok(inst)
    }
}

/// Serializes instances as JSON lines.
pub fn write_instances_jsonl<W: std::io::Write>(mut w: W, instances: &[Ec3Instance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, &InstanceRecord::from(inst))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_instances_jsonl<R: std::io::BufRead>(r: R) -> Result<Vec<Ec3Instance>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord = serde_json::from_str(&line)?;
        out.push(rec.try_into()?);
    }
    Ok(out)
}
