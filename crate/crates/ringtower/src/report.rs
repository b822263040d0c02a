//! Report data model and the command-line input format.
//!
//! Reports serialize to versioned JSON and render to text through a pure
//! function of the report value, so a JSON report regenerates its text form
//! byte for byte. Witness coordinates are serialized as exact strings in
//! the canonical bases, so the quasibase identity can be re-verified from
//! the JSON alone.

use serde::{Deserialize, Serialize};

use crate::depth::{DepthVerdict, Method, Outcome, Property, QuasibaseWitness, Side};
use crate::error::{Error, Result};
use crate::field::{Field, FieldSpec};
use crate::groups::{parse_perm, Perm, PermGroup};
use crate::Caps;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub field: String,
    pub seed: u64,
    pub elapsed_ms: u128,
    pub truncated: bool,
    pub body: ReportBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ReportBody {
    Depth(DepthBody),
    Tower(TowerBody),
    Structures(StructuresBody),
    FixGal(FixGalBody),
    Catalog(CatalogBody),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRep {
    pub side: String,
    pub n: usize,
    /// row-major matrices on the basis of A, exact entries
    pub maps: Vec<Vec<String>>,
    /// tensor-square coordinates in the canonical quotient basis
    pub tensors: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRep {
    pub property: String,
    pub outcome: String,
    pub method: String,
    pub detail: String,
    pub witness: Option<WitnessRep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRep {
    pub n: usize,
    pub right: VerdictRep,
    pub left: VerdictRep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthBody {
    pub group_order: usize,
    pub subgroup_order: usize,
    pub n_max: usize,
    pub depth: Option<usize>,
    pub levels: Vec<LevelRep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerBody {
    pub orders: (usize, usize, usize),
    pub normal_closure_in_h: bool,
    pub coset_witness: Option<WitnessRep>,
    pub right: VerdictRep,
    pub left: VerdictRep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuresBody {
    pub orders: (usize, usize, usize),
    pub dims: Vec<(String, usize)>,
    pub audits: Vec<(String, bool)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixGalEntryRep {
    pub divisor: usize,
    pub subfield_dim: usize,
    pub gal_dim: usize,
    pub expected_gal_dim: usize,
    pub fix_of_gal_is_subfield: bool,
    pub gal_of_fix_is_gal: bool,
    pub contains_left_multiplications: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixGalBody {
    pub p: u64,
    pub n: usize,
    pub divisor_count: usize,
    pub entries: Vec<FixGalEntryRep>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionRep {
    pub id: u32,
    pub label: String,
    pub pass: bool,
    pub detail: String,
    pub millis: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogBody {
    pub criteria: Vec<CriterionRep>,
}

impl Report {
    /// 0 when fully decided, 2 when anything was truncated or inconclusive.
    pub fn exit_code(&self) -> i32 {
        if self.truncated {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Report> {
        serde_json::from_str(s).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
    }
}

pub fn witness_rep<F: Field>(f: &F, w: &QuasibaseWitness<F>) -> WitnessRep {
    WitnessRep {
        side: match w.side {
            Side::Right => "right".into(),
            Side::Left => "left".into(),
        },
        n: w.n(),
        maps: w.maps.iter().map(|m| m.iter().map(|x| f.elem_to_string(x)).collect()).collect(),
        tensors: w
            .tensors
            .iter()
            .map(|t| t.iter().map(|x| f.elem_to_string(x)).collect())
            .collect(),
    }
}

pub fn verdict_rep<F: Field>(f: &F, v: &DepthVerdict<F>) -> VerdictRep {
    VerdictRep {
        property: match v.property {
            Property::RD2 => "rD2".into(),
            Property::LD2 => "lD2".into(),
            Property::RD3 => "rD3".into(),
            Property::LD3 => "lD3".into(),
        },
        outcome: match &v.outcome {
            Outcome::Holds => "holds".into(),
            Outcome::Fails => "fails".into(),
            Outcome::Inconclusive(r) => format!("inconclusive: {r}"),
        },
        method: match v.method {
            Method::SpanFeasibility => "span-feasibility".into(),
            Method::EndoCharacterization => "endomorphism-characterization".into(),
            Method::GroupCriterion => "group-criterion".into(),
        },
        detail: v.detail.clone(),
        witness: v.witness.as_ref().map(|w| witness_rep(f, w)),
    }
}

/// Deterministic text rendering; a function of the report value only.
pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let mut push = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push(format!("command: {}", r.command));
    push(format!("field: {}", r.field));
    match &r.body {
        ReportBody::Depth(d) => {
            push(format!("pair: |G| = {}, |H| = {}", d.group_order, d.subgroup_order));
            for lv in &d.levels {
                push(format!("  n = {}: right {} / left {}", lv.n, lv.right.outcome, lv.left.outcome));
            }
            match d.depth {
                Some(n) => push(format!("depth = {n}")),
                None => push(format!("depth > {} at this cap", d.n_max)),
            }
        }
        ReportBody::Tower(t) => {
            push(format!(
                "orders: |G| = {}, |H| = {}, |K| = {}",
                t.orders.0, t.orders.1, t.orders.2
            ));
            push(format!("normal closure of K lies in H: {}", t.normal_closure_in_h));
            match &t.coset_witness {
                Some(w) => push(format!("double-coset quasibases: verified, {} pairs", w.n)),
                None => push("double-coset quasibases: not applicable".into()),
            }
            push(format!("solver right: {} ({})", t.right.outcome, t.right.method));
            push(format!("solver left:  {} ({})", t.left.outcome, t.left.method));
        }
        ReportBody::Structures(s) => {
            push(format!(
                "orders: |G| = {}, |H| = {}, |K| = {}",
                s.orders.0, s.orders.1, s.orders.2
            ));
            push("dimensions:".into());
            for (name, d) in &s.dims {
                push(format!("  {name:9} {d}"));
            }
            push("audits:".into());
            for (name, ok) in &s.audits {
                push(format!("  [{}] {}", if *ok { "pass" } else { "FAIL" }, name));
            }
        }
        ReportBody::FixGal(fg) => {
            push(format!("extension: F{} in F{}^{}", fg.p, fg.p, fg.n));
            push(format!("intermediate fields: {} (one per divisor)", fg.divisor_count));
            for e in &fg.entries {
                push(format!(
                    "  d = {}: subfield dim {}, endomorphism ring dim {} (expect {}), fix round-trip {}, gal round-trip {}, contains left multiplications {}",
                    e.divisor,
                    e.subfield_dim,
                    e.gal_dim,
                    e.expected_gal_dim,
                    e.fix_of_gal_is_subfield,
                    e.gal_of_fix_is_gal,
                    e.contains_left_multiplications
                ));
            }
            push(format!("all round-trips pass: {}", fg.all_pass));
        }
        ReportBody::Catalog(c) => {
            for cr in &c.criteria {
                push(format!(
                    "criterion {}: {} [{}] {} ({} ms)",
                    cr.id,
                    cr.label,
                    if cr.pass { "PASS" } else { "FAIL" },
                    cr.detail,
                    cr.millis
                ));
            }
            let all = c.criteria.iter().all(|cr| cr.pass);
            push(format!("overall: {}", if all { "PASS" } else { "FAIL" }));
        }
    }
    push(format!("elapsed: {} ms", r.elapsed_ms));
    out
}

// ---------------------------------------------------------------------------
// input format
// ---------------------------------------------------------------------------

/// A parsed group file: an optional `field:` header, then blank-line
/// separated blocks of permutations in 1-based disjoint-cycle notation.
pub struct GroupFile {
    pub field: Option<FieldSpec>,
    pub blocks: Vec<PermGroup>,
}

pub fn parse_group_file(text: &str, caps: &Caps) -> Result<GroupFile> {
    let mut field = None;
    let mut raw_blocks: Vec<Vec<(usize, String)>> = vec![Vec::new()];
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if !raw_blocks.last().unwrap().is_empty() {
                raw_blocks.push(Vec::new());
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("field:") {
            if field.is_some() {
                return Err(Error::Parse { line: line_no, msg: "duplicate field header".into() });
            }
            field = Some(FieldSpec::parse(rest)?);
            continue;
        }
        raw_blocks.last_mut().unwrap().push((line_no, trimmed.to_string()));
    }
    raw_blocks.retain(|b| !b.is_empty());
    if raw_blocks.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no permutation blocks found".into() });
    }
    // common degree = largest point anywhere
    let mut degree = 1;
    for block in &raw_blocks {
        for (line_no, s) in block {
            let p = parse_perm(s, 1, *line_no)?;
            degree = degree.max(p.degree());
        }
    }
    let mut blocks = Vec::with_capacity(raw_blocks.len());
    for block in &raw_blocks {
        let mut gens: Vec<Perm> = Vec::new();
        for (line_no, s) in block {
            gens.push(parse_perm(s, degree, *line_no)?.extend_to(degree));
        }
        blocks.push(PermGroup::closure(degree, &gens, caps.max_group_order)?);
    }
    Ok(GroupFile { field, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_two_block_file() {
        let caps = Caps::default();
        let text = "field: Q\n# the full symmetric group\n(1 2 3)\n(1 2)\n\n(1 2)\n";
        let gf = parse_group_file(text, &caps).unwrap();
        assert_eq!(gf.field, Some(FieldSpec::Rationals));
        assert_eq!(gf.blocks.len(), 2);
        assert_eq!(gf.blocks[0].order(), 6);
        assert_eq!(gf.blocks[1].order(), 2);
    }

    #[test]
    fn parse_errors_are_positioned() {
        let caps = Caps::default();
        let bad = "(1 2 3)\n(0 4)\n";
        match parse_group_file(bad, &caps) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn identity_block() {
        let caps = Caps::default();
        let text = "(1 2 3)\n\n()\n";
        let gf = parse_group_file(text, &caps).unwrap();
        assert_eq!(gf.blocks[1].order(), 1);
        assert_eq!(gf.blocks[1].degree(), 3);
    }

    #[test]
    fn json_round_trip_and_text_regeneration() {
        let r = Report {
            schema_version: SCHEMA_VERSION,
            command: "depth".into(),
            field: "Q".into(),
            seed: 0,
            elapsed_ms: 5,
            truncated: false,
            body: ReportBody::Depth(DepthBody {
                group_order: 6,
                subgroup_order: 2,
                n_max: 4,
                depth: Some(3),
                levels: vec![],
            }),
        };
        let json = r.to_json();
        let back = Report::from_json(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(render_text(&back), render_text(&r));
    }
}
