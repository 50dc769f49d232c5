use std::collections::BTreeMap;
use std::fmt::Write;

use crate::b0::pretty::expr_to_string;

use super::{witness_text, ExportError, ProofObligation, ProofResult, ProofStatus};

/// Serialises obligations with their results. Output depends only on the
/// arguments, byte for byte.
pub fn export_pos(model: &str, pos: &[ProofObligation], results: &[ProofResult]) -> Result<String, ExportError> {
    let by_id: BTreeMap<u32, &ProofResult> = results.iter().map(|r| (r.po_id, r)).collect();
    let missing: Vec<u32> = pos.iter().map(|p| p.id).filter(|id| !by_id.contains_key(id)).collect();
    let unexpected: Vec<u32> = by_id.keys().copied().filter(|id| !pos.iter().any(|p| p.id == *id)).collect();
    if !missing.is_empty() || !unexpected.is_empty() || by_id.len() != results.len() {
        return Err(ExportError::MismatchedIds { missing, unexpected });
    }

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if pos.is_empty() {
        let _ = writeln!(out, "<pos model=\"{}\"/>", escape(model));
        return Ok(out);
    }
    let _ = writeln!(out, "<pos model=\"{}\">", escape(model));
    for po in pos {
        let status = &by_id[&po.id].status;
        let status_attr = match status {
            ProofStatus::ProvedInterval | ProofStatus::ProvedEnum => "proved",
            ProofStatus::Unproven => "unproved",
            ProofStatus::Counterexample(_) => "counterexample",
        };
        let _ = writeln!(
            out,
            "  <po id=\"{}\" kind=\"{}\" loc=\"{}\" status=\"{status_attr}\">",
            po.id,
            po.kind.name(),
            po.loc
        );
        for h in &po.hypotheses {
            let _ = writeln!(out, "    <hyp>{}</hyp>", escape(&expr_to_string(h)));
        }
        let _ = writeln!(out, "    <goal>{}</goal>", escape(&expr_to_string(&po.goal)));
        if let ProofStatus::Counterexample(w) = status {
            let _ = writeln!(out, "    <witness>{}</witness>", escape(&witness_text(w)));
        }
        out.push_str("  </po>\n");
    }
    out.push_str("</pos>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}
