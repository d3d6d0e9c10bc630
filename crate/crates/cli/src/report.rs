//! Static HTML rendering of a prediction result. The output is one
//! self-contained file with inline CSS and no scripts.

use std::fmt::Write as _;

use targetscope::datastore::{PredictionRecord, ResultDocument};

const STYLE: &str = "body{font-family:sans-serif;margin:2em;color:#222}\
table{border-collapse:collapse;margin:1em 0}\
th,td{border:1px solid #ccc;padding:4px 8px;text-align:left}\
th{background:#f0f0f0}\
td.num{text-align:right;font-variant-numeric:tabular-nums}\
code{font-size:90%;word-break:break-all}\
details{margin:0.5em 0;border:1px solid #ddd;padding:0.5em}\
summary{cursor:pointer;font-weight:bold}\
p.empty{padding:1em;background:#fff6e0;border:1px solid #e0c080}";

/// Escapes text for element content and double-quoted attributes.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Probability as a percentage with one decimal. Monotone in `p`, so a
/// non-increasing probability column stays non-increasing once rendered.
pub fn percent(p: f64) -> String {
    format!("{:.1}%", p * 100.0)
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn evidence_tags(r: &PredictionRecord) -> String {
    let mut tags = Vec::new();
    if r.cumulative_hit {
        tags.push("cumulative");
    }
    if r.via_association {
        tags.push("association");
    }
    if r.max_sim_compound.is_some() && !r.cumulative_hit && !r.via_association {
        tags.push("max-similarity");
    }
    tags.join(", ")
}

pub fn render(doc: &ResultDocument) -> String {
    let mut h = String::new();
    let title = format!("Target predictions for {}", doc.query);
    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n",
        escape(&title)
    );
    let _ = writeln!(h, "<h1>{}</h1>", escape(&title));
    let _ = writeln!(
        h,
        "<p>Canonical query: <code>{}</code><br>Candidates screened: {}<br>Database digest: <code>{}</code></p>",
        escape(&doc.canonical_query),
        doc.candidate_count,
        escape(&doc.manifest_digest)
    );

    if doc.predictions.is_empty() {
        h.push_str("<p class=\"empty\">No candidates: no target passed the similarity screens for this query.</p>\n");
        h.push_str("</body>\n</html>\n");
        return h;
    }

    h.push_str("<h2>Ranked targets</h2>\n<table id=\"ranking\">\n<thead><tr><th>Rank</th><th>Target</th><th>Name</th><th>Organism</th><th>Probability</th><th>Max Tc</th><th>E-value</th><th>Evidence</th></tr></thead>\n<tbody>\n");
    for r in &doc.predictions {
        let _ = writeln!(
            h,
            "<tr><td class=\"num\">{}</td><td><a href=\"#t-{}\">{}</a></td><td>{}</td><td>{}</td><td class=\"num\">{}</td><td class=\"num\">{:.3}</td><td class=\"num\">{}</td><td>{}</td></tr>",
            r.rank,
            escape(&r.target_id),
            escape(&r.target_id),
            escape(&r.name),
            escape(&r.organism),
            percent(r.probability),
            r.max_sim,
            sci(r.e),
            escape(&evidence_tags(r)),
        );
    }
    h.push_str("</tbody>\n</table>\n<h2>Evidence</h2>\n");

    for r in &doc.predictions {
        evidence_block(&mut h, r);
    }
    h.push_str("</body>\n</html>\n");
    h
}

fn evidence_block(h: &mut String, r: &PredictionRecord) {
    let _ = writeln!(
        h,
        "<details id=\"t-{}\">\n<summary>#{} {} ({}), {}</summary>",
        escape(&r.target_id),
        r.rank,
        escape(&r.target_id),
        escape(&r.name),
        percent(r.probability)
    );
    h.push_str("<table>\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(h, "<tr><th>{}</th><td>{}</td></tr>", escape(k), v);
    };
    row("Subset", r.subset.to_string());
    row("Z-score", format!("{:.3}", r.z));
    row("P-value", sci(r.p));
    row("E-value", sci(r.e));
    row("Cumulative hit", if r.cumulative_hit { "yes".into() } else { "no".into() });
    let nearest = match &r.max_sim_compound {
        Some(c) => format!("{:.3} (<code>{}</code>)", r.max_sim, escape(c)),
        None => format!("{:.3}", r.max_sim),
    };
    row("Max similarity", nearest);
    if r.via_association {
        let parent = r.association_parent.as_deref().unwrap_or("");
        let e = r.parent_e.map(sci).unwrap_or_default();
        row("Associated via", format!("{} (E = {})", escape(parent), e));
    }
    let a = &r.affinity;
    row("Predicted affinity", format!("{:.2}", a.query_affinity));
    row("Mean affinity of actives", format!("{:.2}", a.positive_mean));
    row("Mean affinity of background", format!("{:.2}", a.background_mean));
    row("Best pocket", escape(&a.best_pocket.pocket_id));
    h.push_str("</table>\n");

    if r.similar_actives.is_empty() {
        h.push_str("<p>No similar actives recorded.</p>\n");
    } else {
        h.push_str("<table>\n<thead><tr><th>Active</th><th>Structure</th><th>Tc</th></tr></thead>\n<tbody>\n");
        for s in &r.similar_actives {
            let _ = writeln!(
                h,
                "<tr><td>{}</td><td><code>{}</code></td><td class=\"num\">{:.3}</td></tr>",
                escape(&s.compound_id),
                escape(&s.smiles),
                s.similarity
            );
        }
        h.push_str("</tbody>\n</table>\n");
    }
    h.push_str("</details>\n");
}
