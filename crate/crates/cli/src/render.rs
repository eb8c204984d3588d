//! Text renderings of a taxonomy: nested markdown bullets and graphviz dot.

use std::fmt::Write;

use taxo_core::metrics::canonicalize;
use taxo_core::taxonomy::TaxonomyNode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Md,
    Dot,
}

pub fn render(root: &TaxonomyNode, format: Format) -> String {
    let root = canonicalize(root);
    match format {
        Format::Md => markdown(&root),
        Format::Dot => dot(&root),
    }
}

fn markdown(root: &TaxonomyNode) -> String {
    let mut out = String::new();
    root.visit(&mut |n, depth| {
        let count = n.subtree_papers().len();
        let _ = write!(out, "{}- {} ({count} papers", "  ".repeat(depth), n.title);
        if let Some(s) = n.score {
            let _ = write!(out, ", score {s}");
        }
        out.push_str(")\n");
    });
    out
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for ch in s.chars() {
        match ch {
            '"' | '\\' => {
                q.push('\\');
                q.push(ch);
            }
            '\n' => q.push_str("\\n"),
            _ => q.push(ch),
        }
    }
    q.push('"');
    q
}

fn dot(root: &TaxonomyNode) -> String {
    let mut out = String::from("digraph taxonomy {\n  node [shape=box];\n");
    let mut edges = String::new();
    let mut next = 0usize;
    fn go(n: &TaxonomyNode, next: &mut usize, out: &mut String, edges: &mut String) -> usize {
        let me = *next;
        *next += 1;
        let label = format!("{}\n({})", n.title, n.subtree_papers().len());
        let _ = writeln!(out, "  n{me} [label={}];", quote(&label));
        for c in &n.children {
            let id = go(c, next, out, edges);
            let _ = writeln!(edges, "  n{me} -> n{id};");
        }
        me
    }
    go(root, &mut next, &mut out, &mut edges);
    out.push_str(&edges);
    out.push_str("}\n");
    out
}
