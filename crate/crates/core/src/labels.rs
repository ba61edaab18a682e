//! Cluster assignment vectors and their text format.

use std::io::{BufRead, Write};

use crate::error::{arg_err, Error, Result};

/// Cluster labels for `n` nodes. Labels are stored 0-based (`0..k`); the text
/// format writes them 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return arg_err("number of clusters must be at least 1");
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return arg_err(format!("label {bad} out of range for k = {k}"));
        }
        Ok(Self { labels, k })
    }

    /// All nodes in cluster 0.
    pub fn constant(n: usize, k: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: k.max(1),
        }
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Relabels through `map`, i.e. `label -> map[label]`.
    pub fn relabel(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.k {
            return arg_err("relabel map must have k entries");
        }
        Self::new(self.labels.iter().map(|&l| map[l]).collect(), self.k)
    }
}

/// Writes one `labels <n> <k>` block per assignment.
pub fn write_assignments<W: Write>(assignments: &[ClusterAssignment], mut w: W) -> std::io::Result<()> {
    for a in assignments {
        writeln!(w, "labels {} {}", a.len(), a.k())?;
        let body: Vec<String> = a.labels.iter().map(|l| (l + 1).to_string()).collect();
        writeln!(w, "{}", body.join(" "))?;
    }
    Ok(())
}

/// Reads consecutive `labels` blocks until end of input.
pub fn read_assignments<R: BufRead>(r: R) -> Result<Vec<ClusterAssignment>> {
    let mut text = String::new();
    for line in r.lines() {
        text.push_str(&line.map_err(|e| Error::Parse(e.to_string()))?);
        text.push('\n');
    }
    let mut tokens = text.split_whitespace();
    let mut out = Vec::new();
    while let Some(tag) = tokens.next() {
        if tag != "labels" {
            return Err(Error::Parse(format!("expected `labels`, found `{tag}`")));
        }
        let mut num = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("missing or invalid {what}")))
        };
        let n = num("node count")?;
        let k = num("cluster count")?;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let l = num("label")?;
            if l == 0 || l > k {
                return Err(Error::Parse(format!("label {l} outside 1..={k}")));
            }
            labels.push(l - 1);
        }
        out.push(ClusterAssignment::new(labels, k)?);
    }
    Ok(out)
}
