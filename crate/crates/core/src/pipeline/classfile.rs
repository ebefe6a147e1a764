use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{Fragment, FragmentPair};
use crate::stage2::DiscoveredPair;

/// Writes each pair as its own two-member class:
///
/// ```text
/// Class 1
/// <file_id> <onset_s> <offset_s>
/// <file_id> <onset_s> <offset_s>
///
/// ```
pub fn write_class_file(path: impl AsRef<Path>, pairs: &[DiscoveredPair]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    for (i, p) in pairs.iter().enumerate() {
        writeln!(w, "Class {}", i + 1).map_err(io)?;
        writeln!(w, "{} {:.3} {:.3}", p.file_a, p.onset_a, p.offset_a).map_err(io)?;
        writeln!(w, "{} {:.3} {:.3}", p.file_b, p.onset_b, p.offset_b).map_err(io)?;
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Per-class log-domain LR and path length, tab separated.
pub fn write_lr_sidecar(path: impl AsRef<Path>, pairs: &[DiscoveredPair]) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "#class\tlr_score\tpath_length\tseg_a\tseg_b").map_err(io)?;
    for (i, p) in pairs.iter().enumerate() {
        writeln!(
            w,
            "{}\t{:.6}\t{}\t{}\t{}",
            i + 1,
            p.lr_score,
            p.path_length,
            p.source_candidate.seg_a,
            p.source_candidate.seg_b
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One member line of a class file with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub class: usize,
    pub line: usize,
    pub fragment: Fragment,
}

/// Parses a class file. Classes with more than two members expand into all
/// member pairs; the returned entries keep line numbers for diagnostics.
pub fn read_class_file(path: impl AsRef<Path>) -> Result<(Vec<FragmentPair>, Vec<ClassEntry>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: &str| Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason: reason.to_string(),
    };
    let mut classes: Vec<Vec<ClassEntry>> = Vec::new();
    let mut open = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            open = false;
            continue;
        }
        if let Some(rest) = line.strip_prefix("Class") {
            let class: usize = rest
                .trim()
                .parse()
                .map_err(|_| bad(lineno, "bad class number"))?;
            classes.push(Vec::new());
            open = true;
            let _ = class;
            continue;
        }
        if !open {
            return Err(bad(lineno, "fragment line outside a class block"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(lineno, "expected '<file_id> <onset> <offset>'"));
        }
        let onset: f64 = fields[1].parse().map_err(|_| bad(lineno, "bad onset"))?;
        let offset: f64 = fields[2].parse().map_err(|_| bad(lineno, "bad offset"))?;
        if !onset.is_finite() || !offset.is_finite() || offset <= onset {
            return Err(bad(lineno, "offset must exceed onset"));
        }
        let class = classes.len();
        classes.last_mut().expect("open class").push(ClassEntry {
            class,
            line: lineno,
            fragment: Fragment {
                file_id: fields[0].to_string(),
                onset,
                offset,
            },
        });
    }
    let mut pairs = Vec::new();
    for members in &classes {
        if members.len() < 2 {
            let line = members.first().map_or(0, |m| m.line);
            return Err(bad(line, "class needs at least two members"));
        }
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                pairs.push(FragmentPair {
                    a: members[i].fragment.clone(),
                    b: members[j].fragment.clone(),
                });
            }
        }
    }
    Ok((pairs, classes.into_iter().flatten().collect()))
}
