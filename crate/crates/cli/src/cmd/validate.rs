use std::path::{Path, PathBuf};

use assembly_core::item::FurnitureItem;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{print_json, usage, Ctx};

#[derive(clap::Args)]
pub struct Args {
    /// Item files, or directories holding `*.json` items and `*/item.json`.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

#[derive(Serialize)]
struct FileReport {
    path: String,
    valid: bool,
    issues: Vec<String>,
}

#[derive(Serialize)]
struct Report {
    files: Vec<FileReport>,
    valid: usize,
    total: usize,
}

/// Item files directly in `dir` plus `item.json` in any subdirectory,
/// sorted by path.
pub fn item_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fn walk(dir: &Path, top: bool, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(&p, false, out)?;
            } else if p.extension().is_some_and(|e| e == "json")
                && (top || p.file_name().is_some_and(|n| n == "item.json"))
            {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, true, &mut out).map_err(|e| usage(format!("cannot list {}: {e}", dir.display())))?;
    out.sort();
    Ok(out)
}

fn check(path: &Path) -> FileReport {
    let issues = match FurnitureItem::load(path) {
        Ok(item) => item.check().into_iter().map(|i| i.message).collect(),
        Err(e) => vec![e.to_string()],
    };
    FileReport {
        path: path.display().to_string(),
        valid: issues.is_empty(),
        issues,
    }
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<u8> {
    let mut files = Vec::new();
    for p in &args.paths {
        if p.is_dir() {
            files.extend(item_files(p)?);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(usage(format!("{} does not exist", p.display())));
        }
    }
    let reports: Vec<FileReport> = files.par_iter().map(|p| check(p)).collect();
    let valid = reports.iter().filter(|r| r.valid).count();
    let report = Report {
        total: reports.len(),
        valid,
        files: reports,
    };
    if ctx.json {
        print_json(&report);
    } else {
        for f in &report.files {
            if f.valid {
                println!("ok       {}", f.path);
            } else {
                println!("invalid  {} ({} issues)", f.path, f.issues.len());
                for i in &f.issues {
                    println!("         - {i}");
                }
            }
        }
        println!("{}/{} valid", report.valid, report.total);
    }
    Ok(if report.valid == report.total { 0 } else { 1 })
}
