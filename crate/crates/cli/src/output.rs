//! Output files are built in memory and only touch the disk once every
//! computation has succeeded. Each file goes to a temporary sibling first and
//! is renamed into place, so readers never see a half-written file.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ndarray::Array3;
use serde::Serialize;

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).with_context(|| format!("serializing {name}"))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        let bytes = wtr.into_inner().with_context(|| format!("serializing {name}"))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Long-format forecast tensor: one row per (utility, industry, year).
    pub fn tensor_csv(
        &mut self,
        name: &str,
        utilities: &[String],
        industries: &[String],
        years: &[i32],
        values: &Array3<f64>,
    ) -> Result<()> {
        let rows = values.indexed_iter().map(|((i, j, k), v)| {
            [
                utilities[i].clone(),
                industries[j].clone(),
                years[k].to_string(),
                v.to_string(),
            ]
        });
        self.csv(name, &["utility", "industry", "year", "predicted"], rows)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, &bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
            fs::rename(&tmp, &target).with_context(|| format!("cannot move {} into place", target.display()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_every_file_and_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Artifacts::default();
        out.json("a.json", &vec![1.5, 2.0]).unwrap();
        out.csv("b.csv", &["x", "y"], [vec!["1".to_string(), "a,b".to_string()]])
            .unwrap();
        out.commit(dir.path()).unwrap();
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["a.json", "b.csv"]);
        assert_eq!(
            fs::read_to_string(dir.path().join("b.csv")).unwrap(),
            "x,y\n1,\"a,b\"\n"
        );
        assert_eq!(
            fs::read_to_string(dir.path().join("a.json")).unwrap(),
            "[\n  1.5,\n  2.0\n]\n"
        );
    }
}
