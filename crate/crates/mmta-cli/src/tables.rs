//! CSV tables. Every table opens with a `# manifest: <hash>` comment line
//! followed by a header row.

use std::path::Path;

use anyhow::Result;

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    manifest: String,
}

impl Table {
    pub fn new(manifest: &str, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table {
            writer,
            manifest: manifest.to_string(),
        })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_string(self) -> Result<String> {
        let body = String::from_utf8(self.writer.into_inner()?)?;
        Ok(format!("# manifest: {}\n{body}", self.manifest))
    }

    pub fn save(self, path: &Path) -> Result<()> {
        std::fs::write(path, self.into_string()?)?;
        Ok(())
    }
}

/// Formats a number for a table, printing integral values without a
/// fractional part and clearing negative zero.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_then_header() {
        let mut t = Table::new("abc", &["a", "b"]).unwrap();
        t.row(["1", "x,y"]).unwrap();
        assert_eq!(t.into_string().unwrap(), "# manifest: abc\na,b\n1,\"x,y\"\n");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(3.0), "3");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
