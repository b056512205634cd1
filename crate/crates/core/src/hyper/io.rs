use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::points::MagicPointSet;

/// One row of the magic-point CSV `step,cell_index,score`. Forced boundary cells have an
/// empty score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicPointRow {
    pub step: usize,
    pub cell_index: usize,
    pub score: Option<f64>,
}

const HEADER: [&str; 3] = ["step", "cell_index", "score"];

impl MagicPointSet {
    /// CSV rows of this set tagged with the time step it was selected at.
    pub fn rows(&self, step: usize) -> Vec<MagicPointRow> {
        let forced = self.forced().iter().map(|&c| MagicPointRow {
            step,
            cell_index: c,
            score: None,
        });
        let selected = self.selected().iter().zip(self.scores()).map(|(&c, &s)| MagicPointRow {
            step,
            cell_index: c,
            score: Some(s),
        });
        forced.chain(selected).collect()
    }
}

pub fn write_magic_csv<W: Write>(w: W, rows: &[MagicPointRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_magic_csv<R: Read>(r: R) -> Result<Vec<MagicPointRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Format(format!("unexpected magic-point header {:?}", header)));
    }
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}
