//! Run records: one row per completed episode, written as CSV and JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Fixed CSV column order.
pub const CSV_HEADER: [&str; 15] = [
    "episode",
    "e",
    "p_exp",
    "ig",
    "map_id",
    "map_space",
    "benign",
    "v_star_map",
    "v_star_mu",
    "v_mentor_mu",
    "w_mu",
    "w_pih",
    "z",
    "tv_mentor",
    "tv_star",
];

/// Everything logged about episode `i`. Quantities other than the realized
/// steps are computed at the boundary before the episode, from `h_{<i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub e: bool,
    pub p_exp: f64,
    pub ig: f64,
    pub ig_models: f64,
    pub ig_policies: f64,
    pub map_index: usize,
    pub map_id: String,
    pub map_space: Option<f64>,
    pub benign: bool,
    pub v_star_map: f64,
    pub v_mentor_map: f64,
    pub v_star_mu: f64,
    pub v_mentor_mu: f64,
    pub w_mu: f64,
    pub w_pih: f64,
    pub z: f64,
    /// `E[z_{i+1} | h_{<i}, e_{<i}]` by exact enumeration.
    pub z_next: Option<f64>,
    /// Largest relative gap between the incremental joint posterior and the
    /// closed form recomputed from the priors.
    pub lemma1_rel_err: Option<f64>,
    /// Total variation over the next `K` episodes.
    pub tv_mentor: f64,
    pub tv_star: f64,
    /// Largest single-block probability gap over the next episode.
    pub gap_mentor: f64,
    pub gap_star: f64,
    /// Rendered steps of the episode, `(action, observation, reward)`.
    pub steps: Vec<String>,
    pub episode_reward: f64,
}

impl EpisodeRow {
    pub fn eq20_holds(&self, slack: f64) -> bool {
        self.v_star_map >= self.v_mentor_map - slack
    }
}

/// The CSV projection of a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub episode: usize,
    pub e: u8,
    pub p_exp: f64,
    pub ig: f64,
    pub map_id: String,
    pub map_space: Option<f64>,
    pub benign: u8,
    pub v_star_map: f64,
    pub v_star_mu: f64,
    pub v_mentor_mu: f64,
    pub w_mu: f64,
    pub w_pih: f64,
    pub z: f64,
    pub tv_mentor: f64,
    pub tv_star: f64,
}

impl From<&EpisodeRow> for CsvRow {
    fn from(r: &EpisodeRow) -> CsvRow {
        CsvRow {
            episode: r.episode,
            e: u8::from(r.e),
            p_exp: r.p_exp,
            ig: r.ig,
            map_id: r.map_id.clone(),
            map_space: r.map_space,
            benign: u8::from(r.benign),
            v_star_map: r.v_star_map,
            v_star_mu: r.v_star_mu,
            v_mentor_mu: r.v_mentor_mu,
            w_mu: r.w_mu,
            w_pih: r.w_pih,
            z: r.z,
            tv_mentor: r.tv_mentor,
            tv_star: r.tv_star,
        }
    }
}

/// An episode abandoned mid-way by a disconnecting console.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortedEpisode {
    pub episode: usize,
    pub steps_taken: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: String,
    pub seed: u64,
    pub beta: Option<f64>,
    pub hack_equal_space: bool,
    pub models: Vec<String>,
    pub policies: Vec<String>,
    pub mu: usize,
    pub mentor: usize,
    pub benign: Vec<bool>,
    pub theorem1_bound: f64,
    pub prior_tail_mass: f64,
    pub thresholds: crate::config::Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub rows: Vec<EpisodeRow>,
    #[serde(default)]
    pub aborted: Vec<AbortedEpisode>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Meta(RunMeta),
    Row(EpisodeRow),
    Aborted(AbortedEpisode),
}

impl RunRecord {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_csv(&self.rows, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }

    pub fn to_jsonl_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("json is utf-8"))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &Line::Meta(self.meta.clone()))?;
        w.write_all(b"\n")?;
        for r in &self.rows {
            serde_json::to_writer(&mut w, &Line::Row(r.clone()))?;
            w.write_all(b"\n")?;
        }
        for a in &self.aborted {
            serde_json::to_writer(&mut w, &Line::Aborted(a.clone()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<RunRecord> {
        let mut meta = None;
        let mut rows = Vec::new();
        let mut aborted = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line)? {
                Line::Meta(m) if meta.is_none() => meta = Some(m),
                Line::Meta(_) => return Err(HarnessError::Record(format!("line {}: second meta line", k + 1))),
                Line::Row(row) => {
                    if row.episode != rows.len() {
                        return Err(HarnessError::Record(format!("line {}: rows out of order", k + 1)));
                    }
                    rows.push(row)
                }
                Line::Aborted(a) => aborted.push(a),
            }
        }
        let meta = meta.ok_or_else(|| HarnessError::Record("no meta line".into()))?;
        Ok(RunRecord { meta, rows, aborted })
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = BufWriter::new(File::create(dir.join(format!("{stem}.jsonl")))?);
        self.write_jsonl(&mut f)?;
        f.flush()?;
        let mut f = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
        write_csv(&self.rows, &mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunRecord> {
        RunRecord::read_jsonl(BufReader::new(File::open(path)?))
    }

    /// `Σ_i p_exp²` over all logged episodes.
    pub fn sum_p_exp_sq(&self) -> f64 {
        self.rows.iter().map(|r| r.p_exp * r.p_exp).sum()
    }
}

pub fn write_csv<W: Write>(rows: &[EpisodeRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.serialize(CsvRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Record(format!("unexpected CSV header {header:?}")));
    }
    Ok(rdr.deserialize().collect::<Result<Vec<CsvRow>, csv::Error>>()?)
}

/// Loads every `*.jsonl` record in a directory, or a single file, sorted by path.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    if path.is_file() {
        return Ok(vec![RunRecord::load(path)?]);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    files.iter().map(|p| RunRecord::load(p)).collect()
}
