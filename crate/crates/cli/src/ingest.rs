//! Episode CSV ingestion (`episode,s,a,s_next`).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use drmdp::estimation::{EpisodeLog, Transition};
use serde::Deserialize;

use crate::error::CliError;

const HEADER: [&str; 4] = ["episode", "s", "a", "s_next"];

#[derive(Debug, Deserialize)]
struct Row {
    episode: u64,
    s: usize,
    a: usize,
    s_next: usize,
}

/// Logs grouped by episode id in ascending order; row numbers in errors
/// count the header as row 1.
pub fn read_episodes<R: Read>(reader: R, num_states: usize, num_actions: usize) -> Result<Vec<EpisodeLog>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Input(format!("row 1: {e}")))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(CliError::Input(format!(
            "row 1: header must be `{}`, got `{}`",
            HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut episodes: BTreeMap<u64, Vec<Transition>> = BTreeMap::new();
    for (k, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = k + 2;
        let r = rec.map_err(|e| CliError::Input(format!("row {row}: malformed record: {e}")))?;
        for (name, value, bound) in [("s", r.s, num_states), ("a", r.a, num_actions), ("s_next", r.s_next, num_states)] {
            if value >= bound {
                return Err(CliError::Input(format!("row {row}: {name} = {value} out of range (must be < {bound})")));
            }
        }
        episodes.entry(r.episode).or_default().push(Transition::new(r.s, r.a, r.s_next));
    }
    Ok(episodes.into_iter().map(|(id, t)| EpisodeLog::new(id, t)).collect())
}

pub fn ingest_episodes(path: &Path, num_states: usize, num_actions: usize) -> Result<Vec<EpisodeLog>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_episodes(file, num_states, num_actions)
}

/// Parses `S,A` or `SxA`.
pub fn parse_dims(spec: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = spec.split([',', 'x', 'X']).map(str::trim).collect();
    match parts.as_slice() {
        [s, a] => match (s.parse::<usize>(), a.parse::<usize>()) {
            (Ok(s), Ok(a)) if s > 0 && a > 0 => Ok((s, a)),
            _ => Err(CliError::Input(format!("--dims `{spec}`: expected two positive integers"))),
        },
        _ => Err(CliError::Input(format!("--dims `{spec}`: expected `S,A`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_with_header() {
        let logs = read_episodes("episode,s,a,s_next\n".as_bytes(), 2, 2).unwrap();
        assert!(logs.is_empty());
    }

    #[test]
    fn groups_by_episode() {
        let csv = "episode,s,a,s_next\n0,0,1,1\n0,1,0,0\n1,1,1,1\n";
        let logs = read_episodes(csv.as_bytes(), 2, 2).unwrap();
        assert_eq!(logs.len(), 2);
        assert_eq!(logs[0].len(), 2);
        assert_eq!(logs[1].len(), 1);
    }

    #[test]
    fn rejects_out_of_range_state() {
        let csv = "episode,s,a,s_next\n0,0,0,1\n0,2,0,0\n";
        let err = read_episodes(csv.as_bytes(), 2, 2).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("s = 2") && err.contains("< 2"), "{err}");
    }

    #[test]
    fn rejects_malformed_rows_and_headers() {
        let err = read_episodes("episode,s,a,s_next\n0,x,0,1\n".as_bytes(), 2, 2).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(read_episodes("ep,s,a,t\n".as_bytes(), 2, 2).is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("3,2").unwrap(), (3, 2));
        assert_eq!(parse_dims("4x1").unwrap(), (4, 1));
        assert!(parse_dims("0,2").is_err());
        assert!(parse_dims("3").is_err());
    }
}
