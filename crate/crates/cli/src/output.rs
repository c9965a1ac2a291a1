use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gridform_core::simulator::Trajectory;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const TRAJECTORY_HEADER: [&str; 8] = ["t", "node", "theta", "omega", "vm", "p", "q", "vdc"];

/// Resolves an output file name against the output directory.
pub fn resolve(out_dir: &Path, configured: Option<&str>, default: &str) -> PathBuf {
    let name = Path::new(configured.unwrap_or(default));
    if name.is_absolute() {
        name.to_path_buf()
    } else {
        out_dir.join(name)
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| fail(&e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Trajectory as CSV, one row per (sample, node).
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let err = |e: csv::Error| CliError::Output(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER).map_err(err)?;
    for (i, states) in traj.states.iter().enumerate() {
        let t = traj.times[i].to_string();
        for (node, s) in states.iter().enumerate() {
            w.write_record([
                t.clone(),
                node.to_string(),
                s.theta.to_string(),
                s.omega.to_string(),
                s.vm.to_string(),
                traj.flows[i].p[node].to_string(),
                traj.flows[i].q[node].to_string(),
                s.v_dc.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridform_core::controllers::NodeState;
    use gridform_core::network::PowerFlows;

    #[test]
    fn csv_leaves_vdc_blank_without_dc_link() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![
                vec![
                    NodeState::reduced(0.0, 0.0, 1.0),
                    NodeState {
                        v_dc: Some(1.0),
                        ..NodeState::reduced(0.0, 0.0, 1.0)
                    },
                ];
                2
            ],
            flows: vec![
                PowerFlows {
                    p: vec![0.0, 0.0],
                    q: vec![0.0, 0.0],
                };
                2
            ],
        };
        let text = String::from_utf8(trajectory_csv(&traj).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,node,theta,omega,vm,p,q,vdc");
        assert_eq!(lines[1], "0,0,0,0,1,0,0,");
        assert_eq!(lines[2], "0,1,0,0,1,0,0,1");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn relative_names_join_output_dir() {
        let out = Path::new("/tmp/run");
        assert_eq!(resolve(out, None, "a.csv"), PathBuf::from("/tmp/run/a.csv"));
        assert_eq!(resolve(out, Some("/abs/b.csv"), "a.csv"), PathBuf::from("/abs/b.csv"));
    }
}
