//! Energy trace export.

use std::fs;
use std::io;
use std::path::Path;

use pcn_core::EnergyTrace;

/// Writes `trace` as CSV with header `epoch,batch,step,phase,energy`.
pub fn write_csv(trace: &EnergyTrace, path: &Path) -> io::Result<()> {
    fs::write(path, trace.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcn_core::Phase;

    #[test]
    fn writes_header_and_rows() {
        let mut trace = EnergyTrace::new();
        trace.record(0, 0, 0, Phase::Infer, 2.0).unwrap();
        trace.record(0, 0, 1, Phase::Learn, 1.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_csv(&trace, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "epoch,batch,step,phase,energy");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,0,infer,"));
        assert!(lines[2].starts_with("0,0,1,learn,"));
    }
}
