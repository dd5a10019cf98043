//! Plain-text CSV dumps: one row per node, coordinates then value.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::field::ScalarField;
use super::path::{DensityPath, TimeGrid};

/// Render a field as CSV. `header` lines are emitted as `# ` comments first.
pub fn field_csv(field: &ScalarField, header: &[String]) -> String {
    let g = field.grid();
    let mut s = String::new();
    for line in header {
        let _ = writeln!(s, "# {line}");
    }
    match g.dim() {
        1 => s.push_str("x,value\n"),
        _ => s.push_str("x,y,value\n"),
    }
    for (i, v) in field.values().iter().enumerate() {
        let x = g.coords(i);
        match g.dim() {
            1 => {
                let _ = writeln!(s, "{},{}", x[0], v);
            }
            _ => {
                let _ = writeln!(s, "{},{},{}", x[0], x[1], v);
            }
        }
    }
    s
}

pub fn write_field_csv(path: &Path, field: &ScalarField, header: &[String]) -> io::Result<()> {
    std::fs::write(path, field_csv(field, header))
}

/// Write one file per slice, `<prefix>_<index>.csv`, returning the paths.
pub fn write_density_path_csv(
    dir: &Path,
    prefix: &str,
    path: &DensityPath,
    header: &[String],
) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::with_capacity(path.slices.len());
    for (k, slice) in path.slices.iter().enumerate() {
        let mut h = header.to_vec();
        h.push(format!("t={}", path.time.node(k)));
        let file = dir.join(format!("{prefix}_{k:05}.csv"));
        write_field_csv(&file, slice.field(), &h)?;
        out.push(file);
    }
    Ok(out)
}

/// Space-time table `t,x[,y],value` of equally shaped slices.
pub fn slices_csv(time: &TimeGrid, slices: &[&ScalarField], header: &[String]) -> String {
    let mut s = String::new();
    for line in header {
        let _ = writeln!(s, "# {line}");
    }
    let Some(first) = slices.first() else {
        return s;
    };
    let g = first.grid();
    s.push_str(if g.dim() == 1 { "t,x,value\n" } else { "t,x,y,value\n" });
    for (k, f) in slices.iter().enumerate() {
        let t = time.node(k);
        for (i, v) in f.values().iter().enumerate() {
            let x = g.coords(i);
            let _ = match g.dim() {
                1 => writeln!(s, "{t},{},{v}", x[0]),
                _ => writeln!(s, "{t},{},{},{v}", x[0], x[1]),
            };
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn csv_layout() {
        let g = TorusGrid::new(1, 8).unwrap();
        let f = ScalarField::constant(g, 2.0);
        let s = field_csv(&f, &["config_hash=abc".into()]);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc");
        assert_eq!(lines[1], "x,value");
        assert_eq!(lines[2], "0,2");
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn space_time_layout() {
        let g = TorusGrid::new(1, 8).unwrap();
        let time = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let f = ScalarField::constant(g, 1.5);
        let s = slices_csv(&time, &[&f, &f, &f], &[]);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "t,x,value");
        assert_eq!(lines[9], "0.5,0,1.5");
        assert_eq!(lines.len(), 25);
    }
}
