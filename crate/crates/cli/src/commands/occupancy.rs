//! Voxel-occupancy fractions of a point cloud at one or more resolutions,
//! as single-line CSV rows.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use surfconv_core::eval::{occupancy, OccupancyReport};
use surfconv_core::geom::{Cuboid, Point3, PointCloud};
use surfconv_core::io;

use crate::config::Config;

#[derive(Args)]
pub struct OccupancyArgs {
    /// Point cloud (.ply).
    #[arg(long, value_name = "FILE")]
    cloud: PathBuf,
    /// Voxel edge lengths in meters.
    #[arg(long, value_delimiter = ',', default_value = "0.02")]
    resolutions: Vec<f64>,
    /// Grid bounds x0,y0,z0,x1,y1,z1; defaults to the cloud extents.
    #[arg(long, value_delimiter = ',', num_args = 6)]
    bounds: Option<Vec<f64>>,
}

pub fn run(args: &OccupancyArgs, _cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let cloud = super::at_path(io::read_ply(&args.cloud), &args.cloud)?;
    let bounds = match &args.bounds {
        Some(v) => Cuboid {
            min: Point3::new(v[0], v[1], v[2]),
            max: Point3::new(v[3], v[4], v[5]),
        },
        None => extents(&cloud)?,
    };
    let scene = args
        .cloud
        .file_stem()
        .context("cloud path has no file name")?
        .to_string_lossy()
        .into_owned();

    let mut csv = String::from(OccupancyReport::CSV_HEADER);
    csv.push('\n');
    println!("{}", OccupancyReport::CSV_HEADER);
    for &res in &args.resolutions {
        let report = occupancy(&cloud, res, &bounds)?;
        let row = report.csv_row(&scene);
        println!("{row}");
        csv.push_str(&row);
        csv.push('\n');
    }
    if let Some(path) = out {
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn extents(cloud: &PointCloud) -> Result<Cuboid> {
    if cloud.is_empty() {
        bail!("point cloud is empty");
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for (axis, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            min[axis] = min[axis].min(v);
            max[axis] = max[axis].max(v);
        }
    }
    Ok(Cuboid {
        min: Point3::new(min[0], min[1], min[2]),
        max: Point3::new(max[0], max[1], max[2]),
    })
}
