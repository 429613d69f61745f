//! CSV point clouds (`frame_id,x,y,z,rcs,v`) and box annotations
//! (`frame_id,cx,cy,cz,l,w,h,yaw`). The header row is mandatory.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BoxAnnotation, PointCloud, RadarPoint};

const POINT_HEADER: [&str; 6] = ["frame_id", "x", "y", "z", "rcs", "v"];
const BOX_HEADER: [&str; 8] = ["frame_id", "cx", "cy", "cz", "l", "w", "h", "yaw"];

#[derive(Serialize, Deserialize)]
struct PointRow {
    frame_id: String,
    x: f64,
    y: f64,
    z: f64,
    rcs: f64,
    v: f64,
}

#[derive(Serialize, Deserialize)]
struct BoxRow {
    frame_id: String,
    cx: f64,
    cy: f64,
    cz: f64,
    l: f64,
    w: f64,
    h: f64,
    yaw: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::format("csv", e.to_string())
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::format(
            "csv",
            format!("expected header {:?}, found {:?}", expected, header),
        ));
    }
    Ok(())
}

/// Reads every frame in the file, in order of first appearance.
pub fn read_clouds_from<R: Read>(reader: R) -> Result<Vec<PointCloud>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&mut rdr, &POINT_HEADER)?;
    let mut clouds: Vec<PointCloud> = Vec::new();
    for row in rdr.deserialize::<PointRow>() {
        let row = row.map_err(csv_err)?;
        let p = RadarPoint::new(row.x, row.y, row.z, row.rcs, row.v);
        if !p.is_finite() {
            return Err(Error::NonFinite("csv point"));
        }
        match clouds.iter_mut().find(|c| c.frame_id == row.frame_id) {
            Some(c) => c.points.push(p),
            None => clouds.push(PointCloud::new(row.frame_id, vec![p])),
        }
    }
    Ok(clouds)
}

pub fn read_clouds(path: impl AsRef<Path>) -> Result<Vec<PointCloud>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_clouds_from(std::io::BufReader::new(file))
}

/// Reads a single-frame file. A header-only file yields an empty cloud.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let mut clouds = read_clouds(path)?;
    match clouds.len() {
        0 => Ok(PointCloud::default()),
        1 => Ok(clouds.remove(0)),
        n => Err(Error::format("csv", format!("expected one frame, found {n}"))),
    }
}

pub fn write_clouds_to<W: Write>(writer: W, clouds: &[&PointCloud]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(POINT_HEADER).map_err(csv_err)?;
    for cloud in clouds {
        for p in &cloud.points {
            wtr.serialize(PointRow {
                frame_id: cloud.frame_id.clone(),
                x: p.x,
                y: p.y,
                z: p.z,
                rcs: p.rcs,
                v: p.v,
            })
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::format("csv", e.to_string()))
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_clouds_to(std::io::BufWriter::new(file), &[cloud])
}

pub fn read_boxes_from<R: Read>(reader: R) -> Result<Vec<(String, BoxAnnotation)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&mut rdr, &BOX_HEADER)?;
    rdr.deserialize::<BoxRow>()
        .map(|row| {
            let r = row.map_err(csv_err)?;
            Ok((
                r.frame_id,
                BoxAnnotation::new([r.cx, r.cy, r.cz], [r.l, r.w, r.h], r.yaw)?,
            ))
        })
        .collect()
}

pub fn read_boxes(path: impl AsRef<Path>) -> Result<Vec<(String, BoxAnnotation)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_boxes_from(std::io::BufReader::new(file))
}

pub fn write_boxes_to<W: Write>(writer: W, frame_id: &str, boxes: &[BoxAnnotation]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(BOX_HEADER).map_err(csv_err)?;
    for b in boxes {
        wtr.serialize(BoxRow {
            frame_id: frame_id.to_string(),
            cx: b.center[0],
            cy: b.center[1],
            cz: b.center[2],
            l: b.size[0],
            w: b.size[1],
            h: b.size[2],
            yaw: b.yaw,
        })
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::format("csv", e.to_string()))
}

pub fn write_boxes(path: impl AsRef<Path>, frame_id: &str, boxes: &[BoxAnnotation]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_boxes_to(std::io::BufWriter::new(file), frame_id, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_mandatory() {
        let body = "a,1,2,3,4,5\n";
        assert!(read_clouds_from(body.as_bytes()).is_err());
    }

    #[test]
    fn frames_grouped_in_order() {
        let text = "frame_id,x,y,z,rcs,v\nb,1,0,0,1,0\na,2,0,0,1,0\nb,3,0,0,1,0\n";
        let clouds = read_clouds_from(text.as_bytes()).unwrap();
        assert_eq!(clouds.len(), 2);
        assert_eq!(clouds[0].frame_id, "b");
        assert_eq!(clouds[0].points[1].x, 3.0);
    }

    #[test]
    fn exact_float_roundtrip() {
        let cloud = PointCloud::new(
            "f",
            vec![RadarPoint::new(0.1 + 0.2, -1e-300, 51.2, 1.0 / 3.0, -7.25)],
        );
        let mut buf = Vec::new();
        write_clouds_to(&mut buf, &[&cloud]).unwrap();
        assert!(buf.starts_with(b"frame_id,x,y,z,rcs,v\n"));
        let back = read_clouds_from(buf.as_slice()).unwrap();
        assert_eq!(back[0], cloud);
    }

    #[test]
    fn boxes_roundtrip() {
        let b = BoxAnnotation::new([1.0, 2.0, 0.0], [4.0, 4.0, 2.0], 0.3).unwrap();
        let mut buf = Vec::new();
        write_boxes_to(&mut buf, "f", &[b]).unwrap();
        let back = read_boxes_from(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("f".to_string(), b)]);
    }
}
