//! Y4M streams written by an independent encoder decode to their luma planes.

use std::fs::File;
use std::path::Path;

use apnea_core::frame_io::{Fps, FrameSource, InputFormat, SourceOptions};

fn luma_planes(w: usize, h: usize, n: usize) -> Vec<Vec<u8>> {
    (0..n)
        .map(|k| (0..w * h).map(|i| ((i * 7 + k * 31) % 256) as u8).collect())
        .collect()
}

fn write_y4m(path: &Path, w: usize, h: usize, cs: y4m::Colorspace, planes: &[Vec<u8>]) {
    let file = File::create(path).unwrap();
    let mut enc = y4m::encode(w, h, y4m::Ratio::new(25, 1))
        .with_colorspace(cs)
        .write_header(file)
        .unwrap();
    let chroma = match cs {
        y4m::Colorspace::Cmono => 0,
        _ => w.div_ceil(2) * h.div_ceil(2),
    };
    let u = vec![17u8; chroma];
    let v = vec![230u8; chroma];
    for y in planes {
        enc.write_frame(&y4m::Frame::new([y, &u, &v], None))
            .unwrap();
    }
}

fn read_all(path: &Path, opts: &SourceOptions) -> (usize, usize, Fps, Vec<Vec<u8>>) {
    let src = FrameSource::open(path, InputFormat::Y4m, opts).unwrap();
    let (w, h, fps) = (src.width(), src.height(), src.fps());
    let frames = src.map(|f| f.unwrap().into_pixels()).collect();
    (w, h, fps, frames)
}

#[test]
fn reads_420_luma_with_odd_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.y4m");
    let planes = luma_planes(7, 5, 4);
    write_y4m(&path, 7, 5, y4m::Colorspace::C420jpeg, &planes);
    let (w, h, fps, frames) = read_all(&path, &SourceOptions::default());
    assert_eq!((w, h), (7, 5));
    assert_eq!(fps, Fps::integer(25).unwrap());
    assert_eq!(frames, planes);
}

#[test]
fn reads_mono_and_honours_fps_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mono.y4m");
    let planes = luma_planes(8, 6, 3);
    write_y4m(&path, 8, 6, y4m::Colorspace::Cmono, &planes);
    let opts = SourceOptions {
        fps: Some(Fps::integer(12).unwrap()),
        ..Default::default()
    };
    let (_, _, fps, frames) = read_all(&path, &opts);
    assert_eq!(fps, Fps::integer(12).unwrap());
    assert_eq!(frames, planes);
}

#[test]
fn frames_carry_index_and_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.y4m");
    write_y4m(&path, 6, 6, y4m::Colorspace::C420, &luma_planes(6, 6, 5));
    let src = FrameSource::open(&path, InputFormat::Y4m, &SourceOptions::default()).unwrap();
    for (i, f) in src.enumerate() {
        let f = f.unwrap();
        assert_eq!(f.frame_index(), i as u64);
        assert!((f.timestamp_ms() - 40.0 * i as f64).abs() < 1e-9);
    }
}

#[test]
fn truncated_stream_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.y4m");
    write_y4m(&path, 6, 6, y4m::Colorspace::Cmono, &luma_planes(6, 6, 2));
    let len = std::fs::metadata(&path).unwrap().len();
    File::options()
        .write(true)
        .open(&path)
        .unwrap()
        .set_len(len - 5)
        .unwrap();
    let results: Vec<_> = FrameSource::open(&path, InputFormat::Y4m, &SourceOptions::default())
        .unwrap()
        .collect();
    assert!(results[0].is_ok());
    assert!(results.last().unwrap().is_err());
}
