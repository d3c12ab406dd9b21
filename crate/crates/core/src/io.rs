//! Readers and writers for label maps, `.flo` flow files, MOT-Challenge text
//! and 8-bit intensity images.
//!
//! Internal coordinates and frame indices are zero-based; MOT text is
//! one-based, and frame files are numbered from `000001`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::flowops::GrayImage;
use crate::metrics::{BoxF, MotEntry};
use crate::tracker::FrameOutput;
use crate::types::{FlowField, GridDims, InstanceMask, PixelSet};

/// Per-pixel instance labels; 0 is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    dims: GridDims,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(dims: GridDims, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != dims.area() {
            return Err(Error::DimsMismatch(format!(
                "{} labels for a {}x{} grid",
                labels.len(),
                dims.width(),
                dims.height()
            )));
        }
        Ok(LabelMap { dims, labels })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Read a 16- or 8-bit single-channel PNG, or a binary PGM.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_label_map(&bytes).map_err(|e| e.at(path))
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    if bytes.starts_with(PNG_SIGNATURE) {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| Error::CorruptFile(e.to_string()))?;
        let dims = GridDims::new(img.width() as usize, img.height() as usize)?;
        let labels = match img {
            DynamicImage::ImageLuma16(buf) => buf.into_raw(),
            DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u16::from).collect(),
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "label map PNG must have one channel, got {:?}",
                    other.color()
                )))
            }
        };
        LabelMap::new(dims, labels)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected a PNG or binary PGM (P5) label map".into(),
        ))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<LabelMap> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptFile("malformed PGM header".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptFile("malformed PGM header".into()));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::CorruptFile(format!("PGM maxval {maxval} out of range")));
    }
    let dims = GridDims::new(w, h).map_err(|e| Error::CorruptFile(e.to_string()))?;
    let data = &bytes[pos..];
    let wide = maxval > 255;
    let need = dims.area() * if wide { 2 } else { 1 };
    if data.len() < need {
        return Err(Error::TruncatedFile(format!(
            "PGM raster needs {need} bytes, found {}",
            data.len()
        )));
    }
    let labels = if wide {
        // PGM stores 16-bit samples most significant byte first.
        data[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        data[..need].iter().map(|&b| u16::from(b)).collect()
    };
    LabelMap::new(dims, labels)
}

pub fn encode_pgm(map: &LabelMap) -> Vec<u8> {
    let max = map.labels.iter().copied().max().unwrap_or(0);
    let wide = max > 255;
    let mut out = format!(
        "P5\n{} {}\n{}\n",
        map.dims.width(),
        map.dims.height(),
        if wide { 65535 } else { 255 }
    )
    .into_bytes();
    if wide {
        out.extend(map.labels.iter().flat_map(|v| v.to_be_bytes()));
    } else {
        out.extend(map.labels.iter().map(|&v| v as u8));
    }
    out
}

/// Write as binary PGM when the extension is `.pgm`, 16-bit PNG otherwise.
pub fn write_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let result = if is_pgm {
        fs::write(path, encode_pgm(map)).map_err(Error::from)
    } else {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            map.dims.width() as u32,
            map.dims.height() as u32,
            map.labels.clone(),
        )
        .expect("label buffer matches dims");
        buf.save_with_format(path, ImageFormat::Png).map_err(Error::from)
    };
    result.map_err(|e| e.at(path))
}

/// One mask per distinct nonzero label, in increasing label order.
pub fn extract_instances(map: &LabelMap, frame: u32, category: u32) -> Vec<InstanceMask> {
    let mut by_label: std::collections::BTreeMap<u16, PixelSet> = Default::default();
    for (i, &label) in map.labels.iter().enumerate() {
        if label != 0 {
            by_label
                .entry(label)
                .or_insert_with(|| PixelSet::new(map.dims))
                .insert(map.dims.pos_of(i));
        }
    }
    by_label
        .into_iter()
        .map(|(label, pixels)| {
            InstanceMask::new(frame, label as u32, category, pixels).expect("labels come from pixels")
        })
        .collect()
}

/// Paint masks into a label map; later masks overwrite earlier ones.
pub fn label_map_from_instances(dims: GridDims, masks: &[InstanceMask]) -> Result<LabelMap> {
    let mut labels = vec![0u16; dims.area()];
    for m in masks {
        dims.ensure_same(&m.dims())?;
        let label = u16::try_from(m.instance)
            .ok()
            .filter(|&l| l > 0)
            .ok_or_else(|| Error::InvalidParam(format!("instance index {} does not fit a label", m.instance)))?;
        for p in m.pixels().iter() {
            labels[dims.index(p)] = label;
        }
    }
    LabelMap::new(dims, labels)
}

const FLO_MAGIC: f32 = 202021.25;
const FLO_UNKNOWN: f32 = 1e10;

fn is_unknown(v: f32) -> bool {
    v.is_nan() || v.abs() > 1e9
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_flo(&bytes).map_err(|e| e.at(path))
}

/// Parse Middlebury `.flo` bytes. Components beyond 1e9 in magnitude mark
/// the pixel invalid.
pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::TruncatedFile(format!("{} byte .flo header", bytes.len())));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let (w, h) = (i32::from_le_bytes(word(4)), i32::from_le_bytes(word(8)));
    if w <= 0 || h <= 0 {
        return Err(Error::CorruptFile(format!(".flo size {w}x{h}")));
    }
    let dims = GridDims::new(w as usize, h as usize)?;
    let need = 12 + dims.area() * 8;
    if bytes.len() < need {
        return Err(Error::TruncatedFile(format!(
            ".flo body needs {need} bytes, found {}",
            bytes.len()
        )));
    }
    let mut vectors = Vec::with_capacity(dims.area());
    let mut valid = Vec::with_capacity(dims.area());
    for i in 0..dims.area() {
        let at = 12 + i * 8;
        let v = [f32::from_le_bytes(word(at)), f32::from_le_bytes(word(at + 4))];
        valid.push(!is_unknown(v[0]) && !is_unknown(v[1]));
        vectors.push(v);
    }
    FlowField::new(dims, vectors, valid)
}

/// Serialize to `.flo` bytes. Invalid pixels are written as unknown unless
/// their stored vector already is.
pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let dims = field.dims();
    let mut out = Vec::with_capacity(12 + dims.area() * 8);
    out.extend(FLO_MAGIC.to_le_bytes());
    out.extend((dims.width() as i32).to_le_bytes());
    out.extend((dims.height() as i32).to_le_bytes());
    for (v, &ok) in field.raw_vectors().iter().zip(field.valid_flags()) {
        let v = if ok || is_unknown(v[0]) || is_unknown(v[1]) {
            *v
        } else {
            [FLO_UNKNOWN, FLO_UNKNOWN]
        };
        out.extend(v[0].to_le_bytes());
        out.extend(v[1].to_le_bytes());
    }
    out
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_flo(field)).map_err(|e| Error::from(e).at(path))
}

/// MOT text for tracker output, ordered by frame then track id.
///
/// Frames and box corners are shifted to one-based; coasted records get
/// confidence 0.5, matched ones 1.0.
/// Tracker output as MOT entries: one-based frames and corners, confidence
/// 1.0 for matched records and 0.5 for coasted ones.
pub fn output_entries(outputs: &[FrameOutput]) -> Vec<MotEntry> {
    let mut entries = Vec::new();
    for fo in outputs {
        let mut records: Vec<_> = fo.records.iter().collect();
        records.sort_by_key(|r| r.id);
        for r in records {
            let Some(b) = r.mask.bbox() else { continue };
            entries.push(MotEntry {
                frame: fo.frame + 1,
                id: r.id,
                bbox: BoxF {
                    left: (b.left + 1) as f64,
                    top: (b.top + 1) as f64,
                    width: b.width as f64,
                    height: b.height as f64,
                },
                conf: if r.coasted { 0.5 } else { 1.0 },
            });
        }
    }
    entries
}

pub fn format_mot(outputs: &[FrameOutput]) -> String {
    format_mot_entries(&output_entries(outputs))
}

pub fn write_mot(outputs: &[FrameOutput], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_mot(outputs)).map_err(|e| Error::from(e).at(path))
}

/// MOT text for entries already in file coordinates.
pub fn format_mot_entries(entries: &[MotEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "{},{},{},{},{},{},{:?},-1,-1,-1\n",
                e.frame, e.id, e.bbox.left, e.bbox.top, e.bbox.width, e.bbox.height, e.conf
            )
        })
        .collect()
}

pub fn write_mot_entries(entries: &[MotEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_mot_entries(entries)).map_err(|e| Error::from(e).at(path))
}

pub fn read_mot(path: impl AsRef<Path>) -> Result<Vec<MotEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    parse_mot(&text).map_err(|e| e.at(path))
}

/// Parse MOT rows `frame,id,left,top,width,height[,conf,...]`.
///
/// Blank lines are skipped, a missing confidence reads as 1.0 and trailing
/// columns are ignored.
pub fn parse_mot(text: &str) -> Result<Vec<MotEntry>> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 6 {
            return Err(err(format!("expected at least 6 fields, found {}", fields.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("{name} {:?} is not a number", fields[i])))
        };
        let int = |i: usize, name: &str, min: f64| -> Result<f64> {
            let v = num(i, name)?;
            if v.fract() != 0.0 || v < min {
                return Err(err(format!("{name} {:?} is not an integer >= {min}", fields[i])));
            }
            Ok(v)
        };
        let frame = int(0, "frame", 1.0)?;
        let id = int(1, "id", 0.0)?;
        let bbox = BoxF {
            left: num(2, "bb_left")?,
            top: num(3, "bb_top")?,
            width: num(4, "bb_width")?,
            height: num(5, "bb_height")?,
        };
        if bbox.width <= 0.0 || bbox.height <= 0.0 {
            return Err(err("box width and height must be positive".into()));
        }
        let conf = if fields.len() > 6 { num(6, "conf")? } else { 1.0 };
        entries.push(MotEntry {
            frame: frame as u32,
            id: id as u64,
            bbox,
            conf,
        });
    }
    Ok(entries)
}

/// `000001.png` style name for a one-based frame number.
pub fn frame_file_name(frame: u32, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

/// Files in `dir` named `<number>.<ext>`, sorted by number.
pub fn list_frame_files(dir: impl AsRef<Path>, ext: &str) -> Result<Vec<(u32, PathBuf)>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::from(e).at(dir))? {
        let path = entry.map_err(|e| Error::from(e).at(dir))?.path();
        if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            continue;
        }
        if let Some(n) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u32>().ok())
        {
            files.push((n, path));
        }
    }
    files.sort();
    Ok(files)
}

/// Load any image the `image` crate understands as mean-of-channels intensity.
pub fn read_gray_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let load = || -> Result<GrayImage> {
        let img = image::open(path)?.to_rgb8();
        let dims = GridDims::new(img.width() as usize, img.height() as usize)?;
        GrayImage::from_interleaved_u8(dims, 3, img.as_raw())
    };
    load().map_err(|e| e.at(path))
}

/// Save as an 8-bit grayscale PNG.
pub fn write_gray_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let d = img.dims();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(d.width() as u32, d.height() as u32, img.to_u8()).expect("buffer matches dims");
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| Error::from(e).at(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::TrackRecord;
    use crate::types::PixelPos;
    use proptest::prelude::*;

    fn three_by_three() -> LabelMap {
        let d = GridDims::new(3, 3).unwrap();
        LabelMap::new(d, vec![0, 1, 1, 0, 1, 0, 2, 2, 0]).unwrap()
    }

    #[test]
    fn pgm_reads_verbatim() {
        let bytes = b"P5\n# comment\n3 3\n255\n\x00\x01\x01\x00\x01\x00\x02\x02\x00";
        let map = decode_label_map(bytes).unwrap();
        assert_eq!(map, three_by_three());
        let inst = extract_instances(&map, 0, 1);
        assert_eq!(inst.len(), 2);
        let pts = |m: &InstanceMask| m.pixels().iter().map(|p| (p.x, p.y)).collect::<Vec<_>>();
        assert_eq!(pts(&inst[0]), vec![(1, 0), (2, 0), (1, 1)]);
        assert_eq!(pts(&inst[1]), vec![(0, 2), (1, 2)]);
        assert_eq!((inst[0].instance, inst[1].instance), (1, 2));
    }

    #[test]
    fn all_zero_map_has_no_instances() {
        let d = GridDims::new(4, 2).unwrap();
        assert!(extract_instances(&LabelMap::new(d, vec![0; 8]).unwrap(), 0, 1).is_empty());
    }

    #[test]
    fn sparse_labels_and_full_cover() {
        let d = GridDims::new(2, 2).unwrap();
        let inst = extract_instances(&LabelMap::new(d, vec![3, 17, 3, 0]).unwrap(), 0, 1);
        assert_eq!(inst.iter().map(|m| m.instance).collect::<Vec<_>>(), vec![3, 17]);
        let inst = extract_instances(&LabelMap::new(d, vec![5; 4]).unwrap(), 0, 1);
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].area(), 4);
    }

    #[test]
    fn eight_bit_png_widens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(3, 3, vec![0, 1, 1, 0, 1, 0, 2, 2, 0]).unwrap();
        buf.save(&path).unwrap();
        assert_eq!(read_label_map(&path).unwrap(), three_by_three());
    }

    #[test]
    fn rejects_unknown_and_colour() {
        assert!(matches!(decode_label_map(b"GIF89a"), Err(Error::UnsupportedFormat(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        image::RgbImage::new(2, 2).save(&path).unwrap();
        let err = read_label_map(&path).unwrap_err();
        assert!(err.to_string().contains("c.png"));
        assert!(matches!(err, Error::File { source, .. } if matches!(*source, Error::UnsupportedFormat(_))));
        assert!(matches!(decode_label_map(b"P5\n3 3\n255\n\x00"), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn flo_single_pixel() {
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(2.0f32.to_le_bytes());
        bytes.extend((-1.0f32).to_le_bytes());
        let f = decode_flo(&bytes).unwrap();
        assert_eq!(f.get(PixelPos::new(0, 0)), Some([2.0, -1.0]));
        assert_eq!(encode_flo(&f), bytes);
    }

    #[test]
    fn flo_unknown_is_invalid() {
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(1i32.to_le_bytes());
        bytes.extend(1e10f32.to_le_bytes());
        bytes.extend(0.0f32.to_le_bytes());
        let f = decode_flo(&bytes).unwrap();
        assert!(!f.is_valid(PixelPos::new(0, 0)));
        assert_eq!(encode_flo(&f), bytes);
    }

    #[test]
    fn flo_errors() {
        assert!(matches!(decode_flo(&[0; 4]), Err(Error::TruncatedFile(_))));
        let mut bytes = 1.0f32.to_le_bytes().to_vec();
        bytes.extend([0; 8]);
        assert!(matches!(decode_flo(&bytes), Err(Error::BadMagic(_))));
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend(2i32.to_le_bytes());
        bytes.extend(2i32.to_le_bytes());
        bytes.extend([0; 8]);
        assert!(matches!(decode_flo(&bytes), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn invalid_flow_written_as_unknown() {
        let d = GridDims::new(1, 1).unwrap();
        let f = FlowField::new(d, vec![[3.0, 4.0]], vec![false]).unwrap();
        let back = decode_flo(&encode_flo(&f)).unwrap();
        assert!(!back.is_valid(PixelPos::new(0, 0)));
    }

    #[test]
    fn mot_line_is_one_based() {
        let d = GridDims::new(8, 8).unwrap();
        let mut mask = PixelSet::new(d);
        mask.insert(PixelPos::new(1, 1));
        mask.insert(PixelPos::new(3, 2));
        let out = FrameOutput {
            frame: 0,
            records: vec![TrackRecord {
                id: 1,
                mask: mask.clone(),
                coasted: false,
            }],
            events: vec![],
        };
        assert_eq!(format_mot(&[out]), "1,1,2,2,3,2,1.0,-1,-1,-1\n");
        let coasted = FrameOutput {
            frame: 4,
            records: vec![TrackRecord {
                id: 3,
                mask,
                coasted: true,
            }],
            events: vec![],
        };
        assert_eq!(format_mot(&[coasted]), "5,3,2,2,3,2,0.5,-1,-1,-1\n");
        assert_eq!(format_mot(&[]), "");
    }

    #[test]
    fn mot_parse_errors_name_the_line() {
        let text = "1,1,1,1,5,5,1,-1,-1,-1\n\n1,2,x,1,5,5\n";
        match parse_mot(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_mot("1,2,3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_mot("0,1,1,1,5,5"), Err(Error::Parse { line: 1, .. })));
        let e = parse_mot("3,4,1.5,2,5,6").unwrap();
        assert_eq!(e[0].conf, 1.0);
        assert_eq!(e[0].bbox.left, 1.5);
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_file_name(1, "png"), "000001.png");
        assert_eq!(frame_file_name(123456, "flo"), "123456.flo");
    }

    proptest! {
        #[test]
        fn flo_round_trip(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = GridDims::new(w, h).unwrap();
            let mut vectors = Vec::new();
            for _ in 0..d.area() {
                let v = if rng.random_bool(0.2) {
                    [FLO_UNKNOWN, rng.random_range(-50.0..50.0)]
                } else {
                    [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)]
                };
                vectors.push(v);
            }
            let valid = vectors.iter().map(|v| !is_unknown(v[0]) && !is_unknown(v[1])).collect();
            let f = FlowField::new(d, vectors, valid).unwrap();
            let bytes = encode_flo(&f);
            let back = decode_flo(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(encode_flo(&back), bytes);
        }

        #[test]
        fn mot_entries_round_trip(
            rows in proptest::collection::vec(
                (1u32..1000, 0u64..500, -100.0f64..1000.0, -100.0f64..1000.0, 0.5f64..300.0, 0.5f64..300.0, -1.0f64..1.0),
                0..30,
            )
        ) {
            let entries: Vec<MotEntry> = rows
                .into_iter()
                .map(|(frame, id, left, top, width, height, conf)| MotEntry {
                    frame,
                    id,
                    bbox: BoxF { left, top, width, height },
                    conf,
                })
                .collect();
            prop_assert_eq!(parse_mot(&format_mot_entries(&entries)).unwrap(), entries);
        }

        #[test]
        fn label_map_round_trip(w in 1usize..12, h in 1usize..12, wide in any::<bool>(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = GridDims::new(w, h).unwrap();
            let top = if wide { u16::MAX } else { 255 };
            let labels = (0..d.area()).map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(1..=top) }).collect();
            let map = LabelMap::new(d, labels).unwrap();
            prop_assert_eq!(&decode_pgm(&encode_pgm(&map)).unwrap(), &map);
            let inst = extract_instances(&map, 0, 1);
            prop_assert_eq!(&label_map_from_instances(d, &inst).unwrap(), &map);
            let total: usize = inst.iter().map(|m| m.area()).sum();
            prop_assert_eq!(total, map.labels().iter().filter(|&&l| l != 0).count());
        }
    }

    #[test]
    fn png_label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = GridDims::new(5, 4).unwrap();
        let map = LabelMap::new(d, (0..20).map(|i| i * 3000).collect()).unwrap();
        for name in ["a.png", "a.pgm"] {
            let path = dir.path().join(name);
            write_label_map(&map, &path).unwrap();
            assert_eq!(read_label_map(&path).unwrap(), map);
        }
    }
}
