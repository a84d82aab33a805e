//! NPZ archives: zip files of `.npy` arrays keyed by name.

use std::fs::File;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use ndarray_npy::{ReadNpyExt, ReadableElement, WritableElement, WriteNpyExt};
use serde::Serialize;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::error::{Error, Result};
use crate::image::Image;

/// Name, element type and shape of one stored array.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrayInfo {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

/// Images of an archive together with the raw label array.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<Image>,
    /// Shape of the stored image array, including the leading count.
    pub shape: Vec<usize>,
    /// Whether images were stored with an integer or boolean element type.
    pub integer: bool,
    /// The label array as stored, `.npy` bytes.
    pub labels: Option<Vec<u8>>,
}

fn archive_err(e: impl std::fmt::Display) -> Error {
    Error::Archive(e.to_string())
}

fn open(path: &Path) -> Result<ZipArchive<File>> {
    ZipArchive::new(File::open(path)?).map_err(|e| Error::Archive(format!("{}: {e}", path.display())))
}

fn read_entry(zip: &mut ZipArchive<File>, name: &str) -> Result<Option<Vec<u8>>> {
    let file = match zip.by_name(name) {
        Ok(f) => f,
        Err(zip::result::ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(archive_err(e)),
    };
    let mut buf = Vec::with_capacity(file.size() as usize);
    let mut file = file;
    file.read_to_end(&mut buf)?;
    Ok(Some(buf))
}

/// Parses the `descr` and `shape` entries of an `.npy` header.
pub fn npy_header(bytes: &[u8]) -> Result<(String, Vec<usize>)> {
    if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
        return Err(Error::Archive("not an .npy array".into()));
    }
    let (len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (
            u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
            12,
        ),
        v => return Err(Error::Archive(format!("unsupported .npy version {v}"))),
    };
    let header = bytes
        .get(start..start + len)
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or_else(|| Error::Archive("truncated .npy header".into()))?;
    let field = |key: &str| {
        header
            .find(key)
            .map(|i| header[i + key.len()..].trim_start_matches([':', ' ']))
            .ok_or_else(|| Error::Archive(format!("missing {key} in .npy header")))
    };
    let descr = field("'descr'")?
        .trim_start_matches('\'')
        .split('\'')
        .next()
        .unwrap_or_default()
        .to_string();
    let shape_text = field("'shape'")?;
    let close = shape_text
        .find(')')
        .ok_or_else(|| Error::Archive("malformed shape in .npy header".into()))?;
    let shape = shape_text[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(archive_err))
        .collect::<Result<Vec<usize>>>()?;
    Ok((descr, shape))
}

/// Names, element types and shapes of every array in an archive.
pub fn list_arrays(path: &Path) -> Result<Vec<ArrayInfo>> {
    let mut zip = open(path)?;
    let names: Vec<String> = zip.file_names().map(str::to_string).collect();
    let mut out = Vec::new();
    let mut sorted = names;
    sorted.sort();
    for name in sorted {
        let bytes = read_entry(&mut zip, &name)?.unwrap_or_default();
        let (dtype, shape) = npy_header(&bytes)?;
        out.push(ArrayInfo {
            name: name.trim_end_matches(".npy").to_string(),
            dtype,
            shape,
        });
    }
    Ok(out)
}

fn read_as<T: ReadableElement + Copy>(bytes: &[u8], f: impl Fn(T) -> f64) -> Result<Vec<f64>> {
    let arr = ArrayD::<T>::read_npy(Cursor::new(bytes)).map_err(archive_err)?;
    Ok(arr.iter().map(|&v| f(v)).collect())
}

/// Reads any numeric `.npy` array as `f64` in row-major order.
pub fn read_f64_array(bytes: &[u8]) -> Result<(Vec<f64>, Vec<usize>, bool)> {
    let (descr, shape) = npy_header(bytes)?;
    let code = descr.trim_start_matches(['<', '>', '|', '=']);
    let integer = code.starts_with(['u', 'i', 'b']);
    let values = match code {
        "u1" => read_as::<u8>(bytes, f64::from)?,
        "u2" => read_as::<u16>(bytes, f64::from)?,
        "u4" => read_as::<u32>(bytes, f64::from)?,
        "u8" => read_as::<u64>(bytes, |v| v as f64)?,
        "i1" => read_as::<i8>(bytes, f64::from)?,
        "i2" => read_as::<i16>(bytes, f64::from)?,
        "i4" => read_as::<i32>(bytes, f64::from)?,
        "i8" => read_as::<i64>(bytes, |v| v as f64)?,
        "b1" => read_as::<bool>(bytes, |v| if v { 1.0 } else { 0.0 })?,
        "f4" => read_as::<f32>(bytes, f64::from)?,
        "f8" => read_as::<f64>(bytes, |v| v)?,
        other => return Err(Error::Archive(format!("unsupported element type `{other}`"))),
    };
    Ok((values, shape, integer))
}

/// Splits a stored image batch into images.
///
/// Accepted layouts: `(N, H, W)`, `(N, H, W, 1|3)`, `(N, D, H, W)` and
/// `(N, D, H, W, 1)`.
pub fn images_from_batch(values: Vec<f64>, shape: &[usize]) -> Result<Vec<Image>> {
    let (dims, channels): (Vec<usize>, usize) = match shape {
        [_, h, w] => (vec![*h, *w], 1),
        [_, h, w, c @ (1 | 3)] => (vec![*h, *w], *c),
        [_, d, h, w] => (vec![*d, *h, *w], 1),
        [_, d, h, w, 1] => (vec![*d, *h, *w], 1),
        other => return Err(Error::InvalidInput(format!("unsupported image array shape {other:?}"))),
    };
    let per = dims.iter().product::<usize>() * channels;
    if per == 0 {
        return Err(Error::InvalidInput(format!("empty images in shape {shape:?}")));
    }
    values
        .chunks_exact(per)
        .map(|chunk| Image::new(dims.clone(), channels, chunk.to_vec()))
        .collect()
}

/// Reads `images` and `labels`, or `{split}_images` and `{split}_labels`.
pub fn read_dataset(path: &Path, split: Option<&str>) -> Result<Dataset> {
    let mut zip = open(path)?;
    let key = |base: &str| match split {
        Some(s) => format!("{s}_{base}.npy"),
        None => format!("{base}.npy"),
    };
    let images_key = key("images");
    let bytes = read_entry(&mut zip, &images_key)?
        .ok_or_else(|| Error::Archive(format!("{}: no `{images_key}` array", path.display())))?;
    let (values, shape, integer) = read_f64_array(&bytes)?;
    let images = images_from_batch(values, &shape)?;
    let labels = read_entry(&mut zip, &key("labels"))?;
    Ok(Dataset {
        images,
        shape,
        integer,
        labels,
    })
}

/// Serializes an array as `.npy` bytes.
pub fn npy_bytes<A: WritableElement>(values: Vec<A>, shape: &[usize]) -> Result<Vec<u8>> {
    let arr = ArrayD::from_shape_vec(IxDyn(shape), values).map_err(archive_err)?;
    let mut out = Vec::new();
    arr.write_npy(&mut out).map_err(archive_err)?;
    Ok(out)
}

/// Writes named `.npy` entries into a fresh archive.
///
/// Entries are stored uncompressed with a fixed timestamp, so equal
/// contents give byte-identical files.
pub fn write_archive(path: &Path, entries: &[(&str, &[u8])]) -> Result<()> {
    let mut zip = ZipWriter::new(File::create(path)?);
    for (name, bytes) in entries {
        let opts = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Stored)
            .last_modified_time(DateTime::default())
            .unix_permissions(0o644)
            .large_file(bytes.len() as u64 >= u32::MAX as u64);
        zip.start_file(format!("{name}.npy"), opts).map_err(archive_err)?;
        zip.write_all(bytes)?;
    }
    zip.finish().map_err(archive_err)?.flush()?;
    Ok(())
}
