use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::renderer::Image;

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Write 8-bit RGB. A `.ppm` extension selects binary PPM; anything else is PNG.
pub fn save_frame(image: &Image, path: &Path) -> Result<()> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::validation("image", "width and height must be > 0"));
    }
    let io_err = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let rgb = image.to_rgb8();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
        write!(out, "P6\n{} {}\n255\n", image.width, image.height).map_err(io_err)?;
        out.write_all(&rgb).map_err(io_err)?;
    } else {
        let mut enc = png::Encoder::new(&mut out, image.width, image.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        let mut w = enc.write_header().map_err(|e| io_err(std::io::Error::other(e)))?;
        w.write_image_data(&rgb).map_err(|e| io_err(std::io::Error::other(e)))?;
        w.finish().map_err(|e| io_err(std::io::Error::other(e)))?;
    }
    out.flush().map_err(io_err)
}

/// Read back a frame written by [`save_frame`] as `(width, height, rgb8)`.
pub fn load_frame(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let io_err = |e: std::io::Error| Error::io(format!("reading {}", path.display()), e);
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes).map_err(io_err)?;
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::validation("frame", "truncated PPM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| Error::validation("frame", format!("bad PPM field `{s}`")));
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(Error::validation("frame", "only 8-bit P6 PPM is supported"));
        }
        let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
        let data = bytes[pos + 1..].to_vec();
        return Ok((w, h, data));
    }
    let decoder = png::Decoder::new(reader);
    let mut r = decoder.read_info().map_err(|e| io_err(std::io::Error::other(e)))?;
    let size = r.output_buffer_size().ok_or_else(|| Error::validation("frame", "image too large"))?;
    let mut buf = vec![0; size];
    let info = r.next_frame(&mut buf).map_err(|e| io_err(std::io::Error::other(e)))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::validation("frame", "expected 8-bit RGB PNG"));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}
