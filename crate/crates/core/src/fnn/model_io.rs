//! `BFSFNN01` model container.
//!
//! Layout: magic, u32 layer count, u32 widths, u8 hidden and output
//! activation ids, u8 bias flag, f64 scan range, f64 scan step, u32-prefixed
//! provenance string, then every layer's row-major weights, then every
//! layer's biases. All numbers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{Activation, Network, NetworkLayout};
use crate::io::{len_u32, LeReader, LeWriter};
use crate::{Error, Result};

const MAGIC: &str = "BFSFNN01";

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    let layout = net.layout();
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC.as_bytes())?;
    w.u32(len_u32(layout.sizes().len())?)?;
    for s in layout.sizes() {
        w.u32(len_u32(*s)?)?;
    }
    w.u8(layout.hidden_activation().id())?;
    w.u8(layout.output_activation().id())?;
    w.u8(layout.has_bias() as u8)?;
    w.f64(net.scan_range_mhz())?;
    w.f64(net.step_mhz())?;
    w.u32(len_u32(net.provenance().len())?)?;
    w.bytes(net.provenance().as_bytes())?;
    for l in 0..layout.layers() {
        w.f64_slice(net.weights(l))?;
    }
    for l in 0..layout.layers() {
        if let Some(b) = net.biases(l) {
            w.f64_slice(b)?;
        }
    }
    w.into_inner().flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Network> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?), path);
    let mut magic = [0u8; 8];
    r.exact(&mut magic)?;
    if &magic[..6] == b"BFSFNN" && magic[6..] != MAGIC.as_bytes()[6..] {
        let found = std::str::from_utf8(&magic[6..])
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(u32::MAX);
        return Err(Error::Version {
            path: path.to_path_buf(),
            found,
        });
    }
    if magic != MAGIC.as_bytes() {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: MAGIC,
        });
    }
    let n_sizes = r.u32()? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(r.dimension(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let hidden = r.u8()?;
    let output = r.u8()?;
    let (Some(hidden), Some(output)) = (Activation::from_id(hidden), Activation::from_id(output))
    else {
        return Err(r.dimension(format!("unknown activation ids {hidden}/{output}")));
    };
    let bias = r.u8()? != 0;
    let layout = NetworkLayout::with_options(&sizes, hidden, output, bias)
        .map_err(|e| r.dimension(e.to_string()))?;
    let scan_range = r.f64()?;
    let step = r.f64()?;
    let prov_len = r.u32()? as usize;
    if prov_len > 4096 {
        return Err(r.dimension("provenance string too long"));
    }
    let mut prov = vec![0u8; prov_len];
    r.exact(&mut prov)?;
    let prov = String::from_utf8(prov).map_err(|_| r.dimension("provenance is not UTF-8"))?;

    let mut net = Network::zeros(layout, scan_range, step);
    net.set_provenance(prov);
    for l in 0..net.layout().layers() {
        let n = net.weights(l).len();
        let w = r.f64_vec(n)?;
        net.weights_mut(l).copy_from_slice(&w);
    }
    for l in 0..net.layout().layers() {
        if let Some(n) = net.biases(l).map(<[f64]>::len) {
            let b = r.f64_vec(n)?;
            net.biases_mut(l).unwrap().copy_from_slice(&b);
        }
    }
    r.expect_eof()?;
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(r.dimension("non-finite weights"));
    }
    Ok(net)
}
