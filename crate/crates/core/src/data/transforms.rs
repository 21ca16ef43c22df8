use super::Patch;

pub fn flip_horizontal(p: &Patch) -> Patch {
    let mut out = p.clone();
    for r in 0..p.height {
        for c in 0..p.width {
            out.pixels[r * p.width + c] = p.get(r, p.width - 1 - c);
        }
    }
    out
}

pub fn flip_vertical(p: &Patch) -> Patch {
    let mut out = p.clone();
    for r in 0..p.height {
        let src = p.height - 1 - r;
        out.pixels[r * p.width..(r + 1) * p.width]
            .copy_from_slice(&p.pixels[src * p.width..(src + 1) * p.width]);
    }
    out
}

/// Rotates clockwise by `quarter_turns × 90°`. Non-square patches swap extents.
pub fn rotate90(p: &Patch, quarter_turns: u8) -> Patch {
    let mut cur = p.clone();
    for _ in 0..quarter_turns % 4 {
        let (h, w) = (cur.height, cur.width);
        let mut pixels = vec![0.0; h * w];
        // new[r][c] = old[h-1-c][r], new extents w×h
        for r in 0..w {
            for c in 0..h {
                pixels[r * h + c] = cur.get(h - 1 - c, r);
            }
        }
        cur = Patch {
            height: w,
            width: h,
            pixels,
        };
    }
    cur
}

/// Multiplies intensities by `factor`, clamped to `[0, 1]`.
pub fn adjust_brightness(p: &Patch, factor: f64) -> Patch {
    let mut out = p.clone();
    out.pixels.iter_mut().for_each(|v| *v *= factor);
    out.clamp();
    out
}

/// Scales deviations from the patch mean by `factor`, clamped to `[0, 1]`.
pub fn adjust_contrast(p: &Patch, factor: f64) -> Patch {
    let mean = p.mean();
    let mut out = p.clone();
    out.pixels.iter_mut().for_each(|v| *v = mean + factor * (*v - mean));
    out.clamp();
    out
}
