//! CPU forward splatting: project, depth-sort, and alpha-composite splats
//! front to back over 16×16 pixel tiles.

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::gaussians::{eval_sh, CameraSpec, GaussianSplat, ProjectedCovariance};
use crate::math::Vec3;

pub const TILE: u32 = 16;
/// Compositing stops once transmittance falls below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// Screen-space culling extent in standard deviations.
pub const CUTOFF_SIGMA: f64 = 3.0;

/// Linear RGB image, row-major, values nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        Image { width, height, pixels: vec![rgb; (width * height) as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    /// 8-bit RGB, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)).collect()
    }
}

/// Premultiplied colour plus remaining transmittance per pixel; composite
/// over a background with `color + transmittance * bg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    pub transmittance: Vec<f64>,
}

impl Layer {
    pub fn over_background(&self, bg: [f64; 3]) -> Image {
        let pixels = self
            .color
            .iter()
            .zip(&self.transmittance)
            .map(|(c, t)| [0, 1, 2].map(|i| (c[i] + t * bg[i]).clamp(0.0, 1.0)))
            .collect();
        Image { width: self.width, height: self.height, pixels }
    }

    /// `self` in front of `back`.
    pub fn over(&self, back: &Layer) -> Layer {
        let color = self
            .color
            .iter()
            .zip(&self.transmittance)
            .zip(&back.color)
            .map(|((f, t), b)| [0, 1, 2].map(|i| f[i] + t * b[i]))
            .collect();
        let transmittance = self.transmittance.iter().zip(&back.transmittance).map(|(a, b)| a * b).collect();
        Layer { width: self.width, height: self.height, color, transmittance }
    }
}

#[derive(Debug, Clone)]
struct ScreenSplat {
    mean: [f64; 2],
    conic: Matrix2<f64>,
    depth: f64,
    color: [f64; 3],
    opacity: f64,
    bbox: [i64; 4],
}

impl ScreenSplat {
    fn sort_key(&self) -> [f64; 10] {
        [
            self.depth,
            self.mean[0],
            self.mean[1],
            self.opacity,
            self.color[0],
            self.color[1],
            self.color[2],
            self.conic[(0, 0)],
            self.conic[(0, 1)],
            self.conic[(1, 1)],
        ]
    }
}

fn project(splat: &GaussianSplat, camera: &CameraSpec, eye: &Vec3) -> Option<ScreenSplat> {
    let cov2 = match camera.project_covariance(&splat.covariance(), &splat.center) {
        ProjectedCovariance::Visible(m) => m,
        ProjectedCovariance::Culled => return None,
    };
    let pc = camera.to_camera(&splat.center);
    let mean = camera.project(&pc);
    let conic = cov2.try_inverse()?;
    let (a, b, c) = (cov2[(0, 0)], cov2[(0, 1)], cov2[(1, 1)]);
    let mid = 0.5 * (a + c);
    let lambda_max = mid + (mid * mid - (a * c - b * b)).max(0.0).sqrt();
    let radius = CUTOFF_SIGMA * lambda_max.sqrt();
    let bbox = [
        (mean[0] - radius).floor() as i64,
        (mean[1] - radius).floor() as i64,
        (mean[0] + radius).ceil() as i64,
        (mean[1] + radius).ceil() as i64,
    ];
    if bbox[2] < 0 || bbox[3] < 0 || bbox[0] >= camera.width as i64 || bbox[1] >= camera.height as i64 {
        return None;
    }
    let view = (splat.center - eye).normalize();
    Some(ScreenSplat { mean, conic, depth: pc.z, color: eval_sh(&splat.sh, &view), opacity: splat.opacity, bbox })
}

/// Render to a layer with transparent background.
pub fn render_layer<'a>(splats: impl IntoIterator<Item = &'a GaussianSplat>, camera: &CameraSpec) -> Layer {
    let splats: Vec<&GaussianSplat> = splats.into_iter().collect();
    let eye = camera.position();
    let mut screen: Vec<ScreenSplat> = splats.par_iter().filter_map(|s| project(s, camera, &eye)).collect();
    // Content-keyed order makes output independent of storage order.
    screen.sort_by(|a, b| {
        a.sort_key()
            .iter()
            .zip(b.sort_key().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let (w, h) = (camera.width, camera.height);
    let tiles_x = w.div_ceil(TILE) as usize;
    let tiles_y = h.div_ceil(TILE) as usize;
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (i, s) in screen.iter().enumerate() {
        let tx0 = (s.bbox[0].max(0) / TILE as i64) as usize;
        let ty0 = (s.bbox[1].max(0) / TILE as i64) as usize;
        let tx1 = ((s.bbox[2].min(w as i64 - 1)) / TILE as i64) as usize;
        let ty1 = ((s.bbox[3].min(h as i64 - 1)) / TILE as i64) as usize;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }

    let tiles: Vec<(usize, Vec<[f64; 3]>, Vec<f64>)> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let x0 = (t % tiles_x) as u32 * TILE;
            let y0 = (t / tiles_x) as u32 * TILE;
            let x1 = (x0 + TILE).min(w);
            let y1 = (y0 + TILE).min(h);
            let n = ((x1 - x0) * (y1 - y0)) as usize;
            let mut color = vec![[0.0; 3]; n];
            let mut trans = vec![1.0; n];
            for y in y0..y1 {
                for x in x0..x1 {
                    let k = ((y - y0) * (x1 - x0) + (x - x0)) as usize;
                    let (c, t) = shade_pixel(&screen, bin, x, y);
                    color[k] = c;
                    trans[k] = t;
                }
            }
            (t, color, trans)
        })
        .collect();

    let mut layer = Layer {
        width: w,
        height: h,
        color: vec![[0.0; 3]; (w * h) as usize],
        transmittance: vec![1.0; (w * h) as usize],
    };
    for (t, color, trans) in tiles {
        let x0 = (t % tiles_x) as u32 * TILE;
        let y0 = (t / tiles_x) as u32 * TILE;
        let x1 = (x0 + TILE).min(w);
        for (k, (c, tr)) in color.into_iter().zip(trans).enumerate() {
            let x = x0 + k as u32 % (x1 - x0);
            let y = y0 + k as u32 / (x1 - x0);
            let idx = (y * w + x) as usize;
            layer.color[idx] = c;
            layer.transmittance[idx] = tr;
        }
    }
    layer
}

fn shade_pixel(screen: &[ScreenSplat], bin: &[u32], x: u32, y: u32) -> ([f64; 3], f64) {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    let (xi, yi) = (x as i64, y as i64);
    let mut color = [0.0; 3];
    let mut t = 1.0;
    for &i in bin {
        let s = &screen[i as usize];
        if xi < s.bbox[0] || xi > s.bbox[2] || yi < s.bbox[1] || yi > s.bbox[3] {
            continue;
        }
        let dx = px - s.mean[0];
        let dy = py - s.mean[1];
        let power = -0.5 * (s.conic[(0, 0)] * dx * dx + 2.0 * s.conic[(0, 1)] * dx * dy + s.conic[(1, 1)] * dy * dy);
        if power > 0.0 {
            continue;
        }
        let alpha = (s.opacity * power.exp()).min(1.0);
        if alpha <= 0.0 {
            continue;
        }
        for ch in 0..3 {
            color[ch] += s.color[ch] * alpha * t;
        }
        t *= 1.0 - alpha;
        if t < MIN_TRANSMITTANCE {
            break;
        }
    }
    (color, t)
}

pub fn render<'a>(
    splats: impl IntoIterator<Item = &'a GaussianSplat>,
    camera: &CameraSpec,
    background: [f64; 3],
) -> Image {
    render_layer(splats, camera).over_background(background)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussians::ShCoeffs;
    use crate::math::Quat;
    use nalgebra::Isometry3;

    fn camera() -> CameraSpec {
        CameraSpec {
            fx: 40.0,
            fy: 40.0,
            cx: 16.0,
            cy: 12.0,
            width: 32,
            height: 24,
            world_to_camera: Isometry3::identity(),
        }
    }

    fn splat(center: Vec3, scale: f64, opacity: f64, rgb: [f64; 3]) -> GaussianSplat {
        GaussianSplat {
            center,
            rotation: Quat::identity(),
            scale: Vec3::repeat(scale),
            opacity,
            sh: ShCoeffs::from_color(rgb),
            object_id: 0,
        }
    }

    #[test]
    fn empty_scene_is_background() {
        let img = render(std::iter::empty(), &camera(), [0.2, 0.4, 0.6]);
        assert!(img.pixels.iter().all(|p| *p == [0.2, 0.4, 0.6]));
    }

    #[test]
    fn centred_opaque_splat_shows_its_color() {
        // Pixel (10, 7) is centred at (10.5, 7.5); place the splat there.
        let cam = camera();
        let z = 2.0;
        let center = Vec3::new((10.5 - cam.cx) * z / cam.fx, (7.5 - cam.cy) * z / cam.fy, z);
        let s = splat(center, 0.05, 1.0, [0.9, 0.3, 0.1]);
        let want = eval_sh(&s.sh, &center.normalize());
        let img = render([&s], &cam, [0.0; 3]);
        let got = img.get(10, 7);
        for ch in 0..3 {
            assert!((got[ch] - want[ch]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_splat_composite_matches_hand_evaluation() {
        let cam = camera();
        let a = [0.9, 0.1, 0.2];
        let b = [0.1, 0.8, 0.3];
        let front = splat(Vec3::new(0.5 * 1.0 / 40.0, 0.5 / 40.0, 1.0), 0.05, 0.5, a);
        let back = splat(Vec3::new(0.5 * 3.0 / 40.0, 0.5 * 3.0 / 40.0, 3.0), 0.05, 1.0, b);
        let img = render([&back, &front], &cam, [0.0; 3]);
        let got = img.get(16, 12);
        for ch in 0..3 {
            assert!((got[ch] - (0.5 * a[ch] + 0.5 * b[ch])).abs() < 1e-6);
        }
    }
}
