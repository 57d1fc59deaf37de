use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{pool_plane, Embedding, EmbeddingKind};
use crate::histogram::Histogram;
use crate::pixelops::{resize_exact, Image};

/// Elementwise mean. Images are resized to the first image's size, and
/// promoted to RGB when channel counts differ.
pub fn average_image(images: &[Image]) -> Result<Image> {
    let first = images.first().ok_or_else(|| Error::validation("cannot average an empty image list"))?;
    let (w, h) = (first.width(), first.height());
    let channels = images.iter().map(|i| i.channels()).max().unwrap_or(1);
    let mut acc = vec![0.0; w * h * channels];
    for img in images {
        let img = if img.channels() != channels { img.to_rgb() } else { img.clone() };
        let img = if img.width() != w || img.height() != h {
            resize_exact(&img, w, h)?
        } else {
            img
        };
        for (a, v) in acc.iter_mut().zip(img.data()) {
            *a += v;
        }
    }
    let n = images.len() as f64;
    Image::new(w, h, channels, acc.into_iter().map(|v| v / n).collect())
}

/// Per-channel density of the mean image over `[0, 1]`.
pub fn color_density(images: &[Image], bins: usize) -> Result<[Histogram; 3]> {
    let mean = average_image(images)?.to_rgb();
    let hist = |c: usize| Histogram::from_values(mean.plane(c), 0.0, 1.0, bins);
    Ok([hist(0)?, hist(1)?, hist(2)?])
}

/// Layout statistics for one focus class.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionSummary {
    pub class_name: String,
    /// Per-pixel fraction of images in which the class covers that pixel.
    pub mean_mask: Image,
    /// Most frequent other classes as (class, image count), at most `top_k`.
    pub top_inserted: Vec<(String, usize)>,
    pub total_images: usize,
}

fn check_mask_dims(masks: &[BTreeMap<String, Image>]) -> Result<(usize, usize)> {
    let mut dims = None;
    for (i, set) in masks.iter().enumerate() {
        for (name, m) in set {
            if m.channels() != 1 {
                return Err(Error::validation(format!("mask '{name}' in image {i} is not single-channel")));
            }
            let d = (m.width(), m.height());
            match dims {
                None => dims = Some(d),
                Some(e) if e != d => {
                    return Err(Error::validation(format!(
                        "mask '{name}' in image {i} is {}x{}, expected {}x{}",
                        d.0, d.1, e.0, e.1
                    )));
                }
                _ => {}
            }
        }
    }
    dims.ok_or_else(|| Error::validation("no masks supplied"))
}

fn present(m: &Image) -> bool {
    m.data().iter().any(|&v| v > 0.5)
}

/// Mean binary mask per focus class plus the `top_k` most common other
/// classes, counted once per image and ordered by count then name.
pub fn composition_summary(
    masks: &[BTreeMap<String, Image>],
    focus_classes: &[String],
    top_k: usize,
) -> Result<Vec<CompositionSummary>> {
    let (w, h) = check_mask_dims(masks)?;
    let mut inserted: BTreeMap<&str, usize> = BTreeMap::new();
    for set in masks {
        for (name, m) in set {
            if !focus_classes.contains(name) && present(m) {
                *inserted.entry(name.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = inserted.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_k);

    let n = masks.len();
    let mut out = Vec::with_capacity(focus_classes.len());
    for class in focus_classes {
        let mut acc = vec![0.0; w * h];
        for set in masks {
            if let Some(m) = set.get(class) {
                for (a, &v) in acc.iter_mut().zip(m.data()) {
                    if v > 0.5 {
                        *a += 1.0;
                    }
                }
            }
        }
        out.push(CompositionSummary {
            class_name: class.clone(),
            mean_mask: Image::new(w, h, 1, acc.into_iter().map(|v| v / n as f64).collect())?,
            top_inserted: ranked.clone(),
            total_images: n,
        });
    }
    Ok(out)
}

/// Each vocabulary class's mask average-pooled to `grid x grid`, zeros for
/// absent classes, concatenated in vocabulary order.
pub fn segmentation_embedding(masks: &BTreeMap<String, Image>, vocab: &[String], grid: usize) -> Result<Embedding> {
    if vocab.is_empty() {
        return Err(Error::validation("segmentation vocabulary is empty"));
    }
    if grid == 0 {
        return Err(Error::validation("grid must be >= 1"));
    }
    let mut data = Vec::with_capacity(vocab.len() * grid * grid);
    for class in vocab {
        match masks.get(class) {
            None => data.extend(std::iter::repeat_n(0.0, grid * grid)),
            Some(m) => {
                if m.channels() != 1 {
                    return Err(Error::validation(format!("mask '{class}' is not single-channel")));
                }
                if m.width() < grid || m.height() < grid {
                    return Err(Error::validation(format!(
                        "mask '{class}' ({}x{}) is smaller than grid {grid}",
                        m.width(),
                        m.height()
                    )));
                }
                data.extend(pool_plane(m.data(), m.width(), m.height(), grid));
            }
        }
    }
    Embedding::new(EmbeddingKind::Segmentation, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, on: &[(usize, usize)]) -> Image {
        let mut d = vec![0.0; w * h];
        for &(x, y) in on {
            d[y * w + x] = 1.0;
        }
        Image::new(w, h, 1, d).unwrap()
    }

    #[test]
    fn black_and_white_average_to_mid_gray() {
        let m = average_image(&[Image::filled(3, 2, 3, 0.0), Image::filled(3, 2, 3, 1.0)]).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.5));
        let single = Image::from_fn(4, 4, 3, |x, y, c| (x + y + c) as f64 / 10.0);
        assert_eq!(average_image(std::slice::from_ref(&single)).unwrap(), single);
        assert!(average_image(&[]).is_err());
    }

    #[test]
    fn constant_images_give_unit_mass() {
        let imgs = vec![Image::filled(4, 4, 3, 0.3); 3];
        for h in color_density(&imgs, 10).unwrap() {
            assert!((h.integral() - 1.0).abs() < 1e-9);
            let nz: Vec<_> = h.density.iter().filter(|&&d| d > 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(h.bin_of(0.3), h.density.iter().position(|&d| d > 0.0).unwrap());
        }
    }

    #[test]
    fn composition_counts_four_images() {
        let person = |on: &[(usize, usize)]| ("person".to_string(), mask(2, 2, on));
        let other = |n: &str| (n.to_string(), mask(2, 2, &[(1, 1)]));
        let sets: Vec<BTreeMap<String, Image>> = vec![
            [person(&[(0, 0)]), other("dog"), other("tree")].into_iter().collect(),
            [person(&[(0, 0), (1, 0)]), other("dog")].into_iter().collect(),
            [other("tree"), other("sky")].into_iter().collect(),
            [person(&[(0, 0)]), other("dog"), other("sky")].into_iter().collect(),
        ];
        let s = composition_summary(&sets, &["person".into(), "cat".into()], 3).unwrap();
        assert_eq!(s[0].mean_mask.data(), &[0.75, 0.25, 0.0, 0.0]);
        assert_eq!(s[0].total_images, 4);
        assert_eq!(
            s[0].top_inserted,
            vec![("dog".into(), 3), ("sky".into(), 2), ("tree".into(), 2)]
        );
        assert!(s[1].mean_mask.data().iter().all(|&v| v == 0.0));

        let mut doubled = sets.clone();
        doubled.extend(sets.clone());
        let d = composition_summary(&doubled, &["person".into()], 3).unwrap();
        assert_eq!(d[0].mean_mask, s[0].mean_mask);

        let bad = vec![[("a".to_string(), mask(2, 2, &[]))].into_iter().collect(), [("b".to_string(), mask(3, 2, &[]))].into_iter().collect()];
        assert!(composition_summary(&bad, &[], 3).is_err());
    }

    #[test]
    fn segmentation_embedding_layout() {
        let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let empty = segmentation_embedding(&BTreeMap::new(), &vocab, 2).unwrap();
        assert_eq!(empty.data, vec![0.0; 12]);
        let full: BTreeMap<_, _> = [("b".to_string(), Image::filled(4, 4, 1, 1.0))].into_iter().collect();
        assert_eq!(segmentation_embedding(&full, &vocab, 1).unwrap().data, vec![0.0, 1.0, 0.0]);
        let m: BTreeMap<_, _> = [("a".to_string(), mask(4, 4, &[(0, 0), (1, 1), (3, 0), (2, 3)]))].into_iter().collect();
        let e = segmentation_embedding(&m, &vocab, 2).unwrap();
        assert_eq!(&e.data[..4], &[0.5, 0.25, 0.0, 0.25]);
        assert_eq!(e.kind, EmbeddingKind::Segmentation);
    }
}
