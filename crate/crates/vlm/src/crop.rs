use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::request::{ImageRef, ManualDocument};

/// Pixel rectangle, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum CropError {
    #[error("page {page}: box {b:?} exceeds the {width}x{height} image")]
    OutOfBounds {
        page: usize,
        b: CropBox,
        width: u32,
        height: u32,
    },
    #[error("page {page}: box is empty")]
    Empty { page: usize },
    #[error("{boxes} crop boxes for {pages} pages")]
    CountMismatch { boxes: usize, pages: usize },
    #[error("page {page}: {source}")]
    Image {
        page: usize,
        source: image::ImageError,
    },
}

/// Crops one image. A box covering the whole image returns the input
/// unchanged; other crops are re-encoded as PNG.
pub fn crop_image(img: &ImageRef, b: CropBox, page: usize) -> Result<ImageRef, CropError> {
    let decoded =
        image::load_from_memory(&img.bytes).map_err(|source| CropError::Image { page, source })?;
    let (w, h) = (decoded.width(), decoded.height());
    if b.width == 0 || b.height == 0 {
        return Err(CropError::Empty { page });
    }
    let fits = b.x.checked_add(b.width).is_some_and(|r| r <= w)
        && b.y.checked_add(b.height).is_some_and(|r| r <= h);
    if !fits {
        return Err(CropError::OutOfBounds {
            page,
            b,
            width: w,
            height: h,
        });
    }
    if b.x == 0 && b.y == 0 && b.width == w && b.height == h {
        return Ok(img.clone());
    }
    let cropped = decoded.crop_imm(b.x, b.y, b.width, b.height);
    let mut out = Vec::new();
    cropped
        .write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|source| CropError::Image { page, source })?;
    let stem = img
        .name
        .rsplit_once('.')
        .map_or(img.name.as_str(), |(s, _)| s);
    Ok(ImageRef::from_bytes(
        format!("{stem}_crop.png"),
        "image/png",
        out,
    ))
}

/// New document whose manual pages are cropped; `None` keeps a page as is.
/// The cropped pages also become the pages shown to the plan prompt.
pub fn crop_manual_pages(
    doc: &ManualDocument,
    boxes: &[Option<CropBox>],
) -> Result<ManualDocument, CropError> {
    if boxes.len() != doc.pages.len() {
        return Err(CropError::CountMismatch {
            boxes: boxes.len(),
            pages: doc.pages.len(),
        });
    }
    let pages = doc
        .pages
        .iter()
        .zip(boxes)
        .enumerate()
        .map(|(i, (p, b))| match b {
            Some(b) => crop_image(p, *b, i),
            None => Ok(p.clone()),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cropped = pages
        .iter()
        .zip(boxes)
        .filter(|(_, b)| b.is_some())
        .map(|(p, _)| p.clone())
        .collect();
    Ok(ManualDocument {
        cover: doc.cover.clone(),
        scene: doc.scene.clone(),
        pages,
        cropped,
    })
}
