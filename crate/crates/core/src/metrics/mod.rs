//! Reconstruction quality metrics and stable-rank instrumentation.

mod quality;
mod trace;

pub use quality::{
    occupancy_grid, occupancy_iou, occupancy_iou_with, psnr, psnr_image, si_snr, snr, ssim, ssim_gray, DB_CAP,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use trace::{record_ranks, MetricsLog, Quantity, RankEntry, RankTrace, METRICS_HEADER, RANK_HEADER};
