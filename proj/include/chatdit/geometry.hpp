#pragma once

// Multi-panel canvas geometry. A canvas is a rows x cols grid of equal
// panels; references are pasted into their panels, targets are masked for
// generation, and generated canvases are cropped back into panels.

#include <span>
#include <utility>
#include <vector>

#include "chatdit/image.hpp"
#include "chatdit/model.hpp"

namespace chatdit {

inline constexpr int kMaxLayoutPanels = 6;
inline constexpr int kPanelQuantum = 16;
inline constexpr long long kDefaultAreaBudget = 2048LL * 2048LL;
inline constexpr std::uint8_t kFillGray = 128;
inline constexpr std::uint8_t kMaskGenerate = 255;
inline constexpr std::uint8_t kMaskKeep = 0;

/// (rows, cols) for K panels: 1→1x1, 2→1x2, 3→1x3, 4→2x2, 5..6→2x3.
std::pair<int, int> grid_for(int panel_count);

/// Largest panel whose sides are multiples of 16, whose aspect follows
/// aspect_w:aspect_h, and whose full grid fits `area_budget` pixels.
PanelLayout layout_for(int panel_count, long long area_budget = kDefaultAreaBudget,
                       int aspect_w = 1, int aspect_h = 1);

/// Separable triangle-filter resample.
Image resize(const Image& src, int width, int height);

/// Aspect-preserving fit into width x height, centered on mid-gray.
Image letterbox(const Image& src, int width, int height);

Image crop(const Image& src, const Rect& rect);

/// Letterboxes each reference into its panel; every other panel is gray.
Image merge(const PanelLayout& layout, std::span<const Image> references,
            std::span<const int> reference_panels);

/// 255 on target panels, 0 elsewhere. Targets must not overlap
/// `reference_panels`.
GrayImage mask_for(const PanelLayout& layout, std::span<const int> target_panels,
                   std::span<const int> reference_panels = {});

/// Crops the requested panels in the given order. No resampling.
std::vector<Image> split(const PanelLayout& layout, const Image& canvas,
                         std::span<const int> panels);

}  // namespace chatdit
