#include "chatdit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

void check_indices(const PanelLayout& layout, std::span<const int> indices, const char* what) {
  std::set<int> seen;
  for (int i : indices) {
    if (i < 0 || i >= layout.panel_count) {
      throw InputError(std::string(what) + " panel index " + std::to_string(i) + " out of range");
    }
    if (!seen.insert(i).second) {
      throw InputError(std::string(what) + " panel index " + std::to_string(i) + " repeated");
    }
  }
}

// Contribution weights of source samples to each destination sample along
// one axis.
struct Taps {
  int first = 0;
  std::vector<float> weights;
};

std::vector<Taps> make_taps(int src, int dst) {
  const double scale = static_cast<double>(dst) / src;
  const double support = scale < 1.0 ? 1.0 / scale : 1.0;
  std::vector<Taps> taps(static_cast<std::size_t>(dst));
  for (int d = 0; d < dst; ++d) {
    const double center = (d + 0.5) / scale - 0.5;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)) + 1);
    const int hi = std::min(src - 1, static_cast<int>(std::ceil(center + support)) - 1);
    Taps& t = taps[static_cast<std::size_t>(d)];
    double total = 0.0;
    std::vector<double> w;
    for (int s = lo; s <= hi; ++s) {
      const double x = std::abs(s - center) / support;
      const double v = std::max(0.0, 1.0 - x);
      w.push_back(v);
      total += v;
    }
    if (total <= 0.0) {
      const int nearest = std::clamp(static_cast<int>(std::lround(center)), 0, src - 1);
      t.first = nearest;
      t.weights = {1.0f};
      continue;
    }
    t.first = lo;
    for (double v : w) t.weights.push_back(static_cast<float>(v / total));
  }
  return taps;
}

}  // namespace

std::pair<int, int> grid_for(int panel_count) {
  switch (panel_count) {
    case 1: return {1, 1};
    case 2: return {1, 2};
    case 3: return {1, 3};
    case 4: return {2, 2};
    case 5:
    case 6: return {2, 3};
    default:
      throw InputError("layouts hold 1.." + std::to_string(kMaxLayoutPanels) + " panels, got " +
                       std::to_string(panel_count));
  }
}

PanelLayout layout_for(int panel_count, long long area_budget, int aspect_w, int aspect_h) {
  const auto [rows, cols] = grid_for(panel_count);
  if (aspect_w < 1 || aspect_h < 1) throw ConfigError("aspect ratio must be positive");
  const long long cells = static_cast<long long>(rows) * cols;
  const long long q = kPanelQuantum;
  auto width_for = [&](long long h) { return h * aspect_w / aspect_h / q * q; };

  // Upper bound on the panel height from the continuous solution, then walk
  // down one quantum at a time until the grid fits.
  const double ideal =
      std::sqrt(static_cast<double>(area_budget) / cells * aspect_h / aspect_w);
  long long h = (static_cast<long long>(ideal) / q + 1) * q;
  while (h >= q && (width_for(h) < q || cells * width_for(h) * h > area_budget)) h -= q;
  if (h < q) {
    throw ConfigError("area budget " + std::to_string(area_budget) + " cannot hold " +
                      std::to_string(panel_count) + " panels of at least 16x16");
  }

  PanelLayout layout;
  layout.rows = rows;
  layout.cols = cols;
  layout.panel_count = panel_count;
  layout.panel_height = static_cast<int>(h);
  layout.panel_width = static_cast<int>(width_for(h));
  for (int k = 0; k < panel_count; ++k) {
    layout.panel_rects.push_back(
        {(k % cols) * layout.panel_width, (k / cols) * layout.panel_height, layout.panel_width,
         layout.panel_height});
  }
  return layout;
}

Image resize(const Image& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) throw InputError("cannot resize an empty image");
  if (src.width == width && src.height == height) return src;
  const auto xtaps = make_taps(src.width, width);
  const auto ytaps = make_taps(src.height, height);

  // Horizontal pass into floats, then vertical pass with rounding.
  std::vector<float> tmp(static_cast<std::size_t>(width) * src.height * 3);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Taps& t = xtaps[static_cast<std::size_t>(x)];
      float acc[3] = {0, 0, 0};
      for (std::size_t i = 0; i < t.weights.size(); ++i) {
        const std::uint8_t* p = src.at(t.first + static_cast<int>(i), y);
        for (int c = 0; c < 3; ++c) acc[c] += t.weights[i] * p[c];
      }
      float* out = &tmp[(static_cast<std::size_t>(y) * width + x) * 3];
      for (int c = 0; c < 3; ++c) out[c] = acc[c];
    }
  }
  Image dst(width, height);
  for (int y = 0; y < height; ++y) {
    const Taps& t = ytaps[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      float acc[3] = {0, 0, 0};
      for (std::size_t i = 0; i < t.weights.size(); ++i) {
        const float* p =
            &tmp[(static_cast<std::size_t>(t.first + static_cast<int>(i)) * width + x) * 3];
        for (int c = 0; c < 3; ++c) acc[c] += t.weights[i] * p[c];
      }
      std::uint8_t* out = dst.at(x, y);
      for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c]), 0L, 255L));
      }
    }
  }
  return dst;
}

Image letterbox(const Image& src, int width, int height) {
  if (src.empty()) throw InputError("cannot letterbox an empty image");
  long long fit_w = 0;
  long long fit_h = 0;
  if (static_cast<long long>(width) * src.height <= static_cast<long long>(height) * src.width) {
    fit_w = width;
    fit_h = (static_cast<long long>(src.height) * width * 2 + src.width) / (2LL * src.width);
  } else {
    fit_h = height;
    fit_w = (static_cast<long long>(src.width) * height * 2 + src.height) / (2LL * src.height);
  }
  fit_w = std::clamp<long long>(fit_w, 1, width);
  fit_h = std::clamp<long long>(fit_h, 1, height);
  const Image scaled = resize(src, static_cast<int>(fit_w), static_cast<int>(fit_h));
  Image out(width, height, kFillGray);
  const int ox = (width - scaled.width) / 2;
  const int oy = (height - scaled.height) / 2;
  for (int y = 0; y < scaled.height; ++y) {
    std::copy_n(scaled.at(0, y), static_cast<std::size_t>(scaled.width) * 3, out.at(ox, oy + y));
  }
  return out;
}

Image crop(const Image& src, const Rect& rect) {
  if (rect.x < 0 || rect.y < 0 || rect.width <= 0 || rect.height <= 0 ||
      rect.x + rect.width > src.width || rect.y + rect.height > src.height) {
    throw InputError("crop rectangle outside the image");
  }
  Image out(rect.width, rect.height);
  for (int y = 0; y < rect.height; ++y) {
    std::copy_n(src.at(rect.x, rect.y + y), static_cast<std::size_t>(rect.width) * 3, out.at(0, y));
  }
  return out;
}

Image merge(const PanelLayout& layout, std::span<const Image> references,
            std::span<const int> reference_panels) {
  if (references.size() != reference_panels.size()) {
    throw InputError("merge got " + std::to_string(references.size()) + " images for " +
                     std::to_string(reference_panels.size()) + " panels");
  }
  check_indices(layout, reference_panels, "reference");
  Image canvas(layout.canvas_width(), layout.canvas_height(), kFillGray);
  for (std::size_t i = 0; i < references.size(); ++i) {
    const Rect& r = layout.panel_rects[static_cast<std::size_t>(reference_panels[i])];
    const Image fitted = letterbox(references[i], r.width, r.height);
    for (int y = 0; y < r.height; ++y) {
      std::copy_n(fitted.at(0, y), static_cast<std::size_t>(r.width) * 3, canvas.at(r.x, r.y + y));
    }
  }
  return canvas;
}

GrayImage mask_for(const PanelLayout& layout, std::span<const int> target_panels,
                   std::span<const int> reference_panels) {
  check_indices(layout, target_panels, "target");
  for (int t : target_panels) {
    if (std::find(reference_panels.begin(), reference_panels.end(), t) != reference_panels.end()) {
      throw InputError("panel " + std::to_string(t) + " is both reference and target");
    }
  }
  GrayImage mask(layout.canvas_width(), layout.canvas_height(), kMaskKeep);
  for (int t : target_panels) {
    const Rect& r = layout.panel_rects[static_cast<std::size_t>(t)];
    for (int y = r.y; y < r.y + r.height; ++y) {
      std::fill_n(&mask.at(r.x, y), r.width, kMaskGenerate);
    }
  }
  return mask;
}

std::vector<Image> split(const PanelLayout& layout, const Image& canvas,
                         std::span<const int> panels) {
  if (canvas.width != layout.canvas_width() || canvas.height != layout.canvas_height()) {
    throw InputError("canvas is " + std::to_string(canvas.width) + "x" +
                     std::to_string(canvas.height) + ", layout expects " +
                     std::to_string(layout.canvas_width()) + "x" +
                     std::to_string(layout.canvas_height()));
  }
  std::vector<Image> out;
  out.reserve(panels.size());
  for (int p : panels) {
    if (p < 0 || p >= layout.panel_count) {
      throw InputError("panel index " + std::to_string(p) + " out of range");
    }
    out.push_back(crop(canvas, layout.panel_rects[static_cast<std::size_t>(p)]));
  }
  return out;
}

}  // namespace chatdit
