#include "lusview/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

namespace lusview {

void AnalyzerParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidParams, std::string(name) + " must be positive");
  };
  positive(pleura_min_contrast, "pleura_min_contrast");
  positive(aline_spacing_tol, "aline_spacing_tol");
  positive(aline_min_contrast, "aline_min_contrast");
  positive(bline_col_contrast, "bline_col_contrast");
  positive(shadow_max_ratio, "shadow_max_ratio");
  if (pleura_min_contrast <= 1.0 || aline_min_contrast <= 1.0 || bline_col_contrast <= 1.0) {
    throw Error(ErrorCode::InvalidParams, "contrast thresholds must exceed 1");
  }
  if (!(flag_confidence_theta >= 0.0 && flag_confidence_theta <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "flag_confidence_theta must lie in [0, 1]");
  }
}

void to_json(nlohmann::json& j, const AnalyzerParams& p) {
  j = {{"pleura_min_contrast", p.pleura_min_contrast}, {"aline_spacing_tol", p.aline_spacing_tol},
       {"aline_min_contrast", p.aline_min_contrast},   {"bline_col_contrast", p.bline_col_contrast},
       {"shadow_max_ratio", p.shadow_max_ratio},       {"flag_confidence_theta", p.flag_confidence_theta}};
}

AnalyzerParams analyzer_params_from_json(const nlohmann::json& j) {
  AnalyzerParams p;
  try {
    p.pleura_min_contrast = j.value("pleura_min_contrast", p.pleura_min_contrast);
    p.aline_spacing_tol = j.value("aline_spacing_tol", p.aline_spacing_tol);
    p.aline_min_contrast = j.value("aline_min_contrast", p.aline_min_contrast);
    p.bline_col_contrast = j.value("bline_col_contrast", p.bline_col_contrast);
    p.shadow_max_ratio = j.value("shadow_max_ratio", p.shadow_max_ratio);
    p.flag_confidence_theta = j.value("flag_confidence_theta", p.flag_confidence_theta);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("analyzer params: ") + e.what());
  }
  p.validate();
  return p;
}

double contrast_confidence(double contrast, double threshold) {
  return std::clamp(0.5 + 0.5 * (contrast - threshold) / (threshold - 1.0), 0.0, 1.0);
}

namespace {

struct Stats {
  double global_mean = 0;
  std::vector<double> row_mean;
};

Stats frame_stats(const Frame& f) {
  Stats s;
  s.row_mean.resize(f.height());
  double total = 0;
  for (std::uint32_t y = 0; y < f.height(); ++y) {
    double acc = 0;
    for (std::uint32_t x = 0; x < f.width(); ++x) acc += f.at(x, y);
    s.row_mean[y] = acc / f.width();
    total += acc;
  }
  s.global_mean = total / (static_cast<double>(f.width()) * f.height());
  return s;
}

std::vector<double> smooth3(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(v.size() - 1, i + 1);
    double acc = 0;
    for (std::size_t k = lo; k <= hi; ++k) acc += v[k];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid))) / 2.0;
  }
  return m;
}

int pleura_row_of(const Detection& pleura) { return pleura.bbox.y + 2; }

double band_mean(const Frame& f, int x0, int x1, int y) {
  double acc = 0;
  for (int x = x0; x <= x1; ++x) acc += f.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
  return acc / (x1 - x0 + 1);
}

}  // namespace

std::optional<Finding> detect_pleura(const Frame& frame, const AnalyzerParams& p) {
  const Stats st = frame_stats(frame);
  if (st.global_mean <= 0.0) return std::nullopt;
  const std::vector<double> prof = smooth3(st.row_mean);
  const int H = static_cast<int>(frame.height());
  const int lo = H / 8, hi = std::min(H / 2, H - 1);
  int best = lo;
  for (int y = lo; y <= hi; ++y) {
    if (prof[y] > prof[best]) best = y;
  }
  const double contrast = prof[best] / st.global_mean;
  if (contrast < p.pleura_min_contrast) return std::nullopt;

  const int y0 = std::max(0, best - 2), y1 = std::min(H - 1, best + 2);
  Finding out;
  out.detection = {ArtefactClass::Pleura, {0, y0, static_cast<int>(frame.width()), y1 - y0 + 1},
                   contrast_confidence(contrast, p.pleura_min_contrast)};
  SegMask mask(ArtefactClass::Pleura, frame.width(), frame.height());
  const double cut = 1.2 * st.global_mean;
  for (int y = y0; y <= y1; ++y) {
    for (std::uint32_t x = 0; x < frame.width(); ++x) {
      if (frame.at(x, static_cast<std::uint32_t>(y)) > cut) mask.mark(x, static_cast<std::uint32_t>(y));
    }
  }
  out.mask = std::move(mask);
  return out;
}

std::vector<Detection> detect_alines(const Frame& frame, const Detection& pleura, const AnalyzerParams& p) {
  const int H = static_cast<int>(frame.height());
  const int depth = pleura_row_of(pleura);
  std::vector<Detection> out;
  if (depth <= 0 || depth + 3 >= H) return out;

  // Row medians are insensitive to narrow vertical structures and partial-width patches.
  std::vector<double> row_median(frame.height());
  std::vector<double> row(frame.width());
  for (int y = 0; y < H; ++y) {
    for (std::uint32_t x = 0; x < frame.width(); ++x) row[x] = frame.at(x, static_cast<std::uint32_t>(y));
    row_median[y] = median(row);
  }
  const std::vector<double> prof = smooth3(row_median);
  const double baseline =
      median(std::vector<double>(prof.begin() + depth + 3, prof.end()));
  if (baseline <= 0.0) return out;

  auto at = [&](int y) { return prof[std::clamp(y, 0, H - 1)]; };
  int last = depth + 2;
  for (int k = 2;; ++k) {
    const double centre = static_cast<double>(k) * depth;
    int lo = static_cast<int>(std::floor(centre * (1.0 - p.aline_spacing_tol)));
    int hi = static_cast<int>(std::ceil(centre * (1.0 + p.aline_spacing_tol)));
    if (lo > H - 1) break;
    lo = std::max(lo, last + 3);
    hi = std::min(hi, H - 1);
    if (lo > hi) continue;
    int peak = lo;
    for (int y = lo; y <= hi; ++y) {
      if (prof[y] > prof[peak]) peak = y;
    }
    const bool local_max = prof[peak] >= at(peak - 1) && prof[peak] >= at(peak + 1) &&
                           prof[peak] >= at(peak - 2) && prof[peak] >= at(peak + 2);
    const double contrast = prof[peak] / baseline;
    if (!local_max || contrast < p.aline_min_contrast) continue;
    const int y0 = std::max(0, peak - 2), y1 = std::min(H - 1, peak + 2);
    const double conf = contrast_confidence(contrast, p.aline_min_contrast) * std::pow(0.8, k - 1);
    out.push_back({ArtefactClass::ALine, {0, y0, static_cast<int>(frame.width()), y1 - y0 + 1}, conf});
    last = peak;
  }
  return out;
}

std::vector<Finding> detect_blines_and_shadows(const Frame& frame, const Detection* pleura,
                                               const AnalyzerParams& p) {
  const int W = static_cast<int>(frame.width()), H = static_cast<int>(frame.height());
  const int y0 = pleura ? pleura_row_of(*pleura) + 3 : H / 3;
  std::vector<Finding> out;
  if (y0 >= H - 1) return out;
  const int rows = H - y0;

  std::vector<double> col_mean(W, 0.0);
  std::vector<double> row_mean(H, 0.0);
  for (int y = 0; y < H; ++y) {
    double acc = 0;
    for (int x = 0; x < W; ++x) {
      const double v = frame.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
      acc += v;
      if (y >= y0) col_mean[x] += v;
    }
    row_mean[y] = acc / W;
  }
  for (double& c : col_mean) c /= rows;
  const double ref = median(col_mean);
  if (ref < 1.0) return out;

  auto runs_of = [&](auto&& pred) {
    std::vector<std::pair<int, int>> runs;
    for (int x = 0; x < W;) {
      if (!pred(x)) {
        ++x;
        continue;
      }
      int e = x;
      while (e + 1 < W && pred(e + 1)) ++e;
      runs.emplace_back(x, e);
      x = e + 1;
    }
    return runs;
  };

  // B-lines: bright columns whose brightness persists down to the bottom edge.
  auto persistent = [&](int x) {
    const int x0 = std::max(0, x - 1), x1 = std::min(W - 1, x + 1);
    int bright = 0;
    for (int y = y0; y < H; ++y) {
      if (band_mean(frame, x0, x1, y) > 1.2 * row_mean[y]) ++bright;
    }
    return bright >= 0.8 * rows;
  };
  const auto bright_runs = runs_of([&](int x) { return col_mean[x] >= p.bline_col_contrast * ref; });
  const int top = pleura ? pleura_row_of(*pleura) : y0;
  for (const auto& [a, b] : bright_runs) {
    const int c = (a + b) / 2;
    if (!persistent(c)) continue;
    const int x0 = std::max(0, c - 2), x1 = std::min(W - 1, c + 2);
    Finding f;
    f.detection = {ArtefactClass::BLine, {x0, top, x1 - x0 + 1, H - top},
                   contrast_confidence(col_mean[c] / ref, p.bline_col_contrast)};
    SegMask mask(ArtefactClass::BLine, frame.width(), frame.height());
    for (int y = y0; y < H; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (frame.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)) > 1.2 * row_mean[y]) {
          mask.mark(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
        }
      }
    }
    f.mask = std::move(mask);
    out.push_back(std::move(f));
  }

  // Shadows: dark column bands, extended upward while the band stays dark
  // relative to the rest of its row.
  const double global_mean = std::accumulate(row_mean.begin(), row_mean.end(), 0.0) / H;
  const auto dark_runs = runs_of([&](int x) { return col_mean[x] <= p.shadow_max_ratio * ref; });
  std::vector<Finding> ribs;
  for (const auto& [a, b] : dark_runs) {
    if (b - a + 1 < 4) continue;
    const int width = b - a + 1;
    auto outside_mean = [&](int y) {
      if (width == W) return ref;
      return (row_mean[y] * W - band_mean(frame, a, b, y) * width) / (W - width);
    };
    int shadow_top = y0;
    while (shadow_top > 0 && band_mean(frame, a, b, shadow_top - 1) <= p.shadow_max_ratio * outside_mean(shadow_top - 1)) {
      --shadow_top;
    }
    double band_cols = 0;
    for (int x = a; x <= b; ++x) band_cols += col_mean[x];
    const double ratio = band_cols / width / ref;
    Finding f;
    f.detection = {ArtefactClass::Shadow, {a, shadow_top, width, H - shadow_top},
                   std::clamp(0.5 + 0.5 * (p.shadow_max_ratio - ratio) / p.shadow_max_ratio, 0.0, 1.0)};
    SegMask mask(ArtefactClass::Shadow, frame.width(), frame.height());
    for (int y = shadow_top; y < H; ++y) {
      const double cut = p.shadow_max_ratio * outside_mean(y);
      for (int x = a; x <= b; ++x) {
        if (frame.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)) <= cut) {
          mask.mark(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
        }
      }
    }
    f.mask = std::move(mask);
    out.push_back(std::move(f));

    // Rib: a bright blob whose lower edge sits within 3 px above the shadow top.
    if (shadow_top > 0 && global_mean > 0) {
      const double bright = p.pleura_min_contrast * global_mean;
      int rb = -1;
      for (int y = shadow_top - 1; y >= std::max(0, shadow_top - 4); --y) {
        if (band_mean(frame, a, b, y) >= bright) {
          rb = y;
          break;
        }
      }
      if (rb >= 0) {
        int rt = rb;
        double peak = band_mean(frame, a, b, rb);
        while (rt > 0 && band_mean(frame, a, b, rt - 1) >= bright) {
          --rt;
          peak = std::max(peak, band_mean(frame, a, b, rt));
        }
        Finding rib;
        rib.detection = {ArtefactClass::Rib, {a, rt, width, rb - rt + 1},
                         contrast_confidence(peak / global_mean, p.pleura_min_contrast)};
        ribs.push_back(std::move(rib));
      }
    }
  }
  for (auto& r : ribs) out.push_back(std::move(r));
  return out;
}

std::vector<Finding> detect_consolidation(const Frame& frame, const Detection* pleura, const AnalyzerParams& p,
                                          std::span<const BBox> exclude) {
  std::vector<Finding> out;
  if (!pleura) return out;
  const int W = static_cast<int>(frame.width()), H = static_cast<int>(frame.height());
  const int y0 = pleura_row_of(*pleura) + 3;
  if (y0 >= H) return out;

  // Pleural reference: mean of the bright pixels in the pleural band.
  const Stats st = frame_stats(frame);
  double acc = 0;
  std::size_t cnt = 0;
  for (int y = pleura->bbox.y; y < pleura->bbox.bottom(); ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = frame.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
      if (v > 1.2 * st.global_mean) {
        acc += v;
        ++cnt;
      }
    }
  }
  if (cnt == 0) return out;
  const double pleural = acc / static_cast<double>(cnt);
  const double lo = 0.4 * pleural, hi = 0.75 * pleural;

  const std::size_t N = std::size_t(W) * H;
  std::vector<std::uint8_t> excluded(N, 0);
  for (const BBox& b : exclude) {
    for (int y = std::max(0, b.y); y < std::min(H, b.bottom()); ++y) {
      for (int x = std::max(0, b.x); x < std::min(W, b.right()); ++x) excluded[std::size_t(y) * W + x] = 1;
    }
  }
  std::vector<std::uint8_t> cand(N, 0);
  for (int y = y0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = std::size_t(y) * W + x;
      const double v = frame.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
      cand[i] = !excluded[i] && v >= lo && v <= hi;
    }
  }

  // 4-connected labelling, then union-find joins across short excluded gaps.
  std::vector<int> label(N, -1);
  int next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < N; ++s) {
    if (!cand[s] || label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
      const std::size_t nb[4] = {x > 0 ? i - 1 : N, x + 1 < W ? i + 1 : N, y > 0 ? i - W : N,
                                 y + 1 < H ? i + W : N};
      for (std::size_t j : nb) {
        if (j < N && cand[j] && label[j] < 0) {
          label[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  std::vector<int> parent(static_cast<std::size_t>(next));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  constexpr int kMaxGap = 7;
  auto bridge = [&](std::size_t first, std::size_t step, int len) {
    // walks a line; joins labelled pixels separated only by excluded pixels
    int prev = -1, gap = 0;
    bool in_gap = false;
    for (int k = 0; k < len; ++k) {
      const std::size_t i = first + step * static_cast<std::size_t>(k);
      if (label[i] >= 0) {
        if (in_gap && prev >= 0 && gap <= kMaxGap) parent[find(label[i])] = find(prev);
        prev = label[i];
        in_gap = false;
        gap = 0;
      } else if (excluded[i] && prev >= 0) {
        in_gap = true;
        ++gap;
      } else {
        prev = -1;
        in_gap = false;
        gap = 0;
      }
    }
  };
  if (!exclude.empty() && next > 1) {
    for (int x = 0; x < W; ++x) bridge(static_cast<std::size_t>(x), static_cast<std::size_t>(W), H);
    for (int y = 0; y < H; ++y) bridge(std::size_t(y) * W, 1, W);
  }

  struct Blob {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    std::size_t area = 0;
  };
  std::map<int, Blob> blobs;
  for (std::size_t i = 0; i < N; ++i) {
    if (label[i] < 0) continue;
    Blob& b = blobs[find(label[i])];
    const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
    b.x0 = std::min(b.x0, x);
    b.x1 = std::max(b.x1, x);
    b.y0 = std::min(b.y0, y);
    b.y1 = std::max(b.y1, y);
    ++b.area;
  }
  const double frame_area = static_cast<double>(N);
  for (const auto& [root, b] : blobs) {
    if (static_cast<double>(b.area) < 0.01 * frame_area) continue;
    Finding f;
    f.detection = {ArtefactClass::Consolidation, {b.x0, b.y0, b.x1 - b.x0 + 1, b.y1 - b.y0 + 1},
                   std::min(1.0, static_cast<double>(b.area) / (0.05 * frame_area))};
    SegMask mask(ArtefactClass::Consolidation, frame.width(), frame.height());
    for (std::size_t i = 0; i < N; ++i) {
      if (label[i] >= 0 && find(label[i]) == root) mask.bits[i] = 1;
    }
    f.mask = std::move(mask);
    out.push_back(std::move(f));
  }
  return out;
}

bool flag_frame(std::span<const Detection> detections, double theta) {
  return std::any_of(detections.begin(), detections.end(), [theta](const Detection& d) {
    return (d.cls == ArtefactClass::BLine || d.cls == ArtefactClass::Consolidation) && d.confidence >= theta;
  });
}

namespace {

void merge_mask(std::vector<SegMask>& masks, const SegMask& m) {
  for (auto& existing : masks) {
    if (existing.cls == m.cls) {
      for (std::size_t i = 0; i < m.bits.size(); ++i) existing.bits[i] |= m.bits[i];
      return;
    }
  }
  masks.push_back(m);
}

}  // namespace

FrameAnnotation analyze_frame(const Frame& frame, const AnalyzerParams& p) {
  FrameAnnotation ann;
  ann.frame_index = frame.index();
  const std::optional<Finding> pleura = detect_pleura(frame, p);
  const Detection* pleura_det = pleura ? &pleura->detection : nullptr;
  std::vector<BBox> explained;
  if (pleura) {
    ann.detections.push_back(pleura->detection);
    merge_mask(ann.masks, *pleura->mask);
    for (const Detection& a : detect_alines(frame, pleura->detection, p)) {
      ann.detections.push_back(a);
      explained.push_back(a.bbox);
    }
  }
  for (const Finding& f : detect_blines_and_shadows(frame, pleura_det, p)) {
    ann.detections.push_back(f.detection);
    if (f.mask) merge_mask(ann.masks, *f.mask);
    if (f.detection.cls == ArtefactClass::BLine) explained.push_back(f.detection.bbox);
  }
  for (const Finding& f : detect_consolidation(frame, pleura_det, p, explained)) {
    ann.detections.push_back(f.detection);
    if (f.mask) merge_mask(ann.masks, *f.mask);
  }
  ann.abnormal = flag_frame(ann.detections, p.flag_confidence_theta);
  return ann;
}

void validate_annotation(const FrameAnnotation& ann, std::uint32_t width, std::uint32_t height, double theta) {
  for (const Detection& d : ann.detections) validate_detection(d, width, height);
  bool seen[6] = {};
  for (const SegMask& m : ann.masks) {
    if (m.width != width || m.height != height || m.bits.size() != std::size_t{width} * height) {
      throw Error(ErrorCode::ValidationError, "mask geometry differs from frame");
    }
    auto& s = seen[static_cast<int>(m.cls)];
    if (s) throw Error(ErrorCode::ValidationError, "more than one mask for " + std::string(to_string(m.cls)));
    s = true;
    for (auto b : m.bits) {
      if (b > 1) throw Error(ErrorCode::ValidationError, "mask is not binary");
    }
  }
  if (ann.abnormal != flag_frame(ann.detections, theta)) {
    throw Error(ErrorCode::ValidationError, "abnormal flag disagrees with the flagging rule");
  }
}

namespace {

class ProfileAnalyzer final : public Analyzer {
 public:
  std::string name() const override { return kDefaultAnalyzer; }
  FrameAnnotation analyze_frame(const Frame& frame, const AnalyzerParams& p) const override {
    return lusview::analyze_frame(frame, p);
  }
};

struct Registry {
  std::mutex mu;
  std::map<std::string, AnalyzerFactory> factories{
      {kDefaultAnalyzer, [] { return std::make_unique<ProfileAnalyzer>(); }}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_analyzer(const std::string& name, AnalyzerFactory factory) {
  std::lock_guard lock(registry().mu);
  registry().factories[name] = std::move(factory);
}

std::unique_ptr<Analyzer> make_analyzer(const std::string& name) {
  AnalyzerFactory factory;
  {
    // Factories run unlocked so they may themselves construct other plugins.
    std::lock_guard lock(registry().mu);
    auto it = registry().factories.find(name);
    if (it == registry().factories.end()) throw Error(ErrorCode::BadConfig, "unknown analyzer '" + name + "'");
    factory = it->second;
  }
  return factory();
}

std::vector<std::string> analyzer_names() {
  std::lock_guard lock(registry().mu);
  std::vector<std::string> names;
  for (const auto& [k, v] : registry().factories) names.push_back(k);
  return names;
}

}  // namespace lusview
