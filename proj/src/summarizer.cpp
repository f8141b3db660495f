#include "lusview/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "lusview/rng.hpp"

namespace lusview {

SummarizerParams SummarizerParams::resolved(std::size_t n) const {
  if (n == 0) throw Error(ErrorCode::InvalidParams, "summarizer needs at least one frame");
  SummarizerParams p = *this;
  if (p.k_max == 0) {
    p.k_max = std::max<std::uint32_t>(8, static_cast<std::uint32_t>(std::ceil(0.15 * static_cast<double>(n))));
  }
  if (p.k_min == 0) p.k_min = static_cast<std::uint32_t>(std::min<std::size_t>(n, 4));
  if (!(p.tau > 0.0 && p.tau < 1.0)) throw Error(ErrorCode::InvalidParams, "tau must lie in (0, 1)");
  if (p.k_min < 1 || p.k_min > p.k_max) throw Error(ErrorCode::InvalidParams, "need 1 <= k_min <= k_max");
  return p;
}

void to_json(nlohmann::json& j, const SummarizerParams& p) {
  j = {{"tau", p.tau}, {"k_max", p.k_max}, {"k_min", p.k_min}};
}

SummarizerParams summarizer_params_from_json(const nlohmann::json& j) {
  SummarizerParams p;
  try {
    p.tau = j.value("tau", p.tau);
    p.k_max = j.value("k_max", p.k_max);
    p.k_min = j.value("k_min", p.k_min);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("summarizer params: ") + e.what());
  }
  return p;
}

void to_json(nlohmann::json& j, const SummaryResult& s) {
  j = {{"keyframe_indices", s.keyframe_indices},
       {"selection_order", s.selection_order},
       {"novelty", s.novelty},
       {"coverage_radius", s.coverage_radius},
       {"params_used", s.params_used}};
}

SummaryResult summary_from_json(const nlohmann::json& j) {
  SummaryResult s;
  try {
    s.keyframe_indices = j.at("keyframe_indices").get<std::vector<std::uint32_t>>();
    s.selection_order = j.value("selection_order", std::vector<std::uint32_t>{});
    s.novelty = j.value("novelty", std::vector<double>{});
    s.coverage_radius = j.value("coverage_radius", 0.0);
    if (j.contains("params_used")) s.params_used = summarizer_params_from_json(j["params_used"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("summary record: ") + e.what());
  }
  return s;
}

namespace {

struct Tap {
  std::uint32_t lo, hi;
  double frac;  // weight of hi
};

std::vector<Tap> taps(std::uint32_t src) {
  std::vector<Tap> out(kFeatureSide);
  const double scale = static_cast<double>(src) / kFeatureSide;
  for (std::uint32_t i = 0; i < kFeatureSide; ++i) {
    double c = (i + 0.5) * scale - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::uint32_t>(std::floor(c));
    const std::uint32_t hi = std::min(lo + 1, src - 1);
    out[i] = {lo, hi, c - lo};
  }
  return out;
}

}  // namespace

FeatureVector extract_features(const Frame& frame) {
  const auto tx = taps(frame.width());
  const auto ty = taps(frame.height());
  FeatureVector fv;
  fv.values.resize(kFeatureDim);
  for (std::uint32_t j = 0; j < kFeatureSide; ++j) {
    for (std::uint32_t i = 0; i < kFeatureSide; ++i) {
      const double top = (1 - tx[i].frac) * frame.at(tx[i].lo, ty[j].lo) + tx[i].frac * frame.at(tx[i].hi, ty[j].lo);
      const double bot = (1 - tx[i].frac) * frame.at(tx[i].lo, ty[j].hi) + tx[i].frac * frame.at(tx[i].hi, ty[j].hi);
      fv.values[std::size_t{j} * kFeatureSide + i] = ((1 - ty[j].frac) * top + ty[j].frac * bot) / 255.0;
    }
  }
  return fv;
}

double distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature dimensions differ: " + std::to_string(a.values.size()) +
                                                  " vs " + std::to_string(b.values.size()));
  }
  const std::size_t n = a.values.size();
  if (n == 0) return 0.0;
  const double ma = std::accumulate(a.values.begin(), a.values.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.values.begin(), b.values.end(), 0.0) / static_cast<double>(n);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.values[i] - ma, y = b.values[i] - mb;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  constexpr double kEps = 1e-18;
  const bool za = na <= kEps, zb = nb <= kEps;
  if (za && zb) return 0.0;
  if (za || zb) return 1.0;
  const double cos = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return 1.0 - cos;
}

SummaryResult summarize_features(std::span<const FeatureVector> features, const SummarizerParams& params) {
  const std::size_t n = features.size();
  const SummarizerParams p = params.resolved(n);
  SummaryResult out;
  out.params_used = p;

  std::vector<bool> selected(n, false);
  std::vector<double> min_dist(n, 0.0);
  std::vector<double> novelty_by_frame(n, 0.0);
  selected[0] = true;
  out.selection_order.push_back(0);
  novelty_by_frame[0] = 2.0;  // nothing selected yet: maximal novelty
  for (std::size_t i = 1; i < n; ++i) min_dist[i] = distance(features[i], features[0]);

  double radius = 0.0;
  while (true) {
    if (out.selection_order.size() == n) {
      radius = 0.0;
      break;
    }
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected[i] && min_dist[i] > best_d) {
        best = i;
        best_d = min_dist[i];
      }
    }
    radius = best_d;
    const std::size_t count = out.selection_order.size();
    if (count >= p.k_min && (best_d < p.tau || count >= p.k_max)) break;
    selected[best] = true;
    novelty_by_frame[best] = best_d;
    out.selection_order.push_back(static_cast<std::uint32_t>(best));
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected[i]) min_dist[i] = std::min(min_dist[i], distance(features[i], features[best]));
    }
  }
  out.coverage_radius = radius;
  out.keyframe_indices = out.selection_order;
  std::sort(out.keyframe_indices.begin(), out.keyframe_indices.end());
  for (auto idx : out.keyframe_indices) out.novelty.push_back(novelty_by_frame[idx]);
  return out;
}

SummaryResult summarize(const FrameSequence& seq, const SummarizerParams& params) {
  std::vector<FeatureVector> features;
  features.reserve(seq.size());
  for (const Frame& f : seq.frames()) features.push_back(extract_features(f));
  return summarize_features(features, params);
}

std::vector<std::uint32_t> sample_keyframes(const SummaryResult& summary, std::uint32_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> pool = summary.keyframe_indices;
  const std::size_t take = std::min<std::size_t>(n, pool.size());
  Xorshift64Star rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void validate_summary(const SummaryResult& s, std::size_t n) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ValidationError, "summary: " + m); };
  if (s.keyframe_indices.empty()) fail("no keyframes");
  for (std::size_t i = 0; i < s.keyframe_indices.size(); ++i) {
    if (s.keyframe_indices[i] >= n) fail("keyframe index " + std::to_string(s.keyframe_indices[i]) + " out of range");
    if (i > 0 && s.keyframe_indices[i] <= s.keyframe_indices[i - 1]) fail("indices not strictly increasing");
  }
  if (!s.selection_order.empty()) {
    if (s.selection_order.front() != 0) fail("first selected frame must be index 0");
    auto sorted = s.selection_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != s.keyframe_indices) fail("selection order disagrees with keyframe set");
  } else if (s.keyframe_indices.front() != 0) {
    fail("frame 0 must be selected");
  }
  if (!s.novelty.empty() && s.novelty.size() != s.keyframe_indices.size()) fail("novelty length mismatch");
}

namespace {

class FarthestPointSummarizer final : public Summarizer {
 public:
  std::string name() const override { return kDefaultSummarizer; }
  SummaryResult summarize(const FrameSequence& seq, const SummarizerParams& params) const override {
    return lusview::summarize(seq, params);
  }
};

struct Registry {
  std::mutex mu;
  std::map<std::string, SummarizerFactory> factories{
      {kDefaultSummarizer, [] { return std::make_unique<FarthestPointSummarizer>(); }}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_summarizer(const std::string& name, SummarizerFactory factory) {
  std::lock_guard lock(registry().mu);
  registry().factories[name] = std::move(factory);
}

std::unique_ptr<Summarizer> make_summarizer(const std::string& name) {
  SummarizerFactory factory;
  {
    // Factories run unlocked so they may themselves construct other plugins.
    std::lock_guard lock(registry().mu);
    auto it = registry().factories.find(name);
    if (it == registry().factories.end()) throw Error(ErrorCode::BadConfig, "unknown summarizer '" + name + "'");
    factory = it->second;
  }
  return factory();
}

std::vector<std::string> summarizer_names() {
  std::lock_guard lock(registry().mu);
  std::vector<std::string> names;
  for (const auto& [k, v] : registry().factories) names.push_back(k);
  return names;
}

}  // namespace lusview
