#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lusview/core.hpp"

namespace lusview {

inline constexpr std::uint32_t kFeatureSide = 32;
inline constexpr std::size_t kFeatureDim = kFeatureSide * kFeatureSide;

struct FeatureVector {
  std::vector<double> values;
};

/// Zero-valued bounds mean "derive from N": k_max = max(8, ceil(0.15 N)), k_min = min(N, 4).
struct SummarizerParams {
  double tau = 0.12;
  std::uint32_t k_max = 0;
  std::uint32_t k_min = 0;

  /// Fills derived bounds for a clip of n frames and validates. Throws InvalidParams.
  SummarizerParams resolved(std::size_t n) const;
};

void to_json(nlohmann::json& j, const SummarizerParams& p);
SummarizerParams summarizer_params_from_json(const nlohmann::json& j);

struct SummaryResult {
  std::vector<std::uint32_t> keyframe_indices;  // ascending
  std::vector<std::uint32_t> selection_order;   // order frames were picked in
  std::vector<double> novelty;  // aligned with keyframe_indices; may be empty for plugins
  double coverage_radius = 0.0;
  SummarizerParams params_used;
};

void to_json(nlohmann::json& j, const SummaryResult& s);
SummaryResult summary_from_json(const nlohmann::json& j);

/// Bilinear resample to 32x32 on pixel centres: source coordinate
/// (i + 0.5) * src / 32 - 0.5 clamped to [0, src - 1]; divided by 255.
FeatureVector extract_features(const Frame& frame);

/// 1 - cosine similarity of the mean-centred vectors, in [0, 2]. 0 when both
/// centred vectors vanish, 1 when exactly one does. Throws DimensionMismatch.
double distance(const FeatureVector& a, const FeatureVector& b);

/// Farthest-point greedy selection over precomputed features.
SummaryResult summarize_features(std::span<const FeatureVector> features, const SummarizerParams& params);

SummaryResult summarize(const FrameSequence& seq, const SummarizerParams& params);

/// min(n, pool) indices drawn without replacement with Xorshift64Star(seed), sorted.
std::vector<std::uint32_t> sample_keyframes(const SummaryResult& summary, std::uint32_t n,
                                            std::uint64_t seed);

/// Type invariants of SummaryResult for a clip of n frames. Throws ValidationError.
void validate_summary(const SummaryResult& s, std::size_t n);

/// Plugin boundary. A replacement model (e.g. a learned summarizer) implements this.
class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string name() const = 0;
  virtual SummaryResult summarize(const FrameSequence& seq, const SummarizerParams& params) const = 0;
};

inline constexpr const char* kDefaultSummarizer = "farthest-point";

using SummarizerFactory = std::function<std::unique_ptr<Summarizer>()>;

/// Adds or replaces a named implementation in the process-wide registry.
void register_summarizer(const std::string& name, SummarizerFactory factory);

/// Throws BadConfig for unknown names.
std::unique_ptr<Summarizer> make_summarizer(const std::string& name);
std::vector<std::string> summarizer_names();

}  // namespace lusview
