#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/matrix.hpp"

namespace msa::seq {

using num::Matrix;

enum class Modality { text = 0, audio = 1, video = 2 };

const char* modality_name(Modality m);

enum class Split { train, valid, test };

Split split_from_string(const std::string& s);
const char* split_name(Split s);

// One modality's time-stamped feature stream for a segment.
struct FeatureSequence {
  Modality modality = Modality::text;
  std::vector<std::pair<double, double>> timestamps;  // (start_s, end_s)
  Matrix features;                                    // rows = timestamps.size()

  std::size_t length() const { return timestamps.size(); }
  std::size_t dim() const { return features.cols(); }
  void validate(const std::string& segment_id, double duration_s) const;
};

struct Segment {
  std::string id;
  int label = 0;  // -1 | 0 | +1
  double duration_s = 0.0;
  Split split = Split::train;
  FeatureSequence text, audio, video;

  const FeatureSequence& modality(Modality m) const;
  FeatureSequence& modality(Modality m);
  void validate() const;
};

struct Corpus {
  std::vector<Segment> segments;
  std::array<std::size_t, 3> dims = {0, 0, 0};  // text, audio, video

  std::size_t dim(Modality m) const { return dims[static_cast<std::size_t>(m)]; }
  void validate() const;
  // True when every segment's three modalities share one row count.
  bool is_aligned() const;
};

Corpus load_corpus(const std::string& path);
Corpus parse_corpus(const std::string& text, const std::string& origin);
void save_corpus(const Corpus& corpus, const std::string& path);
std::string corpus_to_string(const Corpus& corpus);

struct CorpusStats {
  std::size_t total = 0;
  std::size_t positive = 0, negative = 0, neutral = 0;
  std::optional<double> avg_duration_s;
  std::array<std::size_t, 3> dims = {0, 0, 0};
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_to_json(const CorpusStats& s);

// Majority vote over exactly 5 polarity labels; ties collapse to neutral.
// Returns (label, fraction of annotators agreeing with it).
std::pair<int, double> aggregate_annotations(const std::vector<int>& labels);

enum class SynthMode { unimodal, crossmodal };

struct SynthConfig {
  SynthMode mode = SynthMode::crossmodal;
  std::size_t segments = 300;
  std::array<std::size_t, 3> dims = {16, 12, 10};  // text, audio, video
  double noise = 0.1;
  double amplitude = 2.0;  // planted signal strength
  std::size_t words_min = 6, words_max = 12;
  double word_duration_s = 0.5;
  Modality planted = Modality::text;  // unimodal mode only
  double train_frac = 0.70, valid_frac = 0.15;

  void validate() const;
};

// Deterministic given (config, seed). Audio runs ~10x denser than text,
// video ~5x denser, so downstream pivot alignment is always exercised.
Corpus synth_generate(const SynthConfig& config, std::uint64_t seed);

}  // namespace msa::seq
